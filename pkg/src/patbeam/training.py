"""Beam-training simulation: pilot reception, combining, detection and the
Monte Carlo estimate of the beam-alignment error probability.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_generator, check_complex_array, check_positive_int
from .model import (
    ArrayConfig,
    ChannelConfig,
    complex_normal,
    dft_codebook,
    optimal_beam_index,
    sample_channel,
)
from .patterns import PatternPair

WILSON_Z = 1.959963984540054


def snr_to_noise_variance(snr_db):
    """Per-pilot noise variance for a unit LoS gain: ``10 ** (-snr_db / 10)``.

    ``snr_db = inf`` gives a noise-free link.
    """
    return float(10.0 ** (-float(snr_db) / 10.0))


def receive_exhaustive(h, codebook, sigma2, rng):
    """Pilots of a full DFT sweep, ``D^H h + v``."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    codebook = check_complex_array(codebook, "codebook", ndim=2)
    h = check_complex_array(h, "h", ndim=1, shape=(codebook.shape[0],))
    rng = as_generator(rng)
    return codebook.conj().T @ h + complex_normal(rng, codebook.shape[1], sigma2)


def receive_probe(h, pair, sigma2, rng):
    """Pilots received through the probe pattern, ``B^H h + z``."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    h = check_complex_array(h, "h", ndim=1, shape=(pair.n,))
    rng = as_generator(rng)
    return pair.probe.conj().T @ h + complex_normal(rng, pair.m, sigma2)


def combine(pair, r):
    """Expand ``M`` pilots into ``N`` beam statistics, ``Bc r``."""
    r = check_complex_array(r, "r", shape=(pair.m,) + (None,) * (np.ndim(r) - 1))
    return pair.combining @ r


def detect(y):
    """Index of the largest ``|y_n|^2``; ties go to the smallest index."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("cannot detect a beam from an empty vector")
    return int(np.argmax(np.abs(y) ** 2))


def omp_dictionary(pair, codebook=None):
    D = dft_codebook(pair.n) if codebook is None else codebook
    return pair.probe.conj().T @ D


def _omp(r, A, norms, iterations):
    support = []
    coef = np.zeros(0, dtype=complex)
    residual = r
    safe = np.where(norms > 0, norms, np.inf)
    for _ in range(iterations):
        corr = np.abs(A.conj().T @ residual) / safe
        corr[support] = -1.0
        k = int(np.argmax(corr))
        trial = support + [k]
        sol, _, rank, _ = np.linalg.lstsq(A[:, trial], r, rcond=None)
        if rank < len(trial):
            break
        support, coef = trial, sol
        residual = r - A[:, support] @ coef
    if not support:
        raise ValueError("OMP could not select any atom")
    return support[int(np.argmax(np.abs(coef)))]


def omp_detect(r, pair, codebook=None, iterations=1, dictionary=None):
    """Beam decision from orthogonal matching pursuit on ``A = B^H D``.

    Atoms are picked by correlation with the residual after normalizing
    the columns of ``A``; coefficients are least-squares fits on the
    unnormalized columns. The returned beam is the support atom with the
    largest final coefficient. A rank-deficient support ends the pursuit
    early without the offending atom.
    """
    iterations = check_positive_int(iterations, "iterations")
    if iterations > pair.m:
        raise ValueError(f"iterations must be <= M={pair.m}")
    r = check_complex_array(r, "r", ndim=1, shape=(pair.m,))
    A = omp_dictionary(pair, codebook) if dictionary is None else dictionary
    return _omp(r, A, np.linalg.norm(A, axis=0), iterations)


def wilson_halfwidth(errors, trials, z=WILSON_Z):
    """Half-width of the Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return float("nan")
    p = errors / trials
    denom = 1.0 + z * z / trials
    return float(z / denom * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials**2)))


@dataclass(frozen=True, eq=False)
class SimConfig:
    """One Monte Carlo experiment.

    ``detector`` is ``"combine"`` (linear combining then argmax) or
    ``"omp"``, which runs the OMP baseline on the same probe pilots.
    """

    pattern: PatternPair
    snr_grid_db: tuple = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    trials: int = 10000
    seed: int = 0
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    detector: str = "combine"
    omp_iterations: int | None = None
    label: str | None = None

    def __post_init__(self):
        check_positive_int(self.trials, "trials")
        grid = tuple(float(s) for s in self.snr_grid_db)
        if not grid:
            raise ValueError("snr_grid_db must not be empty")
        object.__setattr__(self, "snr_grid_db", grid)
        if self.detector not in ("combine", "omp"):
            raise ValueError("detector must be 'combine' or 'omp'")
        if self.detector == "omp":
            it = self.resolved_omp_iterations
            check_positive_int(it, "omp_iterations")
            if it > self.pattern.m:
                raise ValueError("omp_iterations exceeds the number of pilots")

    @property
    def array(self):
        return ArrayConfig(self.pattern.n)

    @property
    def resolved_omp_iterations(self):
        if self.omp_iterations is not None:
            return self.omp_iterations
        return min(self.channel.n_nlos_paths + 1, self.pattern.m)

    @property
    def name(self):
        if self.label:
            return self.label
        return "omp" if self.detector == "omp" else self.pattern.kind


@dataclass(frozen=True)
class TrialOutcome:
    n_hat: int
    n_star: int

    @property
    def correct(self):
        return self.n_hat == self.n_star


@dataclass(frozen=True)
class SnrPoint:
    snr_db: float
    trials: int
    errors: int

    @property
    def error_probability(self):
        return self.errors / self.trials

    @property
    def ci_halfwidth(self):
        return wilson_halfwidth(self.errors, self.trials)


@dataclass(frozen=True)
class SimResult:
    name: str
    kind: str
    n: int
    m: int
    seed: int
    points: tuple

    @property
    def error_probability(self):
        return np.array([p.error_probability for p in self.points])

    @property
    def ci_halfwidth(self):
        return np.array([p.ci_halfwidth for p in self.points])

    @property
    def snr_db(self):
        return np.array([p.snr_db for p in self.points])


def trial_stream(seed, trial_index):
    """Generator for one trial: it draws the channel, then unit-power noise."""
    return np.random.default_rng([int(seed), int(trial_index)])


class _Runner:
    """Precomputes per-config matrices and evaluates blocks of trials.

    A trial's channel and its unit-power noise vector are drawn once and
    reused at every SNR, with the noise scaled by ``sqrt(sigma2)``.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.DH = dft_codebook(cfg.pattern.n).conj().T
        self.probe_h = cfg.pattern.probe.conj().T
        if cfg.detector == "omp":
            self.A = self.probe_h @ self.DH.conj().T
            self.norms = np.linalg.norm(self.A, axis=0)
            self.iterations = cfg.resolved_omp_iterations

    def outcomes(self, start, stop, sigma2s):
        """Return ``(n_hat, n_star)`` with ``n_hat`` of shape ``(len(sigma2s), T)``."""
        cfg = self.cfg
        n, m = cfg.pattern.n, cfg.pattern.m
        H = np.empty((n, stop - start), dtype=complex)
        ref = np.empty_like(H)
        U = np.empty((m, stop - start), dtype=complex)
        for j, t in enumerate(range(start, stop)):
            rng = trial_stream(cfg.seed, t)
            chan = sample_channel(cfg.channel, cfg.array, rng)
            H[:, j] = chan.h
            ref[:, j] = chan.h if cfg.channel.reference == "full" else chan.los_component()
            U[:, j] = complex_normal(rng, m)
        P = self.DH @ ref
        n_star = np.argmax(P.real**2 + P.imag**2, axis=0)
        S = self.probe_h @ H
        n_hat = np.empty((len(sigma2s), stop - start), dtype=int)
        for i, sigma2 in enumerate(sigma2s):
            R = S + np.sqrt(sigma2) * U
            if cfg.detector == "omp":
                n_hat[i] = [
                    _omp(R[:, j], self.A, self.norms, self.iterations)
                    for j in range(R.shape[1])
                ]
            else:
                Y = cfg.pattern.combining @ R
                n_hat[i] = np.argmax(Y.real**2 + Y.imag**2, axis=0)
        return n_hat, n_star

    def count_errors(self, start, stop):
        sigma2s = [snr_to_noise_variance(s) for s in self.cfg.snr_grid_db]
        n_hat, n_star = self.outcomes(start, stop, sigma2s)
        return np.sum(n_hat != n_star[None, :], axis=1)


def run_trial(cfg, snr_db, trial_index):
    """Simulate one beam-training attempt.

    The channel and the unit-power noise come from a stream keyed by
    ``(cfg.seed, trial_index)``; ``snr_db`` only scales the noise. Every
    SNR point and every pattern run with the same seed therefore sees the
    same channels.
    """
    sigma2 = snr_to_noise_variance(snr_db)
    n_hat, n_star = _Runner(cfg).outcomes(trial_index, trial_index + 1, [sigma2])
    return TrialOutcome(int(n_hat[0, 0]), int(n_star[0]))


def error_probability(cfg, threads=1, chunk=500):
    """Monte Carlo estimate of ``P(n_hat != n_star)`` at every grid SNR.

    Trials are split into fixed chunks that may run on ``threads``
    workers; per-trial streams make the counts independent of the split.
    """
    threads = check_positive_int(threads, "threads")
    runner = _Runner(cfg)
    jobs = [(s, min(s + chunk, cfg.trials)) for s in range(0, cfg.trials, chunk)]
    if threads == 1:
        counts = [runner.count_errors(*job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(lambda job: runner.count_errors(*job), jobs))
    errors = np.sum(counts, axis=0)
    points = tuple(
        SnrPoint(snr, cfg.trials, int(e)) for snr, e in zip(cfg.snr_grid_db, errors)
    )
    return SimResult(
        name=cfg.name,
        kind=cfg.pattern.kind,
        n=cfg.pattern.n,
        m=cfg.pattern.m,
        seed=cfg.seed,
        points=points,
    )
