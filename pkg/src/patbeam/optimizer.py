"""Gradient-descent design of constant-modulus probe patterns.

The probe is parametrized by one phase per entry, ``B = exp(j phi) / sqrt(N)``,
and the combining matrix is the row-normalized ``D^H B``, so both unit-norm
constraints hold for every ``phi`` and the search is unconstrained. The
loss is a weighted sum of the main-lobe spread, the sidelobe power and the
peak sidelobe, with the spread and the peak smoothed by a temperature
``tau`` that is annealed towards zero.

Gradients are analytic. With ``A = D^H B``, ``s_n = ||A[n]||`` and
``P = A A^H`` the gain matrix is ``G[n, k] = |P[n, k]|^2 / s_n^2``; the
chain rule runs back through ``P``, the row norms and ``A`` in ``O(N^2 M)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from ._validation import DegeneratePatternError, check_positive_int
from .model import dft_codebook
from .patterns import PatternPair, combining_from_probe, random_probe

log = logging.getLogger(__name__)

# The spread term is smoothed as hypot(f1, eps) - eps with eps = this * tau;
# the bare norm has a kink at f1 = 0 that stalls descent on the other terms.
SPREAD_SMOOTHING = 0.1


@dataclass(frozen=True)
class OptimizerConfig:
    weights: tuple = (1.0, 1.0, 1.0)
    max_iters: int = 2000
    step_size: float = 0.1
    smoothing_temperature: float = 0.05
    min_temperature: float = 1e-3
    anneal_every: int = 200
    convergence_tol: float = 1e-7
    convergence_window: int = 10
    seed: int = 0
    method: str = "lbfgs"

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if len(w) != 3:
            raise ValueError("weights must hold three values")
        if any(x < 0 or not np.isfinite(x) for x in w) or not any(w):
            raise ValueError("weights must be finite, >= 0 and not all zero")
        object.__setattr__(self, "weights", w)
        check_positive_int(self.max_iters, "max_iters", minimum=0)
        check_positive_int(self.anneal_every, "anneal_every")
        check_positive_int(self.convergence_window, "convergence_window")
        for name in ("step_size", "smoothing_temperature", "min_temperature",
                     "convergence_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.method not in ("gd", "lbfgs"):
            raise ValueError("method must be 'gd' or 'lbfgs'")
        if self.min_temperature > self.smoothing_temperature:
            raise ValueError("min_temperature exceeds smoothing_temperature")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    f1: float
    f2: float
    f3: float
    temperature: float


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    pattern: PatternPair
    phases: np.ndarray
    trace: list = field(default_factory=list)
    status: str = "max_iters"

    @property
    def objective(self):
        return self.trace[-1].objective


def probe_from_phases(phases):
    phases = np.asarray(phases, dtype=float)
    return np.exp(1j * phases) / np.sqrt(phases.shape[0])


def phases_of(B):
    """Phases of a constant-modulus probe (inverse of :func:`probe_from_phases`)."""
    return np.angle(np.asarray(B))


def _evaluate(phases, weights, tau, D, want_grad=True):
    """Return ``(loss, grad, (f1, f2, f3))`` at ``phases``."""
    lam1, lam2, lam3 = weights
    n = phases.shape[0]
    B = probe_from_phases(phases)
    A = D.conj().T @ B
    s2 = np.einsum("ij,ij->i", A.real, A.real) + np.einsum("ij,ij->i", A.imag, A.imag)
    if np.any(s2 <= 1e-24 * max(1.0, float(s2.max()))):
        raise DegeneratePatternError("D^H B has a zero row")
    P = A @ A.conj().T
    X = P / np.sqrt(s2)[:, None]
    G = X.real**2 + X.imag**2

    d = np.diag(G).copy()
    centered = d - d.mean()
    f1 = float(np.linalg.norm(centered))
    off_mask = ~np.eye(n, dtype=bool)
    off = G[off_mask]
    f2 = float(off.sum() / (n - 1) ** 2)
    f3 = float(off.max())
    f3_soft = float(tau * logsumexp(off / tau))
    eps = SPREAD_SMOOTHING * tau
    f1_soft = float(np.hypot(f1, eps) - eps)
    loss = lam1 * f1_soft + lam2 * f2 + lam3 * f3_soft
    if not want_grad:
        return loss, None, (f1, f2, f3)

    # dL/dG
    W = np.zeros((n, n))
    W[off_mask] = lam2 / (n - 1) ** 2 + lam3 * softmax(off / tau)
    W[np.diag_indices(n)] = lam1 * centered / np.hypot(f1, eps)

    Gamma = W * X
    c = np.sum(W * G, axis=1)
    Q = Gamma / np.sqrt(s2)[:, None]
    Q[np.diag_indices(n)] -= c / (2 * s2)
    R = (Q + Q.conj().T) @ A
    grad = 2.0 * np.imag((D @ R) * B.conj())
    return loss, grad, (f1, f2, f3)


def _resolve(cfg, codebook, n):
    return dft_codebook(n) if codebook is None else np.asarray(codebook, dtype=complex)


def objective(phases, cfg, codebook=None, temperature=None):
    """Weighted design loss at ``phases`` (``N x M``) with the smoothed peak term."""
    phases = np.asarray(phases, dtype=float)
    tau = cfg.smoothing_temperature if temperature is None else temperature
    D = _resolve(cfg, codebook, phases.shape[0])
    return _evaluate(phases, cfg.weights, tau, D, want_grad=False)[0]


def gradient(phases, cfg, codebook=None, temperature=None):
    """Analytic gradient of :func:`objective` with respect to every phase."""
    phases = np.asarray(phases, dtype=float)
    tau = cfg.smoothing_temperature if temperature is None else temperature
    D = _resolve(cfg, codebook, phases.shape[0])
    return _evaluate(phases, cfg.weights, tau, D)[1]


def _loss_floor(weights, tau, n):
    # tau * logsumexp(x / tau) >= tau * log(len(x)) for x >= 0
    return weights[2] * tau * np.log(n * (n - 1))


def _stalled(history, floor, cfg):
    """Relative decrease over the window, measured above the loss floor."""
    window = cfg.convergence_window
    if len(history) <= window:
        return False
    past, now = history[-1 - window], history[-1]
    return past - now <= cfg.convergence_tol * abs(past - floor)


def _gd_stage(phases, tau, budget, first_iter, cfg, D):
    """Backtracking gradient descent at fixed temperature."""
    loss, grad, fs = _evaluate(phases, cfg.weights, tau, D)
    rows = []
    step = cfg.step_size
    history = [loss]
    floor = _loss_floor(cfg.weights, tau, phases.shape[0])
    for k in range(budget):
        t = 2.0 * step
        while True:
            cand = phases - t * grad
            cand_loss, cand_grad, cand_fs = _evaluate(cand, cfg.weights, tau, D)
            if cand_loss < loss or t < 1e-12:
                break
            t *= 0.5
        if cand_loss < loss:
            phases, loss, grad, fs = cand, cand_loss, cand_grad, cand_fs
            step = t
        rows.append(TraceRow(first_iter + k + 1, loss, *fs, tau))
        history.append(loss)
        if _stalled(history, floor, cfg):
            return phases, rows, True
    return phases, rows, False


def _lbfgs_stage(phases, tau, budget, first_iter, cfg, D):
    """Limited-memory BFGS at fixed temperature (scipy's L-BFGS-B, unbounded)."""
    shape = phases.shape
    last = {}

    def fun(x):
        loss, grad, fs = _evaluate(x.reshape(shape), cfg.weights, tau, D)
        last["x"], last["loss"], last["fs"] = x.copy(), loss, fs
        return loss, grad.ravel()

    rows = []
    history = [_evaluate(phases, cfg.weights, tau, D, False)[0]]
    floor = _loss_floor(cfg.weights, tau, phases.shape[0])
    state = {"x": phases.ravel(), "stalled": False}

    def record(xk):
        if np.array_equal(last.get("x"), xk):
            loss, fs = last["loss"], last["fs"]
        else:
            loss, _, fs = _evaluate(xk.reshape(shape), cfg.weights, tau, D, False)
        rows.append(TraceRow(first_iter + len(rows) + 1, loss, *fs, tau))
        history.append(loss)
        state["x"] = xk.copy()
        if _stalled(history, floor, cfg):
            state["stalled"] = True
            raise StopIteration

    res = minimize(
        fun,
        phases.ravel(),
        jac=True,
        method="L-BFGS-B",
        callback=record,
        options={"maxiter": budget, "ftol": 0.0, "gtol": 0.0},
    )
    # keep the last recorded iterate so the trace and the result agree
    x = state["x"] if rows else phases.ravel()
    stalled = state["stalled"] or (len(rows) < budget and res.status != 1)
    return x.reshape(shape), rows, stalled


_STAGES = {"gd": _gd_stage, "lbfgs": _lbfgs_stage}


def optimize_pattern(n, m, cfg=None, codebook=None, initial_phases=None):
    """Minimize the design loss starting from a random constant-modulus probe.

    The search runs in stages at a fixed smoothing temperature. A stage
    ends after ``cfg.anneal_every`` iterations or when the loss stalls;
    the temperature is then halved, down to ``cfg.min_temperature``, where
    the last stage runs until it stalls or the iteration budget is spent.
    ``cfg.method`` picks the inner solver: ``"gd"`` takes gradient steps,
    trying twice the last accepted step and halving until the loss drops;
    ``"lbfgs"`` uses limited-memory BFGS. Both only accept decreasing
    steps and a lower temperature can only lower the smoothed loss, so the
    recorded trace never increases.

    Returns
    -------
    OptimizationResult
        ``status`` is ``"converged"`` when the final stage stalled and
        ``"max_iters"`` when the iteration cap was hit first.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    n = check_positive_int(n, "n", minimum=2)
    m = check_positive_int(m, "m")
    if m > n:
        raise ValueError(f"m={m} exceeds n={n}")
    D = _resolve(cfg, codebook, n)
    if initial_phases is None:
        phases = phases_of(random_probe(n, m, cfg.seed))
    else:
        phases = np.array(initial_phases, dtype=float)
        if phases.shape != (n, m):
            raise ValueError(f"initial_phases must have shape {(n, m)}")

    stage = _STAGES[cfg.method]
    tau = cfg.smoothing_temperature
    loss, _, fs = _evaluate(phases, cfg.weights, tau, D, want_grad=False)
    trace = [TraceRow(0, loss, *fs, tau)]
    status = "max_iters"
    done = 0
    while done < cfg.max_iters:
        final = tau <= cfg.min_temperature
        budget = cfg.max_iters - done
        if not final:
            budget = min(budget, cfg.anneal_every)
        phases, rows, stalled = stage(phases, tau, budget, done, cfg, D)
        trace.extend(rows)
        done += len(rows)
        if final and stalled:
            status = "converged"
            break
        tau = max(0.5 * tau, cfg.min_temperature)
        log.debug("stage ended at iteration %d: %s", done, trace[-1])

    B = probe_from_phases(phases)
    pattern = PatternPair(
        B,
        combining_from_probe(B, D),
        kind="optimized",
        meta={
            "N": n,
            "M": m,
            "seed": cfg.seed,
            "weights": list(cfg.weights),
            "method": cfg.method,
        },
    )
    return OptimizationResult(pattern=pattern, phases=phases, trace=trace, status=status)
