"""scikit-learn style wrappers around pattern design and beam detection.

Rows of ``X`` are received pilot vectors (``n_samples x M``, complex) and
targets are beam indices. ``fit`` builds the probe/combining pair; it
does not look at data, since patterns are designed from geometry alone.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_generator, check_complex_array
from .model import complex_normal, dft_codebook
from .optimizer import OptimizerConfig, optimize_pattern
from .patterns import (
    PatternPair,
    gain_metrics,
    pattern_exhaustive,
    pattern_multiarm,
    pattern_multiarm_random_phase,
    pattern_random,
    pattern_zc,
)
from .training import _omp

# numbered aliases follow the usual Pattern 1..5 ordering
ALIASES = {
    "1": "exhaustive",
    "2": "multiarm",
    "3": "multiarm_random_phase",
    "4": "random",
    "5": "optimized",
}


def resolve_kind(kind):
    kind = str(kind).strip().lower()
    return ALIASES.get(kind, kind)


def make_pattern(kind, n, m=None, seed=0, k=None, optimizer=None, stride=1):
    """Build any supported pattern from a kind name or its number.

    ``seed`` drives the random draws. Pattern 2 and Pattern 3 built from
    the same seed share their hash index sets, so they differ only in
    the arm phases.

    Returns
    -------
    PatternPair
        For ``"optimized"`` the optimizer trace is dropped; call
        :func:`patbeam.optimizer.optimize_pattern` to keep it.
    """
    kind = resolve_kind(kind)
    if kind == "exhaustive":
        if m not in (None, n):
            raise ValueError("the exhaustive pattern needs m == n")
        return pattern_exhaustive(n)
    if m is None:
        raise ValueError(f"pattern {kind!r} needs the number of pilots m")
    if kind == "zc":
        return pattern_zc(n, m, stride=stride)
    if kind == "multiarm":
        return pattern_multiarm(n, m, k=k, rng=np.random.default_rng(seed))
    if kind == "multiarm_random_phase":
        return pattern_multiarm_random_phase(n, m, k=k, rng=np.random.default_rng(seed))
    if kind == "random":
        return pattern_random(n, m, np.random.default_rng(seed))
    if kind == "optimized":
        cfg = OptimizerConfig(seed=seed) if optimizer is None else optimizer
        return optimize_pattern(n, m, cfg).pattern
    raise ValueError(f"unknown pattern kind {kind!r}")


def _as_pilots(X, m):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[None, :]
    return check_complex_array(X, "X", ndim=2, shape=(None, m))


class PatternedBeamTrainer(TransformerMixin, ClassifierMixin, BaseEstimator):
    """Linear-combining beam trainer.

    Parameters
    ----------
    pattern : str
        Pattern kind or number (``"exhaustive"``, ``"zc"``, ``"multiarm"``,
        ``"multiarm_random_phase"``, ``"random"``, ``"optimized"`` or
        ``"1"`` to ``"5"``).
    n_antennas, n_pilots : int
        ``N`` and ``M``. ``n_pilots`` is ignored for the exhaustive pattern.
    n_arms : int, optional
        Arms per training beam for the multi-armed patterns.
    seed : int
        Seed of the pattern draw.
    optimizer : OptimizerConfig, optional
        Settings for the optimized pattern; its own seed is replaced by
        ``seed``.
    pattern_pair : PatternPair, optional
        Use this pair as is and skip construction.

    Attributes
    ----------
    pattern_ : PatternPair
    metrics_ : GainMetrics
    """

    def __init__(
        self,
        pattern="optimized",
        n_antennas=256,
        n_pilots=128,
        n_arms=None,
        seed=0,
        optimizer=None,
        pattern_pair=None,
    ):
        self.pattern = pattern
        self.n_antennas = n_antennas
        self.n_pilots = n_pilots
        self.n_arms = n_arms
        self.seed = seed
        self.optimizer = optimizer
        self.pattern_pair = pattern_pair

    def fit(self, X=None, y=None):
        if self.pattern_pair is not None:
            if not isinstance(self.pattern_pair, PatternPair):
                raise TypeError("pattern_pair must be a PatternPair")
            pair = self.pattern_pair
        else:
            opt = self.optimizer
            if opt is not None:
                opt = replace(opt, seed=self.seed)
            kind = resolve_kind(self.pattern)
            m = self.n_antennas if kind == "exhaustive" else self.n_pilots
            pair = make_pattern(
                kind, self.n_antennas, m, seed=self.seed, k=self.n_arms, optimizer=opt
            )
        self.pattern_ = pair
        self.metrics_ = gain_metrics(pair)
        self.n_features_in_ = pair.m
        self.classes_ = np.arange(pair.n)
        return self

    def measure(self, H, sigma2=0.0, rng=None):
        """Pilots ``B^H h + z`` for every row ``h`` of ``H`` (``n_samples x N``)."""
        check_is_fitted(self, "pattern_")
        pair = self.pattern_
        H = np.asarray(H)
        H = check_complex_array(H[None, :] if H.ndim == 1 else H, "H", ndim=2,
                                shape=(None, pair.n))
        if sigma2 < 0:
            raise ValueError("sigma2 must be >= 0")
        R = H @ pair.probe.conj()
        if sigma2 > 0:
            R = R + complex_normal(as_generator(rng), R.shape, sigma2)
        return R

    def transform(self, X):
        """Beam statistics ``Bc r`` for each pilot row, shape ``n_samples x N``."""
        check_is_fitted(self, "pattern_")
        R = _as_pilots(X, self.pattern_.m)
        return R @ self.pattern_.combining.T

    def decision_function(self, X):
        Y = self.transform(X)
        return Y.real**2 + Y.imag**2

    def predict(self, X):
        """Detected beam per row; ties go to the smallest index."""
        return np.argmax(self.decision_function(X), axis=1)


class OMPBeamDetector(ClassifierMixin, BaseEstimator):
    """Compressive-sensing baseline: OMP over the dictionary ``B^H D``.

    Parameters
    ----------
    pattern_pair : PatternPair
        Supplies the probe ``B``; the combining matrix is unused.
    iterations : int
        Number of atoms to pick (at most ``M``).
    """

    def __init__(self, pattern_pair=None, iterations=4):
        self.pattern_pair = pattern_pair
        self.iterations = iterations

    def fit(self, X=None, y=None):
        if not isinstance(self.pattern_pair, PatternPair):
            raise TypeError("pattern_pair must be a PatternPair")
        pair = self.pattern_pair
        if not 1 <= int(self.iterations) <= pair.m:
            raise ValueError(f"iterations must lie in [1, {pair.m}]")
        self.dictionary_ = pair.probe.conj().T @ dft_codebook(pair.n)
        self.atom_norms_ = np.linalg.norm(self.dictionary_, axis=0)
        self.n_features_in_ = pair.m
        self.classes_ = np.arange(pair.n)
        return self

    def predict(self, X):
        check_is_fitted(self, "dictionary_")
        R = _as_pilots(X, self.n_features_in_)
        it = int(self.iterations)
        return np.array(
            [_omp(r, self.dictionary_, self.atom_norms_, it) for r in R], dtype=int
        )


__all__ = [
    "ALIASES",
    "OMPBeamDetector",
    "PatternedBeamTrainer",
    "make_pattern",
    "resolve_kind",
]
