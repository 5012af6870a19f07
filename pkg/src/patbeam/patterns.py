"""Probe/combining pattern pairs and the gain-matrix design metrics.

A pattern pair holds the probe ``B`` (``N x M``, one training beam per
column) and the combining matrix ``Bc`` (``N x M``). The UE maps ``M``
received pilots ``r`` to ``N`` beam statistics with ``Bc @ r``. Equivalent
training beam ``n`` is ``B @ Bc[n].conj()``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import (
    DegeneratePatternError,
    as_generator,
    check_complex_array,
    check_positive_int,
    check_square,
)
from .model import dft_codebook

KINDS = (
    "exhaustive",
    "zc",
    "multiarm",
    "multiarm_random_phase",
    "random",
    "optimized",
)

NORM_TOL = 1e-9
DEFAULT_ARMS = 8


@dataclass(frozen=True, eq=False)
class PatternPair:
    probe: np.ndarray
    combining: np.ndarray
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        probe = check_complex_array(self.probe, "probe", ndim=2)
        combining = check_complex_array(
            self.combining, "combining", ndim=2, shape=probe.shape
        )
        if self.kind not in KINDS:
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        n, m = probe.shape
        if m > n:
            raise ValueError(f"M={m} exceeds N={n}")
        col_err = np.max(np.abs(np.linalg.norm(probe, axis=0) - 1.0))
        row_err = np.max(np.abs(np.linalg.norm(combining, axis=1) - 1.0))
        if col_err >= NORM_TOL:
            raise ValueError(f"probe columns are not unit norm (error {col_err:.3g})")
        if row_err >= NORM_TOL:
            raise ValueError(
                f"combining rows are not unit norm (error {row_err:.3g})"
            )
        object.__setattr__(self, "probe", probe)
        object.__setattr__(self, "combining", combining)

    @property
    def n(self):
        return self.probe.shape[0]

    @property
    def m(self):
        return self.probe.shape[1]

    def constant_modulus(self, tol=1e-9):
        """True when every probe weight has the same magnitude."""
        mag = np.abs(self.probe)
        return bool(np.ptp(mag) <= tol)

    def equivalent_beams(self):
        """``N x N`` matrix whose column ``n`` is the equivalent beam ``B b~_n``."""
        return self.probe @ self.combining.conj().T


@dataclass(frozen=True)
class GainMetrics:
    f1: float
    f2: float
    f3: float
    mean_diag_gain: float
    f2_pairs: float = float("nan")


@dataclass(frozen=True, eq=False)
class HashCodebook:
    """Sparse arm-assignment matrix: column ``m`` has ``K`` entries ``1/sqrt(K)``."""

    matrix: np.ndarray
    arms_per_beam: int
    index_sets: tuple

    @property
    def coverage(self):
        n, m = self.matrix.shape
        return self.arms_per_beam * m // n


def _codebook_for(n, codebook):
    if codebook is None:
        return dft_codebook(n)
    return check_complex_array(codebook, "codebook", ndim=2, shape=(n, n))


def gain_matrix(pair, codebook=None):
    """``G = |Bc B^H D|^2``; row ``n`` is equivalent beam ``n`` sampled on the grid."""
    D = _codebook_for(pair.n, codebook)
    return np.abs(pair.combining @ (pair.probe.conj().T @ D)) ** 2


def metric_p1(G):
    """Spread of the main-lobe gains: ``||diag(G) - g 1||_2`` with ``g`` their mean."""
    d = np.diag(check_square(G))
    g = np.sum(np.abs(d)) / d.size
    return float(np.linalg.norm(d - g))


def metric_p2(G, normalization="squared"):
    """Total off-diagonal (sidelobe) power of ``G``, normalized.

    ``normalization="squared"`` divides by ``(N - 1)**2``; ``"pairs"``
    divides by the number of unordered beam pairs ``N (N - 1) / 2``, the
    scale on which published pattern comparison tables are quoted.
    """
    G = check_square(G, min_size=2)
    n = G.shape[0]
    off = np.sum(G) - np.trace(G)
    if normalization == "squared":
        return float(off / (n - 1) ** 2)
    if normalization == "pairs":
        return float(2.0 * off / (n * (n - 1)))
    raise ValueError(f"unknown normalization {normalization!r}")


def metric_p3(G):
    """Largest off-diagonal entry of ``G``."""
    G = check_square(G, min_size=2)
    off = G[~np.eye(G.shape[0], dtype=bool)]
    return float(np.max(off))


def gain_metrics(pair, codebook=None):
    G = gain_matrix(pair, codebook)
    return GainMetrics(
        f1=metric_p1(G),
        f2=metric_p2(G),
        f3=metric_p3(G),
        mean_diag_gain=float(np.mean(np.diag(G))),
        f2_pairs=metric_p2(G, "pairs"),
    )


def combining_from_probe(B, codebook=None):
    """Row-normalized ``D^H B``.

    Raises
    ------
    DegeneratePatternError
        If a row of ``D^H B`` vanishes, so no unit-norm row exists.
    """
    B = check_complex_array(B, "B", ndim=2)
    D = _codebook_for(B.shape[0], codebook)
    A = D.conj().T @ B
    norms = np.linalg.norm(A, axis=1)
    scale = max(float(np.max(norms)), 1.0)
    bad = np.flatnonzero(norms <= 1e-12 * scale)
    if bad.size:
        raise DegeneratePatternError(
            f"D^H B has {bad.size} zero row(s), first at index {bad[0]}"
        )
    return A / norms[:, None]


def pattern_exhaustive(n):
    """Plain DFT sweep: ``B = D`` and identity combining."""
    n = check_positive_int(n, "n")
    return PatternPair(
        probe=dft_codebook(n),
        combining=np.eye(n, dtype=np.complex128),
        kind="exhaustive",
        meta={"N": n, "M": n},
    )


def pattern_zc(n, m, stride=1):
    """Cyclic shifts of the length-``n`` Zadoff-Chu sequence ``exp(j pi k^2 / n)``.

    Column ``i`` is the root sequence shifted by ``i * stride`` samples and
    the combining matrix is ``sqrt(n / m) D^H B``. The DFT of the root has
    constant magnitude, so every combining row has unit norm exactly.
    """
    n = check_positive_int(n, "n", minimum=2)
    m = check_positive_int(m, "m")
    stride = check_positive_int(stride, "stride")
    if m > n:
        raise ValueError(f"m={m} exceeds n={n}")
    if n % 2:
        raise ValueError("the ZC root exp(j pi k^2 / n) needs an even length")
    k = np.arange(n)
    root = np.exp(1j * np.pi * (k * k % (2 * n)) / n) / np.sqrt(n)
    probe = np.stack([np.roll(root, i * stride) for i in range(m)], axis=1)
    D = dft_codebook(n)
    combining = np.sqrt(n / m) * (D.conj().T @ probe)
    return PatternPair(
        probe, combining, kind="zc", meta={"N": n, "M": m, "stride": stride}
    )


def hash_codebook(n, m, k, rng):
    """Random arm assignment where every beam index is used by ``r = k m / n`` sets.

    The ``m`` index sets come from ``r`` independent random partitions of
    ``range(n)`` into blocks of ``k``, so the coverage is exact.
    """
    n = check_positive_int(n, "n")
    m = check_positive_int(m, "m")
    k = check_positive_int(k, "k")
    if m > n:
        raise ValueError(f"m={m} exceeds n={n}")
    if (k * m) % n or n % k:
        raise ValueError(
            f"need k*m divisible by n and k dividing n (n={n}, m={m}, k={k})"
        )
    rng = as_generator(rng)
    coverage = k * m // n
    sets = []
    for _ in range(coverage):
        perm = rng.permutation(n)
        sets.extend(tuple(sorted(int(i) for i in blk)) for blk in perm.reshape(-1, k))
    C = np.zeros((n, m))
    for col, idx in enumerate(sets):
        C[list(idx), col] = 1.0 / np.sqrt(k)
    return HashCodebook(matrix=C, arms_per_beam=k, index_sets=tuple(sets))


def default_arms(n, m):
    """``K = 8`` arms when that gives exact coverage, else ``K = 2 n / m``."""
    k = DEFAULT_ARMS
    if n % k == 0 and (k * m) % n == 0:
        return k
    return max(1, 2 * n // m)


def _multiarm_pair(C, kind, meta):
    n, m = C.shape
    D = dft_codebook(n)
    return PatternPair(
        probe=D @ C, combining=np.sqrt(n / m) * C, kind=kind, meta=meta
    )


def pattern_multiarm(n, m, k=None, rng=None, codebook=None):
    """Multi-armed training beams: ``B = D C`` and ``Bc = sqrt(n/m) C``.

    Pass ``codebook`` to reuse existing index sets; otherwise one is drawn
    from ``rng``.
    """
    if codebook is None:
        k = default_arms(n, m) if k is None else k
        codebook = hash_codebook(n, m, k, rng)
    C = codebook.matrix.astype(np.complex128)
    meta = {"N": C.shape[0], "M": C.shape[1], "K": codebook.arms_per_beam}
    return _multiarm_pair(C, "multiarm", meta)


def pattern_multiarm_random_phase(n, m, k=None, rng=None, codebook=None, phases=None):
    """Multi-armed beams with an independent uniform phase on every arm.

    ``phases`` (``n x m``) overrides the random draw; all-zero phases give
    back :func:`pattern_multiarm` exactly.
    """
    rng = as_generator(rng)
    if codebook is None:
        k = default_arms(n, m) if k is None else k
        codebook = hash_codebook(n, m, k, rng)
    C = codebook.matrix
    if phases is None:
        phases = rng.uniform(0.0, 2 * np.pi, size=C.shape)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != C.shape:
        raise ValueError(f"phases must have shape {C.shape}")
    Ct = np.exp(1j * phases) * C
    meta = {"N": C.shape[0], "M": C.shape[1], "K": codebook.arms_per_beam}
    return _multiarm_pair(Ct, "multiarm_random_phase", meta)


def random_probe(n, m, rng):
    rng = as_generator(rng)
    return np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=(n, m))) / np.sqrt(n)


def pattern_random(n, m, rng):
    """Constant-modulus probe with i.i.d. uniform phases; combining from ``D^H B``."""
    n = check_positive_int(n, "n")
    m = check_positive_int(m, "m")
    if m > n:
        raise ValueError(f"m={m} exceeds n={n}")
    B = random_probe(n, m, rng)
    return PatternPair(B, combining_from_probe(B), kind="random", meta={"N": n, "M": m})
