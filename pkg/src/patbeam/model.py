"""ULA geometry, the DFT beam codebook and the sparse multipath channel.

Beam indices are 0-based throughout the package: column ``k`` of the
codebook is the beam a ``1``-based description would call beam ``k + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_generator, check_complex_array, check_positive_int


@dataclass(frozen=True)
class ArrayConfig:
    n_antennas: int = 256

    def __post_init__(self):
        check_positive_int(self.n_antennas, "n_antennas", minimum=2)


@dataclass(frozen=True)
class ChannelConfig:
    """Geometry-based channel: one LoS path plus ``n_nlos_paths`` weaker paths.

    ``reference`` selects what the ground-truth beam is measured against:
    ``"full"`` uses the whole channel, ``"los"`` only the LoS component.
    """

    n_nlos_paths: int = 3
    los_gain: complex = 1.0
    nlos_gain_variance: float = 0.1
    reference: str = "full"
    angle_domain: tuple = field(default=(-1.0, 1.0), init=False)

    def __post_init__(self):
        check_positive_int(self.n_nlos_paths, "n_nlos_paths", minimum=0)
        if not self.nlos_gain_variance >= 0:
            raise ValueError("nlos_gain_variance must be >= 0")
        if self.reference not in ("full", "los"):
            raise ValueError("reference must be 'full' or 'los'")


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    h: np.ndarray
    los_angle: float
    los_gain: complex
    nlos_angles: tuple
    nlos_gains: tuple

    def recompute(self):
        """Rebuild ``h`` from the stored path parameters."""
        n = self.h.shape[0]
        h = self.los_gain * steering_vector(self.los_angle, n)
        for theta, alpha in zip(self.nlos_angles, self.nlos_gains):
            h = h + alpha * steering_vector(theta, n)
        return h

    def los_component(self):
        return self.los_gain * steering_vector(self.los_angle, self.h.shape[0])


def steering_vector(theta, n):
    """ULA response ``exp(-j*pi*theta*k) / sqrt(n)`` for ``k = 0..n-1``.

    Parameters
    ----------
    theta : float
        Spatial frequency (sine of the physical angle) in ``[-1, 1]``.
    n : int
        Number of elements.

    Returns
    -------
    numpy.ndarray
        Complex vector of length ``n`` with unit Euclidean norm.
    """
    n = check_positive_int(n, "n")
    theta = float(theta)
    if not -1.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [-1, 1], got {theta}")
    k = np.arange(n)
    return np.exp(-1j * np.pi * theta * k) / np.sqrt(n)


def dft_codebook(n):
    """Unitary DFT matrix with entry ``(m, k) = exp(-j 2 pi k m / n) / sqrt(n)``."""
    n = check_positive_int(n, "n")
    k = np.arange(n)
    # reduce the exponent mod n first so large n keeps full phase accuracy
    return np.exp(-2j * np.pi * (np.outer(k, k) % n) / n) / np.sqrt(n)


def grid_angle(k, n):
    """Spatial frequency of codebook column ``k``, wrapped into ``[-1, 1)``.

    Column ``k`` equals ``steering_vector(grid_angle(k, n), n)``.
    """
    theta = 2.0 * k / n
    return theta - 2.0 if theta >= 1.0 else theta


def complex_normal(rng, size, variance=1.0):
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def sample_channel(cfg, array, rng):
    """Draw one channel realization.

    All angles are uniform on ``[-1, 1]``; the NLoS gains are complex
    Gaussian with variance ``cfg.nlos_gain_variance``.
    """
    rng = as_generator(rng)
    n = array.n_antennas
    p = cfg.n_nlos_paths
    los_angle = float(rng.uniform(-1.0, 1.0))
    nlos_angles = rng.uniform(-1.0, 1.0, size=p)
    nlos_gains = complex_normal(rng, p, cfg.nlos_gain_variance)

    k = np.arange(n)
    angles = np.concatenate(([los_angle], nlos_angles))
    gains = np.concatenate(([complex(cfg.los_gain)], nlos_gains))
    h = np.exp(-1j * np.pi * np.outer(k, angles)) @ gains / np.sqrt(n)
    return ChannelRealization(
        h=h,
        los_angle=los_angle,
        los_gain=complex(cfg.los_gain),
        nlos_angles=tuple(float(t) for t in nlos_angles),
        nlos_gains=tuple(complex(a) for a in nlos_gains),
    )


def optimal_beam_index(h, codebook):
    """Index of the codebook column with the largest ``|d_k^H h|^2``.

    Ties resolve to the smallest index.
    """
    codebook = check_complex_array(codebook, "codebook", ndim=2)
    h = check_complex_array(h, "h", ndim=1, shape=(codebook.shape[0],))
    return int(np.argmax(np.abs(codebook.conj().T @ h) ** 2))
