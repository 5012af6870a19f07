"""Pattern files (JSON) and the long-format CSV outputs.

Complex matrices are stored as row-major nested lists of ``[re, im]``
pairs. Floats are written with Python's shortest round-trip repr, so a
load gives back the exact bits that were saved.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import grid_angle, steering_vector
from .patterns import PatternPair, gain_matrix

FORMAT_VERSION = 1


def _encode(matrix):
    return [[[float(z.real), float(z.imag)] for z in row] for row in matrix]


def _decode(rows, name):
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ValueError(f"{name} must be a nested list of [re, im] pairs")
    out = np.empty(arr.shape[:2], dtype=np.complex128)
    # assign parts directly; re + 1j * im would lose signed zeros
    out.real, out.imag = arr[..., 0], arr[..., 1]
    return out


def pattern_to_dict(pair):
    meta = dict(pair.meta)
    return {
        "format": FORMAT_VERSION,
        "kind": pair.kind,
        "N": pair.n,
        "M": pair.m,
        "K": meta.pop("K", None),
        "seed": meta.pop("seed", None),
        "meta": {k: v for k, v in meta.items() if k not in ("N", "M")},
        "probe": _encode(pair.probe),
        "combining": _encode(pair.combining),
    }


def pattern_from_dict(doc):
    try:
        probe = _decode(doc["probe"], "probe")
        combining = _decode(doc["combining"], "combining")
        kind = doc["kind"]
    except KeyError as exc:
        raise ValueError(f"pattern document lacks field {exc}") from None
    if probe.shape != (doc.get("N"), doc.get("M")):
        raise ValueError(f"probe shape {probe.shape} disagrees with N and M")
    meta = dict(doc.get("meta") or {})
    meta.update(N=probe.shape[0], M=probe.shape[1])
    for key in ("K", "seed"):
        if doc.get(key) is not None:
            meta[key] = doc[key]
    return PatternPair(probe, combining, kind=kind, meta=meta)


def save_pattern(pair, path):
    path = Path(path)
    path.write_text(json.dumps(pattern_to_dict(pair), separators=(",", ":")) + "\n")
    return path


def load_pattern(path):
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a pattern file ({exc})") from None
    return pattern_from_dict(doc)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows):
    """Write ``rows`` under ``header`` with deterministic number formatting."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


METRICS_HEADER = (
    "pattern", "N", "M", "K", "n_seeds", "f1", "f2", "f2_pairs", "f3",
    "constant_modulus",
)
TRACE_HEADER = ("iteration", "objective", "f1", "f2", "f3", "tau")
SIM_HEADER = (
    "pattern", "N", "M", "snr_db", "trials", "errors", "error_prob", "ci_halfwidth",
)
GAIN_HEADER = ("beam", "grid_index", "grid_angle", "gain")
CUT_HEADER = ("beam", "theta", "gain", "dft_gain")


def write_trace(path, trace):
    rows = [
        (t.iteration, t.objective, t.f1, t.f2, t.f3, t.temperature) for t in trace
    ]
    return write_csv(path, TRACE_HEADER, rows)


def sim_rows(result):
    for p in result.points:
        yield (
            result.name, result.n, result.m, p.snr_db, p.trials, p.errors,
            p.error_probability, p.ci_halfwidth,
        )


def write_sim(path, results):
    rows = [row for res in results for row in sim_rows(res)]
    return write_csv(path, SIM_HEADER, rows)


def write_gain(path, pair, codebook=None):
    """Long-format dump of the gain matrix, one row per ``(beam, grid_index)``."""
    G = gain_matrix(pair, codebook)
    n = pair.n
    rows = [
        (i, j, grid_angle(j, n), G[i, j]) for i in range(n) for j in range(n)
    ]
    return write_csv(path, GAIN_HEADER, rows)


def beam_cuts(pair, beams, oversample=8):
    """Gain of equivalent beams against a fine angle grid.

    Returns ``(theta, gains, dft_gains)``: ``gains[i, t]`` is
    ``|w_n^H a(theta_t)|^2`` for ``n = beams[i]`` and ``dft_gains`` is the
    same quantity for the plain DFT beam ``d_n``, the reference of unit
    peak.
    """
    n = pair.n
    theta = np.linspace(-1.0, 1.0, oversample * n, endpoint=False)
    A = np.stack([steering_vector(t, n) for t in theta], axis=1)
    W = pair.equivalent_beams()[:, list(beams)]
    D = np.stack([steering_vector(grid_angle(b, n), n) for b in beams], axis=1)
    return theta, np.abs(W.conj().T @ A) ** 2, np.abs(D.conj().T @ A) ** 2


def write_cuts(path, pair, beams, oversample=8):
    theta, gains, ref = beam_cuts(pair, beams, oversample)
    rows = [
        (b, theta[t], gains[i, t], ref[i, t])
        for i, b in enumerate(beams)
        for t in range(theta.size)
    ]
    return write_csv(path, CUT_HEADER, rows)
