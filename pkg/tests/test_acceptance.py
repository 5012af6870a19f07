"""Acceptance checks, one PASS/FAIL line per criterion.

Reference values (``REF_*``) are the published design-table figures. The
sidelobe-power column of that table is on the unordered-pair scale
(``metric_p2(G, "pairs")``); the squared normalization is reported next
to it for comparison.
"""

import csv
import time

import numpy as np
import pytest

from oracles import central_difference, linear_scan_argmax, naive_gain_matrix, naive_omp
from patbeam import cli
from patbeam.estimators import make_pattern
from patbeam.io import beam_cuts
from patbeam.model import ArrayConfig, ChannelConfig, complex_normal, sample_channel
from patbeam.optimizer import OptimizerConfig, gradient, objective
from patbeam.patterns import (
    gain_matrix,
    gain_metrics,
    hash_codebook,
    pattern_exhaustive,
    pattern_multiarm,
    pattern_multiarm_random_phase,
    pattern_random,
    pattern_zc,
)
from patbeam.training import (
    SimConfig,
    detect,
    error_probability,
    omp_detect,
    omp_dictionary,
    receive_probe,
    trial_stream,
)

REF_RANDOM_F2 = 0.0078
REF_RANDOM_F3 = {128: 0.078, 64: 0.079}
FIG_GRID = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)


def test_c01_exhaustive_is_exact(acceptance_report, tmp_path):
    t0 = time.perf_counter()
    m = gain_metrics(pattern_exhaustive(256))
    metrics_ok = max(m.f1, m.f2, m.f3) < 1e-12
    code = cli.main(["simulate", "--n", "256", "--trials", "10000", "--snr", "inf",
                     "--out", str(tmp_path)])
    with open(tmp_path / "sim.csv") as fh:
        (row,) = list(csv.DictReader(fh))
    errors = int(row["errors"])
    elapsed = time.perf_counter() - t0
    ok = metrics_ok and code == 0 and errors == 0 and row["trials"] == "10000" and elapsed < 60
    acceptance_report(
        "C1 exhaustive exactness",
        ok,
        f"f1={m.f1:.1e} f2={m.f2:.1e} f3={m.f3:.1e}; noise-free errors {errors}/10000; "
        f"{elapsed:.1f}s",
    )
    assert ok


def test_c02_zc_equal_main_lobes(acceptance_report):
    t0 = time.perf_counter()
    details, ok = [], True
    for n, m in [(16, 8), (256, 128)]:
        pair = pattern_zc(n, m)
        G = gain_matrix(pair)
        f1 = gain_metrics(pair).f1
        _, cuts, ref = beam_cuts(pair, [0, n // 3], oversample=16)
        peak = cuts.max()
        ok &= f1 < 1e-10 and np.ptp(np.diag(G)) < 1e-10 and peak < 1.0 <= ref.max() + 1e-12
        details.append(f"(N={n},M={m}) f1={f1:.1e} peak={peak:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    acceptance_report("C2 ZC equal main lobes and widening", ok,
                      "; ".join(details) + f"; {elapsed:.1f}s")
    assert ok


def test_c03_random_phase_coherence_bound(acceptance_report):
    t0 = time.perf_counter()
    violations = 0
    off = ~np.eye(64, dtype=bool)
    for seed in range(100):
        rng = np.random.default_rng(seed)
        cb = hash_codebook(64, 32, 4, rng)
        Ct = pattern_multiarm_random_phase(64, 32, codebook=cb, rng=rng).combining / np.sqrt(2)
        lhs = np.abs(Ct @ Ct.conj().T)[off]
        rhs = np.abs(cb.matrix @ cb.matrix.T)[off]
        violations += int(np.sum(lhs > rhs + 1e-12))
    elapsed = time.perf_counter() - t0
    ok = violations == 0 and elapsed < 60
    acceptance_report("C3 random-phase coherence bound", ok,
                      f"{violations} violations over 100 seeds; {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def random_pattern_stats():
    t0 = time.perf_counter()
    stats = {}
    for m in (128, 64):
        ms = [gain_metrics(pattern_random(256, m, s)) for s in range(50)]
        stats[m] = {
            "f2_pairs": np.mean([x.f2_pairs for x in ms]),
            "f2": np.mean([x.f2 for x in ms]),
            "f3": np.mean([x.f3 for x in ms]),
        }
    return stats, time.perf_counter() - t0


def test_c04a_random_pattern_sidelobe_power(acceptance_report, random_pattern_stats):
    stats, elapsed = random_pattern_stats
    ok = elapsed < 300 and all(
        abs(stats[m]["f2_pairs"] - REF_RANDOM_F2) <= 0.2 * REF_RANDOM_F2 for m in stats
    )
    detail = "; ".join(
        f"M={m} mean f2={s['f2_pairs']:.5f} (squared scale {s['f2']:.5f}) ref {REF_RANDOM_F2}"
        for m, s in stats.items()
    )
    acceptance_report("C4a Pattern 4 sidelobe power, 50 seeds, +-20%", ok,
                      f"{detail}; {elapsed:.1f}s")
    assert ok


def test_c04b_random_pattern_peak_sidelobe(acceptance_report, random_pattern_stats):
    stats, elapsed = random_pattern_stats
    ok = elapsed < 300 and all(
        abs(stats[m]["f3"] - REF_RANDOM_F3[m]) <= 0.3 * REF_RANDOM_F3[m] for m in stats
    )
    detail = "; ".join(
        f"M={m} mean f3={s['f3']:.4f} ref {REF_RANDOM_F3[m]}" for m, s in stats.items()
    )
    acceptance_report("C4b Pattern 4 peak sidelobe, 50 seeds, +-30%", ok, detail)
    assert ok


def test_c05_multiarm_patterns(acceptance_report):
    t0 = time.perf_counter()
    f1s, f2p, f2s, f3_2, f3_3 = [], [], [], [], []
    for seed in range(20):
        # same seed, same index sets; Pattern 3 adds arm phases on top
        p2 = pattern_multiarm(256, 128, rng=np.random.default_rng(seed))
        p3 = pattern_multiarm_random_phase(256, 128, rng=np.random.default_rng(seed))
        assert np.array_equal(np.abs(p2.combining) > 0, np.abs(p3.combining) > 0)
        for pair, f3 in ((p2, f3_2), (p3, f3_3)):
            m = gain_metrics(pair)
            f1s.append(m.f1)
            f2p.append(m.f2_pairs)
            f2s.append(m.f2)
            f3.append(m.f3)
    elapsed = time.perf_counter() - t0
    in_band = all(0.003 <= v <= 0.015 for v in f2p + f2s)
    ok = (max(f1s) < 1e-12 and in_band and np.mean(f3_3) < np.mean(f3_2)
          and elapsed < 300)
    acceptance_report(
        "C5 Patterns 2 and 3 (K=8, 20 shared seeds)",
        ok,
        f"max f1={max(f1s):.1e}; f2 in [{min(f2p):.4f}, {max(f2p):.4f}] "
        f"(squared scale [{min(f2s):.4f}, {max(f2s):.4f}]); "
        f"mean f3 P2={np.mean(f3_2):.3f} P3={np.mean(f3_3):.3f}; {elapsed:.1f}s",
    )
    assert ok


@pytest.mark.parametrize("m,f2_max,f3_max", [(128, 0.006, 0.06), (64, 0.009, 0.08)])
def test_c06_optimized_pattern(acceptance_report, optimized_256, m, f2_max, f3_max):
    res, elapsed = optimized_256(m)
    g = gain_metrics(res.pattern)
    ok = g.f2_pairs <= f2_max and g.f3 <= f3_max and elapsed <= 1800
    if m == 128:
        ok &= g.f1 <= 1e-3
    ok &= res.pattern.constant_modulus()
    acceptance_report(
        f"C6 Pattern 5 at M={m}",
        ok,
        f"f1={g.f1:.2e} f2={g.f2_pairs:.4f} (squared scale {g.f2:.4f}) f3={g.f3:.4f}; "
        f"status {res.status} after {res.trace[-1].iteration} iterations; {elapsed:.0f}s",
    )
    assert ok


def test_c07_gradient(acceptance_report):
    t0 = time.perf_counter()
    cfg = OptimizerConfig()
    worst = 0.0
    for n, m in [(8, 4), (16, 8)]:
        rng = np.random.default_rng(n)
        for _ in range(20):
            phi = rng.uniform(0, 2 * np.pi, (n, m))
            fd = central_difference(lambda x: objective(x, cfg), phi)
            err = np.max(np.abs(gradient(phi, cfg) - fd)) / np.max(np.abs(fd))
            worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and elapsed < 60
    acceptance_report("C7 analytic gradient vs finite differences", ok,
                      f"max relative error {worst:.1e} over 40 points; {elapsed:.1f}s")
    assert ok


def _consistent_le(a, ha, b, hb):
    """``a <= b`` or the two Wilson intervals overlap."""
    return a - b <= ha + hb


def _crossing(snr, p, level):
    """SNR where ``p`` first drops to ``level``, by log-linear interpolation."""
    for i in range(1, len(p)):
        if p[i] <= level < p[i - 1] or (p[i] <= level and i == 0):
            lo, hi = np.log10(max(p[i - 1], 1e-300)), np.log10(max(p[i], 1e-300))
            t = (np.log10(level) - lo) / (hi - lo)
            return snr[i - 1] + t * (snr[i] - snr[i - 1])
    return None


@pytest.fixture(scope="module")
def alignment_curves(optimized_256):
    p5 = optimized_256(128)[0].pattern
    specs = {
        "exhaustive": (pattern_exhaustive(256), "combine"),
        "P2": (make_pattern("2", 256, 128, seed=0), "combine"),
        "P3": (make_pattern("3", 256, 128, seed=0), "combine"),
        "P5": (p5, "combine"),
        "OMP": (make_pattern("4", 256, 128, seed=0), "omp"),
    }
    t0 = time.perf_counter()
    curves = {}
    for name, (pair, det) in specs.items():
        cfg = SimConfig(pair, snr_grid_db=FIG_GRID, trials=10000, seed=0, detector=det)
        curves[name] = error_probability(cfg, threads=4)
    return curves, time.perf_counter() - t0


def test_c08a_curves_monotone(acceptance_report, alignment_curves):
    curves, elapsed = alignment_curves
    bad = []
    for name, res in curves.items():
        p, h = res.error_probability, res.ci_halfwidth
        if not all(_consistent_le(p[i + 1], h[i + 1], p[i], h[i]) for i in range(len(p) - 1)):
            bad.append(name)
    ok = not bad and elapsed < 1800
    summary = "; ".join(
        f"{k}: " + " ".join(f"{x:.3f}" for x in r.error_probability) for k, r in curves.items()
    )
    acceptance_report("C8a monotone error curves (1e4 trials, -10..20 dB)", ok,
                      f"non-monotone: {bad or 'none'}; {summary}; {elapsed:.0f}s")
    assert ok


def test_c08b_ordering_at_10db(acceptance_report, alignment_curves):
    curves, _ = alignment_curves
    i = FIG_GRID.index(10.0)
    p = {k: (r.error_probability[i], r.ci_halfwidth[i]) for k, r in curves.items()}
    ok = _consistent_le(*p["P5"], *p["P3"]) and _consistent_le(*p["P3"], *p["P2"])
    acceptance_report(
        "C8b P5 <= P3 <= P2 at 10 dB",
        ok,
        " ".join(f"{k}={v[0]:.4f}+-{v[1]:.4f}" for k, v in p.items() if k in ("P5", "P3", "P2")),
    )
    assert ok


def test_c08c_beats_omp(acceptance_report, alignment_curves):
    curves, _ = alignment_curves
    p5, omp = curves["P5"], curves["OMP"]
    worse = [
        s for s, a, ha, b, hb in zip(FIG_GRID, p5.error_probability, p5.ci_halfwidth,
                                     omp.error_probability, omp.ci_halfwidth)
        if not _consistent_le(a, ha, b, hb)
    ]
    ok = not worse
    gap = np.max(p5.error_probability - omp.error_probability)
    acceptance_report("C8c P5 <= OMP (M=128) at every SNR", ok,
                      f"grid points where P5 is worse: {worse or 'none'}; "
                      f"max(P5 - OMP)={gap:+.4f}")
    assert ok


def test_c08d_offset_at_one_percent(acceptance_report, alignment_curves):
    curves, _ = alignment_curves
    snr = np.array(FIG_GRID)
    x_exh = _crossing(snr, curves["exhaustive"].error_probability, 1e-2)
    x_p5 = _crossing(snr, curves["P5"].error_probability, 1e-2)
    # diagnostic only: the same offset measured where both curves are steep
    d_exh = _crossing(snr, curves["exhaustive"].error_probability, 1e-1)
    d_p5 = _crossing(snr, curves["P5"].error_probability, 1e-1)
    diag = f"offset at the 1e-1 level {d_p5 - d_exh:.2f} dB" if d_exh and d_p5 else ""
    if x_exh is None or x_p5 is None:
        ok = False
        detail = (
            "curve does not reach 1e-2 on the grid "
            f"(exhaustive min {curves['exhaustive'].error_probability.min():.4f}, "
            f"P5 min {curves['P5'].error_probability.min():.4f}); {diag}"
        )
    else:
        offset = x_p5 - x_exh
        ok = abs(offset - 3.0) <= 1.0
        detail = f"offset {offset:.2f} dB; {diag}"
    acceptance_report("C8d P5 vs exhaustive offset at 1e-2 is 3+-1 dB", ok, detail)
    assert ok


def test_c09_oracles(acceptance_report):
    t0 = time.perf_counter()
    gain_err = 0.0
    for n, m, seed in [(8, 4, 0), (12, 6, 1), (16, 8, 2), (16, 16, 3)]:
        pair = pattern_random(n, m, seed)
        ref = naive_gain_matrix(pair.probe.tolist(), pair.combining.tolist())
        gain_err = max(gain_err, np.max(np.abs(gain_matrix(pair) - ref)))
    pair = pattern_random(16, 8, 0)
    A = omp_dictionary(pair)
    omp_agree, scan_agree = 0, 0
    for t in range(1000):
        rng = trial_stream(2024, t)
        h = sample_channel(ChannelConfig(), ArrayConfig(16), rng).h
        r = receive_probe(h, pair, 0.05, rng)
        omp_agree += omp_detect(r, pair, iterations=4) == naive_omp(r, A, 4)
        y = complex_normal(rng, 16)
        scan_agree += detect(y) == linear_scan_argmax(y)
    elapsed = time.perf_counter() - t0
    ok = gain_err < 1e-10 and omp_agree == 1000 and scan_agree == 1000 and elapsed < 60
    acceptance_report(
        "C9 oracle equivalences",
        ok,
        f"gain max error {gain_err:.1e}; OMP {omp_agree}/1000; argmax {scan_agree}/1000; "
        f"{elapsed:.1f}s",
    )
    assert ok


def test_c10_determinism(acceptance_report, tmp_path):
    t0 = time.perf_counter()
    sim_cfg = tmp_path / "sim.yaml"
    sim_cfg.write_text(
        "n: 64\ntrials: 3000\nsnr_grid_db: [0, 10, 20]\ncurves:\n"
        "  - exhaustive\n  - {pattern: optimized, m: 32, optimizer: {max_iters: 200}}\n"
        "  - {pattern: random, m: 32, detector: omp}\n"
    )
    commands = {
        "metrics": (["metrics", "--n", "256", "--seeds", "2", "--patterns", "1", "2", "3", "4",
                     "zc"], "metrics.csv"),
        "gain": (["gain", "--pattern", "3", "--n", "32", "--m", "16", "--beams", "0", "7"],
                 "gain.csv"),
        "optimize": (["optimize", "--n", "32", "--m", "16", "--max-iters", "300"],
                     "trace_N32_M16_seed0.csv"),
        "simulate": (["simulate", "--config", str(sim_cfg)], "sim.csv"),
    }
    mismatched = []
    for name, (argv, fname) in commands.items():
        outputs = []
        for run, threads in enumerate(["1", "1", "3"]):
            out = tmp_path / f"{name}{run}"
            assert cli.main(argv + ["--threads", threads, "--out", str(out)]) == 0
            outputs.append((out / fname).read_bytes())
        if len(set(outputs)) != 1:
            mismatched.append(name)
        if name == "optimize":
            files = {(tmp_path / f"optimize{r}" / "pattern_N32_M16_seed0.json").read_bytes()
                     for r in range(3)}
            if len(files) != 1:
                mismatched.append("optimize pattern file")
    elapsed = time.perf_counter() - t0
    ok = not mismatched and elapsed < 300
    acceptance_report("C10 byte-identical reruns (1 and 3 threads)", ok,
                      f"mismatched: {mismatched or 'none'}; {elapsed:.1f}s")
    assert ok
