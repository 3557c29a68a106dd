"""End-to-end acceptance checks.

Each test prints one ``CRITERION n: PASS|FAIL`` line with the measured
numbers and then asserts.  Thresholds are fixed; a failing criterion stays
red.  Run on its own with ``pytest -s tests/test_acceptance.py``.
"""

from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from narrowbeam import harness
from narrowbeam.array import PathParams, UpaGeometry, VerticalPrior, array_response_sin, channel_from_paths
from narrowbeam.beams import (
    GroupingPattern,
    SubIntervalPartition,
    build_group_beam_matrix,
    random_beam_matrix,
    read_pattern_csv,
    wide_beam_matrix,
)
from narrowbeam.config import load_config
from narrowbeam.eda import EdaConfig, build_problem, exhaustive_optimum, run_eda
from narrowbeam.estimator import (
    EstimatorConfig,
    default_grid,
    default_prior,
    gw_scvbi,
    nmse,
    omp_estimate,
    scvbi_full,
)
from narrowbeam.metrics import (
    FimParams,
    IslKernel,
    SidelobeRegion,
    UnresolvableError,
    beam_energy,
    crb_delta,
    fim,
    horizontal_af,
    isl,
)
from test_metrics import _dense_fim as dense_fim, isl_by_quadrature

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
PRIOR = VerticalPrior()
SNRS = (0.0, 5.0, 10.0)
PATH_COUNTS = (6, 10, 14, 18, 22)
TRIALS = 200

pytestmark = pytest.mark.acceptance


def report(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")


def upper_median_bound(diff, seed: int = 0) -> float:
    """One-sided 95% bootstrap upper bound on the median of paired differences."""
    res = stats.bootstrap((np.asarray(diff),), np.median, confidence_level=0.95, alternative="less",
                          method="percentile", n_resamples=5000, random_state=seed)
    return float(res.confidence_interval.high)


def log_nmse(rows, beam, est):
    """{(snr, k): per-trial 10 log10 NMSE in trial order}."""
    out = {}
    for r in rows:
        if r.beam == beam and r.estimator == est:
            out.setdefault((r.snr_db, r.k_paths), []).append(10 * np.log10(r.nmse))
    return {k: np.array(v) for k, v in out.items()}


def ordering_checks(rows, point):
    """Beam and estimator orderings at one (snr, k) point; returns (beam_ok, est_ok, text)."""
    full = {b: log_nmse(rows, b, "scvbi")[point] for b in ("group-wise-opt", "group-wise-uniform", "random")}
    ub1 = upper_median_bound(full["group-wise-opt"] - full["group-wise-uniform"])
    ub2 = upper_median_bound(full["group-wise-uniform"] - full["random"])
    med = {e: float(np.median(log_nmse(rows, "group-wise-opt", e)[point])) for e in ("gw-scvbi", "scvbi", "omp")}
    beam_ok = ub1 <= 0 and ub2 <= 0
    est_ok = med["gw-scvbi"] < med["omp"] and med["scvbi"] < med["omp"] and abs(med["gw-scvbi"] - med["scvbi"]) <= 1.0
    text = (f"[snr={point[0]:g} K={point[1]}] opt-uni ub={ub1:+.2f} dB, uni-rand ub={ub2:+.2f} dB; "
            f"gw={med['gw-scvbi']:.2f} full={med['scvbi']:.2f} omp={med['omp']:.2f} dB")
    return beam_ok, est_ok, text


@pytest.fixture(scope="module")
def desk_config():
    cfg = load_config(CONFIGS / "desk.ini")
    return replace(cfg, beams=("group-wise-opt", "group-wise-uniform", "random"),
                   estimators=("gw-scvbi", "scvbi", "omp"), trials=TRIALS)


@pytest.fixture(scope="module")
def snr_sweep(desk_config):
    cfg = replace(desk_config, axis="snr_db", values=SNRS, k_paths=10)
    return harness.run_sweep(cfg)


@pytest.fixture(scope="module")
def k_sweep(desk_config):
    cfg = replace(desk_config, axis="k_paths", values=PATH_COUNTS, snr_db=5.0)
    return harness.run_sweep(cfg)


def test_criterion_1_metric_oracles(capsys):
    rng = np.random.default_rng(101)
    worst_isl = 0.0
    for _ in range(50):
        n_y = int(rng.integers(4, 33))
        s = rng.integers(0, 2, n_y)
        s[rng.integers(n_y)] = 1
        a = rng.uniform(0.02, 0.9)
        region = SidelobeRegion(a, rng.uniform(a + 0.05, 2.0))
        phi = rng.uniform(-np.pi / 3, 0)
        ref = isl_by_quadrature(s, phi, region)
        worst_isl = max(worst_isl, abs(isl(s, IslKernel.build(n_y, phi, region)) - ref) / ref)

    worst_af = 0.0
    for _ in range(200):
        geom = UpaGeometry(int(rng.integers(4, 17)), 24, int(rng.choice([3, 4, 6])))
        g = int(rng.integers(1, 5))
        part = SubIntervalPartition.uniform(PRIOR, g)
        pat = GroupingPattern.random(geom.n_y, g, rng)
        beam = build_group_beam_matrix(part, pat, geom)
        k = int(rng.integers(g))
        c = part.centers[k]
        u1, u2 = rng.uniform(-1, 1, 2)
        f_g = beam.group_dense(k)
        ref = np.vdot(f_g @ array_response_sin([u1], [c], geom)[:, 0], f_g @ array_response_sin([u2], [c], geom)[:, 0])
        energy = beam_energy(beam.group_vectors[k], np.arcsin(c), geom)
        got = horizontal_af(pat.s[:, k], u2 - u1, np.arcsin(c), energy)
        worst_af = max(worst_af, abs(got - ref) / abs(ref) if abs(ref) > 1e-6 else abs(got - ref))

    ok = worst_isl < 1e-6 and worst_af < 1e-9
    report(capsys, 1, ok, f"ISL max rel err {worst_isl:.2e} (< 1e-6), AF max rel err {worst_af:.2e} (< 1e-9)")
    assert ok


def test_criterion_2_fim(capsys):
    rng = np.random.default_rng(202)
    worst, psd, scaling, n_crb = 0.0, True, 0.0, 0
    for _ in range(30):
        geom = UpaGeometry(int(rng.integers(4, 13)), 12, 4)
        part = SubIntervalPartition.uniform(PRIOR, 2)
        pat = GroupingPattern.random(geom.n_y, 2, rng)
        beam = build_group_beam_matrix(part, pat, geom)
        k = int(rng.integers(2))
        phi = float(np.arcsin(part.centers[k]))
        u1, u2 = rng.uniform(-0.9, 0.9, 2)
        a1, a2 = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        nv = rng.uniform(0.01, 1.0)
        params = FimParams(pat.s[:, k], beam_energy(beam.group_vectors[k], phi, geom), phi, u1, u2, a1, a2, nv)
        j = fim(params)
        # Richardson extrapolation removes the O(h^2) term of the central differences
        coarse = dense_fim(geom, beam, k, u1, u2, a1, a2, nv, step=1e-3)
        ref = (4 * dense_fim(geom, beam, k, u1, u2, a1, a2, nv, step=5e-4) - coarse) / 3
        denom = np.maximum(np.abs(ref), 1e-6 * np.abs(ref).max())
        worst = max(worst, float(np.max(np.abs(j - ref) / denom)))
        psd &= bool(np.allclose(j, j.T) and np.linalg.eigvalsh(j).min() >= -1e-9 * np.linalg.norm(j))
        try:
            base = crb_delta(j)
        except UnresolvableError:  # too few antennas in the group to separate two sources
            continue
        scaling = max(scaling, abs(crb_delta(fim(replace(params, noise_var=2 * nv))) / base - 2.0))
        n_crb += 1
    ok = worst < 1e-4 and psd and scaling < 1e-9 and n_crb >= 20
    report(capsys, 2, ok, f"FIM max rel err {worst:.2e} (< 1e-4), symmetric PSD {psd}, "
                          f"max |CRB(2 sigma^2)/CRB(sigma^2) - 2| = {scaling:.1e} over {n_crb} resolvable cases")
    assert ok


def test_criterion_3_eda_paper_scale(capsys):
    problem = build_problem(UpaGeometry(64, 72, 12), 4)
    ratios, monotone, settled = [], True, True
    for seed in range(5):
        res = run_eda(EdaConfig(q=200, t=40, i_max=50, rng_seed=seed), problem)
        trace = np.array(res.trace)
        monotone &= bool(np.all(np.diff(trace) <= 0))
        # converged: no improvement over the last 10 of the 50 generations
        settled &= len(trace) <= 51 and trace[-1] == trace[-11]
        ratios.append(trace[-1] / trace[0])
    mean = float(np.mean(ratios))
    ok = monotone and settled and mean <= 0.6
    report(capsys, 3, ok, f"mean final/initial max-ISL {mean:.3f} (<= 0.6), per seed "
                          f"{np.round(ratios, 3).tolist()}, nonincreasing {monotone}, converged {settled}")
    assert ok


def test_criterion_4_small_instance_optimum(capsys):
    problem = build_problem(UpaGeometry(12, 24, 6), 2)
    _, best = exhaustive_optimum(problem)
    hits = 0
    for seed in range(20):
        res = run_eda(EdaConfig(rng_seed=seed), problem)
        hits += abs(res.best.fitness - best) <= 1e-12 * max(1.0, best)
    ok = hits >= 18
    report(capsys, 4, ok, f"{hits}/20 runs reach the exhaustive optimum {best:.6g} (>= 18)")
    assert ok


def test_criterion_5_vertical_ambiguity(capsys):
    cfg = load_config(CONFIGS / "desk.ini")
    geom = cfg.geometry
    pattern, _ = read_pattern_csv(cfg.pattern_path)
    narrow = build_group_beam_matrix(SubIntervalPartition.uniform(PRIOR, cfg.groups), pattern, geom)
    wide = wide_beam_matrix(PRIOR, geom)
    peaks = {}
    for name, beam in (("narrow", narrow), ("wide", wide)):
        grid, vals = harness.vertical_af_curves(beam, PRIOR, 401)
        off = np.abs(grid[:, None] - grid[None, :]) >= 2.0 / geom.n_z
        peaks[name] = 20 * np.log10(vals[off].max())
    margin = peaks["wide"] - peaks["narrow"]
    ok = margin >= 6.0
    report(capsys, 5, ok, f"off-main-lobe peak narrow {peaks['narrow']:.2f} dB, wide {peaks['wide']:.2f} dB, "
                          f"margin {margin:.2f} dB (>= 6)")
    assert ok


def test_criterion_6_beam_ordering(capsys, snr_sweep):
    lines, ok = [], True
    for snr in SNRS:
        beam_ok, _, text = ordering_checks(snr_sweep, (snr, 10))
        ok &= beam_ok
        lines.append(text.split(";")[0])
    report(capsys, 6, ok, "opt <= uniform <= random, upper bounds must be <= 0: " + " | ".join(lines))
    assert ok


def test_criterion_7_estimator_ordering(capsys, snr_sweep):
    lines, ok = [], True
    for snr in SNRS:
        _, est_ok, text = ordering_checks(snr_sweep, (snr, 10))
        ok &= est_ok
        lines.append(f"[snr={snr:g}]" + text.split(";")[1])
    report(capsys, 7, ok, "gw, full < omp and |gw - full| <= 1 dB: " + " | ".join(lines))
    assert ok


def test_criterion_8_runtime_ratio(capsys):
    cfg = load_config(CONFIGS / "paper.ini")
    cfg = replace(cfg, estimators=("omp", "gw-scvbi", "scvbi"), bench_repetitions=5)
    t = {e.estimator: e.median_ms for e in harness.run_bench(cfg)}
    ratio = t["gw-scvbi"] / t["scvbi"]
    rank = t["omp"] < t["gw-scvbi"] < t["scvbi"]
    ok = ratio <= 0.5 and rank
    report(capsys, 8, ok, f"median ms omp {t['omp']:.0f}, gw {t['gw-scvbi']:.0f}, full {t['scvbi']:.0f}; "
                          f"gw/full {ratio:.2f} (<= 0.5), rank omp < gw < full {rank}")
    assert ok


def test_criterion_9_exact_recovery(capsys):
    geom = UpaGeometry(64, 72, 12)
    part = SubIntervalPartition.uniform(PRIOR, 4)
    beams = {
        "opt": build_group_beam_matrix(part, read_pattern_csv(CONFIGS / "paper_pattern.csv")[0], geom),
        "random": random_beam_matrix(geom, 0),
    }
    rng = np.random.default_rng(909)
    worst = {}
    for k in (1, 2, 3):
        cfg = EstimatorConfig(k_expected=k)
        for trial in range(3):
            for name, beam in beams.items():
                grid = default_grid(beam, PRIOR, cfg)
                prior = default_prior(grid, cfg)
                ui = rng.choice(np.arange(0, grid.l1, 7), k, replace=False)
                vi = rng.choice(grid.l2, k, replace=False)
                idx = ui * grid.l2 + vi
                paths = [PathParams(complex(np.exp(2j * np.pi * rng.uniform())), float(np.arcsin(grid.u[i])),
                                    float(np.arcsin(grid.v[i]))) for i in idx]
                h = channel_from_paths(paths, geom).h
                y = beam.dense @ h
                runs = {"omp": omp_estimate(y, beam, grid, 1e-10, cfg),
                        "scvbi": scvbi_full(y, beam, grid, prior, 1e-10, cfg, PRIOR)}
                if beam.is_group_wise:
                    runs["gw-scvbi"] = gw_scvbi(y, beam, grid, prior, 1e-10, cfg, PRIOR)
                for est, res in runs.items():
                    worst[est] = max(worst.get(est, 0.0), nmse(res.h_hat, h))

    beam = beams["opt"]
    cfg = EstimatorConfig(k_expected=1)
    grid = default_grid(beam, PRIOR, cfg)
    prior = default_prior(grid, cfg)
    du, dv = grid.spacing
    l = 20 * grid.l2 + 30
    truth = (grid.u[l] + 0.3 * du, grid.v[l] + 0.3 * dv)
    h = channel_from_paths([PathParams(1.0 + 0j, float(np.arcsin(truth[0])), float(np.arcsin(truth[1])))], geom).h
    y = beam.dense @ h
    loc_err = {}
    for est, fn in (("gw-scvbi", gw_scvbi), ("scvbi", scvbi_full)):
        res = fn(y, beam, grid, prior, 1e-10, cfg, PRIOR)
        j = int(np.argmax(np.abs(res.x)))
        loc_err[est] = max(abs(res.u[j] - truth[0]), abs(res.v[j] - truth[1]))

    ok = max(worst.values()) < 1e-4 and max(loc_err.values()) < 1e-3
    report(capsys, 9, ok, "worst on-grid NMSE " + ", ".join(f"{e} {v:.1e}" for e, v in worst.items())
           + " (< 1e-4); off-grid location error " + ", ".join(f"{e} {v:.1e}" for e, v in loc_err.items())
           + " (< 1e-3)")
    assert ok


def test_criterion_10_path_count(capsys, k_sweep):
    ok, lines = True, []
    for beam, est in (("group-wise-opt", "gw-scvbi"), ("group-wise-opt", "scvbi"), ("group-wise-opt", "omp"),
                      ("group-wise-uniform", "gw-scvbi"), ("group-wise-uniform", "scvbi"),
                      ("group-wise-uniform", "omp"), ("random", "scvbi"), ("random", "omp")):
        curve = log_nmse(k_sweep, beam, est)
        med = [float(np.median(curve[(5.0, k)])) for k in PATH_COUNTS]
        mono = bool(np.all(np.diff(med) >= 0))
        ok &= mono
        if not mono:
            lines.append(f"{beam}/{est} not nondecreasing {np.round(med, 2).tolist()}")
    for k in PATH_COUNTS:
        beam_ok, est_ok, text = ordering_checks(k_sweep, (5.0, k))
        ok &= beam_ok and est_ok
        if not (beam_ok and est_ok):
            lines.append(text)
    report(capsys, 10, ok, "all curves nondecreasing, orderings hold at every K" if ok else " | ".join(lines))
    assert ok
