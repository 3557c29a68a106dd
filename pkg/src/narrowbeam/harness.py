"""Seeded Monte-Carlo sweeps, runtime benchmarks and plot-data export."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .array import received_signal, sample_channel
from .beams import (
    AnalogBeamMatrix,
    GroupingPattern,
    SubIntervalPartition,
    build_group_beam_matrix,
    narrow_beam,
    random_beam_matrix,
    read_pattern_csv,
    wide_beam_matrix,
    write_pattern_csv,
)
from .config import ExperimentConfig
from .eda import EdaConfig, EdaResult, build_problem, run_eda
from .estimator import (
    EstimateResult,
    default_grid,
    default_prior,
    gw_scvbi,
    nmse,
    omp_estimate,
    scvbi_full,
    thread_count,
)
from .metrics import beam_energy, horizontal_af, vertical_af_grid

log = logging.getLogger(__name__)

RESULT_FIELDS = ("point", "trial", "seed", "beam", "estimator", "snr_db", "k_paths", "nmse", "support_size",
                 "status", "channel_hash")
TIMING_FIELDS = ("point", "trial", "beam", "estimator", "wall_time_ms")


@dataclass(frozen=True)
class ResultRow:
    point: int
    trial: int
    seed: int
    beam: str
    estimator: str
    snr_db: float
    k_paths: int
    nmse: float
    wall_time_ms: float
    support_size: int = 0
    status: str = "ok"
    channel_hash: str = ""

    def record(self) -> tuple:
        return (self.point, self.trial, self.seed, self.beam, self.estimator, f"{self.snr_db:g}", self.k_paths,
                repr(float(self.nmse)), self.support_size, self.status, self.channel_hash)


def trial_seed(base_seed: int, point: int, trial: int) -> int:
    """Deterministic 63-bit seed from (base, point, trial)."""
    ss = np.random.SeedSequence([int(base_seed), int(point), int(trial)])
    return int(ss.generate_state(2, dtype=np.uint32).astype(np.uint64) @ np.array([1 << 31, 1], dtype=np.uint64))


def noise_variance(gains, snr_db: float) -> float:
    """Per-RF-chain noise power for a channel whose per-antenna power is sum |alpha|^2."""
    power = float(np.sum(np.abs(np.asarray(gains)) ** 2))
    return power / 10 ** (snr_db / 10)


def channel_hash(h: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(h).tobytes()).hexdigest()[:12]


def build_beam(kind: str, config: ExperimentConfig, pattern: GroupingPattern | None = None) -> AnalogBeamMatrix:
    geom, prior = config.geometry, config.prior
    partition = SubIntervalPartition.uniform(prior, config.groups)
    if kind == "group-wise-opt":
        if pattern is None:
            if config.pattern_path is None:
                raise ValueError("group-wise-opt needs a pattern file")
            pattern, _ = read_pattern_csv(config.pattern_path)
        return build_group_beam_matrix(partition, pattern, geom)
    if kind == "group-wise-uniform":
        return build_group_beam_matrix(partition, GroupingPattern.uniform(geom.n_y, config.groups), geom)
    if kind == "random":
        return random_beam_matrix(geom, config.beam_seed)
    if kind == "wide":
        return wide_beam_matrix(prior, geom)
    raise ValueError(f"unknown beam kind {kind!r}")


def supports(estimator: str, beam: AnalogBeamMatrix) -> bool:
    return estimator != "gw-scvbi" or beam.is_group_wise


def run_estimator(kind: str, y, beam: AnalogBeamMatrix, noise_var: float, config: ExperimentConfig,
                  k_paths: int) -> EstimateResult:
    est = config.estimator_for(k_paths)
    grid = default_grid(beam, config.prior, est)
    if kind == "omp":
        return omp_estimate(y, beam, grid, noise_var, est)
    prior = default_prior(grid, est)
    if kind == "gw-scvbi":
        return gw_scvbi(y, beam, grid, prior, noise_var, est, config.prior)
    if kind == "scvbi":
        return scvbi_full(y, beam, grid, prior, noise_var, est, config.prior)
    raise ValueError(f"unknown estimator {kind!r}")


def _run_trial(config: ExperimentConfig, beams: dict, point: int, snr_db: float, k_paths: int, trial: int):
    seed = trial_seed(config.base_seed, point, trial)
    ss = np.random.SeedSequence(seed)
    ch_seed, noise_seed = ss.spawn(2)
    channel = sample_channel(k_paths, config.geometry, config.prior, gain_profile=config.gain_profile,
                             rng_seed=np.random.default_rng(ch_seed))
    nv = noise_variance([p.gain for p in channel.paths], snr_db)
    tag = channel_hash(channel.h)
    rows = []
    for beam_name, beam in beams.items():
        # same noise draw for every beam: all beams have N_RF rows
        y = received_signal(beam, channel.h, nv, rng_seed=np.random.default_rng(noise_seed))
        for est in config.estimators:
            if not supports(est, beam):
                continue
            start = time.perf_counter()
            try:
                res = run_estimator(est, y, beam, nv, config, k_paths)
                err, size, status = nmse(res.h_hat, channel.h), res.support_size, res.status
            except Exception as exc:  # recorded, the sweep continues
                log.warning("trial %d/%d %s/%s failed: %s", point, trial, beam_name, est, exc)
                err, size, status = math.nan, 0, f"error:{type(exc).__name__}"
            elapsed = max((time.perf_counter() - start) * 1e3, 1e-6)
            rows.append(ResultRow(point, trial, seed, beam_name, est, snr_db, k_paths, err, elapsed, size, status, tag))
    return rows


def run_sweep(config: ExperimentConfig, output=None, patterns: dict | None = None, progress=None) -> list[ResultRow]:
    """Paired Monte-Carlo sweep.

    Every (point, trial) draws one channel and one noise vector shared by all
    beams and estimators.  Rows are sorted by (point, trial, beam, estimator)
    before writing, so the results CSV is byte-identical across reruns.  Wall
    times go to a ``.timing.csv`` sidecar next to ``output``.
    """
    patterns = patterns or {}
    beams = {kind: build_beam(kind, config, patterns.get(kind)) for kind in config.beams}
    jobs = [(p, snr, k, t) for p, (snr, k) in enumerate(config.points()) for t in range(config.trials)]
    workers = thread_count()
    rows: list[ResultRow] = []
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            for out in pool.map(lambda j: _run_trial(config, beams, *j), jobs):
                rows.extend(out)
    else:
        for i, job in enumerate(jobs):
            rows.extend(_run_trial(config, beams, *job))
            if progress is not None:
                progress(i + 1, len(jobs))
    order = {name: i for i, name in enumerate(config.beams)}
    est_order = {name: i for i, name in enumerate(config.estimators)}
    rows.sort(key=lambda r: (r.point, r.trial, order[r.beam], est_order[r.estimator]))
    if output is not None:
        write_results(rows, output)
    return rows


def write_results(rows, path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_FIELDS)
        for r in rows:
            writer.writerow(r.record())
    with open(path.with_suffix(".timing.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TIMING_FIELDS)
        for r in rows:
            writer.writerow((r.point, r.trial, r.beam, r.estimator, f"{r.wall_time_ms:.3f}"))


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def median_table(rows) -> dict:
    """{(beam, estimator, snr_db, k_paths): median NMSE} over finite rows."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.beam, r.estimator, r.snr_db, r.k_paths), []).append(r.nmse)
    return {k: float(np.nanmedian(v)) for k, v in groups.items()}


@dataclass(frozen=True)
class BenchEntry:
    estimator: str
    median_ms: float
    ratio: float
    times_ms: tuple[float, ...]


def run_bench(config: ExperimentConfig, pattern: GroupingPattern | None = None, seed: int | None = None,
              snr_db: float | None = None) -> list[BenchEntry]:
    """Median wall time per estimator on one shared input, with ratios to ``scvbi``."""
    beam_kind = next((b for b in config.beams if b.startswith("group-wise")), config.beams[0])
    beam = build_beam(beam_kind, config, pattern)
    seed = config.base_seed if seed is None else seed
    snr_db = config.points()[0][0] if snr_db is None else snr_db
    k = config.k_paths
    ch_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    channel = sample_channel(k, config.geometry, config.prior, gain_profile=config.gain_profile,
                             rng_seed=np.random.default_rng(ch_seed))
    nv = noise_variance([p.gain for p in channel.paths], snr_db)
    y = received_signal(beam, channel.h, nv, rng_seed=np.random.default_rng(noise_seed))
    medians = {}
    times = {}
    for est in config.estimators:
        if not supports(est, beam):
            continue
        for _ in range(config.bench_warmups):
            run_estimator(est, y, beam, nv, config, k)
        samples = []
        for _ in range(config.bench_repetitions):
            start = time.perf_counter()
            run_estimator(est, y, beam, nv, config, k)
            samples.append((time.perf_counter() - start) * 1e3)
        times[est] = tuple(samples)
        medians[est] = float(np.median(samples))
    ref = medians.get("scvbi")
    return [BenchEntry(e, m, m / ref if ref else math.nan, times[e]) for e, m in medians.items()]


def write_bench(entries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("estimator", "median_ms", "ratio_to_scvbi", "repetitions"))
        for e in entries:
            writer.writerow((e.estimator, f"{e.median_ms:.3f}", f"{e.ratio:.4f}", len(e.times_ms)))


def optimize_pattern(config: ExperimentConfig, callback=None) -> tuple[EdaResult, tuple[float, ...]]:
    """Run the grouping EDA with the config's settings; returns the result and SRL bounds."""
    eda = config.eda
    problem = build_problem(
        config.geometry, config.groups, config.prior, eda.region(config.geometry.n_y),
        noise_var=eda.noise_std**2, calibration_seed=eda.seed, slack=eda.slack,
        n_patterns=eda.calibration_patterns,
    )
    result = run_eda(EdaConfig(q=eda.q, t=eda.t, i_max=eda.i_max, rng_seed=eda.seed), problem, callback)
    return result, problem.srl_bounds


def write_optimized_pattern(config: ExperimentConfig, result: EdaResult, bounds, path) -> None:
    eda = config.eda
    region = eda.region(config.geometry.n_y)
    header = {
        "n_y": config.geometry.n_y, "n_z": config.geometry.n_z, "m": config.geometry.m, "groups": config.groups,
        "q": eda.q, "t": eda.t, "i_max": eda.i_max, "seed": eda.seed, "region_a": f"{region.a:g}",
        "region_b": f"{region.b:g}", "srl_bounds": " ".join(f"{b:.6g}" for b in bounds),
        "fitness": f"{result.best.fitness:.8g}",
    }
    write_pattern_csv(result.best.pattern, path, header)


def write_trace(trace, path) -> None:
    """isl-trace export: (iteration, best_fitness), verbatim from the EDA."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("iteration", "best_fitness"))
        for i, f in enumerate(trace):
            writer.writerow((i, repr(float(f))))


def vertical_af_curves(beam: AnalogBeamMatrix, prior, n_points: int = 512, sin_theta0: float = 0.0):
    """|chi(phi1, phi2)| / sqrt(chi(phi1, phi1) chi(phi2, phi2)) on an n x n sine grid over the prior.

    The symmetric normalization bounds every entry by 1, so beams with uneven
    gain across the prior are compared on their ambiguity alone.

    Returns ``(grid, values)`` with ``values[i, j]`` for ``phi1 = grid[i]``,
    ``phi2 = grid[j]``.
    """
    grid = np.linspace(prior.sin_lo, prior.sin_hi, n_points)
    chi = vertical_af_grid(beam, sin_theta0, grid, grid)
    diag = np.real(np.diag(chi))
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.abs(chi) / np.sqrt(diag[:, None] * diag[None, :])
    return grid, values


def write_vertical_af(beam, prior, path, n_points: int = 512, sin_theta0: float = 0.0) -> None:
    grid, values = vertical_af_curves(beam, prior, n_points, sin_theta0)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("sin_phi1", "sin_phi2", "af_norm"))
        for i, a in enumerate(grid):
            for j, b in enumerate(grid):
                writer.writerow((f"{a:.6f}", f"{b:.6f}", f"{values[i, j]:.8e}"))


def horizontal_af_curves(pattern: GroupingPattern, config: ExperimentConfig, n_points: int = 1001):
    """Per-group |chi_g(delta)| / chi_g(0) over delta in [-2, 2]."""
    partition = SubIntervalPartition.uniform(config.prior, pattern.g)
    delta = np.linspace(-2.0, 2.0, n_points)
    out = {}
    for g, c in enumerate(partition.centers):
        phi = float(np.arcsin(c))
        energy = beam_energy(narrow_beam(c, config.geometry.m), phi, config.geometry)
        chi = horizontal_af(pattern.s[:, g], delta, phi, energy)
        out[g] = np.abs(chi) / np.abs(horizontal_af(pattern.s[:, g], 0.0, phi, energy))
    return delta, out


def write_horizontal_af(patterns: dict, config: ExperimentConfig, path, n_points: int = 1001) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("pattern", "group", "delta", "af_norm"))
        for name, pattern in patterns.items():
            delta, curves = horizontal_af_curves(pattern, config, n_points)
            for g, vals in curves.items():
                for d, a in zip(delta, vals):
                    writer.writerow((name, g, f"{d:.6f}", f"{a:.8e}"))


def export_curves(kind: str, config: ExperimentConfig, path, pattern: GroupingPattern | None = None,
                  trace=None, n_points: int | None = None, beam_kind: str | None = None) -> None:
    """Plot-ready CSV for ``vertical-af``, ``horizontal-af`` or ``isl-trace``."""
    if kind in ("vertical-af", "vertical"):
        beam = build_beam(beam_kind or config.beams[0], config, pattern)
        write_vertical_af(beam, config.prior, path, n_points or 512)
    elif kind in ("horizontal-af", "horizontal"):
        patterns = {}
        if pattern is not None:
            patterns["optimized"] = pattern
        elif config.pattern_path is not None and config.pattern_path.is_file():
            patterns["optimized"] = read_pattern_csv(config.pattern_path)[0]
        patterns["uniform"] = GroupingPattern.uniform(config.geometry.n_y, config.groups)
        patterns["random"] = GroupingPattern.random(config.geometry.n_y, config.groups, config.beam_seed)
        write_horizontal_af(patterns, config, path, n_points or 1001)
    elif kind == "isl-trace":
        if trace is None:
            raise ValueError("isl-trace export needs an EDA trace")
        write_trace(trace, path)
    else:
        raise ValueError(f"unknown curve kind {kind!r}")
