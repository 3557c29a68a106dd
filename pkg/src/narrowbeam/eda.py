"""Estimation-of-distribution search over antenna grouping patterns.

Minimizes the largest per-group ISL subject to per-group resolution-limit
bounds and the non-overlap constraint.  Individuals are ``n_y x g`` binary
matrices with at most one nonzero per row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .array import UpaGeometry, VerticalPrior
from .beams import GroupingPattern, SubIntervalPartition, narrow_beam
from .metrics import IslKernel, SidelobeRegion, SrlSetup, beam_energy, isl_batch, srl_batch, srl_within

log = logging.getLogger(__name__)


class SamplingError(RuntimeError):
    """No constraint-satisfying individual could be drawn."""


@dataclass(frozen=True)
class EdaConfig:
    q: int = 200
    t: int = 40
    i_max: int = 50
    srl_bounds: tuple[float, ...] | None = None
    rng_seed: int | None = 0
    max_attempts: int = 100

    def __post_init__(self):
        if not 1 <= self.t < self.q:
            raise ValueError("need 1 <= t < q")
        if self.i_max < 1:
            raise ValueError("i_max must be >= 1")
        if self.srl_bounds is not None and any(b <= 0 for b in self.srl_bounds):
            raise ValueError("SRL bounds must be positive")


@dataclass
class Individual:
    s_matrix: np.ndarray
    fitness: float
    feasible: bool = True

    @property
    def pattern(self) -> GroupingPattern:
        return GroupingPattern(self.s_matrix)


@dataclass
class EdaResult:
    best: Individual
    trace: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class GroupingProblem:
    """Everything the objective and constraints need, per group."""

    kernels: tuple[IslKernel, ...]
    setups: tuple[SrlSetup, ...]
    srl_bounds: tuple[float, ...]

    @property
    def g(self) -> int:
        return len(self.kernels)

    @property
    def n_y(self) -> int:
        return len(self.kernels[0].f)


def group_setups(
    geom: UpaGeometry,
    g: int,
    prior: VerticalPrior = VerticalPrior(),
    region: SidelobeRegion | None = None,
    noise_var: float = 0.18**2,
    alpha: complex = 1.0,
) -> tuple[tuple[IslKernel, ...], tuple[SrlSetup, ...]]:
    """ISL kernels and SRL setups with phi_g at each sub-interval center."""
    region = region or SidelobeRegion.default(geom.n_y)
    centers = SubIntervalPartition.uniform(prior, g).centers
    kernels, setups = [], []
    for c in centers:
        phi = float(np.arcsin(c))
        kernels.append(IslKernel.build(geom.n_y, phi, region))
        energy = beam_energy(narrow_beam(c, geom.m), phi, geom)
        setups.append(SrlSetup(phi, energy, alpha, alpha, noise_var))
    return tuple(kernels), tuple(setups)


def calibrate_srl_bounds(setups, n_y: int, n_patterns: int = 200, slack: float = 1.1, rng_seed=0):
    """rho_g = slack * median SRL of group g over random patterns with nonempty groups."""
    rng = np.random.default_rng(rng_seed)
    g = len(setups)
    pats = np.stack([GroupingPattern.random(n_y, g, rng).s for _ in range(n_patterns)])
    return tuple(float(slack * np.median(srl_batch(pats[:, :, k], st))) for k, st in enumerate(setups))


def fitness_batch(s: np.ndarray, kernels) -> np.ndarray:
    """Max-group ISL of each individual in ``s`` (shape ``(B, n_y, g)``); +inf if any group is empty."""
    s = np.asarray(s)
    vals = np.stack([isl_batch(s[:, :, k], ker) for k, ker in enumerate(kernels)], axis=1)
    return vals.max(axis=1)


def fitness(pattern, kernels) -> float:
    s = pattern.s if isinstance(pattern, GroupingPattern) else np.asarray(pattern)
    return float(fitness_batch(s[None], kernels)[0])


def feasible_batch(s: np.ndarray, setups, bounds) -> np.ndarray:
    s = np.asarray(s)
    ok = (s.sum(axis=1) > 0).all(axis=1)
    for k, (st, rho) in enumerate(zip(setups, bounds)):
        idx = np.nonzero(ok)[0]
        if not len(idx):
            break
        ok[idx] = srl_within(s[idx, :, k], st, rho)
    return ok


def check_feasible(pattern, srl_bounds, setups) -> bool:
    s = pattern.s if isinstance(pattern, GroupingPattern) else np.asarray(pattern)
    return bool(feasible_batch(s[None], setups, srl_bounds)[0])


def select_elite(population: np.ndarray, fitnesses: np.ndarray, t: int) -> np.ndarray:
    """Indices of the ``t`` fittest individuals, ties broken by lexicographic pattern order."""
    population = np.asarray(population)
    if t > len(population):
        raise ValueError("elite size exceeds population")
    flat = population.reshape(len(population), -1)
    keys = [flat[:, j] for j in range(flat.shape[1] - 1, -1, -1)] + [np.asarray(fitnesses)]
    return np.lexsort(keys)[:t]


def update_probability(elite: np.ndarray) -> np.ndarray:
    """Entry-wise mean of the elite binary matrices."""
    elite = np.asarray(elite)
    if len(elite) == 0:
        raise ValueError("empty elite")
    return elite.mean(axis=0)


def _sample_raw(p: np.ndarray, n: int, rng) -> np.ndarray:
    """Per-row categorical draw: group g w.p. p(n,g), unassigned w.p. max(0, 1 - sum_g p(n,g))."""
    n_y, g = p.shape
    weights = np.concatenate([p, np.clip(1.0 - p.sum(axis=1, keepdims=True), 0.0, None)], axis=1)
    weights = weights / weights.sum(axis=1, keepdims=True)
    cdf = np.cumsum(weights, axis=1)
    draws = rng.random((n, n_y, 1))
    labels = (draws > cdf[None, :, :]).sum(axis=2)
    labels = np.minimum(labels, g)
    s = np.zeros((n, n_y, g + 1), dtype=np.int8)
    np.put_along_axis(s, labels[:, :, None], 1, axis=2)
    return s[:, :, :g]


def _repair(s: np.ndarray, rng) -> np.ndarray:
    """Move a random antenna column into every empty group."""
    s = s.copy()
    for ind in s:
        for g in np.nonzero(ind.sum(axis=0) == 0)[0]:
            counts = ind.sum(axis=0)
            # take a column from a group that can spare one, or an unassigned one
            donors = [n for n in range(ind.shape[0]) if ind[n].sum() == 0 or counts[ind[n].argmax()] > 1]
            if not donors:
                continue
            n = rng.choice(donors)
            ind[n] = 0
            ind[n, g] = 1
    return s


def sample_population(p: np.ndarray, n: int, problem: GroupingProblem, rng, max_attempts: int = 100) -> np.ndarray:
    """Draw ``n`` individuals satisfying non-overlap, non-emptiness and the SRL bounds.

    At most ``max_attempts`` raw draws per requested individual are spent.
    """
    out = []
    budget = max_attempts * n
    drawn = 0
    while len(out) < n and drawn < budget:
        need = n - len(out)
        batch = min(max(4 * need, 256), budget - drawn)
        cand = _repair(_sample_raw(p, batch, rng), rng)
        drawn += batch
        ok = feasible_batch(cand, problem.setups, problem.srl_bounds)
        out.extend(cand[ok][:need])
    if len(out) < n:
        raise SamplingError(f"only {len(out)} of {n} feasible individuals after {drawn} draws")
    return np.stack(out)


def sample_individual(p: np.ndarray, problem: GroupingProblem, rng, max_attempts: int = 100) -> Individual:
    s = sample_population(p, 1, problem, rng, max_attempts)[0]
    return Individual(s, fitness(s, problem.kernels), True)


def run_eda(config: EdaConfig, problem: GroupingProblem, callback=None) -> EdaResult:
    """Elitist EDA; ``trace[i]`` is the best fitness after evaluating generation ``i``."""
    rng = np.random.default_rng(config.rng_seed)
    n_y, g = problem.n_y, problem.g
    p0 = np.full((n_y, g), 1.0 / g)
    try:
        pop = sample_population(p0, config.q, problem, rng, max_attempts=max(config.max_attempts, 100))
    except SamplingError as exc:
        raise SamplingError(f"initialization failed: {exc}") from exc
    trace = []
    best_s, best_f = None, np.inf
    for it in range(config.i_max):
        fit = fitness_batch(pop, problem.kernels)
        order = select_elite(pop, fit, config.t)
        if fit[order[0]] < best_f:
            best_s, best_f = pop[order[0]].copy(), float(fit[order[0]])
        trace.append(best_f)
        if callback is not None:
            callback(it, best_f)
        log.debug("eda iteration %d best %.6g", it, best_f)
        if it == config.i_max - 1:
            break
        p = update_probability(pop[order])
        fresh = sample_population(p, config.q - 1, problem, rng, config.max_attempts)
        pop = np.concatenate([best_s[None], fresh])
    return EdaResult(Individual(best_s, best_f, True), trace)


def build_problem(
    geom: UpaGeometry,
    g: int,
    prior: VerticalPrior = VerticalPrior(),
    region: SidelobeRegion | None = None,
    srl_bounds=None,
    noise_var: float = 0.18**2,
    calibration_seed=0,
    slack: float = 1.1,
    n_patterns: int = 200,
) -> GroupingProblem:
    kernels, setups = group_setups(geom, g, prior, region, noise_var)
    if srl_bounds is None:
        srl_bounds = calibrate_srl_bounds(setups, geom.n_y, n_patterns, slack, rng_seed=calibration_seed)
    return GroupingProblem(kernels, setups, tuple(float(b) for b in srl_bounds))


def exhaustive_optimum(problem: GroupingProblem, chunk: int = 1 << 16) -> tuple[np.ndarray, float]:
    """Best feasible pattern by enumerating all (g+1)^n_y row labelings.

    Patterns are ranked by fitness and the SRL constraint is checked lazily
    in that order.  Only practical for small ``n_y``.
    """
    n_y, g = problem.n_y, problem.g
    total = (g + 1) ** n_y
    fits = np.empty(total)
    powers = (g + 1) ** np.arange(n_y)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total))
        labels = (codes[:, None] // powers[None, :]) % (g + 1)
        s = (labels[:, :, None] == np.arange(g)[None, None, :]).astype(np.int8)
        fits[start:start + len(codes)] = fitness_batch(s, problem.kernels)
    order = np.argsort(fits, kind="stable")
    for begin in range(0, total, 256):
        idx = order[begin:begin + 256]
        idx = idx[np.isfinite(fits[idx])]
        if not len(idx):
            break
        labels = (idx[:, None] // powers[None, :]) % (g + 1)
        s = (labels[:, :, None] == np.arange(g)[None, None, :]).astype(np.int8)
        ok = feasible_batch(s, problem.setups, problem.srl_bounds)
        if ok.any():
            first = int(np.argmax(ok))
            return s[first], float(fits[idx[first]])
    raise SamplingError("no feasible pattern exists")
