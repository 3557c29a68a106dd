"""Angle-domain sparse channel estimation on a dynamic grid.

The mean-field solver works on ``y = Xi x + w`` with the three-layer prior
support -> precision -> signal.  The Gaussian posterior of ``x`` is computed
exactly on the current support only (a dense ``|S| x |S|`` solve) and by a
per-coordinate residual update elsewhere.  Grid points on the support are
moved by Armijo gradient ascent on the data fit.

Grid coordinates are sines: ``u = sin(theta)``, ``v = sin(phi)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .array import UpaGeometry, VerticalPrior, array_response_sin
from .beams import AnalogBeamMatrix, SubIntervalPartition
from .sensing import ResponseModel, compressed_response


THREADS_ENV = "NARROWBEAM_THREADS"


def thread_count() -> int:
    """Worker threads for independent per-group solves (``NARROWBEAM_THREADS``, default 1)."""
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


class OverDenseError(RuntimeError):
    """The estimated support has more points than there are observations."""


@dataclass(frozen=True)
class DynamicGrid:
    u: np.ndarray
    v: np.ndarray
    group_index: np.ndarray
    l1: int
    l2: int

    @classmethod
    def uniform(
        cls,
        l1: int,
        l2: int,
        prior: VerticalPrior,
        partition: SubIntervalPartition | None = None,
        azimuth_range: tuple[float, float] = (-1.0, 1.0),
    ) -> "DynamicGrid":
        """Cell-centered uniform grid in the sine domain, labeled by sub-interval."""
        lo, hi = azimuth_range
        u1 = lo + (np.arange(l1) + 0.5) * (hi - lo) / l1
        v1 = prior.sin_lo + (np.arange(l2) + 0.5) * prior.width / l2
        u, v = np.meshgrid(u1, v1, indexing="ij")
        u, v = u.ravel(), v.ravel()
        if partition is None:
            labels = np.zeros(u.size, dtype=int)
        else:
            labels = partition.label(v)
        return cls(u, v, labels, l1, l2)

    @property
    def size(self) -> int:
        return self.u.size

    @property
    def spacing(self) -> tuple[float, float]:
        return float(np.ptp(np.unique(self.u)) / max(self.l1 - 1, 1)), float(
            np.ptp(np.unique(self.v)) / max(self.l2 - 1, 1)
        )

    def group(self, g: int) -> np.ndarray:
        return np.nonzero(self.group_index == g)[0]


@dataclass(frozen=True)
class SparsePriorConfig:
    lam: float
    a: float = 1.0
    b: float = 1.0
    a_bar: float = 1e3
    b_bar: float = 1.0

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError("sparsity ratio must lie in (0, 1)")
        if min(self.a, self.b, self.a_bar, self.b_bar) <= 0:
            raise ValueError("Gamma parameters must be positive")
        if self.a_bar / self.b_bar < 1e3 * self.a / self.b:
            raise ValueError("inactive precision mean must be >= 1e3 x the active one")


@dataclass
class PosteriorState:
    x_mean: np.ndarray
    x_var: np.ndarray
    rho_mean: np.ndarray
    s_prob: np.ndarray
    support: np.ndarray

    def copy(self) -> "PosteriorState":
        return PosteriorState(
            self.x_mean.copy(), self.x_var.copy(), self.rho_mean.copy(), self.s_prob.copy(), self.support.copy()
        )

    def take(self, idx) -> "PosteriorState":
        """Sub-state restricted to indices ``idx`` (support re-indexed)."""
        idx = np.asarray(idx)
        pos = {int(j): i for i, j in enumerate(idx)}
        support = np.array([pos[int(j)] for j in self.support if int(j) in pos], dtype=int)
        return PosteriorState(self.x_mean[idx], self.x_var[idx], self.rho_mean[idx], self.s_prob[idx], support)


@dataclass(frozen=True)
class EstimatorConfig:
    k_expected: int = 10
    j_max: int = 30
    d_joint: int = 5
    b_steps: int = 3
    init_step: float = 0.01
    backtrack: float = 0.5
    armijo_c: float = 1e-4
    max_backtracks: int = 20
    threshold: float = 0.5
    merge_coherence: float = 0.95
    init_factor: float = 1.5
    coherence: float = 0.5
    max_new: int = 2
    joint_grid: bool = True
    l1: int | None = None
    l2: int = 64

    def grid_sizes(self, geom: UpaGeometry) -> tuple[int, int]:
        return (self.l1 or 2 * geom.n_y), self.l2


@dataclass(frozen=True)
class GroupObservation:
    rows: np.ndarray
    y_g: np.ndarray
    f_bar: np.ndarray


@dataclass
class EstimateResult:
    h_hat: np.ndarray
    u: np.ndarray
    v: np.ndarray
    x: np.ndarray
    status: str = "ok"
    state: PosteriorState | None = None
    grid: DynamicGrid | None = None
    shapes: list = field(default_factory=list)

    @property
    def support_size(self) -> int:
        return int(len(self.x))


def nmse(h_hat, h_true) -> float:
    h_hat = np.asarray(h_hat)
    h_true = np.asarray(h_true)
    if h_hat.shape != h_true.shape:
        raise ValueError("length mismatch")
    den = np.vdot(h_true, h_true).real
    if den <= 0:
        raise ValueError("true channel is zero")
    return float(np.vdot(h_hat - h_true, h_hat - h_true).real / den)


def build_sensing_matrix(f_a: AnalogBeamMatrix, grid: DynamicGrid) -> np.ndarray:
    """F_a A(Omega), one column per grid point."""
    return compressed_response(f_a, grid.u, grid.v)


def partition_groups(y, f_a: AnalogBeamMatrix, grid: DynamicGrid):
    """Per-group reduced models: (observation, Xi_g, grid indices of the group)."""
    if not f_a.is_group_wise:
        raise ValueError("group decomposition needs a group-wise beam matrix")
    y = np.asarray(y)
    g_count = f_a.pattern.g
    if grid.group_index.min() < 0 or grid.group_index.max() >= g_count:
        raise ValueError("grid points must carry a label in 0..G-1")
    out = []
    for g in range(g_count):
        rows = f_a.group_rows(g)
        idx = grid.group(g)
        f_bar = f_a.dense[rows]
        xi = compressed_response(f_a, grid.u[idx], grid.v[idx], rows=rows)
        out.append((GroupObservation(rows, y[rows], f_bar), xi, idx))
    return out


def _logit_and_rho(ex2, prior: SparsePriorConfig):
    a, b, ab, bb = prior.a, prior.b, prior.a_bar, prior.b_bar
    # structured mean field: q(rho, s) = q(s) q(rho | s), Gamma-Gaussian evidence per hypothesis
    active = a * math.log(b) + math.log(a) - (a + 1) * np.log(b + ex2)
    inactive = ab * math.log(bb) + math.log(ab) - (ab + 1) * np.log(bb + ex2)
    logit = math.log(prior.lam / (1 - prior.lam)) + active - inactive
    s = 0.5 * (1 + np.tanh(0.5 * logit))
    rho = s * (a + 1) / (b + ex2) + (1 - s) * (ab + 1) / (bb + ex2)
    return s, rho


def init_state(y, sensing, prior: SparsePriorConfig, n_init: int) -> PosteriorState:
    """Support seeded with ``n_init`` points picked by orthogonal greedy matching.

    Each pick maximizes the normalized correlation with the residual left
    after projecting ``y`` onto the points already picked, so the seed neither
    clusters around one dominant path nor favors its grating lobes.
    """
    L = sensing.shape[1]
    n_init = int(min(max(n_init, 0), L, sensing.shape[0]))
    _, support = omp(y, sensing, k_max=n_init) if n_init else (None, np.zeros(0, dtype=int))
    support = np.sort(support)
    s_prob = np.full(L, prior.lam)
    s_prob[support] = 1.0
    rho = np.full(L, prior.a_bar / prior.b_bar)
    rho[support] = prior.a / prior.b
    return PosteriorState(np.zeros(L, dtype=complex), 1.0 / rho, rho, s_prob, support)


def scvbi_iterate(
    y, sensing, prior: SparsePriorConfig, state: PosteriorState, noise_var: float,
    threshold: float = 0.5, coherence: float = 0.5, col_norm2=None, max_new: int | None = None,
) -> PosteriorState:
    """One mean-field sweep over q(x), q(rho), q(s) with a support-constrained x update."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    y = np.asarray(y)
    R, L = sensing.shape
    S = np.asarray(state.support, dtype=int)
    if len(S) > R:
        raise OverDenseError(f"support of size {len(S)} exceeds {R} observations")
    if col_norm2 is None:
        col_norm2 = np.einsum("rl,rl->l", sensing.conj(), sensing).real
    rho = state.rho_mean
    mean = np.zeros(L, dtype=complex)
    var = np.empty(L)
    resid = y.copy()
    if len(S):
        xs = sensing[:, S]
        prec = xs.conj().T @ xs / noise_var + np.diag(rho[S])
        cf = cho_factor(prec, lower=True)
        mean_s = cho_solve(cf, xs.conj().T @ y / noise_var)
        cov = cho_solve(cf, np.eye(len(S)))
        resid = y - xs @ mean_s
    denom = col_norm2 + noise_var * rho
    mean[:] = (resid.conj() @ sensing).conj() / denom
    var[:] = noise_var / denom
    if len(S):
        mean[S] = mean_s
        var[S] = np.maximum(np.real(np.diag(cov)), np.finfo(float).tiny)
    ex2 = np.abs(mean) ** 2 + var
    s_prob, rho_new = _logit_and_rho(ex2, prior)

    keep = S[s_prob[S] > threshold]
    cand = np.setdiff1d(np.nonzero(s_prob > threshold)[0], S)
    added = []
    if len(cand):
        # admit new points strongest first, skipping ones coherent with a kept or admitted point
        cand = cand[np.argsort(-ex2[cand], kind="stable")]
        unit = lambda idx: sensing[:, idx] / np.sqrt(np.maximum(col_norm2[idx], np.finfo(float).tiny))
        cols = unit(cand)
        near = np.zeros(len(cand), dtype=bool)
        if len(keep):
            near = np.abs(unit(keep).conj().T @ cols).max(axis=0) >= coherence
        room = R - len(keep) if max_new is None else min(R - len(keep), max_new)
        for i in range(len(cand)):
            if len(added) >= room:
                break
            if not near[i] and all(abs(np.vdot(cols[:, j], cols[:, i])) < coherence for j in added):
                added.append(i)
        added = list(cand[added])
    support = np.sort(np.concatenate([keep, np.asarray(added, dtype=int)])).astype(int)
    return PosteriorState(mean, var, rho_new, s_prob, support)


def _fit(y, xi_s, x_s):
    r = y - xi_s @ x_s
    return -float(np.vdot(r, r).real), r


def fit_gradient(r, d_u, d_v, x):
    """Gradient of -||y - Xi x||^2 in (u, v) given the residual ``r`` and column derivatives."""
    g_u = 2 * np.real(r.conj() @ (d_u * x[None, :]))
    g_v = 2 * np.real(r.conj() @ (d_v * x[None, :]))
    return g_u, g_v


def _newton_scale(g, d, x):
    curv = 2 * np.abs(x) ** 2 * np.einsum("rl,rl->l", d.conj(), d).real
    return np.divide(g, curv, out=np.zeros_like(g), where=curv > 0)


class RefineHistory(list):
    """Objective values of accepted steps, plus the last accepted move size."""

    last_move: float


def grid_refine(u, v, x, y, builder, b_steps: int = 3, bounds=None, init_step: float = 0.01,
                backtrack: float = 0.5, armijo_c: float = 1e-4, max_backtracks: int = 20,
                first_step: float | None = None):
    """Armijo gradient ascent of -||y - Xi_S(u, v) x_S||^2 over the support coordinates.

    ``builder(u, v)`` returns ``(xi, d_u, d_v)`` for the given points and
    ``builder(u, v, grad=False)`` just ``xi``.
    ``bounds`` is ``(u_lo, u_hi, v_lo, v_hi)`` (scalars or per-point arrays).
    ``init_step`` caps the largest coordinate move of every trial step; the
    first trial uses ``first_step`` (default ``init_step``) and later ones
    twice the previous accepted move.  Returns ``(u, v, history)`` where ``history`` lists the
    objective after each accepted step (first entry is the starting value)
    and ``history.last_move`` is the last accepted largest move.
    """
    u = np.array(u, dtype=float)
    v = np.array(v, dtype=float)
    x = np.asarray(x, dtype=complex)
    if bounds is None:
        bounds = (-1.0, 1.0, -1.0, 1.0)
    u_lo, u_hi, v_lo, v_hi = bounds
    obj, r = _fit(y, builder(u, v, grad=False), x)
    history = RefineHistory([obj])
    history.last_move = init_step
    if not len(u) or not np.any(x):
        return u, v, history
    move = min(init_step, first_step or init_step)
    _, d_u, d_v = builder(u, v)
    for _ in range(b_steps):
        g_u, g_v = fit_gradient(r, d_u, d_v, x)
        if not (np.isfinite(g_u).all() and np.isfinite(g_v).all()):
            break
        # diagonal Gauss-Newton scaling: weak atoms and flat coordinates get longer steps
        p_u, p_v = _newton_scale(g_u, d_u, x), _newton_scale(g_v, d_v, x)
        gmax = max(np.abs(p_u).max(), np.abs(p_v).max())
        if gmax <= 0:
            break
        step = move / gmax
        accepted = False
        for _ in range(max_backtracks):
            nu = np.clip(u + step * p_u, u_lo, u_hi)
            nv = np.clip(v + step * p_v, v_lo, v_hi)
            gain = g_u @ (nu - u) + g_v @ (nv - v)
            n_obj, n_r = _fit(y, builder(nu, nv, grad=False), x)
            if np.isfinite(n_obj) and n_obj >= obj + armijo_c * gain and n_obj >= obj:
                accepted = True
                break
            step *= backtrack
        if not accepted:
            break
        u, v, obj, r = nu, nv, n_obj, n_r
        history.last_move = step * gmax
        move = min(init_step, 2 * history.last_move)
        _, d_u, d_v = builder(u, v)
        history.append(obj)
    return u, v, history


class _Solver:
    """Alternating mean-field / grid-refinement loop on one (sub)model."""

    def __init__(self, y, beam, rows, u, v, v_bounds, prior, noise_var, config: EstimatorConfig):
        self.y = np.asarray(y)
        self.beam = beam
        self.rows = rows
        self.u = np.array(u, dtype=float)
        self.v = np.array(v, dtype=float)
        self.v_lo = np.broadcast_to(np.asarray(v_bounds[0], dtype=float), self.u.shape).copy()
        self.v_hi = np.broadcast_to(np.asarray(v_bounds[1], dtype=float), self.u.shape).copy()
        self.prior = prior
        self.noise_var = noise_var
        self.config = config
        self.model = ResponseModel(beam, rows)
        self.xi = self.model.value(self.u, self.v)
        self.norm2 = np.einsum("rl,rl->l", self.xi.conj(), self.xi).real
        # Armijo trial steps are warm-started from the previous accepted move
        self.move = config.init_step

    @property
    def shape(self):
        return self.xi.shape

    def builder(self, u, v, grad=True):
        return self.model.grad(u, v) if grad else self.model.value(u, v)

    def _refresh(self, idx):
        if len(idx):
            cols = self.model.value(self.u[idx], self.v[idx])
            self.xi[:, idx] = cols
            self.norm2[idx] = np.einsum("rl,rl->l", cols.conj(), cols).real

    def sweep(self, state: PosteriorState) -> PosteriorState:
        cfg = self.config
        state = scvbi_iterate(
            self.y, self.xi, self.prior, state, self.noise_var, cfg.threshold, cfg.coherence, self.norm2, cfg.max_new
        )
        S = state.support
        if not len(S):
            return state
        nu, nv, hist = grid_refine(
            self.u[S], self.v[S], state.x_mean[S], self.y, self.builder, cfg.b_steps,
            (-1.0, 1.0, self.v_lo[S], self.v_hi[S]), cfg.init_step, cfg.backtrack, cfg.armijo_c,
            cfg.max_backtracks, first_step=2 * self.move,
        )
        self.move = hist.last_move
        moved = S[(nu != self.u[S]) | (nv != self.v[S])]
        self.u[S], self.v[S] = nu, nv
        self._refresh(moved)
        return self._merge(state)

    def _merge(self, state: PosteriorState) -> PosteriorState:
        """Fold support points that sit closer than the array resolution into the stronger one."""
        S = np.array(state.support, dtype=int)
        if len(S) < 2:
            return state
        cols = self.xi[:, S] / np.sqrt(np.maximum(self.norm2[S], 1e-300))
        coh = np.abs(cols.conj().T @ cols)
        order = np.argsort(-np.abs(state.x_mean[S]), kind="stable")
        dropped = set()
        for i, a in enumerate(order):
            if a in dropped:
                continue
            for b in order[i + 1:]:
                if b not in dropped and coh[a, b] >= self.config.merge_coherence:
                    state.x_mean[S[a]] += state.x_mean[S[b]]
                    state.x_mean[S[b]] = 0
                    state.s_prob[S[b]] = self.prior.lam
                    state.rho_mean[S[b]] = self.prior.a_bar / self.prior.b_bar
                    dropped.add(b)
        if dropped:
            state.support = np.array([l for k, l in enumerate(S) if k not in dropped], dtype=int)
        return state

    def run(self, state: PosteriorState, iterations: int) -> PosteriorState:
        for _ in range(iterations):
            state = self.sweep(state)
        # final posterior on the refined grid
        return scvbi_iterate(
            self.y, self.xi, self.prior, state, self.noise_var, self.config.threshold,
            self.config.coherence, self.norm2, self.config.max_new,
        )


def _active_rows(beam: AnalogBeamMatrix) -> np.ndarray:
    return np.nonzero(beam.active)[0]


def _reconstruct(geom, u, v, x) -> np.ndarray:
    if not len(x):
        return np.zeros(geom.n_r, dtype=complex)
    return array_response_sin(u, v, geom) @ x


def default_grid(beam: AnalogBeamMatrix, prior: VerticalPrior, config: EstimatorConfig, g: int | None = None):
    l1, l2 = config.grid_sizes(beam.geom)
    if g is None:
        g = beam.pattern.g if beam.is_group_wise else 1
    return DynamicGrid.uniform(l1, l2, prior, SubIntervalPartition.uniform(prior, g))


def default_prior(grid: DynamicGrid, config: EstimatorConfig) -> SparsePriorConfig:
    return SparsePriorConfig(lam=min(config.k_expected / grid.size, 0.5))


def gw_scvbi(y, f_a: AnalogBeamMatrix, grid: DynamicGrid, prior: SparsePriorConfig, noise_var: float,
             config: EstimatorConfig = EstimatorConfig(), vertical_prior: VerticalPrior = VerticalPrior()) -> EstimateResult:
    """Group-wise estimation followed by joint refinement on the merged supports."""
    if not f_a.is_group_wise:
        raise ValueError("gw_scvbi needs a group-wise beam matrix")
    y = np.asarray(y)
    geom = f_a.geom
    g_count = f_a.pattern.g
    edges = np.linspace(vertical_prior.sin_lo, vertical_prior.sin_hi, g_count + 1)
    n_init = math.ceil(config.init_factor * config.k_expected / g_count)

    def solve_group(g):
        rows = f_a.group_rows(g)
        idx = grid.group(g)
        if not len(rows) or not len(idx):
            return None
        solver = _Solver(y[rows], f_a, rows, grid.u[idx], grid.v[idx], (edges[g], edges[g + 1]),
                         prior, noise_var, config)
        state = init_state(solver.y, solver.xi, prior, n_init)
        state = solver.run(state, config.j_max)
        S = state.support
        return solver.shape, solver.u[S], solver.v[S], state.x_mean[S], state.rho_mean[S]

    workers = min(thread_count(), g_count)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outputs = list(pool.map(solve_group, range(g_count)))
    else:
        outputs = [solve_group(g) for g in range(g_count)]
    outputs = [o for o in outputs if o is not None]
    shapes = [o[0] for o in outputs]
    picked_u, picked_v, picked_x, picked_rho = ([o[i] for o in outputs] for i in range(1, 5))
    u = np.concatenate(picked_u) if picked_u else np.zeros(0)
    if not len(u):
        return EstimateResult(np.zeros(geom.n_r, dtype=complex), u, u, u.astype(complex), "empty", shapes=shapes)
    v = np.concatenate(picked_v)
    x = np.concatenate(picked_x)
    rho = np.concatenate(picked_rho)
    rows = _active_rows(f_a)
    # leaked paths show up as coherent copies in neighboring groups, with amplitudes inflated by the
    # weaker beam gain there; keep the copy that best matches the full observation
    model = ResponseModel(f_a, rows)
    cols = model.value(u, v)
    cols = cols / np.linalg.norm(cols, axis=0)
    score = np.abs(cols.conj().T @ y[rows])
    kept: list[int] = []
    for l in np.argsort(-score, kind="stable"):
        if all(abs(np.vdot(cols[:, j], cols[:, l])) < config.coherence for j in kept):
            kept.append(int(l))
    kept = np.sort(np.array(kept, dtype=int))
    u, v, x, rho = u[kept], v[kept], x[kept], rho[kept]
    n_s = len(u)
    if n_s > len(rows):
        raise OverDenseError(f"merged support of size {n_s} exceeds {len(rows)} observations")
    if config.joint_grid:
        # keep the full grid as candidates so paths masked by leakage in the group stage can enter
        u, v = np.concatenate([u, grid.u]), np.concatenate([v, grid.v])
    solver = _Solver(y[rows], f_a, rows, u, v, (vertical_prior.sin_lo, vertical_prior.sin_hi),
                     prior, noise_var, config)
    shapes.append(solver.shape)
    L = solver.shape[1]
    x_all = np.zeros(L, dtype=complex)
    x_all[:n_s] = x
    rho_all = np.full(L, prior.a_bar / prior.b_bar)
    rho_all[:n_s] = rho
    s_all = np.full(L, prior.lam)
    s_all[:n_s] = 1.0
    state = PosteriorState(x_all, 1.0 / rho_all, rho_all, s_all, np.arange(n_s))
    state = solver.run(state, config.d_joint)
    S = state.support
    h_hat = _reconstruct(geom, solver.u[S], solver.v[S], state.x_mean[S])
    status = "ok" if len(S) else "empty"
    return EstimateResult(h_hat, solver.u[S], solver.v[S], state.x_mean[S], status, state, grid, shapes)


def scvbi_full(y, f_a: AnalogBeamMatrix, grid: DynamicGrid, prior: SparsePriorConfig, noise_var: float,
               config: EstimatorConfig = EstimatorConfig(), vertical_prior: VerticalPrior = VerticalPrior()) -> EstimateResult:
    """The same machinery on the undecomposed model."""
    y = np.asarray(y)
    rows = _active_rows(f_a)
    solver = _Solver(y[rows], f_a, rows, grid.u, grid.v, (vertical_prior.sin_lo, vertical_prior.sin_hi),
                     prior, noise_var, config)
    state = init_state(solver.y, solver.xi, prior, math.ceil(config.init_factor * config.k_expected))
    state = solver.run(state, config.j_max)
    S = state.support
    h_hat = _reconstruct(f_a.geom, solver.u[S], solver.v[S], state.x_mean[S])
    status = "ok" if len(S) else "empty"
    return EstimateResult(h_hat, solver.u[S], solver.v[S], state.x_mean[S], status, state, grid, [solver.shape])


def omp(y, sensing, k_max: int | None = None, residual_tol: float = 0.0):
    """Greedy pursuit with least-squares refit.

    Returns ``(x, support)``.  Stops after ``k_max`` atoms, when the residual
    energy drops to ``residual_tol`` or when the selected set turns rank
    deficient.
    """
    y = np.asarray(y)
    R, L = sensing.shape
    norms = np.sqrt(np.einsum("rl,rl->l", sensing.conj(), sensing).real)
    if np.all(norms == 0):
        raise ValueError("sensing matrix has no nonzero columns")
    inv = np.where(norms > 0, 1.0 / np.where(norms > 0, norms, 1.0), 0.0)
    k_max = min(k_max or R, R, L)
    support: list[int] = []
    coef = np.zeros(0, dtype=complex)
    resid = y.copy()
    for _ in range(k_max):
        if np.vdot(resid, resid).real <= residual_tol:
            break
        score = np.abs(resid.conj() @ sensing) * inv
        score[support] = -1
        j = int(np.argmax(score))
        trial = support + [j]
        a = sensing[:, trial]
        sol, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
        if rank < len(trial):
            break
        support, coef = trial, sol
        resid = y - a @ coef
    x = np.zeros(L, dtype=complex)
    x[support] = coef
    return x, np.array(support, dtype=int)


def omp_estimate(y, f_a: AnalogBeamMatrix, grid: DynamicGrid, noise_var: float,
                 config: EstimatorConfig = EstimatorConfig()) -> EstimateResult:
    """OMP on the full model; up to 2K atoms or residual energy at the noise floor."""
    y = np.asarray(y)
    rows = _active_rows(f_a)
    xi = compressed_response(f_a, grid.u, grid.v, rows=rows)
    x, support = omp(y[rows], xi, k_max=2 * config.k_expected, residual_tol=len(rows) * noise_var)
    h_hat = _reconstruct(f_a.geom, grid.u[support], grid.v[support], x[support])
    return EstimateResult(h_hat, grid.u[support], grid.v[support], x[support], "ok", grid=grid, shapes=[xi.shape])
