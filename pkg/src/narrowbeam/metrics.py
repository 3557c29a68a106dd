"""Ambiguity functions, integrated side-lobe level, Fisher information and resolution limits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .array import UpaGeometry, array_response
from .beams import AnalogBeamMatrix
from .sensing import compressed_response


class UnresolvableError(ValueError):
    """The Fisher information is singular (e.g. two coinciding sources)."""


class SrlRangeError(ValueError):
    """No sign change of Delta^2 - CRB(Delta) inside the search range."""


@dataclass(frozen=True)
class SidelobeRegion:
    """Symmetric side-lobe region [-b, -a] U [a, b] in the sine-difference domain."""

    a: float
    b: float

    def __post_init__(self):
        if not 0 < self.a < self.b <= 2:
            raise ValueError(f"need 0 < a < b <= 2, got a={self.a}, b={self.b}")

    @classmethod
    def default(cls, n_y: int) -> "SidelobeRegion":
        """Exclude the full-array main lobe: a = 4 / n_y, b = 1."""
        return cls(4.0 / n_y, 1.0)

    @property
    def measure(self) -> float:
        return 2.0 * (self.b - self.a)


@dataclass(frozen=True)
class IslKernel:
    """First column of the symmetric Toeplitz side-lobe matrix for one group."""

    phi_g: float
    f: np.ndarray
    region: SidelobeRegion

    @classmethod
    def build(cls, n_y: int, phi_g: float, region: SidelobeRegion) -> "IslKernel":
        c = np.cos(phi_g)
        n = np.arange(1, n_y)
        w = n * np.pi * c
        f = np.empty(n_y)
        f[0] = 2 * region.b - 2 * region.a
        f[1:] = 2 * (np.sin(w * region.b) - np.sin(w * region.a)) / w
        return cls(float(phi_g), f, region)

    @property
    def matrix(self) -> np.ndarray:
        n = len(self.f)
        idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
        return self.f[idx]


def vertical_af(f_a, theta0: float, phi1: float, phi2: float) -> complex:
    """(F_a a_R(theta0, phi1))^H F_a a_R(theta0, phi2)."""
    dense = getattr(f_a, "dense", f_a)
    geom = f_a.geom if isinstance(f_a, AnalogBeamMatrix) else None
    if geom is None:
        raise TypeError("vertical_af needs an AnalogBeamMatrix")
    b1 = dense @ array_response(theta0, phi1, geom)
    b2 = dense @ array_response(theta0, phi2, geom)
    return complex(np.vdot(b1, b2))


def vertical_af_grid(beam: AnalogBeamMatrix, sin_theta0: float, sin_phi1, sin_phi2) -> np.ndarray:
    """Vertical AF on a grid: entry (i, j) is chi(phi1[i], phi2[j] | theta0)."""
    sin_phi1 = np.asarray(sin_phi1, dtype=float)
    sin_phi2 = np.asarray(sin_phi2, dtype=float)
    b1 = compressed_response(beam, np.full(sin_phi1.shape, sin_theta0), sin_phi1)
    b2 = compressed_response(beam, np.full(sin_phi2.shape, sin_theta0), sin_phi2)
    return b1.conj().T @ b2


def beam_energy(group_vector: np.ndarray, phi_g: float, geom: UpaGeometry) -> float:
    """a_z(phi_g)^H W_g^H W_g a_z(phi_g) for W_g built from one compression vector."""
    resp = group_vector @ np.exp(1j * np.pi * np.arange(geom.m) * np.sin(phi_g))
    return float(geom.t * abs(resp) ** 2)


def horizontal_af(s_g, delta, phi_g: float, m_energy: float):
    """Per-group horizontal AF: m_energy * s_g^T a_y(delta, phi_g)."""
    s_g = np.asarray(s_g, dtype=float)
    delta = np.asarray(delta, dtype=float)
    n = np.arange(len(s_g))
    phase = np.exp(1j * np.pi * np.multiply.outer(delta, n) * np.cos(phi_g))
    return m_energy * (phase @ s_g)


def isl(s_g, kernel: IslKernel) -> float:
    s_g = np.asarray(s_g, dtype=float)
    count = s_g.sum()
    if count < 1:
        raise ValueError("ISL of an empty group is undefined")
    return float(s_g @ kernel.matrix @ s_g / (kernel.region.measure * count**2))


def isl_batch(s: np.ndarray, kernel: IslKernel) -> np.ndarray:
    """ISL of each row of ``s`` (shape ``(B, n_y)``); empty rows give +inf."""
    s = np.asarray(s, dtype=float)
    count = s.sum(axis=1)
    quad = np.einsum("bi,ij,bj->b", s, kernel.matrix, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = quad / (kernel.region.measure * count**2)
    return np.where(count > 0, out, np.inf)


@dataclass(frozen=True)
class FimParams:
    """Two-source horizontal model of one group.

    Parameter order of the FIM: [sin theta1, sin theta2, Re a1, Re a2, Im a1, Im a2].
    """

    s_g: np.ndarray
    beam_energy: float
    phi_g: float
    sin_theta_1: float
    sin_theta_2: float
    alpha_1: complex = 1.0
    alpha_2: complex = 1.0
    noise_var: float = 0.18**2

    def __post_init__(self):
        if self.noise_var <= 0:
            raise ValueError("noise_var must be positive")
        if abs(self.sin_theta_1) > 1 or abs(self.sin_theta_2) > 1:
            raise ValueError("sin(theta) must lie in [-1, 1]")


def _fim_stack(s, u1, u2, cos_phi, energy, alpha_1, alpha_2, noise_var):
    """Batched FIM, ``s`` of shape (B, n_y), ``u1``/``u2`` of shape (B,)."""
    s = np.asarray(s, dtype=float)
    n = np.arange(s.shape[1], dtype=float)
    e1 = np.exp(1j * np.pi * np.outer(u1, n) * cos_phi)
    e2 = np.exp(1j * np.pi * np.outer(u2, n) * cos_phi)
    dphase = 1j * np.pi * n * cos_phi
    d = np.stack(
        [alpha_1 * dphase * e1, alpha_2 * dphase * e2, e1, e2, 1j * e1, 1j * e2],
        axis=1,
    )
    j = np.einsum("bin,bn,bkn->bik", d.conj(), s, d).real
    return (2.0 * energy / noise_var) * j


def fim(params: FimParams) -> np.ndarray:
    """Closed-form 6x6 Fisher information of the group's two-source model."""
    s = np.asarray(params.s_g, dtype=float)
    if s.sum() < 1:
        raise ValueError("FIM of an empty group is undefined")
    j = _fim_stack(
        s[None, :],
        np.array([params.sin_theta_1]),
        np.array([params.sin_theta_2]),
        np.cos(params.phi_g),
        params.beam_energy,
        params.alpha_1,
        params.alpha_2,
        params.noise_var,
    )[0]
    return 0.5 * (j + j.T)


_G_DELTA = np.array([-1.0, 1.0, 0.0, 0.0, 0.0, 0.0])


def crb_delta(j: np.ndarray, cond_cap: float = 1e14) -> float:
    """CRB on sin(theta2) - sin(theta1) from a 6x6 FIM."""
    j = np.asarray(j, dtype=float)
    if not np.isfinite(j).all() or np.linalg.cond(j) > cond_cap:
        raise UnresolvableError("singular Fisher information: configuration is unresolvable")
    return float(max(_G_DELTA @ np.linalg.solve(j, _G_DELTA), 0.0))


def _crb_batch(s, delta, cos_phi, energy, alpha_1, alpha_2, noise_var, reference, cond_cap):
    u1 = reference - delta / 2
    u2 = reference + delta / 2
    j = _fim_stack(s, u1, u2, cos_phi, energy, alpha_1, alpha_2, noise_var)
    j = 0.5 * (j + np.swapaxes(j, 1, 2))
    # Condition number from eigenvalues is enough for a symmetric PSD matrix.
    w = np.linalg.eigvalsh(j)
    ok = (w[:, 0] > 0) & (w[:, -1] < cond_cap * np.maximum(w[:, 0], 1e-300))
    out = np.full(len(delta), np.inf)
    if ok.any():
        g = np.broadcast_to(_G_DELTA, (int(ok.sum()), 6))
        sol = np.linalg.solve(j[ok], g[..., None])[..., 0]
        out[ok] = np.maximum(np.einsum("bi,bi->b", g, sol), 0.0)
    return out


@dataclass(frozen=True)
class SrlSetup:
    """Fixed per-group quantities used to evaluate resolution limits offline."""

    phi_g: float
    beam_energy: float
    alpha_1: complex = 1.0
    alpha_2: complex = 1.0
    noise_var: float = 0.18**2
    reference: float = 0.0
    delta_min: float = 1e-4
    delta_max: float = 1.0
    cond_cap: float = 1e14
    tol: float = 1e-8


def srl_batch(s: np.ndarray, setup: SrlSetup, n_scan: int = 48, strict: bool = False) -> np.ndarray:
    """Resolution limit of every row of ``s``: smallest root of Delta^2 = CRB(Delta).

    Rows with no root in the search range get +inf, or raise SrlRangeError
    when ``strict``.  Empty rows get +inf.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    b = s.shape[0]
    out = np.full(b, np.inf)
    nonempty = s.sum(axis=1) > 0
    if not nonempty.any():
        if strict:
            raise SrlRangeError("empty group")
        return out
    s = s[nonempty]
    nb = s.shape[0]
    cos_phi = np.cos(setup.phi_g)

    def h(rows, delta):
        crb = _crb_batch(
            s[rows], delta, cos_phi, setup.beam_energy, setup.alpha_1, setup.alpha_2,
            setup.noise_var, setup.reference, setup.cond_cap,
        )
        return delta**2 - crb

    grid = np.geomspace(setup.delta_min, setup.delta_max, n_scan)
    rows = np.repeat(np.arange(nb), n_scan)
    vals = h(rows, np.tile(grid, nb)).reshape(nb, n_scan)
    positive = vals > 0
    # first scan point where h turns positive
    first = np.argmax(positive, axis=1)
    found = positive[np.arange(nb), first] & (first > 0)
    res = np.full(nb, np.inf)
    at_min = positive[:, 0]
    if strict and not found.all():
        raise SrlRangeError("SRL outside search range")
    idx = np.nonzero(found)[0]
    if len(idx):
        lo = grid[first[idx] - 1].copy()
        hi = grid[first[idx]].copy()
        root = np.full(len(idx), np.nan)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            hm = h(idx, mid)
            pos = hm > 0
            hi = np.where(pos, mid, hi)
            lo = np.where(pos, lo, mid)
            hit = np.isnan(root) & (np.abs(hm) < setup.tol)
            root[hit] = mid[hit]
            if not np.isnan(root).any() or np.all(hi - lo <= 4 * np.finfo(float).eps * hi):
                break
        res[idx] = np.where(np.isnan(root), 0.5 * (lo + hi), root)
    res[at_min] = np.inf
    out[np.nonzero(nonempty)[0]] = res
    return out


def srl_within(s: np.ndarray, setup: SrlSetup, bound: float, n_scan: int = 48) -> np.ndarray:
    """Boolean per row: SRL <= bound, decided without locating the root.

    Uses the same scan grid as ``srl_batch`` truncated at ``bound`` plus the
    bound itself, so it agrees with ``srl_batch(s) <= bound`` whenever the
    first crossing is bracketed by that grid.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    out = np.zeros(s.shape[0], dtype=bool)
    if not np.isfinite(bound):
        return s.sum(axis=1) > 0
    if bound <= setup.delta_min:
        return out
    grid = np.geomspace(setup.delta_min, setup.delta_max, n_scan)
    pts = np.append(grid[grid < bound], min(bound, setup.delta_max))
    nonempty = np.nonzero(s.sum(axis=1) > 0)[0]
    if not len(nonempty):
        return out
    k = len(pts)
    rows = np.repeat(nonempty, k)
    delta = np.tile(pts, len(nonempty))
    crb = _crb_batch(
        s[rows], delta, np.cos(setup.phi_g), setup.beam_energy, setup.alpha_1,
        setup.alpha_2, setup.noise_var, setup.reference, setup.cond_cap,
    )
    vals = (delta**2 - crb).reshape(len(nonempty), k)
    out[nonempty] = (vals[:, 0] <= 0) & (vals > 0).any(axis=1)
    return out


def srl(s_g, setup: SrlSetup) -> float:
    """Statistical resolution limit of one group; raises SrlRangeError if not bracketed."""
    return float(srl_batch(np.asarray(s_g)[None, :], setup, strict=True)[0])
