"""Compressed array responses F_a a_R(theta, phi) evaluated without forming a_R.

For RF chain k on antenna column n and vertical block t the compressed response is

    exp(j pi n u cos(phi)) * exp(j pi t M v) * sum_m c_k[m] exp(j pi m v)

with u = sin(theta), v = sin(phi) and c_k the chain's compression vector.  This
costs O(N_RF * L) after O((N_y + T + #distinct beams * M) * L) exponentials,
instead of O(N_RF * N_r * L) for the dense product.
"""

from __future__ import annotations

import numpy as np

from .beams import AnalogBeamMatrix


class ResponseModel:
    """Per-row constants of ``F_a[rows]``, reused across many (u, v) evaluations."""

    def __init__(self, beam: AnalogBeamMatrix, rows=None):
        geom = beam.geom
        rows = np.arange(geom.n_rf) if rows is None else np.asarray(rows, dtype=int)
        self.rows = rows
        self.m = geom.m
        col = beam.row_column[rows]
        blk = beam.row_block[rows]
        self.cols, self.col_idx = np.unique(col, return_inverse=True)
        self.blocks, self.blk_idx = np.unique(blk, return_inverse=True)
        vec = beam.vectors[rows] * beam.active[rows][:, None]
        self.vecs, self.vec_idx = np.unique(vec, axis=0, return_inverse=True)
        self.vec_idx = self.vec_idx.ravel()
        # rows sharing (block, vector) share the whole vertical factor
        pairs = np.stack([self.blk_idx.ravel(), self.vec_idx], axis=1)
        self.pairs, self.pair_idx = np.unique(pairs, axis=0, return_inverse=True)
        self.pair_idx = self.pair_idx.ravel()
        self.m_idx = np.arange(geom.m)

    def _terms(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        cos_phi = np.sqrt(np.clip(1.0 - v**2, 0.0, None))
        horiz = np.exp(1j * np.pi * self.cols[:, None] * (u * cos_phi)[None, :])
        vert = np.exp(1j * np.pi * (self.blocks * self.m)[:, None] * v[None, :])
        sub = np.exp(1j * np.pi * self.m_idx[:, None] * v[None, :])
        return u, v, cos_phi, horiz, vert, sub

    def value(self, u, v) -> np.ndarray:
        _, _, _, horiz, vert, sub = self._terms(u, v)
        base = self.vecs @ sub
        vertical = vert[self.pairs[:, 0]] * base[self.pairs[:, 1]]
        return horiz[self.col_idx] * vertical[self.pair_idx]

    def grad(self, u, v):
        """``(xi, d_u, d_v)``, each of shape ``(len(rows), L)``."""
        u, v, cos_phi, horiz, vert, sub = self._terms(u, v)
        base = (self.vecs @ sub)[self.vec_idx]
        dbase = (self.vecs @ (1j * np.pi * self.m_idx[:, None] * sub))[self.vec_idx]
        phase = horiz[self.col_idx] * vert[self.blk_idx]
        xi = phase * base
        n = self.cols[self.col_idx].astype(float)
        tm = (self.blocks[self.blk_idx] * self.m).astype(float)
        d_u = 1j * np.pi * n[:, None] * cos_phi[None, :] * xi
        safe_cos = np.where(cos_phi > 1e-12, cos_phi, 1e-12)
        dphase_dv = 1j * np.pi * (n[:, None] * (u * (-v / safe_cos))[None, :] + tm[:, None])
        d_v = dphase_dv * xi + phase * dbase
        return xi, d_u, d_v


def compressed_response(beam: AnalogBeamMatrix, u, v, rows=None) -> np.ndarray:
    """Matrix whose column l is ``F_a[rows] @ a_R`` at (sin theta, sin phi) = (u[l], v[l])."""
    return ResponseModel(beam, rows).value(u, v)


def compressed_response_grad(beam: AnalogBeamMatrix, u, v, rows=None):
    """Compressed responses and their partial derivatives in u and v.

    Returns ``(xi, d_u, d_v)``, each of shape ``(len(rows), L)``.
    """
    return ResponseModel(beam, rows).grad(u, v)
