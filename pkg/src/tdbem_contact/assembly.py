"""Galerkin blocks V, K, W, the mass matrix M, coupled blocks S and loads.

Raw matrices R(s) are the space Galerkin integrals of time antiderivatives
of the kernels at time s (see `_galerkin`).  The lag-d blocks are second
differences in time,

    V(d) = R_V((d+1)dt) - 2 R_V(d dt) + R_V((d-1)dt),
    K(d) = D2 R_K / dt,   W(d) = D2 R_W / dt^2,

with R(s <= 0) = 0.  A single sweep over s = dt, 2dt, ..., N dt with a
window of three raw matrices yields every block.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import _galerkin
from .geometry import BoundaryMesh, DofLayout, Material, TimeGrid
from .quadrature import QuadratureConfig, gauss_rule

log = logging.getLogger(__name__)

FORMULATIONS = ("nonsymmetric", "symmetric")


@dataclass
class OperatorBlock:
    matrix: np.ndarray
    lag: int
    kind: str


class BlockLowerToeplitz:
    """Distinct blocks S(0) .. S(N-1) of a lower block-triangular Toeplitz
    matrix; S(l) multiplies X_(k-l) in the equation of step k.

    Storage: S(0) densely, and the lags l >= 1 as `tail` of shape
    (r, N-1, n) holding only the first r rows of each block (the remaining
    rows are zero, e.g. the lower block row of the non-symmetric
    formulation).  For fixed r the slice tail[:, :l, :] is a strided
    (r, l*n) matrix, so a whole history sum is one matrix product.
    """

    def __init__(self, S0, tail, formulation: str, meta: dict | None = None):
        self.S0 = np.asarray(S0, float)
        self.tail = tail
        self.formulation = formulation
        self.meta = dict(meta or {})
        n = self.S0.shape[0]
        if tail.shape[2] != n or tail.shape[0] > n:
            raise ValueError("tail blocks must have n columns and at most n rows")

    @classmethod
    def from_blocks(cls, blocks, formulation: str = "generic", rows: int | None = None,
                    meta=None):
        blocks = np.asarray(blocks, float)
        N, n, _ = blocks.shape
        r = n if rows is None else rows
        tail = np.ascontiguousarray(np.transpose(blocks[1:, :r, :], (1, 0, 2)))
        return cls(blocks[0], tail, formulation, meta)

    @property
    def n_steps(self) -> int:
        return self.tail.shape[1] + 1

    @property
    def block_size(self) -> int:
        return self.S0.shape[0]

    @property
    def tail_rows(self) -> int:
        return self.tail.shape[0]

    def block(self, lag: int) -> np.ndarray:
        if lag == 0:
            return self.S0.copy()
        B = np.zeros((self.block_size, self.block_size))
        B[:self.tail_rows] = self.tail[:, lag - 1, :]
        return B

    @property
    def blocks(self) -> np.ndarray:
        """All blocks as an (N, n, n) array (materialized; small systems)."""
        return np.stack([self.block(l) for l in range(self.n_steps)])

    def dense(self) -> np.ndarray:
        N, n = self.n_steps, self.block_size
        A = np.zeros((N * n, N * n))
        for l in range(N):
            B = self.block(l)
            for i in range(l, N):
                A[i * n:(i + 1) * n, (i - l) * n:(i - l + 1) * n] = B
        return A

    def history(self, l: int, Xrev: np.ndarray) -> np.ndarray:
        """sum_{d=1..l} S(d) X_(l-d) given Xrev[N-1-j] = X_j.

        Returns the first r rows (the remaining rows are zero)."""
        n, N = self.block_size, self.n_steps
        T2 = self.tail[:, :l, :].reshape(self.tail_rows, l * n)
        Xs = Xrev[N - l:N].reshape((l * n,) + Xrev.shape[2:])
        if T2.dtype != np.float64:
            return (T2 @ Xs.astype(T2.dtype)).astype(np.float64)
        return T2 @ Xs

    def matvec(self, X: np.ndarray) -> np.ndarray:
        """Full product S X for X of shape (N, n) or (N, n, k)."""
        X = np.asarray(X, float)
        N = self.n_steps
        Xrev = X[::-1].copy()
        out = np.einsum('ij,lj...->li...', self.S0, X)
        r = self.tail_rows
        for l in range(1, N):
            out[l, :r] += self.history(l, Xrev)
        return out

    @property
    def nbytes(self) -> int:
        return self.S0.nbytes + self.tail.nbytes


@dataclass
class RhsVector:
    per_step: np.ndarray  # (N, n)


# ---------------------------------------------------------------- raw data

def _mesh_arrays(mesh: BoundaryMesh, layout: DofLayout):
    return (np.ascontiguousarray(mesh.vertices, float),
            np.ascontiguousarray(mesh.elements, np.int64),
            np.ascontiguousarray(mesh.tangents, float),
            np.ascontiguousarray(mesh.normals, float),
            np.ascontiguousarray(mesh.lengths, float),
            np.ascontiguousarray(layout.elem_u, np.int64))


class RawEvaluator:
    """Evaluates R_V, R_K, R_W at a given time s (compiled kernel)."""

    def __init__(self, mesh, layout, mat: Material, quad: QuadratureConfig | None = None,
                 want_w: bool = False):
        self.arrays = _mesh_arrays(mesh, layout)
        self.mat = mat
        self.quad = quad or QuadratureConfig()
        self.want_w = want_w
        self.n_psi = layout.n_psi
        self.n_u = layout.n_u

    def __call__(self, s: float):
        npsi, nu = self.n_psi, self.n_u
        RV = np.zeros((2 * npsi, 2 * npsi))
        RK = np.zeros((2 * npsi, 2 * nu))
        RW = np.zeros((2 * nu, 2 * nu))
        if s <= 0:
            return RV, RK, RW
        verts, elems, tang, norm, lens, elem_u = self.arrays
        m, q = self.mat, self.quad
        _galerkin.raw_matrices(verts, elems, tang, norm, lens, elem_u, nu, float(s),
                               m.cP, m.cS, m.rho, m.mu, q.order, q.far_order,
                               q.sing_order, q.levels, self.want_w, RV, RK, RW)
        return RV, RK, RW


def mass_matrix(mesh: BoundaryMesh, layout: DofLayout) -> np.ndarray:
    """M[(i,e,alpha),(i,m)] = int_e phi_alpha w_m (psi basis times hat)."""
    npsi, nu = layout.n_psi, layout.n_u
    M = np.zeros((2 * npsi, 2 * nu))
    loc = np.array([[1 / 3, 1 / 6], [1 / 6, 1 / 3]])
    for e, h in enumerate(mesh.lengths):
        for a in range(2):
            for b in range(2):
                m = layout.elem_u[e, b]
                if m < 0:
                    continue
                for i in range(2):
                    M[i * npsi + 2 * e + a, i * nu + m] += h * loc[a, b]
    return M


# ---------------------------------------------------------------- blocks

def _second_difference(Rp, R0, Rm, scale):
    return (Rp - 2.0 * R0 + Rm) * scale


def assemble_operator_block(kind: str, lag: int, mesh: BoundaryMesh, grid: TimeGrid,
                            mat: Material, layout: DofLayout,
                            quad: QuadratureConfig | None = None) -> OperatorBlock:
    """One block V(lag), K(lag), W(lag) or the mass matrix M (lag ignored)."""
    kind = kind.upper()
    if kind == "M":
        return OperatorBlock(mass_matrix(mesh, layout), 0, "M")
    if kind not in ("V", "K", "W"):
        raise ValueError(f"unknown block kind {kind!r}")
    if not 0 <= lag < grid.n_steps:
        raise ValueError("lag out of range")
    ev = RawEvaluator(mesh, layout, mat, quad, want_w=(kind == "W"))
    dt = grid.dt
    idx = {"V": 0, "K": 1, "W": 2}[kind]
    R = [ev((lag + k) * dt)[idx] for k in (1, 0, -1)]
    scale = {"V": 1.0, "K": 1.0 / dt, "W": 1.0 / dt ** 2}[kind]
    return OperatorBlock(_second_difference(*R, scale), lag, kind)


def _cache_key(mesh, grid, mat, formulation, quad, w_sign):
    payload = json.dumps({"mesh": mesh.fingerprint(), "T": grid.T, "N": grid.n_steps,
                          "mat": [mat.rho, mat.cP, mat.cS], "form": formulation,
                          "quad": quad.as_dict(), "w_sign": w_sign,
                          "version": 1}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def assemble_S_blocks(formulation: str, mesh: BoundaryMesh, grid: TimeGrid, mat: Material,
                      layout: DofLayout, quad: QuadratureConfig | None = None,
                      cache_dir: str | None = None, dtype=np.float64,
                      w_sign: float = -1.0) -> BlockLowerToeplitz:
    """Coupled blocks for the chosen formulation.

    nonsymmetric: S(0) = [[V0, -(K0 + M/2)], [M^T, 0]], S(l) = [[Vl, -Kl], [0, 0]].
    symmetric:    S(0) = [[V0, -(K0 + M/2)], [(K0 + M/2)^T, -W0]],
                  S(l) = [[Vl, -Kl], [Kl^T, w_sign * Wl]].
    Unknown order per step is [psi, u] as in DofLayout.
    """
    if formulation not in FORMULATIONS:
        from .errors import ConfigError
        raise ConfigError(f"formulation must be one of {FORMULATIONS}")
    quad = quad or QuadratureConfig()
    key = _cache_key(mesh, grid, mat, formulation, quad, w_sign)
    sym = formulation == "symmetric"
    N, dt = grid.n_steps, grid.dt
    npsi2, nu2 = 2 * layout.n_psi, 2 * layout.n_u
    n = npsi2 + nu2
    rows = n if sym else npsi2
    P, U = slice(0, npsi2), slice(npsi2, n)
    path = os.path.join(cache_dir, f"blocks_{key}.npz") if cache_dir else None
    if path and os.path.exists(path):
        log.info("reusing cached blocks %s", path)
        with np.load(path) as z:
            return BlockLowerToeplitz(z["S0"], z["tail"].astype(dtype, copy=False), formulation,
                                      {"cache_key": key, "cached": True,
                                       "quadrature": quad.as_dict(), "w_sign": w_sign})
    S0 = np.zeros((n, n))
    tail = np.zeros((rows, max(N - 1, 0), n), dtype=dtype)
    ev = RawEvaluator(mesh, layout, mat, quad, want_w=sym)
    M = mass_matrix(mesh, layout)
    prev2 = ev(0.0)   # R((d-1) dt)
    prev1 = prev2     # R(d dt)
    for d in range(N):
        nxt = ev((d + 1) * dt)
        V = _second_difference(nxt[0], prev1[0], prev2[0], 1.0)
        K = _second_difference(nxt[1], prev1[1], prev2[1], 1.0 / dt)
        W = _second_difference(nxt[2], prev1[2], prev2[2], 1.0 / dt ** 2) if sym else None
        if d == 0:
            KM = K + 0.5 * M
            S0[P, P] = V
            S0[P, U] = -KM
            if sym:
                S0[U, P] = KM.T
                S0[U, U] = -W
            else:
                S0[U, P] = M.T
        else:
            B = tail[:, d - 1, :]
            B[P, P] = V
            B[P, U] = -K
            if sym:
                B[U, P] = K.T
                B[U, U] = w_sign * W
        prev2, prev1 = prev1, nxt
    meta = {"cache_key": key, "cached": False, "quadrature": quad.as_dict(),
            "w_sign": w_sign}
    if path:
        os.makedirs(cache_dir, exist_ok=True)
        np.savez(path, S0=S0, tail=tail)
    return BlockLowerToeplitz(S0, tail, formulation, meta)


def assemble_S0(formulation: str, mesh: BoundaryMesh, grid: TimeGrid, mat: Material,
                layout: DofLayout, quad: QuadratureConfig | None = None) -> np.ndarray:
    """S(0) alone (one raw evaluation at s = dt, since R(0) = R(-dt) = 0)."""
    quad = quad or QuadratureConfig()
    sym = formulation == "symmetric"
    dt = grid.dt
    npsi2 = 2 * layout.n_psi
    n = layout.block_size
    RV, RK, RW = RawEvaluator(mesh, layout, mat, quad, want_w=sym)(dt)
    KM = RK / dt + 0.5 * mass_matrix(mesh, layout)
    S0 = np.zeros((n, n))
    S0[:npsi2, :npsi2] = RV
    S0[:npsi2, npsi2:] = -KM
    if sym:
        S0[npsi2:, :npsi2] = KM.T
        S0[npsi2:, npsi2:] = -RW / dt ** 2
    else:
        S0[npsi2:, :npsi2] = mass_matrix(mesh, layout).T
    return S0


def s0_min_eig(system) -> float:
    """Smallest eigenvalue of the symmetric part of S(0) (a system or a matrix)."""
    S0 = getattr(system, "S0", system)
    return float(np.linalg.eigvalsh(0.5 * (S0 + S0.T))[0])


# ---------------------------------------------------------------- loads

def assemble_rhs(f, mesh: BoundaryMesh, grid: TimeGrid, layout: DofLayout,
                 t_breaks=(), space_order: int = 6, time_order: int = 6) -> RhsVector:
    """F_(l) with u-slots (1/dt) int_{t_l}^{t_l+1} int_Gamma_Sigma f_i w_m.

    f(x, t, group) -> (..., 2) with x of shape (..., 2) and t broadcastable;
    `group` is the element's side label.  t_breaks lists times where f
    jumps; the time rule is split there.
    """
    N, dt = grid.n_steps, grid.dt
    npsi2, nu = 2 * layout.n_psi, layout.n_u
    F = np.zeros((N, npsi2 + 2 * nu))
    if f is None or nu == 0:
        return RhsVector(F)
    gs = gauss_rule(space_order)
    gt = gauss_rule(time_order)
    breaks = np.asarray(sorted(t_breaks), float)
    for e in layout.sigma_elements:
        mu = layout.elem_u[e]
        if mu[0] < 0 and mu[1] < 0:
            continue
        a, b = mesh.vertices[mesh.elements[e]]
        h = mesh.lengths[e]
        x = a + gs.nodes[:, None] * (b - a)
        phi = np.stack([1.0 - gs.nodes, gs.nodes])      # (2, q)
        grp = mesh.groups[e]
        for l in range(N):
            t0, t1 = l * dt, (l + 1) * dt
            pts = [t0] + [t for t in breaks if t0 < t < t1] + [t1]
            acc = np.zeros((2, 2))  # (local node, component)
            for p, q in zip(pts[:-1], pts[1:]):
                ts = p + gt.nodes * (q - p)
                vals = np.asarray(f(x[:, None, :], ts[None, :], grp), float)
                vals = np.broadcast_to(vals, (len(x), len(ts), 2))
                tint = np.einsum('t,qtc->qc', gt.weights, vals) * (q - p)
                acc += np.einsum('aq,q,qc->ac', phi, gs.weights, tint) * h
            for k in range(2):
                if mu[k] >= 0:
                    for i in range(2):
                        F[l, npsi2 + i * nu + mu[k]] += acc[k, i] / dt
    return RhsVector(F)
