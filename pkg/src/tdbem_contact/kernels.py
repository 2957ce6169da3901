"""Elastodynamic fundamental solution and traction kernels in 2D.

Pointwise kernels (`eval_G`, `eval_traction_kernels`) follow the classical
closed form of the Green's tensor.  The time-integrated kernels used by the
Galerkin assembly are written through scalar potentials,

    rho G^[n] = I h_S^[n] / cS^2 + grad grad (h_P^[n+2] - h_S^[n+2]),

where h^[n] is the n-th time antiderivative of the scalar 2D wave kernel
(see `_radial`).  Derivatives are taken with respect to r = x - y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _radial
from .errors import WavefrontError
from .geometry import Material, TimeGrid

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
_I2 = np.eye(2)


@dataclass(frozen=True)
class WavefrontSet:
    """Critical radii cS*lag < cP*lag at which the kernels have Heaviside cuts."""

    radii: tuple

    @classmethod
    def for_lag(cls, lag: float, mat: Material) -> "WavefrontSet":
        return cls((mat.cS * lag, mat.cP * lag))


def _check_guard(r, delta, mat, guard):
    for c in (mat.cS, mat.cP):
        if np.any(np.abs(c * np.asarray(delta) - r) < guard):
            raise WavefrontError(f"evaluation within {guard:g} of the c={c} wavefront")


def eval_G(r, delta, mat: Material, guard: float | None = None) -> np.ndarray:
    """Green's tensor G_ij(r, t - tau), closed form.  Returns (..., 2, 2)."""
    r = np.asarray(r, float)
    delta = np.asarray(delta, float)
    rr = np.hypot(r[..., 0], r[..., 1])
    if np.any(rr <= 0):
        raise ValueError("eval_G needs |r| > 0")
    if guard is None:
        guard = 1e-12 * mat.cP * max(1.0, float(np.max(np.abs(delta))))
    _check_guard(rr, delta, mat, guard)
    rirj = r[..., :, None] * r[..., None, :] / rr[..., None, None] ** 4
    out = np.zeros(r.shape[:-1] + (2, 2))
    for c, sign in ((mat.cP, 1.0), (mat.cS, -1.0)):
        arg = c * c * delta ** 2 - rr ** 2
        on = (c * delta - rr) > 0
        q = np.sqrt(np.where(on, arg, 1.0))
        a = (2 * c * c * delta ** 2 - rr ** 2) / q
        if sign > 0:
            b = q / rr ** 2
        else:
            b = c * c * delta ** 2 / (q * rr ** 2)
        term = a[..., None, None] * rirj - b[..., None, None] * _I2
        term *= (on / (2 * math.pi * mat.rho * c))[..., None, None]
        out += sign * term
    return out


# ------------------------------------------------------------------
# radial derivative tensors of f(|r|)

def radial_tensors(f1, f2, f3, f4, r, rh):
    """Cartesian derivative tensors of a radial function up to order 4.

    f1..f4 are d^k f/dr^k (arrays), r = |r|, rh the unit vector (..., 2).
    Returns d1 (...,2), d2 (...,2,2), d3 (...,2,2,2), d4 (...,2,2,2,2).
    Entries of higher orders may be passed as None to skip them.
    """
    n = rh
    I = _I2
    nn = n[..., :, None] * n[..., None, :]
    d1 = f1[..., None] * n
    g2 = f2 - f1 / r
    d2 = g2[..., None, None] * nn + (f1 / r)[..., None, None] * I
    d3 = d4 = None
    if f3 is not None:
        g2p = f3 - f2 / r + f1 / r ** 2
        A3 = g2p - 2 * g2 / r
        B3 = g2 / r
        nnn = nn[..., :, :, None] * n[..., None, None, :]
        S3 = (I[:, :, None] * n[..., None, None, :] + I[:, None, :] * n[..., None, :, None]
              + I[None, :, :] * n[..., :, None, None])
        d3 = A3[..., None, None, None] * nnn + B3[..., None, None, None] * S3
        if f4 is not None:
            g2pp = f4 - f3 / r + 2 * f2 / r ** 2 - 2 * f1 / r ** 3
            A3p = g2pp - 2 * g2p / r + 2 * g2 / r ** 2
            B3p = g2p / r - g2 / r ** 2
            n4 = nnn[..., None] * n[..., None, None, None, :]
            e = np.einsum
            di = I
            # delta_il n_j n_k + delta_jl n_i n_k + delta_kl n_i n_j
            Sa = (e('il,...j,...k->...ijkl', di, n, n) + e('jl,...i,...k->...ijkl', di, n, n)
                  + e('kl,...i,...j->...ijkl', di, n, n))
            Sb = (e('ij,...k,...l->...ijkl', di, n, n) + e('ik,...j,...l->...ijkl', di, n, n)
                  + e('jk,...i,...l->...ijkl', di, n, n))
            Sd = (e('ij,kl->ijkl', di, di) + e('ik,jl->ijkl', di, di)
                  + e('jk,il->ijkl', di, di))
            d4 = ((A3p - 3 * A3 / r)[..., None, None, None, None] * n4
                  + (A3 / r)[..., None, None, None, None] * Sa
                  + (B3p - B3 / r)[..., None, None, None, None] * Sb
                  + (B3 / r)[..., None, None, None, None] * Sd)
    return d1, d2, d3, d4


_hder_vec = np.vectorize(_radial.hder, otypes=[float])


def _h(order, j, r, s, c):
    return _hder_vec(order, j, r, s, c)


def green_antiderivative(n: int, r, s, mat: Material, derivs: int = 0):
    """n-th time antiderivative G^[n](r, s) (n >= 1) and optionally its first
    (derivs=1) and second (derivs=2) derivatives with respect to r = x - y.

    Returns a list [G, dG, d2G] of arrays with shapes (...,2,2), (...,2,2,2)
    [i,j,k] = d_k G_ij, (...,2,2,2,2) [i,j,k,l] = d_k d_l G_ij.
    """
    r = np.asarray(r, float)
    s = np.asarray(s, float)
    rr = np.hypot(r[..., 0], r[..., 1])
    rh = r / rr[..., None]
    cP, cS, rho = mat.cP, mat.cS, mat.rho
    m = n + 2

    def chi(j):
        if j > m - 1:
            return None
        return _h(m, j, rr, s, cP) - _h(m, j, rr, s, cS)

    def gs(j):
        if j > n - 1:
            return None
        return _h(n, j, rr, s, cS) / cS ** 2

    k = [chi(j) for j in (1, 2, 3, 4)]
    _, X2, X3, X4 = radial_tensors(k[0], k[1], k[2] if derivs >= 1 else None,
                                   k[3] if derivs >= 2 else None, rr, rh)
    out = [(gs(0)[..., None, None] * _I2 + X2) / rho]
    if derivs >= 1:
        g1 = gs(1)
        if g1 is None:
            raise ValueError("derivative order exceeds the available antiderivative order")
        dg = g1[..., None] * rh
        out.append((_I2[..., None] * dg[..., None, None, :] + X3) / rho)
    if derivs >= 2:
        g2 = gs(2)
        if g2 is None:
            raise ValueError("derivative order exceeds the available antiderivative order")
        _, dd, _, _ = radial_tensors(gs(1), g2, None, None, rr, rh)
        out.append((_I2[:, :, None, None] * dd[..., None, None, :, :] + X4) / rho)
    return out


def traction_from_gradient(dG, normal, mat: Material, side: str):
    """Traction kernels from dG[...,i,j,k] = d/dr_k G_ij.

    side='y': K[l,i], the traction (w.r.t. y, normal n_y) of column l,
    contracted with u_i(y).  side='x': Kstar[i,l], traction at x of the
    single layer with density component l.
    """
    lam, mu = mat.lam, mat.mu
    nv = np.asarray(normal, float)
    # div over first index: sum_j d_j G_jl  -> (..., l)
    div = np.einsum('...jlj->...l', dG)
    # sym[i,l] contracted with n: sum_j (d_i G_jl + d_j G_il) n_j
    t1 = np.einsum('...jli,...j->...il', dG, nv)
    t2 = np.einsum('...ilj,...j->...il', dG, nv)
    tr = lam * nv[..., :, None] * div[..., None, :] + mu * (t1 + t2)   # [i,l]
    if side == 'x':
        return tr
    return -np.swapaxes(tr, -1, -2)  # [l,i]; d_y = -d_r


def double_traction(d2G, n_x, n_y, mat: Material):
    """W[k,i] = T_x applied to K[:, i] (row k = traction component at x)."""
    lam, mu = mat.lam, mat.mu
    ny = np.asarray(n_y, float)
    nx = np.asarray(n_x, float)
    # K[l,i] = -(lam * n_i * sum_j d_j G_jl + mu sum_j (d_i G_jl + d_j G_il) n_j)
    # dK[l,i,m] = d/dr_m K[l,i]
    div = np.einsum('...jljm->...lm', d2G)
    t1 = np.einsum('...jlim,...j->...lim', d2G, ny)
    t2 = np.einsum('...iljm,...j->...lim', d2G, ny)
    dK = -(lam * ny[..., None, :, None] * div[..., :, None, :] + mu * (t1 + t2))
    # W[k,i] = lam n_k sum_l d_l K[l,i] + mu sum_l (d_k K[l,i] + d_l K[k,i]) n_l
    divK = np.einsum('...lil->...i', dK)
    s1 = np.einsum('...lik,...l->...ki', dK, nx)
    s2 = np.einsum('...kil,...l->...ki', dK, nx)
    return lam * nx[..., :, None] * divK[..., None, :] + mu * (s1 + s2)


def eval_traction_kernels(r, delta, mat: Material, n_y, n_x, guard=None):
    """Pointwise K, K* and W kernels at lag delta.

    Computed as the time derivative of the once- (K, K*) or twice- (W)
    integrated kernels, whose spatial derivatives are available in closed
    form; the time derivatives are taken analytically by differentiating the
    potential representation (see `_pointwise_from_antiderivative`).
    """
    r = np.asarray(r, float)
    rr = np.hypot(r[..., 0], r[..., 1])
    if guard is None:
        guard = 1e-12 * mat.cP * max(1.0, float(np.max(np.abs(delta))))
    _check_guard(rr, delta, mat, guard)
    out = _pointwise_kernels(r, delta, mat, n_y, n_x)
    return {"Kkernel": out[0], "KstarKernel": out[1], "Wkernel": out[2]}


def _pointwise_kernels(r, delta, mat, n_y, n_x):
    """Pointwise kernels from the Green's tensor in closed form.

    Uses eval_G-type radial profiles: G = a(r) r r^T + b(r) I, with a, b and
    their r-derivatives obtained from the scalar potentials in time
    derivative form.  Implemented via complex-step-free forward differences
    is avoided: we differentiate the closed form of G with automatic
    differentiation on truncated Taylor jets.
    """
    from ._jets import green_jet
    G, dG, d2G = green_jet(np.asarray(r, float), float(delta), mat)
    K = traction_from_gradient(dG, n_y, mat, side='y')
    Ks = traction_from_gradient(dG, n_x, mat, side='x')
    W = double_traction(d2G, n_x, n_y, mat)
    return K, Ks, W


def time_convolved_kernel(kind: str, r, lag: int, grid: TimeGrid, mat: Material,
                          n_y=None, n_x=None) -> np.ndarray:
    """Kernel of the lag-l block after exact integration against the
    energetic time pairing.

    V:     D2[G^[1]](l)
    K:     D2[K^[2]](l) / dt      (traction w.r.t. y, normal n_y)
    Kstar: D2[K*^[2]](l) / dt     (traction w.r.t. x, normal n_x)
    W:     D2[W^[3]](l) / dt^2
    where D2[F](l) = F((l+1)dt) - 2F(l dt) + F((l-1)dt) and F(s<=0) = 0.
    """
    if not 0 <= lag:
        raise ValueError("lag must be non-negative")
    dt = grid.dt
    order = {"V": 1, "K": 2, "Kstar": 2, "W": 3}[kind]
    r = np.asarray(r, float)

    def F(s):
        if s <= 0:
            shape = r.shape[:-1] + (2, 2)
            return np.zeros(shape)
        if kind == "V":
            return green_antiderivative(1, r, s, mat)[0]
        if kind in ("K", "Kstar"):
            dG = green_antiderivative(2, r, s, mat, derivs=1)[1]
            if kind == "K":
                return traction_from_gradient(dG, n_y, mat, side='y')
            return traction_from_gradient(dG, n_x, mat, side='x')
        d2G = green_antiderivative(3, r, s, mat, derivs=2)[2]
        return double_traction(d2G, n_x, n_y, mat)

    d2 = F((lag + 1) * dt) - 2 * F(lag * dt) + F((lag - 1) * dt)
    return d2 / dt ** (order - 1)
