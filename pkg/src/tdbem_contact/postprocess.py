"""Displacement reconstruction, energies, error norms, extrapolation,
interior evaluation and CSV output."""
from __future__ import annotations

import csv
import math
import os
import warnings
from dataclasses import dataclass

import numpy as np

from .assembly import BlockLowerToeplitz
from .geometry import BoundaryMesh, DofLayout, Material, TimeGrid
from .quadrature import gauss_rule


@dataclass
class EnergyReport:
    total: float
    cumulative: np.ndarray  # E(t_1) .. E(t_N)


@dataclass
class ConvergenceRow:
    h: float
    dt: float
    quantity: float
    error: float
    rate: float


# ---------------------------------------------------------------- traces

def reconstruct_displacement(U: np.ndarray, grid: TimeGrid | None = None) -> np.ndarray:
    """Nodal values at t_0 .. t_N from ramp coefficients U of shape (N, ...).

    r_l(t_k) = 1 for k >= l+1, so the value at t_k is the prefix sum of the
    first k coefficients; between nodes the trace is linear in time.
    """
    U = np.asarray(U, float)
    out = np.zeros((U.shape[0] + 1,) + U.shape[1:])
    np.cumsum(U, axis=0, out=out[1:])
    return out


def split_unknowns(X: np.ndarray, layout: DofLayout):
    """(N, n) solution -> psi (N, 2, n_psi) and u coefficients (N, 2, n_u)."""
    X = np.asarray(X, float)
    N = X.shape[0]
    psi = X[:, :2 * layout.n_psi].reshape(N, 2, layout.n_psi)
    u = X[:, 2 * layout.n_psi:].reshape(N, 2, layout.n_u)
    return psi, u


def nodal_trace(X: np.ndarray, layout: DofLayout) -> np.ndarray:
    """Displacement values (N+1, 2, n_u) at the time nodes."""
    return reconstruct_displacement(split_unknowns(X, layout)[1])


# ---------------------------------------------------------------- energy

def energy(X: np.ndarray, system: BlockLowerToeplitz) -> EnergyReport:
    """X^T S X and its leading-k-block partial sums E(t_k)."""
    X = np.asarray(X, float)
    Y = system.matvec(X)
    per = np.einsum('kn,kn->k', X, Y)
    cum = np.cumsum(per)
    return EnergyReport(float(cum[-1]) if len(cum) else 0.0, cum)


# ---------------------------------------------------------------- errors

def _element_values(trace, layout, e, phi):
    # trace (..., 2, n_u) -> values at the space points of element e (..., q, 2)
    idx = layout.elem_u[e]
    vals = 0.0
    for k in range(2):
        if idx[k] >= 0:
            vals = vals + trace[..., :, idx[k]][..., None, :] * phi[k][:, None]
    return np.broadcast_to(vals, trace.shape[:-2] + (len(phi[0]), 2))


def l2_spacetime_error(trace: np.ndarray, exact, mesh: BoundaryMesh, grid: TimeGrid,
                       layout: DofLayout, order: int = 4, component=None,
                       elements=None) -> float:
    """|| u_h - u ||_{L2((0,T) x Gamma)} for a nodal trace (N+1, 2, n_u).

    The discrete trace is piecewise linear in space (hats, zero on Gamma_D)
    and in time.  exact(x, t) -> (..., 2); `component` restricts the norm to
    one Cartesian component.
    """
    trace = np.asarray(trace, float)
    gr = gauss_rule(order)
    s, ws = gr.nodes, gr.weights
    phi = (1.0 - s, s)
    N, dt = grid.n_steps, grid.dt
    total = 0.0
    elems = range(mesh.n_elements) if elements is None else elements
    for e in elems:
        a, b = mesh.vertices[mesh.elements[e]]
        x = a + s[:, None] * (b - a)
        h = mesh.lengths[e]
        nodal = _element_values(trace, layout, e, phi)       # (N+1, q, 2)
        for l in range(N):
            for tq, wt in zip(s, ws):
                t = (l + tq) * dt
                uh = (1 - tq) * nodal[l] + tq * nodal[l + 1]
                ue = np.asarray(exact(x, np.full(len(x), t)), float)
                d = uh - ue
                d2 = d ** 2 if component is None else d[:, [component]] ** 2
                total += wt * dt * h * float(ws @ d2.sum(axis=1))
    return math.sqrt(total)


def observed_orders(hs, errors):
    """Rates log2(e_k/e_{k+1}) between consecutive levels and the
    least-squares slope of log e against log h."""
    hs = np.asarray(hs, float)
    errors = np.asarray(errors, float)
    rates = np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    return rates, float(slope)


def richardson_reference(E1: float, E2: float, E3: float, ratio: float = 2.0):
    """Fit E_h = E* + C h^p through levels h, h/ratio, h/ratio^2.

    Returns (E*, p).  Raises ValueError for non-monotone data.
    """
    d1, d2 = E1 - E2, E2 - E3
    if d1 == 0 or d2 == 0 or d1 * d2 < 0 or abs(d2) >= abs(d1):
        raise ValueError("Richardson extrapolation needs monotone, contracting data")
    p = math.log(d1 / d2) / math.log(ratio)
    Estar = E3 - d2 / (ratio ** p - 1.0)
    return Estar, p


# ---------------------------------------------------------------- Example 1

def example1_exact(x, t, c_p: float = 1.0, printed: bool = False):
    """Analytic displacement of the Neumann square problem.

    The default form is the causal one, u2 = (c t + x2 - 1/2)_+ - (c t - x2 - 3/2)_+,
    which satisfies the zero initial state and the loads top +1, bottom
    -2 H(t-1).  printed=True returns the expression with x2 -> -x2 that
    agrees with it on the top side only.
    """
    x = np.asarray(x, float)
    t = np.asarray(t, float)
    x2 = x[..., 1]
    if printed:
        a = c_p * t - x2 + 0.5
        b = c_p * t - x2 - 1.5
    else:
        a = c_p * t + x2 - 0.5
        b = c_p * t - x2 - 1.5
    u2 = np.where(a > 0, a, 0.0) - np.where(b > 0, b, 0.0)
    return np.stack([np.zeros_like(u2), u2], axis=-1)


# ---------------------------------------------------------------- interior

def eval_interior(point, t: float, U: np.ndarray, Psi: np.ndarray, mesh: BoundaryMesh,
                  grid: TimeGrid, mat: Material, layout: DofLayout,
                  order: int = 12) -> np.ndarray:
    """Representation formula u(x,t) = (V psi)(x,t) - (K u)(x,t).

    Psi: (N, 2, n_psi) indicator-in-time coefficients; U: (N, 2, n_u) ramp
    coefficients.  The time integrals are exact through the kernel
    antiderivatives; space integrals use a Gauss rule split where the
    wavefront circles cross an element.
    """
    from .kernels import green_antiderivative, traction_from_gradient

    x = np.asarray(point, float)
    dist = _distance_to_mesh(x, mesh)
    if dist < mesh.h_max:
        warnings.warn("interior point closer to the boundary than h: potentials inaccurate",
                      RuntimeWarning, stacklevel=2)
    dt = grid.dt
    N = grid.n_steps
    out = np.zeros(2)
    gr = gauss_rule(order)
    for e in range(mesh.n_elements):
        a, b = mesh.vertices[mesh.elements[e]]
        h = mesh.lengths[e]
        n_y = mesh.normals[e]
        # wavefront crossings of circles centred at x for all needed lags
        radii = []
        for l in range(N):
            for s_ in (t - l * dt, t - (l + 1) * dt):
                if s_ > 0:
                    radii += [mat.cS * s_, mat.cP * s_]
        br = _circle_breaks(x, a, b, radii)
        for p, q in zip(br[:-1], br[1:]):
            u = p + gr.nodes * (q - p)
            w = gr.weights * (q - p) * h
            y = a + u[:, None] * (b - a)
            r = x - y
            phi = np.stack([1.0 - u, u])
            for l in range(N):
                s0, s1 = t - l * dt, t - (l + 1) * dt
                if s0 <= 0:
                    continue
                # single layer: psi_l v_l(tau) -> G^[1](s0) - G^[1](s1)
                G = green_antiderivative(1, r, s0, mat)[0]
                if s1 > 0:
                    G = G - green_antiderivative(1, r, s1, mat)[0]
                ps = Psi[l][:, 2 * e:2 * e + 2]          # (2 comp, 2 local)
                dens = ps @ phi                          # (2, q)
                out += np.einsum('q,qij,jq->i', w, G, dens)
                # double layer: u_l r_l(tau) -> (T[2](s0) - T[2](s1)) / dt
                idx = layout.elem_u[e]
                if idx[0] < 0 and idx[1] < 0:
                    continue
                uv = np.zeros((2, len(u)))
                for k in range(2):
                    if idx[k] >= 0:
                        uv += U[l][:, idx[k]][:, None] * phi[k][None, :]
                T = _double_layer_kernel(r, s0, mat, n_y)
                if s1 > 0:
                    T = T - _double_layer_kernel(r, s1, mat, n_y)
                out -= np.einsum('q,qij,jq->i', w, T, uv) / dt
    return out


def _double_layer_kernel(r, s, mat, n_y):
    # time antiderivative of order 2 of the traction of G w.r.t. y
    from .kernels import green_antiderivative, traction_from_gradient
    _, dG = green_antiderivative(2, r, s, mat, derivs=1)[:2]
    return traction_from_gradient(dG, n_y, mat, side="y")


def _distance_to_mesh(x, mesh):
    a, b = mesh.a, mesh.b
    d = b - a
    t = np.clip(np.einsum('ij,ij->i', x - a, d) / np.einsum('ij,ij->i', d, d), 0, 1)
    p = a + t[:, None] * d
    return float(np.min(np.hypot(*(x - p).T)))


def _circle_breaks(x, a, b, radii):
    d = b - a
    w = x - a
    A = d @ d
    pts = [0.0, 1.0]
    for R in radii:
        B = -2 * (d @ w)
        C = w @ w - R * R
        disc = B * B - 4 * A * C
        if disc > 0:
            for sg in (-1, 1):
                u = (-B + sg * math.sqrt(disc)) / (2 * A)
                if 0 < u < 1:
                    pts.append(u)
    return np.unique(pts)


# ---------------------------------------------------------------- CSV

def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_trace_csv(path, times, trace, names):
    """Rows (t, node, u1, u2); trace (N+1, 2, n) and `names` per node."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node", "u1", "u2"])
        for k, t in enumerate(times):
            for j, nm in enumerate(names):
                w.writerow([_fmt(t), nm, _fmt(trace[k, 0, j]), _fmt(trace[k, 1, j])])


def write_table_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
