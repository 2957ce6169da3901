"""Multiplier coupling, projection and the algebraic Uzawa iteration.

Multipliers are piecewise constant on contact elements and in time (v_l),
stored per step as [tangential (n_lambda), normal (n_lambda)] in the local
frame (tau_e, nu_e) of each contact element, nu_e being its contact normal
and tau_e = J nu_e.

Coupling matrices
  M*  : loads.  The multiplier enters the displacement equation like a
        boundary force, so (M* Lambda)_(l) = A^T Lambda_(l) in the u-slots
        (the energetic test rdot_l = v_l / dt picks step l only).
  M~  : L2 space-time pairing of multiplier and displacement bases,
        (M~ U)_(l) = dt * sum_{k<=l} c_{l-k} A U_(k), c_0 = 1/2, c_{d>0} = 1,
        since int v_l r_k dt = dt/2 (k = l), dt (k < l), 0 (k > l).
  A   : spatial pairing A[(c,e),(i,m)] = int_e (dir_c(e))_i w_m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import BlockLowerToeplitz
from .errors import ConfigError, UzawaDivergence, UzawaNonConvergence
from .geometry import BoundaryMesh, DofLayout, TimeGrid
from .kernels import J2
from .mot_solver import DiagonalFactorization, factorize, march


@dataclass(frozen=True)
class UzawaConfig:
    rho: float
    eps: float
    max_iter: int = 10_000
    divergence_window: int = 20
    divergence_factor: float = 10.0

    def __post_init__(self):
        if not (self.rho > 0 and self.eps > 0 and self.max_iter >= 1):
            raise ConfigError("UzawaConfig needs rho > 0, eps > 0, max_iter >= 1")


@dataclass
class CouplingMatrices:
    A: np.ndarray              # (2 n_lambda, 2 n_u) spatial pairing
    time_weights: np.ndarray   # c_d * dt, d = 0..N-1
    n_psi2: int
    G: np.ndarray              # (N, 2 n_u) ramp coefficients of the gap interpolant
    MG: np.ndarray             # (N, 2 n_lambda) = M~ applied to the gap interpolant (with g(0))

    @property
    def n_steps(self):
        return self.G.shape[0]

    @property
    def n_mult(self):
        return self.A.shape[0]

    def mstar(self, Lam: np.ndarray) -> np.ndarray:
        """(N, 2 n_lambda [, k]) -> load vectors (N, n [, k]), psi-slots zero."""
        Lam = np.asarray(Lam, float)
        N = Lam.shape[0]
        out = np.zeros((N, self.n_psi2 + self.A.shape[1]) + Lam.shape[2:])
        out[:, self.n_psi2:] = np.einsum('cu,lc...->lu...', self.A, Lam)
        return out

    def mtilde(self, U: np.ndarray) -> np.ndarray:
        """(N, 2 n_u [, k]) displacement coefficients -> (N, 2 n_lambda [, k])."""
        AU = np.einsum('cu,lu...->lc...', self.A, np.asarray(U, float))
        return _toeplitz_apply(self.time_weights, AU)

    def Mstar_dense(self) -> np.ndarray:
        N, nl = self.n_steps, self.n_mult
        n = self.n_psi2 + self.A.shape[1]
        D = np.zeros((N * n, N * nl))
        for l in range(N):
            D[l * n + self.n_psi2:(l + 1) * n, l * nl:(l + 1) * nl] = self.A.T
        return D

    def Mtilde_dense(self) -> np.ndarray:
        N, nl, nu2 = self.n_steps, self.n_mult, self.A.shape[1]
        D = np.zeros((N * nl, N * nu2))
        for l in range(N):
            for k in range(l + 1):
                D[l * nl:(l + 1) * nl, k * nu2:(k + 1) * nu2] = self.time_weights[l - k] * self.A
        return D


def _toeplitz_apply(weights, Y):
    """out_l = sum_{k<=l} weights[l-k] Y_k (scalar weights, along axis 0)."""
    out = np.zeros_like(Y)
    run = np.zeros_like(Y[0]) if len(Y) else None
    # weights are (dt/2, dt, dt, ...): out_l = dt/2 Y_l + dt sum_{k<l} Y_k
    w0 = weights[0]
    w1 = weights[1] if len(weights) > 1 else 0.0
    for l in range(len(Y)):
        out[l] = w0 * Y[l] + w1 * run
        run = run + Y[l]
    return out


def contact_frames(mesh: BoundaryMesh, layout: DofLayout):
    """(tau, nu) per contact element."""
    nu = mesh.contact_normals[layout.contact_elements]
    tau = nu @ J2.T
    return tau, nu


def assemble_coupling(mesh: BoundaryMesh, grid: TimeGrid, layout: DofLayout, g=None,
                      n_psi2: int | None = None) -> CouplingMatrices:
    """Coupling data for the Uzawa iteration.

    g(x, t) -> gap values for points x (..., 2) (None means g = 0).  G holds
    the ramp-basis coefficients of the nodal interpolant, i.e. increments
    g(x_m, t_{l+1}) - g(x_m, t_l), along the mean contact normal of the node.
    The ramps vanish at t = 0, so the initial gap g(x_m, 0) is added to
    MG = M~ G directly (it is constant in time).
    """
    N, dt = grid.n_steps, grid.dt
    nl, nu = layout.n_lambda, layout.n_u
    n_psi2 = 2 * layout.n_psi if n_psi2 is None else n_psi2
    A = np.zeros((2 * nl, 2 * nu))
    tau, nrm = contact_frames(mesh, layout)
    # scalar pairing a[e, m] = int_e w_m
    a = np.zeros((nl, nu))
    for j, e in enumerate(layout.contact_elements):
        h = mesh.lengths[e]
        for k in range(2):
            m = layout.elem_u[e, k]
            if m < 0:
                continue
            a[j, m] += 0.5 * h
            for c, d in ((0, tau[j]), (1, nrm[j])):
                for i in range(2):
                    A[c * nl + j, i * nu + m] += 0.5 * h * d[i]
    weights = np.full(N, dt)
    weights[0] = 0.5 * dt
    G = np.zeros((N, 2 * nu))
    MG = np.zeros((N, 2 * nl))
    if g is not None and nl > 0:
        nodes = np.unique(layout.elem_u[layout.contact_elements].ravel())
        nodes = nodes[nodes >= 0]
        xs = mesh.vertices[layout.u_vertices[nodes]]
        gv = np.array([np.asarray(g(xs, np.full(len(xs), t)), float) for t in grid.times])
        inc = np.diff(gv, axis=0)                        # (N, n_nodes)
        # node normal: mean contact normal of incident contact elements
        nn = np.zeros((nu, 2))
        for j, e in enumerate(layout.contact_elements):
            for k in range(2):
                m = layout.elem_u[e, k]
                if m >= 0:
                    nn[m] += nrm[j]
        nn /= np.maximum(np.hypot(nn[:, 0], nn[:, 1]), 1e-300)[:, None]
        for q, m in enumerate(nodes):
            G[:, m] = inc[:, q] * nn[m, 0]
            G[:, nu + m] = inc[:, q] * nn[m, 1]
        ginc = np.zeros((N, nu))
        ginc[:, nodes] = inc
        g0 = np.zeros(nu)
        g0[nodes] = gv[0]
        # ramps carry g - g(., 0); the initial gap pairs with v_l as dt * g0
        MG[:, nl:] = _toeplitz_apply(weights, ginc @ a.T) + dt * (a @ g0)
    return CouplingMatrices(A, weights, n_psi2, G, MG)


def project_prC(W: np.ndarray, layout_or_normal_idx) -> np.ndarray:
    """max(W_j, 0) on normal indices, 0 on tangential ones."""
    W = np.asarray(W, float)
    if isinstance(layout_or_normal_idx, DofLayout):
        idx = layout_or_normal_idx.normal_idx
    else:
        idx = np.asarray(layout_or_normal_idx, np.int64)
    out = np.zeros_like(W)
    out[idx] = np.maximum(W[idx], 0.0)
    return out


@dataclass
class UzawaResult:
    X: np.ndarray          # (N, n) final solution
    U: np.ndarray          # (N, 2 n_u) ramp coefficients
    Psi: np.ndarray        # (N, 2 n_psi)
    Lambda: np.ndarray     # (N, 2 n_lambda)
    iterations: int
    history: list = field(default_factory=list)
    converged: bool = True


class ContactResponse:
    """Lag response of M~ U to unit multipliers (linear, Toeplitz in time).

    B[d] (2 n_lambda x 2 n_lambda) maps Lambda_(k) to the contribution to
    (M~ U)_(k+d).  Computed by one march with 2 n_lambda right-hand sides.
    """

    def __init__(self, system: BlockLowerToeplitz, coupling: CouplingMatrices,
                 fac: DiagonalFactorization, columns=None):
        N, nl2 = coupling.n_steps, coupling.n_mult
        cols = np.arange(nl2) if columns is None else np.asarray(columns)
        E = np.zeros((N, nl2, len(cols)))
        E[0, cols, np.arange(len(cols))] = 1.0
        X = march(system, coupling.mstar(E), fac)
        U = X[:, coupling.n_psi2:]
        self.columns = cols
        self.B = coupling.mtilde(U)        # (N, nl2, ncols)
        # Brev[:, N-1-d, :] = B[d]; rows of Brev[:, N-1-l:, :] pair with L[0..l]
        self._Brev = np.ascontiguousarray(np.transpose(self.B[::-1], (1, 0, 2)))

    def apply(self, Lam: np.ndarray) -> np.ndarray:
        """(N, 2 n_lambda) -> (N, 2 n_lambda): response restricted to the
        stored columns (other multiplier entries must be zero)."""
        L = np.ascontiguousarray(Lam[:, self.columns])
        N, nc = L.shape
        nl2 = self.B.shape[1]
        out = np.zeros((N, nl2))
        for l in range(N):
            out[l] = self._Brev[:, N - 1 - l:, :].reshape(nl2, (l + 1) * nc) @ L[:l + 1].ravel()
        return out

    def dense(self) -> np.ndarray:
        N, nl2, nc = self.B.shape
        D = np.zeros((N * nl2, N * nc))
        for l in range(N):
            for k in range(l + 1):
                D[l * nl2:(l + 1) * nl2, k * nc:(k + 1) * nc] = self.B[l - k]
        return D


def _rel_update(new, old):
    num = float(np.linalg.norm(new - old))
    den = float(np.linalg.norm(new))
    if num == 0.0:
        return 0.0
    return math.inf if den == 0.0 else num / den


def uzawa_solve(system: BlockLowerToeplitz, F, coupling: CouplingMatrices, layout: DofLayout,
                config: UzawaConfig, fac: DiagonalFactorization | None = None,
                method: str = "response", response: ContactResponse | None = None,
                raise_on_failure: bool = True, callback=None) -> UzawaResult:
    """Algebraic Uzawa iteration.

    Lambda(0) = 0, Lambda(-1) = 1; while ||L(k) - L(k-1)|| / ||L(k)|| > eps:
    solve S X(k) = F + M* L(k); L(k+1) = prC(L(k) - rho M~(U(k) - G)).
    A zero update counts as converged (0/0 for an identically zero
    multiplier).  method='march' re-marches every iteration;
    method='response' uses the precomputed lag response (same iterates).
    Divergence (rho too large) is reported when the update overflows, stays
    at or above the multiplier norm for `divergence_window` iterations, or
    grows monotonically by `divergence_factor` over that window.
    """
    F = np.asarray(getattr(F, "per_step", F), float)
    N = system.n_steps
    nl2 = coupling.n_mult
    fac = fac or factorize(system.S0)
    n_psi2 = coupling.n_psi2
    X_free = march(system, F, fac)
    shape = (N, nl2)
    normal_idx = layout.normal_idx
    Lam = np.zeros(shape)
    history = []
    if nl2 == 0:
        return UzawaResult(X_free, X_free[:, n_psi2:], X_free[:, :n_psi2], Lam, 1, [0.0])
    Y_free = coupling.mtilde(X_free[:, n_psi2:]) - coupling.MG
    if method == "response":
        if response is None:
            nl = nl2 // 2
            response = ContactResponse(system, coupling, fac, columns=np.arange(nl, nl2))
    elif method != "march":
        raise ConfigError("method must be 'response' or 'march'")

    def mtilde_u_minus_g(L):
        if method == "response":
            return Y_free + response.apply(L)
        X = march(system, F + coupling.mstar(L), fac)
        return coupling.mtilde(X[:, n_psi2:]) - coupling.MG

    prev = np.ones(shape)
    k = 0
    rel = _rel_update(Lam, prev)
    w = config.divergence_window
    while rel > config.eps:
        if k >= config.max_iter:
            if raise_on_failure:
                raise UzawaNonConvergence(
                    f"Uzawa did not converge in {config.max_iter} iterations "
                    f"(last update {rel:.3e})", history)
            break
        R = mtilde_u_minus_g(Lam)
        new = project_prC((Lam - config.rho * R).ravel(), normal_idx).reshape(shape)
        prev, Lam = Lam, new
        k += 1
        rel = _rel_update(Lam, prev)
        history.append(rel)
        if callback is not None:
            callback(k, Lam, rel)
        if not math.isfinite(rel):
            raise UzawaDivergence(f"Uzawa multiplier overflowed after {k} iterations: "
                                  f"rho={config.rho:g} too large", history)
        if len(history) > w and min(history[-w:]) >= 1.0:
            raise UzawaDivergence(
                f"Uzawa update stayed >= 100% of the multiplier norm for {w} "
                f"iterations: rho={config.rho:g} too large", history)
        if (len(history) > w and math.isfinite(history[-w - 1]) and history[-w - 1] > 0
                and history[-1] > config.divergence_factor * history[-w - 1]
                and all(b > a for a, b in zip(history[-w - 1:-1], history[-w:]))):
            raise UzawaDivergence(
                f"Uzawa update grew {history[-1] / history[-w - 1]:.1f}x over {w} "
                f"iterations: rho={config.rho:g} too large", history)
    X = march(system, F + coupling.mstar(Lam), fac)
    converged = rel <= config.eps
    return UzawaResult(X, X[:, n_psi2:], X[:, :n_psi2], Lam, k, history, converged)


def complementarity_residual(Lam, MU_G, layout) -> float:
    """max_j |min(Lambda_j, (M~(U-G))_j)| over normal indices."""
    idx = layout.normal_idx
    return float(np.max(np.abs(np.minimum(np.ravel(Lam)[idx], np.ravel(MU_G)[idx])))) \
        if len(idx) else 0.0
