"""Marching-on-in-time back-substitution for lower block-Toeplitz systems."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .assembly import BlockLowerToeplitz
from .errors import SingularBlockError


@dataclass
class DiagonalFactorization:
    lu: np.ndarray
    piv: np.ndarray
    min_pivot: float

    def solve(self, b: np.ndarray) -> np.ndarray:
        return sla.lu_solve((self.lu, self.piv), b)


def factorize(S0, rtol: float = 1e-14) -> DiagonalFactorization:
    S0 = np.asarray(S0, float)
    if S0.ndim != 2 or S0.shape[0] != S0.shape[1]:
        raise ValueError("S0 must be square")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)   # reported below
        lu, piv = sla.lu_factor(S0, check_finite=True)
    d = np.abs(np.diag(lu))
    scale = max(np.max(np.abs(S0)), np.finfo(float).tiny)
    pmin = float(d.min()) if d.size else 1.0
    if d.size and pmin <= rtol * scale:
        raise SingularBlockError(f"S0 numerically singular: pivot {pmin:.3e} (scale {scale:.3e})")
    return DiagonalFactorization(lu, piv, pmin)


def march(system: BlockLowerToeplitz, rhs, fac: DiagonalFactorization | None = None,
          n_steps: int | None = None) -> np.ndarray:
    """X_(l) = S0^{-1} (F_(l) - sum_{j=1..l} S(j) X_(l-j)).

    rhs: array (N, n) or (N, n, k) (several right-hand sides), or an object
    with a `per_step` attribute.  The history sum is one fixed-order matrix
    product per step over the time-reversed solution buffer, so results are
    reproducible run to run.
    """
    F = np.asarray(getattr(rhs, "per_step", rhs), float)
    N = system.n_steps if n_steps is None else n_steps
    if F.shape[0] < N or F.shape[1] != system.block_size:
        raise ValueError(f"rhs shape {F.shape} does not match the system")
    if fac is None:
        fac = factorize(system.S0)
    Ns = system.n_steps
    Xrev = np.zeros((Ns,) + F.shape[1:])
    r = system.tail_rows
    for l in range(N):
        b = F[l].copy()
        if l:
            b[:r] -= system.history(l, Xrev)
        Xrev[Ns - 1 - l] = fac.solve(b)
    return Xrev[Ns - N:][::-1].copy()
