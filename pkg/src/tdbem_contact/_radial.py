"""Scalar building blocks: time antiderivatives of the 2D wave kernel.

For a wave speed c the scalar retarded kernel is

    h_c(r, s) = c H(cs - r) / (2 pi sqrt(c^2 s^2 - r^2)).

Its m-th time antiderivative and r-derivatives follow from the substitution
c*sigma = r*cosh(theta):

    d^j/dr^j h^[m+1] = (-1)^j (r/c)^(m-j) / (2 pi c^j (m-j)!) * P(m-j, j; z),
    P(a, k; z) = int_0^{arccosh z} cosh^k(t) (z - cosh t)^a dt,  z = cs/r,

valid for j <= m.  P is evaluated in closed form through the moments
J_n = int_0^L cosh^n, except close to the wavefront (z -> 1) where the
closed form cancels and a short Gauss rule in theta is used instead.
"""
import math

import numpy as np
from numba import njit

_GX, _GW = np.polynomial.legendre.leggauss(12)
GL_X = 0.5 * (_GX + 1.0)
GL_W = 0.5 * _GW

NJ = 9          # moments J_0 .. J_8
Z_SWITCH = 1.25  # below: theta quadrature

_BINOM = np.array([[math.comb(a, i) if i <= a else 0 for i in range(NJ)]
                   for a in range(NJ)], dtype=np.float64)
_FACT = np.array([math.factorial(k) for k in range(NJ + 2)], dtype=np.float64)


@njit(cache=True)
def p_moment(a, k, z):
    """P(a, k; z) for z > 1 (0 otherwise)."""
    if z <= 1.0:
        return 0.0
    L = math.acosh(z)
    if z < Z_SWITCH:
        acc = 0.0
        for q in range(GL_X.shape[0]):
            th = L * GL_X[q]
            ch = math.cosh(th)
            acc += GL_W[q] * ch ** k * (z - ch) ** a
        return acc * L
    qt = math.sqrt(z * z - 1.0)
    J = np.empty(a + k + 1)
    J[0] = L
    if a + k >= 1:
        J[1] = qt
    for n in range(2, a + k + 1):
        J[n] = z ** (n - 1) * qt / n + (n - 1) / n * J[n - 2]
    acc = 0.0
    sgn = 1.0
    for i in range(a + 1):
        acc += sgn * _BINOM[a, i] * z ** (a - i) * J[k + i]
        sgn = -sgn
    return acc


@njit(cache=True)
def hder(order, j, r, s, c):
    """j-th r-derivative of the order-th time antiderivative of h_c.

    Requires 1 <= order and j <= order - 1.  Causal: zero for cs <= r.
    """
    if c * s <= r:
        return 0.0
    m = order - 1
    z = c * s / r
    sgn = -1.0 if (j % 2) else 1.0
    return (sgn * (r / c) ** (m - j) / (2.0 * math.pi * c ** j * _FACT[m - j])
            * p_moment(m - j, j, z))


# Indices into the packed radial table produced by radial_table.
H1, H2, H3, H2D, H3D, H3DD, H4D, H4DD, H5D, H5DD = range(10)
N_RADIAL = 10


@njit(cache=True)
def radial_table(r, s, c, out):
    """Fill out[0:10] with
    h1, h2, h3, h2', h3', h3'', h4', h4'', h5', h5''
    (h_m = m-th time antiderivative, ' = d/dr) for one wave speed."""
    if c * s <= r:
        for i in range(N_RADIAL):
            out[i] = 0.0
        return
    z = c * s / r
    L = math.acosh(z)
    P = np.empty((5, 5))
    if z < Z_SWITCH:
        for a in range(5):
            for k in range(5 - a):
                P[a, k] = 0.0
        for q in range(GL_X.shape[0]):
            th = L * GL_X[q]
            ch = math.cosh(th)
            d = z - ch
            w = GL_W[q] * L
            da = 1.0
            for a in range(5):
                ck = 1.0
                for k in range(5 - a):
                    P[a, k] += w * da * ck
                    ck *= ch
                da *= d
    else:
        qt = math.sqrt(z * z - 1.0)
        J = np.empty(5)
        J[0] = L
        J[1] = qt
        for n in range(2, 5):
            J[n] = z ** (n - 1) * qt / n + (n - 1) / n * J[n - 2]
        for a in range(5):
            for k in range(5 - a):
                acc = 0.0
                sgn = 1.0
                zp = z ** a
                for i in range(a + 1):
                    acc += sgn * _BINOM[a, i] * zp * J[k + i]
                    sgn = -sgn
                    zp /= z
                P[a, k] = acc
    tp = 2.0 * math.pi
    rc = r / c
    out[H1] = P[0, 0] / tp
    out[H2] = rc * P[1, 0] / tp
    out[H3] = rc * rc * P[2, 0] / (2.0 * tp)
    out[H2D] = -P[0, 1] / (tp * c)
    out[H3D] = -rc * P[1, 1] / (tp * c)
    out[H3DD] = P[0, 2] / (tp * c * c)
    out[H4D] = -rc * rc * P[2, 1] / (2.0 * tp * c)
    out[H4DD] = rc * P[1, 2] / (tp * c * c)
    out[H5D] = -rc ** 3 * P[3, 1] / (6.0 * tp * c)
    out[H5DD] = rc * rc * P[2, 2] / (2.0 * tp * c * c)
