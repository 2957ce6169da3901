"""Second-order Taylor jets in two variables.

Used to differentiate the closed-form Green's tensor exactly (to rounding)
for the pointwise traction kernels.
"""
import math

import numpy as np


class Jet:
    __slots__ = ("v", "g", "H")

    def __init__(self, v, g, H):
        self.v, self.g, self.H = v, g, H

    @staticmethod
    def const(c, shape):
        c = np.broadcast_to(np.asarray(c, float), shape)
        return Jet(c, np.zeros(shape + (2,)), np.zeros(shape + (2, 2)))

    def _wrap(self, o):
        return o if isinstance(o, Jet) else Jet.const(o, np.shape(self.v))

    def __add__(self, o):
        o = self._wrap(o)
        return Jet(self.v + o.v, self.g + o.g, self.H + o.H)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.g, -self.H)

    def __sub__(self, o):
        return self + (-self._wrap(o))

    def __rsub__(self, o):
        return self._wrap(o) - self

    def __mul__(self, o):
        o = self._wrap(o)
        v = self.v * o.v
        g = self.g * o.v[..., None] + o.g * self.v[..., None]
        H = (self.H * o.v[..., None, None] + o.H * self.v[..., None, None]
             + self.g[..., :, None] * o.g[..., None, :] + o.g[..., :, None] * self.g[..., None, :])
        return Jet(v, g, H)

    __rmul__ = __mul__

    def apply(self, f0, f1, f2):
        """Compose with a scalar function given value and two derivatives."""
        return Jet(f0, f1[..., None] * self.g,
                   f1[..., None, None] * self.H + f2[..., None, None]
                   * self.g[..., :, None] * self.g[..., None, :])

    def recip(self):
        v = self.v
        return self.apply(1.0 / v, -1.0 / v ** 2, 2.0 / v ** 3)

    def __truediv__(self, o):
        return self * self._wrap(o).recip()

    def __rtruediv__(self, o):
        return self._wrap(o) * self.recip()

    def sqrt(self):
        s = np.sqrt(self.v)
        return self.apply(s, 0.5 / s, -0.25 / (s * self.v))


def green_jet(r, delta, mat):
    """Closed-form G, dG[i,j,k] = d_k G_ij and d2G[i,j,k,l] w.r.t. r."""
    shape = r.shape[:-1]
    x = Jet(r[..., 0], np.zeros(shape + (2,)), np.zeros(shape + (2, 2)))
    y = Jet(r[..., 1], np.zeros(shape + (2,)), np.zeros(shape + (2, 2)))
    x.g[..., 0] = 1.0
    y.g[..., 1] = 1.0
    R2 = x * x + y * y
    comps = (x, y)
    G = [[Jet.const(0.0, shape) for _ in range(2)] for _ in range(2)]
    for c, sign in ((mat.cP, 1.0), (mat.cS, -1.0)):
        on = (c * delta) ** 2 > R2.v
        c2s2 = c * c * delta * delta
        arg = (c2s2 - R2)
        arg.v = np.where(on, arg.v, 1.0)
        q = arg.sqrt()
        A = (2 * c2s2 - R2) / q / (R2 * R2)
        if sign > 0:
            B = q / R2
        else:
            B = c2s2 / (q * R2)
        pref = sign * on / (2 * math.pi * mat.rho * c)
        for i in range(2):
            for j in range(2):
                t = A * comps[i] * comps[j]
                if i == j:
                    t = t - B
                G[i][j] = G[i][j] + t * pref
    Gv = np.stack([np.stack([G[i][j].v for j in range(2)], -1) for i in range(2)], -2)
    dG = np.stack([np.stack([G[i][j].g for j in range(2)], -2) for i in range(2)], -3)
    d2G = np.stack([np.stack([G[i][j].H for j in range(2)], -3) for i in range(2)], -4)
    return Gv, dG, d2G
