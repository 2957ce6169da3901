"""Compiled element-pair integration of the regularized space-time kernels.

For one time value s the routine `raw_matrices` integrates, over all element
pairs, the time antiderivatives

    V: G^[1](x-y, s)
    K: K^[2] with the tangential derivative moved onto the trial hat
    W: W^[3] with both tangential derivatives moved onto the hats

against the spatial bases.  Blocks of lag d are second differences of these
raw matrices in s (see assembly).  Panels are split at the wavefront circles
of both wave speeds and graded towards coincident or shared-vertex
singularities.
"""
import math

import numpy as np
from numba import njit

from ._radial import (H1, H2, H3, H2D, H3D, H3DD, H4D, H4DD, H5D, H5DD,
                      N_RADIAL, radial_table)

MAXG = 24
_GX = np.zeros((MAXG + 1, MAXG))
_GW = np.zeros((MAXG + 1, MAXG))
for _n in range(1, MAXG + 1):
    _x, _w = np.polynomial.legendre.leggauss(_n)
    _GX[_n, :_n] = 0.5 * (_x + 1.0)
    _GW[_n, :_n] = 0.5 * _w

REG, KINK, SING = 0, 1, 2
GRADE = 0.15
MAXPTS = 4096
NEAR_GAP = 0.05


@njit(cache=True)
def _add_plain(p, q, n, xs, ws, cnt):
    L = q - p
    for i in range(n):
        xs[cnt] = p + L * _GX[n, i]
        ws[cnt] = L * _GW[n, i]
        cnt += 1
    return cnt


@njit(cache=True)
def _add_sq(p, q, toward_p, n, xs, ws, cnt):
    # quadratic clustering at one end: removes sqrt-type endpoint behaviour
    L = q - p
    for i in range(n):
        u = _GX[n, i]
        if toward_p:
            xs[cnt] = p + L * u * u
        else:
            xs[cnt] = q - L * u * u
        ws[cnt] = 2.0 * L * u * _GW[n, i]
        cnt += 1
    return cnt


@njit(cache=True)
def _add_cubic(p, q, toward_p, n, xs, ws, cnt):
    L = q - p
    for i in range(n):
        u = _GX[n, i]
        # tiny panels next to a singular point may round nodes onto it
        if toward_p:
            x = p + L * u ** 3
            xs[cnt] = x if x != p else np.nextafter(p, q)
        else:
            x = q - L * u ** 3
            xs[cnt] = x if x != q else np.nextafter(q, p)
        ws[cnt] = 3.0 * L * u * u * _GW[n, i]
        cnt += 1
    return cnt


@njit(cache=True)
def _add_graded(p, q, toward_p, other_kink, n, nlev, xs, ws, cnt):
    L = q - p
    for k in range(nlev):
        hi = GRADE ** k
        lo = GRADE ** (k + 1)
        if toward_p:
            a0, a1 = p + L * lo, p + L * hi
        else:
            a0, a1 = q - L * hi, q - L * lo
        if k == 0 and other_kink:
            cnt = _add_sq(a0, a1, not toward_p, n, xs, ws, cnt)
        else:
            cnt = _add_plain(a0, a1, n, xs, ws, cnt)
    t = GRADE ** nlev
    if toward_p:
        cnt = _add_cubic(p, p + L * t, True, n, xs, ws, cnt)
    else:
        cnt = _add_cubic(q - L * t, q, False, n, xs, ws, cnt)
    return cnt


@njit(cache=True)
def _add_panel(p, q, tp, tq, n, nlev, xs, ws, cnt):
    if q - p <= 1e-15:
        return cnt
    if tp == SING and tq == SING:
        m = 0.5 * (p + q)
        cnt = _add_graded(p, m, True, False, n, nlev, xs, ws, cnt)
        return _add_graded(m, q, False, False, n, nlev, xs, ws, cnt)
    if tp == SING:
        return _add_graded(p, q, True, tq == KINK, n, nlev, xs, ws, cnt)
    if tq == SING:
        return _add_graded(p, q, False, tp == KINK, n, nlev, xs, ws, cnt)
    if tp == KINK and tq == KINK:
        m = 0.5 * (p + q)
        cnt = _add_sq(p, m, True, n, xs, ws, cnt)
        return _add_sq(m, q, False, n, xs, ws, cnt)
    if tp == KINK:
        return _add_sq(p, q, True, n, xs, ws, cnt)
    if tq == KINK:
        return _add_sq(p, q, False, n, xs, ws, cnt)
    return _add_plain(p, q, n, xs, ws, cnt)


@njit(cache=True)
def composite_rule(bps, types, nb, n, nlev, xs, ws):
    """Sort breakpoints in [0,1] (with their types), merge duplicates, and
    fill a composite rule.  Returns the number of nodes."""
    order = np.argsort(bps[:nb])
    sb = np.empty(nb + 2)
    st = np.empty(nb + 2, np.int64)
    sb[0] = 0.0
    st[0] = REG
    m = 1
    for ii in range(nb):
        i = order[ii]
        b = bps[i]
        if b <= 0.0:
            if types[i] > st[0]:
                st[0] = types[i]
            continue
        if b >= 1.0:
            continue
        if b - sb[m - 1] < 1e-13:
            if types[i] > st[m - 1]:
                st[m - 1] = types[i]
            continue
        sb[m] = b
        st[m] = types[i]
        m += 1
    # endpoint 1 type
    t1 = REG
    for i in range(nb):
        if bps[i] >= 1.0 and types[i] > t1:
            t1 = types[i]
    if 1.0 - sb[m - 1] < 1e-13 and m > 1:
        if t1 > st[m - 1]:
            st[m - 1] = t1
        sb[m - 1] = 1.0
    else:
        sb[m] = 1.0
        st[m] = t1
        m += 1
    cnt = 0
    for i in range(m - 1):
        cnt = _add_panel(sb[i], sb[i + 1], st[i], st[i + 1], n, nlev, xs, ws, cnt)
    return cnt


@njit(cache=True)
def _quad_roots(A, B, C, out, k, typ, types):
    # roots of A t^2 + B t + C = 0 in (0,1)
    if A == 0.0:
        return k
    disc = B * B - 4 * A * C
    if disc < 0:
        return k
    sq = math.sqrt(disc)
    for sgn in (-1.0, 1.0):
        t = (-B + sgn * sq) / (2 * A)
        if -1e-12 <= t <= 1.0 + 1e-12:
            out[k] = t
            types[k] = typ
            k += 1
    return k


@njit(cache=True)
def _dist_point_seg(px, py, ax, ay, tx, ty, h):
    wx, wy = px - ax, py - ay
    t = wx * tx + wy * ty
    if t < 0.0:
        t = 0.0
    elif t > h:
        t = h
    dx, dy = wx - t * tx, wy - t * ty
    return math.sqrt(dx * dx + dy * dy)


@njit(cache=True)
def _seg_dist(Ae, Te, he, Af, Tf, hf):
    d = _dist_point_seg(Ae[0], Ae[1], Af[0], Af[1], Tf[0], Tf[1], hf)
    d = min(d, _dist_point_seg(Ae[0] + he * Te[0], Ae[1] + he * Te[1],
                               Af[0], Af[1], Tf[0], Tf[1], hf))
    d = min(d, _dist_point_seg(Af[0], Af[1], Ae[0], Ae[1], Te[0], Te[1], he))
    d = min(d, _dist_point_seg(Af[0] + hf * Tf[0], Af[1] + hf * Tf[1],
                               Ae[0], Ae[1], Te[0], Te[1], he))
    return d


# Small-r series of d/dr h^[m] / r  (row 2*(m-3)) and d2/dr2 h^[m] (row 2*(m-3)+1),
# m = 3, 4, 5, without the c-independent r^-2 term (it cancels in P - S
# differences).  value_c = s^(m-3)/c^2 * sum_p w^(2p) (A_p + B_p log(2/w)),
# w = r/(c s).
_SER_A = np.array([
    [0.039788735772973836, -0.009947183943243459, -0.0024867959858108648, -0.0010361649940878602, -0.0005439866218961266],
    [-0.039788735772973836, -0.029841551829730376, -0.012433979929054323, -0.007253154958615022, -0.00489587959706514],
    [-0.039788735772973836, 0.009947183943243459, 0.0008289319952702883, 0.00020723299881757206, 7.771237455658952e-05],
    [-0.1193662073189215, 0.029841551829730376, 0.004144659976351441, 0.0014506309917230043, 0.0006994113710093057],
    [-0.039788735772973836, 0.012433979929054323, -0.00041446599763514413, -5.1808249704393016e-05, -1.2952062426098254e-05],
    [-0.07957747154594767, 0.027354755843919512, -0.0020723299881757204, -0.0003626577479307511, -0.00011656856183488428]])
_SER_B = np.array([
    [0.07957747154594767, 0.0, 0.0, 0.0, 0.0],
    [0.07957747154594767, 0.0, 0.0, 0.0, 0.0],
    [0.07957747154594767, 0.0, 0.0, 0.0, 0.0],
    [0.07957747154594767, 0.0, 0.0, 0.0, 0.0],
    [0.039788735772973836, 0.009947183943243459, 0.0, 0.0, 0.0],
    [0.039788735772973836, 0.029841551829730376, 0.0, 0.0, 0.0]])
SERIES_W = 0.05


@njit(cache=True)
def _series_diff(row, m, r, s, cP, cS):
    """(P - S) difference of the regular part of a small-r series."""
    acc = 0.0
    for c, sgn in ((cP, 1.0), (cS, -1.0)):
        w = r / (c * s)
        lg = math.log(2.0 / w)
        w2 = w * w
        wp = 1.0
        v = 0.0
        for p in range(5):
            v += wp * (_SER_A[row, p] + _SER_B[row, p] * lg)
            wp *= w2
        acc += sgn * v * s ** (m - 3) / (c * c)
    return acc


@njit(cache=True)
def _pair_kernels(rx, ry, s, nx, tx, ny, ty, cP, cS, rho, mu, want_w, tabP, tabS, out):
    """Regularized kernel matrices at one point pair.

    out[0]: G1 (V)
    out[1]: K0 (multiplies trial hat), out[2]: K1 (multiplies d_tau hat)
    out[3]: W00 (hat x hat), out[4]: W11 (d_tau hat x d_tau hat),
    out[5]: W10 (d_tau test x trial hat), out[6]: W01 (test hat x d_tau trial)
    """
    r = math.sqrt(rx * rx + ry * ry)
    ex, ey = rx / r, ry / r
    radial_table(r, s, cP, tabP)
    radial_table(r, s, cS, tabS)
    cS2 = cS * cS
    small = r < SERIES_W * cS * s
    # G^[1]
    for which in range(3 if want_w else 2):
        if which == 0:
            g0 = tabS[H1] / cS2
            c1 = tabP[H3D] - tabS[H3D]
            c2 = tabP[H3DD] - tabS[H3DD]
        elif which == 1:
            g0 = tabS[H2] / cS2
            c1 = tabP[H4D] - tabS[H4D]
            c2 = tabP[H4DD] - tabS[H4DD]
        else:
            g0 = tabS[H3] / cS2
            c1 = tabP[H5D] - tabS[H5D]
            c2 = tabP[H5DD] - tabS[H5DD]
        if small:
            c1r = _series_diff(2 * which, which + 3, r, s, cP, cS)
            c2 = _series_diff(2 * which + 1, which + 3, r, s, cP, cS)
        else:
            c1r = c1 / r
        a = c2 - c1r
        b = g0 + c1r
        G00 = (a * ex * ex + b) / rho
        G01 = (a * ex * ey) / rho
        G11 = (a * ey * ey + b) / rho
        if which == 0:
            out[0, 0, 0] = G00
            out[0, 0, 1] = G01
            out[0, 1, 0] = G01
            out[0, 1, 1] = G11
        elif which == 1:
            # K0 = -(hP2' e.ny) I - J e (hS2' - hP2') ty^T
            dp = tabP[H2D]
            if r < cS * s:
                aP = math.sqrt(s * s - (r / cP) ** 2)
                aS = math.sqrt(s * s - (r / cS) ** 2)
                dd = r * (1.0 / cS2 - 1.0 / (cP * cP)) / (2.0 * math.pi * (aP + aS))
            else:
                dd = tabS[H2D] - tabP[H2D]
            en = ex * ny[0] + ey * ny[1]
            Je0, Je1 = -ey, ex
            out[1, 0, 0] = -dp * en - dd * Je0 * ty[0]
            out[1, 0, 1] = -dd * Je0 * ty[1]
            out[1, 1, 0] = -dd * Je1 * ty[0]
            out[1, 1, 1] = -dp * en - dd * Je1 * ty[1]
            # K1 = -(hP2 J + 2 mu G J^T);  G J^T = [[-G01, G00],[-G11, G01]]
            hp = tabP[H2]
            out[2, 0, 0] = 2 * mu * G01
            out[2, 0, 1] = hp - 2 * mu * G00
            out[2, 1, 0] = -(hp - 2 * mu * G11)
            out[2, 1, 1] = -2 * mu * G01
        else:
            # W00 = -rho (hP1 nx ny^T + hS1 tx ty^T)
            p1 = tabP[H1]
            s1 = tabS[H1]
            for i in range(2):
                for j in range(2):
                    out[3, i, j] = -rho * (p1 * nx[i] * ny[j] + s1 * tx[i] * ty[j])
            # W11 = 4 mu^2 J G J^T - 4 mu hP3 I ;  J G J^T = [[G11,-G01],[-G01,G00]]
            hp3 = tabP[H3]
            out[4, 0, 0] = 4 * mu * mu * G11 - 4 * mu * hp3
            out[4, 0, 1] = -4 * mu * mu * G01
            out[4, 1, 0] = -4 * mu * mu * G01
            out[4, 1, 1] = 4 * mu * mu * G00 - 4 * mu * hp3
            # W10 = -2mu { -(hP3' e.ny) J + (hS3' - hP3') e ty^T }
            p3 = tabP[H3D]
            if small:
                d3 = -r * _series_diff(0, 3, r, s, cP, cS)
            else:
                d3 = tabS[H3D] - tabP[H3D]
            eny = ex * ny[0] + ey * ny[1]
            enx = ex * nx[0] + ey * nx[1]
            ev = (ex, ey)
            Jm = ((0.0, -1.0), (1.0, 0.0))
            for i in range(2):
                for j in range(2):
                    out[5, i, j] = -2 * mu * (-p3 * eny * Jm[i][j] + d3 * ev[i] * ty[j])
                    # W01 = -2mu { (hP3' e.nx) J^T + (hP3' - hS3') tx e^T }
                    out[6, i, j] = -2 * mu * (p3 * enx * Jm[j][i] - d3 * tx[i] * ev[j])


@njit(cache=True)
def _outer_breaks(Ae, Te, he, Af, Tf, nf, hf, radii, nrad, bps, types):
    k = 0
    for ir in range(nrad):
        R = radii[ir]
        for end in range(2):
            Px = Af[0] + end * hf * Tf[0]
            Py = Af[1] + end * hf * Tf[1]
            wx, wy = Ae[0] - Px, Ae[1] - Py
            k = _quad_roots(he * he, 2 * he * (Te[0] * wx + Te[1] * wy),
                            wx * wx + wy * wy - R * R, bps, k, KINK, types)
        nt = nf[0] * Te[0] + nf[1] * Te[1]
        if abs(nt) > 1e-14:
            base = nf[0] * (Ae[0] - Af[0]) + nf[1] * (Ae[1] - Af[1])
            for sgn in (-1.0, 1.0):
                a = (sgn * R - base) / (he * nt)
                if -1e-12 <= a <= 1.0 + 1e-12:
                    x0 = Ae[0] + a * he * Te[0] - Af[0]
                    x1 = Ae[1] + a * he * Te[1] - Af[1]
                    foot = (x0 * Tf[0] + x1 * Tf[1]) / hf
                    if 0.0 < foot < 1.0:
                        bps[k] = a
                        types[k] = KINK
                        k += 1
    return k


@njit(cache=True)
def pair_integrals(Ae, Te, ne, he, Af, Tf, nf, hf, rel, sv_e, sv_f, s,
                   cP, cS, rho, mu, order, nlev, want_k, want_w, res):
    """Integrate the regularized kernels over one element pair at time s.

    rel: 0 far, 1 coincident, 2 adjacent with shared vertex params sv_e/sv_f.
    res[kind, i, alpha, j, beta] accumulates (kind 0 V, 1 K, 2 W).
    """
    radii = np.empty(2)
    radii[0] = cS * s
    radii[1] = cP * s
    obp = np.empty(16)
    oty = np.empty(16, np.int64)
    ib = np.empty(24)
    ity = np.empty(24, np.int64)
    ox = np.empty(MAXPTS)
    ow = np.empty(MAXPTS)
    ix = np.empty(MAXPTS)
    iw = np.empty(MAXPTS)
    tabP = np.empty(N_RADIAL)
    tabS = np.empty(N_RADIAL)
    kern = np.zeros((7, 2, 2))
    nk = _outer_breaks(Ae, Te, he, Af, Tf, nf, hf, radii, 2, obp, oty)
    if rel == 1:
        obp[nk] = 0.0
        oty[nk] = SING
        obp[nk + 1] = 1.0
        oty[nk + 1] = SING
        nk += 2
    elif rel == 2:
        obp[nk] = sv_e
        oty[nk] = SING
        nk += 1
    no = composite_rule(obp, oty, nk, order, nlev, ox, ow)
    ge = (-1.0 / he, 1.0 / he)
    gf = (-1.0 / hf, 1.0 / hf)
    jac = he * hf
    for io in range(no):
        a = ox[io]
        xx = Ae[0] + a * he * Te[0]
        xy = Ae[1] + a * he * Te[1]
        phe = (1.0 - a, a)
        # inner breakpoints
        m = 0
        for ir in range(2):
            R = radii[ir]
            wx, wy = xx - Af[0], xy - Af[1]
            m = _quad_roots(hf * hf, -2 * hf * (Tf[0] * wx + Tf[1] * wy),
                            wx * wx + wy * wy - R * R, ib, m, KINK, ity)
            # circle passing close to an end: near-singular sqrt behaviour
            for end in range(2):
                dx = xx - (Af[0] + end * hf * Tf[0])
                dy = xy - (Af[1] + end * hf * Tf[1])
                gap = abs(math.sqrt(dx * dx + dy * dy) - R)
                if 0.0 < gap < NEAR_GAP * hf:
                    ib[m] = float(end)
                    ity[m] = SING
                    m += 1
        if rel == 1:
            ib[m] = a
            ity[m] = SING
            m += 1
        elif rel == 2:
            ib[m] = sv_f
            ity[m] = SING
            m += 1
        ni = composite_rule(ib, ity, m, order, nlev, ix, iw)
        for ii in range(ni):
            b = ix[ii]
            yx = Af[0] + b * hf * Tf[0]
            yy = Af[1] + b * hf * Tf[1]
            if rel == 1:
                rx = (a - b) * he * Te[0]
                ry = (a - b) * he * Te[1]
            elif rel == 2:
                rx = (a - sv_e) * he * Te[0] - (b - sv_f) * hf * Tf[0]
                ry = (a - sv_e) * he * Te[1] - (b - sv_f) * hf * Tf[1]
            else:
                rx, ry = xx - yx, xy - yy
            rr2 = rx * rx + ry * ry
            if rr2 >= (cP * s) ** 2 or rr2 == 0.0:
                continue
            _pair_kernels(rx, ry, s, ne, Te, nf, Tf, cP, cS, rho, mu, want_w,
                          tabP, tabS, kern)
            w = ow[io] * iw[ii] * jac
            phf = (1.0 - b, b)
            for al in range(2):
                for be in range(2):
                    wab = w * phe[al] * phf[be]
                    for i in range(2):
                        for j in range(2):
                            res[0, i, al, j, be] += wab * kern[0, i, j]
                    if want_k:
                        wk1 = w * phe[al] * gf[be]
                        for i in range(2):
                            for j in range(2):
                                res[1, i, al, j, be] += wab * kern[1, i, j] + wk1 * kern[2, i, j]
                    if want_w:
                        w11 = w * ge[al] * gf[be]
                        w10 = w * ge[al] * phf[be]
                        w01 = w * phe[al] * gf[be]
                        for i in range(2):
                            for j in range(2):
                                res[2, i, al, j, be] += (wab * kern[3, i, j] + w11 * kern[4, i, j]
                                                         + w10 * kern[5, i, j] + w01 * kern[6, i, j])


@njit(cache=True)
def raw_matrices(verts, elems, tang, norm, lens, elem_u, n_u, s, cP, cS, rho, mu,
                 order, far_order, sing_order, nlev, want_w, RV, RK, RW):
    """Accumulate raw matrices at time s over all element pairs.

    RV (2Mpsi x 2Mpsi), RK (2Mpsi x 2n_u), RW (2n_u x 2n_u) are zeroed here.
    """
    M = elems.shape[0]
    npsi = 2 * M
    RV[:, :] = 0.0
    RK[:, :] = 0.0
    if want_w:
        RW[:, :] = 0.0
    res = np.zeros((3, 2, 2, 2, 2))
    hmax = lens.max()
    for e in range(M):
        Ae = verts[elems[e, 0]]
        for f in range(M):
            Af = verts[elems[f, 0]]
            dmin = _seg_dist(Ae, tang[e], lens[e], Af, tang[f], lens[f])
            if dmin >= cP * s:
                continue
            f_has_u = elem_u[f, 0] >= 0 or elem_u[f, 1] >= 0
            e_has_u = elem_u[e, 0] >= 0 or elem_u[e, 1] >= 0
            rel = 0
            sv_e = 0.0
            sv_f = 0.0
            if e == f:
                rel = 1
            else:
                for ie in range(2):
                    for jf in range(2):
                        if elems[e, ie] == elems[f, jf]:
                            rel = 2
                            sv_e = float(ie)
                            sv_f = float(jf)
            n_ord = order if rel == 0 else sing_order
            if rel == 0:
                dmax = dmin + lens[e] + lens[f]
                crosses = (dmin < cS * s < dmax) or (dmin < cP * s < dmax)
                if dmin > 1.5 * hmax and not crosses:
                    n_ord = far_order
            res[:, :, :, :, :] = 0.0
            pair_integrals(Ae, tang[e], norm[e], lens[e], Af, tang[f], norm[f], lens[f],
                           rel, sv_e, sv_f, s, cP, cS, rho, mu, n_ord, nlev,
                           f_has_u, want_w and e_has_u and f_has_u, res)
            for i in range(2):
                for al in range(2):
                    row = i * npsi + 2 * e + al
                    for j in range(2):
                        for be in range(2):
                            RV[row, j * npsi + 2 * f + be] += res[0, i, al, j, be]
                            if f_has_u:
                                cu = elem_u[f, be]
                                if cu >= 0:
                                    RK[row, j * n_u + cu] += res[1, i, al, j, be]
            if want_w and e_has_u and f_has_u:
                for al in range(2):
                    ru = elem_u[e, al]
                    if ru < 0:
                        continue
                    for be in range(2):
                        cu = elem_u[f, be]
                        if cu < 0:
                            continue
                        for i in range(2):
                            for j in range(2):
                                RW[i * n_u + ru, j * n_u + cu] += res[2, i, al, j, be]
