"""Compiled direct-summation loop for the pulled-back Biot-Savart kernel.

For a source ``eta = a + i b`` in the half-disk (``m = |eta|^2``) the four
image terms of the gradient collapse to

    2 i b (w^2 - 1)(m - 1) / ((w^2 - 2 a w + m) (m w^2 - 2 a w + 1)),

so each source is stored as ``(a, m, s)`` with ``s = 2 b (m - 1) * strength``
and the factor ``i (w^2 - 1)`` is applied once per evaluation point.

Where a quadrature weight depends on the evaluation point (the near-field
blend and the exclusion taper) the velocity is taken as the perpendicular
gradient of the weighted stream function, so the extra term
``perp(grad c) * G`` is added.  This keeps the discrete field exactly
divergence-free.
"""
import math

import numba as nb
import numpy as np

TWO_PI = 2.0 * math.pi


@nb.njit(cache=True, nogil=True, inline="always")
def _fmap(z, radius, beta, cut):
    r = abs(z)
    if r == 0.0:
        return 0j
    a = math.atan2(z.imag, z.real)
    if a < cut:
        a += TWO_PI
    rr = (r / radius) ** beta
    return complex(rr * math.cos(beta * a), rr * math.sin(beta * a))


@nb.njit(cache=True, nogil=True, inline="always")
def _smooth01(t):
    # C4 step: 0 for t <= 0, 1 for t >= 1
    if t <= 0.0:
        return 0.0
    if t >= 1.0:
        return 1.0
    t2 = t * t
    return t2 * t2 * t * (126.0 - 420.0 * t + 540.0 * t2 - 315.0 * t2 * t + 70.0 * t2 * t2)


@nb.njit(cache=True, nogil=True, inline="always")
def _dsmooth01(t):
    if t <= 0.0 or t >= 1.0:
        return 0.0
    u = t * (1.0 - t)
    u2 = u * u
    return 630.0 * u2 * u2


@nb.njit(cache=True, nogil=True, inline="always")
def _green(w, a, b, m, q):
    # q * G_U(w, a + i b), with |eta|^2 = m, from squared moduli
    e = complex(a, b)
    eb = complex(a, -b)
    d1 = w - e
    d2 = m * w - eb
    d3 = w - eb
    d4 = m * w - e
    num = (d1.real * d1.real + d1.imag * d1.imag) * (d2.real * d2.real + d2.imag * d2.imag)
    den = (d3.real * d3.real + d3.imag * d3.imag) * (d4.real * d4.real + d4.imag * d4.imag)
    return q * math.log(num / den) / (2.0 * TWO_PI)


@nb.njit(cache=True, nogil=True, inline="always")
def _term(w2, w2a, a, m, s):
    # w2a = 2 w; returns s / (A B)
    A = w2 - a * w2a + m
    B = m * w2 - a * w2a + 1.0
    return s / (A * B)


@nb.njit(cache=True, nogil=True, inline="always")
def _bil(q, s, t):
    return (q[0] * (1.0 - s) * (1.0 - t) + q[1] * s * (1.0 - t)
            + q[2] * (1.0 - s) * t + q[3] * s * t)


@nb.njit(cache=True, nogil=True, inline="always")
def _bil_det(q, s, t):
    ps = (q[1] - q[0]) * (1.0 - t) + (q[3] - q[2]) * t
    pt = (q[2] - q[0]) * (1.0 - s) + (q[3] - q[1]) * s
    return ps.real * pt.imag - ps.imag * pt.real


@nb.njit(cache=True, nogil=True)
def source_params(eta, strength):
    n = eta.shape[0]
    a = np.empty(n)
    b = np.empty(n)
    m = np.empty(n)
    s = np.empty(n)
    for j in range(n):
        e = eta[j]
        a[j] = e.real
        b[j] = e.imag
        m[j] = e.real * e.real + e.imag * e.imag
        s[j] = 2.0 * e.imag * (m[j] - 1.0) * strength[j]
    return a, b, m, s


@nb.njit(cache=True, nogil=True)
def build_tree(centers, strength, quads, depth, radius, beta, cut):
    """Sub-cells of every cell down to ``depth`` levels, stored level by level.

    Node ``p`` of level ``l`` (``0 <= p < 4**l``) sits at column
    ``(4**l - 4) // 3 + p``; its children are ``4 p + k`` on level ``l + 1``.
    Sub-cell centers are shifted so that the split keeps the cell's own
    center as reference point.  Returns centers, squared diameters, mapped
    ``(a, b, m)``, kernel numerators ``s`` and weights ``q``.
    """
    n = centers.shape[0]
    k_tot = (4 ** (depth + 1) - 4) // 3
    c_out = np.empty((n, k_tot), dtype=np.complex128)
    d2_out = np.empty((n, k_tot))
    a_out = np.empty((n, k_tot))
    b_out = np.empty((n, k_tot))
    m_out = np.empty((n, k_tot))
    s_out = np.empty((n, k_tot))
    q_out = np.empty((n, k_tot))
    for j in range(n):
        q = quads[j]
        det0 = _bil_det(q, 0.5, 0.5)
        shift = centers[j] - _bil(q, 0.5, 0.5)
        for lev in range(1, depth + 1):
            side = 2 ** lev
            hs = 1.0 / side
            off = (4 ** lev - 4) // 3
            for p in range(4 ** lev):
                # decode the quadtree path of p into (s0, t0)
                s0 = 0.0
                t0 = 0.0
                pp = p
                h = hs
                for _ in range(lev):
                    k = pp % 4
                    pp //= 4
                    s0 += h * (k % 2)
                    t0 += h * (k // 2)
                    h *= 2.0
                sm = s0 + 0.5 * hs
                tm = t0 + 0.5 * hs
                c = _bil(q, sm, tm) + shift
                if det0 > 0.0:
                    wgt = strength[j] * hs * hs * _bil_det(q, sm, tm) / det0
                else:
                    wgt = strength[j] * hs * hs
                d1 = abs(_bil(q, s0 + hs, t0 + hs) - _bil(q, s0, t0))
                dd = abs(_bil(q, s0 + hs, t0) - _bil(q, s0, t0 + hs))
                e = _fmap(c, radius, beta, cut)
                col = off + p
                c_out[j, col] = c
                d2_out[j, col] = 0.5 * (d1 * d1 + dd * dd)
                a_out[j, col] = e.real
                b_out[j, col] = e.imag
                mm = e.real * e.real + e.imag * e.imag
                m_out[j, col] = mm
                s_out[j, col] = 2.0 * e.imag * (mm - 1.0) * wgt
                q_out[j, col] = wgt
    return c_out, d2_out, a_out, b_out, m_out, s_out, q_out


@nb.njit(cache=True, nogil=True, inline="always")
def _blend(dz, dist2, d2, near, far):
    """Refinement weight and its gradient for a node at offset ``dz``."""
    rho = math.sqrt(dist2 / d2)
    t = (far - rho) / (far - near)
    bw = _smooth01(t)
    # d rho / dx = dz / (dist * diam)
    g = -_dsmooth01(t) / (far - near) * dz / (math.sqrt(dist2) * math.sqrt(d2))
    return bw, g


@nb.njit(cache=True, nogil=True, inline="always")
def _taper(dz, dist2, ex2):
    ex = math.sqrt(ex2)
    dist = math.sqrt(dist2)
    t = dist / ex - 1.0
    return _smooth01(t), _dsmooth01(t) * dz / (dist * ex)


@nb.njit(cache=True, nogil=True)
def _refined(x, w, w2, w2a, j, mult0, gm0, tc, td2, ta, tb, tm, ts, tq, near, far, depth,
             excl2, stk_p, stk_l, stk_m, stk_g):
    """Sum over the sub-cells of cell ``j``; returns the kernel sum and the
    stream-function gradient correction ``sum G grad(c)``."""
    acc = 0j
    ext = 0j
    near2 = near * near
    far2 = far * far
    top = 0
    for k in range(3, -1, -1):
        stk_p[top] = k
        stk_l[top] = 1
        stk_m[top] = mult0
        stk_g[top] = gm0
        top += 1
    while top > 0:
        top -= 1
        p = stk_p[top]
        lev = stk_l[top]
        m = stk_m[top]
        gm = stk_g[top]
        col = (4 ** lev - 4) // 3 + p
        dz = x - tc[j, col]
        dist2 = dz.real * dz.real + dz.imag * dz.imag
        d2 = td2[j, col]
        if lev >= depth:
            ex2 = excl2 if excl2 >= 0.0 else -excl2 * d2
            if dist2 <= ex2:
                continue
            c = m
            gc = gm
            if dist2 < 4.0 * ex2:
                tap, gt = _taper(dz, dist2, ex2)
                c = m * tap
                gc = gm * tap + m * gt
            acc += c * _term(w2, w2a, ta[j, col], tm[j, col], ts[j, col])
            if gc != 0j:
                ext += gc * _green(w, ta[j, col], tb[j, col], tm[j, col], tq[j, col])
            continue
        if dist2 >= far2 * d2:
            acc += m * _term(w2, w2a, ta[j, col], tm[j, col], ts[j, col])
            if gm != 0j:
                ext += gm * _green(w, ta[j, col], tb[j, col], tm[j, col], tq[j, col])
            continue
        if dist2 <= near2 * d2:
            cm = m
            cg = gm
        else:
            bw, gb = _blend(dz, dist2, d2, near, far)
            cm = m * bw
            cg = gm * bw + m * gb
            # coarse share m (1 - bw), gradient gm (1 - bw) - m gb
            acc += (m - cm) * _term(w2, w2a, ta[j, col], tm[j, col], ts[j, col])
            ext += (gm - cg) * _green(w, ta[j, col], tb[j, col], tm[j, col], tq[j, col])
        # push children in reverse so they pop in order 0..3
        for k in range(3, -1, -1):
            stk_p[top] = 4 * p + k
            stk_l[top] = lev + 1
            stk_m[top] = cm
            stk_g[top] = cg
            top += 1
    return acc, ext


@nb.njit(cache=True, nogil=True)
def velocity_range(xs, out, lo, hi, centers, strength, diam2, sa, sb, sm, ss,
                   tc, td2, ta, tb, tm, ts, tq, radius, beta, cut, near, far, depth, excl):
    """Fill ``out[lo:hi]`` with the velocity (as ``u1 + 1j u2``) at ``xs[lo:hi]``.

    ``excl < 0`` means each finest sub-cell uses ``-excl`` times its own
    diameter as exclusion radius.
    """
    n = centers.shape[0]
    cap = 3 * depth + 8
    stk_p = np.empty(cap, dtype=np.int64)
    stk_l = np.empty(cap, dtype=np.int64)
    stk_m = np.empty(cap)
    stk_g = np.empty(cap, dtype=np.complex128)
    # excl < 0: exclusion radius is -excl times each finest sub-cell's diameter
    excl2 = excl * excl if excl >= 0.0 else -excl * excl
    inv2pi = 1.0 / TWO_PI
    for i in range(lo, hi):
        x = xs[i]
        if x == 0j:
            out[i] = 0j
            continue
        wx = _fmap(x, radius, beta, cut)
        w2 = wx * wx
        w2a = 2.0 * wx
        acc = 0j
        ext = 0j
        for j in range(n):
            if strength[j] == 0.0:
                continue
            dz = x - centers[j]
            dist2 = dz.real * dz.real + dz.imag * dz.imag
            d2 = diam2[j]
            if depth == 0:
                ex2 = excl2 if excl2 >= 0.0 else -excl2 * d2
                if dist2 <= ex2:
                    continue
                if dist2 >= 4.0 * ex2:
                    acc += _term(w2, w2a, sa[j], sm[j], ss[j])
                else:
                    tap, gt = _taper(dz, dist2, ex2)
                    acc += tap * _term(w2, w2a, sa[j], sm[j], ss[j])
                    ext += gt * _green(wx, sa[j], sb[j], sm[j], strength[j])
                continue
            if dist2 >= far * far * d2:
                acc += _term(w2, w2a, sa[j], sm[j], ss[j])
                continue
            if dist2 <= near * near * d2:
                bw = 1.0
                gb = 0j
            else:
                bw, gb = _blend(dz, dist2, d2, near, far)
                acc += (1.0 - bw) * _term(w2, w2a, sa[j], sm[j], ss[j])
                ext -= gb * _green(wx, sa[j], sb[j], sm[j], strength[j])
            r_acc, r_ext = _refined(x, wx, w2, w2a, j, bw, gb, tc, td2, ta, tb, tm, ts, tq,
                                    near, far, depth, excl2, stk_p, stk_l, stk_m, stk_g)
            acc += r_acc
            ext += r_ext
        # grad G_U = conj(i (w^2 - 1) acc) / 2pi; u = -i conj(f'(x) grad) - i ext
        dfx = beta * wx / x
        v = dfx * 1j * (w2 - 1.0) * acc
        out[i] = complex(-v.imag, -v.real) * inv2pi - 1j * ext


@nb.njit(cache=True, nogil=True)
def map_points(zs, radius, beta, cut):
    out = np.empty(zs.shape[0], dtype=np.complex128)
    for i in range(zs.shape[0]):
        out[i] = _fmap(zs[i], radius, beta, cut)
    return out
