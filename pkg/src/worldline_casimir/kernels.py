"""Fast per-loop evaluation of center-of-mass maps of the propertime weight.

The naive cost of the energy pipeline is loops x nodes x segments, which is
far out of reach for production ensembles.  Two reductions make it cheap:

1. Envelope reduction.  For a half-line primitive only the extremal
   crossing abscissa matters: a scaled loop satisfies the side condition
   iff the upper envelope E(h) of (side * free coordinate) over segments
   crossing loop-frame height h satisfies E(h) >= c*h, where both c and
   the admissible height window depend only on the node.  E is piecewise
   linear with far fewer pieces than the loop has segments, and is built
   exactly once per loop (per height sign) with a domination filter.

2. Condition sweep.  With pieces fixed, every node is a query
   (c, h_top) for W = integral of h^3 over {h <= h_top : E(h) >= c*h}.
   Sweeping queries in decreasing c while cells enter/leave the admissible
   state turns the per-query work into prefix sums over pieces (binary
   indexed trees); partially admissible pieces are linearly prorated in c,
   the piece containing h_top is evaluated in closed form.

The proper-time integral over an admissible s-set maps to such W values:
with h = A/s (A the node-to-carrier offset) the weight dT/T^3 becomes
(2/A^4) h^3 dh, and with u = 1/s (used when several half-lines must be
combined) it becomes 2 u^3 du.

Accumulation order is fixed (loops in index order, nodes in query order),
so results are bitwise reproducible regardless of threading.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# cells per decade span of the envelope grid; the base cell starts at
# extent * BASE_FRAC, below which the h^3-weight is negligible
N_CELLS = 512
BASE_FRAC = 1e-5
CAP_U = 1e18  # finite stand-in for an unbounded height window


# -- binary indexed trees ---------------------------------------------

@njit(cache=True)
def _fen_update(tree, i, delta):
    i += 1
    n = tree.shape[0] - 1
    while i <= n:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True)
def _fen_prefix(tree, m):
    s = 0.0
    i = m
    while i > 0:
        s += tree[i]
        i -= i & (-i)
    return s


# -- exact piecewise-linear envelope of a loop ------------------------

@njit(cache=True)
def _upper_envelope_subcell(alpha, beta, act, n_act, u, v,
                            out_lo, out_hi, out_a, out_b, pos, store):
    """Upper envelope of n_act full lines over [u, v].

    Lines are given by value(h) = alpha[i] + beta[i]*h for i in
    act[:n_act].  Pieces are appended at ``pos`` when ``store`` is set;
    the new count is returned either way (counting pass / filling pass).
    """
    if n_act == 0:
        return pos
    best = act[0]
    bv = alpha[best] + beta[best] * u
    for t in range(1, n_act):
        i = act[t]
        vi = alpha[i] + beta[i] * u
        if vi > bv or (vi == bv and beta[i] > beta[best]):
            best = i
            bv = vi
    u0 = u
    guard = 0
    while guard <= n_act:
        guard += 1
        a0 = alpha[best]
        b0 = beta[best]
        hcut = v
        nxt = -1
        for t in range(n_act):
            i = act[t]
            if beta[i] <= b0 or i == best:
                continue
            h = (a0 - alpha[i]) / (beta[i] - b0)
            if u0 < h < hcut:
                hcut = h
                nxt = i
            elif h == hcut and nxt >= 0 and beta[i] > beta[nxt]:
                nxt = i
        if store:
            out_lo[pos] = u0
            out_hi[pos] = hcut
            out_a[pos] = a0
            out_b[pos] = b0
        pos += 1
        if nxt < 0 or hcut >= v:
            break
        u0 = hcut
        best = nxt
    return pos


@njit(cache=True)
def build_envelope(z, x):
    """Exact upper envelope of the segment crossing values of one loop.

    z holds the crossing-axis coordinates (heights), x the values whose
    maximum over crossings is wanted (already sign-folded); both relative
    to the center of mass.  Returns piece arrays (h_lo, h_hi, a, b) with
    E(h) = a + b*h on [h_lo, h_hi], sorted in h, covering heights in
    (0, max(z)] up to dropped empty slivers.  The value at h = 0+ is
    returned as a fifth element (or -inf if no segment crosses zero).
    """
    n = z.shape[0]
    zmax = 0.0
    for i in range(n):
        if z[i] > zmax:
            zmax = z[i]
    empty = (np.empty(0), np.empty(0), np.empty(0), np.empty(0))
    if zmax <= 0.0:
        return empty[0], empty[1], empty[2], empty[3], -np.inf

    # segment preprocessing: keep segments whose half-open height range
    # [lo, hi) reaches above 0
    seg_lo = np.empty(n)
    seg_hi = np.empty(n)
    seg_al = np.empty(n)
    seg_be = np.empty(n)
    ns = 0
    e0 = -np.inf
    for i in range(n):
        j = i + 1
        if j == n:
            j = 0
        z1 = z[i]
        z2 = z[j]
        if z1 == z2:
            continue
        lo = z1 if z1 < z2 else z2
        hi = z2 if z1 < z2 else z1
        if hi <= 0.0:
            continue
        be = (x[j] - x[i]) / (z2 - z1)
        al = x[i] - be * z1
        if lo <= 0.0:
            if al > e0:
                e0 = al
            lo = 0.0
        seg_lo[ns] = lo
        seg_hi[ns] = hi if hi < zmax else zmax
        seg_al[ns] = al
        seg_be[ns] = be
        ns += 1
    if ns == 0:
        return empty[0], empty[1], empty[2], empty[3], e0

    # cell grid: [0, base], then log-spaced up to zmax
    C = N_CELLS
    base = zmax * BASE_FRAC
    logstep = np.log(1.0 / BASE_FRAC) / (C - 1)
    H = np.empty(C + 1)
    H[0] = 0.0
    for c in range(1, C):
        H[c] = base * np.exp((c - 1) * logstep)
    H[C] = zmax

    def_cell = np.empty(ns, dtype=np.int64)
    last_cell = np.empty(ns, dtype=np.int64)
    inv_logstep = 1.0 / logstep
    for s in range(ns):
        lo = seg_lo[s]
        hi = seg_hi[s]
        if lo < base:
            c1 = 0
        else:
            c1 = 1 + int(np.log(lo / base) * inv_logstep)
            if c1 > C - 1:
                c1 = C - 1
            while c1 > 0 and H[c1] > lo:
                c1 -= 1
            while c1 < C - 1 and H[c1 + 1] <= lo:
                c1 += 1
        if hi <= base:
            c2 = 0
        else:
            c2 = 1 + int(np.log(hi / base) * inv_logstep)
            if c2 > C - 1:
                c2 = C - 1
            while c2 > 0 and H[c2] >= hi:
                c2 -= 1
            while c2 < C - 1 and H[c2 + 1] < hi:
                c2 += 1
        def_cell[s] = c1
        last_cell[s] = c2

    # domination filter: per cell, the best lower bound from segments
    # spanning the whole cell
    low = np.full(C, -np.inf)
    for s in range(ns):
        lo = seg_lo[s]
        hi = seg_hi[s]
        al = seg_al[s]
        be = seg_be[s]
        cf = def_cell[s] if lo <= H[def_cell[s]] else def_cell[s] + 1
        cl = last_cell[s] if hi >= H[last_cell[s] + 1] else last_cell[s] - 1
        for c in range(cf, cl + 1):
            v1 = al + be * H[c]
            v2 = al + be * H[c + 1]
            mn = v1 if v1 < v2 else v2
            if mn > low[c]:
                low[c] = mn

    # survivors per cell (CSR)
    cnt = np.zeros(C + 1, dtype=np.int64)
    for s in range(ns):
        al = seg_al[s]
        be = seg_be[s]
        for c in range(def_cell[s], last_cell[s] + 1):
            a1 = seg_lo[s] if seg_lo[s] > H[c] else H[c]
            a2 = seg_hi[s] if seg_hi[s] < H[c + 1] else H[c + 1]
            if a1 >= a2:
                continue
            v1 = al + be * a1
            v2 = al + be * a2
            mx = v1 if v1 > v2 else v2
            if mx >= low[c]:
                cnt[c + 1] += 1
    for c in range(C):
        cnt[c + 1] += cnt[c]
    S = cnt[C]
    sv_a1 = np.empty(S)
    sv_a2 = np.empty(S)
    sv_al = np.empty(S)
    sv_be = np.empty(S)
    fill = cnt[:C].copy()
    for s in range(ns):
        al = seg_al[s]
        be = seg_be[s]
        for c in range(def_cell[s], last_cell[s] + 1):
            a1 = seg_lo[s] if seg_lo[s] > H[c] else H[c]
            a2 = seg_hi[s] if seg_hi[s] < H[c + 1] else H[c + 1]
            if a1 >= a2:
                continue
            v1 = al + be * a1
            v2 = al + be * a2
            mx = v1 if v1 > v2 else v2
            if mx >= low[c]:
                k = fill[c]
                sv_a1[k] = a1
                sv_a2[k] = a2
                sv_al[k] = al
                sv_be[k] = be
                fill[c] = k + 1

    # per cell: subdivide at survivor endpoints, exact envelope per subcell
    scratch_b = np.empty(2 * (S if S > 0 else 1) + 2)
    scratch_act = np.empty(S if S > 0 else 1, dtype=np.int64)
    npieces = 0
    for phase in range(2):
        store = phase == 1
        if store:
            p_lo = np.empty(npieces)
            p_hi = np.empty(npieces)
            p_a = np.empty(npieces)
            p_b = np.empty(npieces)
            pos = 0
        else:
            p_lo = np.empty(0)
            p_hi = np.empty(0)
            p_a = np.empty(0)
            p_b = np.empty(0)
            pos = 0
        for c in range(C):
            k0 = cnt[c]
            k1 = cnt[c + 1]
            if k1 == k0:
                continue
            nb = 0
            scratch_b[nb] = H[c]
            nb += 1
            for k in range(k0, k1):
                if H[c] < sv_a1[k] < H[c + 1]:
                    scratch_b[nb] = sv_a1[k]
                    nb += 1
                if H[c] < sv_a2[k] < H[c + 1]:
                    scratch_b[nb] = sv_a2[k]
                    nb += 1
            scratch_b[nb] = H[c + 1]
            nb += 1
            bnds = np.sort(scratch_b[:nb])
            for t in range(nb - 1):
                u = bnds[t]
                v = bnds[t + 1]
                if u >= v:
                    continue
                n_act = 0
                for k in range(k0, k1):
                    if sv_a1[k] <= u and sv_a2[k] >= v:
                        scratch_act[n_act] = k
                        n_act += 1
                pos = _upper_envelope_subcell(sv_al, sv_be, scratch_act, n_act,
                                              u, v, p_lo, p_hi, p_a, p_b,
                                              pos, store)
        if not store:
            npieces = pos
    return p_lo[:pos], p_hi[:pos], p_a[:pos], p_b[:pos], e0


# -- condition sweep --------------------------------------------------

@njit(cache=True)
def _boundary_piece(h_l, h_r, a, b, c):
    """Exact integral of h^3 over {h in [h_l, h_r] : a + b*h >= c*h}."""
    gl = a + (b - c) * h_l
    gr = a + (b - c) * h_r
    if gl >= 0.0 and gr >= 0.0:
        lo, hi = h_l, h_r
    elif gl < 0.0 and gr < 0.0:
        return 0.0
    else:
        hs = a / (c - b)
        if gl >= 0.0:
            lo, hi = h_l, hs
        else:
            lo, hi = hs, h_r
    if hi <= lo:
        return 0.0
    return 0.25 * (hi * hi * hi * hi - lo * lo * lo * lo)


@njit(cache=True)
def sweep(p_lo, p_hi, p_a, p_b, q_c, q_htop, out):
    """For queries (c, h_top) sorted by c descending, compute
    W = integral of h^3 over {0 < h <= h_top : E(h) >= c*h}.

    Pieces with h_lo = 0 are excluded from the prefix structures (their
    weight is negligible by construction of the envelope grid) but still
    handled exactly when h_top falls inside them.
    """
    npc = p_lo.shape[0]
    nq = q_c.shape[0]
    if npc == 0:
        for qi in range(nq):
            out[qi] = 0.0
        return

    ev_c = np.empty(2 * npc)
    ev_piece = np.empty(2 * npc, dtype=np.int64)
    ev_kind = np.empty(2 * npc, dtype=np.int64)  # 0 enter partial, 1 full
    pc_v = np.empty(npc)
    pc_p1 = np.empty(npc)
    pc_p2 = np.empty(npc)
    ne = 0
    for i in range(npc):
        hl = p_lo[i]
        hr = p_hi[i]
        v = 0.25 * (hr * hr * hr * hr - hl * hl * hl * hl)
        pc_v[i] = v
        pc_p1[i] = 0.0
        pc_p2[i] = 0.0
        if hl <= 0.0:
            continue
        a = p_a[i]
        b = p_b[i]
        if a == 0.0:
            ev_c[ne] = b
            ev_piece[ne] = i
            ev_kind[ne] = 1
            ne += 1
            continue
        r1 = a / hl + b
        r2 = a / hr + b
        ce = r1 if r1 > r2 else r2
        cf = r2 if r1 > r2 else r1
        if ce > cf:
            p2 = v / (ce - cf)
            pc_p1[i] = ce * p2
            pc_p2[i] = p2
            ev_c[ne] = ce
            ev_piece[ne] = i
            ev_kind[ne] = 0
            ne += 1
            ev_c[ne] = cf
            ev_piece[ne] = i
            ev_kind[ne] = 1
            ne += 1
        else:
            ev_c[ne] = ce
            ev_piece[ne] = i
            ev_kind[ne] = 1
            ne += 1

    order = np.argsort(ev_c[:ne])
    t_full = np.zeros(npc + 1)
    t_p1 = np.zeros(npc + 1)
    t_p2 = np.zeros(npc + 1)
    in_partial = np.zeros(npc, dtype=np.int64)

    ei = ne - 1  # largest c first
    for qi in range(nq):
        c = q_c[qi]
        while ei >= 0 and ev_c[order[ei]] >= c:
            e = order[ei]
            i = ev_piece[e]
            if ev_kind[e] == 0:
                _fen_update(t_p1, i, pc_p1[i])
                _fen_update(t_p2, i, pc_p2[i])
                in_partial[i] = 1
            else:
                if in_partial[i] == 1:
                    _fen_update(t_p1, i, -pc_p1[i])
                    _fen_update(t_p2, i, -pc_p2[i])
                    in_partial[i] = 0
                _fen_update(t_full, i, pc_v[i])
            ei -= 1
        htop = q_htop[qi]
        if htop <= 0.0:
            out[qi] = 0.0
            continue
        m = np.searchsorted(p_hi, htop, side="right")
        w = _fen_prefix(t_full, m) + _fen_prefix(t_p1, m) \
            - c * _fen_prefix(t_p2, m)
        if m < npc and p_lo[m] < htop:
            w += _boundary_piece(p_lo[m], htop, p_a[m], p_b[m], c)
        out[qi] = w if w > 0.0 else 0.0


# -- piecewise-linear merge (scaled copies) ---------------------------

@njit(cache=True)
def _scale_copy(p_lo, p_hi, p_a, p_b, inv_absA, u_cap):
    """Rescale envelope pieces from height h to u = h / |A|, clipped at
    u_cap.  E(h) = a + b*h becomes a + (b*|A|)*u."""
    n = p_lo.shape[0]
    o_lo = np.empty(n)
    o_hi = np.empty(n)
    o_a = np.empty(n)
    o_b = np.empty(n)
    absA = 1.0 / inv_absA
    m = 0
    for i in range(n):
        lo = p_lo[i] * inv_absA
        hi = p_hi[i] * inv_absA
        if lo >= u_cap:
            break
        if hi > u_cap:
            hi = u_cap
        o_lo[m] = lo
        o_hi[m] = hi
        o_a[m] = p_a[i]
        o_b[m] = p_b[i] * absA
        m += 1
    return o_lo[:m], o_hi[:m], o_a[:m], o_b[:m]


@njit(cache=True)
def _const_copy(e0, u_cap):
    o_lo = np.empty(1)
    o_hi = np.empty(1)
    o_a = np.empty(1)
    o_b = np.empty(1)
    o_lo[0] = 0.0
    o_hi[0] = u_cap
    o_a[0] = e0
    o_b[0] = 0.0
    return o_lo, o_hi, o_a, o_b


@njit(cache=True)
def merge_pw(l1, h1, a1, b1, l2, h2, a2, b2, take_min):
    """Pointwise min (take_min) or max of two piecewise-linear partial
    functions.  A gap (no piece) counts as minus infinity: for max the
    other branch wins, for min the result is a gap.
    """
    n1 = l1.shape[0]
    n2 = l2.shape[0]
    cap = 3 * (n1 + n2) + 4
    o_lo = np.empty(cap)
    o_hi = np.empty(cap)
    o_a = np.empty(cap)
    o_b = np.empty(cap)
    m = 0
    i = 0
    j = 0
    u = 0.0
    while i < n1 or j < n2:
        # next boundary after u
        in1 = i < n1 and l1[i] <= u < h1[i]
        in2 = j < n2 and l2[j] <= u < h2[j]
        v = np.inf
        if i < n1:
            v = min(v, h1[i] if in1 else l1[i])
        if j < n2:
            v = min(v, h2[j] if in2 else l2[j])
        if v <= u:
            # skip past zero-width state
            if i < n1 and h1[i] <= u:
                i += 1
                continue
            if j < n2 and h2[j] <= u:
                j += 1
                continue
            u = v
            continue
        if in1 and in2:
            f1a, f1b = a1[i], b1[i]
            f2a, f2b = a2[j], b2[j]
            d_a = f1a - f2a
            d_b = f1b - f2b
            cross = -1.0
            if d_b != 0.0:
                hx = -d_a / d_b
                if u < hx < v:
                    cross = hx
            segs = 1 if cross < 0.0 else 2
            uu = u
            for t in range(segs):
                vv = cross if (segs == 2 and t == 0) else v
                mid = 0.5 * (uu + vv)
                g1 = f1a + f1b * mid
                g2 = f2a + f2b * mid
                use1 = (g1 <= g2) if take_min else (g1 >= g2)
                o_lo[m] = uu
                o_hi[m] = vv
                if use1:
                    o_a[m] = f1a
                    o_b[m] = f1b
                else:
                    o_a[m] = f2a
                    o_b[m] = f2b
                m += 1
                uu = vv
        elif in1 or in2:
            if not take_min:
                if in1:
                    o_a[m] = a1[i]
                    o_b[m] = b1[i]
                else:
                    o_a[m] = a2[j]
                    o_b[m] = b2[j]
                o_lo[m] = u
                o_hi[m] = v
                m += 1
        # advance
        if i < n1 and h1[i] <= v:
            i += 1
        if j < n2 and h2[j] <= v:
            j += 1
        u = v
    return o_lo[:m], o_hi[:m], o_a[:m], o_b[:m]


# -- scene drivers ----------------------------------------------------
#
# Each driver accumulates, for every loop of a chunk and every cm node,
# the exact propertime integral of the node's admissible scale set into a
# per-node output array.  Loops are processed in index order and nodes in
# a fixed sorted order, so accumulation is bitwise deterministic.

@njit(cache=True)
def _const_two(e0):
    # constant envelope copy for a degenerate (A = 0) carrier offset,
    # split so the sweep's event machinery never sees an h_lo = 0 piece
    o_lo = np.empty(2)
    o_hi = np.empty(2)
    o_a = np.empty(2)
    o_b = np.empty(2)
    eps = 1e-12
    o_lo[0] = 0.0
    o_hi[0] = eps
    o_lo[1] = eps
    o_hi[1] = CAP_U
    o_a[0] = e0
    o_a[1] = e0
    o_b[0] = 0.0
    o_b[1] = 0.0
    return o_lo, o_hi, o_a, o_b


@njit(cache=True)
def _propertime_closed(s_lo, s_hi):
    if s_lo >= s_hi or s_lo <= 0.0:
        return 0.0
    top = 0.0
    if np.isfinite(s_hi):
        t = 1.0 / (s_hi * s_hi)
        top = t * t
    t = 1.0 / (s_lo * s_lo)
    return 0.5 * (t * t - top)


@njit(cache=True)
def kernel_halfline_plane(loops, hl_ca, hl_side, pl_ax,
                          qp_chat, qp_absAh, qp_Ap, qp_node,
                          qm_chat, qm_absAh, qm_Ap, qm_node,
                          qz_Bsig, qz_Ap, qz_node,
                          out):
    """Scene of one full plane (group 1) and one half-line (group 2).

    Queries are pre-split by the sign of the half-line carrier offset A_h
    (positive / negative / exactly zero) and the signed groups are sorted
    by descending chat = side*(edge - cm_free)/|A_h|.  qp_Ap carries the
    signed offset of each node to the plane, whose constant axis is
    pl_ax; the plane condition is resolved through one-sided loop extents.
    """
    nl = loops.shape[0]
    fa = 1 - hl_ca
    np_q = qp_chat.shape[0]
    nm_q = qm_chat.shape[0]
    nz_q = qz_Bsig.shape[0]
    htop_p = np.empty(np_q)
    htop_m = np.empty(nm_q)
    w_p = np.empty(np_q)
    w_m = np.empty(nm_q)
    for k in range(nl):
        zc = loops[k, :, hl_ca].copy()
        xv = hl_side * loops[k, :, fa]
        pcol = loops[k, :, pl_ax]
        ep_lo = pcol[0]
        ep_hi = pcol[0]
        for t in range(1, pcol.shape[0]):
            v = pcol[t]
            if v < ep_lo:
                ep_lo = v
            if v > ep_hi:
                ep_hi = v
        el_p, eh_p, ea_p, eb_p, e0 = build_envelope(zc, xv)
        el_m, eh_m, ea_m, eb_m, e0m = build_envelope(-zc, xv)
        ext_p = 0.0
        ext_m = 0.0
        for t in range(zc.shape[0]):
            if zc[t] > ext_p:
                ext_p = zc[t]
            if -zc[t] > ext_m:
                ext_m = zc[t] * -1.0
        for grp in range(2):
            if grp == 0:
                nq = np_q
                ext = ext_p
            else:
                nq = nm_q
                ext = ext_m
            for t in range(nq):
                Ap = qp_Ap[t] if grp == 0 else qm_Ap[t]
                absAh = qp_absAh[t] if grp == 0 else qm_absAh[t]
                if Ap == 0.0:
                    ht = ext
                else:
                    es = ep_hi if Ap > 0.0 else -ep_lo
                    if es <= 0.0:
                        ht = -1.0
                    else:
                        ht = absAh * es / abs(Ap)
                        if ht > ext:
                            ht = ext
                if grp == 0:
                    htop_p[t] = ht
                else:
                    htop_m[t] = ht
            if grp == 0:
                sweep(el_p, eh_p, ea_p, eb_p, qp_chat, htop_p, w_p)
                for t in range(nq):
                    a4 = qp_absAh[t]
                    a4 = a4 * a4 * a4 * a4
                    out[qp_node[t]] += 2.0 * w_p[t] / a4
            else:
                sweep(el_m, eh_m, ea_m, eb_m, qm_chat, htop_m, w_m)
                for t in range(nq):
                    a4 = qm_absAh[t]
                    a4 = a4 * a4 * a4 * a4
                    out[qm_node[t]] += 2.0 * w_m[t] / a4
        # nodes exactly on the half-line carrier: closed form from the
        # envelope value at height zero
        for t in range(nz_q):
            Ap = qz_Ap[t]
            if Ap == 0.0 or not np.isfinite(e0):
                continue
            es = ep_hi if Ap > 0.0 else -ep_lo
            if es <= 0.0:
                continue
            s1 = abs(Ap) / es
            Bs = qz_Bsig[t]
            s_lo = s1
            s_hi = np.inf
            if e0 > 0.0:
                if Bs > 0.0 and Bs / e0 > s_lo:
                    s_lo = Bs / e0
            elif e0 == 0.0:
                if Bs > 0.0:
                    continue
            else:
                if Bs < 0.0:
                    s_hi = Bs / e0
                else:
                    continue
            out[qz_node[t]] += _propertime_closed(s_lo, s_hi)


@njit(cache=True)
def kernel_two_halflines(loops, side, A1_rows, A2_rows,
                         qc_c, qc_col, nx, out):
    """Scene of two parallel half-lines with a common edge and side
    (group 1 and group 2), carrier axis 1.

    A1_rows/A2_rows are the signed carrier offsets per z-row; queries are
    the x-columns sorted by descending c = side*(edge - cm_x).  Output is
    row-major (row * nx + col).
    """
    nl = loops.shape[0]
    nrows = A1_rows.shape[0]
    nq = qc_c.shape[0]
    htop = np.empty(nq)
    w = np.empty(nq)
    for k in range(nl):
        zc = loops[k, :, 1].copy()
        xv = side * loops[k, :, 0]
        el_p, eh_p, ea_p, eb_p, e0 = build_envelope(zc, xv)
        el_m, eh_m, ea_m, eb_m, _ = build_envelope(-zc, xv)
        ext_p = 0.0
        ext_m = 0.0
        for t in range(zc.shape[0]):
            if zc[t] > ext_p:
                ext_p = zc[t]
            if -zc[t] > ext_m:
                ext_m = -zc[t]
        for r in range(nrows):
            u_top = CAP_U
            ok = True
            for which in range(2):
                A = A1_rows[r] if which == 0 else A2_rows[r]
                if A == 0.0:
                    if not np.isfinite(e0):
                        ok = False
                        break
                    cl, ch, ca, cb = _const_two(e0)
                else:
                    ext = ext_p if A > 0.0 else ext_m
                    if ext <= 0.0:
                        ok = False
                        break
                    ud = ext / abs(A)
                    if ud < u_top:
                        u_top = ud
                    if A > 0.0:
                        cl, ch, ca, cb = _scale_copy(el_p, eh_p, ea_p, eb_p,
                                                     1.0 / abs(A), CAP_U)
                    else:
                        cl, ch, ca, cb = _scale_copy(el_m, eh_m, ea_m, eb_m,
                                                     1.0 / abs(A), CAP_U)
                if which == 0:
                    m_lo, m_hi, m_a, m_b = cl, ch, ca, cb
                else:
                    m_lo, m_hi, m_a, m_b = merge_pw(m_lo, m_hi, m_a, m_b,
                                                    cl, ch, ca, cb, True)
            if not ok or u_top <= 0.0:
                continue
            for t in range(nq):
                htop[t] = u_top
            sweep(m_lo, m_hi, m_a, m_b, qc_c, htop, w)
            base = r * nx
            for t in range(nq):
                out[base + qc_col[t]] += 2.0 * w[t]


@njit(cache=True)
def kernel_comb(loops, teeth_x, side, cmx_cols,
                qr_c, qr_Ap, qr_row, nx, out):
    """Scene of one full plane at z = 0 (group 1) and a group of vertical
    half-lines (teeth) at x = teeth_x, z >= edge (group 2).

    Per column the tooth copies are merged with max semantics (a loop may
    pierce any tooth); queries are z-rows sorted by descending
    c = side*(edge - cm_z), with the plane resolved through one-sided
    z-extents per row.  Output is row-major (row * nx + col).
    """
    nl = loops.shape[0]
    nt = teeth_x.shape[0]
    nq = qr_c.shape[0]
    htop = np.empty(nq)
    w = np.empty(nq)
    for k in range(nl):
        hc = loops[k, :, 0].copy()
        xv = side * loops[k, :, 1]
        zcol = loops[k, :, 1]
        ep_lo = zcol[0]
        ep_hi = zcol[0]
        for t in range(1, zcol.shape[0]):
            v = zcol[t]
            if v < ep_lo:
                ep_lo = v
            if v > ep_hi:
                ep_hi = v
        el_p, eh_p, ea_p, eb_p, e0 = build_envelope(hc, xv)
        el_m, eh_m, ea_m, eb_m, _ = build_envelope(-hc, xv)
        ext_p = 0.0
        ext_m = 0.0
        for t in range(hc.shape[0]):
            if hc[t] > ext_p:
                ext_p = hc[t]
            if -hc[t] > ext_m:
                ext_m = -hc[t]
        for col in range(cmx_cols.shape[0]):
            cx = cmx_cols[col]
            u_dom = 0.0
            have = False
            m_lo = np.empty(0)
            m_hi = np.empty(0)
            m_a = np.empty(0)
            m_b = np.empty(0)
            for tt in range(nt):
                A = teeth_x[tt] - cx
                if A == 0.0:
                    if not np.isfinite(e0):
                        continue
                    cl, ch, ca, cb = _const_two(e0)
                    ud = CAP_U
                else:
                    ext = ext_p if A > 0.0 else ext_m
                    if ext <= 0.0:
                        continue
                    ud = ext / abs(A)
                    if A > 0.0:
                        cl, ch, ca, cb = _scale_copy(el_p, eh_p, ea_p, eb_p,
                                                     1.0 / abs(A), CAP_U)
                    else:
                        cl, ch, ca, cb = _scale_copy(el_m, eh_m, ea_m, eb_m,
                                                     1.0 / abs(A), CAP_U)
                if ud > u_dom:
                    u_dom = ud
                if not have:
                    m_lo, m_hi, m_a, m_b = cl, ch, ca, cb
                    have = True
                else:
                    m_lo, m_hi, m_a, m_b = merge_pw(m_lo, m_hi, m_a, m_b,
                                                    cl, ch, ca, cb, False)
            if not have or u_dom <= 0.0:
                continue
            for t in range(nq):
                Ap = qr_Ap[t]
                if Ap == 0.0:
                    ht = u_dom
                else:
                    es = ep_hi if Ap > 0.0 else -ep_lo
                    if es <= 0.0:
                        ht = -1.0
                    else:
                        ht = es / abs(Ap)
                        if ht > u_dom:
                            ht = u_dom
                htop[t] = ht
            sweep(m_lo, m_hi, m_a, m_b, qr_c, htop, w)
            for t in range(nq):
                out[qr_row[t] * nx + col] += 2.0 * w[t]
