"""Compiled kernels for sum-of-trees models.

Trees live in flat per-forest arrays indexed [tree, node]. A node's status is
0 (free slot), 1 (leaf) or 2 (internal). Covariates are pre-coded as ranks
into the sorted unique training values of each column; an observation goes
left at a split (v, c) when its code for v is <= c.
"""

import math

import numpy as np
from numba import njit

GROW, PRUNE, CHANGE = 0, 1, 2

FREE, LEAF, INTERNAL = 0, 1, 2


@njit(cache=True)
def psplit(d, alpha, beta):
    return alpha * (1.0 + d) ** (-beta)


@njit(cache=True)
def region_bounds(j, node, v, var, cut, parent, left, ncode):
    """Code range [lo, hi] of variable v reachable at node; cuts are lo..hi-1."""
    lo = 0
    hi = ncode[v] - 1
    child = node
    a = parent[j, node]
    while a >= 0:
        if var[j, a] == v:
            if left[j, a] == child:
                if cut[j, a] < hi:
                    hi = cut[j, a]
            else:
                if cut[j, a] + 1 > lo:
                    lo = cut[j, a] + 1
        child = a
        a = parent[j, a]
    return lo, hi


@njit(cache=True)
def _pick_rule(j, node, var, cut, parent, left, ncode, rng):
    """Uniform variable among those with a cut available, then uniform cut.

    Returns (v, c, n_available_vars, n_cuts) with v = -1 if nothing splits.
    """
    p = ncode.shape[0]
    navail = 0
    for v in range(p):
        lo, hi = region_bounds(j, node, v, var, cut, parent, left, ncode)
        if hi - lo >= 1:
            navail += 1
    if navail == 0:
        return -1, -1, 0, 0
    k = int(rng.random() * navail)
    for v in range(p):
        lo, hi = region_bounds(j, node, v, var, cut, parent, left, ncode)
        if hi - lo >= 1:
            if k == 0:
                c = lo + int(rng.random() * (hi - lo))
                return v, c, navail, hi - lo
            k -= 1
    return -1, -1, 0, 0


@njit(cache=True)
def count_nodes(j, status, left, right):
    """(#leaves, #nog nodes, #free slots) of tree j."""
    cap = status.shape[1]
    nl = 0
    nn = 0
    nf = 0
    for k in range(cap):
        s = status[j, k]
        if s == LEAF:
            nl += 1
        elif s == INTERNAL:
            if status[j, left[j, k]] == LEAF and status[j, right[j, k]] == LEAF:
                nn += 1
        else:
            nf += 1
    return nl, nn, nf


@njit(cache=True)
def _kth_node(j, status, left, right, want_nog, k):
    cap = status.shape[1]
    for node in range(cap):
        s = status[j, node]
        if want_nog:
            if s == INTERNAL and status[j, left[j, node]] == LEAF and status[j, right[j, node]] == LEAF:
                if k == 0:
                    return node
                k -= 1
        elif s == LEAF:
            if k == 0:
                return node
            k -= 1
    return -1


@njit(cache=True)
def _is_nog(j, node, status, left, right):
    return (node >= 0 and status[j, node] == INTERNAL and status[j, left[j, node]] == LEAF
            and status[j, right[j, node]] == LEAF)


@njit(cache=True)
def propose(j, status, parent, left, right, depth, var, cut, ncode,
            p_grow, p_prune, alpha, beta, rng):
    """Draw a move for tree j without applying it.

    Returns (kind, node, v, c, feasible, log_struct) where log_struct is the
    log of tree-prior ratio times reverse/forward proposal ratio. Split-rule
    prior and proposal are both uniform over available (variable, cut), so
    they cancel and are omitted.
    """
    nl, nn, nf = count_nodes(j, status, left, right)
    if nl == 1:
        kind = GROW
        pg = 1.0
    else:
        u = rng.random()
        if u < p_grow:
            kind = GROW
        elif u < p_grow + p_prune:
            kind = PRUNE
        else:
            kind = CHANGE
        pg = p_grow
    if kind == GROW:
        node = _kth_node(j, status, left, right, False, int(rng.random() * nl))
        if nf < 2:
            return kind, node, -1, -1, False, 0.0
        v, c, navail, ncuts = _pick_rule(j, node, var, cut, parent, left, ncode, rng)
        if v < 0:
            return kind, node, -1, -1, False, 0.0
        d = depth[j, node]
        ps = psplit(d, alpha, beta)
        pc = psplit(d + 1, alpha, beta)
        log_prior = math.log(ps) + 2.0 * math.log(1.0 - pc) - math.log(1.0 - ps)
        nn_new = nn + 1
        if _is_nog(j, parent[j, node], status, left, right):
            nn_new -= 1
        log_q = math.log(p_prune / nn_new) - math.log(pg / nl)
        return kind, node, v, c, True, log_prior + log_q
    node = _kth_node(j, status, left, right, True, int(rng.random() * nn))
    if kind == PRUNE:
        d = depth[j, node]
        ps = psplit(d, alpha, beta)
        pc = psplit(d + 1, alpha, beta)
        log_prior = -(math.log(ps) + 2.0 * math.log(1.0 - pc) - math.log(1.0 - ps))
        nl_new = nl - 1
        pg_new = 1.0 if nl_new == 1 else p_grow
        log_q = math.log(pg_new / nl_new) - math.log(p_prune / nn)
        return kind, node, var[j, node], cut[j, node], True, log_prior + log_q
    v, c, navail, ncuts = _pick_rule(j, node, var, cut, parent, left, ncode, rng)
    if v < 0:
        return kind, node, -1, -1, False, 0.0
    return kind, node, v, c, True, 0.0


@njit(cache=True)
def leaf_ml(W, S, s0sq):
    """Leaf-value-integrated log likelihood, up to leaf-independent constants.

    W = sum w_i / sigma2, S = sum w_i r_i / sigma2.
    """
    return -0.5 * math.log(1.0 + s0sq * W) + 0.5 * S * S / (W + 1.0 / s0sq)


@njit(cache=True)
def proposal_loglik(j, kind, node, v, c, left, right, leaf_of, Xc, r, w, sigma2, s0sq, min_leaf):
    """(feasible, log marginal-likelihood ratio) of a drawn proposal."""
    n = r.shape[0]
    inv = 1.0 / sigma2
    if kind == GROW:
        wl = sl = wr = sr = 0.0
        nlft = nrgt = 0
        for i in range(n):
            if leaf_of[j, i] == node:
                wi = w[i] * inv
                if Xc[i, v] <= c:
                    wl += wi
                    sl += wi * r[i]
                    nlft += 1
                else:
                    wr += wi
                    sr += wi * r[i]
                    nrgt += 1
        if nlft < min_leaf or nrgt < min_leaf:
            return False, 0.0
        return True, leaf_ml(wl, sl, s0sq) + leaf_ml(wr, sr, s0sq) - leaf_ml(wl + wr, sl + sr, s0sq)
    lnode = left[j, node]
    rnode = right[j, node]
    if kind == PRUNE:
        wl = sl = wr = sr = 0.0
        for i in range(n):
            k = leaf_of[j, i]
            if k == lnode:
                wl += w[i] * inv
                sl += w[i] * inv * r[i]
            elif k == rnode:
                wr += w[i] * inv
                sr += w[i] * inv * r[i]
        return True, leaf_ml(wl + wr, sl + sr, s0sq) - leaf_ml(wl, sl, s0sq) - leaf_ml(wr, sr, s0sq)
    # change
    owl = osl = owr = osr = 0.0
    nwl = nsl = nwr = nsr = 0.0
    nlft = nrgt = 0
    for i in range(n):
        k = leaf_of[j, i]
        if k == lnode or k == rnode:
            wi = w[i] * inv
            if k == lnode:
                owl += wi
                osl += wi * r[i]
            else:
                owr += wi
                osr += wi * r[i]
            if Xc[i, v] <= c:
                nwl += wi
                nsl += wi * r[i]
                nlft += 1
            else:
                nwr += wi
                nsr += wi * r[i]
                nrgt += 1
    if nlft < min_leaf or nrgt < min_leaf:
        return False, 0.0
    return True, (leaf_ml(nwl, nsl, s0sq) + leaf_ml(nwr, nsr, s0sq)
                  - leaf_ml(owl, osl, s0sq) - leaf_ml(owr, osr, s0sq))


@njit(cache=True)
def _free_slot(j, status, start):
    for k in range(start, status.shape[1]):
        if status[j, k] == FREE:
            return k
    return -1


@njit(cache=True)
def apply_move(j, kind, node, v, c, status, parent, left, right, depth, var, cut, value, leaf_of, Xc):
    n = leaf_of.shape[1]
    if kind == GROW:
        lnode = _free_slot(j, status, 0)
        rnode = _free_slot(j, status, lnode + 1)
        status[j, node] = INTERNAL
        var[j, node] = v
        cut[j, node] = c
        left[j, node] = lnode
        right[j, node] = rnode
        for k in (lnode, rnode):
            status[j, k] = LEAF
            parent[j, k] = node
            depth[j, k] = depth[j, node] + 1
            left[j, k] = -1
            right[j, k] = -1
            var[j, k] = -1
            cut[j, k] = -1
            value[j, k] = value[j, node]
        for i in range(n):
            if leaf_of[j, i] == node:
                leaf_of[j, i] = lnode if Xc[i, v] <= c else rnode
    elif kind == PRUNE:
        lnode = left[j, node]
        rnode = right[j, node]
        status[j, lnode] = FREE
        status[j, rnode] = FREE
        status[j, node] = LEAF
        left[j, node] = -1
        right[j, node] = -1
        var[j, node] = -1
        cut[j, node] = -1
        for i in range(n):
            k = leaf_of[j, i]
            if k == lnode or k == rnode:
                leaf_of[j, i] = node
    else:
        lnode = left[j, node]
        rnode = right[j, node]
        var[j, node] = v
        cut[j, node] = c
        for i in range(n):
            k = leaf_of[j, i]
            if k == lnode or k == rnode:
                leaf_of[j, i] = lnode if Xc[i, v] <= c else rnode


@njit(cache=True)
def draw_leaves(j, status, value, leaf_of, r, w, sigma2, s0sq, rng, wsum, ssum):
    """Conjugate draw of every leaf value of tree j (work arrays wsum/ssum)."""
    cap = status.shape[1]
    n = r.shape[0]
    inv = 1.0 / sigma2
    for k in range(cap):
        wsum[k] = 0.0
        ssum[k] = 0.0
    for i in range(n):
        k = leaf_of[j, i]
        wsum[k] += w[i] * inv
        ssum[k] += w[i] * inv * r[i]
    for k in range(cap):
        if status[j, k] == LEAF:
            V = 1.0 / (1.0 / s0sq + wsum[k])
            value[j, k] = V * ssum[k] + math.sqrt(V) * rng.standard_normal()


@njit(cache=True)
def mh_step(j, status, parent, left, right, depth, var, cut, value, leaf_of, Xc, ncode,
            r, w, sigma2, s0sq, alpha, beta, p_grow, p_prune, min_leaf, rng):
    """One Metropolis-Hastings structure update of tree j. Returns (kind, accepted)."""
    kind, node, v, c, ok, log_struct = propose(j, status, parent, left, right, depth, var, cut,
                                               ncode, p_grow, p_prune, alpha, beta, rng)
    if not ok:
        return kind, False
    ok, log_lr = proposal_loglik(j, kind, node, v, c, left, right, leaf_of, Xc, r, w,
                                 sigma2, s0sq, min_leaf)
    if not ok:
        return kind, False
    if math.log(rng.random()) < log_struct + log_lr:
        apply_move(j, kind, node, v, c, status, parent, left, right, depth, var, cut, value,
                   leaf_of, Xc)
        return kind, True
    return kind, False


@njit(cache=True)
def sweep(target, w, sigma2, s0sq, fit, status, parent, left, right, depth, var, cut, value,
          leaf_of, Xc, ncode, alpha, beta, p_grow, p_prune, min_leaf, rng, accepted):
    """Backfitting pass over all trees against residual variance sigma2 / w_i.

    fit holds the cached forest prediction and is kept in sync.
    """
    m = status.shape[0]
    n = target.shape[0]
    cap = status.shape[1]
    R = target - fit
    wsum = np.empty(cap)
    ssum = np.empty(cap)
    old = np.empty(n)
    for j in range(m):
        for i in range(n):
            old[i] = value[j, leaf_of[j, i]]
            R[i] += old[i]
        kind, acc = mh_step(j, status, parent, left, right, depth, var, cut, value, leaf_of, Xc,
                            ncode, R, w, sigma2, s0sq, alpha, beta, p_grow, p_prune, min_leaf,
                            rng)
        if acc:
            accepted[kind] += 1
        draw_leaves(j, status, value, leaf_of, R, w, sigma2, s0sq, rng, wsum, ssum)
        for i in range(n):
            g = value[j, leaf_of[j, i]]
            R[i] -= g
            fit[i] += g - old[i]


# ---------------------------------------------------------------------------
# outcome trees with gamma integrated out jointly with the leaf values

@njit(cache=True)
def _arrow_terms(cnt, sy, sz, phi, s0sq):
    D = cnt / phi + 1.0 / s0sq
    cc = sz / phi
    b = sy / phi
    return math.log(D), cc * cc / D, cc * b / D, b * b / D


@njit(cache=True)
def arrow_loglik(L, t1, t2, t3, t4, Szz, Szy, phi, gvar, s0sq):
    """Leaf/gamma-integrated log likelihood from per-tree sums, up to constants
    that do not depend on the tree (n log(2 pi phi), y'y / phi, log gvar)."""
    a = Szz / phi + 1.0 / gvar
    s = a - t2
    t = Szy / phi - t3
    return -0.5 * L * math.log(s0sq) - 0.5 * t1 - 0.5 * math.log(s) + 0.5 * t4 + 0.5 * t * t / s


@njit(cache=True)
def sweep_marginal(target, ztil, phi, gvar, s0sq, fit, status, parent, left, right, depth, var,
                   cut, value, leaf_of, Xc, ncode, alpha, beta, p_grow, p_prune, min_leaf, rng,
                   accepted):
    """Outcome trees under y = f_y + gamma * ztil + eta with (leaves_j, gamma)
    integrated out in the structure step and then drawn jointly.

    target must already have the prior mean of gamma times ztil removed; the
    returned gamma is on that shifted scale.
    """
    m = status.shape[0]
    n = target.shape[0]
    cap = status.shape[1]
    R = target - fit
    cnt = np.zeros(cap)
    sy = np.zeros(cap)
    sz = np.zeros(cap)
    old = np.empty(n)
    Szz = 0.0
    for i in range(n):
        Szz += ztil[i] * ztil[i]
    gamma = 0.0
    for j in range(m):
        Szy = 0.0
        for i in range(n):
            old[i] = value[j, leaf_of[j, i]]
            R[i] += old[i]
            Szy += ztil[i] * R[i]
        for k in range(cap):
            cnt[k] = 0.0
            sy[k] = 0.0
            sz[k] = 0.0
        for i in range(n):
            k = leaf_of[j, i]
            cnt[k] += 1.0
            sy[k] += R[i]
            sz[k] += ztil[i]
        L = 0
        t1 = t2 = t3 = t4 = 0.0
        for k in range(cap):
            if status[j, k] == LEAF:
                L += 1
                a1, a2, a3, a4 = _arrow_terms(cnt[k], sy[k], sz[k], phi, s0sq)
                t1 += a1
                t2 += a2
                t3 += a3
                t4 += a4
        cur = arrow_loglik(L, t1, t2, t3, t4, Szz, Szy, phi, gvar, s0sq)

        kind, node, v, c, ok, log_struct = propose(j, status, parent, left, right, depth, var,
                                                   cut, ncode, p_grow, p_prune, alpha, beta, rng)
        if ok:
            # child statistics under the proposal
            nl_ = nr_ = yl = yr = zl = zr = 0.0
            if kind == GROW:
                for i in range(n):
                    if leaf_of[j, i] == node:
                        if Xc[i, v] <= c:
                            nl_ += 1.0
                            yl += R[i]
                            zl += ztil[i]
                        else:
                            nr_ += 1.0
                            yr += R[i]
                            zr += ztil[i]
                ok = nl_ >= min_leaf and nr_ >= min_leaf
                newL = L + 1
            elif kind == PRUNE:
                ln = left[j, node]
                rn = right[j, node]
                newL = L - 1
            else:
                ln = left[j, node]
                rn = right[j, node]
                for i in range(n):
                    k = leaf_of[j, i]
                    if k == ln or k == rn:
                        if Xc[i, v] <= c:
                            nl_ += 1.0
                            yl += R[i]
                            zl += ztil[i]
                        else:
                            nr_ += 1.0
                            yr += R[i]
                            zr += ztil[i]
                ok = nl_ >= min_leaf and nr_ >= min_leaf
                newL = L
            if ok:
                p1, p2, p3, p4 = t1, t2, t3, t4
                if kind == GROW:
                    a1, a2, a3, a4 = _arrow_terms(cnt[node], sy[node], sz[node], phi, s0sq)
                    p1 -= a1
                    p2 -= a2
                    p3 -= a3
                    p4 -= a4
                    for (cn, yy, zz) in ((nl_, yl, zl), (nr_, yr, zr)):
                        a1, a2, a3, a4 = _arrow_terms(cn, yy, zz, phi, s0sq)
                        p1 += a1
                        p2 += a2
                        p3 += a3
                        p4 += a4
                else:
                    ln = left[j, node]
                    rn = right[j, node]
                    for k in (ln, rn):
                        a1, a2, a3, a4 = _arrow_terms(cnt[k], sy[k], sz[k], phi, s0sq)
                        p1 -= a1
                        p2 -= a2
                        p3 -= a3
                        p4 -= a4
                    if kind == PRUNE:
                        a1, a2, a3, a4 = _arrow_terms(cnt[ln] + cnt[rn], sy[ln] + sy[rn],
                                                      sz[ln] + sz[rn], phi, s0sq)
                        p1 += a1
                        p2 += a2
                        p3 += a3
                        p4 += a4
                    else:
                        for (cn, yy, zz) in ((nl_, yl, zl), (nr_, yr, zr)):
                            a1, a2, a3, a4 = _arrow_terms(cn, yy, zz, phi, s0sq)
                            p1 += a1
                            p2 += a2
                            p3 += a3
                            p4 += a4
                prop = arrow_loglik(newL, p1, p2, p3, p4, Szz, Szy, phi, gvar, s0sq)
                if math.log(rng.random()) < log_struct + prop - cur:
                    apply_move(j, kind, node, v, c, status, parent, left, right, depth, var, cut,
                               value, leaf_of, Xc)
                    accepted[kind] += 1
                    for k in range(cap):
                        cnt[k] = 0.0
                        sy[k] = 0.0
                        sz[k] = 0.0
                    for i in range(n):
                        k = leaf_of[j, i]
                        cnt[k] += 1.0
                        sy[k] += R[i]
                        sz[k] += ztil[i]
                    t1 = t2 = t3 = t4 = 0.0
                    for k in range(cap):
                        if status[j, k] == LEAF:
                            a1, a2, a3, a4 = _arrow_terms(cnt[k], sy[k], sz[k], phi, s0sq)
                            t1 += a1
                            t2 += a2
                            t3 += a3
                            t4 += a4
        # joint draw: gamma from its marginal, then leaves given gamma
        a = Szz / phi + 1.0 / gvar
        s = a - t2
        t = Szy / phi - t3
        gamma = t / s + rng.standard_normal() / math.sqrt(s)
        for k in range(cap):
            if status[j, k] == LEAF:
                D = cnt[k] / phi + 1.0 / s0sq
                mean = (sy[k] / phi - sz[k] / phi * gamma) / D
                value[j, k] = mean + rng.standard_normal() / math.sqrt(D)
        for i in range(n):
            g = value[j, leaf_of[j, i]]
            R[i] -= g
            fit[i] += g - old[i]
    return gamma


# ---------------------------------------------------------------------------
# prediction

@njit(cache=True)
def predict_values(X, status, left, right, var, cut, value, cutvals):
    n = X.shape[0]
    m = status.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for j in range(m):
            k = 0
            while status[j, k] == INTERNAL:
                v = var[j, k]
                if X[i, v] <= cutvals[v, cut[j, k]]:
                    k = left[j, k]
                else:
                    k = right[j, k]
            acc += value[j, k]
        out[i] = acc
    return out


@njit(cache=True)
def leaf_index(X, j, status, left, right, var, cut, cutvals):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int32)
    for i in range(n):
        k = 0
        while status[j, k] == INTERNAL:
            v = var[j, k]
            if X[i, v] <= cutvals[v, cut[j, k]]:
                k = left[j, k]
            else:
                k = right[j, k]
        out[i] = k
    return out
