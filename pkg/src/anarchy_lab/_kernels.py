"""Compiled inner loops: pairwise path-flow shifts with exact line search.

Every objective handled here is a sum of per-link terms, so moving ``s`` units
of flow from path ``u`` to path ``v`` of one OD only touches the links in the
symmetric difference of the two paths.  The directional derivative along that
move is monotone in ``s`` (convexity), which makes the line search a bracketed
root find.

Link marginal kinds:
  ENDHOST   c(f) + f c'(f)      (derivative of f c(f))
  OPERATOR  c'(f)               (derivative of c(f))
  BECKMANN  c(f)                (derivative of the potential)
  SELFISH   c(f) + a c'(f)      (a = acting end-host's own flow on the link)
"""
import numpy as np
from numba import njit

ENDHOST, OPERATOR, BECKMANN, SELFISH = 0, 1, 2, 3
KIND = {"endhost": ENDHOST, "operator": OPERATOR, "beckmann": BECKMANN, "selfish": SELFISH}


@njit(cache=True)
def _val(c, l, f):
    r = 0.0
    for k in range(c.shape[1] - 1, -1, -1):
        r = r * f + c[l, k]
    return r


@njit(cache=True)
def _d1(c, l, f):
    r = 0.0
    for k in range(c.shape[1] - 1, 0, -1):
        r = r * f + k * c[l, k]
    return r


@njit(cache=True)
def _d2(c, l, f):
    r = 0.0
    for k in range(c.shape[1] - 1, 1, -1):
        r = r * f + k * (k - 1) * c[l, k]
    return r


@njit(cache=True)
def link_marginal(kind, c, l, f, a):
    if f < 0.0:
        f = 0.0
    if kind == ENDHOST:
        return _val(c, l, f) + f * _d1(c, l, f)
    if kind == OPERATOR:
        return _d1(c, l, f)
    if kind == BECKMANN:
        return _val(c, l, f)
    return _val(c, l, f) + a * _d1(c, l, f)


@njit(cache=True)
def link_marginal_slope(kind, c, l, f, a):
    if f < 0.0:
        f = 0.0
    if kind == ENDHOST:
        return 2.0 * _d1(c, l, f) + f * _d2(c, l, f)
    if kind == OPERATOR:
        return _d2(c, l, f)
    if kind == BECKMANN:
        return _d1(c, l, f)
    return 2.0 * _d1(c, l, f) + a * _d2(c, l, f)


@njit(cache=True)
def path_marginal(kind, c, pptr, plinks, p, f, a):
    r = 0.0
    for j in range(pptr[p], pptr[p + 1]):
        l = plinks[j]
        r += link_marginal(kind, c, l, f[l], a[l])
    return r


@njit(cache=True)
def _contains(plinks, lo, hi, l):
    for j in range(lo, hi):
        if plinks[j] == l:
            return True
    return False


@njit(cache=True)
def _direction(plinks, pptr, u, v):
    """Links gaining flow (in v only) and losing flow (in u only)."""
    plus = np.empty(pptr[v + 1] - pptr[v], dtype=np.int64)
    minus = np.empty(pptr[u + 1] - pptr[u], dtype=np.int64)
    n_plus = 0
    for j in range(pptr[v], pptr[v + 1]):
        l = plinks[j]
        if not _contains(plinks, pptr[u], pptr[u + 1], l):
            plus[n_plus] = l
            n_plus += 1
    n_minus = 0
    for j in range(pptr[u], pptr[u + 1]):
        l = plinks[j]
        if not _contains(plinks, pptr[v], pptr[v + 1], l):
            minus[n_minus] = l
            n_minus += 1
    return plus[:n_plus], minus[:n_minus]


@njit(cache=True)
def _dir_derivative(kind, c, plus, minus, f, a, s):
    g = 0.0
    gp = 0.0
    for l in plus:
        g += link_marginal(kind, c, l, f[l] + s, a[l] + s)
        gp += link_marginal_slope(kind, c, l, f[l] + s, a[l] + s)
    for l in minus:
        g -= link_marginal(kind, c, l, f[l] - s, a[l] - s)
        gp += link_marginal_slope(kind, c, l, f[l] - s, a[l] - s)
    return g, gp


@njit(cache=True)
def line_search(kind, c, plus, minus, f, a, smax):
    """Minimizing shift in [0, smax] along the pairwise direction."""
    if smax <= 0.0:
        return 0.0
    g0, _ = _dir_derivative(kind, c, plus, minus, f, a, 0.0)
    if g0 >= 0.0:
        return 0.0
    g1, _ = _dir_derivative(kind, c, plus, minus, f, a, smax)
    if g1 <= 0.0:
        return smax
    lo = 0.0
    hi = smax
    s = 0.5 * smax
    for _ in range(200):
        g, gp = _dir_derivative(kind, c, plus, minus, f, a, s)
        if g == 0.0:
            return s
        if g < 0.0:
            lo = s
        else:
            hi = s
        if hi - lo <= 4e-16 * smax:
            break
        s_new = s - g / gp if gp > 0.0 else 0.5 * (lo + hi)
        if not (lo < s_new < hi):
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) <= 1e-16 * smax:
            s = s_new
            break
        s = s_new
    return s


@njit(cache=True)
def apply_shift(x, f, a, track_own, plus, minus, u, v, s, smax):
    if s <= 0.0:
        return
    if s >= smax:
        s = x[u]
        x[u] = 0.0
    else:
        x[u] -= s
    x[v] += s
    for l in plus:
        f[l] += s
        if track_own:
            a[l] += s
    for l in minus:
        f[l] -= s
        if f[l] < 0.0:
            f[l] = 0.0
        if track_own:
            a[l] -= s
            if a[l] < 0.0:
                a[l] = 0.0


@njit(cache=True)
def od_gap(kind, c, pptr, plinks, od_ptr, od, x, f, a):
    """(relative gap, used path with max marginal, path with min marginal)."""
    lo = od_ptr[od]
    hi = od_ptr[od + 1]
    v = lo
    mv = np.inf
    u = -1
    mu = -np.inf
    for p in range(lo, hi):
        m = path_marginal(kind, c, pptr, plinks, p, f, a)
        if m < mv:
            mv = m
            v = p
        if x[p] > 0.0 and m > mu:
            mu = m
            u = p
    if u < 0:
        return 0.0, v, v
    return (mu - mv) / (1.0 + abs(mv)), u, v


@njit(cache=True)
def social_sweep(kind, c, pptr, plinks, od_ptr, active, x, f, tol, inner_max):
    """One Gauss-Seidel pass over OD pairs; returns the largest gap seen.

    An OD whose gap is already within ``tol`` is left untouched, so a sweep
    returning a value <= tol made no moves at all.
    """
    a = np.zeros(1)
    dummy = np.zeros(f.shape[0])
    worst = 0.0
    for od in range(od_ptr.shape[0] - 1):
        if not active[od]:
            continue
        for it in range(inner_max):
            gap, u, v = od_gap(kind, c, pptr, plinks, od_ptr, od, x, f, dummy)
            if it == 0 and gap > worst:
                worst = gap
            if gap <= tol:
                break
            plus, minus = _direction(plinks, pptr, u, v)
            smax = x[u]
            s = line_search(kind, c, plus, minus, f, dummy, smax)
            if s <= 0.0:
                break
            apply_shift(x, f, a, False, plus, minus, u, v, s, smax)
    return worst


@njit(cache=True)
def best_response(c, pptr, plinks, od_ptr, host_ptr, host_ods, h, x, f, own, tol, inner_max):
    """Minimize end-host ``h``'s selfish cost over its own simplices in place.

    ``own`` must be all zeros on entry and is restored to zeros on exit.
    Returns (largest path-flow change, final relative gap).
    """
    lo = host_ptr[h]
    hi = host_ptr[h + 1]
    for k in range(lo, hi):
        od = host_ods[k]
        for p in range(od_ptr[od], od_ptr[od + 1]):
            for j in range(pptr[p], pptr[p + 1]):
                own[plinks[j]] += x[p]
    n_own = 0
    for k in range(lo, hi):
        od = host_ods[k]
        n_own += od_ptr[od + 1] - od_ptr[od]
    before = np.empty(n_own)
    i = 0
    for k in range(lo, hi):
        od = host_ods[k]
        for p in range(od_ptr[od], od_ptr[od + 1]):
            before[i] = x[p]
            i += 1

    final_gap = 0.0
    for it in range(inner_max):
        worst = 0.0
        for k in range(lo, hi):
            od = host_ods[k]
            gap, u, v = od_gap(SELFISH, c, pptr, plinks, od_ptr, od, x, f, own)
            if gap > worst:
                worst = gap
            if gap <= tol:
                continue
            plus, minus = _direction(plinks, pptr, u, v)
            smax = x[u]
            s = line_search(SELFISH, c, plus, minus, f, own, smax)
            apply_shift(x, f, own, True, plus, minus, u, v, s, smax)
        final_gap = worst
        if worst <= tol:
            break

    change = 0.0
    i = 0
    for k in range(lo, hi):
        od = host_ods[k]
        for p in range(od_ptr[od], od_ptr[od + 1]):
            d = abs(x[p] - before[i])
            if d > change:
                change = d
            i += 1
            for j in range(pptr[p], pptr[p + 1]):
                own[plinks[j]] = 0.0
    return change, final_gap


@njit(cache=True)
def pi_sweep(c, pptr, plinks, od_ptr, host_ptr, host_ods, order, active, x, f, own, tol, inner_max):
    change = 0.0
    for h in order:
        if not active[h]:
            continue
        d, _ = best_response(c, pptr, plinks, od_ptr, host_ptr, host_ods, h, x, f, own, tol, inner_max)
        if d > change:
            change = d
    return change
