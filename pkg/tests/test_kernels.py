import numpy as np
from hypothesis import given, strategies as st

from anarchy_lab import _kernels as K


def _direction_cost(kind, c, plus, minus, f, a, s):
    """Objective change along the pairwise shift, by direct evaluation."""
    def term(l, x, own):
        v = np.polynomial.polynomial.polyval(x, c[l])
        if kind == K.ENDHOST:
            return x * v
        if kind == K.OPERATOR:
            return v
        if kind == K.BECKMANN:
            return np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyint(c[l]))
        return own * v
    total = sum(term(l, f[l] + s, a[l] + s) for l in plus) + sum(term(l, f[l] - s, a[l] - s) for l in minus)
    return total


@given(st.integers(0, 10_000), st.sampled_from([K.ENDHOST, K.OPERATOR, K.BECKMANN]))
def test_line_search_minimizes_along_segment(seed, kind):
    rng = np.random.default_rng(seed)
    c = np.round(rng.uniform(0, 2, size=(4, 4)), 3)
    f = rng.uniform(0.5, 2, size=4)
    a = np.zeros(4)
    plus, minus = np.array([0, 1]), np.array([2, 3])
    smax = float(min(f[2], f[3]))
    s = K.line_search(kind, c, plus, minus, f, a, smax)
    grid = np.linspace(0, smax, 401)
    vals = [_direction_cost(kind, c, plus, minus, f, a, x) for x in grid]
    assert 0 <= s <= smax
    assert _direction_cost(kind, c, plus, minus, f, a, s) <= min(vals) + 1e-12


def test_direction_skips_shared_links():
    pptr = np.array([0, 2, 4])
    plinks = np.array([0, 1, 0, 2])
    plus, minus = K._direction(plinks, pptr, 0, 1)
    assert plus.tolist() == [2] and minus.tolist() == [1]


def test_apply_shift_empties_source_path():
    x = np.array([0.3, 0.7])
    f = np.array([0.3, 0.7])
    a = np.zeros(2)
    K.apply_shift(x, f, a, False, np.array([1]), np.array([0]), 0, 1, 0.3, 0.3)
    assert x.tolist() == [0.0, 1.0]
    assert f[0] == 0.0 and f[1] == 1.0


def test_link_marginals():
    c = np.array([[1.0, 2.0, 3.0]])
    f = 2.0
    assert K.link_marginal(K.BECKMANN, c, 0, f, 0.0) == 1 + 4 + 12
    assert K.link_marginal(K.OPERATOR, c, 0, f, 0.0) == 2 + 12
    assert K.link_marginal(K.ENDHOST, c, 0, f, 0.0) == 17 + 2 * 14
    assert K.link_marginal(K.SELFISH, c, 0, f, 0.5) == 17 + 0.5 * 14
    assert K.link_marginal_slope(K.ENDHOST, c, 0, f, 0.0) == 2 * 14 + 2 * 6
