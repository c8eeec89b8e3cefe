"""Analytic results for parallel-link and ladder networks.

These are evaluated independently of the numerical solvers and serve as their
oracles.  Ladder PI equilibria are characterized by a linear system over the
indirect path flows ``F_1 .. F_{H-1}`` in which every row has the form

    E_{a,b}(F_c, F_d, F_f) = lam*d - (a*t + b*lam)*F_c - 2t*F_d - lam*F_f

with ``lam = p * d**(p-1)``.  The rows treat horizontal link flows as equal to
``d`` (exact for H = 2 and in the large-t limit).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple


class SingularSystem(ArithmeticError):
    pass


@dataclass(frozen=True)
class ParallelLinksSpec:
    m: int
    p: float
    d: float
    K: float  # int, or math.inf for the many-host limit

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m!r}")
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p!r}")
        if not self.d >= 0:
            raise ValueError(f"d must be >= 0, got {self.d!r}")
        if not (self.K == math.inf or (int(self.K) == self.K and self.K >= 1)):
            raise ValueError(f"K must be a positive integer or inf, got {self.K!r}")


@dataclass(frozen=True)
class LadderSpec:
    H: int
    p: float
    d: float
    t: float

    def __post_init__(self):
        if int(self.H) != self.H or self.H < 2:
            raise ValueError(f"H must be an integer >= 2, got {self.H!r}")
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p!r}")
        if not self.d >= 0:
            raise ValueError(f"d must be >= 0, got {self.d!r}")
        if not self.t >= 0:
            raise ValueError(f"t must be >= 0, got {self.t!r}")

    @property
    def lam(self) -> float:
        return self.p * self.d ** (self.p - 1)

    @property
    def V(self) -> int:
        return self.H - 1


# -- parallel links ------------------------------------------------------------

class ParallelOptimum(NamedTuple):
    f_beta: float
    endhost_cost: float
    operator_cost: float


class PoATable(NamedTuple):
    poa_star_0: float
    poa_star_plus: float
    poa_hash_0: float
    poa_hash_plus: float


def _optimum_factor(p: float) -> float:
    return 1 - p / (p + 1) ** ((p + 1) / p)


def parallel_optimum_flows(spec: ParallelLinksSpec) -> ParallelOptimum:
    p, d = spec.p, spec.d
    return ParallelOptimum(d / (p + 1) ** (1 / p), d ** (p + 1) * _optimum_factor(p), spec.m * d ** p)


def parallel_li_flow(spec: ParallelLinksSpec) -> float:
    return spec.d


def parallel_pi_flow(spec: ParallelLinksSpec) -> float:
    """Flow on beta in the PI equilibrium; each end-host carries 1/K of it."""
    q = spec.p / spec.K
    return spec.d / (q + 1) ** (1 / spec.p)


def parallel_poa_table(spec: ParallelLinksSpec) -> PoATable:
    p, m = spec.p, spec.m
    q = p / spec.K
    base = _optimum_factor(p)
    return PoATable(
        1 / base,
        (1 - q / (q + 1) ** ((p + 1) / p)) / base,
        (m + 1) / m,
        (m + 1 / (q + 1)) / m,
    )


# -- ladder, H = 2 -------------------------------------------------------------

class LadderH2(NamedTuple):
    F1: float | None
    poa_star_plus: float
    poa_hash_plus: float


def ladder_pi_h2(spec: LadderSpec, worst_case: bool = False) -> LadderH2:
    """Indirect flow per end-host and both PI Prices of Anarchy for H = 2.

    With ``worst_case`` the suprema over (d, t) are returned instead: the
    end-host value is attained at t = lam/3, the operator value as t -> inf.
    """
    if spec.H != 2:
        raise ValueError("ladder_pi_h2 needs H = 2")
    p = spec.p
    if worst_case:
        return LadderH2(None, 1 + p / 12, 1 + p / 3)
    d, t, lam = spec.d, spec.t, spec.lam
    if 6 * t + 2 * lam == 0:
        return LadderH2(0.0, 1.0, 1.0)
    F1 = lam * d / (6 * t + 2 * lam)
    if d == 0:
        return LadderH2(F1, 1.0, 1.0)
    star = (2 * d ** (p + 1) + 2 * t * (2 * F1) ** 2) / (2 * d ** (p + 1))
    hash_ = (2 * d ** p + 4 * t * F1) / (2 * d ** p)
    return LadderH2(F1, star, hash_)


def ladder_h2_worst_t(spec: LadderSpec) -> float:
    """Rail slope maximizing the H = 2 end-host PoA."""
    return spec.lam / 3


# -- ladder equation system ----------------------------------------------------

@dataclass(frozen=True)
class Row:
    """``E_{a,b}(F_c, F_d, F_f)``; variable indices are 1-based, 0 means absent."""

    a: int
    b: int
    c: int
    d: int = 0
    f: int = 0

    def evaluate(self, F, t, lam, dem):
        get = lambda i: F[i - 1] if i else 0.0
        return lam * dem - (self.a * t + self.b * lam) * get(self.c) - 2 * t * get(self.d) - lam * get(self.f)


@dataclass(frozen=True)
class LadderSystem:
    H: int
    rows: tuple[Row, ...]

    @property
    def n_unknowns(self) -> int:
        return self.H - 1

    def symbolic(self):
        """Each row as (constant multiple of lam*d, {u: (t coefficient, lam coefficient)}); signs negated."""
        out = []
        for r in self.rows:
            coef: dict[int, list[int]] = {}

            def add(i, tc, lc):
                if i:
                    cur = coef.setdefault(i, [0, 0])
                    cur[0] += tc
                    cur[1] += lc

            add(r.c, r.a, r.b)
            add(r.d, 2, 0)
            add(r.f, 0, 1)
            out.append((1, {u: tuple(v) for u, v in coef.items()}))
        return out

    def summed(self):
        """Symbolic sum of all rows, same encoding as :meth:`symbolic`."""
        total_const = 0
        total: dict[int, list[int]] = {}
        for const, coef in self.symbolic():
            total_const += const
            for u, (tc, lc) in coef.items():
                cur = total.setdefault(u, [0, 0])
                cur[0] += tc
                cur[1] += lc
        return total_const, {u: tuple(v) for u, v in sorted(total.items())}

    def matrix(self, t, lam, d):
        """Dense ``A F = b`` form as nested lists (entries keep the input number type)."""
        n = self.n_unknowns
        zero = t * 0
        A = [[zero] * n for _ in range(n)]
        b = []
        for i, (const, coef) in enumerate(self.symbolic()):
            for u, (tc, lc) in coef.items():
                A[i][u - 1] = A[i][u - 1] + tc * t + lc * lam
            b.append(const * lam * d)
        return A, b


def ladder_equation_system(spec: LadderSpec | int) -> LadderSystem:
    """Build the PI equation system for a ladder with H rungs.

    The case split (H = 2, H = 3, even H >= 4, odd H >= 5) follows the
    deviation pattern returned by :func:`ladder_deviation_map`.
    """
    H = spec.H if isinstance(spec, LadderSpec) else int(spec)
    if H < 2:
        raise ValueError("H must be >= 2")
    if H == 2:
        rows = [Row(6, 2, 1)]
    elif H == 3:
        rows = [Row(4, 2, 1, 2), Row(4, 3, 2, 1)]
    else:
        rows = [Row(4, 2, 1, 2), Row(4, 2, 2, 1, 3)]
        last_j = H - 3 if H % 2 == 0 else H - 4
        for j in range(3, last_j + 1, 2):
            rows.append(Row(4, 2, j, j + 1, j - 1))
            rows.append(Row(4, 2, j + 1, j, j + 2))
        if H % 2 == 0:
            rows.append(Row(6, 2, H - 1, 0, H - 2))
        else:
            rows.append(Row(4, 2, H - 2, H - 1, H - 3))
            rows.append(Row(4, 3, H - 1, H - 2, 0))
    return LadderSystem(H, tuple(rows))


def ladder_deviation_map(H: int) -> dict[int, tuple[int, int]]:
    """For each rung i, the variables (up, down) naming its end-host's flow to rung i-1 / i+1.

    0 means no flow in that direction.  Rung pairs exchange flow symmetrically
    about the middle of the ladder.
    """
    half = {1: (0, 1)}
    if H % 2 == 0:
        for i in range(2, H // 2 + 1):
            half[i] = (2 * i - 2, 2 * i - 1)
    else:
        for i in range(2, (H - 1) // 2 + 1):
            half[i] = (2 * i - 2, 2 * i - 1)
        half[(H + 1) // 2] = (H - 1, H - 1)
    out = dict(half)
    for i, (up, down) in half.items():
        mirror = H + 1 - i
        if mirror not in out:
            out[mirror] = (down, up)
    if H == 2:
        out = {1: (0, 1), 2: (1, 0)}
    return dict(sorted(out.items()))


def _solve_exact(A, b):
    """Gauss-Jordan elimination over Fractions."""
    n = len(b)
    M = [[Fraction(v) for v in row] + [Fraction(rhs)] for row, rhs in zip(A, b)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if M[r][col] != 0), None)
        if pivot is None:
            raise SingularSystem(f"ladder system is singular (column {col + 1})")
        M[col], M[pivot] = M[pivot], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                factor = M[r][col]
                M[r] = [a - factor * c for a, c in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


class LadderSolution(NamedTuple):
    F: tuple[float, ...]
    F_V: float
    f_V: float


def ladder_solve_system(spec: LadderSpec) -> LadderSolution:
    """Solve the PI system exactly; ``F_V`` sums the unknowns and ``f_V = 4 F_V``."""
    t, lam, d = Fraction(spec.t), Fraction(spec.lam), Fraction(spec.d)
    if t == 0 and lam == 0:
        raise SingularSystem("ladder system is singular for t = 0 and lam = 0")
    system = ladder_equation_system(spec)
    A, b = system.matrix(t, lam, d)
    F = _solve_exact(A, b)
    FV = sum(F)
    return LadderSolution(tuple(float(v) for v in F), float(FV), float(4 * FV))


def ladder_F_V_limit(spec: LadderSpec) -> float:
    """Large-t form ``(H-1) lam d / (6t + 3 lam)`` of the summed indirect flow."""
    return (spec.H - 1) * spec.lam * spec.d / (6 * spec.t + 3 * spec.lam)


def ladder_implied_link_flows(spec: LadderSpec, F) -> dict[str, float]:
    """Link flows of the ladder pattern that the system's variables describe."""
    H, d = spec.H, spec.d
    dev = ladder_deviation_map(H)
    val = lambda u: F[u - 1] if u else 0.0
    flows = {f"h{i}": 0.0 for i in range(1, H + 1)}
    for i in range(1, H):
        for j in (1, 2):
            flows[f"v{i}{j}"] = 0.0
    for i, (up, down) in dev.items():
        fu, fd = val(up), val(down)
        flows[f"h{i}"] += d - fu - fd
        if up:
            flows[f"h{i - 1}"] += fu
            for j in (1, 2):
                flows[f"v{i - 1}{j}"] += fu
        if down:
            flows[f"h{i + 1}"] += fd
            for j in (1, 2):
                flows[f"v{i}{j}"] += fd
    return flows


def ladder_implied_costs(spec: LadderSpec, F) -> tuple[float, float]:
    """(end-host cost, operator cost) of the system-implied pattern."""
    flows = ladder_implied_link_flows(spec, F)
    star = hash_ = 0.0
    for link, f in flows.items():
        c = f ** spec.p if link.startswith("h") else spec.t * f
        star += f * c
        hash_ += c
    return star, hash_


def ladder_poa_bound(H: int, p: float) -> tuple[float, float]:
    """Operator PI Price-of-Anarchy bound for H rungs, and its H -> inf limit."""
    if H < 2:
        raise ValueError("H must be >= 2")
    return 1 + 2 * (H - 1) / (3 * H) * p, 1 + 2 * p / 3


def direct_only_costs(spec: LadderSpec) -> tuple[float, float]:
    """(C*, C#) of every rung carrying exactly its own demand."""
    return spec.H * spec.d ** (spec.p + 1), spec.H * spec.d ** spec.p
