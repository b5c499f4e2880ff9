"""Dense linear complementarity solver: Lemke's algorithm with a covering
vector start and lexicographic tie-breaking against cycling.

Also provides a mixed variant where a subset of variables is unrestricted and
their rows are driven to zero (bilateral constraints), reduced to a standard
LCP by block elimination.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_REL_TOL = 1e-12


class LCPError(RuntimeError):
    pass


class RayTerminationError(LCPError):
    """Lemke terminated on a secondary ray: no solution found."""


class PivotLimitError(LCPError):
    """Pivot budget exhausted before termination."""


@dataclass
class LCPProblem:
    m: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        n = len(self.q)
        if self.m.shape != (n, n):
            raise ValueError(f"M must be {n}x{n}")
        if not (np.isfinite(self.m).all() and np.isfinite(self.q).all()):
            raise ValueError("LCP entries must be finite")


@dataclass
class LCPSolution:
    z: np.ndarray
    w: np.ndarray
    pivot_count: int


def lemke_solve(problem: LCPProblem, max_pivots: int | None = None) -> LCPSolution:
    """Solve w = M z + q, w >= 0, z >= 0, z.w = 0.

    Raises RayTerminationError when the auxiliary variable cannot be driven
    out, PivotLimitError when the pivot budget runs out.
    """
    m, q = problem.m, problem.q
    n = len(q)
    if n == 0:
        return LCPSolution(np.zeros(0), np.zeros(0), 0)
    if max_pivots is None:
        max_pivots = max(50 * n, 100)
    if q.min() >= 0.0:
        return LCPSolution(np.zeros(n), q.copy(), 0)

    # tableau columns: w (0..n-1) | z (n..2n-1) | z0 (2n) | rhs (2n+1)
    tab = np.zeros((n, 2 * n + 2))
    tab[:, :n] = np.eye(n)
    tab[:, n:2 * n] = -m
    tab[:, 2 * n] = -1.0
    tab[:, 2 * n + 1] = q
    basis = list(range(n))

    def pivot(row: int, col: int) -> None:
        tab[row] /= tab[row, col]
        for r in range(n):
            if r != row and tab[r, col] != 0.0:
                tab[r] -= tab[r, col] * tab[row]

    def lexico_ratio_row(col: int) -> int | None:
        d = tab[:, col]
        scale = max(1.0, float(np.abs(d).max()))
        rows = np.where(d > PIVOT_REL_TOL * scale)[0]
        if len(rows) == 0:
            return None
        # compare (rhs, B^-1 columns) / d lexicographically; the w-part of the
        # tableau holds the basis inverse, so ties cannot persist
        ratios = np.column_stack([tab[rows, 2 * n + 1], tab[rows, :n]]) / d[rows, None]
        best = 0
        for i in range(1, len(rows)):
            diff = ratios[i] - ratios[best]
            nz = np.nonzero(np.abs(diff) > 1e-14 * (1.0 + np.abs(ratios[best])))[0]
            if len(nz) and diff[nz[0]] < 0:
                best = i
        return int(rows[best])

    # drive the auxiliary variable in at the most negative q
    row = int(np.argmin(q))
    pivot(row, 2 * n)
    entering = n + basis[row]  # complement of the leaving w variable
    basis[row] = 2 * n

    pivots = 1
    while pivots <= max_pivots:
        row = lexico_ratio_row(entering)
        if row is None:
            raise RayTerminationError("no solution found (secondary ray)")
        leaving = basis[row]
        pivot(row, entering)
        basis[row] = entering
        pivots += 1
        if leaving == 2 * n:
            z = np.zeros(n)
            for r, b in enumerate(basis):
                if b >= n:
                    z[b - n] = tab[r, 2 * n + 1]
            return LCPSolution(z, problem.m @ z + problem.q, pivots)
        entering = leaving + n if leaving < n else leaving - n
    raise PivotLimitError(f"exceeded {max_pivots} pivots")


@dataclass
class ResidualReport:
    z_negativity: float
    w_negativity: float
    complementarity: float

    @property
    def max_violation(self) -> float:
        return max(self.z_negativity, self.w_negativity, self.complementarity)


def validate_solution(problem: LCPProblem, solution: LCPSolution) -> ResidualReport:
    w = problem.m @ solution.z + problem.q
    z = solution.z
    return ResidualReport(
        z_negativity=float(max(0.0, -(z.min() if len(z) else 0.0))),
        w_negativity=float(max(0.0, -(w.min() if len(w) else 0.0))),
        complementarity=float(np.abs(z * w).max()) if len(z) else 0.0,
    )


@dataclass
class MixedLCPSolution:
    z: np.ndarray  # full vector: complementary entries >= 0, free entries unrestricted
    w: np.ndarray  # M z + q; zero on free rows, >= 0 on complementary rows
    pivot_count: int


def solve_mixed(m: np.ndarray, q: np.ndarray, free: np.ndarray, max_pivots: int | None = None) -> MixedLCPSolution:
    """Mixed LCP: rows marked free are equalities with unrestricted variables.

    The free block is eliminated by a Schur complement, the reduced problem
    goes to Lemke, and the free variables are back-substituted.  The caller
    is responsible for regularizing a rank-deficient free block.
    """
    m = np.asarray(m, dtype=float)
    q = np.asarray(q, dtype=float)
    free = np.asarray(free, dtype=bool)
    idx_f = np.where(free)[0]
    idx_c = np.where(~free)[0]
    z = np.zeros(len(q))
    if len(idx_f) == 0:
        sol = lemke_solve(LCPProblem(m, q), max_pivots)
        return MixedLCPSolution(sol.z, sol.w, sol.pivot_count)
    a_ff = m[np.ix_(idx_f, idx_f)]
    a_fc = m[np.ix_(idx_f, idx_c)]
    a_cf = m[np.ix_(idx_c, idx_f)]
    a_cc = m[np.ix_(idx_c, idx_c)]
    try:
        ff_inv_qf = np.linalg.solve(a_ff, q[idx_f])
        ff_inv_fc = np.linalg.solve(a_ff, a_fc)
    except np.linalg.LinAlgError as exc:
        raise LCPError("free (bilateral) block is singular") from exc
    pivots = 0
    if len(idx_c):
        reduced_m = a_cc - a_cf @ ff_inv_fc
        reduced_q = q[idx_c] - a_cf @ ff_inv_qf
        sol = lemke_solve(LCPProblem(reduced_m, reduced_q), max_pivots)
        z[idx_c] = sol.z
        pivots = sol.pivot_count
    z[idx_f] = -ff_inv_qf - (ff_inv_fc @ z[idx_c] if len(idx_c) else 0.0)
    w = m @ z + q
    return MixedLCPSolution(z, w, pivots)
