"""
Dense two-phase simplex with Bland's pivoting rule.

Problems are stated over nonnegative variables x with equality rows
A_eq x = b_eq and inequality rows A_ge x >= b_ge; when `simplex` is set the
row sum(x) = 1 is added, which keeps every objective bounded.
"""
from collections import namedtuple
from enum import Enum

import numpy as np

from .constraints import AtomGroups, ConstraintClass
from .errors import DimensionError, NumericalError


FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-10
MAX_PIVOTS = 100_000


class LPStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


LPResult = namedtuple("LPResult", ["status", "value", "point"])


def _rows(A, b, n):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if A.size == 0:
        return np.zeros((0, n)), np.zeros(0)
    if A.shape[1] != n or A.shape[0] != b.shape[0]:
        raise DimensionError(
            f"constraint block of shape {A.shape} with {b.shape[0]} right-hand "
            f"sides for {n} variables"
        )
    return A, b


class LinearProgramSpec:
    def __init__(
        self,
        objective,
        sense="min",
        A_eq=None,
        b_eq=None,
        A_ge=None,
        b_ge=None,
        simplex=True,
        ties=(),
    ):
        if sense not in {"min", "max"}:
            raise ValueError(f"sense must be 'min' or 'max', not {sense!r}")
        self.objective = np.asarray(objective, dtype=np.float64)
        if self.objective.ndim != 1:
            raise DimensionError("objective must be a vector")
        n = self.objective.size
        self.sense = sense
        self.A_eq, self.b_eq = _rows(A_eq, b_eq, n)
        self.A_ge, self.b_ge = _rows(A_ge, b_ge, n)
        self.simplex = simplex
        self.ties = list(ties)
        for t in self.ties:
            if t.atoms.max() >= n:
                raise DimensionError(f"{t!r} refers past the {n} variables")

    @property
    def n_vars(self):
        return self.objective.size

    @classmethod
    def from_constraints(cls, objective, constraints, sense="min"):
        "An LP over the probability simplex from LinearConstraints."
        objective = np.asarray(objective, dtype=np.float64)
        eq, b_eq, ge, b_ge, ties = [], [], [], [], []
        for c in constraints:
            if c.kind is ConstraintClass.TIE:
                ties.append(c)
                continue
            if c.kind is not ConstraintClass.LINEAR:
                raise TypeError(f"can't put {c!r} into a linear program")
            if c.coef.size != objective.size:
                raise DimensionError(
                    f"constraint over {c.coef.size} atoms, objective over "
                    f"{objective.size}"
                )
            if c.sense == "eq":
                eq.append(c.coef)
                b_eq.append(c.rhs)
            else:
                ge.append(c.coef)
                b_ge.append(c.rhs)
        return cls(
            objective,
            sense,
            A_eq=np.array(eq) if eq else None,
            b_eq=b_eq,
            A_ge=np.array(ge) if ge else None,
            b_ge=b_ge,
            ties=ties,
        )

    def negated(self):
        "Same feasible set, opposite sense."
        other = LinearProgramSpec.__new__(LinearProgramSpec)
        other.__dict__.update(self.__dict__)
        other.sense = "max" if self.sense == "min" else "min"
        return other


################################################################################
### Presolve


def _fix_zeros(A_eq, b_eq, A_ge, b_ge, n):
    """
    An equality row with zero right-hand side and nonnegative coefficients
    forces its whole support to zero. Drops those rows and columns, repeating
    until nothing changes.
    """
    active = np.ones(n, dtype=bool)
    keep_eq = np.ones(A_eq.shape[0], dtype=bool)
    changed = True
    while changed:
        changed = False
        for i in np.flatnonzero(keep_eq):
            if b_eq[i] != 0:
                continue
            row = A_eq[i, active]
            if np.all(row >= 0):
                support = np.zeros(n, dtype=bool)
                support[active] = row > 0
                active &= ~support
                keep_eq[i] = False
                changed = True
    return active, A_eq[keep_eq][:, active], b_eq[keep_eq], A_ge[:, active], b_ge


################################################################################
### Tableau


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0
    T -= np.outer(col, T[r])


class _Pivoter:
    def __init__(self, max_pivots):
        self.max_pivots = max_pivots
        self.count = 0

    def run(self, T, basis, n_cols):
        """
        Bland's rule on columns [0, n_cols): the lowest-index improving column
        enters, ties in the ratio test go to the lowest-index basic variable.
        """
        basis_arr = np.asarray(basis)
        while True:
            cands = np.flatnonzero(T[-1, :n_cols] < -OPT_TOL)
            if cands.size == 0:
                return LPStatus.OPTIMAL
            j = cands[0]

            col = T[:-1, j]
            rows = np.flatnonzero(col > PIVOT_TOL)
            if rows.size == 0:
                return LPStatus.UNBOUNDED
            rats = np.maximum(T[rows, -1], 0) / col[rows]
            best = rats.min()
            ties = rows[rats <= best + 1e-12 * (1 + best)]
            r = ties[np.argmin(basis_arr[ties])]

            self.count += 1
            if self.count > self.max_pivots:
                raise NumericalError(
                    f"simplex exceeded {self.max_pivots} pivots without converging"
                )
            _pivot(T, r, j)
            basis[r] = j
            basis_arr[r] = j


def simplex_solve(lp, max_pivots=MAX_PIVOTS):
    """
    Solve `lp` to optimality. Returns an LPResult whose status is OPTIMAL
    (with value and point), INFEASIBLE or UNBOUNDED.
    """
    if lp.ties:
        return _solve_merged(lp, max_pivots)
    n = lp.n_vars
    A_eq, b_eq = lp.A_eq, lp.b_eq
    if lp.simplex:
        A_eq = np.vstack([A_eq, np.ones((1, n))])
        b_eq = np.r_[b_eq, 1.0]

    active, A_eq, b_eq, A_ge, b_ge = _fix_zeros(A_eq, b_eq, lp.A_ge, lp.b_ge, n)
    n_act = int(active.sum())

    # rows left without variables are either trivially true or contradictory
    def _trivial(A, b, sense):
        empty = ~np.any(A != 0, axis=1)
        if sense == "eq":
            bad = empty & (np.abs(b) > FEAS_TOL)
        else:
            bad = empty & (b > FEAS_TOL)
        return ~empty, bool(bad.any())

    keep_eq, bad_eq = _trivial(A_eq, b_eq, "eq")
    keep_ge, bad_ge = _trivial(A_ge, b_ge, "ge")
    if bad_eq or bad_ge:
        return LPResult(LPStatus.INFEASIBLE, None, None)
    A_eq, b_eq = A_eq[keep_eq], b_eq[keep_eq]
    A_ge, b_ge = A_ge[keep_ge], b_ge[keep_ge]

    m_eq, m_ge = A_eq.shape[0], A_ge.shape[0]
    m = m_eq + m_ge
    n_struct = n_act + m_ge  # structural variables and surplus columns
    n_cols = n_struct + m  # plus one artificial per row

    T = np.zeros((m + 1, n_cols + 1))
    T[:m_eq, :n_act] = A_eq
    T[:m_eq, -1] = b_eq
    T[m_eq:m, :n_act] = A_ge
    T[m_eq:m, n_act:n_struct] = -np.eye(m_ge)
    T[m_eq:m, -1] = b_ge
    neg = T[:m, -1] < 0
    T[:m][neg] *= -1
    T[:m, n_struct:n_cols] = np.eye(m)
    basis = list(range(n_struct, n_cols))

    pivoter = _Pivoter(max_pivots)

    # phase one: minimize the sum of artificials
    T[-1, :n_struct] = -T[:m, :n_struct].sum(axis=0)
    T[-1, -1] = -T[:m, -1].sum()
    pivoter.run(T, basis, n_cols)
    if -T[-1, -1] > FEAS_TOL:
        return LPResult(LPStatus.INFEASIBLE, None, None)

    # drive artificials out of the basis; rows where that fails are redundant
    drop = []
    for r, b in enumerate(basis):
        if b < n_struct:
            continue
        nz = np.flatnonzero(np.abs(T[r, :n_struct]) > PIVOT_TOL)
        if nz.size:
            _pivot(T, r, nz[0])
            basis[r] = nz[0]
        else:
            drop.append(r)
    if drop:
        keep = np.setdiff1d(np.arange(m + 1), drop)
        T = T[keep]
        basis = [b for r, b in enumerate(basis) if r not in set(drop)]
    T = np.hstack([T[:, :n_struct], T[:, -1:]])

    # phase two
    c = np.zeros(n_struct)
    c[:n_act] = lp.objective[active]
    if lp.sense == "max":
        c = -c
    cb = c[basis]
    T[-1, :-1] = c - cb @ T[:-1, :-1]
    T[-1, -1] = -(cb @ T[:-1, -1])
    status = pivoter.run(T, basis, n_struct)
    if status is LPStatus.UNBOUNDED:
        return LPResult(LPStatus.UNBOUNDED, None, None)

    sol = np.zeros(n_struct)
    sol[basis] = T[:-1, -1]
    x = np.zeros(n)
    x[active] = np.maximum(sol[:n_act], 0)
    return LPResult(LPStatus.OPTIMAL, float(lp.objective @ x), x)


def _solve_merged(lp, max_pivots):
    "Tied variables become one column carrying the sum of theirs."
    groups = AtomGroups(lp.ties, lp.n_vars)
    A_eq, b_eq = lp.A_eq, lp.b_eq
    if lp.simplex:
        A_eq = np.vstack([A_eq, np.ones((1, lp.n_vars))])
        b_eq = np.r_[b_eq, 1.0]
    merged = LinearProgramSpec(
        groups.aggregate(lp.objective),
        lp.sense,
        A_eq=groups.aggregate(A_eq),
        b_eq=b_eq,
        A_ge=groups.aggregate(lp.A_ge),
        b_ge=lp.b_ge,
        simplex=False,
    )
    res = simplex_solve(merged, max_pivots=max_pivots)
    if res.status is not LPStatus.OPTIMAL:
        return res
    x = groups.expand(res.point)
    return LPResult(res.status, float(lp.objective @ x), x)


def feasible_point(lp, max_pivots=MAX_PIVOTS):
    "Any point of the feasible set, or None."
    zero = LinearProgramSpec.__new__(LinearProgramSpec)
    zero.__dict__.update(lp.__dict__)
    zero.objective = np.zeros(lp.n_vars)
    res = simplex_solve(zero, max_pivots=max_pivots)
    return res.point if res.status is LPStatus.OPTIMAL else None
