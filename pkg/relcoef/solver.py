"""
Bounds on a queried coefficient over every distribution satisfying a set of
atom-level constraints.

Capability matrix:

    constraints   query                         method          status
    linear        P(E)                          two LPs         EXACT
    linear        O, P(|), O(|), F(|), F(:)     Charnes-Cooper  EXACT
    linear        Q(|), Q(:)                    multi-start     INNER_APPROX, or
                                                + outer bound   EXACT once both meet
    bilinear      anything                      multi-start     INNER_APPROX
"""
from concurrent.futures import ThreadPoolExecutor
from collections import namedtuple
from dataclasses import dataclass
from enum import Enum
import math
import warnings

import numpy as np
from scipy.optimize import minimize
from tqdm import tqdm

from .coefficients import (
    CoeffTerm,
    Family,
    convert,
    evaluate,
    ext_div,
    format_value,
    term as make_term,
)
from .constraints import (
    DEFAULT_EPS_COND,
    AtomGroups,
    BilinearConstraint,
    ConstraintClass,
    LinearConstraint,
    coefficient_forms,
    normalize,
    normalize_all,
)
from .errors import FeasibilityUnknownError, NumericalError
from .lp import (
    FEAS_TOL,
    MAX_PIVOTS,
    LinearProgramSpec,
    LPStatus,
    feasible_point,
    simplex_solve,
)
from .partition import Distribution, Not


CERT_RTOL = 1e-7


class IntervalStatus(Enum):
    EXACT = "EXACT"
    INNER_APPROX = "INNER_APPROX"
    INFEASIBLE = "INFEASIBLE"
    UNDEFINED_QUERY = "UNDEFINED_QUERY"


class Interval:
    def __init__(
        self, lo, hi, status, witness_lo=None, witness_hi=None, message=""
    ):
        self.lo = lo
        self.hi = hi
        self.status = status
        self.witness_lo = witness_lo
        self.witness_hi = witness_hi
        self.message = message

    @classmethod
    def infeasible(cls, message=""):
        return cls(math.nan, math.nan, IntervalStatus.INFEASIBLE, message=message)

    @classmethod
    def undefined(cls, message=""):
        return cls(math.nan, math.nan, IntervalStatus.UNDEFINED_QUERY, message=message)

    @property
    def bounded(self):
        return self.status in {IntervalStatus.EXACT, IntervalStatus.INNER_APPROX}

    def converted(self, from_, to):
        if not self.bounded or from_ is to:
            return self
        dlo, dhi = from_.domain
        lo = convert(min(max(self.lo, dlo), dhi), from_, to)
        hi = convert(min(max(self.hi, dlo), dhi), from_, to)
        return Interval(
            lo, hi, self.status, self.witness_lo, self.witness_hi, self.message
        )

    def __repr__(self):
        return f"<Interval {self}>"

    def __str__(self):
        if not self.bounded:
            return self.status.value
        return (
            f"[{format_value(self.lo)}, {format_value(self.hi)}] {self.status.value}"
        )


@dataclass(frozen=True)
class SearchConfig:
    starts: int = 64
    seed: int = 42
    rounds: int = 5
    penalty: float = 10.0
    penalty_growth: float = 10.0
    tol: float = 1e-7
    max_pivots: int = MAX_PIVOTS
    progress: bool = False


def _split(constraints):
    "Linear constraints (ties included) and bilinear ones."
    bilinear = [c for c in constraints if c.kind is ConstraintClass.BILINEAR]
    linear = [c for c in constraints if c.kind is not ConstraintClass.BILINEAR]
    return linear, bilinear


def _solve(objective, linear, sense, max_pivots):
    lp = LinearProgramSpec.from_constraints(objective, linear, sense)
    res = simplex_solve(lp, max_pivots=max_pivots)
    if res.status is LPStatus.UNBOUNDED:
        raise NumericalError("LP over the probability simplex came back unbounded")
    return res


def linear_feasible(linear, n_atoms, max_pivots=MAX_PIVOTS):
    lp = LinearProgramSpec.from_constraints(np.zeros(n_atoms), linear)
    return feasible_point(lp, max_pivots=max_pivots)


################################################################################
### Linear and linear-fractional queries


def bounds_linear(query, constraints, table, max_pivots=MAX_PIVOTS):
    "min and max of query . p over the linear constraints."
    query = np.asarray(query, dtype=np.float64)
    lo = _solve(query, constraints, "min", max_pivots)
    if lo.status is LPStatus.INFEASIBLE:
        return Interval.infeasible("linear constraints are infeasible")
    hi = _solve(query, constraints, "max", max_pivots)
    return Interval(
        lo.value,
        hi.value,
        IntervalStatus.EXACT,
        Distribution(lo.point, table),
        Distribution(hi.point, table),
    )


def _charnes_cooper(num, den, constraints, eps_cond, sense, max_pivots):
    """
    Optimize (num . p) / (den . p) as an LP in (u, t) with u = t p:
    constraints scaled by t, sum(u) = t, den . u = 1 and den . p >= eps_cond.
    """
    n = num.size
    eq, b_eq, ge, b_ge = [], [], [], []
    ties = [c for c in constraints if c.kind is ConstraintClass.TIE]
    for c in constraints:
        if c.kind is ConstraintClass.TIE:
            continue
        row = np.r_[c.coef, -c.rhs]
        if c.sense == "eq":
            eq.append(row)
            b_eq.append(0.0)
        else:
            ge.append(row)
            b_ge.append(0.0)
    eq.append(np.r_[np.ones(n), -1.0])
    b_eq.append(0.0)
    eq.append(np.r_[den, 0.0])
    b_eq.append(1.0)
    guard = np.zeros(n + 1)
    guard[-1] = -eps_cond
    ge.append(guard)
    b_ge.append(-1.0)

    lp = LinearProgramSpec(
        np.r_[num, 0.0],
        sense,
        A_eq=np.array(eq),
        b_eq=b_eq,
        A_ge=np.array(ge),
        b_ge=b_ge,
        simplex=False,
        ties=ties,
    )
    res = simplex_solve(lp, max_pivots=max_pivots)
    if res.status is not LPStatus.OPTIMAL:
        raise NumericalError(f"Charnes-Cooper LP ended {res.status.value}")
    u, t = res.point[:-1], res.point[-1]
    return res.value, u / t


def bounds_fractional(
    num, den, constraints, table, eps_cond=DEFAULT_EPS_COND, max_pivots=MAX_PIVOTS
):
    "min and max of (num . p) / (den . p) over the linear constraints."
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)

    top_den = _solve(den, constraints, "max", max_pivots)
    if top_den.status is LPStatus.INFEASIBLE:
        return Interval.infeasible("linear constraints are infeasible")
    if top_den.value < eps_cond:
        return Interval.undefined(
            f"denominator is below {eps_cond:g} on the whole feasible set"
        )

    lo, w_lo = _charnes_cooper(num, den, constraints, eps_cond, "min", max_pivots)

    # a feasible point with den = 0 < num, mixed with points of positive den,
    # sends the ratio to infinity however small num is there
    at_zero = constraints + [LinearConstraint(den, "eq", 0.0)]
    blowup = _solve(num, at_zero, "max", max_pivots)
    if blowup.status is LPStatus.OPTIMAL and blowup.value > FEAS_TOL:
        hi, w_hi = math.inf, None
    else:
        hi, w_hi = _charnes_cooper(num, den, constraints, eps_cond, "max", max_pivots)
        w_hi = Distribution(w_hi, table)

    return Interval(lo, hi, IntervalStatus.EXACT, Distribution(w_lo, table), w_hi)


################################################################################
### Nonconvex search


def _merge_forms(forms, groups):
    "Query forms over groups of tied atoms."
    if forms is None or groups.trivial:
        return forms

    def merge(v):
        if v is None:
            return None
        if isinstance(v, tuple):
            return tuple(map(groups.aggregate, v))
        return groups.aggregate(v)

    return forms._replace(num=merge(forms.num), den=merge(forms.den))


class _SearchProblem:
    """
    Points of the simplex satisfying linear and bilinear constraints, with an
    optional score to push up or down. Ratio queries are scored through
    (num - den) / (num + den), which is increasing in the ratio and bounded.

    Tied atoms are searched as one variable per group; points come in and go
    out over atoms.
    """

    def __init__(self, linear, bilinear, forms, n):
        g = self.groups = AtomGroups.of(linear, n)
        n = self.n = g.n_groups
        rows = [c for c in linear if c.kind is ConstraintClass.LINEAR]
        eq = [c for c in rows if c.sense == "eq"]
        ge = [c for c in rows if c.sense == "ge"]
        self.A_eq = np.vstack([g.aggregate(c.coef) for c in eq] + [g.sizes])
        self.b_eq = np.r_[[c.rhs for c in eq], 1.0]
        self.A_ge = np.array([g.aggregate(c.coef) for c in ge]).reshape(len(ge), n)
        self.b_ge = np.array([c.rhs for c in ge])
        merged = [
            BilinearConstraint(*map(g.aggregate, c.forms), c.k, c.sense, c.origin)
            for c in bilinear
        ]
        self.bil_eq = [c for c in merged if c.sense == "eq"]
        self.bil_ge = [c for c in merged if c.sense == "ge"]
        self.forms = _merge_forms(forms, g)
        self._pinv = np.linalg.pinv(self.A_eq)
        self.bounds = [(0.0, 1.0)] * n

    def score(self, p):
        f = self.forms
        zero = np.zeros(self.n)
        if f is None:
            return 0.0, zero
        if f.kind == "linear":
            return float(f.num @ p), f.num
        if f.kind == "ratio":
            N, D = f.num @ p, f.den @ p
            dN, dD = f.num, f.den
        else:
            (n1, n2), (d1, d2) = f.num, f.den
            a1, a2, b1, b2 = n1 @ p, n2 @ p, d1 @ p, d2 @ p
            N, D = a1 * a2, b1 * b2
            dN = a2 * n1 + a1 * n2
            dD = b2 * d1 + b1 * d2
        s = N + D
        if s <= 1e-300:
            return 0.0, zero
        return float((N - D) / s), 2 * (D * dN - N * dD) / s ** 2

    def penalty(self, p):
        r_eq = self.A_eq @ p - self.b_eq
        r_ge = np.minimum(self.A_ge @ p - self.b_ge, 0)
        val = r_eq @ r_eq + r_ge @ r_ge
        grad = 2 * (self.A_eq.T @ r_eq + self.A_ge.T @ r_ge)
        for c in self.bil_eq:
            r = c.residual(p)
            val += r * r
            grad += 2 * r * c.gradient(p)
        for c in self.bil_ge:
            r = c.residual(p)
            if r < 0:
                val += r * r
                grad += 2 * r * c.gradient(p)
        return val, grad

    def _constraints(self):
        cons = [
            {
                "type": "eq",
                "fun": lambda p: self.A_eq @ p - self.b_eq,
                "jac": lambda p: self.A_eq,
            }
        ]
        if self.b_ge.size:
            cons.append(
                {
                    "type": "ineq",
                    "fun": lambda p: self.A_ge @ p - self.b_ge,
                    "jac": lambda p: self.A_ge,
                }
            )
        for kind, group in (("eq", self.bil_eq), ("ineq", self.bil_ge)):
            if group:
                cons.append(
                    {
                        "type": kind,
                        "fun": lambda p, g=group: np.array([c.residual(p) for c in g]),
                        "jac": lambda p, g=group: np.array([c.gradient(p) for c in g]),
                    }
                )
        return cons

    def project(self, p):
        "Back onto the linear equalities, staying nonnegative."
        p = np.clip(p, 0, None)
        for _ in range(3):
            p = p - self._pinv @ (self.A_eq @ p - self.b_eq)
            if p.min() >= 0:
                break
            p = np.clip(p, 0, None)
        return p

    def feasible(self, p, tol):
        if p.min() < -tol:
            return False
        if np.any(np.abs(self.A_eq @ p - self.b_eq) > tol):
            return False
        if np.any(self.A_ge @ p - self.b_ge < -tol):
            return False
        return all(c.satisfied(p, tol) for c in self.bil_eq + self.bil_ge)

    def search(self, start, direction, cfg):
        """
        Penalty rounds from `start`, then an SLSQP polish. `direction` is +1
        to push the score up, -1 down, 0 for feasibility only. Returns a
        feasible point or None.
        """
        p = np.array(self.groups.restrict(start), dtype=np.float64)
        for k in range(cfg.rounds):
            mu = cfg.penalty * cfg.penalty_growth ** k

            def fun(p, mu=mu):
                g, dg = self.score(p)
                v, dv = self.penalty(p)
                return -direction * g + mu * v, -direction * dg + mu * dv

            p = minimize(fun, p, jac=True, method="L-BFGS-B", bounds=self.bounds).x

        def objective(p):
            g, dg = self.score(p)
            return -direction * g, -direction * dg

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(
                objective,
                p,
                jac=True,
                method="SLSQP",
                bounds=self.bounds,
                constraints=self._constraints(),
                options={"maxiter": 200, "ftol": 1e-12},
            )
        polished = res.success
        if polished:
            p = res.x

        p = self.project(p)
        if not self.feasible(p, cfg.tol):
            return None, polished
        p = np.clip(p, 0, None)
        return self.groups.expand(p / (self.groups.sizes @ p)), polished


def _starting_points(linear, n_atoms, cfg):
    """
    Vertices for random objectives, each pulled part of the way towards their
    mean; convex combinations keep the linear constraints.
    """
    vertices, weights = [], []
    for k in range(cfg.starts):
        rng = np.random.default_rng([cfg.seed, k])
        res = _solve(rng.standard_normal(n_atoms), linear, "min", cfg.max_pivots)
        if res.status is LPStatus.OPTIMAL:
            vertices.append(res.point)
            weights.append(rng.uniform(0.1, 0.9))
    if not vertices:
        return []
    centre = np.mean(vertices, axis=0)
    return [lam * v + (1 - lam) * centre for v, lam in zip(vertices, weights)]


def _q_components(term):
    "Q(a|b) = O(a|b) / O(a|-b) and Q(a:b) = P(a|b) / P(a|-b)."
    a, b = term.args
    fam = Family.COND_O if term.family is Family.Q_ODDS else Family.COND_P
    return make_term(fam, a, b), make_term(fam, a, Not(b))


def _outer_q_bounds(term, linear, table, eps_cond, max_pivots):
    "Valid outer bounds on a Q coefficient from exact bounds on its two parts."
    parts = []
    for t in _q_components(term):
        f = coefficient_forms(t, table)
        iv = bounds_fractional(f.num, f.den, linear, table, eps_cond, max_pivots)
        if iv.status is not IntervalStatus.EXACT:
            return None
        parts.append(iv)
    top, bottom = parts
    lo = ext_div(top.lo, bottom.hi)
    hi = ext_div(top.hi, bottom.lo)
    if math.isnan(lo) or math.isnan(hi):
        return None
    return lo, hi


def _close(a, b):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= CERT_RTOL * max(1.0, abs(a), abs(b))


def bounds_nonconvex(
    term, constraints, table, cfg=None, eps_cond=DEFAULT_EPS_COND
):
    """
    Multi-start search for the extremes of `term` (in its canonical range).
    Reports the best feasible values found, so the true interval contains the
    reported one. Q queries under linear constraints are certified EXACT when
    the search reaches the outer bounds.
    """
    cfg = cfg or SearchConfig()
    term = CoeffTerm(term.family, term.args)
    linear, bilinear = _split(constraints)
    n = table.n_atoms

    if linear_feasible(linear, n, cfg.max_pivots) is None:
        return Interval.infeasible("linear constraints are infeasible")

    problem = _SearchProblem(linear, bilinear, coefficient_forms(term, table), n)
    best_lo = (math.inf, None)
    best_hi = (-math.inf, None)
    failed = tried = 0
    starts = _starting_points(linear, n, cfg)
    for start in tqdm(starts, desc=f"Searching {term}", disable=not cfg.progress):
        for direction in (1, -1):
            p, polished = problem.search(start, direction, cfg)
            tried += 1
            failed += not polished
            if p is None:
                continue
            dist = Distribution(p, table)
            v = evaluate(dist, term)
            if math.isnan(v):
                continue
            if v < best_lo[0]:
                best_lo = (v, dist)
            if v > best_hi[0]:
                best_hi = (v, dist)

    if tried and failed > tried // 2:
        warnings.warn(
            f"{failed} of {tried} local solves for {term} did not converge",
            RuntimeWarning,
        )
    if best_lo[1] is None:
        raise FeasibilityUnknownError(
            f"no feasible point found for {term} after {len(starts)} starts"
        )

    interval = Interval(
        best_lo[0], best_hi[0], IntervalStatus.INNER_APPROX, best_lo[1], best_hi[1]
    )

    if not bilinear and term.family in {Family.Q_ODDS, Family.Q_PROB}:
        outer = _outer_q_bounds(term, linear, table, eps_cond, cfg.max_pivots)
        if outer is not None and _close(outer[0], interval.lo) and _close(
            outer[1], interval.hi
        ):
            interval = Interval(
                outer[0],
                outer[1],
                IntervalStatus.EXACT,
                interval.witness_lo,
                interval.witness_hi,
            )
    return interval


################################################################################
### Feasibility


Feasibility = namedtuple("Feasibility", ["status", "witness", "message"])


def check_feasibility(constraints, table, cfg=None):
    "FEASIBLE with a witness, INFEASIBLE, or UNKNOWN when bilinear search fails."
    cfg = cfg or SearchConfig()
    linear, bilinear = _split(constraints)
    n = table.n_atoms
    point = linear_feasible(linear, n, cfg.max_pivots)
    if point is None:
        return Feasibility("INFEASIBLE", None, "linear constraints are infeasible")
    if not bilinear:
        return Feasibility("FEASIBLE", Distribution(point, table), "")

    problem = _SearchProblem(linear, bilinear, None, n)
    for start in _starting_points(linear, n, cfg):
        p, _ = problem.search(start, 0, cfg)
        if p is not None:
            return Feasibility("FEASIBLE", Distribution(p, table), "")
    return Feasibility(
        "UNKNOWN", None, f"no feasible point found after {cfg.starts} starts"
    )


def infeasible_subset(declarations, table, eps_cond=DEFAULT_EPS_COND):
    """
    A minimal set of declarations whose linear parts already conflict, found
    by dropping declarations one at a time; empty if the linear parts agree.
    """
    groups = []
    for d in declarations:
        lin, _ = _split(normalize(d, table, eps_cond))
        groups.append((d, lin))

    def feasible(gs):
        return linear_feasible([c for _, cs in gs for c in cs], table.n_atoms) is not None

    if feasible(groups):
        return []
    keep = list(groups)
    i = 0
    while i < len(keep):
        trial = keep[:i] + keep[i + 1 :]
        if not feasible(trial):
            keep = trial
        else:
            i += 1
    return [d for d, _ in keep]


################################################################################
### Programs


QueryAnswer = namedtuple("QueryAnswer", ["query", "interval", "error"])


def solve_term(term, constraints, table, cfg=None, eps_cond=DEFAULT_EPS_COND):
    "Bounds on one coefficient, in the range it was asked for."
    cfg = cfg or SearchConfig()
    canon = CoeffTerm(term.family, term.args)
    linear, bilinear = _split(constraints)
    forms = coefficient_forms(canon, table)

    if bilinear or forms.kind == "bilinear":
        interval = bounds_nonconvex(canon, constraints, table, cfg, eps_cond)
    elif forms.kind == "linear":
        interval = bounds_linear(forms.num, linear, table, cfg.max_pivots)
    else:
        interval = bounds_fractional(
            forms.num, forms.den, linear, table, eps_cond, cfg.max_pivots
        )
    return interval.converted(canon.range, term.range)


def answer_query(program, cfg=None, eps_cond=DEFAULT_EPS_COND, n_jobs=1):
    """
    Bounds for every query of `program`, in program order. Failures of one
    query (numeric trouble, no feasible start) are reported in its answer's
    `error` and don't stop the others.
    """
    cfg = cfg or SearchConfig()
    table = program.events
    constraints = normalize_all(program.declarations, table, eps_cond)
    linear, _ = _split(constraints)

    if linear_feasible(linear, table.n_atoms, cfg.max_pivots) is None:
        culprits = infeasible_subset(program.declarations, table, eps_cond)
        msg = "infeasible: " + "; ".join(str(d) for d in culprits)
        return [QueryAnswer(q, Interval.infeasible(msg), None) for q in program.queries]

    def one(q):
        try:
            return QueryAnswer(q, solve_term(q, constraints, table, cfg, eps_cond), None)
        except (NumericalError, FeasibilityUnknownError) as e:
            return QueryAnswer(q, None, e)

    if n_jobs > 1 and len(program.queries) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(one, program.queries))
    return [one(q) for q in program.queries]
