"""
Brute-force reference bounds for small programs: sample the simplex, pull
samples onto the constraint set, keep the ones that land, then nudge the
extremes outwards. Independent of the simplex and multi-start code paths.
"""
from collections import namedtuple
from dataclasses import dataclass
import warnings

import numpy as np
from scipy.linalg import null_space
from tqdm import tqdm

from .coefficients import CoeffTerm, evaluate_batch
from .constraints import (
    DEFAULT_EPS_COND,
    ConstraintClass,
    LinearConstraint,
    normalize_all,
)
from .errors import EventLimitError
from .solver import Interval, IntervalStatus


ORACLE_MAX_EVENTS = 4
MAX_PROJECTIONS = 500
MIN_ACCEPT_RATE = 0.01


@dataclass(frozen=True)
class OracleConfig:
    samples: int = 10 ** 6
    seed: int = 42
    refine_steps: int = 100
    tol: float = 1e-7
    batch_size: int = 50_000
    progress: bool = False

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"need at least one sample, got {self.samples}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")


OracleResult = namedtuple("OracleResult", ["query", "interval", "accepted", "message"])


def _bilinear_parts(c, X):
    "Residuals and gradients of a bilinear constraint at each row of X."
    f1, f2, f3, f4 = c.forms
    l1, l2, l3, l4 = X @ f1, X @ f2, X @ f3, X @ f4
    r = l1 * l2 - c.k * l3 * l4
    g = (
        l2[:, None] * f1
        + l1[:, None] * f2
        - c.k * (l4[:, None] * f3 + l3[:, None] * f4)
    )
    return r, g


def _moves(basis):
    """
    Unit directions that keep the equalities: mass transfers between pairs of
    atoms, projected onto the null space, plus the null-space basis itself.
    """
    n, k = basis.shape
    if k == 0:
        return np.zeros((0, n))
    i, j = np.triu_indices(n, 1)
    D = np.zeros((i.size, n))
    D[np.arange(i.size), i] = 1
    D[np.arange(i.size), j] = -1
    D = (D @ basis) @ basis.T
    norms = np.linalg.norm(D, axis=1)
    D = D[norms > 1e-9] / norms[norms > 1e-9][:, None]
    return np.vstack([D, basis.T])


def _split_zero_row(c):
    "coef . p == 0 with coef >= 0 is p_i == 0 on the support."
    if c.sense != "eq" or c.rhs != 0 or np.any(c.coef < 0):
        return [c]
    out = []
    for i in np.flatnonzero(c.coef):
        coef = np.zeros(c.coef.size)
        coef[i] = 1
        out.append(LinearConstraint(coef, "eq", 0, c.origin))
    return out


class _Projector:
    def __init__(self, constraints, n):
        # at most 16 atoms here, so ties and zeroed supports go in row by row
        linear = []
        for c in constraints:
            if c.kind is ConstraintClass.TIE:
                linear.extend(c.rows(n))
            elif c.kind is ConstraintClass.LINEAR:
                linear.extend(_split_zero_row(c))
        eq = [c for c in linear if c.sense == "eq"]
        self.ge = [c for c in linear if c.sense == "ge"]
        self.bilinear = [c for c in constraints if c.kind is ConstraintClass.BILINEAR]
        self.A_eq = np.vstack([c.coef for c in eq] + [np.ones(n)])
        self.b_eq = np.r_[[c.rhs for c in eq], 1.0]
        self._pinv = np.linalg.pinv(self.A_eq)
        self.directions = _moves(null_space(self.A_eq))

    def affine(self, X):
        return X - (X @ self.A_eq.T - self.b_eq) @ self._pinv.T

    def step(self, X):
        X = np.clip(X, 0, None)
        for c in self.ge:
            r = X @ c.coef - c.rhs
            viol = r < 0
            if viol.any():
                X[viol] -= np.outer(r[viol] / (c.coef @ c.coef), c.coef)
        for c in self.bilinear:
            r, g = _bilinear_parts(c, X)
            if c.sense == "ge":
                r = np.minimum(r, 0)
            norm = (g * g).sum(axis=1)
            move = (norm > 0) & (r != 0)
            X[move] -= (r[move] / norm[move])[:, None] * g[move]
        return self.affine(X)

    def feasible(self, X, tol):
        ok = X.min(axis=1) >= -tol
        ok &= np.all(np.abs(X @ self.A_eq.T - self.b_eq) <= tol, axis=1)
        for c in self.ge:
            ok &= X @ c.coef - c.rhs >= -tol
        for c in self.bilinear:
            r, _ = _bilinear_parts(c, X)
            ok &= np.abs(r) <= tol if c.sense == "eq" else r >= -tol
        return ok

    def project(self, X, tol):
        """
        Alternate over the orthant, the inequality rows, the bilinear
        constraints and the affine hull; rows stop moving once feasible.
        Returns the points that end up feasible, clipped and renormalized.
        """
        X = np.array(X, dtype=np.float64)
        active = np.ones(X.shape[0], dtype=bool)
        for _ in range(MAX_PROJECTIONS):
            X[active] = self.step(X[active])
            idx = np.flatnonzero(active)
            active[idx[self.feasible(X[idx], tol)]] = False
            if not active.any():
                break
        X = np.clip(X, 0, None)
        sums = X.sum(axis=1)
        good = sums > 0
        X[good] /= sums[good][:, None]
        return X[good & self.feasible(X, tol)]


def _sample_simplex(rng, k, n):
    "Uniform points of the simplex from normalized exponential spacings."
    E = rng.standard_exponential((k, n))
    return E / E.sum(axis=1, keepdims=True)


def _refine(point, sign, term, table, proj, cfg):
    """
    Pattern search along the equality-preserving directions, halving the
    step whenever a sweep finds nothing better.
    """
    best = point
    best_v = evaluate_batch(point, table, term)[0]
    delta = 0.1
    dirs = np.vstack([proj.directions, -proj.directions])
    if dirs.size == 0:
        return best, best_v
    for _ in range(cfg.refine_steps):
        cand = best + delta * dirs
        if proj.bilinear:
            cand = proj.project(cand, cfg.tol)
        else:
            cand = cand[(cand.min(axis=1) >= 0) & proj.feasible(cand, cfg.tol)]
        improved = False
        if cand.shape[0]:
            vals = evaluate_batch(cand, table, term)
            vals = np.where(np.isnan(vals), -sign * np.inf, vals)
            i = np.argmax(sign * vals)
            if sign * vals[i] > sign * best_v:
                best, best_v = cand[i], vals[i]
                improved = True
        if not improved:
            delta /= 2
            if delta < 1e-12:
                break
    return best, best_v


def oracle_bounds(program, cfg=None, eps_cond=DEFAULT_EPS_COND):
    """
    Sampled bounds for every query of `program`, as OracleResults in program
    order. Intervals are INNER_APPROX; when no sample lands on the constraint
    set the interval is None and the message says so.
    """
    cfg = cfg or OracleConfig()
    table = program.events
    if table.n > ORACLE_MAX_EVENTS:
        raise EventLimitError(
            f"the oracle handles at most {ORACLE_MAX_EVENTS} events, got {table.n}"
        )
    n = table.n_atoms
    proj = _Projector(normalize_all(program.declarations, table, eps_cond), n)

    kept = []
    n_batches = -(-cfg.samples // cfg.batch_size)
    for b in tqdm(range(n_batches), desc="Sampling", disable=not cfg.progress):
        size = min(cfg.batch_size, cfg.samples - b * cfg.batch_size)
        rng = np.random.default_rng([cfg.seed, b])
        kept.append(proj.project(_sample_simplex(rng, size, n), cfg.tol))
    points = np.vstack(kept)
    accepted = points.shape[0]

    if accepted < MIN_ACCEPT_RATE * cfg.samples:
        warnings.warn(
            f"only {accepted} of {cfg.samples} samples satisfied the constraints",
            RuntimeWarning,
        )

    results = []
    for q in program.queries:
        if not accepted:
            results.append(OracleResult(q, None, 0, "no feasible sample found"))
            continue
        canon = CoeffTerm(q.family, q.args)
        vals = evaluate_batch(points, table, canon)
        defined = ~np.isnan(vals)
        if not defined.any():
            results.append(
                OracleResult(
                    q,
                    Interval.undefined("query is undefined at every sample"),
                    accepted,
                    "",
                )
            )
            continue
        idx = np.flatnonzero(defined)
        i_lo = idx[np.argmin(vals[idx])]
        i_hi = idx[np.argmax(vals[idx])]
        _, lo = _refine(points[i_lo], -1, canon, table, proj, cfg)
        _, hi = _refine(points[i_hi], 1, canon, table, proj, cfg)
        interval = Interval(
            float(lo), float(hi), IntervalStatus.INNER_APPROX
        ).converted(canon.range, q.range)
        results.append(OracleResult(q, interval, accepted, ""))
    return results
