"""
Coefficients of relation between events, evaluated on a Distribution, and
conversions among their probability (P), odds (O) and symmetric (S) ranges.

Extended values: a ratio with a zero denominator is +inf when the numerator
is positive and UNDEFINED (NaN) when it is zero too.

For a pair of expressions (a, b) the four blocks are

    x = P(a & b),  y = P(a & -b),  z = P(-a & b),  w = P(-a & -b)

and the families are

    P(a|b)  = x / (x + z)                    conditional probability
    O(a|b)  = x / z                          conditional odds
    Q(a|b)  = x w / (y z)                    Quetelet odds ratio
    Q(a:b)  = P(a|b) / P(a|-b)               Quetelet probability ratio
    F(a|b)  = O(a|b) / O(b|a) = y / z        de Finetti odds ratio
    F(a:b)  = P(a|b) / P(b|a)                de Finetti probability ratio
"""
from dataclasses import dataclass
from enum import Enum
import math

import numpy as np

from .errors import DomainError
from .partition import Not, as_expr, atoms_of


UNDEFINED = math.nan
INF = math.inf


def is_undefined(v):
    return isinstance(v, float) and math.isnan(v)


class RangeType(Enum):
    P = "P"  # zero to one
    O = "O"  # zero to infinity
    S = "S"  # minus one to plus one

    @property
    def domain(self):
        return _domains[self]

    def contains(self, v):
        lo, hi = self.domain
        return lo <= v <= hi


_domains = {
    RangeType.P: (0.0, 1.0),
    RangeType.O: (0.0, INF),
    RangeType.S: (-1.0, 1.0),
}


class Family(Enum):
    P = "P"
    O = "O"
    COND_P = "CondP"
    COND_O = "CondO"
    Q_ODDS = "QOdds"
    Q_PROB = "QProb"
    F_ODDS = "FOdds"
    F_PROB = "FProb"

    @property
    def symbol(self):
        return _family_info[self][0]

    @property
    def separator(self):
        return _family_info[self][1]

    @property
    def arity(self):
        return 1 if self.separator is None else 2

    @property
    def canonical_range(self):
        return _family_info[self][2]

    @property
    def ranges(self):
        "Ranges a coefficient of this family can be stated in."
        if self.symbol in {"Q", "F"}:
            return (RangeType.O, RangeType.S)
        return (self.canonical_range,)

    @property
    def name_long(self):
        return _family_info[self][3]

    @classmethod
    def lookup(cls, symbol, separator=None):
        for fam, (sym, sep, _, _) in _family_info.items():
            if sym == symbol and sep == separator:
                return fam
        raise KeyError((symbol, separator))


_family_info = {
    Family.P: ("P", None, RangeType.P, "probability"),
    Family.O: ("O", None, RangeType.O, "odds"),
    Family.COND_P: ("P", "|", RangeType.P, "conditional probability"),
    Family.COND_O: ("O", "|", RangeType.O, "conditional odds"),
    Family.Q_ODDS: ("Q", "|", RangeType.O, "Quetelet odds ratio"),
    Family.Q_PROB: ("Q", ":", RangeType.O, "Quetelet probability ratio"),
    Family.F_ODDS: ("F", "|", RangeType.O, "de Finetti odds ratio"),
    Family.F_PROB: ("F", ":", RangeType.O, "de Finetti probability ratio"),
}


@dataclass(frozen=True)
class CoeffTerm:
    "A coefficient of some family over some expressions, stated in some range."

    family: Family
    args: tuple
    range: RangeType = None

    def __post_init__(self):
        args = tuple(as_expr(a) for a in self.args)
        if len(args) != self.family.arity:
            raise DomainError(
                f"{self.family.name_long} takes {self.family.arity} "
                f"argument(s), got {len(args)}"
            )
        rng = self.family.canonical_range if self.range is None else self.range
        if rng not in self.family.ranges:
            raise DomainError(
                f"{self.family.name_long} can't be stated in the {rng.value} range"
            )
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "range", rng)

    @property
    def symbol(self):
        s = self.family.symbol
        return s + "S" if self.range is RangeType.S else s

    def __str__(self):
        inner = str(self.args[0])
        if self.family.separator is not None:
            inner += f"{self.family.separator}{self.args[1]}"
        return f"{self.symbol}({inner})"


@dataclass(frozen=True)
class Coefficient:
    term: CoeffTerm
    value: float

    @property
    def family(self):
        return self.term.family

    @property
    def args(self):
        return self.term.args

    @property
    def range(self):
        return self.term.range

    def __str__(self):
        return f"{self.term} = {format_value(self.value)}"


def term(family, *args, range=None):
    return CoeffTerm(family, args, range)


def format_value(v, digits=12):
    if is_undefined(v):
        return "undef"
    if v == INF:
        return "inf"
    if v == -INF:
        return "-inf"
    return f"{v:.{digits}g}"


################################################################################
### Extended arithmetic


def ratio(num, den):
    if den > 0:
        return num / den
    if num > 0:
        return INF
    return UNDEFINED


def ext_div(a, b):
    "Division of extended nonnegative values."
    if math.isnan(a) or math.isnan(b):
        return UNDEFINED
    if math.isinf(a):
        return UNDEFINED if math.isinf(b) else INF
    if math.isinf(b):
        return 0.0
    return ratio(a, b)


################################################################################
### Families


def blocks(dist, a, b):
    "The four block probabilities (x, y, z, w) of the pair (a, b)."
    ma = atoms_of(a, dist.table)
    mb = atoms_of(b, dist.table)
    p = dist.p
    return (
        float(p[ma & mb].sum()),
        float(p[ma & ~mb].sum()),
        float(p[~ma & mb].sum()),
        float(p[~ma & ~mb].sum()),
    )


def prob_event(dist, a):
    return dist.prob_of(a)


def odds(dist, a):
    pa = dist.prob_of(a)
    return ratio(pa, dist.prob_of(Not(as_expr(a))))


def cond_p(dist, a, b):
    x, y, z, w = blocks(dist, a, b)
    return ratio(x, x + z)


def cond_o(dist, a, b):
    x, y, z, w = blocks(dist, a, b)
    return ratio(x, z)


def q_odds(dist, a, b):
    x, y, z, w = blocks(dist, a, b)
    return ratio(x * w, y * z)


def q_prob(dist, a, b):
    x, y, z, w = blocks(dist, a, b)
    return ext_div(ratio(x, x + z), ratio(y, y + w))


def f_odds(dist, a, b):
    x, y, z, w = blocks(dist, a, b)
    return ratio(y, z)


def f_prob(dist, a, b):
    x, y, z, w = blocks(dist, a, b)
    return ext_div(ratio(x, x + z), ratio(x, x + y))


_evaluators = {
    Family.P: prob_event,
    Family.O: odds,
    Family.COND_P: cond_p,
    Family.COND_O: cond_o,
    Family.Q_ODDS: q_odds,
    Family.Q_PROB: q_prob,
    Family.F_ODDS: f_odds,
    Family.F_PROB: f_prob,
}


def evaluate(dist, term):
    "Value of `term` on `dist`, in the term's own range."
    v = _evaluators[term.family](dist, *term.args)
    if term.range is not term.family.canonical_range:
        v = convert(v, term.family.canonical_range, term.range)
    return v


def _ratio_v(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(den > 0, num / den, np.where(num > 0, INF, UNDEFINED))


def _ext_div_v(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = _ratio_v(a, b)
        out = np.where(np.isinf(b), 0.0, out)
        out = np.where(np.isinf(a), np.where(np.isinf(b), UNDEFINED, INF), out)
        return np.where(np.isnan(a) | np.isnan(b), UNDEFINED, out)


def _f(mask):
    return mask.astype(np.float64)


def evaluate_batch(points, table, term):
    """
    `evaluate` for a stack of atom vectors (one per row), same extended
    semantics; returns an array with one value per row.
    """
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    fam = term.family
    a = term.args[0]
    if fam in {Family.P, Family.O}:
        pa = P @ _f(atoms_of(a, table))
        v = pa if fam is Family.P else _ratio_v(pa, P @ _f(atoms_of(Not(a), table)))
    else:
        ma = atoms_of(a, table)
        mb = atoms_of(term.args[1], table)
        x, y = P @ _f(ma & mb), P @ _f(ma & ~mb)
        z, w = P @ _f(~ma & mb), P @ _f(~ma & ~mb)
        if fam is Family.COND_P:
            v = _ratio_v(x, x + z)
        elif fam is Family.COND_O:
            v = _ratio_v(x, z)
        elif fam is Family.Q_ODDS:
            v = _ratio_v(x * w, y * z)
        elif fam is Family.Q_PROB:
            v = _ext_div_v(_ratio_v(x, x + z), _ratio_v(y, y + w))
        elif fam is Family.F_ODDS:
            v = _ratio_v(y, z)
        else:
            v = _ext_div_v(_ratio_v(x, x + z), _ratio_v(x, x + y))
    if term.range is not fam.canonical_range:
        v = convert(np.clip(v, *fam.canonical_range.domain), fam.canonical_range, term.range)
    return np.asarray(v, dtype=np.float64)


################################################################################
### Ranges


def _check_domain(v, rng):
    lo, hi = rng.domain
    with np.errstate(invalid="ignore"):
        bad = (v < lo) | (v > hi)
    if np.any(bad):
        first = v[bad].flat[0] if v.ndim else v
        raise DomainError(
            f"{float(first)!r} is outside the {rng.value}-type range [{lo}, {hi}]"
        )


def convert(v, from_, to):
    """
    Convert a value (or array of values) between range types:

        P -> O: P / (1 - P)        O -> P: O / (1 + O)
        P -> S: 2 P - 1            S -> P: (S + 1) / 2
        O -> S: (O - 1) / (O + 1)  S -> O: (1 + S) / (1 - S)

    with P = 1 <-> O = inf <-> S = 1. UNDEFINED stays UNDEFINED.
    """
    arr = np.asarray(v, dtype=np.float64)
    _check_domain(arr, from_)

    with np.errstate(divide="ignore", invalid="ignore"):
        # everything goes through P
        if from_ is RangeType.P:
            p = arr
        elif from_ is RangeType.O:
            p = np.where(np.isinf(arr), 1.0, arr / (1 + arr))
        else:
            p = (arr + 1) / 2

        if to is from_:
            out = arr
        elif to is RangeType.P:
            out = p
        elif to is RangeType.O:
            if from_ is RangeType.S:
                out = np.where(arr == 1, INF, (1 + arr) / (1 - arr))
            else:
                out = np.where(p == 1, INF, p / (1 - p))
        else:
            if from_ is RangeType.O:
                out = np.where(np.isinf(arr), 1.0, (arr - 1) / (arr + 1))
            else:
                out = 2 * p - 1

    if out.ndim == 0:
        return float(out)
    return out


def convert_interval(lo, hi, from_, to):
    "Conversions are increasing, so endpoints map to endpoints."
    return convert(lo, from_, to), convert(hi, from_, to)


################################################################################


def coefficient_report(dist, a=None, b=None):
    """
    Every family for the pair (a, b), defaulting to the first two events,
    plus the S-type aliases of the Q and F coefficients.
    """
    names = dist.table.names
    a = as_expr(names[0] if a is None else a)
    if b is None:
        if len(names) < 2:
            raise DomainError("a report needs two events")
        b = names[1]
    b = as_expr(b)
    na, nb = Not(a), Not(b)

    F = Family
    terms = [
        term(F.P, a),
        term(F.P, b),
        term(F.O, a),
        term(F.O, b),
        term(F.COND_P, a, b),
        term(F.COND_P, a, nb),
        term(F.COND_P, b, a),
        term(F.COND_P, b, na),
        term(F.COND_O, a, b),
        term(F.COND_O, a, nb),
        term(F.COND_O, b, a),
        term(F.COND_O, b, na),
        term(F.Q_ODDS, a, b),
        term(F.Q_PROB, a, b),
        term(F.Q_PROB, b, a),
        term(F.F_ODDS, a, b),
        term(F.F_PROB, a, b),
    ]
    s_terms = [
        CoeffTerm(t.family, t.args, RangeType.S)
        for t in terms
        if t.family.symbol in {"Q", "F"}
    ]
    return [Coefficient(t, evaluate(dist, t)) for t in terms + s_terms]
