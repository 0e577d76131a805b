"""
User declarations (coefficient assertions, event definitions, exchangeable
blocks) and their normal form as constraints on atom probabilities.

Every coefficient is a ratio of forms over the atom vector p, with the
blocks x, y, z, w of its two arguments:

    P(a)            a                     linear
    O(a)            a / -a                linear ratio
    P(a|b)          x / (x + z)           linear ratio
    O(a|b)          x / z                 linear ratio
    F(a|b)          y / z                 linear ratio
    F(a:b)          P(a) / P(b)           linear ratio
    Q(a|b)          x w / (y z)           bilinear ratio
    Q(a:b)          x (y + w) / (y (x + z))  bilinear ratio

so `ratio = c` becomes `num - c den = 0`, linear or bilinear accordingly.
"""
from collections import namedtuple
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .coefficients import CoeffTerm, Family, RangeType, convert, format_value
from .errors import DefinitionCycleError, DomainError
from .partition import And, Event, Not, Xor, as_expr, atoms_of


DEFAULT_EPS_COND = 1e-9


################################################################################
### Declarations


@dataclass(frozen=True)
class Eq:
    value: float

    @property
    def bounds(self):
        return self.value, self.value

    def __str__(self):
        return f"= {format_value(self.value)}"


@dataclass(frozen=True)
class In:
    lo: float
    hi: float

    @property
    def bounds(self):
        return self.lo, self.hi

    def __str__(self):
        return f"in [{format_value(self.lo)}, {format_value(self.hi)}]"


@dataclass(frozen=True)
class CoeffAssert:
    term: CoeffTerm
    relation: object

    def __post_init__(self):
        lo, hi = self.relation.bounds
        rng = self.term.range
        for v in (lo, hi):
            if not rng.contains(v):
                raise DomainError(
                    f"{format_value(v)} is outside the {rng.value}-type range "
                    f"of {self.term}"
                )
        if lo > hi:
            raise DomainError(f"empty interval [{lo}, {hi}] for {self.term}")

    def __str__(self):
        return f"assert {self.term} {self.relation}"


@dataclass(frozen=True)
class BoolDefine:
    event: str
    expr: object

    def __post_init__(self):
        object.__setattr__(self, "expr", as_expr(self.expr))

    def __str__(self):
        return f"define {self.event} = {self.expr}"


@dataclass(frozen=True)
class ExchBlock:
    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        if len(set(events)) != len(events):
            raise DomainError(f"repeated event in exchangeable block {events}")
        if len(events) < 2:
            raise DomainError("an exchangeable block needs at least two events")
        object.__setattr__(self, "events", events)

    def __str__(self):
        return "exchangeable " + ", ".join(self.events)


################################################################################
### Atom-level constraints


class ConstraintClass(Enum):
    LINEAR = "linear"
    BILINEAR = "bilinear"
    TIE = "tie"


class LinearConstraint:
    "coef . p == rhs, or coef . p >= rhs."

    kind = ConstraintClass.LINEAR

    def __init__(self, coef, sense, rhs, origin="", guard=False):
        if sense not in {"eq", "ge"}:
            raise ValueError(f"bad sense {sense!r}")
        self.coef = np.asarray(coef, dtype=np.float64)
        self.coef.flags.writeable = False
        self.sense = sense
        self.rhs = float(rhs)
        self.origin = origin
        self.guard = guard

    def residual(self, p):
        "Works on one point or on a stack of points (one per row)."
        return np.asarray(p) @ self.coef - self.rhs

    def satisfied(self, p, tol):
        r = self.residual(p)
        return np.abs(r) <= tol if self.sense == "eq" else r >= -tol

    def _key(self):
        return (self.coef.tobytes(), self.sense, self.rhs)

    def __eq__(self, other):
        return isinstance(other, LinearConstraint) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        op = "==" if self.sense == "eq" else ">="
        return f"<linear {op} {self.rhs!r} from {self.origin!r}>"


class BilinearConstraint:
    "(l1 . p)(l2 . p) - k (l3 . p)(l4 . p) == 0, or >= 0."

    kind = ConstraintClass.BILINEAR

    def __init__(self, l1, l2, l3, l4, k, sense, origin=""):
        if sense not in {"eq", "ge"}:
            raise ValueError(f"bad sense {sense!r}")
        self.forms = tuple(np.asarray(l, dtype=np.float64) for l in (l1, l2, l3, l4))
        for f in self.forms:
            f.flags.writeable = False
        self.k = float(k)
        self.sense = sense
        self.origin = origin

    def residual(self, p):
        l1, l2, l3, l4 = (np.asarray(p) @ f for f in self.forms)
        return l1 * l2 - self.k * l3 * l4

    def gradient(self, p):
        f1, f2, f3, f4 = self.forms
        l1, l2, l3, l4 = (np.asarray(p) @ f for f in self.forms)
        return l2 * f1 + l1 * f2 - self.k * (l4 * f3 + l3 * f4)

    def satisfied(self, p, tol):
        r = self.residual(p)
        return np.abs(r) <= tol if self.sense == "eq" else r >= -tol

    def _key(self):
        return tuple(f.tobytes() for f in self.forms) + (self.k, self.sense)

    def __eq__(self, other):
        return isinstance(other, BilinearConstraint) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        op = "==" if self.sense == "eq" else ">="
        return f"<bilinear {op} 0 from {self.origin!r}>"


class AtomTie:
    """
    All of `atoms` carry the same probability. Linear, but kept as an index
    set: solvers merge tied atoms into one variable instead of writing
    pairwise difference rows over every atom.
    """

    kind = ConstraintClass.TIE

    def __init__(self, atoms, origin=""):
        self.atoms = np.asarray(sorted(set(int(a) for a in atoms)), dtype=np.intp)
        if self.atoms.size < 2:
            raise ValueError("a tie needs at least two atoms")
        self.atoms.flags.writeable = False
        self.origin = origin

    def residual(self, p):
        "Differences from the first tied atom; one column per other atom."
        p = np.asarray(p)
        return p[..., self.atoms[1:]] - p[..., self.atoms[:1]]

    def satisfied(self, p, tol):
        return np.all(np.abs(self.residual(p)) <= tol, axis=-1)

    def rows(self, n_atoms):
        "The tie as dense pairwise equalities, for small atom counts."
        out = []
        for atom in self.atoms[1:]:
            coef = np.zeros(n_atoms)
            coef[self.atoms[0]] = 1
            coef[atom] = -1
            out.append(LinearConstraint(coef, "eq", 0, self.origin))
        return out

    def __eq__(self, other):
        return isinstance(other, AtomTie) and np.array_equal(self.atoms, other.atoms)

    def __hash__(self):
        return hash(self.atoms.tobytes())

    def __repr__(self):
        return f"<tie of {self.atoms.size} atoms from {self.origin!r}>"


class AtomGroups:
    """
    The partition of atoms induced by a set of ties, overlapping ones merged.
    A point p over atoms with every tie holding is expand(q) for the vector q
    of per-group values, and l . p == aggregate(l) . q for any form l.
    """

    def __init__(self, ties, n_atoms):
        self.n_atoms = n_atoms
        ties = list(ties)
        if ties:
            src = np.concatenate([np.repeat(t.atoms[0], t.atoms.size - 1) for t in ties])
            dst = np.concatenate([t.atoms[1:] for t in ties])
            graph = sparse.coo_matrix(
                (np.ones(src.size), (src, dst)), shape=(n_atoms, n_atoms)
            )
            self.n_groups, self.labels = connected_components(graph, directed=False)
        else:
            self.n_groups, self.labels = n_atoms, np.arange(n_atoms)
        self.trivial = self.n_groups == n_atoms
        self.sizes = np.bincount(self.labels, minlength=self.n_groups).astype(
            np.float64
        )
        # first atom of every group
        self.representatives = np.full(self.n_groups, n_atoms, dtype=np.intp)
        np.minimum.at(self.representatives, self.labels, np.arange(n_atoms))

    @classmethod
    def of(cls, constraints, n_atoms):
        return cls([c for c in constraints if c.kind is ConstraintClass.TIE], n_atoms)

    def aggregate(self, v):
        "Sums the atom columns of a form (or a stack of forms) per group."
        v = np.asarray(v, dtype=np.float64)
        if self.trivial:
            return v
        if v.ndim == 1:
            return np.bincount(self.labels, weights=v, minlength=self.n_groups)
        out = np.zeros(v.shape[:-1] + (self.n_groups,))
        np.add.at(out.T, self.labels, v.T)
        return out

    def expand(self, q):
        q = np.asarray(q, dtype=np.float64)
        return q if self.trivial else q[..., self.labels]

    def restrict(self, p):
        "Per-group values of a point whose ties already hold."
        p = np.asarray(p, dtype=np.float64)
        return p if self.trivial else p[..., self.representatives]


ConstraintSummary = namedtuple(
    "ConstraintSummary", ["n_linear", "n_bilinear", "n_guards"]
)


def classify(constraints):
    """
    Counts by class; positivity guards on conditioning events are counted
    apart, ties count as linear.
    """
    n_guard = sum(1 for c in constraints if getattr(c, "guard", False))
    n_bil = sum(1 for c in constraints if c.kind is ConstraintClass.BILINEAR)
    return ConstraintSummary(len(constraints) - n_bil - n_guard, n_bil, n_guard)


################################################################################
### Forms


Forms = namedtuple("Forms", ["kind", "num", "den"])


def _vec(expr, table):
    return atoms_of(expr, table).astype(np.float64)


def coefficient_forms(term, table):
    """
    The numerator and denominator of `term`'s canonical-range value:
    kind "linear" (num only), "ratio" (two vectors) or "bilinear" (two pairs
    of vectors whose products are the numerator and denominator).
    """
    fam = term.family
    a = term.args[0]
    if fam is Family.P:
        return Forms("linear", _vec(a, table), None)
    if fam is Family.O:
        return Forms("ratio", _vec(a, table), _vec(Not(a), table))

    b = term.args[1]
    x = _vec(And(a, b), table)
    y = _vec(And(a, Not(b)), table)
    z = _vec(And(Not(a), b), table)
    w = _vec(And(Not(a), Not(b)), table)
    if fam is Family.COND_P:
        return Forms("ratio", x, x + z)
    if fam is Family.COND_O:
        return Forms("ratio", x, z)
    if fam is Family.F_ODDS:
        return Forms("ratio", y, z)
    if fam is Family.F_PROB:
        return Forms("ratio", x + y, x + z)
    if fam is Family.Q_ODDS:
        return Forms("bilinear", (x, w), (y, z))
    if fam is Family.Q_PROB:
        return Forms("bilinear", (x, y + w), (y, x + z))
    raise ValueError(f"unknown family {fam!r}")


def conditioning_events(term):
    "Events a ratio family conditions on; each must keep positive probability."
    fam = term.family
    if fam in {Family.P, Family.O}:
        return []
    a, b = term.args
    if fam in {Family.COND_P, Family.COND_O}:
        return [b]
    if fam in {Family.Q_ODDS, Family.Q_PROB}:
        return [b, Not(b)]
    return [a, b]


################################################################################
### Normalization


def normalize(decl, table, eps_cond=DEFAULT_EPS_COND):
    "The atom-level constraints equivalent to one declaration."
    if isinstance(decl, CoeffAssert):
        return _normalize_assert(decl, table, eps_cond)
    if isinstance(decl, BoolDefine):
        return define_event(decl.event, decl.expr, table)
    if isinstance(decl, ExchBlock):
        return expand_exchangeable(decl, table)
    raise TypeError(f"not a declaration: {decl!r}")


def normalize_all(decls, table, eps_cond=DEFAULT_EPS_COND):
    out = []
    for d in decls:
        out.extend(normalize(d, table, eps_cond))
    return out


def _normalize_assert(decl, table, eps_cond):
    term = decl.term
    origin = str(decl)
    canon = term.family.canonical_range
    lo, hi = (convert(v, term.range, canon) for v in decl.relation.bounds)
    is_eq = isinstance(decl.relation, Eq)

    if term.family is Family.O:
        # O(a) = c is P(a) = c / (1 + c)
        lo, hi = (convert(v, RangeType.O, RangeType.P) for v in (lo, hi))
        forms = Forms("linear", _vec(term.args[0], table), None)
    else:
        forms = coefficient_forms(term, table)

    out = []
    if forms.kind == "linear":
        if is_eq:
            out.append(LinearConstraint(forms.num, "eq", lo, origin))
        else:
            out.append(LinearConstraint(forms.num, "ge", lo, origin))
            out.append(LinearConstraint(-forms.num, "ge", -hi, origin))

    elif forms.kind == "ratio":
        N, D = forms.num, forms.den
        if lo == np.inf:
            out.append(LinearConstraint(D, "eq", 0, origin))
        elif is_eq:
            out.append(LinearConstraint(N - lo * D, "eq", 0, origin))
        else:
            out.append(LinearConstraint(N - lo * D, "ge", 0, origin))
            if hi < np.inf:
                out.append(LinearConstraint(hi * D - N, "ge", 0, origin))

    else:
        (n1, n2), (d1, d2) = forms.num, forms.den
        if lo == np.inf:
            out.append(BilinearConstraint(d1, d2, d1, d2, 0.0, "eq", origin))
        elif is_eq:
            out.append(BilinearConstraint(n1, n2, d1, d2, lo, "eq", origin))
        else:
            out.append(BilinearConstraint(n1, n2, d1, d2, lo, "ge", origin))
            if hi < np.inf:
                out.append(BilinearConstraint(hi * d1, d2, n1, n2, 1.0, "ge", origin))

    for g in conditioning_events(term):
        out.append(
            LinearConstraint(
                _vec(g, table),
                "ge",
                eps_cond,
                f"{origin} (guard P({g}) >= {eps_cond:g})",
                guard=True,
            )
        )
    return out


def define_event(name, expr, table):
    """
    Pin event `name` to `expr`: the atoms where the two disagree carry no
    mass. That is one row, whose support the LP presolve drops outright.
    """
    expr = as_expr(expr)
    table.index(name)
    if name in expr.events():
        raise DefinitionCycleError(f"definition of {name} refers to {name}: {expr}")

    origin = f"define {name} = {expr}"
    disagree = atoms_of(Xor(Event(name), expr), table)
    return [LinearConstraint(disagree.astype(np.float64), "eq", 0, origin)]


def exchangeable_classes(events, table):
    """
    Atoms grouped into orbits under permutations of the block's bits:
    same bits outside the block, same number of true block events.
    """
    block_bits = 0
    for name in events:
        block_bits |= 1 << table.bit(name)

    classes = {}
    for atom in range(table.n_atoms):
        inside = atom & block_bits
        key = (atom & ~block_bits, bin(inside).count("1"))
        classes.setdefault(key, []).append(atom)
    return list(classes.values())


def expand_exchangeable(block, table):
    "P(atom) equal across each orbit: one tie per orbit of two or more atoms."
    origin = str(block)
    return [
        AtomTie(cls, origin)
        for cls in exchangeable_classes(block.events, table)
        if len(cls) > 1
    ]
