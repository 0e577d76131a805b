"""
The product partition of N named events.

Atoms are the 2^N conjunctions of every event or its negation. Atom ``a``
is encoded by its index: the event at table position ``i`` is true in atom
``a`` iff bit ``n - 1 - i`` of ``a`` is set, so the binary spelling of an
atom index lists the events in table order (with events [A, B], atom 0b10
is A & -B).
"""
from dataclasses import dataclass
import re

import numpy as np

from .errors import DimensionError, DomainError, EventLimitError, UnknownEventError


MAX_EVENTS = 16
SUM_TOL = 1e-9

_name_re = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class EventTable:
    def __init__(self, names):
        names = tuple(names)
        if not 1 <= len(names) <= MAX_EVENTS:
            raise EventLimitError(
                f"need between 1 and {MAX_EVENTS} events, got {len(names)}"
            )
        seen = set()
        for name in names:
            if not isinstance(name, str) or not _name_re.match(name):
                raise DomainError(f"bad event name {name!r}")
            if name in seen:
                raise DomainError(f"duplicate event name {name!r}")
            seen.add(name)

        self.names = names
        self._index = {name: i for i, name in enumerate(names)}
        self._columns = None

    @classmethod
    def default(cls, n):
        "Events named A, B, C, ..."
        if not 1 <= n <= MAX_EVENTS:
            raise EventLimitError(f"need between 1 and {MAX_EVENTS} events, got {n}")
        return cls([chr(ord("A") + i) for i in range(n)])

    @property
    def n(self):
        return len(self.names)

    @property
    def n_atoms(self):
        return 1 << len(self.names)

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._index

    def __eq__(self, other):
        return isinstance(other, EventTable) and self.names == other.names

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"EventTable({list(self.names)!r})"

    def index(self, name):
        try:
            return self._index[name]
        except KeyError:
            raise UnknownEventError(name) from None

    def bit(self, name):
        "Position of the bit encoding `name` within an atom index."
        return self.n - 1 - self.index(name)

    def columns(self):
        """
        Truth value of every event at every atom, as a dict of read-only
        boolean arrays of length 2^n.
        """
        if self._columns is None:
            atoms = np.arange(self.n_atoms)
            cols = {}
            for i, name in enumerate(self.names):
                col = ((atoms >> (self.n - 1 - i)) & 1).astype(bool)
                col.flags.writeable = False
                cols[name] = col
            self._columns = cols
        return self._columns

    def atom_label(self, atom):
        parts = []
        for i, name in enumerate(self.names):
            on = (atom >> (self.n - 1 - i)) & 1
            parts.append(name if on else f"-{name}")
        return " & ".join(parts)


################################################################################
### Boolean expressions

# binding strength, loosest first
_PREC_OR, _PREC_XOR, _PREC_AND, _PREC_NOT, _PREC_ATOM = range(1, 6)


class BoolExpr:
    "Base for expression trees over event names; build them with ~ & | ^."

    prec = _PREC_ATOM

    def __invert__(self):
        return Not(self)

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)

    def __xor__(self, other):
        return Xor(self, other)

    def leaves(self):
        "Event names in left-to-right order, with repeats."
        raise NotImplementedError()

    def events(self):
        return frozenset(self.leaves())

    def evaluate(self, columns):
        raise NotImplementedError()

    def __str__(self):
        return self._fmt(0)

    def _fmt(self, outer):
        s = self._fmt_inner()
        return f"({s})" if self.prec < outer else s


@dataclass(frozen=True, eq=True)
class Event(BoolExpr):
    name: str

    def leaves(self):
        yield self.name

    def evaluate(self, columns):
        return columns[self.name]

    def _fmt_inner(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Const(BoolExpr):
    value: bool

    def leaves(self):
        return iter(())

    def evaluate(self, columns):
        n_atoms = len(next(iter(columns.values())))
        return np.full(n_atoms, self.value)

    def _fmt_inner(self):
        return "TRUE" if self.value else "FALSE"


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True, eq=True)
class Not(BoolExpr):
    arg: BoolExpr
    prec = _PREC_NOT

    def leaves(self):
        return self.arg.leaves()

    def evaluate(self, columns):
        return ~self.arg.evaluate(columns)

    def _fmt_inner(self):
        return "-" + self.arg._fmt(_PREC_NOT)


class _Binary(BoolExpr):
    symbol = None

    def leaves(self):
        yield from self.left.leaves()
        yield from self.right.leaves()

    def _fmt_inner(self):
        # left-associative; a right operand of equal strength keeps its parens
        left = self.left._fmt(self.prec)
        right = self.right._fmt(self.prec + 1)
        return f"{left} {self.symbol} {right}"


@dataclass(frozen=True, eq=True)
class And(_Binary):
    left: BoolExpr
    right: BoolExpr
    prec = _PREC_AND
    symbol = "&"

    def evaluate(self, columns):
        return self.left.evaluate(columns) & self.right.evaluate(columns)


@dataclass(frozen=True, eq=True)
class Or(_Binary):
    left: BoolExpr
    right: BoolExpr
    prec = _PREC_OR
    symbol = "or"

    def evaluate(self, columns):
        return self.left.evaluate(columns) | self.right.evaluate(columns)


@dataclass(frozen=True, eq=True)
class Xor(_Binary):
    left: BoolExpr
    right: BoolExpr
    prec = _PREC_XOR
    symbol = "^"

    def evaluate(self, columns):
        return self.left.evaluate(columns) ^ self.right.evaluate(columns)


def as_expr(e):
    "Lets event names stand in for expressions."
    if isinstance(e, BoolExpr):
        return e
    if isinstance(e, str):
        return Event(e)
    raise TypeError(f"can't make an expression out of {e!r}")


def atoms_of(expr, table):
    """
    The AtomMask of `expr`: a read-only boolean array of length 2^n whose
    entry a is set iff `expr` holds at atom a.
    """
    expr = as_expr(expr)
    for name in expr.leaves():
        if name not in table:
            raise UnknownEventError(name, f"unknown event {name!r} in {expr}")
    mask = np.array(expr.evaluate(table.columns()), dtype=bool)
    if mask.shape != (table.n_atoms,):
        mask = np.broadcast_to(mask, (table.n_atoms,)).copy()
    mask.flags.writeable = False
    return mask


################################################################################
### Distributions


class Distribution:
    """
    Probabilities of the 2^n atoms. Inputs summing to 1 within SUM_TOL are
    divided by their actual sum; anything else is rejected.
    """

    def __init__(self, p, table=None):
        p = np.array(p, dtype=np.float64)
        if p.ndim != 1 or p.size < 2 or p.size & (p.size - 1):
            raise DimensionError(
                f"a distribution needs 2^n entries, got shape {p.shape}"
            )
        if table is None:
            table = EventTable.default(p.size.bit_length() - 1)
        elif table.n_atoms != p.size:
            raise DimensionError(
                f"{p.size} probabilities don't fit {table.n} events "
                f"({table.n_atoms} atoms)"
            )

        if not np.all(np.isfinite(p)):
            raise DomainError("distribution entries must be finite")
        neg = np.flatnonzero(p < 0)
        if neg.size:
            raise DomainError(
                f"negative probability {p[neg[0]]!r} at atom "
                f"{table.atom_label(neg[0])}"
            )
        total = p.sum()
        if abs(total - 1) > SUM_TOL:
            raise DomainError(f"probabilities sum to {total!r}, not 1")
        p /= total
        p.flags.writeable = False

        self.p = p
        self.table = table

    @property
    def n(self):
        return self.table.n

    def __len__(self):
        return self.p.size

    def __repr__(self):
        return f"Distribution({self.p.tolist()!r}, {self.table!r})"

    def prob_of(self, expr):
        return prob(self, atoms_of(expr, self.table))

    def atom_labels(self):
        return [self.table.atom_label(a) for a in range(self.p.size)]


def prob(dist, mask):
    "Sum of the atom probabilities selected by `mask`."
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != dist.p.shape:
        raise DimensionError(
            f"mask of length {mask.size} against {dist.p.size} atoms"
        )
    return float(dist.p[mask].sum())


def dist_from_2x2(x, y, z, w):
    """
    The distribution over events [A, B] with P(A & B) = x, P(A & -B) = y,
    P(-A & B) = z and P(-A & -B) = w.
    """
    cells = {"x": x, "y": y, "z": z, "w": w}
    for k, v in cells.items():
        if not v >= 0:
            raise DomainError(f"{k} = {v!r} is not a nonnegative probability")
    total = x + y + z + w
    if abs(total - 1) > SUM_TOL:
        raise DomainError(f"x + y + z + w = {total!r}, not 1")
    return Distribution([w, z, y, x], EventTable(["A", "B"]))


def product_distribution(marginals, table=None):
    "The distribution making all events independent with the given marginals."
    m = np.asarray(marginals, dtype=np.float64)
    if table is None:
        table = EventTable.default(m.size)
    elif table.n != m.size:
        raise DimensionError(f"{m.size} marginals for {table.n} events")
    if np.any((m < 0) | (m > 1)):
        raise DomainError(f"marginals must lie in [0, 1], got {m.tolist()}")

    p = np.ones(table.n_atoms)
    for name, mi in zip(table.names, m):
        p *= np.where(table.columns()[name], mi, 1 - mi)
    return Distribution(p, table)
