"""
The constraint-program text format.

    # the screening example
    events T, A;
    assert P(T|A) = 0.003;
    assert P(T|-A) = 0.001;
    query Q(T:A);

Statements end with ";" and "#" starts a comment. Expressions use "-" for
negation, "&" for conjunction, "^" for exclusive or and "or" for
disjunction (loosest to tightest: or, ^, &, -); "|" and ":" separate the
two arguments of a coefficient.
"""
from dataclasses import dataclass, field
import math
import re

from .coefficients import CoeffTerm, Family, RangeType
from .constraints import BoolDefine, CoeffAssert, Eq, ExchBlock, In
from .errors import DomainError, EventLimitError, ParseError
from .partition import And, Const, Event, EventTable, Not, Or, Xor


KEYWORDS = frozenset(
    ["events", "define", "assert", "exchangeable", "query", "in", "or", "inf",
     "TRUE", "FALSE"]
)
FAMILIES = {"P": "P", "O": "O", "Q": "Q", "F": "F", "QS": "Q", "FS": "F"}

_token_re = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[;,=()\[\]|:&^-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # name, number, punct, eof
    text: str
    line: int
    column: int


def tokenize(source):
    tokens = []
    line, line_start = 1, 0
    pos = 0
    while pos < len(source):
        m = _token_re.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(line, col, f"unexpected character {source[pos]!r}", source[pos])
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in {"ws", "comment"}:
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class Program:
    events: EventTable
    declarations: list = field(default_factory=list)
    queries: list = field(default_factory=list)


class _Parser:
    def __init__(self, source, table=None):
        self.tokens = tokenize(source)
        self.pos = 0
        self.table = table

    # token helpers

    @property
    def tok(self):
        return self.tokens[self.pos]

    def error(self, message, tok=None):
        tok = tok or self.tok
        raise ParseError(tok.line, tok.column, message, tok.text or None)

    def at(self, text):
        t = self.tok
        return t.kind in {"punct", "name"} and t.text == text

    def advance(self):
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, text):
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def name(self, what="a name"):
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        return self.advance()

    # statements

    def program(self, require_query=False):
        decls, queries = [], []
        if self.tok.kind == "eof":
            self.error("empty program: expected an events statement")
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind != "name" or t.text not in KEYWORDS:
                self.error(f"expected a statement, found {t.text!r}")
            if t.text == "events":
                if self.table is not None:
                    self.error("events already declared")
                self.table = self.events()
            elif self.table is None:
                self.error("the first statement must declare the events")
            elif t.text == "define":
                decls.append(self.define())
            elif t.text == "assert":
                decls.append(self.assertion())
            elif t.text == "exchangeable":
                decls.append(self.exchangeable())
            elif t.text == "query":
                self.advance()
                queries.append(self.coeff())
            else:
                self.error(f"expected a statement, found {t.text!r}")
            self.expect(";")
        if require_query and not queries:
            self.error("the program has no query")
        return Program(self.table, decls, queries)

    def namelist(self, what):
        toks = [self.name(what)]
        while self.at(","):
            self.advance()
            toks.append(self.name(what))
        return toks

    def events(self):
        self.advance()
        toks = self.namelist("an event name")
        seen = set()
        for t in toks:
            if t.text in seen:
                self.error(f"duplicate event {t.text!r}", t)
            seen.add(t.text)
        try:
            return EventTable([t.text for t in toks])
        except EventLimitError as e:
            self.error(str(e), toks[0])

    def event_ref(self):
        t = self.name("an event name")
        if t.text not in self.table:
            self.error(f"unknown event {t.text!r}", t)
        return t

    def define(self):
        self.advance()
        t = self.event_ref()
        self.expect("=")
        start = self.tok
        expr = self.expr()
        if t.text in expr.events():
            self.error(f"definition of {t.text} refers to {t.text}", start)
        return BoolDefine(t.text, expr)

    def exchangeable(self):
        self.advance()
        toks = [self.event_ref()]
        while self.at(","):
            self.advance()
            toks.append(self.event_ref())
        seen = set()
        for t in toks:
            if t.text in seen:
                self.error(f"event {t.text!r} repeated in exchangeable block", t)
            seen.add(t.text)
        if len(toks) < 2:
            self.error("an exchangeable block needs at least two events", toks[0])
        return ExchBlock(tuple(t.text for t in toks))

    def assertion(self):
        self.advance()
        term = self.coeff()
        if self.at("="):
            self.advance()
            t = self.tok
            rel = Eq(self.number())
        elif self.at("in"):
            self.advance()
            self.expect("[")
            t = self.tok
            lo = self.number()
            self.expect(",")
            hi = self.number()
            self.expect("]")
            rel = In(lo, hi)
        else:
            self.error("expected '=' or 'in'")
        try:
            return CoeffAssert(term, rel)
        except DomainError as e:
            self.error(str(e), t)

    def number(self):
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        t = self.tok
        if t.kind == "number":
            v = float(t.text)
        elif t.kind == "name" and t.text == "inf":
            v = math.inf
        else:
            self.error(f"expected a number, found {t.text or 'end of input'!r}")
        self.advance()
        return -v if neg else v

    def coeff(self):
        t = self.tok
        if t.kind != "name" or t.text not in FAMILIES:
            self.error(f"expected a coefficient (P, O, Q, F, QS or FS), found {t.text!r}")
        self.advance()
        symbol = FAMILIES[t.text]
        rng = RangeType.S if t.text.endswith("S") else None
        self.expect("(")
        args = [self.expr()]
        sep = None
        if self.at("|") or self.at(":"):
            sep_tok = self.advance()
            sep = sep_tok.text
            if symbol in {"P", "O"} and sep == ":":
                self.error(f"{t.text} takes '|', not ':'", sep_tok)
            args.append(self.expr())
        elif symbol in {"Q", "F"}:
            self.error(f"{t.text} needs a '|' or ':' separator")
        self.expect(")")
        return CoeffTerm(Family.lookup(symbol, sep), tuple(args), rng)

    # expressions

    def expr(self):
        left = self.xor_expr()
        while self.at("or"):
            self.advance()
            left = Or(left, self.xor_expr())
        return left

    def xor_expr(self):
        left = self.and_expr()
        while self.at("^"):
            self.advance()
            left = Xor(left, self.and_expr())
        return left

    def and_expr(self):
        left = self.unary()
        while self.at("&"):
            self.advance()
            left = And(left, self.unary())
        return left

    def unary(self):
        if self.at("-"):
            self.advance()
            return Not(self.unary())
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.at("TRUE") or self.at("FALSE"):
            return Const(self.advance().text == "TRUE")
        return Event(self.event_ref().text)


def parse(source, require_query=False):
    "Parse program text into a Program; raises ParseError on the first problem."
    return _Parser(source).program(require_query=require_query)


def parse_expr(text, table):
    "A single boolean expression over the events of `table`."
    p = _Parser(text, table)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after expression")
    return e


def _num(v):
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _relation(rel):
    if isinstance(rel, Eq):
        return f"= {_num(rel.value)}"
    return f"in [{_num(rel.lo)}, {_num(rel.hi)}]"


def format_program(program):
    "Program text that parses back to an equal Program."
    lines = ["events " + ", ".join(program.events.names) + ";"]
    for d in program.declarations:
        if isinstance(d, CoeffAssert):
            lines.append(f"assert {d.term} {_relation(d.relation)};")
        else:
            lines.append(f"{d};")
    for q in program.queries:
        lines.append(f"query {q};")
    return "\n".join(lines) + "\n"


def read_program(path, require_query=False):
    """
    Parse a program file; "@name" names one of the packaged examples.
    """
    if path.startswith("@"):
        from .data import example_text

        source = example_text(path[1:])
    else:
        with open(path, encoding="utf-8") as f:
            source = f.read()
    return parse(source, require_query=require_query)
