import math
import time

import numpy as np
import pytest

from relcoef.coefficients import CoeffTerm, Family, RangeType, evaluate, term
from relcoef.constraints import CoeffAssert, Eq, normalize_all
from relcoef.data import example_text
from relcoef.dsl import parse
from relcoef.errors import FeasibilityUnknownError
from relcoef.partition import Distribution, Event, EventTable, atoms_of
from relcoef.solver import (
    Interval,
    IntervalStatus,
    SearchConfig,
    answer_query,
    bounds_fractional,
    bounds_linear,
    bounds_nonconvex,
    check_feasibility,
    infeasible_subset,
    solve_term,
)


A, B = Event("A"), Event("B")

SCREENING = """
events T, A;
assert P(T|A) = 0.003;
assert P(T|-A) = 0.001;
query Q(T:A);
"""


def _constraints(table, *decls):
    return normalize_all(list(decls), table)


def _p(expr, value):
    return CoeffAssert(term(Family.P, expr), Eq(value))


def _vec(expr, table):
    return atoms_of(expr, table).astype(float)


def _check_witnesses(interval, query, constraints, tol=1e-7):
    for w, v in [(interval.witness_lo, interval.lo), (interval.witness_hi, interval.hi)]:
        if w is None:
            continue
        assert all(c.satisfied(w.p, tol) for c in constraints)
        assert evaluate(w, query) == pytest.approx(v, rel=tol, abs=tol)


def test_linear_chain(ab):
    cs = _constraints(
        ab, _p(A, 0.8), CoeffAssert(term(Family.COND_P, B, A), Eq(0.9))
    )
    iv = bounds_linear(_vec(B, ab), cs, ab)
    assert iv.status is IntervalStatus.EXACT
    assert (iv.lo, iv.hi) == pytest.approx((0.72, 0.92))
    _check_witnesses(iv, term(Family.P, B), cs)


def test_linear_pinned(ab):
    iv = bounds_linear(_vec(A, ab), _constraints(ab, _p(A, 0.3)), ab)
    assert (iv.lo, iv.hi) == pytest.approx((0.3, 0.3))


def test_linear_unconstrained(ab):
    iv = bounds_linear(_vec(A & B, ab), [], ab)
    assert (iv.lo, iv.hi) == pytest.approx((0, 1))


def test_linear_infeasible(ab):
    cs = _constraints(ab, _p(A, 0.2), _p(A, 0.4))
    assert bounds_linear(_vec(B, ab), cs, ab).status is IntervalStatus.INFEASIBLE


def test_fractional_free(ab):
    x, z = _vec(A & B, ab), _vec(~A & B, ab)
    iv = bounds_fractional(x, x + z, _constraints(ab, _p(B, 0.5)), ab)
    assert iv.status is IntervalStatus.EXACT
    assert (iv.lo, iv.hi) == pytest.approx((0, 1))


def test_fractional_pinned(ab):
    cs = _constraints(ab, _p(A, 0.4), _p(B, 0.5))
    iv = bounds_fractional(_vec(A, ab), _vec(B, ab), cs, ab)
    assert (iv.lo, iv.hi) == pytest.approx((0.8, 0.8))
    _check_witnesses(iv, term(Family.F_PROB, A, B), cs)


def test_fractional_odds(ab):
    cs = _constraints(ab, _p(A & B, 0.2), _p(~A & B, 0.1))
    x, z = _vec(A & B, ab), _vec(~A & B, ab)
    iv = bounds_fractional(x, z, cs, ab)
    assert (iv.lo, iv.hi) == pytest.approx((2, 2))


def test_fractional_to_infinity(ab):
    iv = bounds_fractional(_vec(A, ab), _vec(~A, ab), [], ab)
    assert iv.lo == pytest.approx(0)
    assert iv.hi == math.inf
    assert iv.witness_hi is None


def test_fractional_undefined(ab):
    cs = _constraints(ab, _p(B, 0))
    x, z = _vec(A & B, ab), _vec(~A & B, ab)
    iv = bounds_fractional(x, x + z, cs, ab)
    assert iv.status is IntervalStatus.UNDEFINED_QUERY


def test_nonconvex_independence(ab, search):
    cs = _constraints(
        ab,
        _p(A, 0.3),
        _p(B, 0.5),
        CoeffAssert(term(Family.Q_ODDS, A, B), Eq(1)),
    )
    q = term(Family.P, A & B)
    iv = bounds_nonconvex(q, cs, ab, search)
    assert iv.status is IntervalStatus.INNER_APPROX
    assert iv.lo == pytest.approx(0.15, abs=1e-6)
    assert iv.hi == pytest.approx(0.15, abs=1e-6)
    _check_witnesses(iv, q, cs)


def test_nonconvex_wide_range(ab):
    cs = _constraints(ab, _p(A, 0.5), _p(B, 0.5))
    iv = bounds_nonconvex(term(Family.Q_ODDS, A, B), cs, ab)
    assert iv.lo >= 0
    assert iv.lo <= 0.2
    assert iv.hi >= 5


def test_nonconvex_infeasible(ab, search):
    cs = _constraints(ab, _p(A, 0.2), _p(A, 0.4))
    iv = bounds_nonconvex(term(Family.Q_ODDS, A, B), cs, ab, search)
    assert iv.status is IntervalStatus.INFEASIBLE


def test_nonconvex_no_start(ab):
    # every atom is pinned at 0.25, where Q(A|B) is 1, not 2
    cs = _constraints(
        ab,
        _p(A & B, 0.25),
        _p(A & ~B, 0.25),
        _p(~A & B, 0.25),
        CoeffAssert(term(Family.Q_ODDS, A, B), Eq(2)),
    )
    with pytest.raises(FeasibilityUnknownError):
        bounds_nonconvex(term(Family.P, A), cs, ab, SearchConfig(starts=4))


def test_screening_program_is_exact():
    (ans,) = answer_query(parse(SCREENING), SearchConfig(starts=16))
    assert ans.error is None
    assert ans.interval.status is IntervalStatus.EXACT
    assert (ans.interval.lo, ans.interval.hi) == pytest.approx((3, 3), rel=1e-9)
    assert str(ans.interval) == "[3, 3] EXACT"


def test_q_query_under_loose_constraints(search):
    prog = parse("events A, B; assert P(A) = 0.5; query Q(A:B);")
    (ans,) = answer_query(prog, search)
    # P(A|B) / P(A|-B) can be 0 or unbounded
    assert ans.interval.lo == pytest.approx(0, abs=1e-6)
    assert ans.interval.hi > 100


def test_s_range_conversion():
    iv = Interval(1, 6, IntervalStatus.INNER_APPROX).converted(RangeType.O, RangeType.S)
    assert (iv.lo, iv.hi) == pytest.approx((0, 5 / 7))
    iv = Interval(0.25, math.inf, IntervalStatus.EXACT).converted(RangeType.O, RangeType.S)
    assert (iv.lo, iv.hi) == pytest.approx((-0.6, 1))
    undefined = Interval.undefined()
    assert undefined.converted(RangeType.O, RangeType.S) is undefined


def test_answer_query_dispatch_and_ranges(search):
    prog = parse(
        """
        events A, B;
        assert P(A) = 0.6;
        assert P(B) = 0.7;
        query P(A & B);
        query P(A|B);
        query O(A);
        query F(A:B);
        query FS(A:B);
        query P(A or B);
        """
    )
    answers = answer_query(prog, search)
    got = [(a.interval.lo, a.interval.hi) for a in answers]
    assert [str(a.query) for a in answers] == [str(q) for q in prog.queries]
    assert got[0] == pytest.approx((0.3, 0.6))
    assert got[1] == pytest.approx((3 / 7, 6 / 7))
    assert got[2] == pytest.approx((1.5, 1.5))
    assert got[3] == pytest.approx((6 / 7, 6 / 7))
    assert got[4] == pytest.approx(((6 / 7 - 1) / (6 / 7 + 1),) * 2)
    assert got[5] == pytest.approx((0.7, 1))
    assert all(a.interval.status is IntervalStatus.EXACT for a in answers)


def test_answer_query_empty_program(search):
    (ans,) = answer_query(parse("events A, B; query P(A);"), search)
    assert (ans.interval.lo, ans.interval.hi) == pytest.approx((0, 1))


def test_answer_query_infeasible_names_culprits(search):
    prog = parse(
        "events A, B; assert P(B) = 0.5; assert P(A) = 0.2; assert P(A) = 0.4; "
        "query P(A & B);"
    )
    (ans,) = answer_query(prog, search)
    assert ans.interval.status is IntervalStatus.INFEASIBLE
    assert "assert P(A) = 0.2" in ans.interval.message
    assert "assert P(A) = 0.4" in ans.interval.message
    assert "P(B)" not in ans.interval.message


def test_answer_query_threads_keep_order(search):
    prog = parse(
        "events A, B, C; assert P(A) = 0.5; assert P(B|A) = 0.9; "
        "query P(B); query P(C); query P(A & B); query P(B|A);"
    )
    serial = answer_query(prog, search)
    threaded = answer_query(prog, search, n_jobs=4)
    for s, t in zip(serial, threaded):
        assert s.query == t.query
        assert (s.interval.lo, s.interval.hi) == (t.interval.lo, t.interval.hi)


def test_seeded_search_is_deterministic(ab):
    cs = _constraints(ab, _p(A, 0.5), _p(B, 0.5))
    cfg = SearchConfig(starts=8, seed=7)
    q = term(Family.Q_PROB, A, B)
    one = bounds_nonconvex(q, cs, ab, cfg)
    two = bounds_nonconvex(q, cs, ab, cfg)
    assert (one.lo, one.hi) == (two.lo, two.hi)


def test_solve_term_with_bilinear_constraint_goes_nonconvex(ab, search):
    cs = _constraints(
        ab, _p(A, 0.3), _p(B, 0.5), CoeffAssert(term(Family.Q_ODDS, A, B), Eq(1))
    )
    iv = solve_term(CoeffTerm(Family.COND_P, (A, B)), cs, ab, search)
    assert iv.status is IntervalStatus.INNER_APPROX
    assert iv.lo == pytest.approx(0.3, abs=1e-5)


def test_check_feasibility(ab, search):
    res = check_feasibility(_constraints(ab, _p(A, 0.3)), ab, search)
    assert res.status == "FEASIBLE"
    assert res.witness.prob_of(A) == pytest.approx(0.3)

    res = check_feasibility(_constraints(ab, _p(A, 0.2), _p(A, 0.4)), ab, search)
    assert res.status == "INFEASIBLE"
    assert res.witness is None

    cs = _constraints(
        ab, _p(A, 0.3), _p(B, 0.5), CoeffAssert(term(Family.Q_ODDS, A, B), Eq(1))
    )
    res = check_feasibility(cs, ab, search)
    assert res.status == "FEASIBLE"
    assert res.witness.p.tolist() == pytest.approx([0.35, 0.35, 0.15, 0.15], abs=1e-6)


def test_infeasible_subset(ab):
    decls = [_p(B, 0.5), _p(A, 0.2), _p(A & B, 0.1), _p(A, 0.4)]
    culprits = infeasible_subset(decls, ab)
    assert culprits == [decls[1], decls[3]]
    assert infeasible_subset(decls[:3], ab) == []


def test_witnesses_of_exact_intervals(search):
    prog = parse(
        """
        events A, B, C;
        assert P(B|A) in [0.8, 1];
        assert P(C|B) in [0.9, 1];
        assert P(A) = 0.5;
        query P(C|A);
        query P(A & C);
        """
    )
    cs = normalize_all(prog.declarations, prog.events)
    for ans in answer_query(prog, search):
        assert ans.interval.status is IntervalStatus.EXACT
        _check_witnesses(ans.interval, ans.query, cs)


def test_independence_with_the_default_budget():
    prog = parse(example_text("independence"))
    ans, _ = answer_query(prog, SearchConfig())
    assert ans.interval.status is IntervalStatus.INNER_APPROX
    assert ans.interval.lo == pytest.approx(0.15, abs=1e-6)
    assert ans.interval.hi == pytest.approx(0.15, abs=1e-6)


def test_exchangeable_pair_is_exact(search):
    prog = parse("events A, B; exchangeable A, B; assert P(A) = 0.4; query P(B);")
    (ans,) = answer_query(prog, search)
    assert ans.interval.status is IntervalStatus.EXACT
    assert (ans.interval.lo, ans.interval.hi) == pytest.approx((0.4, 0.4), abs=1e-9)
    assert str(ans.interval) == "[0.4, 0.4] EXACT"


def test_exchangeable_example(search):
    prog = parse(example_text("exchangeable"))
    cs = normalize_all(prog.declarations, prog.events)
    for ans in answer_query(prog, search):
        assert ans.error is None
        assert ans.interval.bounded
        _check_witnesses(ans.interval, ans.query, cs)


def test_ties_in_the_nonconvex_search(search):
    prog = parse(
        "events A, B, C; exchangeable A, B, C; assert P(A) = 0.4; "
        "assert Q(A|B) = 1; query P(A & B & C);"
    )
    cs = normalize_all(prog.declarations, prog.events)
    (ans,) = answer_query(prog, search)
    assert ans.error is None
    assert ans.interval.status is IntervalStatus.INNER_APPROX
    _check_witnesses(ans.interval, ans.query, cs)
    # A and B are independent with the same marginal
    assert ans.interval.witness_lo.prob_of(A & B) == pytest.approx(0.16, abs=1e-6)


def test_ratio_reaches_infinity_with_a_large_guard():
    # num is 0.4 where den vanishes, below eps_cond but still positive
    prog = parse("events A, B; assert P(A) = 0.4; query O(A|B);")
    (ans,) = answer_query(prog, eps_cond=0.5)
    assert ans.interval.hi == math.inf


def test_define_at_sixteen_events(search):
    names = ", ".join(f"E{i}" for i in range(16))
    prog = parse(
        f"events {names}; define E15 = E0; assert P(E0) = 0.3; query P(E15);"
    )
    (ans,) = answer_query(prog, search)
    assert ans.interval.status is IntervalStatus.EXACT
    assert (ans.interval.lo, ans.interval.hi) == pytest.approx((0.3, 0.3))


def test_twelve_events_at_scale():
    t = EventTable.default(12)
    rng = np.random.default_rng(12)
    truth = Distribution(rng.dirichlet(np.ones(t.n_atoms)), t)
    events = [Event(name) for name in t.names]
    decls = []
    for _ in range(20):
        i, j = rng.choice(12, size=2, replace=False)
        a, b = events[i], events[j] if rng.random() < 0.5 else ~events[j]
        fam = Family.P if rng.random() < 0.5 else Family.COND_P
        tm = term(Family.P, a & b) if fam is Family.P else term(fam, a, b)
        decls.append(CoeffAssert(tm, Eq(float(evaluate(truth, tm)))))
    cs = normalize_all(decls, t)
    query = term(Family.P, events[0] ^ events[11])

    start = time.perf_counter()
    one = solve_term(query, cs, t)
    elapsed = time.perf_counter() - start
    two = solve_term(query, cs, t)

    assert one.status is IntervalStatus.EXACT
    assert one.lo <= evaluate(truth, query) + 1e-7
    assert one.hi >= evaluate(truth, query) - 1e-7
    assert (one.lo, one.hi) == (two.lo, two.hi)
    assert elapsed < 5
