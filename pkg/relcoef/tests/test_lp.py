import numpy as np
import pytest

from relcoef.coefficients import Family, term
from relcoef.constraints import (
    AtomTie,
    BoolDefine,
    CoeffAssert,
    Eq,
    ExchBlock,
    normalize_all,
)
from relcoef.errors import DimensionError, NumericalError
from relcoef.lp import LinearProgramSpec, LPStatus, feasible_point, simplex_solve
from relcoef.partition import Event, EventTable, atoms_of


A, B = Event("A"), Event("B")


def _marginals(table, **values):
    decls = [CoeffAssert(term(Family.P, k), Eq(v)) for k, v in values.items()]
    return normalize_all(decls, table)


def test_vertex_of_the_simplex(ab):
    q = atoms_of(A & B, ab).astype(float)
    res = simplex_solve(LinearProgramSpec(q, "max"))
    assert res.status is LPStatus.OPTIMAL
    assert res.value == pytest.approx(1)
    assert res.point.tolist() == pytest.approx([0, 0, 0, 1])


def test_frechet_bounds(ab):
    q = atoms_of(A & B, ab).astype(float)
    cs = _marginals(ab, A=0.6, B=0.7)
    hi = simplex_solve(LinearProgramSpec.from_constraints(q, cs, "max"))
    lo = simplex_solve(LinearProgramSpec.from_constraints(q, cs, "min"))
    assert hi.value == pytest.approx(0.6)
    assert lo.value == pytest.approx(0.3)
    for res in (lo, hi):
        assert res.point.min() >= 0
        assert res.point.sum() == pytest.approx(1)
        assert all(c.satisfied(res.point, 1e-9) for c in cs)


def test_contradiction(ab):
    cs = _marginals(ab, A=0.2) + _marginals(ab, A=0.4)
    res = simplex_solve(LinearProgramSpec.from_constraints(np.zeros(4), cs))
    assert res.status is LPStatus.INFEASIBLE
    assert feasible_point(LinearProgramSpec.from_constraints(np.zeros(4), cs)) is None


def test_unbounded_without_simplex_row():
    # max x0 s.t. x0 - x1 = 0
    lp = LinearProgramSpec([1, 0], "max", A_eq=[[1, -1]], b_eq=[0], simplex=False)
    assert simplex_solve(lp).status is LPStatus.UNBOUNDED


def test_inequalities():
    # min 3 x0 + 4 x1 s.t. x0 + x1 >= 2, 2 x0 + x1 >= 3
    lp = LinearProgramSpec(
        [3, 4], "min", A_ge=[[1, 1], [2, 1]], b_ge=[2, 3], simplex=False
    )
    res = simplex_solve(lp)
    assert res.status is LPStatus.OPTIMAL
    assert res.value == pytest.approx(6)
    assert res.point.tolist() == pytest.approx([2, 0])


def test_negative_right_hand_side():
    # -x0 >= -0.25 inside the simplex
    lp = LinearProgramSpec([-1, 0], "min", A_ge=[[-1, 0]], b_ge=[-0.25])
    res = simplex_solve(lp)
    assert res.value == pytest.approx(-0.25)


def test_redundant_rows(ab):
    cs = _marginals(ab, A=0.5) * 3 + _marginals(ab, B=0.5)
    q = atoms_of(A & B, ab).astype(float)
    res = simplex_solve(LinearProgramSpec.from_constraints(q, cs, "max"))
    assert res.value == pytest.approx(0.5)


def test_zero_fixed_atoms(abc):
    # zero-probability atoms are fixed before pivoting
    A_eq = np.zeros((2, 8))
    A_eq[0, [1, 2, 3]] = 1
    A_eq[1, [4, 5]] = [1, -1]
    q = np.arange(8, dtype=float)
    res = simplex_solve(LinearProgramSpec(q, "max", A_eq=A_eq, b_eq=[0, 0]))
    assert res.value == pytest.approx(7)
    assert res.point[[1, 2, 3]].tolist() == [0, 0, 0]


def test_degenerate_problem_terminates():
    # a classic cycling example for the textbook pivot rule
    c = [-0.75, 150, -0.02, 6]
    A_ge = -np.array(
        [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]], dtype=float
    )
    b_ge = -np.array([0, 0, 1], dtype=float)
    res = simplex_solve(LinearProgramSpec(c, "min", A_ge=A_ge, b_ge=b_ge, simplex=False))
    assert res.status is LPStatus.OPTIMAL
    assert res.value == pytest.approx(-0.05)


def test_pivot_cap(ab):
    q = atoms_of(A & B, ab).astype(float)
    cs = _marginals(ab, A=0.6, B=0.7)
    with pytest.raises(NumericalError):
        simplex_solve(LinearProgramSpec.from_constraints(q, cs, "max"), max_pivots=0)


def test_dimension_checks(ab, abc):
    with pytest.raises(DimensionError):
        LinearProgramSpec([1, 0], A_eq=[[1, 0, 0]], b_eq=[1])
    with pytest.raises(DimensionError):
        LinearProgramSpec.from_constraints(np.zeros(8), _marginals(ab, A=0.5))


def test_random_lps_match_vertices():
    # over the bare simplex the optimum of c . p is min(c)
    rng = np.random.default_rng(5)
    for _ in range(20):
        c = rng.standard_normal(16)
        assert simplex_solve(LinearProgramSpec(c)).value == pytest.approx(c.min())
        assert simplex_solve(LinearProgramSpec(c, "max")).value == pytest.approx(c.max())


def test_negated_spec_gives_the_other_end(abc):
    rng = np.random.default_rng(8)
    cs = _marginals(abc, A=0.3, B=0.6, C=0.5)
    for _ in range(10):
        c = rng.standard_normal(8)
        lp = LinearProgramSpec.from_constraints(c, cs)
        lo = simplex_solve(lp)
        hi = simplex_solve(lp.negated())
        assert lp.negated().sense == "max"
        assert lp.negated().negated().sense == "min"
        # max c . p is -min (-c) . p
        mirror = simplex_solve(LinearProgramSpec.from_constraints(-c, cs))
        assert hi.value == pytest.approx(-mirror.value, abs=1e-9)
        assert lo.value <= hi.value + 1e-9


def test_tied_columns(ab):
    cs = normalize_all(
        [ExchBlock(("A", "B")), CoeffAssert(term(Family.P, "A"), Eq(0.4))], ab
    )
    q = atoms_of(B, ab).astype(float)
    for sense in ("min", "max"):
        res = simplex_solve(LinearProgramSpec.from_constraints(q, cs, sense))
        assert res.value == pytest.approx(0.4)
        assert res.point[1] == pytest.approx(res.point[2])
        assert res.point.sum() == pytest.approx(1)


def test_ties_out_of_range():
    with pytest.raises(DimensionError):
        LinearProgramSpec(np.zeros(4), ties=[AtomTie([1, 7])])


def test_define_at_sixteen_events():
    t = EventTable.default(16)
    decls = [
        BoolDefine("P", Event("A")),
        CoeffAssert(term(Family.P, "A"), Eq(0.3)),
    ]
    cs = normalize_all(decls, t)
    q = atoms_of(Event("P"), t).astype(float)
    for sense in ("min", "max"):
        res = simplex_solve(LinearProgramSpec.from_constraints(q, cs, sense))
        assert res.value == pytest.approx(0.3)
