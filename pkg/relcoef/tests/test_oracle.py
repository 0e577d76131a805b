import pytest

from relcoef.data import example_text
from relcoef.dsl import parse, read_program
from relcoef.errors import EventLimitError
from relcoef.oracle import OracleConfig, oracle_bounds
from relcoef.solver import IntervalStatus, SearchConfig, answer_query

from .conftest import DATA


SMALL = OracleConfig(samples=20_000, batch_size=5_000)


def _bounds(results):
    return [(r.interval.lo, r.interval.hi) for r in results]


def test_unconstrained_marginal():
    (res,) = oracle_bounds(parse("events A, B; query P(A);"), SMALL)
    assert res.accepted == 20_000
    assert res.interval.status is IntervalStatus.INNER_APPROX
    assert res.interval.lo < 0.01
    assert res.interval.hi > 0.99


def test_frechet():
    results = oracle_bounds(parse(example_text("frechet")), SMALL)
    (lo, hi), (or_lo, or_hi), _ = _bounds(results)
    assert 0.3 - 1e-5 <= lo <= 0.3 + 1e-3
    assert 0.6 - 1e-3 <= hi <= 0.6 + 1e-5
    assert 0.7 - 1e-5 <= or_lo <= 0.7 + 1e-3
    assert 1 - 1e-3 <= or_hi <= 1 + 1e-5


def test_independence():
    results = oracle_bounds(parse(example_text("independence")), SMALL)
    (lo, hi), (s_lo, s_hi) = _bounds(results)
    assert lo == pytest.approx(0.15, abs=1e-3)
    assert hi == pytest.approx(0.15, abs=1e-3)
    assert s_lo == pytest.approx(0, abs=1e-2)
    assert s_hi == pytest.approx(0, abs=1e-2)


@pytest.mark.parametrize("name", ["frechet", "chaining"])
def test_contained_in_exact_intervals(name):
    prog = parse(example_text(name))
    exact = answer_query(prog, SearchConfig(starts=16))
    sampled = oracle_bounds(prog, SMALL)
    for ans, res in zip(exact, sampled):
        assert ans.interval.status is IntervalStatus.EXACT
        assert res.interval.lo >= ans.interval.lo - 1e-5
        assert res.interval.hi <= ans.interval.hi + 1e-5


LINEAR = sorted((DATA / "linear").glob("*.rel"))


def test_linear_corpus_size():
    assert len(LINEAR) >= 10


@pytest.mark.parametrize("fn", LINEAR, ids=lambda p: p.stem)
def test_linear_corpus_matches_exact_intervals(fn):
    prog = read_program(str(fn))
    exact = answer_query(prog, SearchConfig(starts=4))
    sampled = oracle_bounds(prog, OracleConfig(samples=50_000, batch_size=10_000))
    for ans, res in zip(exact, sampled):
        assert ans.interval.status is IntervalStatus.EXACT
        assert res.interval.lo >= ans.interval.lo - 1e-5
        assert res.interval.hi <= ans.interval.hi + 1e-5
        assert res.interval.lo == pytest.approx(ans.interval.lo, abs=0.02)
        assert res.interval.hi == pytest.approx(ans.interval.hi, abs=0.02)


@pytest.mark.parametrize("name", ["frechet", "chaining"])
def test_more_samples_never_narrow(name):
    # batches are seeded by position, so the bigger run sees every sample of
    # the smaller one
    prog = parse(example_text(name))
    small = oracle_bounds(prog, OracleConfig(samples=5_000, batch_size=5_000))
    big = oracle_bounds(prog, OracleConfig(samples=20_000, batch_size=5_000))
    assert big[0].accepted >= small[0].accepted
    for s, b in zip(small, big):
        assert b.interval.lo <= s.interval.lo + 1e-6
        assert b.interval.hi >= s.interval.hi - 1e-6


def test_too_many_events():
    prog = parse("events A, B, C, D, E; query P(A);")
    with pytest.raises(EventLimitError):
        oracle_bounds(prog, SMALL)


def test_nothing_lands():
    prog = parse("events A, B; assert P(A) = 0.2; assert P(A) = 0.4; query P(B);")
    with pytest.warns(RuntimeWarning, match="satisfied the constraints"):
        (res,) = oracle_bounds(prog, OracleConfig(samples=500))
    assert res.interval is None
    assert res.accepted == 0
    assert res.message == "no feasible sample found"


def test_seeded_runs_repeat():
    prog = parse(example_text("chaining"))
    cfg = OracleConfig(samples=5_000, seed=3)
    assert _bounds(oracle_bounds(prog, cfg)) == _bounds(oracle_bounds(prog, cfg))


def test_config_validation():
    with pytest.raises(ValueError):
        OracleConfig(samples=0)
    with pytest.raises(ValueError):
        OracleConfig(batch_size=0)
