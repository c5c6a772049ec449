import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbslab.dynamics import (
    cylinder_midpoint,
    hitting_law_experiment,
    hitting_time,
    iterate,
    predicted_hitting_rate,
    rate_estimate,
    sample_point,
    sample_word,
)
from gibbslab.errors import DenominatorOverflow
from gibbslab.maps import cylinder_for_word, doubling_map, locate
from gibbslab.orbits import RationalOrbit, SymbolSource, WordOrbit
from gibbslab.thermo import Potential, gibbs_model

F = Fraction


def lebesgue_model(m):
    return gibbs_model(m, Potential.neg_log_deriv(m))


def bernoulli_model(m):
    return gibbs_model(m, Potential.from_symbol_weights(m, [F(7, 10), F(3, 10)]))


# -- iterate ------------------------------------------------------------------


def test_iterate_period_two(doubling):
    assert iterate(doubling, F(1, 3), 1) == F(2, 3)
    assert iterate(doubling, F(1, 3), 2) == F(1, 3)
    assert iterate(doubling, F(1, 3), 101) == F(2, 3)


def test_iterate_fixed_point(doubling):
    assert iterate(doubling, F(0), 50) == 0


def test_iterate_locate_shift(doubling):
    x = F(5, 7)
    for n in range(5):
        assert locate(doubling, iterate(doubling, x, n), 1)[0] == \
            locate(doubling, x, n + 1)[n]


def test_denominator_guard():
    from gibbslab.maps import BranchSpec, PartitionSpec, build_map
    part = PartitionSpec((F(0), F(1, 3), F(1)))
    m = build_map(part, [
        BranchSpec(F(3), F(0), frozenset({0, 1})),
        BranchSpec(F(3, 2), F(-1, 2), frozenset({0, 1})),
    ])
    with pytest.raises(DenominatorOverflow):
        iterate(m, F(12, 17), 20000, denominator_bit_cap=64)


# -- sampling -----------------------------------------------------------------


def test_sample_point_deterministic(doubling):
    model = bernoulli_model(doubling)
    a = sample_point(model, 32, seed=123)
    b = sample_point(model, 32, seed=123)
    assert np.array_equal(a.word, b.word)
    assert a.value == b.value
    assert a.provenance == (model.model_id, 123, 32)
    c = sample_point(model, 32, seed=124)
    assert not np.array_equal(a.word, c.word)


def test_sample_point_itinerary_matches_word(doubling, three_symbol):
    for m in (doubling, three_symbol):
        weights = [F(7, 10), F(3, 10)] if m.Q == 2 else [F(1, 2), F(3, 10), F(1, 5)]
        model = gibbs_model(m, Potential.from_symbol_weights(m, weights))
        pt = sample_point(model, 12, seed=5)
        assert locate(m, pt.value, 12) == tuple(int(s) for s in pt.word)


def test_sample_digit_frequencies(doubling):
    model = lebesgue_model(doubling)
    rng = np.random.default_rng(42)
    word = sample_word(model, 10_000, rng)
    ones = int(word.sum())
    # 3 sigma of Binomial(10^4, 1/2)
    assert abs(ones - 5000) <= 3 * math.sqrt(10_000 * 0.25)


def test_sample_bernoulli_frequencies(doubling):
    model = bernoulli_model(doubling)
    rng = np.random.default_rng(43)
    word = sample_word(model, 10_000, rng)
    zeros = int((word == 0).sum())
    assert abs(zeros - 7000) <= 3 * math.sqrt(10_000 * 0.21)


def test_sample_markov_chain_pair_frequencies(three_symbol):
    phi = Potential.from_symbol_weights(three_symbol, [F(1, 2), F(3, 10), F(1, 5)])
    model = gibbs_model(three_symbol, phi)
    rng = np.random.default_rng(44)
    word = sample_word(model, 20_000, rng)
    assert not any(a == 2 and b == 2 for a, b in zip(word, word[1:]))
    freq2 = (word == 2).sum() / len(word)
    assert freq2 == pytest.approx(model.cylinder_measure((2,)), abs=0.02)


def test_cylinder_midpoint_fast_path_matches_generic(doubling, three_symbol):
    w = (0, 1, 1, 0, 1)
    assert cylinder_midpoint(doubling, w) == cylinder_for_word(doubling, w).midpoint
    w3 = (2, 0, 1, 2, 1)
    assert cylinder_midpoint(three_symbol, w3) == \
        cylinder_for_word(three_symbol, w3).midpoint


# -- hitting times ------------------------------------------------------------


def test_hit_on_orbit_point(doubling):
    x = F(5, 7)
    y = iterate(doubling, x, 5)
    rec = hitting_time(doubling, x, y, F(1, 1000), 100)
    assert rec.tau is not None and rec.tau <= 5


def test_hit_tx_is_one(doubling):
    x = F(5, 7)
    rec = hitting_time(doubling, x, doubling.step(x), F(1, 64), 100)
    assert rec.tau == 1


def test_exceeded_sentinel(doubling):
    # orbit of 1/3 is {2/3, 1/3}; a target far from both is never hit
    rec = hitting_time(doubling, F(1, 3), F(1, 100), F(1, 1000), 10_000)
    assert rec.exceeded and rec.tau is None


def test_hit_is_exact_and_minimal(doubling):
    # 2 has order 99988 mod the prime 99989, so the orbit is effectively dense
    x = F(12345, 99989)
    y = F(3, 10)
    r = F(1, 30)
    rec = hitting_time(doubling, x, y, r, 500)
    assert rec.tau is not None
    assert abs(iterate(doubling, x, rec.tau) - y) < r
    for n in range(1, rec.tau):
        assert abs(iterate(doubling, x, n) - y) >= r


def test_hitting_monotone_in_radius(doubling):
    x, y = F(12345, 99989), F(3, 10)
    taus = []
    for j in (4, 6, 8, 10):
        rec = hitting_time(doubling, x, y, F(1, 2 ** j), 10_000)
        taus.append(rec.tau if rec.tau is not None else math.inf)
    assert taus[0] < math.inf
    assert all(a <= b for a, b in zip(taus, taus[1:]))


def test_hitting_shift_consistency(doubling):
    x, y, r = F(12345, 99989), F(3, 10), F(1, 40)
    rec_x = hitting_time(doubling, x, y, r, 1000)
    assert rec_x.tau is not None and rec_x.tau >= 2
    rec_tx = hitting_time(doubling, doubling.step(x), y, r, 1001)
    assert rec_tx.tau == rec_x.tau - 1


def test_sampled_point_hits_match_exact_point_hits(doubling):
    # the word scanner and the exact rational scanner must agree on the
    # materialized midpoint
    model = bernoulli_model(doubling)
    for seed in range(6):
        pt = sample_point(model, 40, seed=seed)
        y, r = F(3, 10), F(1, 100)
        rec_word = hitting_time(doubling, pt, y, r, 3000)
        rec_exact = hitting_time(doubling, pt.value, y, r, 3000)
        assert rec_word.tau == rec_exact.tau


def test_sampled_point_hits_match_exact_three_symbol(three_symbol):
    phi = Potential.from_symbol_weights(three_symbol, [F(1, 2), F(3, 10), F(1, 5)])
    model = gibbs_model(three_symbol, phi)
    for seed in range(4):
        pt = sample_point(model, 30, seed=seed)
        y, r = F(4, 10), F(1, 50)
        rec_word = hitting_time(three_symbol, pt, y, r, 2000)
        rec_exact = hitting_time(three_symbol, pt.value, y, r, 2000)
        assert rec_word.tau == rec_exact.tau


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 997), st.integers(2, 9), st.integers(4, 9))
def test_hit_when_found_is_strictly_inside(num, den_pow, j):
    m = doubling_map()
    x = F(num, 1000)
    y = F(num % den_pow + 1, den_pow + 1)
    r = F(1, 2 ** j)
    rec = hitting_time(m, x, y, r, 2000)
    if rec.tau is not None:
        assert abs(iterate(m, x, rec.tau) - y) < r


# -- rate estimates -------------------------------------------------------------


def test_rate_estimate_orbit_target_zero(doubling):
    x = F(5, 7)
    y = doubling.step(x)
    est = rate_estimate(doubling, x, y, 8, 10_000)
    assert est.taus[0] == 1
    assert est.quotients[0] == 0.0


def test_rate_estimate_fields(doubling):
    model = bernoulli_model(doubling)
    pt = sample_point(model, 1 << 14, seed=3)
    est = rate_estimate(doubling, pt, F(5, 16), 10, 1 << 16)
    assert est.j_values == tuple(range(4, 11))
    assert est.tail_start == 5
    for j, t, q in zip(est.j_values, est.taus, est.quotients):
        if t is not None:
            assert q == pytest.approx(math.log(t) / (j * math.log(2)))
    finite_tail = est.tail_quotients
    if finite_tail:
        assert est.liminf_proxy == min(finite_tail)


def test_rate_estimate_unhit_is_infinite(doubling):
    est = rate_estimate(doubling, F(1, 3), F(1, 100), 8, 1000)
    assert est.liminf_proxy == math.inf and est.limsup_proxy == math.inf


# -- the hitting-law experiment ---------------------------------------------------


def test_predicted_rates(doubling):
    leb = lebesgue_model(doubling)
    ber = bernoulli_model(doubling)
    assert predicted_hitting_rate(leb, leb) == pytest.approx(1.0, abs=1e-12)
    assert predicted_hitting_rate(ber, leb) == pytest.approx(
        -math.log2(0.21) / 2, abs=1e-10)
    assert predicted_hitting_rate(ber, ber) == pytest.approx(
        -(0.7 * math.log2(0.7) + 0.3 * math.log2(0.3)), abs=1e-10)


def test_experiment_deterministic_and_sane(doubling):
    leb = lebesgue_model(doubling)
    res1 = hitting_law_experiment(leb, leb, trials=6, j_max=10, n_max=1 << 14,
                                  seed=99, workers=1)
    res2 = hitting_law_experiment(leb, leb, trials=6, j_max=10, n_max=1 << 14,
                                  seed=99, workers=2)
    assert res1.median_tail == res2.median_tail
    assert [r.estimate.taus for r in res1.records] == \
        [r.estimate.taus for r in res2.records]
    assert res1.predicted == pytest.approx(1.0, abs=1e-12)
    # j_max = 10 is pre-asymptotic; just require the right ballpark
    assert res1.median_tail == pytest.approx(1.0, abs=0.35)


def test_experiment_requires_same_map(doubling, three_symbol):
    leb2 = lebesgue_model(doubling)
    leb3 = lebesgue_model(three_symbol)
    with pytest.raises(ValueError):
        hitting_law_experiment(leb2, leb3, trials=2, j_max=8, n_max=100, seed=1)


# -- orbit machinery ---------------------------------------------------------------


def test_rational_orbit_cycle_stop(doubling):
    pts = list(RationalOrbit(doubling, F(1, 3)).points(1000))
    assert len(pts) < 20
    values = {p for _, p in pts}
    assert values == {F(1, 3), F(2, 3)}


def test_word_orbit_exact_point_matches_iterate(doubling):
    model = bernoulli_model(doubling)
    pt = sample_point(model, 16, seed=8)
    orbit = pt.orbit()
    for n in range(1, 20):
        assert orbit.exact_point(n) == iterate(doubling, pt.value, n)


def test_word_orbit_windows_contain_point(three_symbol):
    phi = Potential.from_symbol_weights(three_symbol, [F(1, 2), F(3, 10), F(1, 5)])
    model = gibbs_model(three_symbol, phi)
    pt = sample_point(model, 24, seed=9)
    orbit = pt.orbit()
    for n in range(1, 12):
        lo, hi = orbit.window_interval(n, 8)
        p = orbit.exact_point(n)
        assert lo <= p <= hi


def test_symbol_source_lazy_extension():
    calls = []

    def gen(n):
        calls.append(n)
        return [0, 1] * ((n + 1) // 2)

    src = SymbolSource(generator=gen, chunk=8)
    assert src.ensure(3)
    assert [src[i] for i in range(3)] == [0, 1, 0]
    assert src.finite_length is None
    src2 = SymbolSource(symbols=[0, 1, 1])
    assert src2.finite_length == 3
    assert not src2.ensure(5)
