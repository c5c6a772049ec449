import math
from fractions import Fraction

import numpy as np
import pytest

from gibbslab.errors import BracketFailure, GibbsLabError
from gibbslab.multifractal import (
    alpha_of_q,
    critical_exponents,
    default_q_grid,
    eta,
    local_dimension_trace,
    mu_q_model,
    spectrum,
)
from gibbslab.thermo import Potential, gibbs_model

F = Fraction

# closed forms for the (0.7, 0.3) Bernoulli measure on the doubling map
ALPHA_MAX = -math.log2(0.21) / 2        # 1.125769383497982
HDIM = -(0.7 * math.log2(0.7) + 0.3 * math.log2(0.3))   # 0.8812908992306927
ALPHA_MINUS = -math.log2(0.7)           # 0.5145731728297583
ALPHA_PLUS = -math.log2(0.3)            # 1.7369655941662059


def eta_closed_form(q, p=0.7):
    return math.log2(p ** q + (1 - p) ** q)


@pytest.fixture
def bernoulli(doubling):
    return Potential.from_symbol_weights(doubling, [F(7, 10), F(3, 10)])


# -- eta -----------------------------------------------------------------------


def test_eta_at_zero_is_one(doubling, bernoulli):
    assert eta(doubling, bernoulli, 0.0) == pytest.approx(1.0, abs=1e-10)


def test_eta_at_one_is_zero(doubling, bernoulli):
    assert eta(doubling, bernoulli, 1.0) == pytest.approx(0.0, abs=1e-9)


def test_eta_closed_form_q2(doubling, bernoulli):
    assert eta(doubling, bernoulli, 2.0) == pytest.approx(
        math.log2(0.58), abs=1e-9)


def test_eta_matches_closed_form_on_grid(doubling, bernoulli):
    for q in np.linspace(-20, 20, 81):
        assert eta(doubling, bernoulli, float(q)) == pytest.approx(
            eta_closed_form(q), abs=1e-8), f"q={q}"


def test_eta_needs_widened_bracket(doubling, bernoulli):
    # eta(-20) ~ 34.7 lies outside the initial [-10, 10] bracket
    assert eta(doubling, bernoulli, -20.0) == pytest.approx(
        eta_closed_form(-20), abs=1e-8)


def test_eta_bracket_failure(doubling, bernoulli):
    with pytest.raises(BracketFailure):
        eta(doubling, bernoulli, -600.0)


def test_eta_convex_and_decreasing(doubling, bernoulli):
    # eta(q) = sup over invariant measures of (h + q*int phi)/int log|T'|,
    # a supremum of affine functions of q, hence convex; the closed form
    # log2(0.7^q + 0.3^q) is a log-sum-exp and confirms it.
    qs = np.linspace(-6, 6, 25)
    es = [eta(doubling, bernoulli, float(q)) for q in qs]
    h = qs[1] - qs[0]
    for a, b in zip(es, es[1:]):
        assert b < a  # strictly decreasing (phi not proportional to -log|T'|)
    for a, b, c in zip(es, es[1:], es[2:]):
        assert (a - 2 * b + c) / h ** 2 >= -1e-8  # convexity


# -- alpha ----------------------------------------------------------------------


def test_alpha_zero_is_alpha_max(doubling, bernoulli):
    assert alpha_of_q(doubling, bernoulli, 0.0) == pytest.approx(ALPHA_MAX, abs=1e-8)


def test_alpha_one_is_hdim(doubling, bernoulli):
    assert alpha_of_q(doubling, bernoulli, 1.0) == pytest.approx(HDIM, abs=1e-8)


def test_alpha_decreasing(doubling, bernoulli):
    a = [alpha_of_q(doubling, bernoulli, q) for q in (-5.0, 0.0, 5.0)]
    assert a[0] > a[1] > a[2]


def test_alpha_of_degenerate_potential(doubling):
    phi = Potential.neg_log_deriv(doubling)
    for q in (-3.0, 0.0, 2.0):
        assert alpha_of_q(doubling, phi, q) == pytest.approx(1.0, abs=1e-10)


# -- spectrum ---------------------------------------------------------------------


def test_spectrum_points(doubling, bernoulli):
    pts = {p.q: p for p in spectrum(doubling, bernoulli, [0.0, 1.0, 2.0])}
    assert pts[0.0].dim == pytest.approx(1.0, abs=1e-8)
    assert pts[0.0].eta == pytest.approx(1.0, abs=1e-9)
    # bisector: D(alpha(1)) = alpha(1)
    assert pts[1.0].dim == pytest.approx(pts[1.0].alpha, abs=1e-8)
    for p in pts.values():
        assert p.dim == p.eta + p.q * p.alpha  # exact construction identity
        assert p.dim_valid == (0.0 <= p.dim <= 1.0)


def test_spectrum_concave_in_alpha(doubling, bernoulli):
    pts = spectrum(doubling, bernoulli, np.linspace(-8, 8, 33))
    pts.sort(key=lambda p: p.alpha)
    slopes = []
    for a, b in zip(pts, pts[1:]):
        if b.alpha - a.alpha > 1e-12:
            slopes.append((b.dim - a.dim) / (b.alpha - a.alpha))
    for s1, s2 in zip(slopes, slopes[1:]):
        assert s2 <= s1 + 1e-8


def test_spectrum_max_dim_one(doubling, bernoulli):
    pts = spectrum(doubling, bernoulli)
    dmax = max(p.dim for p in pts)
    assert dmax == pytest.approx(1.0, abs=1e-8)
    best = max(pts, key=lambda p: p.dim)
    assert abs(best.q) <= 0.5


def test_default_grid_shape():
    grid = default_q_grid()
    assert grid[0] == -20 and grid[-1] == 20
    assert len(grid) >= 81
    assert np.all(np.diff(grid) > 0)


# -- critical exponents ------------------------------------------------------------


def test_critical_exponents_bernoulli(doubling, bernoulli):
    ce = critical_exponents(doubling, bernoulli)
    assert ce.alpha_minus == pytest.approx(ALPHA_MINUS, abs=1e-10)
    assert ce.alpha_plus == pytest.approx(ALPHA_PLUS, abs=1e-10)
    assert ce.alpha_max == pytest.approx(ALPHA_MAX, abs=1e-8)
    assert ce.hdim_phi == pytest.approx(HDIM, abs=1e-8)
    assert ce.alpha_minus <= ce.alpha_max <= ce.alpha_plus
    assert ce.alpha_minus <= ce.hdim_phi <= ce.alpha_plus


def test_critical_exponents_cross_check_against_large_q(doubling, bernoulli):
    ce = critical_exponents(doubling, bernoulli, cross_check=False)
    assert abs(ce.alpha_minus - alpha_of_q(doubling, bernoulli, 50.0)) <= 1e-3
    assert abs(ce.alpha_plus - alpha_of_q(doubling, bernoulli, -50.0)) <= 1e-3


def test_critical_exponents_degenerate(doubling):
    phi = Potential.neg_log_deriv(doubling)
    ce = critical_exponents(doubling, phi)
    for v in (ce.alpha_minus, ce.alpha_max, ce.alpha_plus, ce.hdim_phi):
        assert v == pytest.approx(1.0, abs=1e-10)


def test_critical_exponents_three_symbol(three_symbol):
    phi = Potential.from_symbol_weights(three_symbol, [F(1, 2), F(3, 10), F(1, 5)])
    ce = critical_exponents(three_symbol, phi)
    assert ce.alpha_minus <= ce.alpha_max <= ce.alpha_plus
    assert ce.alpha_minus <= ce.hdim_phi <= ce.alpha_plus
    assert 0 < ce.hdim_phi <= 1 + 1e-12


def test_mu_q_model_pressure_zero(doubling, bernoulli):
    model = mu_q_model(doubling, bernoulli, 2.0)
    assert abs(model.pressure) <= 1e-9


# -- local dimension trace -----------------------------------------------------------


def test_trace_lebesgue_constant_one(doubling):
    model = gibbs_model(doubling, Potential.neg_log_deriv(doubling))
    word = (0, 1, 1, 0, 1, 0, 0, 1) * 4
    for v in local_dimension_trace(model, word, 30):
        assert v == pytest.approx(1.0, abs=1e-12)


def test_trace_matches_digit_frequency_oracle(doubling):
    model = gibbs_model(doubling, Potential.from_symbol_weights(
        doubling, [F(7, 10), F(3, 10)]))
    rng = np.random.default_rng(11)
    word = tuple((rng.random(4000) < 0.3).astype(int))
    trace = local_dimension_trace(model, word, 4000)
    for n in (10, 500, 4000):
        c1 = sum(word[:n])
        expected = -((n - c1) * math.log(0.7) + c1 * math.log(0.3)) / (n * math.log(2))
        assert trace[n - 1] == pytest.approx(expected, abs=1e-9)


def test_trace_converges_to_alpha_q(doubling, bernoulli):
    # the local dimension of mu_phi along a mu_q-typical itinerary is alpha(q):
    # trace the phi-model over a word sampled from the mu_q chain
    q = 2.0
    model_phi = gibbs_model(doubling, bernoulli)
    chain = mu_q_model(doubling, bernoulli, q)
    target = alpha_of_q(doubling, bernoulli, q)
    rng = np.random.default_rng(7)
    p0 = chain.transition[0, 0]  # full-shift depth-1: rows equal, iid sampling
    word = tuple((rng.random(20_000) >= p0).astype(int))
    got = local_dimension_trace(model_phi, word, 20_000)[-1]
    assert got == pytest.approx(target, abs=0.02)
