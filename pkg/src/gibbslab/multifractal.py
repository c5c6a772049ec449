"""Multifractal analysis of Gibbs measures.

Solves the pressure equation P(-eta*log|T'| + q*phi) = 0 for eta(q) by
bisection, evaluates alpha(q) as a ratio of exact cylinder-mass integrals,
parametrizes the dimension spectrum D = eta + q*alpha, and computes the
extreme exponents alpha_-/alpha_+ as minimum/maximum cycle ratios of the
word transition graph (parametric search with negative-cycle detection).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BracketFailure, GibbsLabError, NotPrimitive
from .maps import MarkovMap
from .thermo import (
    GibbsModel,
    Potential,
    combine_potentials,
    gibbs_model,
    pressure,
)

ETA_TOL = 1e-10
CYCLE_TOL = 1e-10
CROSS_CHECK_Q = 50.0
CROSS_CHECK_TOL = 1e-3


@dataclass(frozen=True)
class SpectrumPoint:
    """One sample of the parametrized spectrum: D(alpha(q)) = eta(q) + q*alpha(q)."""

    q: float
    eta: float
    alpha: float
    dim: float
    dim_valid: bool  # True when dim lies in [0, 1]; raw value is never clipped


@dataclass(frozen=True)
class CriticalExponents:
    alpha_minus: float
    alpha_max: float
    alpha_plus: float
    hdim_phi: float


def _normalized(markov_map: MarkovMap, phi: Potential) -> Potential:
    p = pressure(markov_map, phi)
    return phi if abs(p) <= 1e-14 else phi.shifted(-p)


def eta(markov_map: MarkovMap, phi: Potential, q: float, *,
        tol: float = ETA_TOL) -> float:
    """The unique eta with P(-eta*log|T'| + q*phi) = 0.

    The pressure is strictly decreasing in eta because log|T'| >= log(L1) > 0,
    so bisection applies; the initial bracket [-10, 10] is widened by a factor
    of 4 at most twice.  The input potential is normalized internally.
    """
    phi = _normalized(markov_map, phi)

    def f(e: float) -> float:
        return pressure(markov_map, combine_potentials(markov_map, phi, e, q))

    half = 10.0
    for _ in range(3):
        lo, hi = -half, half
        if f(lo) > 0 > f(hi):
            break
        half *= 4
    else:
        raise BracketFailure(f"no sign change for eta bracket up to [{-half/4}, {half/4}]")

    pm = math.inf
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pm = f(mid)
        if pm > 0:
            lo = mid
        else:
            hi = mid
        if abs(pm) <= tol and hi - lo <= 1e-12 * max(1.0, abs(mid)):
            return mid
    if abs(pm) <= tol:
        return 0.5 * (lo + hi)
    raise BracketFailure("bisection for eta did not reach tolerance")


def mu_q_model(markov_map: MarkovMap, phi: Potential, q: float) -> GibbsModel:
    """Gibbs model of the potential -eta(q)*log|T'| + q*phi."""
    phi = _normalized(markov_map, phi)
    e = eta(markov_map, phi, q)
    return gibbs_model(markov_map, combine_potentials(markov_map, phi, e, q))


def _integral_ratio(markov_map: MarkovMap, phi: Potential,
                    model: GibbsModel) -> float:
    neg_log_d = Potential.neg_log_deriv(markov_map)
    num = -model.integrate(phi)
    den = -model.integrate(neg_log_d)
    return num / den


def alpha_of_q(markov_map: MarkovMap, phi: Potential, q: float) -> float:
    """alpha(q) = -int phi d(mu_q) / int log|T'| d(mu_q), by exact cylinder sums."""
    phi = _normalized(markov_map, phi)
    return _integral_ratio(markov_map, phi, mu_q_model(markov_map, phi, q))


def default_q_grid() -> np.ndarray:
    """81 points on [-20, 20] plus refinement near q = 0 and q = 1."""
    base = np.linspace(-20.0, 20.0, 81)
    fine = np.linspace(-1.0, 2.0, 25)
    return np.unique(np.concatenate([base, fine]))


def spectrum(markov_map: MarkovMap, phi: Potential,
             q_grid: Iterable[float] | None = None) -> list[SpectrumPoint]:
    """Sample (q, eta, alpha, D) along the grid; D values are reported raw."""
    phi = _normalized(markov_map, phi)
    grid = default_q_grid() if q_grid is None else list(q_grid)
    out = []
    for q in grid:
        q = float(q)
        e = eta(markov_map, phi, q)
        model = gibbs_model(markov_map,
                            combine_potentials(markov_map, phi, e, q))
        a = _integral_ratio(markov_map, phi, model)
        d = e + q * a
        out.append(SpectrumPoint(q, e, a, d, 0.0 <= d <= 1.0))
    return out


# -- extreme exponents via cycle ratios ------------------------------------------


def _has_negative_cycle(n: int, edges: list[tuple[int, int, float]]) -> bool:
    # Bellman-Ford with an implicit all-nodes source
    dist = [0.0] * n
    for it in range(n):
        changed = False
        for u, v, w in edges:
            alt = dist[u] + w
            if alt < dist[v] - 1e-18:
                dist[v] = alt
                changed = True
        if not changed:
            return False
    return changed


def _min_cycle_ratio(n: int, arcs: list[tuple[int, int, float, float]],
                     tol: float) -> float:
    """Minimum over directed cycles of sum(cost)/sum(time), all times > 0.

    Parametric search: a cycle with ratio < t exists iff the graph with edge
    weights cost - t*time has a negative cycle.
    """
    ratios = [c / t for _, _, c, t in arcs]
    lo, hi = min(ratios), max(ratios)
    if hi - lo <= tol:
        return 0.5 * (lo + hi)
    lo -= 1e-12
    hi += 1.0
    for _ in range(80):
        if hi - lo <= tol * 0.5:
            break
        mid = 0.5 * (lo + hi)
        edges = [(u, v, c - mid * t) for u, v, c, t in arcs]
        if _has_negative_cycle(n, edges):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _word_graph(markov_map: MarkovMap, phi: Potential):
    states = sorted(phi.values)
    index = {s: i for i, s in enumerate(states)}
    log_d = {k: math.log(abs(markov_map.branches[k].slope))
             for k in range(markov_map.Q)}
    arcs = []
    for u in states:
        iu = index[u]
        t = log_d[u[0]]
        c = -phi.values[u]
        if phi.depth == 1:
            targets = [(v,) for v in markov_map.successors(u[0])]
        else:
            targets = [u[1:] + (s,) for s in markov_map.successors(u[-1])]
        for v in targets:
            if v in index:
                arcs.append((iu, index[v], c, t))
    return len(states), arcs


def critical_exponents(markov_map: MarkovMap, phi: Potential, *,
                       cross_check: bool = True) -> CriticalExponents:
    """alpha_max and hdim from the q = 0, 1 models; alpha_-/alpha_+ as the
    extreme cycle ratios of sum(-phi)/sum(log|T'|) over the word graph.

    The extremes of the integral ratio over invariant measures are attained
    on periodic-orbit measures for locally constant data, so the parametric
    cycle search is exact up to its bisection tolerance.  When cross_check
    is set, the cycle answers are compared against alpha(+-50).
    """
    if markov_map.primitivity_exponent is None:
        raise NotPrimitive("critical exponents need a primitive map")
    phi = _normalized(markov_map, phi)
    a_max = alpha_of_q(markov_map, phi, 0.0)
    hdim = alpha_of_q(markov_map, phi, 1.0)
    n, arcs = _word_graph(markov_map, phi)
    a_minus = _min_cycle_ratio(n, arcs, CYCLE_TOL)
    neg_arcs = [(u, v, -c, t) for u, v, c, t in arcs]
    a_plus = -_min_cycle_ratio(n, neg_arcs, CYCLE_TOL)
    if cross_check:
        for target, q in ((a_minus, CROSS_CHECK_Q), (a_plus, -CROSS_CHECK_Q)):
            got = alpha_of_q(markov_map, phi, q)
            if abs(got - target) > CROSS_CHECK_TOL:
                raise GibbsLabError(
                    f"cycle-ratio exponent {target:.12f} disagrees with "
                    f"alpha({q:+g}) = {got:.12f}")
    return CriticalExponents(a_minus, a_max, a_plus, hdim)


def local_dimension_trace(model: GibbsModel, symbols: Sequence[int],
                          n_max: int) -> list[float]:
    """Markov pointwise-dimension quotients log mu(I_n) / log|I_n| along an
    itinerary prefix, for n = 1..n_max.

    Runs on log scale so arbitrarily long itineraries do not underflow.
    """
    w = tuple(symbols[:n_max])
    if len(w) < n_max:
        raise ValueError(f"stream provides {len(w)} symbols, need {n_max}")
    model.map.require_admissible(w)
    k = model.depth
    log_len = 0.0
    log_mu = 0.0
    state = None
    out = []
    T = model.transition
    for n in range(1, n_max + 1):
        s = abs(model.map.branches[w[n - 1]].slope)
        log_len -= math.log(s.numerator) - math.log(s.denominator)
        if n < k:
            log_mu = math.log(model.cylinder_measure(w[:n]))
        elif n == k:
            state = model.state_of(w[:k])
            log_mu = math.log(float(model.stationary[state]))
        else:
            nxt = model.state_of(w[n - k:n])
            log_mu += math.log(float(T[state, nxt]))
            state = nxt
        out.append(log_mu / log_len)
    return out
