"""Exact orbits, Gibbs-distributed sample points, hitting times, and the
hitting-time / local-dimension Monte Carlo.

Every ball-membership decision is an exact rational comparison: orbits of
rational points are iterated exactly, and sampled points are tracked through
cylinder-window enclosures that refine on demand.  Quotient noise therefore
comes only from finite horizons, never from roundoff.
"""

from __future__ import annotations

import math
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DenominatorOverflow, GibbsLabError
from .maps import MarkovMap, cylinder_for_word
from .orbits import (
    DENOMINATOR_BIT_CAP,
    RationalOrbit,
    SymbolSource,
    WordOrbit,
    branch_image_interval,
)
from .thermo import GibbsModel, Potential

TARGET_PREFIX_LEN = 48  # symbols defining a sampled target point y
_UNIFORM_WINDOW = 64    # digits per rolling window in hit scans


def iterate(markov_map: MarkovMap, x, n: int,
            denominator_bit_cap: int = DENOMINATOR_BIT_CAP) -> Fraction:
    """Exact T^n x.  Denominators grow at most by the product of branch slope
    denominators per step; exceeding the bit cap raises instead of rounding."""
    x = Fraction(x)
    if not 0 <= x < 1:
        raise ValueError("iterate expects x in [0, 1)")
    if n == 0:
        return x
    last = x
    for _, p in RationalOrbit(markov_map, x, denominator_bit_cap).points(
            n, stop_on_cycle=False):
        last = p
    return last


class SamplePoint:
    """Midpoint of a sampled cylinder, with the word that defines it.

    The rational value is materialized lazily: experiments work from the
    word alone, and the word's itinerary prefix matches the sample.
    """

    def __init__(self, markov_map: MarkovMap, word: np.ndarray,
                 model_id: str, seed, prefix_len: int):
        self.map = markov_map
        self.word = word
        self.model_id = model_id
        self.seed = seed
        self.prefix_len = prefix_len
        self._value: Fraction | None = None

    @property
    def provenance(self) -> tuple[str, object, int]:
        return (self.model_id, self.seed, self.prefix_len)

    @property
    def value(self) -> Fraction:
        if self._value is None:
            self._value = cylinder_midpoint(self.map, self.word)
        return self._value

    def orbit(self) -> WordOrbit:
        return WordOrbit(self.map, SymbolSource(symbols=self.word.tolist()))

    def __repr__(self):
        return (f"SamplePoint(model={self.model_id}, seed={self.seed}, "
                f"m={self.prefix_len})")


def cylinder_midpoint(markov_map: MarkovMap, word) -> Fraction:
    """Exact midpoint of the cylinder of `word`, with a digit fast path."""
    symbols = [int(s) for s in word]
    base = markov_map.uniform_grid_base
    if base is not None:
        v = 0
        for s in symbols:
            v = v * base + s
        return Fraction(2 * v + 1, 2 * base ** len(symbols))
    return cylinder_for_word(markov_map, tuple(symbols)).midpoint


def _is_iid(model: GibbsModel) -> bool:
    T = model.transition
    return model.depth == 1 and bool(np.all(np.abs(T - T[0]) <= 1e-14))


def _chain_sampler(model: GibbsModel, rng: np.random.Generator):
    """Stateful sampler continuing the stationary chain; returns f(n) -> symbols."""
    cum_rows = np.cumsum(model.transition, axis=1)
    cum_pi = np.cumsum(model.stationary)
    state = [-1]
    pending: list[int] = []
    iid = _is_iid(model)
    row0 = cum_rows[0]
    last_symbol = {i: s[-1] for i, s in enumerate(model.states)}

    n_states = len(model.states)

    def gen(n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.int64)
        filled = 0
        if state[0] == -1:
            s0 = min(int(np.searchsorted(cum_pi, rng.random())), n_states - 1)
            state[0] = s0
            pending.extend(model.states[s0])
        while pending and filled < n:
            out[filled] = pending.pop(0)
            filled += 1
        if filled < n and iid:
            idx = np.searchsorted(row0, rng.random(n - filled))
            out[filled:] = np.minimum(idx, n_states - 1)
            return out
        while filled < n:
            u = rng.random()
            nxt = min(int(np.searchsorted(cum_rows[state[0]], u)), n_states - 1)
            state[0] = nxt
            out[filled] = last_symbol[nxt]
            filled += 1
        return out

    return gen


def sample_word(model: GibbsModel, m: int, rng: np.random.Generator) -> np.ndarray:
    """Length-m symbol word from the model's stationary chain."""
    if m < model.depth:
        raise ValueError(f"prefix length {m} below potential depth {model.depth}")
    return _chain_sampler(model, rng)(m).astype(
        np.uint8 if model.map.Q <= 255 else np.int64)


def sample_point(model: GibbsModel, m: int, seed) -> SamplePoint:
    """Deterministic-for-seed sample: a stationary-chain word of length m,
    realized as the midpoint of its cylinder."""
    rng = np.random.default_rng(seed)
    word = sample_word(model, m, rng)
    return SamplePoint(model.map, word, model.model_id, seed, m)


# -- first-hit scanning -------------------------------------------------------------


def _tail_points(markov_map: MarkovMap, p: Fraction, n0: int, n_max: int):
    """Exact continuation (n0, p), (n0+1, T p), ... with cycle stop and
    denominator guard, for scans past the end of a finite word."""
    cap = max(DENOMINATOR_BIT_CAP, p.denominator.bit_length())
    yield n0, p
    q = p
    anchor = None
    next_anchor = 2 * n0
    for nn in range(n0 + 1, n_max + 1):
        q = markov_map.step(q)
        if q.denominator.bit_length() > cap:
            raise DenominatorOverflow(
                f"orbit denominator exceeded {cap} bits at step {nn}")
        yield nn, q
        if q == anchor:
            return
        if nn == next_anchor:
            anchor = q
            next_anchor *= 2


def _scan_points(point_iter, y: Fraction, radii: Sequence[Fraction],
                 taus: list, i: int) -> int:
    los = [y - r for r in radii]
    his = [y + r for r in radii]
    k = len(radii)
    for n, p in point_iter:
        while i < k and los[i] < p < his[i]:
            taus[i] = n
            i += 1
        if i == k:
            break
    return i


def _scan_word_uniform(orbit: WordOrbit, y: Fraction, radii: Sequence[Fraction],
                       n_max: int, taus: list) -> None:
    b = orbit.base
    L = _UNIFORM_WINDOW
    src = orbit.source
    m = src.finite_length
    bl = b ** L
    hit_lo, hit_hi, miss_lo, miss_hi = [], [], [], []
    for r in radii:
        p1 = (y - r) * bl
        p2 = (y + r) * bl
        hit_lo.append(math.floor(p1) + 1)
        hit_hi.append(math.ceil(p2) - 2)
        miss_lo.append(math.floor(p1) - 1)
        miss_hi.append(math.ceil(p2))
    k = len(radii)
    i = 0
    lead = b ** (L - 1)

    n_roll_end = n_max if m is None else min(n_max, m - L)
    n = 1
    if n_roll_end >= 1:
        src.ensure(1 + L)
        v = 0
        for idx in range(1, 1 + L):
            v = v * b + src[idx]
        while True:
            while i < k:
                if hit_lo[i] <= v <= hit_hi[i]:
                    taus[i] = n
                    i += 1
                elif v <= miss_lo[i] or v >= miss_hi[i]:
                    break
                elif orbit.resolve_in_ball(n, y, radii[i], L):
                    taus[i] = n
                    i += 1
                else:
                    break
            if i == k or n == n_roll_end:
                break
            n += 1
            src.ensure(n + L)
            v = (v - src[n - 1] * lead) * b + src[n + L - 1]
    if i == k or n_max <= n_roll_end:
        return
    # finite word nearly exhausted: continue on the exact tail
    n0 = max(n_roll_end + 1, 1)
    p = orbit.exact_point(n0)
    _scan_points(_tail_points(orbit.map, p, n0, n_max), y, radii, taus, i)


def _scan_word_affine(orbit: WordOrbit, y: Fraction, radii: Sequence[Fraction],
                      n_max: int, taus: list, width: int = 48) -> None:
    mp = orbit.map
    src = orbit.source
    m = src.finite_length
    k = len(radii)
    los = [y - r for r in radii]
    his = [y + r for r in radii]
    i = 0

    n_roll_end = n_max if m is None else min(n_max, m - width)
    if n_roll_end >= 1:
        src.ensure(1 + width)
        A, B = Fraction(1), Fraction(0)
        for idx in range(width, 0, -1):
            br = mp.branches[src[idx]]
            A, B = A / br.slope, (B - br.intercept) / br.slope
        n = 1
        while True:
            u_lo, u_hi = branch_image_interval(mp, src[n + width - 1])
            e1, e2 = A * u_lo + B, A * u_hi + B
            lo, hi = (e1, e2) if e1 <= e2 else (e2, e1)
            while i < k:
                if los[i] < lo and hi < his[i]:
                    taus[i] = n
                    i += 1
                elif hi <= los[i] or lo >= his[i]:
                    break
                elif orbit.resolve_in_ball(n, y, radii[i], width):
                    taus[i] = n
                    i += 1
                else:
                    break
            if i == k or n == n_roll_end:
                break
            drop = mp.branches[src[n]]
            A, B = drop.slope * A, drop.slope * B + drop.intercept
            n += 1
            src.ensure(n + width)
            new = mp.branches[src[n + width - 1]]
            A, B = A / new.slope, B - A * new.intercept / new.slope
    if i == k or (m is not None and n_roll_end >= n_max) or m is None:
        return
    n0 = max(n_roll_end + 1, 1)
    p = orbit.exact_point(n0)
    _scan_points(_tail_points(mp, p, n0, n_max), y, radii, taus, i)


def _first_hits(markov_map: MarkovMap, x_like, y: Fraction,
                radii: Sequence[Fraction], n_max: int) -> list[int | None]:
    """First n in [1, n_max] with |T^n x - y| < r, per radius.

    Radii must be strictly decreasing (nested balls), so a certain miss for
    one radius is a miss for all smaller ones.
    """
    if any(r2 >= r1 for r1, r2 in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    taus: list[int | None] = [None] * len(radii)
    if isinstance(x_like, SamplePoint):
        x_like = x_like.orbit()
    if isinstance(x_like, WordOrbit):
        if x_like.base is not None:
            _scan_word_uniform(x_like, y, radii, n_max, taus)
        else:
            _scan_word_affine(x_like, y, radii, n_max, taus)
        return taus
    x = Fraction(x_like)
    orbit = RationalOrbit(markov_map, x)
    _scan_points(orbit.points(n_max), y, radii, taus, 0)
    return taus


@dataclass
class HittingRecord:
    """First-passage record: smallest n in [1, horizon] with T^n x inside the
    open ball B(y, r), or None with exceeded=True."""

    x: object
    y: Fraction
    radius: Fraction
    tau: int | None
    horizon: int

    @property
    def exceeded(self) -> bool:
        return self.tau is None


def hitting_time(markov_map: MarkovMap, x, y, r, n_max: int) -> HittingRecord:
    """Exact first hitting time of the orbit of x into B(y, r) (open ball)."""
    y = Fraction(y)
    r = Fraction(r)
    if r <= 0 or n_max < 1:
        raise ValueError("need r > 0 and n_max >= 1")
    taus = _first_hits(markov_map, x, y, [r], n_max)
    return HittingRecord(x, y, r, taus[0], n_max)


@dataclass
class RateEstimate:
    """log tau / (j log 2) across dyadic radii 2^-j, with tail summaries.

    Radii whose hit exceeded the horizon carry quotient None and count as
    infinite in the proxies (the paper's convention for unhit targets).
    """

    j_values: tuple[int, ...]
    taus: tuple[int | None, ...]
    quotients: tuple[float | None, ...]
    tail_start: int
    liminf_proxy: float
    limsup_proxy: float

    @property
    def tail_quotients(self) -> tuple[float, ...]:
        return tuple(q for j, q in zip(self.j_values, self.quotients)
                     if j > self.tail_start and q is not None)


def _estimate_from_taus(js: tuple[int, ...], taus: Sequence[int | None],
                        j_max: int) -> RateEstimate:
    log2 = math.log(2)
    quotients = tuple(None if t is None else math.log(t) / (j * log2)
                      for j, t in zip(js, taus))
    tail_start = j_max // 2
    tail = [q for j, q in zip(js, quotients) if j > tail_start]
    finite = [q for q in tail if q is not None]
    inf_tail = len(finite) < len(tail)
    liminf_proxy = min(finite) if finite else math.inf
    limsup_proxy = math.inf if inf_tail else (max(finite) if finite else math.inf)
    return RateEstimate(js, tuple(taus), quotients, tail_start,
                        liminf_proxy, limsup_proxy)


def rate_estimate(markov_map: MarkovMap, x, y, j_max: int,
                  n_max: int) -> RateEstimate:
    """Hitting times at radii 2^-j for j = 4..j_max in one orbit pass."""
    if j_max < 4:
        raise ValueError("j_max must be >= 4")
    y = Fraction(y)
    js = tuple(range(4, j_max + 1))
    radii = [Fraction(1, 2 ** j) for j in js]
    taus = _first_hits(markov_map, x, y, radii, n_max)
    return _estimate_from_taus(js, taus, j_max)


# -- the hitting-time law experiment ---------------------------------------------


def predicted_hitting_rate(model_phi: GibbsModel, model_psi: GibbsModel) -> float:
    """-int phi d(mu_psi) / int log|T'| d(mu_psi) for the normalized phi."""
    num = -model_psi.integrate(model_phi.potential)
    den = -model_psi.integrate(Potential.neg_log_deriv(model_psi.map))
    return num / den


@dataclass
class TrialRecord:
    trial: int
    estimate: RateEstimate


@dataclass
class HittingLawResult:
    trials: int
    j_max: int
    n_max: int
    seed: int
    predicted: float
    median_tail: float
    records: list[TrialRecord]

    @property
    def error(self) -> float:
        return abs(self.median_tail - self.predicted)


def _run_hitting_trial(args) -> tuple[int, RateEstimate]:
    (trial, model_phi, model_psi, child, j_max, n_max) = args
    ss_x, ss_y = child.spawn(2)
    rng_y = np.random.default_rng(ss_y)
    y_word = sample_word(model_psi, TARGET_PREFIX_LEN, rng_y)
    y = cylinder_midpoint(model_psi.map, y_word)
    rng_x = np.random.default_rng(ss_x)
    source = SymbolSource(generator=_chain_sampler(model_phi, rng_x))
    orbit = WordOrbit(model_phi.map, source)
    js = tuple(range(4, j_max + 1))
    radii = [Fraction(1, 2 ** j) for j in js]
    taus = _first_hits(model_phi.map, orbit, y, radii, n_max)
    return trial, _estimate_from_taus(js, taus, j_max)


def hitting_law_experiment(model_phi: GibbsModel, model_psi: GibbsModel,
                           trials: int, j_max: int, n_max: int, seed: int,
                           workers: int | None = None) -> HittingLawResult:
    """Monte Carlo check of the hitting-rate law: x ~ mu_phi, y ~ mu_psi,
    pooled tail quotients against the predicted integral ratio.

    Trials own independent spawned RNG streams and are merged by index, so
    results are reproducible for a given seed regardless of scheduling.
    """
    if not model_phi.map.same_geometry(model_psi.map):
        raise ValueError("both models must live on the same map")
    children = np.random.SeedSequence(seed).spawn(trials)
    payloads = [(t, model_phi, model_psi, children[t], j_max, n_max)
                for t in range(trials)]
    if workers is None:
        workers = min(os.cpu_count() or 1, trials)
    if workers <= 1:
        results = [_run_hitting_trial(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_hitting_trial, payloads, chunksize=4))
    records = [TrialRecord(t, est) for t, est in results]
    pooled = [q for rec in records for q in rec.estimate.tail_quotients]
    if not pooled:
        raise GibbsLabError("no finite tail quotients observed")
    predicted = predicted_hitting_rate(model_phi, model_psi)
    return HittingLawResult(trials, j_max, n_max, seed, predicted,
                            float(statistics.median(pooled)), records)
