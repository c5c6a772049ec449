"""Finite-horizon analogs of the uniform and asymptotic approximation sets.

The horizon-M uniform set is the intersection over N in [i, M] of the union
of open balls B(T^n x, N^-kappa), n <= N.  Sets are rasterized on the dyadic
grid of 2^m boxes: a box is kept iff it (certainly) touches the set, with
every comparison conservative in the outward direction, so the raster always
contains the true finite-horizon set.  Orbit geometry is exact; the only
rounding is on the irrational radii N^-kappa, taken upward.

The cover-growth experiment instruments the surviving-neighborhood counts
N_i from the dimension upper-bound argument at finite scale.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DegenerateFit, GibbsLabError, HorizonOverflow, ParameterOrder
from .dynamics import SamplePoint
from .maps import MarkovMap, cylinder_for_word, cylinders_touching
from .orbits import SymbolSource, WordOrbit, float_enclosures
from .thermo import GibbsModel, gibbs_constant

ORBIT_CAP = 1 << 26          # hard cap on cover horizons
A_SET_PROBE_DEPTH = 8        # dyadic radii tested per A_n membership probe
_DIST_SLOP = 2.0 ** -51      # absolute slack absorbing float subtraction error


@dataclass(frozen=True)
class ApproxParams:
    """Parameters of a finite-horizon uniform-set approximation."""

    kappa: float
    start_index: int
    horizon: int
    resolution: int

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if not 1 <= self.start_index <= self.horizon:
            raise ValueError("need horizon >= start_index >= 1")
        if self.resolution < 4:
            raise ValueError("resolution must be >= 4")


@dataclass
class GridIndicator:
    """Bitset over the 2^m dyadic boxes [k 2^-m, (k+1) 2^-m)."""

    resolution: int
    bits: np.ndarray

    def __post_init__(self):
        if self.bits.shape != (1 << self.resolution,):
            raise ValueError("bitset size must be 2^resolution")

    @property
    def box_count(self) -> int:
        return int(self.bits.sum())

    def complement(self) -> "GridIndicator":
        return GridIndicator(self.resolution, ~self.bits)


def lebesgue_fraction(indicator: GridIndicator) -> float:
    """(number of set boxes) * 2^-m."""
    return indicator.box_count / (1 << indicator.resolution)


def _orbit_for(markov_map: MarkovMap, x):
    if isinstance(x, SamplePoint):
        return x.orbit()
    if isinstance(x, WordOrbit):
        return x
    return Fraction(x)


def _radii_upper(kappa: float, n_max: int) -> np.ndarray:
    """r[n] >= n^-kappa for n = 1..n_max, nonincreasing (r[0] unused).

    np.power is not correctly rounded; two upward ulps cover its error.
    """
    n = np.arange(n_max + 1, dtype=float)
    n[0] = 1.0
    r = np.power(n, -kappa)
    r = np.nextafter(np.nextafter(r, np.inf), np.inf)
    r[0] = np.inf
    np.minimum.accumulate(r[1:], out=r[1:])
    return r


def uniform_cover(markov_map: MarkovMap, x, params: ApproxParams) -> GridIndicator:
    """Outer raster of the horizon-M uniform approximation set of x.

    Sweep over orbit steps: the center at step n protects a box for exactly
    the horizons N in [max(n, i), E] with E the last N satisfying
    dist(box, T^n x) < N^-kappa; a box survives iff [i, M] is covered
    without gaps.  Protections arrive in order of n, so one pass suffices.
    """
    i, M, m = params.start_index, params.horizon, params.resolution
    if M > ORBIT_CAP:
        raise HorizonOverflow(f"horizon {M} exceeds cap {ORBIT_CAP}")
    kappa = params.kappa
    nb = 1 << m
    scale = float(nb)
    r = _radii_upper(kappa, M)
    neg_rr = -r[i:M + 1]  # ascending; E(d) = i + count(r > d) - 1
    covered = np.full(nb, i - 1, dtype=np.int64)
    dead = np.zeros(nb, dtype=bool)
    ks_all = np.arange(nb, dtype=np.int64)

    for n, lo, hi in float_enclosures(markov_map, _orbit_for(markov_map, x), M):
        s = n if n > i else i
        rs = r[s]
        k_lo = int((lo - rs) * scale)
        k_hi = int((hi + rs) * scale)
        if k_hi < 0 or k_lo >= nb:
            continue
        k_lo = max(k_lo - 1, 0)
        k_hi = min(k_hi + 1, nb - 1)
        ks = ks_all[k_lo:k_hi + 1]
        box_lo = ks * (1.0 / scale)
        box_hi = (ks + 1) * (1.0 / scale)
        d = np.maximum(box_lo - hi, lo - box_hi) - _DIST_SLOP
        np.maximum(d, 0.0, out=d)
        prot = d < rs
        if not prot.any():
            continue
        ks = ks[prot]
        d = d[prot]
        cu = covered[ks]
        active = ~dead[ks] & (cu < M)
        if not active.any():
            continue
        ks = ks[active]
        d = d[active]
        cu = cu[active]
        e = i + np.searchsorted(neg_rr, -d, side="left") - 1
        np.minimum(e, M, out=e)
        gap = s > cu + 1
        dead[ks[gap]] = True
        keep = ~gap
        kk = ks[keep]
        covered[kk] = np.maximum(covered[kk], e[keep])

    alive = ~dead & (covered >= M)
    return GridIndicator(m, alive)


def asymptotic_cover(markov_map: MarkovMap, x, kappa: float, n_min: int,
                     M: int, m: int) -> GridIndicator:
    """Outer raster of the union of B(T^n x, n^-kappa) for n_min <= n <= M."""
    if M > ORBIT_CAP:
        raise HorizonOverflow(f"horizon {M} exceeds cap {ORBIT_CAP}")
    if not 1 <= n_min <= M:
        raise ValueError("need M >= n_min >= 1")
    nb = 1 << m
    scale = float(nb)
    r = _radii_upper(kappa, M)
    bits = np.zeros(nb, dtype=bool)
    for n, lo, hi in float_enclosures(markov_map, _orbit_for(markov_map, x), M):
        if n < n_min:
            continue
        rn = r[n]
        k_lo = max(int((lo - rn) * scale) - 1, 0)
        k_hi = min(int((hi + rn) * scale) + 1, nb - 1)
        if k_hi < k_lo:
            continue
        ks = np.arange(k_lo, k_hi + 1)
        box_lo = ks * (1.0 / scale)
        box_hi = (ks + 1) * (1.0 / scale)
        d = np.maximum(np.maximum(box_lo - hi, lo - box_hi) - _DIST_SLOP, 0.0)
        bits[ks[d < rn]] = True
    return GridIndicator(m, bits)


def box_dimension_fit(indicators: Sequence[GridIndicator]) -> tuple[float, float]:
    """Least-squares slope of log(box count) against m log 2, with RMS residual.

    A desk-scale proxy for the dimension of the finite-horizon set; it carries
    no theorem, and empty indicators make the fit degenerate.
    """
    if len(indicators) < 3:
        raise ValueError("need at least 3 resolutions")
    counts = [ind.box_count for ind in indicators]
    if any(c == 0 for c in counts):
        raise DegenerateFit("an indicator has no set boxes")
    xs = np.array([ind.resolution for ind in indicators], float) * math.log(2)
    ys = np.log(np.array(counts, float))
    slope, intercept = np.polyfit(xs, ys, 1)
    rms = float(np.sqrt(np.mean((slope * xs + intercept - ys) ** 2)))
    return float(slope), rms


def _shifted_x(markov_map: MarkovMap, x):
    """The point Tx in the same representation as x."""
    if isinstance(x, SamplePoint):
        word = x.word[1:]
        return WordOrbit(markov_map, SymbolSource(symbols=word.tolist()))
    if isinstance(x, WordOrbit):
        raise ValueError("pass a SamplePoint or rational for inclusion_check")
    return markov_map.step(Fraction(x))


def inclusion_check(markov_map: MarkovMap, x, kappa: float, i: int, M: int,
                    resolution: int = 10) -> bool:
    """Finite mechanism behind U(x) minus {Tx} being contained in U(Tx).

    Every raster box of the uniform cover of x that cannot rely on the n = 1
    witness (it is at least the level-i radius away from Tx) must appear in
    the uniform cover of Tx: the witness shift n -> n-1 preserves every
    protection interval.  Always true; returns the verified verdict.
    """
    params = ApproxParams(kappa, i, M, resolution)
    ind_x = uniform_cover(markov_map, x, params)
    ind_tx = uniform_cover(markov_map, _shifted_x(markov_map, x), params)

    gen = float_enclosures(markov_map, _orbit_for(markov_map, x), 1)
    _, lo1, hi1 = next(gen)
    nb = 1 << resolution
    scale = float(nb)
    ks = np.arange(nb)
    box_lo = ks * (1.0 / scale)
    box_hi = (ks + 1) * (1.0 / scale)
    d1 = np.maximum(np.maximum(box_lo - hi1, lo1 - box_hi) - _DIST_SLOP, 0.0)
    r_i = _radii_upper(kappa, max(i, 1))[i]
    near_tx = d1 < r_i
    must_shift = ind_x.bits & ~near_tx
    return bool(np.all(~must_shift | ind_tx.bits))


# -- cover growth (finite-scale surviving-neighborhood counts) --------------------


def _merge_intervals(ivs: list[tuple[Fraction, Fraction]]):
    if not ivs:
        return []
    ivs.sort()
    out = [ivs[0]]
    for lo, hi in ivs[1:]:
        plo, phi = out[-1]
        if lo <= phi:
            if hi > phi:
                out[-1] = (plo, hi)
        else:
            out.append((lo, hi))
    return out


def _intersect_lists(a, b):
    out = []
    ia = ib = 0
    while ia < len(a) and ib < len(b):
        lo = max(a[ia][0], b[ib][0])
        hi = min(a[ia][1], b[ib][1])
        if lo <= hi:
            out.append((lo, hi))
        if a[ia][1] < b[ib][1]:
            ia += 1
        else:
            ib += 1
    return out


def _touches(ivs, starts, lo, hi) -> bool:
    idx = bisect_right(starts, hi)
    return idx > 0 and ivs[idx - 1][1] >= lo


@dataclass
class CoverGrowth:
    """Per-level surviving-neighborhood counts and their growth ratios."""

    levels: tuple[int, ...]
    counts: tuple[int, ...]        # N_j
    additions: tuple[int, ...]     # members of S_j new relative to S_{j-1}
    ratios: tuple[float | None, ...]
    l: int
    a: float
    b: float
    kappa: float
    epsilon: float
    n_index: int                   # the n of the mass-decay set A_n
    thetas: tuple[int, ...]

    def recursion_holds(self) -> bool:
        return all(n2 <= n1 + add for n1, n2, add in
                   zip(self.counts, self.counts[1:], self.additions[1:]))


def cover_growth(markov_map: MarkovMap, model: GibbsModel, x, l: int,
                 a: float, b: float, kappa: float, i_max: int) -> CoverGrowth:
    """Track the covering construction from the dimension upper bound.

    At level j the orbit points T^k x, k <= 2^j, spawn neighborhoods: the
    generation-theta_j cylinders within 2^-(kappa j) of the one containing
    the point.  Survivors are neighborhoods meeting the running intersection
    G (seeded at level l and filtered through a mass-decay test), and N_j
    counts them.  The mass-decay set membership is probed at the midpoint of
    the orbit cylinder over dyadic radii below 2^-n, with ball masses bounded
    by the touching cylinders' masses; these finite-scale proxies are what
    make the construction computable and are reported, not asserted.
    """
    if not (1.0 / kappa < b < a):
        raise ParameterOrder(f"need 1/kappa < b < a, got 1/kappa={1/kappa}, "
                             f"b={b}, a={a}")
    if not 1 <= l <= i_max:
        raise ParameterOrder("need 1 <= l <= i_max")
    n_index = math.ceil(kappa * l - math.log2(12)) - 1
    if n_index < 1:
        raise ParameterOrder(f"l={l} too small: no n >= 1 with 12*2^(-kappa l) "
                             f"< 2^-n")
    gamma = gibbs_constant(model, 8)
    epsilon = gamma ** 3 * 12.0 ** b * 2.0 ** ((1 - b * kappa) * l)

    log2_l1 = math.log2(float(markov_map.expansion_min))
    thetas = {j: int(kappa * j / log2_l1) + 1 for j in range(l, i_max + 1)}

    orbit = _orbit_for(markov_map, x)
    if isinstance(orbit, Fraction):
        word_needed = (1 << i_max) + thetas[i_max] + 1
        from .maps import locate
        word = locate(markov_map, orbit, word_needed)
        orbit = WordOrbit(markov_map, SymbolSource(symbols=list(word)))
    src = orbit.source
    need = (1 << i_max) + thetas[i_max] + 1
    if not src.ensure(need):
        raise GibbsLabError(f"cover_growth needs {need} itinerary symbols")

    def region(k: int, j: int) -> tuple[list[tuple[Fraction, Fraction]], Fraction]:
        """Neighborhood of I_theta_j(T^k x) and the orbit cylinder's midpoint."""
        th = thetas[j]
        w = tuple(src[k + t] for t in range(th))
        c = cylinder_for_word(markov_map, w)
        rad = Fraction(1, 2 ** max(int(kappa * j), 1))
        cyls = cylinders_touching(markov_map, c.left - rad, c.right + rad, th)
        return ([(cc.left, cc.right) for cc in cyls], c.midpoint)

    probe_cache: dict[tuple[Fraction, int], bool] = {}

    def in_decay_set(y: Fraction) -> bool:
        key = (y, n_index)
        if key in probe_cache:
            return probe_cache[key]
        ok = True
        for jr in range(n_index + 1, n_index + 1 + A_SET_PROBE_DEPTH):
            rad = Fraction(1, 2 ** jr)
            g = max(int(math.ceil(jr / log2_l1)), 1)
            mass = sum(model.cylinder_measure(c.word) for c in
                       cylinders_touching(markov_map, y - rad, y + rad, g))
            if mass >= 2.0 ** (-jr * b):
                ok = False
                break
        probe_cache[key] = ok
        return ok

    levels, counts, additions, ratios = [], [], [], []
    survivors: set[int] = set()
    g_list: list[tuple[Fraction, Fraction]] = []
    starts: list[Fraction] = []

    for j in range(l, i_max + 1):
        new_survivors: set[int] = set()
        u_all: list[tuple[Fraction, Fraction]] = []
        for k in range(1, (1 << j) + 1):
            ivs, rep = region(k, j)
            u_all.extend(ivs)
            if j == l:
                if in_decay_set(rep):
                    new_survivors.add(k)
            else:
                if in_decay_set(rep) and any(
                        _touches(g_list, starts, lo, hi) for lo, hi in ivs):
                    new_survivors.add(k)
        u_merged = _merge_intervals(u_all)
        if j == l:
            seed = []
            for k in new_survivors:
                seed.extend(region(k, j)[0])
            g_list = _merge_intervals(seed)
        else:
            g_list = _intersect_lists(g_list, u_merged)
        starts = [lo for lo, _ in g_list]
        added = len(new_survivors - survivors) if j > l else len(new_survivors)
        levels.append(j)
        counts.append(len(new_survivors))
        additions.append(added)
        ratios.append(None if not counts[-2:-1] or counts[-2] == 0
                      else counts[-1] / counts[-2])
        survivors = new_survivors
        if not survivors:
            # remaining levels stay empty
            for jj in range(j + 1, i_max + 1):
                levels.append(jj)
                counts.append(0)
                additions.append(0)
                ratios.append(None)
            break

    return CoverGrowth(tuple(levels), tuple(counts), tuple(additions),
                       tuple(ratios), l, a, b, kappa, epsilon, n_index,
                       tuple(thetas[j] for j in levels))
