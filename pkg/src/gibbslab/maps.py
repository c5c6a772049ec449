"""Expanding piecewise-affine Markov interval maps with exact rational data.

A map is given by a partition 0 = a_0 < a_1 < ... < a_Q = 1 and one affine
branch per partition interval.  All geometry (endpoints, orbits, cylinder
intervals, derivatives) is exact in rational arithmetic; each branch must be
expanding and must send its interval onto a union of partition intervals
whose endpoints match partition points exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import (
    GenerationTooLarge,
    InadmissibleWord,
    NonExpanding,
    NonMarkovImage,
    NotCovering,
)

Word = tuple[int, ...]

#: default cap on the number of cylinders a single enumeration may produce
CYLINDER_CAP = 10_000_000


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"expected rational, got {type(x).__name__}: {x!r}")


@dataclass(frozen=True)
class PartitionSpec:
    """Ordered rational endpoints a_0 < a_1 < ... < a_Q with a_0=0, a_Q=1."""

    endpoints: tuple[Fraction, ...]

    def __post_init__(self):
        eps = tuple(_frac(e) for e in self.endpoints)
        object.__setattr__(self, "endpoints", eps)
        if len(eps) < 3:
            raise ValueError("partition needs at least two intervals")
        if eps[0] != 0 or eps[-1] != 1:
            raise ValueError("partition must start at 0 and end at 1")
        if any(a >= b for a, b in zip(eps, eps[1:])):
            raise ValueError("partition endpoints must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.endpoints) - 1


@dataclass(frozen=True)
class BranchSpec:
    """Affine branch x -> slope*x + intercept with its declared Markov image."""

    slope: Fraction
    intercept: Fraction
    image_symbols: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "slope", _frac(self.slope))
        object.__setattr__(self, "intercept", _frac(self.intercept))
        object.__setattr__(self, "image_symbols", frozenset(self.image_symbols))


@dataclass(frozen=True)
class Cylinder:
    """Basic interval of generation n: the points whose first n symbols are `word`."""

    word: Word
    left: Fraction
    right: Fraction
    generation: int

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    @property
    def midpoint(self) -> Fraction:
        return (self.left + self.right) / 2


class MarkovMap:
    """Validated expanding Markov map; immutable after construction.

    Instances should be created through :func:`build_map`, which performs the
    expansion, Markov-image and covering checks.
    """

    def __init__(self, partition: PartitionSpec, branches: tuple[BranchSpec, ...],
                 admissibility: tuple[tuple[int, ...], ...], primitivity_exponent: int):
        self.partition = partition
        self.branches = branches
        self.admissibility = admissibility
        self.primitivity_exponent = primitivity_exponent
        self.endpoints = partition.endpoints
        self.Q = partition.size
        slopes = [abs(b.slope) for b in branches]
        #: cylinder length bounds: L2**-n <= |I| <= L1**-n
        self.expansion_min = min(slopes)   # L1
        self.expansion_max = max(slopes)   # L2
        self.distortion = Fraction(1)      # affine branches: L = 1
        self._successors = tuple(tuple(sorted(b.image_symbols)) for b in branches)

    # -- symbolic structure ------------------------------------------------

    def successors(self, symbol: int) -> tuple[int, ...]:
        return self._successors[symbol]

    def is_admissible(self, word: Sequence[int]) -> bool:
        if any(not 0 <= s < self.Q for s in word):
            return False
        return all(b in self._successors[a] for a, b in zip(word, word[1:]))

    def require_admissible(self, word: Sequence[int]) -> Word:
        w = tuple(word)
        if not w or not self.is_admissible(w):
            raise InadmissibleWord(f"word {w} is not admissible")
        return w

    def smallest_continuation(self, word: Sequence[int], extra: int) -> Word:
        """Extend `word` by `extra` symbols, lexicographically smallest admissible."""
        w = list(word)
        for _ in range(extra):
            w.append(self._successors[w[-1]][0])
        return tuple(w)

    # -- pointwise dynamics --------------------------------------------------

    def branch_of(self, x: Fraction) -> int:
        """Symbol of the half-open interval [a_k, a_{k+1}) containing x.

        x == 1 is assigned the last branch; this can only be reached
        mid-orbit through an orientation-reversing branch.
        """
        if x >= 1:
            return self.Q - 1
        lo, hi = 0, self.Q - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if x >= self.endpoints[mid]:
                lo = mid
            else:
                hi = mid - 1
        return lo

    def apply_branch(self, symbol: int, x: Fraction) -> Fraction:
        b = self.branches[symbol]
        return b.slope * x + b.intercept

    def step(self, x: Fraction) -> Fraction:
        return self.apply_branch(self.branch_of(x), x)

    # -- admissibility matrix utilities --------------------------------------

    def count_words(self, n: int) -> int:
        """Number of admissible words of length n (sum of entries of A^(n-1))."""
        if n < 1:
            raise ValueError("generation must be >= 1")
        row = [1] * self.Q
        for _ in range(n - 1):
            new = [0] * self.Q
            for a in range(self.Q):
                if row[a]:
                    for b in self._successors[a]:
                        new[b] += row[a]
            row = new
        return sum(row)

    @property
    def uniform_grid_base(self) -> int | None:
        """Q when the map is x -> Q*x - k on a uniform 1/Q grid, else None.

        For such maps the itinerary is the base-Q digit expansion, which
        enables integer fast paths in orbit scans.
        """
        q = self.Q
        for i, e in enumerate(self.endpoints):
            if e != Fraction(i, q):
                return None
        for k, b in enumerate(self.branches):
            if b.slope != q or b.intercept != -k:
                return None
        return q

    def same_geometry(self, other: "MarkovMap") -> bool:
        return (self.endpoints == other.endpoints
                and all(a.slope == b.slope and a.intercept == b.intercept
                        and a.image_symbols == b.image_symbols
                        for a, b in zip(self.branches, other.branches)))

    def __repr__(self):
        return (f"MarkovMap(Q={self.Q}, R={self.primitivity_exponent}, "
                f"slopes={[str(b.slope) for b in self.branches]})")


def build_map(partition: PartitionSpec, branches: Sequence[BranchSpec]) -> MarkovMap:
    """Validate the map data and derive the admissibility matrix.

    Raises NonExpanding, NonMarkovImage or NotCovering when a defining
    property fails.
    """
    branches = tuple(branches)
    Q = partition.size
    if len(branches) != Q:
        raise ValueError(f"expected {Q} branches, got {len(branches)}")
    eps = partition.endpoints

    for k, b in enumerate(branches):
        if abs(b.slope) <= 1:
            raise NonExpanding(f"branch {k} has |slope| = {abs(b.slope)} <= 1")

    index_of = {e: i for i, e in enumerate(eps)}
    for k, b in enumerate(branches):
        u, v = b.slope * eps[k] + b.intercept, b.slope * eps[k + 1] + b.intercept
        lo, hi = min(u, v), max(u, v)
        if lo not in index_of or hi not in index_of:
            raise NonMarkovImage(
                f"branch {k} image [{lo}, {hi}] does not align with partition points")
        expected = frozenset(range(index_of[lo], index_of[hi]))
        if not expected:
            raise NonMarkovImage(f"branch {k} image [{lo}, {hi}] is degenerate")
        if expected != b.image_symbols:
            raise NonMarkovImage(
                f"branch {k}: declared images {sorted(b.image_symbols)} but the "
                f"affine image covers {sorted(expected)}")

    adm = tuple(tuple(1 if j in b.image_symbols else 0 for j in range(Q))
                for b in branches)

    # Wielandt bound: a primitive 0/1 matrix has a positive power by (Q-1)^2 + 1.
    limit = (Q - 1) ** 2 + 1
    power = [list(r) for r in adm]
    R = None
    for r in range(1, limit + 1):
        if all(all(e > 0 for e in row) for row in power):
            R = r
            break
        power = [[sum(power[a][c] * adm[c][b] for c in range(Q)) for b in range(Q)]
                 for a in range(Q)]
    if R is None:
        raise NotCovering(
            f"admissibility matrix is not primitive (no positive power up to {limit})")

    return MarkovMap(partition, branches, adm, R)


def doubling_map() -> MarkovMap:
    """x -> 2x mod 1 with the dyadic partition."""
    part = PartitionSpec((Fraction(0), Fraction(1, 2), Fraction(1)))
    return build_map(part, [
        BranchSpec(Fraction(2), Fraction(0), frozenset({0, 1})),
        BranchSpec(Fraction(2), Fraction(-1), frozenset({0, 1})),
    ])


# -- cylinders ----------------------------------------------------------------


def cylinder_for_word(markov_map: MarkovMap, word: Sequence[int]) -> Cylinder:
    """Exact endpoints of the basic interval of `word`.

    Tracks the affine map T^g restricted to the cylinder, so each refinement
    is a constant number of rational operations.
    """
    w = markov_map.require_admissible(word)
    eps = markov_map.endpoints
    b0 = markov_map.branches[w[0]]
    lo, hi = eps[w[0]], eps[w[0] + 1]
    c, d = b0.slope, b0.intercept          # T^g(x) = c*x + d on [lo, hi]
    for sym in w[1:]:
        u = (eps[sym] - d) / c
        v = (eps[sym + 1] - d) / c
        lo, hi = (u, v) if u <= v else (v, u)
        br = markov_map.branches[sym]
        c, d = br.slope * c, br.slope * d + br.intercept
    return Cylinder(w, lo, hi, len(w))


def enumerate_cylinders(markov_map: MarkovMap, n: int,
                        cap: int = CYLINDER_CAP) -> list[Cylinder]:
    """All non-empty basic intervals of generation n, in word-lexicographic order."""
    if n < 1:
        raise ValueError("generation must be >= 1")
    total = markov_map.count_words(n)
    if total > cap:
        raise GenerationTooLarge(f"{total} cylinders at generation {n} exceed cap {cap}")
    eps = markov_map.endpoints
    out: list[Cylinder] = []
    # stack entries: word, cylinder interval, affine data of T^len(word) on it
    stack = []
    for k in range(markov_map.Q - 1, -1, -1):
        b = markov_map.branches[k]
        stack.append(((k,), eps[k], eps[k + 1], b.slope, b.intercept))
    while stack:
        word, lo, hi, c, d = stack.pop()
        if len(word) == n:
            out.append(Cylinder(word, lo, hi, n))
            continue
        for sym in reversed(markov_map.successors(word[-1])):
            u = (eps[sym] - d) / c
            v = (eps[sym + 1] - d) / c
            clo, chi = (u, v) if u <= v else (v, u)
            br = markov_map.branches[sym]
            stack.append((word + (sym,), clo, chi, br.slope * c,
                          br.slope * d + br.intercept))
    return out


def cylinders_touching(markov_map: MarkovMap, lo: Fraction, hi: Fraction,
                       n: int) -> list[Cylinder]:
    """Generation-n cylinders whose closure intersects the closed interval [lo, hi]."""
    if n < 1:
        raise ValueError("generation must be >= 1")
    eps = markov_map.endpoints
    out: list[Cylinder] = []
    stack = []
    for k in range(markov_map.Q - 1, -1, -1):
        b = markov_map.branches[k]
        if eps[k + 1] >= lo and eps[k] <= hi:
            stack.append(((k,), eps[k], eps[k + 1], b.slope, b.intercept))
    while stack:
        word, clo, chi, c, d = stack.pop()
        if len(word) == n:
            out.append(Cylinder(word, clo, chi, n))
            continue
        for sym in reversed(markov_map.successors(word[-1])):
            u = (eps[sym] - d) / c
            v = (eps[sym + 1] - d) / c
            slo, shi = (u, v) if u <= v else (v, u)
            if shi < lo or slo > hi:
                continue
            br = markov_map.branches[sym]
            stack.append((word + (sym,), slo, shi, br.slope * c,
                          br.slope * d + br.intercept))
    return out


def admissible_words(markov_map: MarkovMap, n: int) -> Iterator[Word]:
    """Admissible words of length n, lexicographic, without geometry."""
    if n < 1:
        raise ValueError("generation must be >= 1")
    if n == 1:
        yield from ((k,) for k in range(markov_map.Q))
        return
    for k in range(markov_map.Q):
        stack = [(k,)]
        while stack:
            word = stack.pop()
            if len(word) == n:
                yield word
                continue
            for sym in reversed(markov_map.successors(word[-1])):
                stack.append(word + (sym,))


def locate(markov_map: MarkovMap, x: Fraction, n: int) -> Word:
    """Itinerary of x for n steps under the half-open branch convention."""
    if n < 1:
        raise ValueError("generation must be >= 1")
    x = _frac(x)
    if not 0 <= x < 1:
        raise ValueError("locate expects x in [0, 1)")
    word = []
    for _ in range(n):
        k = markov_map.branch_of(x)
        word.append(k)
        x = markov_map.apply_branch(k, x)
    return tuple(word)


def derivative_product(markov_map: MarkovMap, word: Sequence[int]) -> Fraction:
    """|(T^n)'| on the cylinder of `word`: the product of branch |slopes|."""
    w = markov_map.require_admissible(word)
    prod = Fraction(1)
    for sym in w:
        prod *= abs(markov_map.branches[sym].slope)
    return prod
