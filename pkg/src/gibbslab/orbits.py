"""Orbit enclosure machinery shared by the hitting and covering experiments.

Two exact representations of an orbit point T^n x:

* ``RationalOrbit``: x is a plain rational; iterates are exact Fractions.
  Denominators can only grow by branch-slope denominators; a bit-length cap
  fails loudly instead of rounding.  Brent-style cycle detection lets scans
  stop once the (eventually periodic) orbit has been exhausted.

* ``WordOrbit``: x is the midpoint of the cylinder of a sampled word, so
  T^n x is enclosed by the cylinder of the word's suffix window.  On maps
  whose itinerary is a base-Q digit expansion the window is a rolling
  integer; otherwise it is a sliding composition of inverse branches.
  Enclosures are exact rational intervals, refinable on demand down to the
  exact point, which keeps every downstream comparison decidable.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Iterator, Sequence

from .errors import DenominatorOverflow, GibbsLabError
from .maps import MarkovMap, cylinder_for_word

DENOMINATOR_BIT_CAP = 4096
_RESOLVE_EXTRA_LIMIT = 2048


class RationalOrbit:
    """Exact orbit of a rational point, starting at T^1 x."""

    def __init__(self, markov_map: MarkovMap, x: Fraction,
                 denominator_bit_cap: int = DENOMINATOR_BIT_CAP):
        if not 0 <= x <= 1:
            raise ValueError("orbit start must lie in [0, 1]")
        self.map = markov_map
        self.x0 = Fraction(x)
        self.cap = max(denominator_bit_cap, x.denominator.bit_length())

    def points(self, n_max: int, stop_on_cycle: bool = True,
               ) -> Iterator[tuple[int, Fraction]]:
        """Yield (n, T^n x) for n = 1..n_max.

        With stop_on_cycle the stream ends once the (eventually periodic)
        orbit has revisited a Brent anchor: every distinct orbit value has
        been yielded by then, which is enough for first-hit scans.
        """
        m = self.map
        x = self.x0
        anchor = None
        next_anchor = 1
        for n in range(1, n_max + 1):
            x = m.step(x)
            if x.denominator.bit_length() > self.cap:
                raise DenominatorOverflow(
                    f"orbit denominator exceeded {self.cap} bits at step {n}")
            yield n, x
            if stop_on_cycle:
                if x == anchor:
                    return  # the cycle values have all been yielded
                if n == next_anchor:
                    anchor = x
                    next_anchor *= 2


class SymbolSource:
    """Random-access view over a finite word or a lazily extended sample stream."""

    def __init__(self, symbols: Sequence[int] | None = None,
                 generator: Callable[[int], Sequence[int]] | None = None,
                 chunk: int = 1 << 16):
        self._buf: list[int] = list(symbols) if symbols is not None else []
        self._gen = generator
        self._chunk = chunk
        self.finite_length = len(self._buf) if generator is None else None

    def ensure(self, upto: int) -> bool:
        """Grow the buffer to cover index upto-1; False if the word is shorter."""
        if len(self._buf) >= upto:
            return True
        if self._gen is None:
            return False
        while len(self._buf) < upto:
            got = self._gen(max(self._chunk, upto - len(self._buf)))
            self._buf.extend(int(s) for s in got)
        return True

    def __getitem__(self, i: int) -> int:
        return self._buf[i]

    def prefix(self, n: int) -> tuple[int, ...]:
        self.ensure(n)
        return tuple(self._buf[:n])


def branch_image_interval(markov_map: MarkovMap, symbol: int) -> tuple[Fraction, Fraction]:
    eps = markov_map.endpoints
    img = sorted(markov_map.branches[symbol].image_symbols)
    return eps[img[0]], eps[img[-1] + 1]


class WordOrbit:
    """Enclosures of T^n x for x = midpoint of the cylinder of a word."""

    def __init__(self, markov_map: MarkovMap, source: SymbolSource):
        self.map = markov_map
        self.source = source
        self.base = markov_map.uniform_grid_base

    # -- exact evaluation (fallback paths) ----------------------------------

    def remaining(self, n: int) -> int | None:
        m = self.source.finite_length
        return None if m is None else max(m - n, 0)

    def exact_point(self, n: int) -> Fraction:
        """T^n x exactly; only available for finite words.

        T^n maps the defining cylinder affinely onto the cylinder of the
        remaining suffix (or onto the last branch image once the word is
        exhausted), and affine maps carry midpoints to midpoints.
        """
        m = self.source.finite_length
        if m is None:
            raise GibbsLabError("exact_point needs a finite word")
        if n < m:
            suffix = tuple(self.source[i] for i in range(n, m))
            if self.base is not None:
                b = self.base
                v = 0
                for s in suffix:
                    v = v * b + s
                return Fraction(2 * v + 1, 2 * b ** (m - n))
            c = cylinder_for_word(self.map, suffix)
            return (c.left + c.right) / 2
        lo, hi = branch_image_interval(self.map, self.source[m - 1])
        p = (lo + hi) / 2
        for _ in range(n - m):
            p = self.map.step(p)
        return p

    def window_value(self, n: int, width: int) -> tuple[int, int] | None:
        """Digit-window integer V with T^n x in [V, V+1] / base**width.

        Only on digit-expansion maps.  Returns (V, effective width); the
        width shrinks near the end of a finite word.  None once no symbols
        remain.
        """
        if self.base is None:
            raise GibbsLabError("window_value needs a digit-expansion map")
        m = self.source.finite_length
        if m is not None:
            width = min(width, m - n)
            if width <= 0:
                return None
        if not self.source.ensure(n + width):
            raise GibbsLabError("symbol source exhausted unexpectedly")
        b = self.base
        v = 0
        for i in range(n, n + width):
            v = v * b + self.source[i]
        return v, width

    def window_interval(self, n: int, width: int) -> tuple[Fraction, Fraction] | None:
        """Exact rational interval enclosing T^n x from a width-symbol window."""
        m = self.source.finite_length
        if m is not None:
            width = min(width, m - n)
            if width <= 0:
                return None
        if not self.source.ensure(n + width):
            raise GibbsLabError("symbol source exhausted unexpectedly")
        if self.base is not None:
            v, w = self.window_value(n, width)
            d = self.base ** w
            return Fraction(v, d), Fraction(v + 1, d)
        word = tuple(self.source[i] for i in range(n, n + width))
        c = cylinder_for_word(self.map, word)
        return c.left, c.right

    def resolve_in_ball(self, n: int, y: Fraction, r: Fraction,
                        start_width: int) -> bool:
        """Exact decision of |T^n x - y| < r when windows straddle the boundary.

        Widens the enclosure until it separates from y-r and y+r; for a
        finite word the exact point decides; an (almost surely impossible)
        failure to separate on an infinite stream raises.
        """
        lo_b, hi_b = y - r, y + r
        width = start_width
        for _ in range(64):
            width *= 2
            rem = self.remaining(n)
            if rem is not None and width >= rem:
                p = self.exact_point(n)
                return lo_b < p < hi_b
            if width - start_width > _RESOLVE_EXTRA_LIMIT:
                break
            iv = self.window_interval(n, width)
            lo, hi = iv
            if lo_b < lo and hi < hi_b:
                return True
            if hi <= lo_b or lo >= hi_b:
                return False
        raise GibbsLabError(
            f"ball membership at step {n} did not resolve within "
            f"{_RESOLVE_EXTRA_LIMIT} extra symbols")


# -- conservative float enclosures for the covering sweeps ----------------------


def _float_down(x: Fraction) -> float:
    f = float(x)
    return f if Fraction(f) <= x else math.nextafter(f, -math.inf)


def _float_up(x: Fraction) -> float:
    f = float(x)
    return f if Fraction(f) >= x else math.nextafter(f, math.inf)


def float_enclosures(markov_map: MarkovMap, x_like, n_max: int,
                     window: int = 48) -> Iterator[tuple[int, float, float]]:
    """Yield (n, lo, hi) floats with T^n x certainly in [lo, hi], n = 1..n_max.

    The enclosure is exact rational geometry rounded outward, so consumers
    stay conservative; for eventually periodic rational orbits the stream
    ends after one full cycle (with all distinct values already emitted).
    """
    if isinstance(x_like, WordOrbit):
        orbit = x_like
        if orbit.base is not None:
            b = orbit.base
            width = min(window, int(52 / math.log2(b)))
            scale = float(b) ** -width
            src = orbit.source
            m = src.finite_length
            roll_end = n_max if m is None else min(n_max, m - width)
            if roll_end >= 1:
                src.ensure(1 + width)
                v = 0
                for idx in range(1, 1 + width):
                    v = v * b + src[idx]
                lead = b ** (width - 1)
                n = 1
                while True:
                    yield (n, math.nextafter(v * scale, -math.inf),
                           math.nextafter((v + 1) * scale, math.inf))
                    if n == roll_end:
                        break
                    n += 1
                    src.ensure(n + width)
                    v = (v - src[n - 1] * lead) * b + src[n + width - 1]
            if m is None or roll_end >= n_max:
                return
            # finite word nearly exhausted: exact tail from the first step
            # with fewer than `width` symbols remaining
            start = max(roll_end + 1, 1)
            p = orbit.exact_point(start)
            yield start, _float_down(p), _float_up(p)
            if start < n_max:
                for n, x in RationalOrbit(orbit.map, p).points(
                        n_max - start, stop_on_cycle=False):
                    yield start + n, _float_down(x), _float_up(x)
            return
        for n in range(1, n_max + 1):
            iv = orbit.window_interval(n, window)
            if iv is None:
                break
            yield n, _float_down(iv[0]), _float_up(iv[1])
        else:
            return
        start = orbit.source.finite_length
        p = orbit.exact_point(start)
        yield start, _float_down(p), _float_up(p)
        if start < n_max:
            for n, x in RationalOrbit(orbit.map, p).points(
                    n_max - start, stop_on_cycle=False):
                yield start + n, _float_down(x), _float_up(x)
        return
    x = Fraction(x_like)
    for n, p in RationalOrbit(markov_map, x).points(n_max, stop_on_cycle=False):
        yield n, _float_down(p), _float_up(p)
