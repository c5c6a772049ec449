"""Birkhoff sums, topological pressure and Gibbs measures on cylinders.

Potentials are locally constant at a finite depth k: a table of values over
admissible k-words.  Pressure and Gibbs data then reduce to Perron-Frobenius
data of a weighted transition matrix on k-words, computed by power iteration
(relative tolerance 1e-13, deterministic all-ones start).  Geometry stays
rational; measures and eigendata are binary64.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import GibbsLabError, InadmissibleWord, NotPrimitive
from .maps import MarkovMap, Word, admissible_words

POWER_TOL = 1e-13
POWER_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class Potential:
    """Depth-k locally constant potential: one value per admissible k-word."""

    depth: int
    values: dict[Word, float]
    builtin: str | None = None

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("potential depth must be >= 1")

    @classmethod
    def neg_log_deriv(cls, markov_map: MarkovMap) -> "Potential":
        """The geometric potential -log|T'| (depth 1)."""
        values = {}
        for k in range(markov_map.Q):
            s = abs(markov_map.branches[k].slope)
            values[(k,)] = math.log(s.denominator) - math.log(s.numerator)
        return cls(1, values, builtin="neg-log-deriv")

    @classmethod
    def from_symbol_weights(cls, markov_map: MarkovMap,
                            weights: Sequence[Fraction | float]) -> "Potential":
        """Depth-1 potential log(w_k); with weights summing to 1 on a full
        shift this is the Bernoulli(w) measure's potential."""
        if len(weights) != markov_map.Q:
            raise ValueError("one weight per symbol required")
        values = {}
        for k, w in enumerate(weights):
            if isinstance(w, Fraction):
                values[(k,)] = math.log(w.numerator) - math.log(w.denominator)
            else:
                values[(k,)] = math.log(w)
        return cls(1, values)

    def validate(self, markov_map: MarkovMap) -> "Potential":
        """Check the table covers exactly the admissible depth-words."""
        expected = set(admissible_words(markov_map, self.depth))
        got = set(self.values)
        if got != expected:
            missing = sorted(expected - got)[:4]
            extra = sorted(got - expected)[:4]
            raise ValueError(
                f"potential table mismatch (missing {missing}, extra {extra})")
        for w, v in self.values.items():
            if not math.isfinite(v):
                raise ValueError(f"non-finite potential value at {w}")
        return self

    def value(self, window: Word) -> float:
        return self.values[window]

    def shifted(self, delta: float) -> "Potential":
        return Potential(self.depth, {w: v + delta for w, v in self.values.items()},
                         builtin=None)


def combine_potentials(markov_map: MarkovMap, phi: Potential,
                       eta: float, q: float) -> Potential:
    """The pressure-equation family -eta*log|T'| + q*phi, at phi's depth."""
    log_d = {k: math.log(abs(markov_map.branches[k].slope))
             for k in range(markov_map.Q)}
    values = {w: -eta * log_d[w[0]] + q * phi.values[w] for w in phi.values}
    return Potential(phi.depth, values)


def birkhoff_sum(markov_map: MarkovMap, potential: Potential,
                 word: Sequence[int]) -> float:
    """Sum of potential windows along `word`.

    The final depth-1 windows run past the word; they are completed with the
    lexicographically-smallest admissible continuation, a bounded boundary
    term that vanishes from every per-symbol limit.
    """
    w = markov_map.require_admissible(word)
    n, k = len(w), potential.depth
    if n < k:
        raise ValueError(f"word length {n} shorter than potential depth {k}")
    ext = markov_map.smallest_continuation(w, k - 1) if k > 1 else w
    return sum(potential.values[ext[j:j + k]] for j in range(n))


def _power_iteration(W: np.ndarray) -> tuple[float, np.ndarray]:
    """Perron value and positive right eigenvector of a primitive matrix.

    Falls back to a dense eigensolve when the spectral gap is too small for
    the iteration cap (weight matrices dominated by a short cycle, as happens
    at extreme pressure-equation parameters).  Both paths are deterministic.
    """
    n = W.shape[0]
    # a stalled iteration on a small matrix is cheaper to hand to the dense
    # solver than to run to the full cap
    stall_cap = 4096 if n <= 512 else POWER_MAX_ITER
    v = np.full(n, 1.0 / n)
    for _ in range(min(stall_cap, POWER_MAX_ITER)):
        y = W @ v
        lam = float(y.sum())  # v sums to 1
        if lam <= 0:
            raise GibbsLabError("power iteration collapsed; matrix not primitive?")
        converged = np.max(np.abs(y - lam * v)) <= POWER_TOL * lam * np.max(v)
        v = y / lam
        if converged:
            if np.any(v <= 0):
                raise GibbsLabError("Perron vector has non-positive entries")
            return lam, v
    ev, evec = np.linalg.eig(W)
    idx = int(np.argmax(ev.real))
    lam = float(ev[idx].real)
    v = np.abs(evec[:, idx].real)
    if lam <= 0 or np.any(v <= 0):
        raise GibbsLabError("power iteration did not converge and the dense "
                            "fallback found no positive Perron pair")
    v /= v.sum()
    if np.max(np.abs(W @ v - lam * v)) > 1e-9 * lam * np.max(v):
        raise GibbsLabError("dense Perron fallback residual too large")
    return lam, v


def _second_eigenvalue_magnitude(W: np.ndarray, lam: float, vR: np.ndarray,
                                 uL: np.ndarray) -> float:
    """|lambda_2| via power iteration on the deflated matrix.

    The growth rate is averaged over a trailing window so complex pairs
    (rotating iterates) still yield the modulus.
    """
    n = W.shape[0]
    if n == 1:
        return 0.0
    denom = float(uL @ vR)
    D = W - lam * np.outer(vR, uL) / denom

    def project(x):
        return x - vR * (uL @ x) / denom

    x = project(np.ones(n))
    if np.linalg.norm(x) < 1e-300:
        x = project(np.arange(1.0, n + 1.0))
    window: list[float] = []
    est = 0.0
    for it in range(POWER_MAX_ITER):
        y = project(D @ x)
        ny = float(np.linalg.norm(y))
        nx = float(np.linalg.norm(x))
        if ny < 1e-280 * max(1.0, nx):
            return 0.0
        window.append(ny / nx)
        if len(window) > 32:
            window.pop(0)
        x = y / ny
        if it >= 32:
            new_est = float(np.exp(np.mean(np.log(window))))
            if abs(new_est - est) <= 1e-13 * max(new_est, 1e-30):
                return new_est
            est = new_est
    return est


def _weight_matrix(markov_map: MarkovMap, potential: Potential,
                   ) -> tuple[tuple[Word, ...], np.ndarray, float]:
    """States (sorted admissible depth-words) and the weighted transition matrix
    exp(phi(u) - shift) on admissible one-step extensions u -> v.

    The returned shift (the largest table value) keeps the exponentials in
    float range for extreme potentials; log(Perron value) + shift is the
    pressure.
    """
    if markov_map.primitivity_exponent is None:
        raise NotPrimitive("spectral construction needs a primitive map")
    potential.validate(markov_map)
    states = tuple(sorted(potential.values))
    index = {s: i for i, s in enumerate(states)}
    k = potential.depth
    shift = max(potential.values.values())
    W = np.zeros((len(states), len(states)))
    for u in states:
        wu = math.exp(potential.values[u] - shift)
        iu = index[u]
        if k == 1:
            for v_sym in markov_map.successors(u[0]):
                W[iu, index[(v_sym,)]] = wu
        else:
            for v_sym in markov_map.successors(u[-1]):
                v = u[1:] + (v_sym,)
                if v in index:
                    W[iu, index[v]] = wu
    return states, W, shift


class GibbsModel:
    """Perron data of a normalized potential and its cylinder-measure evaluator.

    Immutable after construction; measure queries are pure.
    """

    def __init__(self, markov_map: MarkovMap, potential: Potential):
        self.map = markov_map
        self.depth = potential.depth
        states, W, shift = _weight_matrix(markov_map, potential)
        self.states = states
        self._index = {s: i for i, s in enumerate(states)}
        lam, vR = _power_iteration(W)
        lamT, uL = _power_iteration(W.T)
        self.pressure = math.log(lam) + shift
        self.potential = potential.shifted(-self.pressure)
        # normalized weight matrix has Perron value 1
        self.weight_matrix = W / lam
        self.perron_value = 1.0
        self.perron_right = vR
        self.perron_left = uL
        z = float(uL @ vR)
        self.stationary = uL * vR / z
        self.transition = self.weight_matrix * vR[None, :] / vR[:, None]
        self._raw = (W, lam)
        self._beta: float | None = None
        payload = repr((markov_map.endpoints,
                        [(str(b.slope), str(b.intercept)) for b in markov_map.branches],
                        sorted(self.potential.values.items()))).encode()
        self.model_id = hashlib.sha1(payload).hexdigest()[:12]

    @property
    def beta(self) -> float:
        """Spectral mixing rate |lambda_2| / lambda_1 (computed on first use)."""
        if self._beta is None:
            W, lam = self._raw
            self._beta = _second_eigenvalue_magnitude(
                W, lam, self.perron_right, self.perron_left) / lam
        return self._beta

    # -- measure evaluation -------------------------------------------------

    def state_of(self, word: Word) -> int:
        return self._index[word]

    def _path_measure(self, word: Word) -> float:
        k = self.depth
        i = self._index[word[:k]]
        mass = float(self.stationary[i])
        T = self.transition
        for j in range(1, len(word) - k + 1):
            i2 = self._index[word[j:j + k]]
            mass *= T[i, i2]
            i = i2
        return mass

    def cylinder_measure(self, word: Sequence[int]) -> float:
        """Mass of the basic interval of `word` under the invariant Gibbs measure."""
        w = self.map.require_admissible(word)
        if len(w) >= self.depth:
            return self._path_measure(w)
        total = 0.0
        stack = [w]
        while stack:
            u = stack.pop()
            if len(u) == self.depth:
                total += float(self.stationary[self._index[u]])
                continue
            for sym in self.map.successors(u[-1]):
                v = u + (sym,)
                if len(v) < self.depth or v in self._index:
                    stack.append(v)
        return total

    def log_cylinder_measure(self, word: Sequence[int]) -> float:
        """log of cylinder_measure, safe for words far past float underflow."""
        w = self.map.require_admissible(word)
        k = self.depth
        if len(w) < k:
            return math.log(self.cylinder_measure(w))
        i = self._index[w[:k]]
        out = math.log(float(self.stationary[i]))
        T = self.transition
        for j in range(1, len(w) - k + 1):
            i2 = self._index[w[j:j + k]]
            out += math.log(float(T[i, i2]))
            i = i2
        return out

    def integrate(self, potential: Potential) -> float:
        """Integral of a locally constant potential against this measure."""
        return sum(self.cylinder_measure(w) * v for w, v in potential.values.items())


def pressure(markov_map: MarkovMap, potential: Potential) -> float:
    """Topological pressure: log of the Perron value of the weight matrix."""
    _, W, shift = _weight_matrix(markov_map, potential)
    lam, _ = _power_iteration(W)
    return math.log(lam) + shift


def normalize(potential: Potential, pressure_value: float) -> Potential:
    """Shift the table so the pressure of the result is zero."""
    return potential.shifted(-pressure_value)


def gibbs_model(markov_map: MarkovMap, potential: Potential) -> GibbsModel:
    """Invariant Gibbs measure for `potential` (normalization applied internally)."""
    return GibbsModel(markov_map, potential)


def _iter_words_with_sums(model: GibbsModel, n_max: int):
    """DFS over admissible words of every length 1..n_max.

    Yields (word, mass, birkhoff sum) with the same boundary completion rule
    as birkhoff_sum (normalized potential, so no pressure term).
    """
    mp = model.map
    phi = model.potential
    k = model.depth
    for first in range(mp.Q):
        stack = [(first,)]
        while stack:
            w = stack.pop()
            n = len(w)
            mass = model._path_measure(w) if n >= k else model.cylinder_measure(w)
            ext = mp.smallest_continuation(w, k - 1) if k > 1 else w
            s = sum(phi.values[ext[j:j + k]] for j in range(n))
            yield w, mass, s
            if n < n_max:
                stack.extend(w + (sym,) for sym in reversed(mp.successors(w[-1])))


def gibbs_constant(model: GibbsModel, n_max: int) -> float:
    """Empirical Gibbs constant: sup over generations <= n_max of the two-sided
    ratio mu(I) / exp(S_n phi) for the normalized potential.

    The supremum over a finite range is a lower bound for the true constant.
    """
    gamma = 1.0
    for _w, mass, s in _iter_words_with_sums(model, n_max):
        ratio = mass / math.exp(s)
        gamma = max(gamma, ratio, 1.0 / ratio)
    return gamma


def quasi_bernoulli_check(model: GibbsModel, n_max: int) -> float:
    """Worst two-sided ratio mu(I) / (mu(I')mu(I'')) over splits of words
    of length <= n_max.

    Inadmissible concatenations never arise: every enumerated word is
    admissible, so both split halves are.  For a depth-1 potential the
    result is bounded by gibbs_constant(model, n_max)**3.
    """
    masses: dict[Word, float] = {}
    for w, mass, _s in _iter_words_with_sums(model, n_max):
        masses[w] = mass
    worst = 1.0
    for w, mass in masses.items():
        for cut in range(1, len(w)):
            left, right = w[:cut], w[cut:]
            if left in masses and right in masses:
                r = mass / (masses[left] * masses[right])
                worst = max(worst, r, 1.0 / r)
    return worst


@dataclass
class MixingReport:
    """Exact correlation envelope over sampled cylinder pairs, per lag."""

    lags: tuple[int, ...]
    max_ratios: tuple[float, ...]
    fitted_beta: float
    spectral_beta: float
    constant: float  # smallest C with ratio <= C * spectral_beta**lag over the probe

    def __post_init__(self):
        if any(r < 0 for r in self.max_ratios):
            raise ValueError("correlation ratios must be nonnegative")


def mixing_report(model: GibbsModel, lags: Iterable[int],
                  sample_cylinders: Sequence[Word] | None = None) -> MixingReport:
    """Correlations |mu(A cap T^-d B) - mu(A)mu(B)| / mu(B) via matrix powers.

    Every lag must be >= the length of each sampled A-cylinder so the two
    symbol blocks do not overlap.
    """
    if sample_cylinders is None:
        sample_cylinders = model.states
    lags = tuple(sorted(set(int(d) for d in lags)))
    words = [model.map.require_admissible(w) for w in sample_cylinders]
    if any(len(w) < model.depth for w in words):
        raise ValueError("sampled cylinders must have length >= potential depth")
    max_len = max(len(w) for w in words)
    if lags and lags[0] < max_len:
        raise ValueError(f"lags must be >= longest sampled cylinder ({max_len})")

    k = model.depth
    pi = model.stationary
    T = model.transition
    mu = {w: model.cylinder_measure(w) for w in words}
    ends = {w: model.state_of(w[len(w) - k:]) for w in words}
    starts = {w: model.state_of(w[:k]) for w in words}

    powers: dict[int, np.ndarray] = {}
    ratios = []
    for d in lags:
        worst = 0.0
        for a in words:
            g = d - len(a) + k
            if g not in powers:
                powers[g] = np.linalg.matrix_power(T, g)
            Pg = powers[g]
            for b in words:
                dev = abs(Pg[ends[a], starts[b]] - pi[starts[b]])
                worst = max(worst, mu[a] * dev / pi[starts[b]])
        ratios.append(worst)

    pts = [(d, r) for d, r in zip(lags, ratios) if r > 0]
    if len(pts) >= 2:
        xs = np.array([p[0] for p in pts], float)
        ys = np.log(np.array([p[1] for p in pts], float))
        slope, _ = np.polyfit(xs, ys, 1)
        fitted = float(math.exp(slope))
    else:
        fitted = 0.0
    beta = model.beta
    if beta > 0:
        constant = max((r / beta ** d for d, r in zip(lags, ratios)), default=0.0)
    else:
        constant = max(ratios, default=0.0)
    return MixingReport(lags, tuple(ratios), fitted, beta, constant)
