"""Second-price auction with a reserve price and its reduction to the bandit.

Reserve prices live on a :class:`PriceGrid`; grid index ``k`` (0-based) is
bandit arm ``k + 1``. Playing arm ``A`` reveals the bids of every bidder whose
value is at least ``r_{A}``, which is exactly enough to compute the payment
for every reserve ``r_k >= r_{A}``.

Distribution values and probabilities may be floats or
:class:`fractions.Fraction`; revenue sums are plain Python arithmetic, so
Fraction inputs give exact results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

ValueVector = tuple


def value_vector(values: Iterable[Real]) -> tuple:
    """Validate and freeze a bidder value vector."""
    v = tuple(values)
    if len(v) < 1:
        raise ValueError("value vector needs at least one bidder")
    for x in v:
        if not 0 <= x <= 1:
            raise ValueError(f"bidder value {x!r} outside [0, 1]")
    return v


@dataclass(frozen=True)
class PriceGrid:
    prices: tuple

    def __post_init__(self):
        p = tuple(self.prices)
        if len(p) < 1:
            raise ValueError("price grid must be non-empty")
        for a, b in zip(p, p[1:]):
            if not a < b:
                raise ValueError("price grid must be strictly increasing")
        if p[0] < 0 or p[-1] > 1:
            raise ValueError("prices must lie in [0, 1]")
        object.__setattr__(self, "prices", p)

    @property
    def K(self) -> int:
        return len(self.prices)

    def price(self, arm: int):
        """Reserve price of 1-based ``arm``."""
        return self.prices[arm - 1]

    def as_array(self) -> np.ndarray:
        return np.asarray([float(p) for p in self.prices])


def discretize_prices(T: int) -> PriceGrid:
    """The grid ``k / ceil(sqrt(T))`` for ``k = 0..ceil(sqrt(T))``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    m = math.isqrt(T)
    if m * m < T:
        m += 1
    return PriceGrid(tuple(k / m for k in range(m + 1)))


def uniform_grid(size: int) -> PriceGrid:
    """``size`` evenly spaced reserves on [0, 1] (grid-size override)."""
    if size < 1:
        raise ValueError("grid size must be >= 1")
    if size == 1:
        return PriceGrid((0.0,))
    return PriceGrid(tuple(k / (size - 1) for k in range(size)))


def _top_two(bids: Sequence):
    first = second = 0
    for b in bids:
        if b > first:
            first, second = b, first
        elif b > second:
            second = b
    return first, second


def second_price_payment(r, v: Sequence):
    """Seller revenue at reserve ``r`` for value vector ``v``.

    Zero when no bid reaches ``r``; otherwise the larger of the runner-up bid
    and ``r``. A lone bidder pays the reserve.
    """
    if not v:
        return 0
    top = max(v)
    if top < r:
        return 0
    if len(v) == 1:
        return r
    second = sorted(v)[-2]
    return second if second > r else r


def reward_vector(v: Sequence, grid: PriceGrid) -> np.ndarray:
    """Payments at every grid reserve, as a float array of length K."""
    first, second = _top_two(v)
    r = grid.as_array()
    return np.where(r <= first, np.maximum(float(second), r), 0.0)


def censor(v: Sequence, r) -> tuple:
    """Bids actually submitted at reserve ``r``: values at or above it."""
    return tuple(x for x in v if x >= r)


def suffix_from_bids(bids: Sequence, grid: PriceGrid, arm: int) -> np.ndarray:
    """Payments for arms ``arm..K`` computed from the submitted bids only."""
    r = grid.as_array()[arm - 1:]
    if not bids:
        return np.zeros(len(r))
    first, second = _top_two(bids)
    return np.where(r <= first, np.maximum(float(second), r), 0.0)


def observed_suffix(v: Sequence, grid: PriceGrid, arm: int) -> np.ndarray:
    """Rewards revealed by playing ``arm``: entries for arms ``arm..K``.

    Only the censored bid set at ``r_arm`` is used, so values below the
    announced reserve never influence the result.
    """
    if not 1 <= arm <= grid.K:
        raise ValueError(f"arm {arm} outside 1..{grid.K}")
    return suffix_from_bids(censor(v, grid.price(arm)), grid, arm)


@dataclass(frozen=True, eq=False)
class FiniteValueDistribution:
    """Finite-support joint distribution over bidder value vectors."""

    atoms: tuple  # ((values, p), ...)
    _cum: np.ndarray = field(init=False, repr=False)
    _values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        atoms = tuple((value_vector(v), p) for v, p in self.atoms)
        if not atoms:
            raise ValueError("distribution needs at least one atom")
        n = len(atoms[0][0])
        total = 0
        for v, p in atoms:
            if len(v) != n:
                raise ValueError("all atoms must have the same number of bidders")
            if not p > 0:
                raise ValueError(f"atom probability {p!r} must be positive")
            total += p
        if abs(total - 1) > 1e-12:
            raise ValueError(f"probabilities sum to {float(total)!r}, not 1")
        object.__setattr__(self, "atoms", atoms)
        probs = np.array([float(p) for _, p in atoms])
        object.__setattr__(self, "_cum", np.cumsum(probs))
        object.__setattr__(self, "_values", np.array([[float(x) for x in v] for v, _ in atoms]))

    @property
    def n(self) -> int:
        return len(self.atoms[0][0])

    def pmf(self) -> dict:
        """Probability per distinct value vector (duplicate atoms merged)."""
        out: dict = {}
        for v, p in self.atoms:
            out[v] = out.get(v, 0) + p
        return out

    def __eq__(self, other):
        if not isinstance(other, FiniteValueDistribution):
            return NotImplemented
        return self is other or self.pmf() == other.pmf()

    def __hash__(self):
        return hash(frozenset(self.pmf().items()))

    def sample(self, rng: np.random.Generator) -> tuple:
        i = int(np.searchsorted(self._cum, rng.random() * self._cum[-1], side="right"))
        i = min(i, len(self.atoms) - 1)
        return tuple(self._values[i])

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "atoms": [{"values": [float(x) for x in v], "p": float(p)} for v, p in self.atoms],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FiniteValueDistribution":
        unknown = set(obj) - {"n", "atoms"}
        if unknown:
            raise ValueError(f"unknown distribution keys: {sorted(unknown)}")
        dist = cls(tuple((tuple(a["values"]), a["p"]) for a in obj["atoms"]))
        if "n" in obj and obj["n"] != dist.n:
            raise ValueError(f"declared n={obj['n']} but atoms have {dist.n} bidders")
        return dist


def point_mass(values: Sequence) -> FiniteValueDistribution:
    return FiniteValueDistribution(((tuple(values), 1),))


def iid_product(marginal: Sequence[tuple], n: int) -> FiniteValueDistribution:
    """Joint law of ``n`` i.i.d. bidders with marginal ``[(value, p), ...]``."""
    atoms = [((), 1)]
    for _ in range(n):
        atoms = [(v + (x,), p * q) for v, p in atoms for x, q in marginal]
    return FiniteValueDistribution(tuple(atoms))


def mixture(d1: FiniteValueDistribution, d2: FiniteValueDistribution, w) -> FiniteValueDistribution:
    """``(1 - w) * d1 + w * d2`` as a merged finite distribution."""
    if not 0 <= w <= 1:
        raise ValueError("mixture weight must be in [0, 1]")
    if w == 0:
        return d1
    if w == 1:
        return d2
    pmf: dict = {}
    for v, p in d1.pmf().items():
        pmf[v] = pmf.get(v, 0) + (1 - w) * p
    for v, p in d2.pmf().items():
        pmf[v] = pmf.get(v, 0) + w * p
    return FiniteValueDistribution(tuple((v, p) for v, p in sorted(pmf.items()) if p > 0))


def hard_pair(eps, sign: int = 1, n: int = 2) -> FiniteValueDistribution:
    """Two-point i.i.d. instance on values {1/2, 3/4}.

    ``sign=+1`` puts mass ``1/2 + eps`` on 1/2 (best reserve 1/2);
    ``sign=-1`` puts it on 3/4 (best reserve 3/4).
    """
    if isinstance(eps, Fraction):
        half, three_q = Fraction(1, 2), Fraction(3, 4)
    else:
        half, three_q = 0.5, 0.75
    if not 0 <= eps < half:
        raise ValueError("eps must lie in [0, 1/2)")
    p_low = half + eps if sign > 0 else half - eps
    return iid_product([(half, p_low), (three_q, 1 - p_low)], n)


def expected_revenue(D: FiniteValueDistribution, r):
    """Exact ``E_v[payment(r, v)]`` over the atoms of ``D``."""
    return sum(p * second_price_payment(r, v) for v, p in D.atoms)


def mean_vector(D: FiniteValueDistribution, grid: PriceGrid) -> list:
    return [expected_revenue(D, r) for r in grid.prices]


def best_reserve(D: FiniteValueDistribution, grid: PriceGrid) -> tuple:
    """``(arm, revenue)`` maximizing expected revenue; lowest arm wins ties."""
    means = mean_vector(D, grid)
    best = 0
    for k in range(1, len(means)):
        if means[k] > means[best]:
            best = k
    return best + 1, means[best]
