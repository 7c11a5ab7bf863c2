"""Scattered node providers and doubling subsequences.

A provider is a windowed generator over an integer index: ``node(j)`` is
strictly increasing in ``j`` and every pair of distinct nodes is at least
``delta`` apart. Doubling subsequences are extracted greedily with the strict
rule "smallest node beyond the current bound", the bound doubling each time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ExhaustionError, SeparationError
from .polybasis import as_rational

logger = logging.getLogger(__name__)

GAP_PRODUCT_BOUND = 4


class ProviderKind(str, Enum):
    INTEGERS = "integers"
    JITTERED = "jittered-integers"
    EXPLICIT = "explicit-list"
    AFFINE = "affine-lattice"


class Sign(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


@lru_cache(maxsize=65536)
def _jitter_unit(seed: int, index: int) -> float:
    # one generator per (seed, index) so a node never depends on scan order
    code = 2 * index if index >= 0 else -2 * index - 1
    rng = np.random.default_rng([seed, code])
    return float(rng.uniform(-1.0, 1.0))


@dataclass(frozen=True)
class ScatteredProvider:
    """Description of a delta-separated bi-infinite node sequence."""

    kind: ProviderKind
    delta: Optional[Fraction] = None
    jitter: Fraction = Fraction(0)
    seed: int = 0
    step: Fraction = Fraction(1)
    offset: Fraction = Fraction(0)
    nodes: Tuple[Fraction, ...] = ()
    period: Optional[Fraction] = None

    def __post_init__(self):
        kind = ProviderKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "jitter", as_rational(self.jitter))
        object.__setattr__(self, "step", as_rational(self.step))
        object.__setattr__(self, "offset", as_rational(self.offset))

        if kind is ProviderKind.JITTERED and not (0 <= self.jitter < Fraction(1, 3)):
            raise ValueError(f"jitter must lie in [0, 1/3), got {self.jitter}")
        if kind is ProviderKind.AFFINE and self.step <= 0:
            raise ValueError(f"lattice step must be positive, got {self.step}")

        if kind is ProviderKind.EXPLICIT:
            ordered = tuple(sorted(as_rational(v) for v in self.nodes))
            if not ordered:
                raise ValueError("explicit-list provider needs at least one node")
            object.__setattr__(self, "nodes", ordered)
            if self.period is not None:
                period = as_rational(self.period)
                if period <= ordered[-1] - ordered[0]:
                    raise ValueError("extension period must exceed the span of the list")
                object.__setattr__(self, "period", period)

        if self.delta is None:
            object.__setattr__(self, "delta", self._natural_delta())
        else:
            object.__setattr__(self, "delta", as_rational(self.delta))
        if self.delta <= 0:
            raise SeparationError(f"provider is not separated: delta = {self.delta}")

    # Constructors

    @classmethod
    def integers(cls) -> "ScatteredProvider":
        return cls(ProviderKind.INTEGERS)

    @classmethod
    def jittered(cls, jitter, seed: int = 0) -> "ScatteredProvider":
        return cls(ProviderKind.JITTERED, jitter=jitter, seed=seed)

    @classmethod
    def affine(cls, step, offset=0) -> "ScatteredProvider":
        return cls(ProviderKind.AFFINE, step=step, offset=offset)

    @classmethod
    def explicit(cls, nodes: Sequence, delta=None, period=None) -> "ScatteredProvider":
        return cls(ProviderKind.EXPLICIT, delta=delta, nodes=tuple(nodes), period=period)

    def _natural_delta(self) -> Fraction:
        if self.kind is ProviderKind.INTEGERS:
            return Fraction(1)
        if self.kind is ProviderKind.JITTERED:
            return 1 - 2 * self.jitter
        if self.kind is ProviderKind.AFFINE:
            return self.step
        gaps = [b - a for a, b in zip(self.nodes, self.nodes[1:])]
        if self.period is not None:
            gaps.append(self.nodes[0] + self.period - self.nodes[-1])
        if not gaps:
            # a single node with no extension rule has nothing to be close to
            return Fraction(1)
        return min(gaps)

    # Windowed access

    @property
    def lower_index(self) -> Optional[int]:
        if self.kind is ProviderKind.EXPLICIT and self.period is None:
            return 0
        return None

    @property
    def upper_index(self) -> Optional[int]:
        if self.kind is ProviderKind.EXPLICIT and self.period is None:
            return len(self.nodes) - 1
        return None

    def node(self, index: int) -> Fraction:
        """Return the node with the given index"""
        if self.kind is ProviderKind.INTEGERS:
            return Fraction(index)
        if self.kind is ProviderKind.JITTERED:
            return index + self.jitter * Fraction(_jitter_unit(self.seed, index))
        if self.kind is ProviderKind.AFFINE:
            return self.offset + self.step * index
        count = len(self.nodes)
        if self.period is None:
            if not 0 <= index < count:
                raise ExhaustionError(
                    f"explicit list has no node with index {index}; "
                    "supply a larger list or an extension period"
                )
            return self.nodes[index]
        block, position = divmod(index, count)
        return self.nodes[position] + block * self.period

    def window(self, indices: range) -> list:
        """Return the nodes emitted over an index window"""
        return [self.node(j) for j in indices]

    def _first_index(self, predicate: Callable[[Fraction], bool]) -> int:
        # smallest index whose node satisfies a predicate that is monotone in the node
        low_bound, high_bound = self.lower_index, self.upper_index
        start = 0 if low_bound is None else low_bound
        if predicate(self.node(start)):
            high, step = start, 1
            while True:
                low = high - step
                if low_bound is not None and low < low_bound:
                    low = low_bound - 1
                    break
                if not predicate(self.node(low)):
                    break
                high, step = low, step * 2
        else:
            low, step = start, 1
            while True:
                high = low + step
                if high_bound is not None and high > high_bound:
                    if low == high_bound or not predicate(self.node(high_bound)):
                        raise ExhaustionError(
                            "explicit list ends before the requested magnitude; "
                            "supply a larger list or an extension period"
                        )
                    high = high_bound
                    break
                if predicate(self.node(high)):
                    break
                low, step = high, step * 2
        while high - low > 1:
            middle = (low + high) // 2
            if predicate(self.node(middle)):
                high = middle
            else:
                low = middle
        return high

    def first_above(self, bound) -> Fraction:
        """Return the smallest node strictly greater than bound"""
        bound = as_rational(bound)
        return self.node(self._first_index(lambda value: value > bound))

    def last_below(self, bound) -> Fraction:
        """Return the largest node strictly smaller than bound"""
        bound = as_rational(bound)
        try:
            index = self._first_index(lambda value: value >= bound) - 1
        except ExhaustionError:
            # every node lies below the bound
            return self.node(self.upper_index)
        if self.lower_index is not None and index < self.lower_index:
            raise ExhaustionError(
                "explicit list starts above the requested magnitude; "
                "supply a larger list or an extension period"
            )
        return self.node(index)

    def to_dict(self) -> dict:
        summary = {"kind": self.kind.value, "delta": str(self.delta)}
        if self.kind is ProviderKind.JITTERED:
            summary.update(jitter=str(self.jitter), seed=self.seed)
        elif self.kind is ProviderKind.AFFINE:
            summary.update(step=str(self.step), offset=str(self.offset))
        elif self.kind is ProviderKind.EXPLICIT:
            summary["list"] = [str(v) for v in self.nodes]
            summary["extension"] = None if self.period is None else str(self.period)
        return summary


def node_gap_product(nodes: Sequence[Fraction], i: int) -> Fraction:
    """|prod_{j != i} (1 - y_i/y_j)^-1| over any list of distinct nonzero nodes"""
    product = Fraction(1)
    y_i = nodes[i]
    for j, y_j in enumerate(nodes):
        if j != i:
            product /= 1 - y_i / y_j
    return abs(product)


@dataclass(frozen=True)
class DoublingSequence:
    """Nodes of one sign whose magnitudes at least double at each step."""

    sign: Sign
    nodes: Tuple[Fraction, ...]
    gap_products: Tuple[Fraction, ...] = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sign", Sign(self.sign))
        nodes = tuple(as_rational(v) for v in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if not nodes:
            raise ValueError("a doubling sequence needs at least one node")

        if self.sign is Sign.POSITIVE:
            if nodes[0] <= 0:
                raise ValueError(f"positive doubling sequence must start above 0, got {nodes[0]}")
            broken = [j for j in range(len(nodes) - 1) if nodes[j + 1] < 2 * nodes[j]]
        else:
            if nodes[0] >= 0:
                raise ValueError(f"negative doubling sequence must start below 0, got {nodes[0]}")
            broken = [j for j in range(len(nodes) - 1) if nodes[j + 1] > 2 * nodes[j]]
        if broken:
            j = broken[0]
            raise ValueError(f"doubling rule fails between nodes {nodes[j]} and {nodes[j + 1]}")

        products = tuple(node_gap_product(nodes, i) for i in range(len(nodes)))
        if any(p > GAP_PRODUCT_BOUND for p in products):
            raise ValueError("gap product exceeds 4; nodes are not a doubling sequence")
        object.__setattr__(self, "gap_products", products)

    @classmethod
    def from_nodes(cls, nodes: Sequence) -> "DoublingSequence":
        first = as_rational(nodes[0])
        return cls(Sign.POSITIVE if first > 0 else Sign.NEGATIVE, tuple(nodes))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def head(self) -> Fraction:
        return self.nodes[0]

    def prefix(self, count: int) -> "DoublingSequence":
        """Return the first count nodes as a doubling sequence of their own"""
        if not 1 <= count <= len(self.nodes):
            raise ValueError(f"prefix length {count} outside 1..{len(self.nodes)}")
        if count == len(self.nodes):
            return self
        return DoublingSequence(self.sign, self.nodes[:count])

    def negated(self) -> "DoublingSequence":
        flipped = Sign.NEGATIVE if self.sign is Sign.POSITIVE else Sign.POSITIVE
        return DoublingSequence(flipped, tuple(-v for v in self.nodes))

    def to_dict(self) -> dict:
        return {
            "sign": self.sign.value,
            "nodes": [str(v) for v in self.nodes],
            "gap_products": [str(p) for p in self.gap_products],
        }


def extract_doubling(provider: ScatteredProvider, sign, M, N: int) -> DoublingSequence:
    """Greedily extract N doubling nodes of the given sign beyond magnitude M.

    Each node is the provider node closest to zero with magnitude strictly
    above the current bound; the bound starts at M and becomes twice the
    magnitude of the node just taken.
    """
    sign = Sign(sign)
    bound = as_rational(M)
    if bound < 0:
        raise ValueError(f"M must be nonnegative, got {bound}")
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")

    nodes = []
    for _ in range(N):
        if sign is Sign.POSITIVE:
            y = provider.first_above(bound)
        else:
            y = provider.last_below(-bound)
        nodes.append(y)
        bound = 2 * abs(y)
    logger.debug("extracted %s doubling nodes beyond %s: %s", sign.value, M, nodes)
    return DoublingSequence(sign, tuple(nodes))


def verify_separation(provider: ScatteredProvider, window: range) -> Fraction:
    """Return the minimum gap over an index window, checking it against delta"""
    nodes = sorted(provider.window(window))
    if len(nodes) < 2:
        raise ValueError("separation needs a window with at least two indices")
    gaps = [(b - a, a, b) for a, b in zip(nodes, nodes[1:])]
    gap, left, right = min(gaps, key=lambda item: item[0])
    if gap < provider.delta:
        raise SeparationError(
            f"nodes {left} and {right} are {gap} apart, below delta = {provider.delta}",
            pair=(left, right),
        )
    return gap


def gap_product(Y: DoublingSequence, i: int) -> Fraction:
    """Return |prod_{j != i} (1 - y_i/y_j)^-1| for the zero-based index i.

    Node y_k sits at index k - 1, so the second node of Y = (1, 2) is i = 1
    and gap_product(Y, 1) == 1.
    """
    if not 0 <= i < len(Y.nodes):
        raise IndexError(f"node index {i} outside 0..{len(Y.nodes) - 1}")
    return node_gap_product(Y.nodes, i)
