"""Integer-partition machinery for summing gap functions over success/failure events.

An event is an sf-word of length w: which ones of a sequence period succeed
("s") and which collide ("f"). Events with r successes are grouped by the
r-partition of w formed by their cyclic gaps, which turns a sum over C(w, r)
events into a sum over at most w terms.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import factorial
from typing import Callable, Sequence


@dataclass(frozen=True)
class PartitionVector:
    """An r-partition of w stored as part multiplicities (c_1, ..., c_w)."""

    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if not self.counts or any(c < 0 for c in self.counts):
            raise ValueError(f"invalid part counts {self.counts}")
        if sum((j + 1) * c for j, c in enumerate(self.counts)) != len(self.counts):
            raise ValueError(f"counts {self.counts} do not partition {len(self.counts)}")

    @property
    def w(self) -> int:
        return len(self.counts)

    @property
    def r(self) -> int:
        return sum(self.counts)

    @property
    def parts(self) -> tuple[int, ...]:
        return tuple(j + 1 for j, c in enumerate(self.counts) for _ in range(c))

    @classmethod
    def from_parts(cls, parts: Sequence[int], w: int | None = None) -> PartitionVector:
        w = sum(parts) if w is None else w
        counts = [0] * w
        for part in parts:
            counts[part - 1] += 1
        return cls(tuple(counts))


@dataclass(frozen=True)
class SfWord:
    """Success/failure pattern over the w ones of one sequence period."""

    symbols: tuple[bool, ...]

    @classmethod
    def parse(cls, text: str) -> SfWord:
        if set(text) - {"s", "f"}:
            raise ValueError(f"sf-word may only contain 's' and 'f': {text!r}")
        return cls(tuple(ch == "s" for ch in text))

    @property
    def w(self) -> int:
        return len(self.symbols)

    @property
    def success_count(self) -> int:
        return sum(self.symbols)

    @property
    def success_positions(self) -> tuple[int, ...]:
        return tuple(i for i, ok in enumerate(self.symbols) if ok)

    def __str__(self) -> str:
        return "".join("s" if ok else "f" for ok in self.symbols)


def _check_wr(w: int, r: int) -> None:
    if w < 1 or not 1 <= r <= w:
        raise ValueError(f"need 1 <= r <= w, got w={w}, r={r}")


def _parts_nonincreasing(total: int, count: int, largest: int):
    if count == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(largest, total - (count - 1)), 0, -1):
        if first * count < total:
            break
        for rest in _parts_nonincreasing(total - first, count - 1, first):
            yield (first,) + rest


def enumerate_partitions(w: int, r: int) -> list[PartitionVector]:
    """All r-partitions of w, sorted lexicographically by their count vectors."""
    _check_wr(w, r)
    out = [PartitionVector.from_parts(parts, w) for parts in _parts_nonincreasing(w, r, w)]
    return sorted(out, key=lambda c: c.counts)


def preimage_count(c: PartitionVector) -> int:
    """Number of sf-words whose cyclic gap multiset is ``c``."""
    num = factorial(c.r - 1) * c.w
    den = 1
    for m in c.counts:
        den *= factorial(m)
    count, rem = divmod(num, den)
    assert rem == 0, f"non-integral pre-image count for {c.counts}"
    return count


def theta(e: SfWord) -> PartitionVector:
    pos = e.success_positions
    if not pos:
        raise ValueError("an sf-word without successes has no gap partition")
    r, w = len(pos), e.w
    gaps = [(pos[(k + 1) % r] - pos[k]) % w or w for k in range(r)]
    return PartitionVector.from_parts(gaps, w)


def enumerate_sf_words(w: int, r: int) -> list[SfWord]:
    _check_wr(w, r)
    words = []
    for chosen in combinations(range(w), r):
        sym = [False] * w
        for i in chosen:
            sym[i] = True
        words.append(SfWord(tuple(sym)))
    return words


def zeta(distances: Sequence[int], k: int, j: int) -> int:
    """Sum of j consecutive cyclic distances starting at index k."""
    m = len(distances)
    if not 0 <= k < m or not 1 <= j <= m:
        raise IndexError(f"zeta index out of range: k={k}, j={j}, m={m}")
    return sum(distances[(k + i) % m] for i in range(j))


def b_values(score: Callable[[int], float], distances: Sequence[int]) -> list:
    """b_j = sum over k of score(zeta(distances, k, j)), for j = 1..w."""
    w = len(distances)
    return [sum(score(zeta(distances, k, j)) for k in range(w)) for j in range(1, w + 1)]


def event_weight(w: int, r: int, j: int) -> int:
    """Multiplier of b_j in the event sum for r >= 2; zero once the factorial
    argument w - j - (r - 1) would go negative."""
    if w - j - (r - 1) < 0:
        return 0
    num = factorial(w - j - 1)
    den = factorial(r - 2) * factorial(w - j - (r - 1))
    q, rem = divmod(num, den)
    assert rem == 0
    return q


def partition_event_sum(w: int, r: int, b: Sequence) -> float:
    """Sum over all events with r successes of sum_k F(d_k), given b_1..b_w for F."""
    _check_wr(w, r)
    if len(b) != w:
        raise ValueError(f"expected {w} b-values, got {len(b)}")
    if r == 1:
        return b[w - 1]
    return sum(event_weight(w, r, j) * b[j - 1] for j in range(1, w - r + 2))


def event_distances(e: SfWord, distances: Sequence[int]) -> list[int]:
    """Cyclic distances between consecutive successful ones under event ``e``."""
    pos = e.success_positions
    if not pos:
        raise ValueError("event has no successful ones")
    if len(distances) != e.w:
        raise ValueError("need one distance per one of the sequence")
    r, w = len(pos), e.w
    out = []
    for k in range(r):
        gap = (pos[(k + 1) % r] - pos[k]) % w or w
        out.append(zeta(distances, pos[k], gap))
    return out
