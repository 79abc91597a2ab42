"""CRT-based MHUI schedule sequences and the per-sequence quantities derived from them.

Sequences are kept as sorted characteristic sets (positions of the ones inside a
period). Dense 0/1 arrays are only produced on request, for the simulators.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from math import gcd, isqrt
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class ConstructionError(ValueError):
    """Invalid CRT construction parameters; ``code`` names the violated condition."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def lcm(a: int, b: int) -> int:
    return a // gcd(a, b) * b


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    for f in range(3, isqrt(n) + 1, 2):
        if n % f == 0:
            return False
    return True


def smallest_prime_geq(n: int) -> int:
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    p = max(n, 2)
    while not is_prime(p):
        p += 1
    return p


@dataclass(frozen=True)
class ScheduleSequence:
    period: int
    characteristic_set: tuple[int, ...]
    index: int | None = None

    def __post_init__(self):
        cs = tuple(int(x) for x in self.characteristic_set)
        object.__setattr__(self, "characteristic_set", cs)
        if self.period < 1:
            raise ValueError("period must be positive")
        if not cs:
            raise ValueError("a schedule sequence needs at least one transmission slot")
        if any(b <= a for a, b in zip(cs, cs[1:])):
            raise ValueError("characteristic set must be strictly increasing")
        if cs[0] < 0 or cs[-1] >= self.period:
            raise ValueError("characteristic set entries must lie in [0, period)")

    @property
    def weight(self) -> int:
        return len(self.characteristic_set)

    @classmethod
    def from_bits(cls, bits: Sequence[int] | str, index: int | None = None) -> ScheduleSequence:
        if isinstance(bits, str):
            bits = [int(c) for c in bits if c in "01"]
        return cls(len(bits), tuple(i for i, b in enumerate(bits) if b), index)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.period, dtype=np.uint8)
        out[list(self.characteristic_set)] = 1
        return out

    def __str__(self) -> str:
        return "".join(map(str, self.dense()))


@dataclass(frozen=True)
class SequenceFamily:
    p: int
    q: int
    sequences: tuple[ScheduleSequence, ...]

    @property
    def w(self) -> int:
        return self.p

    @property
    def L(self) -> int:
        return self.p * self.q

    def __getitem__(self, g: int) -> ScheduleSequence:
        """Sequence ``v_g`` with the 1-based index used by the construction."""
        if not 1 <= g <= len(self.sequences):
            raise IndexError(f"sequence index {g} outside 1..{len(self.sequences)}")
        return self.sequences[g - 1]

    def __len__(self) -> int:
        return len(self.sequences)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "w": self.w,
            "L": self.L,
            "sequences": [
                {"index": s.index, "characteristic_set": list(s.characteristic_set)}
                for s in self.sequences
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> SequenceFamily:
        p, q = int(doc["p"]), int(doc["q"])
        L = int(doc.get("L", p * q))
        if L != p * q:
            raise ValueError(f"inconsistent family document: L={L} but p*q={p * q}")
        seqs = tuple(
            ScheduleSequence(L, tuple(s["characteristic_set"]), s.get("index"))
            for s in doc["sequences"]
        )
        return cls(p, q, seqs)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> SequenceFamily:
        return cls.from_dict(json.loads(Path(path).read_text()))


def crt_index(a: int, b: int, p: int, q: int) -> int:
    """The unique t in Z_pq with t = a (mod p) and t = b (mod q)."""
    # pow(x, -1, m) runs the extended Euclidean algorithm.
    return (a * q * pow(q, -1, p) + b * p * pow(p, -1, q)) % (p * q)


def crt_construct(p: int, q: int, *, allow_short_q: bool = False) -> SequenceFamily:
    """Build the p+1 CRT sequences of period L = p*q and weight p.

    For g in 1..p the ones sit at t = (u*g mod p, u mod q); for g = p+1 they sit
    at t = (u mod p, 0); u runs over 0..p-1 in both cases. With q < 2p-1 the
    cross-correlation bound no longer holds; ``allow_short_q`` builds such a
    family anyway for experiments that use one.
    """
    if not is_prime(p):
        raise ConstructionError("not_prime", f"p={p} is not prime")
    if gcd(p, q) != 1:
        raise ConstructionError("not_coprime", f"gcd(p, q) = gcd({p}, {q}) != 1")
    if q < 2 * p - 1 and not allow_short_q:
        raise ConstructionError("q_too_small", f"q={q} is below 2p-1={2 * p - 1}")
    L = p * q
    seqs = []
    for g in range(1, p + 1):
        ones = sorted(crt_index(u * g, u, p, q) for u in range(p))
        seqs.append(ScheduleSequence(L, tuple(ones), g))
    ones = sorted(crt_index(u, 0, p, q) for u in range(p))
    seqs.append(ScheduleSequence(L, tuple(ones), p + 1))
    return SequenceFamily(p, q, tuple(seqs))


def _check_same_period(a: ScheduleSequence, b: ScheduleSequence) -> None:
    if a.period != b.period:
        raise ValueError(f"period mismatch: {a.period} vs {b.period}")


def cross_correlation(a: ScheduleSequence, b: ScheduleSequence, tau: int) -> int:
    """Hamming cross-correlation sum_t a(t) * b(t + tau mod L)."""
    _check_same_period(a, b)
    L = a.period
    ones_b = set(b.characteristic_set)
    return sum(1 for x in a.characteristic_set if (x + tau) % L in ones_b)


def correlation_profile(a: ScheduleSequence, b: ScheduleSequence) -> np.ndarray:
    """Cross-correlation for every shift tau in Z_L, by counting differences."""
    _check_same_period(a, b)
    L = a.period
    xa = np.asarray(a.characteristic_set)
    xb = np.asarray(b.characteristic_set)
    diffs = (xb[None, :] - xa[:, None]) % L
    return np.bincount(diffs.ravel(), minlength=L)


@dataclass(frozen=True)
class MhuiReport:
    n_users: int
    min_weight: int
    weights_ok: bool
    max_cross_correlation: int
    worst_pair: tuple[int, int] | None
    worst_shift: int | None

    @property
    def passed(self) -> bool:
        return self.weights_ok and self.max_cross_correlation <= 1


def verify_mhui(family_subset: Iterable[ScheduleSequence], n_users: int) -> MhuiReport:
    seqs = list(family_subset)
    if not seqs:
        raise ValueError("verify_mhui needs at least one sequence")
    for s in seqs[1:]:
        _check_same_period(seqs[0], s)
    min_weight = min(s.weight for s in seqs)
    worst, pair, shift = 0, None, None
    for i, j in combinations(range(len(seqs)), 2):
        prof = correlation_profile(seqs[i], seqs[j])
        tau = int(prof.argmax())
        if prof[tau] > worst or pair is None:
            worst, pair, shift = int(prof[tau]), (i, j), tau
    return MhuiReport(n_users, min_weight, min_weight >= n_users, worst, pair, shift)


@dataclass(frozen=True)
class SuperframeView:
    t_frame: int
    period: int
    weight: int
    beta: int
    char_set_super: tuple[int, ...]
    cyclic_distances: tuple[int, ...]
    one_positions: tuple[int, ...]

    @property
    def w_prime(self) -> int:
        return len(self.char_set_super)

    @property
    def period_distances(self) -> tuple[int, ...]:
        """Distances between consecutive ones inside one sequence period."""
        return self.cyclic_distances[: self.weight]

    @property
    def position_multiset(self) -> Counter:
        return Counter(self.one_positions)

    @property
    def frame_of(self) -> tuple[int, ...]:
        return tuple(y // self.t_frame for y in self.char_set_super)


def superframe_view(seq: ScheduleSequence, t_frame: int) -> SuperframeView:
    if t_frame < 1:
        raise ValueError("frame length must be positive")
    L = seq.period
    beta = lcm(t_frame, L)
    ys = tuple(a * L + x for a in range(beta // L) for x in seq.characteristic_set)
    n = len(ys)
    dist = tuple((ys[(k + 1) % n] - ys[k]) % beta or beta for k in range(n))
    sigma = tuple(y % t_frame for y in ys)
    return SuperframeView(t_frame, L, seq.weight, beta, ys, dist, sigma)


def max_ones_per_frame(seq: ScheduleSequence, t_frame: int) -> int:
    view = superframe_view(seq, t_frame)
    return max(Counter(view.frame_of).values())
