"""Brute-force ground truth: enumerate offset vectors and replay AoI slot by slot.

Nothing here uses event probabilities or gap formulas, so agreement with the
analytics module is a genuine cross-check.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .analytics import Scenario
from .sequences import ScheduleSequence, lcm

DEFAULT_BUDGET = 10**6


class OracleBudgetError(RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"offset enumeration needs {required} vectors, budget is {budget}")
        self.required = required
        self.budget = budget


class _NoDrop:
    """Returned when a user never delivers; its AoI grows without bound."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NO_DROP"

    def __bool__(self) -> bool:
        return False


NO_DROP = _NoDrop()


@dataclass(frozen=True)
class OffsetVector:
    offsets: tuple[int, ...]
    period: int

    def __post_init__(self):
        object.__setattr__(self, "offsets", tuple(int(t) for t in self.offsets))
        if any(not 0 <= t < self.period for t in self.offsets):
            raise ValueError(f"offsets must lie in [0, {self.period})")


def _replay_local(seq: ScheduleSequence, t_frame: int, success: Sequence[int]):
    """Average AoI over the second of two superframes, given the positions (in
    the user's own time) of its collision-free ones within a period."""
    L, T = seq.period, t_frame
    beta = lcm(T, L)
    horizon = 2 * beta
    ok = np.zeros(L, dtype=bool)
    ok[list(success)] = True
    tx_ok = np.tile(ok, horizon // L)
    t = np.arange(horizon)
    frame = t // T
    # First collision-free slot of each frame delivers that frame's packet.
    hit_frames = frame[tx_ok]
    first = np.zeros(horizon, dtype=bool)
    if hit_frames.size:
        idx = np.flatnonzero(tx_ok)
        keep = np.ones(idx.size, dtype=bool)
        keep[1:] = hit_frames[1:] != hit_frames[:-1]
        first[idx[keep]] = True
    drops = np.flatnonzero(first[beta:])
    if drops.size == 0:
        return NO_DROP
    # Index of the most recent drop at or before each slot.
    last = np.where(first, t, -1)
    last = np.maximum.accumulate(last)
    service = last % T
    aoi = np.where(last >= 0, service + (t - last), t + T)
    return Fraction(int(aoi[beta:].sum()), beta)


def replay_aoi(scenario: Scenario, offsets: OffsetVector | Sequence[int], user: int):
    """Exact time-average AoI of ``user`` for one offset vector, or NO_DROP."""
    if not isinstance(offsets, OffsetVector):
        offsets = OffsetVector(tuple(offsets), scenario.L)
    if len(offsets.offsets) != scenario.n_users:
        raise ValueError("need one offset per user")
    if not 0 <= user < scenario.n_users:
        raise IndexError(f"user {user} outside 0..{scenario.n_users - 1}")
    L = scenario.L
    busy = np.zeros(L, dtype=np.int64)
    for i in range(scenario.n_users):
        busy += np.roll(scenario.sequence(i).dense().astype(np.int64), offsets.offsets[i])
    seq = scenario.sequence(user)
    tau = offsets.offsets[user]
    success = [x for x in seq.characteristic_set if busy[(x + tau) % L] == 1]
    return _replay_local(seq, scenario.t_frame, success)


def _collision_masks(scenario: Scenario, user: int, budget: int) -> np.ndarray:
    """Bitmask of the user's collided ones for every offset vector of the others
    (user fixed at offset 0), in lexicographic offset order."""
    N, L = scenario.n_users, scenario.L
    required = L ** (N - 1)
    if required > budget:
        raise OracleBudgetError(required, budget)
    own = scenario.sequence(user).characteristic_set
    if len(own) > 62:
        raise ValueError("weights above 62 do not fit the bitmask representation")
    masks = np.zeros(1, dtype=np.int64)
    for i in range(N):
        if i == user:
            continue
        other = scenario.sequence(i).dense().astype(bool)
        tau = np.arange(L)
        hit = np.zeros(L, dtype=np.int64)
        for k, x in enumerate(own):
            hit |= other[(x - tau) % L].astype(np.int64) << k
        masks = (masks[:, None] | hit[None, :]).ravel()
    return masks


@dataclass(frozen=True)
class OracleResult:
    value: Fraction | None
    vectors: int
    no_drop: int
    distinct_events: int

    def __float__(self) -> float:
        return float(self.value)


def oracle_avg_aoi(scenario: Scenario, user: int = 0, *, budget: int = DEFAULT_BUDGET) -> OracleResult:
    """Average of the replayed AoI over all offset vectors of the other users.

    Offset vectors ending in a user that never delivers are counted in
    ``no_drop`` and left out of the average.
    """
    masks = _collision_masks(scenario, user, budget)
    seq = scenario.sequence(user)
    own = seq.characteristic_set
    values, counts = np.unique(masks, return_counts=True)
    total, used, lost = Fraction(0), 0, 0
    for m, c in zip(values.tolist(), counts.tolist()):
        success = [x for k, x in enumerate(own) if not (m >> k) & 1]
        a = _replay_local(seq, scenario.t_frame, success)
        if a is NO_DROP:
            lost += c
            continue
        total += a * c
        used += c
    value = total / used if used else None
    return OracleResult(value, int(masks.size), lost, int(values.size))


def oracle_event_counts(scenario: Scenario, user: int = 0, *, budget: int = DEFAULT_BUDGET) -> dict[int, int]:
    """M_r: number of offset vectors leaving exactly r of the user's ones collision free."""
    masks = _collision_masks(scenario, user, budget)
    w = scenario.sequence(user).weight
    collided = Counter(int(m).bit_count() for m in masks.tolist())
    return {r: collided.get(w - r, 0) for r in range(w + 1)}
