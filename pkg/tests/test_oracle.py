from __future__ import annotations

from fractions import Fraction
from math import comb
import random

import pytest

from seqaoi.analytics import Scenario, avg_aoi_coprime, avg_aoi_event_enum, avg_aoi_one_per_frame, event_probability, evaluate_event
from seqaoi.oracle import (
    NO_DROP,
    OffsetVector,
    OracleBudgetError,
    oracle_avg_aoi,
    oracle_event_counts,
    replay_aoi,
)
from seqaoi.sequences import ScheduleSequence, SequenceFamily, crt_construct


def test_single_user_hand_replay():
    fam = crt_construct(3, 5)
    sc = Scenario(1, 5, fam, (2,))
    # Drops at 0, 7, 11 with service times 0, 2, 1; gaps 7, 4, 4.
    expect = Fraction(0 * 7 + 2 * 4 + 1 * 4 + (42 + 12 + 12) // 2, 15)
    assert replay_aoi(sc, (0,), 0) == expect
    assert expect == evaluate_event(fam[2], 5, fam[2].characteristic_set).bracket_slot()


def test_two_user_illustration():
    s1 = ScheduleSequence.from_bits("1100", 1)
    s2 = ScheduleSequence.from_bits("1010", 2)
    sc = Scenario(2, 3, SequenceFamily(2, 2, (s1, s2)), (1, 2))
    # User 1 collides at slot 0 and succeeds at slot 1 of every period: drops at
    # 1, 5, 9 with service times 1, 2, 0.
    assert replay_aoi(sc, (0, 0), 0) == Fraction(5, 2)


def test_total_collision_sentinel():
    fam = crt_construct(3, 5)
    sc = Scenario(2, 4, fam, (2, 2))
    assert replay_aoi(sc, (3, 3), 0) is NO_DROP
    assert not NO_DROP
    res = oracle_avg_aoi(sc, 0)
    assert res.no_drop == 1 and res.vectors == 15


def test_offset_validation():
    sc = Scenario.build(2, 4, 5)
    with pytest.raises(ValueError):
        replay_aoi(sc, (0, 15), 0)
    with pytest.raises(ValueError):
        replay_aoi(sc, (0,), 0)
    with pytest.raises(IndexError):
        replay_aoi(sc, (0, 1), 2)
    with pytest.raises(ValueError):
        OffsetVector((0, -1), 15)


def test_shift_invariance():
    rng = random.Random(3)
    fam = crt_construct(3, 7)
    sc = Scenario(3, 5, fam, (2, 3, 4))
    for _ in range(30):
        tau = [rng.randrange(21) for _ in range(3)]
        c = rng.randrange(21)
        shifted = [(t + c) % 21 for t in tau]
        for u in range(3):
            assert replay_aoi(sc, tau, u) == replay_aoi(sc, shifted, u)


def test_oracle_matches_closed_forms():
    fam = crt_construct(3, 5)
    sc = Scenario(3, 4, fam, (2, 3, 4))
    assert oracle_avg_aoi(sc, 0).value == avg_aoi_coprime(sc, sc.view(0), exact=True)
    sc = Scenario(3, 5, fam, (2, 3, 4))
    assert oracle_avg_aoi(sc, 0).value == avg_aoi_one_per_frame(sc, sc.view(0), exact=True)
    for T in range(1, 15):
        sc = Scenario(2, T, fam, (1, 4))
        assert oracle_avg_aoi(sc, 0).value == avg_aoi_event_enum(sc, fam[1], exact=True)


def test_oracle_agrees_with_replay_per_vector():
    fam = crt_construct(3, 5)
    sc = Scenario(2, 6, fam, (3, 1))
    total = sum(replay_aoi(sc, (0, t), 0) for t in range(15))
    assert oracle_avg_aoi(sc, 0).value == total / 15


def test_budget_guard():
    sc = Scenario.build(5, 7, 11)
    with pytest.raises(OracleBudgetError) as err:
        oracle_avg_aoi(sc, 0)
    assert err.value.required == 55**4
    with pytest.raises(OracleBudgetError):
        oracle_event_counts(sc, 0, budget=100)


def test_event_counts_single_user():
    sc = Scenario(1, 4, crt_construct(3, 5), (2,))
    assert oracle_event_counts(sc, 0) == {0: 0, 1: 0, 2: 0, 3: 1}


@pytest.mark.parametrize("n", [2, 3])
def test_event_counts_match_probabilities(n):
    fam = crt_construct(3, 5)
    sc = Scenario(n, 4, fam, (2, 3, 4)[:n])
    counts = oracle_event_counts(sc, 0)
    assert sum(counts.values()) == 15 ** (n - 1)
    assert counts[0] == 0
    for r in range(1, 4):
        assert Fraction(counts[r], comb(3, r) * 15 ** (n - 1)) == event_probability(r, sc)
