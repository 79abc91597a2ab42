from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from seqaoi.analytics import Scenario, analyze
from seqaoi.oracle import replay_aoi
from seqaoi.sequences import crt_construct
from seqaoi import simulator as sim
from seqaoi.simulator import (
    AlohaHorizon,
    FramedAloha,
    Geometric,
    SequenceScheme,
    SlottedAloha,
    UniformFull,
    UniformRange,
    duty_factor,
    parse_distribution,
    run_simulation,
)


def test_parse_distribution():
    assert parse_distribution("uniform") == UniformFull()
    assert parse_distribution("range:57") == UniformRange(57)
    assert parse_distribution("geom:0.01") == Geometric(0.01)
    for bad in ("range", "geom:2", "normal"):
        with pytest.raises(ValueError):
            parse_distribution(bad)


def test_offset_draws_respect_support():
    u = np.linspace(0, 1, 1001, endpoint=False)
    assert draw_range(UniformFull(), u, 15) == (0, 14)
    assert draw_range(UniformRange(3), u, 15) == (0, 3)
    assert draw_range(Geometric(0.5), u, 15)[0] == 0
    with pytest.raises(ValueError):
        sim.draw_offsets(UniformRange(15), u, 15)


def draw_range(dist, u, L):
    x = sim.draw_offsets(dist, u, L)
    return int(x.min()), int(x.max())


def test_uniform_stream_is_uniform():
    keys = sim.run_keys(5, 0, 200000)
    u = sim.uniforms(keys, 7)
    assert 0 <= u.min() and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.005
    # Keys depend only on (seed, run index).
    assert np.array_equal(sim.run_keys(5, 100, 50), keys[100:150])


def test_duty_factors():
    sc = Scenario.build(7, 60, 60)
    assert duty_factor(SequenceScheme(), sc) == Fraction(1, 60)
    assert duty_factor(SlottedAloha(Fraction(1, 7)), sc) == Fraction(1, 7)
    assert duty_factor(FramedAloha(7), Scenario.build(7, 50)) == Fraction(7, 50)


def test_scheme_validation():
    with pytest.raises(ValueError):
        SlottedAloha(0)
    with pytest.raises(ValueError):
        FramedAloha(0)
    sc = Scenario.build(3, 4, 5)
    with pytest.raises(ValueError):
        run_simulation(sc, FramedAloha(5), UniformFull(), 10, 1)
    with pytest.raises(ValueError):
        run_simulation(sc, SequenceScheme(), UniformFull(), 0, 1)


def test_steady_state_matches_replay():
    fam = crt_construct(3, 7)
    for T in (4, 5, 6, 9):
        sc = Scenario(3, T, fam, (2, 3, 4))
        keys = sim.run_keys(9, 0, 120)
        views = {g: sc.view(i) for i, g in enumerate(sc.assignment)}
        out = sim._sequence_chunk(sc, SequenceScheme(), UniformFull(), keys, views)
        tau = [sim.draw_offsets(UniformFull(), sim.uniforms(keys, sim._OFFSET_STREAM + i), 21)
               for i in range(3)]
        for r in range(120):
            offs = [int(tau[i][r]) for i in range(3)]
            for i in range(3):
                assert out[r, i] == pytest.approx(float(replay_aoi(sc, offs, i)), rel=1e-12)


def test_sequence_simulation_converges_to_analytic():
    sc = Scenario.build(3, 4, 5)
    st = run_simulation(sc, SequenceScheme(), UniformFull(), 20000, 2)
    exact = np.mean([analyze(sc, u).value for u in range(3)])
    assert abs(st.pooled_mean - exact) <= 4 * st.std_error + 1e-9


def test_determinism_and_thread_independence():
    sc = Scenario.build(5, 12, 11)
    a = run_simulation(sc, SequenceScheme(), UniformFull(), 3000, 8, threads=1)
    b = run_simulation(sc, SequenceScheme(), UniformFull(), 3000, 8, threads=3)
    assert a == b
    f1 = run_simulation(sc, FramedAloha(2), UniformFull(), 2500, 8, threads=1)
    f2 = run_simulation(sc, FramedAloha(2), UniformFull(), 2500, 8, threads=2)
    assert f1 == f2
    assert run_simulation(sc, FramedAloha(2), UniformFull(), 2500, 9) != f1


def test_prefix_runs_are_shared():
    sc = Scenario.build(4, 9)
    small = run_simulation(sc, SlottedAloha(Fraction(1, 4)), UniformFull(), 1024, 3)
    big = run_simulation(sc, SlottedAloha(Fraction(1, 4)), UniformFull(), 2048, 3)
    assert small.pooled_mean != big.pooled_mean
    again = run_simulation(sc, SlottedAloha(Fraction(1, 4)), UniformFull(), 1024, 3, threads=4)
    assert again.pooled_mean == small.pooled_mean


def test_full_frame_framed_aloha_never_delivers():
    sc = Scenario.build(3, 6)
    st = run_simulation(sc, FramedAloha(6), UniformFull(), 50, 1)
    assert st.no_drop == 150
    assert math.isnan(st.pooled_mean)


def test_single_user_aloha_is_deterministic_when_always_on():
    sc = Scenario(1, 5, crt_construct(3, 5), (2,))
    st = run_simulation(sc, SlottedAloha(1), UniformFull(), 20, 1)
    # Every frame delivers in its first slot: AoI cycles 0, 1, 2, 3, 4.
    assert st.pooled_mean == pytest.approx(2.0)
    assert st.std_error == 0


def test_framed_prefers_moderate_attempts():
    sc = Scenario.build(7, 50)
    means = {w: run_simulation(sc, FramedAloha(w), UniformFull(), 1500, 4).pooled_mean for w in (1, 7, 30)}
    assert means[7] < means[1] and means[7] < means[30]


def test_aligned_frames_toggle_recorded():
    sc = Scenario.build(3, 8)
    st = run_simulation(sc, FramedAloha(2), UniformFull(), 100, 1,
                        horizon=AlohaHorizon(aligned_frames=True))
    assert st.meta["frame_offsets"] == "aligned"


def test_sequence_reuse_reports_lost_users():
    fam = crt_construct(5, 11)
    sc = Scenario(5, 11, fam, (2, 3, 4, 5, 6))
    st = run_simulation(sc, SequenceScheme(extra_users=3), UniformFull(), 4000, 6)
    assert len(st.per_user_mean) == 8
    assert st.no_drop > 0
    assert st.meta["extra_users"] == 3


def test_nonuniform_offsets_run():
    sc = Scenario.build(5, 12, 11)
    for dist in (UniformRange(sc.L // 4), Geometric(0.01)):
        st = run_simulation(sc, SequenceScheme(), dist, 500, 2)
        assert st.meta["offset_distribution"] == dist.label()
        assert math.isfinite(st.pooled_mean)

