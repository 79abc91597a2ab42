"""CRT parameter selection and framed-ALOHA tuning."""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd

from .analytics import Scenario, avg_aoi_coprime, avg_aoi_one_per_frame
from .sequences import crt_construct, smallest_prime_geq, superframe_view
from .simulator import FramedAloha, UniformFull, run_simulation

REASONS = (
    "q_T_lower_aoi",
    "tie_or_q2p1_lower_aoi",
    "T_below_2p_minus_1",
    "gcd_condition_failed",
)


@dataclass(frozen=True)
class SelectionResult:
    p: int
    q: int
    w: int
    chosen_pool: tuple[int, ...]
    a_q2p: float | None
    a_qT: float | None
    decision_reason: str

    @property
    def L(self) -> int:
        return self.p * self.q

    def assignment(self, n_users: int) -> tuple[int, ...]:
        """The n highest-indexed sequences of the chosen pool."""
        if n_users > len(self.chosen_pool):
            raise ValueError(f"pool holds {len(self.chosen_pool)} sequences, {n_users} requested")
        return self.chosen_pool[len(self.chosen_pool) - n_users:]

    def scenario(self, n_users: int, t_frame: int) -> Scenario:
        return Scenario(n_users, t_frame, crt_construct(self.p, self.q), self.assignment(n_users))


def select_parameters(n_users: int, t_frame: int) -> SelectionResult:
    """Pick q in {2p-1, T} by comparing the closed-form AoI of sequence v_2."""
    if n_users < 2 or t_frame < 1:
        raise ValueError("need at least two users and a positive frame length")
    p = smallest_prime_geq(n_users)
    short = 2 * p - 1
    full_pool = tuple(range(1, p + 2))
    if t_frame < short:
        return SelectionResult(p, short, p, full_pool, None, None, "T_below_2p_minus_1")
    if gcd(t_frame, p * short) != 1:
        return SelectionResult(p, short, p, full_pool, None, None, "gcd_condition_failed")

    sc1 = Scenario.build(n_users, t_frame, short)
    a1 = avg_aoi_coprime(sc1, superframe_view(sc1.family[2], t_frame))
    sc2 = Scenario.build(n_users, t_frame, t_frame)
    a2 = avg_aoi_one_per_frame(sc2, superframe_view(sc2.family[2], t_frame))
    if a1 > a2:
        return SelectionResult(p, t_frame, p, tuple(range(2, p + 2)), a1, a2, "q_T_lower_aoi")
    return SelectionResult(p, short, p, full_pool, a1, a2, "tie_or_q2p1_lower_aoi")


@dataclass(frozen=True)
class SweepRow:
    w_fa: int
    mean: float
    std_error: float


@dataclass(frozen=True)
class FramedSweep:
    n_users: int
    t_frame: int
    runs: int
    seed: int
    rows: tuple[SweepRow, ...]

    @property
    def best(self) -> SweepRow:
        finite = [r for r in self.rows if r.mean == r.mean]
        return min(finite, key=lambda r: (r.mean, r.w_fa))

    def mean_of(self, w_fa: int) -> float:
        for r in self.rows:
            if r.w_fa == w_fa:
                return r.mean
        raise KeyError(w_fa)


def optimize_framed_aloha(n_users: int, t_frame: int, runs: int, seed: int,
                          candidates=None) -> FramedSweep:
    """Simulate every w_fa with the same seed (common random numbers) and keep
    the sweep table; ``best`` is the argmin."""
    scenario = Scenario.build(n_users, t_frame)
    ws = range(1, t_frame + 1) if candidates is None else candidates
    rows = []
    for w in ws:
        st = run_simulation(scenario, FramedAloha(w), UniformFull(), runs, seed)
        rows.append(SweepRow(w, st.pooled_mean, st.std_error))
    return FramedSweep(n_users, t_frame, runs, seed, tuple(rows))
