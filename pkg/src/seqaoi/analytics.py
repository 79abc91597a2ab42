"""Exact average AoI of one user under sequence scheduling with random offsets.

Every offset vector induces an event: the subset of the user's ones that are
collision free in each period. Under uniform offsets all events with the same
number r of successes are equally likely (``event_probability``), and the
average AoI is the probability-weighted sum of a per-event bracket. The bracket
can be evaluated by replaying one superframe (``evaluate_event``), or through
the closed forms below when the frame length is coprime to the period or each
frame holds at most one transmission.

P_r and the closed forms are evaluated in exact rational arithmetic; the public
functions return floats unless ``exact=True``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb, gcd
from typing import Sequence

from .partitions import partition_event_sum, zeta
from .sequences import (
    ScheduleSequence,
    SequenceFamily,
    SuperframeView,
    crt_construct,
    lcm,
    smallest_prime_geq,
    superframe_view,
)

RTOL = 1e-9


@dataclass(frozen=True)
class Scenario:
    """N users sharing a CRT family; ``assignment[i]`` is user i's sequence index."""

    n_users: int
    t_frame: int
    family: SequenceFamily
    assignment: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.n_users < 1 or self.t_frame < 1:
            raise ValueError("n_users and t_frame must be positive")
        if not self.assignment:
            object.__setattr__(self, "assignment", default_assignment(self.family, self.n_users))
        object.__setattr__(self, "assignment", tuple(int(g) for g in self.assignment))
        if len(self.assignment) != self.n_users:
            raise ValueError(f"assignment has {len(self.assignment)} entries for {self.n_users} users")
        for g in self.assignment:
            self.family[g]

    @classmethod
    def build(cls, n_users: int, t_frame: int, q: int | None = None,
              assignment: Sequence[int] = ()) -> Scenario:
        p = smallest_prime_geq(n_users)
        family = crt_construct(p, 2 * p - 1 if q is None else q)
        return cls(n_users, t_frame, family, tuple(assignment))

    @property
    def w(self) -> int:
        return self.family.w

    @property
    def L(self) -> int:
        return self.family.L

    @property
    def beta(self) -> int:
        return lcm(self.t_frame, self.L)

    def sequence(self, user: int) -> ScheduleSequence:
        return self.family[self.assignment[user]]

    def view(self, user: int) -> SuperframeView:
        return superframe_view(self.sequence(user), self.t_frame)

    @property
    def mhui_guaranteed(self) -> bool:
        return self.n_users <= self.w and len(set(self.assignment)) == self.n_users


def default_assignment(family: SequenceFamily, n_users: int) -> tuple[int, ...]:
    """The n highest-indexed sequences of the family.

    Sequence v_1 packs its ones into consecutive slots and is the worst choice
    when frames are shorter than the period, so it is the last one taken.
    """
    total = len(family)
    if n_users > total:
        raise ValueError(f"{n_users} users but only {total} sequences; pass an explicit assignment")
    return tuple(range(total - n_users + 1, total + 1))


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind S(n, k)."""
    if n < 0 or k < 0:
        raise ValueError("negative argument")
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    if n == k:
        return 1
    if k == 0:
        return 0
    if k == 1:
        return 1
    return k * stirling2(n - 1, k) + (stirling2(n - 1, k - 1) if k - 1 <= n - 1 else 0)


def surjections(n: int, k: int) -> int:
    """Number of maps from an n-set onto a k-set, k! * S(n, k)."""
    return sum((-1) ** m * comb(k, m) * (k - m) ** n for m in range(k + 1))


def _per_event_count(n_users: int, w: int, L: int, r: int) -> int:
    """Offset vectors of the other N-1 users that produce one given event with
    r successes (user's own offset fixed)."""
    if w * w > L:
        raise ValueError(f"w^2={w * w} exceeds L={L}; the family cannot be MHUI")
    f = w - r
    total = 0
    for n in range(f, n_users):
        total += comb(n_users - 1, n) * surjections(n, f) * w**n * (L - w * w) ** (n_users - 1 - n)
    return total


def event_count_total(r: int, n_users: int, w: int, L: int) -> int:
    """Offset vectors (other users) under which exactly r ones succeed."""
    if not 0 <= r <= w:
        raise ValueError(f"r={r} outside 0..{w}")
    if r == 0:
        return 0 if n_users - 1 < w else comb(w, 0) * _per_event_count(n_users, w, L, 0)
    return comb(w, r) * _per_event_count(n_users, w, L, r)


def event_probability(r: int, scenario: Scenario) -> Fraction:
    """Probability of each single event with r successful ones."""
    w = scenario.w
    if not 1 <= r <= w:
        raise ValueError(f"r={r} outside 1..{w}")
    N, L = scenario.n_users, scenario.L
    return Fraction(_per_event_count(N, w, L, r), L ** (N - 1))


def event_probabilities(scenario: Scenario) -> list[Fraction]:
    return [event_probability(r, scenario) for r in range(1, scenario.w + 1)]


def _f1_exact(d: int, t_frame: int, L: int) -> Fraction:
    if d <= 0:
        raise ValueError("gap must be positive")
    T = t_frame
    lo = d // T
    hi = -(-d // T)
    f = d - lo * T - 1
    num = hi * f * (f + 1) + lo * (f + T) * (T - f - 1) + (lo * (2 * d - T) - lo * lo * T + d) * T
    # The per-event -1/2 is spread over the gaps as -d/(2L); the gaps sum to L.
    return Fraction(num - d, 2 * L)


def f1(d: int, t_frame: int, L: int) -> float:
    """Gap score for the coprime case: summing it over an event's gaps gives
    that event's average AoI."""
    return float(_f1_exact(d, t_frame, L))


@dataclass(frozen=True)
class EventStats:
    """Steady-state AoI drops of one event over one superframe."""

    beta: int
    t_frame: int
    drop_times: tuple[int, ...]
    service_times: tuple[int, ...]
    inter_departures_slot: tuple[int, ...]
    inter_departures_frame: tuple[int, ...]

    @property
    def drop_count(self) -> int:
        return len(self.drop_times)

    def bracket_slot(self) -> Fraction:
        """Average AoI from service times and slot-level inter-departures."""
        S, Y = self.service_times, self.inter_departures_slot
        total = sum(Y)
        sy = sum(s * y for s, y in zip(S, Y))
        yy = sum(y * y for y in Y)
        return Fraction(sy, total) + Fraction(yy, 2 * total) - Fraction(1, 2)

    def bracket_frame(self) -> Fraction:
        """Same quantity from the next drop's service time and frame-level gaps."""
        S, X = self.service_times, self.inter_departures_frame
        n = len(S)
        total = sum(X)
        sx = sum(S[(j + 1) % n] * X[j] for j in range(n))
        xx = sum(x * x for x in X)
        return Fraction(sx, total) + Fraction(xx, 2 * total) - Fraction(1, 2)


def evaluate_event(seq: ScheduleSequence, t_frame: int, success_set) -> EventStats:
    """AoI drops when exactly ``success_set`` of the sequence's ones succeed in
    every period.

    Frame boundaries repeat every superframe, so the drop pattern of one
    superframe is the steady state: a successful one drops the AoI iff it is the
    first success of its frame, and the service time is its offset inside the
    frame.
    """
    succ = sorted(set(int(x) for x in success_set))
    if not succ:
        raise ValueError("success_set must be non-empty")
    if not set(succ) <= set(seq.characteristic_set):
        raise ValueError("success_set must be a subset of the characteristic set")
    L, T = seq.period, t_frame
    beta = lcm(T, L)
    drops: list[int] = []
    last_frame = -1
    for a in range(beta // L):
        for x in succ:
            t = a * L + x
            frame = t // T
            if frame != last_frame:
                drops.append(t)
                last_frame = frame
    n = len(drops)
    S = tuple(t % T for t in drops)
    Y = tuple((drops[(j + 1) % n] - drops[j]) % beta or beta for j in range(n))
    ends = [(t // T + 1) * T for t in drops]
    X = tuple((ends[(j + 1) % n] - ends[j]) % beta or beta for j in range(n))
    return EventStats(beta, T, tuple(drops), S, Y, X)


class InfeasibleError(ValueError):
    pass


def _check_view(scenario: Scenario, view: SuperframeView) -> None:
    if view.period != scenario.L or view.t_frame != scenario.t_frame:
        raise ValueError("view does not belong to this scenario's family and frame length")


def avg_aoi_event_enum(scenario: Scenario, seq: ScheduleSequence, *, max_weight: int = 16,
                       exact: bool = False):
    """Average AoI by enumerating all 2^w - 1 events and replaying each one.

    Both bracket forms are computed per event and must agree.
    """
    w = seq.weight
    if seq.period != scenario.L or w != scenario.w:
        raise ValueError("sequence does not belong to the scenario's family")
    if w > max_weight:
        raise InfeasibleError(f"w={w} needs 2^{w} event replays; limit is w <= {max_weight}")
    total = Fraction(0)
    for r, pr in enumerate(event_probabilities(scenario), start=1):
        if pr == 0:
            continue
        acc = Fraction(0)
        for chosen in combinations(seq.characteristic_set, r):
            stats = evaluate_event(seq, scenario.t_frame, chosen)
            a, b = stats.bracket_slot(), stats.bracket_frame()
            if a != b:
                raise AssertionError(f"bracket forms disagree for event {chosen}: {a} vs {b}")
            acc += a
        total += pr * acc
    return total if exact else float(total)


def _closed_form(scenario: Scenario, b: list[Fraction]) -> Fraction:
    w = scenario.w
    return sum(
        (pr * partition_event_sum(w, r, b)
         for r, pr in enumerate(event_probabilities(scenario), start=1) if pr),
        Fraction(0),
    )


def avg_aoi_coprime(scenario: Scenario, view: SuperframeView, *, exact: bool = False):
    """Closed form for gcd(T, L) = 1."""
    _check_view(scenario, view)
    T, L = scenario.t_frame, scenario.L
    if gcd(T, L) != 1:
        raise ValueError(f"gcd(T, L) = gcd({T}, {L}) != 1")
    ell = view.period_distances
    w = len(ell)
    b = [sum(_f1_exact(zeta(ell, k, j), T, L) for k in range(w)) for j in range(1, w + 1)]
    value = _closed_form(scenario, b)
    return value if exact else float(value)


def avg_aoi_one_per_frame(scenario: Scenario, view: SuperframeView, *, exact: bool = False):
    """Closed form when no frame of the superframe holds two ones."""
    _check_view(scenario, view)
    frames = view.frame_of
    if len(set(frames)) != len(frames):
        raise ValueError("some frame holds more than one transmission slot")
    L, beta = scenario.L, view.beta
    ell_sf, sigma = view.cyclic_distances, view.one_positions
    ell = view.period_distances
    w, wp = len(ell), len(ell_sf)
    b = []
    for j in range(1, w + 1):
        service = sum(Fraction(zeta(ell_sf, k, j) * sigma[k], beta) for k in range(wp))
        spread = sum(Fraction(z * (z - 1), 2 * L) for z in (zeta(ell, k, j) for k in range(w)))
        b.append(service + spread)
    value = _closed_form(scenario, b)
    return value if exact else float(value)


def aoi_upper_bound(t_frame: int, beta: int) -> float:
    return t_frame + (beta - 3) / 2


def avg_aoi_period_frame(scenario: Scenario, seq: ScheduleSequence, *, exact: bool = False):
    """T = L: one drop per period at the first success, so the bracket reduces
    to (first success position) + (L - 1)/2."""
    L = scenario.L
    if scenario.t_frame != L:
        raise ValueError("only defined for frame length equal to the period")
    total = Fraction(0)
    for r, pr in enumerate(event_probabilities(scenario), start=1):
        acc = Fraction(0)
        for chosen in combinations(seq.characteristic_set, r):
            acc += min(chosen) + Fraction(L - 1, 2)
        total += pr * acc
    return total if exact else float(total)


@dataclass(frozen=True)
class AnalysisResult:
    value: float
    method: str
    upper_bound: float
    notes: tuple[str, ...] = ()


def analyze(scenario: Scenario, user: int = 0, *, max_weight: int = 16,
            oracle_budget: int = 10**6) -> AnalysisResult:
    """Cheapest exact method whose precondition holds: coprime closed form,
    one-per-frame closed form, event enumeration, then offset enumeration."""
    from .oracle import OracleBudgetError, oracle_avg_aoi

    seq = scenario.sequence(user)
    view = superframe_view(seq, scenario.t_frame)
    bound = aoi_upper_bound(scenario.t_frame, view.beta)
    notes = []
    if scenario.mhui_guaranteed:
        if gcd(scenario.t_frame, scenario.L) == 1:
            return AnalysisResult(avg_aoi_coprime(scenario, view), "coprime", bound)
        notes.append(f"gcd(T, L) = {gcd(scenario.t_frame, scenario.L)}")
        if len(set(view.frame_of)) == view.w_prime:
            return AnalysisResult(avg_aoi_one_per_frame(scenario, view), "one_per_frame", bound,
                                  tuple(notes))
        notes.append("some frame holds two or more ones")
        try:
            return AnalysisResult(avg_aoi_event_enum(scenario, seq, max_weight=max_weight),
                                  "event_enumeration", bound, tuple(notes))
        except InfeasibleError as exc:
            notes.append(str(exc))
    else:
        notes.append("assignment is not an MHUI set; event probabilities do not apply")
    try:
        res = oracle_avg_aoi(scenario, user, budget=oracle_budget)
    except OracleBudgetError as exc:
        notes.append(str(exc))
        raise InfeasibleError("; ".join(notes)) from exc
    return AnalysisResult(float(res.value), "oracle", bound, tuple(notes))
