"""Monte Carlo AoI for the sequence scheme and the slotted/framed ALOHA baselines.

Randomness comes from a counter-based generator: every draw is a SplitMix64
hash of (stream key, counter), and the stream key of run k is a hash of the
master seed and k. A run's draws therefore do not depend on how runs are
chunked or which thread executes them.

The sequence scheme is deterministic once offsets are drawn and its AoI is
periodic with period beta, so each run is evaluated in closed form over one
steady-state superframe instead of being replayed slot by slot. ALOHA runs are
replayed frame by frame in compiled kernels.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numba
import numpy as np

from .analytics import Scenario
from .sequences import SuperframeView, superframe_view

CHUNK = 1024
INITIAL_AOI = "T"

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_TWO53 = 1.0 / 9007199254740992.0

# Counter bases keeping the draws of different purposes apart.
_OFFSET_STREAM = 1 << 20
_REUSE_STREAM = 2 << 20
_PHASE_STREAM = 3 << 20
_SLOT_STREAM = 1 << 32


# ---------------------------------------------------------------- randomness

@numba.njit(cache=True, inline="always")
def _mix(x):
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


@numba.njit(cache=True, inline="always")
def _uniform(key, counter):
    x = _mix(key + np.uint64(counter) * _GOLDEN)
    return float(x >> _S11) * _TWO53


def _mix_np(x: np.ndarray) -> np.ndarray:
    x = (x ^ (x >> _S30)) * _M1
    x = (x ^ (x >> _S27)) * _M2
    return x ^ (x >> _S31)


def run_keys(seed: int, first: int, count: int) -> np.ndarray:
    """Stream keys of runs first..first+count-1."""
    base = _mix_np(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))
    runs = np.arange(first, first + count, dtype=np.uint64)
    return _mix_np(base ^ _mix_np(runs + _GOLDEN))


def uniforms(keys: np.ndarray, counter: int) -> np.ndarray:
    """One U[0,1) draw per stream key at the given counter."""
    with np.errstate(over="ignore"):
        x = _mix_np(keys + np.uint64(counter) * _GOLDEN)
    return (x >> _S11).astype(np.float64) * _TWO53


# ------------------------------------------------------------ configuration

@dataclass(frozen=True)
class SequenceScheme:
    """Users follow the scenario's assignment; ``extra_users`` more users join
    and each picks a sequence uniformly from ``reuse_pool`` in every run
    (default: the whole family, v_1 included)."""

    extra_users: int = 0
    reuse_pool: tuple[int, ...] = ()
    name = "seq"

    def pool(self, scenario: Scenario) -> tuple[int, ...]:
        return self.reuse_pool or tuple(range(1, len(scenario.family) + 1))


@dataclass(frozen=True)
class SlottedAloha:
    p_t: Fraction
    name = "slotted"

    def __post_init__(self):
        object.__setattr__(self, "p_t", Fraction(self.p_t).limit_denominator(10**9))
        if not 0 < self.p_t <= 1:
            raise ValueError(f"transmission probability must be in (0, 1], got {self.p_t}")


@dataclass(frozen=True)
class FramedAloha:
    w_fa: int
    name = "framed"

    def __post_init__(self):
        if self.w_fa < 1:
            raise ValueError("w_fa must be at least 1")


SchemeConfig = SequenceScheme | SlottedAloha | FramedAloha


@dataclass(frozen=True)
class UniformFull:
    def label(self) -> str:
        return "uniform"


@dataclass(frozen=True)
class UniformRange:
    hi: int

    def __post_init__(self):
        if self.hi < 0:
            raise ValueError("range upper end must be non-negative")

    def label(self) -> str:
        return f"range:{self.hi}"


@dataclass(frozen=True)
class Geometric:
    p_stop: float

    def __post_init__(self):
        if not 0 < self.p_stop < 1:
            raise ValueError("p_stop must lie strictly between 0 and 1")

    def label(self) -> str:
        return f"geom:{self.p_stop:g}"


OffsetDistribution = UniformFull | UniformRange | Geometric


def parse_distribution(text: str) -> OffsetDistribution:
    if text == "uniform":
        return UniformFull()
    kind, _, arg = text.partition(":")
    if kind == "range" and arg:
        return UniformRange(int(arg))
    if kind == "geom" and arg:
        return Geometric(float(arg))
    raise ValueError(f"unknown offset distribution {text!r}; use uniform, range:<hi> or geom:<p>")


def draw_offsets(dist: OffsetDistribution, u: np.ndarray, L: int) -> np.ndarray:
    if isinstance(dist, UniformFull):
        return np.minimum((u * L).astype(np.int64), L - 1)
    if isinstance(dist, UniformRange):
        if dist.hi >= L:
            raise ValueError(f"range upper end {dist.hi} must be below L={L}")
        return np.minimum((u * (dist.hi + 1)).astype(np.int64), dist.hi)
    if isinstance(dist, Geometric):
        # Failures before the first success, by inversion; 1-u lies in (0, 1].
        k = np.floor(np.log1p(-u) / math.log1p(-dist.p_stop)).astype(np.int64)
        return k % L
    raise TypeError(f"not an offset distribution: {dist!r}")


@dataclass(frozen=True)
class AoiStats:
    per_user_mean: tuple[float, ...]
    pooled_mean: float
    run_count: int
    seed: int
    std_error: float
    no_drop: int = 0
    meta: dict = field(default_factory=dict, compare=False)


def duty_factor(scheme: SchemeConfig, scenario: Scenario) -> Fraction:
    if isinstance(scheme, SequenceScheme):
        return Fraction(scenario.w, scenario.L)
    if isinstance(scheme, SlottedAloha):
        return scheme.p_t
    if isinstance(scheme, FramedAloha):
        return Fraction(scheme.w_fa, scenario.t_frame)
    raise TypeError(f"unknown scheme {scheme!r}")


def thread_count() -> int:
    env = os.environ.get("SEQAOI_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------- sequence scheme

def steady_state_aoi(view: SuperframeView, success: np.ndarray) -> np.ndarray:
    """Average AoI over a superframe for a batch of success patterns.

    ``success`` has shape (R, w): which ones of a period are collision free.
    Returns NaN for rows without any success.
    """
    ys = np.asarray(view.char_set_super, dtype=np.int64)
    wp, w, beta, T = ys.size, view.weight, view.beta, view.t_frame
    sup = success[:, np.arange(wp) % w]
    frames = ys // T
    group_start = np.searchsorted(frames, frames, side="left")
    cs = np.zeros((sup.shape[0], wp + 1), dtype=np.int64)
    np.cumsum(sup, axis=1, out=cs[:, 1:])
    earlier = cs[:, np.arange(wp)] - cs[:, group_start]
    drop = sup & (earlier == 0)

    big = 2 * wp
    idx = np.where(drop, np.arange(wp), big)
    nxt = np.minimum.accumulate(idx[:, ::-1], axis=1)[:, ::-1]
    first = nxt[:, 0]
    after = np.empty_like(nxt)
    after[:, :-1] = nxt[:, 1:]
    after[:, -1] = big
    after = np.where(after >= big, first[:, None] + wp, after)
    ys_ext = np.concatenate([ys, ys + beta])
    safe = np.minimum(after, 2 * wp - 1)
    Y = ys_ext[safe] - ys[None, :]
    S = (ys % T)[None, :]
    contrib = np.where(drop, S * Y + Y * (Y - 1) // 2, 0)
    out = contrib.sum(axis=1) / beta
    out[first >= big] = np.nan
    return out


_OCCUPANCY_CELLS = 1 << 22


def _sequence_chunk(scenario: Scenario, scheme: SequenceScheme, dist: OffsetDistribution,
                    keys: np.ndarray, views: dict) -> np.ndarray:
    # Draws depend only on each run's key, so sub-batching leaves results unchanged.
    step = max(1, _OCCUPANCY_CELLS // scenario.L)
    if keys.size > step:
        return np.concatenate([_sequence_chunk(scenario, scheme, dist, keys[s:s + step], views)
                               for s in range(0, keys.size, step)])
    fam = scenario.family
    L, w = scenario.L, scenario.w
    R = keys.size
    n_fixed = scenario.n_users
    n_total = n_fixed + scheme.extra_users
    pool = np.asarray(scheme.pool(scenario), dtype=np.int64)

    seq_idx = np.empty((R, n_total), dtype=np.int64)
    seq_idx[:, :n_fixed] = np.asarray(scenario.assignment, dtype=np.int64)
    for i in range(n_fixed, n_total):
        u = uniforms(keys, _REUSE_STREAM + i)
        seq_idx[:, i] = pool[np.minimum((u * pool.size).astype(np.int64), pool.size - 1)]
    tau = np.empty((R, n_total), dtype=np.int64)
    for i in range(n_total):
        tau[:, i] = draw_offsets(dist, uniforms(keys, _OFFSET_STREAM + i), L)

    chars = np.zeros((len(fam) + 1, w), dtype=np.int64)
    for g in range(1, len(fam) + 1):
        chars[g] = fam[g].characteristic_set
    pos = (chars[seq_idx] + tau[:, :, None]) % L
    flat = pos + (np.arange(R) * L)[:, None, None]
    busy = np.bincount(flat.ravel(), minlength=R * L)
    success = busy[flat] == 1

    out = np.empty((R, n_total))
    for i in range(n_total):
        for g in np.unique(seq_idx[:, i]).tolist():
            rows = seq_idx[:, i] == g
            out[rows, i] = steady_state_aoi(views[g], success[rows, i, :])
    return out


# ------------------------------------------------------------ ALOHA kernels

@numba.njit(cache=True, nogil=True)
def _aloha_chunk(keys, n_users, T, framed, p_t, w_fa, warm, measure, aligned, out):
    R = keys.size
    F = warm + measure
    # Every user must cover the last measured frame of every other user.
    H = (F + 3) * T
    tx = np.zeros((n_users, H), dtype=np.uint8)
    busy = np.zeros(H, dtype=np.int32)
    phase = np.zeros(n_users, dtype=np.int64)
    perm = np.empty(T, dtype=np.int64)
    for r in range(R):
        key = keys[r]
        tx[:, :] = 0
        busy[:] = 0
        for i in range(n_users):
            if aligned:
                phase[i] = 0
            else:
                phase[i] = min(int(_uniform(key, _PHASE_STREAM + i) * T), T - 1)
            for f in range(F + 2):
                start = phase[i] + f * T
                base = _SLOT_STREAM + (i * (F + 2) + f) * T
                if framed:
                    for s in range(T):
                        perm[s] = s
                    for s in range(w_fa):
                        j = s + min(int(_uniform(key, base + s) * (T - s)), T - s - 1)
                        perm[s], perm[j] = perm[j], perm[s]
                        tx[i, start + perm[s]] = 1
                else:
                    for s in range(T):
                        if _uniform(key, base + s) < p_t:
                            tx[i, start + s] = 1
            for t in range(H):
                busy[t] += tx[i, t]
        for i in range(n_users):
            aoi = T
            total = 0
            dropped = False
            # Frame f of the user covers global slots phase + (f + 1) * T + s; the
            # frame before it only matters as interference.
            for f in range(F):
                delivered = False
                start = phase[i] + (f + 1) * T
                for s in range(T):
                    g = start + s
                    if not delivered and tx[i, g] == 1 and busy[g] == 1:
                        aoi = s
                        delivered = True
                        dropped = True
                    else:
                        aoi += 1
                    if f >= warm:
                        total += aoi
            out[r, i] = total / (measure * T) if dropped else np.nan


# --------------------------------------------------------------- front end

@dataclass(frozen=True)
class AlohaHorizon:
    warmup_frames: int = 5
    measured_frames: int = 20
    aligned_frames: bool = False


def _chunks(runs: int):
    return [(s, min(CHUNK, runs - s)) for s in range(0, runs, CHUNK)]


def run_simulation(scenario: Scenario, scheme: SchemeConfig, dist: OffsetDistribution,
                   runs: int, seed: int, *, horizon: AlohaHorizon = AlohaHorizon(),
                   threads: int | None = None) -> AoiStats:
    """Average AoI per user over ``runs`` independent offset draws."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    threads = thread_count() if threads is None else threads
    T, N = scenario.t_frame, scenario.n_users

    if isinstance(scheme, SequenceScheme):
        if scheme.extra_users < 0:
            raise ValueError("extra_users must be non-negative")
        pool = scheme.pool(scenario)
        for g in pool:
            scenario.family[g]
        needed = set(scenario.assignment) | set(pool)
        views = {g: superframe_view(scenario.family[g], T) for g in needed}

        def work(chunk):
            first, count = chunk
            return _sequence_chunk(scenario, scheme, dist, run_keys(seed, first, count), views)
        n_total = N + scheme.extra_users
    elif isinstance(scheme, (SlottedAloha, FramedAloha)):
        framed = isinstance(scheme, FramedAloha)
        if framed and scheme.w_fa > T:
            raise ValueError(f"w_fa={scheme.w_fa} exceeds frame length {T}")
        if horizon.measured_frames < 1 or horizon.warmup_frames < 0:
            raise ValueError("need at least one measured frame")
        p_t = float(scheme.p_t) if not framed else 0.0
        w_fa = scheme.w_fa if framed else 0

        def work(chunk):
            first, count = chunk
            out = np.empty((count, N))
            _aloha_chunk(run_keys(seed, first, count), N, T, framed, p_t, w_fa,
                         horizon.warmup_frames, horizon.measured_frames,
                         horizon.aligned_frames, out)
            return out
        n_total = N
    else:
        raise TypeError(f"unknown scheme {scheme!r}")

    chunks = _chunks(runs)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool_ex:
            parts = list(pool_ex.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return _aggregate(parts, n_total, runs, seed, _metadata(scenario, scheme, dist, runs, seed, horizon))


def _aggregate(parts, n_users: int, runs: int, seed: int, meta: dict) -> AoiStats:
    sums = np.zeros(n_users)
    counts = np.zeros(n_users, dtype=np.int64)
    run_sum = run_sq = 0.0
    run_n = 0
    lost = 0
    for block in parts:
        finite = np.isfinite(block)
        lost += int((~finite).sum())
        sums += np.where(finite, block, 0.0).sum(axis=0)
        counts += finite.sum(axis=0)
        ok_rows = finite.any(axis=1)
        per_run = np.where(finite, block, 0.0).sum(axis=1)[ok_rows] / finite.sum(axis=1)[ok_rows]
        run_sum += float(per_run.sum())
        run_sq += float((per_run**2).sum())
        run_n += int(per_run.size)
    per_user = tuple(float(s / c) if c else math.nan for s, c in zip(sums, counts))
    pooled = float(sums.sum() / counts.sum()) if counts.sum() else math.nan
    if run_n > 1:
        var = max(run_sq / run_n - (run_sum / run_n) ** 2, 0.0) * run_n / (run_n - 1)
        se = math.sqrt(var / run_n)
    else:
        se = 0.0
    return AoiStats(per_user, pooled, runs, seed, se, lost, meta)


def _metadata(scenario, scheme, dist, runs, seed, horizon) -> dict:
    meta = {
        "scheme": scheme.name,
        "n_users": scenario.n_users,
        "t_frame": scenario.t_frame,
        "p": scenario.family.p,
        "q": scenario.family.q,
        "L": scenario.L,
        "offset_distribution": dist.label(),
        "geometric_reduction": "mod L",
        "runs": runs,
        "seed": seed,
        "rng": "splitmix64 counter hash, per-run stream keys",
        "chunk": CHUNK,
        "initial_aoi": INITIAL_AOI,
    }
    if isinstance(scheme, SequenceScheme):
        meta.update(assignment=list(scenario.assignment), extra_users=scheme.extra_users,
                    reuse_pool=list(scheme.pool(scenario)),
                    evaluation="exact periodic steady state per run")
    else:
        meta.update(frame_offsets="aligned" if horizon.aligned_frames else "uniform in Z_T",
                    warmup_frames=horizon.warmup_frames, measured_frames=horizon.measured_frames,
                    transmit_after_delivery=True)
        if isinstance(scheme, SlottedAloha):
            meta["p_t"] = str(scheme.p_t)
        else:
            meta["w_fa"] = scheme.w_fa
    return meta
