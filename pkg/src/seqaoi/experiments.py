"""Canned experiment recipes and the oracle-equivalence validation suite."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, gcd
from typing import Callable

from .analytics import (
    Scenario,
    analyze,
    avg_aoi_coprime,
    avg_aoi_event_enum,
    avg_aoi_one_per_frame,
    event_probability,
)
from .optimizer import optimize_framed_aloha
from .oracle import oracle_avg_aoi, oracle_event_counts
from .sequences import crt_construct, smallest_prime_geq
from .simulator import (
    FramedAloha,
    SequenceScheme,
    SlottedAloha,
    UniformFull,
    UniformRange,
    Geometric,
    duty_factor,
    run_simulation,
)

COLUMNS = ("recipe", "scheme", "N", "T", "L", "q", "seq", "dist", "runs", "seed",
           "aoi", "std_error", "duty_factor", "method", "config_hash")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def fmt(x) -> str:
    if isinstance(x, float):
        return repr(round(x, 10))
    return str(x)


@dataclass
class Row:
    values: dict = field(default_factory=dict)

    def cells(self) -> list[str]:
        return [fmt(self.values.get(c, "")) for c in COLUMNS]


def _row(recipe, scheme, scenario, *, aoi, runs="", seed="", dist="", seq="", se="",
         duty=None, method="", extra=None) -> Row:
    vals = dict(recipe=recipe, scheme=scheme, N=scenario.n_users + (extra or 0),
                T=scenario.t_frame, L=scenario.L, q=scenario.family.q, seq=seq, dist=dist,
                runs=runs, seed=seed, aoi=aoi, std_error=se,
                duty_factor=str(duty) if duty is not None else "", method=method)
    vals["config_hash"] = config_hash({k: v for k, v in vals.items() if k not in ("aoi", "std_error")})
    return Row(vals)


def _table2(runs: int, seed: int) -> list[Row]:
    rows = []
    for q_of in (lambda T: 13, lambda T: T):
        for T in (20, 30, 40, 50, 60):
            sc = Scenario.build(7, T, q_of(T))
            for user, g in ((0, 2), (6, 8)):
                assert sc.assignment[user] == g
                res = analyze(sc, user)
                rows.append(_row("table2", "seq", sc, aoi=res.value, seq=f"v{g}",
                                 duty=duty_factor(SequenceScheme(), sc), method=res.method))
    return rows


def _pooled_analytic(sc: Scenario) -> tuple[float, str]:
    cache: dict[int, tuple[float, str]] = {}
    total = 0.0
    for u in range(sc.n_users):
        g = sc.assignment[u]
        if g not in cache:
            r = analyze(sc, u)
            cache[g] = (r.value, r.method)
        total += cache[g][0]
    return total / sc.n_users, "/".join(sorted({m for _, m in cache.values()}))


def _fig4(runs: int, seed: int) -> list[Row]:
    rows = []
    for T in (30, 60, 90, 120, 150, 180):
        for q in (21, T):
            sc = Scenario.build(10, T, q)
            value, method = _pooled_analytic(sc)
            duty = duty_factor(SequenceScheme(), sc)
            rows.append(_row("fig4", "seq", sc, aoi=value, duty=duty, method=method))
            st = run_simulation(sc, SequenceScheme(), UniformFull(), runs, seed)
            rows.append(_row("fig4", "seq", sc, aoi=st.pooled_mean, se=st.std_error, runs=runs,
                             seed=seed, dist="uniform", duty=duty, method="simulation"))
    return rows


def _fig5(runs: int, seed: int) -> list[Row]:
    rows = []
    for T in (30, 60, 90, 120, 150, 180):
        for q in (21, T):
            sc = Scenario.build(10, T, q)
            for dist in (UniformFull(), UniformRange(sc.L // 4), Geometric(0.01)):
                st = run_simulation(sc, SequenceScheme(), dist, runs, seed)
                rows.append(_row("fig5", "seq", sc, aoi=st.pooled_mean, se=st.std_error, runs=runs,
                                 seed=seed, dist=dist.label(),
                                 duty=duty_factor(SequenceScheme(), sc), method="simulation"))
    return rows


def _baselines(recipe: str, sc: Scenario, runs: int, seed: int, w_star: int,
               extra: int = 0) -> list[Row]:
    """Sequence scheme plus slotted/framed ALOHA at their optimum and at the
    sequence scheme's duty factor."""
    rows = []
    seq_scheme = SequenceScheme(extra_users=extra)
    st = run_simulation(sc, seq_scheme, UniformFull(), runs, seed)
    method = "simulation" if sc.family.q >= 2 * sc.family.p - 1 else "simulation_non_mhui"
    rows.append(_row(recipe, "seq", sc, aoi=st.pooled_mean, se=st.std_error, runs=runs, seed=seed,
                     dist="uniform", duty=duty_factor(seq_scheme, sc), method=method, extra=extra))
    n_total = sc.n_users + extra
    # ALOHA ignores the sequence family; only N and T matter.
    big = Scenario.build(n_total, sc.t_frame)
    f_s = Fraction(1, sc.family.q)
    variants = (
        ("slotted_opt", SlottedAloha(Fraction(1, n_total))),
        ("slotted_fs", SlottedAloha(f_s)),
        ("framed_opt", FramedAloha(w_star)),
        ("framed_fs", FramedAloha(max(1, round(f_s * sc.t_frame)))),
    )
    for name, scheme in variants:
        st = run_simulation(big, scheme, UniformFull(), runs, seed)
        rows.append(_row(recipe, name, sc, aoi=st.pooled_mean, se=st.std_error, runs=runs,
                         seed=seed, dist="uniform", duty=duty_factor(scheme, big),
                         method="simulation", extra=extra))
    return rows


def _family_scenario(n_users: int, t_frame: int, q: int) -> Scenario:
    """Users on the n highest-indexed of v_2..v_{p+1} of the (p, q) family.

    The fig7 point T=100 has q = 100 < 2p - 1 = 105, so that family is built
    without the cross-correlation guarantee.
    """
    p = smallest_prime_geq(n_users)
    fam = crt_construct(p, q, allow_short_q=True)
    return Scenario(n_users, t_frame, fam, tuple(range(p + 2 - n_users, p + 2)))


def _sweep_best(n_users: int, t_frame: int, runs: int, seed: int, wmax: int | None) -> int:
    top = t_frame if wmax is None else min(wmax, t_frame)
    return optimize_framed_aloha(n_users, t_frame, runs, seed, range(1, top + 1)).best.w_fa


def _fig6(runs: int, seed: int, wmax: int | None = 16) -> list[Row]:
    rows = []
    for n in (7, 11, 13, 17, 19, 23):
        sc = _family_scenario(n, 50, 50)
        w_star = _sweep_best(n, 50, max(runs // 10, 500), seed, wmax)
        rows += _baselines("fig6", sc, runs, seed, w_star)
    return rows


def _fig7(runs: int, seed: int, wmax: int | None = 8) -> list[Row]:
    rows = []
    for T in (100, 200, 300, 400, 500, 600):
        sc = _family_scenario(50, T, T)
        w_star = _sweep_best(50, T, max(runs // 10, 200), seed, wmax)
        rows += _baselines("fig7", sc, runs, seed, w_star)
    return rows


def _fig8(runs: int, seed: int, wmax: int | None = 16) -> list[Row]:
    sc = _family_scenario(23, 50, 50)
    w_star = _sweep_best(23, 50, max(runs // 10, 500), seed, wmax)
    rows = []
    for n in range(23, 31):
        rows += _baselines("fig8", sc, runs, seed, w_star, extra=n - 23)
    return rows


RECIPES: dict[str, Callable[[int, int], list[Row]]] = {
    "table2": _table2,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
}


def run_recipe(name: str, runs: int, seed: int) -> list[Row]:
    if name not in RECIPES:
        raise KeyError(f"unknown recipe {name!r}; choose from {', '.join(RECIPES)}")
    return RECIPES[name](runs, seed)


# ------------------------------------------------------------- validation

@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""


def _rel_close(a, b, rtol=1e-9) -> bool:
    return abs(float(a) - float(b)) <= rtol * max(1.0, abs(float(b)))


def validate(families=((2, 3), (3, 5), (3, 7)), users=(2, 3)) -> list[Check]:
    """Closed forms, event enumeration and the offset oracle must agree on every
    small configuration; event counts must reproduce the event probabilities."""
    checks = []
    for p, q in families:
        fam = crt_construct(p, q)
        L = p * q
        for N in users:
            if N > p:
                continue
            for g in range(1, len(fam) + 1):
                others = [h for h in range(len(fam), 0, -1) if h != g][: N - 1]
                assignment = (g, *others)
                for T in range(1, L):
                    sc = Scenario(N, T, fam, assignment)
                    tag = f"p={p} q={q} N={N} v{g} T={T}"
                    ora = oracle_avg_aoi(sc, 0).value
                    enum = avg_aoi_event_enum(sc, fam[g], exact=True)
                    checks.append(Check(f"enum {tag}", enum == ora, f"{float(enum)} vs {float(ora)}"))
                    view = sc.view(0)
                    if gcd(T, L) == 1:
                        a = avg_aoi_coprime(sc, view)
                        checks.append(Check(f"coprime {tag}", _rel_close(a, ora), f"{a} vs {float(ora)}"))
                    if len(set(view.frame_of)) == view.w_prime:
                        a = avg_aoi_one_per_frame(sc, view)
                        checks.append(Check(f"one_per_frame {tag}", _rel_close(a, ora),
                                            f"{a} vs {float(ora)}"))
            sc = Scenario(N, 1, fam, tuple(range(len(fam), len(fam) - N, -1)))
            counts = oracle_event_counts(sc, 0)
            w = fam.w
            for r in range(1, w + 1):
                expect = event_probability(r, sc)
                got = Fraction(counts[r], comb(w, r) * L ** (N - 1))
                checks.append(Check(f"event_count p={p} q={q} N={N} r={r}", got == expect,
                                    f"{got} vs {expect}"))
            checks.append(Check(f"no_empty_event p={p} q={q} N={N}", counts[0] == 0, str(counts[0])))
    return checks
