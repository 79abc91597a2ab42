"""Command-line front end: ``seqaoi <command> ...``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from .analytics import InfeasibleError, Scenario, analyze as analyze_scenario
from .experiments import COLUMNS, RECIPES, config_hash, fmt, run_recipe, validate as run_validation
from .optimizer import optimize_framed_aloha, select_parameters
from .oracle import OracleBudgetError, oracle_avg_aoi, oracle_event_counts
from .sequences import ConstructionError, SequenceFamily, crt_construct, smallest_prime_geq, verify_mhui
from .simulator import (
    FramedAloha,
    SequenceScheme,
    SlottedAloha,
    duty_factor,
    parse_distribution,
    run_simulation,
)


def _writer(path: str | None):
    if path:
        fh = open(path, "w", newline="")
        return fh, csv.writer(fh, lineterminator="\n")
    return None, csv.writer(sys.stdout, lineterminator="\n")


def _family_for(n: int, t: int | None, q: int | None) -> SequenceFamily:
    p = smallest_prime_geq(n)
    if q is None:
        q = select_parameters(n, t).q if t is not None and n >= 2 else 2 * p - 1
    return crt_construct(p, q)


def cmd_construct(args) -> int:
    fam = _family_for(args.n, args.t, args.q)
    out = args.out or f"family_p{fam.p}_q{fam.q}.json"
    fam.dump(out)
    print(f"p={fam.p} q={fam.q} w={fam.w} L={fam.L} duty_factor={Fraction(1, fam.q)} -> {out}")
    return 0


def cmd_verify(args) -> int:
    fam = SequenceFamily.load(args.family)
    seqs = list(fam.sequences)
    if args.seqs:
        seqs = [fam[int(g)] for g in args.seqs.split(",")]
    n = args.n if args.n is not None else min(s.weight for s in seqs)
    rep = verify_mhui(seqs, n)
    print(f"sequences={len(seqs)} n_users={n} min_weight={rep.min_weight} "
          f"max_cross_correlation={rep.max_cross_correlation} passed={rep.passed}")
    if not rep.passed and rep.worst_pair is not None:
        i, j = rep.worst_pair
        print(f"worst pair: v{seqs[i].index}, v{seqs[j].index} at shift {rep.worst_shift}")
    return 0 if rep.passed else 1


def _analysis_scenario(n: int, t: int, q: int, seq: int) -> Scenario:
    fam = crt_construct(smallest_prime_geq(n), q)
    others = [g for g in range(len(fam), 0, -1) if g != seq][: n - 1]
    return Scenario(n, t, fam, (seq, *others))


def cmd_analyze(args) -> int:
    sc = _analysis_scenario(args.n, args.t, args.q, args.seq)
    try:
        res = analyze_scenario(sc, 0, oracle_budget=args.budget)
    except InfeasibleError as exc:
        print(f"error: no applicable method: {exc}", file=sys.stderr)
        return 2
    print(f"aoi={res.value:.6f} method={res.method} upper_bound={res.upper_bound:.6f}")
    for note in res.notes:
        print(f"note: {note}")
    return 0


def cmd_oracle(args) -> int:
    fam = crt_construct(args.p, args.q)
    others = [g for g in range(len(fam), 0, -1) if g != args.seq][: args.n - 1]
    sc = Scenario(args.n, args.t, fam, (args.seq, *others))
    try:
        res = oracle_avg_aoi(sc, 0, budget=args.budget)
        counts = oracle_event_counts(sc, 0, budget=args.budget)
    except OracleBudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    value = "nan" if res.value is None else f"{float(res.value):.12g}"
    print(f"aoi={value} exact={res.value} vectors={res.vectors} no_drop={res.no_drop}")
    print("event_counts=" + ",".join(f"{r}:{c}" for r, c in counts.items()))
    return 0


def _seq_scenario(args) -> Scenario:
    if args.q is None:
        sel = select_parameters(args.n, args.t)
        return sel.scenario(args.n, args.t)
    fam = crt_construct(smallest_prime_geq(args.n), args.q)
    return Scenario(args.n, args.t, fam)


def cmd_simulate(args) -> int:
    dist = parse_distribution(args.dist)
    if args.scheme == "seq":
        sc = _seq_scenario(args)
        scheme = SequenceScheme(extra_users=args.extra)
    else:
        sc = Scenario.build(args.n, args.t)
        if args.scheme == "slotted":
            scheme = SlottedAloha(Fraction(args.pt) if args.pt else Fraction(1, args.n))
        else:
            if args.wfa is None:
                raise SystemExit("--wfa is required for the framed scheme")
            scheme = FramedAloha(args.wfa)
    st = run_simulation(sc, scheme, dist, args.runs, args.seed)
    meta = dict(st.meta, duty_factor=str(duty_factor(scheme, sc)))
    meta["config_hash"] = config_hash({k: v for k, v in meta.items()})
    header = ["scheme", "N", "T", "L", "q", "dist", "runs", "seed", "per_user_mean",
              "pooled_mean", "std_error", "no_drop", "duty_factor", "config_hash"]
    row = [scheme.name, sc.n_users + getattr(scheme, "extra_users", 0), sc.t_frame, sc.L,
           sc.family.q, dist.label(), args.runs, args.seed,
           ";".join(fmt(x) for x in st.per_user_mean), fmt(st.pooled_mean), fmt(st.std_error),
           st.no_drop, meta["duty_factor"], meta["config_hash"]]
    fh, w = _writer(args.out)
    w.writerow(header)
    w.writerow(row)
    if fh:
        fh.close()
        Path(args.out + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_compare(args) -> int:
    try:
        rows = run_recipe(args.recipe, args.runs, args.seed)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    fh, w = _writer(args.out)
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    if fh:
        fh.close()
    return 0


def cmd_optimize(args) -> int:
    sel = select_parameters(args.n, args.t)
    fmt_a = lambda a: "" if a is None else f"{a:.6f}"
    print(f"# p={sel.p} q={sel.q} w={sel.w} reason={sel.decision_reason} "
          f"a_q2p={fmt_a(sel.a_q2p)} a_qT={fmt_a(sel.a_qT)} "
          f"pool=v{sel.chosen_pool[0]}..v{sel.chosen_pool[-1]}")
    top = args.t if args.wmax is None else min(args.wmax, args.t)
    sweep = optimize_framed_aloha(args.n, args.t, args.runs, args.seed, range(1, top + 1))
    best = sweep.best
    cfg = config_hash({"cmd": "optimize", "n": args.n, "t": args.t, "runs": args.runs,
                       "seed": args.seed, "wmax": top})
    print(f"# framed_aloha w_star={best.w_fa} aoi={fmt(best.mean)} "
          f"duty_factor={Fraction(best.w_fa, args.t)} seed={args.seed} config_hash={cfg}")
    fh, w = _writer(args.out)
    w.writerow(["w_fa", "mean", "std_error", "duty_factor"])
    for r in sweep.rows:
        w.writerow([r.w_fa, fmt(r.mean), fmt(r.std_error), str(Fraction(r.w_fa, args.t))])
    if fh:
        fh.close()
    return 0


def cmd_validate(args) -> int:
    checks = run_validation()
    bad = [c for c in checks if not c.ok]
    for c in bad:
        print(f"FAIL {c.name}: {c.detail}")
    print(f"{len(checks) - len(bad)}/{len(checks)} checks passed")
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="seqaoi", description="AoI of CRT schedule sequences")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("construct", help="build a CRT family and write it as JSON")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--t", type=int)
    s.add_argument("--q", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("verify", help="check the MHUI property of a family document")
    s.add_argument("--family", required=True)
    s.add_argument("--n", type=int)
    s.add_argument("--seqs", help="comma-separated sequence indices to check")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("analyze", help="exact average AoI of one sequence")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--seq", type=int, default=2)
    s.add_argument("--budget", type=int, default=10**6)
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("oracle", help="brute-force average AoI over all offsets")
    for name in ("n", "t", "p", "q"):
        s.add_argument(f"--{name}", type=int, required=True)
    s.add_argument("--seq", type=int, default=2)
    s.add_argument("--budget", type=int, default=10**6)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("simulate", help="Monte Carlo AoI of one scheme")
    s.add_argument("--scheme", choices=("seq", "slotted", "framed"), required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--q", type=int)
    s.add_argument("--pt", help="slotted ALOHA transmission probability, e.g. 1/7")
    s.add_argument("--wfa", type=int)
    s.add_argument("--extra", type=int, default=0, help="extra users reusing sequences")
    s.add_argument("--dist", default="uniform")
    s.add_argument("--runs", type=int, default=10**4)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("compare", help="run a canned experiment recipe")
    s.add_argument("recipe", choices=sorted(RECIPES))
    s.add_argument("--runs", type=int, default=10**4)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("optimize", help="choose p and q, then sweep framed-ALOHA attempts")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--t", type=int, required=True)
    s.add_argument("--runs", type=int, default=2000)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--wmax", type=int, help="largest w_fa to try (default T)")
    s.add_argument("--out")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("validate", help="oracle-equivalence suite; nonzero exit on mismatch")
    s.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConstructionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
