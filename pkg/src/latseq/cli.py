"""Batch command-line front end.

Subcommands wire the library into reproducible pipelines: every run echoes
its configuration (and the seed) into ``report.json`` in the output
directory, and identical inputs produce byte-identical outputs.  Exit codes:
0 success, 2 input error, 3 mathematical precondition failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path as FsPath

from . import __version__
from .causal import simulate_log, true_pooled_family_values
from .errors import InputError, LatseqError, PreconditionError
from .events import (
    detect_families,
    estimate_family,
    extract_episodes,
    ingest_log,
    write_log,
)
from .integrability import is_cube_consistent, reconstruct_with_gauge
from .lattice import ENUM_CAP_DEFAULT, NODE_CAP_DEFAULT, build_lattice
from .planner import (
    PATH_CAP_DEFAULT,
    dp_plan,
    exhaustive_plan,
    family_plan,
    policy_compare,
)
from .poset import parse_poset
from .serialize import (
    diamond_field_from_csv,
    edge_field_from_csv,
    edge_field_to_csv,
    estimation_report_json,
    family_table_csv,
    gauge_from_csv,
    lattice_edges_to_csv,
    lattice_nodes_to_csv,
    model_from_json,
    plan_table_csv,
    policy_table_csv,
    report_json,
)
from .valuation import check_path_independence, curvature_field

LAMBDA_SWEEP_DEFAULT = (0.0, 0.01, 0.02, 0.05)


def _parse_caps(text: str) -> dict:
    caps = {"nodes": NODE_CAP_DEFAULT, "paths": PATH_CAP_DEFAULT, "enum": ENUM_CAP_DEFAULT}
    if not text:
        return caps
    for part in text.split(","):
        if "=" not in part:
            raise InputError(f"malformed --caps entry {part!r} (want name=value)")
        name, value = part.split("=", 1)
        name = name.strip()
        if name not in caps:
            raise InputError(f"unknown cap {name!r} (known: nodes, paths, enum)")
        try:
            caps[name] = int(value)
        except ValueError:
            raise InputError(f"cap {name!r} needs an integer value") from None
    return caps


def _read(path: str) -> str:
    try:
        return FsPath(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


def _outdir(args) -> FsPath:
    out = FsPath(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config_echo(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _write_report(out: FsPath, args, payload: dict) -> None:
    payload = dict(payload)
    payload["config"] = _config_echo(args)
    payload["version"] = __version__
    (out / "report.json").write_text(report_json(payload), encoding="utf-8")


def _load_slice(args):
    poset = parse_poset(_read(args.poset))
    base = poset.parse_subset(args.base)
    caps = _parse_caps(args.caps)
    lattice = build_lattice(poset, base, args.depth, node_cap=caps["nodes"])
    return poset, lattice, caps


def _family_from_arg(text: str, lam: float):
    from .events import FamilySpec

    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise InputError("family must be given as u,w,target")
    return FamilySpec.make(parts[0], parts[1], parts[2], lam)


def cmd_lattice(args) -> int:
    poset, lattice, _ = _load_slice(args)
    out = _outdir(args)
    (out / "nodes.csv").write_text(lattice_nodes_to_csv(lattice), encoding="utf-8")
    (out / "edges.csv").write_text(lattice_edges_to_csv(lattice), encoding="utf-8")
    _write_report(
        out,
        args,
        {
            "elements": poset.n,
            "nodes": lattice.n_nodes,
            "edges": lattice.n_edges,
            "full_interval": lattice.is_full_interval(),
        },
    )
    print(f"lattice: {lattice.n_nodes} nodes, {lattice.n_edges} edges")
    return 0


def cmd_check(args) -> int:
    _, lattice, _ = _load_slice(args)
    poset = lattice.poset
    out = _outdir(args)
    payload: dict = {}
    if args.edge_field:
        g = edge_field_from_csv(_read(args.edge_field), lattice)
        verdict = check_path_independence(g, lattice, tol=args.tol)
        payload["path_independence"] = {
            "independent": verdict.independent,
            "witness": None
            if verdict.independent
            else {
                "ideal": poset.format_members(verdict.witness.base),
                "u": poset.ids[verdict.witness.u],
                "v": poset.ids[verdict.witness.v],
                "curvature": verdict.curvature,
            },
        }
        bianchi = is_cube_consistent(curvature_field(g, lattice), lattice, tol=args.tol)
        payload["bianchi"] = {"consistent": bianchi.consistent}
        print(
            "path-independence:",
            "independent" if verdict.independent else "witness found",
        )
    if args.diamond_field:
        kappa = diamond_field_from_csv(_read(args.diamond_field), lattice)
        verdict = is_cube_consistent(kappa, lattice, tol=args.tol)
        payload["cube_consistency"] = {
            "consistent": verdict.consistent,
            "witness": None
            if verdict.consistent
            else {
                "ideal": poset.format_members(verdict.witness.base),
                "u": poset.ids[verdict.witness.u],
                "v": poset.ids[verdict.witness.v],
                "w": poset.ids[verdict.witness.w],
                "defect": verdict.defect,
            },
        }
        print(
            "cube-consistency:",
            "consistent" if verdict.consistent else "witness found",
        )
    if not payload:
        raise InputError("check needs --edge-field and/or --diamond-field")
    _write_report(out, args, payload)
    return 0


def cmd_reconstruct(args) -> int:
    _, lattice, _ = _load_slice(args)
    kappa = diamond_field_from_csv(_read(args.diamond_field), lattice)
    alpha = gauge_from_csv(_read(args.gauge), lattice)
    g = reconstruct_with_gauge(kappa, alpha, lattice, tol=args.tol)
    out = _outdir(args)
    (out / "edge_field.csv").write_text(edge_field_to_csv(g, lattice), encoding="utf-8")
    _write_report(out, args, {"edges": lattice.n_edges})
    print(f"reconstructed edge field with {lattice.n_edges} edges")
    return 0


def _collect_families(args, log):
    if args.family:
        return [_family_from_arg(f, args.lam) for f in args.family]
    families = detect_families(log, min_two_sided=args.min_two_sided, lam=args.lam)
    if not families:
        print("no two-sided families detected", file=sys.stderr)
    return families


def cmd_estimate(args) -> int:
    log = ingest_log(_read(args.log), accept_activity=args.accept_activity)
    families = _collect_families(args, log)
    out = _outdir(args)
    reports = []
    for fam in families:
        episodes = extract_episodes(log, fam)
        reports.append(estimate_family(episodes, fam, seed=args.seed))
    (out / "families.csv").write_text(family_table_csv(reports), encoding="utf-8")
    _write_report(
        out,
        args,
        {
            "outcome_column_missing": log.outcome_missing,
            "families": [estimation_report_json(r) for r in reports],
        },
    )
    for i, rep in enumerate(reports):
        k = rep.kappa.value
        shown = f"{k:.4f}" if k is not None else rep.kappa.status
        print(f"F{i + 1} ({rep.family.u},{rep.family.w})->{rep.family.v}: kappa={shown}")
    return 0


def cmd_plan(args) -> int:
    out = _outdir(args)
    caps = _parse_caps(args.caps)
    if args.edge_field:
        if not args.poset:
            raise InputError("plan --edge-field needs --poset, --base, and --depth")
        _, lattice, _ = _load_slice(args)
        g = edge_field_from_csv(_read(args.edge_field), lattice)
        allow_stop = not args.no_stop
        dp = dp_plan(g, lattice, allow_stop=allow_stop)
        ex = exhaustive_plan(g, lattice, allow_stop=allow_stop, path_cap=caps["paths"])
        poset = lattice.poset
        label = "->".join(poset.ids[a] for a in dp.best_path.additions)
        rows = [
            {
                "id": "field",
                "dp_argmax": label,
                "exhaustive_argmax": "->".join(
                    poset.ids[a] for a in ex.best_path.additions
                ),
                "equal": dp.best_value == ex.best_value
                and dp.best_path == ex.best_path,
                "best_value": dp.best_value,
            }
        ]
        (out / "plan.csv").write_text(plan_table_csv(rows), encoding="utf-8")
        _write_report(
            out,
            args,
            {
                "best_path": label,
                "best_value": dp.best_value,
                "dp_equals_exhaustive": rows[0]["equal"],
                "value_table": {
                    poset.format_members(m): v for m, v in sorted(dp.value_table.items())
                },
            },
        )
        print(f"best path: {label or '(stay)'} value {dp.best_value}")
        return 0

    if not args.log or not args.family:
        raise InputError("plan needs either --edge-field or --log with --family")
    log = ingest_log(_read(args.log), accept_activity=args.accept_activity)
    lambdas = (
        [float(x) for x in args.lambdas.split(",")]
        if args.lambdas
        else list(LAMBDA_SWEEP_DEFAULT)
    )
    rows = []
    details = []
    for fam_text in args.family:
        for lam in lambdas:
            fam = _family_from_arg(fam_text, lam)
            episodes = extract_episodes(log, fam)
            report = estimate_family(episodes, fam, seed=args.seed)
            row = family_plan(report)
            row["id"] = f"({fam.u},{fam.w})->{fam.v}@lambda={lam}"
            rows.append(row)
            details.append(
                {"lambda": lam, "family": f"({fam.u},{fam.w})->{fam.v}", **row}
            )
    (out / "plan.csv").write_text(plan_table_csv(rows), encoding="utf-8")
    _write_report(out, args, {"rows": details})
    for row in rows:
        print(f"{row['id']}: argmax {row['dp_argmax']} equal={row['equal']}")
    return 0


def cmd_policy(args) -> int:
    log = ingest_log(_read(args.log), accept_activity=args.accept_activity)
    families = _collect_families(args, log)
    out = _outdir(args)
    from .planner import split_by_case

    tables = []
    for fam in families:
        episodes = extract_episodes(log, fam)
        train, heldout = split_by_case(episodes, args.seed)
        tables.append(
            policy_compare(
                train, heldout, fam, seed=args.seed, n_resplits=args.resplits
            )
        )
    (out / "policy.csv").write_text(policy_table_csv(tables), encoding="utf-8")
    payload_rows = []
    for table in tables:
        payload_rows.append(
            {
                "family": f"({table.family.u},{table.family.w})->{table.family.v}",
                "policies": {
                    name: {
                        "path": "->".join(res.path) if res.path else None,
                        "heldout_value": res.heldout.value,
                        "status": res.heldout.status,
                    }
                    for name, res in sorted(table.policies.items())
                },
                "delta_ref": table.delta_ref,
                "delta_greedy": table.delta_greedy,
                "win_rate": table.win_rate,
                "metadata": table.metadata,
            }
        )
    _write_report(out, args, {"tables": payload_rows})
    for row in payload_rows:
        print(
            f"{row['family']}: delta_ref={row['delta_ref']} win_rate={row['win_rate']}"
        )
    return 0


def cmd_simulate(args) -> int:
    model = model_from_json(json.loads(_read(args.model)))
    log = simulate_log(model, args.n, args.seed)
    out = _outdir(args)
    (out / "log.csv").write_text(write_log(log), encoding="utf-8")
    truth: dict = {"cases": len(log.cases)}
    if args.truth_family:
        fam = _family_from_arg(args.truth_family, model.duration_penalty)
        means, kappa = true_pooled_family_values(model, fam)
        truth["true_pooled_kappa"] = float(kappa) if kappa is not None else None
        truth["true_pooled_means"] = {
            f"{cls}|{order or ''}": float(v) for (cls, order), v in sorted(means.items())
        }
    _write_report(out, args, truth)
    print(f"simulated {len(log.cases)} cases")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latseq",
        description="Order-sensitive sequential interventions on ideal lattices",
    )
    parser.add_argument("--version", action="version", version=f"latseq {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, poset=False):
        p.add_argument("--out", default="latseq-out", help="output directory")
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--caps", default="", help="e.g. nodes=1000000,paths=1000000,enum=10")
        p.add_argument("--seed", type=int, default=0)
        if poset:
            p.add_argument("--poset", required=True, help="poset file")
            p.add_argument("--base", default="-", help="base ideal, e.g. a+b or -")
            p.add_argument("--depth", type=int, required=True, help="truncation depth H")

    p = sub.add_parser("lattice", help="build a truncated ideal lattice")
    common(p, poset=True)
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("check", help="path-independence / cube-consistency verdicts")
    common(p, poset=True)
    p.add_argument("--edge-field", help="edge field CSV")
    p.add_argument("--diamond-field", help="diamond field CSV")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reconstruct", help="gauge-fixed edge field from a diamond field")
    common(p, poset=True)
    p.add_argument("--diamond-field", required=True)
    p.add_argument("--gauge", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("estimate", help="family estimation from an event log")
    common(p)
    p.add_argument("--log", required=True, help="event log CSV")
    p.add_argument("--family", action="append", help="u,w,target (repeatable)")
    p.add_argument("--min-two-sided", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, default=0.02)
    p.add_argument("--accept-activity", help="activity marking acceptance")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("plan", help="DP + exhaustive planning")
    common(p)
    p.add_argument("--poset")
    p.add_argument("--base", default="-")
    p.add_argument("--depth", type=int, default=0)
    p.add_argument("--edge-field", help="edge field CSV (field mode)")
    p.add_argument("--no-stop", action="store_true", help="remove the stop branch")
    p.add_argument("--log", help="event log CSV (family mode)")
    p.add_argument("--family", action="append", help="u,w,target (repeatable)")
    p.add_argument("--lambdas", help="comma list for the sensitivity sweep")
    p.add_argument("--accept-activity")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("policy", help="held-out policy comparison")
    common(p)
    p.add_argument("--log", required=True)
    p.add_argument("--family", action="append")
    p.add_argument("--min-two-sided", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, default=0.02)
    p.add_argument("--resplits", type=int, default=30)
    p.add_argument("--accept-activity")
    p.set_defaults(func=cmd_policy)

    p = sub.add_parser("simulate", help="sample an event log from a model JSON")
    common(p)
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--truth-family", help="u,w,target: also emit true pooled values")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"precondition failure: {exc}", file=sys.stderr)
        return 3
    except LatseqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
