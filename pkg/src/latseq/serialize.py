"""CSV and JSON formats for fields, potentials, reports, and models.

Ideals render as their member ids sorted lexicographically and joined by
``+`` (a bare ``-`` for the empty ideal).  All emitters are deterministic:
same inputs, byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction

from .causal import CausalModel
from .errors import InputError
from .events import EstimationReport
from .integrability import GaugeSystem
from .lattice import Diamond, LatticeSlice
from .planner import PolicyTable
from .poset import make_poset
from .valuation import DiamondField, EdgeField, Potential, ThetaSystem


def _rows(text: str, expected_header: list[str]) -> list[list[str]]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("empty CSV (header row required)") from None
    if [h.strip() for h in header] != expected_header:
        raise InputError(
            f"unexpected CSV header {header!r}; expected {expected_header!r}"
        )
    return [row for row in reader if row and any(cell.strip() for cell in row)]


def _writer():
    buf = io.StringIO()
    return buf, csv.writer(buf, lineterminator="\n")


def _num(token: str, lineno: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise InputError(f"row {lineno}: malformed number {token!r}") from None


def edge_field_to_csv(g: EdgeField, lattice: LatticeSlice) -> str:
    buf, w = _writer()
    w.writerow(["ideal", "add", "value"])
    poset = lattice.poset
    for mask, a in lattice.edge_list:
        w.writerow([poset.format_members(mask), poset.ids[a], repr(g[(mask, a)])])
    return buf.getvalue()


def edge_field_from_csv(text: str, lattice: LatticeSlice, context: str = "") -> EdgeField:
    poset = lattice.poset
    values: dict[tuple[int, int], float] = {}
    for lineno, row in enumerate(_rows(text, ["ideal", "add", "value"]), start=2):
        mask = poset.parse_subset(row[0])
        a = poset.index(row[1].strip())
        values[(mask, a)] = _num(row[2], lineno)
    expected = lattice.edge_set()
    if set(values) != expected:
        raise InputError(
            "edge field CSV does not cover the slice's edge set exactly "
            f"({len(values)} rows vs {len(expected)} edges)"
        )
    return EdgeField(values, context)


def potential_to_csv(phi: Potential, lattice: LatticeSlice) -> str:
    buf, w = _writer()
    w.writerow(["ideal", "value"])
    for mask in lattice.nodes:
        w.writerow([lattice.poset.format_members(mask), repr(phi[mask])])
    return buf.getvalue()


def potential_from_csv(text: str, lattice: LatticeSlice) -> Potential:
    values = {}
    for lineno, row in enumerate(_rows(text, ["ideal", "value"]), start=2):
        values[lattice.poset.parse_subset(row[0])] = _num(row[1], lineno)
    return Potential(values)


def theta_to_csv(theta: ThetaSystem, lattice: LatticeSlice) -> str:
    buf, w = _writer()
    w.writerow(["ideal", "value"])
    for mask in lattice.nodes:
        w.writerow([lattice.poset.format_members(mask), repr(theta[mask])])
    return buf.getvalue()


def theta_from_csv(text: str, lattice: LatticeSlice) -> ThetaSystem:
    values = {}
    for lineno, row in enumerate(_rows(text, ["ideal", "value"]), start=2):
        values[lattice.poset.parse_subset(row[0])] = _num(row[1], lineno)
    return ThetaSystem(values)


def diamond_field_to_csv(kappa: DiamondField, lattice: LatticeSlice) -> str:
    from .lattice import enumerate_diamonds

    buf, w = _writer()
    w.writerow(["ideal", "u", "v", "value"])
    poset = lattice.poset
    for d in enumerate_diamonds(lattice):
        w.writerow(
            [poset.format_members(d.base), poset.ids[d.u], poset.ids[d.v], repr(kappa[d])]
        )
    return buf.getvalue()


def diamond_field_from_csv(text: str, lattice: LatticeSlice, context: str = "") -> DiamondField:
    from .lattice import enumerate_diamonds

    poset = lattice.poset
    values: dict[Diamond, float] = {}
    for lineno, row in enumerate(_rows(text, ["ideal", "u", "v", "value"]), start=2):
        base = poset.parse_subset(row[0])
        u = poset.index(row[1].strip())
        v = poset.index(row[2].strip())
        if not u < v:
            raise InputError(f"row {lineno}: diamond requires u before v in tau")
        values[Diamond(base, u, v)] = _num(row[3], lineno)
    expected = set(enumerate_diamonds(lattice))
    if set(values) != expected:
        raise InputError(
            "diamond field CSV does not cover the slice's diamonds exactly "
            f"({len(values)} rows vs {len(expected)} diamonds)"
        )
    return DiamondField(values, context)


def gauge_to_csv(alpha: GaugeSystem, lattice: LatticeSlice) -> str:
    buf, w = _writer()
    w.writerow(["ideal", "alpha"])
    for mask in lattice.nodes:
        if mask == lattice.base:
            continue
        w.writerow([lattice.poset.format_members(mask), repr(alpha[mask])])
    return buf.getvalue()


def gauge_from_csv(text: str, lattice: LatticeSlice) -> GaugeSystem:
    values = {}
    for lineno, row in enumerate(_rows(text, ["ideal", "alpha"]), start=2):
        values[lattice.poset.parse_subset(row[0])] = _num(row[1], lineno)
    return GaugeSystem(values)


def lattice_nodes_to_csv(lattice: LatticeSlice) -> str:
    buf, w = _writer()
    w.writerow(["ideal", "depth"])
    for mask in lattice.nodes:
        w.writerow([lattice.poset.format_members(mask), lattice.node_depth(mask)])
    return buf.getvalue()


def lattice_edges_to_csv(lattice: LatticeSlice) -> str:
    buf, w = _writer()
    w.writerow(["ideal", "add", "target"])
    poset = lattice.poset
    for mask, a in lattice.edge_list:
        w.writerow(
            [
                poset.format_members(mask),
                poset.ids[a],
                poset.format_members(mask | 1 << a),
            ]
        )
    return buf.getvalue()


def report_json(payload: dict) -> str:
    """Stable machine-readable report text."""
    return json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n"


def _estimate_json(est) -> dict:
    return {"value": est.value, "status": est.status}


def estimation_report_json(report: EstimationReport) -> dict:
    return {
        "family": {
            "u": report.family.u,
            "w": report.family.w,
            "target": report.family.v,
            "lambda": report.family.lam,
        },
        "class_counts": report.class_counts,
        "class_means": {k: _estimate_json(v) for k, v in report.class_means.items()},
        "order_counts": report.order_counts,
        "order_means": {k: _estimate_json(v) for k, v in report.order_means.items()},
        "kappa": _estimate_json(report.kappa),
        "ci": list(report.ci) if report.ci else None,
        "reference_supported": report.reference_supported,
        "two_sided_supported": report.two_sided_supported,
        "metadata": report.metadata,
    }


def family_table_csv(reports: list[EstimationReport], ids: list[str] | None = None) -> str:
    """Per-family table mirroring the headline estimation columns."""
    buf, w = _writer()
    w.writerow(
        [
            "id",
            "target",
            "u",
            "w",
            "n_empty",
            "n_u",
            "n_w",
            "n_uw",
            "n_u_then_w",
            "n_w_then_u",
            "kappa_hat",
            "ci_lo",
            "ci_hi",
            "kappa_status",
            "reference_supported",
            "two_sided_supported",
        ]
    )
    for i, rep in enumerate(reports):
        fid = ids[i] if ids else f"F{i + 1}"
        ci_lo, ci_hi = (repr(rep.ci[0]), repr(rep.ci[1])) if rep.ci else ("", "")
        w.writerow(
            [
                fid,
                rep.family.v,
                rep.family.u,
                rep.family.w,
                rep.class_counts["empty"],
                rep.class_counts["u"],
                rep.class_counts["w"],
                rep.class_counts["uw"],
                rep.order_counts["u->w"],
                rep.order_counts["w->u"],
                repr(rep.kappa.value) if rep.kappa.value is not None else "",
                ci_lo,
                ci_hi,
                rep.kappa.status,
                int(rep.reference_supported),
                int(rep.two_sided_supported),
            ]
        )
    return buf.getvalue()


def plan_table_csv(rows: list[dict]) -> str:
    """DP-versus-exhaustive table: one row per instance.

    Rows for unplannable families (missing endpoint support) carry empty
    argmax/value cells.
    """
    buf, w = _writer()
    w.writerow(["id", "dp_argmax", "exhaustive_argmax", "equal", "best_value"])
    for row in rows:
        best = row["best_value"]
        w.writerow(
            [
                row["id"],
                row["dp_argmax"] or "",
                row["exhaustive_argmax"] or "",
                "" if row["equal"] is None else int(row["equal"]),
                "" if best is None else repr(best),
            ]
        )
    return buf.getvalue()


def policy_table_csv(tables: list[PolicyTable], ids: list[str] | None = None) -> str:
    buf, w = _writer()
    w.writerow(
        ["id", "selected_path", "heldout_value", "delta_ref", "delta_greedy", "win_rate"]
    )
    for i, table in enumerate(tables):
        fid = ids[i] if ids else f"F{i + 1}"
        seq = table.policies["sequence-sensitive"]
        path = "->".join(seq.path) if seq.path else ""
        value = repr(seq.heldout.value) if seq.heldout.status == "ok" else seq.heldout.status
        w.writerow(
            [
                fid,
                path,
                value,
                repr(table.delta_ref) if table.delta_ref is not None else "",
                repr(table.delta_greedy) if table.delta_greedy is not None else "",
                repr(table.win_rate) if table.win_rate is not None else "",
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Causal model JSON


def _frac_or_float(x):
    if isinstance(x, str) and "/" in x:
        return Fraction(x)
    return x if isinstance(x, (int, float)) else float(x)


def model_from_json(payload: dict) -> CausalModel:
    """Load a finite causal model from its JSON description.

    Probabilities may be JSON numbers or strings like ``"1/3"`` (exact
    rationals).  Keys are ``ideal|context`` for propensities,
    ``context|action`` for kernel rows, and ``context|a,b,...`` for reward
    tables.
    """
    try:
        pj = payload["poset"]
        poset = make_poset(pj["elements"], [tuple(c) for c in pj.get("covers", [])], pj.get("tau"))
        base = poset.parse_subset(payload.get("base", "-"))
        contexts = tuple(payload["contexts"])
        initial = {x: _frac_or_float(p) for x, p in payload["initial_law"].items()}
        propensity = {}
        for key, row in payload.get("propensity", {}).items():
            ideal_s, x = key.split("|")
            propensity[(poset.parse_subset(ideal_s), x)] = {
                poset.index(a): _frac_or_float(p) for a, p in row.items()
            }
        kernel = {}
        for key, row in payload.get("kernel", {}).items():
            x, act = key.split("|")
            kernel[(x, poset.index(act))] = {
                x2: _frac_or_float(p) for x2, p in row.items()
            }

        def reward_table(name):
            table = {}
            for key, val in payload.get(name, {}).items():
                x, acts = key.split("|")
                actions = tuple(poset.index(a) for a in acts.split(",") if a)
                table[(x, actions)] = _frac_or_float(val)
            return table

        model = CausalModel(
            poset=poset,
            base=base,
            horizon=int(payload["horizon"]),
            contexts=contexts,
            initial_law=initial,
            propensity=propensity,
            kernel=kernel,
            accept_prob=reward_table("accept_prob"),
            days_mean=reward_table("days_mean"),
            duration_penalty=_frac_or_float(payload.get("duration_penalty", 0.02)),
            default_accept=_frac_or_float(payload.get("default_accept", 0)),
            default_days=_frac_or_float(payload.get("default_days", 0)),
            anchor_activity=payload.get("anchor_activity", "goal"),
            end_activity=payload.get("end_activity", "close"),
        )
    except (KeyError, ValueError, AttributeError) as exc:
        raise InputError(f"malformed model JSON: {exc}") from None
    model.validate()
    return model


def model_to_json(model: CausalModel) -> dict:
    poset = model.poset

    def num(x):
        return str(x) if isinstance(x, Fraction) else x

    return {
        "poset": {
            "elements": list(poset.ids),
            "covers": sorted([poset.ids[lo], poset.ids[hi]] for lo, hi in poset.covers),
            "tau": list(poset.ids),
        },
        "base": poset.format_members(model.base),
        "horizon": model.horizon,
        "contexts": list(model.contexts),
        "initial_law": {x: num(p) for x, p in sorted(model.initial_law.items())},
        "propensity": {
            f"{poset.format_members(ideal)}|{x}": {
                poset.ids[a]: num(p) for a, p in sorted(row.items())
            }
            for (ideal, x), row in sorted(
                model.propensity.items(), key=lambda kv: (kv[0][0], kv[0][1])
            )
        },
        "kernel": {
            f"{x}|{poset.ids[a]}": {x2: num(p) for x2, p in sorted(row.items())}
            for (x, a), row in sorted(model.kernel.items())
        },
        "accept_prob": {
            f"{x}|{','.join(poset.ids[a] for a in acts)}": num(v)
            for (x, acts), v in sorted(model.accept_prob.items())
        },
        "days_mean": {
            f"{x}|{','.join(poset.ids[a] for a in acts)}": num(v)
            for (x, acts), v in sorted(model.days_mean.items())
        },
        "duration_penalty": model.duration_penalty,
        "default_accept": num(model.default_accept),
        "default_days": num(model.default_days),
        "anchor_activity": model.anchor_activity,
        "end_activity": model.end_activity,
    }
