"""Exact planning on the truncated ideal lattice and policy comparison.

The maximizer is a longest-path dynamic program over the slice (backward over
depth layers, with an optional stop branch), cross-checked by exhaustive path
enumeration under the same deterministic tie-break: higher value first, then
the lexicographically smallest action-index sequence, under which stopping
beats continuing.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import CapExceeded, PreconditionError
from .events import (
    ENDPOINT_BOTH,
    ENDPOINT_EMPTY,
    ENDPOINT_U,
    ENDPOINT_W,
    ORDER_UW,
    ORDER_WU,
    Episode,
    Estimate,
    FamilySpec,
)
from .lattice import LatticeSlice, Path, enumerate_diamonds, enumerate_paths
from .valuation import EdgeField, TOL_DEFAULT, curvature, path_value

PATH_CAP_DEFAULT = 1_000_000


@dataclass(frozen=True, slots=True)
class PlanResult:
    best_path: Path
    best_value: float
    value_table: dict[int, float]


def dp_plan(g: EdgeField, lattice: LatticeSlice, allow_stop: bool = True) -> PlanResult:
    """Backward value recursion over the slice, then forward argmax replay.

    With ``allow_stop`` the value at a node is ``max(0, best continuation)``;
    without it the path must extend until the horizon or a dead end.  Ties are
    broken toward stopping, then toward the tau-smallest action.
    """
    values: dict[int, float] = {}
    for idx in range(len(lattice.nodes) - 1, -1, -1):
        mask = lattice.nodes[idx]
        best = -math.inf
        for a in lattice.out_edges[idx]:
            cand = g[(mask, a)] + values[mask | 1 << a]
            if cand > best:
                best = cand
        if allow_stop:
            values[mask] = best if best > 0 else 0.0
        else:
            values[mask] = best if best != -math.inf else 0.0

    additions: list[int] = []
    mask = lattice.base
    while True:
        idx = lattice.node_index[mask]
        target = values[mask]
        if allow_stop and target == 0:
            break
        if not lattice.out_edges[idx]:
            break
        chosen = None
        for a in lattice.out_edges[idx]:
            if g[(mask, a)] + values[mask | 1 << a] == target:
                chosen = a
                break
        if chosen is None:  # numerically unreachable; keep the replay total
            break
        additions.append(chosen)
        mask |= 1 << chosen
    return PlanResult(Path(lattice.base, tuple(additions)), values[lattice.base], values)


def exhaustive_plan(
    g: EdgeField,
    lattice: LatticeSlice,
    allow_stop: bool = True,
    path_cap: int = PATH_CAP_DEFAULT,
) -> PlanResult:
    """Enumerate candidate paths and take the maximum under the shared tie-break."""
    best_key: tuple | None = None
    best_value = -math.inf
    best_path: tuple[int, ...] = ()
    count = 0
    prefix: list[int] = []

    def consider(value: float) -> None:
        nonlocal best_key, best_value, best_path, count
        count += 1
        if count > path_cap:
            raise CapExceeded(f"path cap {path_cap} exceeded during enumeration")
        key = tuple(prefix)
        if value > best_value or (value == best_value and key < best_key):
            best_value = value
            best_key = key
            best_path = key

    def walk(mask: int, acc: float) -> None:
        idx = lattice.node_index[mask]
        edges = lattice.out_edges[idx]
        if allow_stop or not edges:
            consider(acc)
        for a in edges:
            prefix.append(a)
            walk(mask | 1 << a, acc + g[(mask, a)])
            prefix.pop()

    walk(lattice.base, 0.0)
    value_table = {lattice.base: best_value}
    return PlanResult(Path(lattice.base, best_path), best_value, value_table)


@dataclass(frozen=True, slots=True)
class OrderBoundReport:
    epsilon: float
    max_abs_diff: float
    max_ratio: float
    pairs_checked: int
    holds: bool


def order_bound_check(
    g: EdgeField,
    lattice: LatticeSlice,
    start: int,
    end: int,
    enum_cap: int = 10,
    tol: float = TOL_DEFAULT,
) -> OrderBoundReport:
    """Verify ``|V(p) - V(q)| <= N_swap(p, q) * eps`` over all path pairs.

    ``eps`` is the largest absolute curvature over the slice's diamonds, and
    ``N_swap`` the inversion count between the two extensions.  The reported
    ratio is the tightest observed ``|dV| / (N_swap * eps)``.
    """
    eps = 0.0
    for d in enumerate_diamonds(lattice):
        eps = max(eps, abs(curvature(g, d)))
    paths = enumerate_paths(lattice, start, end, enum_cap=enum_cap)
    vals = [path_value(g, p) for p in paths]
    length = (end & ~start).bit_count()
    binom = length * (length - 1) // 2
    max_diff = 0.0
    max_ratio = 0.0
    holds = True
    pairs = 0
    for i in range(len(paths)):
        pos = {a: k for k, a in enumerate(paths[i].additions)}
        for j in range(i + 1, len(paths)):
            pairs += 1
            seq = [pos[a] for a in paths[j].additions]
            n_swap = sum(
                1
                for s in range(len(seq))
                for t in range(s + 1, len(seq))
                if seq[s] > seq[t]
            )
            diff = abs(vals[i] - vals[j])
            max_diff = max(max_diff, diff)
            if diff > n_swap * eps + tol or diff > binom * eps + tol:
                holds = False
            if n_swap * eps > 0:
                max_ratio = max(max_ratio, diff / (n_swap * eps))
    return OrderBoundReport(eps, max_diff, max_ratio, pairs, holds)


# ---------------------------------------------------------------------------
# Family-level planning: estimated values on the rank-2 lattice


def family_lattice(family: FamilySpec):
    """The two-element antichain lattice of a family (u is tau-smaller)."""
    from .lattice import build_lattice
    from .poset import make_poset

    poset = make_poset([family.u, family.w], [])
    return poset, build_lattice(poset, 0, 2)


def family_edge_field(report: EstimationReport, lattice: LatticeSlice) -> EdgeField:
    """Edge values from pooled estimates, anchored at the empty-class mean.

    Requires every endpoint class and both orders to be populated; the field's
    curvature then equals the estimated order effect and path totals are the
    pooled path means minus the empty-class mean.
    """
    means = {k: est.value for k, est in report.class_means.items()}
    omeans = {k: est.value for k, est in report.order_means.items()}
    needed = [means.get("empty"), means.get("u"), means.get("w")]
    needed += [omeans.get(ORDER_UW), omeans.get(ORDER_WU)]
    if any(v is None for v in needed):
        raise PreconditionError(
            "family planning needs every endpoint class and both orders observed"
        )
    m0, mu, mw = means["empty"], means["u"], means["w"]
    muw, mwu = omeans[ORDER_UW], omeans[ORDER_WU]
    values = {
        (0b00, 0): mu - m0,
        (0b01, 1): muw - mu,
        (0b00, 1): mw - m0,
        (0b10, 0): mwu - mw,
    }
    return EdgeField(values, context=f"{report.family.u}^{report.family.w}")


def family_plan(report: EstimationReport) -> dict:
    """DP and exhaustive maximizers over the family's pair orders.

    Fixed-endpoint planning (no stop branch): the maximizer picks an order of
    the full pair; values reported are absolute pooled means.
    """
    _, lattice = family_lattice(report.family)
    g = family_edge_field(report, lattice)
    m0 = report.class_means["empty"].value
    dp = dp_plan(g, lattice, allow_stop=False)
    ex = exhaustive_plan(g, lattice, allow_stop=False)
    u, w = report.family.u, report.family.w
    names = {0: u, 1: w}

    def label(path: Path) -> str:
        return "->".join(names[a] for a in path.additions)

    return {
        "dp_argmax": label(dp.best_path),
        "exhaustive_argmax": label(ex.best_path),
        "equal": label(dp.best_path) == label(ex.best_path)
        and dp.best_value == ex.best_value,
        "best_value": m0 + dp.best_value,
    }


# ---------------------------------------------------------------------------
# Held-out policy comparison on a family's rank-2 lattice

POLICY_NAMES = (
    "sequence-sensitive",
    "reference-path",
    "greedy one-step",
    "fixed forward",
    "fixed reverse",
    "endpoint-pooled",
    "frequency",
)

_CANDIDATES = {
    ENDPOINT_EMPTY: (),
    ENDPOINT_U: ("u",),
    ENDPOINT_W: ("w",),
    ORDER_UW: ("u", "w"),
    ORDER_WU: ("w", "u"),
}


@dataclass(frozen=True, slots=True)
class PolicyResult:
    name: str
    path: tuple[str, ...] | None  # activity names; None when unfittable
    heldout: Estimate


@dataclass(frozen=True, slots=True)
class PolicyTable:
    family: FamilySpec
    policies: dict[str, PolicyResult]
    delta_ref: float | None
    delta_greedy: float | None
    win_rate: float | None
    metadata: dict[str, object] = field(default_factory=dict)


def _episode_path_key(ep: Episode) -> str:
    if ep.endpoint == ENDPOINT_BOTH:
        return ep.order
    return ep.endpoint


def _path_of_key(key: str, family: FamilySpec) -> tuple[str, ...]:
    return tuple(
        family.u if s == "u" else family.w for s in _CANDIDATES[key]
    )


def _fit_values(train, tol: float):
    """Estimated value per candidate path key from pooled training means.

    The pair endpoint's reference order carries the reference score; the
    reversed order is reference score plus the estimated order effect, with
    effects at or below ``tol`` treated as zero so that planning collapses
    onto the reference policy when order signal is absent.
    """
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for ep in train:
        key = _episode_path_key(ep)
        sums[key] = sums.get(key, 0.0) + ep.reward
        counts[key] = counts.get(key, 0) + 1
    means = {k: sums[k] / counts[k] for k in sums}
    values = dict(means)
    if ORDER_UW in means and ORDER_WU in means:
        kappa = means[ORDER_WU] - means[ORDER_UW]
        if abs(kappa) <= tol:
            kappa = 0.0
        values[ORDER_WU] = means[ORDER_UW] + kappa
    else:
        values.pop(ORDER_WU, None)
    return values, means, counts


def _argmax_key(values: dict[str, float], keys) -> str | None:
    best = None
    for k in keys:
        if k not in values:
            continue
        if best is None or values[k] > values[best] or (
            values[k] == values[best] and _CANDIDATES[k] < _CANDIDATES[best]
        ):
            best = k
    return best


def _greedy_key(values: dict[str, float]) -> str | None:
    if ENDPOINT_EMPTY not in values:
        return None
    here, key = values[ENDPOINT_EMPTY], ENDPOINT_EMPTY
    first = _argmax_key(values, (ENDPOINT_U, ENDPOINT_W))
    if first is None or values[first] <= here:
        return key
    here, key = values[first], first
    nxt = ORDER_UW if first == ENDPOINT_U else ORDER_WU
    if nxt in values and values[nxt] > here:
        return nxt
    return key


def _select_paths(train, family: FamilySpec, tol: float):
    values, means, counts = _fit_values(train, tol)
    pooled = dict(values)
    uw_all = [
        ep.reward for ep in train if ep.endpoint == ENDPOINT_BOTH
    ]
    if uw_all:
        pooled[ORDER_UW] = sum(uw_all) / len(uw_all)
    selection: dict[str, str | None] = {
        "sequence-sensitive": _argmax_key(values, _CANDIDATES),
        "reference-path": _argmax_key(
            values, (ENDPOINT_EMPTY, ENDPOINT_U, ENDPOINT_W, ORDER_UW)
        ),
        "greedy one-step": _greedy_key(values),
        "fixed forward": ORDER_UW,
        "fixed reverse": ORDER_WU,
        "endpoint-pooled": _argmax_key(
            pooled, (ENDPOINT_EMPTY, ENDPOINT_U, ENDPOINT_W, ORDER_UW)
        ),
        "frequency": min(counts, key=lambda k: (-counts[k], _CANDIDATES[k]))
        if counts
        else None,
    }
    return selection


def _heldout_value(heldout, key: str | None) -> Estimate:
    if key is None:
        return Estimate.insufficient()
    rewards = [ep.reward for ep in heldout if _episode_path_key(ep) == key]
    if not rewards:
        return Estimate.insufficient()
    return Estimate(sum(rewards) / len(rewards))


def split_by_case(episodes, seed: int, train_fraction: float = 0.7):
    """Deterministic 70/30-style split, shuffling whole cases."""
    eps = list(episodes)
    rng = random.Random(seed)
    rng.shuffle(eps)
    cut = int(round(train_fraction * len(eps)))
    return eps[:cut], eps[cut:]


def policy_compare(
    train,
    heldout,
    family: FamilySpec,
    seed: int = 0,
    n_resplits: int = 30,
    train_fraction: float = 0.7,
    tol: float = TOL_DEFAULT,
) -> PolicyTable:
    """Fit pooled values on train, evaluate each policy's path on held-out data.

    The win rate re-splits the pooled episodes ``n_resplits`` times with
    derived seeds, counting splits where the sequence-sensitive policy's
    held-out value is at least the reference-path policy's.
    """
    selection = _select_paths(train, family, tol)
    policies = {
        name: PolicyResult(name, _path_of_key(key, family) if key else None, _heldout_value(heldout, key))
        for name, key in selection.items()
    }

    def delta(a: str, b: str) -> float | None:
        va, vb = policies[a].heldout, policies[b].heldout
        if va.status != "ok" or vb.status != "ok":
            return None
        return va.value - vb.value

    pooled_eps = list(train) + list(heldout)
    wins = 0
    effective = 0
    for r in range(n_resplits):
        tr, ho = split_by_case(pooled_eps, seed + 1 + r, train_fraction)
        sel = _select_paths(tr, family, tol)
        v_seq = _heldout_value(ho, sel["sequence-sensitive"])
        v_ref = _heldout_value(ho, sel["reference-path"])
        if v_seq.status != "ok" or v_ref.status != "ok":
            continue
        effective += 1
        if v_seq.value >= v_ref.value:
            wins += 1
    win_rate = wins / effective if effective else None

    return PolicyTable(
        family=family,
        policies=policies,
        delta_ref=delta("sequence-sensitive", "reference-path"),
        delta_greedy=delta("sequence-sensitive", "greedy one-step"),
        win_rate=win_rate,
        metadata={
            "n_resplits": n_resplits,
            "train_fraction": train_fraction,
            "win_rule": "sequence-sensitive heldout value >= reference-path",
            "seed": seed,
            "resplits_effective": effective,
        },
    )
