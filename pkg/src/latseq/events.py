"""Event logs, diamond families, anchored episodes, and pooled estimation.

Cases are activity traces with timestamps and a terminal accept/reject
outcome.  A family ``(u, w) -> v`` names two activities that occur in both
orders before a target activity; episodes anchored at the target's first
occurrence are classed by which of u, w happened before it, and the pooled
local order effect is the mean-reward gap between the two orders inside the
pair endpoint.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .errors import InputError

SECONDS_PER_DAY = 86400.0

ENDPOINT_EMPTY = "empty"
ENDPOINT_U = "u"
ENDPOINT_W = "w"
ENDPOINT_BOTH = "uw"
ENDPOINT_CLASSES = (ENDPOINT_EMPTY, ENDPOINT_U, ENDPOINT_W, ENDPOINT_BOTH)

ORDER_UW = "u->w"
ORDER_WU = "w->u"

STATUS_OK = "ok"
STATUS_UNIDENTIFIED = "unidentified"
STATUS_INSUFFICIENT = "insufficient-n"


@dataclass(frozen=True, slots=True)
class Case:
    case_id: str
    events: tuple[tuple[str, datetime], ...]  # timestamp-sorted, stable
    outcome: int


@dataclass(frozen=True, slots=True)
class EventLog:
    cases: tuple[Case, ...]
    outcome_missing: bool = False


@dataclass(frozen=True, slots=True)
class FamilySpec:
    """A local diamond family: incomparable activities u < w before target v."""

    u: str
    w: str
    v: str
    lam: float = 0.02

    def __post_init__(self):
        if len({self.u, self.w, self.v}) != 3:
            raise InputError("family activities u, w, v must be distinct")
        if not self.u < self.w:
            raise InputError("family requires u < w (u is the tau-smaller name)")
        if self.lam < 0:
            raise InputError("duration penalty must be nonnegative")

    @classmethod
    def make(cls, a: str, b: str, target: str, lam: float = 0.02) -> "FamilySpec":
        u, w = sorted((a, b))
        return cls(u, w, target, lam)


@dataclass(frozen=True, slots=True)
class Episode:
    case_id: str
    endpoint: str
    order: str | None
    reward: float


@dataclass(frozen=True, slots=True)
class Estimate:
    value: float | None
    status: str = STATUS_OK

    @classmethod
    def unidentified(cls) -> "Estimate":
        return cls(None, STATUS_UNIDENTIFIED)

    @classmethod
    def insufficient(cls) -> "Estimate":
        return cls(None, STATUS_INSUFFICIENT)


@dataclass(frozen=True, slots=True)
class EstimationReport:
    family: FamilySpec
    class_counts: dict[str, int]
    class_means: dict[str, Estimate]
    order_counts: dict[str, int]
    order_means: dict[str, Estimate]
    kappa: Estimate
    ci: tuple[float, float] | None
    reference_supported: bool
    two_sided_supported: bool
    metadata: dict[str, object] = field(default_factory=dict)


def _parse_timestamp(token: str, lineno: int) -> datetime:
    text = token.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(text)
    except ValueError:
        raise InputError(f"line {lineno}: malformed timestamp {token!r}") from None
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts


def ingest_log(text: str, accept_activity: str | None = None) -> EventLog:
    """Parse the event-log CSV format (``case_id,activity,timestamp,outcome``).

    The outcome column may be absent; then outcomes derive from the presence
    of ``accept_activity`` if given, else default to 0 with a warning flag on
    the log.  Events are sorted per case by timestamp with stable order.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("event log is empty (header row required)") from None
    cols = {name.strip(): i for i, name in enumerate(header)}
    for required in ("case_id", "activity", "timestamp"):
        if required not in cols:
            raise InputError(f"event log header lacks required column {required!r}")
    has_outcome = "outcome" in cols

    rows: dict[str, list[tuple[datetime, str, str]]] = {}
    order: list[str] = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < len(cols):
            raise InputError(f"line {lineno}: expected {len(cols)} columns")
        cid = row[cols["case_id"]].strip()
        act = row[cols["activity"]].strip()
        if not cid or not act:
            raise InputError(f"line {lineno}: empty case_id or activity")
        ts = _parse_timestamp(row[cols["timestamp"]], lineno)
        out = row[cols["outcome"]].strip() if has_outcome else ""
        if out not in ("", "0", "1"):
            raise InputError(f"line {lineno}: outcome must be 0, 1, or empty")
        if cid not in rows:
            rows[cid] = []
            order.append(cid)
        rows[cid].append((ts, act, out))

    cases = []
    for cid in order:
        recs = sorted(rows[cid], key=lambda r: r[0])  # stable on ties
        events = tuple((act, ts) for ts, act, _ in recs)
        if has_outcome:
            outcome = 0
            for _, _, out in recs:
                if out:
                    outcome = int(out)
        elif accept_activity is not None:
            outcome = int(any(act == accept_activity for _, act, _ in recs))
        else:
            outcome = 0
        cases.append(Case(cid, events, outcome))
    return EventLog(tuple(cases), outcome_missing=not has_outcome and accept_activity is None)


def write_log(log: EventLog) -> str:
    """Render a log back to the CSV format (outcome repeated on every row)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["case_id", "activity", "timestamp", "outcome"])
    for case in log.cases:
        for act, ts in case.events:
            writer.writerow([case.case_id, act, ts.isoformat(), case.outcome])
    return buf.getvalue()


def detect_families(
    log: EventLog, min_two_sided: int = 1, lam: float = 0.02
) -> list[FamilySpec]:
    """All (u, w) -> v with each order observed in >= ``min_two_sided`` cases."""
    if min_two_sided < 1:
        raise InputError("min_two_sided must be at least 1")
    counts: dict[tuple[str, str, str], list[int]] = {}
    for case in log.cases:
        first_seen: dict[str, int] = {}
        for idx, (act, _) in enumerate(case.events):
            if act not in first_seen:
                first_seen[act] = idx
        for target, anchor in first_seen.items():
            prior = sorted(a for a, i in first_seen.items() if i < anchor)
            for i, a in enumerate(prior):
                for b in prior[i + 1 :]:
                    key = (target, a, b)
                    cnt = counts.setdefault(key, [0, 0])
                    if first_seen[a] < first_seen[b]:
                        cnt[0] += 1
                    else:
                        cnt[1] += 1
    out = []
    for (target, a, b), (n_uw, n_wu) in sorted(counts.items()):
        if min(n_uw, n_wu) >= min_two_sided:
            out.append(FamilySpec(a, b, target, lam))
    return out


def extract_episodes(log: EventLog, family: FamilySpec) -> list[Episode]:
    """One episode per case containing the target activity.

    The anchor is the target's first occurrence; the endpoint class records
    which of u, w occurred strictly before it, the order their relative first
    occurrences, and the reward is ``outcome - lam * days from anchor to the
    case's last event``.
    """
    episodes = []
    for case in log.cases:
        anchor_idx = None
        for idx, (act, _) in enumerate(case.events):
            if act == family.v:
                anchor_idx = idx
                break
        if anchor_idx is None:
            continue
        pos_u = pos_w = None
        for idx in range(anchor_idx):
            act = case.events[idx][0]
            if act == family.u and pos_u is None:
                pos_u = idx
            elif act == family.w and pos_w is None:
                pos_w = idx
        if pos_u is None and pos_w is None:
            endpoint, order = ENDPOINT_EMPTY, None
        elif pos_w is None:
            endpoint, order = ENDPOINT_U, None
        elif pos_u is None:
            endpoint, order = ENDPOINT_W, None
        else:
            endpoint = ENDPOINT_BOTH
            order = ORDER_UW if pos_u < pos_w else ORDER_WU
        anchor_ts = case.events[anchor_idx][1]
        last_ts = case.events[-1][1]
        remaining_days = (last_ts - anchor_ts).total_seconds() / SECONDS_PER_DAY
        reward = case.outcome - family.lam * remaining_days
        episodes.append(Episode(case.case_id, endpoint, order, reward))
    return episodes


def _mean(rewards: list[float]) -> Estimate:
    if not rewards:
        return Estimate.unidentified()
    return Estimate(sum(rewards) / len(rewards))


def estimate_family(
    episodes,
    family: FamilySpec,
    seed: int = 0,
    n_boot: int = 1000,
    level: float = 0.95,
) -> EstimationReport:
    """Pooled endpoint values and the pooled local order effect with a CI.

    ``kappa = mean(w-first rewards) - mean(u-first rewards)`` inside the pair
    endpoint; unidentified unless both orders occur.  The CI is a percentile
    bootstrap, resampling each order group separately with a seeded generator,
    and is widened (if needed) to contain the point estimate.
    """
    by_class: dict[str, list[float]] = {c: [] for c in ENDPOINT_CLASSES}
    by_order: dict[str, list[float]] = {ORDER_UW: [], ORDER_WU: []}
    for ep in episodes:
        by_class[ep.endpoint].append(ep.reward)
        if ep.order is not None:
            by_order[ep.order].append(ep.reward)

    class_counts = {c: len(v) for c, v in by_class.items()}
    class_means = {c: _mean(v) for c, v in by_class.items()}
    order_counts = {o: len(v) for o, v in by_order.items()}
    order_means = {o: _mean(v) for o, v in by_order.items()}

    reference_supported = order_counts[ORDER_UW] >= 1
    two_sided = order_counts[ORDER_UW] >= 1 and order_counts[ORDER_WU] >= 1

    if not two_sided:
        kappa, ci = Estimate.unidentified(), None
    else:
        k_hat = order_means[ORDER_WU].value - order_means[ORDER_UW].value
        rng = np.random.default_rng(seed)
        uw = np.asarray(by_order[ORDER_UW], dtype=float)
        wu = np.asarray(by_order[ORDER_WU], dtype=float)
        boot_uw = uw[rng.integers(0, len(uw), size=(n_boot, len(uw)))].mean(axis=1)
        boot_wu = wu[rng.integers(0, len(wu), size=(n_boot, len(wu)))].mean(axis=1)
        draws = boot_wu - boot_uw
        alpha = (1.0 - level) / 2.0
        lo = float(np.quantile(draws, alpha))
        hi = float(np.quantile(draws, 1.0 - alpha))
        kappa = Estimate(k_hat)
        ci = (min(lo, k_hat), max(hi, k_hat))

    return EstimationReport(
        family=family,
        class_counts=class_counts,
        class_means=class_means,
        order_counts=order_counts,
        order_means=order_means,
        kappa=kappa,
        ci=ci,
        reference_supported=reference_supported,
        two_sided_supported=two_sided,
        metadata={
            "ci_method": "percentile bootstrap, order groups resampled separately",
            "n_boot": n_boot,
            "seed": seed,
            "level": level,
            "pooling": "marginal over contexts",
        },
    )


@dataclass(frozen=True, slots=True)
class FamilySupportReport:
    """Empirical support flags for one family, per identification route."""

    family: FamilySpec
    endpoint_reference_supported: dict[str, bool]
    diamond_two_sided: bool
    decomposition_identified: dict[str, bool]


def family_path_labels(family: FamilySpec) -> dict[str, tuple[str, ...]]:
    """The five candidate paths of the family's rank-2 lattice, labeled."""
    u, w = family.u, family.w
    return {
        "(stay)": (),
        u: (u,),
        w: (w,),
        f"{u}->{w}": (u, w),
        f"{w}->{u}": (w, u),
    }


def log_support_report(episodes, family: FamilySpec) -> FamilySupportReport:
    """Which reference scores and which order effect the log can identify.

    A reference path is empirically supported when at least one episode
    realizes it; the pair diamond is two-sided supported when both orders
    occur.  A non-reference path is decomposition-identified when the
    reference order occurs and the diamond is two-sided supported.
    """
    class_counts = {c: 0 for c in ENDPOINT_CLASSES}
    order_counts = {ORDER_UW: 0, ORDER_WU: 0}
    for ep in episodes:
        class_counts[ep.endpoint] += 1
        if ep.order is not None:
            order_counts[ep.order] += 1
    endpoint_ref = {
        ENDPOINT_EMPTY: class_counts[ENDPOINT_EMPTY] >= 1,
        ENDPOINT_U: class_counts[ENDPOINT_U] >= 1,
        ENDPOINT_W: class_counts[ENDPOINT_W] >= 1,
        ENDPOINT_BOTH: order_counts[ORDER_UW] >= 1,
    }
    two_sided = order_counts[ORDER_UW] >= 1 and order_counts[ORDER_WU] >= 1
    u, w = family.u, family.w
    decomposition = {
        "(stay)": endpoint_ref[ENDPOINT_EMPTY],
        u: endpoint_ref[ENDPOINT_U],
        w: endpoint_ref[ENDPOINT_W],
        f"{u}->{w}": endpoint_ref[ENDPOINT_BOTH],
        f"{w}->{u}": endpoint_ref[ENDPOINT_BOTH] and two_sided,
    }
    return FamilySupportReport(family, endpoint_ref, two_sided, decomposition)
