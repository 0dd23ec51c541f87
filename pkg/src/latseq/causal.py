"""Finite-state sequential intervention models and identification machinery.

A :class:`CausalModel` couples a poset's ideal lattice with a finite context
space: states are (ideal, context) pairs, stage actions are admissible
additions drawn from state-dependent propensities (the residual mass stops
the case), contexts evolve by a per-action kernel, and terminal rewards have
means determined by the terminal context and the realized path.  The same
kernel drives three distinct code paths: the g-formula (forward state-law
propagation), the model truth (backward recursion), and the sampler.

Probabilities and means may be ``fractions.Fraction`` values, in which case
the two evaluators agree exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta

from .errors import InputError, PreconditionError, UnsupportedPathError
from .events import Case, Episode, EventLog, FamilySpec, ORDER_UW, ORDER_WU
from .events import ENDPOINT_BOTH, ENDPOINT_EMPTY, ENDPOINT_U, ENDPOINT_W
from .events import extract_episodes, log_support_report
from .lattice import Diamond, LatticeSlice, Path, enumerate_diamonds, reference_path, rewrite_sequence
from .poset import Poset

EPOCH = datetime(2020, 1, 1)


@dataclass(frozen=True)
class CausalModel:
    """Finite contexts, stage propensities, context kernel, and reward means.

    ``propensity[(ideal, x)]`` maps admissible additions to probabilities
    summing to at most 1 (the remainder stops the case; missing states always
    stop).  ``kernel[(x, a)]`` is the context transition row for taking ``a``
    in context ``x`` (missing rows leave the context unchanged).
    ``accept_prob`` and ``days_mean`` are keyed by (terminal context, action
    tuple); the mean reward is ``accept - duration_penalty * days``.
    ``offsets`` shifts the structural mean of a counterfactual path, keyed by
    (start ideal, start context, action tuple); an offset on a path with zero
    observational probability changes no observable law.
    """

    poset: Poset
    base: int
    horizon: int
    contexts: tuple[str, ...]
    initial_law: dict
    propensity: dict
    kernel: dict
    accept_prob: dict
    days_mean: dict
    duration_penalty: float = 0.02
    offsets: dict = field(default_factory=dict)
    default_accept: float = 0
    default_days: float = 0
    anchor_activity: str = "goal"
    end_activity: str = "close"

    def prop(self, ideal: int, x: str) -> dict:
        return self.propensity.get((ideal, x), {})

    def trans(self, x: str, a: int) -> dict:
        return self.kernel.get((x, a), {x: 1})

    def reward_mean(self, x_terminal: str, actions: tuple[int, ...]):
        key = (x_terminal, actions)
        accept = self.accept_prob.get(key, self.default_accept)
        days = self.days_mean.get(key, self.default_days)
        if days == 0:  # keep exact types exact regardless of the penalty's type
            return accept
        return accept - self.duration_penalty * days

    def offset(self, start: int, x0: str, actions: tuple[int, ...]):
        return self.offsets.get((start, x0, actions), 0)

    def validate(self, tol: float = 1e-9) -> None:
        if self.horizon < 0:
            raise InputError("horizon must be nonnegative")
        if abs(sum(self.initial_law.values()) - 1) > tol:
            raise InputError("initial context law must sum to 1")
        for x in self.initial_law:
            if x not in self.contexts:
                raise InputError(f"initial law names unknown context {x!r}")
        for (ideal, x), row in self.propensity.items():
            if x not in self.contexts:
                raise InputError(f"propensity names unknown context {x!r}")
            self.poset.require_ideal(ideal, "propensity state")
            admissible = set(self.poset.admissible_unchecked(ideal))
            total = 0
            for a, p in row.items():
                if a not in admissible:
                    raise InputError(
                        f"propensity at {{{self.poset.format_members(ideal)}}} "
                        f"names inadmissible action {self.poset.ids[a]!r}"
                    )
                if p < 0:
                    raise InputError("propensities must be nonnegative")
                total += p
            if total > 1 + tol:
                raise InputError("propensities at a state must sum to at most 1")
        for (x, _a), row in self.kernel.items():
            if abs(sum(row.values()) - 1) > tol:
                raise InputError("kernel rows must sum to 1")
            for x2, p in row.items():
                if x2 not in self.contexts or p < 0:
                    raise InputError("kernel rows must be laws over known contexts")
        for q in self.accept_prob.values():
            if q < 0 or q > 1:
                raise InputError("acceptance probabilities must lie in [0, 1]")
        for d in self.days_mean.values():
            if d < 0:
                raise InputError("mean remaining days must be nonnegative")


def _forward_context_laws(model: CausalModel, x0: str, path: Path):
    """Path-induced context laws at every stage, as a list of dicts."""
    dist = {x0: 1}
    laws = [dist]
    for a in path.additions:
        nxt: dict = {}
        for x, p in dist.items():
            for x2, q in model.trans(x, a).items():
                w = p * q
                if w:
                    nxt[x2] = nxt.get(x2, 0) + w
        dist = nxt
        laws.append(dist)
    return laws


def path_supported(model: CausalModel, x0: str, path: Path):
    """Check positivity of every stage action along the path-induced law.

    Returns ``(True, None, None)`` or ``(False, stage, (ideal, context))`` for
    the first unsupported stage.
    """
    dist = {x0: 1}
    mask = path.start
    for b, a in enumerate(path.additions):
        for x, p in dist.items():
            if p and not model.prop(mask, x).get(a, 0) > 0:
                return False, b, (mask, x)
        nxt: dict = {}
        for x, p in dist.items():
            for x2, q in model.trans(x, a).items():
                w = p * q
                if w:
                    nxt[x2] = nxt.get(x2, 0) + w
        dist = nxt
        mask |= 1 << a
    return True, None, None


def g_formula_value(model: CausalModel, x0: str, path: Path):
    """Identified value of a supported path: forward propagation of the
    path-induced context law, then the terminal conditional mean.

    Raises :class:`UnsupportedPathError` when some stage action has zero
    propensity on the support of the induced law.
    """
    ok, stage, state = path_supported(model, x0, path)
    if not ok:
        mask, x = state
        raise UnsupportedPathError(
            f"stage {stage}: action has zero propensity at "
            f"({{{model.poset.format_members(mask)}}}, {x})",
            stage=stage,
            state=state,
        )
    laws = _forward_context_laws(model, x0, path)
    terminal = laws[-1]
    value = sum(p * model.reward_mean(x, path.additions) for x, p in terminal.items())
    return value + model.offset(path.start, x0, path.additions)


def true_path_value(model: CausalModel, x0: str, path: Path):
    """Model-defined counterfactual value, by backward recursion over stages.

    No support requirement: this is the simulator's ground truth, used to
    cross-check the g-formula and to exhibit non-identifiability.
    """
    w = {x: model.reward_mean(x, path.additions) for x in model.contexts}
    for a in reversed(path.additions):
        w = {
            x: sum(q * w[x2] for x2, q in model.trans(x, a).items())
            for x in model.contexts
        }
    return w[x0] + model.offset(path.start, x0, path.additions)


def true_local_order_effect(model: CausalModel, x0: str, d: Diamond):
    """kappa at state (d.base, x0): v-first value minus u-first value."""
    return true_path_value(model, x0, d.v_side()) - true_path_value(model, x0, d.u_side())


def diamond_two_sided_supported(model: CausalModel, x0: str, d: Diamond) -> bool:
    return (
        path_supported(model, x0, d.u_side())[0]
        and path_supported(model, x0, d.v_side())[0]
    )


# ---------------------------------------------------------------------------
# Reachability and support separation


def _initial_contexts(model: CausalModel):
    return [x for x in model.contexts if model.initial_law.get(x, 0) > 0]


def reachable_contexts(model: CausalModel, x0: str) -> dict[int, set[str]]:
    """Contexts observable at each ideal when starting from (base, x0)."""
    base_size = model.base.bit_count()
    reach: dict[int, set[str]] = {model.base: {x0}}
    frontier = [(model.base, x0)]
    while frontier:
        mask, x = frontier.pop()
        if mask.bit_count() - base_size >= model.horizon:
            continue
        for a, p in model.prop(mask, x).items():
            if p <= 0:
                continue
            child = mask | 1 << a
            for x2, q in model.trans(x, a).items():
                if q <= 0:
                    continue
                seen = reach.setdefault(child, set())
                if x2 not in seen:
                    seen.add(x2)
                    frontier.append((child, x2))
    return reach


@dataclass(frozen=True, slots=True)
class ContextSupportReport:
    """Identification flags when the process starts in one initial context."""

    x0: str
    reference_supported: dict[int, bool]
    diamond_two_sided: dict[Diamond, bool]
    decomposition_identified: dict[tuple[int, tuple[int, ...]], bool]


@dataclass(frozen=True, slots=True)
class ModelSupportReport:
    base: int
    depth: int
    by_context: dict[str, ContextSupportReport]
    reference_supported: dict[int, bool]
    diamond_two_sided: dict[Diamond, bool]
    decomposition_identified: dict[tuple[int, tuple[int, ...]], bool]


def _enumerate_slice_paths(lattice: LatticeSlice) -> list[Path]:
    """All admissible paths from the base within the slice depth."""
    out: list[Path] = []
    prefix: list[int] = []

    def walk(mask: int, depth: int) -> None:
        out.append(Path(lattice.base, tuple(prefix)))
        if depth == lattice.depth:
            return
        idx = lattice.node_index[mask]
        for a in lattice.out_edges[idx]:
            prefix.append(a)
            walk(mask | 1 << a, depth + 1)
            prefix.pop()

    walk(lattice.base, 0)
    return out


def model_support_report(model: CausalModel, lattice: LatticeSlice) -> ModelSupportReport:
    """Support separation over a slice: which reference scores, order effects,
    and path decompositions the observational law identifies.

    Reference-path support follows the path-induced law from each initial
    context; a diamond is two-sided supported when both of its sides are
    supported at every context observable at its base ideal (diamonds at
    unreachable ideals are flagged unidentified).  Pooled flags are the
    conjunction over initial contexts.
    """
    poset = model.poset
    diamonds = enumerate_diamonds(lattice)
    paths = _enumerate_slice_paths(lattice)
    by_context: dict[str, ContextSupportReport] = {}
    for x0 in _initial_contexts(model):
        reach = reachable_contexts(model, x0)
        ref_ok: dict[int, bool] = {}
        for mask in lattice.nodes:
            ref = reference_path(poset, lattice.base, mask)
            ref_ok[mask] = path_supported(model, x0, ref)[0]
        dia_ok: dict[Diamond, bool] = {}
        for d in diamonds:
            seen = reach.get(d.base, set())
            dia_ok[d] = bool(seen) and all(
                diamond_two_sided_supported(model, x, d) for x in seen
            )
        deco_ok: dict[tuple[int, tuple[int, ...]], bool] = {}
        for p in paths:
            if not ref_ok[p.end]:
                deco_ok[(p.end, p.additions)] = False
                continue
            ref = reference_path(poset, lattice.base, p.end)
            seq = rewrite_sequence(lattice, ref, p)
            deco_ok[(p.end, p.additions)] = all(
                dia_ok[st.diamond] for st in seq.steps
            )
        by_context[x0] = ContextSupportReport(x0, ref_ok, dia_ok, deco_ok)

    reports = list(by_context.values())
    if not reports:
        raise InputError("model has no initial context with positive probability")

    def pooled(key_sets):
        keys = next(iter(key_sets)).keys()
        return {k: all(rep[k] for rep in key_sets) for k in keys}

    return ModelSupportReport(
        base=lattice.base,
        depth=lattice.depth,
        by_context=by_context,
        reference_supported=pooled([r.reference_supported for r in reports]),
        diamond_two_sided=pooled([r.diamond_two_sided for r in reports]),
        decomposition_identified=pooled([r.decomposition_identified for r in reports]),
    )


def support_separation_report(source, lattice=None, family=None):
    """Dispatch on the source: a CausalModel (exact propensity support over a
    slice) or episodes/EventLog (empirical support for one family)."""
    if isinstance(source, CausalModel):
        if lattice is None:
            raise InputError("model support reports need a lattice slice")
        return model_support_report(source, lattice)
    if isinstance(source, EventLog):
        if family is None:
            raise InputError("log support reports need a family")
        return log_support_report(extract_episodes(source, family), family)
    if family is None:
        raise InputError("episode support reports need a family")
    return log_support_report(source, family)


# ---------------------------------------------------------------------------
# Non-identifiability witness


def _side_probability(model: CausalModel, x0: str, d: Diamond):
    """Observational probability of realizing the v-first side of a diamond."""
    p_first = model.prop(d.base, x0).get(d.v, 0)
    if not p_first:
        return 0
    total = 0
    for x2, q in model.trans(x0, d.v).items():
        total += q * model.prop(d.base | 1 << d.v, x2).get(d.u, 0)
    return p_first * total


def nonid_witness(model: CausalModel, d: Diamond, contexts, delta):
    """Two observationally identical models whose order effect differs by delta.

    Requires the v-first side of the diamond to have zero observational
    probability at every context in ``contexts``; the second model shifts the
    structural mean of that side's path by ``delta`` there and changes nothing
    else.
    """
    b_set = list(contexts)
    if not b_set:
        raise PreconditionError("the context set of the witness must be nonempty")
    for x in b_set:
        if x not in model.contexts:
            raise InputError(f"unknown context {x!r}")
        p = _side_probability(model, x, d)
        if p > 0:
            raise PreconditionError(
                f"v-first side of the diamond is supported at context {x!r} "
                f"(probability {p!r}); the order effect is identified there"
            )
    if delta == 0:
        return model, model
    offsets = dict(model.offsets)
    for x in b_set:
        key = (d.base, x, (d.v, d.u))
        offsets[key] = offsets.get(key, 0) + delta
    return model, replace(model, offsets=offsets)


# ---------------------------------------------------------------------------
# Observational law and its exact comparison


def _terminal_trajectories(model: CausalModel):
    """All realizable (x0, actions, x_terminal, probability) with stop mass.

    A trajectory terminates when the explicit stop mass is positive, when no
    action has positive propensity, or at the horizon.
    """
    results = []

    def walk(mask, x, actions, prob, depth, x0):
        row = model.prop(mask, x)
        acting = [(a, p) for a, p in sorted(row.items()) if p > 0]
        stop_mass = 1 - sum(p for _, p in acting)
        at_horizon = depth >= model.horizon
        if at_horizon:
            results.append((x0, actions, x, prob))
        elif stop_mass > 0:
            results.append((x0, actions, x, prob * stop_mass))
        if at_horizon:
            return
        for a, p in acting:
            for x2, q in model.trans(x, a).items():
                if q > 0:
                    walk(mask | 1 << a, x2, actions + (a,), prob * p * q, depth + 1, x0)

    for x0, p0 in sorted(model.initial_law.items()):
        if p0 > 0:
            walk(model.base, x0, (), p0, 0, x0)
    return results


def observational_summary(model: CausalModel) -> dict:
    """Every observable conditional law, as a comparable dictionary.

    Keys cover the initial law, propensities at reachable states, kernel rows
    for actions taken with positive probability, and the conditional reward
    law (acceptance probability, mean days, structural offset) of every
    realizable complete trajectory.
    """
    summary: dict = {}
    for x, p in model.initial_law.items():
        if p > 0:
            summary[("initial", x)] = p
    base_size = model.base.bit_count()
    seen_states = set()
    seen_kernel = set()
    for x0 in _initial_contexts(model):
        reach = reachable_contexts(model, x0)
        for mask, xs in reach.items():
            if mask.bit_count() - base_size >= model.horizon:
                continue  # the case is forced to stop here; no action observed
            for x in xs:
                if (mask, x) in seen_states:
                    continue
                seen_states.add((mask, x))
                row = model.prop(mask, x)
                summary[("prop", mask, x)] = tuple(
                    (a, p) for a, p in sorted(row.items()) if p > 0
                )
                for a, p in row.items():
                    if p > 0 and (x, a) not in seen_kernel:
                        seen_kernel.add((x, a))
                        summary[("kernel", x, a)] = tuple(
                            (x2, q) for x2, q in sorted(model.trans(x, a).items()) if q > 0
                        )
    for x0, actions, xt, prob in _terminal_trajectories(model):
        if prob <= 0:
            continue
        key = ("reward", x0, actions, xt)
        accept = model.accept_prob.get((xt, actions), model.default_accept)
        days = model.days_mean.get((xt, actions), model.default_days)
        summary[key] = (accept, days, model.offset(model.base, x0, actions))
    return summary


def observationally_equal(m1: CausalModel, m2: CausalModel) -> bool:
    """Exact comparison of every observable conditional distribution."""
    return observational_summary(m1) == observational_summary(m2)


def true_pooled_family_values(model: CausalModel, family: FamilySpec):
    """Exact pooled mean reward per (endpoint class, order) under the
    observational law, plus the pooled order effect.

    This is the estimand of :func:`latseq.events.estimate_family` on logs
    simulated from the model.
    """
    iu, iw = model.poset.index(family.u), model.poset.index(family.w)
    mass: dict = {}
    val: dict = {}
    for x0, actions, xt, prob in _terminal_trajectories(model):
        if prob <= 0:
            continue
        pu = actions.index(iu) if iu in actions else None
        pw = actions.index(iw) if iw in actions else None
        if pu is None and pw is None:
            key = (ENDPOINT_EMPTY, None)
        elif pw is None:
            key = (ENDPOINT_U, None)
        elif pu is None:
            key = (ENDPOINT_W, None)
        else:
            key = (ENDPOINT_BOTH, ORDER_UW if pu < pw else ORDER_WU)
        mean = model.reward_mean(xt, actions) + model.offset(model.base, x0, actions)
        mass[key] = mass.get(key, 0) + prob
        val[key] = val.get(key, 0) + prob * mean
    means = {key: val[key] / mass[key] for key in mass}
    k_uw = means.get((ENDPOINT_BOTH, ORDER_UW))
    k_wu = means.get((ENDPOINT_BOTH, ORDER_WU))
    kappa = None if k_uw is None or k_wu is None else k_wu - k_uw
    return means, kappa


# ---------------------------------------------------------------------------
# Simulation


@dataclass(frozen=True, slots=True)
class SimCase:
    case_id: str
    x0: str
    contexts: tuple[str, ...]
    actions: tuple[int, ...]
    outcome: int
    days: float


def _draw(rng: random.Random, items) -> object | None:
    """Draw from (key, prob) pairs; None when the residual mass is hit."""
    r = rng.random()
    acc = 0.0
    for key, p in items:
        acc += float(p)
        if r < acc:
            return key
    return None


def sample_cases(model: CausalModel, n: int, seed: int) -> list[SimCase]:
    """Sample ``n`` cases from the observational law (deterministic per seed)."""
    if n < 0:
        raise InputError("n must be nonnegative")
    rng = random.Random(seed)
    init = sorted((x, p) for x, p in model.initial_law.items() if p > 0)
    out = []
    for i in range(n):
        x = _draw(rng, init)
        if x is None:  # guard against float rounding at the top of the CDF
            x = init[-1][0]
        x0 = x
        mask = model.base
        contexts = [x]
        actions: list[int] = []
        for _ in range(model.horizon):
            row = sorted((a, p) for a, p in model.prop(mask, x).items() if p > 0)
            a = _draw(rng, row)
            if a is None:
                break
            actions.append(a)
            mask |= 1 << a
            krow = sorted(model.trans(x, a).items())
            x2 = _draw(rng, krow)
            x = x2 if x2 is not None else krow[-1][0]  # float CDF rounding guard
            contexts.append(x)
        key = (x, tuple(actions))
        if model.offsets.get((model.base, x0, tuple(actions)), 0) != 0:
            raise InputError(
                "cannot simulate a model with a structural offset on a path "
                "of positive observational probability"
            )
        accept = float(model.accept_prob.get(key, model.default_accept))
        days_mean = float(model.days_mean.get(key, model.default_days))
        outcome = 1 if rng.random() < accept else 0
        days = rng.expovariate(1.0 / days_mean) if days_mean > 0 else 0.0
        out.append(SimCase(f"case{i:06d}", x0, tuple(contexts), tuple(actions), outcome, days))
    return out


def episodes_from_cases(model: CausalModel, cases, family: FamilySpec) -> list[Episode]:
    """Classify sampled cases directly (no log round trip)."""
    iu, iw = model.poset.index(family.u), model.poset.index(family.w)
    episodes = []
    for c in cases:
        pu = c.actions.index(iu) if iu in c.actions else None
        pw = c.actions.index(iw) if iw in c.actions else None
        if pu is None and pw is None:
            endpoint, order = ENDPOINT_EMPTY, None
        elif pw is None:
            endpoint, order = ENDPOINT_U, None
        elif pu is None:
            endpoint, order = ENDPOINT_W, None
        else:
            endpoint, order = ENDPOINT_BOTH, (ORDER_UW if pu < pw else ORDER_WU)
        reward = c.outcome - family.lam * c.days
        episodes.append(Episode(c.case_id, endpoint, order, reward))
    return episodes


def log_from_cases(model: CausalModel, cases) -> EventLog:
    """Emit sampled cases in the standard log format.

    Actions appear at one-day spacing, the anchor activity follows the last
    action, and a closing event is placed ``days`` after the anchor so that
    episode extraction with the model's duration penalty reproduces each
    case's reward.
    """
    ids = model.poset.ids
    if model.anchor_activity in ids or model.end_activity in ids:
        raise InputError("anchor/end activities must not collide with poset elements")
    out_cases = []
    for c in cases:
        events = []
        t = EPOCH
        for a in c.actions:
            events.append((ids[a], t))
            t += timedelta(days=1)
        anchor = t
        events.append((model.anchor_activity, anchor))
        if c.days > 0:
            events.append((model.end_activity, anchor + timedelta(days=c.days)))
        out_cases.append(Case(c.case_id, tuple(events), c.outcome))
    return EventLog(tuple(out_cases))


def simulate_log(model: CausalModel, n: int, seed: int) -> EventLog:
    """Sample cases and emit them as an event log (same seed, same log)."""
    return log_from_cases(model, sample_cases(model, n, seed))


def sample_forced_rewards(
    model: CausalModel, x0: str, path: Path, n: int, seed: int
) -> list[float]:
    """Monte-Carlo rewards when the path is imposed (contexts still evolve).

    The empirical mean estimates the counterfactual value of the path, so it
    cross-checks :func:`g_formula_value` and :func:`true_path_value`.
    """
    rng = random.Random(seed)
    actions = path.additions
    out = []
    offset = float(model.offset(path.start, x0, actions))
    for _ in range(n):
        x = x0
        for a in actions:
            krow = sorted(model.trans(x, a).items())
            x2 = _draw(rng, krow)
            x = x2 if x2 is not None else krow[-1][0]
        key = (x, actions)
        accept = float(model.accept_prob.get(key, model.default_accept))
        days_mean = float(model.days_mean.get(key, model.default_days))
        outcome = 1 if rng.random() < accept else 0
        days = rng.expovariate(1.0 / days_mean) if days_mean > 0 else 0.0
        out.append(outcome - float(model.duration_penalty) * days + offset)
    return out


def family_for_model(model: CausalModel, u: str, w: str) -> FamilySpec:
    """The family spec whose target is the model's anchor activity."""
    return FamilySpec.make(u, w, model.anchor_activity, model.duration_penalty)
