"""Shared fixtures and independent brute-force oracles.

The oracles here deliberately avoid the library's own algorithms: linear
extensions come from permutation filtering, swap distances from BFS on the
extension graph, and ideal checks from a definition scan.
"""

from __future__ import annotations

import itertools
import random
from collections import deque
from fractions import Fraction

import pytest

from latseq import (
    CausalModel,
    EdgeField,
    LatticeSlice,
    Poset,
    build_lattice,
    make_poset,
    parse_poset,
)


# ---------------------------------------------------------------------------
# Random instances


def random_poset(rng: random.Random, n: int, density: float = 0.4) -> Poset:
    """Random DAG on ids e0..e{n-1}: relate i -> j (i < j in a shuffled
    seniority) with the given probability, then let the closure do the rest."""
    ids = [f"e{i}" for i in range(n)]
    seniority = list(range(n))
    rng.shuffle(seniority)
    covers = []  # relate by seniority position, so the relation is acyclic
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                covers.append((ids[seniority[i]], ids[seniority[j]]))
    return make_poset(ids, covers)


def random_int_field(rng: random.Random, lattice: LatticeSlice, lo=-9, hi=9) -> EdgeField:
    return EdgeField({e: rng.randint(lo, hi) for e in lattice.edge_list})


def random_ideal(rng: random.Random, poset: Poset) -> int:
    mask = 0
    for a in rng.sample(range(poset.n), k=rng.randint(0, poset.n)):
        if poset.pred[a] & ~mask == 0:
            mask |= 1 << a
    return mask


# ---------------------------------------------------------------------------
# Oracles


def is_ideal_bruteforce(poset: Poset, mask: int) -> bool:
    for s in range(poset.n):
        if not mask >> s & 1:
            continue
        for u in range(poset.n):
            if poset.less(u, s) and not mask >> u & 1:
                return False
    return True


def linear_extensions_bruteforce(poset: Poset, subset: int) -> list[tuple[int, ...]]:
    """All orderings of the subset respecting the induced order, by filtering
    every permutation."""
    elems = [i for i in range(poset.n) if subset >> i & 1]
    out = []
    for perm in itertools.permutations(elems):
        ok = True
        for i in range(len(perm)):
            for j in range(i + 1, len(perm)):
                if poset.less(perm[j], perm[i]):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            out.append(perm)
    return out


def swap_distance_bruteforce(poset: Poset, src: tuple[int, ...], dst: tuple[int, ...]) -> int:
    """BFS distance in the graph of extensions under adjacent incomparable swaps."""
    if src == dst:
        return 0
    seen = {src: 0}
    queue = deque([src])
    while queue:
        cur = queue.popleft()
        d = seen[cur]
        for i in range(len(cur) - 1):
            a, b = cur[i], cur[i + 1]
            if poset.incomparable(a, b):
                nxt = cur[:i] + (b, a) + cur[i + 2 :]
                if nxt == dst:
                    return d + 1
                if nxt not in seen:
                    seen[nxt] = d + 1
                    queue.append(nxt)
    raise AssertionError("extensions not connected by swaps")


def subset_masks(mask: int):
    """All submasks of a mask (including 0 and itself)."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


# ---------------------------------------------------------------------------
# Random causal models


def slice_paths(lattice: LatticeSlice):
    """All admissible paths from the base of a slice, as addition tuples."""
    out = []

    def walk(mask, prefix, depth):
        out.append(tuple(prefix))
        if depth == lattice.depth:
            return
        for a in lattice.out_edges[lattice.node_index[mask]]:
            prefix.append(a)
            walk(mask | 1 << a, prefix, depth + 1)
            prefix.pop()

    walk(lattice.base, [], 0)
    return out


def _law(rng: random.Random, keys):
    weights = [rng.randint(0, 4) for _ in keys]
    if sum(weights) == 0:
        weights[rng.randrange(len(weights))] = 1
    total = sum(weights)
    return {k: Fraction(w, total) for k, w in zip(keys, weights) if w}


def random_fraction_model(rng: random.Random, n_elems=None, n_ctx=None):
    """A random finite model with exact rational probabilities and means."""
    n = n_elems if n_elems is not None else rng.randint(1, 4)
    poset = random_poset(rng, n, density=0.35)
    contexts = tuple(f"x{i}" for i in range(n_ctx or rng.randint(1, 3)))
    horizon = rng.randint(1, min(3, poset.n))
    lattice = build_lattice(poset, 0, horizon)

    propensity = {}
    for idx, mask in enumerate(lattice.nodes):
        adds = lattice.out_edges[idx]
        if not adds:
            continue
        for x in contexts:
            weights = {a: rng.randint(0, 3) for a in adds}
            stop = rng.randint(0, 3)
            total = sum(weights.values()) + stop
            if total == 0:
                continue
            row = {a: Fraction(w, total) for a, w in weights.items() if w}
            if row:
                propensity[(mask, x)] = row
    kernel = {
        (x, a): _law(rng, contexts) for x in contexts for a in range(poset.n)
    }
    accept = {}
    days = {}
    for actions in slice_paths(lattice):
        for x in contexts:
            accept[(x, actions)] = Fraction(rng.randint(0, 8), 8)
            days[(x, actions)] = Fraction(rng.randint(0, 40), 4)
    model = CausalModel(
        poset=poset,
        base=0,
        horizon=horizon,
        contexts=contexts,
        initial_law=_law(rng, contexts),
        propensity=propensity,
        kernel=kernel,
        accept_prob=accept,
        days_mean=days,
        duration_penalty=Fraction(1, 50),
    )
    model.validate()
    return model, lattice


def family_two_action_model(
    p_first=(0.25, 0.25),
    p_second=(0.9, 0.9),
    accept=None,
    days=None,
    lam=0.02,
):
    """Single-context model over the {a, b} antichain with explicit rewards.

    ``accept`` / ``days`` are keyed by activity-name tuples such as
    ``("a", "b")``; unnamed paths fall back to the model defaults.
    """
    poset = make_poset(["a", "b"], [])
    accept = accept or {}
    days = days or {}

    def table(src):
        return {
            ("x", tuple(poset.index(s) for s in key)): value
            for key, value in src.items()
        }

    model = CausalModel(
        poset=poset,
        base=0,
        horizon=2,
        contexts=("x",),
        initial_law={"x": 1},
        propensity={
            (0b00, "x"): {0: p_first[0], 1: p_first[1]},
            (0b01, "x"): {1: p_second[0]},
            (0b10, "x"): {0: p_second[1]},
        },
        kernel={("x", 0): {"x": 1}, ("x", 1): {"x": 1}},
        accept_prob=table(accept),
        days_mean=table(days),
        duration_penalty=lam,
        anchor_activity="v",
    )
    model.validate()
    return model


# ---------------------------------------------------------------------------
# Fixtures


@pytest.fixture
def b2():
    """Two-element antichain: poset, depth-2 slice, and the (1,2,3,5) field."""
    poset = parse_poset("elem u\nelem v\n")
    lattice = build_lattice(poset, 0, 2)
    field = EdgeField({(0, 0): 1, (0, 1): 2, (1, 1): 3, (2, 0): 5})
    return poset, lattice, field


@pytest.fixture
def b3():
    poset = parse_poset("elem u\nelem v\nelem w\n")
    lattice = build_lattice(poset, 0, 3)
    return poset, lattice


@pytest.fixture
def chain3():
    poset = parse_poset("elem a\nelem b\nelem c\ncover a b\ncover b c\n")
    lattice = build_lattice(poset, 0, 3)
    return poset, lattice
