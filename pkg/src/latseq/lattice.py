"""Depth-truncated ideal lattices, admissible paths, diamonds, and rewriting.

A :class:`LatticeSlice` is the portion of the ideal lattice reachable from a
base ideal by at most ``depth`` admissible additions, with its admissible
edges.  Same-endpoint paths are connected by elementary diamond swaps; this
module produces such rewrite sequences and the minimal swap distance.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import CapExceeded, PreconditionError
from .poset import Poset

NODE_CAP_DEFAULT = 1_000_000
ENUM_CAP_DEFAULT = 10


@dataclass(frozen=True, slots=True)
class Path:
    """An admissible path: a start ideal and the ordered additions."""

    start: int
    additions: tuple[int, ...]

    @property
    def end(self) -> int:
        mask = self.start
        for a in self.additions:
            mask |= 1 << a
        return mask

    def __len__(self) -> int:
        return len(self.additions)

    def states(self) -> list[int]:
        """All visited ideals, from start to end."""
        out = [self.start]
        mask = self.start
        for a in self.additions:
            mask |= 1 << a
            out.append(mask)
        return out

    def edges(self) -> list[tuple[int, int]]:
        out = []
        mask = self.start
        for a in self.additions:
            out.append((mask, a))
            mask |= 1 << a
        return out


def validate_path(poset: Poset, path: Path) -> None:
    """Check the admissible-path invariants, raising on violation."""
    poset.require_ideal(path.start, "path start")
    seen = set()
    mask = path.start
    for step, a in enumerate(path.additions):
        if a in seen or mask >> a & 1:
            raise PreconditionError(f"addition {poset.ids[a]!r} repeated in path")
        if poset.pred[a] & ~mask:
            raise PreconditionError(
                f"step {step}: {poset.ids[a]!r} is not admissible at "
                f"{{{poset.format_members(mask)}}}"
            )
        seen.add(a)
        mask |= 1 << a


@dataclass(frozen=True, slots=True)
class Diamond:
    """Two incomparable admissible additions u < v (tau order) above a base ideal."""

    base: int
    u: int
    v: int

    def u_side(self) -> Path:
        return Path(self.base, (self.u, self.v))

    def v_side(self) -> Path:
        return Path(self.base, (self.v, self.u))

    def top(self) -> int:
        return self.base | 1 << self.u | 1 << self.v


@dataclass(frozen=True, slots=True)
class RewriteStep:
    diamond: Diamond
    sign: int  # +1 replaces the u-first side by the v-first side


@dataclass(frozen=True, slots=True)
class RewriteSequence:
    steps: tuple[RewriteStep, ...]

    def __len__(self) -> int:
        return len(self.steps)


class LatticeSlice:
    """Ideals reachable from ``base`` within ``depth`` additions, plus edges.

    Nodes are stored in BFS-by-cardinality order (each layer sorted by mask),
    so node indices are deterministic.  Edges exist for every node at depth
    strictly below ``depth`` and are complete there.
    """

    __slots__ = ("poset", "base", "depth", "within", "nodes", "node_index", "out_edges", "edge_list")

    def __init__(self, poset, base, depth, within, nodes, node_index, out_edges, edge_list):
        self.poset = poset
        self.base = base
        self.depth = depth
        self.within = within
        self.nodes = nodes              # list[int] masks
        self.node_index = node_index    # dict mask -> position
        self.out_edges = out_edges      # list[list[int]] additions per node (empty at max depth)
        self.edge_list = edge_list      # list[tuple[int, int]] (mask, addition)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edge_list)

    def node_depth(self, mask: int) -> int:
        return mask.bit_count() - self.base.bit_count()

    def has_node(self, mask: int) -> bool:
        return mask in self.node_index

    def require_node(self, mask: int, what: str = "ideal") -> None:
        if mask not in self.node_index:
            raise PreconditionError(
                f"{what} {{{self.poset.format_members(mask)}}} is not a node of the slice"
            )

    def edge_set(self) -> set[tuple[int, int]]:
        return set(self.edge_list)

    def top(self) -> int:
        """Union of all node masks (the top node when the slice is an interval)."""
        out = self.base
        for m in self.nodes:
            out |= m
        return out

    def is_full_interval(self) -> bool:
        """True when the node set is exactly the interval [base, top] of J(P)."""
        top = self.top()
        if top not in self.node_index:
            return False
        for mask in self.nodes:
            if mask == top:
                continue
            for a in self.poset.admissible_unchecked(mask):
                if top >> a & 1 and (mask | 1 << a) not in self.node_index:
                    return False
        return True


def build_lattice(
    poset: Poset,
    base: int,
    depth: int,
    node_cap: int = NODE_CAP_DEFAULT,
    within: int | None = None,
) -> LatticeSlice:
    """BFS the ideal lattice from ``base`` for at most ``depth`` additions.

    ``within`` restricts the explored additions to a fixed ideal, which is how
    interval slices ``[base, top]`` are built.  Fails atomically when the node
    cap is exceeded.
    """
    poset.require_ideal(base, "base")
    if depth < 0:
        raise PreconditionError("depth must be nonnegative")
    if within is not None:
        poset.require_ideal(within, "within")
        if base & ~within:
            raise PreconditionError("base must be contained in the within ideal")

    nodes: list[int] = [base]
    node_index: dict[int, int] = {base: 0}
    out_edges: list[list[int]] = []
    edge_list: list[tuple[int, int]] = []

    layer = [base]
    for d in range(depth):
        nxt: set[int] = set()
        for mask in layer:
            adds = poset.admissible_unchecked(mask)
            if within is not None:
                adds = [a for a in adds if within >> a & 1]
            out_edges.append(adds)
            for a in adds:
                edge_list.append((mask, a))
                nxt.add(mask | 1 << a)
        new = sorted(m for m in nxt if m not in node_index)
        if len(nodes) + len(new) > node_cap:
            raise CapExceeded(
                f"node cap {node_cap} exceeded at depth {d + 1}", reached=d
            )
        for m in new:
            node_index[m] = len(nodes)
            nodes.append(m)
        if not new and not nxt:
            break
        layer = sorted(nxt)
    # nodes at the truncation horizon carry no outgoing edges
    out_edges.extend([] for _ in range(len(nodes) - len(out_edges)))
    return LatticeSlice(poset, base, depth, within, nodes, node_index, out_edges, edge_list)


def reference_path(poset: Poset, start: int, end: int) -> Path:
    """The canonical path adding ``end - start`` in tau order."""
    poset.require_ideal(start, "start")
    poset.require_ideal(end, "end")
    if start & ~end:
        raise PreconditionError("start ideal is not contained in end ideal")
    additions = tuple(poset.members(end & ~start))  # members() is tau-sorted
    return Path(start, additions)


def enumerate_paths(
    lattice: LatticeSlice, start: int, end: int, enum_cap: int = ENUM_CAP_DEFAULT
) -> list[Path]:
    """All admissible paths from ``start`` to ``end`` inside the slice.

    One path per linear extension of the induced order on ``end - start``.
    """
    lattice.require_node(start, "start")
    lattice.require_node(end, "end")
    if start & ~end:
        raise PreconditionError("start ideal is not contained in end ideal")
    todo = end & ~start
    if todo.bit_count() > enum_cap:
        raise CapExceeded(
            f"interval has {todo.bit_count()} additions, exceeding the "
            f"enumeration cap of {enum_cap}"
        )
    poset = lattice.poset
    paths: list[Path] = []
    prefix: list[int] = []

    def extend(mask: int, remaining: int) -> None:
        if not remaining:
            paths.append(Path(start, tuple(prefix)))
            return
        m = remaining
        while m:
            low = m & -m
            a = low.bit_length() - 1
            m ^= low
            if poset.pred[a] & ~mask == 0:
                prefix.append(a)
                extend(mask | low, remaining ^ low)
                prefix.pop()

    extend(start, todo)
    return paths


def enumerate_diamonds(lattice: LatticeSlice) -> list[Diamond]:
    """All diamonds of the slice, ordered by node index, then u, then v."""
    poset = lattice.poset
    out: list[Diamond] = []
    max_depth = lattice.depth - 2
    for idx, mask in enumerate(lattice.nodes):
        if lattice.node_depth(mask) > max_depth:
            continue
        adds = lattice.out_edges[idx]
        for i, u in enumerate(adds):
            for v in adds[i + 1 :]:
                if poset.incomparable(u, v):
                    out.append(Diamond(mask, u, v))
    return out


def apply_swap(poset: Poset, path: Path, step: RewriteStep) -> Path:
    """Apply one diamond swap to a path, validating applicability."""
    d, sign = step.diamond, step.sign
    if sign not in (-1, 1):
        raise PreconditionError(f"sign must be +1 or -1, got {sign}")
    want = (d.u, d.v) if sign == 1 else (d.v, d.u)
    repl = (d.v, d.u) if sign == 1 else (d.u, d.v)
    mask = path.start
    for pos, a in enumerate(path.additions):
        if mask == d.base:
            if path.additions[pos : pos + 2] != want:
                raise PreconditionError(
                    "diamond swap does not match the path at its base ideal"
                )
            new = path.additions[:pos] + repl + path.additions[pos + 2 :]
            return Path(path.start, new)
        mask |= 1 << a
    raise PreconditionError("path does not visit the diamond's base ideal")


def rewrite_sequence(lattice: LatticeSlice, src: Path, dst: Path) -> RewriteSequence:
    """A diamond-swap sequence transforming ``src`` into ``dst``.

    Bubble construction: the last element of ``dst`` is moved rightward in
    ``src`` one adjacent swap at a time, then the procedure recurses on the
    prefix.  The sequence is not minimal in general; see
    :func:`min_swap_distance` for the minimum.
    """
    if src.start != dst.start or src.end != dst.end:
        raise PreconditionError("paths must share both endpoints")
    poset = lattice.poset
    cur = list(src.additions)
    # prefix_mask[i] = state before adding cur[i]
    steps: list[RewriteStep] = []
    for k in range(len(cur) - 1, 0, -1):
        e = dst.additions[k]
        p = cur.index(e)
        for q in range(p, k):
            f = cur[q + 1]
            if not poset.incomparable(e, f):
                raise PreconditionError(
                    "internal rewrite invariant violated: swapping comparable elements"
                )
            base = src.start
            for x in cur[:q]:
                base |= 1 << x
            if e < f:
                steps.append(RewriteStep(Diamond(base, e, f), 1))
            else:
                steps.append(RewriteStep(Diamond(base, f, e), -1))
            cur[q], cur[q + 1] = cur[q + 1], cur[q]
    return RewriteSequence(tuple(steps))


def min_swap_distance(lattice: LatticeSlice, src: Path, dst: Path) -> int:
    """Minimum number of diamond swaps between two same-endpoint paths.

    Equal to the inversion count between the two linear extensions: each
    adjacent swap changes the count by exactly one.
    """
    if src.start != dst.start or src.end != dst.end:
        raise PreconditionError("paths must share both endpoints")
    pos = {a: i for i, a in enumerate(dst.additions)}
    seq = [pos[a] for a in src.additions]
    inv = 0
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                inv += 1
    return inv
