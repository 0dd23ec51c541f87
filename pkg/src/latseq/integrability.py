"""Cube consistency and gauge-fixed reconstruction of edge fields.

A diamond field is realizable as the curvature of some edge field iff its
alternating sum over the six faces of every three-cube vanishes.  The
realizing field is unique once the edges of the reference tree (each node to
its tau-maximal-addition parent) are pinned; with the zero gauge on the tree
the remaining edges follow by a recursion that peels tau-maximal elements.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import PreconditionError
from .lattice import Diamond, LatticeSlice
from .valuation import DiamondField, EdgeField, Potential, TOL_DEFAULT


@dataclass(frozen=True, slots=True)
class ThreeCube:
    """Three pairwise-incomparable admissible additions u < v < w over a base."""

    base: int
    u: int
    v: int
    w: int

    def faces(self) -> tuple[tuple[Diamond, int], ...]:
        """The six 2-faces with their signs in the consistency sum.

        Each pair is (bottom face, top face) for the coordinate left out; the
        pair's sign alternates with the omitted coordinate's position, which
        is what makes the sum telescope to zero for curvature fields.
        """
        b, u, v, w = self.base, self.u, self.v, self.w
        return (
            (Diamond(b, u, v), 1),
            (Diamond(b | 1 << w, u, v), -1),
            (Diamond(b, u, w), -1),
            (Diamond(b | 1 << v, u, w), 1),
            (Diamond(b, v, w), 1),
            (Diamond(b | 1 << u, v, w), -1),
        )


@dataclass(frozen=True, slots=True)
class ReferenceTree:
    """Spanning tree of the slice: each non-root node hangs off its parent
    obtained by removing the tau-maximal addition."""

    root: int
    parent: dict[int, int]
    removed: dict[int, int]  # node -> the element whose removal gives the parent


@dataclass(frozen=True, slots=True)
class GaugeSystem:
    """Prescribed values for the reference-tree edges, keyed by the child node."""

    alpha: dict[int, float]

    def __getitem__(self, mask: int) -> float:
        return self.alpha[mask]


@dataclass(frozen=True, slots=True)
class CubeVerdict:
    consistent: bool
    witness: ThreeCube | None = None
    defect: float | None = None


def enumerate_cubes(lattice: LatticeSlice) -> list[ThreeCube]:
    """All three-cubes with full depth headroom, in (node, u, v, w) order."""
    poset = lattice.poset
    out: list[ThreeCube] = []
    max_depth = lattice.depth - 3
    for idx, mask in enumerate(lattice.nodes):
        if lattice.node_depth(mask) > max_depth:
            continue
        adds = lattice.out_edges[idx]
        m = len(adds)
        for i in range(m):
            for j in range(i + 1, m):
                if not poset.incomparable(adds[i], adds[j]):
                    continue
                for k in range(j + 1, m):
                    if poset.incomparable(adds[i], adds[k]) and poset.incomparable(
                        adds[j], adds[k]
                    ):
                        out.append(ThreeCube(mask, adds[i], adds[j], adds[k]))
    return out


def cube_defect(kappa: DiamondField, cube: ThreeCube) -> float:
    """Alternating six-face sum; zero for curvature fields (Bianchi)."""
    return sum(sign * kappa[d] for d, sign in cube.faces())


def is_cube_consistent(
    kappa: DiamondField, lattice: LatticeSlice, tol: float = TOL_DEFAULT
) -> CubeVerdict:
    for cube in enumerate_cubes(lattice):
        defect = cube_defect(kappa, cube)
        if abs(defect) > tol:
            return CubeVerdict(False, cube, defect)
    return CubeVerdict(True)


def _tau_max_addition(lattice: LatticeSlice, mask: int) -> int:
    added = mask & ~lattice.base
    if not added:
        raise PreconditionError("the root has no tau-maximal addition")
    return added.bit_length() - 1


def reference_tree(lattice: LatticeSlice) -> ReferenceTree:
    """The spanning tree dropping each node's tau-maximal addition.

    Rejects ragged slices: every node's parent must itself be a slice node
    (always true for slices produced by :func:`latseq.lattice.build_lattice`).
    """
    parent: dict[int, int] = {}
    removed: dict[int, int] = {}
    for mask in lattice.nodes:
        if mask == lattice.base:
            continue
        m = _tau_max_addition(lattice, mask)
        p = mask & ~(1 << m)
        if p not in lattice.node_index:
            raise PreconditionError(
                f"slice is ragged: parent of {{{lattice.poset.format_members(mask)}}} "
                "is not a slice node"
            )
        parent[mask] = p
        removed[mask] = m
    return ReferenceTree(lattice.base, parent, removed)


def gauge_of(g: EdgeField, lattice: LatticeSlice) -> GaugeSystem:
    """Read the reference-tree edge values off an existing field."""
    tree = reference_tree(lattice)
    return GaugeSystem(
        {mask: g[(tree.parent[mask], tree.removed[mask])] for mask in tree.parent}
    )


def zero_gauge_reconstruct(
    kappa: DiamondField, lattice: LatticeSlice, tol: float = TOL_DEFAULT
) -> EdgeField:
    """The unique curvature-``kappa`` field vanishing on reference-tree edges.

    Edges are filled in increasing order of ``delta(I, a)``, the number of
    additions in ``I`` beyond the base that follow ``a`` in tau; ``delta = 0``
    edges are tree edges and get 0, and each ``delta >= 1`` edge reduces to its
    peeled parent edge plus one diamond value.
    """
    verdict = is_cube_consistent(kappa, lattice, tol)
    if not verdict.consistent:
        c = verdict.witness
        raise PreconditionError(
            f"diamond field is not cube-consistent: defect {verdict.defect!r} on "
            f"cube ({lattice.poset.format_members(c.base)}; "
            f"{lattice.poset.ids[c.u]}, {lattice.poset.ids[c.v]}, {lattice.poset.ids[c.w]})"
        )
    base = lattice.base
    ranked: list[tuple[int, int, int]] = []
    for mask, a in lattice.edge_list:
        later = (mask & ~base) >> (a + 1)
        ranked.append((later.bit_count(), mask, a))
    ranked.sort(key=lambda t: t[0])
    values: dict[tuple[int, int], float] = {}
    for delta, mask, a in ranked:
        if delta == 0:
            values[(mask, a)] = 0
            continue
        b = _tau_max_addition(lattice, mask)
        peeled = mask & ~(1 << b)
        if (peeled, a) not in values:
            raise PreconditionError(
                "slice is ragged: reconstruction needs edge "
                f"({{{lattice.poset.format_members(peeled)}}}, {lattice.poset.ids[a]})"
            )
        values[(mask, a)] = values[(peeled, a)] + kappa[Diamond(peeled, a, b)]
    return EdgeField(values, kappa.context)


def tree_integrate(alpha: GaugeSystem, tree: ReferenceTree) -> Potential:
    """The unique node potential with root value 0 and tree-edge gaps ``alpha``."""
    values: dict[int, float] = {tree.root: 0.0}

    def resolve(mask: int) -> float:
        chain = []
        m = mask
        while m not in values:
            chain.append(m)
            m = tree.parent[m]
        acc = values[m]
        for node in reversed(chain):
            acc = acc + alpha[node]
            values[node] = acc
        return acc

    for mask in tree.parent:
        resolve(mask)
    return Potential(values)


def gradient_shift(g: EdgeField, psi: Potential) -> EdgeField:
    """Shift every edge by the potential gap of its endpoints; curvature is unchanged."""
    values = {
        (mask, a): val + psi[mask | 1 << a] - psi[mask]
        for (mask, a), val in g.values.items()
    }
    return EdgeField(values, g.context)


def reconstruct_with_gauge(
    kappa: DiamondField,
    alpha: GaugeSystem,
    lattice: LatticeSlice,
    tol: float = TOL_DEFAULT,
) -> EdgeField:
    """The unique field with curvature ``kappa`` and tree-edge values ``alpha``."""
    g0 = zero_gauge_reconstruct(kappa, lattice, tol)
    tree = reference_tree(lattice)
    missing = [m for m in tree.parent if m not in alpha.alpha]
    if missing:
        raise PreconditionError(
            f"gauge system is missing {len(missing)} tree edge value(s)"
        )
    psi = tree_integrate(alpha, tree)
    return gradient_shift(g0, psi)
