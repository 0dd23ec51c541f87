"""Edge-additive path valuations and their local-to-global calculus.

An edge field assigns a real value to every admissible edge of a slice; path
values are edge sums.  Diamond curvature measures the value gap between the
two sides of a diamond; zero curvature is exactly path-independence, in which
case values come from an endpoint potential with a Moebius parameterization
over sub-ideals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import PreconditionError
from .lattice import (
    Diamond,
    LatticeSlice,
    Path,
    RewriteSequence,
    enumerate_diamonds,
    reference_path,
    rewrite_sequence,
)

TOL_DEFAULT = 1e-9


@dataclass(frozen=True, slots=True)
class EdgeField:
    """A value per admissible edge ``(ideal, addition)`` of a slice."""

    values: dict[tuple[int, int], float]
    context: str = ""

    def __getitem__(self, edge: tuple[int, int]) -> float:
        try:
            return self.values[edge]
        except KeyError:
            raise PreconditionError(f"edge {edge} missing from edge field") from None


def make_edge_field(
    lattice: LatticeSlice, values: dict[tuple[int, int], float], context: str = ""
) -> EdgeField:
    """Build an edge field, checking the domain is exactly the slice's edges."""
    expected = lattice.edge_set()
    got = set(values)
    if got != expected:
        missing = len(expected - got)
        extra = len(got - expected)
        raise PreconditionError(
            f"edge field domain mismatch: {missing} slice edge(s) missing, "
            f"{extra} unknown edge(s) present"
        )
    return EdgeField(dict(values), context)


def constant_edge_field(lattice: LatticeSlice, value: float = 0.0, context: str = "") -> EdgeField:
    return EdgeField({e: value for e in lattice.edge_list}, context)


@dataclass(frozen=True, slots=True)
class DiamondField:
    """A value per diamond of a slice."""

    values: dict[Diamond, float]
    context: str = ""

    def __getitem__(self, d: Diamond) -> float:
        try:
            return self.values[d]
        except KeyError:
            raise PreconditionError(f"diamond {d} missing from diamond field") from None


@dataclass(frozen=True, slots=True)
class Potential:
    """A value per slice node, gauge-anchored at the base."""

    values: dict[int, float]

    def __getitem__(self, mask: int) -> float:
        try:
            return self.values[mask]
        except KeyError:
            raise PreconditionError(f"node {mask} missing from potential") from None


@dataclass(frozen=True, slots=True)
class ThetaSystem:
    """Moebius coefficients: one value per slice node."""

    values: dict[int, float]

    def __getitem__(self, mask: int) -> float:
        return self.values[mask]


@dataclass(frozen=True, slots=True)
class IndependenceVerdict:
    independent: bool
    witness: Diamond | None = None
    curvature: float | None = None


@dataclass(frozen=True, slots=True)
class Decomposition:
    """Reference score plus signed curvature corrections for one path."""

    ref_score: float
    rewrite: RewriteSequence
    corrections: tuple[tuple[Diamond, int, float], ...] = field(default=())

    @property
    def total(self) -> float:
        return self.ref_score + sum(s * k for _, s, k in self.corrections)


def path_value(g: EdgeField, path: Path) -> float:
    """Sum of the field over the path's edges; the empty path has value 0."""
    return sum(g[e] for e in path.edges())


def curvature(g: EdgeField, d: Diamond) -> float:
    """Value of the v-first side minus the u-first side of the diamond."""
    top_u = d.base | 1 << d.u
    top_v = d.base | 1 << d.v
    return g[(d.base, d.v)] + g[(top_v, d.u)] - g[(d.base, d.u)] - g[(top_u, d.v)]


def curvature_field(g: EdgeField, lattice: LatticeSlice) -> DiamondField:
    return DiamondField(
        {d: curvature(g, d) for d in enumerate_diamonds(lattice)}, g.context
    )


def check_path_independence(
    g: EdgeField, lattice: LatticeSlice, tol: float = TOL_DEFAULT
) -> IndependenceVerdict:
    """Zero curvature everywhere (within tol) iff path values are endpoint-only."""
    for d in enumerate_diamonds(lattice):
        k = curvature(g, d)
        if abs(k) > tol:
            return IndependenceVerdict(False, d, k)
    return IndependenceVerdict(True)


def endpoint_potential(
    g: EdgeField, lattice: LatticeSlice, tol: float = TOL_DEFAULT
) -> Potential:
    """The node potential of a curvature-free field, anchored at 0 on the base.

    The potential of a node is the value of any admissible path from the base;
    with zero curvature this is well-defined.
    """
    verdict = check_path_independence(g, lattice, tol)
    if not verdict.independent:
        d = verdict.witness
        raise PreconditionError(
            f"field has nonzero curvature {verdict.curvature!r} on diamond "
            f"({lattice.poset.format_members(d.base)}; {lattice.poset.ids[d.u]}, "
            f"{lattice.poset.ids[d.v]})"
        )
    values: dict[int, float] = {lattice.base: 0.0}
    for idx, mask in enumerate(lattice.nodes):  # BFS order: parents precede children
        phi = values[mask]
        for a in lattice.out_edges[idx]:
            child = mask | 1 << a
            if child not in values:
                values[child] = phi + g[(mask, a)]
    return Potential(values)


def mobius_function(lattice: LatticeSlice) -> dict[tuple[int, int], int]:
    """The Moebius function on stored comparable node pairs, as ``(K, I) -> mu``.

    Computed by the defining recursion ``mu(K, K) = 1`` and
    ``mu(K, I) = -sum(mu(K, L) for K <= L < I)``.  On a full interval slice
    this is the Moebius function of the ideal lattice; on truncated slices the
    recursion runs over stored nodes only.
    """
    nodes = sorted(lattice.nodes, key=lambda m: (m.bit_count(), m))
    table: dict[tuple[int, int], int] = {}
    for ki, k_mask in enumerate(nodes):
        supersets = [m for m in nodes[ki:] if m & k_mask == k_mask]
        supersets.sort(key=lambda m: (m.bit_count(), m))
        for i_mask in supersets:
            if i_mask == k_mask:
                table[(k_mask, i_mask)] = 1
                continue
            acc = 0
            for l_mask in supersets:
                if l_mask == i_mask:
                    break
                if l_mask & ~i_mask == 0:
                    acc += table[(k_mask, l_mask)]
            table[(k_mask, i_mask)] = -acc
    return table


def mobius_invert(phi: Potential, lattice: LatticeSlice) -> ThetaSystem:
    """Recover the sub-ideal coefficients: ``theta(I) = sum mu(K, I) phi(K)``.

    Requires a full interval slice so every sub-ideal sum is in-domain; the
    forward sum ``sum(theta(K) for K <= I)`` then reproduces ``phi``.
    """
    if not lattice.is_full_interval():
        raise PreconditionError(
            "Moebius inversion requires a full interval slice [base, top]"
        )
    missing = [m for m in lattice.nodes if m not in phi.values]
    if missing:
        raise PreconditionError("potential is not total on the slice nodes")
    mu = mobius_function(lattice)
    theta: dict[int, float] = {}
    for i_mask in lattice.nodes:
        acc = 0.0
        for k_mask in lattice.nodes:
            if k_mask & ~i_mask == 0:
                m = mu[(k_mask, i_mask)]
                if m:
                    acc += m * phi.values[k_mask]
        theta[i_mask] = acc
    return ThetaSystem(theta)


def mobius_forward(theta: ThetaSystem, lattice: LatticeSlice) -> Potential:
    """Zeta transform: ``phi(I) = sum(theta(K) for base <= K <= I)``."""
    values = {}
    for i_mask in lattice.nodes:
        values[i_mask] = sum(
            t for k_mask, t in theta.values.items() if k_mask & ~i_mask == 0
        )
    return Potential(values)


def reference_score(g: EdgeField, poset, start: int, end: int) -> float:
    """Value of the tau-sorted reference path from start to end."""
    return path_value(g, reference_path(poset, start, end))


def decompose(g: EdgeField, lattice: LatticeSlice, path: Path) -> Decomposition:
    """Express a path value as reference score plus signed curvature corrections."""
    ref = reference_path(lattice.poset, path.start, path.end)
    seq = rewrite_sequence(lattice, ref, path)
    corrections = tuple(
        (st.diamond, st.sign, curvature(g, st.diamond)) for st in seq.steps
    )
    return Decomposition(path_value(g, ref), seq, corrections)
