"""Finite posets with a fixed linear extension, and their order ideals.

Elements are re-indexed so that index order *is* the fixed total order tau;
``u < v`` on indices therefore means "u precedes v in tau".  Ideals are plain
``int`` bitmasks over these indices, which keeps the lattice machinery fast
and hashable.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass

from .errors import InputError, PreconditionError

MAX_ELEMENTS_DEFAULT = 128

_ID_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


@dataclass(frozen=True, slots=True)
class Poset:
    """Strict partial order on a finite set, indexed in tau order.

    ``ids[i]`` is the element at tau position ``i``.  ``pred[i]`` / ``succ[i]``
    are bitmasks of strict predecessors / successors (transitively closed);
    ``covers`` holds the cover pairs as (lower, upper) index tuples.
    """

    ids: tuple[str, ...]
    covers: frozenset[tuple[int, int]]
    pred: tuple[int, ...]
    succ: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1

    def index(self, element_id: str) -> int:
        try:
            return self.ids.index(element_id)
        except ValueError:
            raise InputError(f"unknown element id {element_id!r}") from None

    def less(self, u: int, v: int) -> bool:
        """Strict order u < v (tau-compatible by construction)."""
        return bool(self.pred[v] >> u & 1)

    def incomparable(self, u: int, v: int) -> bool:
        return u != v and not self.less(u, v) and not self.less(v, u)

    def is_ideal(self, mask: int) -> bool:
        """A set is an ideal when it contains all predecessors of its members."""
        m = mask
        while m:
            low = m & -m
            if self.pred[low.bit_length() - 1] & ~mask:
                return False
            m ^= low
        return True

    def require_ideal(self, mask: int, what: str = "set") -> None:
        if mask < 0 or mask > self.full_mask:
            raise PreconditionError(f"{what} is not a subset of the ground set")
        if not self.is_ideal(mask):
            raise PreconditionError(
                f"{what} {{{self.format_members(mask)}}} is not downward closed"
            )

    def admissible_additions(self, ideal: int) -> list[int]:
        """Elements outside the ideal whose predecessors all lie inside.

        Returned in tau order.  Raises if ``ideal`` is not downward closed.
        """
        self.require_ideal(ideal, "ideal")
        out = []
        for a in range(self.n):
            if ideal >> a & 1:
                continue
            if self.pred[a] & ~ideal == 0:
                out.append(a)
        return out

    def admissible_unchecked(self, ideal: int) -> list[int]:
        """Like :meth:`admissible_additions` but skips the ideal check."""
        return [
            a
            for a in range(self.n)
            if not ideal >> a & 1 and self.pred[a] & ~ideal == 0
        ]

    def mask_of(self, element_ids) -> int:
        mask = 0
        for eid in element_ids:
            mask |= 1 << self.index(eid)
        return mask

    def members(self, mask: int) -> list[int]:
        return [i for i in range(self.n) if mask >> i & 1]

    def format_members(self, mask: int) -> str:
        """Render a subset as ``a+b+c`` with ids sorted lexicographically, ``-`` if empty."""
        names = sorted(self.ids[i] for i in self.members(mask))
        return "+".join(names) if names else "-"

    def parse_subset(self, text: str) -> int:
        """Inverse of :meth:`format_members`."""
        text = text.strip()
        if text in ("", "-"):
            return 0
        return self.mask_of(part for part in text.split("+") if part)


def _toposort_lex(ids: list[str], pred_ids: dict[str, set[str]]) -> list[str]:
    """Topological order with the lexicographically smallest id first on ties."""
    succ: dict[str, set[str]] = {i: set() for i in ids}
    indeg = {i: 0 for i in ids}
    for v, ps in pred_ids.items():
        for u in ps:
            succ[u].add(v)
            indeg[v] += 1
    heap = [i for i in ids if indeg[i] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        u = heapq.heappop(heap)
        order.append(u)
        for v in sorted(succ[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(heap, v)
    if len(order) != len(ids):
        raise InputError("cycle detected in cover relation")
    return order


def make_poset(
    element_ids,
    cover_id_pairs,
    tau_ids=None,
    max_elements: int = MAX_ELEMENTS_DEFAULT,
) -> Poset:
    """Build a :class:`Poset` from element ids and cover pairs.

    ``tau_ids``, when given, must be a linear extension of the transitive
    closure; otherwise tau defaults to the topological order breaking ties by
    smallest id.
    """
    ids_in = list(element_ids)
    if len(set(ids_in)) != len(ids_in):
        dupes = sorted({i for i in ids_in if ids_in.count(i) > 1})
        raise InputError(f"duplicate element id(s): {', '.join(dupes)}")
    if len(ids_in) > max_elements:
        raise InputError(
            f"poset has {len(ids_in)} elements, exceeding the cap of {max_elements}"
        )
    known = set(ids_in)
    pred_direct: dict[str, set[str]] = {i: set() for i in ids_in}
    for lo, hi in cover_id_pairs:
        if lo not in known or hi not in known:
            missing = lo if lo not in known else hi
            raise InputError(f"cover references unknown element {missing!r}")
        if lo == hi:
            raise InputError(f"cover ({lo!r}, {hi!r}) relates an element to itself")
        pred_direct[hi].add(lo)

    order = _toposort_lex(ids_in, pred_direct)  # also rejects cycles

    if tau_ids is not None:
        tau = list(tau_ids)
        if sorted(tau) != sorted(ids_in):
            raise InputError("tau must be a permutation of the element ids")
        order = tau

    pos = {eid: k for k, eid in enumerate(order)}
    n = len(order)

    # Transitive closure over indices, processed in topological attempt order.
    pred = [0] * n
    for eid in _toposort_lex(ids_in, pred_direct):
        k = pos[eid]
        for p in pred_direct[eid]:
            pred[k] |= pred[pos[p]] | (1 << pos[p])

    for v in range(n):
        if pred[v] >> v & 1:
            raise InputError("cycle detected in cover relation")
        # tau must extend the order: every predecessor index below v
        if pred[v] >> v:
            bad = (pred[v] >> v).bit_length() - 1 + v
            raise InputError(
                f"tau is not a linear extension: {order[bad]!r} precedes "
                f"{order[v]!r} in the order but not in tau"
            )

    succ = [0] * n
    for v in range(n):
        m = pred[v]
        while m:
            low = m & -m
            succ[low.bit_length() - 1] |= 1 << v
            m ^= low

    covers = frozenset((pos[lo], pos[hi]) for hi, los in pred_direct.items() for lo in los)
    return Poset(tuple(order), covers, tuple(pred), tuple(succ))


def parse_poset(text: str, max_elements: int = MAX_ELEMENTS_DEFAULT) -> Poset:
    """Parse the poset file format.

    Lines are ``elem <id>``, ``cover <lo> <hi>``, and optionally
    ``tau <id1> <id2> ...``; ``#`` starts a comment.  Ids match
    ``[A-Za-z0-9_.-]+``.
    """
    elems: list[str] = []
    covers: list[tuple[str, str]] = []
    tau: list[str] | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind, args = parts[0], parts[1:]
        if kind == "elem":
            if len(args) != 1:
                raise InputError(f"line {lineno}: elem takes exactly one id")
            _check_id(args[0], lineno)
            elems.append(args[0])
        elif kind == "cover":
            if len(args) != 2:
                raise InputError(f"line {lineno}: cover takes exactly two ids")
            for a in args:
                _check_id(a, lineno)
            covers.append((args[0], args[1]))
        elif kind == "tau":
            if tau is not None:
                raise InputError(f"line {lineno}: duplicate tau line")
            for a in args:
                _check_id(a, lineno)
            tau = list(args)
        else:
            raise InputError(f"line {lineno}: unknown directive {kind!r}")
    if not elems:
        raise InputError("poset file declares no elements")
    return make_poset(elems, covers, tau, max_elements=max_elements)


def _check_id(token: str, lineno: int) -> None:
    if not _ID_RE.match(token):
        raise InputError(f"line {lineno}: invalid id {token!r}")
