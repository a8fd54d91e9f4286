"""Combinatorial {5,4} tiling grown by vertex inflation.

Tiles are oriented counter-clockwise.  Edge slot ``s`` of a tile runs from
its corner ``s`` to corner ``s + 1`` (mod 5), so a shared edge is traversed
in opposite directions by its two tiles.  A boundary leg is a free edge slot
``(tile, slot)``; legs are numbered by their position along the boundary.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

Slot = tuple[int, int]


class ArgumentError(ValueError):
    pass


class LemmaViolation(RuntimeError):
    """More than one path between two legs."""


class _Vertices:
    """Union-find over corner ids."""

    def __init__(self) -> None:
        self.parent: list[int] = []

    def new(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, v: int) -> int:
        while self.parent[v] != v:
            self.parent[v] = self.parent[self.parent[v]]
            v = self.parent[v]
        return v

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


@dataclass
class TilingNetwork:
    layer: list[int]
    neighbors: list[list[Slot | None]]
    corners: list[list[int]]
    _uf: _Vertices = field(repr=False, default_factory=_Vertices)
    _legs: list[Slot] | None = field(default=None, repr=False)

    @classmethod
    def single_tile(cls) -> "TilingNetwork":
        uf = _Vertices()
        corners = [[uf.new() for _ in range(5)]]
        return cls([0], [[None] * 5], corners, uf)

    @property
    def n_tiles(self) -> int:
        return len(self.layer)

    @property
    def n_layers(self) -> int:
        return max(self.layer)

    def corner(self, tile: int, k: int) -> int:
        return self._uf.find(self.corners[tile][k % 5])

    # boundary -----------------------------------------------------------

    def _next_free(self, t: int, s: int) -> tuple[Slot, int]:
        """Next free edge after ``(t, s)`` going around the boundary, and
        the number of tiles met at the shared corner."""
        cand, fan = (t, (s + 1) % 5), 1
        while self.neighbors[cand[0]][cand[1]] is not None:
            tn, sn = self.neighbors[cand[0]][cand[1]]
            cand, fan = (tn, (sn + 1) % 5), fan + 1
            if fan > 4:
                raise RuntimeError("corrupt tiling: vertex with more than four tiles")
        return cand, fan

    def _boundary_walk(self) -> tuple[list[Slot], list[int]]:
        free = [(t, s) for t in range(self.n_tiles) for s in range(5) if self.neighbors[t][s] is None]
        if not free:
            return [], []
        start = min(free)
        legs, fans = [start], []
        cur = start
        while True:
            nxt, fan = self._next_free(*cur)
            fans.append(fan)
            if nxt == start:
                break
            legs.append(nxt)
            cur = nxt
        if len(legs) != len(free):
            raise RuntimeError("boundary is not a single cycle")
        return legs, fans

    @property
    def boundary_legs(self) -> list[Slot]:
        if self._legs is None:
            self._legs = self._boundary_walk()[0]
        return self._legs

    def leg_id(self, slot: Slot) -> int:
        return self._leg_index()[slot]

    def _leg_index(self) -> dict[Slot, int]:
        return {s: k for k, s in enumerate(self.boundary_legs)}

    def leg_slot(self, leg: int) -> Slot:
        return self.boundary_legs[leg]

    def arc_distance(self, leg_a: int, leg_b: int) -> int:
        n = len(self.boundary_legs)
        d = abs(leg_a - leg_b) % n
        return min(d, n - d)

    # growth -------------------------------------------------------------

    def _add_tile(self, layer: int, corners: list[int]) -> int:
        self.layer.append(layer)
        self.neighbors.append([None] * 5)
        self.corners.append(corners)
        return self.n_tiles - 1

    def _glue(self, a: Slot, b: Slot) -> None:
        (ta, sa), (tb, sb) = a, b
        if self.neighbors[ta][sa] is not None or self.neighbors[tb][sb] is not None:
            raise RuntimeError("slot already glued")
        self.neighbors[ta][sa] = b
        self.neighbors[tb][sb] = a
        # edge a runs ca[sa] -> ca[sa+1]; edge b runs the other way
        self._uf.union(self.corners[ta][sa], self.corners[tb][(sb + 1) % 5])
        self._uf.union(self.corners[ta][(sa + 1) % 5], self.corners[tb][sb])

    def inflate(self) -> "TilingNetwork":
        """Return a new network with one more layer."""
        net = self.copy()
        legs, fans = net._boundary_walk()
        layer = net.n_layers + 1
        uf = net._uf
        # pass 1: one tile on every free edge, glued through its slot 0
        attached = []
        for t, s in legs:
            c = net.corners[t]
            n = net._add_tile(layer, [c[(s + 1) % 5], c[s], uf.new(), uf.new(), uf.new()])
            net._glue((n, 0), (t, s))
            attached.append(n)
        # pass 2: close each old boundary vertex (between leg k and leg k+1)
        for k, fan in enumerate(fans):
            n1, n2 = attached[k], attached[(k + 1) % len(attached)]
            if fan == 2:
                net._glue((n1, 4), (n2, 1))
            elif fan == 1:
                v = net.corners[n1][0]
                c = net._add_tile(layer, [net.corners[n2][2], v, net.corners[n1][4], uf.new(), uf.new()])
                net._glue((c, 0), (n2, 1))
                net._glue((c, 1), (n1, 4))
            else:
                raise RuntimeError(f"boundary vertex with fan {fan}")
        net._legs = None
        return net

    def copy(self) -> "TilingNetwork":
        uf = _Vertices()
        uf.parent = list(self._uf.parent)
        return TilingNetwork(list(self.layer), [list(r) for r in self.neighbors], [list(c) for c in self.corners], uf)

    # queries ------------------------------------------------------------

    def vertex_tiles(self) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for t in range(self.n_tiles):
            for k in range(5):
                out.setdefault(self.corner(t, k), set()).add(t)
        return out

    def interior_vertices(self) -> list[int]:
        """Vertices not on any boundary leg."""
        on_boundary = {self.corner(t, s) for t, s in self.boundary_legs} | {
            self.corner(t, s + 1) for t, s in self.boundary_legs
        }
        return [v for v in self.vertex_tiles() if v not in on_boundary]

    def layer_counts(self) -> list[int]:
        counts = [0] * (self.n_layers + 1)
        for l in self.layer:
            counts[l] += 1
        return counts

    def validate(self) -> None:
        for t in range(self.n_tiles):
            for s in range(5):
                nb = self.neighbors[t][s]
                if nb is not None and self.neighbors[nb[0]][nb[1]] != (t, s):
                    raise RuntimeError(f"asymmetric adjacency at {(t, s)}")
        tiles_at = self.vertex_tiles()
        if any(len(v) > 4 for v in tiles_at.values()):
            raise RuntimeError("vertex with more than four tiles")
        if any(len(tiles_at[v]) != 4 for v in self.interior_vertices()):
            raise RuntimeError("interior vertex not closed by four tiles")
        if self.layer.count(0) != 1:
            raise RuntimeError("layer 0 must be a single tile")
        self._boundary_walk()

    def subnetwork(self, tiles: Iterable[int]) -> "TilingNetwork":
        """Induced network on ``tiles`` (renumbered in the given order)."""
        tiles = list(tiles)
        index = {t: k for k, t in enumerate(tiles)}
        base = min(self.layer[t] for t in tiles)
        neighbors = [
            [
                (index[nb[0]], nb[1]) if nb is not None and nb[0] in index else None
                for nb in self.neighbors[t]
            ]
            for t in tiles
        ]
        corners = [[self.corner(t, k) for k in range(5)] for t in tiles]
        return TilingNetwork([self.layer[t] - base for t in tiles], neighbors, corners, self._uf_copy())

    def _uf_copy(self) -> _Vertices:
        uf = _Vertices()
        uf.parent = list(self._uf.parent)
        return uf

    # export -------------------------------------------------------------

    def to_dict(self) -> dict:
        legs = self._leg_index()
        tiles = []
        for t in range(self.n_tiles):
            adj = []
            for s, nb in enumerate(self.neighbors[t]):
                adj.append({"tile": nb[0], "slot": nb[1]} if nb is not None else {"leg": legs[(t, s)]})
            tiles.append({"id": t, "layer": self.layer[t], "adjacency": adj, "vertices": [self.corner(t, k) for k in range(5)]})
        return {
            "layers": self.n_layers,
            "tiles": tiles,
            "boundary_legs": [list(s) for s in self.boundary_legs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def edge_list(self) -> str:
        lines = []
        for t in range(self.n_tiles):
            for s, nb in enumerate(self.neighbors[t]):
                if nb is None:
                    lines.append(f"t{t} -- leg{self.leg_id((t, s))}")
                elif (t, s) < nb:
                    lines.append(f"t{t} -- t{nb[0]}")
        return "\n".join(lines) + "\n"


def build_network(layers: int) -> TilingNetwork:
    """Central tile plus ``layers`` inflation steps."""
    net = TilingNetwork.single_tile()
    for _ in range(layers):
        net = net.inflate()
    return net


# paths ------------------------------------------------------------------

TURN_NAMES = {2: "right", 3: "left"}


@dataclass(frozen=True)
class PathDescriptor:
    tiles: tuple[int, ...]
    through_slots: tuple[tuple[int, int], ...]
    endpoints: tuple[int, int]
    turns: tuple[str, ...]

    @property
    def geodesic(self) -> bool:
        return len(set(self.turns)) <= 1

    def __len__(self) -> int:
        return len(self.tiles)


def _walks_from(net: TilingNetwork, start: Slot) -> Iterable[tuple[list[int], list[tuple[int, int]], Slot]]:
    """All self-avoiding through-walks entering at boundary slot ``start``.

    Each yielded walk ends on a boundary slot.
    """
    stack = [(start[0], start[1], [start[0]], [])]
    while stack:
        t, entry, tiles, slots = stack.pop()
        for off in (3, 2):
            out = (entry + off) % 5
            hop = slots + [(entry, out)]
            nb = net.neighbors[t][out]
            if nb is None:
                yield tiles, hop, (t, out)
            elif nb[0] not in tiles:
                stack.append((nb[0], nb[1], tiles + [nb[0]], hop))


def _is_valid_path(net: TilingNetwork, tiles: list[int], ends: tuple[Slot, Slot]) -> bool:
    members = set(tiles)
    for t in tiles:
        count = 0
        for s, nb in enumerate(net.neighbors[t]):
            if nb is None:
                count += (t, s) in ends
            else:
                count += nb[0] in members
        if count != 2:
            return False
    return True


def _descriptor(net: TilingNetwork, tiles, slots, a: Slot, b: Slot) -> PathDescriptor:
    turns = tuple(TURN_NAMES[(o - i) % 5] for i, o in slots)
    return PathDescriptor(tuple(tiles), tuple(slots), (net.leg_id(a), net.leg_id(b)), turns)


def paths_from(net: TilingNetwork, leg: int) -> dict[int, list[PathDescriptor]]:
    """Valid paths from ``leg`` grouped by their other endpoint."""
    a = net.leg_slot(leg)
    out: dict[int, list[PathDescriptor]] = {}
    for tiles, slots, end in _walks_from(net, a):
        if end == a or not _is_valid_path(net, tiles, (a, end)):
            continue
        d = _descriptor(net, tiles, slots, a, end)
        out.setdefault(d.endpoints[1], []).append(d)
    return out


def enumerate_paths(net: TilingNetwork, leg_a: int, leg_b: int) -> list[PathDescriptor]:
    return paths_from(net, leg_a).get(leg_b, [])


def find_path(net: TilingNetwork, leg_a: int, leg_b: int) -> PathDescriptor | None:
    if leg_a == leg_b:
        raise ArgumentError("path endpoints must be distinct legs")
    found = enumerate_paths(net, leg_a, leg_b)
    if len(found) > 1:
        raise LemmaViolation(f"{len(found)} paths between legs {leg_a} and {leg_b}")
    return found[0] if found else None


def connected_pairs(net: TilingNetwork) -> dict[tuple[int, int], int]:
    """Number of valid paths for every leg pair that has at least one."""
    out: dict[tuple[int, int], int] = {}
    for a in range(len(net.boundary_legs)):
        for b, paths in paths_from(net, a).items():
            out[(min(a, b), max(a, b))] = len(paths)
    return out


@dataclass(frozen=True)
class TriangleVerdict:
    triples_checked: int
    counterexample: tuple[int, int, int] | None

    @property
    def passed(self) -> bool:
        return self.counterexample is None


def no_triangle_check(net: TilingNetwork, trials: int | None = None, seed: int = 0) -> TriangleVerdict:
    """Look for three legs that are pairwise joined by paths.

    ``trials=None`` is exhaustive over all triples; the search only needs the
    graph of connected pairs, so it enumerates its triangles directly.
    """
    pairs = connected_pairs(net)
    adj: dict[int, set[int]] = {}
    for a, b in pairs:
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    n = len(net.boundary_legs)
    if trials is None:
        checked = n * (n - 1) * (n - 2) // 6
        for a, b in pairs:
            common = adj[a] & adj[b]
            if common:
                return TriangleVerdict(checked, tuple(sorted((a, b, min(common)))))
        return TriangleVerdict(checked, None)
    import random

    rng = random.Random(seed)
    for _ in range(trials):
        a, b, c = rng.sample(range(n), 3)
        if b in adj.get(a, ()) and c in adj.get(a, ()) and c in adj.get(b, ()):
            return TriangleVerdict(trials, tuple(sorted((a, b, c))))
    return TriangleVerdict(trials, None)


# reduction scheduler ------------------------------------------------------

CLASSES = ("empty", "single_path", "path_plus_branch", "contains_clique", "composite")


@dataclass(frozen=True)
class ReductionResult:
    schedule: tuple[int, ...]
    residual: frozenset[int]
    classification: str
    branch_tile: int | None
    absorbed_marks: tuple[int, ...]
    audit: tuple[tuple[int, tuple[int, ...]], ...]


def _longest_cyclic_run(flags: list[bool]) -> int:
    if all(flags):
        return 5
    best = run = 0
    for f in flags + flags:
        run = run + 1 if f else 0
        best = max(best, run)
    return min(best, 5)


def reduce_schedule(net: TilingNetwork, marked_legs: list[int]) -> ReductionResult:
    """Remove tiles that have three or more cyclically adjacent resolved slots.

    A slot is resolved when it is an unmarked boundary leg or faces a tile
    that was already removed.  Marked legs stay unresolved.  A tile carrying a
    marked leg can still be removed when it qualifies on slot count; its
    probe is then traced out (the correlator factorizes) and the mark is
    reported in ``absorbed_marks``.
    """
    if len(marked_legs) < 1:
        raise ArgumentError("at least one marked leg is required")
    if len(set(marked_legs)) != len(marked_legs):
        raise ArgumentError("marked legs must be distinct")
    marked = {net.leg_slot(l) for l in marked_legs}
    removed: set[int] = set()

    def resolved(t: int) -> list[bool]:
        flags = []
        for s, nb in enumerate(net.neighbors[t]):
            if nb is None:
                flags.append((t, s) not in marked)
            else:
                flags.append(nb[0] in removed)
        return flags

    schedule, audit = [], []
    queue = deque(range(net.n_tiles))
    queued = set(queue)
    while queue:
        t = queue.popleft()
        queued.discard(t)
        if t in removed:
            continue
        flags = resolved(t)
        if _longest_cyclic_run(flags) >= 3:
            removed.add(t)
            schedule.append(t)
            audit.append((t, tuple(s for s, f in enumerate(flags) if f)))
            for nb in net.neighbors[t]:
                if nb is not None and nb[0] not in removed and nb[0] not in queued:
                    queue.append(nb[0])
                    queued.add(nb[0])
    residual = frozenset(range(net.n_tiles)) - removed
    absorbed = tuple(sorted(l for l in marked_legs if net.leg_slot(l)[0] in removed))
    cls, branch = _classify(net, residual, [l for l in marked_legs if l not in absorbed])
    return ReductionResult(tuple(schedule), residual, cls, branch, absorbed, tuple(audit))


def _classify(net: TilingNetwork, residual: frozenset[int], live_marks: list[int]) -> tuple[str, int | None]:
    if not residual:
        return "empty", None
    # residual graph: tiles joined through unresolved internal edges
    edges = set()
    degree = {t: 0 for t in residual}
    for t in residual:
        for nb in net.neighbors[t]:
            if nb is not None and nb[0] in residual:
                edges.add((min(t, nb[0]), max(t, nb[0])))
    marks_at = {t: 0 for t in residual}
    for l in live_marks:
        marks_at[net.leg_slot(l)[0]] += 1
    for a, b in edges:
        degree[a] += 1
        degree[b] += 1
    # connected components
    comp, seen = [], set()
    for t in residual:
        if t in seen:
            continue
        stack, members = [t], set()
        while stack:
            u = stack.pop()
            if u in members:
                continue
            members.add(u)
            for nb in net.neighbors[u]:
                if nb is not None and nb[0] in residual and nb[0] not in members:
                    stack.append(nb[0])
        comp.append(members)
        seen |= members
    if len(edges) > len(residual) - len(comp):
        return "contains_clique", None
    if len(comp) > 1:
        return "composite", None
    total = {t: degree[t] + marks_at[t] for t in residual}
    branch = [t for t in residual if total[t] >= 3]
    if len(live_marks) == 2 and not branch:
        return "single_path", None
    if len(live_marks) == 3 and len(branch) == 1 and total[branch[0]] == 3:
        return "path_plus_branch", branch[0]
    return "composite", None
