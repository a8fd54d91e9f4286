import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertn.network import (
    ArgumentError,
    build_network,
    connected_pairs,
    enumerate_paths,
    find_path,
    no_triangle_check,
    reduce_schedule,
)

MU = 2 + np.sqrt(3)


@pytest.fixture(scope="module")
def nets():
    return {k: build_network(k) for k in range(4)}


def substitution_counts(layers: int) -> tuple[list[int], list[int]]:
    """Tile and boundary-leg counts from the boundary-vertex substitution rule.

    A boundary vertex touching one tile gains a closing tile on inflation;
    one touching two tiles is closed by gluing the two new neighbours.
    """
    lone, shared = 5, 0
    tiles, legs = [1], [5]
    for _ in range(layers):
        tiles.append(tiles[-1] + (lone + shared) + lone)
        lone, shared = 3 * lone + shared, 2 * lone + shared
        legs.append(lone + shared)
    return tiles, legs


def test_counts_match_substitution_oracle():
    tiles, legs = substitution_counts(6)
    for layers in range(7):
        net = build_network(layers)
        assert net.n_tiles == tiles[layers]
        assert len(net.boundary_legs) == legs[layers]


def test_growth_ratio_converges():
    _, legs = substitution_counts(6)
    assert abs(legs[6] / legs[5] - MU) < 0.05
    net5, net6 = build_network(5), build_network(6)
    assert abs(len(net6.boundary_legs) / len(net5.boundary_legs) - MU) < 0.05


def test_inflate_structure(nets):
    for net in nets.values():
        net.validate()
        assert all(len(row) == 5 for row in net.neighbors)
    two = nets[2]
    assert two.layer_counts() == [1, 10, 40]
    tiles_at = two.vertex_tiles()
    assert all(len(tiles_at[v]) == 4 for v in two.interior_vertices())
    assert nets[0].inflate().n_tiles == nets[1].n_tiles


def test_boundary_is_single_cycle(nets):
    net = nets[2]
    legs = net.boundary_legs
    assert len(set(legs)) == len(legs) == 95
    assert all(net.leg_id(s) == k for k, s in enumerate(legs))


def test_single_tile_paths(nets):
    net = nets[0]
    p = find_path(net, 0, 2)
    assert p is not None and p.tiles == (0,) and p.geodesic and len(p) == 1
    assert find_path(net, 0, 1) is None
    assert find_path(net, 4, 0) is None
    with pytest.raises(ArgumentError):
        find_path(net, 1, 1)


def test_path_invariants(nets):
    net = nets[2]
    for (a, b), count in connected_pairs(net).items():
        p = find_path(net, a, b)
        assert count == 1 and set(p.endpoints) == {a, b}
        for k, (i, o) in enumerate(p.through_slots):
            assert (o - i) % 5 in (2, 3)
            if k + 1 < len(p.tiles):
                assert net.neighbors[p.tiles[k]][o] == (p.tiles[k + 1], p.through_slots[k + 1][0])
        assert p.geodesic == (len(set(p.turns)) == 1)


def test_lemma1_exhaustive_through_three_layers(nets):
    for net in nets.values():
        pairs = connected_pairs(net)
        assert pairs and max(pairs.values()) == 1


def test_no_triangle_exhaustive(nets):
    for net in nets.values():
        v = no_triangle_check(net)
        assert v.passed
    assert no_triangle_check(nets[2], trials=2000, seed=3).passed


def test_path_reaching_deeper_tiles(nets):
    net = nets[3]
    lengths = {len(find_path(net, a, b)) for a, b in connected_pairs(net)}
    assert max(lengths) >= 5


def test_scheduler_two_marks_matches_path(nets):
    net = nets[2]
    pairs = list(connected_pairs(net))
    for a, b in pairs[::37]:
        r = reduce_schedule(net, [a, b])
        assert r.residual == frozenset(find_path(net, a, b).tiles)
        assert r.classification == "single_path"


@given(st.integers(0, 94), st.integers(0, 94))
@settings(max_examples=60, deadline=None)
def test_scheduler_completeness(a, b):
    net = build_network(2)
    if a == b:
        return
    r = reduce_schedule(net, [a, b])
    p = find_path(net, a, b)
    if p is None:
        assert r.residual == frozenset() and r.classification == "empty"
    else:
        assert r.residual == frozenset(p.tiles)
    assert set(r.schedule) | r.residual == set(range(net.n_tiles))


def test_scheduler_audit_is_sound(nets):
    net = nets[2]
    r = reduce_schedule(net, [0, 40, 70])
    removed = set()
    marked = {net.leg_slot(l) for l in (0, 40, 70)}
    for tile, slots in r.audit:
        for s in slots:
            nb = net.neighbors[tile][s]
            assert (nb is None and (tile, s) not in marked) or (nb is not None and nb[0] in removed)
        flags = [s in slots for s in range(5)]
        run = max(sum(1 for _ in g) for k, g in itertools.groupby(flags + flags) if k)
        assert run >= 3
        removed.add(tile)


def test_scheduler_three_marks_branch(nets):
    net = nets[2]
    found = 0
    pairs = connected_pairs(net)
    legs = sorted({x for p in pairs for x in p})
    for a, b, c in itertools.combinations(legs[:60], 3):
        r = reduce_schedule(net, [a, b, c])
        if r.classification == "path_plus_branch":
            found += 1
            assert r.branch_tile in r.residual
            live = [l for l in (a, b, c) if l not in r.absorbed_marks]
            assert len(live) == 3
        if found >= 5:
            break
    assert found >= 5


def test_scheduler_errors(nets):
    with pytest.raises(ArgumentError):
        reduce_schedule(nets[1], [])
    with pytest.raises(ArgumentError):
        reduce_schedule(nets[1], [3, 3])


def test_json_export(nets):
    net = nets[1]
    blob = json.loads(net.to_json())
    assert blob["layers"] == 1 and len(blob["tiles"]) == 11
    legs = [slot for t in blob["tiles"] for slot in t["adjacency"] if "leg" in slot]
    assert sorted(s["leg"] for s in legs) == list(range(25))
    lines = net.edge_list().strip().splitlines()
    assert len(lines) == 25 + (11 * 5 - 25) // 2 and all(" -- " in line for line in lines)


def test_enumerate_matches_find(nets):
    net = nets[1]
    for a in range(25):
        for b in range(25):
            if a != b:
                assert len(enumerate_paths(net, a, b)) == (find_path(net, a, b) is not None)
