import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tierpart.core import build_hypergraph
from tierpart.designgen import (CoreSpec, GenConfig, TopologySpec, core_tiles, generate, generate_raw,
                                insert_buffers, load_gen_config, mesh_net_count, mesh_targets,
                                serial_net_count)
from tierpart.exceptions import DomainError
from tierpart.ingest import dumps_native, strip_buffer_tree


def small_core(**kw):
    base = dict(cells_per_core=20, bus_width=4, internal_net_count=15, rng_seed=1)
    base.update(kw)
    return CoreSpec(**base)


def bus_nets(design):
    return [n for n in design.nets if n.name.startswith("bus_")]


def core_of(design, cell_id):
    return int(design.cells[cell_id].name[1:].split("_")[0])


def test_serial_three_cores():
    d = generate(small_core(bus_width=4), TopologySpec(grid=(1, 3), wiring="serial", core_pitch=50))
    buses = bus_nets(d)
    assert len(buses) == 8 == serial_net_count(3, 4)
    for n in buses:
        assert core_of(d, n.pins[1]) == core_of(d, n.pins[0]) + 1


def test_mesh_four_cores():
    d = generate(small_core(bus_width=9), TopologySpec(grid=(2, 2), wiring="full_mesh", core_pitch=50))
    buses = bus_nets(d)
    assert len(buses) == 36 == mesh_net_count(4, 9)
    pairs = {}
    for n in buses:
        key = (core_of(d, n.pins[0]), core_of(d, n.pins[1]))
        pairs[key] = pairs.get(key, 0) + 1
    assert len(pairs) == 12 and set(pairs.values()) == {3}


def test_mesh_sixteen_cores_one_wire_each():
    targets = [mesh_targets(n, 16, 15) for n in range(16)]
    for n, t in enumerate(targets):
        assert sorted(t) == [m for m in range(16) if m != n]


def test_mesh_remainder_round_robin():
    assert mesh_targets(0, 4, 5) == [1, 2, 3, 1, 2]


@given(st.integers(2, 5), st.integers(1, 3), st.integers(1, 6), st.sampled_from(["serial", "full_mesh"]))
def test_net_count_closed_forms(rows, cols, w, wiring):
    topo = TopologySpec(grid=(rows, cols), wiring=wiring, core_pitch=30)
    d = generate(small_core(bus_width=w, internal_net_count=3), topo)
    k = rows * cols
    expected = serial_net_count(k, w) if wiring == "serial" else mesh_net_count(k, w)
    assert len(bus_nets(d)) == expected
    assert d.n_nets == expected + 3 * k


@given(st.integers(0, 1000), st.sampled_from(["serial", "full_mesh"]))
def test_cells_inside_disjoint_tiles(seed, wiring):
    topo = TopologySpec(grid=(2, 3), wiring=wiring, core_pitch=40)
    d = generate(small_core(rng_seed=seed), topo)
    tiles = core_tiles(topo)
    assert len({tuple(t) for t in tiles}) == 6
    for cell in d.cells:
        k = core_of(d, cell.id)
        x0, y0 = tiles[k]
        assert x0 <= cell.origin.x and cell.origin.x + cell.width <= x0 + 40
        assert y0 <= cell.origin.y and cell.origin.y + cell.height <= y0 + 40


def test_seeded_determinism():
    core, topo = small_core(rng_seed=5), TopologySpec(grid=(2, 2), wiring="full_mesh", core_pitch=60)
    assert dumps_native(generate_raw(core, topo)) == dumps_native(generate_raw(core, topo))
    other = dumps_native(generate_raw(small_core(rng_seed=6), topo))
    assert other != dumps_native(generate_raw(core, topo))


def test_serial_core_boundary_cut():
    w = 4
    topo = TopologySpec(grid=(2, 2), wiring="serial", core_pitch=50)
    d = generate(small_core(bus_width=w), topo)
    for k in range(3):
        labels = np.array([0 if core_of(d, c.id) <= k else 1 for c in d.cells])
        hg = build_hypergraph(d, labels)
        assert hg.n_edges == w


def test_default_scale():
    d = generate(CoreSpec(), TopologySpec())
    assert d.n_cells == 3200
    assert len(bus_nets(d)) == 15 * 16


@pytest.mark.parametrize("kw", [
    dict(cells_per_core=6, bus_width=4),
    dict(bus_width=0),
    dict(internal_fanout=(3, 2)),
    dict(cell_width=0),
])
def test_core_spec_errors(kw):
    with pytest.raises(DomainError):
        small_core(**kw)


@pytest.mark.parametrize("kw", [dict(grid=(1, 1)), dict(wiring="ring"), dict(core_pitch=0)])
def test_topology_errors(kw):
    with pytest.raises(DomainError):
        TopologySpec(**kw)


def test_buffers_only_when_asked():
    topo = TopologySpec(grid=(1, 2), core_pitch=50)
    assert not any(c.is_buffer for c in generate(small_core(), topo).cells)
    d = generate(small_core(), topo, with_buffers=10)
    n_buf = sum(c.is_buffer for c in d.cells)
    assert n_buf > 0
    stripped = strip_buffer_tree(generate_raw(small_core(), topo, with_buffers=10))
    assert stripped.n_cells == d.n_cells - n_buf


def test_insert_buffers_range():
    raw = generate_raw(small_core(), TopologySpec(grid=(1, 2), core_pitch=50))
    with pytest.raises(DomainError):
        insert_buffers(raw, 150)
    assert insert_buffers(raw, 0).nets == raw.nets


def test_gen_config(tmp_path):
    path = tmp_path / "g.json"
    path.write_text(json.dumps({"core": {"cells_per_core": 40}, "topology": {"wiring": "full_mesh", "grid": [2, 2]}}))
    cfg = load_gen_config(path, {"rng_seed": 9, "core_pitch": 80.0, "with_buffers": None})
    assert cfg.core.cells_per_core == 40 and cfg.core.rng_seed == 9
    assert cfg.core.bus_width == 15
    assert cfg.topology.core_pitch == 80.0 and cfg.topology.grid == (2, 2)
    assert load_gen_config().core.bus_width == 16
    assert json.loads(json.dumps(cfg.to_dict()))["topology"]["grid"] == [2, 2]
    assert isinstance(GenConfig().core, CoreSpec)
    path.write_text(json.dumps({"core": {"colour": 1}}))
    with pytest.raises(DomainError):
        load_gen_config(path)


@given(st.integers(2, 10), st.integers(0, 50))
def test_tiny_cores_have_valid_nets(cells, seed):
    core = CoreSpec(cells_per_core=max(cells, 2), bus_width=1, internal_net_count=20,
                    internal_fanout=(1, min(3, max(cells, 2) - 1)), rng_seed=seed)
    d = generate(core, TopologySpec(grid=(1, 2), core_pitch=20))
    for net in d.nets:
        assert len(set(net.pins)) == len(net.pins)
