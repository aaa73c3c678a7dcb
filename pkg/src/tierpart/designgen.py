"""Synthetic multi-core designs at the two ends of the interconnect spectrum.

A grid of identical cores is placed on a regular pitch. Cores are joined
either as a daisy chain (``serial``: core n drives its whole output bus into
core n+1) or all-to-all (``full_mesh``: each core's output bus is dealt
round-robin to every other core).

Inside a core, cells are dropped uniformly at random in the core tile and
random internal nets connect a driver to sinks picked among its nearest
neighbours, which is what a placer would have produced for local logic. Bus
endpoints are the cells nearest the core they talk to.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .core import Design, Floorplan, hpwl
from .exceptions import DomainError
from .ingest import RawCell, RawNet, RawNetlist, raw_to_design

WIRINGS = ("serial", "full_mesh")
GATE_LIB = "GATE_X1"
BUFFER_LIB = "BUF_X1"


@dataclass(frozen=True)
class CoreSpec:
    cells_per_core: int = 200
    bus_width: int = 16
    internal_net_count: int = 200
    internal_fanout: tuple[int, int] = (1, 3)
    cell_width: float = 1.0
    cell_height: float = 1.0
    locality: int = 8
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "internal_fanout", tuple(int(f) for f in self.internal_fanout))
        for name in ("cells_per_core", "bus_width", "internal_net_count", "locality"):
            if int(getattr(self, name)) < 1:
                raise DomainError(f"{name} must be positive")
        lo, hi = self.internal_fanout
        if not 1 <= lo <= hi:
            raise DomainError(f"internal_fanout must satisfy 1 <= lo <= hi, got {self.internal_fanout}")
        if hi > self.cells_per_core - 1:
            raise DomainError("internal_fanout exceeds the number of other cells in a core")
        if self.cells_per_core < 2 * self.bus_width:
            raise DomainError(f"cells_per_core ({self.cells_per_core}) must be at least twice "
                              f"bus_width ({self.bus_width})")
        if not (self.cell_width > 0 and self.cell_height > 0):
            raise DomainError("cell dimensions must be positive")


@dataclass(frozen=True)
class TopologySpec:
    grid: tuple[int, int] = (4, 4)
    wiring: str = "serial"
    core_pitch: float = 500.0

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(int(g) for g in self.grid))
        rows, cols = self.grid
        if rows < 1 or cols < 1 or rows * cols < 2:
            raise DomainError(f"grid must hold at least two cores, got {self.grid}")
        if self.wiring not in WIRINGS:
            raise DomainError(f"wiring must be one of {WIRINGS}, got {self.wiring!r}")
        if not self.core_pitch > 0:
            raise DomainError("core_pitch must be positive")

    @property
    def n_cores(self) -> int:
        return self.grid[0] * self.grid[1]


def serial_net_count(n_cores: int, bus_width: int) -> int:
    return (n_cores - 1) * bus_width


def mesh_net_count(n_cores: int, bus_width: int) -> int:
    return n_cores * bus_width


def core_tiles(topo: TopologySpec) -> np.ndarray:
    """Lower-left corner of each core tile, indexed by core number.

    Serial chains follow a serpentine walk so consecutive cores are adjacent.
    """
    rows, cols = topo.grid
    out = np.empty((topo.n_cores, 2))
    for n in range(topo.n_cores):
        r, c = divmod(n, cols)
        if topo.wiring == "serial" and r % 2 == 1:
            c = cols - 1 - c
        out[n] = (c * topo.core_pitch, r * topo.core_pitch)
    return out


def mesh_targets(n: int, n_cores: int, bus_width: int) -> list[int]:
    """Destination core of each of core ``n``'s output wires (round-robin from core n+1)."""
    others = [(n + 1 + i) % n_cores for i in range(n_cores - 1)]
    return [others[j % len(others)] for j in range(bus_width)]


def _nearest_free(centers: np.ndarray, used: np.ndarray, target: np.ndarray) -> int:
    d = np.abs(centers - target).sum(axis=1)
    d[used] = np.inf
    return int(np.argmin(d))


def generate_raw(core: CoreSpec, topo: TopologySpec, with_buffers: float = 0.0) -> RawNetlist:
    """Build the netlist; ``with_buffers`` (percent) inserts buffers on the longest nets."""
    K = topo.n_cores
    P = topo.core_pitch
    cw, ch = core.cell_width, core.cell_height
    if cw > P or ch > P:
        raise DomainError("cells do not fit inside a core tile")
    n = core.cells_per_core
    tiles = core_tiles(topo)
    rows, cols = topo.grid
    floorplan = Floorplan(0.0, 0.0, cols * P, rows * P)

    cells: list[RawCell] = []
    centers = np.empty((K, n, 2))
    nets: list[RawNet] = []
    for k in range(K):
        rng = np.random.default_rng([core.rng_seed, k])
        ox = tiles[k, 0] + rng.uniform(0, P - cw, n)
        oy = tiles[k, 1] + rng.uniform(0, P - ch, n)
        centers[k, :, 0] = ox + cw / 2
        centers[k, :, 1] = oy + ch / 2
        for i in range(n):
            cells.append(RawCell(f"c{k}_{i}", GATE_LIB, float(ox[i]), float(oy[i]), cw, ch))
        c = centers[k]
        dist = np.hypot(c[:, None, 0] - c[None, :, 0], c[:, None, 1] - c[None, :, 1])
        np.fill_diagonal(dist, np.inf)
        near = np.argsort(dist, axis=1, kind="stable")[:, :min(n - 1, max(core.locality, core.internal_fanout[1]))]
        drivers = rng.permutation(n)
        lo, hi = core.internal_fanout
        for j in range(core.internal_net_count):
            d = int(drivers[j % n])
            f = int(rng.integers(lo, hi + 1))
            pool = near[d, :max(core.locality, f)]
            sinks = rng.choice(pool, size=f, replace=False)
            nets.append(RawNet(f"c{k}_n{j}", [f"c{k}_{d}"] + [f"c{k}_{int(s)}" for s in sinks]))

    tile_centers = tiles + P / 2
    used = np.zeros((K, n), dtype=bool)
    W = core.bus_width
    if topo.wiring == "serial":
        links = [(k, k + 1) for k in range(K - 1) for _ in range(W)]
    else:
        links = [(k, t) for k in range(K) for t in mesh_targets(k, K, W)]
    ends = []
    for src, dst in links:
        a = _nearest_free(centers[src], used[src], tile_centers[dst])
        used[src, a] = True
        ends.append((src, a, dst))
    counter: dict[tuple[int, int], int] = {}
    for src, a, dst in ends:
        b = _nearest_free(centers[dst], used[dst], tile_centers[src])
        used[dst, b] = True
        j = counter.get((src, dst), 0)
        counter[(src, dst)] = j + 1
        nets.append(RawNet(f"bus_{src}_{dst}_{j}", [f"c{src}_{a}", f"c{dst}_{b}"]))

    raw = RawNetlist(cells, nets, floorplan, ["BUF*"],
                     name=f"{topo.wiring}_{rows}x{cols}_s{core.rng_seed}")
    if with_buffers:
        raw = insert_buffers(raw, with_buffers, seed=core.rng_seed)
    return raw


def insert_buffers(raw: RawNetlist, percent: float, seed: int = 0) -> RawNetlist:
    """Insert buffers on the longest ``percent`` % of nets.

    Two-pin nets get a chain of one or two buffers; wider nets get a single
    buffer driving the far half of the sinks (a small tree). Buffers sit on
    the segment between driver and sinks.
    """
    if not 0 <= percent <= 100:
        raise DomainError("buffer percentage must lie in [0, 100]")
    rng = np.random.default_rng([seed, 7919])
    pos = {c.name: (c.x + c.w / 2, c.y + c.h / 2) for c in raw.cells}
    lengths = [hpwl([pos[p] for p in net.pins]) for net in raw.nets]
    count = int(round(len(raw.nets) * percent / 100))
    chosen = set(int(i) for i in np.argsort(lengths, kind="stable")[::-1][:count])
    cells = list(raw.cells)
    nets: list[RawNet] = []
    bw = min(c.w for c in raw.cells)
    bh = min(c.h for c in raw.cells)
    fp = raw.floorplan
    nb = 0

    def place(x, y):
        nonlocal nb
        name = f"buf{nb}"
        nb += 1
        ox = min(max(x - bw / 2, fp.x), fp.x + fp.width - bw)
        oy = min(max(y - bh / 2, fp.y), fp.y + fp.height - bh)
        cells.append(RawCell(name, BUFFER_LIB, float(ox), float(oy), bw, bh))
        return name

    for k, net in enumerate(raw.nets):
        if k not in chosen or len(net.pins) < 2:
            nets.append(net)
            continue
        drv = net.pins[0]
        dx, dy = pos[drv]
        sinks = list(net.pins[1:])
        if len(sinks) == 1:
            sx, sy = pos[sinks[0]]
            stages = 1 + int(rng.integers(0, 2))
            chain = [place(dx + (sx - dx) * (i + 1) / (stages + 1), dy + (sy - dy) * (i + 1) / (stages + 1))
                     for i in range(stages)]
            path = [drv] + chain + sinks
            nets.append(RawNet(net.name, path[:2]))
            for i in range(1, len(path) - 1):
                nets.append(RawNet(f"{net.name}_b{i}", path[i:i + 2]))
        else:
            far = sorted(sinks, key=lambda s: -abs(pos[s][0] - dx) - abs(pos[s][1] - dy))
            behind, direct = far[:(len(far) + 1) // 2], far[(len(far) + 1) // 2:]
            bx = np.mean([pos[s][0] for s in behind])
            by = np.mean([pos[s][1] for s in behind])
            b = place((dx + bx) / 2, (dy + by) / 2)
            nets.append(RawNet(net.name, [drv] + [s for s in sinks if s in direct] + [b]))
            nets.append(RawNet(f"{net.name}_b1", [b] + [s for s in sinks if s in behind]))
    return RawNetlist(cells, nets, raw.floorplan, list(raw.buffer_patterns), raw.name)


def generate(core: CoreSpec, topo: TopologySpec, with_buffers: float = 0.0) -> Design:
    """Generated design as a length-annotated Design (buffers, if any, are flagged, not stripped)."""
    return raw_to_design(generate_raw(core, topo, with_buffers))


# --------------------------------------------------------------------------- config

@dataclass
class GenConfig:
    core: CoreSpec = field(default_factory=CoreSpec)
    topology: TopologySpec = field(default_factory=TopologySpec)
    with_buffers: float = 0.0

    def to_dict(self) -> dict:
        return {"core": asdict(self.core), "topology": asdict(self.topology), "with_buffers": self.with_buffers}


def _pick(cls, data: dict):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise DomainError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def load_gen_config(path=None, overrides: dict | None = None, data: dict | None = None) -> GenConfig:
    """Read ``{"core": {...}, "topology": {...}, "with_buffers": p}`` from ``path`` or ``data``.

    ``overrides`` win over file values; None entries are ignored.
    """
    data = dict(data or {})
    if path is not None:
        data = json.loads(Path(path).read_text())
    unknown = set(data) - {"core", "topology", "with_buffers"}
    if unknown:
        raise DomainError(f"unknown generator config keys: {sorted(unknown)}")
    core = dict(data.get("core", {}))
    topo = dict(data.get("topology", {}))
    wb = data.get("with_buffers", 0.0)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "with_buffers":
            wb = value
        elif key in {f.name for f in fields(TopologySpec)}:
            topo[key] = value
        else:
            core[key] = value
    topo.setdefault("wiring", "serial")
    if "bus_width" not in core:
        core["bus_width"] = 15 if topo["wiring"] == "full_mesh" else 16
    return GenConfig(_pick(CoreSpec, core), _pick(TopologySpec, topo), float(wb))
