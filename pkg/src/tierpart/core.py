"""Netlist and hypergraph model shared by every stage of the flow.

A :class:`Design` holds cells and nets inside a floorplan. Lengths are in design
units (µm). A design is immutable; operations that change it return a new one.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .exceptions import DomainError, IntegrityError

REL_EPS = 1e-9


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Cell:
    id: int
    name: str
    origin: Point
    width: float
    height: float
    is_buffer: bool = False
    lib: str = ""

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise DomainError(f"cell {self.name!r} has non-positive size {self.width}x{self.height}")
        if not (np.isfinite(self.origin[0]) and np.isfinite(self.origin[1])):
            raise DomainError(f"cell {self.name!r} has a non-finite origin")
        if not isinstance(self.origin, Point):
            object.__setattr__(self, "origin", Point(float(self.origin[0]), float(self.origin[1])))

    @property
    def center(self) -> Point:
        return Point(self.origin.x + self.width / 2, self.origin.y + self.height / 2)

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class Net:
    id: int
    name: str
    pins: tuple[int, ...]
    length: float | None = None

    def __post_init__(self):
        pins = tuple(int(p) for p in self.pins)
        if not pins:
            raise IntegrityError(f"net {self.name!r} has no pins")
        if len(set(pins)) != len(pins):
            raise IntegrityError(f"net {self.name!r} lists a cell twice")
        object.__setattr__(self, "pins", pins)

    @property
    def driver(self) -> int:
        return self.pins[0]

    @property
    def sinks(self) -> tuple[int, ...]:
        return self.pins[1:]


@dataclass(frozen=True)
class Floorplan:
    x: float
    y: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise DomainError("floorplan must have positive width and height")

    @property
    def half_perimeter(self) -> float:
        return self.width + self.height

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        tol = REL_EPS * max(self.half_perimeter, 1.0)
        return (
            (points[:, 0] >= self.x - tol)
            & (points[:, 0] <= self.x + self.width + tol)
            & (points[:, 1] >= self.y - tol)
            & (points[:, 1] <= self.y + self.height + tol)
        )


@dataclass(frozen=True)
class Design:
    """A placed netlist.

    ``cells[i].id == i`` and ``nets[j].id == j``; every pin must name an
    existing cell and every cell center must lie inside the floorplan.
    """

    cells: tuple[Cell, ...]
    nets: tuple[Net, ...]
    floorplan: Floorplan
    name: str = "design"

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "nets", tuple(self.nets))
        n = len(self.cells)
        for i, cell in enumerate(self.cells):
            if cell.id != i:
                raise IntegrityError(f"cell {cell.name!r} has id {cell.id}, expected dense id {i}")
        for j, net in enumerate(self.nets):
            if net.id != j:
                raise IntegrityError(f"net {net.name!r} has id {net.id}, expected dense id {j}")
            for p in net.pins:
                if not 0 <= p < n:
                    raise IntegrityError(f"net {net.name!r} references missing cell id {p}")
        if n:
            outside = ~self.floorplan.contains(self.centers)
            if outside.any():
                bad = self.cells[int(np.flatnonzero(outside)[0])]
                raise DomainError(f"cell {bad.name!r} center lies outside the floorplan")

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_nets(self) -> int:
        return len(self.nets)

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([c.center for c in self.cells], dtype=float).reshape(-1, 2)

    @cached_property
    def origins(self) -> np.ndarray:
        return np.array([c.origin for c in self.cells], dtype=float).reshape(-1, 2)

    @cached_property
    def areas(self) -> np.ndarray:
        return np.array([c.area for c in self.cells], dtype=float)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @cached_property
    def agw(self) -> float:
        """Average gate width: mean width over all cells."""
        if not self.cells:
            raise DomainError("average gate width is undefined for an empty design")
        return float(np.mean([c.width for c in self.cells]))

    @cached_property
    def cell_index(self) -> dict[str, int]:
        return {c.name: c.id for c in self.cells}

    @property
    def annotated(self) -> bool:
        return all(net.length is not None for net in self.nets)

    @cached_property
    def net_lengths(self) -> np.ndarray:
        if not self.annotated:
            raise DomainError("design nets carry no lengths; call annotate_lengths first")
        return np.array([net.length for net in self.nets], dtype=float)

    @property
    def total_wirelength(self) -> float:
        return float(self.net_lengths.sum())


def hpwl(points) -> float:
    """Half-perimeter of the bounding box of ``points``.

    >>> hpwl([(0, 0), (2, 5), (4, 1)])
    9.0
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise DomainError("hpwl of an empty point list")
    pts = pts.reshape(-1, 2)
    span = pts.max(axis=0) - pts.min(axis=0)
    return float(span[0] + span[1])


def annotate_lengths(design: Design) -> Design:
    """Return a copy of ``design`` whose nets carry the HPWL of their cell centers."""
    centers = design.centers
    n = design.n_cells
    nets = []
    for net in design.nets:
        for p in net.pins:
            if not 0 <= p < n:
                raise IntegrityError(f"net {net.name!r} references missing cell id {p}")
        nets.append(replace(net, length=hpwl(centers[list(net.pins)])))
    return replace(design, nets=tuple(nets))


class Hyperedge(NamedTuple):
    members: tuple[int, ...]
    weight: int
    net_id: int | None
    length: float


@dataclass(frozen=True)
class Hypergraph:
    """Weighted hypergraph over clusters.

    ``vertex_origin[v]`` holds the cell ids merged into vertex ``v``.
    """

    vertex_weights: np.ndarray
    edges: tuple[Hyperedge, ...]
    vertex_origin: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        w = np.asarray(self.vertex_weights, dtype=float).reshape(-1)
        w.setflags(write=False)
        object.__setattr__(self, "vertex_weights", w)
        if (w <= 0).any() or not np.isfinite(w).all():
            raise DomainError("vertex weights must be positive and finite")
        n = len(w)
        edges = []
        for e in self.edges:
            members = tuple(dict.fromkeys(int(m) for m in e.members))
            if not members:
                raise IntegrityError("hyperedge with no members")
            if not all(0 <= m < n for m in members):
                raise IntegrityError(f"hyperedge {members} references a missing vertex")
            if e.weight <= 0:
                raise DomainError("hyperedge weights must be positive")
            edges.append(Hyperedge(members, int(e.weight), e.net_id, float(e.length)))
        object.__setattr__(self, "edges", tuple(edges))
        if not self.vertex_origin:
            object.__setattr__(self, "vertex_origin", tuple((v,) for v in range(n)))
        elif len(self.vertex_origin) != n:
            raise IntegrityError("vertex_origin must have one entry per vertex")

    @classmethod
    def from_edges(cls, edges: Sequence[Sequence[int]], n_vertices: int | None = None, vertex_weights=None,
                   edge_weights=None) -> "Hypergraph":
        """Build a hypergraph from bare member lists (unit weights unless given)."""
        if vertex_weights is None:
            if n_vertices is None:
                n_vertices = 1 + max((max(e) for e in edges if len(e)), default=-1)
            vertex_weights = np.ones(n_vertices)
        if edge_weights is None:
            edge_weights = [1] * len(edges)
        hes = tuple(Hyperedge(tuple(e), int(w), None, 0.0) for e, w in zip(edges, edge_weights))
        return cls(np.asarray(vertex_weights, dtype=float), hes)

    @property
    def n_vertices(self) -> int:
        return len(self.vertex_weights)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def total_weight(self) -> float:
        return float(self.vertex_weights.sum())

    @cached_property
    def incidence(self) -> tuple[tuple[int, ...], ...]:
        """Hyperedge ids touching each vertex."""
        inc: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for k, e in enumerate(self.edges):
            for m in e.members:
                inc[m].append(k)
        return tuple(tuple(x) for x in inc)


def _assignment_of(clustering) -> np.ndarray:
    return np.asarray(getattr(clustering, "assignment", clustering), dtype=np.int64).reshape(-1)


def build_hypergraph(design: Design, clustering,
                     edge_weight: Callable[[Net], int] | None = None) -> Hypergraph:
    """Collapse ``design`` onto the clusters of ``clustering``.

    One vertex per cluster, weighted by summed cell area. Every net spanning two
    or more clusters becomes a hyperedge over those clusters; nets internal to
    a single cluster disappear. ``edge_weight`` overrides the unit net weight.
    """
    assignment = _assignment_of(clustering)
    if len(assignment) != design.n_cells:
        raise IntegrityError(
            f"clustering covers {len(assignment)} cells but the design has {design.n_cells}")
    if design.n_cells and assignment.min() < 0:
        missing = int(np.flatnonzero(assignment < 0)[0])
        raise IntegrityError(f"cell {design.cells[missing].name!r} is missing from the clustering")
    if not design.annotated:
        design = annotate_lengths(design)
    k = int(assignment.max()) + 1 if design.n_cells else 0
    weights = np.bincount(assignment, weights=design.areas, minlength=k)
    if k and (weights <= 0).any():
        empty = int(np.flatnonzero(weights <= 0)[0])
        raise IntegrityError(f"cluster {empty} is empty; cluster ids must be dense")
    origin: list[list[int]] = [[] for _ in range(k)]
    for cid, v in enumerate(assignment):
        origin[v].append(cid)
    edges = []
    for net in design.nets:
        members = sorted({int(assignment[p]) for p in net.pins})
        if len(members) < 2:
            continue
        w = 1 if edge_weight is None else int(edge_weight(net))
        edges.append(Hyperedge(tuple(members), w, net.id, float(net.length)))
    return Hypergraph(weights, tuple(edges), tuple(tuple(o) for o in origin))
