"""Reading placed netlists and stripping their buffer trees.

Two on-disk formats are understood:

* the native format, a single JSON document (``.nlp``) whose layout is
  documented in ``docs/formats.md``;
* the Bookshelf trio ``.nodes`` / ``.nets`` / ``.pl``.

Parsing produces a :class:`RawNetlist` that still contains buffers;
:func:`strip_buffer_tree` turns it into an annotated :class:`~tierpart.core.Design`.
"""
from __future__ import annotations

import fnmatch
import json
import logging
import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .core import Cell, Design, Floorplan, Net, Point, annotate_lengths
from .exceptions import DomainError, IntegrityError, ParseError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_BUFFER_PATTERNS = ("BUF*",)
BOOKSHELF_SUFFIXES = (".aux", ".nodes", ".nets", ".pl")

#: incremented on every successful parse; the sweep driver logs it to show a single ingestion
PARSE_COUNT = 0


@dataclass
class RawCell:
    name: str
    lib: str
    x: float
    y: float
    w: float
    h: float


@dataclass
class RawNet:
    name: str
    pins: list[str]


@dataclass
class RawNetlist:
    cells: list[RawCell]
    nets: list[RawNet]
    floorplan: Floorplan
    buffer_patterns: list[str] = field(default_factory=lambda: list(DEFAULT_BUFFER_PATTERNS))
    name: str = "design"

    def is_buffer(self, cell: RawCell) -> bool:
        return any(fnmatch.fnmatchcase(cell.lib, pat) for pat in self.buffer_patterns)

    def check(self):
        """Raise IntegrityError on duplicate names or dangling pins."""
        seen = set()
        for c in self.cells:
            if c.name in seen:
                raise IntegrityError(f"duplicate cell name {c.name!r}")
            seen.add(c.name)
        net_names = set()
        for n in self.nets:
            if n.name in net_names:
                raise IntegrityError(f"duplicate net name {n.name!r}")
            net_names.add(n.name)
            for p in n.pins:
                if p not in seen:
                    raise IntegrityError(f"net {n.name!r} references unknown cell {p!r}")
            if len(set(n.pins)) != len(n.pins):
                raise IntegrityError(f"net {n.name!r} lists a cell twice")
        return self


# --------------------------------------------------------------------------- native

def _num(value, what, path, line):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{what} must be a number, got {value!r}", path, line)
    return float(value)


def _line_index(text: str) -> dict[str, int]:
    """Map quoted cell/net names to the first line they are declared on (for messages)."""
    index = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.find('"name"')
        if s >= 0:
            rest = line[s + 6:].lstrip(" :")
            if rest.startswith('"'):
                end = rest.find('"', 1)
                index.setdefault(rest[1:end], lineno)
    return index


def read_native(path) -> RawNetlist:
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno) from None
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", path, 1)
    lines = _line_index(text)
    for key in ("floorplan", "cells", "nets"):
        if key not in doc:
            raise ParseError(f"missing top-level key {key!r}", path)
    fp = doc["floorplan"]
    try:
        floorplan = Floorplan(*(_num(fp[k], f"floorplan.{k}", path, None) for k in ("x", "y", "w", "h")))
    except (KeyError, TypeError):
        raise ParseError("floorplan needs numeric x, y, w, h", path) from None
    cells = []
    for i, c in enumerate(doc["cells"]):
        line = lines.get(c.get("name")) if isinstance(c, dict) else None
        try:
            cells.append(RawCell(str(c["name"]), str(c["lib"]),
                                 *(_num(c[k], f"cells[{i}].{k}", path, line) for k in ("x", "y", "w", "h"))))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"cells[{i}] is missing field {exc}", path, line) from None
    nets = []
    for i, n in enumerate(doc["nets"]):
        line = lines.get(n.get("name")) if isinstance(n, dict) else None
        try:
            pins = n["pins"]
            if not isinstance(pins, list) or not all(isinstance(p, str) for p in pins):
                raise ParseError(f"nets[{i}].pins must be a list of cell names", path, line)
            nets.append(RawNet(str(n["name"]), list(pins)))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"nets[{i}] is missing field {exc}", path, line) from None
    patterns = doc.get("buffer_patterns", list(DEFAULT_BUFFER_PATTERNS))
    raw = RawNetlist(cells, nets, floorplan, list(patterns), name=path.stem)
    return raw.check()


def _fmt(x: float) -> str:
    return json.dumps(float(x))


def dumps_native(raw: RawNetlist) -> str:
    """Serialize in the native layout: fixed key order, one cell or net per line."""
    fp = raw.floorplan
    out = ["{"]
    out.append(f'  "floorplan": {{"x": {_fmt(fp.x)}, "y": {_fmt(fp.y)}, '
               f'"w": {_fmt(fp.width)}, "h": {_fmt(fp.height)}}},')
    out.append('  "cells": [')
    rows = [f'    {{"name": {json.dumps(c.name)}, "lib": {json.dumps(c.lib)}, "x": {_fmt(c.x)}, '
            f'"y": {_fmt(c.y)}, "w": {_fmt(c.w)}, "h": {_fmt(c.h)}}}' for c in raw.cells]
    if rows:
        out.append(",\n".join(rows))
    out.append("  ],")
    out.append('  "nets": [')
    rows = [f'    {{"name": {json.dumps(n.name)}, "pins": {json.dumps(n.pins)}}}' for n in raw.nets]
    if rows:
        out.append(",\n".join(rows))
    out.append("  ],")
    out.append(f'  "buffer_patterns": {json.dumps(list(raw.buffer_patterns))}')
    out.append("}")
    return "\n".join(out) + "\n"


def write_native(raw: RawNetlist, path) -> Path:
    path = Path(path)
    path.write_text(dumps_native(raw))
    return path


# --------------------------------------------------------------------------- bookshelf

def _bookshelf_lines(path: Path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line or line.startswith("UCLA"):
                continue
            yield lineno, line


def _bookshelf_paths(path: Path) -> dict[str, Path]:
    if path.is_dir():
        base = path / path.name
    else:
        base = path.with_suffix("")
    if path.suffix == ".aux" and path.exists():
        names = path.read_text().split(":", 1)[-1].split()
        found = {Path(n).suffix: path.parent / n for n in names}
        if all(s in found for s in (".nodes", ".nets", ".pl")):
            return found
    return {s: base.with_suffix(s) for s in (".nodes", ".nets", ".pl")}


def read_bookshelf(path, buffer_patterns=DEFAULT_BUFFER_PATTERNS) -> RawNetlist:
    """Read a Bookshelf ``.nodes/.nets/.pl`` trio.

    ``path`` may be the ``.aux`` file, any member of the trio, or the
    directory holding ``<dir>/<dir>.nodes`` etc. Bookshelf has no library
    cell names, so buffer patterns are matched against node names. The
    floorplan is the bounding box of all nodes.
    """
    paths = _bookshelf_paths(Path(path))
    for p in paths.values():
        if not p.exists():
            raise ParseError("missing Bookshelf file", p)

    sizes: dict[str, tuple[float, float]] = {}
    order: list[str] = []
    for lineno, line in _bookshelf_lines(paths[".nodes"]):
        if line.startswith(("NumNodes", "NumTerminals")):
            continue
        tok = line.split()
        if len(tok) < 3:
            raise ParseError("node line needs: name width height", paths[".nodes"], lineno)
        name = tok[0]
        if name in sizes:
            raise IntegrityError(f"duplicate cell name {name!r} ({paths['.nodes']}:{lineno})")
        try:
            sizes[name] = (float(tok[1]), float(tok[2]))
        except ValueError:
            raise ParseError(f"bad size for node {name!r}", paths[".nodes"], lineno) from None
        if len(tok) > 3:
            warnings.warn(f"{paths['.nodes']}:{lineno}: ignoring attributes {tok[3:]}", stacklevel=2)
        order.append(name)

    pos: dict[str, tuple[float, float]] = {}
    for lineno, line in _bookshelf_lines(paths[".pl"]):
        tok = line.split()
        if len(tok) < 3:
            raise ParseError("placement line needs: name x y", paths[".pl"], lineno)
        try:
            pos[tok[0]] = (float(tok[1]), float(tok[2]))
        except ValueError:
            raise ParseError(f"bad coordinates for {tok[0]!r}", paths[".pl"], lineno) from None
        extra = [t for t in tok[3:] if t not in (":",) and t not in ("N", "S", "E", "W", "FN", "FS", "FE", "FW")]
        if extra:
            warnings.warn(f"{paths['.pl']}:{lineno}: ignoring attributes {extra}", stacklevel=2)
    for name in order:
        if name not in pos:
            raise ParseError(f"node {name!r} has no placement", paths[".pl"])

    nets: list[RawNet] = []
    current: RawNet | None = None
    remaining = 0
    drivers: list[str | None] = []
    for lineno, line in _bookshelf_lines(paths[".nets"]):
        if line.startswith(("NumNets", "NumPins")):
            continue
        if line.startswith("NetDegree"):
            if remaining:
                raise ParseError("previous net has fewer pins than its NetDegree", paths[".nets"], lineno)
            tok = line.replace(":", " ").split()
            try:
                remaining = int(tok[1])
            except (IndexError, ValueError):
                raise ParseError("bad NetDegree line", paths[".nets"], lineno) from None
            name = tok[2] if len(tok) > 2 else f"net{len(nets)}"
            current = RawNet(name, [])
            nets.append(current)
            drivers.append(None)
            continue
        if current is None or remaining == 0:
            raise ParseError("pin line outside a NetDegree block", paths[".nets"], lineno)
        tok = line.split()
        cell = tok[0]
        if cell not in sizes:
            raise IntegrityError(f"net {current.name!r} references unknown cell {cell!r} "
                                 f"({paths['.nets']}:{lineno})")
        if len(tok) > 1 and tok[1] == "O" and drivers[-1] is None:
            drivers[-1] = cell
        if cell not in current.pins:
            current.pins.append(cell)
        remaining -= 1
    if remaining:
        raise ParseError("last net has fewer pins than its NetDegree", paths[".nets"])
    for net, drv in zip(nets, drivers):
        if drv is not None and net.pins[0] != drv:
            net.pins.remove(drv)
            net.pins.insert(0, drv)

    cells = [RawCell(n, n, pos[n][0], pos[n][1], sizes[n][0], sizes[n][1]) for n in order]
    if cells:
        x0 = min(c.x for c in cells)
        y0 = min(c.y for c in cells)
        x1 = max(c.x + c.w for c in cells)
        y1 = max(c.y + c.h for c in cells)
        floorplan = Floorplan(x0, y0, x1 - x0, y1 - y0)
    else:
        floorplan = Floorplan(0.0, 0.0, 1.0, 1.0)
    raw = RawNetlist(cells, nets, floorplan, list(buffer_patterns), name=paths[".nodes"].stem)
    return raw.check()


def write_bookshelf(raw: RawNetlist, directory, basename: str | None = None) -> Path:
    """Write ``raw`` as a Bookshelf trio plus ``.aux``; returns the ``.aux`` path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    base = basename or raw.name
    with open(directory / f"{base}.nodes", "w") as fh:
        fh.write("UCLA nodes 1.0\n")
        fh.write(f"NumNodes : {len(raw.cells)}\nNumTerminals : 0\n")
        for c in raw.cells:
            fh.write(f"{c.name} {c.w!r} {c.h!r}\n")
    with open(directory / f"{base}.pl", "w") as fh:
        fh.write("UCLA pl 1.0\n")
        for c in raw.cells:
            fh.write(f"{c.name} {c.x!r} {c.y!r} : N\n")
    with open(directory / f"{base}.nets", "w") as fh:
        fh.write("UCLA nets 1.0\n")
        fh.write(f"NumNets : {len(raw.nets)}\nNumPins : {sum(len(n.pins) for n in raw.nets)}\n")
        for n in raw.nets:
            fh.write(f"NetDegree : {len(n.pins)} {n.name}\n")
            for i, p in enumerate(n.pins):
                fh.write(f"  {p} {'O' if i == 0 else 'I'}\n")
    aux = directory / f"{base}.aux"
    aux.write_text(f"RowBasedPlacement : {base}.nodes {base}.nets {base}.pl\n")
    return aux


def parse_design(path, format: str | None = None, buffer_patterns=None) -> RawNetlist:
    """Parse a netlist file. ``format`` is ``"native"`` or ``"bookshelf"``; inferred from the suffix if omitted."""
    global PARSE_COUNT
    path = Path(path)
    if format is None:
        format = "bookshelf" if (path.suffix in BOOKSHELF_SUFFIXES or path.is_dir()) else "native"
    if format == "native":
        if not path.exists():
            raise ParseError("no such file", path)
        raw = read_native(path)
        if buffer_patterns is not None:
            raw.buffer_patterns = list(buffer_patterns)
    elif format == "bookshelf":
        raw = read_bookshelf(path, buffer_patterns or DEFAULT_BUFFER_PATTERNS)
    else:
        raise DomainError(f"unknown netlist format {format!r}")
    PARSE_COUNT += 1
    logger.debug("parsed %s (%d cells, %d nets); parse count %d",
                 os.fspath(path), len(raw.cells), len(raw.nets), PARSE_COUNT)
    return raw


# --------------------------------------------------------------------------- buffers

def _find_cycle(start: str, input_driver: dict[str, str]) -> list[str]:
    seen: dict[str, int] = {}
    path = []
    node = start
    while node not in seen:
        seen[node] = len(path)
        path.append(node)
        node = input_driver[node]
    return path[seen[node]:]


def strip_buffer_tree(raw: RawNetlist) -> Design:
    """Remove every buffer and merge the nets it joined.

    Each buffer must have exactly one input net and one output net (where it
    is the first pin). A net driven by a non-buffer keeps its driver and
    gains every non-buffer sink reachable through chains of buffers; nets
    driven by buffers are absorbed. The result is length-annotated.
    """
    buffers = {c.name for c in raw.cells if raw.is_buffer(c)}
    inputs: dict[str, list[int]] = {b: [] for b in buffers}
    outputs: dict[str, list[int]] = {b: [] for b in buffers}
    for k, net in enumerate(raw.nets):
        for i, p in enumerate(net.pins):
            if p in buffers:
                (outputs if i == 0 else inputs)[p].append(k)
    for b in sorted(buffers):
        if len(inputs[b]) != 1 or len(outputs[b]) != 1:
            raise ShapeError(f"buffer {b!r} has {len(inputs[b])} input and {len(outputs[b])} output nets; "
                             "expected exactly one of each")

    visited: set[str] = set()
    kept = [c for c in raw.cells if c.name not in buffers]
    index = {c.name: i for i, c in enumerate(kept)}
    nets = []
    for net in raw.nets:
        if net.pins[0] in buffers:
            continue
        pins = [net.pins[0]]
        stack = list(reversed(net.pins[1:]))
        while stack:
            p = stack.pop()
            if p in buffers:
                visited.add(p)
                stack.extend(reversed(raw.nets[outputs[p][0]].pins[1:]))
            else:
                pins.append(p)
        pins = list(dict.fromkeys(pins))
        nets.append(Net(len(nets), net.name, tuple(index[p] for p in pins)))

    orphans = buffers - visited
    if orphans:
        input_driver = {b: raw.nets[inputs[b][0]].pins[0] for b in buffers}
        cycle = _find_cycle(sorted(orphans)[0], input_driver)
        raise IntegrityError(f"buffer cycle detected: {' -> '.join(cycle + cycle[:1])}")

    cells = tuple(Cell(i, c.name, Point(c.x, c.y), c.w, c.h, False, c.lib) for i, c in enumerate(kept))
    if buffers:
        logger.info("stripped %d buffers, %d nets remain", len(buffers), len(nets))
    return annotate_lengths(Design(cells, tuple(nets), raw.floorplan, name=raw.name))


def raw_to_design(raw: RawNetlist) -> Design:
    """Convert without stripping; buffers stay in place, flagged ``is_buffer``."""
    index = {c.name: i for i, c in enumerate(raw.cells)}
    cells = tuple(Cell(i, c.name, Point(c.x, c.y), c.w, c.h, raw.is_buffer(c), c.lib)
                  for i, c in enumerate(raw.cells))
    nets = tuple(Net(j, n.name, tuple(index[p] for p in n.pins)) for j, n in enumerate(raw.nets))
    return annotate_lengths(Design(cells, nets, raw.floorplan, name=raw.name))


def design_to_raw(design: Design, buffer_patterns=DEFAULT_BUFFER_PATTERNS) -> RawNetlist:
    """Inverse of :func:`raw_to_design` (names, library cells and geometry are kept)."""
    cells = [RawCell(c.name, c.lib, c.origin.x, c.origin.y, c.width, c.height) for c in design.cells]
    nets = [RawNet(n.name, [design.cells[p].name for p in n.pins]) for n in design.nets]
    return RawNetlist(cells, nets, design.floorplan, list(buffer_patterns), design.name)


def load_design(path, format: str | None = None, buffer_patterns=None) -> Design:
    """Parse ``path`` and strip its buffer tree."""
    return strip_buffer_tree(parse_design(path, format, buffer_patterns))
