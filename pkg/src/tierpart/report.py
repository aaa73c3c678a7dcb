"""Cut metrics of a finished bipartition and their export.

Lengths are normalised by the floorplan half-perimeter (width + height).
Histograms use 100 bins of width 0.01 over ``[0, 1]`` plus one overflow bin
for ratios above 1.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import REL_EPS, Design, Hypergraph, annotate_lengths
from .exceptions import DomainError, IntegrityError
from .partition import Partition

BIN_WIDTH = 0.01
N_BINS = 100
REPORT_HEADER = ("method", "nets_cut", "total_wl_cut_pct", "median_norm", "mean_norm")
TABLE_HEADER = REPORT_HEADER + ("best_nets_cut", "best_pct")
FORMATS = ("csv", "json", "svg")


@dataclass(frozen=True)
class CutReport:
    method_tag: str
    nets_cut: int
    total_wl_cut_pct: float
    cut_lengths: tuple[float, ...]
    normalized_cut_lengths: tuple[float, ...]
    median: float
    mean: float
    histogram: tuple[int, ...]
    total_wirelength: float
    uncut_wirelength: float
    divisor: float

    def __post_init__(self):
        if self.nets_cut != len(self.cut_lengths):
            raise IntegrityError("nets_cut disagrees with the number of cut lengths")
        if not 0 <= self.total_wl_cut_pct <= 100 * (1 + REL_EPS):
            raise IntegrityError(f"total_wl_cut_pct out of range: {self.total_wl_cut_pct}")

    @property
    def cut_wirelength(self) -> float:
        return math.fsum(self.cut_lengths)

    def row(self) -> tuple:
        return (self.method_tag, self.nets_cut, self.total_wl_cut_pct, self.median, self.mean)


def histogram(values) -> tuple[int, ...]:
    """Counts per 0.01 bin on [0, 1]; the final entry counts values above 1."""
    v = np.asarray(values, dtype=float)
    counts = np.zeros(N_BINS + 1, dtype=np.int64)
    if len(v):
        idx = np.minimum(np.floor(v / BIN_WIDTH).astype(np.int64), N_BINS - 1)
        idx[v > 1.0] = N_BINS
        np.add.at(counts, np.maximum(idx, 0), 1)
    return tuple(int(c) for c in counts)


def cut_report(design: Design, hg: Hypergraph, partition: Partition, method_tag: str = "") -> CutReport:
    """Measure ``partition`` of ``hg`` against the nets of ``design``.

    >>> from tierpart.core import Cell, Net, Floorplan, Design, Hypergraph, Hyperedge
    >>> from tierpart.partition import make_partition
    >>> cells = (Cell(0, "a", (0, 0), 1, 1), Cell(1, "b", (49, 0), 1, 1))
    >>> d = Design(cells, (Net(0, "n", (0, 1)),), Floorplan(0, 0, 100, 100))
    >>> hg = Hypergraph([1.0, 1.0], (Hyperedge((0, 1), 1, 0, 49.0),))
    >>> r = cut_report(d, hg, make_partition(hg, [0, 1]), "NC")
    >>> r.nets_cut, r.total_wl_cut_pct, r.normalized_cut_lengths
    (1, 100.0, (0.245,))
    """
    if not design.annotated:
        design = annotate_lengths(design)
    if len(partition.side) != hg.n_vertices:
        raise IntegrityError("partition does not match the hypergraph")
    lengths = design.net_lengths
    total = math.fsum(lengths)
    if not total > 0:
        raise DomainError("total wirelength is zero, cut percentage is undefined")
    cut_ids = []
    for k in partition.cut_edges:
        net_id = hg.edges[k].net_id
        if net_id is None:
            raise IntegrityError(f"hyperedge {k} has no source net")
        cut_ids.append(int(net_id))
    cut_ids.sort()
    cut_set = set(cut_ids)
    cut = tuple(float(lengths[i]) for i in cut_ids)
    uncut = math.fsum(float(lengths[i]) for i in range(len(lengths)) if i not in cut_set)
    divisor = design.floorplan.width + design.floorplan.height
    if not divisor > 0:
        raise DomainError("floorplan half-perimeter must be positive")
    norm = tuple(c / divisor for c in cut)
    median = float(np.median(norm)) if norm else 0.0
    mean = math.fsum(norm) / len(norm) if norm else 0.0
    pct = min(100.0, math.fsum(cut) / total * 100.0)
    return CutReport(method_tag, len(cut), pct, cut, norm, median, mean, histogram(norm),
                     total, uncut, divisor)


def recount_nets_cut(design: Design, assignment, partition: Partition) -> int:
    """Count nets whose cells land on both dies, scanning cells directly."""
    die = np.asarray(partition.side)[np.asarray(getattr(assignment, "assignment", assignment))]
    return sum(1 for net in design.nets if len({int(die[p]) for p in net.pins}) > 1)


def check_report(report: CutReport, design: Design, assignment, partition: Partition) -> None:
    """Raise IntegrityError unless recount and conservation hold."""
    recount = recount_nets_cut(design, assignment, partition)
    if recount != report.nets_cut:
        raise IntegrityError(f"nets_cut {report.nets_cut} but a direct scan finds {recount}")
    both = report.cut_wirelength + report.uncut_wirelength
    if abs(both - report.total_wirelength) > REL_EPS * max(report.total_wirelength, 1.0):
        raise IntegrityError("cut and uncut wirelength do not add up to the total")


# --------------------------------------------------------------------------- comparison

@dataclass(frozen=True)
class ComparisonRow:
    method: str
    nets_cut: int
    total_wl_cut_pct: float
    median_norm: float
    mean_norm: float
    best_nets_cut: bool
    best_pct: bool


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]

    def row(self, method: str) -> ComparisonRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_text(self) -> str:
        lines = [f"{'method':<8}{'nets_cut':>10}{'wl_cut_%':>11}{'median':>9}{'mean':>9}"]
        for r in self.rows:
            n = f"{r.nets_cut}{'*' if r.best_nets_cut else ' '}"
            p = f"{r.total_wl_cut_pct:.3f}{'*' if r.best_pct else ' '}"
            lines.append(f"{r.method:<8}{n:>10}{p:>11}{r.median_norm:>9.4f}{r.mean_norm:>9.4f}")
        return "\n".join(lines) + "\n"


def compare_methods(reports) -> ComparisonTable:
    """One row per report. The fewest nets cut and the highest WL percentage are flagged, ties included."""
    reports = list(reports)
    if not reports:
        raise DomainError("compare_methods needs at least one report")
    low = min(r.nets_cut for r in reports)
    high = max(r.total_wl_cut_pct for r in reports)
    return ComparisonTable(tuple(
        ComparisonRow(r.method_tag, r.nets_cut, r.total_wl_cut_pct, r.median, r.mean,
                      r.nets_cut == low, r.total_wl_cut_pct == high)
        for r in reports))


# --------------------------------------------------------------------------- export

def _num(x: float) -> str:
    return repr(float(x))


def _csv_text(obj) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(obj, CutReport):
        w.writerow(REPORT_HEADER)
        w.writerow([obj.method_tag, obj.nets_cut, _num(obj.total_wl_cut_pct), _num(obj.median), _num(obj.mean)])
    else:
        w.writerow(TABLE_HEADER)
        for r in obj.rows:
            w.writerow([r.method, r.nets_cut, _num(r.total_wl_cut_pct), _num(r.median_norm),
                        _num(r.mean_norm), int(r.best_nets_cut), int(r.best_pct)])
    return buf.getvalue()


def report_to_dict(report: CutReport) -> dict:
    return {
        "method": report.method_tag,
        "nets_cut": report.nets_cut,
        "total_wl_cut_pct": report.total_wl_cut_pct,
        "median_norm": report.median,
        "mean_norm": report.mean,
        "total_wirelength": report.total_wirelength,
        "divisor": report.divisor,
        "cut_lengths": list(report.cut_lengths),
        "normalized_cut_lengths": list(report.normalized_cut_lengths),
        "histogram": {"bin_width": BIN_WIDTH, "counts": list(report.histogram[:N_BINS]),
                      "overflow": report.histogram[N_BINS]},
    }


def _json_text(obj) -> str:
    if isinstance(obj, CutReport):
        data = report_to_dict(obj)
    else:
        data = {"rows": [{"method": r.method, "nets_cut": r.nets_cut, "total_wl_cut_pct": r.total_wl_cut_pct,
                          "median_norm": r.median_norm, "mean_norm": r.mean_norm,
                          "best_nets_cut": r.best_nets_cut, "best_pct": r.best_pct} for r in obj.rows]}
    return json.dumps(data, indent=2) + "\n"


def _svg_text(report: CutReport) -> str:
    W, H = 640, 360
    left, right, top, bottom = 56, 24, 32, 48
    pw, ph = W - left - right, H - top - bottom
    counts = report.histogram
    slots = len(counts)
    bw = pw / slots
    peak = max(max(counts), 1)

    def x_of(v: float) -> float:
        return left + min(v, 1.0 + BIN_WIDTH / 2) / BIN_WIDTH * bw

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.2f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="13">'
           f'{report.method_tag} cut lengths (n={report.nets_cut})</text>']
    for i, c in enumerate(counts):
        if c:
            h = c / peak * ph
            out.append(f'<rect x="{left + i * bw:.2f}" y="{top + ph - h:.2f}" width="{bw:.2f}" '
                       f'height="{h:.2f}" fill="#4a7ab5"/>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        x = left + t / BIN_WIDTH * bw
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 16}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="10">{t:g}</text>')
    out.append(f'<text x="{left + pw - bw / 2:.2f}" y="{top + ph + 16}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="10">&gt;1</text>')
    out.append(f'<text x="{left - 6}" y="{top + 4}" text-anchor="end" font-family="sans-serif" '
               f'font-size="10">{peak}</text>')
    out.append(f'<text x="{left - 6}" y="{top + ph}" text-anchor="end" font-family="sans-serif" '
               f'font-size="10">0</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{H - 8}" text-anchor="middle" font-family="sans-serif" '
               f'font-size="11">length / (floorplan width + height)</text>')
    if report.nets_cut:
        xm = x_of(report.median)
        out.append(f'<line x1="{xm:.2f}" y1="{top}" x2="{xm:.2f}" y2="{top + ph}" stroke="#c0392b" '
                   f'stroke-width="1.5"/>')
        xa = x_of(report.mean)
        out.append(f'<line x1="{xa:.2f}" y1="{top}" x2="{xa:.2f}" y2="{top + ph}" stroke="#c0392b" '
                   f'stroke-width="1.5" stroke-dasharray="5,4"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render(obj, format: str) -> str:
    if not isinstance(obj, (CutReport, ComparisonTable)):
        raise DomainError(f"cannot export {type(obj).__name__}")
    if format == "csv":
        return _csv_text(obj)
    if format == "json":
        return _json_text(obj)
    if format == "svg":
        if not isinstance(obj, CutReport):
            raise DomainError("svg export needs a single CutReport")
        return _svg_text(obj)
    raise DomainError(f"unknown export format {format!r}; expected one of {FORMATS}")


def export(obj, path, format: str | None = None) -> Path:
    """Write a CutReport or ComparisonTable; the format defaults to the file suffix."""
    path = Path(path)
    fmt = format or path.suffix.lstrip(".").lower()
    text = render(obj, fmt)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path
