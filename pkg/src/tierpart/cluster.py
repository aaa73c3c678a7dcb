"""Gate-level clustering ahead of partitioning.

Four methods, each available as a scikit-learn style estimator and as a
plain function returning a :class:`Clustering`:

========  ==============================  ==========================
tag       estimator                       function
========  ==============================  ==========================
``NC``    :class:`NoClustering`           :func:`cluster_none`
``HG``    :class:`HierarchicalGeometric`  :func:`cluster_hg`
``KM``    :class:`ManhattanKMeans`        :func:`cluster_kmeans`
``PWL``   :class:`ProgressiveWireLength`  :func:`cluster_pwl`
========  ==============================  ==========================

Estimators accept a :class:`~tierpart.core.Design` or an ``(n, 2)`` array of
coordinates (P-WL needs nets, so it only takes a Design).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from .core import REL_EPS, Design
from .exceptions import DomainError, InfeasibleError
from .validation import check_design, check_geometry, check_int, check_length

METHOD_TAGS = ("NC", "HG", "KM", "PWL")
DEFAULT_GRAIN = 1000
DEFAULT_MAX_ITERS = 200
PWL_AGW_FACTOR = 100.0


@dataclass(frozen=True)
class Clustering:
    """Total map from cell id to a dense cluster id."""

    assignment: np.ndarray
    cluster_areas: np.ndarray
    cluster_centroids: np.ndarray
    method_tag: str
    params: dict = field(default_factory=dict)

    @classmethod
    def from_labels(cls, labels, areas, centers, method_tag, params=None) -> "Clustering":
        """Re-densify ``labels`` (dropping empty ids, keeping their order) and derive per-cluster stats."""
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        areas = np.asarray(areas, dtype=float)
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        if len(labels) == 0:
            return cls(np.zeros(0, np.int64), np.zeros(0), np.zeros((0, 2)), method_tag, dict(params or {}))
        _, dense = np.unique(labels, return_inverse=True)
        dense = dense.astype(np.int64)
        k = int(dense.max()) + 1
        counts = np.bincount(dense, minlength=k)
        cluster_areas = np.bincount(dense, weights=areas, minlength=k)
        centroids = np.column_stack([
            np.bincount(dense, weights=centers[:, 0], minlength=k) / counts,
            np.bincount(dense, weights=centers[:, 1], minlength=k) / counts,
        ])
        for a in (dense, cluster_areas, centroids):
            a.setflags(write=False)
        return cls(dense, cluster_areas, centroids, method_tag, dict(params or {}))

    @property
    def n_clusters(self) -> int:
        return len(self.cluster_areas)

    def members(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(np.bincount(self.assignment, minlength=self.n_clusters))[:-1]
        return np.split(order, bounds)

    def to_csv(self, design: Design, path) -> Path:
        """Write ``cell_name,cluster`` rows in cell-id order."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell_name", "cluster"])
            for cell, cid in zip(design.cells, self.assignment):
                w.writerow([cell.name, int(cid)])
        return path


class KmState(NamedTuple):
    seeds: np.ndarray
    iteration: int
    last_deltas: np.ndarray


class Feasibility(NamedTuple):
    feasible: bool
    cluster_id: int | None
    area_fraction: float


# --------------------------------------------------------------------------- helpers

def regular_seeds(floorplan, k: int) -> np.ndarray:
    """Centers of a ceil(sqrt k) x ceil(k / ceil(sqrt k)) tiling of the floorplan, row-major, first k."""
    cols = math.ceil(math.sqrt(k))
    rows = math.ceil(k / cols)
    xs = floorplan.x + (np.arange(cols) + 0.5) * floorplan.width / cols
    ys = floorplan.y + (np.arange(rows) + 0.5) * floorplan.height / rows
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])[:k]


def manhattan_assign(points: np.ndarray, seeds: np.ndarray, chunk: int = 8192) -> np.ndarray:
    """Index of the nearest seed in L1 distance; ties go to the lowest index."""
    out = np.empty(len(points), dtype=np.int64)
    for lo in range(0, len(points), chunk):
        p = points[lo:lo + chunk]
        d = np.abs(p[:, None, 0] - seeds[None, :, 0]) + np.abs(p[:, None, 1] - seeds[None, :, 1])
        out[lo:lo + chunk] = np.argmin(d, axis=1)
    return out


def _split_coordinate(coords: np.ndarray, areas: np.ndarray) -> float | None:
    """Area-median cut: the first sorted coordinate whose preceding area reaches half the total."""
    order = np.argsort(coords, kind="stable")
    before = np.concatenate([[0.0], np.cumsum(areas[order])[:-1]])
    half = areas.sum() / 2
    hit = np.flatnonzero(before >= half * (1 - REL_EPS))
    if len(hit) == 0:
        return None
    return float(coords[order[hit[0]]])


def _hg_leaves(origins: np.ndarray, areas: np.ndarray, depth: int) -> list[np.ndarray]:
    leaves = []
    stack = [(np.arange(len(origins)), 0)]
    while stack:
        idx, level = stack.pop()
        if level == depth:
            leaves.append(idx)
            continue
        axis = level % 2  # vertical cut (x) first, then horizontal (y)
        low, high = idx, idx[:0]
        if len(idx):
            cut = _split_coordinate(origins[idx, axis], areas[idx])
            if cut is not None:
                mask = origins[idx, axis] < cut
                low, high = idx[mask], idx[~mask]
        stack.append((high, level + 1))
        stack.append((low, level + 1))
    return leaves


class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra

    def labels(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)


# --------------------------------------------------------------------------- estimators

class _ClusterBase(ClusterMixin, BaseEstimator):
    method_tag = ""

    def _finish(self, geom, labels, params):
        self.clustering_ = Clustering.from_labels(labels, geom.areas, geom.centers, self.method_tag, params)
        self.labels_ = self.clustering_.assignment
        self.n_clusters_ = self.clustering_.n_clusters
        return self


class NoClustering(_ClusterBase):
    """Identity clustering: every cell is its own cluster."""

    method_tag = "NC"

    def fit(self, X, y=None, sample_weight=None):
        geom = check_geometry(X, sample_weight)
        return self._finish(geom, np.arange(len(geom.centers)), {})


class HierarchicalGeometric(_ClusterBase):
    """Recursive area-median bisection of the floorplan.

    Splits alternate vertical then horizontal until there are
    ``2**ceil(log2(n_clusters))`` leaf regions. A cell belongs to the region
    containing its origin (lower-left corner), so a cell straddling a border
    stays with its origin. Empty leaves are dropped.

    Parameters
    ----------
    n_clusters : int, default=1000
        Target number of clusters; rounded up to a power of two.
    """

    method_tag = "HG"

    def __init__(self, n_clusters=DEFAULT_GRAIN):
        self.n_clusters = n_clusters

    def fit(self, X, y=None, sample_weight=None):
        k = check_int(self.n_clusters, "n_clusters", minimum=1)
        geom = check_geometry(X, sample_weight)
        depth = math.ceil(math.log2(k)) if k > 1 else 0
        labels = np.empty(len(geom.origins), dtype=np.int64)
        for i, leaf in enumerate(_hg_leaves(geom.origins, geom.areas, depth)):
            labels[leaf] = i
        self.depth_ = depth
        return self._finish(geom, labels, {"target_k": k, "leaves": 2 ** depth})


class ManhattanKMeans(_ClusterBase):
    """Lloyd iterations with L1 assignment and regularly spread initial seeds.

    Each iteration assigns every cell center to its nearest seed in
    Manhattan distance (ties to the lowest seed index), then moves each seed
    to the mean of its members. Iteration stops once the ``percentile``-th
    percentile of seed displacements falls below ``tol`` or after
    ``max_iter`` iterations. Seeds left without members stay in place and
    their clusters are dropped from the result.

    Parameters
    ----------
    n_clusters : int, default=1000
    max_iter : int, default=200
    tol : float or None, default=None
        Displacement threshold. ``None`` means one average gate width, which
        requires fitting a Design.
    percentile : float, default=95
    """

    method_tag = "KM"

    def __init__(self, n_clusters=DEFAULT_GRAIN, max_iter=DEFAULT_MAX_ITERS, tol=None, percentile=95.0):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.tol = tol
        self.percentile = percentile

    def fit(self, X, y=None, sample_weight=None):
        geom = check_geometry(X, sample_weight)
        k = check_int(self.n_clusters, "n_clusters", minimum=1)
        max_iter = check_int(self.max_iter, "max_iter", minimum=1)
        if k > len(geom.centers):
            raise DomainError(f"k = {k} exceeds the number of cells ({len(geom.centers)})")
        if self.tol is None:
            if geom.design is None:
                raise DomainError("tol=None needs a Design to derive the average gate width")
            tol = geom.design.agw
        else:
            tol = check_length(self.tol, "tol")
        points = geom.centers
        seeds = regular_seeds(geom.floorplan, k)
        converged = False
        for it in range(1, max_iter + 1):
            labels = manhattan_assign(points, seeds)
            counts = np.bincount(labels, minlength=k)
            new = seeds.copy()
            filled = counts > 0
            new[filled, 0] = np.bincount(labels, weights=points[:, 0], minlength=k)[filled] / counts[filled]
            new[filled, 1] = np.bincount(labels, weights=points[:, 1], minlength=k)[filled] / counts[filled]
            deltas = np.abs(new - seeds).sum(axis=1)
            seeds = new
            if kmeans_converged(deltas, tol, self.percentile):
                converged = True
                break
        self.state_ = KmState(seeds, it, deltas)
        self.n_iter_ = it
        self.converged_ = converged
        self.cluster_centers_ = seeds[np.unique(labels)]
        params = {"k": k, "max_iters": max_iter, "tol": tol, "iterations": it, "converged": converged,
                  "dropped_empty": int(k - len(np.unique(labels)))}
        return self._finish(geom, labels, params)


def kmeans_converged(deltas, tol, percentile=95.0) -> bool:
    """True when the given percentile of seed displacements is strictly below ``tol``."""
    return bool(np.percentile(np.asarray(deltas, dtype=float), percentile) < tol)


class ProgressiveWireLength(_ClusterBase):
    """Absorb every net shorter than ``threshold`` into a single cluster.

    Starting from singletons, all cells of each sub-threshold net are merged
    (union-find); the result is the connected components of the
    sub-threshold nets, so no such net can later be cut.

    Parameters
    ----------
    threshold : float or "auto", default="auto"
        Length bound (strict). ``"auto"`` means 100 average gate widths.
    """

    method_tag = "PWL"

    def __init__(self, threshold="auto"):
        self.threshold = threshold

    def fit(self, X, y=None):
        design = check_design(X)
        if isinstance(self.threshold, str):
            if self.threshold != "auto":
                raise DomainError(f"threshold must be a length or 'auto', got {self.threshold!r}")
            threshold = default_pwl_threshold(design)
        else:
            threshold = check_length(self.threshold, "threshold")
        if not design.annotated:
            raise DomainError("P-WL clustering needs length-annotated nets")
        uf = UnionFind(design.n_cells)
        absorbed = 0
        for net in design.nets:
            if net.length < threshold:
                absorbed += 1
                first = net.pins[0]
                for p in net.pins[1:]:
                    uf.union(first, p)
        geom = check_geometry(design)
        self.threshold_ = threshold
        return self._finish(geom, uf.labels(), {"threshold": threshold, "absorbed_nets": absorbed})


# --------------------------------------------------------------------------- functional API

def cluster_none(design: Design) -> Clustering:
    return NoClustering().fit(design).clustering_


def cluster_hg(design: Design, target_k: int) -> Clustering:
    return HierarchicalGeometric(n_clusters=target_k).fit(design).clustering_


def cluster_kmeans(design: Design, k: int, max_iters: int = DEFAULT_MAX_ITERS) -> Clustering:
    return ManhattanKMeans(n_clusters=k, max_iter=max_iters).fit(design).clustering_


def cluster_pwl(design: Design, threshold) -> Clustering:
    return ProgressiveWireLength(threshold=threshold).fit(design).clustering_


def default_pwl_threshold(design: Design) -> float:
    """100 average gate widths."""
    return PWL_AGW_FACTOR * design.agw


def pwl_feasibility(clustering: Clustering, unbalance: float = 0.51) -> Feasibility:
    """Whether the largest cluster still fits on one side of a balanced bipartition.

    Infeasible iff the largest cluster's area fraction exceeds ``unbalance``
    (inclusive boundary).
    """
    areas = np.asarray(clustering.cluster_areas, dtype=float)
    if len(areas) == 0:
        return Feasibility(True, None, 0.0)
    cid = int(np.argmax(areas))
    frac = float(areas[cid] / areas.sum())
    if frac > unbalance * (1 + REL_EPS):
        return Feasibility(False, cid, frac)
    return Feasibility(True, cid, frac)


def require_pwl_feasible(clustering: Clustering, unbalance: float = 0.51) -> Feasibility:
    """:func:`pwl_feasibility`, raising InfeasibleError with the diagnostic when it fails."""
    feas = pwl_feasibility(clustering, unbalance)
    if not feas.feasible:
        threshold = clustering.params.get("threshold")
        raise InfeasibleError(
            f"P-WL cluster {feas.cluster_id} holds {feas.area_fraction:.2%} of the cell area, above the "
            f"{unbalance:.2%} side limit (threshold {threshold}); use a lower threshold",
            vertex=feas.cluster_id, fraction=feas.area_fraction)
    return feas


def make_clusterer(method: str, n_clusters=DEFAULT_GRAIN, threshold="auto", max_iter=DEFAULT_MAX_ITERS):
    """Estimator for a method name (``nc``, ``hg``, ``km``, ``pwl``; case-insensitive)."""
    method = method.lower()
    if method == "nc":
        return NoClustering()
    if method == "hg":
        return HierarchicalGeometric(n_clusters=n_clusters)
    if method in ("km", "kmeans"):
        return ManhattanKMeans(n_clusters=n_clusters, max_iter=max_iter)
    if method in ("pwl", "p-wl"):
        return ProgressiveWireLength(threshold=threshold)
    raise DomainError(f"unknown clustering method {method!r}")
