"""Input checks shared by the estimators."""
from __future__ import annotations

import numbers
from typing import NamedTuple

import numpy as np
from sklearn.utils import check_array

from .core import Design, Floorplan, Hypergraph
from .exceptions import DomainError


def check_int(value, name, minimum=None, maximum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    if maximum is not None and value > maximum:
        raise DomainError(f"{name} must be <= {maximum}, got {value}")
    return value


def check_length(value, name) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise DomainError(f"{name} must be a finite number, got {value!r}")
    if value < 0:
        raise DomainError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_max_fraction(value) -> float:
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise DomainError(f"max_fraction must be a number, got {value!r}")
    if not 0.5 <= value < 1:
        raise DomainError(f"max_fraction must lie in [0.5, 1), got {value}")
    return float(value)


class Geometry(NamedTuple):
    design: Design | None
    centers: np.ndarray
    origins: np.ndarray
    areas: np.ndarray
    floorplan: Floorplan | None


def check_geometry(X, sample_weight=None) -> Geometry:
    """Accept a Design or an ``(n, 2)`` array of coordinates.

    Arrays stand for both cell centers and origins; ``sample_weight`` gives
    per-row areas (unit by default).
    """
    if isinstance(X, Design):
        if sample_weight is not None:
            raise DomainError("sample_weight is taken from cell areas when fitting a Design")
        return Geometry(X, X.centers, X.origins, X.areas, X.floorplan)
    pts = check_array(X, dtype=float, ensure_min_samples=0, ensure_all_finite=True)
    if pts.shape[1] != 2:
        raise DomainError(f"expected (n, 2) coordinates, got shape {pts.shape}")
    if sample_weight is None:
        areas = np.ones(len(pts))
    else:
        areas = np.asarray(sample_weight, dtype=float).reshape(-1)
        if len(areas) != len(pts) or (areas <= 0).any():
            raise DomainError("sample_weight must hold one positive value per row")
    floorplan = None
    if len(pts):
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        span = np.maximum(hi - lo, 1e-12)
        floorplan = Floorplan(float(lo[0]), float(lo[1]), float(span[0]), float(span[1]))
    return Geometry(None, pts, pts, areas, floorplan)


def check_design(X, name="X") -> Design:
    if not isinstance(X, Design):
        raise DomainError(f"{name} must be a Design, got {type(X).__name__}")
    return X


def check_hypergraph(hg) -> Hypergraph:
    if not isinstance(hg, Hypergraph):
        raise DomainError(f"expected a Hypergraph, got {type(hg).__name__}")
    return hg
