"""Gate-level tier partitioning for face-to-face 3D integration."""
from .core import Cell, Design, Floorplan, Hyperedge, Hypergraph, Net, build_hypergraph, hpwl
from .cluster import (Clustering, HierarchicalGeometric, ManhattanKMeans, NoClustering,
                      ProgressiveWireLength, cluster_hg, cluster_kmeans, cluster_none, cluster_pwl,
                      pwl_feasibility)
from .partition import (BalanceSpec, BruteForceBipartitioner, FMBipartitioner, Partition,
                        brute_force_bipartition, fm_bipartition)
from .report import CutReport, compare_methods, cut_report, export

__version__ = "0.1.0"

__all__ = [
    "Cell", "Net", "Floorplan", "Design", "Hyperedge", "Hypergraph", "hpwl", "build_hypergraph",
    "Clustering", "NoClustering", "HierarchicalGeometric", "ManhattanKMeans", "ProgressiveWireLength",
    "cluster_none", "cluster_hg", "cluster_kmeans", "cluster_pwl", "pwl_feasibility",
    "BalanceSpec", "Partition", "FMBipartitioner", "BruteForceBipartitioner", "fm_bipartition",
    "brute_force_bipartition", "CutReport", "cut_report", "compare_methods", "export",
]
