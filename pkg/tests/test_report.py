import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tierpart.cluster import cluster_none, cluster_pwl
from tierpart.core import Floorplan, build_hypergraph
from tierpart.exceptions import DomainError, InfeasibleError, IntegrityError
from tierpart.partition import fm_bipartition, make_partition
from tierpart.report import (REPORT_HEADER, CutReport, check_report, compare_methods, cut_report, export,
                             histogram, recount_nets_cut, render)

from conftest import designs, make_design

FP = Floorplan(0, 0, 100, 100)


def toy():
    d = make_design([(1, 1), (3, 1), (1, 11), (5, 11), (1, 21), (15, 21)], [(0, 1), (2, 3), (4, 5)], floorplan=FP)
    hg = build_hypergraph(d, cluster_none(d))
    return d, hg


def test_pct_example():
    d, hg = toy()
    r = cut_report(d, hg, make_partition(hg, [0, 1, 0, 1, 1, 1]), "NC")
    assert r.nets_cut == 2
    assert r.cut_lengths == (2.0, 4.0)
    assert r.total_wl_cut_pct == pytest.approx(30.0)
    assert r.normalized_cut_lengths == pytest.approx((0.01, 0.02))
    assert r.median == pytest.approx(0.015) and r.mean == pytest.approx(0.015)


def test_normalization_example():
    d = make_design([(10, 50), (60, 50)], [(0, 1)], floorplan=FP)
    hg = build_hypergraph(d, cluster_none(d))
    r = cut_report(d, hg, make_partition(hg, [0, 1]))
    assert r.normalized_cut_lengths == (0.25,)
    assert r.divisor == 200


def test_no_cut():
    d, hg = toy()
    r = cut_report(d, hg, make_partition(hg, [0] * 6))
    assert (r.nets_cut, r.total_wl_cut_pct, r.cut_lengths) == (0, 0.0, ())
    assert sum(r.histogram) == 0


def test_zero_total_wirelength():
    d = make_design([(1, 1), (5, 5)], [(0,), (1,)])
    hg = build_hypergraph(d, cluster_none(d))
    with pytest.raises(DomainError):
        cut_report(d, hg, make_partition(hg, [0, 1]))


def test_partition_mismatch():
    d, hg = toy()
    with pytest.raises(IntegrityError):
        cut_report(d, hg, make_partition(build_hypergraph(d, [0, 0, 1, 1, 2, 2]), [0, 1, 0]))


def test_histogram_bins():
    h = histogram([0.0, 0.005, 0.01, 0.5, 1.0, 1.2])
    assert len(h) == 101
    assert h[0] == 2 and h[1] == 1 and h[50] == 1 and h[99] == 1 and h[100] == 1


def report(tag, n, pct):
    return CutReport(tag, n, pct, tuple([1.0] * n), tuple([0.1] * n), 0.1, 0.1, histogram([0.1] * n), 1, 0, 1)


def test_compare_flags():
    t = compare_methods([report("NC", 100, 3.5), report("PWL", 110, 6.5)])
    assert (t.row("NC").best_nets_cut, t.row("NC").best_pct) == (True, False)
    assert (t.row("PWL").best_nets_cut, t.row("PWL").best_pct) == (False, True)
    t = compare_methods([report("HG", 5, 1.0)])
    assert t.rows[0].best_nets_cut and t.rows[0].best_pct
    t = compare_methods([report("A", 5, 1.0), report("B", 5, 2.0)])
    assert [r.best_nets_cut for r in t.rows] == [True, True]
    with pytest.raises(DomainError):
        compare_methods([])
    assert "NC" in compare_methods([report("NC", 1, 1.0)]).to_text()


def test_csv_export(tmp_path):
    d, hg = toy()
    r = cut_report(d, hg, make_partition(hg, [0, 1, 0, 1, 1, 1]), "NC")
    text = export(r, tmp_path / "r.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == ",".join(REPORT_HEADER) == "method,nets_cut,total_wl_cut_pct,median_norm,mean_norm"
    assert lines[1].startswith("NC,2,30.0")
    table = export(compare_methods([r]), tmp_path / "t.csv").read_text()
    assert table.splitlines()[0].endswith("best_nets_cut,best_pct")


def test_json_export(tmp_path):
    d, hg = toy()
    r = cut_report(d, hg, make_partition(hg, [0, 1, 0, 1, 1, 1]), "NC")
    doc = json.loads(export(r, tmp_path / "r.json").read_text())
    assert doc["nets_cut"] == 2 and doc["cut_lengths"] == [2.0, 4.0]
    assert len(doc["histogram"]["counts"]) == 100


def test_svg_export(tmp_path):
    d, hg = toy()
    r = cut_report(d, hg, make_partition(hg, [0, 1, 0, 1, 1, 1]), "NC")
    root = ET.fromstring(export(r, tmp_path / "r.svg").read_text())
    lines = root.findall("{http://www.w3.org/2000/svg}line")
    assert any(l.get("stroke-dasharray") for l in lines)
    assert "href" not in ET.tostring(root).decode()


def test_svg_empty_distribution(tmp_path):
    d, hg = toy()
    r = cut_report(d, hg, make_partition(hg, [0] * 6))
    root = ET.fromstring(render(r, "svg"))
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}line")) >= 2
    assert len(root.findall(f"{ns}rect")) == 1  # background only


def test_export_is_byte_deterministic(tmp_path):
    d, hg = toy()
    r = cut_report(d, hg, make_partition(hg, [0, 1, 0, 1, 1, 1]), "NC")
    for fmt in ("csv", "json", "svg"):
        a = export(r, tmp_path / f"a.{fmt}").read_bytes()
        b = export(r, tmp_path / f"b.{fmt}", fmt).read_bytes()
        assert a == b


def test_export_bad_format(tmp_path):
    d, hg = toy()
    r = cut_report(d, hg, make_partition(hg, [0] * 6))
    with pytest.raises(DomainError):
        export(r, tmp_path / "r.xlsx")
    with pytest.raises(DomainError):
        export(compare_methods([r]), tmp_path / "t.svg")


def independent_recount(design, labels, side):
    count = 0
    for net in design.nets:
        dies = {side[labels[p]] for p in net.pins}
        count += len(dies) == 2
    return count


@given(designs(min_cells=2, max_nets=25), st.floats(0, 40), st.integers(0, 99))
def test_recount_and_conservation(d, t, seed):
    if d.total_wirelength == 0:
        return
    c = cluster_pwl(d, t)
    hg = build_hypergraph(d, c)
    if c.n_clusters < 2 or c.cluster_areas.max() > 0.51 * c.cluster_areas.sum():
        return
    try:
        p = fm_bipartition(hg, 0.51, 2, seed)
    except InfeasibleError:
        return
    r = cut_report(d, hg, p, "PWL")
    check_report(r, d, c, p)
    assert r.nets_cut == independent_recount(d, c.assignment, p.side) == recount_nets_cut(d, c, p)
    assert math.isclose(r.cut_wirelength + r.uncut_wirelength, d.total_wirelength, rel_tol=1e-9, abs_tol=1e-12)
    assert 0 <= r.total_wl_cut_pct <= 100
    assert np.allclose(r.normalized_cut_lengths, np.array(r.cut_lengths) / (d.floorplan.width + d.floorplan.height))
    for net_id, norm in zip(sorted(hg.edges[k].net_id for k in p.cut_edges), r.normalized_cut_lengths):
        if len(d.nets[net_id].pins) == 2:
            assert norm <= 1 + 1e-12
    assert sum(r.histogram) == r.nets_cut


def test_check_report_detects_tampering():
    d, hg = toy()
    p = make_partition(hg, [0, 1, 0, 1, 1, 1])
    r = cut_report(d, hg, p)
    bad = CutReport(r.method_tag, 1, r.total_wl_cut_pct, r.cut_lengths[:1], r.normalized_cut_lengths[:1],
                    r.median, r.mean, r.histogram, r.total_wirelength, r.uncut_wirelength, r.divisor)
    with pytest.raises(IntegrityError):
        check_report(bad, d, cluster_none(d), p)
    with pytest.raises(IntegrityError):
        CutReport("X", 3, 1.0, (1.0,), (0.1,), 0.1, 0.1, (), 1, 0, 1)
