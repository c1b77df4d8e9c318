import math
import re

import pytest

from mme_eval.chart import CANVAS, SpiderChartSpec, render_svg, vertex, write_svg
from mme_eval.mme import PROPERTIES


def polygon(svg, name):
    pts = re.search(rf'id="{name}" points="([^"]+)"', svg).group(1).split()
    return [tuple(float(v) for v in p.split(",")) for p in pts]


def test_five_axes_fixed_order():
    spec = SpiderChartSpec((1,) * 5, (1,) * 5)
    assert spec.axes == ("D", "U", "B", "T", "R")
    with pytest.raises(ValueError):
        SpiderChartSpec((1,) * 5, (1,) * 5, axes=("U", "D", "B", "T", "R"))
    with pytest.raises(ValueError):
        SpiderChartSpec((1,) * 4, (1,) * 5)


def test_values_clamped():
    spec = SpiderChartSpec((1.5, -0.2, 0.5, 0.5, 0.5), (0,) * 5)
    assert spec.precision[:2] == (1.0, 0.0)


def test_first_axis_points_up():
    spec = SpiderChartSpec((1,) * 5, (1,) * 5)
    x, y = vertex(spec, 0, 1.0)
    assert x == pytest.approx(CANVAS / 2)
    assert y == pytest.approx(CANVAS / 2 - spec.radius)


def test_all_ones_recall_on_outer_pentagon():
    spec = SpiderChartSpec((1,) * 5, (1,) * 5)
    svg = render_svg(spec)
    outer = re.findall(r'<polygon points="([^"]+)"/>', svg)[-1]
    recall = re.search(r'id="recall" points="([^"]+)"', svg).group(1)
    assert recall == outer


def test_u_vertex_at_one_third_radius():
    spec = SpiderChartSpec((1, 1 / 3, 1, 1, 1), (1,) * 5)
    x, y = polygon(render_svg(spec), "precision")[1]
    assert math.hypot(x - spec.center, y - spec.center) == pytest.approx(spec.radius / 3, abs=1e-3)


def test_labels_and_legend():
    svg = render_svg(SpiderChartSpec((0.25,) * 5, (0.5,) * 5, title="a & b"))
    for prop in PROPERTIES:
        assert f"</title>{prop}</text>" in svg
    assert "a &amp; b" in svg
    assert "0.250" in svg and "0.500" in svg


def test_byte_identical(tmp_path):
    spec = SpiderChartSpec((0.1, 0.2, 0.3, 0.4, 0.5), (0.9, 0.8, 0.7, 0.6, 0.5), "x")
    write_svg(spec, tmp_path / "a.svg")
    write_svg(spec, tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
