"""SVG rendering: structure, axis transform, and determinism."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest

from slidebench.svgplot import (
    MARGIN_LEFT,
    MARGIN_TOP,
    data_to_pixel,
    line_plot,
    write_svg,
)


def parse_polyline_points(svg_text: str) -> list[list[tuple[float, float]]]:
    root = ET.fromstring(svg_text)
    ns = "{http://www.w3.org/2000/svg}"
    out = []
    for poly in root.iter(f"{ns}polyline"):
        pts = []
        for token in poly.attrib["points"].split():
            x, y = token.split(",")
            pts.append((float(x), float(y)))
        out.append(pts)
    return out


class TestLinePlot:
    def test_well_formed_xml(self, tmp_path):
        svg = line_plot(
            [("a", np.asarray([0.0, 0.5, 1.0]), np.asarray([0.0, 0.7, 1.0]))],
            title="ROC", x_label="FPR", y_label="TPR",
            x_range=(0, 1), y_range=(0, 1),
        )
        path = write_svg(svg, tmp_path / "roc.svg")
        ET.parse(path)  # raises on malformed XML

    def test_perfect_roc_passes_top_left_corner(self):
        # A perfect ROC curve has the point (0, 1); its pixel position must
        # be the top-left corner of the plot rectangle.
        fpr = np.asarray([0.0, 0.0, 1.0])
        tpr = np.asarray([0.0, 1.0, 1.0])
        svg = line_plot(
            [("c", fpr, tpr)], title="", x_label="", y_label="",
            x_range=(0, 1), y_range=(0, 1),
        )
        polys = parse_polyline_points(svg)
        assert len(polys) == 1
        expected = data_to_pixel(0.0, 1.0, (0, 1), (0, 1))
        assert expected == (MARGIN_LEFT, MARGIN_TOP)
        assert any(
            abs(px - expected[0]) < 0.01 and abs(py - expected[1]) < 0.01
            for px, py in polys[0]
        )

    def test_axis_transform_matches_vertices(self):
        xs = np.asarray([0.0, 0.25, 1.0])
        ys = np.asarray([0.2, 0.9, 0.4])
        svg = line_plot([("s", xs, ys)], title="t", x_label="x", y_label="y",
                        x_range=(0, 1), y_range=(0, 1))
        pts = parse_polyline_points(svg)[0]
        for (x, y), (px, py) in zip(zip(xs, ys), pts):
            ex, ey = data_to_pixel(x, y, (0, 1), (0, 1))
            assert px == pytest.approx(ex, abs=0.01)
            assert py == pytest.approx(ey, abs=0.01)

    def test_single_point_series_renders_circle(self):
        svg = line_plot([("one", np.asarray([5.0]), np.asarray([0.8]))],
                        title="", x_label="", y_label="")
        assert "<circle" in svg
        ET.fromstring(svg)

    def test_deterministic_output(self):
        args = ([("a", np.asarray([0.0, 1.0]), np.asarray([0.1, 0.9]))],)
        kw = dict(title="T", x_label="x", y_label="y", x_range=(0.0, 1.0), y_range=(0.0, 1.0))
        assert line_plot(*args, **kw) == line_plot(*args, **kw)

    def test_labels_and_diagonal(self):
        svg = line_plot(
            [("series-1", np.asarray([0.0, 1.0]), np.asarray([0.0, 1.0]))],
            title="My plot", x_label="False positive rate", y_label="True positive rate",
            x_range=(0, 1), y_range=(0, 1), diagonal=True,
        )
        assert "My plot" in svg
        assert "False positive rate" in svg
        assert "stroke-dasharray" in svg
        assert "series-1" in svg

    def test_escapes_markup(self):
        svg = line_plot(
            [("a<b&c", np.asarray([0.0, 1.0]), np.asarray([0.0, 1.0]))],
            title="x<y>", x_label="", y_label="",
        )
        ET.fromstring(svg)

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            line_plot([], title="", x_label="", y_label="")
