"""Standalone SVG spider charts of the five property scores."""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .mme import PROPERTIES, PROPERTY_NAMES, MMEResult

CANVAS = 512
GRID_LEVELS = (0.2, 0.4, 0.6, 0.8, 1.0)
PRECISION_COLOR = "#d62728"
RECALL_COLOR = "#1f77b4"


@dataclass(frozen=True)
class SpiderChartSpec:
    precision: tuple
    recall: tuple
    title: str = ""
    size: int = CANVAS
    axes: tuple = PROPERTIES

    def __post_init__(self):
        if self.axes != PROPERTIES:
            raise ValueError(f"axes must be {PROPERTIES}")
        for name in ("precision", "recall"):
            values = tuple(getattr(self, name))
            if len(values) != len(PROPERTIES):
                raise ValueError(f"{name} needs {len(PROPERTIES)} values")
            object.__setattr__(self, name, tuple(min(1.0, max(0.0, float(v))) for v in values))

    @classmethod
    def from_result(cls, result: MMEResult, title: str = "") -> "SpiderChartSpec":
        return cls(
            tuple(result[p].prf.precision for p in PROPERTIES),
            tuple(result[p].prf.recall for p in PROPERTIES),
            title,
        )

    @property
    def center(self) -> float:
        return self.size / 2

    @property
    def radius(self) -> float:
        return self.size * 0.34


def vertex(spec: SpiderChartSpec, axis: int, value: float) -> tuple[float, float]:
    """Canvas position of ``value`` on ``axis``; axis 0 points straight up."""
    angle = -math.pi / 2 + 2 * math.pi * axis / len(PROPERTIES)
    r = spec.radius * value
    return spec.center + r * math.cos(angle), spec.center + r * math.sin(angle)


def _pt(xy) -> str:
    return f"{xy[0]:.3f},{xy[1]:.3f}"


def _polygon(spec, values) -> str:
    return " ".join(_pt(vertex(spec, i, v)) for i, v in enumerate(values))


def render_svg(spec: SpiderChartSpec) -> str:
    """Render ``spec``; identical specs give byte-identical output."""
    s = spec.size
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}" '
        'font-family="sans-serif">',
        f'<rect x="0" y="0" width="{s}" height="{s}" fill="#ffffff"/>',
    ]
    if spec.title:
        out.append(f'<text x="{s / 2:.3f}" y="24" font-size="16" text-anchor="middle">{escape(spec.title)}</text>')
    out.append('<g id="grid" fill="none" stroke="#cccccc" stroke-width="1">')
    for level in GRID_LEVELS:
        out.append(f'<polygon points="{_polygon(spec, [level] * 5)}"/>')
    for i in range(len(PROPERTIES)):
        out.append(f'<line x1="{spec.center:.3f}" y1="{spec.center:.3f}" '
                   f'x2="{vertex(spec, i, 1.0)[0]:.3f}" y2="{vertex(spec, i, 1.0)[1]:.3f}"/>')
    out.append("</g>")

    out.append('<g id="axis-labels" font-size="14" text-anchor="middle">')
    for i, prop in enumerate(PROPERTIES):
        x, y = vertex(spec, i, 1.15)
        out.append(f'<text x="{x:.3f}" y="{y + 5:.3f}"><title>{PROPERTY_NAMES[prop]}</title>{prop}</text>')
    out.append("</g>")

    for name, values, color in (("recall", spec.recall, RECALL_COLOR), ("precision", spec.precision, PRECISION_COLOR)):
        out.append(f'<polygon id="{name}" points="{_polygon(spec, values)}" fill="{color}" '
                   f'fill-opacity="0.15" stroke="{color}" stroke-width="2"/>')

    y0 = s - 58
    out.append('<g id="legend" font-size="11">')
    header = "".join(f"{p:>7}" for p in PROPERTIES)
    out.append(f'<text x="12" y="{y0}" xml:space="preserve" font-family="monospace">{"":10}{header}</text>')
    for row, (name, values, color) in enumerate((("recall", spec.recall, RECALL_COLOR),
                                                 ("precision", spec.precision, PRECISION_COLOR)), start=1):
        cells = "".join(f"{v:7.3f}" for v in values)
        out.append(f'<text x="12" y="{y0 + 16 * row}" xml:space="preserve" font-family="monospace" '
                   f'fill="{color}">{name:<10}{cells}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(spec: SpiderChartSpec, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(render_svg(spec))
