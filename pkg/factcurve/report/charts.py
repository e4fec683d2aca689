from xml.sax.saxutils import escape

from factcurve.core.records import POSITION_BUCKETS
from factcurve.judging.strategies import JudgmentStrategy

PALETTE = {
    "blue": "#1f77b4",
    "red": "#d62728",
    "green": "#2ca02c",
    "orange": "#ff7f0e",
    "purple": "#9467bd",
    "grey": "#7f7f7f",
}

STRATEGY_LABELS = {
    JudgmentStrategy.DIRECT_ASKING: "Direct asking",
    JudgmentStrategy.QUESTION_ANSWERING: "QA",
    JudgmentStrategy.QA_WITH_NOA: "QA w/ NOA",
}
STRATEGY_COLORS = {
    JudgmentStrategy.DIRECT_ASKING: "green",
    JudgmentStrategy.QUESTION_ANSWERING: "blue",
    JudgmentStrategy.QA_WITH_NOA: "red",
}


def _num(value):
    # Fixed decimals keep the output byte-stable
    return f"{value:.2f}"


def _percent(value):
    return None if value is None else value * 100


def _bucket_axis():
    return [b.midpoint * 100 for b in POSITION_BUCKETS], [b.label for b in POSITION_BUCKETS]


class SvgPlot:
    """A minimal line plot written straight to SVG text."""

    MARGIN_LEFT = 64
    MARGIN_RIGHT = 24
    MARGIN_TOP = 40
    MARGIN_BOTTOM = 56
    Y_TICKS = 5

    def __init__(self, title, width=640, height=400):
        self.title = title
        self.width = width
        self.height = height
        self.labels = {"bottom": "", "left": ""}
        self.x_range = (0.0, 100.0)
        self.y_range = None
        self.x_ticks = []
        self.series = []

    def set_label(self, axis, text):
        self.labels[axis] = text

    def set_x_range(self, lower, upper):
        self.x_range = (float(lower), float(upper))

    def set_y_range(self, lower, upper):
        self.y_range = (float(lower), float(upper))

    def set_x_ticks(self, positions, labels):
        self.x_ticks = list(zip(positions, labels))

    def clear(self):
        self.series = []

    def plot(self, xs, ys, color="blue", name="", dashed=False):
        """Adds a series; a None value breaks the line at that point."""
        self.series.append({
            "points": list(zip(xs, ys)),
            "color": PALETTE.get(color, color),
            "name": name,
            "dashed": dashed,
        })

    def _resolved_y_range(self):
        if self.y_range is not None:
            return self.y_range
        values = [y for s in self.series for _, y in s["points"] if y is not None]
        top = max(values) if values else 1.0
        return 0.0, (top * 1.1 if top > 0 else 1.0)

    def _to_px(self, x, y, y_range):
        plot_w = self.width - self.MARGIN_LEFT - self.MARGIN_RIGHT
        plot_h = self.height - self.MARGIN_TOP - self.MARGIN_BOTTOM
        x_lo, x_hi = self.x_range
        y_lo, y_hi = y_range
        px = self.MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w
        py = self.MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h
        return px, py

    def _axes(self, y_range):
        left, bottom = self.MARGIN_LEFT, self.height - self.MARGIN_BOTTOM
        right, top = self.width - self.MARGIN_RIGHT, self.MARGIN_TOP
        parts = [
            f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="#333" stroke-width="1"/>',
            f'<line x1="{left}" y1="{bottom}" x2="{left}" y2="{top}" stroke="#333" stroke-width="1"/>',
        ]
        for x, label in self.x_ticks:
            px, _ = self._to_px(x, y_range[0], y_range)
            parts.append(f'<line x1="{_num(px)}" y1="{bottom}" x2="{_num(px)}" y2="{bottom + 5}" stroke="#333"/>')
            parts.append(f'<text x="{_num(px)}" y="{bottom + 20}" text-anchor="middle" font-size="12">'
                         f'{escape(label)}</text>')
        y_lo, y_hi = y_range
        for i in range(self.Y_TICKS + 1):
            y = y_lo + (y_hi - y_lo) * i / self.Y_TICKS
            _, py = self._to_px(self.x_range[0], y, y_range)
            parts.append(f'<line x1="{left - 5}" y1="{_num(py)}" x2="{right}" y2="{_num(py)}" stroke="#ddd"/>')
            parts.append(f'<text x="{left - 8}" y="{_num(py + 4)}" text-anchor="end" font-size="12">{_num(y)}</text>')
        parts.append(f'<text x="{(left + right) / 2:.2f}" y="{self.height - 14}" text-anchor="middle" '
                     f'font-size="13">{escape(self.labels["bottom"])}</text>')
        parts.append(f'<text x="16" y="{(top + bottom) / 2:.2f}" text-anchor="middle" font-size="13" '
                     f'transform="rotate(-90 16 {(top + bottom) / 2:.2f})">{escape(self.labels["left"])}</text>')
        return parts

    def _series(self, series, y_range):
        parts = []
        segments = [[]]
        for x, y in series["points"]:
            if y is None:
                segments.append([])
            else:
                segments[-1].append(self._to_px(x, y, y_range))
        dash = ' stroke-dasharray="6 4"' if series["dashed"] else ""
        for segment in segments:
            if len(segment) > 1:
                points = " ".join(f"{_num(px)},{_num(py)}" for px, py in segment)
                parts.append(f'<polyline points="{points}" fill="none" stroke="{series["color"]}" '
                             f'stroke-width="2"{dash}/>')
            for px, py in segment:
                parts.append(f'<circle cx="{_num(px)}" cy="{_num(py)}" r="3.5" fill="{series["color"]}"/>')
        return parts

    def _legend(self):
        parts = []
        x = self.width - self.MARGIN_RIGHT - 170
        for i, series in enumerate(s for s in self.series if s["name"]):
            y = self.MARGIN_TOP + 8 + 18 * i
            dash = ' stroke-dasharray="6 4"' if series["dashed"] else ""
            parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{series["color"]}" '
                         f'stroke-width="2"{dash}/>')
            parts.append(f'<text x="{x + 30}" y="{y + 4}" font-size="12">{escape(series["name"])}</text>')
        return parts

    def render(self):
        y_range = self._resolved_y_range()
        body = [f'<text x="{self.width / 2:.2f}" y="24" text-anchor="middle" font-size="15">'
                f'{escape(self.title)}</text>']
        body += self._axes(y_range)
        for series in self.series:
            body += self._series(series, y_range)
        body += self._legend()
        return (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {self.width} {self.height}" '
                f'width="{self.width}" height="{self.height}" role="img" aria-label="{escape(self.title)}">\n'
                + "\n".join(f"  {line}" for line in body)
                + "\n</svg>\n")

    def save(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as file:
            file.write(self.render())


class PositionChart:
    """Base for the charts whose x axis is the relative-position bucket."""

    def __init__(self, title, y_label, percent=True):
        self.chart = SvgPlot(title=title)
        self.chart.set_label("bottom", "Relative position (%)")
        self.chart.set_label("left", y_label)
        self.chart.set_x_range(0, 100)
        xs, labels = _bucket_axis()
        self.xs = xs
        self.chart.set_x_ticks(xs, labels)
        if percent:
            self.chart.set_y_range(0, 100)

    def save(self, path):
        self.chart.save(path)


class FractionsChart(PositionChart):
    def __init__(self):
        super().__init__("Claim labels by position", "Claims (%)")

    def update_chart(self, stats):
        """Supported, unsupported and irrelevant shares per bucket."""
        self.chart.clear()
        self.chart.plot(self.xs, [_percent(s.frac_supported) for s in stats], "blue", "Supported")
        self.chart.plot(self.xs, [_percent(s.frac_unsupported) for s in stats], "red", "Unsupported")
        self.chart.plot(self.xs, [_percent(s.frac_irrelevant) for s in stats], "grey", "Irrelevant")


class CountsChart(PositionChart):
    def __init__(self):
        super().__init__("Claims per generation by position", "Claims per generation", percent=False)

    def update_chart(self, stats):
        self.chart.clear()
        self.chart.plot(self.xs, [s.avg_supported_count for s in stats], "blue", "Supported")
        self.chart.plot(self.xs, [s.avg_unsupported_count for s in stats], "red", "Unsupported")


class SelfScoreChart(PositionChart):
    def __init__(self):
        super().__init__("Self-Known and Self-Unknown by position", "Score (%)")

    def update_chart(self, reports):
        """
        :param reports: Mapping JudgmentStrategy -> SelfScoreReport; Self-Known solid, Self-Unknown dashed.
        """
        self.chart.clear()
        for strategy in sorted(reports, key=lambda s: s.value):
            rows = reports[strategy].buckets
            label = STRATEGY_LABELS[strategy]
            color = STRATEGY_COLORS[strategy]
            self.chart.plot(self.xs, [_percent(r.self_known) for r in rows], color, f"Self-Known ({label})")
            self.chart.plot(self.xs, [_percent(r.self_unknown) for r in rows], color, f"Self-Unknown ({label})",
                            dashed=True)


class FlipRateChart(PositionChart):
    def __init__(self):
        super().__init__("Flip rate from QA to QA w/ NOA", "Flip rate (%)")

    def update_chart(self, records):
        self.chart.clear()
        for label, color in (("S", "blue"), ("NS", "red")):
            rows = sorted((r for r in records if r.label_class.code == label), key=lambda r: r.bucket.index)
            name = "Supported" if label == "S" else "Unsupported"
            self.chart.plot(self.xs, [_percent(r.flip_rate) for r in rows], color, name)


class EstimatesChart(PositionChart):
    def __init__(self):
        super().__init__("Estimated factuality by position", "Factuality (%)")

    def update_chart(self, rows):
        """
        :param rows: EstimateRows; annotated factuality is drawn when present.
        """
        self.chart.clear()
        self.chart.plot(self.xs, [_percent(r.estimated_factuality) for r in rows], "purple",
                        "Model-consistent estimate")
        if any(r.annotated_factuality is not None for r in rows):
            self.chart.plot(self.xs, [_percent(r.annotated_factuality) for r in rows], "orange",
                            "Annotated factuality", dashed=True)
