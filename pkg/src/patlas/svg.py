"""Minimal static SVG renderings: bump charts and density heat maps.

Hand-rolled SVG so the report bundle has no plotting dependencies; every
figure is also emitted as CSV for external tooling.
"""

from __future__ import annotations

from .portfolio import Heatmap2D

_DENSITY_FILL = {-1: "#ffffff", 0: "#4477cc", 1: "#44aa66", 2: "#cc4444"}

_PALETTE = ("#4477cc", "#cc4444", "#44aa66", "#aa7722", "#7755bb",
            "#2299aa", "#cc6699", "#778833", "#555555", "#bb3322")


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def bump_chart_svg(rankings: dict[int, list[tuple[str, int]]], title: str,
                   width: int = 760, height: int = 420) -> str:
    """Rank-over-year polylines; rank 1 on top, one line per region."""
    years = sorted(rankings)
    if not years:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"/>'
    max_rank = max(len(r) for r in rankings.values())
    regions = sorted({reg for ranked in rankings.values() for reg, _ in ranked})
    margin_l, margin_r, margin_t, margin_b = 60, 90, 36, 30
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b

    def x_of(year: int) -> float:
        if len(years) == 1:
            return margin_l + plot_w / 2
        return margin_l + plot_w * (year - years[0]) / (years[-1] - years[0])

    def y_of(rank: int) -> float:
        if max_rank == 1:
            return margin_t + plot_h / 2
        return margin_t + plot_h * (rank - 1) / (max_rank - 1)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{margin_l}" y="20" font-size="14" font-family="sans-serif">{title}</text>',
    ]
    for year in years:
        parts.append(
            f'<text x="{_fmt(x_of(year))}" y="{height - 8}" font-size="10" '
            f'text-anchor="middle" font-family="sans-serif">{year}</text>')
    for rank in range(1, max_rank + 1):
        parts.append(
            f'<text x="{margin_l - 10}" y="{_fmt(y_of(rank) + 3)}" font-size="10" '
            f'text-anchor="end" font-family="sans-serif">{rank}</text>')
    for idx, region in enumerate(regions):
        color = _PALETTE[idx % len(_PALETTE)]
        points = []
        last = None
        for year in years:
            ranked = {reg: pos + 1 for pos, (reg, _) in enumerate(rankings[year])}
            if region in ranked:
                points.append((x_of(year), y_of(ranked[region])))
                last = (year, ranked[region])
        if not points:
            continue
        path = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        for x, y in points:
            parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="3" fill="{color}"/>')
        if last is not None:
            parts.append(
                f'<text x="{_fmt(x_of(last[0]) + 8)}" y="{_fmt(y_of(last[1]) + 3)}" '
                f'font-size="10" fill="{color}" font-family="sans-serif">{region}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def heatmap_svg(hm: Heatmap2D, title: str, cell: int = 9) -> str:
    """Density-class grid (blue/green/red = low/intermediate/high)."""
    bins_x = hm.counts.shape[0]
    bins_y = hm.counts.shape[1]
    margin = 40
    width = margin * 2 + bins_x * cell
    height = margin * 2 + bins_y * cell
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{margin}" y="20" font-size="14" font-family="sans-serif">{title}</text>',
    ]
    for i in range(bins_x):
        for j in range(bins_y):
            cls = int(hm.density_class[i, j])
            if cls < 0:
                continue
            x = margin + i * cell
            y = margin + (bins_y - 1 - j) * cell
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                         f'fill="{_DENSITY_FILL[cls]}"/>')
    parts.append("</svg>")
    return "\n".join(parts)
