"""Deterministic text/SVG/DOT/CSV exports for the analytics results.

SVG is built by string assembly so identical inputs give byte-identical files;
no plotting backend is involved.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .analytics import ClusterTree, CorrelationReport, SimilarityStats

_SVG_HEADER = ('<svg xmlns="http://www.w3.org/2000/svg" width="{w}" '
               'height="{h}" viewBox="0 0 {w} {h}">')


def _fmt(x: float) -> str:
    return f"{x:.4f}".rstrip("0").rstrip(".")


def merge_list_text(tree: ClusterTree) -> str:
    """One merge per line: left right distance size."""
    return "".join(f"{m.left} {m.right} {m.distance!r} {m.size}\n"
                   for m in tree.merges)


def _leaf_order(tree: ClusterTree) -> list[int]:
    n = tree.n_leaves
    if not tree.merges:
        return list(range(n))
    children = {n + i: (m.left, m.right) for i, m in enumerate(tree.merges)}
    order: list[int] = []
    stack = [n + len(tree.merges) - 1]
    while stack:
        node = stack.pop()
        if node < n:
            order.append(node)
        else:
            left, right = children[node]
            stack.append(right)
            stack.append(left)
    return order


def dendrogram_svg(tree: ClusterTree, labels: list[str] | None = None,
                   width: int = 900, height: int = 480) -> str:
    """Bottom-up dendrogram: leaves along the x axis, merge height = linkage
    distance."""
    n = tree.n_leaves
    margin = 40.0
    label_band = 70.0
    plot_w = width - 2 * margin
    plot_h = height - margin - label_band
    order = _leaf_order(tree)
    slot = {leaf: i for i, leaf in enumerate(order)}
    max_d = max((m.distance for m in tree.merges), default=1.0) or 1.0

    def x_of(pos: float) -> float:
        return margin + (pos + 0.5) * plot_w / max(n, 1)

    def y_of(dist: float) -> float:
        return margin + plot_h * (1.0 - dist / max_d)

    # node -> (x position in leaf units, merge distance)
    coords: dict[int, tuple[float, float]] = {
        leaf: (float(slot[leaf]), 0.0) for leaf in range(n)}
    parts = [_SVG_HEADER.format(w=width, h=height),
             '<style>line{stroke:#345;stroke-width:1}text{font:10px sans-serif}'
             '</style>']
    for i, m in enumerate(tree.merges):
        (xl, dl), (xr, dr) = coords[m.left], coords[m.right]
        y = y_of(m.distance)
        parts.append(f'<line x1="{_fmt(x_of(xl))}" y1="{_fmt(y_of(dl))}" '
                     f'x2="{_fmt(x_of(xl))}" y2="{_fmt(y)}"/>')
        parts.append(f'<line x1="{_fmt(x_of(xr))}" y1="{_fmt(y_of(dr))}" '
                     f'x2="{_fmt(x_of(xr))}" y2="{_fmt(y)}"/>')
        parts.append(f'<line x1="{_fmt(x_of(xl))}" y1="{_fmt(y)}" '
                     f'x2="{_fmt(x_of(xr))}" y2="{_fmt(y)}"/>')
        coords[n + i] = ((xl + xr) / 2.0, m.distance)
    if labels is None:
        labels = [str(i) for i in range(n)]
    for leaf in range(n):
        x = x_of(float(slot[leaf]))
        parts.append(f'<text x="{_fmt(x)}" y="{_fmt(margin + plot_h + 12)}" '
                     f'text-anchor="end" transform="rotate(-60 {_fmt(x)} '
                     f'{_fmt(margin + plot_h + 12)})">{labels[leaf]}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _diverging_color(r: float) -> str:
    """[-1,1] -> blue-white-red hex color."""
    r = max(-1.0, min(1.0, r))
    if r >= 0:
        g = b = int(round(255 * (1.0 - r)))
        return f"#ff{g:02x}{b:02x}"
    g = rr = int(round(255 * (1.0 + r)))
    return f"#{rr:02x}{g:02x}ff"


def correlogram_svg(report: CorrelationReport, cell: int = 14) -> str:
    """Heat map of the correlation matrix with features ordered by first
    principal component loadings."""
    order = report.feature_order
    d = len(order)
    label_band = 130
    size = d * cell + label_band
    parts = [_SVG_HEADER.format(w=size, h=size),
             '<style>text{font:8px sans-serif}</style>']
    for row, fi in enumerate(order):
        for col, fj in enumerate(order):
            color = _diverging_color(float(report.matrix[fi, fj]))
            parts.append(f'<rect x="{label_band + col * cell}" '
                         f'y="{label_band + row * cell}" width="{cell}" '
                         f'height="{cell}" fill="{color}"/>')
        name = report.feature_ids[fi]
        y = label_band + row * cell + cell - 4
        parts.append(f'<text x="{label_band - 4}" y="{y}" '
                     f'text-anchor="end">{name}</text>')
        x = label_band + row * cell + cell / 2
        parts.append(f'<text x="{_fmt(x)}" y="{label_band - 4}" '
                     f'text-anchor="start" transform="rotate(-90 {_fmt(x)} '
                     f'{label_band - 4})">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def correlation_graph_dot(report: CorrelationReport) -> str:
    """Positive-correlation graph (r >= tau) in DOT format."""
    lines = ["graph feature_correlations {", "  layout=neato;",
             '  node [shape=box, fontsize=10];']
    used = sorted({i for i, j, _ in report.positive_edges}
                  | {j for _, j, _ in report.positive_edges})
    for i in used:
        lines.append(f'  f{i} [label="{report.feature_ids[i]}"];')
    for i, j, r in report.positive_edges:
        lines.append(f'  f{i} -- f{j} [label="{r:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def similarity_histogram_csv(stats: SimilarityStats) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_low", "bin_high", "count"])
    for lo, hi, count in stats.histogram():
        w.writerow([f"{lo:.2f}", f"{hi:.2f}", count])
    return buf.getvalue()


def similarity_histogram_svg(stats: SimilarityStats, width: int = 640,
                             height: int = 360) -> str:
    hist = stats.histogram()
    margin = 40.0
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    peak = max((c for _, _, c in hist), default=1) or 1
    bar_w = plot_w / len(hist)
    parts = [_SVG_HEADER.format(w=width, h=height),
             '<style>rect{fill:#48c}text{font:9px sans-serif}</style>']
    for i, (lo, _, count) in enumerate(hist):
        h = plot_h * count / peak
        x = margin + i * bar_w
        parts.append(f'<rect x="{_fmt(x + 1)}" y="{_fmt(margin + plot_h - h)}" '
                     f'width="{_fmt(bar_w - 2)}" height="{_fmt(h)}"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_fmt(margin + plot_h + 12)}">'
                     f'{lo:.2f}</text>')
    parts.append(f'<text x="{_fmt(margin)}" y="{_fmt(margin - 8)}">'
                 f'pair similarity histogram (n={stats.n_records}, '
                 f'{stats.total_pairs} pairs)</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cluster_assignments_csv(subject_ids: list[str], coords: np.ndarray,
                            labels: np.ndarray) -> str:
    """subject_id, first two projected coordinates, cluster label."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subject_id", "pc1", "pc2", "cluster"])
    for sid, row, lab in zip(subject_ids, coords, labels):
        pc2 = row[1] if len(row) > 1 else 0.0
        w.writerow([sid, repr(float(row[0])), repr(float(pc2)), int(lab)])
    return buf.getvalue()


def matrix_csv(matrix: np.ndarray, row_labels: list[str]) -> str:
    """Labelled square matrix (divergence, correlation) as CSV."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + row_labels)
    for label, row in zip(row_labels, matrix):
        w.writerow([label] + [repr(float(v)) for v in row])
    return buf.getvalue()
