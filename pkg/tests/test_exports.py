"""Export formats: structural checks and determinism."""

import numpy as np

from sentinel.analytics import (correlation_report, similarity_stats,
                                ward_cluster)
from sentinel.exports import (cluster_assignments_csv, correlation_graph_dot,
                              correlogram_svg, dendrogram_svg, matrix_csv,
                              merge_list_text, similarity_histogram_csv,
                              similarity_histogram_svg)
from sentinel.schema import (BINARY, NUMERIC, Dataset, FeatureDef,
                             FeatureSchema, SurveyRecord)


def make_tree(n=9, seed=1):
    rng = np.random.default_rng(seed)
    return ward_cluster(rng.normal(0, 1, (n, 3)))


def make_dataset(n=12, seed=2):
    rng = np.random.default_rng(seed)
    schema = FeatureSchema(features=(
        FeatureDef("b1", BINARY), FeatureDef("b2", BINARY),
        FeatureDef("n1", NUMERIC, lo=0.0, hi=1.0)))
    recs = [SurveyRecord(f"s{i}", "l",
                         (float(rng.integers(0, 2)), float(rng.integers(0, 2)),
                          float(rng.uniform())), i) for i in range(n)]
    return Dataset(schema=schema, records=recs)


def test_merge_list_format_roundtrips():
    tree = make_tree()
    lines = merge_list_text(tree).strip().split("\n")
    assert len(lines) == len(tree.merges)
    for line, m in zip(lines, tree.merges):
        left, right, dist, size = line.split()
        assert (int(left), int(right), int(size)) == (m.left, m.right, m.size)
        assert float(dist) == m.distance  # repr round-trips exactly


def test_dendrogram_svg_well_formed_and_deterministic():
    tree = make_tree()
    svg = dendrogram_svg(tree)
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count("<line") == 3 * len(tree.merges)
    assert svg == dendrogram_svg(tree)


def test_dendrogram_single_leaf():
    tree = make_tree(n=1)
    svg = dendrogram_svg(tree)
    assert svg.startswith("<svg")


def test_correlogram_and_dot():
    ds = make_dataset()
    rep = correlation_report(ds, tau=0.0)
    svg = correlogram_svg(rep)
    assert svg.count("<rect") == 9  # 3x3 cells
    dot = correlation_graph_dot(rep)
    assert dot.startswith("graph feature_correlations {")
    for i, j, _ in rep.positive_edges:
        assert f"f{i} -- f{j}" in dot


def test_similarity_histogram_exports():
    ds = make_dataset()
    stats = similarity_stats(ds)
    csv_text = similarity_histogram_csv(stats)
    rows = csv_text.strip().split("\n")
    assert rows[0] == "bin_low,bin_high,count"
    assert len(rows) == 21  # header + 20 bins
    total = sum(int(r.split(",")[2]) for r in rows[1:])
    assert total == stats.total_pairs
    svg = similarity_histogram_svg(stats)
    assert svg.count("<rect") == 20


def test_cluster_csv_and_matrix_csv():
    pts = np.array([[0.0, 1.0], [2.0, 3.0]])
    labels = np.array([0, 1])
    text = cluster_assignments_csv(["a", "b"], pts, labels)
    assert text.splitlines()[0] == "subject_id,pc1,pc2,cluster"
    assert text.splitlines()[1] == "a,0.0,1.0,0"
    m = matrix_csv(np.array([[0.0, 1.5], [1.5, 0.0]]), ["x", "y"])
    assert m.splitlines()[0] == ",x,y"
    assert m.splitlines()[1].startswith("x,0.0,1.5")
