"""Structural analysis of survey datasets: standardization, PCA, agglomerative
clustering in PCA space, pairwise similarity, correlation, and per-locality
deviation checks.

Everything here is a pure function of its inputs. The eigensolver is a cyclic
Jacobi iteration (deterministic, accurate to ~1e-12 for the small symmetric
matrices survey schemas produce) and clustering uses Ward's minimum-variance
criterion with Lance-Williams updates, ties broken by node id so merge
sequences reproduce across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadK, InsufficientData, SchemaMismatch
from .schema import (NUMERIC, Dataset, FeatureSchema, SurveyRecord,
                     normalize_matrix)

_NUM_TOL = 1e-9
_STD_FLOOR = 1e-6
_DEVIATION_LIMIT = 3.0
_MIN_LOCALITY_CONTEXT = 5


# -- standardization and PCA --------------------------------------------------

def standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise zero mean, unit variance. Exactly-constant columns keep
    stddev 1 so they standardize to zeros and contribute no variance."""
    X = np.asarray(X, dtype=np.float64)
    means = X.mean(axis=0)
    stds = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.zeros(X.shape[1])
    stds = np.where(stds == 0.0, 1.0, stds)
    return (X - means) / stds, means, stds


def jacobi_eigh(S: np.ndarray, tol: float = 1e-12,
                max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns (eigenvalues desc, eigenvectors as columns), each eigenvector's
    largest-magnitude component made positive so signs are reproducible.
    """
    A = np.array(S, dtype=np.float64, copy=True)
    d = A.shape[0]
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(A, A.T, atol=1e-8):
        raise ValueError("matrix must be symmetric")
    V = np.eye(d)
    scale = max(float(np.linalg.norm(A)), 1.0)
    for _ in range(max_sweeps):
        # off-diagonal magnitude measured directly; a sum-of-squares difference
        # would cancel catastrophically near convergence
        offmat = A.copy()
        np.fill_diagonal(offmat, 0.0)
        off = float(np.linalg.norm(offmat))
        if off <= tol * scale:
            break
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = A[p, q]
                if abs(apq) <= tol * scale * 1e-4:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                app, aqq = A[p, p], A[q, q]
                A[p, p] = c * c * app - 2.0 * s * c * apq + s * s * aqq
                A[q, q] = s * s * app + 2.0 * s * c * apq + c * c * aqq
                A[p, q] = A[q, p] = 0.0
                mask = np.ones(d, dtype=bool)
                mask[[p, q]] = False
                akp = A[mask, p].copy()
                akq = A[mask, q].copy()
                A[mask, p] = A[p, mask] = c * akp - s * akq
                A[mask, q] = A[q, mask] = s * akp + c * akq
                vp = V[:, p].copy()
                V[:, p] = c * vp - s * V[:, q]
                V[:, q] = s * vp + c * V[:, q]
    order = np.argsort(-np.diag(A), kind="stable")
    vals = np.diag(A)[order].copy()
    vecs = V[:, order].copy()
    for j in range(d):
        k = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[k, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


@dataclass
class PcaResult:
    """Orthonormal basis (rows of `components`), eigenvalues sorted
    non-increasing, variance ratios, and the standardization parameters."""

    components: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    means: np.ndarray
    stddevs: np.ndarray
    n_samples: int
    degenerate: bool = False

    @property
    def n_features(self) -> int:
        return self.components.shape[1]


def pca(X: np.ndarray) -> PcaResult:
    """PCA of a normalized record matrix via covariance eigendecomposition.

    Needs >= 2 records. A dataset whose every column is constant yields a
    degenerate result (all-zero eigenvalues, flagged) rather than an error.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise InsufficientData("pca needs at least 2 records and 1 feature")
    Z, means, stds = standardize(X)
    cov = (Z.T @ Z) / (X.shape[0] - 1)
    vals, vecs = jacobi_eigh(cov)
    vals = np.where(np.abs(vals) < 1e-12, 0.0, vals)
    total = float(vals.sum())
    if total <= 0.0:
        evr = np.zeros_like(vals)
        degenerate = True
    else:
        evr = vals / total
        degenerate = False
    return PcaResult(components=vecs.T, eigenvalues=vals,
                     explained_variance_ratio=evr, means=means, stddevs=stds,
                     n_samples=X.shape[0], degenerate=degenerate)


def min_components_for(evr_target: float, p: PcaResult) -> int:
    """Smallest k whose cumulative explained-variance ratio reaches the target."""
    if not 0.0 < evr_target <= 1.0:
        raise ValueError("target must lie in (0, 1]")
    cum = np.cumsum(p.explained_variance_ratio)
    hits = np.nonzero(cum >= evr_target - 1e-12)[0]
    return int(hits[0]) + 1 if hits.size else p.n_features


def project(X: np.ndarray, p: PcaResult, k: int) -> np.ndarray:
    """Standardize rows with the fit's parameters and project onto the first
    k components."""
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k <= p.n_features:
        raise SchemaMismatch(f"k={k} outside 1..{p.n_features}")
    if X.shape[1] != p.n_features:
        raise SchemaMismatch(
            f"records have {X.shape[1]} features, fit has {p.n_features}")
    Z = (X - p.means) / p.stddevs
    return Z @ p.components[:k].T


def inverse_project(Y: np.ndarray, p: PcaResult) -> np.ndarray:
    """Map k-dimensional projections back to standardized feature space."""
    Y = np.asarray(Y, dtype=np.float64)
    return Y @ p.components[: Y.shape[1]]


# -- agglomerative clustering --------------------------------------------------

@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    size: int


@dataclass
class ClusterTree:
    """Full agglomerative merge history. Leaves are 0..n-1; merge i creates
    node n+i."""

    n_leaves: int
    merges: list[Merge] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"n_leaves": self.n_leaves,
                "merges": [[m.left, m.right, m.distance, m.size]
                           for m in self.merges]}


def ward_cluster(points: np.ndarray) -> ClusterTree:
    """Agglomerate by Ward's minimum-variance criterion.

    Cluster distance follows the usual convention d(A,B) =
    sqrt(2|A||B|/(|A|+|B|)) * ||centroid_A - centroid_B||, updated through the
    Lance-Williams recurrence, so two singletons sit at their Euclidean
    distance. Ties pick the smallest (left_id, right_id) node pair.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    n = pts.shape[0]
    if n < 1:
        raise InsufficientData("clustering needs at least one point")
    tree = ClusterTree(n_leaves=n)
    if n == 1:
        return tree

    # squared pairwise distances between active clusters, inf when inactive
    sq = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(sq, np.inf)
    sizes = np.ones(n, dtype=np.int64)
    node_id = np.arange(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)

    for step in range(n - 1):
        mn = sq.min()
        cand = np.argwhere(sq == mn)
        best = None
        for a, b in cand:
            if a >= b:
                continue
            ia, ib = int(node_id[a]), int(node_id[b])
            pair = (min(ia, ib), max(ia, ib))
            if best is None or pair < best[0]:
                best = (pair, int(a), int(b))
        (left, right), i, j = best
        tree.merges.append(Merge(left=left, right=right,
                                 distance=math.sqrt(mn),
                                 size=int(sizes[i] + sizes[j])))
        # merged cluster reuses slot i; Lance-Williams on squared distances
        ni, nj = sizes[i], sizes[j]
        others = active.copy()
        others[[i, j]] = False
        nk = sizes[others]
        d_new = ((ni + nk) * sq[i, others] + (nj + nk) * sq[j, others]
                 - nk * mn) / (ni + nj + nk)
        sq[i, others] = d_new
        sq[others, i] = d_new
        sq[j, :] = np.inf
        sq[:, j] = np.inf
        active[j] = False
        sizes[i] = ni + nj
        node_id[i] = n + step
    return tree


def cut_tree(t: ClusterTree, k: int) -> np.ndarray:
    """Undo the last k-1 merges; labels 0..k-1 assigned in leaf-index order of
    each cluster's first appearance."""
    n = t.n_leaves
    if not 1 <= k <= n:
        raise BadK(f"k={k} outside 1..{n}")
    parent = list(range(n + len(t.merges)))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for idx in range(n - k):
        m = t.merges[idx]
        new = n + idx
        parent[find(m.left)] = new
        parent[find(m.right)] = new

    labels = np.empty(n, dtype=np.int64)
    seen: dict[int, int] = {}
    for leaf in range(n):
        root = find(leaf)
        if root not in seen:
            seen[root] = len(seen)
        labels[leaf] = seen[root]
    return labels


# -- similarity ----------------------------------------------------------------

def similarity(a: SurveyRecord, b: SurveyRecord, schema: FeatureSchema) -> float:
    """Simple matching coefficient: fraction of features with equal values.

    Binary and ordinal values compare exactly; bounded-numeric values compare
    after normalization with tolerance 1e-9, so an identical data point means
    similarity 1.0 literally.
    """
    d = len(schema)
    if len(a.values) != d or len(b.values) != d:
        raise SchemaMismatch("records do not match the schema's feature count")
    agree = 0
    for fd, va, vb in zip(schema.features, a.values, b.values):
        if fd.kind == NUMERIC:
            if abs(va - vb) <= _NUM_TOL * (fd.hi - fd.lo):
                agree += 1
        elif va == vb:
            agree += 1
    return agree / d


def agreement_count_matrix(records: list[SurveyRecord],
                           schema: FeatureSchema) -> np.ndarray:
    """(n, n) matrix of per-pair feature-agreement counts."""
    n = len(records)
    d = len(schema)
    raw = np.array([r.values for r in records], dtype=np.float64)
    if raw.shape != (n, d):
        raise SchemaMismatch("records do not match the schema's feature count")
    counts = np.zeros((n, n), dtype=np.int32)
    for j, fd in enumerate(schema.features):
        col = raw[:, j]
        if fd.kind == NUMERIC:
            eq = np.abs(col[:, None] - col[None, :]) <= _NUM_TOL * (fd.hi - fd.lo)
        else:
            eq = col[:, None] == col[None, :]
        counts += eq.astype(np.int32)
    return counts


@dataclass
class SimilarityStats:
    """All-pairs similarity distribution, kept as exact agreement-count tallies
    so any threshold query stays exact."""

    n_records: int
    n_features: int
    pair_counts: dict[int, int]  # agreement count -> number of pairs
    duplicate_partner_fraction: float

    @property
    def total_pairs(self) -> int:
        return self.n_records * (self.n_records - 1) // 2

    def histogram(self, bin_width: float = 0.05) -> list[tuple[float, float, int]]:
        """(bin_lo, bin_hi, count) bins covering [0,1]; top bin includes 1.0."""
        n_bins = int(round(1.0 / bin_width))
        bins = [0] * n_bins
        for agree, cnt in self.pair_counts.items():
            sim = agree / self.n_features
            idx = min(int(sim / bin_width), n_bins - 1)
            bins[idx] += cnt
        return [(i * bin_width, (i + 1) * bin_width, bins[i])
                for i in range(n_bins)]

    def low_similarity_pair_fraction(self, tau: float) -> float:
        """Fraction of pairs with similarity strictly below tau."""
        if self.total_pairs == 0:
            return 0.0
        low = sum(cnt for agree, cnt in self.pair_counts.items()
                  if agree / self.n_features < tau)
        return low / self.total_pairs


def similarity_stats(d: Dataset) -> SimilarityStats:
    """All-pairs similarity histogram plus the duplicate-partner fraction
    (records with at least one exactly-identical other record)."""
    if len(d.records) < 2:
        raise InsufficientData("similarity statistics need at least 2 records")
    counts = agreement_count_matrix(d.records, d.schema)
    n = counts.shape[0]
    nf = len(d.schema)
    iu = np.triu_indices(n, k=1)
    pair_agree = counts[iu]
    uniq, tallies = np.unique(pair_agree, return_counts=True)
    pair_counts = {int(a): int(c) for a, c in zip(uniq, tallies)}
    off = counts.copy()
    np.fill_diagonal(off, -1)
    has_twin = (off == nf).any(axis=1)
    return SimilarityStats(
        n_records=n, n_features=nf, pair_counts=pair_counts,
        duplicate_partner_fraction=float(has_twin.mean()))


# -- correlation ----------------------------------------------------------------

@dataclass
class CorrelationReport:
    """Pearson correlations on normalized columns, feature order by first-PC
    loading, and the positive-edge list at the requested threshold."""

    matrix: np.ndarray
    feature_ids: list[str]
    feature_order: list[int]
    tau: float
    positive_edges: list[tuple[int, int, float]]
    constant_features: list[int]

    def edges_at(self, tau: float) -> list[tuple[int, int, float]]:
        d = self.matrix.shape[0]
        return [(i, j, float(self.matrix[i, j]))
                for i in range(d) for j in range(i + 1, d)
                if self.matrix[i, j] >= tau]


def correlation_report(d: Dataset, tau: float = 0.5) -> CorrelationReport:
    """Pairwise Pearson correlation of normalized features.

    Constant columns correlate 0 with everything and are flagged; the diagonal
    stays 1. Feature order sorts by first principal component loading,
    descending.
    """
    if len(d.records) < 3:
        raise InsufficientData("correlation analysis needs at least 3 records")
    X = normalize_matrix(d.records, d.schema)
    nf = X.shape[1]
    stds = X.std(axis=0, ddof=1)
    constant = [int(i) for i in np.nonzero(stds == 0.0)[0]]
    Z, _, _ = standardize(X)
    corr = (Z.T @ Z) / (X.shape[0] - 1)
    for i in constant:
        corr[i, :] = 0.0
        corr[:, i] = 0.0
    np.fill_diagonal(corr, 1.0)
    corr = np.clip(corr, -1.0, 1.0)

    fit = pca(X)
    loadings = fit.components[0] if not fit.degenerate else np.zeros(nf)
    order = list(np.argsort(-loadings, kind="stable"))
    edges = [(i, j, float(corr[i, j]))
             for i in range(nf) for j in range(i + 1, nf)
             if corr[i, j] >= tau]
    return CorrelationReport(matrix=corr, feature_ids=d.schema.feature_ids,
                             feature_order=[int(i) for i in order], tau=tau,
                             positive_edges=edges, constant_features=constant)


# -- locality deviation ----------------------------------------------------------

@dataclass
class OutlierCheck:
    """Per-feature deviation of one record against its locality peers."""

    insufficient_context: bool
    flags: list[tuple[str, float]]  # (feature_id, deviation), deviation desc

    @property
    def flagged(self) -> bool:
        return bool(self.flags)


def locality_outlier_check(r: SurveyRecord, locality_records: list[SurveyRecord],
                           schema: FeatureSchema) -> OutlierCheck:
    """Flag features where the record sits more than 3 sigma from the locality
    mean (normalized scale, stddev floored at 1e-6). Fewer than 5 context
    records yields an insufficient-context marker and no flags."""
    if len(locality_records) < _MIN_LOCALITY_CONTEXT:
        return OutlierCheck(insufficient_context=True, flags=[])
    ctx = normalize_matrix(locality_records, schema)
    x = normalize_matrix([r], schema)[0]
    means = ctx.mean(axis=0)
    stds = np.maximum(ctx.std(axis=0, ddof=0), _STD_FLOOR)
    dev = np.abs(x - means) / stds
    flagged = [(schema.features[i].id, float(dev[i]))
               for i in np.argsort(-dev, kind="stable")
               if dev[i] > _DEVIATION_LIMIT]
    return OutlierCheck(insufficient_context=False, flags=flagged)
