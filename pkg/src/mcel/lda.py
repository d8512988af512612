"""Linear discriminant analysis and the class-similarity matrix.

Fits the within/between scatter eigenproblem, projects per-class mean
vectors into the discriminant subspace, and turns their pairwise cosine
distances into a row-stochastic, zero-diagonal similarity matrix.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError, DimensionError
from .numerics import solve_generalized_symmetric_eig

ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class LdaModel:
    projection: np.ndarray  # num_components x d, rows are discriminant directions
    eigenvalues: np.ndarray  # non-increasing
    class_means: tuple  # k projected mean vectors, length num_components each
    num_components: int
    num_classes: int

    def __post_init__(self):
        if self.num_components > self.num_classes - 1:
            raise ValueError("num_components must be <= num_classes - 1")
        if len(self.class_means) != self.num_classes:
            raise ValueError("need one projected mean per class")
        if np.any(np.diff(self.eigenvalues) > 1e-12):
            raise ValueError("eigenvalues must be non-increasing")


@dataclass(frozen=True)
class SimilarityMatrix:
    """Row-stochastic k x k matrix with zero diagonal; row i is the
    similarity distribution of class i."""

    k: int
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.shape != (self.k, self.k):
            raise DimensionError(f"matrix must be {self.k} x {self.k}, got {a.shape}")
        if np.any(np.abs(np.diag(a)) > 0.0):
            raise ValueError("diagonal entries must be exactly zero")
        off = a[~np.eye(self.k, dtype=bool)]
        if np.any(off <= 0.0):
            raise ValueError("off-diagonal entries must be strictly positive")
        sums = a.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-12)
        if bad.size:
            raise ValueError(f"row {int(bad[0])} sums to {sums[bad[0]]!r}, expected 1")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    def row(self, i):
        return self.a[i]

    def asymmetry(self):
        """Largest |A - A^T| entry; the row-normalized matrix need not be
        symmetric even though the raw similarity scores are."""
        return float(np.max(np.abs(self.a - self.a.T)))


def class_means(data):
    """Mean feature vector of each class, in class-index order."""
    counts = data.class_counts()
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValueError(f"class {int(empty[0])} has no samples")
    means = []
    for c in range(data.k):
        means.append(data.features[data.labels == c].mean(axis=0))
    return means


def scatter_matrices(data):
    """Within-class and between-class scatter (S_w, S_b) plus class means."""
    mu = data.features.mean(axis=0)
    means = class_means(data)
    d = data.dim
    sw = np.zeros((d, d))
    sb = np.zeros((d, d))
    for c in range(data.k):
        block = data.features[data.labels == c]
        centered = block - means[c]
        sw += centered.T @ centered
        diff = (means[c] - mu)[:, None]
        sb += block.shape[0] * (diff @ diff.T)
    return sw, sb, means


def default_ridge(sw):
    return 1e-6 * np.trace(sw) / sw.shape[0]


def fit_lda(data, num_components=None, ridge=None):
    """Fit LDA and keep the leading discriminant components.

    num_components defaults to min(k - 1, d); ridge defaults to
    1e-6 * trace(S_w) / d to keep near-singular scatter invertible.
    """
    k = data.k
    limit = min(k - 1, data.dim)
    if num_components is None:
        num_components = limit
    if not 1 <= num_components <= limit:
        raise ValueError(f"num_components must be in [1, {limit}], got {num_components}")
    if data.n <= k:
        raise ValueError("need more samples than classes")
    sw, sb, means = scatter_matrices(data)
    if ridge is None:
        ridge = default_ridge(sw)
    vals, vecs = solve_generalized_symmetric_eig(sb, sw, ridge)
    projection = vecs[:, :num_components].T.copy()
    projected = tuple(projection @ m for m in means)
    return LdaModel(
        projection=projection,
        eigenvalues=vals[:num_components].copy(),
        class_means=projected,
        num_components=num_components,
        num_classes=k,
    )


def build_similarity_matrix(model):
    """Similarity matrix from the projected class means.

    d(v_i, v_j) = 1 - cos(v_i, v_j); s = 1 / (1 + e^d); rows normalize over
    the off-diagonal entries, diagonal stays zero.
    """
    k = model.num_classes
    means = model.class_means
    norms = [np.linalg.norm(v) for v in means]
    for i, nrm in enumerate(norms):
        if nrm == 0.0:
            raise ValueError(f"projected mean of class {i} is the zero vector")
    a = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            cos = float(np.dot(means[i], means[j])) / (norms[i] * norms[j])
            dist = 1.0 - cos
            a[i, j] = 1.0 / (1.0 + np.exp(dist))
        a[i] /= a[i].sum()
    return SimilarityMatrix(k, a)


def save_similarity(sim, path):
    """Plain-text format: line 1 is k, then k rows of k numbers at full
    double precision. Round trips exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{sim.k}\n")
        for row in sim.a:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_similarity(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    pos = 0
    while pos < len(lines) and (not lines[pos].strip() or lines[pos].lstrip().startswith("#")):
        pos += 1
    if pos >= len(lines):
        raise DataFormatError(f"{path}: no content")
    try:
        k = int(lines[pos].strip())
    except ValueError:
        raise DataFormatError(
            f"{path}: line {pos + 1}: expected the class count, got {lines[pos]!r}"
        ) from None
    if k < 2:
        raise DataFormatError(f"{path}: line {pos + 1}: class count must be >= 2")
    rows = []
    for i in range(k):
        lineno = pos + 2 + i
        if pos + 1 + i >= len(lines):
            raise DataFormatError(f"{path}: line {lineno}: missing row {i}")
        cells = lines[pos + 1 + i].split()
        if len(cells) != k:
            raise DataFormatError(
                f"{path}: line {lineno}: expected {k} values, got {len(cells)}"
            )
        try:
            row = [float(c) for c in cells]
        except ValueError:
            raise DataFormatError(f"{path}: line {lineno}: non-numeric value") from None
        if row[i] != 0.0:
            raise DataFormatError(
                f"{path}: line {lineno}: diagonal entry must be 0, got {row[i]!r}"
            )
        total = sum(row)
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise DataFormatError(
                f"{path}: line {lineno}: row sums to {total!r}, expected 1"
            )
        rows.append(row)
    a = np.array(rows)
    # renormalize the sub-1e-9 residue so the type invariant (1e-12) holds
    a = a / a.sum(axis=1, keepdims=True)
    return SimilarityMatrix(k, a)


def uniform_similarity(k):
    """Uniform off-diagonal similarity (the label-smoothing special case)."""
    a = np.full((k, k), 1.0 / (k - 1))
    np.fill_diagonal(a, 0.0)
    return SimilarityMatrix(k, a)
