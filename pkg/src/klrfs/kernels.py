"""Gram-matrix construction and the alignment algebra.

Everything downstream (latent targets, the greedy selector, the SVM) is
built on the operations here: RBF Gram matrices, Frobenius inner products,
kernel alignment, the ideal label target, and double centering.

Alignment is the *uncentered* Frobenius cosine; the centered variant of
Cortes et al. is intentionally not offered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    DegenerateKernelError,
    DegenerateLabelsError,
    ParameterError,
)

# Numerical PSD tolerance: eigmin >= -PSD_RTOL * eigmax.  Accounts for
# accumulated floating-point error in exp-based Gram matrices.
PSD_RTOL = 1e-8


@dataclass
class DataMatrix:
    """A labeled sample set: ``values`` is samples x features.

    Labels are +/-1.  ``metadata`` carries provenance such as planted
    feature indices for synthetic data; it is never read by algorithms.
    """

    values: np.ndarray
    labels: np.ndarray
    feature_names: list[str]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("values must be a 2-D samples x features matrix")
        m, n = self.values.shape
        if m < 2:
            raise DataError(f"need at least 2 samples, got {m}")
        if n < 1:
            raise DataError("need at least 1 feature")
        if self.labels.shape != (m,):
            raise DataError(
                f"labels length {self.labels.shape} does not match {m} samples"
            )
        if not np.isfinite(self.values).all():
            raise DataError("values contain non-finite entries")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise DataError("labels must be -1 or +1")
        if len(self.feature_names) != n:
            raise DataError(
                f"{len(self.feature_names)} feature names for {n} features"
            )
        if len(set(self.feature_names)) != n:
            raise DataError("duplicate feature names")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take_rows(self, idx) -> "DataMatrix":
        idx = np.asarray(idx)
        return DataMatrix(
            self.values[idx], self.labels[idx], list(self.feature_names),
            dict(self.metadata),
        )

    def take_features(self, idx) -> "DataMatrix":
        idx = np.asarray(idx)
        names = [self.feature_names[i] for i in idx]
        return DataMatrix(
            self.values[:, idx], self.labels.copy(), names, dict(self.metadata)
        )


@dataclass
class GramMatrix:
    """A matrix of pairwise kernel evaluations.

    ``kind`` is "square" for a kernel over one sample set and "cross" for
    test-rows x train-columns evaluations.
    """

    entries: np.ndarray
    row_ids: np.ndarray
    col_ids: np.ndarray
    kind: str = "square"

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        if self.entries.ndim != 2:
            raise DataError("Gram entries must be 2-D")
        self.row_ids = np.asarray(self.row_ids)
        self.col_ids = np.asarray(self.col_ids)
        if self.row_ids.shape[0] != self.entries.shape[0]:
            raise DataError("row_ids length does not match entries")
        if self.col_ids.shape[0] != self.entries.shape[1]:
            raise DataError("col_ids length does not match entries")
        if self.kind not in ("square", "cross"):
            raise DataError(f"unknown Gram kind {self.kind!r}")
        if self.kind == "square" and self.entries.shape[0] != self.entries.shape[1]:
            raise DataError("square Gram matrix must have equal dimensions")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)


def square_gram(entries: np.ndarray, ids=None) -> GramMatrix:
    """Wrap a raw symmetric array as a square GramMatrix."""
    entries = np.asarray(entries, dtype=np.float64)
    if ids is None:
        ids = np.arange(entries.shape[0])
    return GramMatrix(entries, ids, ids, kind="square")


def _as_entries(K) -> np.ndarray:
    if isinstance(K, GramMatrix):
        return K.entries
    return np.asarray(K, dtype=np.float64)


def _check_rows(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DataError(f"{name} must be a 2-D row matrix")
    if not np.isfinite(X).all():
        raise DataError(f"{name} contains non-finite entries")
    return X


def rbf_gram(X, gamma: float, sample_ids=None) -> GramMatrix:
    """Square RBF Gram matrix: entry (i, j) = exp(-gamma * ||x_i - x_j||^2).

    The diagonal is exactly 1 and the matrix is exactly symmetric by
    construction (distances are computed once per unordered pair).
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    X = _check_rows(X, "X")
    d2 = _pairwise_sq_dists(X)
    K = np.exp(-gamma * d2)
    np.fill_diagonal(K, 1.0)
    if sample_ids is None:
        sample_ids = np.arange(X.shape[0])
    return GramMatrix(K, sample_ids, sample_ids, kind="square")


def rbf_cross(X_test, X_train, gamma: float) -> GramMatrix:
    """Cross RBF kernel: entry (i, j) = exp(-gamma * ||test_i - train_j||^2)."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    A = _check_rows(X_test, "X_test")
    B = _check_rows(X_train, "X_train")
    if A.shape[1] != B.shape[1]:
        raise DataError(
            f"feature dimensionality mismatch: {A.shape[1]} vs {B.shape[1]}"
        )
    d2 = _cross_sq_dists(A, B)
    K = np.exp(-gamma * d2)
    return GramMatrix(K, np.arange(A.shape[0]), np.arange(B.shape[0]), kind="cross")


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    """Symmetric squared Euclidean distances with exact zero diagonal."""
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    d2 = 0.5 * (d2 + d2.T)
    np.fill_diagonal(d2, 0.0)
    return d2


def _cross_sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    sqa = np.einsum("ij,ij->i", A, A)
    sqb = np.einsum("ij,ij->i", B, B)
    d2 = sqa[:, None] + sqb[None, :] - 2.0 * (A @ B.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def frobenius_inner(K1, K2) -> float:
    """Frobenius inner product: the sum of entry-wise products.

    Uses numpy's pairwise summation, so large sums lose fewer digits than a
    naive left-to-right reduction.
    """
    A = _as_entries(K1)
    B = _as_entries(K2)
    if A.shape != B.shape:
        raise DataError(f"shape mismatch: {A.shape} vs {B.shape}")
    return float(np.sum(A * B))


def alignment(K1, K2) -> float:
    """Frobenius cosine between two kernel matrices, in [-1, 1].

    Invariant to positive rescaling of either argument; >= 0 whenever both
    inputs are PSD.  Raises for an all-zero input because a silent 0 would
    corrupt any argmax built on top of this score.
    """
    A = _as_entries(K1)
    B = _as_entries(K2)
    if A.shape != B.shape:
        raise DataError(f"shape mismatch: {A.shape} vs {B.shape}")
    aa = float(np.sum(A * A))
    bb = float(np.sum(B * B))
    if aa <= 0.0 or bb <= 0.0:
        raise DegenerateKernelError("alignment undefined for an all-zero kernel")
    value = float(np.sum(A * B)) / np.sqrt(aa * bb)
    return float(min(1.0, max(-1.0, value)))


def kta(K, K_target) -> float:
    """Kernel target alignment: ``alignment`` against a fixed target kernel."""
    return alignment(K, K_target)


def target_from_labels(labels) -> GramMatrix:
    """Ideal target kernel: entry (i, j) = 1 if y_i == y_j else 0.

    Note the {0, 1} convention (not the y_i * y_j one common elsewhere).
    """
    y = np.asarray(labels, dtype=np.float64)
    if y.ndim != 1:
        raise DataError("labels must be a 1-D vector")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise DegenerateLabelsError(
            "target kernel undefined: all labels belong to one class"
        )
    T = (y[:, None] == y[None, :]).astype(np.float64)
    return square_gram(T)


def center_kernel(K) -> GramMatrix:
    """Double-center a square kernel so its rows and columns sum to zero.

    Idempotent, and maps the constant matrix to zero.
    """
    A = _as_entries(K)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError("center_kernel requires a square kernel")
    row_means = A.mean(axis=1, keepdims=True)
    col_means = A.mean(axis=0, keepdims=True)
    grand = A.mean()
    centered = A - row_means - col_means + grand
    ids = K.row_ids if isinstance(K, GramMatrix) else np.arange(A.shape[0])
    return GramMatrix(centered, ids, ids, kind="square")


def is_psd(K, rtol: float = PSD_RTOL) -> bool:
    """Numerical PSD test: eigmin >= -rtol * eigmax."""
    A = _as_entries(K)
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    eigmax = float(w[-1])
    if eigmax <= 0.0:
        return bool(w[0] >= -rtol)
    return bool(w[0] >= -rtol * eigmax)
