"""Kernel-PCA latent extraction and the hybrid selection target.

The selection target can be relaxed away from the pure label kernel by
mixing in an RBF kernel built on unsupervised latent coordinates:

    K_mixed = delta * K_labels + (1 - delta) * K_latent,  delta in [0, 1]

delta = 1 recovers fully supervised selection, delta = 0 a fully
unsupervised one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataError, DegenerateKernelError, ParameterError
from .kernels import GramMatrix, _as_entries, rbf_gram, square_gram

# Relative cutoff below which kernel eigenvalues are treated as rank noise.
EIG_RTOL = 1e-10


@dataclass
class KpcaModel:
    """Eigenpairs of a centered training kernel plus projection machinery.

    ``eigvecs`` columns are unit-norm and orthonormal; ``eigvals`` are the
    corresponding eigenvalues of the centered training Gram matrix, strictly
    positive and non-increasing.  ``col_means``/``grand_mean`` are the
    training-kernel statistics needed to center cross-kernels consistently.
    ``shrunk`` flags that fewer components than requested survived the
    rank cutoff.
    """

    eigvecs: np.ndarray
    eigvals: np.ndarray
    train_gamma: float | None
    num_components: int
    col_means: np.ndarray
    grand_mean: float
    shrunk: bool = False

    @property
    def n_train(self) -> int:
        return self.eigvecs.shape[0]

    def center_cross(self, K_cross: GramMatrix | np.ndarray) -> GramMatrix:
        """Center a test x train kernel with the training-kernel statistics."""
        A = _as_entries(K_cross)
        if A.shape[1] != self.n_train:
            raise DataError(
                f"cross kernel has {A.shape[1]} columns, expected {self.n_train}"
            )
        centered = (
            A
            - A.mean(axis=1, keepdims=True)
            - self.col_means[None, :]
            + self.grand_mean
        )
        rows = np.arange(A.shape[0])
        return GramMatrix(centered, rows, np.arange(self.n_train), kind="cross")


@dataclass
class LatentCoords:
    """Latent coordinates: one row per sample, one column per component."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if not np.isfinite(self.coords).all():
            raise DataError("latent coordinates contain non-finite entries")

    @property
    def n_components(self) -> int:
        return self.coords.shape[1]


@dataclass
class MixedTarget:
    """Convex combination of the label target and the latent kernel."""

    delta: float
    k_delta: GramMatrix


def fit_kpca(
    K_train: GramMatrix | np.ndarray,
    num_components: int | None = None,
    variance_target: float = 0.95,
    max_components: int = 50,
    train_gamma: float | None = None,
) -> KpcaModel:
    """Eigendecompose a centered training kernel and keep the top components.

    The caller is expected to have double-centered the kernel (see
    ``kernels.center_kernel``); the centering statistics stored on the model
    are taken from the matrix as given.  Eigenvalues below
    ``EIG_RTOL * eigmax`` are dropped as numerical rank noise; if that
    leaves fewer than ``num_components``, the model is shrunk and flagged
    rather than rejected.

    With ``num_components=None`` the smallest count capturing at least
    ``variance_target`` of the total retained eigenvalue mass is used,
    capped at ``min(m - 1, max_components)``.
    """
    A = _as_entries(K_train)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError("fit_kpca requires a square kernel")
    m = A.shape[0]
    if num_components is not None and num_components < 1:
        raise ParameterError("num_components must be positive")
    if num_components is not None and num_components > m:
        raise ParameterError(
            f"num_components {num_components} exceeds sample count {m}"
        )

    col_means = A.mean(axis=0)
    grand_mean = float(A.mean())

    w, v = scipy.linalg.eigh(0.5 * (A + A.T))
    order = np.argsort(w)[::-1]
    w = w[order]
    v = v[:, order]

    eigmax = float(w[0]) if w.size else 0.0
    if eigmax <= 0.0:
        raise DegenerateKernelError("kernel has no positive eigenvalues")
    keep = w > EIG_RTOL * eigmax
    w = w[keep]
    v = v[:, keep]

    if num_components is None:
        cap = min(m - 1, max_components, w.size)
        ratios = np.cumsum(w[:cap]) / np.sum(w)
        hit = np.nonzero(ratios >= variance_target)[0]
        p = int(hit[0]) + 1 if hit.size else cap
        shrunk = False
    else:
        p = min(num_components, w.size)
        shrunk = p < num_components

    return KpcaModel(
        eigvecs=np.ascontiguousarray(v[:, :p]),
        eigvals=w[:p].copy(),
        train_gamma=train_gamma,
        num_components=p,
        col_means=col_means,
        grand_mean=grand_mean,
        shrunk=shrunk,
    )


def project(model: KpcaModel, K_cross_centered: GramMatrix | np.ndarray) -> LatentCoords:
    """Map samples into the latent space through a centered cross kernel.

    Coordinates are ``K_centered @ U / sqrt(eig)``: the per-component
    rescaling makes projecting the training kernel reproduce the principal
    component scores of the implicit feature-space embedding, so a linear
    kernel on centered data yields classical PCA scores exactly.
    """
    A = _as_entries(K_cross_centered)
    if A.shape[1] != model.n_train:
        raise DataError(
            f"cross kernel has {A.shape[1]} columns, expected {model.n_train}"
        )
    coords = (A @ model.eigvecs) / np.sqrt(model.eigvals)[None, :]
    return LatentCoords(coords)


def median_heuristic_gamma(rows: np.ndarray) -> float:
    """Bandwidth rule gamma = 1 / median(pairwise squared distances).

    The median runs over distinct unordered pairs.  A zero median (more
    than half of all pairs coincident) leaves no usable scale.
    """
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    s = X.shape[0]
    if s < 2:
        raise DataError("median heuristic needs at least 2 samples")
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    iu = np.triu_indices(s, k=1)
    med = float(np.median(d2[iu]))
    if med <= 0.0:
        raise DegenerateKernelError(
            "median pairwise squared distance is zero; no kernel scale exists"
        )
    return 1.0 / med


def latent_kernel(Z_train: LatentCoords) -> GramMatrix:
    """RBF kernel over training latent coordinates, median-heuristic bandwidth.

    Parameter-free and unsupervised; keeps a unit diagonal so the mixture
    with the {0, 1} label target stays scale-consistent.
    """
    Z = Z_train.coords
    if Z.shape[0] < 2:
        raise DataError("latent kernel needs at least 2 samples")
    gamma_z = median_heuristic_gamma(Z)
    return rbf_gram(Z, gamma_z)


def mix_targets(K_yy: GramMatrix, K_z: GramMatrix, delta: float) -> MixedTarget:
    """Entry-wise convex combination ``delta * K_yy + (1 - delta) * K_z``.

    The endpoints are exact: delta = 1 returns the label target's entries
    bit-for-bit, delta = 0 the latent kernel's.
    """
    if not 0.0 <= delta <= 1.0:
        raise ParameterError(f"delta must lie in [0, 1], got {delta}")
    A = _as_entries(K_yy)
    B = _as_entries(K_z)
    if A.shape != B.shape:
        raise DataError(f"shape mismatch: {A.shape} vs {B.shape}")
    mixed = delta * A + (1.0 - delta) * B
    return MixedTarget(delta=float(delta), k_delta=square_gram(mixed))
