"""Feature-wise kernel bank and the greedy alignment-maximizing selector.

Each feature gets its own single-column RBF kernel whose bandwidth is tuned
to maximize alignment with the selection target.  The greedy loop then
grows a weighted combination two kernels at a time: at every step it solves
the closed-form two-kernel weight problem against every unselected
candidate, adopts the best one, and folds it into the running combination.
A feature's final weight doubles as its importance score.

Candidate scans are vectorized over blocks of features; Frobenius products
of each candidate with itself and with the target are computed once and
cached, so each greedy iteration costs one pass of ``<K_mu, K_j>`` products
over the unselected features.  The scan order is ascending feature index
and ties keep the first (lowest-index) maximizer, so results do not depend
on how the scan is chunked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataError, DegenerateKernelError, ParameterError
from .kernels import DataMatrix, GramMatrix, _as_entries, square_gram
from .latent import MixedTarget

# Relative determinant threshold below which the 2x2 weight system is
# treated as singular (the two kernels are proportional).
_PROP_RTOL = 1e-12

# Cap on floats materialized per candidate block (block_size * m * m).
_BLOCK_BUDGET = 4_000_000


class PairWeights(NamedTuple):
    """Result of the two-kernel weight solve, normalized to mu_a + mu_b = 1."""

    mu_a: float
    mu_b: float
    kta: float
    proportional: bool = False


@dataclass
class MklSolution:
    """Greedy selection result.

    ``selected`` lists feature indices in selection order; ``weights`` are
    the matching strictly positive kernel weights normalized to sum 1;
    ``kta_trace`` records the combined alignment after each iteration and
    is non-decreasing by construction.
    """

    selected: list[int]
    weights: np.ndarray
    gammas: np.ndarray
    kta_trace: list[float]
    target_delta: float | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.gammas = np.asarray(self.gammas, dtype=np.float64)
        if not (len(self.selected) == self.weights.size == self.gammas.size):
            raise DataError("selected, weights and gammas must have equal length")

    @property
    def weights_decreasing(self) -> bool:
        """Whether weights strictly decrease in selection order (logged, not guaranteed)."""
        return bool(np.all(np.diff(self.weights) < 0)) if self.weights.size > 1 else True


class FeatureKernelBank:
    """Per-feature RBF kernels with tuned bandwidths and cached products.

    Gram matrices are built on demand (``feature_gram``/``gram_block``)
    rather than stored: at gene-expression scale, n full m x m kernels do
    not fit in memory.
    """

    def __init__(self, X: np.ndarray, gammas: np.ndarray, ktas: np.ndarray,
                 is_constant: np.ndarray, self_products: np.ndarray):
        self.X = X
        self.gammas = gammas
        self.ktas = ktas
        self.is_constant = is_constant
        self.self_products = self_products

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    def feature_gram(self, i: int) -> np.ndarray:
        """The m x m RBF kernel of feature ``i`` at its tuned bandwidth."""
        return self.gram_block(np.asarray([i]))[0]

    def gram_block(self, indices: np.ndarray) -> np.ndarray:
        """Stack of feature kernels, shape (len(indices), m, m)."""
        cols = self.X[:, indices]
        diff = cols[:, None, :] - cols[None, :, :]
        return np.exp(-(self.gammas[indices] * diff * diff)).transpose(2, 0, 1)

    def block_size(self) -> int:
        m = self.n_samples
        return max(1, _BLOCK_BUDGET // (m * m))


def _target_entries(K_target) -> np.ndarray:
    if isinstance(K_target, MixedTarget):
        return K_target.k_delta.entries
    return _as_entries(K_target)


def build_bank(X_train, K_target, gamma_grid) -> FeatureKernelBank:
    """Tune one RBF bandwidth per feature by maximizing alignment to the target.

    The grid is scanned in ascending order and only strict improvements
    replace the incumbent, so exact ties resolve to the smallest gamma.
    Constant feature columns produce all-ones kernels; their alignment is
    computed like any other but they are flagged.
    """
    X = X_train.values if isinstance(X_train, DataMatrix) else np.asarray(
        X_train, dtype=np.float64
    )
    if X.ndim != 2:
        raise DataError("X_train must be samples x features")
    grid = np.asarray(sorted(gamma_grid), dtype=np.float64)
    if grid.size == 0:
        raise ParameterError("gamma grid is empty")
    if np.any(grid <= 0):
        raise ParameterError("gamma grid entries must be positive")

    T = _target_entries(K_target)
    m, n = X.shape
    if T.shape != (m, m):
        raise DataError(f"target shape {T.shape} does not match {m} samples")
    tt = float(np.sum(T * T))
    if tt <= 0.0:
        raise DegenerateKernelError("target kernel is all-zero")

    best_kta = np.full(n, -np.inf)
    best_gamma = np.full(n, grid[0])
    block = max(1, _BLOCK_BUDGET // (m * m))
    for gamma in grid:
        for start in range(0, n, block):
            idx = np.arange(start, min(start + block, n))
            cols = X[:, idx]
            diff = cols[:, None, :] - cols[None, :, :]
            Ks = np.exp(-gamma * diff * diff).transpose(2, 0, 1)
            num = np.tensordot(Ks, T, axes=([1, 2], [0, 1]))
            kk = np.einsum("fij,fij->f", Ks, Ks)
            scores = num / np.sqrt(kk * tt)
            improve = scores > best_kta[idx]
            best_kta[idx[improve]] = scores[improve]
            best_gamma[idx[improve]] = gamma

    is_constant = np.ptp(X, axis=0) == 0.0
    bank = FeatureKernelBank(
        X=X,
        gammas=best_gamma,
        ktas=best_kta,
        is_constant=is_constant,
        self_products=np.empty(n),
    )
    # Self Frobenius products at the winning bandwidths, cached for the
    # greedy loop (they are target-independent).
    bsize = bank.block_size()
    for start in range(0, n, bsize):
        idx = np.arange(start, min(start + bsize, n))
        Ks = bank.gram_block(idx)
        bank.self_products[idx] = np.einsum("fij,fij->f", Ks, Ks)
    return bank


def _solve_pair_scalars(aa, ab, bb, ta, tb, tt):
    """Closed-form two-kernel weights from cached Frobenius products.

    Maximizes the alignment of ``mu_a K_a + mu_b K_b`` with the target over
    the non-negative quadrant.  The stationarity system M mu = t (with M
    the 2x2 Gram of the kernels and t their target products) gives the
    unconstrained direction; alignment is scale-invariant, so when that
    direction leaves the quadrant the optimum sits on a boundary ray and
    the two single-kernel candidates are compared directly.
    """
    det = aa * bb - ab * ab
    if bb <= 0.0 or det <= _PROP_RTOL * aa * bb:
        return PairWeights(1.0, 0.0, ta / np.sqrt(aa * tt), proportional=True)
    wa = bb * ta - ab * tb
    wb = aa * tb - ab * ta
    if wa > 0.0 and wb > 0.0:
        s = wa + wb
        mu_a = wa / s
        mu_b = wb / s
        qf = mu_a * mu_a * aa + 2.0 * mu_a * mu_b * ab + mu_b * mu_b * bb
        value = (mu_a * ta + mu_b * tb) / np.sqrt(max(qf, 1e-300) * tt)
        return PairWeights(mu_a, mu_b, float(value))
    kta_a = ta / np.sqrt(aa * tt)
    kta_b = tb / np.sqrt(bb * tt)
    if kta_a >= kta_b:
        return PairWeights(1.0, 0.0, float(kta_a))
    return PairWeights(0.0, 1.0, float(kta_b))


def two_kernel_weights(K_a, K_b, K_target) -> PairWeights:
    """Optimal non-negative weights for combining two kernels against a target.

    Returns weights normalized to sum 1 together with the alignment they
    attain.  If ``K_b`` is (numerically) proportional to ``K_a`` the system
    is singular and ``(1, 0)`` is returned with ``proportional=True``.
    """
    A = _as_entries(K_a)
    B = _as_entries(K_b)
    T = _target_entries(K_target)
    if not (A.shape == B.shape == T.shape):
        raise DataError("two_kernel_weights requires matching shapes")
    aa = float(np.sum(A * A))
    if aa <= 0.0:
        raise DegenerateKernelError("K_a is all-zero")
    tt = float(np.sum(T * T))
    if tt <= 0.0:
        raise DegenerateKernelError("target kernel is all-zero")
    ab = float(np.sum(A * B))
    bb = float(np.sum(B * B))
    ta = float(np.sum(A * T))
    tb = float(np.sum(B * T))
    return _solve_pair_scalars(aa, ab, bb, ta, tb, tt)


def greedy_select(
    bank: FeatureKernelBank,
    K_target,
    p_max: int,
    min_gain: float = 1e-6,
) -> MklSolution:
    """Grow the kernel combination one feature at a time by alignment gain.

    Iteration 0 adopts the bank kernel with the highest standalone
    alignment (the bank must have been built against the same target).
    Each later iteration solves the two-kernel problem between the current
    combination and every unselected candidate, adopts the best, rescales
    the accumulated weights by mu_a and assigns mu_b to the newcomer.  The
    loop stops at ``p_max`` features or when the best gain is <= ``min_gain``.
    Ties always resolve to the lowest feature index.

    Because weights start at 1 and every update preserves their sum, the
    returned weights sum to 1 and the combined kernel keeps a unit
    diagonal, which keeps SVM cost grids comparable across runs.
    """
    if bank.n_features == 0:
        raise ParameterError("feature kernel bank is empty")
    if p_max < 1:
        raise ParameterError("p_max must be at least 1")
    if min_gain < 0:
        raise ParameterError("min_gain must be non-negative")

    T = _target_entries(K_target)
    delta = K_target.delta if isinstance(K_target, MixedTarget) else None
    m = bank.n_samples
    if T.shape != (m, m):
        raise DataError(f"target shape {T.shape} does not match {m} samples")
    tt = float(np.sum(T * T))
    if tt <= 0.0:
        raise DegenerateKernelError("target kernel is all-zero")

    n = bank.n_features
    first = int(np.argmax(bank.ktas))
    selected = [first]
    weights = [1.0]
    K_mu = bank.feature_gram(first).copy()
    ss = float(np.sum(K_mu * K_mu))
    st = float(np.sum(K_mu * T))
    kta_trace = [st / np.sqrt(ss * tt)]

    jj = bank.self_products
    jt = np.empty(n)
    jt_ready = False
    unselected = np.ones(n, dtype=bool)
    unselected[first] = False
    block = bank.block_size()

    while len(selected) < p_max and unselected.any():
        cand = np.nonzero(unselected)[0]
        c_mu = np.empty(cand.size)
        for start in range(0, cand.size, block):
            idx = cand[start:start + block]
            Ks = bank.gram_block(idx)
            c_mu[start:start + idx.size] = np.tensordot(
                Ks, K_mu, axes=([1, 2], [0, 1])
            )
            if not jt_ready:
                jt[idx] = np.tensordot(Ks, T, axes=([1, 2], [0, 1]))
        jt_ready = True

        best_pos = -1
        best = None
        for pos in range(cand.size):
            j = cand[pos]
            res = _solve_pair_scalars(ss, c_mu[pos], jj[j], st, jt[j], tt)
            if best is None or res.kta > best.kta:
                best = res
                best_pos = pos

        gain = best.kta - kta_trace[-1]
        if best.proportional or gain <= min_gain:
            break

        j = int(cand[best_pos])
        weights = [w * best.mu_a for w in weights]
        weights.append(best.mu_b)
        selected.append(j)
        unselected[j] = False
        K_mu *= best.mu_a
        K_mu += best.mu_b * bank.feature_gram(j)
        ss = float(np.sum(K_mu * K_mu))
        st = float(np.sum(K_mu * T))
        kta_trace.append(st / np.sqrt(ss * tt))

    w = np.asarray(weights)
    w = w / w.sum()
    return MklSolution(
        selected=selected,
        weights=w,
        gammas=bank.gammas[np.asarray(selected)],
        kta_trace=kta_trace,
        target_delta=delta,
    )


def compose_kernel(solution: MklSolution, X_rows_a, X_rows_b) -> GramMatrix:
    """Evaluate the weighted feature-wise kernel between two row sets.

    Entry (i, j) is the weight-sum of single-feature RBF kernels over the
    selected features at their tuned bandwidths.  Passing the same rows on
    both sides yields the square training kernel (unit diagonal, since the
    weights sum to 1); different rows yield the cross kernel for scoring.
    """
    A = X_rows_a.values if isinstance(X_rows_a, DataMatrix) else np.asarray(
        X_rows_a, dtype=np.float64
    )
    B = X_rows_b.values if isinstance(X_rows_b, DataMatrix) else np.asarray(
        X_rows_b, dtype=np.float64
    )
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if not solution.selected:
        raise ParameterError("solution selects no features")
    needed = max(solution.selected)
    if A.shape[1] <= needed or B.shape[1] <= needed:
        raise DataError(
            f"row sets are missing selected feature column {needed}"
        )
    K = np.zeros((A.shape[0], B.shape[0]))
    for w, gamma, f in zip(solution.weights, solution.gammas, solution.selected):
        d = A[:, f][:, None] - B[:, f][None, :]
        K += w * np.exp(-gamma * d * d)
    same = A is B or (A.shape == B.shape and np.array_equal(A, B))
    if same:
        return square_gram(K)
    return GramMatrix(K, np.arange(A.shape[0]), np.arange(B.shape[0]), kind="cross")
