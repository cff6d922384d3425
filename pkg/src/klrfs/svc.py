"""Soft-margin support vector classification on precomputed kernels.

Solves the standard dual

    max  sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
    s.t. 0 <= alpha_i <= C,  sum_i alpha_i y_i = 0

with sequential two-variable (SMO-style) updates using maximal-violating-
pair selection, stopping when the KKT violation gap drops below ``tol``.
Exact at the few-hundred-sample scale this package targets, with no
external solver dependency.  The decision value for a point x is
``sum_i alpha_i y_i k(x, x_i) + b``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    DegenerateLabelsError,
    NumericalError,
    ParameterError,
)
from .kernels import GramMatrix, PSD_RTOL, _as_entries

# Floor for the pair curvature when the kernel is indefinite along the
# working direction.
_TAU = 1e-12


@dataclass
class SvcModel:
    """Fitted dual solution.

    ``dual_coefs`` holds alpha_i * y_i for every training sample (zeros for
    non-support vectors), so decision values are ``K_cross @ dual_coefs +
    bias``.
    """

    dual_coefs: np.ndarray
    bias: float
    support_indices: np.ndarray
    C: float
    tolerance: float
    kkt_gap: float
    n_updates: int
    psd_warning: bool = False


def fit_svc(K_train, labels, C: float, tol: float = 1e-3) -> SvcModel:
    """Train on a precomputed square kernel.

    The kernel is checked for numerical positive semi-definiteness; a
    failure sets ``psd_warning`` on the model but the solve proceeds (the
    pair curvature is floored instead of repairing the kernel).  The bias
    is the average of ``y_i - sum_j alpha_j y_j K_ij`` over free support
    vectors, or the midpoint of the feasible interval if none are free.
    Raises ``NumericalError`` if the update cap of ``100 * m**2`` pair
    updates is hit before the gap closes.
    """
    K = _as_entries(K_train)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DataError("training kernel must be square")
    y = np.asarray(labels, dtype=np.float64)
    m = K.shape[0]
    if y.shape != (m,):
        raise DataError(f"labels length {y.shape} does not match kernel size {m}")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise DegenerateLabelsError("cannot fit a classifier on a single class")
    if not C > 0:
        raise ParameterError(f"C must be positive, got {C}")
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")

    w = np.linalg.eigvalsh(0.5 * (K + K.T))
    psd_warning = bool(w[0] < -PSD_RTOL * max(w[-1], 0.0))

    Q = K * np.outer(y, y)
    alpha = np.zeros(m)
    G = -np.ones(m)
    pos = y > 0

    max_updates = 100 * m * m
    n_updates = 0
    gap = np.inf
    converged = False
    while n_updates < max_updates:
        neg_yG = -y * G
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (~pos & (alpha < C)) | (pos & (alpha > 0))
        up_idx = np.nonzero(up)[0]
        low_idx = np.nonzero(low)[0]
        i = up_idx[np.argmax(neg_yG[up_idx])]
        j = low_idx[np.argmin(neg_yG[low_idx])]
        gap = neg_yG[i] - neg_yG[j]
        if gap < tol:
            converged = True
            break

        old_i, old_j = alpha[i], alpha[j]
        Qij = Q[i, j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Qij
            if quad <= 0:
                quad = _TAU
            delta = (-G[i] - G[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Qij
            if quad <= 0:
                quad = _TAU
            delta = (G[i] - G[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total

        G += Q[:, i] * (alpha[i] - old_i) + Q[:, j] * (alpha[j] - old_j)
        n_updates += 1

    if not converged:
        raise NumericalError(
            f"SMO did not converge within {max_updates} pair updates "
            f"(gap {gap:.3e}, tol {tol:.3e})"
        )

    yG = y * G
    free = (alpha > 0.0) & (alpha < C)
    if free.any():
        bias = float(np.mean(-yG[free]))
    else:
        ub = np.inf
        lb = -np.inf
        at_upper = alpha >= C
        at_lower = alpha <= 0.0
        for t in range(m):
            if at_upper[t]:
                if y[t] < 0:
                    ub = min(ub, yG[t])
                else:
                    lb = max(lb, yG[t])
            elif at_lower[t]:
                if y[t] > 0:
                    ub = min(ub, yG[t])
                else:
                    lb = max(lb, yG[t])
        bias = float(-(ub + lb) / 2.0)

    return SvcModel(
        dual_coefs=alpha * y,
        bias=bias,
        support_indices=np.nonzero(alpha > 0.0)[0],
        C=float(C),
        tolerance=float(tol),
        kkt_gap=float(gap),
        n_updates=n_updates,
        psd_warning=psd_warning,
    )


def decision_values(model: SvcModel, K_cross) -> np.ndarray:
    """Continuous decision scores for rows of a test x train kernel.

    Classification is the sign of the score; the raw scores are what the
    ranking metrics consume.
    """
    K = _as_entries(K_cross)
    if K.ndim != 2 or K.shape[1] != model.dual_coefs.shape[0]:
        raise DataError(
            f"cross kernel has {K.shape[1] if K.ndim == 2 else '?'} columns, "
            f"expected {model.dual_coefs.shape[0]}"
        )
    return K @ model.dual_coefs + model.bias


def hinge_loss(model: SvcModel, K_train, labels) -> float:
    """Total hinge loss of a fitted model on its training kernel."""
    scores = decision_values(model, K_train)
    y = np.asarray(labels, dtype=np.float64)
    return float(np.sum(np.maximum(0.0, 1.0 - y * scores)))
