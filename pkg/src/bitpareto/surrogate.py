"""Cheap quality predictor: a cubic radial-basis-function interpolant.

The predictor maps [0,1]-scaled bit-width features to scores via

    s(x) = sum_i w_i * ||x - x_i||^3 + b + a.T x

fit by solving the augmented symmetric system with polynomial side
constraints P.T w = 0.  The cubic kernel is conditionally positive
definite, so the affine tail both stabilizes the solve and reproduces
affine targets exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .space import BitConfig, SearchSpace


class RbfFitError(RuntimeError):
    """Raised when the interpolation system cannot be solved."""


def encode(config: BitConfig, space: SearchSpace) -> np.ndarray:
    """Feature vector for a config: each free layer's bit scaled to [0, 1].

    Frozen layers carry no information and are excluded.  A free layer with
    a single allowed bit-width maps to 0.
    """
    bits = np.asarray(config.bits, dtype=float)
    return (bits[space._free_arr] - space._feat_lo) / space._feat_span


def encode_matrix(bits_matrix: np.ndarray, space: SearchSpace) -> np.ndarray:
    """Vectorized :func:`encode` over rows of an (n, L) bit matrix."""
    sub = np.asarray(bits_matrix, dtype=float)[:, space._free_arr]
    return (sub - space._feat_lo) / space._feat_span


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances via the Gram trick, clamped at zero."""
    an = np.einsum("ij,ij->i", a, a)
    bn = np.einsum("ij,ij->i", b, b)
    d2 = an[:, None] + bn[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


@dataclass
class RbfModel:
    """Fitted cubic-RBF interpolant with an affine tail."""

    centers: np.ndarray          # (n, d) training inputs
    weights: np.ndarray          # (n,) kernel weights
    tail: np.ndarray             # (d + 1,) intercept followed by linear coefficients
    regularization: float

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"feature dimension {x.shape} != model dim {self.dim}")
        diff = self.centers - x
        r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return float(self.weights @ (r * r * r) + self.tail[0] + self.tail[1:] @ x)

    def predict_batch(self, X, chunk: int = 4096) -> np.ndarray:
        """Predict many points at once; chunked to bound the distance matrix."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ValueError(f"feature dimension {X.shape[1]} != model dim {self.dim}")
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], chunk):
            block = X[start : start + chunk]
            d2 = _pairwise_sq_dists(block, self.centers)
            phi = d2 ** 1.5
            out[start : start + chunk] = (
                phi @ self.weights + self.tail[0] + block @ self.tail[1:]
            )
        return out


def _merge_duplicates(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Average the targets of exactly-duplicated feature rows."""
    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    if uniq.shape[0] == X.shape[0]:
        return X, y
    sums = np.zeros(uniq.shape[0])
    counts = np.zeros(uniq.shape[0])
    np.add.at(sums, inverse, y)
    np.add.at(counts, inverse, 1.0)
    return uniq, sums / counts


def fit_rbf(X, y, regularization: float = 1e-8) -> RbfModel:
    """Fit the cubic-RBF interpolant to (features, score) samples.

    Exact duplicate rows are merged (targets averaged) before solving, and a
    ridge term on the kernel block keeps near-duplicates tractable.  Needs at
    least dim + 2 distinct samples.

    Raises:
        RbfFitError: too few samples, or a system singular even for the
            least-squares fallback.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0]:
        raise RbfFitError(f"sample count mismatch: {X.shape[0]} vs {y.shape[0]}")
    if regularization < 0:
        raise RbfFitError("regularization must be >= 0")
    X, y = _merge_duplicates(X, y)
    n, d = X.shape
    if n < d + 2:
        raise RbfFitError(f"need at least dim + 2 = {d + 2} distinct samples, got {n}")

    phi = _pairwise_sq_dists(X, X) ** 1.5
    if regularization:
        phi[np.diag_indices_from(phi)] += regularization
    p = np.hstack([np.ones((n, 1)), X])
    m = d + 1
    a = np.zeros((n + m, n + m))
    a[:n, :n] = phi
    a[:n, n:] = p
    a[n:, :n] = p.T
    rhs = np.concatenate([y, np.zeros(m)])

    try:
        sol = np.linalg.solve(a, rhs)
        if not np.isfinite(sol).all():
            raise np.linalg.LinAlgError("non-finite solution")
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        if not np.isfinite(sol).all():
            raise RbfFitError("interpolation system is singular") from None

    return RbfModel(
        centers=X.copy(),
        weights=sol[:n],
        tail=sol[n:],
        regularization=regularization,
    )


def predict(model: RbfModel, x) -> float:
    """Evaluate a fitted model at one feature vector."""
    return model.predict(x)
