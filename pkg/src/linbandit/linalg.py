"""Incremental ridge regression shared by every policy.

The state tracks the regularized Gram matrix V = lam*I + sum(x x^T), its
inverse, the moment vector W = sum(y*x) and the ridge estimate V^{-1} W.
The inverse is maintained with the rank-one identity

    (V + x x^T)^{-1} = V^{-1} - (V^{-1} x)(V^{-1} x)^T / (1 + x^T V^{-1} x)

and recomputed from scratch by an SPD solve every ``refresh_every`` updates
to bound floating-point drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ConfigurationError, NumericError, UsageError

DEFAULT_REFRESH_EVERY = 256


@dataclass
class RidgeState:
    """Regularized least-squares state with an incrementally maintained inverse."""

    dim: int
    lam: float
    gram: np.ndarray
    gram_inv: np.ndarray
    moment: np.ndarray
    estimate: np.ndarray
    updates: int = 0          # rank-1 updates since the last full refresh
    total_updates: int = 0
    refresh_every: int = DEFAULT_REFRESH_EVERY
    _sqrt_inv: np.ndarray | None = field(default=None, repr=False)

    def copy(self) -> "RidgeState":
        return RidgeState(
            dim=self.dim,
            lam=self.lam,
            gram=self.gram.copy(),
            gram_inv=self.gram_inv.copy(),
            moment=self.moment.copy(),
            estimate=self.estimate.copy(),
            updates=self.updates,
            total_updates=self.total_updates,
            refresh_every=self.refresh_every,
        )

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise UsageError(f"context has shape {x.shape}, expected ({self.dim},)")
        return x

    def update(self, x: np.ndarray, y: float) -> "RidgeState":
        """Absorb one observation (x, y); returns self for chaining."""
        x = self._check_dim(x)
        if not (np.all(np.isfinite(x)) and np.isfinite(y)):
            raise NumericError("non-finite value in ridge update")
        self.gram += np.outer(x, x)
        self.moment += y * x
        self.updates += 1
        self.total_updates += 1
        if self.updates >= self.refresh_every:
            self.refresh()
        else:
            z = self.gram_inv @ x
            denom = 1.0 + float(x @ z)
            self.gram_inv -= np.outer(z, z) / denom
            self.estimate = self.gram_inv @ self.moment
        self._sqrt_inv = None
        return self

    def refresh(self) -> None:
        """Recompute the inverse and estimate directly from the SPD Gram matrix."""
        c, low = cho_factor(self.gram, lower=True)
        self.gram_inv = cho_solve((c, low), np.eye(self.dim))
        self.gram_inv = 0.5 * (self.gram_inv + self.gram_inv.T)
        self.estimate = cho_solve((c, low), self.moment)
        self.updates = 0

    def mahalanobis_sq(self, x: np.ndarray) -> float:
        """x^T V^{-1} x, clamped at zero against round-off."""
        x = self._check_dim(x)
        return max(float(x @ self.gram_inv @ x), 0.0)

    def mahalanobis_sq_many(self, X: np.ndarray) -> np.ndarray:
        """Row-wise x^T V^{-1} x for a (K, dim) matrix of contexts."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise UsageError(f"context matrix has shape {X.shape}, expected (*, {self.dim})")
        vals = np.einsum("ij,jk,ik->i", X, self.gram_inv, X)
        return np.maximum(vals, 0.0)

    def predict(self, x: np.ndarray) -> float:
        """Inner product of the ridge estimate with x."""
        x = self._check_dim(x)
        return float(self.estimate @ x)

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise UsageError(f"context matrix has shape {X.shape}, expected (*, {self.dim})")
        return X @ self.estimate

    def sqrt_inv(self) -> np.ndarray:
        """Lower-triangular A with A A^T = V^{-1} (cached until the next update)."""
        if self._sqrt_inv is None:
            sym = 0.5 * (self.gram_inv + self.gram_inv.T)
            self._sqrt_inv = np.linalg.cholesky(sym)
        return self._sqrt_inv


def ridge_init(dim: int, lam: float, refresh_every: int = DEFAULT_REFRESH_EVERY) -> RidgeState:
    """Fresh state: V = lam*I, W = 0, estimate = 0."""
    if dim < 1:
        raise ConfigurationError(f"dim must be >= 1, got {dim}")
    if not lam > 0:
        raise ConfigurationError(f"regularizer must be positive, got {lam}")
    return RidgeState(
        dim=dim,
        lam=float(lam),
        gram=lam * np.eye(dim),
        gram_inv=(1.0 / lam) * np.eye(dim),
        moment=np.zeros(dim),
        estimate=np.zeros(dim),
        refresh_every=refresh_every,
    )
