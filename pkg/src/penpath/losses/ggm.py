"""Gaussian graphical model loss over lower-triangular precision coordinates.

The parameter vector x holds the lower triangle of the symmetric precision
matrix Omega in column-major order: (0,0), (1,0), ..., (p-1,0), (1,1), ...
The loss is f(Omega) = -log det Omega + trace(S Omega) for a sample
covariance S, restricted to the positive definite cone; gradient components
pick up a factor 2 on off-diagonal coordinates because each moves a
symmetric pair of entries.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import DomainError
from ..sweeplin import check_symmetric
from .base import LossModel


def tri_indices(p):
    """Row/column index arrays of the lower triangle, column-major."""
    rows, cols = [], []
    for j in range(p):
        for i in range(j, p):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


class GaussianGraphicalLoss(LossModel):
    def __init__(self, sample_cov):
        self.sample_cov = check_symmetric(sample_cov, rtol=1e-10, name="sample covariance")
        self.p = self.sample_cov.shape[0]
        if np.any(np.diag(self.sample_cov) <= 0):
            raise ValueError("sample covariance has nonpositive diagonal entries")
        self.rows, self.cols = tri_indices(self.p)
        self._mult = np.where(self.rows == self.cols, 1.0, 2.0)

    @property
    def dim(self):
        return self.p * (self.p + 1) // 2

    def to_matrix(self, x):
        x = self._as_param(x)
        m = np.zeros((self.p, self.p))
        m[self.rows, self.cols] = x
        m[self.cols, self.rows] = x
        return m

    def from_matrix(self, m):
        m = np.asarray(m, dtype=float)
        return m[self.rows, self.cols].copy()

    def offdiagonal_coordinates(self):
        """Coordinate indices of strictly-lower-triangle (off-diagonal) entries."""
        return np.flatnonzero(self.rows != self.cols)

    def _inverse(self, x):
        omega = self.to_matrix(x)
        try:
            factor = cho_factor(omega)
        except np.linalg.LinAlgError:
            raise DomainError("precision matrix is not positive definite") from None
        inv = cho_solve(factor, np.eye(self.p))
        return omega, 0.5 * (inv + inv.T), factor

    def value(self, x):
        omega = self.to_matrix(x)
        try:
            factor, _ = cho_factor(omega)
        except np.linalg.LinAlgError:
            raise DomainError("precision matrix is not positive definite") from None
        logdet = 2.0 * np.sum(np.log(np.diag(factor)))
        return float(-logdet + np.sum(self.sample_cov * omega))

    def gradient(self, x):
        _, inv, _ = self._inverse(x)
        grad_mat = self.sample_cov - inv
        return self._mult * grad_mat[self.rows, self.cols]

    def _gather(self, m):
        # Row k of the Hessian for basis element E_k: trace(E_k M) with the
        # symmetric-pair multiplicity.
        return self._mult * m[self.rows, self.cols]

    def hessian(self, x):
        _, inv, _ = self._inverse(x)
        q = self.dim
        h = np.empty((q, q))
        for k in range(q):
            i, j = self.rows[k], self.cols[k]
            m = np.outer(inv[:, i], inv[j, :])
            if i != j:
                m = m + m.T
            h[:, k] = self._gather(m)
        return 0.5 * (h + h.T)

    def dhessian(self, x, v):
        _, inv, _ = self._inverse(x)
        mv = self.to_matrix(np.asarray(v, dtype=float))
        b = inv @ mv @ inv
        b = 0.5 * (b + b.T)
        q = self.dim
        dh = np.empty((q, q))
        for k in range(q):
            i, j = self.rows[k], self.cols[k]
            m = np.outer(inv[:, i], b[j, :]) + np.outer(b[:, i], inv[j, :])
            if i != j:
                m = m + m.T
            dh[:, k] = -self._gather(m)
        return 0.5 * (dh + dh.T)

    def newton_start(self):
        return self.from_matrix(np.diag(1.0 / np.diag(self.sample_cov)))
