"""Ground-truth Gaussian mixtures: generation targets and divergence references."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.linalg import cholesky


@dataclass
class GaussianMixture:
    """Finite Gaussian mixture with full covariances.

    weights      simplex vector, length K
    means        K x d
    covariances  K x d x d, each symmetric positive definite
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.covariances = np.asarray(self.covariances, dtype=float)
        if self.covariances.ndim == 2:
            self.covariances = self.covariances[None, :, :]
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        for cov in self.covariances:
            if not np.allclose(cov, cov.T):
                raise ValueError("covariances must be symmetric")
            cholesky(cov)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def logpdf(self, ys: np.ndarray) -> np.ndarray:
        """Log mixture density at each row of ys."""
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        d = self.dim
        comps = np.empty((self.n_components, ys.shape[0]))
        for h in range(self.n_components):
            L = cholesky(self.covariances[h])
            z = np.linalg.solve(L, (ys - self.means[h]).T)
            logdet = 2.0 * np.log(np.diag(L)).sum()
            comps[h] = (
                np.log(self.weights[h])
                - 0.5 * (d * np.log(2.0 * np.pi) + logdet + np.sum(z * z, axis=0))
            )
        top = comps.max(axis=0)
        return top + np.log(np.exp(comps - top).sum(axis=0))

    def pdf(self, ys: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(ys))

    def sample(self, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw n labeled points: component by weight, then a Gaussian draw."""
        labels = rng.choice(self.n_components, size=n, p=self.weights)
        out = np.empty((n, self.dim))
        chols = [cholesky(cov) for cov in self.covariances]
        for i, h in enumerate(labels):
            out[i] = self.means[h] + chols[h] @ rng.standard_normal(self.dim)
        return out, labels
