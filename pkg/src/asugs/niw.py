"""Conjugate normal-Wishart state and its closed-form predictive density.

Each cluster of the streaming mixture keeps four hyperparameters
(mu, c, delta, sigma).  ``sigma`` is the inverse of the Wishart mean,
i.e. the current covariance estimate of the cluster; storing it directly
(instead of the Wishart scale matrix) keeps the recursion numerically
stable.  The predictive density of a new observation under this state is
a multivariate Student-t, evaluated here in log domain because its
exponent grows linearly with the number of absorbed observations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.linalg import cholesky
from scipy.special import gammaln


@dataclass
class PriorConfig:
    """Hyperparameters assigned to every newly created cluster.

    ``2*delta0 > d - 1`` is required for the Wishart to be proper (and for
    the predictive density to be normalizable).
    """

    mu0: np.ndarray
    c0: float = 1.0
    delta0: float | None = None  # default (d+2)/2, mildest proper choice
    sigma0: np.ndarray | None = None  # default identity

    def __post_init__(self):
        self.mu0 = np.asarray(self.mu0, dtype=float).reshape(-1)
        d = self.mu0.shape[0]
        if self.delta0 is None:
            self.delta0 = (d + 2.0) / 2.0
        self.c0 = float(self.c0)
        self.delta0 = float(self.delta0)
        if self.sigma0 is None:
            self.sigma0 = np.eye(d)
        self.sigma0 = np.asarray(self.sigma0, dtype=float)
        if self.sigma0.shape != (d, d):
            raise ValueError(f"sigma0 must be {d}x{d}, got {self.sigma0.shape}")
        if not np.allclose(self.sigma0, self.sigma0.T):
            raise ValueError("sigma0 must be symmetric")
        cholesky(self.sigma0)  # raises LinAlgError if not positive definite
        if self.c0 <= 0:
            raise ValueError("c0 must be positive")
        if 2.0 * self.delta0 <= d - 1:
            raise ValueError(
                f"2*delta0 must exceed d-1 = {d - 1}, got {2.0 * self.delta0}"
            )

    @property
    def dim(self) -> int:
        return self.mu0.shape[0]

    @classmethod
    def default(cls, d: int) -> "PriorConfig":
        return cls(mu0=np.zeros(d))

    @classmethod
    def from_scale(
        cls, d: int, var: float, pseudo_obs: float = 64.0, c0: float = 0.01
    ) -> "PriorConfig":
        """Prior encoding an expected within-cluster variance.

        ``var`` is the per-axis variance a typical cluster is believed to
        have and ``pseudo_obs`` how many observations' worth of trust to
        place in it (delta0 = pseudo_obs / 2).  The small default c0
        keeps a new cluster's location at its first observation instead
        of shrinking it toward mu0.  Clustering quality depends strongly
        on getting ``var`` within an order of magnitude of the true
        cluster scale; a vague prior (identity sigma0 on unit-scale data
        with tight clusters) makes early clusters absorb their neighbors.
        """
        return cls(
            mu0=np.zeros(d), c0=c0, delta0=pseudo_obs / 2.0, sigma0=var * np.eye(d)
        )


@dataclass
class NiwPosterior:
    """Per-cluster normal-Wishart hyperparameter state.

    mu     location of the posterior mean (length d)
    c      precision-scaling count, grows by 1 per absorbed observation
    delta  half the Wishart degrees of freedom, grows by 1/2 per observation
    sigma  d x d covariance estimate (symmetric positive definite)
    """

    mu: np.ndarray
    c: float
    delta: float
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float).reshape(-1)
        self.sigma = np.asarray(self.sigma, dtype=float)

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def r(self) -> float:
        """Shrinkage factor c/(1+c), always in (0, 1)."""
        return self.c / (1.0 + self.c)

    @classmethod
    def from_prior(cls, prior: PriorConfig) -> "NiwPosterior":
        return cls(
            mu=prior.mu0.copy(),
            c=prior.c0,
            delta=prior.delta0,
            sigma=prior.sigma0.copy(),
        )

    def copy(self) -> "NiwPosterior":
        return NiwPosterior(self.mu.copy(), self.c, self.delta, self.sigma.copy())


def log_gamma_ratio(a: float, d: int) -> float:
    """log of Gamma(a + 1/2) / Gamma(a + (1-d)/2).

    This ratio carries the entire dimension dependence of the Student-t
    normalization below.  Computed via log-gamma; the raw Gamma overflows
    once a reaches a few hundred.
    """
    lo = a + (1.0 - d) / 2.0
    if lo <= 0:
        raise ValueError(
            f"gamma ratio undefined: a + (1-d)/2 = {lo} <= 0 "
            f"(delta too small for dimension {d})"
        )
    return float(gammaln(a + 0.5) - gammaln(lo))


def log_predictive_density(post: NiwPosterior, y: np.ndarray) -> float:
    """Log density of a new observation under the cluster's posterior.

    The marginal of one observation, integrating out the unknown mean and
    precision, is a multivariate Student-t with 2*delta - d + 1 degrees of
    freedom.  Written in the (mu, c, delta, sigma) parametrization:

        log pi^(-d/2) + (d/2) log(r / (2 delta)) + log_gamma_ratio(delta, d)
        - (1/2) log det sigma - (delta + 1/2) log(1 + (r / (2 delta)) Q)

    with r = c/(1+c) and Q the sigma^-1 quadratic form of (y - mu).  The
    constant makes the density integrate to exactly 1 over R^d, so values
    are comparable across clusters with different c and delta.

    Raises ``numpy.linalg.LinAlgError`` if sigma has lost positive
    definiteness; recovery is the caller's decision.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    d = post.dim
    if y.shape[0] != d:
        raise ValueError(f"observation has dim {y.shape[0]}, state has dim {d}")
    L = cholesky(post.sigma)
    z = np.linalg.solve(L, y - post.mu)
    quad = float(z @ z)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    scale = post.r / (2.0 * post.delta)
    return (
        -0.5 * d * np.log(np.pi)
        + 0.5 * d * np.log(scale)
        + log_gamma_ratio(post.delta, d)
        - 0.5 * logdet
        - (post.delta + 0.5) * np.log1p(scale * quad)
    )


def log_predictive_density_rows(post: NiwPosterior, ys: np.ndarray) -> np.ndarray:
    """Vectorized ``log_predictive_density`` over the rows of ``ys``.

    One factorization of sigma serves all rows; used for grid and
    held-out evaluations.
    """
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    d = post.dim
    L = cholesky(post.sigma)
    z = np.linalg.solve(L, (ys - post.mu).T)
    quad = np.sum(z * z, axis=0)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    scale = post.r / (2.0 * post.delta)
    return (
        -0.5 * d * np.log(np.pi)
        + 0.5 * d * np.log(scale)
        + log_gamma_ratio(post.delta, d)
        - 0.5 * logdet
        - (post.delta + 0.5) * np.log1p(scale * quad)
    )


def prior_predictive(prior: PriorConfig, y: np.ndarray) -> float:
    """Log predictive density of a brand-new cluster, i.e. under the prior."""
    return log_predictive_density(NiwPosterior.from_prior(prior), y)


def posterior_update(post: NiwPosterior, y: np.ndarray) -> NiwPosterior:
    """Absorb one observation and return the new hyperparameter state.

    The rank-one covariance term uses the pre-update mean.  Starting from a
    positive definite sigma, the update is a convex combination of sigma
    with a positive semidefinite matrix scaled to stay positive definite;
    the explicit symmetrization only guards against floating-point drift.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != post.dim:
        raise ValueError(f"observation has dim {y.shape[0]}, state has dim {post.dim}")
    c, delta = post.c, post.delta
    resid = y - post.mu
    mu_new = (y + c * post.mu) / (1.0 + c)
    sigma_new = (2.0 * delta / (1.0 + 2.0 * delta)) * post.sigma + (
        1.0 / (1.0 + 2.0 * delta)
    ) * (c / (1.0 + c)) * np.outer(resid, resid)
    sigma_new = 0.5 * (sigma_new + sigma_new.T)
    return NiwPosterior(mu=mu_new, c=c + 1.0, delta=delta + 0.5, sigma=sigma_new)
