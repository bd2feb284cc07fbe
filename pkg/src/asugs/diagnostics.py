"""Convergence and stability diagnostics for streaming mixture runs.

Quantities evaluated on a cluster book snapshot: the fitted predictive
mixture, its ratio against the fresh-cluster predictive, innovation
probability, and distances to a known generating mixture.  Standalone
numeric checks cover the growth identities behind the adaptive
concentration design: the harmonic log-product ratio, the iterated-log
product bound, the Gaussian limit of the predictive density, and the
empirical class-count growth exponent.

All functions are pure; snapshots can be evaluated concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from asugs.engine import (
    Checkpoint,
    ClusterBook,
    ConcentrationState,
    EngineConfig,
    RunTrace,
    StepRecord,
    merge,
    prune,
    step,
)
from asugs.mixture import GaussianMixture
from asugs.niw import (
    NiwPosterior,
    PriorConfig,
    log_predictive_density_rows,
    prior_predictive,
)


def log_mixture_predictive_rows(book: ClusterBook, ys: np.ndarray) -> np.ndarray:
    """Log of the fitted mixture density over existing clusters.

    Clusters are weighted by their share of currently assigned
    observations (counts of pruned clusters are gone), so the mixture
    integrates to 1 regardless of pruning history.  No innovation slot.
    """
    if book.k == 0:
        raise ValueError("mixture predictive undefined for an empty book")
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    total = book.total_count
    logs = np.empty((book.k, ys.shape[0]))
    for h, cl in enumerate(book.clusters):
        logs[h] = math.log(cl.m / total) + log_predictive_density_rows(cl.post, ys)
    return logsumexp(logs, axis=0)


def mixture_predictive(book: ClusterBook, y: np.ndarray) -> float:
    """Fitted predictive density at a single point (linear domain)."""
    return float(np.exp(log_mixture_predictive_rows(book, y)[0]))


def likelihood_ratio(book: ClusterBook, prior: PriorConfig, y: np.ndarray) -> float:
    """Fresh-cluster predictive over the fitted mixture predictive.

    The numerator depends only on the prior.  Values well below 1 mean
    the point is explained by the fitted clusters; values above 1 mean
    the prior would explain it better than anything fitted so far.  The
    ratio can exceed the float range deep in the fitted tails; such
    points return inf.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    logdiff = prior_predictive(prior, y) - log_mixture_predictive_rows(book, y)[0]
    try:
        return math.exp(logdiff)
    except OverflowError:
        return math.inf


def innovation_probability(
    book: ClusterBook, conc: ConcentrationState, prior: PriorConfig, y: np.ndarray
) -> float:
    """Probability that the next observation opens a new cluster.

    Closed form l * alpha / (M + l * alpha) where l is the likelihood
    ratio and M the number of currently assigned observations; agrees
    exactly with the innovation entry of the engine's responsibility
    vector on the same state.  Evaluated as a sigmoid in log domain so
    extreme ratios saturate cleanly at 0 or 1.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    log_l = prior_predictive(prior, y) - log_mixture_predictive_rows(book, y)[0]
    t = math.log(book.total_count / conc.alpha()) - log_l
    if t > 700.0:
        return 0.0
    if t < -700.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(t))


@dataclass
class McEstimate:
    """Monte Carlo estimate with its standard error."""

    value: float
    stderr: float


def l2_distance_to_truth(
    book: ClusterBook,
    truth: GaussianMixture,
    grid_points: int = 400,
    pad_stds: float = 6.0,
    n_mc: int = 20000,
    seed: int = 0,
) -> float | McEstimate:
    """L2 distance between the fitted predictive and a known mixture.

    Tensor-grid quadrature for d <= 2 (extent: truth mean range padded
    by ``pad_stds`` max standard deviations, ``grid_points`` per axis);
    self-normalized Monte Carlo with draws from the truth otherwise,
    returning the estimate with a standard error.
    """
    d = truth.dim
    if d <= 2:
        max_sd = math.sqrt(max(np.linalg.eigvalsh(cov).max() for cov in truth.covariances))
        # the grid must cover the fitted clusters too, or their mass is
        # invisible to the quadrature
        mus = np.vstack([truth.means] + [cl.post.mu for cl in book.clusters])
        los = mus.min(axis=0) - pad_stds * max_sd
        his = mus.max(axis=0) + pad_stds * max_sd
        axes = [np.linspace(los[i], his[i], grid_points) for i in range(d)]
        if d == 1:
            grid = axes[0][:, None]
            weights = np.gradient(axes[0])
        else:
            xx, yy = np.meshgrid(*axes, indexing="ij")
            grid = np.stack([xx.ravel(), yy.ravel()], axis=1)
            weights = np.outer(np.gradient(axes[0]), np.gradient(axes[1])).ravel()
        diff = np.exp(log_mixture_predictive_rows(book, grid)) - truth.pdf(grid)
        return float(np.sqrt(np.sum(diff * diff * weights)))
    rng = np.random.Generator(np.random.PCG64(seed))
    ys, _ = truth.sample(n_mc, rng)
    pt = truth.pdf(ys)
    vals = (np.exp(log_mixture_predictive_rows(book, ys)) - pt) ** 2 / pt
    est = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_mc))
    return McEstimate(value=math.sqrt(max(est, 0.0)),
                      stderr=se / (2.0 * math.sqrt(max(est, 1e-300))))


def kl_divergence_estimate(
    truth: GaussianMixture, book: ClusterBook, n_mc: int = 20000, seed: int = 0
) -> McEstimate:
    """Monte Carlo KL(truth || fitted predictive) with standard error.

    Draws from the truth; may come out slightly negative within its
    error when the two densities nearly coincide.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    ys, _ = truth.sample(n_mc, rng)
    vals = truth.logpdf(ys) - log_mixture_predictive_rows(book, ys)
    return McEstimate(
        value=float(vals.mean()), stderr=float(vals.std(ddof=1) / math.sqrt(n_mc))
    )


def harmonic_log_product_ratio(alpha: float, n: int) -> float:
    """(sum_{j<n} log(1 + alpha/j)) / (alpha log n); tends to 1 as n grows.

    For alpha = 1 the product telescopes to n and the ratio is exactly 1
    at every n.  Uses exact (fsum) accumulation so the telescoping
    identity holds to machine precision even for n in the millions.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if n < 2:
        raise ValueError("n must be >= 2")
    terms = np.log1p(alpha / np.arange(1, n, dtype=float))
    return math.fsum(terms.tolist()) / (alpha * math.log(n))


@dataclass
class BoundCheck:
    """Outcome of a product-bound verification over a range of n."""

    holds: bool
    min_slack: float
    ns: np.ndarray
    slack: np.ndarray


def loglog_product_bound(phi: float, n_start: int, n_max: int) -> BoundCheck:
    """Verify prod_{k=n_start}^{n} (1 + phi/(k log k)) <= C * log(n)^phi.

    C = exp(phi / (n_start log n_start)) / log(n_start)^phi.  Checked at
    every n in (n_start, n_max]; slack is the log-domain gap between the
    bound and the product (nonnegative everywhere iff the bound holds).
    """
    if n_start < 2:
        raise ValueError("n_start must be >= 2")
    if n_max <= n_start:
        raise ValueError("n_max must exceed n_start")
    ks = np.arange(n_start, n_max + 1, dtype=float)
    log_terms = np.log1p(phi / (ks * np.log(ks)))
    log_prod = np.cumsum(log_terms)
    log_c = phi / (n_start * math.log(n_start)) - phi * math.log(math.log(n_start))
    log_bound = log_c + phi * np.log(np.log(ks))
    slack = log_bound - log_prod
    return BoundCheck(
        holds=bool(np.all(slack >= 0)),
        min_slack=float(slack.min()),
        ns=ks.astype(int),
        slack=slack,
    )


def gaussian_limit_deviation(
    post: NiwPosterior,
    mean: np.ndarray,
    cov: np.ndarray,
    n_grid: int = 160,
    pad_stds: float = 5.0,
) -> float:
    """Sup-norm gap between the predictive density and a target Gaussian.

    Evaluated on a tensor grid centered at the target mean (d <= 2).
    Shrinks to zero as the posterior's counts grow with data drawn from
    the target.
    """
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    d = post.dim
    if d > 2:
        raise ValueError("grid evaluation supports d <= 2")
    sd = math.sqrt(np.linalg.eigvalsh(cov).max())
    axes = [np.linspace(mean[i] - pad_stds * sd, mean[i] + pad_stds * sd, n_grid)
            for i in range(d)]
    if d == 1:
        grid = axes[0][:, None]
    else:
        xx, yy = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([xx.ravel(), yy.ravel()], axis=1)
    pred = np.exp(log_predictive_density_rows(post, grid))
    L = np.linalg.cholesky(cov)
    z = np.linalg.solve(L, (grid - mean).T)
    logdet = 2.0 * float(np.log(np.diag(L)).sum())
    gauss = np.exp(-0.5 * (d * math.log(2 * math.pi) + logdet + np.sum(z * z, axis=0)))
    return float(np.max(np.abs(pred - gauss)))


def growth_exponent(trace: RunTrace) -> float:
    """Least-squares slope of log k_n against log log n, trailing half.

    An empirical estimate of the exponent in k_n ~ log(n)^p; zero for a
    constant class count.
    """
    ks = trace.k_series()
    n = len(ks)
    if n < 100:
        raise ValueError("trace too short for a growth fit")
    idx = np.arange(n // 2, n)
    x = np.log(np.log(idx + 2.0))
    y = np.log(ks[idx].astype(float))
    if np.allclose(y, y[0]):
        return 0.0
    x_c = x - x.mean()
    return float(np.dot(x_c, y - y.mean()) / np.dot(x_c, x_c))


def slope_with_stderr(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x_c = x - x.mean()
    sxx = np.dot(x_c, x_c)
    slope = float(np.dot(x_c, y - y.mean()) / sxx)
    resid = y - y.mean() - slope * x_c
    dof = max(len(x) - 2, 1)
    se = math.sqrt(float(np.dot(resid, resid)) / dof / sxx)
    return slope, se


def run_with_diagnostics(
    stream: np.ndarray,
    config: EngineConfig,
    truth: GaussianMixture | None = None,
    checkpoint_every: int = 100,
    kl_mc: int = 5000,
    kl_seed: int = 0,
    l2_grid: int = 200,
) -> RunTrace:
    """Drive a run, recording diagnostics at periodic checkpoints.

    At each checkpoint step the likelihood ratio is evaluated on the
    incoming observation before the state updates (the per-step ratio a
    converging run keeps bounded), and the post-maintenance state is
    summarized; truth-relative metrics are included when a generating
    mixture is supplied.  KL estimates share one random-number seed
    across checkpoints so their trend over n is not drowned by
    resampling noise.
    """
    stream = np.atleast_2d(np.asarray(stream, dtype=float))
    config = config.resolve(stream.shape[1])
    rng = np.random.Generator(np.random.PCG64(config.seed))
    book = ClusterBook()
    conc = ConcentrationState(k=0, lam=config.lam, n=0)
    records: list[StepRecord] = []
    checkpoints: list[Checkpoint] = []
    maintain = config.prune_eps > 0.0 or config.merge_eps > 0.0
    pending_lr: float | None = None
    for i, y in enumerate(stream, start=1):
        at_checkpoint = i % checkpoint_every == 0
        if at_checkpoint and book.k > 0:
            pending_lr = likelihood_ratio(book, config.prior, y)
        records.append(step(book, conc, y, config, rng))
        if maintain and i % config.maintenance_period == 0:
            prune(book, conc, config.prune_eps)
            merge(book, conc, config.merge_eps)
            records[-1].k_after = book.k
        if at_checkpoint:
            cp = Checkpoint(
                n=book.n, k=book.k, alpha=conc.alpha(), likelihood_ratio=pending_lr
            )
            if truth is not None:
                l2 = l2_distance_to_truth(book, truth, grid_points=l2_grid)
                cp.l2_distance = l2 if isinstance(l2, float) else l2.value
                kl = kl_divergence_estimate(truth, book, n_mc=kl_mc, seed=kl_seed)
                cp.kl_estimate, cp.kl_stderr = kl.value, kl.stderr
            checkpoints.append(cp)
            pending_lr = None
    if maintain and book.n % config.maintenance_period != 0:
        prune(book, conc, config.prune_eps)
        merge(book, conc, config.merge_eps)
        records[-1].k_after = book.k
    from asugs.engine import summarize

    return RunTrace(
        config=config, records=records, clusters=summarize(book),
        n=book.n, k=book.k, checkpoints=checkpoints,
        final_book=book, final_conc=conc,
    )
