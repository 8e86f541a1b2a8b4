"""Conjugate full-conditional updates for both state-specific blocks.

Mean equation: composition sampling from the marginal inverse-gamma for the
noise variance followed by the conditional Gaussian for the coefficients.
Transition equation: two-step Polya-Gamma augmentation, one auxiliary draw
per transition observation, then a Gaussian draw for the logistic
coefficients.

Public functions accept raw ``(dataset, z_path)`` inputs; the sampler feeds
them per-sweep sufficient statistics through the ``stats`` keyword so the
same code path serves both unit usage and the hot loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .distributions import MvnSpec, sample_inverse_gamma, sample_mvn, sample_pg1_batch
from .errors import FactorizationError, ValidationError
from .types import (
    PriorConfig,
    StateLogistic,
    StateRegression,
    TimeSeriesDataset,
    active_design,
    full_mask,
    mask_to_indices,
    transition_observations,
)

__all__ = [
    "MeanSuffStats",
    "TransSuffStats",
    "MeanPosterior",
    "LogisticPosterior",
    "GaussianFactor",
    "centered_responses",
    "mean_suff_stats",
    "trans_suff_stats",
    "mean_posterior",
    "draw_mean_params",
    "logistic_posterior",
    "draw_logistic_params",
    "LogisticUpdate",
]


# ---------------------------------------------------------------------------
# symmetric positive-definite solves with the one-shot jitter policy


@dataclass
class GaussianFactor:
    """Cholesky factorization of a posterior precision matrix.

    Carries everything the samplers and the reversible-jump ratios need:
    the posterior mean, log-determinant of the covariance, and the quadratic
    form mean' cov^-1 mean.
    """

    chol_lower: np.ndarray
    mean: np.ndarray
    log_det_cov: float
    quad: float

    @property
    def dim(self) -> int:
        return self.mean.size

    def covariance(self) -> np.ndarray:
        inv_l = solve_triangular(self.chol_lower, np.eye(self.dim), lower=True)
        return inv_l.T @ inv_l

    def sample(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        """Draw from N(mean, scale^2 * cov) without forming the covariance."""
        z = rng.standard_normal(self.dim)
        return self.mean + scale * solve_triangular(self.chol_lower, z, lower=True, trans="T")


def factor_precision(precision: np.ndarray, linear: np.ndarray) -> GaussianFactor:
    """Factor ``precision`` and solve for the Gaussian with that precision
    and natural (linear) parameter.

    On a failed factorization a jitter of ``1e-10 * trace/dim`` is added
    once; a second failure is a hard error.
    """
    prec = np.asarray(precision, dtype=float)
    for attempt in (0, 1):
        try:
            chol = np.linalg.cholesky(prec)
            break
        except np.linalg.LinAlgError:
            if attempt == 1:
                raise FactorizationError(
                    "posterior precision failed to factor even after jitter; "
                    f"diag range [{prec.diagonal().min():.3e}, {prec.diagonal().max():.3e}]"
                )
            prec = prec + (1e-10 * prec.trace() / prec.shape[0]) * np.eye(prec.shape[0])
    half = solve_triangular(chol, linear, lower=True)
    mean = solve_triangular(chol, half, lower=True, trans="T")
    # |cov| = |prec|^-1 ; quad = mean' prec mean = ||half||^2
    log_det_cov = -2.0 * float(np.log(chol.diagonal()).sum())
    return GaussianFactor(chol_lower=chol, mean=mean, log_det_cov=log_det_cov, quad=float(half @ half))


# ---------------------------------------------------------------------------
# sufficient statistics over the full covariate pool


@dataclass
class MeanSuffStats:
    """Full-pool regression statistics for one state's emission rows."""

    gram: np.ndarray     # (r, r) design' design, intercept column first
    design_y: np.ndarray  # (r,) design' responses
    yy: float
    n_obs: int

    def restrict(self, mask: int) -> tuple[np.ndarray, np.ndarray]:
        sel = [0] + [1 + j for j in mask_to_indices(mask)]
        return self.gram[np.ix_(sel, sel)], self.design_y[sel]


@dataclass
class TransSuffStats:
    """Polya-Gamma-weighted statistics for one state's transition rows."""

    rows: np.ndarray          # indices into the transition design
    responses: np.ndarray     # stay indicators
    design: np.ndarray        # (n, r) full-pool design restricted to rows
    omega: np.ndarray | None = None
    w_gram: np.ndarray | None = None   # design' diag(omega) design
    design_k: np.ndarray | None = None  # design' (responses - 1/2)

    @property
    def n_obs(self) -> int:
        return int(self.rows.size)

    def set_omega(self, omega: np.ndarray) -> None:
        self.omega = omega
        self.w_gram = (self.design * omega[:, None]).T @ self.design
        self.design_k = self.design.T @ (self.responses - 0.5)

    def restrict(self, mask: int) -> tuple[np.ndarray, np.ndarray]:
        if self.w_gram is None:
            raise ValidationError("omega has not been set on these statistics")
        sel = [0] + [1 + j for j in mask_to_indices(mask)]
        return self.w_gram[np.ix_(sel, sel)], self.design_k[sel]


def mean_suff_stats(
    dataset: TimeSeriesDataset,
    z_path: np.ndarray,
    s: int,
    design_full: np.ndarray | None = None,
) -> MeanSuffStats:
    if design_full is None:
        design_full = active_design(dataset, full_mask(dataset.n_pool), "mean")
    rows = np.flatnonzero(np.asarray(z_path)[1:] == s)
    x = design_full[rows]
    y = dataset.y[1:][rows]
    return MeanSuffStats(gram=x.T @ x, design_y=x.T @ y, yy=float(y @ y), n_obs=rows.size)


def trans_suff_stats(
    dataset: TimeSeriesDataset,
    z_path: np.ndarray,
    s: int,
    design_full: np.ndarray | None = None,
) -> TransSuffStats:
    if design_full is None:
        design_full = active_design(dataset, full_mask(dataset.n_pool), "trans")
    rows, responses = transition_observations(z_path, s)
    return TransSuffStats(rows=rows, responses=responses, design=design_full[rows])


# ---------------------------------------------------------------------------
# mean equation


@dataclass
class MeanPosterior:
    """Normal-inverse-gamma posterior for one state's mean block."""

    factor: GaussianFactor
    ig_shape: float
    ig_scale: float
    n_obs: int
    prior_only: bool

    @property
    def coef_mean(self) -> np.ndarray:
        return self.factor.mean

    def coef_cov_scale(self) -> np.ndarray:
        """Covariance scale matrix; coefficient covariance is sigma2 times this."""
        return self.factor.covariance()


def mean_posterior(
    dataset: TimeSeriesDataset,
    z_path: np.ndarray,
    s: int,
    mean_mask: int,
    prior: PriorConfig,
    stats: MeanSuffStats | None = None,
) -> MeanPosterior:
    """Exact conjugate posterior for (coefficients, noise variance).

    With no emission rows for the state the posterior equals the prior and
    is returned flagged, never raised.
    """
    if stats is None:
        stats = mean_suff_stats(dataset, z_path, s)
    gram, xy = stats.restrict(mean_mask)
    d = gram.shape[0]
    prior_prec = np.eye(d) / prior.c_mean
    factor = factor_precision(prior_prec + gram, xy)
    # zero prior mean makes the L0 quadratic terms vanish
    ig_scale = prior.ig_scale + 0.5 * (stats.yy - factor.quad)
    return MeanPosterior(
        factor=factor,
        ig_shape=prior.ig_shape + 0.5 * stats.n_obs,
        ig_scale=float(ig_scale),
        n_obs=stats.n_obs,
        prior_only=stats.n_obs == 0,
    )


def draw_mean_params(post: MeanPosterior, rng: np.random.Generator) -> StateRegression:
    """Composition draw: variance from its marginal, then coefficients."""
    sigma2 = sample_inverse_gamma(post.ig_shape, post.ig_scale, rng)
    b = post.factor.sample(rng, scale=float(np.sqrt(sigma2)))
    return StateRegression(b=b, sigma2=sigma2)


# ---------------------------------------------------------------------------
# transition equation


@dataclass
class LogisticPosterior:
    """Gaussian posterior for one state's logistic block, given omega."""

    factor: GaussianFactor

    @property
    def coef_mean(self) -> np.ndarray:
        return self.factor.mean

    def coef_cov(self) -> np.ndarray:
        return self.factor.covariance()


def centered_responses(responses: np.ndarray) -> np.ndarray:
    """Working responses of the augmented model: stay indicator minus 1/2."""
    return np.asarray(responses, dtype=float) - 0.5


def logistic_posterior(
    design: np.ndarray,
    responses: np.ndarray,
    omega: np.ndarray,
    prior_mean: np.ndarray,
    prior_cov: np.ndarray,
) -> LogisticPosterior:
    """Gaussian full conditional of the logistic coefficients.

    Reduces to the prior when the design is empty.  The precision always
    adds the full prior precision matrix (a prior mean has no inverse; the
    precision is what enters).
    """
    design = np.atleast_2d(np.asarray(design, dtype=float))
    prior_prec = np.linalg.inv(prior_cov)
    lin = prior_prec @ prior_mean
    if design.size:
        lin = design.T @ centered_responses(responses) + lin
        prec = (design * np.asarray(omega)[:, None]).T @ design + prior_prec
    else:
        prec = prior_prec
    return LogisticPosterior(factor=factor_precision(prec, lin))


@dataclass
class LogisticUpdate:
    logit: StateLogistic
    omega: np.ndarray
    from_prior: bool


def draw_logistic_params(
    dataset: TimeSeriesDataset,
    z_path: np.ndarray,
    s: int,
    trans_mask: int,
    beta_current: np.ndarray,
    prior: PriorConfig,
    rng: np.random.Generator,
    stats: TransSuffStats | None = None,
) -> LogisticUpdate:
    """Two-step update: omega | beta then beta | omega.

    Draws exactly one Polya-Gamma auxiliary per transition observation of
    state ``s``.  An empty observation set falls back to a flagged prior
    draw.
    """
    if stats is None:
        stats = trans_suff_stats(dataset, z_path, s)
    m0, v0 = prior.trans_prior(trans_mask)
    if stats.n_obs == 0:
        beta = sample_mvn(MvnSpec(m0, v0), rng)
        return LogisticUpdate(StateLogistic(beta), np.empty(0), from_prior=True)

    sel = [0] + [1 + j for j in mask_to_indices(trans_mask)]
    x_active = stats.design[:, sel]
    psi = x_active @ np.asarray(beta_current, dtype=float)
    omega = sample_pg1_batch(psi, rng)
    stats.set_omega(omega)

    prec_prior = np.eye(len(sel)) / prior.c_trans
    w_gram, design_k = stats.restrict(trans_mask)
    factor = factor_precision(w_gram + prec_prior, design_k)
    beta = factor.sample(rng)
    return LogisticUpdate(StateLogistic(beta), omega, from_prior=False)
