"""Time-varying transitions, joint likelihood, and hidden-path sampling.

The filter runs in scaled linear space with per-step normalization; the
normalization constants accumulate the log marginal likelihood.  Emission
terms start at the second observation: the first observation has no lagged
design row, so its state carries prior weight only.  The joint likelihood
below uses the same convention, keeping the filter and the path density
mutually consistent (T-1 emission terms).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit

from .errors import DimensionError, DomainError, FilterUnderflowError, ValidationError
from .types import (
    ModelIndicator,
    NhhmmParams,
    TimeSeriesDataset,
    active_design,
    mask_popcount,
)

__all__ = [
    "TransitionSequence",
    "FilterState",
    "compute_transitions",
    "emission_logliks",
    "log_joint_likelihood",
    "path_log_joint",
    "forward_filter",
    "backward_sample",
    "ffbs_sample",
]


@dataclass
class TransitionSequence:
    """Per-step transition probabilities for t -> t+1 moves.

    Slot ``t`` (0-based) holds the matrix entries governing the move from
    ``z[t]`` to ``z[t+1]``.  Off-diagonal entries are stored explicitly as
    ``expit(-logit)`` rather than ``1 - p``, which preserves tiny exit
    probabilities that would round away; in exact arithmetic
    ``p12 = 1 - p11`` and ``p21 = 1 - p22``.
    """

    stay1: np.ndarray
    stay2: np.ndarray
    leave1: np.ndarray
    leave2: np.ndarray
    log_stay1: np.ndarray
    log_stay2: np.ndarray
    log_leave1: np.ndarray
    log_leave2: np.ndarray

    # spec-facing aliases
    @property
    def p11(self) -> np.ndarray:
        return self.stay1

    @property
    def p22(self) -> np.ndarray:
        return self.stay2

    @property
    def p12(self) -> np.ndarray:
        return self.leave1

    @property
    def p21(self) -> np.ndarray:
        return self.leave2

    def __len__(self) -> int:
        return int(self.stay1.shape[0])

    @classmethod
    def from_logits(cls, logit1: np.ndarray, logit2: np.ndarray) -> "TransitionSequence":
        logit1 = np.asarray(logit1, dtype=float)
        logit2 = np.asarray(logit2, dtype=float)
        return cls(
            stay1=expit(logit1),
            stay2=expit(logit2),
            leave1=expit(-logit1),
            leave2=expit(-logit2),
            log_stay1=log_expit(logit1),
            log_stay2=log_expit(logit2),
            log_leave1=log_expit(-logit1),
            log_leave2=log_expit(-logit2),
        )

    @classmethod
    def constant(cls, stay1: float, stay2: float, n_steps: int) -> "TransitionSequence":
        """Homogeneous chain: the same transition matrix at every step."""
        for p in (stay1, stay2):
            if not 0.0 < p < 1.0:
                raise DomainError(f"stay probability must be in (0,1), got {p}")
        ones = np.ones(n_steps)
        return cls(
            stay1=stay1 * ones,
            stay2=stay2 * ones,
            leave1=(1.0 - stay1) * ones,
            leave2=(1.0 - stay2) * ones,
            log_stay1=np.log(stay1) * ones,
            log_stay2=np.log(stay2) * ones,
            log_leave1=np.log1p(-stay1) * ones,
            log_leave2=np.log1p(-stay2) * ones,
        )

    def log_prob(self, frm: int, to: int) -> np.ndarray:
        if frm == 1:
            return self.log_stay1 if to == 1 else self.log_leave1
        return self.log_stay2 if to == 2 else self.log_leave2


@dataclass
class FilterState:
    """Scaled forward variables and their normalization constants.

    Each row of ``scaled_alpha`` sums to one; ``log_norm_consts`` sums to the
    log marginal likelihood of the emissions given the parameters.
    """

    scaled_alpha: np.ndarray
    log_norm_consts: np.ndarray

    @property
    def log_marginal(self) -> float:
        return float(self.log_norm_consts.sum())


def compute_transitions(
    dataset: TimeSeriesDataset,
    trans_mask: int,
    beta1: np.ndarray,
    beta2: np.ndarray,
) -> TransitionSequence:
    """Logistic stay probabilities from the active transition covariates.

    Slot ``t`` is computed from covariate row ``t`` and governs the
    ``t -> t+1`` move.  Evaluated through ``expit`` / ``log_expit``, so
    logits up to +-700 neither overflow nor lose the small complement.
    """
    beta1 = np.asarray(beta1, dtype=float)
    beta2 = np.asarray(beta2, dtype=float)
    want = 1 + mask_popcount(trans_mask)
    for name, b in (("beta1", beta1), ("beta2", beta2)):
        if b.shape != (want,):
            raise DimensionError(
                f"{name} has shape {b.shape}, mask requires length {want}"
            )
    design = active_design(dataset, trans_mask, "trans")
    return TransitionSequence.from_logits(design @ beta1, design @ beta2)


def emission_logliks(
    dataset: TimeSeriesDataset,
    mean_mask: int,
    params: NhhmmParams,
) -> np.ndarray:
    """(T-1, 2) matrix of log emission densities; row ``i`` scores ``y[i+1]``."""
    design = active_design(dataset, mean_mask, "mean")
    y = dataset.y[1:]
    out = np.empty((y.shape[0], 2))
    for s in (1, 2):
        reg = params.state(s).reg
        if not reg.sigma2 > 0:
            raise DomainError(f"state {s} noise variance must be positive")
        mu = design @ reg.b
        out[:, s - 1] = -0.5 * (np.log(2.0 * np.pi * reg.sigma2) + (y - mu) ** 2 / reg.sigma2)
    return out


def path_log_joint(
    pi1: np.ndarray,
    trans: TransitionSequence | None,
    log_emis: np.ndarray,
    z_path: np.ndarray,
) -> float:
    """Log joint density of (emissions, path) from precomputed pieces.

    Degenerates gracefully: a length-1 path contributes only its initial
    log probability.
    """
    z = np.asarray(z_path)
    n = z.shape[0]
    lp = float(np.log(pi1[z[0] - 1]))
    if n == 1:
        return lp
    if trans is None or len(trans) < n - 1 or log_emis.shape[0] < n - 1:
        raise DimensionError("transitions/emissions shorter than the path")
    frm = z[:-1]
    to = z[1:]
    steps = np.arange(n - 1)
    log_tr = np.where(
        frm == 1,
        np.where(to == 1, trans.log_stay1[steps], trans.log_leave1[steps]),
        np.where(to == 2, trans.log_stay2[steps], trans.log_leave2[steps]),
    )
    lp += float(log_tr.sum())
    lp += float(log_emis[steps, to - 1].sum())
    return lp


def log_joint_likelihood(
    dataset: TimeSeriesDataset,
    params: NhhmmParams,
    indicator: ModelIndicator,
    z_path: np.ndarray,
) -> float:
    """Log of the joint density of the observed series and a hidden path."""
    z = np.asarray(z_path)
    if z.shape[0] != dataset.n_obs:
        raise DimensionError("z_path length must equal the series length")
    indicator.validate(params, dataset.n_pool)
    trans = compute_transitions(
        dataset,
        indicator.trans_mask,
        params.state1.logit.beta,
        params.state2.logit.beta,
    )
    log_emis = emission_logliks(dataset, indicator.mean_mask, params)
    return path_log_joint(params.pi1, trans, log_emis, z)


def forward_filter(
    pi1: np.ndarray,
    trans: TransitionSequence,
    log_emis: np.ndarray,
) -> FilterState:
    """Scaled forward pass.

    Emission rows are shifted by their per-step maximum before
    exponentiation, so a state can only underflow relative to the other by
    more than ~700 log-units, in which case it carries no posterior weight
    anyway.
    """
    n_steps = log_emis.shape[0]
    n = n_steps + 1
    shift = log_emis.max(axis=1)
    emis = np.exp(log_emis - shift[:, None])

    alpha = np.empty((n, 2))
    log_c = np.empty(n)
    alpha[0, 0] = pi1[0]
    alpha[0, 1] = pi1[1]
    log_c[0] = 0.0

    # plain-float loop: ~3x faster than per-step numpy for a 2-state chain
    p11 = trans.stay1.tolist()
    p12 = trans.leave1.tolist()
    p21 = trans.leave2.tolist()
    p22 = trans.stay2.tolist()
    f1 = emis[:, 0].tolist()
    f2 = emis[:, 1].tolist()
    sh = shift.tolist()
    a1 = float(pi1[0])
    a2 = float(pi1[1])
    from math import log as _log

    for t in range(n_steps):
        b1 = (a1 * p11[t] + a2 * p21[t]) * f1[t]
        b2 = (a1 * p12[t] + a2 * p22[t]) * f2[t]
        c = b1 + b2
        if c <= 0.0 or c != c:
            raise FilterUnderflowError(t + 1)
        a1 = b1 / c
        a2 = b2 / c
        alpha[t + 1, 0] = a1
        alpha[t + 1, 1] = a2
        log_c[t + 1] = _log(c) + sh[t]
    return FilterState(scaled_alpha=alpha, log_norm_consts=log_c)


def backward_sample(
    filt: FilterState,
    trans: TransitionSequence,
    rng: np.random.Generator,
) -> np.ndarray:
    """Exact posterior path draw given the forward pass."""
    alpha = filt.scaled_alpha
    n = alpha.shape[0]
    u = rng.random(n)
    z = np.empty(n, dtype=np.int8)
    z[-1] = 1 if u[-1] < alpha[-1, 0] else 2

    p11 = trans.stay1.tolist()
    p12 = trans.leave1.tolist()
    p21 = trans.leave2.tolist()
    p22 = trans.stay2.tolist()
    ul = u.tolist()
    cur = int(z[-1])
    for t in range(n - 2, -1, -1):
        if cur == 1:
            w1 = alpha[t, 0] * p11[t]
            w2 = alpha[t, 1] * p21[t]
        else:
            w1 = alpha[t, 0] * p12[t]
            w2 = alpha[t, 1] * p22[t]
        tot = w1 + w2
        if tot <= 0.0 or tot != tot:
            raise FilterUnderflowError(t)
        cur = 1 if ul[t] < w1 / tot else 2
        z[t] = cur
    return z


def ffbs_sample(
    dataset: TimeSeriesDataset,
    params: NhhmmParams,
    indicator: ModelIndicator,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """One exact draw of the hidden path plus the log marginal likelihood."""
    indicator.validate(params, dataset.n_pool)
    trans = compute_transitions(
        dataset,
        indicator.trans_mask,
        params.state1.logit.beta,
        params.state2.logit.beta,
    )
    log_emis = emission_logliks(dataset, indicator.mean_mask, params)
    filt = forward_filter(params.pi1, trans, log_emis)
    z = backward_sample(filt, trans, rng)
    return z, filt.log_marginal
