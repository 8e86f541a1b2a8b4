"""Core data model: datasets, parameters, model indicators, chain storage.

Index conventions (0-based throughout the code):

* ``y[t]`` and ``x_pool[t]`` refer to the same time slot; ``x_pool[t]`` is the
  covariate vector available at that time.
* The mean regression for ``y[t]`` uses design row ``(1, x_pool[t-1])``, so
  emissions exist for ``t = 1 .. T-1`` (T-1 usable rows).
* The transition from ``z[t]`` to ``z[t+1]`` is driven by ``x_pool[t]``
  (t = 0 .. T-2), matching the mean equation's one-step lag.
* Hidden states take values in ``{1, 2}``.

Pool covariate ``j`` (0-based column of ``x_pool``) is addressed by bit ``j``
of an inclusion mask.  Intercepts are always included and never appear in
masks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

__all__ = [
    "TimeSeriesDataset",
    "StateRegression",
    "StateLogistic",
    "StateParams",
    "NhhmmParams",
    "ModelIndicator",
    "McmcDraw",
    "ChainStore",
    "PriorConfig",
    "active_design",
    "transition_observations",
    "mask_popcount",
    "mask_to_indices",
    "indices_to_mask",
    "full_mask",
]


# ---------------------------------------------------------------------------
# bitmask helpers


def mask_popcount(mask: int) -> int:
    return bin(mask).count("1")


def mask_to_indices(mask: int) -> list[int]:
    """Pool column indices selected by ``mask``, ascending."""
    out = []
    j = 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


def indices_to_mask(indices: Iterable[int]) -> int:
    mask = 0
    for j in indices:
        mask |= 1 << j
    return mask


def full_mask(n_pool: int) -> int:
    return (1 << n_pool) - 1


# ---------------------------------------------------------------------------
# dataset


@dataclass
class TimeSeriesDataset:
    """Observed series plus the common covariate pool.

    Parameters
    ----------
    y : (T,) array
        Observed process.
    x_pool : (T, r-1) array
        Covariate pool, intercept excluded.  Row ``t`` is the covariate
        vector available at time ``t``.
    t_index : sequence of str, optional
        Time labels, length T.
    ar_lags : dict, optional
        Maps pool column index -> autoregressive lag order for columns that
        were constructed from lagged ``y`` at ingestion.  Needed by the
        forecaster to substitute simulated values beyond horizon 1.
    """

    y: np.ndarray
    x_pool: np.ndarray
    t_index: list[str] | None = None
    ar_lags: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x_pool = np.asarray(self.x_pool, dtype=float)
        if self.y.ndim != 1:
            raise ValidationError("y must be one-dimensional")
        if self.x_pool.ndim != 2:
            raise ValidationError("x_pool must be two-dimensional")
        if self.x_pool.shape[0] != self.y.shape[0]:
            raise DimensionError(
                f"y has length {self.y.shape[0]} but x_pool has "
                f"{self.x_pool.shape[0]} rows"
            )
        if self.y.shape[0] < 3:
            raise ValidationError("need at least T=3 observations")
        if not np.isfinite(self.y).all():
            raise ValidationError("y contains NaN or infinite entries")
        if not np.isfinite(self.x_pool).all():
            raise ValidationError("x_pool contains NaN or infinite entries")
        if self.t_index is not None and len(self.t_index) != self.y.shape[0]:
            raise DimensionError("t_index length does not match y")

    @property
    def n_obs(self) -> int:
        return int(self.y.shape[0])

    @property
    def n_pool(self) -> int:
        return int(self.x_pool.shape[1])


def active_design(dataset: TimeSeriesDataset, mask: int, which: str) -> np.ndarray:
    """Design matrix (intercept first) for the active covariates of ``mask``.

    Under the lag-1 alignment both equations consume the same covariate rows:
    row ``i`` of the result is ``(1, x_pool[i, active])`` for
    ``i = 0 .. T-2``.  For the mean equation row ``i`` belongs to the
    regression of ``y[i+1]``; for the transition equation it drives the move
    ``z[i] -> z[i+1]``.
    """
    if which not in ("mean", "trans"):
        raise ValidationError(f"which must be 'mean' or 'trans', got {which!r}")
    if mask < 0 or mask >= (1 << dataset.n_pool):
        raise DimensionError(
            f"mask {mask:#x} addresses covariates beyond the pool width "
            f"{dataset.n_pool}"
        )
    cols = mask_to_indices(mask)
    rows = dataset.n_obs - 1
    out = np.empty((rows, 1 + len(cols)))
    out[:, 0] = 1.0
    if cols:
        out[:, 1:] = dataset.x_pool[:rows, cols]
    return out


def transition_observations(z_path: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows and binary stay-responses for the state-``s`` logistic regression.

    Returns the 0-based indices ``t`` in ``0 .. T-2`` with ``z[t] == s`` and
    the indicator of ``z[t+1] == s`` at those indices.  The final time slot
    contributes nothing: it has no observed successor.
    """
    z = np.asarray(z_path)
    if z.shape[0] < 2:
        raise ValidationError("z_path must have length >= 2")
    if s not in (1, 2):
        raise ValidationError(f"state must be 1 or 2, got {s}")
    rows = np.flatnonzero(z[:-1] == s)
    responses = (z[rows + 1] == s).astype(float)
    return rows, responses


# ---------------------------------------------------------------------------
# parameters


@dataclass
class StateRegression:
    """Mean-equation coefficients (intercept first) and noise variance."""

    b: np.ndarray
    sigma2: float

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        self.sigma2 = float(self.sigma2)
        if self.b.ndim != 1 or self.b.size < 1:
            raise ValidationError("b must be a non-empty vector")
        if not np.isfinite(self.b).all():
            raise ValidationError("b contains non-finite entries")
        if not self.sigma2 > 0.0:
            raise ValidationError(f"sigma2 must be positive, got {self.sigma2}")


@dataclass
class StateLogistic:
    """Transition-equation logistic coefficients (intercept first)."""

    beta: np.ndarray

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        if self.beta.ndim != 1 or self.beta.size < 1:
            raise ValidationError("beta must be a non-empty vector")
        if not np.isfinite(self.beta).all():
            raise ValidationError("beta contains non-finite entries")


@dataclass
class StateParams:
    reg: StateRegression
    logit: StateLogistic


@dataclass
class NhhmmParams:
    """Full parameter set: two state blocks plus the initial distribution."""

    state1: StateParams
    state2: StateParams
    pi1: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.5]))

    def __post_init__(self):
        self.pi1 = np.asarray(self.pi1, dtype=float)
        if self.pi1.shape != (2,):
            raise DimensionError("pi1 must have exactly two entries")
        if (self.pi1 < 0).any() or abs(self.pi1.sum() - 1.0) > 1e-12:
            raise ValidationError("pi1 must be a probability pair")

    def state(self, s: int) -> StateParams:
        if s == 1:
            return self.state1
        if s == 2:
            return self.state2
        raise ValidationError(f"state must be 1 or 2, got {s}")

    def swapped(self) -> "NhhmmParams":
        """Parameters with the state labels exchanged."""
        return NhhmmParams(state1=self.state2, state2=self.state1, pi1=self.pi1[::-1].copy())


def _check_mask_coeff(mask: int, vec: np.ndarray, name: str) -> None:
    want = 1 + mask_popcount(mask)
    if vec.size != want:
        raise DimensionError(
            f"{name} has length {vec.size} but mask {mask:#x} requires {want}"
        )


@dataclass(frozen=True)
class ModelIndicator:
    """Inclusion bitmasks for the mean and transition equations.

    Bit ``j`` selects pool column ``j``.  Intercepts are implicit: they are
    always included and never represented here.
    """

    mean_mask: int
    trans_mask: int

    def __post_init__(self):
        if self.mean_mask < 0 or self.trans_mask < 0:
            raise ValidationError("masks must be non-negative")

    def validate(self, params: NhhmmParams, n_pool: int) -> None:
        for mask in (self.mean_mask, self.trans_mask):
            if mask >= (1 << n_pool):
                raise DimensionError(
                    f"mask {mask:#x} exceeds pool width {n_pool}"
                )
        for s in (1, 2):
            _check_mask_coeff(self.mean_mask, params.state(s).reg.b, f"b (state {s})")
            _check_mask_coeff(self.trans_mask, params.state(s).logit.beta, f"beta (state {s})")


# ---------------------------------------------------------------------------
# draws and chain storage


@dataclass
class McmcDraw:
    """One retained posterior sample."""

    params: NhhmmParams
    indicator: ModelIndicator
    z_path: np.ndarray
    aug_omega: tuple[np.ndarray, np.ndarray]
    forecast: np.ndarray | None = None

    def __post_init__(self):
        self.z_path = np.asarray(self.z_path, dtype=np.int8)
        if not np.isin(self.z_path, (1, 2)).all():
            raise ValidationError("z_path entries must be 1 or 2")
        w1, w2 = self.aug_omega
        self.aug_omega = (np.asarray(w1, dtype=float), np.asarray(w2, dtype=float))
        for s, w in zip((1, 2), self.aug_omega):
            if w.size and not (w > 0).all():
                raise ValidationError(f"aug_omega for state {s} must be positive")
            n_s = int(np.count_nonzero(self.z_path[:-1] == s))
            if w.size != n_s:
                raise DimensionError(
                    f"aug_omega for state {s} has length {w.size}, expected {n_s}"
                )
        if self.forecast is not None:
            self.forecast = np.asarray(self.forecast, dtype=float)

    # -- serialization ------------------------------------------------------

    def to_record(self) -> dict:
        rec = {
            "kind": "nhhmm",
            "mean_mask": self.indicator.mean_mask,
            "trans_mask": self.indicator.trans_mask,
            "pi1": self.params.pi1.tolist(),
            "z": self.z_path.tolist(),
            "omega1": self.aug_omega[0].tolist(),
            "omega2": self.aug_omega[1].tolist(),
        }
        for s in (1, 2):
            st = self.params.state(s)
            rec[f"b{s}"] = st.reg.b.tolist()
            rec[f"sigma2_{s}"] = st.reg.sigma2
            rec[f"beta{s}"] = st.logit.beta.tolist()
        if self.forecast is not None:
            rec["forecast"] = self.forecast.tolist()
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "McmcDraw":
        params = NhhmmParams(
            state1=StateParams(
                StateRegression(np.array(rec["b1"]), rec["sigma2_1"]),
                StateLogistic(np.array(rec["beta1"])),
            ),
            state2=StateParams(
                StateRegression(np.array(rec["b2"]), rec["sigma2_2"]),
                StateLogistic(np.array(rec["beta2"])),
            ),
            pi1=np.array(rec["pi1"]),
        )
        return cls(
            params=params,
            indicator=ModelIndicator(rec["mean_mask"], rec["trans_mask"]),
            z_path=np.array(rec["z"], dtype=np.int8),
            aug_omega=(np.array(rec["omega1"]), np.array(rec["omega2"])),
            forecast=np.array(rec["forecast"]) if "forecast" in rec else None,
        )

    def swapped(self) -> "McmcDraw":
        z = self.z_path.copy()
        z[:] = 3 - z
        return McmcDraw(
            params=self.params.swapped(),
            indicator=self.indicator,
            z_path=z,
            aug_omega=(self.aug_omega[1].copy(), self.aug_omega[0].copy()),
            forecast=None if self.forecast is None else self.forecast.copy(),
        )


@dataclass
class ChainStore:
    """Append-only archive of retained draws (burn-in already excluded)."""

    burn_in: int
    thin: int
    draws: list = field(default_factory=list)

    def append(self, draw) -> None:
        self.draws.append(draw)

    def __len__(self) -> int:
        return len(self.draws)

    def __iter__(self) -> Iterator:
        return iter(self.draws)

    def __getitem__(self, i):
        return self.draws[i]

    def to_ndjson(self) -> str:
        header = json.dumps({"kind": "chain", "burn_in": self.burn_in, "thin": self.thin})
        lines = [header]
        lines.extend(json.dumps(d.to_record()) for d in self.draws)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ndjson(cls, text: str, draw_cls=McmcDraw) -> "ChainStore":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValidationError("empty chain file")
        header = json.loads(lines[0])
        if header.get("kind") != "chain":
            raise ValidationError("chain file missing header record")
        store = cls(burn_in=header["burn_in"], thin=header["thin"])
        for ln in lines[1:]:
            store.append(draw_cls.from_record(json.loads(ln)))
        return store

    def relabeled_by_intercept(self) -> "ChainStore":
        """Globally swap state labels so state 1 has the smaller posterior
        mean intercept in the mean equation.  Reporting aid only; sampling
        never imposes an identifiability constraint.
        """
        if not self.draws:
            return self
        b0_1 = float(np.mean([d.params.state1.reg.b[0] for d in self.draws]))
        b0_2 = float(np.mean([d.params.state2.reg.b[0] for d in self.draws]))
        if b0_1 <= b0_2:
            return self
        out = ChainStore(burn_in=self.burn_in, thin=self.thin)
        for d in self.draws:
            out.append(d.swapped())
        return out


# ---------------------------------------------------------------------------
# priors


@dataclass
class PriorConfig:
    """Hyperparameters of the conjugate prior family.

    The coefficient priors are zero-mean isotropic and restricted to the
    active coordinates of the current masks: ``B_s | sigma2 ~ N(0,
    sigma2 * c_mean * I)`` and ``beta_s ~ N(0, c_trans * I)``.  This keeps the
    prior automatically consistent across reversible-jump dimension changes.
    """

    ig_shape: float = 0.1
    ig_scale: float = 0.1
    c_mean: float = 100.0
    c_trans: float = 80.0

    def __post_init__(self):
        for name in ("ig_shape", "ig_scale", "c_mean", "c_trans"):
            v = float(getattr(self, name))
            setattr(self, name, v)
            if not v > 0:
                raise ValidationError(f"{name} must be positive, got {v}")

    def mean_prior(self, mask: int) -> tuple[np.ndarray, np.ndarray]:
        """(L0, V0) for the mean-equation coefficients under ``mask``."""
        d = 1 + mask_popcount(mask)
        return np.zeros(d), self.c_mean * np.eye(d)

    def trans_prior(self, mask: int) -> tuple[np.ndarray, np.ndarray]:
        """(m0, V0) for the transition-equation coefficients under ``mask``."""
        d = 1 + mask_popcount(mask)
        return np.zeros(d), self.c_trans * np.eye(d)

    def to_dict(self) -> dict:
        return {
            "ig_shape": self.ig_shape,
            "ig_scale": self.ig_scale,
            "c_mean": self.c_mean,
            "c_trans": self.c_trans,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PriorConfig":
        known = {k: d[k] for k in ("ig_shape", "ig_scale", "c_mean", "c_trans") if k in d}
        return cls(**known)
