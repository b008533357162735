"""Synthetic samples under six censoring-mechanism regimes.

Every sample draws ``X ~ Uniform(0, 3)``, ``Z ~ Normal(0, 1)`` and a standard
normal error shape from a base stream keyed by ``(seed, replication)`` only.
Mechanism-specific draws (Bernoulli indicators, censoring values) are uniforms
from a second stream keyed additionally by mechanism, then transformed for the
requested rate. Regimes that share the error law therefore share X, Z and
epsilon exactly, and so do their oracle fits; for CondXZFails the error law is
also the same at every rate because membership of the middle half of the
censoring range does not depend on its width.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from completecase.dataset import Dataset
from completecase.errors import ArgumentError
from completecase.model import Family, MeanModelSpec, design_matrix, evaluate, model_from_key

X_UPPER = 3.0


class Mechanism(enum.Enum):
    EXOGENOUS_FAILS = "ExogenousFails"
    STRICT_EXOGENOUS_FAILS = "StrictExogenousFails"
    COND_XZ_FAILS = "CondXZFails"
    COND_Z_FAILS = "CondZFails"
    INDEPENDENCE_FAILS = "IndependenceFails"
    INDEPENDENCE_HOLDS = "IndependenceHolds"

    @property
    def index(self) -> int:
        return list(Mechanism).index(self)

    @property
    def letter(self) -> str:
        return "ABCDEF"[self.index]

    @property
    def title(self) -> str:
        return _TITLES[self]

    @property
    def has_c(self) -> bool:
        return self not in (Mechanism.EXOGENOUS_FAILS, Mechanism.STRICT_EXOGENOUS_FAILS)

    @classmethod
    def parse(cls, text: str) -> "Mechanism":
        for mech in cls:
            if text in (mech.value, mech.name, mech.letter):
                return mech
        names = ", ".join(m.value for m in cls)
        raise ArgumentError(f"unknown mechanism {text!r}; expected one of {names}")


_TITLES = {
    Mechanism.EXOGENOUS_FAILS: "Exogenous Censoring does not hold",
    Mechanism.STRICT_EXOGENOUS_FAILS: "Strict Exogenous Censoring does not hold",
    Mechanism.COND_XZ_FAILS: "Conditional Independence given (X,Z) does not hold",
    Mechanism.COND_Z_FAILS: "Conditional Independence given Z does not hold",
    Mechanism.INDEPENDENCE_FAILS: "Independence does not hold",
    Mechanism.INDEPENDENCE_HOLDS: "Independence holds",
}

DEFAULT_SIGMA2 = {Family.LINEAR: 2.0, Family.SCALED_LOGISTIC: 0.08}


def default_beta(model: MeanModelSpec) -> np.ndarray:
    """True coefficients used in the simulation study for each family (p = 1)."""
    if model.p != 1:
        raise ArgumentError("default coefficients are defined for p = 1 only")
    if model.family is Family.LINEAR:
        full = [0.5, 1.0, -2.0]
    else:
        full = [0.005, 0.01, -0.02]
    return np.array(full if model.include_intercept else full[1:])


@dataclass(frozen=True)
class SimSetting:
    mechanism: Mechanism
    n: int
    r: float
    model: MeanModelSpec = field(default_factory=lambda: model_from_key("linear"))
    beta_true: tuple[float, ...] | None = None
    sigma2: float | None = None
    seed: int = 0
    empirical_iqr: bool = False

    def __post_init__(self):
        if not isinstance(self.mechanism, Mechanism):
            object.__setattr__(self, "mechanism", Mechanism.parse(self.mechanism))
        if self.n < 1:
            raise ArgumentError(f"n must be >= 1, got {self.n}")
        if not 0 < self.r < 1:
            raise ArgumentError(f"censoring rate must lie in (0, 1), got {self.r}")
        beta = default_beta(self.model) if self.beta_true is None else np.asarray(self.beta_true, dtype=float)
        if beta.shape != (self.model.n_params,):
            raise ArgumentError(f"beta_true must have length {self.model.n_params}")
        object.__setattr__(self, "beta_true", tuple(float(b) for b in beta))
        sigma2 = DEFAULT_SIGMA2[self.model.family] if self.sigma2 is None else float(self.sigma2)
        if not sigma2 > 0:
            raise ArgumentError("sigma2 must be > 0")
        object.__setattr__(self, "sigma2", sigma2)
        if self.mechanism is Mechanism.INDEPENDENCE_FAILS and self.model.p < 1:
            raise ArgumentError("IndependenceFails splits on z and needs p >= 1")
        if not 0 <= self.seed < 2**64:
            raise ArgumentError("seed must be a 64-bit unsigned integer")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def base_stream(seed: int, replication: int) -> np.random.Generator:
    return _rng(seed, replication, 0)


def mechanism_stream(setting: SimSetting, replication: int) -> np.random.Generator:
    return _rng(setting.seed, replication, 1, setting.mechanism.index)


def uniform_c_bound(r: float) -> float:
    """Upper end b of the Uniform(0, b) censoring law that yields rate r."""
    return 6.0 - 6.0 * r if r >= 0.5 else 3.0 / (2.0 * r)


def _c_given_z(z1: np.ndarray, r: float, u: np.ndarray) -> np.ndarray:
    high = z1 > np.median(z1)
    if r >= 0.5:
        lo = np.where(high, 0.0, (3.0 - 6.0 * r) / (2.0 - 2.0 * r))
        hi = np.where(high, 6.0 - 6.0 * r, X_UPPER)
    else:
        lo = np.where(high, 0.0, 3.0 - 6.0 * r)
        hi = np.where(high, 3.0 / (2.0 * r), X_UPPER)
    return lo + (hi - lo) * u


def generate(setting: SimSetting, replication: int = 0) -> Dataset:
    """Draw one sample; identical inputs give a bit-identical sample."""
    n, r, sigma = setting.n, setting.r, setting.sigma
    mech = setting.mechanism
    base = base_stream(setting.seed, replication)
    x = base.uniform(0.0, X_UPPER, n)
    z = base.standard_normal((n, setting.model.p))
    xi = base.standard_normal(n)
    aux = mechanism_stream(setting, replication)

    c = None
    if mech is Mechanism.EXOGENOUS_FAILS:
        delta = aux.uniform(size=n) < 1.0 - r
        shift = sigma / 8.0
        mu = np.where(delta, -shift * r / (1.0 - r), shift)
        eps = mu + sigma * xi
    elif mech is Mechanism.STRICT_EXOGENOUS_FAILS:
        eps = sigma * xi
        a = np.abs(eps)
        k = math.ceil(round(r * n, 9))
        if k >= n:
            delta = np.zeros(n, dtype=bool)
        else:
            delta = a >= np.sort(a)[k]
    else:
        if mech in (Mechanism.COND_XZ_FAILS, Mechanism.INDEPENDENCE_HOLDS):
            b = uniform_c_bound(r)
            c = b * aux.uniform(size=n)
        elif mech is Mechanism.COND_Z_FAILS:
            c = aux.uniform(size=n) * (x / r)
        else:
            c = _c_given_z(z[:, 0], r, aux.uniform(size=n))
        if mech is Mechanism.COND_XZ_FAILS:
            if setting.empirical_iqr:
                q1, q3 = np.quantile(c, [0.25, 0.75])
            else:
                q1, q3 = b / 4.0, 3.0 * b / 4.0
            inside = (c >= q1) & (c <= q3)
            eps = np.where(inside, math.sqrt(0.5), math.sqrt(1.5)) * sigma * xi
        else:
            eps = sigma * xi
        delta = x <= c

    U = design_matrix(setting.model, x, z)
    m, _ = evaluate(setting.model, np.asarray(setting.beta_true), U)
    y = m + eps
    if c is None:
        w = np.where(delta, x, np.nan)
    else:
        w = np.minimum(x, c)
    return Dataset(y=y, w=w, delta=delta, z=z, x_true=x, c=c, eps=eps)


@dataclass(frozen=True)
class Diagnostics:
    """Empirical probe of a sample. ``None`` marks a cell with no rows."""

    censoring_rate: float
    mean_eps_censored: float | None
    mean_eps_observed: float | None
    sd_eps_censored: float | None
    sd_eps_observed: float | None
    corr_eps_c: float | None
    n_censored: int
    n_observed: int


def _cell_stats(e: np.ndarray):
    if e.size == 0:
        return None, None
    sd = float(np.std(e, ddof=1)) if e.size > 1 else None
    return float(np.mean(e)), sd


def mechanism_diagnostics(sample: Dataset) -> Diagnostics:
    if sample.eps is None:
        raise ArgumentError("diagnostics need the eps column")
    obs = sample.delta == 1
    mean0, sd0 = _cell_stats(sample.eps[~obs])
    mean1, sd1 = _cell_stats(sample.eps[obs])
    corr = None
    if sample.c is not None and sample.n > 1 and np.std(sample.c) > 0 and np.std(sample.eps) > 0:
        corr = float(np.corrcoef(sample.eps, sample.c)[0, 1])
    return Diagnostics(
        censoring_rate=float(1.0 - obs.mean()),
        mean_eps_censored=mean0,
        mean_eps_observed=mean1,
        sd_eps_censored=sd0,
        sd_eps_observed=sd1,
        corr_eps_c=corr,
        n_censored=int((~obs).sum()),
        n_observed=int(obs.sum()),
    )
