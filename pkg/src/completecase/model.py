"""Mean functions m(x, z; beta) and their derivatives with respect to beta.

Parameter layout is always ``[b0 (intercept, optional), b1 (coefficient of x),
b2.. (coefficients of z)]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from completecase.errors import ArgumentError


class Family(enum.Enum):
    LINEAR = "linear"
    SCALED_LOGISTIC = "scaled_logistic"


@dataclass(frozen=True)
class MeanModelSpec:
    """Which mean function to fit.

    ``scale`` multiplies the affine predictor inside the logistic link and is a
    fixed constant of the family, never estimated.
    """

    family: Family = Family.LINEAR
    include_intercept: bool = True
    p: int = 1
    scale: float = 1.0

    def __post_init__(self):
        if self.p < 0:
            raise ArgumentError(f"p must be >= 0, got {self.p}")
        if self.family is Family.SCALED_LOGISTIC and not self.scale > 0:
            raise ArgumentError(f"logistic scale must be > 0, got {self.scale}")

    @property
    def n_params(self) -> int:
        return self.p + 1 + (1 if self.include_intercept else 0)

    @property
    def param_names(self) -> list[str]:
        first = 0 if self.include_intercept else 1
        return [f"b{k}" for k in range(first, self.p + 2)]

    @property
    def key(self) -> str:
        if self.family is Family.SCALED_LOGISTIC:
            if self.scale == 5.0 and self.include_intercept:
                return "logistic5"
            return f"logistic{self.scale:g}" + ("" if self.include_intercept else "_no_intercept")
        return "linear" if self.include_intercept else "linear_no_intercept"


MODEL_KEYS = ("linear", "logistic5", "linear_no_intercept")


def model_from_key(key: str, p: int = 1) -> MeanModelSpec:
    """Resolve a config string to a model spec."""
    if key == "linear":
        return MeanModelSpec(Family.LINEAR, True, p)
    if key == "linear_no_intercept":
        return MeanModelSpec(Family.LINEAR, False, p)
    if key == "logistic5":
        return MeanModelSpec(Family.SCALED_LOGISTIC, True, p, scale=5.0)
    raise ArgumentError(f"unknown model {key!r}; expected one of {', '.join(MODEL_KEYS)}")


def _check_beta(spec: MeanModelSpec, beta) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.ndim != 1 or beta.shape[0] != spec.n_params:
        raise ArgumentError(f"beta must have length {spec.n_params}, got shape {beta.shape}")
    if not np.all(np.isfinite(beta)):
        raise ArgumentError("beta has non-finite entries")
    return beta


def design_matrix(spec: MeanModelSpec, x, z) -> np.ndarray:
    """Stack regressor rows ``[1, x, z]`` (leading 1 dropped without intercept)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z.reshape(-1, spec.p) if spec.p else z.reshape(x.shape[0], 0)
    if z.shape != (x.shape[0], spec.p):
        raise ArgumentError(f"z must have shape ({x.shape[0]}, {spec.p}), got {z.shape}")
    cols = [x[:, None], z]
    if spec.include_intercept:
        cols.insert(0, np.ones((x.shape[0], 1)))
    return np.hstack(cols)


def _sigmoid(t):
    # split by sign so exp never overflows
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def evaluate(spec: MeanModelSpec, beta, U: np.ndarray, hessian: bool = False):
    """Mean, Jacobian and (optionally) per-row Hessian weight on a design matrix.

    The Hessian of m with respect to beta is ``h_i * U_i U_i^T``; only the scalar
    ``h_i`` is returned (zero for the linear family).
    """
    eta = U @ beta
    if spec.family is Family.LINEAR:
        m = eta
        J = U
        h = np.zeros_like(eta)
    else:
        s = spec.scale
        m = _sigmoid(s * eta)
        g = s * m * (1.0 - m)
        J = g[:, None] * U
        h = s * s * m * (1.0 - m) * (1.0 - 2.0 * m)
    if hessian:
        return m, J, h
    return m, J


def mean_value(spec: MeanModelSpec, beta, x: float, z) -> float:
    beta = _check_beta(spec, beta)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (spec.p,):
        raise ArgumentError(f"z must have length {spec.p}, got {z.shape[0]}")
    U = design_matrix(spec, [x], z[None, :])
    m, _ = evaluate(spec, beta, U)
    return float(m[0])


def mean_gradient(spec: MeanModelSpec, beta, x: float, z) -> np.ndarray:
    """Gradient of the mean with respect to beta at a single point."""
    beta = _check_beta(spec, beta)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (spec.p,):
        raise ArgumentError(f"z must have length {spec.p}, got {z.shape[0]}")
    U = design_matrix(spec, [x], z[None, :])
    _, J = evaluate(spec, beta, U)
    return J[0].copy()
