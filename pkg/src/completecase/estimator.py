"""Complete-case and oracle estimating-equation fits with sandwich inference.

The estimating function is ``Phi = dm/dbeta * (y - m)``; its root is the
least-squares fit over the rows that enter, so the solver is Gauss-Newton on
the residual sum of squares with step halving.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from completecase.dataset import Dataset
from completecase.errors import ArgumentError, SingularityError, UnderIdentifiedError
from completecase.model import Family, MeanModelSpec, design_matrix, evaluate

MAX_HALVINGS = 20
# reciprocal condition number below which a normal matrix counts as singular
_RCOND = 1e-13
_RESOLUTION = 1e-13


class Init(enum.Enum):
    CLOSED_FORM_LINEAR = "closed_form_linear"
    ZEROS = "zeros"
    USER = "user"


@dataclass(frozen=True)
class SolverOptions:
    tol_step: float = 1e-10
    tol_residual: float = 1e-10
    max_iter: int = 100
    init: Init = Init.CLOSED_FORM_LINEAR
    beta0: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (self.tol_step > 0 and self.tol_residual > 0):
            raise ArgumentError("solver tolerances must be > 0")
        if self.max_iter < 1:
            raise ArgumentError("max_iter must be >= 1")
        if self.init is Init.USER and self.beta0 is None:
            raise ArgumentError("init=USER requires beta0")


@dataclass
class FitResult:
    beta_hat: np.ndarray
    cov: np.ndarray
    se: np.ndarray
    ci: np.ndarray
    n_total: int
    n_used: int
    iterations: int
    converged: bool
    param_names: list[str] = field(default_factory=list)
    level: float = 0.95
    objective_trace: list[float] = field(default_factory=list, repr=False)

    def rows(self):
        """(param, estimate, se, ci_lower, ci_upper) tuples."""
        return [
            (name, float(b), float(s), float(lo), float(hi))
            for name, b, s, (lo, hi) in zip(self.param_names, self.beta_hat, self.se, self.ci)
        ]

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        return {
            "n_total": self.n_total,
            "n_used": self.n_used,
            "iterations": self.iterations,
            "converged": self.converged,
            "level": self.level,
            "parameters": [
                {"param": p, "estimate": clean(b), "se": clean(s), "ci_lower": clean(lo), "ci_upper": clean(hi)}
                for p, b, s, lo, hi in self.rows()
            ],
            "cov": [[clean(float(v)) for v in row] for row in self.cov],
        }


def _check_rank(M: np.ndarray, what: str, iteration=None) -> None:
    if not np.all(np.isfinite(M)):
        raise SingularityError(f"{what} has non-finite entries", iteration)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= _RCOND * sv[0]:
        where = f" at iteration {iteration}" if iteration is not None else ""
        raise SingularityError(f"{what} is singular{where}", iteration)


def _complete_rows(data: Dataset, spec: MeanModelSpec):
    """Design matrix and outcome restricted to rows with delta = 1."""
    if data.p != spec.p:
        raise ArgumentError(f"dataset has {data.p} z columns, model expects {spec.p}")
    obs = data.delta == 1
    n_used = int(obs.sum())
    if n_used < spec.n_params:
        raise UnderIdentifiedError(
            f"{n_used} complete case(s) for {spec.n_params} parameters; model is under-identified"
        )
    w = data.w[obs]
    if not np.all(np.isfinite(w)):
        raise ArgumentError("w must be finite on rows with delta = 1")
    return design_matrix(spec, w, data.z[obs]), data.y[obs]


def _solve_normal(U: np.ndarray, y: np.ndarray) -> np.ndarray:
    G = U.T @ U
    _check_rank(G, "complete-case design matrix")
    return np.linalg.solve(G, U.T @ y)


def closed_form_linear(data: Dataset, spec: MeanModelSpec | None = None) -> np.ndarray:
    """Least-squares solution over complete cases, ``(sum d U'U)^-1 sum d U'y``."""
    if spec is None:
        spec = MeanModelSpec(Family.LINEAR, True, data.p)
    if spec.family is not Family.LINEAR:
        raise ArgumentError("closed_form_linear requires the linear family")
    U, y = _complete_rows(data, spec)
    return _solve_normal(U, y)


def _initial_beta(U, y, spec: MeanModelSpec, opts: SolverOptions) -> np.ndarray:
    k = spec.n_params
    if opts.init is Init.USER:
        beta = np.asarray(opts.beta0, dtype=float)
        if beta.shape != (k,):
            raise ArgumentError(f"beta0 must have length {k}")
        return beta.copy()
    if opts.init is Init.ZEROS:
        return np.zeros(k)
    if spec.family is Family.LINEAR:
        return _solve_normal(U, y)
    t = np.clip(y, 0.01, 0.99)
    target = np.log(t / (1.0 - t)) / spec.scale
    try:
        beta = _solve_normal(U, target)
    except SingularityError:
        return np.zeros(k)
    return beta if np.all(np.isfinite(beta)) else np.zeros(k)


def _gauss_newton(U, y, spec: MeanModelSpec, opts: SolverOptions, n_total: int):
    beta = _initial_beta(U, y, spec, opts)
    m, J = evaluate(spec, beta, U)
    r = y - m
    rss = float(r @ r)
    trace = [rss]
    converged = False
    it = 0
    while True:
        ee = J.T @ r / n_total
        if np.max(np.abs(ee)) <= opts.tol_residual:
            converged = True
            break
        if it >= opts.max_iter:
            break
        it += 1
        G = J.T @ J
        _check_rank(G, "Gauss-Newton normal matrix", iteration=it)
        step = np.linalg.solve(G, J.T @ r)
        # predicted decrease below the objective's rounding noise: the line
        # search cannot resolve it, so the local model is trusted
        unresolvable = float(step @ G @ step) <= _RESOLUTION * max(rss, 1.0)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + t * step
            m_c, J_c = evaluate(spec, cand, U)
            r_c = y - m_c
            # change in RSS without cancelling two nearly equal sums
            change = float((m - m_c) @ (r_c + r))
            if change <= 0 or unresolvable:
                rss_c = float(r_c @ r_c)
                break
            t *= 0.5
        else:
            # no decrease along the direction: at the floor of floating point
            converged = bool(np.max(np.abs(step)) <= opts.tol_step)
            break
        taken = t * step
        beta, m, J, r, rss = cand, m_c, J_c, r_c, rss_c
        trace.append(rss)
        if np.max(np.abs(taken)) <= opts.tol_step:
            converged = True
            break
    return beta, it, converged, trace


def sandwich_covariance(data: Dataset, spec: MeanModelSpec, beta_hat):
    """Sandwich covariance ``A^-1 B A^-T`` and standard errors ``sqrt(diag/n)``.

    A and B average over all n rows; censored rows contribute zero. The
    derivative of Phi includes the residual-weighted Hessian of m. When the
    complete cases exactly identify the parameters the residuals vanish and the
    standard errors are reported as NaN.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    if beta_hat.shape != (spec.n_params,) or not np.all(np.isfinite(beta_hat)):
        raise ArgumentError("beta_hat must be finite with one entry per parameter")
    U, y = _complete_rows(data, spec)
    n = data.n
    m, J, h = evaluate(spec, beta_hat, U, hessian=True)
    r = y - m
    A = (U.T * (h * r)) @ U / n - J.T @ J / n
    Phi = J * r[:, None]
    B = Phi.T @ Phi / n
    _check_rank(A, "sandwich bread matrix A")
    A_inv = np.linalg.inv(A)
    cov = A_inv @ B @ A_inv.T
    cov = (cov + cov.T) / 2.0
    if U.shape[0] <= spec.n_params:
        se = np.full(spec.n_params, np.nan)
    else:
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None) / n)
    return cov, se


def _z_quantile(level: float) -> float:
    if not 0 <= level < 1:
        raise ArgumentError(f"confidence level must lie in (0, 1), got {level}")
    return NormalDist().inv_cdf((1.0 + level) / 2.0)


def wald_ci(fit: FitResult, level: float = 0.95) -> np.ndarray:
    """Per-parameter ``estimate -/+ q * se`` rows, shape (k, 2)."""
    q = _z_quantile(level)
    beta = np.asarray(fit.beta_hat, dtype=float)
    se = np.asarray(fit.se, dtype=float)
    return np.column_stack([beta - q * se, beta + q * se])


def _fit(data: Dataset, spec: MeanModelSpec, opts: SolverOptions, level: float) -> FitResult:
    U, y = _complete_rows(data, spec)
    beta, iterations, converged, trace = _gauss_newton(U, y, spec, opts, data.n)
    cov, se = sandwich_covariance(data, spec, beta)
    res = FitResult(
        beta_hat=beta,
        cov=cov,
        se=se,
        ci=np.empty((spec.n_params, 2)),
        n_total=data.n,
        n_used=U.shape[0],
        iterations=iterations,
        converged=converged,
        param_names=spec.param_names,
        level=level,
        objective_trace=trace,
    )
    res.ci = wald_ci(res, level)
    return res


def fit_complete_case(
    data: Dataset, spec: MeanModelSpec, opts: SolverOptions | None = None, level: float = 0.95
) -> FitResult:
    """Root of the estimating equation restricted to rows with delta = 1."""
    return _fit(data, spec, opts or SolverOptions(), level)


def fit_oracle(
    data: Dataset, spec: MeanModelSpec, opts: SolverOptions | None = None, level: float = 0.95
) -> FitResult:
    """Same fit using the true covariate on every row (simulation only)."""
    if data.x_true is None:
        raise ArgumentError("oracle fit needs x_true for every row")
    full = Dataset(y=data.y, w=data.x_true, delta=np.ones(data.n, dtype=np.int8), z=data.z)
    return _fit(full, spec, opts or SolverOptions(), level)
