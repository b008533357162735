"""Monte Carlo replications, metric aggregation and table rendering."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from completecase.datagen import Mechanism, SimSetting, generate
from completecase.errors import ArgumentError, SingularityError, SummaryError
from completecase.estimator import SolverOptions, fit_complete_case, fit_oracle

METHODS = ("CC", "Oracle")
_FITTERS = {"CC": fit_complete_case, "Oracle": fit_oracle}


def percent_bias(estimates, truth) -> np.ndarray:
    """Mean of ``(estimate - truth) / truth`` times 100, per coordinate."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    truth = np.asarray(truth, dtype=float)
    if est.size == 0:
        raise ArgumentError("percent_bias needs at least one estimate")
    if np.any(truth == 0):
        raise ZeroDivisionError("true coefficient is 0; percent bias undefined, report absolute bias instead")
    return np.mean((est - truth) / truth, axis=0) * 100.0


def coverage(cis, truth) -> np.ndarray:
    """Fraction of intervals (closed) containing the true coordinate.

    ``cis`` has shape (reps, k, 2).
    """
    cis = np.asarray(cis, dtype=float)
    if cis.ndim == 2:
        cis = cis[None]
    if cis.shape[0] == 0:
        raise ArgumentError("coverage needs at least one interval set")
    truth = np.asarray(truth, dtype=float)
    hit = (cis[..., 0] <= truth) & (truth <= cis[..., 1])
    return hit.mean(axis=0)


@dataclass
class MethodSummary:
    percent_bias: np.ndarray
    mean_bias: np.ndarray
    mean_se: np.ndarray
    coverage: np.ndarray
    empirical_sd: np.ndarray
    n_ok: int
    n_failed: int


@dataclass
class SimSummary:
    setting: SimSetting
    reps: int
    methods: dict[str, MethodSummary] = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(m.n_failed for m in self.methods.values())

    @property
    def param_names(self) -> list[str]:
        return self.setting.model.param_names


@dataclass
class _RepRecord:
    ok: bool
    beta: np.ndarray | None = None
    se: np.ndarray | None = None
    ci: np.ndarray | None = None


def _one_replication(setting: SimSetting, j: int, methods, opts: SolverOptions):
    sample = generate(setting, j)
    out = {}
    for method in methods:
        try:
            fit = _FITTERS[method](sample, setting.model, opts)
        except (SingularityError, ArgumentError):
            out[method] = _RepRecord(False)
            continue
        ok = fit.converged and bool(np.all(np.isfinite(fit.se)))
        out[method] = _RepRecord(ok, fit.beta_hat, fit.se, fit.ci)
    return out


def _chunk(setting, indices, methods, opts):
    return [_one_replication(setting, j, methods, opts) for j in indices]


def _aggregate(records: list[_RepRecord], truth: np.ndarray) -> MethodSummary:
    good = [r for r in records if r.ok]
    k = truth.shape[0]
    if not good:
        nan = np.full(k, np.nan)
        return MethodSummary(nan, nan, nan, nan, nan, 0, len(records))
    est = np.array([r.beta for r in good])
    se = np.array([r.se for r in good])
    cis = np.array([r.ci for r in good])
    nz = truth != 0
    pb = np.full(k, np.nan)
    if nz.any():
        pb[nz] = percent_bias(est[:, nz], truth[nz])
    sd = est.std(axis=0, ddof=1) if len(good) > 1 else np.full(k, np.nan)
    return MethodSummary(
        percent_bias=pb,
        mean_bias=(est - truth).mean(axis=0),
        mean_se=se.mean(axis=0),
        coverage=coverage(cis, truth),
        empirical_sd=sd,
        n_ok=len(good),
        n_failed=len(records) - len(good),
    )


def run_replications(
    setting: SimSetting,
    reps: int = 1000,
    methods=METHODS,
    workers: int = 1,
    opts: SolverOptions | None = None,
    indices=None,
) -> SimSummary:
    """Generate ``reps`` samples, fit each method, aggregate in index order.

    Replication ``j`` always uses streams keyed by ``(setting.seed, j)``, so the
    result does not depend on worker count or scheduling. ``indices`` may
    supply an explicit set of replication indices in any order.
    """
    if reps < 1:
        raise ArgumentError(f"reps must be >= 1, got {reps}")
    methods = tuple(methods)
    for m in methods:
        if m not in _FITTERS:
            raise ArgumentError(f"unknown method {m!r}; expected CC or Oracle")
    opts = opts or SolverOptions()
    idx = sorted(range(reps) if indices is None else indices)
    if workers > 1 and len(idx) > 1:
        chunks = [idx[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, [setting] * len(chunks), chunks, [methods] * len(chunks), [opts] * len(chunks)))
        by_index = {}
        for chunk, part in zip(chunks, parts):
            by_index.update(zip(chunk, part))
        results = [by_index[j] for j in idx]
    else:
        results = _chunk(setting, idx, methods, opts)

    truth = np.asarray(setting.beta_true)
    summary = SimSummary(setting=setting, reps=len(idx))
    for m in methods:
        ms = _aggregate([res[m] for res in results], truth)
        if ms.n_ok == 0:
            raise SummaryError(f"all {len(idx)} replications failed for method {m}", method=m)
        summary.methods[m] = ms
    return summary


def _sort_key(s: SimSummary):
    st = s.setting
    return (st.model.key, st.n, st.mechanism.index, st.r)


def _cell(v: float) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return "NA"
    text = f"{v:.2f}"
    return "0.00" if text == "-0.00" else text


def _columns(summaries):
    names = []
    for s in summaries:
        for p in s.param_names:
            if p not in names:
                names.append(p)
    return sorted(names, key=lambda p: int(p[1:])) or ["b0", "b1", "b2"]


def _metric_cells(s: SimSummary, method: str, names: list[str]) -> list[str]:
    ms = s.methods[method]
    pos = {p: k for k, p in enumerate(s.param_names)}
    cells = []
    for arr in (ms.percent_bias, ms.mean_se, ms.coverage):
        cells += [_cell(float(arr[pos[p]])) if p in pos else "NA" for p in names]
    return cells


def emit_table(summaries, fmt: str = "csv") -> str:
    """Render summaries as one row per (mechanism, rate, method).

    Rows are ordered by model, n, mechanism (table order), rate, then CC before
    Oracle; numbers are rounded to two decimals.
    """
    summaries = sorted(summaries, key=_sort_key)
    names = _columns(summaries)
    metric_cols = [f"{metric}_{p}" for metric in ("bias", "se", "coverage") for p in names]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "n", "mechanism", "rate", "method", "reps", "n_failed", *metric_cols])
        for s in summaries:
            st = s.setting
            for method in (m for m in METHODS if m in s.methods):
                ms = s.methods[method]
                writer.writerow(
                    [st.model.key, st.n, st.mechanism.value, f"{st.r:g}", method, s.reps, ms.n_failed,
                     *_metric_cells(s, method, names)]
                )
        return buf.getvalue()
    if fmt in ("markdown", "md"):
        header = ["Censoring Rate", "Method"]
        header += [f"Bias% {p}" for p in names] + [f"SE {p}" for p in names] + [f"Cov {p}" for p in names]
        lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
        group = None
        for s in summaries:
            st = s.setting
            g = (st.model.key, st.n, st.mechanism)
            if g != group:
                group = g
                title = f"**{st.mechanism.title}** ({st.model.key}, n={st.n})"
                lines.append("| " + " | ".join([title] + [""] * (len(header) - 1)) + " |")
            rate = f"{st.r * 100:g}%"
            for method in (m for m in METHODS if m in s.methods):
                lines.append("| " + " | ".join([rate, method, *_metric_cells(s, method, names)]) + " |")
        return "\n".join(lines) + "\n"
    raise ArgumentError(f"unknown table format {fmt!r}; expected csv or markdown")


def run_grid(
    model,
    mechanisms,
    ns,
    rates,
    reps: int,
    seed: int,
    workers: int = 1,
    methods=METHODS,
) -> list[SimSummary]:
    """Run every (mechanism, n, rate) combination under one master seed."""
    out = []
    for n in ns:
        for mech in mechanisms:
            for r in rates:
                setting = SimSetting(mechanism=Mechanism.parse(mech) if isinstance(mech, str) else mech,
                                     n=n, r=r, model=model, seed=seed)
                out.append(run_replications(setting, reps, methods, workers))
    return out
