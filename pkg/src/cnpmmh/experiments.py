"""Experiment pipelines behind the command-line runner.

Every pipeline derives all of its random streams from the master seed, so a
rerun with the same configuration writes byte-identical files. Results are
staged in a hidden directory and only moved into ``out_dir`` when the whole
run succeeded.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import diagnostics, peskun
from .config import ExperimentConfig
from .estimators import IMPORTANCE_SAMPLING, BOOTSTRAP_PF, PotentialEvaluator, is_loglik
from .models import (GaussianIIDModel, IIDMeanOnly, SVFromTheta, SVLeverageModel,
                     iid_mu_prior, simulate_iid, simulate_sv, sv_prior)
from .sampler import SamplerSettings, run_pmmh

log = logging.getLogger(__name__)

SV_PARAM_NAMES = ("mu", "phi", "sigma_v", "rho")

# child indices of the master seed
DATA_STREAM, CHAIN_STREAM = 0, 1


class ExperimentError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class ReturnsSeries:
    log_returns: np.ndarray
    dates: tuple | None = None

    def __len__(self):
        return self.log_returns.size


def load_returns(path) -> ReturnsSeries:
    """Read a CSV with a ``log_return`` column and an optional ``date`` column."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        if "log_return" not in reader.fieldnames:
            raise ValueError(f"{path}: missing 'log_return' column")
        has_dates = "date" in reader.fieldnames
        values, dates = [], []
        for row in reader:
            line = reader.line_num
            try:
                v = float(row["log_return"])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{line}: cannot parse {row['log_return']!r}") from None
            if not math.isfinite(v):
                raise ValueError(f"{path}:{line}: non-finite log_return {row['log_return']!r}")
            values.append(v)
            if has_dates:
                dates.append(row["date"])
    if not values:
        raise ValueError(f"{path}: no data rows")
    return ReturnsSeries(np.array(values), tuple(dates) if has_dates else None)


def write_returns(path, y, dates=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "log_return"] if dates else ["log_return"])
        for i, v in enumerate(y):
            w.writerow([dates[i], repr(float(v))] if dates else [repr(float(v))])


def synthesize_sv_returns(theta, T: int, seed: int, init_variance: str = "as_printed",
                          leverage: str = "correlation"):
    model = SVLeverageModel(*theta, init_variance=init_variance, leverage=leverage)
    return simulate_sv(model, T, np.random.default_rng(seed))


# ---------------------------------------------------------------------------
# seeds and output helpers


def stream(seed: int, *path: int) -> np.random.SeedSequence:
    """Child seed sequence at ``path`` below the master seed."""
    return np.random.SeedSequence(seed, spawn_key=tuple(path))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _run_chain(job):
    settings, evaluator, seed_seq = job
    try:
        return run_pmmh(settings, evaluator, np.random.default_rng(seed_seq)), None
    except Exception as exc:  # reported per replicate, the run continues
        return None, f"{type(exc).__name__}: {exc}"


def _map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


@dataclass
class RunResult:
    files: list
    failures: list

    @property
    def exit_status(self) -> int:
        return 1 if self.failures else 0


# ---------------------------------------------------------------------------
# pipelines


def _peskun_scan(cfg: ExperimentConfig, out: str, echo) -> list:
    jobs = [([sp], cfg.sigma_z_grid, cfg.z_min, cfg.z_margin, cfg.L) for sp in cfg.sigma_phi_grid]
    results = _map(_scan_one, jobs, cfg.workers)
    long_rows = [r for rows, _ in results for r in rows]
    optimal = [best for _, best in results]
    write_csv(os.path.join(out, "peskun_scan.csv"),
              ["sigma_phi", "sigma_z", "p_jump", "nu"], long_rows)
    write_csv(os.path.join(out, "peskun_optimal.csv"),
              ["sigma_phi", "opt_sigma_z", "opt_p_jump"], [r[:3] for r in optimal])
    for sp, sz, pj, nu in optimal:
        echo(f"sigma_phi={sp:.3f} opt_sigma_z={sz:.3f} p_jump={pj:.3f} nu={nu:.4g}")
    return ["peskun_scan.csv", "peskun_optimal.csv"]


def _scan_one(job):
    sp, grid, z_min, z_margin, L = job
    rows, optimal = peskun.scan_optimal_sigma_z(sp, grid, z_min, z_margin, L)
    return rows, optimal[0]


def _iid_model(cfg: ExperimentConfig) -> GaussianIIDModel:
    return GaussianIIDModel(*cfg.true_theta)


def _iid_corr_one(job):
    cfg, r = job
    model = _iid_model(cfg)
    y = simulate_iid(model, cfg.T, np.random.default_rng(stream(cfg.seed, r, DATA_STREAM)))
    rng = np.random.default_rng(stream(cfg.seed, r, CHAIN_STREAM))
    shape = (cfg.T, cfg.n_particles)

    def loglik(u):
        return is_loglik(model, y, u, cfg.is_scale).log_likelihood

    table = diagnostics.loglik_correlation_scan(loglik, shape, cfg.sigma_u_grid, cfg.n_pairs, rng)
    std = diagnostics.loglik_stddev(loglik, shape, cfg.n_std_draws, rng)
    slope, intercept = diagnostics.fit_correlation_line(table)
    return table, std, slope, intercept


def _iid_corr_scan(cfg: ExperimentConfig, out: str, echo) -> list:
    results = _map(_iid_corr_one, [(cfg, r) for r in range(cfg.replicates)], cfg.workers)
    grid = np.array([float(s) for s in cfg.sigma_u_grid])
    corr = np.array([table[:, 1] for table, *_ in results])
    median_corr = np.median(corr, axis=0)
    write_csv(os.path.join(out, "corr_scan.csv"), ["sigma_u", "correlation"],
              zip(grid, median_corr))
    write_csv(os.path.join(out, "corr_scan_replicates.csv"),
              ["replicate", "sigma_u", "correlation"],
              [(r, s, c) for r in range(len(results)) for s, c in zip(grid, corr[r])])
    stds = [res[1] for res in results]
    slopes = [res[2] for res in results]
    intercepts = [res[3] for res in results]
    med_slope, med_intercept = diagnostics.fit_correlation_line(np.column_stack([grid, median_corr]))
    for r, (std, slope, intercept) in enumerate(zip(stds, slopes, intercepts)):
        echo(f"replicate {r}: loglik_std={std:.3f} slope={slope:.3f} intercept={intercept:.3f}")
    write_json(os.path.join(out, "summary.json"), {
        "loglik_std": stds,
        "slope": slopes,
        "intercept": intercepts,
        "median_loglik_std": float(np.median(stds)),
        "median_slope": float(np.median(slopes)),
        "median_intercept": float(np.median(intercepts)),
        "median_curve_slope": med_slope,
        "median_curve_intercept": med_intercept,
    })
    return ["corr_scan.csv", "corr_scan_replicates.csv", "summary.json"]


def iid_evaluator(cfg: ExperimentConfig):
    model = _iid_model(cfg)
    y = simulate_iid(model, cfg.T, np.random.default_rng(stream(cfg.seed, DATA_STREAM)))
    evaluator = PotentialEvaluator(
        IIDMeanOnly(model.sigma_v, model.sigma_e), y,
        iid_mu_prior(cfg.mu_prior_low, cfg.mu_prior_high),
        IMPORTANCE_SAMPLING, cfg.n_particles, cfg.is_scale)
    return evaluator, y


def _settings(cfg: ExperimentConfig, sigma_u: float, alpha: float) -> SamplerSettings:
    return SamplerSettings(cfg.n_iter, tuple(cfg.theta0), np.array(cfg.proposal_cov, dtype=float),
                           sigma_u, alpha, cfg.burn_in, cfg.init_retries, cfg.store_u)


def chain_seeds(cfg: ExperimentConfig):
    # shared by every cell of a grid: common random numbers across settings
    return [stream(cfg.seed, CHAIN_STREAM, r) for r in range(cfg.replicates)]


def _iid_heatmap(cfg: ExperimentConfig, out: str, echo):
    evaluator, y = iid_evaluator(cfg)
    write_returns(os.path.join(out, "data.csv"), y)
    seeds = chain_seeds(cfg)
    cells = [(float(s), float(a)) for s in cfg.sigma_u_grid for a in cfg.alpha_grid]
    # sigma_u = 0 with alpha = 0 never moves u: left empty
    valid = [c for c in cells if not (c[0] == 0.0 and c[1] == 0.0)]
    jobs = [(_settings(cfg, s, a), evaluator, seed) for s, a in valid for seed in seeds]
    results = _map(_run_chain, jobs, cfg.workers)

    failures, detail, summary = [], [], {}
    R = len(seeds)
    for ci, (s, a) in enumerate(valid):
        iacts, rates = [], []
        for r in range(R):
            trace, err = results[ci * R + r]
            if err:
                failures.append(f"sigma_u={s} alpha={a} replicate {r}: {err}")
                continue
            value = diagnostics.iact(trace.theta[cfg.burn_in:, 0])
            iacts.append(value)
            rates.append(trace.acceptance_rate)
            detail.append((s, a, r, value, trace.acceptance_rate))
        summary[(s, a)] = (float(np.median(iacts)) if iacts else math.nan,
                           float(np.median(rates)) if rates else math.nan)
        echo(f"sigma_u={s:.3f} alpha={a:.3f} median_iact={summary[(s, a)][0]:.3f}")
    rows = [(s, a, *summary.get((s, a), (math.nan, math.nan))) for s, a in cells]
    write_csv(os.path.join(out, "heatmap.csv"), ["sigma_u", "alpha", "median_iact"],
              [r[:3] for r in rows])
    write_csv(os.path.join(out, "heatmap_acceptance.csv"),
              ["sigma_u", "alpha", "median_acceptance"], [(r[0], r[1], r[3]) for r in rows])
    write_csv(os.path.join(out, "heatmap_replicates.csv"),
              ["sigma_u", "alpha", "replicate", "iact", "acceptance_rate"], detail)
    return ["data.csv", "heatmap.csv", "heatmap_acceptance.csv", "heatmap_replicates.csv"], failures


def sv_data(cfg: ExperimentConfig):
    if cfg.data_path:
        return load_returns(cfg.data_path).log_returns
    model = SVLeverageModel(*cfg.true_theta, init_variance=cfg.init_variance,
                            leverage=cfg.leverage)
    _, y = simulate_sv(model, cfg.T, np.random.default_rng(stream(cfg.seed, DATA_STREAM)))
    return y


def sv_evaluator(cfg: ExperimentConfig, y) -> PotentialEvaluator:
    return PotentialEvaluator(SVFromTheta(cfg.init_variance, cfg.leverage), y, sv_prior(),
                              BOOTSTRAP_PF, cfg.n_particles)


def _sv_posterior(cfg: ExperimentConfig, out: str, echo):
    y = sv_data(cfg)
    write_returns(os.path.join(out, "data.csv"), y)
    evaluator = sv_evaluator(cfg, y)
    seeds = chain_seeds(cfg)
    grid = [float(s) for s in cfg.sigma_u_grid] or [cfg.sigma_u]
    jobs = [(_settings(cfg, s, cfg.alpha), evaluator, seed) for s in grid for seed in seeds]
    results = _map(_run_chain, jobs, cfg.workers)

    files, failures, per_sigma = ["data.csv"], [], {}
    R = len(seeds)
    for gi, s in enumerate(grid):
        traces = []
        for r in range(R):
            trace, err = results[gi * R + r]
            if err:
                failures.append(f"sigma_u={s} replicate {r}: {err}")
                echo(f"sigma_u={s:.3f} replicate {r}: FAILED {err}")
                continue
            summ = diagnostics.posterior_summary(trace, cfg.burn_in)
            echo(f"sigma_u={s:.3f} replicate {r}: acceptance={summ['acceptance_rate']:.3f} "
                 f"mean={np.round(summ['mean'], 3).tolist()} iact={np.round(summ['iact'], 1).tolist()}")
            traces.append((r, trace, summ))
        per_sigma[s] = traces

    if not cfg.sigma_u_grid:
        traces = per_sigma[cfg.sigma_u]
        for r, trace, _ in traces:
            name = f"trace_rep{r:02d}.csv"
            trace.write_csv(os.path.join(out, name))
            files.append(name)
        if traces:
            pooled = np.concatenate([t.theta[cfg.burn_in:] for _, t, _ in traces])
            iacts = np.array([s["iact"] for _, _, s in traces])
            write_json(os.path.join(out, "summary.json"), {
                "parameters": list(SV_PARAM_NAMES),
                "sigma_u": cfg.sigma_u,
                "posterior_mean": pooled.mean(axis=0).tolist(),
                "posterior_std": pooled.std(axis=0).tolist(),
                "median_iact": np.median(iacts, axis=0).tolist(),
                "median_acceptance_rate": float(np.median([s["acceptance_rate"] for *_, s in traces])),
                "replicates": [dict(s, replicate=r) for r, _, s in traces],
            })
            files.append("summary.json")
    else:
        rows = []
        for s, traces in per_sigma.items():
            if not traces:
                continue
            iacts = np.array([summ["iact"] for *_, summ in traces])
            rate = float(np.median([summ["acceptance_rate"] for *_, summ in traces]))
            for j, name in enumerate(SV_PARAM_NAMES):
                q1, med, q3 = np.quantile(iacts[:, j], [0.25, 0.5, 0.75])
                rows.append((s, name, med, q1, q3, rate))
        with open(os.path.join(out, "sv_iact.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sigma_u", "parameter", "median_iact", "q1_iact", "q3_iact",
                        "median_acceptance"])
            for s, name, med, q1, q3, rate in rows:
                w.writerow([_fmt(s), name, _fmt(med), _fmt(q1), _fmt(q3), _fmt(rate)])
        files.append("sv_iact.csv")
    return files, failures


PIPELINES = {
    "peskun_scan": lambda cfg, out, echo: (_peskun_scan(cfg, out, echo), []),
    "iid_corr_scan": lambda cfg, out, echo: (_iid_corr_scan(cfg, out, echo), []),
    "iid_heatmap": _iid_heatmap,
    "sv_posterior": _sv_posterior,
}


def run_experiment(cfg: ExperimentConfig, echo=print) -> RunResult:
    """Run one configured experiment and move its outputs into ``cfg.out_dir``.

    A module error removes every output of this run and is re-raised as
    ``ExperimentError``. Replicate failures do not abort the run; they are
    reported in the result, which then carries a nonzero exit status.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    staging = os.path.join(cfg.out_dir, f".partial-{cfg.kind}")
    shutil.rmtree(staging, ignore_errors=True)
    os.makedirs(staging)
    try:
        files, failures = PIPELINES[cfg.kind](cfg, staging, echo)
        with open(os.path.join(staging, "config.txt"), "w") as fh:
            fh.write(cfg.to_text())
        files.append("config.txt")
    except Exception as exc:
        shutil.rmtree(staging, ignore_errors=True)
        raise ExperimentError(f"{cfg.kind} (seed={cfg.seed}) failed: {exc}") from exc
    for name in files:
        os.replace(os.path.join(staging, name), os.path.join(cfg.out_dir, name))
    shutil.rmtree(staging, ignore_errors=True)
    for msg in failures:
        log.error("replicate failed: %s", msg)
    return RunResult(files, failures)
