"""Data-generating mechanism and Monte-Carlo selection-accuracy harness."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from japmed.data import Coefficients, Dataset, validate_dataset
from japmed.estimator import FittedModel, baseline_fit, jap_fit
from japmed.initialization import DEFAULT_C_TR, Method, WeightExponents
from japmed.solver import SolverOptions
from japmed.tuning import TuningGrid, tune_model


@dataclass(frozen=True)
class SimConfig:
    """One simulation scenario (coefficient groups, noise, sample size)."""

    n: int
    p: int
    rho: float
    delta: float
    c_effect: float = 1.0
    sigma2: float = 1.0
    direct_effect: float = 1.0
    noise_case: str = "I"
    seed: int = 0
    mediator_noise_scale: float = 1.0  # 0 gives the degenerate noise-free mode

    def __post_init__(self):
        if self.p % 6 != 0:
            raise ValueError(f"p must be divisible by 6, got {self.p}")
        if not (0 < abs(self.delta) < 1):
            raise ValueError(f"need 0 < |delta| < 1, got {self.delta}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"need rho in [0, 1), got {self.rho}")
        if self.noise_case not in ("I", "II"):
            raise ValueError(f"noise_case must be 'I' or 'II', got {self.noise_case}")
        if self.noise_case == "II" and self.rho == 0.0:
            raise ValueError("noise case II requires rho > 0")
        if self.sigma2 < 0 or self.mediator_noise_scale < 0:
            raise ValueError("noise scales must be nonnegative")


def make_coefficients(p, delta, c_effect=1.0, direct_effect=1.0) -> Coefficients:
    """Six equal groups of (alpha, beta) pairs; groups 1-3 are active.

    Per group the pair is C*(a_k, b_k) with (a_k, b_k) in
    (1,1), (1/d,d), (d,1/d), (0,1), (1,0), (0,0).
    """
    if p % 6 != 0:
        raise ValueError(f"p must be divisible by 6, got {p}")
    patterns = [(1.0, 1.0), (1.0 / delta, delta), (delta, 1.0 / delta),
                (0.0, 1.0), (1.0, 0.0), (0.0, 0.0)]
    size = p // 6
    alpha = np.empty(p)
    beta = np.empty(p)
    for k, (a, b) in enumerate(patterns):
        alpha[k * size:(k + 1) * size] = c_effect * a
        beta[k * size:(k + 1) * size] = c_effect * b
    return Coefficients(alpha=alpha, beta=beta, direct_effect=direct_effect,
                        zeta_m=np.zeros((1, p)), zeta_y=np.zeros(1))


def true_active_set(p) -> tuple[int, ...]:
    """1-based indices of the three active groups."""
    return tuple(range(1, p // 2 + 1))


def ar1_covariance(p, rho) -> np.ndarray:
    """Sigma_ij = rho^|i-j|."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"need rho in [0, 1), got {rho}")
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def simulate_dataset(cfg: SimConfig, rng=None):
    """Draw one dataset; returns (Dataset, true Coefficients, true ActiveSet)."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    coefs = make_coefficients(cfg.p, cfg.delta, cfg.c_effect,
                              cfg.direct_effect)
    t = rng.binomial(1, 0.5, size=cfg.n).astype(float)
    sigma = ar1_covariance(cfg.p, cfg.rho)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:  # unreachable for rho in [0,1)
        raise ValueError(f"AR(1) covariance not positive definite: {exc}")
    noise = rng.standard_normal((cfg.n, cfg.p)) @ chol.T
    if cfg.noise_case == "II":
        perm = rng.permutation(cfg.p)
        noise = noise[:, perm]
    noise *= cfg.mediator_noise_scale
    eps = rng.standard_normal(cfg.n) * math.sqrt(cfg.sigma2)
    mediators = np.outer(t, coefs.alpha) + noise
    outcome = (cfg.direct_effect * t + mediators @ coefs.beta + eps)
    ds = validate_dataset(t, mediators, outcome, None)
    return ds, coefs, true_active_set(cfg.p)


def exact_recovery(est, truth) -> int:
    """1 iff the two active sets are equal."""
    return int(set(est) == set(truth))


@dataclass(frozen=True)
class MethodConfig:
    """How to fit one method inside the Monte-Carlo loop.

    With ``tune`` set, hyperparameters come from the VSS/MSE procedure on
    the given grids; otherwise the fixed values are used.
    """

    method: Method
    tune: bool = True
    mediator_grid: TuningGrid = field(
        default_factory=lambda: TuningGrid.thinned("mediator"))
    outcome_grid: TuningGrid = field(
        default_factory=lambda: TuningGrid.thinned("outcome"))
    exponents: WeightExponents | None = None
    lambda_alpha: float = 1.0
    lambda_beta: float = math.e ** 3
    c_tr: float = DEFAULT_C_TR


def fit_with_config(ds: Dataset, mc: MethodConfig, tuning_seed: int,
                    opts: SolverOptions = SolverOptions()) -> FittedModel:
    """Fit one method on a dataset, tuning hyperparameters if requested."""
    if mc.tune:
        res_m = tune_model(ds, mc.mediator_grid, "mediator", mc.method,
                           seed=tuning_seed, c_tr=mc.c_tr, opts=opts)
        res_y = tune_model(ds, mc.outcome_grid, "outcome", mc.method,
                           seed=tuning_seed, c_tr=mc.c_tr, opts=opts)
        ga, ea, la = res_m.chosen
        gb, eb, lb = res_y.chosen
        if mc.method == Method.JAP:
            exps = WeightExponents(ga, ea, gb, eb)
        elif mc.method == Method.ADAPTIVE_LASSO:
            exps = WeightExponents(2 * ea + 1.0, ea, 2 * eb + 1.0, eb)
        else:
            exps = None
        lam_a, lam_b = la, lb
    else:
        exps = mc.exponents
        lam_a, lam_b = mc.lambda_alpha, mc.lambda_beta
    if mc.method == Method.JAP:
        return jap_fit(ds, exps, lam_a, lam_b, c_tr=mc.c_tr, opts=opts)
    return baseline_fit(ds, mc.method, exps, lam_a, lam_b, c_tr=mc.c_tr,
                        opts=opts)


def replicate_seed(master_seed, cell_index, rep) -> np.random.SeedSequence:
    """Deterministic per-replicate seed, independent of execution order."""
    return np.random.SeedSequence(entropy=master_seed,
                                  spawn_key=(cell_index, rep))


def _run_replicate(cfg: SimConfig, methods, cell_index, rep, master_seed):
    ss = replicate_seed(master_seed, cell_index, rep)
    data_ss, tune_ss = ss.spawn(2)
    rng = np.random.default_rng(data_ss)
    tuning_seed = int(tune_ss.generate_state(1)[0])
    ds, _, truth = simulate_dataset(cfg, rng=rng)
    truth_set = set(truth)
    p = cfg.p
    results = {}
    for name, mc in methods.items():
        try:
            fit = fit_with_config(ds, mc, tuning_seed)
            est = set(fit.active)
            tp = len(est & truth_set)
            fp = len(est - truth_set)
            results[name] = {
                "recovered": exact_recovery(est, truth_set),
                "tpr": tp / len(truth_set) if truth_set else 1.0,
                "fpr": fp / (p - len(truth_set)) if p > len(truth_set) else 0.0,
                "active": sorted(est),
                "error": None,
            }
        except Exception as exc:
            results[name] = {"recovered": None, "tpr": None, "fpr": None,
                             "active": None, "error": str(exc)}
    return {"cell": cell_index, "r": rep, "results": results}


def run_monte_carlo(cfg_grid, methods, replicates, master_seed,
                    n_jobs=1, detail_path=None, resume=False):
    """Monte-Carlo exact-recovery rates per grid cell and method.

    ``methods`` maps display names to MethodConfig. Per-replicate detail can
    be streamed to a JSON-lines file and reused on ``resume``; aggregation
    order is fixed by the grid, so results do not depend on scheduling.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    done: dict[tuple[int, int], dict] = {}
    if resume and detail_path and os.path.exists(detail_path):
        with open(detail_path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    done[(rec["cell"], rec["r"])] = rec

    todo = [(ci, r) for ci in range(len(cfg_grid)) for r in range(replicates)
            if (ci, r) not in done]
    computed = Parallel(n_jobs=n_jobs)(
        delayed(_run_replicate)(cfg_grid[ci], methods, ci, r, master_seed)
        for ci, r in todo)
    for rec in computed:
        done[(rec["cell"], rec["r"])] = rec

    if detail_path:
        with open(detail_path, "w", encoding="utf-8") as fh:
            for ci in range(len(cfg_grid)):
                for r in range(replicates):
                    fh.write(json.dumps(done[(ci, r)], sort_keys=True) + "\n")

    rows = []
    for ci, cfg in enumerate(cfg_grid):
        for name in methods:
            recs = [done[(ci, r)]["results"][name] for r in range(replicates)]
            ok = [r for r in recs if r["error"] is None]
            failed = replicates - len(ok)
            if ok:
                rate = sum(r["recovered"] for r in ok) / len(ok)
                stderr = math.sqrt(rate * (1 - rate) / len(ok))
                tpr = sum(r["tpr"] for r in ok) / len(ok)
                fpr = sum(r["fpr"] for r in ok) / len(ok)
            else:
                rate = stderr = tpr = fpr = float("nan")
            rows.append({
                "method": name, "n": cfg.n, "p": cfg.p, "rho": cfg.rho,
                "delta": cfg.delta, "noise_case": cfg.noise_case,
                "replicates": len(ok), "failed": failed,
                "exact_recovery_rate": rate, "mc_stderr": stderr,
                "mean_tpr": tpr, "mean_fpr": fpr,
            })
    return rows


RECOVERY_COLUMNS = ["method", "n", "p", "rho", "delta", "noise_case",
                    "replicates", "failed", "exact_recovery_rate",
                    "mc_stderr", "mean_tpr", "mean_fpr"]


def write_recovery_csv(path, rows):
    """Persist a recovery table; floats serialized losslessly via repr."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECOVERY_COLUMNS)
        for row in rows:
            out = []
            for col in RECOVERY_COLUMNS:
                v = row[col]
                out.append(repr(float(v)) if isinstance(v, float) else v)
            writer.writerow(out)
