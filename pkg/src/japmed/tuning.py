"""Two-stage hyperparameter selection.

For each admissible weight-exponent pair, the smallest penalty level
attaining the highest variable-selection stability is picked; the final
pair is the one minimizing full-data MSE at its chosen penalty. The
mediator and outcome models are tuned independently.

Stability is estimated from disjoint half-splits: each of the ``folds``
resamples partitions the rows into two halves, the model is fitted on
both halves along the penalty path, and the Cohen's kappa of the two
supports is averaged over resamples. Disjoint halves are essential here;
overlapping fold-complements produce near-identical supports, so a noise
variable correlated with the response in this sample enters every
support and stability cannot flag the over-selection. Because the loss
is the unnormalized residual sum of squares, the penalty applied to a
subset of rows is scaled by the subset fraction so the per-observation
penalty matches the full-data fit at the same grid value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from japmed._kernel import cd_gram
from japmed.data import Dataset
from japmed.initialization import (DEFAULT_C_TR, Method, WeightExponents,
                                   compute_weights, init_estimates)
from japmed.projection import Projector, ols_summary
from japmed.solver import (PenaltySpec, SolverOptions, fit_mediator,
                           fit_outcome)

DEFAULT_GAMMAS = tuple(0.75 + 0.25 * i for i in range(10))  # 0.75 .. 3
DEFAULT_ETAS = (0.25, 0.5, 0.75, 1.0, 1.25)


@dataclass(frozen=True)
class TuningGrid:
    """Search grid; only exponent pairs with gamma > 2*eta are enumerated."""

    gamma_values: tuple[float, ...] = DEFAULT_GAMMAS
    eta_values: tuple[float, ...] = DEFAULT_ETAS
    log_lambda_range: tuple[float, float, float] = (0.0, 5.0, 0.1)
    folds: int = 20  # number of half-split stability resamples

    def __post_init__(self):
        lo, hi, step = self.log_lambda_range
        if step <= 0 or hi < lo:
            raise ValueError("log-lambda range must have positive step, hi >= lo")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")

    @staticmethod
    def mediator_default() -> "TuningGrid":
        return TuningGrid(log_lambda_range=(0.0, 5.0, 0.1))

    @staticmethod
    def outcome_default() -> "TuningGrid":
        return TuningGrid(log_lambda_range=(3.0, 8.0, 0.1))

    @staticmethod
    def thinned(target: str) -> "TuningGrid":
        """Reduced exponent grid for Monte-Carlo sweeps; full lambda path."""
        rng = (0.0, 5.0, 0.1) if target == "mediator" else (3.0, 8.0, 0.1)
        return TuningGrid(gamma_values=(1.0, 2.0, 3.0),
                          eta_values=(0.25, 0.5),
                          log_lambda_range=rng)

    def lambdas(self) -> np.ndarray:
        lo, hi, step = self.log_lambda_range
        count = int(round((hi - lo) / step)) + 1
        return np.exp(lo + step * np.arange(count))

    def exponent_pairs(self, method: Method):
        """Ordered grid cells as (gamma, eta) tuples; None where unused."""
        if method == Method.LASSO:
            return [(None, None)]
        if method == Method.ADAPTIVE_LASSO:
            return [(None, eta) for eta in self.eta_values]
        pairs = [(g, e) for g in self.gamma_values for e in self.eta_values
                 if g > 2 * e]
        if not pairs:
            raise ValueError("no admissible (gamma, eta) pairs in the grid")
        return pairs


@dataclass(frozen=True)
class TuningResult:
    chosen: tuple[float | None, float | None, float]  # (gamma, eta, lambda)
    vss_at_chosen: float
    mse_at_chosen: float
    table: tuple[dict, ...] = field(default=())


def kfold_split(n, k, seed):
    """Deterministic partition of row indices 0..n-1 into k folds.

    Fold sizes differ by at most one.
    """
    if k > n:
        raise ValueError(f"cannot split n={n} rows into k={k} folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def selection_kappa(s1, s2, p):
    """Cohen's kappa of two support sets over 1..p; 0 when chance agreement is 1."""
    s1, s2 = set(s1), set(s2)
    for s in (s1, s2):
        if any(not 1 <= j <= p for j in s):
            raise ValueError(f"support indices must lie in 1..{p}")
    n11 = len(s1 & s2)
    n10 = len(s1 - s2)
    n01 = len(s2 - s1)
    n00 = p - n11 - n10 - n01
    pa = (n11 + n00) / p
    pe = ((n11 + n10) * (n11 + n01) + (n01 + n00) * (n10 + n00)) / p ** 2
    if pe == 1.0:
        return 0.0
    return (pa - pe) / (1.0 - pe)


def vss(supports, p):
    """Mean pairwise selection kappa over all unordered pairs of supports."""
    k = len(supports)
    if k < 2:
        raise ValueError("need at least 2 supports")
    total = 0.0
    count = 0
    for i in range(k):
        for j in range(i + 1, k):
            total += selection_kappa(supports[i], supports[j], p)
            count += 1
    return total / count


def mse_full(fit, ds: Dataset, target: str) -> float:
    """Full-data residual MSE of the target model for a FitResult."""
    if target == "mediator":
        resid = (ds.mediators - np.outer(ds.treatment, fit.penalized_coefs)
                 - ds.covariates @ fit.unpenalized_coefs)
        return float(np.sum(resid ** 2)) / (ds.n * ds.p)
    if target == "outcome":
        d_unpen = np.column_stack([ds.treatment, ds.covariates])
        resid = (ds.outcome - ds.mediators @ fit.penalized_coefs
                 - d_unpen @ fit.unpenalized_coefs)
        return float(resid @ resid) / ds.n
    raise ValueError(f"unknown target {target!r}")


def _subset(ds: Dataset, keep) -> Dataset:
    return Dataset(treatment=ds.treatment[keep], mediators=ds.mediators[keep],
                   outcome=ds.outcome[keep], covariates=ds.covariates[keep],
                   mediator_names=ds.mediator_names)


def _exponents(gamma, eta) -> WeightExponents | None:
    if gamma is None and eta is None:
        return None
    if gamma is None:  # adaptive LASSO: gamma unused, keep invariant valid
        gamma = 2 * eta + 1.0
    return WeightExponents(gamma, eta, gamma, eta)


def _half_split_pairs(n, splits, seed):
    """Deterministic sequence of ``splits`` partitions into two halves."""
    seeds = np.random.SeedSequence(seed).generate_state(splits)
    return [kfold_split(n, 2, int(s)) for s in seeds]


def _mediator_support_paths(cache, weights_per_sub, lambdas, p):
    """Supports of the closed-form mediator path for every subset and lambda."""
    supports = np.empty((len(cache), lambdas.size, p), dtype=bool)
    for f, (frac, tt, inner) in enumerate(cache):
        w = weights_per_sub[f]
        thresholds = (frac * lambdas)[:, None] / (2.0 * w[None, :] * tt)
        supports[f] = np.abs(inner)[None, :] > thresholds
    return supports


def _outcome_support_paths(cache, weights_per_sub, lambdas, p, opts):
    """Supports of warm-started CD paths (descending lambda) per subset."""
    supports = np.empty((len(cache), lambdas.size, p), dtype=bool)
    order = np.argsort(lambdas)[::-1]
    for f, (frac, gram, c, diag) in enumerate(cache):
        w = weights_per_sub[f]
        beta = np.zeros(p)
        for idx in order:
            lam = frac * lambdas[idx]
            thresh = lam / (2.0 * w * diag)
            cd_gram(gram, c, thresh, beta, opts.tol, opts.max_sweeps)
            supports[f, idx] = beta != 0.0
    return supports


def tune_model(ds: Dataset, grid: TuningGrid, target: str,
               method: Method = Method.JAP, seed: int = 0,
               c_tr: float = DEFAULT_C_TR,
               opts: SolverOptions = SolverOptions()) -> TuningResult:
    """Select (gamma, eta, lambda) for one model by VSS then full-data MSE."""
    if target not in ("mediator", "outcome"):
        raise ValueError(f"unknown target {target!r}")
    pairs = _half_split_pairs(ds.n, grid.folds, seed)
    lambdas = grid.lambdas()
    p = ds.p

    sub_inits = []
    sub_cache = []
    for half in (h for pair in pairs for h in pair):
        sub = _subset(ds, half)
        frac = half.size / ds.n
        sub_inits.append(init_estimates(ols_summary(sub), c_tr))
        if target == "mediator":
            px = Projector(sub.covariates)
            t_res = px.apply(sub.treatment)
            tt = float(t_res @ t_res)
            inner = (sub.mediators.T @ t_res) / tt
            sub_cache.append((frac, tt, inner))
        else:
            d_unpen = np.column_stack([sub.treatment, sub.covariates])
            pu = Projector(d_unpen)
            z_res = pu.apply(sub.mediators)
            y_res = pu.apply(sub.outcome)
            gram = np.ascontiguousarray(z_res.T @ z_res)
            sub_cache.append((frac, gram, z_res.T @ y_res,
                              np.diag(gram).copy()))

    full_init = init_estimates(ols_summary(ds), c_tr)

    rows = []
    for gamma, eta in grid.exponent_pairs(method):
        exps = _exponents(gamma, eta)
        weights_per_sub = []
        for init in sub_inits:
            w = compute_weights(init, exps, method)
            weights_per_sub.append(w.w_alpha if target == "mediator"
                                   else w.w_beta)
        if target == "mediator":
            supports = _mediator_support_paths(sub_cache, weights_per_sub,
                                               lambdas, p)
        else:
            supports = _outcome_support_paths(sub_cache, weights_per_sub,
                                              lambdas, p, opts)

        vss_per_lambda = np.empty(lambdas.size)
        for li in range(lambdas.size):
            kappas = [selection_kappa(
                tuple(np.flatnonzero(supports[2 * b, li]) + 1),
                tuple(np.flatnonzero(supports[2 * b + 1, li]) + 1), p)
                for b in range(len(pairs))]
            vss_per_lambda[li] = float(np.mean(kappas))
        best_vss = float(vss_per_lambda.max())
        lam_idx = int(np.flatnonzero(vss_per_lambda == best_vss)[0])
        lam_star = float(lambdas[lam_idx])

        full_w = compute_weights(full_init, exps, method)
        if target == "mediator":
            fit = fit_mediator(ds, PenaltySpec(lam_star, full_w.w_alpha))
        else:
            fit = fit_outcome(ds, PenaltySpec(lam_star, full_w.w_beta), opts)
        rows.append({"gamma": gamma, "eta": eta, "lambda": lam_star,
                     "vss": best_vss, "mse": mse_full(fit, ds, target)})

    # minimum MSE; ties broken by grid order (lexicographically smallest pair)
    best = min(range(len(rows)), key=lambda i: rows[i]["mse"])
    for i, row in enumerate(rows):
        row["chosen"] = i == best
    chosen = rows[best]
    return TuningResult(
        chosen=(chosen["gamma"], chosen["eta"], chosen["lambda"]),
        vss_at_chosen=chosen["vss"],
        mse_at_chosen=chosen["mse"],
        table=tuple(rows),
    )


def write_tuning_table(path, results: dict[str, TuningResult]):
    """Emit per-model tuning tables as CSV (model, gamma, eta, lambda, vss, mse, chosen)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "gamma", "eta", "lambda", "vss", "mse",
                         "chosen"])
        for model, res in results.items():
            for row in res.table:
                writer.writerow([
                    model,
                    "" if row["gamma"] is None else repr(row["gamma"]),
                    "" if row["eta"] is None else repr(row["eta"]),
                    repr(row["lambda"]), repr(row["vss"]), repr(row["mse"]),
                    int(row["chosen"]),
                ])
