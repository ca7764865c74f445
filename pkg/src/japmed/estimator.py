"""Pipeline orchestration: initialization, penalized fits, pathway selection."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from japmed.data import Coefficients, Dataset, MediationReport
from japmed.initialization import (DEFAULT_C_TR, InitEstimates, Method,
                                   WeightExponents, compute_weights,
                                   init_estimates)
from japmed.projection import ols_summary
from japmed.solver import (PenaltySpec, SolverOptions, fit_mediator,
                           fit_outcome)


@dataclass(frozen=True)
class FittedModel:
    """Fitted coefficients, the selected pathway set, and diagnostics."""

    coefficients: Coefficients
    active: tuple[int, ...]  # 1-based mediator indices, sorted
    method: Method
    exponents: WeightExponents | None
    lambda_alpha: float
    lambda_beta: float
    c_tr: float
    init: InitEstimates
    kkt_alpha: float
    kkt_beta: float
    sweeps: int
    converged: bool


def active_set(alpha, beta) -> tuple[int, ...]:
    """1-based indices with alpha_j != 0 and beta_j != 0 (exact zeros)."""
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    return tuple(int(j) + 1 for j in np.flatnonzero((alpha != 0) & (beta != 0)))


def _assemble(ds: Dataset, method: Method, exps, lambda_alpha, lambda_beta,
              c_tr, penalize_covariates, lambda_covariates, opts,
              warm_beta=None) -> FittedModel:
    ols = ols_summary(ds)
    init = init_estimates(ols, c_tr)
    weights = compute_weights(init, exps, method)

    pen_m = PenaltySpec(lam=lambda_alpha, weights=weights.w_alpha)
    fit_m = fit_mediator(ds, pen_m)
    pen_y = PenaltySpec(lam=lambda_beta, weights=weights.w_beta,
                        penalize_covariates=penalize_covariates,
                        lambda_covariates=lambda_covariates)
    if warm_beta is not None:
        opts = SolverOptions(tol=opts.tol, max_sweeps=opts.max_sweeps,
                             warm_start=warm_beta, kkt_tol=opts.kkt_tol)
    fit_y = fit_outcome(ds, pen_y, opts)

    alpha = fit_m.penalized_coefs
    if penalize_covariates:
        beta = fit_y.penalized_coefs[:ds.p]
        zeta_y = np.concatenate([[0.0], fit_y.penalized_coefs[ds.p:]])
        zeta_y[0] = fit_y.unpenalized_coefs[1]  # intercept
        direct = float(fit_y.unpenalized_coefs[0])
    else:
        beta = fit_y.penalized_coefs
        direct = float(fit_y.unpenalized_coefs[0])
        zeta_y = fit_y.unpenalized_coefs[1:]

    coefs = Coefficients(alpha=alpha, beta=beta, direct_effect=direct,
                         zeta_m=fit_m.unpenalized_coefs, zeta_y=zeta_y)
    return FittedModel(
        coefficients=coefs,
        active=active_set(alpha, beta),
        method=method,
        exponents=exps,
        lambda_alpha=lambda_alpha,
        lambda_beta=lambda_beta,
        c_tr=c_tr,
        init=init,
        kkt_alpha=fit_m.kkt_violation,
        kkt_beta=fit_y.kkt_violation,
        sweeps=fit_y.sweeps_used,
        converged=fit_y.converged,
    )


def jap_fit(ds: Dataset, exps: WeightExponents, lambda_alpha, lambda_beta,
            c_tr=DEFAULT_C_TR, penalize_covariates=False,
            lambda_covariates=0.0, opts: SolverOptions = SolverOptions()
            ) -> FittedModel:
    """Full joint-adaptive-penalty pipeline on a dataset."""
    return _assemble(ds, Method.JAP, exps, lambda_alpha, lambda_beta, c_tr,
                     penalize_covariates, lambda_covariates, opts)


def baseline_fit(ds: Dataset, method: Method, exps: WeightExponents | None,
                 lambda_alpha, lambda_beta, c_tr=DEFAULT_C_TR,
                 penalize_covariates=False, lambda_covariates=0.0,
                 opts: SolverOptions = SolverOptions()) -> FittedModel:
    """Same pipeline with LASSO or adaptive-LASSO weights."""
    if method == Method.JAP:
        raise ValueError("use jap_fit for the joint adaptive penalty")
    return _assemble(ds, method, exps, lambda_alpha, lambda_beta, c_tr,
                     penalize_covariates, lambda_covariates, opts)


def mediation_effects(fit: FittedModel, t=0.0, t_prime=1.0) -> MediationReport:
    """Per-mediator indirect effects alpha_j * beta_j * (t' - t)."""
    effects = fit.coefficients.alpha * fit.coefficients.beta * (t_prime - t)
    return MediationReport(effects=effects, active=fit.active,
                           contrast=(t, t_prime))


def model_to_dict(fit: FittedModel) -> dict:
    """JSON-serializable view of a fitted model (17 significant digits)."""
    c = fit.coefficients
    exps = fit.exponents
    return {
        "method": fit.method.value,
        "coefficients": {
            "alpha": [float(v) for v in c.alpha],
            "beta": [float(v) for v in c.beta],
            "direct_effect": c.direct_effect,
            "zeta_m": [[float(v) for v in row] for row in c.zeta_m],
            "zeta_y": [float(v) for v in c.zeta_y],
        },
        "active": list(fit.active),
        "hyperparameters": {
            "gamma_alpha": exps.gamma_alpha if exps else None,
            "eta_alpha": exps.eta_alpha if exps else None,
            "gamma_beta": exps.gamma_beta if exps else None,
            "eta_beta": exps.eta_beta if exps else None,
            "lambda_alpha": fit.lambda_alpha,
            "lambda_beta": fit.lambda_beta,
            "c_tr": fit.c_tr,
        },
        "diagnostics": {
            "kkt_alpha": fit.kkt_alpha,
            "kkt_beta": fit.kkt_beta,
            "sweeps": fit.sweeps,
            "converged": fit.converged,
        },
    }


def model_to_json(fit: FittedModel) -> str:
    return json.dumps(model_to_dict(fit), indent=2)
