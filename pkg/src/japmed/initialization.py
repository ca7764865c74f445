"""Truncated-OLS initialization and pathway-adaptive penalty weights."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from japmed.projection import OlsSummary

DEFAULT_C_TR = 5.0


class Method(str, enum.Enum):
    JAP = "jap"
    ADAPTIVE_LASSO = "al"
    LASSO = "lasso"


@dataclass(frozen=True)
class InitEstimates:
    """Initial estimates floored in magnitude at c_tr times the OLS SE."""

    alpha0: np.ndarray
    beta0: np.ndarray
    trunc_alpha: np.ndarray
    trunc_beta: np.ndarray
    c_tr: float


@dataclass(frozen=True)
class WeightExponents:
    """Exponents of the joint adaptive weights; requires gamma > 2*eta > 0."""

    gamma_alpha: float
    eta_alpha: float
    gamma_beta: float
    eta_beta: float

    def __post_init__(self):
        for gamma, eta, tag in ((self.gamma_alpha, self.eta_alpha, "alpha"),
                                (self.gamma_beta, self.eta_beta, "beta")):
            if not (gamma > 2 * eta > 0):
                raise ValueError(
                    f"need gamma_{tag} > 2*eta_{tag} > 0, "
                    f"got gamma={gamma}, eta={eta}")


@dataclass(frozen=True)
class Weights:
    """Per-pathway penalty weights; the penalty applied is lambda / w."""

    w_alpha: np.ndarray
    w_beta: np.ndarray
    mode: Method


def truncate(x, floor):
    """Sign-preserving magnitude floor: identity when |x| >= floor.

    sgn(0) is taken as +1 so the result magnitude is always >= floor.
    """
    floor = np.asarray(floor, dtype=float)
    if np.any(floor <= 0):
        raise ValueError(f"truncation level must be positive, got {floor}")
    x = np.asarray(x, dtype=float)
    sign = np.where(x < 0, -1.0, 1.0)
    out = sign * np.maximum(np.abs(x), floor)
    return out if out.ndim else float(out)


def init_estimates(ols: OlsSummary, c_tr: float = DEFAULT_C_TR) -> InitEstimates:
    """Step-1 initialization: truncated OLS at c_tr standard errors."""
    if c_tr <= 0:
        raise ValueError(f"c_tr must be positive, got {c_tr}")
    trunc_a = c_tr * ols.se_alpha
    trunc_b = c_tr * ols.se_beta
    return InitEstimates(
        alpha0=truncate(ols.alpha_ols, trunc_a),
        beta0=truncate(ols.beta_ols, trunc_b),
        trunc_alpha=trunc_a,
        trunc_beta=trunc_b,
        c_tr=c_tr,
    )


def compute_weights(init: InitEstimates, exps: WeightExponents | None,
                    mode: Method = Method.JAP) -> Weights:
    """Penalty weights for the chosen method.

    JAP combines the initial pathway product with the single-coefficient
    magnitude; adaptive LASSO keeps only the latter; LASSO uses 1.
    """
    p = init.alpha0.shape[0]
    if mode == Method.LASSO:
        return Weights(np.ones(p), np.ones(p), mode)
    if exps is None:
        raise ValueError(f"mode {mode} requires weight exponents")
    a0, b0 = np.abs(init.alpha0), np.abs(init.beta0)
    prod = a0 * b0
    if mode == Method.ADAPTIVE_LASSO:
        return Weights(a0 ** (2 * exps.eta_alpha),
                       b0 ** (2 * exps.eta_beta), mode)
    w_alpha = prod ** exps.gamma_alpha + a0 ** (2 * exps.eta_alpha)
    w_beta = prod ** exps.gamma_beta + b0 ** (2 * exps.eta_beta)
    return Weights(w_alpha, w_beta, mode)


def weight_ratio(init: InitEstimates, exps: WeightExponents, j: int):
    """Ratio of the joint adaptive weight to the adaptive-LASSO weight.

    ``j`` is a 1-based mediator index. Algebraically equals
    1 + |alpha0|^(gamma-2*eta) * |beta0|^gamma for the alpha model (and
    symmetrically for beta).
    """
    jap = compute_weights(init, exps, Method.JAP)
    al = compute_weights(init, exps, Method.ADAPTIVE_LASSO)
    k = j - 1
    return (jap.w_alpha[k] / al.w_alpha[k], jap.w_beta[k] / al.w_beta[k])
