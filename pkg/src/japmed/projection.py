"""Residualizing projections and OLS summaries for the two-equation model.

Both regressions are computed by partialling out the unpenalized design
block (residualize response and regressors, then solve the reduced least
squares problem), which matches the joint OLS solution block for block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

SE_FLOOR = 1e-12
COND_THRESHOLD = 1e12


class SingularDesignError(ValueError):
    """Raised when a design block is (numerically) rank deficient."""


class Projector:
    """Orthogonal projector onto the complement of a basis' column space."""

    def __init__(self, basis):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 2:
            raise ValueError("basis must be a matrix")
        self.basis = basis
        q, r, piv = scipy.linalg.qr(basis, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if diag.size and diag.min() * COND_THRESHOLD < diag.max():
            bad = sorted(piv[j] for j in range(diag.size)
                         if diag[j] * COND_THRESHOLD < diag.max())
            raise SingularDesignError(
                f"basis is rank deficient; offending columns: {bad}")
        self._q = q

    def apply(self, target):
        """Project out the basis columns: (I - B(B'B)^-1 B') target."""
        target = np.asarray(target, dtype=float)
        return target - self._q @ (self._q.T @ target)

    def least_squares(self, response):
        """Coefficients of the basis regression for ``response``."""
        coefs, *_ = np.linalg.lstsq(self.basis, np.asarray(response, float),
                                    rcond=None)
        return coefs


def residualize(basis, target):
    """Residuals of ``target`` after regressing out ``basis`` columns."""
    return Projector(basis).apply(target)


@dataclass(frozen=True)
class OlsSummary:
    """OLS point estimates, standard errors, and variance components."""

    alpha_ols: np.ndarray
    se_alpha: np.ndarray
    beta_ols: np.ndarray
    se_beta: np.ndarray
    direct_effect_ols: float
    zeta_m_ols: np.ndarray
    zeta_y_ols: np.ndarray
    sigma2_hat: float
    sigma_jj_hat: np.ndarray
    sigma_t2_hat: float


def ols_mediator(ds):
    """Mediator-model OLS: per-mediator treatment effects and SEs.

    Returns (alpha_ols, se_alpha, zeta_m_ols, sigma_jj_hat, sigma_t2_hat).
    The error-variance divisor is n - q - 1 (treatment plus q covariates).
    """
    n, p, q = ds.n, ds.p, ds.q
    px = Projector(ds.covariates)
    t_res = px.apply(ds.treatment)
    tt = float(t_res @ t_res)
    tt_raw = float(ds.treatment @ ds.treatment)
    if tt <= 0 or not np.isfinite(tt) or tt * COND_THRESHOLD < tt_raw:
        raise SingularDesignError("treatment is collinear with covariates")
    m_res = px.apply(ds.mediators)
    alpha = (t_res @ m_res) / tt

    # full-model residuals via a second projection step
    resid = m_res - np.outer(t_res, alpha)
    rss = np.sum(resid ** 2, axis=0)
    dof = n - q - 1
    sigma_jj = rss / dof
    se_alpha = np.maximum(np.sqrt(sigma_jj / tt), SE_FLOOR)
    zeta_m = px.least_squares(ds.mediators - np.outer(ds.treatment, alpha))
    return alpha, se_alpha, zeta_m, sigma_jj, tt / n


def ols_outcome(ds):
    """Outcome-model OLS: mediator coefficients, SEs, and nuisance block.

    Returns (beta_ols, se_beta, direct_effect_ols, zeta_y_ols, sigma2_hat).
    The error-variance divisor is n - p - q - 1.
    """
    n, p, q = ds.n, ds.p, ds.q
    dof = n - p - q - 1
    if dof <= 0:
        raise SingularDesignError(f"nonpositive degrees of freedom (n={n})")
    d_u = np.column_stack([ds.treatment, ds.covariates])
    pu = Projector(d_u)
    m_res = pu.apply(ds.mediators)
    y_res = pu.apply(ds.outcome)
    gram = m_res.T @ m_res
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_THRESHOLD ** 2:
        raise SingularDesignError("mediator block is collinear given (T, X)")
    cho = scipy.linalg.cho_factor(gram)
    beta = scipy.linalg.cho_solve(cho, m_res.T @ y_res)
    resid = y_res - m_res @ beta
    sigma2 = float(resid @ resid) / dof
    gram_inv_diag = np.diag(scipy.linalg.cho_solve(cho, np.eye(p)))
    se_beta = np.maximum(np.sqrt(np.maximum(gram_inv_diag, 0.0) * sigma2),
                         SE_FLOOR)
    unpen = pu.least_squares(ds.outcome - ds.mediators @ beta)
    direct = float(unpen[0])
    zeta_y = unpen[1:]
    return beta, se_beta, direct, zeta_y, sigma2


def ols_summary(ds) -> OlsSummary:
    """Run both OLS regressions and collect the Step-1 inputs."""
    alpha, se_a, zeta_m, sigma_jj, sigma_t2 = ols_mediator(ds)
    beta, se_b, direct, zeta_y, sigma2 = ols_outcome(ds)
    return OlsSummary(alpha_ols=alpha, se_alpha=se_a, beta_ols=beta,
                      se_beta=se_b, direct_effect_ols=direct,
                      zeta_m_ols=zeta_m, zeta_y_ols=zeta_y,
                      sigma2_hat=sigma2, sigma_jj_hat=sigma_jj,
                      sigma_t2_hat=sigma_t2)
