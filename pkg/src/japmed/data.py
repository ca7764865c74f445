"""Core dataset types, validation, CSV ingestion, and compositional preprocessing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data or dimension violations."""


@dataclass(frozen=True)
class Dataset:
    """Validated treatment / mediator / outcome / covariate arrays.

    The covariate matrix always carries an all-ones intercept as its first
    column. Use :func:`validate_dataset` to construct instances.
    """

    treatment: np.ndarray
    mediators: np.ndarray
    outcome: np.ndarray
    covariates: np.ndarray
    mediator_names: tuple[str, ...] = field(default=())

    @property
    def n(self) -> int:
        return self.treatment.shape[0]

    @property
    def p(self) -> int:
        return self.mediators.shape[1]

    @property
    def q(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class Coefficients:
    """Full parameter set of the two-equation mediation model."""

    alpha: np.ndarray
    beta: np.ndarray
    direct_effect: float
    zeta_m: np.ndarray  # q x p
    zeta_y: np.ndarray  # q


@dataclass(frozen=True)
class MediationReport:
    """Per-mediator indirect effects alpha_j * beta_j * (t' - t)."""

    effects: np.ndarray
    active: tuple[int, ...]  # 1-based mediator indices
    contrast: tuple[float, float]


def _as_2d(name, arr):
    a = np.asarray(arr, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise DataError(f"{name} must be 1- or 2-dimensional, got ndim={a.ndim}")
    return a


def _check_finite(name, arr):
    bad = ~np.isfinite(arr)
    if bad.any():
        where = tuple(np.argwhere(bad)[0])
        loc = f"({where[0]},{where[1]})" if len(where) == 2 else f"({where[0]},)"
        raise DataError(f"non-finite entry at {loc} in {name}")


def validate_dataset(raw_treatment, raw_mediators, raw_outcome,
                     raw_covariates=None, mediator_names=()) -> Dataset:
    """Validate raw arrays and assemble a :class:`Dataset`.

    An intercept column is prepended to the covariates unless one of the
    supplied columns is already identically 1.
    """
    t = np.asarray(raw_treatment, dtype=float).reshape(-1)
    y = np.asarray(raw_outcome, dtype=float).reshape(-1)
    m = _as_2d("mediators", raw_mediators)
    n = t.shape[0]
    if raw_covariates is None:
        x = np.empty((n, 0))
    else:
        x = _as_2d("covariates", raw_covariates)

    for name, arr, rows in (("treatment", t, t.shape[0]),
                            ("outcome", y, y.shape[0]),
                            ("mediators", m, m.shape[0]),
                            ("covariates", x, x.shape[0])):
        if rows != n:
            raise DataError(f"{name} has {rows} rows, expected {n}")
        _check_finite(name, arr)

    has_intercept = any(np.all(x[:, j] == 1.0) for j in range(x.shape[1]))
    if not has_intercept:
        x = np.hstack([np.ones((n, 1)), x])
    else:
        # move the intercept column to the front
        j = next(j for j in range(x.shape[1]) if np.all(x[:, j] == 1.0))
        if j != 0:
            order = [j] + [k for k in range(x.shape[1]) if k != j]
            x = x[:, order]

    p, q = m.shape[1], x.shape[1]
    if n <= p + q + 1:
        raise DataError(f"n must exceed p+q+1={p + q + 1}, got n={n}")

    names = tuple(mediator_names) if mediator_names else tuple(
        f"m{j + 1}" for j in range(p))
    if len(names) != p:
        raise DataError(f"expected {p} mediator names, got {len(names)}")

    return Dataset(treatment=t, mediators=m, outcome=y, covariates=x,
                   mediator_names=names)


def load_csv(path, column_roles) -> Dataset:
    """Parse a headered CSV into a Dataset using a column -> role mapping.

    Roles are ``treatment``, ``mediator``, ``outcome``, ``covariate``;
    columns not named in ``column_roles`` are ignored. Mediator column
    order follows the header.
    """
    valid_roles = {"treatment", "mediator", "outcome", "covariate"}
    for col, role in column_roles.items():
        if role not in valid_roles:
            raise DataError(f"unknown role {role!r} for column {col!r}")

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = list(reader)

    missing = set(column_roles) - set(header)
    if missing:
        raise DataError(f"columns not in header: {sorted(missing)}")

    by_role: dict[str, list[str]] = {r: [] for r in valid_roles}
    for col in header:
        role = column_roles.get(col)
        if role:
            by_role[role].append(col)
    if len(by_role["treatment"]) != 1:
        raise DataError("exactly one column must have role 'treatment'")
    if len(by_role["outcome"]) != 1:
        raise DataError("exactly one column must have role 'outcome'")
    if not by_role["mediator"]:
        raise DataError("at least one column must have role 'mediator'")

    idx = {col: header.index(col) for col in column_roles}

    def parse(col, want_rows):
        j = idx[col]
        out = np.empty(len(rows))
        for i, row in enumerate(rows):
            try:
                out[i] = float(row[j])
            except (ValueError, IndexError):
                cell = row[j] if j < len(row) else "<missing>"
                raise DataError(
                    f"unparseable cell {cell!r} at (row {i + 2}, col {col})"
                ) from None
        return out

    t = parse(by_role["treatment"][0], len(rows))
    y = parse(by_role["outcome"][0], len(rows))
    m = np.column_stack([parse(c, len(rows)) for c in by_role["mediator"]])
    x = (np.column_stack([parse(c, len(rows)) for c in by_role["covariate"]])
         if by_role["covariate"] else None)
    return validate_dataset(t, m, y, x, mediator_names=by_role["mediator"])


def write_csv(ds: Dataset, path) -> dict[str, str]:
    """Write a Dataset to CSV; returns the role mapping for re-loading.

    The auto-inserted intercept column is not written.
    """
    cov_names = [f"x{j}" for j in range(1, ds.q)]
    header = ["treatment", *ds.mediator_names, "outcome", *cov_names]
    roles = {"treatment": "treatment", "outcome": "outcome"}
    roles.update({c: "mediator" for c in ds.mediator_names})
    roles.update({c: "covariate" for c in cov_names})
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(ds.n):
            row = [ds.treatment[i], *ds.mediators[i], ds.outcome[i],
                   *ds.covariates[i, 1:]]
            writer.writerow([repr(float(v)) for v in row])
    return roles


def clr_transform(counts, pseudocount=1.0) -> np.ndarray:
    """Centered log-ratio transform of a nonnegative count table.

    Each output row is log(count + pseudocount) centered by its row mean,
    so rows sum to zero.
    """
    counts = np.asarray(counts, dtype=float)
    if pseudocount <= 0:
        raise DataError(f"pseudocount must be positive, got {pseudocount}")
    if (counts < 0).any():
        r, c = np.argwhere(counts < 0)[0]
        raise DataError(f"negative count at ({r},{c})")
    logs = np.log(counts + pseudocount)
    return logs - logs.mean(axis=1, keepdims=True)


def prevalence_filter(counts, threshold) -> np.ndarray:
    """Indices of columns present (count > 0) in at least ``threshold`` of samples."""
    counts = np.asarray(counts, dtype=float)
    if not 0.0 <= threshold <= 1.0:
        raise DataError(f"threshold must be in [0,1], got {threshold}")
    prevalence = (counts > 0).mean(axis=0)
    return np.flatnonzero(prevalence >= threshold)


def abundance_filter(clr_matrix, min_mean=-math.inf) -> np.ndarray:
    """Indices of columns whose mean transformed abundance is >= ``min_mean``."""
    clr_matrix = np.asarray(clr_matrix, dtype=float)
    _check_finite("clr_matrix", clr_matrix)
    return np.flatnonzero(clr_matrix.mean(axis=0) >= min_mean)
