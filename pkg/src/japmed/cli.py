"""Command-line surface: preprocess, fit, tune, simulate, check."""

from __future__ import annotations

import csv
import json
import math
import sys

import click
import numpy as np

from japmed import __version__
from japmed._kernel import KERNEL
from japmed.data import (DataError, abundance_filter, clr_transform, load_csv,
                         prevalence_filter)
from japmed.estimator import mediation_effects, model_to_dict
from japmed.initialization import (DEFAULT_C_TR, InitEstimates, Method,
                                   WeightExponents, weight_ratio)
from japmed.simulate import (MethodConfig, SimConfig, fit_with_config,
                             run_monte_carlo, simulate_dataset,
                             write_recovery_csv)
from japmed.solver import (PenaltySpec, fit_outcome,
                           joint_vs_projected_check, kkt_check)
from japmed.tuning import TuningGrid, tune_model, write_tuning_table

EXIT_COMPUTE_ERROR = 1
EXIT_CONFIG_ERROR = 2


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(__version__)
def main():
    """Joint adaptive penalized mediation analysis."""


@main.command()
@click.argument("counts_csv", type=click.Path(exists=True))
@click.argument("out_csv", type=click.Path())
@click.option("--prevalence", default=0.9, show_default=True,
              help="Minimum fraction of samples with a positive count.")
@click.option("--pseudocount", default=1.0, show_default=True)
@click.option("--min-mean", default=5.0, show_default=True,
              help="Minimum mean transformed abundance; pass -inf to disable.")
def preprocess(counts_csv, out_csv, prevalence, pseudocount, min_mean):
    """Prevalence-filter, CLR-transform, and abundance-filter a count table.

    The first CSV column is treated as a sample identifier.
    """
    try:
        with open(counts_csv, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = list(reader)
        ids = [row[0] for row in rows]
        try:
            counts = np.array([[float(v) for v in row[1:]] for row in rows])
        except ValueError as exc:
            raise DataError(f"unparseable count: {exc}") from None
        names = header[1:]

        keep1 = prevalence_filter(counts, prevalence)
        if keep1.size == 0:
            raise DataError("prevalence filter removed every column")
        clr = clr_transform(counts[:, keep1], pseudocount)
        keep2 = abundance_filter(clr, min_mean)
        if keep2.size == 0:
            raise DataError("abundance filter removed every column")
        kept = [names[j] for j in keep1[keep2]]
        out = clr[:, keep2]

        with open(out_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([header[0], *kept])
            for sid, row in zip(ids, out):
                writer.writerow([sid, *(repr(float(v)) for v in row)])
        click.echo(f"columns in: {len(names)}, after prevalence: {keep1.size}, "
                   f"after abundance: {keep2.size}")
    except DataError as exc:
        _fail(EXIT_COMPUTE_ERROR, exc)


def _parse_roles(roles_json, treatment, outcome, mediators, covariates):
    if roles_json:
        with open(roles_json, encoding="utf-8") as fh:
            return json.load(fh)
    if not (treatment and outcome and mediators):
        raise click.UsageError(
            "provide --roles-json or all of --treatment/--outcome/--mediators")
    roles = {treatment: "treatment", outcome: "outcome"}
    roles.update({c.strip(): "mediator" for c in mediators.split(",")})
    if covariates:
        roles.update({c.strip(): "covariate" for c in covariates.split(",")})
    return roles


def _method_config_from_flags(method, tune, gamma_alpha, eta_alpha, gamma_beta,
                              eta_beta, lambda_alpha, lambda_beta, c_tr):
    method = Method(method)
    if tune:
        return MethodConfig(method=method, tune=True, c_tr=c_tr)
    exps = None
    if method != Method.LASSO:
        exps = WeightExponents(gamma_alpha, eta_alpha, gamma_beta, eta_beta)
    return MethodConfig(method=method, tune=False, exponents=exps,
                        lambda_alpha=lambda_alpha, lambda_beta=lambda_beta,
                        c_tr=c_tr)


@main.command()
@click.argument("data_csv", type=click.Path(exists=True))
@click.option("--roles-json", type=click.Path(exists=True))
@click.option("--treatment", help="Treatment column name.")
@click.option("--outcome", help="Outcome column name.")
@click.option("--mediators", help="Comma-separated mediator column names.")
@click.option("--covariates", help="Comma-separated covariate column names.")
@click.option("--method", type=click.Choice(["jap", "al", "lasso"]),
              default="jap", show_default=True)
@click.option("--tune", is_flag=True, help="Tune hyperparameters (VSS + MSE).")
@click.option("--gamma-alpha", default=2.0, show_default=True)
@click.option("--eta-alpha", default=0.5, show_default=True)
@click.option("--gamma-beta", default=2.0, show_default=True)
@click.option("--eta-beta", default=0.5, show_default=True)
@click.option("--lambda-alpha", default=1.0, show_default=True)
@click.option("--lambda-beta", default=math.e ** 3, show_default=True)
@click.option("--c-tr", default=DEFAULT_C_TR, show_default=True)
@click.option("--covariate-penalty", is_flag=True,
              help="l1-penalize non-intercept covariates in the outcome model.")
@click.option("--lambda-covariates", default=0.0, show_default=True)
@click.option("--seed", default=0, show_default=True,
              help="Seed for the tuning fold split.")
@click.option("--out-json", type=click.Path(), default="fit.json",
              show_default=True)
@click.option("--report-csv", type=click.Path(), default=None,
              help="Optional per-mediator effect report.")
@click.option("--contrast", nargs=2, type=float, default=(0.0, 1.0),
              show_default=True, help="Treatment contrast (t, t').")
def fit(data_csv, roles_json, treatment, outcome, mediators, covariates,
        method, tune, gamma_alpha, eta_alpha, gamma_beta, eta_beta,
        lambda_alpha, lambda_beta, c_tr, covariate_penalty, lambda_covariates,
        seed, out_json, report_csv, contrast):
    """Fit one method on a CSV dataset; write the model as JSON."""
    roles = _parse_roles(roles_json, treatment, outcome, mediators, covariates)
    try:
        ds = load_csv(data_csv, roles)
        mc = _method_config_from_flags(method, tune, gamma_alpha, eta_alpha,
                                       gamma_beta, eta_beta, lambda_alpha,
                                       lambda_beta, c_tr)
        if covariate_penalty:
            # re-run the final fit with the covariate block penalized
            from japmed.estimator import baseline_fit, jap_fit

            if mc.tune:
                model = fit_with_config(ds, mc, tuning_seed=seed)
                exps, la, lb = model.exponents, model.lambda_alpha, model.lambda_beta
            else:
                exps, la, lb = mc.exponents, mc.lambda_alpha, mc.lambda_beta
            if mc.method == Method.JAP:
                model = jap_fit(ds, exps, la, lb, c_tr=c_tr,
                                penalize_covariates=True,
                                lambda_covariates=lambda_covariates)
            else:
                model = baseline_fit(ds, mc.method, exps, la, lb, c_tr=c_tr,
                                     penalize_covariates=True,
                                     lambda_covariates=lambda_covariates)
        else:
            model = fit_with_config(ds, mc, tuning_seed=seed)

        payload = model_to_dict(model)
        payload["covariate_penalty"] = covariate_penalty
        with open(out_json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        report = mediation_effects(model, *contrast)
        if report_csv:
            with open(report_csv, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["mediator", "effect", "active"])
                for j, name in enumerate(ds.mediator_names):
                    writer.writerow([name, repr(float(report.effects[j])),
                                     int(j + 1 in model.active)])
        click.echo(f"active mediators: {list(model.active)}")
    except (DataError, ValueError) as exc:
        _fail(EXIT_COMPUTE_ERROR, exc)


@main.command()
@click.argument("data_csv", type=click.Path(exists=True))
@click.option("--roles-json", type=click.Path(exists=True))
@click.option("--treatment")
@click.option("--outcome")
@click.option("--mediators")
@click.option("--covariates")
@click.option("--method", type=click.Choice(["jap", "al", "lasso"]),
              default="jap", show_default=True)
@click.option("--thinned", is_flag=True, help="Use the reduced exponent grid.")
@click.option("--seed", default=0, show_default=True)
@click.option("--out-csv", type=click.Path(), default="tuning.csv",
              show_default=True)
def tune(data_csv, roles_json, treatment, outcome, mediators, covariates,
         method, thinned, seed, out_csv):
    """Run the two-stage hyperparameter search; write the tuning table."""
    roles = _parse_roles(roles_json, treatment, outcome, mediators, covariates)
    try:
        ds = load_csv(data_csv, roles)
        m = Method(method)
        grids = {
            "mediator": (TuningGrid.thinned("mediator") if thinned
                         else TuningGrid.mediator_default()),
            "outcome": (TuningGrid.thinned("outcome") if thinned
                        else TuningGrid.outcome_default()),
        }
        results = {target: tune_model(ds, grid, target, m, seed=seed)
                   for target, grid in grids.items()}
        write_tuning_table(out_csv, results)
        for target, res in results.items():
            g, e, lam = res.chosen
            click.echo(f"{target}: gamma={g} eta={e} lambda={lam:.6g} "
                       f"vss={res.vss_at_chosen:.4f} mse={res.mse_at_chosen:.6g}")
    except (DataError, ValueError) as exc:
        _fail(EXIT_COMPUTE_ERROR, exc)


def _grid_from_spec(spec, target):
    if spec in (None, "thinned"):
        return TuningGrid.thinned(target)
    if spec == "default":
        return (TuningGrid.mediator_default() if target == "mediator"
                else TuningGrid.outcome_default())
    return TuningGrid(
        gamma_values=tuple(spec.get("gamma_values", TuningGrid().gamma_values)),
        eta_values=tuple(spec.get("eta_values", TuningGrid().eta_values)),
        log_lambda_range=tuple(spec.get(
            "log_lambda_range",
            (0.0, 5.0, 0.1) if target == "mediator" else (3.0, 8.0, 0.1))),
        folds=spec.get("folds", 5),
    )


def _load_sim_config(path):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        cells = [SimConfig(**cell) for cell in raw["cells"]]
        methods = {}
        for name, m in raw["methods"].items():
            method = Method(m.get("method", name))
            if m.get("tune", True):
                methods[name] = MethodConfig(
                    method=method, tune=True,
                    mediator_grid=_grid_from_spec(m.get("mediator_grid"),
                                                  "mediator"),
                    outcome_grid=_grid_from_spec(m.get("outcome_grid"),
                                                 "outcome"),
                    c_tr=m.get("c_tr", DEFAULT_C_TR))
            else:
                exps = None
                if method != Method.LASSO:
                    exps = WeightExponents(m["gamma_alpha"], m["eta_alpha"],
                                           m["gamma_beta"], m["eta_beta"])
                methods[name] = MethodConfig(
                    method=method, tune=False, exponents=exps,
                    lambda_alpha=m["lambda_alpha"],
                    lambda_beta=m["lambda_beta"],
                    c_tr=m.get("c_tr", DEFAULT_C_TR))
        return (cells, methods, int(raw["replicates"]),
                int(raw["master_seed"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise click.UsageError(f"invalid simulation config: {exc}")


@main.command()
@click.argument("config_json", type=click.Path(exists=True))
@click.argument("out_csv", type=click.Path())
@click.option("--detail", type=click.Path(), default=None,
              help="JSON-lines per-replicate log (enables --resume).")
@click.option("--resume", is_flag=True)
@click.option("--threads", default=1, show_default=True)
def simulate(config_json, out_csv, detail, resume, threads):
    """Run the Monte-Carlo recovery experiment described by a JSON config."""
    cells, methods, replicates, master_seed = _load_sim_config(config_json)
    try:
        rows = run_monte_carlo(cells, methods, replicates, master_seed,
                               n_jobs=threads, detail_path=detail,
                               resume=resume)
        write_recovery_csv(out_csv, rows)
        for row in rows:
            click.echo(f"{row['method']} n={row['n']} p={row['p']} "
                       f"rho={row['rho']} delta={row['delta']:.4g} -> "
                       f"recovery {row['exact_recovery_rate']:.3f}")
    except ValueError as exc:
        _fail(EXIT_COMPUTE_ERROR, exc)


@main.command()
@click.option("--self-test", is_flag=True, default=False,
              help="Run the oracle suite on seeded random instances.")
@click.option("--seed", default=0, show_default=True)
@click.option("--perturb", is_flag=True,
              help="Negative control: perturb a solution before KKT check.")
def check(self_test, seed, perturb):
    """Diagnostics: KKT oracle, projection equivalence, weight-ratio identity."""
    del self_test  # the oracle suite is the only mode
    rng = np.random.default_rng(seed)
    failures = []

    # KKT stationarity of converged coordinate-descent fits
    worst_kkt = 0.0
    for _ in range(5):
        cfg = SimConfig(n=100, p=6, rho=0.4, delta=0.5,
                        seed=int(rng.integers(2 ** 31)))
        ds, _, _ = simulate_dataset(cfg)
        weights = np.exp(rng.uniform(-2, 1, ds.p))
        pen = PenaltySpec(lam=float(rng.uniform(1, 50)), weights=weights)
        fit_res = fit_outcome(ds, pen)
        beta = fit_res.penalized_coefs.copy()
        if perturb:
            j = int(np.flatnonzero(beta != 0)[0]) if (beta != 0).any() else 0
            beta[j] += 0.1
        worst_kkt = max(worst_kkt, kkt_check(ds, pen, beta))
    click.echo(f"kkt max violation: {worst_kkt:.3e} (tolerance 1e-8)")
    if worst_kkt > 1e-8:
        failures.append("kkt")

    # joint objective vs projected two-step equivalence
    worst_prop = 0.0
    for _ in range(5):
        cfg = SimConfig(n=80, p=6, rho=0.3, delta=0.5,
                        seed=int(rng.integers(2 ** 31)))
        ds, _, _ = simulate_dataset(cfg)
        pen_m = PenaltySpec(lam=2.0, weights=np.ones(ds.p))
        pen_y = PenaltySpec(lam=30.0, weights=np.ones(ds.p))
        worst_prop = max(worst_prop,
                         joint_vs_projected_check(ds, pen_m, pen_y))
    click.echo(f"projection-equivalence max discrepancy: {worst_prop:.3e} "
               "(tolerance 1e-6)")
    if worst_prop > 1e-6:
        failures.append("projection-equivalence")

    # weight-ratio identity
    worst_ratio = 0.0
    for _ in range(10_000):
        a0, b0 = rng.uniform(0.05, 3, 2)
        eta = float(rng.uniform(0.05, 1.25))
        gamma = float(2 * eta + rng.uniform(0.05, 2.0))
        init = InitEstimates(alpha0=np.array([a0]), beta0=np.array([b0]),
                             trunc_alpha=np.array([1e-6]),
                             trunc_beta=np.array([1e-6]), c_tr=5.0)
        exps = WeightExponents(gamma, eta, gamma, eta)
        ra, rb = weight_ratio(init, exps, 1)
        expect_a = 1.0 + a0 ** (gamma - 2 * eta) * b0 ** gamma
        expect_b = 1.0 + b0 ** (gamma - 2 * eta) * a0 ** gamma
        worst_ratio = max(worst_ratio,
                          abs(ra - expect_a) / expect_a,
                          abs(rb - expect_b) / expect_b)
    click.echo(f"weight-ratio identity max relative error: {worst_ratio:.3e} "
               "(tolerance 1e-12)")
    if worst_ratio > 1e-12:
        failures.append("weight-ratio")

    click.echo(f"kernel: {KERNEL}")
    if failures:
        _fail(EXIT_COMPUTE_ERROR, f"failing checks: {', '.join(failures)}")
    click.echo("all checks passed")


if __name__ == "__main__":
    main()
