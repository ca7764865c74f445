import numpy as np
import pytest

from japmed.initialization import Method, WeightExponents, compute_weights, \
    init_estimates
from japmed.projection import ols_summary
from japmed.simulate import SimConfig, simulate_dataset
from japmed.solver import PenaltySpec, fit_mediator, fit_outcome
from japmed.tuning import (TuningGrid, kfold_split, mse_full, selection_kappa,
                           tune_model, vss, write_tuning_table)

from conftest import random_dataset


class TestTuningGrid:
    def test_default_exponent_pairs_constrained(self):
        pairs = TuningGrid().exponent_pairs(Method.JAP)
        assert all(g > 2 * e for g, e in pairs)
        assert (0.75, 0.25) in pairs
        assert (3.0, 1.25) in pairs
        assert pairs == sorted(pairs)

    def test_empty_grid_rejected(self):
        grid = TuningGrid(gamma_values=(0.5,), eta_values=(1.0,))
        with pytest.raises(ValueError, match="admissible"):
            grid.exponent_pairs(Method.JAP)

    def test_adaptive_lasso_iterates_eta_only(self):
        pairs = TuningGrid().exponent_pairs(Method.ADAPTIVE_LASSO)
        assert pairs == [(None, e) for e in TuningGrid().eta_values]

    def test_lasso_single_cell(self):
        assert TuningGrid().exponent_pairs(Method.LASSO) == [(None, None)]

    def test_lambda_grid_exponential(self):
        lams = TuningGrid.outcome_default().lambdas()
        assert lams.size == 51
        np.testing.assert_allclose(lams[0], np.exp(3.0))
        np.testing.assert_allclose(lams[-1], np.exp(8.0))

    def test_invalid_ranges_rejected(self):
        with pytest.raises(ValueError):
            TuningGrid(log_lambda_range=(2.0, 1.0, 0.1))
        with pytest.raises(ValueError):
            TuningGrid(folds=1)


class TestKfoldSplit:
    def test_even_partition(self):
        folds = kfold_split(10, 5, 3)
        assert [len(f) for f in folds] == [2] * 5
        assert sorted(np.concatenate(folds).tolist()) == list(range(10))

    def test_uneven_sizes(self):
        folds = kfold_split(7, 5, 3)
        assert sorted(len(f) for f in folds) == [1, 1, 1, 2, 2]

    def test_deterministic(self):
        a = kfold_split(20, 4, 9)
        b = kfold_split(20, 4, 9)
        for fa, fb in zip(a, b):
            np.testing.assert_array_equal(fa, fb)

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError):
            kfold_split(3, 5, 0)


class TestSelectionKappa:
    def test_perfect_agreement(self):
        assert selection_kappa({1, 2}, {1, 2}, 5) == pytest.approx(1.0)

    def test_hand_value(self):
        assert selection_kappa({1}, {2}, 4) == pytest.approx(-1 / 3)

    def test_both_empty_convention(self):
        assert selection_kappa(set(), set(), 4) == 0.0

    def test_both_full_convention(self):
        assert selection_kappa({1, 2}, {1, 2}, 2) == 0.0

    def test_out_of_range_index(self):
        with pytest.raises(ValueError, match="1..4"):
            selection_kappa({0}, {1}, 4)


class TestVss:
    def test_identical_supports(self):
        assert vss([{1, 2}] * 5, 6) == pytest.approx(1.0)

    def test_alternating_supports(self):
        assert vss([{1}, {2}, {1}, {2}], 4) == pytest.approx(1 / 9)

    def test_two_supports_equal_kappa(self):
        assert vss([{1}, {2}], 4) == pytest.approx(
            selection_kappa({1}, {2}, 4))

    def test_too_few(self):
        with pytest.raises(ValueError):
            vss([{1}], 4)


class TestMseFull:
    def test_exact_fit_zero(self):
        rng = np.random.default_rng(4)
        t = rng.binomial(1, 0.5, 40).astype(float)
        m = np.outer(t, [2.0]) + rng.standard_normal((40, 1))
        from japmed.data import validate_dataset
        ds = validate_dataset(t, m, 3.0 * m[:, 0] + t, None)
        fit = fit_outcome(ds, PenaltySpec(0.0, np.ones(1)))
        assert mse_full(fit, ds, "outcome") < 1e-18

    def test_matches_naive_residuals(self, small_ds):
        fit = fit_outcome(small_ds, PenaltySpec(5.0, np.ones(small_ds.p)))
        d = np.column_stack([small_ds.treatment, small_ds.covariates])
        resid = (small_ds.outcome - small_ds.mediators @ fit.penalized_coefs
                 - d @ fit.unpenalized_coefs)
        assert mse_full(fit, small_ds, "outcome") == pytest.approx(
            float(resid @ resid) / small_ds.n, rel=1e-12)
        fm = fit_mediator(small_ds, PenaltySpec(2.0, np.ones(small_ds.p)))
        resid_m = (small_ds.mediators
                   - np.outer(small_ds.treatment, fm.penalized_coefs)
                   - small_ds.covariates @ fm.unpenalized_coefs)
        assert mse_full(fm, small_ds, "mediator") == pytest.approx(
            float(np.sum(resid_m ** 2)) / (small_ds.n * small_ds.p),
            rel=1e-12)

    def test_unknown_target(self, small_ds):
        fit = fit_mediator(small_ds, PenaltySpec(0.0, np.ones(small_ds.p)))
        with pytest.raises(ValueError):
            mse_full(fit, small_ds, "both")


class TestTuneModel:
    def test_single_cell_grid(self, small_ds):
        grid = TuningGrid(gamma_values=(2.0,), eta_values=(0.5,),
                          log_lambda_range=(1.0, 1.0, 0.1))
        res = tune_model(small_ds, grid, "outcome", Method.JAP, seed=0)
        assert res.chosen == (2.0, 0.5, pytest.approx(np.exp(1.0)))
        assert len(res.table) == 1
        assert res.table[0]["chosen"]

    def test_tie_breaks_to_smallest_lambda(self):
        # a pure-noise response keeps every support empty, so the VSS curve
        # is flat at 0 and the smallest grid lambda must win
        ds = random_dataset(200, 3, seed=15)
        rng = np.random.default_rng(99)
        from japmed.data import validate_dataset
        noise = validate_dataset(ds.treatment, rng.standard_normal((200, 3)),
                                 rng.standard_normal(200), None)
        grid = TuningGrid(gamma_values=(2.0,), eta_values=(0.5,),
                          log_lambda_range=(6.0, 8.0, 0.5))
        res = tune_model(noise, grid, "outcome", Method.JAP, seed=1)
        assert res.chosen[2] == pytest.approx(np.exp(6.0))
        assert res.vss_at_chosen == 0.0

    def test_simulated_instance_recovers_truth(self):
        cfg = SimConfig(n=1000, p=6, rho=0.0, delta=0.5, seed=3)
        ds, _, truth = simulate_dataset(cfg)
        res_m = tune_model(ds, TuningGrid.thinned("mediator"), "mediator",
                           Method.JAP, seed=3)
        res_y = tune_model(ds, TuningGrid.thinned("outcome"), "outcome",
                           Method.JAP, seed=3)
        exps = WeightExponents(res_m.chosen[0], res_m.chosen[1],
                               res_y.chosen[0], res_y.chosen[1])
        init = init_estimates(ols_summary(ds))
        w = compute_weights(init, exps, Method.JAP)
        fm = fit_mediator(ds, PenaltySpec(res_m.chosen[2], w.w_alpha))
        fy = fit_outcome(ds, PenaltySpec(res_y.chosen[2], w.w_beta))
        est = set((np.flatnonzero((fm.penalized_coefs != 0)
                                  & (fy.penalized_coefs != 0)) + 1).tolist())
        assert est == set(truth)

    def test_deterministic_given_seed(self, small_ds):
        grid = TuningGrid(gamma_values=(1.0, 2.0), eta_values=(0.25,),
                          log_lambda_range=(2.0, 4.0, 0.5))
        r1 = tune_model(small_ds, grid, "outcome", Method.JAP, seed=12)
        r2 = tune_model(small_ds, grid, "outcome", Method.JAP, seed=12)
        assert r1.chosen == r2.chosen
        assert r1.table == r2.table

    def test_chosen_minimizes_mse(self, small_ds):
        grid = TuningGrid(gamma_values=(1.0, 2.0, 3.0), eta_values=(0.25,),
                          log_lambda_range=(2.0, 4.0, 0.5))
        res = tune_model(small_ds, grid, "outcome", Method.JAP, seed=2)
        assert res.mse_at_chosen == min(r["mse"] for r in res.table)


def test_write_tuning_table(tmp_path, small_ds):
    grid = TuningGrid(gamma_values=(2.0,), eta_values=(0.5,),
                      log_lambda_range=(2.0, 3.0, 0.5))
    res = tune_model(small_ds, grid, "outcome", Method.JAP, seed=0)
    path = tmp_path / "table.csv"
    write_tuning_table(path, {"outcome": res})
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "model,gamma,eta,lambda,vss,mse,chosen"
    assert len(lines) == 2
    assert lines[1].startswith("outcome,2.0,0.5,")
