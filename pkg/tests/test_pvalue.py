import numpy as np
import pytest

from simcal import (
    Dataset,
    EmpiricalPValue,
    Estimand,
    Family,
    PValueVariant,
    SimulationFailedError,
    empirical_p_value,
    naive_p_value,
)
from simcal.errors import NumericalError
from simcal.lasso import DEFAULT_CONFIG
from simcal.pvalue import _ReplicateRunner, count_exceedances, simulated_entry_lambdas

from conftest import make_binary, make_linear, make_poisson


class TestFromCounts:
    def test_plain_and_plus_arithmetic(self):
        plain = EmpiricalPValue.from_counts(4, 100, PValueVariant.PLAIN, 1.0,
                                            Estimand.CONDITIONAL)
        plus = EmpiricalPValue.from_counts(4, 100, PValueVariant.PLUS, 1.0,
                                           Estimand.CONDITIONAL)
        assert plain.value == pytest.approx(0.04)
        assert plus.value == pytest.approx(5 / 101)

    def test_plus_exceeds_plain_by_known_gap(self):
        for c in (0, 3, 10, 20):
            n = 20
            plain = EmpiricalPValue.from_counts(c, n, PValueVariant.PLAIN, 1.0,
                                                Estimand.CONDITIONAL)
            plus = EmpiricalPValue.from_counts(c, n, PValueVariant.PLUS, 1.0,
                                               Estimand.CONDITIONAL)
            assert plus.value - plain.value == pytest.approx(
                (n - c) / (n * (n + 1))
            )
            assert plus.value >= plain.value


class TestCountExceedances:
    def test_strict_and_tied_values(self):
        sims = np.array([0.5, 1.0, 1.5])
        assert count_exceedances(1.0, sims) == 2

    def test_near_ties_count_within_slack(self):
        lam = 0.7
        sims = np.array([lam * (1 - 1e-10), lam * (1 - 1e-6)])
        assert count_exceedances(lam, sims) == 1


class TestEmpiricalPValue:
    def test_zero_observed_lambda_gives_one(self):
        gen = np.random.default_rng(0)
        X = gen.normal(size=(30, 4))
        y = gen.normal(size=30)
        Q = np.linalg.qr(np.column_stack([np.ones(30), X]))[0]
        y = y - Q @ (Q.T @ y)  # observed entry lambda is float dust
        ds = Dataset(X=X, y=y, family=Family.LINEAR)
        pv = empirical_p_value(ds, (), 10, seed=1)
        assert pv.value == 1.0

    def test_deterministic_given_seed(self):
        ds = make_linear(seed=1)
        a = empirical_p_value(ds, (0,), 15, seed=42)
        b = empirical_p_value(ds, (0,), 15, seed=42)
        assert a.exceed_count == b.exceed_count
        assert a.lambda_sims == b.lambda_sims

    def test_jobs_do_not_change_result(self):
        ds = make_linear(seed=2)
        a = empirical_p_value(ds, (0,), 12, seed=9, n_jobs=1)
        b = empirical_p_value(ds, (0,), 12, seed=9, n_jobs=3)
        assert a.lambda_sims == b.lambda_sims

    def test_estimand_by_family(self):
        assert empirical_p_value(make_linear(seed=3), (0,), 5,
                                 seed=0).estimand is Estimand.CONDITIONAL
        assert empirical_p_value(make_binary(seed=3), (0,), 5,
                                 seed=0).estimand is Estimand.APPROX_CONDITIONAL
        assert empirical_p_value(make_poisson(seed=3), (0,), 5,
                                 seed=0).estimand is Estimand.APPROX_CONDITIONAL

    def test_invalid_n_rejected(self):
        with pytest.raises(ValueError):
            empirical_p_value(make_linear(seed=4), (0,), 0, seed=0)

    def test_signal_detected_with_small_p(self):
        ds = make_linear(n=100, p=6, seed=5, signal=(3.0,))
        pv = empirical_p_value(ds, (), 40, seed=6)
        assert pv.value <= 0.05


class TestNaivePValue:
    def test_observed_lambda_matches_calibrated_run(self):
        ds = make_linear(seed=7)
        a = empirical_p_value(ds, (0,), 10, seed=3)
        b = naive_p_value(ds, (0,), 10, seed=3)
        assert a.lambda_obs == b.lambda_obs
        assert b.variant is PValueVariant.NAIVE_UNCALIBRATED
        assert b.estimand is Estimand.UNCONDITIONAL

    def test_naive_variant_dispatch(self):
        ds = make_linear(seed=8)
        via_variant = empirical_p_value(
            ds, (0,), 10, PValueVariant.NAIVE_UNCALIBRATED, seed=4
        )
        direct = naive_p_value(ds, (0,), 10, seed=4)
        assert via_variant.lambda_sims == direct.lambda_sims


class TestReplicateRunner:
    def test_failure_carries_replicate_index(self):
        ds = make_linear(seed=9)
        runner = _ReplicateRunner(ds, (0,), DEFAULT_CONFIG, calibrate=True)

        class Boom(_ReplicateRunner):
            def __init__(self):
                self.__dict__.update(runner.__dict__)

            def one(self, entropy):
                raise NumericalError("forced failure")

        with pytest.raises(SimulationFailedError) as exc:
            Boom().run([(7, np.random.SeedSequence(0))])
        assert exc.value.replicate == 7

    def test_shared_runner_used_by_sequential_caller(self):
        ds = make_linear(seed=10)
        runner = _ReplicateRunner(ds, (0,), DEFAULT_CONFIG, calibrate=True)
        lam_obs, sims = simulated_entry_lambdas(ds, (0,), 8, 5, runner=runner)
        lam_obs2, sims2 = simulated_entry_lambdas(ds, (0,), 8, 5)
        assert lam_obs == lam_obs2
        assert np.array_equal(sims, sims2)
