import numpy as np
import pytest
from hypothesis import given, strategies as st

from distal.interference import (
    DistalSpec,
    McConfig,
    dissimilarity,
    distal_interference_mc,
    perturbation_mc,
    run_interference_trials,
    write_reports_csv,
)
from distal.models import InitSpec, LookupTableModel, init_model
from oracles import lookup_l1_distance

unit_vec = st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=4)


def _lookup_factory(z):
    def factory(seed: int):
        return init_model(InitSpec("random_uniform", seed), {"kind": "lookup", "n": 2, "z": z})

    return factory


def _spline_factory(z):
    def factory(seed: int):
        return init_model(
            InitSpec("random_uniform", seed), {"kind": "spline_ann", "n": 2, "z": z}
        )

    return factory


def _abel_factory(z, big_k):
    def factory(seed: int):
        return init_model(
            InitSpec("random_uniform", seed),
            {"kind": "abel", "n": 2, "z": z, "big_k": big_k},
        )

    return factory


class TestDissimilarity:
    @given(x=unit_vec)
    def test_identical_points(self, x):
        assert dissimilarity(x, x, "max_abs") == 0.0
        assert dissimilarity(x, x, "min_abs") == 0.0

    def test_hand_case(self):
        x, v = [0.0, 0.5], [0.3, 0.6]
        assert dissimilarity(x, v, "max_abs") == pytest.approx(0.3)
        assert dissimilarity(x, v, "min_abs") == pytest.approx(0.1)

    @given(x=st.floats(0, 1, allow_nan=False), v=st.floats(0, 1, allow_nan=False))
    def test_one_dimension_kinds_coincide(self, x, v):
        assert dissimilarity([x], [v], "max_abs") == dissimilarity([x], [v], "min_abs")

    @given(x=unit_vec)
    def test_symmetry(self, x):
        v = [1.0 - xi for xi in x]
        for kind in ("max_abs", "min_abs"):
            assert dissimilarity(x, v, kind) == dissimilarity(v, x, kind)

    def test_min_never_exceeds_max(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x, v = rng.uniform(size=3), rng.uniform(size=3)
            assert dissimilarity(x, v, "min_abs") <= dissimilarity(x, v, "max_abs")

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            dissimilarity([0.1], [0.1, 0.2], "max_abs")

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown dissimilarity kind"):
            dissimilarity([0.1], [0.2], "euclid")


class TestDistalSpec:
    def test_delta_must_be_positive(self):
        with pytest.raises(ValueError, match="delta"):
            DistalSpec("max_abs", 0.0)

    def test_kind_checked(self):
        with pytest.raises(ValueError, match="unknown dissimilarity kind"):
            DistalSpec("l2", 0.1)


class TestPerturbationMc:
    def test_identical_models_give_exact_zero(self):
        m = LookupTableModel(2, 3, table=np.arange(9.0))
        X = np.random.default_rng(0).uniform(size=(500, 2))
        assert perturbation_mc(m, m.clone(), X) == 0.0

    def test_constant_shift_integrates_to_shift(self):
        before = LookupTableModel(1, 1, table=[2.0])
        after = LookupTableModel(1, 1, table=[3.0])
        X = np.random.default_rng(1).uniform(size=(100, 1))
        assert perturbation_mc(before, after, X) == 1.0

    def test_against_closed_form_within_three_standard_errors(self):
        rng = np.random.default_rng(7)
        t1 = rng.standard_normal(4)
        t2 = t1 + rng.standard_normal(4)
        before = LookupTableModel(1, 4, table=t1)
        after = LookupTableModel(1, 4, table=t2)
        X = rng.uniform(size=(100_000, 1))
        diff = np.abs(after.forward_batch(X) - before.forward_batch(X))
        se = diff.std(ddof=1) / np.sqrt(diff.size)
        exact = lookup_l1_distance(t1, t2, z=4, n=1)
        assert abs(perturbation_mc(before, after, X) - exact) <= 3.0 * se

    def test_empty_sample_set_rejected(self):
        m = LookupTableModel(1, 1)
        with pytest.raises(ValueError, match="empty sample set"):
            perturbation_mc(m, m.clone(), np.zeros((0, 1)))

    def test_model_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            perturbation_mc(LookupTableModel(1, 2), LookupTableModel(2, 2), np.zeros((4, 1)))


class TestDistalInterferenceMc:
    def test_identical_models_exact_zero(self):
        m = LookupTableModel(2, 4, table=np.arange(16.0))
        X = np.random.default_rng(3).uniform(size=(300, 2))
        assert distal_interference_mc(m, m.clone(), [0.5, 0.5], DistalSpec("max_abs", 0.1), X) == 0.0

    def test_membership_is_strict_inequality(self):
        before = LookupTableModel(1, 1, table=[0.0])
        after = LookupTableModel(1, 1, table=[1.0])
        v = np.array([0.25])
        X = np.array([[0.75]])  # dissimilarity exactly 0.5: not distal
        assert distal_interference_mc(before, after, v, DistalSpec("max_abs", 0.5), X) == 0.0
        assert (
            distal_interference_mc(before, after, v, DistalSpec("max_abs", 0.49), X) == 1.0
        )

    def test_uses_full_domain_measure(self):
        before = LookupTableModel(1, 1, table=[0.0])
        after = LookupTableModel(1, 1, table=[1.0])
        X = np.array([[0.1], [0.5], [0.9]])
        # only x=0.9 is distal to v=0.1 at delta 0.5; estimate is 1/3, not 1
        value = distal_interference_mc(before, after, [0.1], DistalSpec("max_abs", 0.5), X)
        assert value == pytest.approx(1.0 / 3.0)

    def test_no_distal_samples_returns_zero(self):
        before = LookupTableModel(1, 1, table=[0.0])
        after = LookupTableModel(1, 1, table=[1.0])
        X = np.random.default_rng(0).uniform(size=(50, 1))
        assert distal_interference_mc(before, after, [0.5], DistalSpec("max_abs", 0.9), X) == 0.0


SPECS = [DistalSpec(k, d) for k in ("max_abs", "min_abs") for d in (0.1, 0.05, 0.01)]
CFG = McConfig(n_samples=4000, n_trials=4, sample_seed=21, trial_seed=22)


@pytest.fixture(scope="module")
def lookup_report():
    return run_interference_trials(_lookup_factory(20), CFG, SPECS, label="lookup")


@pytest.fixture(scope="module")
def spline_report():
    return run_interference_trials(_spline_factory(20), CFG, SPECS, label="spline_ann")


@pytest.fixture(scope="module")
def abel_report():
    return run_interference_trials(_abel_factory(20, 3), CFG, SPECS, label="abel")


class TestTrialProtocol:
    SPECS = SPECS
    CFG = CFG

    def test_lookup_max_distal_exact_zero_beyond_threshold(self, lookup_report):
        for delta in (0.1, 0.05):
            cell = lookup_report.interference[("max_abs", delta)]
            assert cell.mean == 0.0 and cell.std == 0.0
        assert lookup_report.interference[("max_abs", 0.01)].mean > 0.0

    def test_spline_min_distal_exact_zero_beyond_threshold(self, spline_report):
        for delta in (0.1, 0.05):
            cell = spline_report.interference[("min_abs", delta)]
            assert cell.mean == 0.0 and cell.std == 0.0
        assert spline_report.interference[("min_abs", 0.01)].mean > 0.0

    def test_abel_min_distal_exact_zero_beyond_threshold(self, abel_report):
        for delta in (0.1, 0.05):
            cell = abel_report.interference[("min_abs", delta)]
            assert cell.mean == 0.0 and cell.std == 0.0

    def test_interference_monotone_in_delta_per_trial(self, spline_report):
        for kind in ("max_abs", "min_abs"):
            small = spline_report.interference_per_trial[(kind, 0.01)]
            mid = spline_report.interference_per_trial[(kind, 0.05)]
            large = spline_report.interference_per_trial[(kind, 0.1)]
            assert np.all(small >= mid) and np.all(mid >= large)

    def test_min_kind_never_exceeds_max_kind_per_trial(self, lookup_report, spline_report, abel_report):
        for report in (lookup_report, spline_report, abel_report):
            for delta in (0.1, 0.05, 0.01):
                assert np.all(
                    report.interference_per_trial[("min_abs", delta)]
                    <= report.interference_per_trial[("max_abs", delta)]
                )

    def test_perturbation_dominates_every_cell_per_trial(self, spline_report):
        for values in spline_report.interference_per_trial.values():
            assert np.all(spline_report.perturbation_per_trial >= values)

    def test_trial_data_shared_across_model_families(self, lookup_report, spline_report):
        # same config seeds: both reports saw the same v, target, and samples
        assert lookup_report.trials == spline_report.trials

    def test_deterministic_repeat(self):
        a = run_interference_trials(_lookup_factory(20), self.CFG, self.SPECS[:2], label="lookup")
        b = run_interference_trials(_lookup_factory(20), self.CFG, self.SPECS[:2], label="lookup")
        assert np.all(a.perturbation_per_trial == b.perturbation_per_trial)
        assert a.interference == b.interference

    def test_empty_distal_set_is_flagged(self):
        cfg = McConfig(n_samples=30, n_trials=2, sample_seed=5, trial_seed=6)

        def tiny_factory(seed: int):
            return init_model(InitSpec("random_uniform", seed), {"kind": "lookup", "n": 1, "z": 2})

        report = run_interference_trials(tiny_factory, cfg, [DistalSpec("max_abs", 0.999)], label="tiny")
        cell = report.interference[("max_abs", 0.999)]
        assert cell.empty_trials >= 1
        assert cell.empty


class TestReportCsv:
    def test_exact_zero_cells_written_as_zero(self, tmp_path):
        cfg = McConfig(n_samples=2000, n_trials=2, sample_seed=1, trial_seed=2)
        report = run_interference_trials(
            _lookup_factory(20), cfg, [DistalSpec("max_abs", 0.1)], label="lookup"
        )
        path = tmp_path / "interference.csv"
        write_reports_csv([report], path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "model,metric,kind,delta,mean,std"
        assert lines[1].startswith("lookup,perturbation,,,")
        assert lines[2] == "lookup,distal_interference,max_abs,0.1,0.0,0.0"

    def test_byte_identical_across_runs(self, tmp_path):
        cfg = McConfig(n_samples=1000, n_trials=2, sample_seed=3, trial_seed=4)
        payloads = []
        for name in ("a.csv", "b.csv"):
            report = run_interference_trials(
                _spline_factory(10), cfg, [DistalSpec("min_abs", 0.2)], label="spline_ann"
            )
            write_reports_csv([report], tmp_path / name)
            payloads.append((tmp_path / name).read_bytes())
        assert payloads[0] == payloads[1]
