"""Tests for twin experiments: truth, synthetic observations, runs and scoring."""

import dataclasses

import numpy as np
import pytest

from glacier_da.core.errors import ValidationError
from glacier_da.core.experiments import best_schedule
from glacier_da.core.models import TWIN_MODEL_NOISE_COV, ObservationSchedule, TwinSetup
from glacier_da.core.osse import (
    RUNRECORD_COLUMNS,
    make_truth,
    mean_square_difference,
    run_setup,
    run_twin,
    square_difference,
    synthesize_observations,
)


class TestDefaultSetup:
    def test_constants_shared(self, coarse_setup: TwinSetup) -> None:
        assert coarse_setup.p_true.calibrated
        assert coarse_setup.p_inaccurate.gamma == coarse_setup.p_true.gamma
        assert coarse_setup.p_inaccurate.omega == coarse_setup.p_true.omega
        assert coarse_setup.p_inaccurate.smb_o == 0.35

    def test_defaults(self, coarse_setup: TwinSetup) -> None:
        assert coarse_setup.filter.N == 10
        assert coarse_setup.window == (0.0, 2300.0)
        assert coarse_setup.spread == 0.02
        assert coarse_setup.filter.inflation == 1.0
        assert coarse_setup.filter.model_noise_cov == TWIN_MODEL_NOISE_COV

    def test_model_noise_keeps_length_spread(self, short_setup: TwinSetup) -> None:
        times = tuple(float(t) for t in range(0, 400, 19))
        noisy = run_setup(short_setup, times).frame
        quiet = run_setup(short_setup.with_filter(model_noise_cov=None), times).frame
        late = noisy["t"] >= 200.0
        assert noisy.loc[late, "P_LL"].mean() > 2.0 * quiet.loc[late, "P_LL"].mean()
        assert noisy.loc[late, "P_HH"].mean() > 0.0


class TestSyntheticObservations:
    def test_noise_model(self, short_setup: TwinSetup) -> None:
        truth = make_truth(short_setup.p_true, short_setup.window, short_setup.dt)
        sched = ObservationSchedule(times=(0.0, 100.0), abs_floor=(50.0, 0.0))
        obs = synthesize_observations(truth, sched, seed=0)
        assert [o.t for o in obs] == [0.0, 100.0]
        x = truth.state_at(0.0)
        sigma = np.sqrt(np.diag(obs[0].R))
        assert sigma[0] == pytest.approx(50.0)
        assert sigma[1] == pytest.approx(0.01 * x[1])
        np.testing.assert_array_equal(obs[0].Hop, np.eye(2))

    def test_reproducible_per_seed(self, short_setup: TwinSetup) -> None:
        truth = make_truth(short_setup.p_true, short_setup.window, short_setup.dt)
        sched = short_setup.schedule([0.0, 50.0])
        a = synthesize_observations(truth, sched, seed=1)
        b = synthesize_observations(truth, sched, seed=1)
        c = synthesize_observations(truth, sched, seed=2)
        np.testing.assert_array_equal(a[1].y, b[1].y)
        assert not np.allclose(a[1].y, c[1].y, rtol=0.0, atol=1e-9)


class TestRunTwin:
    def test_record_layout(self, short_setup: TwinSetup) -> None:
        times = (0.0, 19.0, 38.0)
        record = run_setup(short_setup, times)
        assert len(record.frame) == 401
        assert record.n_analyses == 3
        np.testing.assert_array_equal(record.analysis_times, times)
        obs = record.frame["H_obs"]
        assert obs.notna().sum() == 3
        assert np.isnan(obs.iloc[1])

    def test_perfect_twin_has_zero_error(self, short_setup: TwinSetup) -> None:
        setup = dataclasses.replace(
            short_setup, p_inaccurate=short_setup.p_true, spread=0.0
        ).with_filter(N=2, model_noise_cov=None)
        record = run_setup(setup, (0.0, 100.0, 200.0))
        metrics = mean_square_difference(record)
        assert metrics.msd_H == pytest.approx(0.0, abs=1e-20)
        assert metrics.msd_L == pytest.approx(0.0, abs=1e-20)

    def test_background_is_free_inaccurate_run(self, short_setup: TwinSetup) -> None:
        record = run_setup(short_setup, (0.0,))
        assert record.frame["H_background"].iloc[0] == short_setup.p_inaccurate.H0
        assert record.frame["L_background"].iloc[-1] != record.frame["L_truth"].iloc[-1]

    def test_reproducible(self, short_setup: TwinSetup) -> None:
        a = run_setup(short_setup, (0.0, 19.0, 38.0))
        b = run_setup(short_setup, (0.0, 19.0, 38.0))
        assert a.frame.equals(b.frame)

    def test_seed_changes_run(self, short_setup: TwinSetup) -> None:
        a = run_setup(short_setup, (0.0, 19.0))
        b = run_setup(short_setup.with_filter(seed=1), (0.0, 19.0))
        assert not np.allclose(a.analysis(), b.analysis(), rtol=0.0, atol=1e-9)

    def test_schedule_outside_window_raises(self, short_setup: TwinSetup) -> None:
        with pytest.raises(ValidationError, match="run window"):
            run_setup(short_setup, (0.0, 500.0))

    def test_off_grid_schedule_raises(self, short_setup: TwinSetup) -> None:
        with pytest.raises(ValidationError, match="not on the model grid"):
            run_setup(short_setup, (0.5,))

    def test_keep_members(self, short_setup: TwinSetup) -> None:
        record = run_setup(short_setup, (0.0,), keep_members=True)
        assert record.members is not None
        assert record.members.shape == (401, 10, 2)

    def test_csv_frame_display_units(self, short_setup: TwinSetup) -> None:
        record = run_setup(short_setup, (0.0, 19.0))
        csv = record.to_csv_frame()
        assert list(csv.columns) == RUNRECORD_COLUMNS
        assert csv["H_truth"].iloc[0] == pytest.approx(2.18)
        assert csv["L_truth"].iloc[0] == pytest.approx(4.44)
        assert csv["P_HH"].iloc[0] == pytest.approx(record.frame["P_HH"].iloc[0] / 1e6)
        raw = record.to_csv_frame(display_units=False)
        assert raw["H_truth"].iloc[0] == pytest.approx(2180.0)

    def test_direct_call_matches_setup(self, short_setup: TwinSetup) -> None:
        times = (0.0, 19.0)
        a = run_setup(short_setup, times)
        b = run_twin(
            short_setup.p_true,
            short_setup.p_inaccurate,
            short_setup.schedule(times),
            short_setup.filter,
            short_setup.window,
            short_setup.dt,
        )
        assert a.frame.equals(b.frame)


class TestScoring:
    def test_square_difference_at_start(self, short_setup: TwinSetup) -> None:
        record = run_setup(short_setup, ())
        sd = square_difference(record, 0.0)
        mean0 = record.analysis()[0] / np.array([1e3, 1e5])
        expected = (np.array([2.18, 4.44]) - mean0) ** 2
        np.testing.assert_allclose(sd, expected, rtol=1e-9)

    def test_msd_window_is_inclusive(self, short_setup: TwinSetup) -> None:
        record = run_setup(short_setup, ())
        single = mean_square_difference(record, (100.0, 100.0))
        np.testing.assert_allclose(single.as_array(), square_difference(record, 100.0))

    def test_empty_window_raises(self, short_setup: TwinSetup) -> None:
        record = run_setup(short_setup, ())
        with pytest.raises(ValidationError, match="no recorded times"):
            mean_square_difference(record, (1000.0, 1100.0))

    def test_time_not_in_record_raises(self, short_setup: TwinSetup) -> None:
        record = run_setup(short_setup, ())
        with pytest.raises(ValidationError, match="not in the run record"):
            record.row(0.5)


@pytest.mark.slow
class TestAssimilationSkill:
    def test_best_scheme_beats_free_run(self, coarse_setup: TwinSetup) -> None:
        free = mean_square_difference(run_setup(coarse_setup, ()))
        best = mean_square_difference(run_setup(coarse_setup, best_schedule()))
        assert best.msd_H < free.msd_H
        assert best.msd_L < free.msd_L

    def test_diagnostics_along_analysis(self, coarse_setup: TwinSetup) -> None:
        record = run_setup(coarse_setup, best_schedule())
        diag = record.diagnostics()
        assert len(diag) == 2301
        assert np.all(np.isfinite(diag.Q)) and np.all(np.isfinite(diag.Q_g))
