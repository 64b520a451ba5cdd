"""Scenario catalog, metrics, CSV export and reproducibility."""

from dataclasses import replace

import numpy as np
import pytest

from mfclab.errors import ScenarioError
from mfclab.loop import TraceRecord
from mfclab.scenarios import (CATALOG, CSV_HEADER, build_scenario, evaluate,
                              export_csv, export_summary,
                              load_joystick_script, run_scenario,
                              scenario_names)

EXPECTED_NAMES = {"tank-1", "tank-2", "tank-3", "tank-4", "tank-5",
                  "tank-2-pi", "tank-5-pi", "aero-1", "aero-2", "aero-3",
                  "joy-4", "joy-5", "joy-6", "joy-7", "joy-8", "joy-9"}


def constant_error_trace(e=1.0, n=101, ts=0.1, u=0.0):
    return [TraceRecord(t=k * ts, y=e, y_star=0.0, ydot_star=0.0, u_sent=u,
                        u_applied=u, f_est=0.0, fault=0) for k in range(n)]


class TestCatalog:
    def test_names_complete(self):
        assert set(scenario_names()) == EXPECTED_NAMES

    def test_unknown_name_lists_catalog(self):
        with pytest.raises(ScenarioError, match="tank-1"):
            build_scenario("tank-99")

    def test_tank5_loss(self):
        spec = build_scenario("tank-5")
        assert spec.loss.p_fault1 == spec.loss.p_fault2 == 0.7

    def test_tank2_cuts(self):
        spec = build_scenario("tank-2")
        assert spec.loss.cuts_fault1 == ((140.0, 150.0),)
        assert spec.loss.cuts_fault2 == ((50.0, 60.0),)

    def test_tank_gains_and_cadence(self):
        spec = build_scenario("tank-1")
        assert spec.ulc.alpha == 0.1
        assert spec.ulc.kp == 0.5
        assert spec.ulc.ts == 0.1
        assert spec.duration == 200.0
        assert (spec.ulc.u_min, spec.ulc.u_max) == (0.0, 70.0)

    def test_pi_variants(self):
        spec = build_scenario("tank-5-pi")
        assert spec.controller == "pi"
        assert spec.pi_gains == (29.69, 2.27009)
        assert spec.valve == ((0.0, 30.0),)
        # comparable with the mfc variant: same loss model and seed handling
        assert spec.loss == build_scenario("tank-5").loss
        assert spec.reference == build_scenario("tank-5").reference

    def test_aero_gains_and_cadence(self):
        spec = build_scenario("aero-2")
        assert spec.ulc.alpha == 5.0
        assert spec.ulc.kp == -10.0
        assert spec.ulc.ts == 0.01
        assert spec.duration == 250.0
        assert (spec.loss.p_fault1, spec.loss.p_fault2) == (0.2402, 0.2485)

    def test_joystick_time_constants(self):
        assert build_scenario("joy-4").joystick.T == 4.0
        assert build_scenario("joy-5").joystick.T == 2.0
        assert build_scenario("joy-6").joystick.T == 0.5
        for name in ("joy-7", "joy-8", "joy-9"):
            assert build_scenario(name).joystick.T == 2.0

    def test_spec_text_is_self_describing(self):
        text = build_scenario("joy-8").as_text()
        assert "joystick.T: 2" in text
        assert "loss.p_fault1: 0.2356" in text

    @pytest.mark.parametrize("name", sorted(EXPECTED_NAMES))
    def test_every_scenario_runs_to_completion(self, name):
        spec = build_scenario(name)
        spec = replace(spec, duration=min(spec.duration, 20.0))
        res = run_scenario(spec)
        assert len(res.trace) == round(spec.duration / spec.period)
        assert all(np.isfinite(r.y) for r in res.trace)


class TestEvaluate:
    def test_perfect_tracking(self):
        trace = [TraceRecord(t=k * 0.1, y=2.0, y_star=2.0, ydot_star=0.0,
                             u_sent=1.0, u_applied=1.0, f_est=0.0, fault=0)
                 for k in range(100)]
        m = evaluate(trace, build_scenario("tank-1"))
        assert m.rmse == 0.0
        assert m.iae == 0.0

    def test_iae_constant_error(self):
        # 101 samples spanning exactly 10 s of unit error
        m = evaluate(constant_error_trace(), build_scenario("tank-1"))
        assert m.iae == pytest.approx(10.0, abs=1e-9)
        assert m.rmse == pytest.approx(1.0, abs=1e-12)

    def test_saturation_duty_counting(self):
        trace = constant_error_trace(n=2000, u=10.0)
        for k in range(200):
            trace[k].u_sent = 70.0
        m = evaluate(trace, build_scenario("tank-1"))
        assert m.saturation_duty == pytest.approx(10.0)

    def test_segment_split_and_steady_error(self):
        trace = constant_error_trace(n=100)
        for r in trace[50:]:
            r.y_star = 5.0
        m = evaluate(trace, build_scenario("tank-1"))
        assert len(m.segments) == 2
        assert m.segments[0].y_star == 0.0
        assert m.segments[1].y_star == 5.0
        assert m.segments[1].steady_abs_error == pytest.approx(4.0)

    def test_empty_trace_rejected(self):
        with pytest.raises(ScenarioError):
            evaluate([], build_scenario("tank-1"))

    def test_realized_rates_reported(self):
        res = run_scenario(build_scenario("tank-3"))
        m = evaluate(res.trace, res.spec, res.realized_rates)
        assert abs(m.realized_loss_1 - 30.0) <= 2.0
        assert abs(m.realized_loss_2 - 30.0) <= 2.0


class TestExport:
    def test_csv_shape_and_header(self, tmp_path):
        res = run_scenario(build_scenario("tank-1"))
        path = tmp_path / "trace.csv"
        export_csv(res.trace, path)
        lines = path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 2001

    def test_fault_column_enumeration(self, tmp_path):
        res = run_scenario(build_scenario("tank-5"))
        path = tmp_path / "trace.csv"
        export_csv(res.trace, path)
        faults = {line.split(",")[7]
                  for line in path.read_text().splitlines()[1:]}
        assert faults <= {"0", "1", "2"}

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        export_csv(run_scenario(build_scenario("tank-5"), seed=42).trace, a)
        export_csv(run_scenario(build_scenario("tank-5"), seed=42).trace, b)
        assert a.read_bytes() == b.read_bytes()

    def test_tank_rows_leave_voltages_empty(self, tmp_path):
        path = tmp_path / "trace.csv"
        spec = replace(build_scenario("tank-1"), duration=1.0)
        export_csv(run_scenario(spec).trace, path)
        assert path.read_text().splitlines()[1].endswith(",,")

    def test_aero_rows_carry_voltages(self, tmp_path):
        path = tmp_path / "trace.csv"
        spec = replace(build_scenario("aero-2"), duration=1.0)
        export_csv(run_scenario(spec).trace, path)
        first = path.read_text().splitlines()[1].split(",")
        assert first[8] and first[9]

    def test_summary_key_value_lines(self, tmp_path):
        res = run_scenario(build_scenario("tank-1"))
        m = evaluate(res.trace, res.spec, res.realized_rates)
        path = tmp_path / "summary.txt"
        export_summary(m, path)
        text = path.read_text()
        assert any(line.startswith("rmse=") for line in text.splitlines())
        assert "segment4.saturation_duty_pct=" in text

    def test_unwritable_path_has_context(self, tmp_path):
        res = run_scenario(replace(build_scenario("tank-1"), duration=1.0))
        with pytest.raises(OSError, match="no/such"):
            export_csv(res.trace, tmp_path / "no" / "such" / "dir.csv")


class TestJoystickScript:
    def test_load(self, tmp_path):
        path = tmp_path / "script.csv"
        path.write_text("t,axis\n0,0\n10,0.5\n20,-1\n")
        assert load_joystick_script(path) == ((0.0, 0.0), (10.0, 0.5),
                                              (20.0, -1.0))

    def test_axis_bounds(self, tmp_path):
        path = tmp_path / "script.csv"
        path.write_text("0,1.5\n")
        with pytest.raises(ScenarioError):
            load_joystick_script(path)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "script.csv"
        path.write_text("# nothing\n")
        with pytest.raises(ScenarioError):
            load_joystick_script(path)


class TestComparability:
    def test_mfc_and_pi_share_loss_pattern(self):
        mfc = run_scenario(build_scenario("tank-5"), seed=4)
        pi = run_scenario(build_scenario("tank-5-pi"), seed=4)
        assert [r.fault for r in mfc.trace] == [r.fault for r in pi.trace]
