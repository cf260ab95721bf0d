import math
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irs_harq import cli
from irs_harq.analysis import OutageQuery, db_to_linear, snr_gain_db
from irs_harq.channel_model import SystemConfig, avg_snr
from irs_harq.config import (
    DEFAULT_GRIDS,
    ConfigError,
    McSettings,
    SweepSpec,
    dump_config,
    parse_config,
)
from irs_harq.errors import ConvergenceError
from irs_harq.sweep import (
    GAIN_COLUMNS,
    SWEEP_COLUMNS,
    VALIDATE_COLUMNS,
    format_csv,
    gain_table,
    run_sweep,
    validate,
)


def spec_of(text):
    return parse_config(text)


class TestParse:
    def test_minimal_defaults(self):
        spec = parse_config("axis: rounds\n")
        assert spec.base == SystemConfig(64)
        assert spec.grid == DEFAULT_GRIDS["rounds"]
        assert spec.engines == ("analytic",)
        assert spec.mc.trials == 10**6
        assert spec.mc.seed == 0
        assert spec.mc.shards == (os.cpu_count() or 1)
        assert spec.target_pout == 1e-3
        assert spec.output_path == "results.csv"

    def test_base_only(self):
        spec = parse_config("base:\n  n_reflectors: 16\n  rate: 2\naxis: snr_db\n")
        assert spec.base.n_reflectors == 16 and spec.base.rate == 2.0

    def test_duplicate_grid(self):
        with pytest.raises(ConfigError, match="grid"):
            parse_config("axis: snr_db\ngrid: [0, 2, 2, 4]\n")

    def test_decreasing_grid(self):
        with pytest.raises(ConfigError, match="strictly increasing"):
            parse_config("axis: snr_db\ngrid: [4, 2]\n")

    def test_unknown_key_reports_line(self):
        with pytest.raises(ConfigError, match=r"line 3: base\.n_reflector: unknown key"):
            parse_config("axis: rounds\nbase:\n  n_reflector: 16\n")

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match=r"line 2: seed: unknown key"):
            parse_config("axis: rounds\nseed: 3\n")

    def test_malformed_yaml(self):
        with pytest.raises(ConfigError, match=r"line \d+, column \d+: malformed YAML"):
            parse_config("axis: rounds\ngrid: [1, 2\n")

    @pytest.mark.parametrize(
        "text, match",
        [
            ("grid: [1]\n", "axis: required"),
            ("axis: voltage\n", "axis: must be one of"),
            ("axis: rounds\nengines: []\n", "engines"),
            ("axis: rounds\nengines: [analytic, magic]\n", "unknown engine"),
            ("axis: rounds\nengines: [analytic, analytic]\n", "duplicate"),
            ("axis: rounds\ngrid: [1, 2.5]\n", "expected an integer"),
            ("axis: rounds\nmc: {trials: 10}\n", "mc.trials"),
            ("axis: rounds\nmc: {seed: -1}\n", "mc.seed"),
            ("axis: rounds\nbase: {n_reflectors: 0}\n", "base"),
            ("axis: rounds\ntarget_pout: 1.5\n", "target_pout"),
            ("axis: rounds\nbase: {rate: yes}\n", "expected a number"),
            ("axis: snr_db\ngrid: {start: 0, stop: 4}\n", "range form"),
            ("- 1\n- 2\n", "expected a mapping"),
        ],
    )
    def test_invalid(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(text)

    def test_range_grid(self):
        spec = parse_config("axis: snr_db\ngrid: {start: -10, stop: 30, step: 2}\n")
        assert spec.grid == tuple(float(v) for v in range(-10, 31, 2))

    def test_snr_range_round_trip(self):
        spec = parse_config("axis: snr_db\ngrid: {start: -10, stop: 30, step: 2}\nengines: [analytic, mc_clt]\n")
        assert parse_config(dump_config(spec)) == spec

    @settings(max_examples=60)
    @given(
        st.sampled_from(["snr_db", "pathloss_exp"]),
        st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=8, unique=True),
        st.integers(1, 512),
        st.integers(1, 8),
        st.floats(0.01, 8.0),
        st.integers(0, 2**64 - 1),
        st.floats(1e-9, 0.999),
    )
    def test_round_trip_property(self, axis, grid, n, k, rate, seed, target):
        if axis == "pathloss_exp":
            grid = [abs(g) + 1.0 for g in grid]
        grid = tuple(sorted(set(grid)))
        spec = SweepSpec(
            base=SystemConfig(n, rate=rate, max_rounds=k),
            axis=axis,
            grid=grid,
            engines=("analytic", "asymptotic"),
            mc=McSettings(trials=5000, shards=3, seed=seed),
            target_pout=target,
            output_path="out.csv",
        )
        assert parse_config(dump_config(spec)) == spec


class TestSnrAxis:
    def test_db_spot_checks(self):
        spec = parse_config("axis: snr_db\nbase: {dist_sr: 3, dist_rd: 2, pathloss_exp: 2.5, noise_power: 0.1}\n")
        assert avg_snr(spec.config_at(0.0)).gamma_bar == pytest.approx(1.0, rel=1e-14)
        assert avg_snr(spec.config_at(10.0)).gamma_bar == pytest.approx(10.0, rel=1e-14)
        assert db_to_linear(0.0) == 1.0 and db_to_linear(10.0) == 10.0


class TestSweep:
    def test_rounds_decreasing(self):
        spec = spec_of("axis: rounds\ngrid: [1, 2, 3, 4]\nbase: {n_reflectors: 16, tx_power: 0.01}\n")
        rows = run_sweep(spec)
        assert len(rows) == 4
        p = [r.p_out for r in rows]
        assert all(b < a for a, b in zip(p, p[1:]))
        assert all(r.std_err is None and r.trials is None for r in rows)

    def test_asymptotic_ratio_column(self):
        spec = spec_of(
            "axis: n_reflectors\ngrid: [16, 32, 64, 128, 256]\n"
            "engines: [asymptotic, analytic]\nbase: {max_rounds: 2, tx_power: 100}\n"
        )
        rows = run_sweep(spec)
        assert [r.engine for r in rows[:2]] == ["analytic", "asymptotic"]
        ratios = [r.ratio_to_analytic for r in rows if r.engine == "asymptotic"]
        # fixed SNR: the ratio approaches a constant just below 1, from above
        assert all(0.98 < x < 1.0 for x in ratios)
        assert all(b < a for a, b in zip(ratios, ratios[1:]))

    def test_analytic_vs_clt_within_three_sigma(self):
        spec = spec_of(
            "axis: snr_db\ngrid: [-22, -20, -18]\nengines: [analytic, mc_clt]\n"
            "base: {n_reflectors: 16, max_rounds: 2}\nmc: {trials: 200000, shards: 2, seed: 5}\n"
        )
        rows = run_sweep(spec)
        for a, m in zip(rows[::2], rows[1::2]):
            assert m.engine == "mc_clt" and m.seed == 5 and m.trials == 200000
            assert abs(m.p_out - a.p_out) <= 3 * m.std_err

    def test_header_and_bytes(self):
        text = (
            "axis: snr_db\ngrid: [-20, -18]\nengines: [mc_clt, analytic]\n"
            "base: {n_reflectors: 8}\nmc: {trials: 20000, seed: 9}\n"
        )
        first = format_csv(run_sweep(spec_of(text)), SWEEP_COLUMNS)
        second = format_csv(run_sweep(spec_of(text)), SWEEP_COLUMNS)
        assert first == second
        lines = first.split("\n")
        assert lines[0] == "axis_name,axis_value,engine,p_out,std_err,trials,seed,ratio_to_analytic,error"
        assert "\r" not in first and first.endswith("\n")
        assert len(lines) == 1 + 4 + 1
        assert lines[1].startswith("snr_db,-20.0,analytic,")

    def test_full_precision(self):
        rows = run_sweep(spec_of("axis: snr_db\ngrid: [-20]\nbase: {n_reflectors: 8}\n"))
        cell = format_csv(rows, SWEEP_COLUMNS).split("\n")[1].split(",")[3]
        assert float(cell) == rows[0].p_out

    def test_engine_error_recorded_per_row(self, monkeypatch):
        import irs_harq.sweep as sweep_mod

        def boom(query):
            raise ConvergenceError("series did not converge")

        monkeypatch.setattr(sweep_mod, "outage_probability", boom)
        rows = run_sweep(spec_of("axis: rounds\ngrid: [1, 2]\n"))
        assert all(r.error.startswith("ConvergenceError") and r.p_out is None for r in rows)


class TestValidate:
    def test_clt_passes(self):
        spec = spec_of(
            "axis: rounds\ngrid: [1, 2, 3]\nengines: [analytic, mc_clt]\n"
            "base: {n_reflectors: 8, tx_power: 0.03}\nmc: {trials: 100000, seed: 1}\n"
        )
        rows, ok = validate(spec)
        assert ok
        assert all(r.passed and abs(r.z_score) <= 3 for r in rows)

    def test_exact_small_n_reports_bias(self):
        gb = db_to_linear(snr_gain_db(OutageQuery.at(1.0, 8, 1, 1.0), 1e-2))
        spec = spec_of(
            f"axis: rounds\ngrid: [1]\nengines: [analytic, mc_exact]\n"
            f"base: {{n_reflectors: 8, tx_power: {gb!r}}}\nmc: {{trials: 200000, seed: 2}}\n"
        )
        rows, ok = validate(spec)
        assert not ok
        (row,) = rows
        assert row.bias == row.p_out - row.analytic
        # the Gaussian model overstates the left tail of the element sum at small N
        assert row.bias < -0.5 * row.analytic and row.z_score < -3

    def test_needs_both_engines(self):
        with pytest.raises(ConfigError):
            validate(spec_of("axis: rounds\nengines: [analytic, asymptotic]\n"))

    def test_columns(self):
        assert VALIDATE_COLUMNS[:8] == SWEEP_COLUMNS[:8]
        assert VALIDATE_COLUMNS[8:] == ("analytic", "bias", "z_score", "pass", "error")


class TestGain:
    def test_rounds_gain(self):
        rows = gain_table(spec_of("axis: rounds\ngrid: [1, 2, 3, 4]\nbase: {n_reflectors: 16}\n"))
        assert rows[0].gain_db is None
        gains = [r.gain_db for r in rows[1:]]
        assert all(b < a for a, b in zip(gains, gains[1:]))
        assert all(g > 0 for g in gains)

    def test_rejects_snr_axis(self):
        with pytest.raises(ConfigError):
            gain_table(spec_of("axis: snr_db\n"))


def write(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestCli:
    def test_sweep_ok(self, tmp_path):
        cfg = write(tmp_path, "axis: rounds\ngrid: [1, 2]\nbase: {n_reflectors: 16}\n")
        out = tmp_path / "o.csv"
        assert cli.main(["sweep", "--config", cfg, "--out", str(out)]) == 0
        assert out.read_text().startswith(",".join(SWEEP_COLUMNS) + "\n")

    def test_stdout(self, tmp_path, capsys):
        cfg = write(tmp_path, "axis: rounds\ngrid: [1]\n")
        assert cli.main(["sweep", "--config", cfg, "--out", "-"]) == 0
        assert capsys.readouterr().out.startswith("axis_name,")

    def test_seed_and_trials_override(self, tmp_path):
        cfg = write(tmp_path, "axis: snr_db\ngrid: [-20]\nengines: [mc_clt]\nbase: {n_reflectors: 8}\n")
        out = tmp_path / "o.csv"
        assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--seed", "17", "--trials", "5000", "--quiet"]) == 0
        fields = out.read_text().split("\n")[1].split(",")
        assert fields[5:7] == ["5000", "17"]

    def test_usage_errors(self, tmp_path, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["sweep"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            cli.main(["sweep", "--config", "x", "--trials", "10"])
        assert exc.value.code == 1

    def test_config_errors(self, tmp_path, capsys):
        assert cli.main(["sweep", "--config", str(tmp_path / "missing.yaml")]) == 1
        cfg = write(tmp_path, "axis: rounds\nbogus: 1\n")
        assert cli.main(["sweep", "--config", cfg, "--out", "-"]) == 1
        assert "line 2" in capsys.readouterr().err

    def test_validate_pass(self, tmp_path):
        cfg = write(
            tmp_path,
            "axis: rounds\ngrid: [1, 2]\nengines: [analytic, mc_clt]\n"
            "base: {n_reflectors: 8, tx_power: 0.03}\nmc: {trials: 50000}\n",
        )
        assert cli.main(["validate", "--config", cfg, "--out", str(tmp_path / "v.csv")]) == 0

    def test_validate_fail_exit_2(self, tmp_path, capsys):
        gb = db_to_linear(snr_gain_db(OutageQuery.at(1.0, 8, 1, 1.0), 1e-2))
        cfg = write(
            tmp_path,
            f"axis: rounds\ngrid: [1]\nengines: [analytic, mc_exact]\n"
            f"base: {{n_reflectors: 8, tx_power: {gb!r}}}\nmc: {{trials: 200000}}\n",
        )
        out = tmp_path / "v.csv"
        assert cli.main(["validate", "--config", cfg, "--out", str(out)]) == 2
        header, row = out.read_text().split("\n")[:2]
        cells = dict(zip(header.split(","), row.split(",")))
        assert float(cells["bias"]) < 0 and cells["pass"] == "0"
        assert "FAIL" in capsys.readouterr().err

    def test_validate_without_mc_engine(self, tmp_path):
        cfg = write(tmp_path, "axis: rounds\nengines: [analytic]\n")
        assert cli.main(["validate", "--config", cfg, "--out", str(tmp_path / "v.csv")]) == 1

    def test_numeric_error_exit_3(self, tmp_path, monkeypatch):
        import irs_harq.sweep as sweep_mod

        def boom(query):
            raise ConvergenceError("no convergence")

        monkeypatch.setattr(sweep_mod, "outage_probability", boom)
        cfg = write(tmp_path, "axis: rounds\ngrid: [1]\n")
        out = tmp_path / "o.csv"
        assert cli.main(["sweep", "--config", cfg, "--out", str(out), "--quiet"]) == 3
        assert "ConvergenceError" in out.read_text()

    def test_gain(self, tmp_path):
        cfg = write(tmp_path, "axis: rounds\ngrid: [1, 2, 3]\nbase: {n_reflectors: 16}\n")
        out = tmp_path / "g.csv"
        assert cli.main(["gain", "--config", cfg, "--out", str(out), "--target", "1e-4"]) == 0
        lines = out.read_text().split("\n")
        assert lines[0] == ",".join(GAIN_COLUMNS)
        assert lines[1].split(",")[2] == "0.0001"
        assert math.isfinite(float(lines[2].split(",")[4]))
