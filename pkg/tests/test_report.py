"""Report writers: row layout, format variants, figure files."""

import numpy as np

from cobit.blindness import builtin_strategies, run_blindness_audit, score_strategies
from cobit.blindness import generate_observations
from cobit.noise import (
    EstimateWithError,
    ExperimentConfig,
    NoiseModel,
    SuccessEstimate,
    estimate_success,
    stability_series,
)
from cobit.protocol import RoundConfig
from cobit.report import (
    grand_mean,
    render_stability,
    render_truth_table,
    truth_table_rows,
    write_blindness,
    write_circuit_sweep,
    write_stability,
    write_truth_table,
)


def _table(n=1000):
    rng = np.random.default_rng(0)
    cfg = ExperimentConfig(noise=NoiseModel(plate_jitter_sigma=0.05))
    return {
        (a, b): estimate_success(a, b, cfg, n, rng) for a in (0, 1) for b in (0, 1)
    }


def _synthetic_estimate(p, n):
    e = EstimateWithError(p, 0.01, n)
    return SuccessEstimate(e, (e, e), n, n)


class TestTruthTable:
    def test_rows_cover_all_pads(self):
        rows = truth_table_rows(_table())
        assert len(rows) == 8
        assert [(a, b, r) for a, b, r, *_ in rows] == [
            (a, b, r) for a in (0, 1) for b in (0, 1) for r in (0, 1)
        ]

    def test_csv_and_txt(self, tmp_path):
        table = _table()
        csv = tmp_path / "t.csv"
        txt = tmp_path / "t.txt"
        write_truth_table(csv, table, "csv")
        write_truth_table(txt, table, "txt")
        lines = csv.read_text().splitlines()
        assert lines[0] == "a,b,r,success,stderr,n_conclusive"
        assert len(lines) == 9
        assert len(txt.read_text().splitlines()) == 9

    def test_grand_mean_weighted(self):
        table = {
            (0, 0): _synthetic_estimate(1.0, 100),
            (0, 1): _synthetic_estimate(0.5, 300),
        }
        assert grand_mean(table) == (1.0 * 100 + 0.5 * 300) / 400

    def test_figure_written(self, tmp_path):
        out = tmp_path / "t.png"
        render_truth_table(out, _table())
        assert out.stat().st_size > 1000
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestStability:
    def test_csv_layout_and_figure(self, tmp_path):
        series = stability_series(
            ExperimentConfig(), duration_min=30.0, n_points=3, n_trials=400
        )
        out = tmp_path / "s.csv"
        write_stability(out, series, "csv")
        lines = out.read_text().splitlines()
        assert lines[0] == "t_min,success,stderr,n_conclusive"
        assert lines[1].startswith("0,1,")
        write_stability(tmp_path / "s.txt", series, "txt")
        png = tmp_path / "s.png"
        render_stability(png, series)
        assert png.stat().st_size > 1000


class TestBlindness:
    def test_csv_has_verdict_and_strategies(self, tmp_path):
        report = run_blindness_audit()
        obs = generate_observations(50, RoundConfig(), np.random.default_rng(1))
        scores = score_strategies(builtin_strategies(), obs)
        out = tmp_path / "b.csv"
        write_blindness(out, report, scores, "csv")
        text = out.read_text()
        assert "verdict,PASS" in text
        assert "strategy_uniform_and_accuracy" in text
        write_blindness(tmp_path / "b.txt", report, scores, "txt")
        assert "PASS" in (tmp_path / "b.txt").read_text()


class TestCircuitSweep:
    def test_bit_columns_in_declaration_order(self, tmp_path):
        rows = [
            ({"b": 0, "a": 1}, {"z": 1}, {"z": 1}),
            ({"b": 1, "a": 0}, {"z": 0}, {"z": 1}),
        ]
        out = tmp_path / "c.csv"
        write_circuit_sweep(out, rows, ("a", "b"), ("z",), "csv")
        lines = out.read_text().splitlines()
        assert lines[0] == "inputs,z_delegated,z_reference,match"
        assert lines[1] == "10,1,1,True"
        assert lines[2] == "01,0,1,False"

    def test_txt_aligned(self, tmp_path):
        rows = [({"a": 1}, {"z": 1}, {"z": 1})]
        out = tmp_path / "c.txt"
        write_circuit_sweep(out, rows, ("a",), ("z",), "txt")
        assert "inputs" in out.read_text()
