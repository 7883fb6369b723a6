import csv
import io
import json
import math
import os

import numpy as np
import pytest

from sineprobe.errors import ShapeMismatch, TooFewPoints
from sineprobe.experiments import (
    DEFAULT_PARAMS,
    ExperimentConfig,
    grid_statistic,
    run_experiment,
)
from sineprobe.signals import burst_overlap_steps


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def config(experiment, path, **kwargs):
    return ExperimentConfig(experiment=experiment, model_paths=(path,), **kwargs)


def brute_force_grid_statistic(values, coords):
    """All-pairs oracle for the grid statistic."""
    adjacent, non_adjacent = [], []
    n = len(coords)
    for i in range(n):
        for j in range(i + 1, n):
            delta = sum(abs(a - b) for a, b in zip(coords[i], coords[j]))
            if delta == 1:
                adjacent.append(values[i][j])
            elif delta > 1:
                non_adjacent.append(values[i][j])
    if not adjacent or not non_adjacent:
        return None
    return (sum(non_adjacent) / len(non_adjacent)) / (sum(adjacent) / len(adjacent))


class TestGridStatistic:
    def test_equal_distances_calibrate_to_one(self):
        # structureless configuration: every pair equally far -> exactly 1.0
        n = 9
        values = np.ones((n, n)) - np.eye(n)
        coords = [(i // 3, i % 3) for i in range(n)]
        assert grid_statistic(values, coords) == 1.0

    def test_euclidean_grid_is_above_one(self):
        coords = [(i, j) for i in range(4) for j in range(4)]
        pts = np.asarray(coords, dtype=float)
        values = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        assert grid_statistic(values, coords) > 1.0

    @pytest.mark.parametrize("shape", [(2, 2), (3, 4), (10, 10)])
    def test_matches_brute_force(self, shape):
        rng = np.random.default_rng(shape[0] * 100 + shape[1])
        coords = [(i, j) for i in range(shape[0]) for j in range(shape[1])]
        n = len(coords)
        raw = rng.uniform(0.01, 1.9, size=(n, n))
        values = 0.5 * (raw + raw.T)
        np.fill_diagonal(values, 0.0)
        got = grid_statistic(values, coords)
        want = brute_force_grid_statistic(values.tolist(), coords)
        assert got == pytest.approx(want, rel=1e-12)

    def test_degenerate_single_point(self):
        assert grid_statistic(np.zeros((1, 1)), [(0, 0)]) is None


class TestTemporalConsistency:
    def test_matrix_shape_and_diagonal(self, layer_model_path):
        report = run_experiment(config("temporal_consistency", layer_model_path))
        header, rows = report.matrix.columns, report.matrix.rows
        assert len(rows) == 5 and len(header) == 6
        # 100..500 Hz are all stride-periodic, so stepwise vectors repeat and
        # the diagonal is exactly the self-similarity
        values = np.array([[float(v) for v in row[1:]] for row in rows])
        np.testing.assert_allclose(np.diag(values), 1.0, atol=1e-9)
        assert report.summary["symmetry_residual"] < 1e-9
        assert np.all(np.isfinite(values))

    def test_signal_count_matches_grid(self, layer_model_path):
        report = run_experiment(config("temporal_consistency", layer_model_path))
        assert len(report.labels.rows) == len(DEFAULT_PARAMS["temporal_consistency"]["frequencies"])


class TestTemporalBurst:
    def test_overlap_labels_match_oracle(self, layer_model_path, layer_model):
        report = run_experiment(config("temporal_burst", layer_model_path))
        rows = report.neighbors.rows
        by_duration = {}
        for duration_ms, step, overlaps, _, _ in rows:
            by_duration.setdefault(float(duration_ms), {})[int(step)] = overlaps
        for duration_ms, steps in by_duration.items():
            burst_len = round(duration_ms / 1000 * 16000)
            start = (16000 - burst_len) // 2
            want = burst_overlap_steps(16000, start, burst_len, 400, 320)
            got = {step for step, flag in steps.items() if flag}
            assert got == want
            assert len(steps) == 49

    def test_zero_duration_burst_equals_clean_signal(self, layer_model_path):
        report = run_experiment(config(
            "temporal_burst", layer_model_path,
            params={"burst_durations_ms": [0.0]},
        ))
        rows = report.neighbors.rows
        assert all(not row[2] for row in rows)  # nothing overlaps
        assert report.summary["separation_by_duration_ms"]["0"] is None

    def test_separation_negative_for_long_burst(self, layer_model_path):
        # overlapping steps sit closer to the burst-frequency reference
        report = run_experiment(config("temporal_burst", layer_model_path))
        separation = report.summary["separation_by_duration_ms"]["320"]
        assert separation is not None and separation < 0


class TestF0Sweep:
    def test_row_counts_and_columns(self, layer_model_path):
        cfg = config("f0_sweep", layer_model_path,
                     params={"f_min": 100.0, "f_max": 2000.0, "f_step": 100.0,
                             "matrix_subsample": 4})
        report = run_experiment(cfg)
        n = 20
        assert len(report.labels.rows) == n
        assert len(report.scale.rows) == n
        assert report.scale.columns == ("frequency", "cumulative", "mel_norm", "bark_norm", "encoder_norm")
        assert len(report.neighbors.rows) == n - 1
        assert len(report.matrix.rows) == 5  # every 4th signal
        assert len(report.projection.rows) == 5
        cumulative = [row[1] for row in report.scale.rows]
        assert cumulative[0] == 0.0
        assert all(b >= a for a, b in zip(cumulative, cumulative[1:]))
        mel_norm = [row[2] for row in report.scale.rows]
        assert mel_norm[0] == 0.0 and mel_norm[-1] == 1.0

    def test_full_matrix_flag(self, layer_model_path):
        cfg = config("f0_sweep", layer_model_path, full_matrix=True,
                     params={"f_min": 100.0, "f_max": 1000.0, "f_step": 100.0})
        report = run_experiment(cfg)
        assert len(report.matrix.rows) == 10

    def test_signal_count_closed_form(self, layer_model_path):
        cfg = config("f0_sweep", layer_model_path,
                     params={"f_min": 10.0, "f_max": 500.0, "f_step": 10.0})
        report = run_experiment(cfg)
        assert len(report.labels.rows) == (500 - 10) // 10 + 1


class TestBiasInvariance:
    def test_zero_bias_column_is_exactly_one(self, group_model_path):
        report = run_experiment(config("bias_invariance", group_model_path))
        header = report.matrix.columns
        zero_col = header.index("b=0")
        for row in report.matrix.rows:
            assert row[zero_col] == 1.0

    def test_input_normalize_model_ignores_bias(self, layer_model_path):
        report = run_experiment(config("bias_invariance", layer_model_path))
        assert report.summary["min_similarity"] >= 1.0 - 1e-6

    def test_table_dimensions(self, layer_model_path):
        report = run_experiment(config("bias_invariance", layer_model_path))
        assert len(report.matrix.rows) == 5
        assert len(report.matrix.columns) == 6
        assert len(report.labels.rows) == 25


class TestFormantGrid:
    def test_fixed_f0_grid_is_900_signals(self, layer_model_path):
        report = run_experiment(config("formant_grid", layer_model_path))
        assert len(report.labels.rows) == 900
        assert len(report.matrix.rows) == 900
        assert report.summary["n_signals"] == 900
        # 30x30 four-neighborhood: 2 * 30 * 29 pairs
        assert report.summary["n_adjacent_pairs"] == 2 * 30 * 29
        assert report.summary["grid_statistic"] is not None

    def test_small_grid_statistic_matches_oracle(self, layer_model_path):
        cfg = config("formant_grid", layer_model_path, params={"grid_points": 5})
        report = run_experiment(cfg)
        labels = [row[0] for row in report.matrix.rows]
        values = [[float(v) for v in row[1:]] for row in report.matrix.rows]
        coords = [(i, j) for i in range(5) for j in range(5)]
        want = brute_force_grid_statistic(values, coords)
        assert report.summary["grid_statistic"] == pytest.approx(want, rel=1e-9)
        assert len(labels) == 25

    def test_f0_span_variant(self, layer_model_path):
        cfg = config("formant_f0_grid", layer_model_path,
                     params={"f0_values": [100.0, 150.0], "grid_points": 3,
                             "projection_subsample": 2})
        report = run_experiment(cfg)
        assert len(report.labels.rows) == 2 * 9
        assert report.matrix is None  # full matrix only behind the flag
        # adjacency count: within-plane 2*(2*3*2) + across-plane 9
        assert report.summary["n_adjacent_pairs"] == 2 * (2 * 3 * 2) + 9
        assert len(report.projection.rows) == 9

    def test_f0_span_full_matrix_flag(self, layer_model_path):
        cfg = config("formant_f0_grid", layer_model_path, full_matrix=True,
                     params={"f0_values": [100.0, 150.0], "grid_points": 2})
        report = run_experiment(cfg)
        assert report.matrix is not None
        assert len(report.matrix.rows) == 8


class TestCkaCompare:
    def test_self_pair_is_one(self, layer_model_path):
        cfg = ExperimentConfig(experiment="cka_compare",
                               model_paths=(layer_model_path, layer_model_path),
                               params={"grid_points": 4})
        report = run_experiment(cfg)
        values = np.array([[float(v) for v in row[1:]] for row in report.matrix.rows])
        np.testing.assert_allclose(values, np.ones((2, 2)), atol=1e-9)

    def test_symmetric_unit_diagonal(self, layer_model_path, group_model_path):
        cfg = ExperimentConfig(experiment="cka_compare",
                               model_paths=(layer_model_path, group_model_path),
                               params={"grid_points": 4})
        report = run_experiment(cfg)
        values = np.array([[float(v) for v in row[1:]] for row in report.matrix.rows])
        np.testing.assert_allclose(values, values.T, atol=1e-9)
        np.testing.assert_allclose(np.diag(values), 1.0, atol=1e-12)
        assert report.summary["n_signals"] == 16

    def test_needs_two_models(self, layer_model_path):
        with pytest.raises(TooFewPoints):
            run_experiment(config("cka_compare", layer_model_path))


class TestAmplitudeGrid:
    def test_amplitude_values_from_squared_spacing(self, layer_model_path):
        report = run_experiment(config("amplitude_grid", layer_model_path))
        amps = report.summary["amplitude_values"]
        want = [math.sqrt(sq) for sq in np.linspace(0.01, 0.25, 5)]
        assert amps == pytest.approx(want, rel=1e-12)
        assert amps[0] == 0.1 and amps[-1] == 0.5  # endpoints exact
        assert len(report.labels.rows) == 25

    def test_degenerate_single_cell(self, layer_model_path):
        cfg = config("amplitude_grid", layer_model_path, params={"grid_points": 1})
        report = run_experiment(cfg)
        assert len(report.labels.rows) == 1
        assert report.summary["grid_statistic"] is None
        assert report.neighbors.rows == []


class TestMetricContrast:
    def test_spectrogram_ratio_near_one(self, layer_model_path):
        # weights-free claim: pure tones occupy disjoint DFT bins, so the
        # two spectrogram distances agree within spectral-leakage tolerance
        report = run_experiment(config("metric_contrast", layer_model_path))
        assert report.summary["spectrogram_ratio"] == pytest.approx(1.0, abs=0.2)

    def test_identical_frequencies_give_zero_distance(self, layer_model_path):
        cfg = config("metric_contrast", layer_model_path,
                     params={"frequencies": [100.0, 100.0, 8000.0]})
        report = run_experiment(cfg)
        assert report.summary["encoder_d12"] == 0.0
        assert report.summary["spectrogram_d12"] == 0.0
        assert report.summary["encoder_ratio"] is None

    def test_wants_three_frequencies(self, layer_model_path):
        with pytest.raises(ShapeMismatch):
            run_experiment(config("metric_contrast", layer_model_path,
                                  params={"frequencies": [100.0, 200.0]}))


class TestReportIO:
    def test_write_and_rerun_bit_identical(self, layer_model_path, tmp_path):
        cfg = config("temporal_consistency", layer_model_path, threads=2)
        first_dir, second_dir = str(tmp_path / "a"), str(tmp_path / "b")
        run_experiment(cfg).write(first_dir)
        with open(os.path.join(first_dir, "config.json"), encoding="utf-8") as fh:
            echo = json.load(fh)
        rerun_cfg = ExperimentConfig.from_echo(echo)
        run_experiment(rerun_cfg).write(second_dir)
        for name in sorted(os.listdir(first_dir)):
            with open(os.path.join(first_dir, name), "rb") as fh:
                first_bytes = fh.read()
            with open(os.path.join(second_dir, name), "rb") as fh:
                second_bytes = fh.read()
            assert first_bytes == second_bytes, name

    def test_report_files_and_config_echo(self, layer_model_path, tmp_path):
        out = str(tmp_path / "report")
        cfg = config("f0_sweep", layer_model_path, seed=3,
                     params={"f_min": 100.0, "f_max": 400.0, "f_step": 100.0})
        run_experiment(cfg).write(out)
        names = sorted(os.listdir(out))
        assert names == ["config.json", "labels.csv", "matrix.csv", "neighbors.csv",
                         "projection.csv", "scale.csv", "summary.json"]
        with open(os.path.join(out, "config.json"), encoding="utf-8") as fh:
            echo = json.load(fh)
        assert echo["seed"] == 3
        assert echo["params"]["f_max"] == 400.0
        assert echo["models"][0]["sha256"]
        assert echo["toolkit_version"]

    def test_unknown_param_rejected(self, layer_model_path):
        with pytest.raises(ShapeMismatch):
            run_experiment(config("f0_sweep", layer_model_path, params={"nope": 1}))

    def test_unknown_experiment_rejected(self, layer_model_path):
        with pytest.raises(ShapeMismatch):
            run_experiment(ExperimentConfig(experiment="wat", model_paths=(layer_model_path,)))

    def test_no_models_rejected(self):
        with pytest.raises(TooFewPoints):
            run_experiment(ExperimentConfig(experiment="f0_sweep", model_paths=()))

    def test_quantize_flag_changes_config_not_shape(self, layer_model_path):
        cfg = config("temporal_consistency", layer_model_path, quantize_pcm16=True)
        report = run_experiment(cfg)
        assert report.config["quantize_pcm16"] is True
        assert len(report.matrix.rows) == 5


def test_csv_cells_full_precision(layer_model_path, tmp_path):
    out = str(tmp_path / "prec")
    run_experiment(config("temporal_consistency", layer_model_path)).write(out)
    with open(os.path.join(out, "matrix.csv"), encoding="utf-8") as fh:
        text = fh.read()
    # header + 5 rows, comma separated, no thousands separators
    assert text.count("\n") == 6
    first_value = text.splitlines()[1].split(",")[1]
    assert float(first_value)  # parses back
    assert "e" in first_value or "." in first_value
