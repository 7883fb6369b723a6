"""One runner per analysis, binding signal synthesis, encoding and metrics.

Each runner consumes an :class:`ExperimentConfig`, encodes its parameter grid
and returns an :class:`~sineprobe.reports.ExperimentReport`.  Reports echo the
fully-resolved configuration, so re-running from ``config.json`` reproduces
the output byte for byte (same weight files, same kernel backend).
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .encoder import Representation, encode
from .errors import ShapeMismatch, TooFewPoints
from .metrics import (
    DistanceMatrix,
    build_encoder_scale,
    bark_scale,
    consistency_matrix,
    cosine_distance,
    linear_cka,
    mds_2d,
    mel_scale,
    minmax_normalize,
    ordering_stats,
    pairwise_cosine_distance,
    spectrogram_features,
    time_average,
)
from .reports import ExperimentReport, Table, projection_table, square_matrix_table
from .signals import (
    BurstSpec,
    SignalSpec,
    SineComponent,
    Waveform,
    burst_bounds,
    burst_overlap_steps,
    quantize_pcm16,
    synth,
    tone,
)
from .weightfile import EncoderModel, load_model

EXPERIMENTS = (
    "temporal_consistency",
    "temporal_burst",
    "f0_sweep",
    "bias_invariance",
    "formant_grid",
    "formant_f0_grid",
    "cka_compare",
    "amplitude_grid",
    "metric_contrast",
)

DEFAULT_PARAMS: dict[str, dict] = {
    "temporal_consistency": {
        "frequencies": [100.0, 200.0, 300.0, 400.0, 500.0],
        "amplitude": 1.0,
    },
    "temporal_burst": {
        "base_frequency": 200.0,
        "burst_frequency": 800.0,
        "amplitude": 1.0,
        "burst_durations_ms": [320.0, 160.0, 80.0, 40.0, 20.0, 10.0],
    },
    "f0_sweep": {
        "f_min": 10.0,
        "f_max": 8000.0,
        "f_step": 10.0,
        "amplitude": 1.0,
        "matrix_subsample": 10,
    },
    "bias_invariance": {
        "frequencies": [100.0, 200.0, 300.0, 400.0, 500.0],
        "amplitude": 0.5,
        "biases": [-0.5, -0.25, 0.0, 0.25, 0.5],
    },
    "formant_grid": {
        "fix_f0": 120.0,
        "amplitudes": [0.5, 0.35, 0.15],
        "f1_range": [235.0, 850.0],
        "f2_range": [595.0, 2400.0],
        "grid_points": 30,
    },
    "formant_f0_grid": {
        "f0_values": [100.0, 125.0, 150.0, 175.0, 200.0, 225.0],
        "amplitudes": [0.5, 0.35, 0.15],
        "f1_range": [235.0, 850.0],
        "f2_range": [595.0, 2400.0],
        "grid_points": 30,
        "projection_subsample": 6,
    },
    "cka_compare": {
        "fix_f0": 120.0,
        "amplitudes": [0.5, 0.35, 0.15],
        "f1_range": [235.0, 850.0],
        "f2_range": [595.0, 2400.0],
        "grid_points": 30,
    },
    "amplitude_grid": {
        "f0": 100.0,
        "f1": 700.0,
        "amp_sq_min": 0.01,
        "amp_sq_max": 0.25,
        "grid_points": 5,
    },
    "metric_contrast": {
        "frequencies": [100.0, 200.0, 8000.0],
        "amplitude": 1.0,
        "spec_window": 400,
        "spec_hop": 320,
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one run."""

    experiment: str
    model_paths: tuple[str, ...]
    seed: int = 0
    full_matrix: bool = False
    quantize_pcm16: bool = False
    threads: int = 0
    params: dict = field(default_factory=dict)

    def resolved_params(self) -> dict:
        if self.experiment not in DEFAULT_PARAMS:
            raise ShapeMismatch(f"unknown experiment {self.experiment!r}")
        merged = dict(DEFAULT_PARAMS[self.experiment])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise ShapeMismatch(
                f"unknown parameter(s) for {self.experiment}: {sorted(unknown)}"
            )
        merged.update(self.params)
        return merged

    @classmethod
    def from_echo(cls, echo: dict) -> "ExperimentConfig":
        """Rebuild a config from a report's config.json payload."""
        return cls(
            experiment=echo["experiment"],
            model_paths=tuple(entry["path"] for entry in echo["models"]),
            seed=int(echo.get("seed", 0)),
            full_matrix=bool(echo.get("full_matrix", False)),
            quantize_pcm16=bool(echo.get("quantize_pcm16", False)),
            threads=int(echo.get("threads", 0)),
            params=dict(echo.get("params", {})),
        )


def _file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _config_echo(config: ExperimentConfig, models: list[tuple[str, EncoderModel]]) -> dict:
    from . import __version__

    return {
        "experiment": config.experiment,
        "models": [
            {
                "path": path,
                "name": model.name,
                "sha256": _file_sha256(path) if os.path.exists(path) else None,
            }
            for path, model in models
        ],
        "seed": config.seed,
        "full_matrix": config.full_matrix,
        "quantize_pcm16": config.quantize_pcm16,
        "threads": config.threads,
        "params": config.resolved_params(),
        "toolkit_version": __version__,
        "kernel_backend": kernels.BACKEND,
    }


def _worker_count(config: ExperimentConfig) -> int:
    if config.threads >= 1:
        return config.threads
    if kernels.BACKEND == "numba":
        # njit kernels release the GIL, so signal-level threads scale
        return min(4, os.cpu_count() or 1)
    return 1  # BLAS already threads internally


def _synth_wave(spec: SignalSpec, config: ExperimentConfig) -> Waveform:
    wave = synth(spec)
    if config.quantize_pcm16:
        wave = quantize_pcm16(wave)
    return wave


def encode_specs(model: EncoderModel, specs: list[SignalSpec],
                 config: ExperimentConfig) -> list[Representation]:
    """Encode a batch, optionally across threads; order follows the input."""
    workers = _worker_count(config)

    def job(spec: SignalSpec) -> Representation:
        rep = encode(model, _synth_wave(spec, config))
        return replace(rep, source=spec)

    if workers <= 1 or len(specs) <= 1:
        return [job(spec) for spec in specs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, specs))


def averaged_reps(model: EncoderModel, specs: list[SignalSpec],
                  config: ExperimentConfig) -> np.ndarray:
    """n x D matrix of time-averaged representations (full reps discarded)."""
    workers = _worker_count(config)

    def job(spec: SignalSpec) -> np.ndarray:
        return time_average(encode(model, _synth_wave(spec, config)))

    if workers <= 1 or len(specs) <= 1:
        return np.stack([job(spec) for spec in specs])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.stack(list(pool.map(job, specs)))


def grid_adjacency_sums(coords: np.ndarray) -> np.ndarray:
    """Pairwise sum of absolute coordinate differences (int matrix)."""
    coords = np.asarray(coords, dtype=np.int16)
    n = coords.shape[0]
    total = np.zeros((n, n), dtype=np.int16)
    for axis in range(coords.shape[1]):
        column = coords[:, axis].astype(np.int16)
        total += np.abs(column[:, None] - column[None, :])
    return total


def grid_statistic(dist_values: np.ndarray, coords) -> float | None:
    """Mean non-adjacent-pair distance over mean grid-adjacent-pair distance.

    Adjacent pairs differ by exactly one step along exactly one grid axis.
    ``None`` when either pair set is empty (degenerate grids) or the adjacent
    mean is zero.
    """
    dist_values = np.asarray(dist_values, dtype=np.float64)
    sums = grid_adjacency_sums(np.asarray(coords))
    upper = np.triu(np.ones(dist_values.shape, dtype=bool), k=1)
    adjacent = dist_values[(sums == 1) & upper]
    non_adjacent = dist_values[(sums > 1) & upper]
    if adjacent.size == 0 or non_adjacent.size == 0:
        return None
    adjacent_mean = float(adjacent.mean())
    if adjacent_mean == 0.0:
        return None
    return float(non_adjacent.mean()) / adjacent_mean


def _labels_table(rows: list[dict]) -> Table:
    columns = list(rows[0].keys()) if rows else ["label"]
    return Table(columns=tuple(columns), rows=[[row[c] for c in columns] for row in rows])


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

def run_temporal_consistency(models, config: ExperimentConfig) -> ExperimentReport:
    """Average cosine similarity between time-averaged and stepwise vectors."""
    _, model = models[0]
    params = config.resolved_params()
    freqs = [float(f) for f in params["frequencies"]]
    amplitude = float(params["amplitude"])
    specs = [tone(f, amplitude) for f in freqs]
    reps = encode_specs(model, specs, config)
    matrix = consistency_matrix(reps)
    labels = [f"f0={f:g}" for f in freqs]
    residual = float(np.abs(matrix - matrix.T).max())
    return ExperimentReport(
        config=_config_echo(config, models),
        labels=_labels_table([{"label": lab, "f0": f} for lab, f in zip(labels, freqs)]),
        matrix=square_matrix_table(labels, matrix),
        summary={
            "min_entry": float(matrix.min()),
            "max_entry": float(matrix.max()),
            "diagonal_min": float(np.diag(matrix).min()),
            "symmetry_residual": residual,
        },
    )


def run_temporal_burst(models, config: ExperimentConfig) -> ExperimentReport:
    """Stepwise distances of a mixed signal against clean-tone references."""
    _, model = models[0]
    params = config.resolved_params()
    base_f = float(params["base_frequency"])
    burst_f = float(params["burst_frequency"])
    amplitude = float(params["amplitude"])
    durations_ms = [float(d) for d in params["burst_durations_ms"]]

    base_spec = tone(base_f, amplitude)
    burst_ref_spec = tone(burst_f, amplitude)
    ref_base = time_average(encode(model, _synth_wave(base_spec, config)))
    ref_burst = time_average(encode(model, _synth_wave(burst_ref_spec, config)))

    label_rows = [
        {"label": f"clean-{base_f:g}Hz", "kind": "reference", "burst_ms": 0.0},
        {"label": f"clean-{burst_f:g}Hz", "kind": "reference", "burst_ms": 0.0},
    ]
    step_rows = []
    separations: dict[str, float | None] = {}
    for duration_ms in durations_ms:
        spec = SignalSpec(
            components=(SineComponent(base_f, amplitude),),
            burst=BurstSpec(
                components=(SineComponent(burst_f, amplitude),),
                duration=duration_ms / 1000.0,
            ),
        )
        label_rows.append({"label": spec.label(), "kind": "mixed", "burst_ms": duration_ms})
        rep = encode(model, _synth_wave(spec, config))
        start, burst_len = burst_bounds(spec)
        overlap = burst_overlap_steps(spec.num_samples, start, burst_len,
                                      model.window, model.stride)
        dist_base = np.array([cosine_distance(row, ref_base) for row in rep.matrix])
        dist_burst = np.array([cosine_distance(row, ref_burst) for row in rep.matrix])
        mask = np.zeros(rep.timesteps, dtype=bool)
        mask[sorted(overlap)] = True
        for step in range(rep.timesteps):
            step_rows.append([
                duration_ms, step, bool(mask[step]),
                float(dist_base[step]), float(dist_burst[step]),
            ])
        if mask.any() and (~mask).any():
            separations[f"{duration_ms:g}"] = float(
                dist_burst[mask].mean() - dist_burst[~mask].mean()
            )
        else:
            separations[f"{duration_ms:g}"] = None
    return ExperimentReport(
        config=_config_echo(config, models),
        labels=_labels_table(label_rows),
        neighbors=Table(
            columns=("burst_ms", "step", "overlaps_burst", "dist_to_base_ref", "dist_to_burst_ref"),
            rows=step_rows,
        ),
        summary={
            "separation_by_duration_ms": separations,
            "window": model.window,
            "stride": model.stride,
        },
    )


def run_f0_sweep(models, config: ExperimentConfig) -> ExperimentReport:
    """Frequency sweep: cumulative neighbor-distance scale vs mel/bark."""
    _, model = models[0]
    params = config.resolved_params()
    f_min, f_max, f_step = (float(params[k]) for k in ("f_min", "f_max", "f_step"))
    amplitude = float(params["amplitude"])
    subsample = max(1, int(params["matrix_subsample"]))
    freqs = np.arange(f_min, f_max + f_step / 2, f_step)
    specs = [tone(float(f), amplitude) for f in freqs]
    reps = averaged_reps(model, specs, config)

    scale = build_encoder_scale(freqs, reps)
    stats = ordering_stats(scale)
    mel_norm = minmax_normalize(mel_scale(freqs))
    bark_norm = minmax_normalize(bark_scale(freqs))
    encoder_norm = minmax_normalize(scale.cumulative)

    labels = [f"f0={f:g}" for f in freqs]
    neighbor_rows = [
        [labels[i], labels[i + 1], float(scale.cumulative[i + 1] - scale.cumulative[i])]
        for i in range(len(labels) - 1)
    ]
    keep = np.arange(len(labels)) if config.full_matrix else np.arange(0, len(labels), subsample)
    dist = pairwise_cosine_distance(reps[keep], [labels[i] for i in keep])
    coords = mds_2d(dist)
    scale_rows = [
        [float(freqs[i]), float(scale.cumulative[i]), float(mel_norm[i]),
         float(bark_norm[i]), float(encoder_norm[i])]
        for i in range(len(labels))
    ]
    return ExperimentReport(
        config=_config_echo(config, models),
        labels=_labels_table([{"label": lab, "f0": float(f)} for lab, f in zip(labels, freqs)]),
        matrix=square_matrix_table(dist.labels, dist.values),
        neighbors=Table(columns=("label_lo", "label_hi", "distance"), rows=neighbor_rows),
        scale=Table(
            columns=("frequency", "cumulative", "mel_norm", "bark_norm", "encoder_norm"),
            rows=scale_rows,
        ),
        projection=projection_table(dist.labels, coords),
        summary={
            "monotone_fraction": stats["monotone_fraction"],
            "linearity_r2": stats["linearity_r2"],
            "n_signals": len(labels),
            "matrix_points": int(keep.size),
            "total_cumulative_distance": float(scale.cumulative[-1]),
        },
    )


def run_bias_invariance(models, config: ExperimentConfig) -> ExperimentReport:
    """Cosine similarity of biased tones against their zero-bias sibling."""
    _, model = models[0]
    params = config.resolved_params()
    freqs = [float(f) for f in params["frequencies"]]
    biases = [float(b) for b in params["biases"]]
    amplitude = float(params["amplitude"])

    label_rows = []
    table = np.empty((len(freqs), len(biases)), dtype=np.float64)
    for row, f in enumerate(freqs):
        reference = time_average(encode(model, _synth_wave(tone(f, amplitude), config)))
        for col, bias in enumerate(biases):
            spec = tone(f, amplitude, bias=bias)
            label_rows.append({"label": spec.label(), "f0": f, "bias": bias})
            averaged = time_average(encode(model, _synth_wave(spec, config)))
            table[row, col] = 1.0 - cosine_distance(averaged, reference)
    matrix = Table(
        columns=tuple(["label"] + [f"b={b:g}" for b in biases]),
        rows=[[f"f0={f:g}"] + [float(v) for v in table[row]] for row, f in enumerate(freqs)],
    )
    return ExperimentReport(
        config=_config_echo(config, models),
        labels=_labels_table(label_rows),
        matrix=matrix,
        summary={
            "min_similarity": float(table.min()),
            "max_abs_deviation": float(np.abs(1.0 - table).max()),
        },
    )


def _formant_specs(params: dict, f0_values: list[float]):
    a0, a1, a2 = (float(a) for a in params["amplitudes"])
    points = int(params["grid_points"])
    f1_grid = np.linspace(float(params["f1_range"][0]), float(params["f1_range"][1]), points)
    f2_grid = np.linspace(float(params["f2_range"][0]), float(params["f2_range"][1]), points)
    specs, label_rows, coords = [], [], []
    for i0, f0 in enumerate(f0_values):
        for i1, f1 in enumerate(f1_grid):
            for i2, f2 in enumerate(f2_grid):
                specs.append(SignalSpec(components=(
                    SineComponent(float(f0), a0),
                    SineComponent(float(f1), a1),
                    SineComponent(float(f2), a2),
                )))
                label_rows.append({
                    "label": f"f0={f0:g};f1={f1:.1f};f2={f2:.1f}",
                    "f0": float(f0), "f1": float(f1), "f2": float(f2),
                })
                coords.append((i0, i1, i2))
    return specs, label_rows, np.asarray(coords, dtype=np.int64)


def _grid_report(models, config, reps, label_rows, coords, axis_note: str,
                 projection_keep: np.ndarray | None = None,
                 emit_matrix: bool = True) -> ExperimentReport:
    labels = [row["label"] for row in label_rows]
    dist = pairwise_cosine_distance(reps, labels)
    statistic = grid_statistic(dist.values, coords)

    sums = grid_adjacency_sums(coords)
    adjacent_pairs = np.argwhere(np.triu(sums == 1, k=1))
    neighbor_rows = [
        [labels[i], labels[j], float(dist.values[i, j])] for i, j in adjacent_pairs
    ]
    if projection_keep is None:
        projection_keep = np.arange(len(labels))
    proj_dist = DistanceMatrix(
        labels=tuple(labels[i] for i in projection_keep),
        values=dist.values[np.ix_(projection_keep, projection_keep)],
    )
    coords_2d = mds_2d(proj_dist)
    report = ExperimentReport(
        config=_config_echo(config, models),
        labels=_labels_table(label_rows),
        neighbors=Table(columns=("label_a", "label_b", "distance"), rows=neighbor_rows),
        projection=projection_table(proj_dist.labels, coords_2d),
        summary={
            "grid_statistic": statistic,
            "grid_axes": axis_note,
            "n_signals": len(labels),
            "n_adjacent_pairs": len(adjacent_pairs),
            "mean_adjacent_distance": float(np.mean([r[2] for r in neighbor_rows]))
            if neighbor_rows else None,
        },
    )
    if emit_matrix or config.full_matrix:
        report.matrix = square_matrix_table(dist.labels, dist.values)
    return report


def run_formant_grid(models, config: ExperimentConfig) -> ExperimentReport:
    """30 x 30 formant grid at a fixed fundamental."""
    _, model = models[0]
    params = config.resolved_params()
    specs, label_rows, coords = _formant_specs(params, [float(params["fix_f0"])])
    reps = averaged_reps(model, specs, config)
    return _grid_report(models, config, reps, label_rows, coords[:, 1:], "f1,f2")


def run_formant_f0_grid(models, config: ExperimentConfig) -> ExperimentReport:
    """Formant grid swept over several fundamentals (the 5400-signal variant)."""
    _, model = models[0]
    params = config.resolved_params()
    f0_values = [float(f) for f in params["f0_values"]]
    specs, label_rows, coords = _formant_specs(params, f0_values)
    reps = averaged_reps(model, specs, config)
    keep = np.arange(0, len(specs), max(1, int(params["projection_subsample"])))
    return _grid_report(models, config, reps, label_rows, coords, "f0,f1,f2",
                        projection_keep=keep, emit_matrix=False)


def run_cka_compare(models, config: ExperimentConfig) -> ExperimentReport:
    """Pairwise linear CKA between encoders over the formant signal set."""
    if len(models) < 2:
        raise TooFewPoints("cka-compare needs at least two models")
    params = config.resolved_params()
    specs, _, _ = _formant_specs(params, [float(params["fix_f0"])])
    names = []
    for path, model in models:
        name = model.name or os.path.basename(path)
        while name in names:
            name += "+"
        names.append(name)
    rep_sets = [averaged_reps(model, specs, config) for _, model in models]
    n = len(models)
    values = np.eye(n)
    for a in range(n):
        for b in range(a + 1, n):
            values[a, b] = values[b, a] = linear_cka(rep_sets[a], rep_sets[b])
    pair_summary = {
        f"{names[a]}|{names[b]}": float(values[a, b])
        for a in range(n) for b in range(a + 1, n)
    }
    return ExperimentReport(
        config=_config_echo(config, models),
        labels=_labels_table([{"label": name} for name in names]),
        matrix=square_matrix_table(names, values),
        summary={"pairwise_cka": pair_summary, "n_signals": len(specs)},
    )


def run_amplitude_grid(models, config: ExperimentConfig) -> ExperimentReport:
    """Two-tone grid with amplitudes evenly spaced in energy (squared amplitude)."""
    _, model = models[0]
    params = config.resolved_params()
    f0, f1 = float(params["f0"]), float(params["f1"])
    points = int(params["grid_points"])
    amps = np.sqrt(np.linspace(float(params["amp_sq_min"]), float(params["amp_sq_max"]), points))
    specs, label_rows, coords = [], [], []
    for i0, a0 in enumerate(amps):
        for i1, a1 in enumerate(amps):
            specs.append(SignalSpec(components=(
                SineComponent(f0, float(a0)), SineComponent(f1, float(a1)),
            )))
            label_rows.append({
                "label": f"A0={a0:.4f};A1={a1:.4f}",
                "a0": float(a0), "a1": float(a1),
            })
            coords.append((i0, i1))
    reps = averaged_reps(model, specs, config)
    report = _grid_report(models, config, reps, label_rows,
                          np.asarray(coords, dtype=np.int64), "a0,a1")
    report.summary["amplitude_values"] = [float(a) for a in amps]
    return report


def run_metric_contrast(models, config: ExperimentConfig) -> ExperimentReport:
    """Distance ratios under encoder features vs spectrogram features."""
    _, model = models[0]
    params = config.resolved_params()
    freqs = [float(f) for f in params["frequencies"]]
    if len(freqs) != 3:
        raise ShapeMismatch(f"metric contrast wants exactly 3 frequencies, got {len(freqs)}")
    amplitude = float(params["amplitude"])
    window, hop = int(params["spec_window"]), int(params["spec_hop"])
    specs = [tone(f, amplitude) for f in freqs]
    waves = [_synth_wave(spec, config) for spec in specs]
    labels = [f"f={f:g}" for f in freqs]

    encoder_vecs = np.stack([time_average(encode(model, wave)) for wave in waves])
    spec_vecs = np.stack([
        spectrogram_features(wave, window, hop).mean(axis=0) for wave in waves
    ])
    enc_dist = pairwise_cosine_distance(encoder_vecs, labels)
    spec_dist = pairwise_cosine_distance(spec_vecs, labels)

    def ratio(values: np.ndarray) -> float | None:
        if values[0, 1] == 0.0:
            return None
        return float(values[0, 2] / values[0, 1])

    return ExperimentReport(
        config=_config_echo(config, models),
        labels=_labels_table([{"label": lab, "f0": f} for lab, f in zip(labels, freqs)]),
        matrix=square_matrix_table(labels, enc_dist.values),
        summary={
            "encoder_d12": float(enc_dist.values[0, 1]),
            "encoder_d13": float(enc_dist.values[0, 2]),
            "encoder_ratio": ratio(enc_dist.values),
            "spectrogram_d12": float(spec_dist.values[0, 1]),
            "spectrogram_d13": float(spec_dist.values[0, 2]),
            "spectrogram_ratio": ratio(spec_dist.values),
            "spectrogram_distances": spec_dist.values.tolist(),
        },
    )


RUNNERS = {
    "temporal_consistency": run_temporal_consistency,
    "temporal_burst": run_temporal_burst,
    "f0_sweep": run_f0_sweep,
    "bias_invariance": run_bias_invariance,
    "formant_grid": run_formant_grid,
    "formant_f0_grid": run_formant_f0_grid,
    "cka_compare": run_cka_compare,
    "amplitude_grid": run_amplitude_grid,
    "metric_contrast": run_metric_contrast,
}


def run_experiment(config: ExperimentConfig,
                   models: list[tuple[str, EncoderModel]] | None = None) -> ExperimentReport:
    """Load models (unless given) and dispatch to the experiment's runner."""
    if config.experiment not in RUNNERS:
        raise ShapeMismatch(f"unknown experiment {config.experiment!r}")
    if models is None:
        if not config.model_paths:
            raise TooFewPoints("at least one --model is required")
        models = [(path, load_model(path)) for path in config.model_paths]
    return RUNNERS[config.experiment](models, config)
