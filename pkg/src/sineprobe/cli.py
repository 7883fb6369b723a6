"""Command-line entry point.

Exit codes: 0 success, 2 usage error (argparse), 1 runtime error with a
single machine-parsable ``error_code: message`` line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .encoder import encode
from .errors import SineprobeError
from .experiments import EXPERIMENTS, ExperimentConfig, run_experiment
from .reports import atomic_write_text, jsonable
from .signals import SignalSpec, SineComponent, BurstSpec, quantize_pcm16, synth, write_wav
from .weightfile import derive_window_stride, load_model

MODEL_DIR_ENV = "SINEPROBE_MODEL_DIR"

_EXPERIMENT_COMMANDS = {
    "temporal-consistency": "temporal_consistency",
    "temporal-burst": "temporal_burst",
    "f0-sweep": "f0_sweep",
    "bias-invariance": "bias_invariance",
    "formant-grid": "formant_grid",
    "cka-compare": "cka_compare",
    "amplitude-grid": "amplitude_grid",
    "metric-contrast": "metric_contrast",
}


def resolve_model_path(value: str) -> str:
    """Literal path first, then $SINEPROBE_MODEL_DIR/<value>[.w2vfe]."""
    if os.path.exists(value):
        return value
    model_dir = os.environ.get(MODEL_DIR_ENV)
    if model_dir:
        for candidate in (os.path.join(model_dir, value),
                          os.path.join(model_dir, value + ".w2vfe")):
            if os.path.exists(candidate):
                return candidate
    raise FileNotFoundError(value)


def _parse_component(text: str) -> SineComponent:
    try:
        freq_text, amp_text = text.split(":", 1)
        return SineComponent(float(freq_text), float(amp_text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"component must look like FREQ:AMP, got {text!r}"
        ) from exc


def _parse_override(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"--set wants KEY=JSON_VALUE, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings allowed
    return key, value


def _load_spec(args: argparse.Namespace) -> SignalSpec:
    if args.spec:
        with open(args.spec, "r", encoding="utf-8") as fh:
            return SignalSpec.from_json(fh.read())
    if not args.component:
        raise SineprobeError("provide --spec FILE or at least one --component F:A")
    burst = None
    if args.burst_component:
        burst = BurstSpec(components=tuple(args.burst_component),
                          duration=args.burst_duration)
    spec = SignalSpec(
        components=tuple(args.component),
        bias=args.bias,
        duration=args.duration,
        sample_rate=args.sample_rate,
        burst=burst,
    )
    spec.validate()
    return spec


def _add_signal_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--spec", help="SignalSpec JSON file")
    parser.add_argument("--component", type=_parse_component, action="append",
                        metavar="FREQ:AMP", help="inline sine component (repeatable)")
    parser.add_argument("--bias", type=float, default=0.0)
    parser.add_argument("--duration", type=float, default=1.0)
    parser.add_argument("--sample-rate", type=int, default=16000)
    parser.add_argument("--burst-component", type=_parse_component, action="append",
                        metavar="FREQ:AMP", help="burst component (repeatable)")
    parser.add_argument("--burst-duration", type=float, default=0.0,
                        help="burst length in seconds, centered")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sineprobe",
        description="Probe convolutional speech feature encoders with synthetic sine signals.",
    )
    parser.add_argument("--version", action="version", version=f"sineprobe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="render a signal spec to a 16-bit WAV")
    _add_signal_args(p_synth)
    p_synth.add_argument("--quantize-pcm16", action="store_true",
                         help="round samples through 16-bit PCM before use")
    p_synth.add_argument("--out", required=True, help="output WAV path")
    p_synth.add_argument("--dump-spec", help="also write the resolved spec JSON here")

    p_inspect = sub.add_parser("inspect-model", help="print header, window/stride and checksums")
    p_inspect.add_argument("model", help="W2VFE file")

    p_encode = sub.add_parser("encode", help="encode one signal to a T x D CSV")
    p_encode.add_argument("--model", required=True)
    _add_signal_args(p_encode)
    p_encode.add_argument("--quantize-pcm16", action="store_true")
    p_encode.add_argument("--out", required=True, help="output CSV path")

    for command, experiment in _EXPERIMENT_COMMANDS.items():
        p = sub.add_parser(command, help=f"run the {experiment} experiment")
        p.add_argument("--model", action="append", default=[],
                       help="W2VFE file (repeat for cka-compare)")
        p.add_argument("--out", required=True, help="report directory")
        p.add_argument("--config", help="config.json echo from a previous run")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None,
                       help="signal-level workers, 0 = auto")
        p.add_argument("--full-matrix", action="store_true",
                       help="emit the complete distance matrix even for large sweeps")
        p.add_argument("--quantize-pcm16", action="store_true")
        p.add_argument("--set", dest="overrides", type=_parse_override, action="append",
                       default=[], metavar="KEY=VALUE", help="experiment parameter override")
        if command == "formant-grid":
            p.add_argument("--fix-f0", type=float, help="fix the fundamental (default 120 Hz)")
            p.add_argument("--span-f0", action="store_true",
                           help="sweep the fundamental too (5400-signal variant)")
    return parser


def _experiment_config(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    params: dict = {}
    base = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            echo = json.load(fh)
        base_config = ExperimentConfig.from_echo(echo)
        if base_config.experiment != experiment:
            raise SineprobeError(
                f"config echo is for {base_config.experiment}, not {experiment}"
            )
        base = {
            "model_paths": base_config.model_paths,
            "seed": base_config.seed,
            "full_matrix": base_config.full_matrix,
            "quantize_pcm16": base_config.quantize_pcm16,
            "threads": base_config.threads,
        }
        params.update(base_config.params)
    params.update(dict(args.overrides))
    if getattr(args, "fix_f0", None) is not None:
        params["fix_f0"] = args.fix_f0
    model_paths = tuple(resolve_model_path(m) for m in args.model) or base.get("model_paths", ())

    def pick(flag_value, key, default):
        if flag_value is not None:
            return flag_value
        return base.get(key, default)

    return ExperimentConfig(
        experiment=experiment,
        model_paths=tuple(model_paths),
        seed=int(pick(args.seed, "seed", 0)),
        full_matrix=args.full_matrix or bool(base.get("full_matrix", False)),
        quantize_pcm16=args.quantize_pcm16 or bool(base.get("quantize_pcm16", False)),
        threads=int(pick(args.threads, "threads", 0)),
        params=params,
    )


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = _load_spec(args)
    wave = synth(spec)
    if args.quantize_pcm16:
        wave = quantize_pcm16(wave)
    write_wav(args.out, wave)
    if args.dump_spec:
        atomic_write_text(args.dump_spec, spec.to_json() + "\n")
    print(f"wrote {args.out} ({len(wave)} samples at {wave.sample_rate} Hz)")
    return 0


def _cmd_inspect(args: argparse.Namespace) -> int:
    model = load_model(resolve_model_path(args.model))
    window, stride = derive_window_stride(model.layers)
    info = model.header_dict()
    info["derived"] = {"window": window, "stride": stride, "out_dim": model.out_dim}
    info["checksums"] = model.tensor_checksums()
    print(json.dumps(jsonable(info), indent=2, sort_keys=True))
    return 0


def _cmd_encode(args: argparse.Namespace) -> int:
    model = load_model(resolve_model_path(args.model))
    spec = _load_spec(args)
    wave = synth(spec)
    if args.quantize_pcm16:
        wave = quantize_pcm16(wave)
    rep = encode(model, wave)
    lines = [",".join(repr(float(v)) for v in row) for row in rep.matrix]
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out} ({rep.timesteps} x {rep.dim})")
    return 0


def _cmd_experiment(args: argparse.Namespace, command: str) -> int:
    experiment = _EXPERIMENT_COMMANDS[command]
    if command == "formant-grid" and getattr(args, "span_f0", False):
        experiment = "formant_f0_grid"
    config = _experiment_config(args, experiment)
    report = run_experiment(config)
    report.write(args.out)
    print(f"wrote report to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage/help
        return int(exc.code or 0)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "inspect-model":
            return _cmd_inspect(args)
        if args.command == "encode":
            return _cmd_encode(args)
        return _cmd_experiment(args, args.command)
    except SineprobeError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"file_not_found: {exc}", file=sys.stderr)
        return 1
    except IsADirectoryError as exc:
        print(f"io_error: {exc}", file=sys.stderr)
        return 1
    except PermissionError as exc:
        print(f"io_error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"malformed_json: {exc}", file=sys.stderr)
        return 1


def cli_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli_entry()
