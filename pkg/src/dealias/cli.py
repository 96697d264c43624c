"""Command-line front end for the dealiasing pipeline.

Subcommands cover the full artifact chain: dataset rendering, beamforming,
filtering, dataset evaluation, polar sweeps, and weight-bundle inspection.
Every value a flag can set may also come from a JSON config file passed via
--config; explicit flags win over the file, the file wins over built-in
defaults. Exit codes: 0 ok, 2 usage or configuration, 3 file or data
format, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import Direction, MultichannelSignal
from .errors import (
    DataFormatError,
    InvalidArgumentError,
    NumericError,
    UndefinedMetricError,
    UnsupportedConfigurationError,
)
from .experiments import Pipeline, PipelineConfig, preset, run_experiment
from .fileio import read_spectrogram, read_wav, write_spectrogram, write_wav
from .metrics import band_partition, c_si_snr, polar_metadata_json, polar_to_csv, spatial_sweep
from .nnmask import load_weights
from .simulate import generate_dataset, load_manifest, record_from_dict
from .stft import stft_forward, stft_inverse

GEN_DEFAULTS = {
    "preset": None, "scale": "desk", "scenes": None, "seed": 0,
    "out": None, "threads": None,
}
BEAMFORM_DEFAULTS = {
    "preset": None, "scale": "desk", "in": None, "out": None,
    "spacing_x": None, "spacing_y": None, "threads": None,
}
DEALIAS_DEFAULTS = {
    "preset": None, "scale": "desk", "in": None, "filter": None,
    "weights": None, "scene": None, "out": None, "report": None,
    "threads": None,
}
EVAL_DEFAULTS = {
    "preset": None, "scale": "desk", "dataset": None, "filter": None,
    "weights": None, "scenes": 0, "seed": 0, "report": None,
    "threads": None,
}
SWEEP_DEFAULTS = {
    "preset": None, "scale": "desk", "filter": None, "weights": None,
    "grid": 360, "signals": 16, "seed": 0, "out": None, "threads": None,
}


def default_threads() -> int:
    env = os.environ.get("DEALIAS_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise InvalidArgumentError(f"DEALIAS_THREADS={env!r} is not an integer") from None
    return os.cpu_count() or 1


def merge_flags(args: argparse.Namespace, defaults: dict) -> dict:
    """Resolve one subcommand's settings: defaults < --config JSON < flags."""
    merged = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            with open(config_path) as f:
                loaded = json.load(f)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"{config_path}: invalid JSON config ({e})") from e
        if not isinstance(loaded, dict):
            raise DataFormatError(f"{config_path}: config must be a JSON object")
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise InvalidArgumentError(
                f"{config_path}: unknown config keys {unknown}, expected from {sorted(defaults)}"
            )
        merged.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _require(merged: dict, *keys: str) -> None:
    missing = [k for k in keys if merged.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise InvalidArgumentError(f"missing required flag(s): {flags}")


def _pipeline_config(merged: dict) -> PipelineConfig:
    _require(merged, "preset")
    return preset(str(merged["preset"]), str(merged["scale"]))


def _threads(merged: dict) -> int:
    if merged.get("threads") is None:
        return default_threads()
    t = int(merged["threads"])
    if t < 1:
        raise InvalidArgumentError(f"--threads must be positive, got {t}")
    return t


def _bundle(merged: dict):
    return load_weights(str(merged["weights"])) if merged.get("weights") else None


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_tiles(path: str, cfg: PipelineConfig):
    """Load virtual-mic tiles from a .spec container or re-analyze a .wav."""
    if path.endswith(".spec"):
        spec = read_spectrogram(path)
        if (spec.fft_size, spec.hop) != (cfg.fft_size, cfg.hop):
            raise InvalidArgumentError(
                f"{path}: tiles use fft {spec.fft_size}/hop {spec.hop}, "
                f"preset expects {cfg.fft_size}/{cfg.hop}"
            )
        _check_rate(path, spec.sample_rate, cfg)
        return spec
    if path.endswith(".wav"):
        data, rate = read_wav(path)
        _check_rate(path, rate, cfg)
        return stft_forward(MultichannelSignal(data, rate), cfg.fft_size, cfg.hop)
    raise InvalidArgumentError(f"{path}: expected a .wav or .spec input")


def _write_tiles(path: str, spec) -> None:
    if path.endswith(".spec"):
        write_spectrogram(path, spec)
    elif path.endswith(".wav"):
        signal = stft_inverse(spec)
        write_wav(path, signal.samples, int(signal.sample_rate))
    else:
        raise InvalidArgumentError(f"{path}: expected a .wav or .spec output")


def _check_rate(path: str, rate, cfg: PipelineConfig) -> None:
    if int(rate) != int(cfg.scene.sample_rate):
        raise InvalidArgumentError(
            f"{path}: sample rate {int(rate)} does not match the "
            f"{cfg.name}/{cfg.scale} preset's {int(cfg.scene.sample_rate)}"
        )


def _load_scene_record(path: str):
    try:
        with open(path) as f:
            rec = json.load(f)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid scene JSON ({e})") from e
    if not isinstance(rec, dict):
        raise DataFormatError(f"{path}: scene file must hold one manifest record")
    try:
        return record_from_dict(rec, os.path.dirname(os.path.abspath(path)))
    except (KeyError, TypeError) as e:
        raise DataFormatError(f"{path}: malformed scene record ({e})") from e


# ------------------------------------------------------------- subcommands

def cmd_dataset_gen(merged: dict) -> int:
    cfg = _pipeline_config(merged)
    _require(merged, "scenes", "out")
    manifest = generate_dataset(
        cfg.scene, int(merged["scenes"]), int(merged["seed"]), str(merged["out"])
    )
    print(manifest)
    return 0


def cmd_beamform(merged: dict) -> int:
    cfg = _pipeline_config(merged)
    _require(merged, "in", "out")
    data, rate = read_wav(str(merged["in"]))
    _check_rate(str(merged["in"]), rate, cfg)
    sx = cfg.scene.spacing_fix if merged["spacing_x"] is None else float(merged["spacing_x"])
    sy = sx if merged["spacing_y"] is None else float(merged["spacing_y"])
    bf = Pipeline(cfg).beamformer(sx, sy)
    virt = bf.process(stft_forward(MultichannelSignal(data, rate), cfg.fft_size, cfg.hop))
    _write_tiles(str(merged["out"]), virt)
    print(f"{merged['out']}: {virt.n_channels} channels, "
          f"{virt.n_frames} frames x {virt.n_bins} bins")
    return 0


def cmd_dealias(merged: dict) -> int:
    cfg = _pipeline_config(merged)
    _require(merged, "in", "filter", "out")
    pipeline = Pipeline(cfg, str(merged["filter"]), _bundle(merged))
    virt = _read_tiles(str(merged["in"]), cfg)
    targets = None
    sx = sy = None
    if merged["scene"] is not None:
        record = _load_scene_record(str(merged["scene"]))
        _check_rate(str(merged["scene"]), record.scene.sample_rate, cfg)
        targets = pipeline.targets_for_scene(record.scene, record.load_sources())
        sx, sy = record.scene.spacing_x, record.scene.spacing_y
    result = pipeline.process_virtual(virt, targets, sx, sy)
    decoded = stft_inverse(result.decoded)
    write_wav(str(merged["out"]), decoded.samples, int(decoded.sample_rate))
    snr_db = None
    if targets is not None:
        snr_db = c_si_snr(result.decoded, result.targets).mean_db
    if merged["report"] is not None:
        _write_json(str(merged["report"]), {
            "preset": cfg.name,
            "scale": cfg.scale,
            "filter": pipeline.filter_kind,
            "input": str(merged["in"]),
            "output": str(merged["out"]),
            "n_channels": result.decoded.n_channels,
            "n_frames": result.decoded.n_frames,
            "n_bins": result.decoded.n_bins,
            "c_si_snr_db": snr_db,
        })
    tail = "" if snr_db is None else f", C-Si-SNR {snr_db:.2f} dB"
    print(f"{merged['out']}: {result.decoded.n_channels} channels{tail}")
    return 0


def cmd_eval(merged: dict) -> int:
    cfg = _pipeline_config(merged)
    _require(merged, "dataset", "filter", "report")
    manifest = os.path.join(str(merged["dataset"]), "manifest.jsonl")
    records = load_manifest(manifest)
    if not records:
        raise DataFormatError(f"{manifest}: empty manifest")
    for rec in records:
        _check_rate(manifest, rec.scene.sample_rate, cfg)
    report = run_experiment(
        cfg, str(merged["filter"]), int(merged["scenes"]), int(merged["seed"]),
        weights=_bundle(merged), records=records, threads=_threads(merged),
    )
    _write_json(str(merged["report"]), report)
    print(f"{report['preset']}/{report['scale']} {report['filter_kind']}: "
          f"mean {report['mean_db']:.2f} dB, improvement {report['improvement_db']:.2f} dB "
          f"over {report['n_scenes']} scenes")
    return 0


def cmd_sweep(merged: dict) -> int:
    cfg = _pipeline_config(merged)
    _require(merged, "filter", "out")
    pipeline = Pipeline(cfg, str(merged["filter"]), _bundle(merged))
    n_grid = int(merged["grid"])
    if n_grid < 1:
        raise InvalidArgumentError(f"--grid must be positive, got {n_grid}")
    grid = [Direction(a) for a in np.arange(n_grid) * (360.0 / n_grid)]
    bands = band_partition(cfg.f_alias, cfg.scene.sample_rate)
    seed = int(merged["seed"])
    n_signals = int(merged["signals"])
    resp = spatial_sweep(pipeline, grid, n_signals, bands, seed, threads=_threads(merged))
    out = str(merged["out"])
    polar_to_csv(resp, out)
    polar_metadata_json(resp, out + ".meta.json", seed, n_signals, pipeline.pipeline_id)
    print(f"{out}: {n_grid} azimuths x {len(bands)} bands x "
          f"{resp.magnitudes.shape[2]} channels")
    return 0


def cmd_inspect_weights(path: str) -> int:
    bundle = load_weights(path)
    d = bundle.descriptor
    print(f"{path}: V={d['v']} mode={d['mode']} depth={d['depth']} base={d['base']}")
    total = 0
    for name, arr in bundle.tensors:
        print(f"  {name:<24} {str(arr.shape):<22} {arr.dtype}")
        total += arr.size
    print(f"  {total} parameters in {len(bundle.tensors)} tensors")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dealias",
        description="Spatial-aliasing laboratory: render, beamform, filter, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file of flag defaults; explicit flags win")
        p.add_argument("--preset", help="i_fix | i_var | ii_fix | ii_var")
        p.add_argument("--scale", help="desk | paper (default: desk)")
        p.add_argument("--threads", type=int,
                       help="worker threads (default: DEALIAS_THREADS, else machine parallelism)")

    dataset = sub.add_parser("dataset", help="dataset utilities")
    dsub = dataset.add_subparsers(dest="dataset_command", required=True)
    gen = dsub.add_parser("gen", help="render scenes to WAV and write a manifest")
    common(gen)
    gen.add_argument("--scenes", type=int, help="number of scenes to render")
    gen.add_argument("--seed", type=int, help="dataset seed (default: 0)")
    gen.add_argument("--out", help="output directory")

    bf = sub.add_parser("beamform", help="microphone WAV -> virtual-mic tiles")
    common(bf)
    bf.add_argument("--in", help="microphone mixture (.wav)")
    bf.add_argument("--out", help="virtual mics (.wav or .spec)")
    bf.add_argument("--spacing-x", type=float, help="array spacing override, meters")
    bf.add_argument("--spacing-y", type=float, help="y spacing override, meters")

    de = sub.add_parser("dealias", help="filter virtual mics and decode")
    common(de)
    de.add_argument("--in", help="virtual mics (.wav or .spec)")
    de.add_argument("--filter", help="identity | oracle-diag | oracle-full | lti | nn")
    de.add_argument("--weights", help="weight bundle (.dalw), required for nn")
    de.add_argument("--scene", help="manifest-record JSON with ground truth (oracles need it)")
    de.add_argument("--out", help="decoded audio (.wav)")
    de.add_argument("--report", help="JSON report path")

    ev = sub.add_parser("eval", help="score a filter against a rendered dataset")
    common(ev)
    ev.add_argument("--dataset", help="directory containing manifest.jsonl")
    ev.add_argument("--filter", help="identity | oracle-diag | oracle-full | lti | nn")
    ev.add_argument("--weights", help="weight bundle (.dalw), required for nn")
    ev.add_argument("--scenes", type=int, help="limit scene count (default: all)")
    ev.add_argument("--seed", type=int, help="experiment seed (default: 0)")
    ev.add_argument("--report", help="JSON report path")

    sw = sub.add_parser("sweep", help="measure polar patterns on an azimuth grid")
    common(sw)
    sw.add_argument("--filter", help="identity | oracle-diag | oracle-full | lti | nn")
    sw.add_argument("--weights", help="weight bundle (.dalw), required for nn")
    sw.add_argument("--grid", type=int, help="azimuth grid size (default: 360)")
    sw.add_argument("--signals", type=int, help="probe signals per azimuth (default: 16)")
    sw.add_argument("--seed", type=int, help="probe seed (default: 0)")
    sw.add_argument("--out", help="polar response CSV (metadata lands beside it)")

    ins = sub.add_parser("inspect", help="inspect artifacts")
    isub = ins.add_subparsers(dest="inspect_command", required=True)
    insw = isub.add_parser("weights", help="print a bundle's descriptor and tensor table")
    insw.add_argument("path", help="weight bundle (.dalw)")

    return parser


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "dataset":
        return cmd_dataset_gen(merge_flags(args, GEN_DEFAULTS))
    if args.command == "beamform":
        return cmd_beamform(merge_flags(args, BEAMFORM_DEFAULTS))
    if args.command == "dealias":
        return cmd_dealias(merge_flags(args, DEALIAS_DEFAULTS))
    if args.command == "eval":
        return cmd_eval(merge_flags(args, EVAL_DEFAULTS))
    if args.command == "sweep":
        return cmd_sweep(merge_flags(args, SWEEP_DEFAULTS))
    return cmd_inspect_weights(args.path)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (InvalidArgumentError, UnsupportedConfigurationError) as exc:
        print(f"dealias: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, OSError) as exc:
        print(f"dealias: {exc}", file=sys.stderr)
        return 3
    except (NumericError, UndefinedMetricError) as exc:
        print(f"dealias: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
