"""Command-line entry point exposing the full pipeline as subcommands.

Every run resolves its configuration (JSON file + dotted overrides + flags),
writes a reproducibility manifest recording that resolved state, and exits
nonzero with a machine-readable JSON error on stderr when anything fails.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from .config import ExperimentConfig, ServiceConfig
from .data.dataset import PairedDataset, load_raw_thermal
from .data.io import DatasetManifest, write_f32
from .data.synthetic import SynthOptions, generate_synthetic_dataset
from .errors import ConfigError, ThermalGenError
from .evaluation.bench import throughput_bench
from .evaluation.features import RandomConvFeatures
from .evaluation.fid import dataset_fid
from .evaluation.grid import disentanglement_grid
from .evaluation.privacy import BlobDetector, ExternalCommandDetector, privacy_harness
from .models.bundle import load_bundle, save_bundle
from .training.latents import LatentCodeSet, build_latent_set
from .training.loop import train_gan, train_inversion


# --------------------------------------------------------------------------
# shared helpers


def _resolve_config(args) -> ExperimentConfig:
    config = (
        ExperimentConfig.from_json(args.config)
        if getattr(args, "config", None)
        else ExperimentConfig()
    )
    overrides = {}
    for item in getattr(args, "set", []) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key] = value
    if overrides:
        config = config.apply_overrides(overrides)
    return config


def _write_manifest(path: Path, command: str, args, config=None, extra=None) -> None:
    """Record the resolved run configuration next to the run's outputs."""
    skip = {"func", "set"}
    options = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in skip and not k.startswith("_")
    }
    options["overrides"] = list(getattr(args, "set", []) or [])
    payload = {
        "command": command,
        "options": options,
        "created_unix": time.time(),
    }
    if config is not None:
        payload["resolved_config"] = config.to_dict()
    if extra:
        payload.update(extra)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _emit(report: dict, out: Optional[Path] = None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")


def _print_error(exc: BaseException) -> None:
    detail = {"type": type(exc).__name__, "message": str(exc)}
    sample_id = getattr(exc, "sample_id", None)
    if sample_id is not None:
        detail["sample_id"] = sample_id
    print(json.dumps({"error": detail}), file=sys.stderr)


def _parse_resolutions(text: str) -> List[Tuple[int, int]]:
    """Parse 'WxH,WxH,...' resolution lists into (height, width) tuples."""
    out = []
    for token in text.split(","):
        token = token.strip().lower()
        parts = token.split("x")
        if len(parts) != 2:
            raise ConfigError(f"bad resolution {token!r}; expected WIDTHxHEIGHT")
        try:
            width, height = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"bad resolution {token!r}; expected integers") from None
        if width < 1 or height < 1:
            raise ConfigError(f"resolution {token!r} must be positive")
        out.append((height, width))
    if not out:
        raise ConfigError("empty resolution list")
    return out


def _parse_int_list(text: str, flag: str) -> List[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError(f"{flag} expects at least one integer")
    return values


# --------------------------------------------------------------------------
# subcommand handlers


def cmd_synth_data(args) -> int:
    config = _resolve_config(args)
    options = SynthOptions()
    if args.empty_fraction is not None:
        options.empty_fraction = args.empty_fraction
    if args.person_scale is not None:
        options.person_scale_min, options.person_scale_max = args.person_scale
    manifest = generate_synthetic_dataset(
        args.out, n=args.n, seed=args.seed, data_config=config.data, options=options
    )
    _write_manifest(
        Path(args.out) / "run_manifest.json",
        "synth-data",
        args,
        config=config,
        extra={"n_samples": len(manifest)},
    )
    print(json.dumps({"out": str(args.out), "n_samples": len(manifest)}))
    return 0


def cmd_preprocess(args) -> int:
    dataset = PairedDataset.open(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = []
    heat_min, heat_max = np.inf, -np.inf
    rgb_sum = np.zeros(3)
    rgb_sq = np.zeros(3)
    n_px = 0
    for sample in dataset.samples:
        heat_path = out_dir / f"{sample.sample_id}_heatmap.f32"
        rgb_path = out_dir / f"{sample.sample_id}_rgb.f32"
        write_f32(heat_path, sample.heatmap)
        write_f32(rgb_path, sample.rgb)
        entry = {
            "sample_id": sample.sample_id,
            "heatmap": heat_path.name,
            "heatmap_shape": list(sample.heatmap.shape),
            "rgb": rgb_path.name,
            "rgb_shape": list(sample.rgb.shape),
        }
        if sample.mask_lowres is not None:
            mask_path = out_dir / f"{sample.sample_id}_mask.f32"
            write_f32(mask_path, sample.mask_lowres)
            entry["mask"] = mask_path.name
        index.append(entry)
        heat_min = min(heat_min, float(sample.heatmap.min()))
        heat_max = max(heat_max, float(sample.heatmap.max()))
        flat = sample.rgb.reshape(-1, 3).astype(np.float64)
        rgb_sum += flat.sum(axis=0)
        rgb_sq += (flat**2).sum(axis=0)
        n_px += flat.shape[0]
    mean = rgb_sum / n_px
    std = np.sqrt(np.maximum(rgb_sq / n_px - mean**2, 0.0))
    summary = {
        "n_samples": len(dataset),
        "heatmap_range": [heat_min, heat_max],
        "rgb_channel_mean": [float(v) for v in mean],
        "rgb_channel_std": [float(v) for v in std],
    }
    (out_dir / "index.json").write_text(
        json.dumps({"summary": summary, "samples": index}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    _write_manifest(out_dir / "run_manifest.json", "preprocess", args, extra=summary)
    print(json.dumps(summary))
    return 0


def cmd_train_gan(args) -> int:
    config = _resolve_config(args)
    if args.seed is not None:
        config = config.apply_overrides({"train_gan.seed": str(args.seed)})
    dataset = PairedDataset.open(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir / "run_manifest.json", "train-gan", args, config=config)
    bundle, history = train_gan(
        dataset,
        config.model,
        config.loss,
        config.train_gan,
        out_dir=out_dir,
        resume_from=Path(args.resume) if args.resume else None,
    )
    bundle_path = out_dir / "bundle_gan.tgb"
    save_bundle(bundle_path, bundle)
    last = history[-1] if history else {}
    print(
        json.dumps(
            {
                "bundle": str(bundle_path),
                "steps": bundle.meta.get("step"),
                "final_d_total": last.get("d_total"),
                "final_g_total": last.get("g_total"),
            }
        )
    )
    return 0


def cmd_train_inversion(args) -> int:
    config = _resolve_config(args)
    if args.seed is not None:
        config = config.apply_overrides({"train_inversion.seed": str(args.seed)})
    dataset = PairedDataset.open(args.data)
    bundle = load_bundle(args.bundle)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir / "run_manifest.json", "train-inversion", args, config=config)
    updated, history = train_inversion(
        dataset,
        bundle,
        config.loss,
        config.train_inversion,
        out_dir=out_dir,
        resume_from=Path(args.resume) if args.resume else None,
    )
    bundle_path = out_dir / "bundle_inversion.tgb"
    save_bundle(bundle_path, updated)
    last = history[-1] if history else {}
    print(
        json.dumps(
            {
                "bundle": str(bundle_path),
                "steps": updated.meta.get("step"),
                "final_inv_l1": last.get("inv_l1"),
            }
        )
    )
    return 0


def cmd_build_latents(args) -> int:
    dataset = PairedDataset.open(args.data)
    bundle = load_bundle(args.bundle)
    latent_set = build_latent_set(dataset, bundle, batch_size=args.batch_size)
    out = Path(args.out)
    latent_set.save(out)
    _write_manifest(
        out.parent / (out.stem + ".manifest.json"),
        "build-latents",
        args,
        extra={"n_codes": len(latent_set)},
    )
    print(json.dumps({"out": str(out), "n_codes": len(latent_set)}))
    return 0


def _dataset_rgb(dataset: PairedDataset, limit: Optional[int]) -> np.ndarray:
    n = len(dataset) if limit is None else min(limit, len(dataset))
    return np.stack([dataset.samples[i].rgb for i in range(n)])


def cmd_eval_fid(args) -> int:
    if (args.generated is None) == (args.bundle is None):
        raise ConfigError("eval-fid needs exactly one of --generated or --bundle")
    dataset = PairedDataset.open(args.data)
    real = _dataset_rgb(dataset, args.n)
    if args.generated is not None:
        generated = _dataset_rgb(PairedDataset.open(args.generated), args.n)
        source = {"kind": "dataset", "path": str(args.generated)}
    else:
        bundle = load_bundle(args.bundle)
        generator = bundle.build_generator(ema=True)
        n = real.shape[0]
        z = torch.randn(
            n,
            generator.config.latent_dim,
            generator=torch.Generator().manual_seed(args.seed),
        ).numpy()
        heatmaps = np.stack([dataset.samples[i].heatmap for i in range(n)])
        chunks = [
            generator.synthesize(z[i : i + 16], heatmaps[i : i + 16])
            for i in range(0, n, 16)
        ]
        generated = np.concatenate(chunks)
        source = {"kind": "bundle", "path": str(args.bundle), "z_seed": args.seed}
    extractor = RandomConvFeatures(dim=args.feature_dim, seed=args.feature_seed)
    value = dataset_fid(real, generated, extractor)
    _emit(
        {
            "fid": value,
            "n_real": int(real.shape[0]),
            "n_generated": int(generated.shape[0]),
            "generated_source": source,
            "extractor": {
                "name": "random-conv",
                "dim": args.feature_dim,
                "seed": args.feature_seed,
            },
        },
        out=args.out,
    )
    return 0


def cmd_grid(args) -> int:
    latent_set = LatentCodeSet.load(args.latents)
    bundle = load_bundle(args.bundle)
    generator = bundle.build_generator(ema=True)
    dataset = PairedDataset.open(args.data)
    k = min(args.codes, len(latent_set))
    n = min(args.heatmaps, len(dataset))
    rng = np.random.default_rng(args.seed)
    code_idx = sorted(rng.choice(len(latent_set), size=k, replace=False).tolist())
    heat_idx = sorted(rng.choice(len(dataset), size=n, replace=False).tolist())
    codes = [latent_set.codes[i].values for i in code_idx]
    heatmaps = [dataset.samples[j].heatmap for j in heat_idx]

    by_id = {s.sample_id: s for s in dataset.samples}
    headers = [
        by_id[latent_set.codes[i].code_id].rgb
        for i in code_idx
        if latent_set.codes[i].code_id in by_id
    ]
    header_images = headers if len(headers) == k else None

    out = Path(args.out)
    disentanglement_grid(generator, codes, heatmaps, header_images, out_path=out)
    _write_manifest(
        out.parent / (out.stem + ".manifest.json"),
        "grid",
        args,
        extra={
            "code_ids": [latent_set.codes[i].code_id for i in code_idx],
            "heatmap_sample_ids": [dataset.samples[j].sample_id for j in heat_idx],
        },
    )
    print(json.dumps({"out": str(out), "codes": k, "heatmaps": n}))
    return 0


def cmd_privacy(args) -> int:
    manifest = DatasetManifest.load(args.data)
    frames = [load_raw_thermal(manifest, entry) for entry in manifest.entries]
    present = [bool((entry.meta or {}).get("person_present", True)) for entry in manifest.entries]
    resolutions = _parse_resolutions(args.resolutions)
    if args.detector_cmd:
        detector = ExternalCommandDetector(args.detector_cmd.split())
    else:
        detector = BlobDetector(threshold_c=args.threshold_c, min_cells=args.min_cells)
    report = privacy_harness(frames, present, resolutions, detector)
    out = Path(args.out)
    report.save_csv(out)
    _write_manifest(
        out.parent / (out.stem + ".manifest.json"),
        "privacy",
        args,
        extra=report.to_dict(),
    )
    _emit(report.to_dict(), out=out.parent / (out.stem + ".json"))
    return 0


def cmd_bench(args) -> int:
    bundle = load_bundle(args.bundle)
    generator = bundle.build_generator(ema=True)
    report_obj = throughput_bench(
        generator,
        batch_sizes=_parse_int_list(args.batch_sizes, "--batch-sizes"),
        iterations=args.iterations,
        warmup=args.warmup,
        seed=args.seed,
    )
    _emit(report_obj.to_dict(), out=args.out)
    return 0


def cmd_serve(args) -> int:
    from .service.app import run_service

    config = _resolve_config(args)
    service = config.service
    updates = {}
    if args.port is not None:
        updates["port"] = args.port
    if args.host is not None:
        updates["host"] = args.host
    if args.fps is not None:
        updates["fps"] = args.fps
    if args.encode is not None:
        updates["encode"] = args.encode
    if args.loop:
        updates["loop"] = True
    if args.exit_when_done:
        updates["exit_when_done"] = True
    if args.ui is not None:
        updates["ui_dir"] = str(args.ui)
    if updates:
        service = ServiceConfig.from_dict({**service.to_dict(), **updates})
    if args.manifest_out:
        _write_manifest(Path(args.manifest_out), "serve", args, config=config)
    print(
        json.dumps(
            {
                "host": service.host,
                "port": service.port,
                "fps": service.fps,
                "encode": service.encode,
                "loop": service.loop,
            }
        ),
        flush=True,
    )
    run_service(Path(args.bundle), Path(args.latents), Path(args.replay), service)
    return 0


# --------------------------------------------------------------------------
# parser


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None, help="JSON config file")
    sub.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value (repeatable)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermalgen",
        description="Thermal-heatmap-conditioned video synthesis pipeline",
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    p = sub.add_parser("synth-data", help="generate a synthetic paired dataset")
    _add_config_flags(p)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--empty-fraction", type=float, default=None, dest="empty_fraction")
    p.add_argument(
        "--person-scale",
        type=float,
        nargs=2,
        default=None,
        metavar=("MIN", "MAX"),
        dest="person_scale",
    )
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("preprocess", help="materialize and validate model-ready tensors")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train-gan", help="adversarial phase: generator + discriminator")
    _add_config_flags(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--resume", type=Path, default=None, help="checkpoint bundle to resume")
    p.set_defaults(func=cmd_train_gan)

    p = sub.add_parser("train-inversion", help="inversion phase: encoder on frozen generator")
    _add_config_flags(p)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--resume", type=Path, default=None)
    p.set_defaults(func=cmd_train_inversion)

    p = sub.add_parser("build-latents", help="invert every dataset photo into a code set")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--batch-size", type=int, default=32, dest="batch_size")
    p.set_defaults(func=cmd_build_latents)

    p = sub.add_parser("eval-fid", help="feature-distribution distance for a model or dataset")
    p.add_argument("--data", type=Path, required=True, help="real dataset dir")
    p.add_argument("--bundle", type=Path, default=None, help="generate from this bundle")
    p.add_argument("--generated", type=Path, default=None, help="compare to this dataset dir")
    p.add_argument("--n", type=int, default=None, help="cap sample count")
    p.add_argument("--seed", type=int, default=0, help="latent draw seed")
    p.add_argument("--feature-dim", type=int, default=32, dest="feature_dim")
    p.add_argument("--feature-seed", type=int, default=0, dest="feature_seed")
    p.add_argument("--out", type=Path, default=None, help="also write report JSON here")
    p.set_defaults(func=cmd_eval_fid)

    p = sub.add_parser("grid", help="codes x heatmaps disentanglement grid PNG")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--latents", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True, help="heatmap source dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--codes", type=int, default=3)
    p.add_argument("--heatmaps", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("privacy", help="detection accuracy vs thermal resolution")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="CSV report path")
    p.add_argument("--resolutions", type=str, default="160x120,16x12,8x5")
    p.add_argument("--threshold-c", type=float, default=28.0, dest="threshold_c")
    p.add_argument("--min-cells", type=int, default=1, dest="min_cells")
    p.add_argument(
        "--detector-cmd",
        type=str,
        default=None,
        dest="detector_cmd",
        help="external detector command (JSON stdin/stdout contract)",
    )
    p.set_defaults(func=cmd_privacy)

    p = sub.add_parser("bench", help="generator throughput benchmark")
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--batch-sizes", type=str, default="1,8", dest="batch_sizes")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the streaming conference service")
    _add_config_flags(p)
    p.add_argument("--bundle", type=Path, required=True)
    p.add_argument("--latents", type=Path, required=True)
    p.add_argument("--replay", type=Path, required=True, help="dataset dir to replay")
    p.add_argument("--loop", action="store_true")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--host", type=str, default=None)
    p.add_argument("--fps", type=float, default=None)
    p.add_argument("--encode", choices=["jpeg", "png"], default=None)
    p.add_argument("--ui", type=Path, default=None, help="static UI directory to mount")
    p.add_argument("--exit-when-done", action="store_true", dest="exit_when_done")
    p.add_argument("--manifest-out", type=Path, default=None, dest="manifest_out")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except ThermalGenError as exc:
        _print_error(exc)
        return 1
    except FileNotFoundError as exc:
        _print_error(exc)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
