"""Command line front end.

Exit codes: 0 on success, 1 for usage or configuration problems, 2 for
data errors (unreadable rasters, malformed datasets, degenerate inputs).
"""
from __future__ import annotations

import argparse
import os
import sys

from . import classical, config as config_mod, metrics, model, viz, wald
from .dataset import load_dataset, manifest_hash, save_dataset
from .errors import ConfigError, SdrcnnError
from .raster import load_checkpoint, read_raster, write_raster
from .tensor import Tensor4
from .train import evaluate, run_ablation, train


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _add_common(sub):
    sub.add_argument("--config", help="key=value settings file")
    sub.add_argument("--seed", type=int, help="override the configured seed")
    sub.add_argument("--out-dir", required=True, help="directory for all outputs")


def build_parser() -> _Parser:
    parser = _Parser(prog="sdrcnn", description="pansharpening toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic reduced-scale dataset")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit the network on a simulated dataset")
    _add_common(p)
    p.add_argument("--data", required=True, help="dataset directory from simulate")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sharpen", help="fuse one PAN/LRMS pair")
    _add_common(p)
    p.add_argument("--method", required=True, choices=("gs", "sfim", "sdrcnn"))
    p.add_argument("--pan", required=True, help="panchromatic raster (.msr)")
    p.add_argument("--lrms", required=True, help="low-resolution MS raster (.msr)")
    p.add_argument("--checkpoint", help="trained weights, required for sdrcnn")
    p.set_defaults(func=cmd_sharpen)

    p = sub.add_parser("eval", help="score a method on a dataset split")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--method", required=True, choices=("gs", "sfim", "sdrcnn"))
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--mode", default="reduced", choices=("reduced", "full"))
    p.add_argument("--checkpoint")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train and score the ablation grid")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("inspect-features", help="PCA maps of the dense-block activations")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--pan", required=True)
    p.add_argument("--lrms", required=True)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("aem", help="absolute error map between two rasters")
    _add_common(p)
    p.add_argument("--fused", required=True)
    p.add_argument("--reference", required=True)
    p.set_defaults(func=cmd_aem)

    return parser


def _settings(args):
    overrides = {"seed": args.seed} if args.seed is not None else None
    return config_mod.load_config(args.config, overrides)


def _ensure_out(args):
    out = os.fspath(args.out_dir)
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = _settings(args)
    out = _ensure_out(args)
    sensor = config_mod.sensor_model(cfg)
    patch = min(cfg["patch"], cfg["scene_size"])
    samples = []
    for i in range(cfg["scenes"]):
        ms, pan = wald.synth_scene(cfg["seed"] + i, size=cfg["scene_size"],
                                   bands=cfg["bands"], ratio=cfg["ratio"])
        samples.extend(wald.make_samples(ms, pan, sensor, patch=patch,
                                         stride=min(cfg["stride"], patch),
                                         prefix=f"s{i:02d}",
                                         blur_size=cfg["blur_size"]))
    if not samples:
        raise ConfigError("simulation produced no samples; check patch and scene_size")
    split = wald.split([s.id for s in samples], cfg["seed"])
    manifest = save_dataset(samples, split, out)
    print(f"wrote {len(samples)} samples to {out}")
    print(f"manifest {manifest} hash {manifest_hash(out)}")
    return 0


def _write_loss_csv(log, out):
    path = os.path.join(out, "loss.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("iteration,raw,smoothed\n")
        for i, (r, s) in enumerate(zip(log.raw, log.smoothed)):
            fh.write(f"{i},{float(r)!r},{float(s)!r}\n")
    if log.val_iterations:
        with open(os.path.join(out, "val.csv"), "w", encoding="utf-8") as fh:
            fh.write("iteration,val_loss\n")
            for i, v in zip(log.val_iterations, log.val_loss):
                fh.write(f"{i},{float(v)!r}\n")
    return path


def _write_run_manifest(cfg, out, data_dir):
    with open(os.path.join(out, "run.txt"), "w", encoding="utf-8") as fh:
        for key in sorted(cfg):
            fh.write(f"{key}={cfg[key]}\n")
        fh.write(f"dataset_hash={manifest_hash(data_dir)}\n")


def cmd_train(args) -> int:
    cfg = _settings(args)
    out = _ensure_out(args)
    samples, split = load_dataset(args.data)
    tc = config_mod.train_config(cfg)
    result = train(tc, samples, split, out_dir=out)
    _write_loss_csv(result.log, out)
    _write_run_manifest(cfg, out, args.data)
    final = result.log.smoothed[-1]
    print(f"trained {tc.iterations} iterations, smoothed L1 {final:.6f}")
    if result.best_val is not None:
        print(f"best validation L1 {result.best_val:.6f}")
    for path in result.checkpoints:
        print(f"checkpoint {path}")
    return 0


def _forward_opts(meta):
    return {
        "spectral_mapping": meta.get("spectral_mapping", "true") == "true",
        "extra_relu": meta.get("extra_relu", "false") == "true",
    }


def _fuse_files(args, cfg):
    pan = read_raster(args.pan)
    lrms = read_raster(args.lrms)
    if args.method == "sfim":
        return classical.sfim(pan, lrms, smoothing_kernel=cfg["sfim_kernel"],
                              clamp=(cfg["sfim_clamp_lo"], cfg["sfim_clamp_hi"]))
    if args.method == "gs":
        return classical.gram_schmidt(pan, lrms, eps=cfg["gs_eps"])
    if not args.checkpoint:
        raise ConfigError("--checkpoint is required for --method sdrcnn")
    params, meta = load_checkpoint(args.checkpoint)
    opts = _forward_opts(meta)
    return model.sharpen(pan, lrms, params, **opts)


def cmd_sharpen(args) -> int:
    cfg = _settings(args)
    out = _ensure_out(args)
    fused = _fuse_files(args, cfg)
    raster_path = os.path.join(out, "hrms.msr")
    write_raster(fused, raster_path)
    viz.export_png(fused, os.path.join(out, "hrms.png"),
                   vmin=cfg["png_vmin"], vmax=cfg["png_vmax"])
    print(f"wrote {raster_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _settings(args)
    out = _ensure_out(args)
    samples, split = load_dataset(args.data)
    ids = getattr(split, args.split)
    params = None
    forward_opts = None
    if args.method == "sdrcnn":
        if not args.checkpoint:
            raise ConfigError("--checkpoint is required for --method sdrcnn")
        params, meta = load_checkpoint(args.checkpoint)
        forward_opts = _forward_opts(meta)
    classical_opts = None
    if args.method == "sfim":
        classical_opts = {"smoothing_kernel": cfg["sfim_kernel"],
                          "clamp": (cfg["sfim_clamp_lo"], cfg["sfim_clamp_hi"])}
    elif args.method == "gs":
        classical_opts = {"eps": cfg["gs_eps"]}
    report = evaluate(args.method, samples, ids, mode=args.mode, params=params,
                      sensor=config_mod.sensor_model(cfg), forward_opts=forward_opts,
                      classical_opts=classical_opts,
                      block=cfg["q_block"], shift=cfg["q_shift"])
    path = os.path.join(out, "report.csv")
    report.to_csv(path)
    print(f"{args.method} on {args.split} ({report.count} samples)")
    for name, (mean, std) in report.summary().items():
        print(f"  {name}: {mean:.6f} +/- {std:.6f} (ideal {report.ideal[name]})")
    print(f"wrote {path}")
    return 0


def cmd_ablate(args) -> int:
    cfg = _settings(args)
    out = _ensure_out(args)
    samples, split = load_dataset(args.data)
    tc = config_mod.train_config(cfg)
    results = run_ablation(tc, samples, split, out_dir=out,
                           sensor=config_mod.sensor_model(cfg))
    summary_path = os.path.join(out, "summary.csv")
    with open(summary_path, "w", encoding="utf-8") as fh:
        fh.write("variant,metric,mean,std\n")
        for name, _, report in results:
            for metric_name, (mean, std) in report.summary().items():
                fh.write(f"{name},{metric_name},{mean!r},{std!r}\n")
    for name, _, report in results:
        q2n_mean = report.summary()["q2n"][0]
        print(f"{name}: q2n {q2n_mean:.4f}")
    print(f"wrote {summary_path}")
    return 0


def cmd_inspect(args) -> int:
    cfg = _settings(args)
    out = _ensure_out(args)
    params, meta = load_checkpoint(args.checkpoint)
    opts = _forward_opts(meta)
    pan = read_raster(args.pan)
    lrms = read_raster(args.lrms)
    trace = model.dense_forward(Tensor4(pan[None]), Tensor4(lrms[None]), params,
                                spectral_mapping=opts["spectral_mapping"],
                                extra_relu=opts["extra_relu"], training=False)
    for i, act in enumerate(trace.additions, 1):
        maps = viz.pca_features(act.data[0])
        write_raster(maps, os.path.join(out, f"features_block{i}.msr"))
        for j in range(maps.shape[0]):
            viz.export_png(maps[j:j + 1], os.path.join(out, f"features_block{i}_pc{j + 1}.png"),
                           mode="gray")
    print(f"wrote {len(trace.additions) * 4} feature maps to {out}")
    return 0


def cmd_aem(args) -> int:
    cfg = _settings(args)
    out = _ensure_out(args)
    fused = read_raster(args.fused)
    reference = read_raster(args.reference)
    error_map = metrics.aem(fused, reference)
    write_raster(error_map, os.path.join(out, "aem.msr"))
    peak = float(error_map.max())
    viz.export_png(error_map, os.path.join(out, "aem.png"), mode="heat",
                   vmin=0.0, vmax=peak if peak > 0 else 1.0)
    print(f"mean absolute error {float(error_map.mean()):.6f}, peak {peak:.6f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SdrcnnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
