"""Command-line surface: synth, estimate, fuse, train, eval, gradcheck."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import backend
from .configio import ConfigError, echo_config, load_config
from .dataset import DatasetError, load_lightfield, save_dataset
from .dispnet import DispNet
from .falsecolor import emit_error_map, emit_falsecolor
from .fusion import candidate_error, fuse, warping_errors
from .lightfield import auxiliary_views
from .metrics import DENSE_BPR_THRESHOLDS, SPARSE_BPR_THRESHOLDS, evaluate, write_report
from .occlusion import OccNet
from .pfm import PfmError, read_pfm, write_pfm
from .pipeline import estimate_lightfield
from .synthetic import generate_synthetic, single_plane_spec, two_plane_spec
from .training import load_networks, train


def _add_config_args(p):
    p.add_argument("--config", type=Path, default=None, help="INI configuration file")
    p.add_argument("--mode", choices=("dense", "sparse"), default=None,
                   help="sampling/fusion preset (overrides the config file)")


def _cmd_synth(args):
    if args.preset == "single_plane":
        spec = single_plane_spec(args.disparity, resolution=(args.resolution, args.resolution),
                                 channels=args.channels)
    else:
        spec = two_plane_spec(args.bg_disparity, args.fg_disparity,
                              resolution=(args.resolution, args.resolution),
                              channels=args.channels)
    lf, gt, masks = generate_synthetic(spec, seed=args.seed)
    save_dataset(args.out, lf, gt=gt, masks=masks if args.write_masks else None)
    print(f"wrote {lf.u_count}x{lf.v_count} views at {lf.spatial_shape} to {args.out}")
    return 0


def _build_networks(cfg, channels, args, need_occ=False):
    oracle = getattr(args, "oracle", False)
    dcfg = cfg.dispnet_config(channels=channels, oracle=oracle)
    net = DispNet(dcfg, seed=cfg.raw["model"]["seed"])
    occ = OccNet(cfg.occnet_config(channels), seed=cfg.raw["occnet"]["seed"]) if need_occ else None
    return net, occ


def _cmd_estimate(args):
    cfg = load_config(args.config, args.mode)
    lf, gt = load_lightfield(args.lf)
    net, _ = _build_networks(cfg, lf.channels, args)
    if args.weights:
        load_networks(args.weights, net)
    result = estimate_lightfield(lf, net, cfg.pipeline_config())
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_pfm(args.out, result.disparity)
    echo_config(cfg, args.out.with_suffix(".resolved.cfg"))
    if args.viz:
        coarse = cfg.sample_vectors()[0]
        emit_falsecolor(result.disparity, (coarse.s_min / 3, coarse.s_max / 3), args.viz)
        if gt is not None:
            emit_error_map(result.disparity, gt, args.viz.with_suffix(".err.png"))
    print(f"wrote disparity map {result.disparity.shape} to {args.out} "
          f"({len(result.candidates)} candidates fused)")
    return 0


def _cmd_fuse(args):
    cfg = load_config(args.config, args.mode)
    lf, _ = load_lightfield(args.lf)
    fcfg = cfg.fusion_config()
    candidates = []
    for path in args.candidates:
        d = read_pfm(path)
        if d.ndim != 2:
            raise PfmError(f"candidate {path} must be a single-channel map")
        candidates.append(d.astype(np.float64))
    aux = auxiliary_views(lf, cfg.raw["fusion"]["aux_preset"])
    bundles = [candidate_error(warping_errors(lf, d, aux), fcfg) for d in candidates]
    final = fuse([(d, b.e) for d, b in zip(candidates, bundles)], fcfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_pfm(args.out, final.astype(np.float32))
    echo_config(cfg, args.out.with_suffix(".resolved.cfg"))
    print(f"fused {len(candidates)} candidates into {args.out}")
    return 0


def _cmd_train(args):
    cfg = load_config(args.config, args.mode)
    scenes = []
    for d in args.data:
        lf, _ = load_lightfield(d)
        scenes.append(lf)
    channels = scenes[0].channels
    net, occ = _build_networks(cfg, channels, args, need_occ=True)
    tcfg = cfg.train_config()
    if args.epochs is not None:
        tcfg.epochs = args.epochs
    history = train(scenes, net, occ, tcfg, cfg.loss_weights(), out_dir=args.out)
    echo_config(cfg, Path(args.out) / "resolved.cfg")
    if history:
        print(f"trained {len(history)} epochs; final loss {history[-1]['l_full']:.5f} "
              f"(initial {history[0]['l_full']:.5f})")
    else:
        print("0 epochs requested; wrote initial checkpoint only")
    return 0


def _cmd_eval(args):
    est = read_pfm(args.est)
    gt = read_pfm(args.gt)
    thresholds = SPARSE_BPR_THRESHOLDS if args.mode == "sparse" else DENSE_BPR_THRESHOLDS
    row = evaluate(est, gt, thresholds=thresholds, border=args.border)
    row.update({"scene": args.scene, "method": args.method})
    print(f"mse_x100={row['mse_x100']:.6f} "
          + " ".join(f"bpr({t})={row[k]:.3f}%" for k, t in
                     zip(("bpr_a", "bpr_b", "bpr_c"), thresholds)))
    if args.out:
        write_report(args.out, [row])
    return 0


def _cmd_gradcheck(args):
    from .gradcheck import run_suite
    results = run_suite(trials=args.trials, seed=args.seed)
    worst = 0.0
    for kind in sorted(results):
        err = results[kind]
        worst = max(worst, err)
        status = "ok" if err < 1e-4 else "FAIL"
        print(f"{kind:22s} max rel err {err:.3e}  {status}")
    print(f"worst: {worst:.3e}")
    return 0 if worst < 1e-4 else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="lfdepth",
                                     description="Unsupervised light-field disparity estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene dataset")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=("single_plane", "two_plane"), default="single_plane")
    p.add_argument("--disparity", type=float, default=2.0)
    p.add_argument("--bg-disparity", type=float, default=0.0)
    p.add_argument("--fg-disparity", type=float, default=3.0)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--write-masks", action="store_true")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("estimate", help="run the full disparity pipeline on a dataset")
    p.add_argument("--lf", type=Path, required=True, help="dataset directory")
    p.add_argument("--out", type=Path, required=True, help="output PFM path")
    p.add_argument("--weights", type=Path, default=None, help="LFDW1 checkpoint")
    p.add_argument("--oracle", action="store_true",
                   help="untrained mode: gradient features + negated-variance scores")
    p.add_argument("--viz", type=Path, default=None, help="also write a false-color PNG")
    _add_config_args(p)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("fuse", help="fuse precomputed candidate disparity maps")
    p.add_argument("--lf", type=Path, required=True)
    p.add_argument("--candidates", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_config_args(p)
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("train", help="jointly train the disparity and occlusion networks")
    p.add_argument("--data", type=Path, nargs="+", required=True, help="dataset directories")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--epochs", type=int, default=None, help="override the configured epoch count")
    _add_config_args(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate an estimated map against ground truth")
    p.add_argument("--est", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None, help="CSV report path")
    p.add_argument("--scene", default="scene")
    p.add_argument("--method", default="lfdepth")
    p.add_argument("--border", type=int, default=0)
    p.add_argument("--mode", choices=("dense", "sparse"), default="dense")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every autodiff op")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)
    return parser


def main(argv=None):
    backend.configure_threads()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError, PfmError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
