"""Command-line front end.

    sfrelay simulate     Monte-Carlo sweep over S-D SNR and relay flip rate
    sfrelay bounds       achievable-rate constraints for a binary model
    sfrelay dump-images  per-iteration reconstructions for one operating point
    sfrelay forward      run the semantic codec on a tensor file

Every `simulate` flag can also live in a key=value config file (# comments
allowed); explicit flags override the file.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bounds import RateRegionModel, rate_region
from .harness import (SimConfig, bundled_asset, config_from_mapping,
                      dump_iteration_images, parse_config_file, run_sweep)
from .media import load_image_any
from .semantic import (FEATURE_SHAPE, load_model, sem_decode, sem_encode)


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run the Monte-Carlo sweep")
    p.add_argument("--config", help="key=value file with any of the flags below")
    p.add_argument("--snr-sd", dest="snr_sd_list", metavar="LIST|A:B:STEP",
                   help="S-D SNRs in dB, e.g. -5:9:1 or -5,0,9")
    p.add_argument("--snr-rd", type=float, help="R-D SNR in dB")
    p.add_argument("--rho", dest="rho_list", metavar="LIST",
                   help="relay flip rates, e.g. 0,0.1,0.35")
    p.add_argument("--trials", type=int)
    p.add_argument("--global-iters", type=int)
    p.add_argument("--local-iters", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--seed", dest="master_seed", type=int)
    p.add_argument("--images", help="directory of input images (default: bundled)")
    p.add_argument("--model", help=".sfrw weight file (default: bundled)")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--threads", type=int, help="worker cap (also SFRELAY_THREADS)")
    p.add_argument("--estimate-rho", action="store_true", default=None,
                   help="re-estimate the flip rate each global iteration")


def _simulate(args) -> int:
    raw = parse_config_file(args.config) if args.config else {}
    cfg = config_from_mapping(raw)
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("cmd", "config") and v is not None}
    cfg = config_from_mapping(overrides, base=cfg)

    def progress(done, total, res):
        task, rec, err = res
        if err is not None:
            print(f"[{done}/{total}] trial {task} FAILED: {err}", file=sys.stderr)
        elif done % 10 == 0 or done == total:
            print(f"[{done}/{total}] snr={rec.snr_db:g} rho={rec.rho:g} "
                  f"trial={rec.trial} ed_joint={rec.ed_joint[-1]:.3f} "
                  f"({rec.wall_time:.1f}s)")

    records, summary, failures = run_sweep(cfg, progress=progress)
    print(f"\nwrote {cfg.out} ({len(records)} trials, {len(failures)} failures)")
    print(f"{'snr_db':>7} {'rho':>5} {'ed_joint':>9} {'ed_indep':>9}")
    for row in summary:
        if row["iter"] == cfg.global_iters:
            print(f"{row['snr_db']:7g} {row['rho']:5g} "
                  f"{row['mean_ed_joint']:9.3f} {row['mean_ed_independent']:9.3f}")
    return 1 if failures else 0


def _bounds(args) -> int:
    model = RateRegionModel(rho=args.rho, q=args.q, delta=args.delta)
    b = rate_region(model)
    print(f"r0_min          = {b.r0_min:.6f}")
    print(f"r1_min_no_side  = {b.r1_min_no_side:.6f}")
    print(f"r2_min_no_side  = {b.r2_min_no_side:.6f}")
    print(f"r1_min          = {b.r1_min:.6f}")
    print(f"r2_min          = {b.r2_min:.6f}")
    return 0


def _dump_images(args) -> int:
    cfg = SimConfig(global_iters=args.global_iters, kappa=args.kappa,
                    master_seed=args.seed, model=args.model or "")
    img = load_image_any(args.image) if args.image else \
        load_image_any(sorted(bundled_asset("mini").glob("*.png"))[0])
    paths = dump_iteration_images(cfg, args.snr_sd, args.rho, img, args.out)
    print(f"wrote {len(paths)} files to {args.out}")
    return 0


def _forward(args) -> int:
    model = load_model(args.model or bundled_asset("model.sfrw"))
    if args.input.endswith(".npy"):
        x = np.load(args.input)
    else:
        x = load_image_any(args.input)
    if args.op == "encode":
        out = sem_encode(model, x)
    elif args.op == "decode":
        out = sem_decode(model, x.reshape(FEATURE_SHAPE))
    else:
        out = sem_decode(model, sem_encode(model, x))
    np.save(args.output, out)
    print(f"{args.op}: {x.shape} -> {out.shape}, wrote {args.output}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sfrelay", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="cmd", required=True)

    _add_simulate(sub)

    p = sub.add_parser("bounds", help="print the achievable-rate constraints")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)

    p = sub.add_parser("dump-images", help="write per-iteration reconstructions")
    p.add_argument("--snr-sd", type=float, required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--image", help="input image (default: first bundled sample)")
    p.add_argument("--model", help=".sfrw file (default: bundled)")
    p.add_argument("--out", required=True)
    p.add_argument("--global-iters", type=int, default=7)
    p.add_argument("--kappa", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=42)

    p = sub.add_parser("forward", help="run the codec on a .npy/.png input")
    p.add_argument("--op", choices=("encode", "decode", "reconstruct"),
                   default="encode")
    p.add_argument("--model", help=".sfrw file (default: bundled)")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)

    args = ap.parse_args(argv)
    return {"simulate": _simulate, "bounds": _bounds,
            "dump-images": _dump_images, "forward": _forward}[args.cmd](args)


if __name__ == "__main__":
    sys.exit(main())
