"""Command-line front end: train bundles and export parity fixtures.

Exit codes: 0 success, 2 usage or configuration error, 3 data or file
format error, 4 training divergence.
"""

from __future__ import annotations

import argparse
import json
import sys

from .dalw import load_bundle, save_bundle
from .errors import ConfigError, DataError, DivergenceError
from .fixture import export_parity_fixture, verify_fixture
from .train import train


def _write_log(log: dict, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(log, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    overrides = {
        "batch": args.batch,
        "lr": args.lr,
        "epochs": args.epochs,
        "base": args.base,
        "depth": args.depth,
        "seed": args.seed,
        "max_steps": args.max_steps,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}

    def progress(step, epoch, value):
        if args.quiet or step % 50:
            return
        print(f"epoch {epoch} step {step} loss {value:.6f}", flush=True)

    result = train(args.manifest, args.preset, args.scale, args.mode,
                   overrides, progress=progress)
    save_bundle(result.bundle, args.out)
    if args.log:
        _write_log(result.log, args.log)
    print(f"wrote {args.out}: final loss {result.log['final_loss']:.6f} "
          f"after {result.log['steps']} steps ({result.log['wall_time_s']:.1f} s)")
    return 0


def cmd_fixture(args) -> int:
    bundle = load_bundle(args.bundle)
    export_parity_fixture(bundle, args.seed, args.out,
                          bins=args.bins, frames=args.frames)
    deviation = verify_fixture(args.out)
    print(f"wrote {args.out}: self-check max deviation {deviation:.3e}")
    if deviation >= 1e-6:
        print("self-check failed: deviation not below 1e-6", file=sys.stderr)
        return 4
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dealias-train",
        description="Train spectral-mask U-Net bundles from rendered scene corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a bundle from a scene manifest")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--preset", required=True)
    p_train.add_argument("--scale", default="desk")
    p_train.add_argument("--mode", default="diag", choices=("diag", "full"))
    p_train.add_argument("--out", required=True, help="output bundle path")
    p_train.add_argument("--log", help="optional JSON training-log path")
    p_train.add_argument("--batch", type=int)
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--base", type=int)
    p_train.add_argument("--depth", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--max-steps", type=int, dest="max_steps")
    p_train.add_argument("--quiet", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_fix = sub.add_parser("fixture", help="export a parity fixture from a bundle")
    p_fix.add_argument("--bundle", required=True)
    p_fix.add_argument("--seed", type=int, default=0)
    p_fix.add_argument("--out", required=True)
    p_fix.add_argument("--bins", type=int)
    p_fix.add_argument("--frames", type=int)
    p_fix.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"dealias-train: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print(f"dealias-train: {exc}", file=sys.stderr)
        return 3
    except DivergenceError as exc:
        print(f"dealias-train: {exc}", file=sys.stderr)
        print(f"diagnostics: {json.dumps(exc.diagnostics)}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
