"""Command-line entry point: ``awg <command> ...``.

Exit codes: 0 success, 1 contract violation, 2 I/O failure,
3 infeasible synthesis config, 4 manifest schema violation.
Set ``AWG_LOG`` (DEBUG, INFO, WARNING, ...) for verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from awg import pipeline
from awg.errors import AwgError, InfeasibleConfig, ManifestError
from awg.io import load_manifest
from awg.multiview import CameraLayout
from awg.pipeline import PipelineConfig
from awg.vp_synthesis import VanishingPoint

log = logging.getLogger("awg")

EXIT_OK = 0
EXIT_CONTRACT = 1
EXIT_IO = 2
EXIT_INFEASIBLE = 3
EXIT_SCHEMA = 4


def _size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from exc
    return w, h


def _vp(text: str) -> VanishingPoint:
    try:
        return VanishingPoint.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected u,v in [0, 1], got {text!r}") from exc


def cmd_vp_synth(args: argparse.Namespace) -> int:
    w, h = args.final_size
    cfg = PipelineConfig(n_frames=args.frames, final_w=w, final_h=h)
    vp = None if args.auto_vp else args.vp
    if vp is None and not args.auto_vp:
        log.info("no --vp given; estimating the vanishing point")
    if not args.image.is_file():
        raise FileNotFoundError(f"cannot read image {args.image}")
    summary = pipeline.vp_synth(args.image, args.out, cfg, vp)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    print(f"ok: {len(manifest.entries)} entries")
    return EXIT_OK


def cmd_fuse(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    if args.entry:
        for entry_id in args.entry:
            manifest.entry(entry_id)
    written = pipeline.fuse_manifest(manifest, args.out, args.entry, jobs=args.jobs)
    for path in written:
        print(path)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    cfg = PipelineConfig(alpha=args.alpha, pool_factor=args.pool_factor, seed=args.seed)
    summary = pipeline.train(manifest, args.out, cfg, args.steps)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    manifest = load_manifest(args.manifest)
    entry = manifest.entry(args.entry) if args.entry else manifest.entries[0]
    plan_json = pipeline.sample(
        args.checkpoint,
        entry,
        args.out,
        args.seed,
        total_frames=args.total_frames,
        segment_len=args.segment_len,
        n_steps=args.n_steps,
    )
    if args.dump_plan:
        print(plan_json)
    return EXIT_OK


def _layout(args: argparse.Namespace) -> CameraLayout:
    labels = args.cams.split(",") if args.cams else None
    return CameraLayout.parse(args.layout, labels)


def cmd_stitch(args: argparse.Namespace) -> int:
    layout = _layout(args)
    dirs = [Path(p) for p in args.inputs.split(",")]
    for d in dirs:
        if not d.is_dir():
            raise FileNotFoundError(f"no such directory {d}")
    n = pipeline.stitch_dirs(dirs, layout, args.out)
    print(f"wrote {n} composite frames")
    return EXIT_OK


def cmd_unstitch(args: argparse.Namespace) -> int:
    if not args.input.is_dir():
        raise FileNotFoundError(f"no such directory {args.input}")
    counts = pipeline.unstitch_dir(args.input, _layout(args), args.out)
    print(json.dumps(counts, sort_keys=True))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    for d in (args.gen, args.src, args.mask):
        if not d.is_dir():
            raise FileNotFoundError(f"no such directory {d}")
    report = pipeline.eval_mask_fidelity(args.gen, args.src, args.mask)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        args.out.write_text(text + "\n")
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="awg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("vp-synth", help="turn a still image into a zoom-in pseudo-video")
    p.add_argument("image", type=Path)
    p.add_argument("--out", type=Path, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--vp", type=_vp, help="vanishing point as normalized u,v")
    group.add_argument("--auto-vp", action="store_true", help="estimate the vanishing point (default without --vp)")
    p.add_argument("--frames", type=int, default=45)
    p.add_argument("--final-size", type=_size, default=(960, 544), metavar="WxH")
    p.set_defaults(func=cmd_vp_synth)

    p = sub.add_parser("validate-manifest", help="check a dataset manifest")
    p.add_argument("manifest", type=Path)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fuse", help="write fused RGB control frames per manifest entry")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--entry", action="append", help="entry id (repeatable); default all")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("train-toy", help="train the toy denoiser on a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--pool-factor", type=int, default=4)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sample", help="generate frames for a manifest entry")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--entry")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--total-frames", type=int)
    p.add_argument("--segment-len", type=int)
    p.add_argument("--n-steps", type=int, default=8)
    p.add_argument("--dump-plan", action="store_true", help="print the segment plan JSON")
    p.set_defaults(func=cmd_sample)

    for name, func, help_text in (
        ("stitch", cmd_stitch, "tile camera frame directories into composites"),
        ("unstitch", cmd_unstitch, "split composites back into camera directories"),
    ):
        p = sub.add_parser(name, help=help_text)
        if name == "stitch":
            p.add_argument("--inputs", required=True, help="comma-separated camera directories, layout order")
        else:
            p.add_argument("--input", type=Path, required=True)
        p.add_argument("--layout", default="2x3", metavar="RxC")
        p.add_argument("--cams", help="comma-separated camera labels")
        p.add_argument("--out", type=Path, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("eval-mask-fidelity", help="MAE inside and outside the object mask")
    p.add_argument("--gen", type=Path, required=True)
    p.add_argument("--src", type=Path, required=True)
    p.add_argument("--mask", type=Path, required=True)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = getattr(logging, os.environ.get("AWG_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(
        level=level,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ManifestError as exc:
        print(f"awg: manifest error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except InfeasibleConfig as exc:
        print(f"awg: infeasible configuration: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"awg: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AwgError, ValueError) as exc:
        print(f"awg: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
