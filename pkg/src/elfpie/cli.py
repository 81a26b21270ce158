"""Command-line entry point: ``elfpie <subcommand> ...``.

Exit codes: 0 success, 2 usage error (unknown flag/subcommand), 3 missing
file, 4 failed validation, 5 malformed archive, 6 reconstruction failure,
1 anything else.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import archive, render
from .bench import benchmark_grid, desk_truth, load_protocol, write_csv
from .degrade import simulate
from .metrics import score_reconstruction
from .model import (DegradationSpec, ReconstructionConfig, SystemGeometry, ValidationError, desk_geometry)
from .optics import multiplexed_plan, sequential_plan
from .solver import ReconstructionError, reconstruct

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_MISSING, EXIT_INVALID, EXIT_ARCHIVE, EXIT_RECON = 0, 1, 2, 3, 4, 5, 6

log = logging.getLogger("elfpie")


def _load_image(path, shape) -> np.ndarray:
    """Grayscale image resized to ``shape`` and scaled to ``[0.1, 1]``."""
    from PIL import Image

    if not os.path.exists(path):
        raise FileNotFoundError(path)
    img = Image.open(path).convert("F")
    if img.size != (shape[1], shape[0]):
        img = img.resize((shape[1], shape[0]), Image.BICUBIC)
    a = np.asarray(img, dtype=np.float64)
    lo, hi = a.min(), a.max()
    unit = (a - lo) / (hi - lo) if hi > lo else np.zeros_like(a)
    return 0.1 + 0.9 * unit


def cmd_simulate(args) -> int:
    geometry = SystemGeometry.from_dict(archive.load_json(args.geometry)) if args.geometry else desk_geometry()
    problems = geometry.check()
    if problems:
        raise ValidationError(problems)
    deg = DegradationSpec.from_dict(archive.load_json(args.degrade)) if args.degrade else DegradationSpec()
    if args.seed is not None:
        deg = DegradationSpec.from_dict({**deg.to_dict(), "seed": args.seed})
    if args.truth_amp or args.truth_phase:
        if not (args.truth_amp and args.truth_phase):
            raise ValidationError(["--truth-amp and --truth-phase must be given together"])
        field = _load_image(args.truth_amp, geometry.hr_size) * np.exp(
            1j * _load_image(args.truth_phase, geometry.hr_size))
    else:
        field = desk_truth(deg.seed, geometry)
    if args.group_size > 1:
        plan = multiplexed_plan(geometry, args.group_size, seed=deg.seed)
    else:
        plan = sequential_plan(geometry)
    stack = simulate(field, geometry, plan, deg, threads=args.threads)
    if args.quantize:
        stack = stack.with_images(archive.quantize(stack.images, args.quantize))
    archive.save_dataset(stack, args.out, deg, deg.seed)
    print(f"wrote {stack.images.shape[0]} frames to {args.out}")
    return EXIT_OK


def _config(args) -> ReconstructionConfig:
    raw = archive.load_json(args.config) if args.config else {}
    if args.iterations is not None:
        raw["iterations"] = args.iterations
    if args.literal_intensity_w:
        raw["literal_intensity_w"] = True
    raw["threads"] = args.threads
    if args.deterministic:
        raw["deterministic_reduction"] = True
    else:
        raw.setdefault("deterministic_reduction", False)
    return ReconstructionConfig.from_dict(raw).validated()


def cmd_reconstruct(args) -> int:
    stack = archive.load_dataset(args.data)
    config = _config(args)
    rec = reconstruct(stack, config=config)
    out = archive.save_reconstruction(rec, config, args.out)
    render.plot_loss_trace(rec.trace, out / "loss_curve.png", f"{config.fidelity_mode} fidelity")
    t = rec.trace[-1]
    print(f"iterations={config.iterations} fidelity={t.fidelity:.6g} total={t.total:.6g} out={out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    rec = archive.load_reconstruction(args.rec)
    stack = archive.load_dataset(args.truth)
    if not stack.has_truth:
        raise ValidationError([f"{args.truth} carries no ground truth"])
    field = rec["amplitude"] * np.exp(1j * rec["phase"])
    amp, ph, mean = score_reconstruction(field, stack.truth_amplitude, stack.truth_phase)
    print("lsnr_amp,lsnr_phase,lsnr_mean")
    print(f"{amp:.4f},{ph:.4f},{mean:.4f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    proto = load_protocol(args.protocol)
    cells = benchmark_grid(proto["cells"], proto["methods"], proto["repeats"], proto["iterations"],
                           proto["seed"], threads=args.threads, deterministic=args.deterministic,
                           progress=log.info)
    write_csv(cells, args.out)
    fig = Path(args.out).with_suffix(".png")
    render.plot_benchmark([c for c in cells if not c.failed], fig)
    for c in cells:
        if c.failed:
            print(f"failed cell: {c.noise} {c.level:g} d={c.d * 1e3:g}mm c={c.c:g} {c.method}: {c.error}",
                  file=sys.stderr)
    print(f"wrote {args.out} and {fig}")
    return EXIT_OK


def cmd_render(args) -> int:
    src = Path(args.input)
    if not src.exists():
        raise FileNotFoundError(src)
    planes = {}
    if (src / "result.json").exists():
        rec = archive.load_reconstruction(src)
        planes = dict(amplitude=rec["amplitude"], phase=rec["phase"], spectrum=rec["spectrum"])
    elif (src / "meta.json").exists():
        stack = archive.load_dataset(src)
        planes = dict(frames=stack.images, amplitude=stack.truth_amplitude, phase=stack.truth_phase)
    else:
        raise FileNotFoundError(f"{src}: neither result.json nor meta.json found")
    plane = render.select_plane(args.target, frame=args.frame, **planes)
    render.save_gray(plane, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("--deterministic", action="store_true", default=argparse.SUPPRESS,
                        help="fixed-order reduction (bit-reproducible across thread counts)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="elfpie", description="error-laxity Fourier ptychographic reconstruction")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker threads")
    p.add_argument("--deterministic", action="store_true", help="fixed-order reduction")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a degraded acquisition")
    s.add_argument("--geometry", help="SystemGeometry JSON (default: desk geometry)")
    s.add_argument("--truth-amp", help="amplitude image (scaled to [0.1, 1])")
    s.add_argument("--truth-phase", help="phase image (scaled to [0.1, 1] rad)")
    s.add_argument("--degrade", help="DegradationSpec JSON (default: clean)")
    s.add_argument("--seed", type=int)
    s.add_argument("--group-size", type=int, default=1, help="LEDs per exposure")
    s.add_argument("--quantize", type=int, choices=[8, 12, 16], help="round frames to this many bits")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_simulate)

    r = sub.add_parser("reconstruct", parents=[common], help="run Elfpie on a dataset")
    r.add_argument("--data", required=True)
    r.add_argument("--config", help="ReconstructionConfig JSON")
    r.add_argument("--iterations", type=int)
    r.add_argument("--literal-intensity-w", action="store_true",
                   help="intensity mode: use the amplitude-residual W variant (not the exact gradient)")
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_reconstruct)

    e = sub.add_parser("evaluate", parents=[common], help="LSNR of a reconstruction against ground truth")
    e.add_argument("--rec", required=True)
    e.add_argument("--truth", required=True)
    e.set_defaults(fn=cmd_evaluate)

    b = sub.add_parser("bench", parents=[common], help="run a benchmark protocol")
    b.add_argument("--protocol", required=True)
    b.add_argument("--out", required=True, help="CSV path; a .png figure is written next to it")
    b.set_defaults(fn=cmd_bench)

    d = sub.add_parser("render", parents=[common], help="export a plane as 8-bit grayscale")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--target", required=True, choices=render.TARGETS)
    d.add_argument("--frame", type=int, default=0, help="frame index for raw_frame")
    d.add_argument("--out", required=True)
    d.set_defaults(fn=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING
    except ValidationError as exc:
        print(f"error: validation failed: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except archive.ArchiveError as exc:
        print(f"error: bad archive: {exc}", file=sys.stderr)
        return EXIT_ARCHIVE
    except ReconstructionError as exc:
        print(f"error: reconstruction failed: {exc}", file=sys.stderr)
        return EXIT_RECON
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
