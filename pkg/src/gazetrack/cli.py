"""Command line entry point: ``gazetrack <subcommand> ...``.

Every failure exits nonzero after printing one JSON object on stderr, e.g.
``{"error": "ParseError", "message": "line 3: non-numeric field", "line": 3}``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import BundleParams, build_bundle, load_bundle, write_bundle
from .crf import MAX_REFINE_SIDE, NORMALIZATIONS, CrfParams, refine_vam
from .errors import FormatError, GazeTrackError, InvalidParameter
from .formats import (
    atomic_write,
    decode_pnm,
    encode_pgm,
    format_gaze_log,
    mask_to_pgm,
    parse_gaze_log,
    read_image,
    read_map,
    write_map,
)
from .grid import GridShape
from .gtmg import CANONICAL_RATIOS, DecayParams, build_track, decay_map, distance_map, truncate_track
from .objective import LossWeights, dice_ce_loss, gtmg_loss, total_loss
from .synth import synth_gaze, synth_scene
from .vam import DEFAULT_SIGMA, UNDER_ACTIVATION_THRESHOLD, VamParams, build_vam, threshold_mask

THREADS_ENV = "GAZETRACK_THREADS"
IMAGE_SUFFIXES = (".pgm", ".ppm")


def ratio_tag(r: float) -> str:
    return f"{round(r * 100):03d}"


def parse_ratios(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratio list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty ratio list")
    return vals


def worker_count(requested: int | None) -> int:
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise InvalidParameter(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            requested = os.cpu_count() or 1
    if requested < 1:
        raise InvalidParameter(f"thread count must be >= 1, got {requested}")
    return requested


def run_parallel(fn, items, threads):
    with ThreadPoolExecutor(max_workers=max(1, min(threads, len(items)))) as pool:
        return list(pool.map(fn, items))


def find_image(images_dir: Path, image_id: str) -> Path:
    for suffix in IMAGE_SUFFIXES:
        p = images_dir / f"{image_id}{suffix}"
        if p.exists():
            return p
    raise FormatError(f"no PGM/PPM image for {image_id!r} in {images_dir}")


def image_shape(path: Path) -> GridShape:
    arr = decode_pnm(path.read_bytes())
    return GridShape(arr.shape[1], arr.shape[0])


def load_records(args):
    data = Path(args.gaze).read_bytes()
    default = GridShape(args.width, args.height)
    shapes = None
    images = getattr(args, "images", None)
    if images:
        ids = [r.image_id for r in parse_gaze_log(data, shape=GridShape(1 << 30, 1 << 30))]
        shapes = {i: image_shape(find_image(Path(images), i)) for i in ids}
    return parse_gaze_log(data, shape=default, shapes=shapes)


# argument groups

def add_shape_args(p):
    p.add_argument("--width", type=int, default=224, help="grid width when no image is given")
    p.add_argument("--height", type=int, default=224, help="grid height when no image is given")


def add_vam_args(p):
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA, help="Gaussian std-dev in px")
    p.add_argument("--kernel-radius", type=int, default=None, help="splat radius in px (default ceil(3 sigma))")


def add_crf_args(p):
    d = CrfParams()
    p.add_argument("--w-appearance", type=float, default=d.w_appearance)
    p.add_argument("--theta-alpha", type=float, default=d.theta_alpha)
    p.add_argument("--theta-beta", type=float, default=d.theta_beta)
    p.add_argument("--w-smooth", type=float, default=d.w_smooth)
    p.add_argument("--theta-gamma", type=float, default=d.theta_gamma)
    p.add_argument("--crf-iterations", type=int, default=d.iterations)
    p.add_argument("--crf-epsilon", type=float, default=d.epsilon)
    p.add_argument("--crf-normalization", choices=NORMALIZATIONS, default=d.normalization)
    p.add_argument("--crf-max-side", type=int, default=MAX_REFINE_SIDE,
                   help="refine at reduced resolution above this many px per side")
    p.add_argument("--crf-full-resolution", action="store_true",
                   help="skip downsampling and run brute-force-sized inference")


def add_track_args(p, multi=True):
    if multi:
        p.add_argument("--ratios", type=parse_ratios, default=CANONICAL_RATIOS,
                       help="comma-separated truncation ratios (default 0.5,0.75,1.0)")
        p.add_argument("--beta", type=float, default=10.0, help="decay rate in px")
        p.add_argument("--tau", type=float, default=0.25, help="field-of-view threshold")
    p.add_argument("--points-only", action="store_true", help="distance to fixations, not the polyline")
    p.add_argument("--fast", action="store_true", help="raster + EDT distance instead of exact")


def add_threads_arg(p):
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default ${THREADS_ENV} or cpu count)")


def crf_params(args) -> CrfParams:
    return CrfParams(
        w_appearance=args.w_appearance, theta_alpha=args.theta_alpha, theta_beta=args.theta_beta,
        w_smooth=args.w_smooth, theta_gamma=args.theta_gamma, iterations=args.crf_iterations,
        epsilon=args.crf_epsilon, normalization=args.crf_normalization,
    )


def crf_max_side(args):
    return None if args.crf_full_resolution else args.crf_max_side


# subcommands

def cmd_synth(args):
    shape = GridShape(args.width, args.height)
    out = Path(args.out)
    records = []
    for i in range(args.count):
        scene = synth_scene(shape, args.seed + i)
        atomic_write(out / "images" / f"{scene.image_id}.pgm",
                     encode_pgm(np.floor(scene.intensity * 255.0 + 0.5).astype(np.uint8)))
        atomic_write(out / "gt" / f"{scene.image_id}.pgm", mask_to_pgm(scene.gt_mask))
        records.append(synth_gaze(scene, args.n_fix, args.seed + i))
    atomic_write(out / "gaze.csv", format_gaze_log(records).encode("utf-8"))
    print(f"wrote {len(records)} scenes to {out}")


def cmd_vam(args):
    params = VamParams(args.sigma, args.kernel_radius)
    out = Path(args.out)

    def one(rec):
        vam = build_vam(rec, params)
        write_map(out / f"{rec.image_id}_vam.pfm", vam)
        if args.threshold is not None:
            atomic_write(out / f"{rec.image_id}_mask.pgm", mask_to_pgm(threshold_mask(vam, args.threshold)))
        return rec.image_id

    for image_id in run_parallel(one, load_records(args), worker_count(args.threads)):
        print(image_id)


def cmd_refine(args):
    vam = read_map(args.vam)
    refined = refine_vam(vam, read_image(args.image), crf_params(args), max_side=crf_max_side(args))
    write_map(args.out, refined)
    if args.mask_out:
        atomic_write(args.mask_out, mask_to_pgm(threshold_mask(refined, args.threshold)))


def cmd_distance(args):
    out = Path(args.out)

    def one(rec):
        track = truncate_track(build_track(rec), args.ratio)
        d = distance_map(track, rec.shape, points_only=args.points_only, fast=args.fast)
        write_map(out / f"{rec.image_id}_dist_{ratio_tag(args.ratio)}.pfm", d)
        return rec.image_id

    for image_id in run_parallel(one, load_records(args), worker_count(args.threads)):
        print(image_id)


def cmd_track(args):
    params = DecayParams(args.beta, args.tau)
    out = Path(args.out)

    def one(rec):
        track = build_track(rec)
        for r in args.ratios:
            d = distance_map(truncate_track(track, r), rec.shape, points_only=args.points_only, fast=args.fast)
            write_map(out / f"{rec.image_id}_track_{ratio_tag(r)}.pfm", decay_map(d, params))
        return rec.image_id

    for image_id in run_parallel(one, load_records(args), worker_count(args.threads)):
        print(image_id)


def cmd_bundle(args):
    params = BundleParams(
        vam=VamParams(args.sigma, args.kernel_radius),
        crf=crf_params(args),
        crf_max_side=crf_max_side(args),
        threshold=args.threshold,
        ratios=tuple(args.ratios),
        decay=DecayParams(args.beta, args.tau),
        points_only=args.points_only,
        fast_distance=args.fast,
    )
    images = Path(args.images)
    out = Path(args.out)

    def one(rec):
        image = read_image(find_image(images, rec.image_id))
        write_bundle(build_bundle(rec, image, params), out)
        return rec.image_id

    for image_id in run_parallel(one, load_records(args), worker_count(args.threads)):
        print(image_id)


def load_logits(path) -> np.ndarray:
    try:
        arr = np.load(path, allow_pickle=False)
    except (ValueError, OSError) as exc:
        raise FormatError(f"cannot read logits from {path}: {exc}") from None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise FormatError(f"logits in {path} must have shape (H, W, 2), got {arr.shape}")
    return arr.astype(np.float64)


def loss_table(bundle, logits_h2, logits_h4, logits_h6, weights: LossWeights):
    tracks = bundle.track_maps
    missing = [r for r in (0.5, 0.75, 1.0) if r not in tracks]
    if missing:
        raise FormatError(f"bundle lacks track maps for ratios {missing}")
    l100, _ = gtmg_loss(logits_h6, tracks[1.0])
    l50, _ = gtmg_loss(logits_h2, tracks[0.5])
    l75, _ = gtmg_loss(logits_h4, tracks[0.75])
    lvam, _ = dice_ce_loss(logits_h6, bundle.hard_mask)
    return [
        ("gtmg_100_h6", l100),
        ("gtmg_50_h2", l50),
        ("gtmg_75_h4", l75),
        ("vam_dice_ce", lvam),
        ("total", total_loss(l100, l50, l75, lvam, weights)),
    ]


def cmd_loss(args):
    bundle = load_bundle(args.bundle)
    rows = loss_table(bundle, load_logits(args.pred_h2), load_logits(args.pred_h4),
                      load_logits(args.pred_h6), LossWeights(args.lambda1, args.lambda2))
    print("term,value")
    for name, value in rows:
        print(f"{name},{value!r}")


def cmd_render(args):
    from .render import format_stats, map_stats, render_bundle

    bundle = load_bundle(args.bundle)
    image = read_image(args.image) if args.image else None
    track = None
    if args.gaze:
        shape = GridShape.of(bundle.vam)
        recs = [r for r in parse_gaze_log(Path(args.gaze).read_bytes(), shape=shape)
                if r.image_id == bundle.image_id]
        track = build_track(recs[0]) if recs else None
    render_bundle(bundle, args.out, image=image, track=track)
    sys.stdout.write(format_stats(map_stats(bundle)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gazetrack", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gazetrack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic scenes, masks and a gaze log")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=4)
    p.add_argument("--n-fix", type=int, default=30)
    p.add_argument("--seed", type=int, default=0, help="seed of the first scene")
    add_shape_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("vam", help="visual attention maps from a gaze log")
    p.add_argument("--gaze", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--images", help="directory of PGM/PPM images, used for grid sizes")
    p.add_argument("--threshold", type=float, default=None, help="also write a hard mask")
    add_shape_args(p)
    add_vam_args(p)
    add_threads_arg(p)
    p.set_defaults(func=cmd_vam)

    p = sub.add_parser("refine", help="dense-CRF refinement of one VAM")
    p.add_argument("--vam", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out", help="also write the thresholded refined mask")
    p.add_argument("--threshold", type=float, default=UNDER_ACTIVATION_THRESHOLD)
    add_crf_args(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("distance", help="distance-to-track maps")
    p.add_argument("--gaze", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--images")
    p.add_argument("--ratio", type=float, default=1.0)
    add_shape_args(p)
    add_track_args(p, multi=False)
    add_threads_arg(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("track", help="track attention maps per truncation ratio")
    p.add_argument("--gaze", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--images")
    add_shape_args(p)
    add_track_args(p)
    add_threads_arg(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("bundle", help="full supervision bundle per image")
    p.add_argument("--gaze", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=UNDER_ACTIVATION_THRESHOLD)
    add_shape_args(p)
    add_vam_args(p)
    add_crf_args(p)
    add_track_args(p)
    add_threads_arg(p)
    p.set_defaults(func=cmd_bundle)

    p = sub.add_parser("loss", help="evaluate the training objective on recorded logits")
    p.add_argument("--bundle", required=True, help="bundle directory of one image")
    p.add_argument("--pred-h2", required=True, help=".npy logits (H, W, 2) from block 2")
    p.add_argument("--pred-h4", required=True)
    p.add_argument("--pred-h6", required=True)
    p.add_argument("--lambda1", type=float, default=0.5)
    p.add_argument("--lambda2", type=float, default=0.5)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("render", help="preview figure, 8-bit previews and stats CSV")
    p.add_argument("--bundle", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--image")
    p.add_argument("--gaze", help="overlay the gaze track from this log")
    p.set_defaults(func=cmd_render)
    return parser


def error_line(exc: BaseException) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "iteration"):
        if getattr(exc, attr, None) is not None:
            payload[attr] = getattr(exc, attr)
    return json.dumps(payload)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except GazeTrackError as exc:
        print(error_line(exc), file=sys.stderr)
        return 2
    except OSError as exc:
        print(error_line(exc), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
