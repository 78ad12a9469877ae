"""Command-line interface.

Subcommands::

    svreg phantom SPEC.json --out DIR        render a synthetic volume
    svreg register --volume V --slice S ...  one slice-to-volume refinement
    svreg track --volume V --manifest M ...  temporal sequence registration
    svreg evaluate --results CSV ...         aggregate stats + CDF export

Exit codes: 0 success, 2 validation error, 3 registration failure,
4 I/O failure. All commands are reproducible given fixed seeds; wall-clock
runtime fields are the one nondeterministic output and can be suppressed
with ``--timing none`` when byte-identical reruns are required.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .config import RunConfig
from .errors import LostOverlapError, NoOverlapError, SvregError
from .evaluation import empirical_cdf, mean_sd, pose_error
from .formats import (
    SCHEMA_VERSION,
    dump_json,
    load_json,
    read_manifest,
    read_svraw,
    read_transform,
    write_cdf_csv,
    write_landmarks,
    write_results_csv,
    write_svraw,
)
from .geometry import RigidTransform, compose
from .imaging import preprocess
from .phantom import PhantomSpec, Speckle, render
from .registration import SliceToVolumeRegistration
from .workflow import (
    FRAME_SUCCESS,
    WorkflowConfig,
    classify_success,
    register_sequence,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_REGISTRATION = 3
EXIT_IO = 4


def _load_config(path):
    if path is None:
        return RunConfig()
    return RunConfig.from_dict(load_json(path))


def _maybe_seeded(cfg, seed):
    if seed is None:
        return cfg
    optimizer = type(cfg.optimizer)(**{**_opt_dict(cfg.optimizer), "seed": seed})
    return type(cfg)(cfg.preprocessing, cfg.weights, optimizer, cfg.workflow, seed)


def _opt_dict(opt):
    from dataclasses import asdict

    return asdict(opt)


def cmd_phantom(args):
    data = load_json(args.spec)
    spec = PhantomSpec.from_dict(data)
    if args.seed is not None:
        spec = PhantomSpec(
            dims=spec.dims, spacing=spec.spacing, tubes=spec.tubes,
            ellipsoids=spec.ellipsoids,
            speckle=Speckle(args.seed, spec.speckle.amplitude,
                            spec.speckle.correlation_mm),
            landmarks=spec.landmarks, mask_shape=spec.mask_shape,
            background=spec.background, edge_voxels=spec.edge_voxels,
        )
    volume, landmarks = render(spec)
    os.makedirs(args.out, exist_ok=True)
    write_svraw(volume, os.path.join(args.out, "volume.svraw"))
    write_landmarks(landmarks, os.path.join(args.out, "landmarks.json"))

    print(f"rendered {volume.dims[0]}x{volume.dims[1]}x{volume.dims[2]} volume "
          f"at {volume.spacing} mm -> {args.out}")
    print(f"{'landmark':24s} {'x (mm)':>10s} {'y (mm)':>10s} {'z (mm)':>10s}")
    for name, pos in sorted(landmarks.items()):
        print(f"{name:24s} {pos[0]:10.3f} {pos[1]:10.3f} {pos[2]:10.3f}")
    return EXIT_OK


def _preprocess_pair(volume, image, cfg, skip):
    if skip:
        return volume, image
    pre = cfg.preprocessing
    volume = preprocess(volume, pre.spacing_mm, pre.crop_3d)
    image = preprocess(image, pre.spacing_mm, pre.crop_2d)
    return volume, image


def cmd_register(args):
    cfg = _maybe_seeded(_load_config(args.config), args.seed)
    volume = read_svraw(args.volume)
    image = read_svraw(args.slice)
    init = read_transform(args.init) if args.init else RigidTransform.identity()
    volume, image = _preprocess_pair(volume, image, cfg, args.no_preprocess)

    engine = SliceToVolumeRegistration.from_config(cfg.optimizer)
    start = time.perf_counter()
    transform, trace = engine.register(volume, image, init)
    runtime_ms = (time.perf_counter() - start) * 1000.0
    if args.timing == "none":
        runtime_ms = 0.0

    result = {
        "schema_version": SCHEMA_VERSION,
        "transform": transform.to_dict(),
        "correction": compose(init.inverse(), transform).to_dict(),
        "metric_value": 1.0 - trace.best_loss,
        "status": trace.status,
        "iterations": trace.n_iters,
        "runtime_ms": runtime_ms,
    }
    if args.truth:
        truth = read_transform(args.truth)
        err = pose_error(transform, truth)
        result["pose_error"] = {
            "tx": err.tx, "ty": err.ty, "tz": err.tz,
            "euclidean": err.euclidean,
            "rx": err.rx, "ry": err.ry, "rz": err.rz,
            "geodesic": err.geodesic,
        }
        result["success"] = classify_success(err)
    dump_json(result, args.out)
    print(f"metric {result['metric_value']:.4f} after {trace.n_iters} iterations "
          f"({trace.status}) -> {args.out}")
    return EXIT_OK


def cmd_track(args):
    cfg = _maybe_seeded(_load_config(args.config), args.seed)
    volume = read_svraw(args.volume)
    manifest = load_json(args.manifest)
    frames = read_manifest(args.manifest)
    if not frames:
        raise ValueError("manifest contains no frames")
    truths = [
        RigidTransform.from_dict(e["truth"]) if "truth" in e else None
        for e in manifest["frames"]
    ]

    pre = cfg.preprocessing
    if not args.no_preprocess:
        volume = preprocess(volume, pre.spacing_mm, pre.crop_3d)
        frames = [
            type(f)(f.timestamp, preprocess(f.image, pre.spacing_mm, pre.crop_2d),
                    f.tracked)
            for f in frames
        ]

    engine = SliceToVolumeRegistration.from_config(cfg.optimizer)
    results = register_sequence(volume, frames, engine, cfg.workflow)

    rows = []
    for i, (frame, res) in enumerate(zip(frames, results)):
        row = {"frame": i, "runtime_ms": 0.0 if args.timing == "none"
               else res.runtime_ms}
        if truths[i] is not None and res.status == FRAME_SUCCESS:
            full = compose(frame.tracked, res.correction)
            err = pose_error(full, truths[i])
            row.update(tx=err.tx, ty=err.ty, tz=err.tz, euclidean=err.euclidean,
                       rx=err.rx, ry=err.ry, rz=err.rz, geodesic=err.geodesic,
                       success=classify_success(err))
        else:
            row["success"] = res.status == FRAME_SUCCESS
        rows.append(row)
    write_results_csv(rows, args.out)

    n_ok = sum(1 for r in results if r.status == FRAME_SUCCESS)
    print(f"{n_ok}/{len(results)} frames registered -> {args.out}")
    return EXIT_OK if n_ok >= 1 else EXIT_REGISTRATION


def cmd_evaluate(args):
    from .formats import read_results_csv

    rows = read_results_csv(args.results)
    if not rows:
        raise ValueError("results file contains no rows")

    summary = {"schema_version": SCHEMA_VERSION, "n_frames": len(rows)}
    for column in ("tx", "ty", "tz", "euclidean", "rx", "ry", "rz", "geodesic",
                   "tre_mean", "runtime_ms"):
        values = [r[column] for r in rows if r.get(column) is not None]
        if values:
            mean, sd = mean_sd(values)
            summary[column] = {"mean": mean, "sd": sd, "n": len(values)}
    successes = [r["success"] for r in rows if r.get("success") is not None]
    if successes:
        summary["success_rate"] = sum(successes) / len(successes)

    euclidean = [r["euclidean"] for r in rows if r.get("euclidean") is not None]
    if euclidean:
        write_cdf_csv(empirical_cdf(euclidean), args.out_cdf)
        summary["cdf_file"] = os.path.basename(args.out_cdf)
    dump_json(summary, args.out_summary)
    print(f"aggregated {len(rows)} rows -> {args.out_summary}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="svreg",
        description="slice-to-volume rigid registration toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="render a synthetic phantom volume")
    p.add_argument("spec", help="phantom spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override speckle seed")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("register", help="register one 2D slice to a 3D volume")
    p.add_argument("--volume", required=True, help="volume .svraw")
    p.add_argument("--slice", required=True, help="slice .svraw")
    p.add_argument("--init", default=None, help="initial transform JSON")
    p.add_argument("--truth", default=None, help="ground-truth transform JSON")
    p.add_argument("--config", default=None, help="run config JSON")
    p.add_argument("--out", required=True, help="result JSON path")
    p.add_argument("--seed", type=int, default=None, help="override optimizer seed")
    p.add_argument("--timing", choices=["wall", "none"], default="wall",
                   help="'none' zeroes runtime fields for byte-identical reruns")
    p.add_argument("--no-preprocess", action="store_true",
                   help="skip resample/crop/normalize")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("track", help="register a temporal frame sequence")
    p.add_argument("--volume", required=True)
    p.add_argument("--manifest", required=True, help="frame manifest JSON")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--timing", choices=["wall", "none"], default="wall")
    p.add_argument("--no-preprocess", action="store_true")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="aggregate a results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--out-summary", required=True)
    p.add_argument("--out-cdf", required=True)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except json.JSONDecodeError as err:
        print(f"error: invalid JSON at line {err.lineno} column {err.colno}: "
              f"{err.msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except (LostOverlapError, NoOverlapError) as err:
        print(f"error: registration failed: {err}", file=sys.stderr)
        return EXIT_REGISTRATION
    except (FileNotFoundError, IsADirectoryError, PermissionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError, SvregError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
