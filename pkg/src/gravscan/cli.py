"""Command line interface.

One binary with subcommands: simulate, wta, eval (saliency | scanpath |
amplitude | batch), render, agreement, serve. Exit codes: 0 success,
2 usage error, 3 I/O error, 4 validation or undefined-metric error.
Outputs are byte-reproducible for a fixed argument list and seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .agreement import crowd_report, format_report, load_store
from .dynamics import SimParams, integrate, resample_trajectory
from .features import FeatureMap
from .io import (
    load_frame_sequence,
    load_manifest,
    read_pgm,
    read_saliency_pgm,
    read_scanpath,
    read_trajectory,
    render_frame,
    write_scanpath,
)
from .metrics import (
    DEFAULT_AMPLITUDE_BINS,
    DEFAULT_K_MAX,
    DEFAULT_QUANTIZER_COLS,
    DEFAULT_QUANTIZER_ROWS,
    DEFAULT_SMOOTHING_EPS,
    GridQuantizer,
    amplitude_histogram,
    auc_judd,
    evaluate_batch,
    kl_divergence,
    nss,
    saccade_amplitudes,
    stde,
    string_edit,
)
from .model import wta_scanpath
from .types import FrameSequence, MetricUndefinedError, Trajectory, ValidationError


def _parse_grid_spec(spec: str) -> tuple[int, int]:
    try:
        rows, cols = spec.lower().split("x")
        return int(rows), int(cols)
    except ValueError as exc:
        raise ValidationError(f"grid spec must look like 5x5, got {spec!r}") from exc


def _parse_feature_map(spec: str):
    """PGM path with optional :alpha suffix, e.g. faces.pgm:2.5"""
    path, sep, alpha = spec.rpartition(":")
    if sep and path:
        try:
            return Path(path), float(alpha)
        except ValueError:
            pass
    return Path(spec), 1.0


def _load_stimulus(args) -> FrameSequence:
    if args.image is not None:
        return FrameSequence.from_image(read_pgm(args.image), fps=args.fps)
    return load_frame_sequence(args.frames, fps=args.fps)


def cmd_simulate(args) -> int:
    stimulus = _load_stimulus(args)
    duration = args.duration
    if duration is None:
        duration = 5.0 if args.image is not None else len(stimulus) / stimulus.fps
    params = SimParams(
        alpha_gradient=args.alpha_gradient,
        alpha_motion=args.alpha_motion,
        damping=args.damping,
        beta=args.beta,
        sigma=args.sigma,
        epsilon=args.epsilon,
        dt=args.dt,
        duration=duration,
        fps=args.fps,
        vel_threshold=args.vel_threshold,
        min_fix_duration=args.min_fix_duration,
        seed=args.seed,
    )
    external = []
    for spec in args.feature_map or ():
        path, alpha = _parse_feature_map(spec)
        frame = read_pgm(path)
        external.append(([FeatureMap(grid=frame.grid, values=frame.brightness, kind="external")], alpha))
    trajectory, scanpath = integrate(stimulus, external, params)
    replay = resample_trajectory(trajectory, args.fps) if args.emit_trajectory else None
    write_scanpath(args.out, scanpath, replay)
    print(f"wrote {args.out}: {len(scanpath)} fixations over {duration:g} s")
    return 0


def cmd_wta(args) -> int:
    saliency = read_saliency_pgm(args.saliency)
    path = wta_scanpath(saliency, args.num_fixations, args.radius, duration=args.duration)
    write_scanpath(args.out, path)
    print(f"wrote {args.out}: {len(path)} fixations")
    return 0


def cmd_eval_saliency(args) -> int:
    saliency = read_saliency_pgm(args.map)
    fixations = []
    for path in args.fixations:
        fixations.extend(read_scanpath(path).fixations)
    print(f"auc={auc_judd(saliency, fixations):.6f} nss={nss(saliency, fixations):.6f}")
    return 0


def cmd_eval_scanpath(args) -> int:
    ref = read_scanpath(args.ref)
    hyp = read_scanpath(args.hyp)
    rows, cols = _parse_grid_spec(args.grid)
    quantizer = GridQuantizer(rows=rows, cols=cols, grid=ref.grid)
    se = string_edit(ref, hyp, quantizer)
    st = stde(ref, hyp, args.kmax)
    print(f"string_edit={se} stde={st:.6f}")
    return 0


def cmd_eval_amplitude(args) -> int:
    ref_amp = np.concatenate([saccade_amplitudes(read_scanpath(p)) for p in args.ref])
    hyp_amp = np.concatenate([saccade_amplitudes(read_scanpath(p)) for p in args.hyp])
    kl = kl_divergence(
        amplitude_histogram(ref_amp, args.bins),
        amplitude_histogram(hyp_amp, args.bins),
        args.smoothing_eps,
    )
    print(f"kl={kl:.6f}")
    return 0


def cmd_eval_batch(args) -> int:
    manifest = load_manifest(args.manifest)
    by_id = manifest.by_id()
    try:
        predictions = json.loads(Path(args.predictions).read_text(encoding="utf-8"))["predictions"]
    except (json.JSONDecodeError, KeyError) as exc:
        raise ValidationError(f"{args.predictions}: bad predictions manifest: {exc}") from exc

    base = Path(args.predictions).parent
    rows_spec, cols_spec = _parse_grid_spec(args.grid)
    pairs = []
    for rec in predictions:
        entry = by_id.get(rec.get("id"))
        if entry is None:
            raise ValidationError(f"prediction id {rec.get('id')!r} not present in the stimuli manifest")
        ref = read_scanpath(entry.scanpath)
        hyp = read_scanpath(base / rec["scanpath"])
        sal = read_saliency_pgm(base / rec["saliency"]) if rec.get("saliency") else None
        pairs.append((entry.id, ref, hyp, sal))

    reports, means, pooled = evaluate_batch(
        pairs,
        rows=rows_spec,
        cols=cols_spec,
        k_max=args.kmax,
        bins=args.bins,
        smoothing_eps=args.smoothing_eps,
    )

    def cell(v):
        if v is None:
            return ""
        return f"{v:.6f}" if isinstance(v, float) else str(v)

    with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "auc", "nss", "string_edit", "stde"])
        for pid, rep in reports:
            writer.writerow([pid, cell(rep.auc), cell(rep.nss), cell(rep.string_edit), cell(rep.stde)])
        writer.writerow(
            ["mean", cell(means["auc"]), cell(means["nss"]), cell(means["string_edit"]), cell(means["stde"])]
        )
    if args.kl_out:
        Path(args.kl_out).write_text(json.dumps(pooled, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {args.out_csv} ({len(reports)} pairs)")
    return 0


def cmd_render(args) -> int:
    frame = read_pgm(args.image)
    scanpath = read_scanpath(args.scanpath)
    trajectory = read_trajectory(args.scanpath)
    if trajectory is None:
        if not scanpath.fixations:
            raise ValidationError(f"{args.scanpath}: nothing to replay (no trajectory, no fixations)")
        t = np.array([f.t for f in scanpath.fixations])
        pos = scanpath.positions()
        duration = scanpath.fixations[-1].t + scanpath.fixations[-1].d
    else:
        t, pos = trajectory.t, trajectory.pos
        duration = float(t[-1])

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_frames = int(math.floor(duration * args.fps)) + 1
    for k in range(n_frames):
        tau = k / args.fps
        idx = int(np.clip(np.searchsorted(t, tau, side="right") - 1, 0, len(t) - 1))
        render_frame(frame, tuple(pos[idx]), out_dir / f"frame_{k:05d}.ppm")
    print(f"wrote {n_frames} frames to {out_dir}")
    return 0


def cmd_agreement(args) -> int:
    records = load_store(args.store)
    report = crowd_report(records, expertise_threshold=args.expert_threshold, session_size=args.session_size)
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report.as_dict(), indent=2, sort_keys=True) + "\n")
    print(format_report(report), end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.manifest, args.store, seed=args.seed, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gravscan",
        description="Gravitational scanpath simulation and visual-attention evaluation",
    )
    parser.add_argument("--version", action="version", version=f"gravscan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a scanpath over an image or frame directory")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--image", type=Path, help="static stimulus (binary PGM)")
    src.add_argument("--frames", type=Path, help="directory of numbered PGM frames")
    sim.add_argument("--fps", type=float, default=25.0, help="frame rate of the stimulus/replay (default 25)")
    sim.add_argument(
        "--feature-map",
        action="append",
        metavar="PGM[:ALPHA]",
        help="external feature map with optional weight (repeatable)",
    )
    sim.add_argument("--duration", type=float, default=None, help="viewing time in s (default 5 for images)")
    sim.add_argument("--lambda", dest="damping", type=float, default=5.0, help="damping coefficient (default 5)")
    sim.add_argument("--beta", type=float, default=0.5, help="inhibition relaxation rate 1/s (default 0.5)")
    sim.add_argument("--sigma", type=float, default=0.05, help="inhibition footprint radius (default 0.05)")
    sim.add_argument("--epsilon", type=float, default=None, help="field softening length (default: one pixel)")
    sim.add_argument("--dt", type=float, default=1e-3, help="integration step in s (default 0.001)")
    sim.add_argument("--alpha-gradient", type=float, default=1.0, help="brightness-gradient weight (default 1)")
    sim.add_argument("--alpha-motion", type=float, default=1.0, help="frame-difference weight (default 1)")
    sim.add_argument(
        "--vel-threshold", type=float, default=0.05, help="I-VT speed threshold, units/s (default 0.05)"
    )
    sim.add_argument(
        "--min-fix-duration", type=float, default=0.1, help="I-VT minimum fixation span in s (default 0.1)"
    )
    sim.add_argument("--seed", type=int, default=0, help="seed recorded with the run (default 0)")
    sim.add_argument("--out", type=Path, required=True, help="output scanpath JSON")
    sim.add_argument("--emit-trajectory", action="store_true", help="include replay samples at --fps")
    sim.set_defaults(func=cmd_simulate)

    wta = sub.add_parser("wta", help="winner-take-all baseline over a saliency map")
    wta.add_argument("--saliency", type=Path, required=True, help="saliency map (binary PGM)")
    wta.add_argument("--num-fixations", type=int, required=True)
    wta.add_argument("--radius", type=float, default=0.1, help="inhibition disk radius (default 0.1)")
    wta.add_argument("--duration", type=float, default=5.0, help="total viewing time in s (default 5)")
    wta.add_argument("--out", type=Path, required=True, help="output scanpath JSON")
    wta.set_defaults(func=cmd_wta)

    ev = sub.add_parser("eval", help="evaluation metrics")
    evsub = ev.add_subparsers(dest="metric", required=True)

    evs = evsub.add_parser("saliency", help="AUC and NSS of a map against fixations")
    evs.add_argument("--map", type=Path, required=True, help="saliency map (binary PGM)")
    evs.add_argument("--fixations", type=Path, nargs="+", required=True, help="scanpath JSON files")
    evs.set_defaults(func=cmd_eval_saliency)

    evp = evsub.add_parser("scanpath", help="string-edit and STDE between two scanpaths")
    evp.add_argument("--ref", type=Path, required=True)
    evp.add_argument("--hyp", type=Path, required=True)
    evp.add_argument(
        "--grid",
        default=f"{DEFAULT_QUANTIZER_ROWS}x{DEFAULT_QUANTIZER_COLS}",
        help="region quantizer ROWSxCOLS (default 5x5)",
    )
    evp.add_argument("--kmax", type=int, default=DEFAULT_K_MAX, help="max STDE window length (default 3)")
    evp.set_defaults(func=cmd_eval_scanpath)

    eva = evsub.add_parser("amplitude", help="KL of saccade-amplitude histograms (reference first)")
    eva.add_argument("--ref", type=Path, nargs="+", required=True, help="reference scanpath JSONs")
    eva.add_argument("--hyp", type=Path, nargs="+", required=True, help="hypothesis scanpath JSONs")
    eva.add_argument("--bins", type=int, default=DEFAULT_AMPLITUDE_BINS, help="histogram bins (default 50)")
    eva.add_argument(
        "--smoothing-eps", type=float, default=DEFAULT_SMOOTHING_EPS, help="additive smoothing (default 1e-9)"
    )
    eva.set_defaults(func=cmd_eval_amplitude)

    evb = evsub.add_parser("batch", help="evaluate a predictions manifest against the stimuli manifest")
    evb.add_argument("--manifest", type=Path, required=True, help="stimuli manifest JSON")
    evb.add_argument("--predictions", type=Path, required=True, help="predictions manifest JSON")
    evb.add_argument("--grid", default=f"{DEFAULT_QUANTIZER_ROWS}x{DEFAULT_QUANTIZER_COLS}")
    evb.add_argument("--kmax", type=int, default=DEFAULT_K_MAX)
    evb.add_argument("--bins", type=int, default=DEFAULT_AMPLITUDE_BINS)
    evb.add_argument("--smoothing-eps", type=float, default=DEFAULT_SMOOTHING_EPS)
    evb.add_argument("--out-csv", type=Path, required=True, help="per-pair report with a mean row")
    evb.add_argument("--kl-out", type=Path, default=None, help="pooled amplitude-KL summary JSON")
    evb.set_defaults(func=cmd_eval_batch)

    ren = sub.add_parser("render", help="replay a scanpath as numbered PPM frames with a red marker")
    ren.add_argument("--image", type=Path, required=True, help="stimulus (binary PGM)")
    ren.add_argument("--scanpath", type=Path, required=True, help="scanpath JSON (trajectory used if present)")
    ren.add_argument("--fps", type=float, default=25.0, help="replay frame rate (default 25)")
    ren.add_argument("--out-dir", type=Path, required=True)
    ren.set_defaults(func=cmd_render)

    agr = sub.add_parser("agreement", help="crowd statistics from a judgment store")
    agr.add_argument("--store", type=Path, required=True, help="JSON-lines label store")
    agr.add_argument(
        "--expert-threshold", type=int, default=3, help="min self-rated expertise of experts (default 3)"
    )
    agr.add_argument("--session-size", type=int, default=20, help="items per complete session (default 20)")
    agr.add_argument("--json-out", type=Path, default=None, help="also write the report as JSON")
    agr.set_defaults(func=cmd_agreement)

    srv = sub.add_parser("serve", help="run the annotation service")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--manifest", type=Path, required=True)
    srv.add_argument("--store", type=Path, required=True)
    srv.add_argument("--static-dir", type=Path, default=None, help="serve the annotation UI from this directory")
    srv.add_argument("--seed", type=int, default=0, help="session sampling seed (default 0)")
    srv.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, MetricUndefinedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
