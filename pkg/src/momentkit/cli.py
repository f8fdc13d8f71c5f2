"""Command-line entry point: ``momentkit <verb> ...``.

Settings come from an optional JSON config file (``--config``) with
``pipeline``, ``shot_detect``, ``sweep`` and ``synthetic`` sections; command
line flags override it. Exit status is 0 on success, 1 when some records
failed, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

from .metrics import QueryResult, evaluate, report_csv, report_markdown
from .parsing import Unrecoverable, parse_batch, parse_moments
from .pipeline import (
    PipelineConfig,
    load_audio,
    load_manifest,
    load_video,
    process_video,
    record_shots,
    reports_csv,
    run_pipeline,
    save_compressed,
)
from .shots import ShotDetectConfig, detect_shots, write_boundary_file
from .sweep import SweepConfig, read_sweep_csv, run_sweep, sweep_csv, write_stub_predictions
from .synthetic import SyntheticSpec, gen_synthetic

log = logging.getLogger("momentkit")

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _strs(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("pipeline")
    g.add_argument("--frames", dest="n_frames", type=int, help="frames to sample per video (default: all)")
    g.add_argument("--sampling", choices=["uniform", "seeded_random"])
    g.add_argument("--seed", type=int)
    g.add_argument("--no-stc", dest="stc", action="store_const", const=False, help="keep every token")
    g.add_argument("--sigma", type=float, help="keyframe smoothing sigma (frames)")
    g.add_argument("-k", "--keyframes", dest="k", type=int)
    g.add_argument("--per-shot-quota", action="store_const", const=True)
    g.add_argument("--rho", type=float, help="fraction of query positions kept in non-keyframes")
    g.add_argument("--variance-aggregate", choices=["mean", "l2"])
    g.add_argument("-L", "--audio-length", dest="audio_length", type=int, help="pooled audio length, 0 disables audio")
    g.add_argument("--strategy", choices=["overall", "interleaved", "dual_stream"])
    g.add_argument("--time-style", choices=["int_seconds", "two_decimals"])
    g.add_argument("--prompt-file", type=Path)
    g.add_argument("--workers", type=int, default=1)
    _add_shot_flags(p)


def _add_shot_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("shot detection")
    g.add_argument("--shot-sigma", type=float)
    g.add_argument("--threshold-mode", choices=["adaptive", "fixed"])
    g.add_argument("--fixed-threshold", type=float)
    g.add_argument("--k-sigma", type=float)
    g.add_argument("--min-shot-len", type=int)


def _shot_config(args, conf: dict) -> ShotDetectConfig:
    base = dict(conf.get("shot_detect", {}))
    for flag, key in [("shot_sigma", "sigma"), ("threshold_mode", "threshold_mode"),
                      ("fixed_threshold", "fixed_threshold"), ("k_sigma", "k_sigma"),
                      ("min_shot_len", "min_shot_len")]:
        value = getattr(args, flag, None)
        if value is not None:
            base[key] = value
    try:
        return ShotDetectConfig(**base)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad shot detection settings: {exc}") from exc


def _pipeline_config(args, conf: dict) -> PipelineConfig:
    try:
        cfg = PipelineConfig.from_dict(conf.get("pipeline", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad pipeline settings: {exc}") from exc
    overrides = {}
    for f in fields(PipelineConfig):
        value = getattr(args, f.name, None)
        if value is not None and f.name != "shot_detect":
            overrides[f.name] = value
    if getattr(args, "prompt_file", None) is not None:
        overrides["prompt"] = args.prompt_file.read_text(encoding="utf-8").strip()
    return replace(cfg, shot_detect=_shot_config(args, conf), **overrides)


def _manifest(args):
    try:
        return load_manifest(args.manifest)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load manifest: {exc}") from exc


def cmd_gen_synthetic(args, conf) -> int:
    spec = dict(conf.get("synthetic", {}))
    flags = {
        "n_videos": args.n_videos, "n_frames": args.frames, "n_positions": args.positions,
        "dim": args.dim, "noise_sigma": args.noise_sigma, "cut_magnitude": args.cut_magnitude,
        "seed": args.seed, "audio_tokens": args.audio_tokens, "audio_dim": args.audio_dim,
        "ramp_amplitude": args.ramp_amplitude, "fps": args.fps,
    }
    spec.update({k: v for k, v in flags.items() if v is not None})
    if args.shots is not None:
        lo, _, hi = args.shots.partition("-")
        spec["shots_per_video"] = (int(lo), int(hi)) if hi else int(lo)
    if args.planted is not None:
        spec["planted_dynamic_positions"] = _ints(args.planted)
    try:
        s = SyntheticSpec(**spec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad synthetic settings: {exc}") from exc
    records = gen_synthetic(s, args.out)
    print(f"wrote {len(records)} records to {Path(args.out) / 'manifest.jsonl'}")
    return EXIT_OK


def cmd_segment_shots(args, conf) -> int:
    records = _manifest(args)
    cfg = _pipeline_config(args, conf)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failed = 0
    done = set()
    for rec in records:
        if rec["video_id"] in done:
            continue
        done.add(rec["video_id"])
        try:
            vf = load_video(rec, cfg)
            shots = detect_shots(vf, cfg.shot_detect)
        except Exception as exc:  # noqa: BLE001
            log.error("%s: %s", rec["video_id"], exc)
            failed += 1
            continue
        write_boundary_file(out / f"{rec['video_id']}.shots.txt", shots.boundaries)
        print(rec["video_id"], " ".join(f"[{s.first_frame},{s.last_frame}]" for s in shots.spans))
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_compress(args, conf) -> int:
    records = _manifest(args)
    cfg = _pipeline_config(args, conf)
    out = Path(args.out)
    rows, done, failed = [], set(), 0
    for rec in records:
        if rec["video_id"] in done:
            continue
        done.add(rec["video_id"])
        row = {"qid": rec["qid"], "video_id": rec["video_id"]}
        try:
            vf = load_video(rec, cfg)
            res = process_video(vf, record_shots(rec, vf, cfg), load_audio(rec, cfg), rec["query"], cfg)
        except Exception as exc:  # noqa: BLE001
            log.error("%s: %s", rec["video_id"], exc)
            row["status"] = f"error: {type(exc).__name__}: {exc}"
            rows.append(row)
            failed += 1
            continue
        save_compressed(res, out, rec["video_id"])
        sel = res.compressed.selection
        row.update(
            status="ok", n_frames=vf.n_frames, n_positions=vf.n_positions, n_shots=len(res.shots),
            n_keyframes=len(res.compressed.keyframes), S_v=sel.retained_count, uncompressed=sel.mask.size,
            ratio=f"{sel.retained_count / sel.mask.size:.6f}", S_a=res.audio_count, seq_len=len(res.sequence),
        )
        rows.append(row)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reports.csv").write_text(reports_csv(rows), encoding="utf-8", newline="\n")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_assemble(args, conf) -> int:
    records = _manifest(args)
    cfg = _pipeline_config(args, conf)
    rows = run_pipeline(records, cfg, args.out, workers=args.workers)
    bad = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows) - bad} sequences written, {bad} failed")
    return EXIT_PARTIAL if bad else EXIT_OK


def _durations(args) -> dict[str, float]:
    if args.manifest is None:
        return {}
    return {r["qid"]: float(r["duration_s"]) for r in _manifest(args)}


def cmd_parse_predictions(args, conf) -> int:
    durations = _durations(args)
    failed = 0
    with open(args.input, encoding="utf-8") as fin:
        try:
            outputs = list(parse_batch(fin, durations))
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    with open(args.out, "w", encoding="utf-8", newline="\n") as fout:
        for rec in outputs:
            failed += "error" in rec
            fout.write(json.dumps(rec) + "\n")
    return EXIT_PARTIAL if failed else EXIT_OK


def _load_results(records, path) -> list[QueryResult]:
    preds = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                preds[rec["qid"]] = rec
    results = []
    for rec in records:
        p = preds.get(rec["qid"], {})
        if "moments" in p:
            moments = [tuple(m) for m in p["moments"]]
        else:
            try:
                moments = parse_moments(p.get("raw", ""), float(rec["duration_s"])).moments
            except Unrecoverable:
                moments = []
        results.append(QueryResult(rec["qid"], tuple(moments), tuple(tuple(m) for m in rec["moments"])))
    return results


def cmd_evaluate(args, conf) -> int:
    records = _manifest(args)
    results = _load_results(records, args.predictions)
    report = evaluate(results, avg_band=args.avg_band)
    text = report_markdown(report) if args.format == "markdown" else report_csv(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _sweep_config(args, conf) -> SweepConfig:
    try:
        sweep = SweepConfig.from_dict(conf.get("sweep", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sweep settings: {exc}") from exc
    grid = {
        "n_frames": args.grid_frames and _ints(args.grid_frames),
        "k": args.grid_k and _ints(args.grid_k),
        "rho": args.grid_rho and _floats(args.grid_rho),
        "audio_length": args.grid_audio_length and _ints(args.grid_audio_length),
        "strategy": args.grid_strategy and _strs(args.grid_strategy),
    }
    sweep = replace(sweep, **{k: tuple(v) for k, v in grid.items() if v})
    if args.seed is not None:
        sweep = replace(sweep, seed=args.seed)
    try:
        list(sweep.points())
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return sweep


def cmd_stub_predict(args, conf) -> int:
    records = _manifest(args)
    sweep = _sweep_config(args, conf)
    paths = write_stub_predictions(records, sweep, args.out_dir, args.mode, args.jitter)
    print(f"wrote {len(paths)} prediction files to {args.out_dir}")
    return EXIT_OK


def cmd_sweep(args, conf) -> int:
    records = _manifest(args)
    cfg = _pipeline_config(args, conf)
    sweep = _sweep_config(args, conf)
    if args.stub is not None:
        write_stub_predictions(records, sweep, args.predictions_dir, args.stub, args.jitter)
    skipped: list = []
    rows = run_sweep(records, sweep, args.predictions_dir, cfg, workers=args.workers, skipped=skipped)
    text = sweep_csv(rows)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(text, encoding="utf-8", newline="\n")
    if args.figures:
        from .plotting import render_sweep_figures

        for p in render_sweep_figures(read_sweep_csv(text), args.figures, args.figure_format):
            print(f"figure: {p}")
    print(f"{len(rows)} rows written to {args.out}, {len(skipped)} grid points skipped")
    return EXIT_PARTIAL if skipped else EXIT_OK


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("grid (comma-separated values)")
    g.add_argument("--grid-frames")
    g.add_argument("--grid-k")
    g.add_argument("--grid-rho")
    g.add_argument("--grid-audio-length")
    g.add_argument("--grid-strategy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="momentkit", description=__doc__.split("\n")[0])
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synthetic", help="write a synthetic manifest with planted shots")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--n-videos", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--positions", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--shots", help="shots per video, e.g. 3 or 1-6")
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--cut-magnitude", type=float)
    p.add_argument("--planted", help="dynamic query positions, e.g. 1,3")
    p.add_argument("--ramp-amplitude", type=float)
    p.add_argument("--audio-tokens", type=int)
    p.add_argument("--audio-dim", type=int)
    p.add_argument("--fps", type=float)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("segment-shots", help="detect shots and write boundary files")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_segment_shots)

    p = sub.add_parser("compress", help="write compressed visual tokens and selection sidecars")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("assemble", help="run the full pipeline and write prompt sequences")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("parse-predictions", help="parse and repair raw model outputs (JSON Lines)")
    p.add_argument("--input", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--manifest", type=Path, help="source of per-query durations")
    p.set_defaults(func=cmd_parse_predictions)

    p = sub.add_parser("evaluate", help="score predictions against manifest ground truth")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--predictions", required=True, type=Path)
    p.add_argument("--format", choices=["csv", "markdown"], default="csv")
    p.add_argument("--avg-band", action="store_true", help="also report mAP averaged over 0.5:0.05:0.95")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stub-predict", help="write echo or jittered ground truth for every grid point")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--mode", choices=["echo", "jitter"], default="echo")
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_stub_predict)

    p = sub.add_parser("sweep", help="metric CSV (and figures) over a parameter grid")
    p.add_argument("--manifest", required=True, type=Path)
    p.add_argument("--predictions-dir", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--figures", type=Path, help="directory for rendered figures")
    p.add_argument("--figure-format", default="png", choices=["png", "pdf", "svg"])
    p.add_argument("--stub", choices=["echo", "jitter"], help="generate stub predictions first")
    p.add_argument("--jitter", type=float, default=0.0)
    _add_grid_flags(p)
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        conf = _load_config(args.config)
        return args.func(args, conf)
    except ConfigError as exc:
        print(f"momentkit: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
