"""Single entry-point CLI.

Subcommands: synth, pairs, testset, train, cas, mds, eval-corr, eval-depth,
stats, plot, study. Exit codes are a stable scripting contract: 0 success,
2 config/usage error, 3 missing data channel, 4 numeric failure.

All randomness flows from --seed through `singlelife.seeding.derive_seed`
(sha256 of seed plus a label path), so a full run is reproducible from one
flag. A key=value config file (--config) provides defaults; explicit flags
win; unknown keys are rejected. Every run writes run.json with the fully
resolved configuration (no timestamps, so artifacts stay byte-reproducible).
`SINGLELIFE_DATA_ROOT` is the fallback root for relative dataset paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ..errors import (ChannelError, ConfigError, ContractError, NumericError,
                      SingleLifeError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHANNEL = 3
EXIT_NUMERIC = 4


def parse_kv_config(text: str) -> dict:
    """`key = value` lines; values are JSON literals when parseable, else
    bare strings. '#' starts a comment."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {ln}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _resolve_data_path(p: str) -> Path:
    path = Path(p)
    if path.exists():
        return path
    root = os.environ.get("SINGLELIFE_DATA_ROOT")
    if root and (Path(root) / p).exists():
        return Path(root) / p
    return path


def _pair_of(text: str, cast=int):
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"expected two comma-separated values, got {text!r}")
    return cast(parts[0]), cast(parts[1])


def _write_run_json(out_path: Path, command: str, args: argparse.Namespace):
    resolved = {k: (str(v) if isinstance(v, Path) else v)
                for k, v in sorted(vars(args).items()) if k != "func"}
    payload = json.dumps({"command": command, "config": resolved},
                         sort_keys=True, separators=(",", ":")) + "\n"
    if out_path.is_dir():
        (out_path / "run.json").write_text(payload)
    else:
        Path(str(out_path) + ".run.json").write_text(payload)


def _arch_from_args(args) -> "ArchConfig":
    from ..model import desk_config, reference_scale_config
    if args.arch == "reference":
        return reference_scale_config()
    from ..model import ArchConfig
    return ArchConfig(image_size=args.image_size, patch_size=args.patch_size,
                      masking_ratio=args.mask_ratio)


def cmd_synth(args) -> int:
    from ..synthlife import TrajectorySpec, export_life, generate_life, generate_world
    bounds = tuple(float(x) for x in args.bounds.split(","))
    if len(bounds) != 3:
        raise ConfigError(f"--bounds needs three values, got {args.bounds!r}")
    world = generate_world(seed=args.seed, n_landmarks=args.landmarks,
                           n_points=args.points, bounds=bounds)
    life = generate_life(world, TrajectorySpec(kind=args.traj), duration_s=args.duration,
                         fps=args.fps, image_size=args.image_size, seed=args.seed,
                         life_id=Path(args.out).name)
    for ch in (args.withhold.split(",") if args.withhold else []):
        if ch not in life.channels:
            raise ConfigError(f"unknown channel {ch!r} in --withhold")
        life.channels[ch] = False
    out = export_life(life, args.out)
    _write_run_json(out, "synth", args)
    for w in life.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {len(life)} frames to {out}")
    return EXIT_OK


def cmd_pairs(args) -> int:
    from ..model.augment import AugRanges
    from ..pairing import (augmented_pairs, random_pairs, read_pair_index,
                           spatial_pairs, temporal_pairs, union_pairs,
                           write_pair_index)
    from ..synthlife import load_life
    out = Path(args.out)
    if args.strategy == "union":
        if not args.from_indexes:
            raise ConfigError("--strategy union needs --from a.tsv,b.tsv")
        paths = args.from_indexes.split(",")
        if len(paths) != 2:
            raise ConfigError("--from needs exactly two index files")
        index = union_pairs(read_pair_index(_resolve_data_path(paths[0])),
                            read_pair_index(_resolve_data_path(paths[1])))
    else:
        life = load_life(_resolve_data_path(args.life))
        if args.strategy == "temporal":
            index = temporal_pairs(life, _pair_of(args.gap), args.per_anchor, args.seed)
        elif args.strategy == "spatial":
            from ..synthlife import require_channel
            require_channel(life, "visibility")
            index = spatial_pairs(life, args.jaccard, args.min_gap, args.max_pairs,
                                  args.seed)
        elif args.strategy == "augmented":
            ranges = AugRanges(scale=_pair_of(args.aug_scale, float),
                               gain=_pair_of(args.aug_gain, float),
                               bias=_pair_of(args.aug_bias, float))
            index = augmented_pairs(life, args.n_pairs, ranges, args.seed)
        else:
            index = random_pairs(life, args.n_pairs, args.seed)
    write_pair_index(index, out)
    _write_run_json(out, "pairs", args)
    print(f"wrote {len(index)} pairs to {out}")
    return EXIT_OK


def cmd_testset(args) -> int:
    from ..alignment import build_testset
    from ..evalharness import EvalPair, write_eval_pairs
    from ..synthlife import load_life
    lives = [load_life(_resolve_data_path(p)) for p in args.lives.split(",")]
    ts = build_testset(lives, args.per_life, _pair_of(args.gap), args.seed)
    pairs = [EvalPair(source=s, target=t, gt_flow=None, pair_id=pid)
             for (s, t), pid in zip(ts.pairs, ts.pair_ids)]
    tsv = write_eval_pairs(pairs, args.out)
    _write_run_json(Path(args.out), "testset", args)
    print(f"wrote {len(pairs)} test pairs to {tsv}")
    return EXIT_OK


def cmd_train(args) -> int:
    from ..pairing import read_pair_index
    from ..trainer import TrainConfig, train
    arch = _arch_from_args(args)
    cfg = TrainConfig(total_steps=args.steps, batch_size=args.batch,
                      base_lr=args.lr, seed=args.seed,
                      checkpoint_every=args.checkpoint_every,
                      train_aug=not args.no_train_aug, pipeline=args.threads > 1)
    index = read_pair_index(_resolve_data_path(args.pairs))
    out = Path(args.out)
    result = train(index, arch, cfg, _resolve_data_path(args.life), out)
    _write_run_json(out, "train", args)
    print(f"trained {args.steps} steps; final loss "
          f"{result.log_rows[-1][2] if result.log_rows else float('nan'):.5f}; "
          f"checkpoints: {[p.name for p in result.checkpoints]}")
    return EXIT_OK


def _load_testset_tsv(path):
    from ..alignment import TestSet
    from ..evalharness import read_eval_pairs
    pairs = read_eval_pairs(_resolve_data_path(path))
    return TestSet(pairs=[(p.source, p.target) for p in pairs],
                   pair_ids=[p.pair_id for p in pairs])


def cmd_cas(args) -> int:
    from ..alignment import (cas_matrix, cas_over_testset, load_model, write_cas_csv,
                             CASMatrix)
    testset = _load_testset_tsv(args.testset)
    models = [load_model(_resolve_data_path(p)) for p in args.ckpts.split(",")]
    out = Path(args.out)
    if args.ref:
        ref = load_model(_resolve_data_path(args.ref), model_id="ref:" +
                         Path(args.ref).stem)
        if args.pairwise:
            mat = cas_matrix(models + [ref], testset, k=args.k, threads=args.threads,
                             cache_dir=args.cache_dir)
            write_cas_csv(mat, out)
        else:
            lines = ["model_id,cas_ref"]
            for m in models:
                score = cas_over_testset(m, ref, testset, k=args.k,
                                         threads=args.threads,
                                         cache_dir=args.cache_dir)
                lines.append(f"{m.model_id},{score!r}")
            out.write_text("\n".join(lines) + "\n")
    else:
        if not args.pairwise:
            raise ConfigError("cas needs --pairwise and/or --ref <ckpt>")
        mat = cas_matrix(models, testset, k=args.k, threads=args.threads,
                         cache_dir=args.cache_dir)
        write_cas_csv(mat, out)
    _write_run_json(out, "cas", args)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_mds(args) -> int:
    from ..alignment import mds_2d, read_cas_csv, write_mds_csv
    mat = read_cas_csv(_resolve_data_path(args.matrix))
    coords = mds_2d(mat)
    out = write_mds_csv(mat.model_ids, coords, args.out)
    _write_run_json(out, "mds", args)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval_corr(args) -> int:
    from ..alignment import load_model
    from ..evalharness import eval_zeroshot_correspondence, read_eval_pairs, write_report
    model = load_model(_resolve_data_path(args.ckpt))
    pairs = read_eval_pairs(_resolve_data_path(args.pairs))
    if any(p.gt_flow is None for p in pairs):
        raise ChannelError("eval pairs lack ground-truth flow")
    report = eval_zeroshot_correspondence(model, pairs, mode=args.mode, seed=args.seed)
    out = write_report(report, args.out)
    _write_run_json(out, "eval-corr", args)
    print(json.dumps(report["metrics"]))
    return EXIT_OK


def cmd_eval_depth(args) -> int:
    from ..alignment import load_model
    from ..evalharness import (ProbeConfig, depth_items_from_life, train_probe,
                               write_report)
    from ..synthlife import load_life, require_channel
    model = load_model(_resolve_data_path(args.ckpt))
    life = load_life(_resolve_data_path(args.data))
    require_channel(life, "depth")
    items = depth_items_from_life(life)
    n_train = min(args.train_frames, len(items) - 1)
    train_items, eval_items = items[:n_train], items[n_train:n_train + args.eval_frames]
    cfg = ProbeConfig(hidden=args.hidden, heads=args.heads, steps=args.steps,
                      batch_size=args.batch, seed=args.seed)
    _, report, _ = train_probe(model, train_items, eval_items, cfg, mode=args.mode)
    payload = {"task": "depth_probe", "model_id": model.model_id,
               "metrics": report.to_dict(),
               "config": {"mode": args.mode, "steps": args.steps,
                          "hidden": args.hidden, "heads": args.heads,
                          "seed": args.seed},
               "n_items": len(eval_items)}
    out = write_report(payload, args.out)
    _write_run_json(out, "eval-depth", args)
    print(json.dumps(payload["metrics"]))
    return EXIT_OK


def cmd_stats(args) -> int:
    from ..synthlife import life_brightness_stats, load_life
    life = load_life(_resolve_data_path(args.life))
    n = args.n_samples if args.n_samples else len(life.frames)
    per_frame, summary = life_brightness_stats(life, n)
    out = Path(args.out)
    out.write_text(json.dumps({"life_id": life.life_id, "brightness": summary,
                               "per_frame": per_frame},
                              sort_keys=True, separators=(",", ":")) + "\n")
    _write_run_json(out, "stats", args)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_plot(args) -> int:
    from ..alignment import read_cas_csv, read_mds_csv
    from .plot import heatmap_svg, line_svg, scatter_svg, write_svg
    src = _resolve_data_path(args.input)
    if args.kind == "heatmap":
        mat = read_cas_csv(src)
        svg = heatmap_svg(mat.scores, mat.model_ids, clip_low=args.clip_low,
                          clip_high=args.clip_high)
    elif args.kind == "scatter":
        ids, coords = read_mds_csv(src)
        svg = scatter_svg(coords, ids)
    else:
        rows = [line.split(",") for line in src.read_text().splitlines()[1:] if line]
        xs = [float(r[0]) for r in rows]
        ys = [float(r[-1]) for r in rows]
        if any(b < a for a, b in zip(xs, xs[1:])):
            raise ConfigError("line chart x values must be non-decreasing")
        svg = line_svg(xs, ys, x_label="step", y_label="loss")
    out = write_svg(svg, args.out)
    _write_run_json(out, "plot", args)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_study(args) -> int:
    from ..experiments import load_study_spec, run_study
    spec = load_study_spec(_resolve_data_path(args.spec))
    out = run_study(spec, args.out, threads=args.threads)
    _write_run_json(Path(args.out), "study", args)
    print(f"study {spec.name} complete: {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="singlelife",
                                 description="single-life representation lab")
    ap.add_argument("--config", default=None,
                    help="key=value file with default flag values")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)

    p = sub.add_parser("synth", help="generate a synthetic life directory")
    common(p)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--fps", type=float, default=5.0)
    p.add_argument("--traj", choices=["walk", "indoor", "static"], default="walk")
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--landmarks", type=int, default=18)
    p.add_argument("--points", type=int, default=600)
    p.add_argument("--bounds", default="24,5,24")
    p.add_argument("--withhold", default="", help="channels to omit, comma-separated")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pairs", help="mine a pair index from a life")
    common(p)
    p.add_argument("--life")
    p.add_argument("--strategy", required=True,
                   choices=["temporal", "spatial", "augmented", "random", "union"])
    p.add_argument("--gap", default="1,10", help="temporal gap window in frames")
    p.add_argument("--per-anchor", type=int, default=2)
    p.add_argument("--jaccard", type=float, default=0.7)
    p.add_argument("--min-gap", type=int, default=None)
    p.add_argument("--max-pairs", type=int, default=None)
    p.add_argument("--n-pairs", type=int, default=1000)
    p.add_argument("--aug-scale", default="0.5,1.0")
    p.add_argument("--aug-gain", default="0.8,1.2")
    p.add_argument("--aug-bias", default="-0.1,0.1")
    p.add_argument("--from", dest="from_indexes", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pairs)

    p = sub.add_parser("testset", help="sample held-out image pairs for CAS")
    common(p)
    p.add_argument("--lives", required=True, help="comma-separated life dirs")
    p.add_argument("--per-life", type=int, default=50)
    p.add_argument("--gap", default="1,10")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_testset)

    p = sub.add_parser("train", help="train one model on one life")
    common(p)
    p.add_argument("--pairs", required=True)
    p.add_argument("--life", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=1.5e-4)
    p.add_argument("--arch", choices=["desk", "reference"], default="desk")
    p.add_argument("--image-size", type=int, default=64)
    p.add_argument("--patch-size", type=int, default=8)
    p.add_argument("--mask-ratio", type=float, default=0.95)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--no-train-aug", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("cas", help="correspondence alignment scores")
    common(p)
    p.add_argument("--ckpts", required=True, help="comma-separated checkpoints")
    p.add_argument("--testset", required=True, help="pairs.tsv from `testset`")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--pairwise", action="store_true")
    p.add_argument("--ref", default=None, help="reference checkpoint")
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_cas)

    p = sub.add_parser("mds", help="2-D MDS projection of a CAS matrix")
    common(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser("eval-corr", help="zero-shot correspondence AEPE")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--pairs", required=True, help="pairs.tsv with flow")
    p.add_argument("--mode", choices=["argmax", "soft"], default="argmax")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_corr)

    p = sub.add_parser("eval-depth", help="attentive depth probe")
    common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True, help="life dir with depth channel")
    p.add_argument("--mode", choices=["frozen", "finetune"], default="frozen")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--train-frames", type=int, default=200)
    p.add_argument("--eval-frames", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_depth)

    p = sub.add_parser("stats", help="per-life brightness statistics")
    common(p)
    p.add_argument("--life", required=True)
    p.add_argument("--n-samples", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("plot", help="SVG heatmap / scatter / line chart")
    common(p)
    p.add_argument("--kind", choices=["heatmap", "scatter", "line"], required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--clip-low", type=float, default=0.4)
    p.add_argument("--clip-high", type=float, default=0.71)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("study", help="run a scripted study from a spec file")
    common(p)
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_study)
    return ap


def _apply_config_file(ap: argparse.ArgumentParser, argv: list) -> list:
    """Use --config values as subcommand defaults (explicit flags win)."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ConfigError("--config needs a file path")
    path = Path(argv[idx + 1])
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    values = parse_kv_config(path.read_text())
    command = next((a for a in argv if not a.startswith("-") and a != argv[idx + 1]),
                   None)
    sub_actions = next(a for a in ap._actions
                       if isinstance(a, argparse._SubParsersAction))
    if command not in sub_actions.choices:
        raise ConfigError(f"unknown subcommand {command!r}")
    subparser = sub_actions.choices[command]
    known = {a.dest for a in subparser._actions}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys for {command!r}: {sorted(unknown)}")
    subparser.set_defaults(**values)
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        argv = _apply_config_file(ap, argv)
        args = ap.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors exit 2, --help exits 0
        return int(exc.code) if exc.code is not None else 0
    except (ConfigError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChannelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHANNEL
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SingleLifeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
