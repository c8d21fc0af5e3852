"""Command-line entry point.

    curvelet-faces transform --image face.pgm --out face.cvlt
    curvelet-faces quantize  --image face.pgm --bits 4 --out face4.pgm
    curvelet-faces train     --dataset DIR --train-count 5 --out model.npz
    curvelet-faces evaluate  --dataset DIR --train-count 5 --seeds 1-10 --out report.csv
    curvelet-faces bench-fft --size 256 --runs 20

``--config FILE`` reads flat ``key = value`` lines (keys are the long flag
names, with or without dashes); flags given on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .ensemble import PipelineConfig, ensemble_train, save_model
from .fdct import build_windows, fdct_forward, write_decomposition
from .harness import (DatasetSpec, SplitPolicy, export_report, load_dataset, run_experiment,
                      run_seeds, split, summarize, synthetic_dataset, bench_fft)
from .imaging import load_image, pad_to_even, quantize, write_pgm


def parse_int_list(text: str) -> list[int]:
    """``"1,2,5-7"`` -> ``[1, 2, 5, 6, 7]``."""
    out = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def read_config_file(path) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _add_pipeline_args(p: argparse.ArgumentParser):
    p.add_argument("--dataset", help="dataset root directory, or 'synthetic'")
    p.add_argument("--dataset-name", default=None, choices=["orl", "grimace", "gatech", "custom"])
    p.add_argument("--subject-limit", type=int, default=15)
    p.add_argument("--train-count", type=int, default=5)
    p.add_argument("--split", choices=["first-k", "random"], default="first-k")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--pca-k", type=int, default=100)
    p.add_argument("--classifier", choices=["knn", "svm"], default="knn")
    p.add_argument("--metric", choices=["euclidean", "gaussian"], default="euclidean")
    p.add_argument("--knn-k", type=int, default=1)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--num-scales", type=int, default=4)
    p.add_argument("--angles", type=int, default=8, help="angles at the second-coarsest scale")
    p.add_argument("--scales", default="1,2,3,4", help="voting scales, e.g. 1,2,3,4")
    p.add_argument("--tie-break-scale", type=int, default=3)
    p.add_argument("--quantized-ensemble", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="curvelet-faces", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="curvelet-transform one image and dump the coefficients")
    p.add_argument("--image", required=True)
    p.add_argument("--num-scales", type=int, default=4)
    p.add_argument("--angles", type=int, default=8)
    p.add_argument("--out", help="write the binary coefficient dump here")

    p = sub.add_parser("quantize", help="reduce an image's bit depth")
    p.add_argument("--image", required=True)
    p.add_argument("--bits", type=int, choices=[2, 4, 8], required=True)
    p.add_argument("--out", required=True, help="output PGM path")

    p = sub.add_parser("train", help="fit the ensemble on the training split and save it")
    _add_pipeline_args(p)
    p.add_argument("--out", required=True, help="model bundle path (.npz)")

    p = sub.add_parser("evaluate", help="train and score on a holdout split")
    _add_pipeline_args(p)
    p.add_argument("--seeds", help="seeded random splits, e.g. 1-10; one report row each")
    p.add_argument("--resubstitution", action="store_true", help="score the training images")
    p.add_argument("--out", help="report path")
    p.add_argument("--format", choices=["csv", "jsonl"], default=None)

    p = sub.add_parser("bench-fft", help="forward-transform time against one 2-D FFT")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--max-ratio", type=float, default=None,
                   help="exit non-zero when the ratio exceeds this bound")
    parser.subcommands = sub.choices
    return parser


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        # re-parse with the file's values as defaults so explicit flags still win
        values = read_config_file(args.config)
        subparser = parser.subcommands[args.command]
        known = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in values.items():
            if key not in known:
                raise SystemExit(f"{args.config}: unknown key {key!r} for {args.command}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = action.type(value) if action.type else value
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def pipeline_config(args) -> PipelineConfig:
    return PipelineConfig(
        num_scales=args.num_scales, angles_coarse=args.angles, scales=tuple(parse_int_list(args.scales)),
        pca_k=args.pca_k, classifier=args.classifier, knn_k=args.knn_k, metric=args.metric,
        svm_c=args.svm_c, tie_break_scale=args.tie_break_scale,
        quantized_ensemble=args.quantized_ensemble)


def _dataset(args):
    if not args.dataset:
        raise SystemExit("--dataset is required")
    if args.dataset == "synthetic":
        return synthetic_dataset(seed=args.seed or 0), "synthetic"
    name = args.dataset_name or "custom"
    return load_dataset(DatasetSpec(args.dataset, args.subject_limit, name=name)), name


def _split_policy(args, train_count=None):
    mode = args.split
    seed = args.seed
    if mode == "random" and seed is None:
        seed = 0
    return SplitPolicy(train_count or args.train_count, mode, seed)


def cmd_transform(args):
    img = pad_to_even(load_image(args.image))
    windows = build_windows(img.width, img.height, args.num_scales, args.angles)
    coeffs = fdct_forward(img, windows)
    print(f"{args.image}: {img.width}x{img.height}, band counts {coeffs.band_counts}, "
          f"{coeffs.coefficient_count()} coefficients")
    for s in coeffs.scales:
        shapes = sorted({b.shape for b in s.bands})
        print(f"  scale {s.scale_index}: {len(s.bands)} band(s), extents {shapes}")
    if args.out:
        write_decomposition(args.out, coeffs)
    return 0


def cmd_quantize(args):
    write_pgm(quantize(load_image(args.image), args.bits), args.out)
    return 0


def cmd_train(args):
    data, _ = _dataset(args)
    train, _ = split(data, _split_policy(args))
    model = ensemble_train(train, pipeline_config(args))
    save_model(model, args.out)
    print(f"trained {len(model.voters)} voters on {len(train)} images "
          f"({len(model.classes)} classes) -> {args.out}")
    return 0


def cmd_evaluate(args):
    data, name = _dataset(args)
    config = pipeline_config(args)
    if args.seeds:
        reports = run_seeds(data, args.train_count, parse_int_list(args.seeds), config, name)
    else:
        reports = [run_experiment(data, _split_policy(args), config, name,
                                  resubstitution=args.resubstitution)]
    for r in reports:
        seed = "" if r.seed is None else f" seed={r.seed}"
        print(f"{r.dataset} train={r.train_count}{seed}: accuracy {r.accuracy:.4f} "
              f"({r.correct}/{r.n_test}, {r.rejections} rejected)")
    if len(reports) > 1:
        s = summarize(reports)
        print(f"mean accuracy {s['mean_accuracy']:.4f} +/- {s['std_accuracy']:.4f} "
              f"over {s['runs']} runs")
    if args.out:
        fmt = args.format or ("jsonl" if args.out.endswith((".jsonl", ".json")) else "csv")
        export_report(reports, args.out, fmt)
    return 0


def cmd_bench_fft(args):
    res = bench_fft(args.size, args.runs)
    print(json.dumps(res))
    if args.max_ratio is not None and res["ratio"] > args.max_ratio:
        print(f"ratio {res['ratio']:.1f} exceeds {args.max_ratio}", file=sys.stderr)
        return 1
    return 0


COMMANDS = {"transform": cmd_transform, "quantize": cmd_quantize, "train": cmd_train,
            "evaluate": cmd_evaluate, "bench-fft": cmd_bench_fft}


def main(argv=None) -> int:
    args = _parse(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
