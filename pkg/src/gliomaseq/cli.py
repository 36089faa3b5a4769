"""Command line entry point: synth, extract, train, evaluate, param-count."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import dataio, pipeline, synth
from .features import FEATURE_MODES, check_uniform
from .nn import Architecture, load_model, param_count, save_model
from .train_eval import ConfigurationError, TrainConfig, evaluate, run_protocol

log = logging.getLogger("gliomaseq")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _seed(args, default: int = 0) -> int:
    if getattr(args, "cmd_seed", None) is not None:
        return args.cmd_seed
    if args.seed is not None:
        return args.seed
    return default


def cmd_synth(args) -> int:
    try:
        rows = synth.generate_corpus(args.out, args.per_grade, args.slices, seed=_seed(args))
    except OSError as exc:
        _err(f"cannot write corpus to {args.out}: {exc}")
        return 1
    print(f"wrote {len(rows)} patients x {args.slices} slices to {args.out}")
    return 0


def cmd_extract(args) -> int:
    try:
        rows = dataio.read_manifest(args.manifest)
    except (OSError, dataio.ManifestError) as exc:
        _err(str(exc))
        return 1
    settings = pipeline.ExtractSettings(
        p=args.p, q=args.q, slices=args.slices, seed=_seed(args), mode=args.mode, size=args.size
    )
    result = pipeline.extract_dataset(rows, settings, workers=args.workers)
    for pid, msg in result.failures.items():
        _err(f"patient {pid}: {msg}")
    if result.patients:
        dataio.write_features(args.out, result.patients)
        print(f"wrote {len(result.patients)} patients to {args.out}")
    return 1 if result.failures or not result.patients else 0


def _load_features(path):
    patients = dataio.read_features(path)
    s, d = check_uniform(patients)
    return patients, s, d


def cmd_train(args) -> int:
    try:
        cfg = dataio.read_config(args.config) if args.config else TrainConfig()
    except dataio.ConfigKeyError as exc:
        _err(str(exc))
        return 2
    except ConfigurationError as exc:
        _err(str(exc))
        return 2
    if args.seed is not None or args.cmd_seed is not None:
        cfg = dataclasses.replace(cfg, seed=_seed(args))
    try:
        patients, s, d = _load_features(args.features)
        arch = Architecture.from_name(args.arch, input_dim=d, seq_len=s, dropout=cfg.dropout)
        metrics, model = run_protocol(arch, patients, cfg)
    except (ConfigurationError, dataio.FeatureFileError, ValueError) as exc:
        _err(str(exc))
        return 2
    save_model(args.model_out, model)
    Path(args.metrics_out).write_text(metrics.to_json())
    print(f"{arch.name}: {metrics.param_count} parameters, average accuracy {metrics.average_accuracy:.4f}, best {metrics.best_accuracy:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    try:
        model = load_model(args.model)
        patients, _, _ = _load_features(args.features)
        metrics = evaluate(model, patients)
    except (ConfigurationError, dataio.FeatureFileError, ValueError) as exc:
        _err(str(exc))
        return 2
    Path(args.metrics_out).write_text(metrics.to_json())
    print(f"accuracy {metrics.average_accuracy:.4f}")
    return 0


def cmd_param_count(args) -> int:
    try:
        arch = Architecture.from_name(args.arch, input_dim=args.input_dim, seq_len=args.slices)
    except ValueError as exc:
        _err(str(exc))
        return 2
    print(param_count(arch))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gliomaseq", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="global RNG seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def seeded(p):
        p.add_argument("--seed", dest="cmd_seed", type=int, default=None)
        return p

    p = seeded(sub.add_parser("synth", help="generate a synthetic PGM corpus and manifest"))
    p.add_argument("--out", required=True)
    p.add_argument("--per-grade", type=int, default=10)
    p.add_argument("--slices", type=int, default=30)
    p.set_defaults(func=cmd_synth)

    p = seeded(sub.add_parser("extract", help="manifest -> feature file"))
    p.add_argument("--manifest", required=True)
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--q", type=int, default=64)
    p.add_argument("--slices", type=int, default=30)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=FEATURE_MODES, default="mixed")
    p.add_argument("--size", type=int, default=256, help="working resolution")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = seeded(sub.add_parser("train", help="train and evaluate over repeated splits"))
    p.add_argument("--features", required=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--model-out", required=True)
    p.add_argument("--metrics-out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a saved model on a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--metrics-out", required=True)
    p.set_defaults(func=cmd_evaluate, cmd_seed=None)

    p = sub.add_parser("param-count", help="print an architecture's parameter count")
    p.add_argument("--arch", required=True)
    p.add_argument("--input-dim", type=int, default=64)
    p.add_argument("--slices", type=int, default=30)
    p.set_defaults(func=cmd_param_count, cmd_seed=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
