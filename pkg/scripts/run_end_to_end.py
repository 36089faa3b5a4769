"""Synthetic corpus -> mixed features -> lstm21, all through the CLI.

    python scripts/run_end_to_end.py --out runs/e2e --seed 0
"""
import argparse
import sys
from pathlib import Path

from gliomaseq import cli
from gliomaseq.train_eval import Metrics


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", type=Path, default=Path("runs/e2e"))
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--per-grade", type=int, default=10)
    ap.add_argument("--slices", type=int, default=30)
    ap.add_argument("--arch", default="lstm21")
    ap.add_argument("--config", default=None, help="key=value training config")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    corpus, seed = args.out / "corpus", ["--seed", str(args.seed)]
    steps = [
        seed + ["synth", "--out", str(corpus), "--per-grade", str(args.per_grade), "--slices", str(args.slices)],
        seed + ["extract", "--manifest", str(corpus / "manifest.csv"), "--slices", str(args.slices),
                "--workers", str(args.workers), "--out", str(args.out / "features.csv")],
        seed + ["train", "--features", str(args.out / "features.csv"), "--arch", args.arch,
                "--model-out", str(args.out / "model.glm"), "--metrics-out", str(args.out / "metrics.json")]
        + (["--config", args.config] if args.config else []),
    ]
    for step in steps:
        code = cli.main(step)
        if code:
            return code
    m = Metrics.from_json((args.out / "metrics.json").read_text())
    print("per-run accuracy:", " ".join(f"{a:.3f}" for a in m.per_run_accuracy))
    print("confusion (rows true II/III/IV):")
    for row in m.confusion:
        print("   ", " ".join(f"{c:4d}" for c in row))
    return 0


if __name__ == "__main__":
    sys.exit(main())
