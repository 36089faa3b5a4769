"""Mixed DCT+DWT features against DWT-only and raw-ROI inputs.

Builds one synthetic corpus per corpus seed, extracts each feature mode and
trains the same architecture over the same protocol seeds. Prints a table of
average accuracies.

    python scripts/feature_ordering.py --corpus-seeds 0 1 2 --workers 4
"""
import argparse
import sys
import tempfile
from pathlib import Path

import numpy as np

from gliomaseq import dataio, pipeline, synth
from gliomaseq.features import FEATURE_MODES, check_uniform
from gliomaseq.nn import Architecture
from gliomaseq.train_eval import TrainConfig, run_protocol


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--corpus-seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--modes", nargs="+", choices=FEATURE_MODES, default=["mixed", "dwt", "raw"])
    ap.add_argument("--per-grade", type=int, default=10)
    ap.add_argument("--slices", type=int, default=30)
    ap.add_argument("--arch", default="lstm21")
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    table = {m: [] for m in args.modes}
    for cs in args.corpus_seeds:
        with tempfile.TemporaryDirectory() as tmp:
            rows = synth.generate_corpus(Path(tmp), args.per_grade, args.slices, seed=cs)
            for mode in args.modes:
                settings = pipeline.ExtractSettings(slices=args.slices, seed=cs, mode=mode)
                result = pipeline.extract_dataset(rows, settings, workers=args.workers)
                if result.failures:
                    print(f"corpus {cs} {mode}: {len(result.failures)} patients failed", file=sys.stderr)
                    return 1
                s, d = check_uniform(result.patients)
                arch = Architecture.from_name(args.arch, input_dim=d, seq_len=s)
                metrics, _ = run_protocol(arch, result.patients, TrainConfig(seed=cs, runs=args.runs))
                table[mode].append(metrics.average_accuracy)
                print(f"corpus {cs}  {mode:<5} d={d:<4} avg {metrics.average_accuracy:.4f}  best {metrics.best_accuracy:.4f}", flush=True)

    print("\nmode   " + " ".join(f"seed{cs:<3}" for cs in args.corpus_seeds) + "  mean")
    for mode, accs in table.items():
        print(f"{mode:<6} " + " ".join(f"{a:7.4f}" for a in accs) + f"  {np.mean(accs):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
