"""Parameter counts for the named architectures over a few input widths."""
import argparse

from gliomaseq.nn import Architecture, param_count


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--arch", nargs="+", default=["lstm21", "lstm32", "baseline"])
    ap.add_argument("--dims", type=int, nargs="+", default=[64, 164, 256])
    ap.add_argument("--slices", type=int, default=30)
    args = ap.parse_args(argv)
    print("arch      " + "".join(f"d={d:<9}" for d in args.dims))
    for name in args.arch:
        counts = [param_count(Architecture.from_name(name, input_dim=d, seq_len=args.slices)) for d in args.dims]
        print(f"{name:<10}" + "".join(f"{c:<11}" for c in counts))


if __name__ == "__main__":
    main()
