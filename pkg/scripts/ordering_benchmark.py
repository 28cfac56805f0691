"""Seed-averaged test MSE (percent) for every family on the default synthetic network.

    python3 scripts/ordering_benchmark.py [--seeds 1 2 3] [--set model.h=64 ...]
"""

import argparse
import json

from medrnn.benchmark import ordering_benchmark


def parse_set(items):
    out = {}
    for item in items:
        key, _, value = item.partition("=")
        out[key] = json.loads(value)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    ap.add_argument("--stations", type=int, default=6)
    ap.add_argument("--steps", type=int, default=6000)
    ap.add_argument("--set", nargs="*", default=[], metavar="KEY=JSON",
                    help="config overrides, e.g. data.stride=1")
    ap.add_argument("--json", help="also write the raw numbers here")
    args = ap.parse_args()

    res = ordering_benchmark(args.seeds, args.stations, args.steps, parse_set(args.set), progress=print)
    print()
    print(res.table())
    print()
    for name, ok in res.checks().items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"total {res.seconds:.0f} s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"seeds": args.seeds, "mse": res.mse, "checks": res.checks(),
                       "seconds": res.seconds}, fh, indent=2)


if __name__ == "__main__":
    main()
