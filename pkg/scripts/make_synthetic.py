"""Generate the synthetic grid datasets used by the experiment scripts.

Usage:
    python3 scripts/make_synthetic.py multiscale --rows 20 --cols 20 --out data.geojson
    python3 scripts/make_synthetic.py county --rows 53 --cols 53 --p 14 --out big.geojson
"""

import argparse
import json
import pathlib
import sys

from esdakit.synthetic import county_scale_dataset, multiscale_dataset


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    sub = ap.add_subparsers(dest="kind", required=True)

    ms = sub.add_parser(
        "multiscale", help="one constant + one smoothly varying coefficient"
    )
    ms.add_argument("--rows", type=int, default=20)
    ms.add_argument("--cols", type=int, default=20)
    ms.add_argument("--noise", type=float, default=0.1)
    ms.add_argument("--seed", type=int, default=20)
    ms.add_argument("--out", type=pathlib.Path, required=True)
    ms.add_argument(
        "--truth-out", type=pathlib.Path, default=None,
        help="also dump the generating coefficient surfaces as JSON",
    )

    co = sub.add_parser("county", help="election-scale grid, wide design")
    co.add_argument("--rows", type=int, default=53)
    co.add_argument("--cols", type=int, default=53)
    co.add_argument("--p", type=int, default=14)
    co.add_argument("--seed", type=int, default=1)
    co.add_argument("--out", type=pathlib.Path, required=True)

    args = ap.parse_args(argv)
    if args.kind == "multiscale":
        raw, truth = multiscale_dataset(
            args.rows, args.cols, noise=args.noise, seed=args.seed
        )
        args.out.write_bytes(raw)
        if args.truth_out is not None:
            args.truth_out.write_text(
                json.dumps({k: v.tolist() for k, v in truth.items()}, indent=1)
            )
        n = args.rows * args.cols
    else:
        raw = county_scale_dataset(args.rows, args.cols, p=args.p, seed=args.seed)
        args.out.write_bytes(raw)
        n = args.rows * args.cols
    print(f"{args.out}: {n} regions, {len(raw)} bytes", file=sys.stderr)


if __name__ == "__main__":
    main()
