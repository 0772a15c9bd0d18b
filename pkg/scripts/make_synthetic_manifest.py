#!/usr/bin/env python3
"""Generate a synthetic anomaly-dataset manifest with rectangular defects."""

import argparse

from defectqa.synthetic import make_synthetic_manifest


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--root", required=True, help="output directory")
    parser.add_argument("--samples", type=int, default=8000)
    parser.add_argument("--anomaly-rate", type=float, default=0.75)
    parser.add_argument("--size", type=int, default=24, help="image side length")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()
    path = make_synthetic_manifest(
        args.root,
        n_samples=args.samples,
        anomaly_rate=args.anomaly_rate,
        size=args.size,
        seed=args.seed,
    )
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
