"""Synthetic datasets for tests, benchmarks, and CLI walkthroughs.

Real intrusion datasets run to millions of rows and are not bundled;
these generators produce desk-scale stand-ins with the same shape of
problem: mostly-separable clusters per class, a little label noise, and an
optional categorical column to exercise one-hot encoding.
"""

from __future__ import annotations

import argparse
import csv

import numpy as np

_PROTOCOLS = ("icmp", "tcp", "udp")


def make_mixture(rows: int, features: int, seed: int,
                 clusters_per_class: int = 3, separation: float = 2.0,
                 cluster_std: float = 0.6, noise: float = 0.01):
    """Two-class Gaussian-mixture data scaled into [0, 1] per column.

    Returns (X, y, cluster_id); ``noise`` flips that fraction of labels.
    """
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.0, (2, clusters_per_class, features)) * separation
    y_clean = rng.integers(0, 2, rows)
    cluster = rng.integers(0, clusters_per_class, rows)
    X = centers[y_clean, cluster] + rng.normal(0.0, cluster_std, (rows, features))
    flip = rng.random(rows) < noise
    y = np.where(flip, 1 - y_clean, y_clean).astype(np.int64)

    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0] = 1.0
    X = (X - lo) / span
    return X, y, cluster


def make_blobs(rows: int, seed: int, std: float = 0.12):
    """Two tight 2-D blobs with a wide margin; trivially separable."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, rows).astype(np.int64)
    centers = np.array([[0.25, 0.25], [0.75, 0.75]])
    X = centers[y] + rng.normal(0.0, std, (rows, 2))
    return np.clip(X, 0.0, 1.0), y


def write_csv(path, X, y, cluster=None, label_col: str = "label") -> None:
    """Write features as c0..c{d-1} plus an optional categorical 'proto'
    column (derived from cluster id) and the label column."""
    n, d = X.shape
    headers = [f"c{j}" for j in range(d)]
    if cluster is not None:
        headers.append("proto")
    headers.append(label_col)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(headers)
        for i in range(n):
            row = [repr(float(v)) for v in X[i]]
            if cluster is not None:
                row.append(_PROTOCOLS[cluster[i] % len(_PROTOCOLS)])
            row.append(str(int(y[i])))
            w.writerow(row)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="python -m xrules.synth",
        description="Generate a synthetic two-class CSV dataset.",
    )
    ap.add_argument("out", help="output CSV path")
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--clusters-per-class", type=int, default=3)
    ap.add_argument("--separation", type=float, default=2.0)
    ap.add_argument("--cluster-std", type=float, default=0.6)
    ap.add_argument("--noise", type=float, default=0.01)
    ap.add_argument("--no-proto", action="store_true",
                    help="omit the categorical proto column")
    args = ap.parse_args(argv)
    X, y, cluster = make_mixture(
        args.rows, args.features, args.seed,
        clusters_per_class=args.clusters_per_class,
        separation=args.separation, cluster_std=args.cluster_std,
        noise=args.noise,
    )
    write_csv(args.out, X, y, cluster=None if args.no_proto else cluster)
    print(f"wrote {args.rows} rows x {args.features} features to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
