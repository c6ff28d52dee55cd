"""Benchmark the numba kernels against the pure numpy fallback.

Times the three hot paths (split search inside tree induction, tree
routing, greedy rule matching) on synthetic data under each available
backend and prints a comparison table.

    python -m xrules.bench [--rows 20000] [--features 20] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import dtree, evaluation, kernels
from .core import Ruleset
from .dtree import TreeParams
from .synth import make_mixture


def _swap_backend(name: str):
    impl = kernels.IMPLEMENTATIONS[name]
    kernels.find_best_split = impl["find_best_split"]
    kernels.route_rows = impl["route_rows"]
    kernels.match_first = impl["match_first"]


def _time(fn, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(rows: int, features: int, repeat: int) -> list[tuple[str, dict]]:
    X, y, _ = make_mixture(rows, features, seed=0, clusters_per_class=4,
                           noise=0.02)
    results = []
    try:
        for name in sorted(kernels.IMPLEMENTATIONS):
            _swap_backend(name)
            # warm-up compiles the jitted kernels so timings measure steady state
            tree = dtree.fit(X[:200], y[:200], TreeParams())
            tree.predict_rows(X[:200])

            t_fit = _time(lambda: dtree.fit(X, y, TreeParams()), repeat)
            tree = dtree.fit(X, y, TreeParams())
            t_route = _time(lambda: tree.predict_rows(X), repeat)

            rules = dtree.extract_rules(tree)
            ruleset = Ruleset(rules, fallback=0, num_features=features)
            evaluation.classify_rows(ruleset, X[:200])
            t_match = _time(lambda: evaluation.classify_rows(ruleset, X), repeat)

            results.append((name, {
                "fit": t_fit, "route": t_route, "match": t_match,
                "leaves": tree.n_leaves, "rules": len(rules),
            }))
    finally:
        _swap_backend(kernels.BACKEND)
    return results


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="python -m xrules.bench",
                                 description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=20000)
    ap.add_argument("--features", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    results = run(args.rows, args.features, args.repeat)
    print(f"{args.rows} rows x {args.features} features, "
          f"best of {args.repeat} runs")
    print(f"{'backend':<8} {'tree fit (s)':>13} {'routing (s)':>12} "
          f"{'matching (s)':>13}")
    for name, r in results:
        print(f"{name:<8} {r['fit']:>13.4f} {r['route']:>12.4f} "
              f"{r['match']:>13.4f}")
    if len(results) == 2:
        base = dict(results)["numpy"]
        fast = dict(results)["numba"]
        print("speedup  "
              f"{base['fit'] / fast['fit']:>12.1f}x "
              f"{base['route'] / fast['route']:>11.1f}x "
              f"{base['match'] / fast['match']:>12.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
