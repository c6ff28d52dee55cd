"""Hot numeric kernels with two interchangeable backends.

Tree induction, tree routing, and greedy rule matching dominate runtime, so
each has a scalar implementation compiled with numba and a vectorized pure
numpy fallback. The active backend is chosen at import time by the
``XRULES_BACKEND`` environment variable:

    auto   -- numba if importable, else numpy (default)
    numba  -- require numba, fail loudly if missing
    numpy  -- force the pure numpy path

Both backends produce identical outputs: split gains are computed from
exact integer class counts with the same float64 expression, and tie-breaks
(lowest feature, then lowest threshold, first matching rule) are
first-occurrence in both. ``python -m xrules.bench`` times one against the
other.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "IMPLEMENTATIONS",
    "find_best_split",
    "route_rows",
    "match_first",
]


# --------------------------------------------------------------------------
# Scalar implementations (numba-compatible source; slow without jit)
# --------------------------------------------------------------------------

def _split_scalar(X, rows, y, n_classes):
    """Best (feature, threshold) for the node covering ``rows``.

    Candidates are midpoints between consecutive distinct sorted values.
    Returns (feature, threshold, delta) where delta is the node's Gini
    impurity decrease; feature is -1 when no candidate exists. Gini values
    come from integer class counts, so equal-quality splits compare exactly
    equal and the first one scanned (lowest feature, lowest threshold) wins.
    """
    n = rows.shape[0]
    total = np.zeros(n_classes, dtype=np.int64)
    yloc = np.empty(n, dtype=np.int64)
    for i in range(n):
        yi = y[rows[i]]
        yloc[i] = yi
        total[yi] += 1
    sumsq_tot = np.int64(0)
    for k in range(n_classes):
        sumsq_tot += total[k] * total[k]
    n64 = np.int64(n)
    g0 = 1.0 - sumsq_tot / (n64 * n64)

    best_delta = -1.0
    best_feat = np.int64(-1)
    best_thresh = 0.0
    cnt = np.zeros(n_classes, dtype=np.int64)
    xs = np.empty(n, dtype=np.float64)
    for f in range(X.shape[1]):
        for i in range(n):
            xs[i] = X[rows[i], f]
        order = np.argsort(xs)
        for k in range(n_classes):
            cnt[k] = 0
        sumsq_l = np.int64(0)
        dot = np.int64(0)
        for i in range(n - 1):
            c = yloc[order[i]]
            sumsq_l += 2 * cnt[c] + 1
            dot += total[c]
            cnt[c] += 1
            lo_v = xs[order[i]]
            hi_v = xs[order[i + 1]]
            if hi_v > lo_v:
                n_l = np.int64(i + 1)
                n_r = n64 - n_l
                sumsq_r = sumsq_tot - 2 * dot + sumsq_l
                g_l = 1.0 - sumsq_l / (n_l * n_l)
                g_r = 1.0 - sumsq_r / (n_r * n_r)
                delta = g0 - (n_l * g_l + n_r * g_r) / n64
                if delta > best_delta:
                    best_delta = delta
                    best_feat = np.int64(f)
                    best_thresh = 0.5 * (lo_v + hi_v)
    return best_feat, best_thresh, best_delta


def _route_scalar(feature, threshold, left, right, X):
    """Leaf node index reached by each row (left on ``value <= threshold``)."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


def _match_scalar(feats, is_upper, thresholds, offsets, labels, order, X, fallback):
    """Greedy first-match of packed rules against each row.

    Rules are visited in ``order`` (a permutation of original rule indices);
    the first rule whose terms all hold wins. Returns (labels, matched rule
    original index or -1, rules checked per row).
    """
    n = X.shape[0]
    n_rules = order.shape[0]
    out_label = np.empty(n, dtype=np.int64)
    out_rule = np.full(n, -1, dtype=np.int64)
    checked = np.zeros(n, dtype=np.int64)
    for i in range(n):
        matched = False
        seen = np.int64(0)
        for jj in range(n_rules):
            j = order[jj]
            seen = jj + 1
            ok = True
            for t in range(offsets[j], offsets[j + 1]):
                v = X[i, feats[t]]
                if is_upper[t] == 1:
                    if v > thresholds[t]:
                        ok = False
                        break
                else:
                    if v <= thresholds[t]:
                        ok = False
                        break
            if ok:
                out_label[i] = labels[j]
                out_rule[i] = j
                matched = True
                break
        if not matched:
            out_label[i] = fallback
        checked[i] = seen
    return out_label, out_rule, checked


# --------------------------------------------------------------------------
# Vectorized numpy implementations
# --------------------------------------------------------------------------

def _split_numpy(X, rows, y, n_classes):
    """Vectorized twin of ``_split_scalar``; same arithmetic, same tie-breaks."""
    n = rows.shape[0]
    yloc = y[rows]
    total = np.bincount(yloc, minlength=n_classes).astype(np.int64)
    sumsq_tot = np.int64(0)
    for k in range(n_classes):
        sumsq_tot += total[k] * total[k]
    n64 = np.int64(n)
    g0 = 1.0 - sumsq_tot / (n64 * n64)

    best_delta = -1.0
    best_feat = np.int64(-1)
    best_thresh = 0.0
    for f in range(X.shape[1]):
        xs = X[rows, f]
        order = np.argsort(xs)
        xs_s = xs[order]
        bound = np.nonzero(xs_s[1:] > xs_s[:-1])[0]
        if bound.size == 0:
            continue
        ys_s = yloc[order]
        n_l = (bound + 1).astype(np.int64)
        n_r = n64 - n_l
        sumsq_l = np.zeros(bound.size, dtype=np.int64)
        dot = np.zeros(bound.size, dtype=np.int64)
        for k in range(n_classes):
            ck = np.cumsum(ys_s == k, dtype=np.int64)[bound]
            sumsq_l += ck * ck
            dot += total[k] * ck
        sumsq_r = sumsq_tot - 2 * dot + sumsq_l
        g_l = 1.0 - sumsq_l / (n_l * n_l)
        g_r = 1.0 - sumsq_r / (n_r * n_r)
        delta = g0 - (n_l * g_l + n_r * g_r) / n64
        j = int(np.argmax(delta))
        if delta[j] > best_delta:
            best_delta = float(delta[j])
            best_feat = np.int64(f)
            i = int(bound[j])
            best_thresh = 0.5 * (xs_s[i] + xs_s[i + 1])
    return best_feat, best_thresh, best_delta


def _route_numpy(feature, threshold, left, right, X):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = np.nonzero(feature[node] >= 0)[0]
    while active.size:
        nd = node[active]
        f = feature[nd]
        go_left = X[active, f] <= threshold[nd]
        node[active] = np.where(go_left, left[nd], right[nd])
        active = active[feature[node[active]] >= 0]
    return node


def _match_numpy(feats, is_upper, thresholds, offsets, labels, order, X, fallback):
    n, n_feat = X.shape
    n_rules = order.shape[0]
    out_label = np.full(n, fallback, dtype=np.int64)
    out_rule = np.full(n, -1, dtype=np.int64)
    checked = np.full(n, n_rules, dtype=np.int64)
    if n_rules == 0:
        checked[:] = 0
        return out_label, out_rule, checked

    # Dense per-rule bounds: a rule matches x iff lower < x <= upper on all
    # features (canonical rules carry at most one bound of each kind).
    lower = np.full((n_rules, n_feat), -np.inf)
    upper = np.full((n_rules, n_feat), np.inf)
    for j in range(n_rules):
        for t in range(offsets[j], offsets[j + 1]):
            if is_upper[t]:
                upper[j, feats[t]] = min(upper[j, feats[t]], thresholds[t])
            else:
                lower[j, feats[t]] = max(lower[j, feats[t]], thresholds[t])
    lo = lower[order]
    up = upper[order]
    labels_ord = labels[order]

    chunk = max(1, 8_000_000 // (n_rules * n_feat + 1))
    for start in range(0, n, chunk):
        xc = X[start:start + chunk]
        ok = ((xc[:, None, :] <= up[None, :, :]) &
              (xc[:, None, :] > lo[None, :, :])).all(axis=2)
        has = ok.any(axis=1)
        first = ok.argmax(axis=1)
        rows = np.nonzero(has)[0]
        out_rule[start + rows] = order[first[rows]]
        out_label[start + rows] = labels_ord[first[rows]]
        checked[start + rows] = first[rows] + 1
    return out_label, out_rule, checked


# --------------------------------------------------------------------------
# Backend selection
# --------------------------------------------------------------------------

def _build_numba_impl():
    from numba import njit

    jit = njit(cache=True)
    return {
        "find_best_split": jit(_split_scalar),
        "route_rows": jit(_route_scalar),
        "match_first": jit(_match_scalar),
    }


_NUMPY_IMPL = {
    "find_best_split": _split_numpy,
    "route_rows": _route_numpy,
    "match_first": _match_numpy,
}

IMPLEMENTATIONS: dict[str, dict] = {"numpy": _NUMPY_IMPL}

_requested = os.environ.get("XRULES_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(f"XRULES_BACKEND must be auto|numba|numpy, got {_requested!r}")

BACKEND = "numpy"
if _requested in ("auto", "numba"):
    try:
        IMPLEMENTATIONS["numba"] = _build_numba_impl()
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise ImportError(
                "XRULES_BACKEND=numba but numba is not installed; "
                "pip install numba or set XRULES_BACKEND=numpy"
            )

_active = IMPLEMENTATIONS[BACKEND]
find_best_split = _active["find_best_split"]
route_rows = _active["route_rows"]
match_first = _active["match_first"]
