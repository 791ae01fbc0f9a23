"""Loop-heavy numeric kernels with a numba fast path and a pure-numpy fallback.

Two kernel families live here:

* counter-based uniform variates keyed on ``(seed, row, stream)``, so results
  never depend on evaluation order or parallel chunking;
* widest-window searches over piecewise-constant curve values, used by the
  benefit-of-the-doubt interval diagnostics.

Backend selection: the numba implementations are used when numba imports
cleanly and the environment variable ``FAIRSHIFT_DISABLE_NUMBA`` is unset
(or "0"/""); otherwise the numpy fallbacks run.  Both backends are exact and
bit-identical; ``benchmarks/bench_kernels.py`` compares their speed.
"""

from __future__ import annotations

import os

import numpy as np

_ENV_FLAG = "FAIRSHIFT_DISABLE_NUMBA"

# splitmix64 constants
_C0 = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB


def numba_requested() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip() in ("", "0")


def _load_numba():
    if not numba_requested():
        return None
    try:
        import numba
    except ImportError:
        return None
    return numba


_NUMBA = _load_numba()


def active_backend() -> str:
    """Name of the backend the public kernel entry points dispatch to."""
    return "numba" if _NUMBA is not None else "numpy"


# ---------------------------------------------------------------------------
# counter-based uniforms
# ---------------------------------------------------------------------------


def _mix_key(seed: int, stream: int) -> int:
    # scalar splitmix64 finalizer over (seed, stream), python ints mod 2**64
    z = (int(seed) & 0xFFFFFFFFFFFFFFFF) ^ ((int(stream) * _C2) & 0xFFFFFFFFFFFFFFFF)
    z = (z + _C0) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * _C1) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * _C2) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def counter_uniforms_np(seed: int, indices: np.ndarray, stream: int) -> np.ndarray:
    key = np.uint64(_mix_key(seed, stream))
    idx = indices.astype(np.uint64, copy=False)
    with np.errstate(over="ignore"):
        z = idx * np.uint64(_C0) + key
        z = (z + np.uint64(_C0))
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
        z = z ^ (z >> np.uint64(31))
    return ((z >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


if _NUMBA is not None:

    @_NUMBA.njit(cache=True)
    def _counter_uniforms_jit(key, indices, out):  # pragma: no cover - jitted
        c0 = np.uint64(_C0)
        c1 = np.uint64(_C1)
        c2 = np.uint64(_C2)
        for i in range(indices.shape[0]):
            z = indices[i] * c0 + key
            z = z + c0
            z = (z ^ (z >> np.uint64(30))) * c1
            z = (z ^ (z >> np.uint64(27))) * c2
            z = z ^ (z >> np.uint64(31))
            out[i] = (np.float64(z >> np.uint64(11)) + 0.5) * 2.0**-53

    def counter_uniforms_nb(seed: int, indices: np.ndarray, stream: int) -> np.ndarray:
        key = np.uint64(_mix_key(seed, stream))
        idx = indices.astype(np.uint64, copy=False)
        out = np.empty(idx.shape[0], dtype=np.float64)
        _counter_uniforms_jit(key, idx, out)
        return out

else:
    counter_uniforms_nb = counter_uniforms_np


def counter_uniforms(seed: int, indices: np.ndarray, stream: int) -> np.ndarray:
    """Uniform(0,1) variates, one per index, a pure function of the inputs."""
    if _NUMBA is not None:
        return counter_uniforms_nb(seed, indices, stream)
    return counter_uniforms_np(seed, indices, stream)


# ---------------------------------------------------------------------------
# widest-window searches
#
# Grid convention: ``theta`` holds g strictly increasing grid points; a
# window is a half-open index range [i, e) of curve values, standing for the
# open threshold interval (theta[i], theta[e]).  A window is valid when
#   strict mode:   min(da[i:e]) > max(db[i:e])
#   ordered mode:  da[s] > db[t] for all i <= t <= s <= e-1
# Both validity notions shrink as windows grow, so for each left endpoint a
# maximal right endpoint exists and is nondecreasing in the left endpoint.
# Kernels return the (i, e) pair maximizing theta[e] - theta[i] (first such
# pair on ties), or (-1, -1) when no window is valid.
# ---------------------------------------------------------------------------


def _build_min_table(values: np.ndarray) -> np.ndarray:
    """Sparse table of range minima: table[k, i] = min(values[i : i + 2**k])."""
    g = values.shape[0]
    levels = max(1, int(np.floor(np.log2(g))) + 1)
    table = np.empty((levels, g), dtype=values.dtype)
    table[0] = values
    for k in range(1, levels):
        half = 1 << (k - 1)
        span = g - (1 << k) + 1
        table[k, :span] = np.minimum(table[k - 1, :span], table[k - 1, half : half + span])
        table[k, span:] = table[k - 1, span:]
    return table


def _range_min(table: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Vectorized min(values[lo..hi]) for aligned index arrays, lo <= hi."""
    length = hi - lo + 1
    k = np.frexp(length.astype(np.float64))[1] - 1  # floor(log2(length))
    left = table[k, lo]
    right = table[k, hi - (1 << k) + 1]
    return np.minimum(left, right)


def _binary_max_end(limit: int, start: np.ndarray, accept) -> np.ndarray:
    """Largest k in [start-1, limit] such that accept(start, k) holds for the
    prefix window, by descending binary ascent; start-1 encodes 'none'."""
    k = start - 1
    if limit < 0:
        return k
    step = 1
    while step <= limit + 1:
        step <<= 1
    while step:
        cand = k + step
        mask = cand <= limit
        if np.any(mask):
            trial = np.where(mask, cand, start)  # placeholder keeps windows well-formed
            ok = mask & accept(start, trial)
            k = np.where(ok, cand, k)
        step >>= 1
    return k


def widest_strict_window_np(theta: np.ndarray, da: np.ndarray, db: np.ndarray):
    g = theta.shape[0]
    if g < 2:
        return (-1, -1)
    limit = g - 2
    min_da = _build_min_table(da)
    max_db = _build_min_table(-db)  # range-max via negated minima
    starts = np.arange(limit + 1)

    def accept(lo, hi):
        return _range_min(min_da, lo, hi) > -_range_min(max_db, lo, hi)

    ends = _binary_max_end(limit, starts, accept)
    valid = ends >= starts
    if not np.any(valid):
        return (-1, -1)
    widths = np.where(valid, theta[np.minimum(ends + 1, g - 1)] - theta[starts], -np.inf)
    i = int(np.argmax(widths))
    return (i, int(ends[i]) + 1)


def widest_ordered_window_np(theta: np.ndarray, da: np.ndarray, db: np.ndarray):
    g = theta.shape[0]
    if g < 2:
        return (-1, -1)
    limit = g - 2
    min_da = _build_min_table(da)
    t = np.arange(limit + 1)

    # stage 1: J[t] = largest k <= limit with min(da[t..k]) > db[t]
    def accept_suffix(lo, hi):
        return _range_min(min_da, lo, hi) > db[lo]

    last_ok = _binary_max_end(limit, t, accept_suffix)  # may be t-1
    j_table = _build_min_table(last_ok)

    # stage 2: per i, largest k with min(J[i..k]) >= k
    def accept_window(lo, hi):
        return _range_min(j_table, lo, hi) >= hi

    ends = _binary_max_end(limit, t, accept_window)
    valid = ends >= t
    if not np.any(valid):
        return (-1, -1)
    widths = np.where(valid, theta[np.minimum(ends + 1, g - 1)] - theta[t], -np.inf)
    i = int(np.argmax(widths))
    return (i, int(ends[i]) + 1)


if _NUMBA is not None:

    @_NUMBA.njit(cache=True)
    def _widest_strict_jit(theta, da, db):  # pragma: no cover - jitted
        g = theta.shape[0]
        if g < 2:
            return -1, -1
        limit = g - 2
        qa = np.empty(g, np.int64)  # min-deque over da (indices)
        qb = np.empty(g, np.int64)  # max-deque over db (indices)
        qa_h = qa_t = qb_h = qb_t = 0
        e = 0  # window values are [i, e)
        best_i = -1
        best_e = -1
        best_w = -np.inf
        for i in range(limit + 1):
            if e < i:
                e = i
            while qa_h < qa_t and qa[qa_h] < i:
                qa_h += 1
            while qb_h < qb_t and qb[qb_h] < i:
                qb_h += 1
            while e <= limit:
                new_min = da[e]
                if qa_h < qa_t and da[qa[qa_h]] < new_min:
                    new_min = da[qa[qa_h]]
                new_max = db[e]
                if qb_h < qb_t and db[qb[qb_h]] > new_max:
                    new_max = db[qb[qb_h]]
                if not new_min > new_max:
                    break
                while qa_t > qa_h and da[qa[qa_t - 1]] >= da[e]:
                    qa_t -= 1
                qa[qa_t] = e
                qa_t += 1
                while qb_t > qb_h and db[qb[qb_t - 1]] <= db[e]:
                    qb_t -= 1
                qb[qb_t] = e
                qb_t += 1
                e += 1
            if e > i:
                w = theta[e] - theta[i]
                if w > best_w:
                    best_w = w
                    best_i = i
                    best_e = e
        return best_i, best_e

    @_NUMBA.njit(cache=True)
    def _widest_ordered_jit(theta, da, db):  # pragma: no cover - jitted
        g = theta.shape[0]
        if g < 2:
            return -1, -1
        limit = g - 2
        # sparse table of range minima over da
        levels = 1
        while (1 << levels) <= limit + 1:
            levels += 1
        table = np.empty((levels, limit + 1), np.float64)
        for i in range(limit + 1):
            table[0, i] = da[i]
        for k in range(1, levels):
            half = 1 << (k - 1)
            for i in range(limit + 1):
                j = i + half
                if j <= limit:
                    table[k, i] = min(table[k - 1, i], table[k - 1, j])
                else:
                    table[k, i] = table[k - 1, i]
        # stage 1: last index k with min(da[t..k]) > db[t]
        last_ok = np.empty(limit + 1, np.int64)
        for t in range(limit + 1):
            if not da[t] > db[t]:
                last_ok[t] = t - 1
                continue
            # binary ascent using the table
            k = t - 1
            step = 1 << (levels - 1)
            while step:
                cand = k + step
                if cand <= limit:
                    # min over [t..cand]
                    length = cand - t + 1
                    kk = 0
                    while (1 << (kk + 1)) <= length:
                        kk += 1
                    m = min(table[kk, t], table[kk, cand - (1 << kk) + 1])
                    if m > db[t]:
                        k = cand
                step >>= 1
            last_ok[t] = k
        # stage 2: two-pointer with min-deque over last_ok
        qj = np.empty(limit + 1, np.int64)
        qj_h = qj_t = 0
        e = 0
        best_i = -1
        best_e = -1
        best_w = -np.inf
        for i in range(limit + 1):
            if e < i:
                e = i
            while qj_h < qj_t and qj[qj_h] < i:
                qj_h += 1
            while e <= limit:
                new_min = last_ok[e]
                if qj_h < qj_t and last_ok[qj[qj_h]] < new_min:
                    new_min = last_ok[qj[qj_h]]
                if not new_min >= e:
                    break
                while qj_t > qj_h and last_ok[qj[qj_t - 1]] >= last_ok[e]:
                    qj_t -= 1
                qj[qj_t] = e
                qj_t += 1
                e += 1
            if e > i:
                w = theta[e] - theta[i]
                if w > best_w:
                    best_w = w
                    best_i = i
                    best_e = e
        return best_i, best_e

    def widest_strict_window_nb(theta, da, db):
        return _widest_strict_jit(
            np.ascontiguousarray(theta, dtype=np.float64),
            np.ascontiguousarray(da, dtype=np.float64),
            np.ascontiguousarray(db, dtype=np.float64),
        )

    def widest_ordered_window_nb(theta, da, db):
        return _widest_ordered_jit(
            np.ascontiguousarray(theta, dtype=np.float64),
            np.ascontiguousarray(da, dtype=np.float64),
            np.ascontiguousarray(db, dtype=np.float64),
        )

else:
    widest_strict_window_nb = widest_strict_window_np
    widest_ordered_window_nb = widest_ordered_window_np


def widest_strict_window(theta, da, db):
    """Widest open interval where every da value beats every db value."""
    if _NUMBA is not None:
        return widest_strict_window_nb(theta, da, db)
    return widest_strict_window_np(theta, da, db)


def widest_ordered_window(theta, da, db):
    """Widest open interval where da[s] > db[t] whenever s >= t inside it."""
    if _NUMBA is not None:
        return widest_ordered_window_nb(theta, da, db)
    return widest_ordered_window_np(theta, da, db)
