"""Deliberately naive reference implementations used as test oracles.

Everything here is straight-line code: explicit loops, no clever indexing,
no shared helpers with the package. The only primitives shared with the
implementation under test are library calls that are not themselves under
test (np.convolve, np.histogram bin assignment via explicit edge scans that
mirror numpy's closed-right-last-bin rule, np.percentile), so that float
results are comparable at tight tolerances.
"""

from __future__ import annotations

import math

import numpy as np


def naive_mean(xs) -> float:
    return sum(float(v) for v in xs) / len(xs)


def naive_var(xs) -> float:
    m = naive_mean(xs)
    return sum((float(v) - m) ** 2 for v in xs) / len(xs)


def naive_std(xs) -> float:
    return math.sqrt(naive_var(xs))


def naive_lumpiness(xs, n: int) -> float:
    variances = []
    for start in range(0, len(xs) - n + 1, n):
        variances.append(naive_var(xs[start : start + n]))
    return naive_var(variances)


def naive_level_shift(xs, n: int) -> float:
    means = []
    for start in range(0, len(xs) - n + 1, n):
        means.append(naive_mean(xs[start : start + n]))
    return max(abs(means[i + 1] - means[i]) for i in range(len(means) - 1))


def naive_histogram_probs(block, edges, epsilon: float):
    bins = len(edges) - 1
    counts = [0] * bins
    for v in block:
        for b in range(bins):
            last = b == bins - 1
            if (edges[b] <= v < edges[b + 1]) or (last and edges[b] <= v <= edges[b + 1]):
                counts[b] += 1
                break
    probs = [c / len(block) + epsilon for c in counts]
    total = sum(probs)
    return [p / total for p in probs]


def naive_kl_score(xs, n: int, bins: int, epsilon: float, mode: str = "max_kl") -> float:
    lo = min(float(v) for v in xs)
    hi = max(float(v) for v in xs)
    if hi == lo:
        return 0.0
    edges = np.linspace(lo, hi, bins + 1)
    blocks = []
    for start in range(0, len(xs) - n + 1, n):
        blocks.append(naive_histogram_probs(xs[start : start + n], edges, epsilon))
    divergences = []
    for i in range(len(blocks) - 1):
        p, q = blocks[i], blocks[i + 1]
        divergences.append(sum(p[b] * math.log(p[b] / q[b]) for b in range(bins)))
    if mode == "max_kl" or len(divergences) == 1:
        return max(divergences)
    return max(
        abs(divergences[i + 1] - divergences[i]) for i in range(len(divergences) - 1)
    )


def naive_ratio_beyond_r_sigma(xs, r: float) -> float:
    m = naive_mean(xs)
    s = naive_std(xs)
    if s == 0.0:
        return 0.0
    count = 0
    for v in xs:
        if abs(float(v) - m) > r * s:
            count += 1
    return count / len(xs)


def _naive_ricker(width: int, max_len: int):
    # Same sampled-wavelet arithmetic as the implementation (numpy elementwise,
    # so the count comparison below exercises the ridge logic, not libm ulps).
    half = min(5 * width, (max_len - 1) // 2)
    amp = 2.0 / (math.sqrt(3.0 * width) * math.pi**0.25)
    t = np.arange(-half, half + 1, dtype=np.float64)
    kernel = amp * (1.0 - (t / width) ** 2) * np.exp(-(t**2) / (2.0 * width**2))
    return kernel, half


def naive_num_peaks(xs, max_width: int, snr: float) -> int:
    """Straight-line re-statement of the CWT ridge-line peak count.

    Rows are Ricker responses for widths 1..max_width with edge-replicated
    padding. Strict interior local maxima are linked top-down: each maximum
    in the next row down joins the closest open ridge within
    max(1, ceil(w/4)) columns (ties to the ridge at the lower column), or
    starts a new ridge. A ridge counts as a peak when it spans at least
    ceil(max_width/4) rows and its strongest signed value is at least snr
    times the 90th-percentile magnitude of that value's row.
    """
    values = [float(v) for v in xs]
    t_len = len(values)
    rows = []
    for width in range(1, max_width + 1):
        kernel, half = _naive_ricker(width, t_len)
        padded = np.asarray([values[0]] * half + values + [values[-1]] * half)
        rows.append(np.convolve(padded, kernel, mode="valid"))

    maxima_per_row = []
    for row in rows:
        maxima = []
        for c in range(1, len(row) - 1):
            if row[c] > row[c - 1] and row[c] > row[c + 1]:
                maxima.append(c)
        maxima_per_row.append(maxima)

    ridges = []  # each ridge: list of (row, col), top row first
    open_ids = []
    for c in maxima_per_row[max_width - 1]:
        ridges.append([(max_width - 1, c)])
        open_ids.append(len(ridges) - 1)
    for r in range(max_width - 1, 0, -1):
        reach = max(1, math.ceil((r + 1) / 4))
        available = list(open_ids)
        new_open = []
        for col in maxima_per_row[r - 1]:
            chosen = None
            chosen_key = None
            for rid in available:
                last_col = ridges[rid][-1][1]
                dist = abs(last_col - col)
                if dist > reach:
                    continue
                key = (dist, last_col)
                if chosen is None or key < chosen_key:
                    chosen, chosen_key = rid, key
            if chosen is None:
                ridges.append([(r - 1, col)])
                new_open.append(len(ridges) - 1)
            else:
                ridges[chosen].append((r - 1, col))
                available.remove(chosen)
                new_open.append(chosen)
        open_ids = new_open

    needed = math.ceil(max_width / 4)
    count = 0
    for ridge in ridges:
        if len(ridge) < needed:
            continue
        peak_row, peak_col = ridge[0]
        for r, c in ridge:
            if rows[r][c] > rows[peak_row][peak_col]:
                peak_row, peak_col = r, c
        peak_val = rows[peak_row][peak_col]
        if peak_val <= 0:
            continue
        noise = float(np.percentile(np.abs(rows[peak_row]), 90))
        if noise == 0.0 or peak_val / noise >= snr:
            count += 1
    return count


def naive_point_features(xs, index: int) -> dict:
    values = [float(v) for v in xs]
    n = len(values)
    m = naive_mean(values)
    s = naive_std(values)
    z = [(v - m) / s if s > 0 else 0.0 for v in values]

    def local_peak(i: int) -> bool:
        if n < 2:
            return False
        ok = True
        if i > 0:
            ok = ok and values[i] > values[i - 1]
        if i < n - 1:
            ok = ok and values[i] > values[i + 1]
        return ok

    def local_valley(i: int) -> bool:
        if n < 2:
            return False
        ok = True
        if i > 0:
            ok = ok and values[i] < values[i - 1]
        if i < n - 1:
            ok = ok and values[i] < values[i + 1]
        return ok

    peaks = [i for i in range(n) if local_peak(i)]
    valleys = [i for i in range(n) if local_valley(i)]
    highest = None
    for i in peaks:
        if highest is None or z[i] > z[highest]:
            highest = i
    lowest = None
    for i in valleys:
        if lowest is None or z[i] < z[lowest]:
            lowest = i
    constant = max(values) == min(values)
    return {
        "index": index,
        "value": values[index],
        "z_score": z[index],
        "is_global_max": (not constant) and values[index] == max(values),
        "is_global_min": (not constant) and values[index] == min(values),
        "is_local_peak": local_peak(index),
        "is_local_valley": local_valley(index),
        "is_highest_spike": index == highest,
        "is_lowest_valley": index == lowest,
    }


def central_difference_grad(forward_prob, x: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Elementwise central differences of a scalar function of a (C, T) array."""
    fd = np.zeros_like(x)
    for c in range(x.shape[0]):
        for t in range(x.shape[1]):
            xp = x.copy()
            xp[c, t] += h
            xm = x.copy()
            xm[c, t] -= h
            fd[c, t] = (forward_prob(xp) - forward_prob(xm)) / (2.0 * h)
    return fd
