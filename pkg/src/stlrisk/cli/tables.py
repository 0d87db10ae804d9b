"""Output helpers: CSV formatting, fixed-bin histograms and the 1-D Wasserstein distance."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from ..risk import SampleSet

HIST_BINS = 40


def fmt(value) -> str:
    """Cell text: floats to 6 significant digits, ``None`` empty, strings as is."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if v == 0:
            v = 0.0  # no negative zero
        return format(v, ".6g")
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def histogram(values, bins: int = HIST_BINS) -> List[tuple]:
    """``(bin, lo, hi, count)`` rows of equal-width bins over ``[0, max]``.

    All-zero data gives a single ``[0, 0]`` bin.
    """
    v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("histogram expects nonnegative values")
    top = float(v.max())
    if top == 0:
        return [(0, 0.0, 0.0, int(v.size))]
    counts, edges = np.histogram(v, bins=bins, range=(0.0, top))
    return [(i, float(edges[i]), float(edges[i + 1]), int(counts[i])) for i in range(bins)]


def _sorted(x) -> np.ndarray:
    if isinstance(x, SampleSet):
        return x.sorted
    arr = np.sort(np.asarray(x, dtype=float).ravel(), kind="stable")
    if arr.size == 0:
        raise ValueError("empty sample")
    return arr


def wasserstein_1d(a, b) -> float:
    """W1 distance between two empirical distributions.

    Equal sizes use the mean absolute difference of the sorted samples;
    otherwise the integral over ``u`` in ``(0, 1)`` of ``|F_a^-1(u) - F_b^-1(u)|``
    with both quantile functions piecewise constant.
    """
    xa, xb = _sorted(a), _sorted(b)
    n, m = xa.size, xb.size
    if n == m:
        return float(np.mean(np.abs(xa - xb)))
    cuts = np.union1d(np.arange(1, n + 1) / n, np.arange(1, m + 1) / m)
    cuts = np.concatenate([[0.0], cuts[cuts < 1.0], [1.0]])
    mid = (cuts[:-1] + cuts[1:]) / 2.0
    qa = xa[np.minimum((mid * n).astype(int), n - 1)]
    qb = xb[np.minimum((mid * m).astype(int), m - 1)]
    return float(np.sum(np.diff(cuts) * np.abs(qa - qb)))
