"""Pool-adjacent-violators monotone repair (unweighted L2)."""

from __future__ import annotations

import numpy as np


def pav_nondecreasing(y):
    """Least-squares nondecreasing fit to y; returns (fitted, max_adjustment).

    Standard pool-adjacent-violators: maintain a stack of blocks with their
    means and merge while the means decrease.
    """
    y = np.asarray(y, dtype=np.float64)
    n = y.size
    if n == 0:
        return y.copy(), 0.0
    means = np.empty(n)
    counts = np.empty(n, dtype=np.int64)
    top = 0
    for v in y:
        means[top] = v
        counts[top] = 1
        top += 1
        while top > 1 and means[top - 2] > means[top - 1]:
            total = means[top - 2] * counts[top - 2] + means[top - 1] * counts[top - 1]
            counts[top - 2] += counts[top - 1]
            means[top - 2] = total / counts[top - 2]
            top -= 1
    out = np.repeat(means[:top], counts[:top])
    return out, float(np.max(np.abs(out - y)))
