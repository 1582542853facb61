"""Independent, deliberately naive reference implementations used by the tests."""

import math

import numpy as np


def otsu_exhaustive(img, bins=256):
    """Try every bin-edge level, partition pixels directly, keep the first maximum."""
    img = np.asarray(img, dtype=np.float64)
    idx = np.clip(np.floor(img * bins).astype(int), 0, bins - 1)
    n = img.size
    best, best_level = -1.0, None
    for level in range(1, bins):
        fg = idx >= level
        n1 = int(fg.sum())
        n0 = n - n1
        if n0 == 0 or n1 == 0:
            continue
        m0 = img[~fg].mean()
        m1 = img[fg].mean()
        v = (n0 / n) * (n1 / n) * (m0 - m1) ** 2
        if v > best:
            best, best_level = v, level
    return best_level


def ssim_pixel_loop(a, b, window=11, sigma=1.5, k1=0.01, k2=0.03, L=1.0):
    """Direct formula over every fully contained window, no vectorization."""
    h = window // 2
    w = np.empty((window, window))
    for i in range(window):
        for j in range(window):
            w[i, j] = math.exp(-((i - h) ** 2 + (j - h) ** 2) / (2 * sigma * sigma))
    w /= w.sum()
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    vals = []
    H, W = a.shape
    for r in range(h, H - h):
        for c in range(h, W - h):
            pa = a[r - h: r + h + 1, c - h: c + h + 1]
            pb = b[r - h: r + h + 1, c - h: c + h + 1]
            ma = float((w * pa).sum())
            mb = float((w * pb).sum())
            va = float((w * (pa - ma) ** 2).sum())
            vb = float((w * (pb - mb) ** 2).sum())
            cov = float((w * (pa - ma) * (pb - mb)).sum())
            vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
    return sum(vals) / len(vals)


def pearson_direct(u, v):
    n = len(u)
    mu = math.fsum(u) / n
    mv = math.fsum(v) / n
    suv = math.fsum((x - mu) * (y - mv) for x, y in zip(u, v))
    suu = math.fsum((x - mu) ** 2 for x in u)
    svv = math.fsum((y - mv) ** 2 for y in v)
    return suv / math.sqrt(suu * svv)
