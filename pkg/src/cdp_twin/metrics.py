"""Evaluation metrics: MSE, SSIM, Otsu binarization, Hamming distance,
Pearson correlation and a Fréchet distance over pluggable features (pFID).
"""

from dataclasses import dataclass, fields

import numpy as np
from scipy import ndimage

from cdp_twin.errors import NumericalError, ParameterError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 1.0

REPORT_COLUMNS = ("model", "pfid_x2z", "hamming", "pfid_z2x", "mse", "ssim")


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ParameterError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ParameterError("empty image")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    d = a - b
    return float(np.mean(d * d))


# --- Otsu -----------------------------------------------------------------


@dataclass(frozen=True)
class OtsuResult:
    """``threshold`` is the bin edge ``level / bins``; pixels whose histogram bin
    index is ``>= level`` binarize to 1. ``degenerate`` marks images with a single
    occupied bin, for which the upper edge of that bin is returned (all-zeros output).
    """

    threshold: float
    level: int
    bins: int
    degenerate: bool


def histogram_bins(img, bins: int = 256) -> np.ndarray:
    """Bin index of every pixel for a ``bins``-bin histogram over [0, 1]."""
    idx = np.floor(np.asarray(img, dtype=np.float64) * bins).astype(np.int64)
    return np.clip(idx, 0, bins - 1)


def otsu_threshold(img, bins: int = 256) -> OtsuResult:
    arr = np.asarray(img, dtype=np.float64)
    if arr.size == 0:
        raise ParameterError("Otsu threshold of an empty image")
    if bins < 2:
        raise ParameterError(f"need at least 2 histogram bins, got {bins}")
    idx = histogram_bins(arr, bins).ravel()
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    sums = np.bincount(idx, weights=arr.ravel(), minlength=bins)
    occupied = np.flatnonzero(counts)
    if occupied.size < 2:
        level = int(occupied[0]) + 1
        return OtsuResult(level / bins, level, bins, True)

    n = float(arr.size)
    n0 = np.cumsum(counts)[:-1]  # background = bins [0, k), k = 1 .. bins-1
    s0 = np.cumsum(sums)[:-1]
    n1 = n - n0
    s1 = sums.sum() - s0
    valid = (n0 > 0) & (n1 > 0)
    between = np.full(bins - 1, -np.inf)
    m0 = s0[valid] / n0[valid]
    m1 = s1[valid] / n1[valid]
    between[valid] = (n0[valid] / n) * (n1[valid] / n) * (m0 - m1) ** 2
    level = int(np.argmax(between)) + 1  # first maximum -> lowest threshold
    return OtsuResult(level / bins, level, bins, False)


def binarize(img, mode: str = "otsu", bins: int = 256) -> np.ndarray:
    """Binarize with a per-image Otsu threshold or the fixed edge 0.5."""
    if mode == "otsu":
        res = otsu_threshold(img, bins)
        level = res.level
    elif mode == "fixed":
        level = bins // 2
    else:
        raise ParameterError(f"unknown binarization mode {mode!r}")
    return (histogram_bins(img, bins) >= level).astype(np.uint8)


def hamming(a, b) -> float:
    """Normalized Hamming distance between two binary fields."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ParameterError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ParameterError("empty field")
    for f in (a, b):
        if not np.all((f == 0) | (f == 1)):
            raise ParameterError("hamming expects binary fields; binarize (Otsu) first")
    return float(np.count_nonzero(a != b)) / a.size


# --- SSIM -----------------------------------------------------------------


def gaussian_window_1d(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(img, g):
    h = len(g) // 2
    out = ndimage.correlate1d(img, g, axis=0, mode="constant")
    out = ndimage.correlate1d(out, g, axis=1, mode="constant")
    return out[h:-h, h:-h] if h else out


def ssim_map(a, b, *, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA,
             k1: float = SSIM_K1, k2: float = SSIM_K2, data_range: float = SSIM_L) -> np.ndarray:
    """Local SSIM over every window position that lies fully inside the image."""
    a, b = _pair(a, b)
    if a.ndim != 2 or min(a.shape) < window:
        raise ParameterError(f"SSIM needs 2-D images of at least {window}x{window}, got {a.shape}")
    g = gaussian_window_1d(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b, **kwargs) -> float:
    return float(np.mean(ssim_map(a, b, **kwargs)))


# --- correlation ----------------------------------------------------------


def pearson(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ParameterError(f"length mismatch: {u.size} vs {v.size}")
    if u.size < 2:
        raise ParameterError("pearson needs at least two samples")
    du = u - u.mean()
    dv = v - v.mean()
    su = np.sqrt(np.dot(du, du))
    sv = np.sqrt(np.dot(dv, dv))
    if su == 0.0 or sv == 0.0:
        raise NumericalError("correlation undefined: zero variance input")
    r = np.dot(du, dv) / (su * sv)
    return float(np.clip(r, -1.0, 1.0))


# --- Fréchet distance -----------------------------------------------------


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray
    n: int


def gaussian_stats(features) -> GaussianStats:
    """Sample mean and unbiased covariance of a list of d-vectors."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 2:
        raise ParameterError(f"need at least 2 feature vectors, got {x.shape[0] if x.ndim else 0}")
    mean = x.mean(axis=0)
    d = x - mean
    cov = d.T @ d / (x.shape[0] - 1)
    return GaussianStats(mean, (cov + cov.T) / 2.0, int(x.shape[0]))


def _sqrtm_psd(m):
    w, v = np.linalg.eigh((m + m.T) / 2.0)
    if w.min(initial=0.0) < -1e-6:
        raise NumericalError(f"matrix not positive semi-definite (eigenvalue {w.min():.3g})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T, w


def frechet_distance(p: GaussianStats, q: GaussianStats) -> float:
    """Squared Fréchet distance between two Gaussians.

    ``Tr((S1 S2)^1/2)`` is evaluated as the trace of the square root of the
    symmetric product ``S1^1/2 S2 S1^1/2``, which has the same spectrum.
    """
    m1, m2 = np.atleast_1d(p.mean), np.atleast_1d(q.mean)
    s1, s2 = np.atleast_2d(p.cov), np.atleast_2d(q.cov)
    if m1.shape != m2.shape or s1.shape != s2.shape or s1.shape != (m1.size, m1.size):
        raise ParameterError(f"dimension mismatch: {m1.shape} vs {m2.shape}")
    if np.array_equal(m1, m2) and np.array_equal(s1, s2):
        return 0.0
    root1, _ = _sqrtm_psd(s1)
    _, w = _sqrtm_psd(root1 @ s2 @ root1)
    diff = m1 - m2
    d2 = float(diff @ diff + np.trace(s1) + np.trace(s2) - 2.0 * np.sum(np.sqrt(w)))
    if not np.isfinite(d2):
        raise NumericalError("Fréchet distance is not finite")
    return max(d2, 0.0)


def patch_histogram_features(img, patch: int = 16, bins: int = 16) -> np.ndarray:
    """Normalized intensity histograms of non-overlapping ``patch`` x ``patch`` tiles.

    This is the default pFID feature extractor. It is not comparable with
    Inception-based FID values.
    """
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape
    if patch < 1 or patch > min(h, w):
        raise ParameterError(f"patch {patch} does not fit an image of {w}x{h}")
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    ph, pw = h // patch, w // patch
    tiles = arr[: ph * patch, : pw * patch].reshape(ph, patch, pw, patch).swapaxes(1, 2)
    idx = histogram_bins(tiles.reshape(ph * pw, patch * patch), bins)
    feats = np.zeros((ph * pw, bins))
    rows = np.repeat(np.arange(ph * pw), patch * patch)
    np.add.at(feats, (rows, idx.ravel()), 1.0)
    return feats / float(patch * patch)


def proxy_fid(images_a, images_b, patch: int = 16, bins: int = 16) -> float:
    fa = np.concatenate([patch_histogram_features(im, patch, bins) for im in images_a])
    fb = np.concatenate([patch_histogram_features(im, patch, bins) for im in images_b])
    return frechet_distance(gaussian_stats(fa), gaussian_stats(fb))


# --- reports --------------------------------------------------------------


@dataclass
class MetricReport:
    model: str
    pfid_x2z: float
    hamming: float
    pfid_z2x: float
    mse: float
    ssim: float

    def csv_row(self) -> str:
        vals = [self.model] + [format(getattr(self, f.name), ".6f") for f in fields(self)[1:]]
        return ",".join(vals)


def report_csv(rows, header_comment: str | None = None) -> str:
    lines = []
    if header_comment:
        lines.extend("# " + line for line in header_comment.splitlines())
    lines.append(",".join(REPORT_COLUMNS))
    lines.extend(r.csv_row() for r in rows)
    return "\n".join(lines) + "\n"
