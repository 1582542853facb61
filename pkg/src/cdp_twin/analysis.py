"""Variability analytics over realization stacks."""

from dataclasses import dataclass

import numpy as np

from cdp_twin.channel import N_PATTERNS, PatternTable, pattern_map, table_from_observations
from cdp_twin.errors import ParameterError, UsageError
from cdp_twin.imaging import as_stack, as_template, block_center
from cdp_twin.metrics import binarize, hamming, mse, ssim

AGGREGATION_MODES = ("mean", "median", "mean_of_scores")
METRICS = ("mse", "ssim", "hamming")


@dataclass
class KSweepCurve:
    metric: str
    mode: str
    ks: list
    scores: list

    def __post_init__(self):
        if len(self.ks) != len(self.scores):
            raise ParameterError("ks and scores must have equal length")
        if any(b <= a for a, b in zip(self.ks, self.ks[1:])):
            raise ParameterError("ks must be strictly increasing")
        if self.mode not in AGGREGATION_MODES:
            raise ParameterError(f"unknown aggregation mode {self.mode!r}")


def std_map(stack) -> np.ndarray:
    """Per-pixel population standard deviation across realizations."""
    s = as_stack(stack)
    if s.shape[0] < 2:
        raise ParameterError(f"std_map needs at least 2 realizations, got {s.shape[0]}")
    return s.std(axis=0)


def _pattern_observations(templates, image_sets, scale: int, bins: int, binarization: str):
    if isinstance(templates, np.ndarray) and templates.ndim == 2:
        templates, image_sets = [templates], [image_sets]
    templates = list(templates)
    image_sets = list(image_sets)
    if len(templates) != len(image_sets):
        raise ParameterError(f"{len(templates)} templates but {len(image_sets)} image sets")
    pids, vals, flips = [], [], []
    for z, images in zip(templates, image_sets):
        z = as_template(z)
        stack = as_stack(images)
        h, w = z.shape
        if stack.shape[1:] != (h * scale, w * scale):
            raise ParameterError(
                f"images of shape {stack.shape[1:]} do not match template {w}x{h} at scale {scale}"
            )
        pm = pattern_map(z)
        inside = pm >= 0
        for img in stack:
            bits = binarize(img, binarization, bins)
            centre = block_center(img, scale) if scale > 1 else img
            bits = block_center(bits, scale) if scale > 1 else bits
            pids.append(pm[inside])
            vals.append(centre[inside])
            flips.append((bits[inside] != z[inside]).astype(np.float64))
    if not pids:
        return np.zeros(0, np.int64), np.zeros(0), np.zeros(0)
    return np.concatenate(pids), np.concatenate(vals), np.concatenate(flips)


def pattern_statistics(templates, image_sets, scale: int = 1, bins: int = 256,
                       binarization: str = "otsu") -> PatternTable:
    """Count, mean, population std and bit-flip rate of the central output pixel per pattern.

    ``templates`` is one template or a list; ``image_sets`` the matching image
    (or stack of images) per template. Occurrences are pooled over all images.
    Patterns that never occur keep ``count == 0`` and zero statistics.
    """
    pids, vals, flips = _pattern_observations(templates, image_sets, scale, bins, binarization)
    return table_from_observations(pids, vals, flips)


def std_per_pattern(templates, image_sets, scale: int = 1) -> PatternTable:
    t = pattern_statistics(templates, image_sets, scale)
    return PatternTable(t.count, t.mean, t.std, np.zeros(N_PATTERNS))


def bit_flip_probability(templates, image_sets, scale: int = 1, bins: int = 256,
                         binarization: str = "otsu") -> PatternTable:
    """Probability that the binarized central output pixel disagrees with its template bit."""
    t = pattern_statistics(templates, image_sets, scale, bins, binarization)
    return PatternTable(t.count, np.zeros(N_PATTERNS), np.zeros(N_PATTERNS), t.flip_prob)


def weighted_flip_rate(table: PatternTable) -> float:
    """Occurrence-weighted average of the per-pattern flip probabilities."""
    c = np.asarray(table.count, dtype=np.float64)
    if c.sum() == 0:
        raise ParameterError("no observed patterns")
    return float(np.dot(c, table.flip_prob) / c.sum())


def aggregate(stack, mode: str = "mean") -> np.ndarray:
    """Collapse a stack to one image. Even-k medians take the lower central value."""
    s = as_stack(stack)
    if mode == "mean":
        return s.mean(axis=0)
    if mode == "median":
        return np.sort(s, axis=0)[(s.shape[0] - 1) // 2]
    if mode == "mean_of_scores":
        raise UsageError("mean_of_scores aggregates scores, not images; use mean_of_scores()")
    raise ParameterError(f"unknown aggregation mode {mode!r}")


def score(prediction, reference, metric: str, bins: int = 256, binarization: str = "otsu") -> float:
    """Score one prediction. For ``hamming`` both sides are binarized (binary
    references pass through unchanged)."""
    if metric == "mse":
        return mse(prediction, reference)
    if metric == "ssim":
        return ssim(prediction, reference)
    if metric == "hamming":
        ref = np.asarray(reference)
        if not np.all((ref == 0) | (ref == 1)):
            ref = binarize(ref, binarization, bins)
        return hamming(binarize(prediction, binarization, bins), ref)
    raise ParameterError(f"unknown metric {metric!r}; expected one of {METRICS}")


def mean_of_scores(stack, reference, metric: str, **kw) -> float:
    s = as_stack(stack)
    return float(np.mean([score(img, reference, metric, **kw) for img in s]))


def k_sweep(stack, reference, metrics, ks, modes=AGGREGATION_MODES, **kw) -> list:
    """Score the first ``k`` realizations for every ``k`` in ``ks``, per metric and mode."""
    s = as_stack(stack)
    ks = [int(k) for k in ks]
    if not ks or min(ks) < 1 or max(ks) > s.shape[0]:
        raise ParameterError(f"ks must lie in [1, {s.shape[0]}], got {ks}")
    if isinstance(metrics, str):
        metrics = [metrics]
    per_real = {m: [score(img, reference, m, **kw) for img in s[: max(ks)]] for m in metrics
                if "mean_of_scores" in modes}
    curves = []
    for m in metrics:
        for mode in modes:
            if mode == "mean_of_scores":
                vals = [float(np.mean(per_real[m][:k])) for k in ks]
            else:
                vals = [score(aggregate(s[:k], mode), reference, m, **kw) for k in ks]
            curves.append(KSweepCurve(m, mode, list(ks), vals))
    return curves


def k_sweep_csv(curves) -> str:
    lines = ["k,mode,metric,score"]
    for c in curves:
        lines.extend(f"{k},{c.mode},{c.metric},{v:.17g}" for k, v in zip(c.ks, c.scores))
    return "\n".join(lines) + "\n"
