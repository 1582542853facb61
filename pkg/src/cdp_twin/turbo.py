"""Turbo loss compositions and the deterministic per-pattern generator.

Both compositions weight four pairwise terms, in this order:

    (z, z_tilde) * 1,  (x, x_hat) * lambda_D,  (x, x_tilde) * lambda_T,  (z, z_hat) * lambda_T * lambda_R

The unet variant uses only the l1 terms; the full variant adds a divergence
score from a pluggable ``plug(a, b) -> float`` at every position. Adversarial
training of that divergence is outside this package.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from cdp_twin.channel import (
    DIRECTIONS,
    N_PATTERNS,
    center_bit,
    governing_bits,
    pattern_map,
    training_observations,
)
from cdp_twin.errors import ParameterError, UsageError
from cdp_twin.imaging import as_gray

DivergencePlug = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class TurboWeights:
    lambda_T: float = 1.0
    lambda_D: float = 1.0
    lambda_R: float = 1.0

    def __post_init__(self):
        for name in ("lambda_T", "lambda_D", "lambda_R"):
            if not getattr(self, name) >= 0:
                raise ParameterError(f"{name} must be non-negative, got {getattr(self, name)}")

    def position_weights(self):
        return (1.0, self.lambda_D, self.lambda_T, self.lambda_T * self.lambda_R)


@dataclass(frozen=True)
class TurboTuple:
    z: np.ndarray
    z_hat: np.ndarray
    z_tilde: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    x_tilde: np.ndarray

    def __post_init__(self):
        for group in (("z", "z_hat", "z_tilde"), ("x", "x_hat", "x_tilde")):
            shapes = {np.shape(getattr(self, n)) for n in group}
            if len(shapes) != 1:
                raise ParameterError(f"{'/'.join(group)} dimensions differ: {sorted(shapes)}")

    def positions(self):
        return ((self.z, self.z_tilde), (self.x, self.x_hat), (self.x, self.x_tilde), (self.z, self.z_hat))


@dataclass(frozen=True)
class LossBreakdown:
    l_z_tilde: float
    l_x_hat: float
    l_x_tilde: float
    l_z_hat: float
    d_z_tilde: float
    d_x_hat: float
    d_x_tilde: float
    d_z_hat: float
    total: float

    CSV_HEADER = "l_z_tilde,l_x_hat,l_x_tilde,l_z_hat,d_z_tilde,d_x_hat,d_x_tilde,d_z_hat,total"

    def csv_row(self) -> str:
        return ",".join(format(v, ".17g") for v in (
            self.l_z_tilde, self.l_x_hat, self.l_x_tilde, self.l_z_hat,
            self.d_z_tilde, self.d_x_hat, self.d_x_tilde, self.d_z_hat, self.total))


def l1_pairwise(a, b) -> float:
    """Mean absolute pixel difference."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ParameterError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ParameterError("empty image")
    return float(np.mean(np.abs(a - b)))


def combine(l1_terms, weights: TurboWeights, divergences=(0.0, 0.0, 0.0, 0.0)) -> LossBreakdown:
    """Weighted sum of precomputed per-position terms."""
    w = weights.position_weights()
    total = sum(wi * (li + di) for wi, li, di in zip(w, l1_terms, divergences))
    return LossBreakdown(*(float(v) for v in l1_terms), *(float(v) for v in divergences), float(total))


def turbo_loss_unet(tup: TurboTuple, w: TurboWeights) -> LossBreakdown:
    return combine([l1_pairwise(a, b) for a, b in tup.positions()], w)


def turbo_loss_full(tup: TurboTuple, w: TurboWeights, plug: DivergencePlug) -> LossBreakdown:
    pos = tup.positions()
    return combine([l1_pairwise(a, b) for a, b in pos], w, [float(plug(a, b)) for a, b in pos])


def zero_plug(a, b) -> float:
    return 0.0


def squared_mean_difference(a, b) -> float:
    """Moment-matching divergence stand-in: (mean(a) - mean(b))^2."""
    return float((np.mean(a) - np.mean(b)) ** 2)


# --- deterministic per-pattern generator --------------------------------------


def lower_median(values) -> float:
    """Order statistic floor((n + 1) / 2), i.e. the lower median for even n."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ParameterError("median of an empty set")
    return float(v[(v.size - 1) // 2])


@dataclass(frozen=True)
class PatternGenerator:
    """One fixed output value per pattern. Border pixels and unobserved
    patterns use the statistic of all observations sharing the central bit."""

    direction: str
    scale: int
    values: np.ndarray      # (512,)
    count: np.ndarray       # (512,)
    fallback: tuple         # per central bit
    statistic: str = "median"

    def generate(self, source) -> np.ndarray:
        cond = governing_bits(self.direction, self.scale, source)
        pm = pattern_map(cond)
        out = np.where(pm >= 0, self.values[np.maximum(pm, 0)], 0.0)
        border = pm < 0
        out[border] = np.asarray(self.fallback)[np.asarray(cond, dtype=np.int64)[border]]
        if self.direction == "print" and self.scale > 1:
            out = np.repeat(np.repeat(out, self.scale, axis=0), self.scale, axis=1)
        return out

    def predict_patterns(self, pids) -> np.ndarray:
        return self.values[np.asarray(pids)]


def fit_pattern_generator(pairs, direction: str = "print", scale: int = 1,
                          statistic: str = "median") -> PatternGenerator:
    """Per-pattern median (or mean) of the central fitting targets.

    The median minimizes the training l1 loss among predictors that are constant
    per pattern; ``statistic="mean"`` exists for comparison.
    """
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("fit_pattern_generator needs at least one (template, image) pair")
    if direction not in DIRECTIONS:
        raise ParameterError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if statistic not in ("median", "mean"):
        raise ParameterError(f"statistic must be 'median' or 'mean', got {statistic!r}")
    pids, vals, _ = training_observations(pairs, direction, scale)
    stat = lower_median if statistic == "median" else (lambda v: float(np.mean(v)))
    order = np.argsort(pids, kind="stable")
    sp, sv = pids[order], vals[order]
    bounds = np.searchsorted(sp, np.arange(N_PATTERNS + 1))
    count = np.diff(bounds)
    cb = center_bit(pids)
    fallback = tuple(stat(vals[cb == b]) if np.any(cb == b) else (stat(vals) if vals.size else 0.0)
                     for b in (0, 1))
    values = np.array([stat(sv[bounds[p]: bounds[p + 1]]) if count[p] else fallback[p // 16 % 2]
                       for p in range(N_PATTERNS)])
    return PatternGenerator(direction, scale, values, count, fallback, statistic)


def pattern_l1_loss(gen: PatternGenerator, pairs) -> float:
    """Mean absolute error of the generator on the central fitting targets."""
    pids, vals, _ = training_observations(list(pairs), gen.direction, gen.scale)
    if vals.size == 0:
        raise UsageError("no interior observations to score")
    return float(np.mean(np.abs(vals - gen.predict_patterns(pids))))


def as_turbo_tuple(z, z_hat, z_tilde, x, x_hat, x_tilde) -> TurboTuple:
    return TurboTuple(*(as_gray(a) for a in (z, z_hat, z_tilde, x, x_hat, x_tilde)))
