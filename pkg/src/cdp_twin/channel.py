"""Pattern-conditioned stochastic printing/imaging channel.

A pixel's printed value is modelled as depending only on the 3x3 binary
neighbourhood (pattern) that governs it. Patterns are numbered by flattening
the neighbourhood row-major with the top-left bit most significant, so the
central bit carries weight 16.

* ``print`` models map a template ``z`` (h x w) to an image ``x`` (s*h x s*w).
  Every pixel of the s x s block of template pixel (i, j) is drawn from the
  law of that pixel's pattern.
* ``estimate`` models map ``x`` back to a continuous template estimate. ``x``
  is block-mean downscaled, Otsu-binarized, and the patterns of that binary
  field govern the output.

Border pixels have no full neighbourhood. They are excluded from fitting and
sampled from the statistics of all interior pixels sharing their central bit.
"""

from dataclasses import dataclass, field

import numpy as np

from cdp_twin import jsonio, rng
from cdp_twin.errors import OutOfDomainError, ParameterError, UsageError
from cdp_twin.imaging import as_gray, as_template, block_center, block_mean_downscale
from cdp_twin.metrics import binarize

N_PATTERNS = 512
CENTER_WEIGHT = 16
BIT_ORDER = "row-major, top-left most significant"
DIRECTIONS = ("print", "estimate")
SAMPLING_LAWS = ("gaussian-clipped",)
_WEIGHTS = (2 ** np.arange(8, -1, -1)).reshape(3, 3)


def extract_pattern(template, row: int, col: int) -> int:
    t = np.asarray(template)
    h, w = t.shape
    if not (1 <= row < h - 1 and 1 <= col < w - 1):
        raise OutOfDomainError(f"({row}, {col}) has no full 3x3 neighbourhood in a {w}x{h} template")
    block = t[row - 1: row + 2, col - 1: col + 2].astype(np.int64)
    return int(np.sum(block * _WEIGHTS))


def pattern_from_id(pattern: int) -> np.ndarray:
    """Inverse of :func:`extract_pattern`: the 3x3 neighbourhood of a pattern id."""
    if not 0 <= int(pattern) < N_PATTERNS:
        raise OutOfDomainError(f"pattern id {pattern} outside [0, 511]")
    return ((int(pattern) // _WEIGHTS) % 2).astype(np.uint8)


def center_bit(pattern):
    return (np.asarray(pattern) // CENTER_WEIGHT) % 2


def pattern_map(bits) -> np.ndarray:
    """Pattern id of every pixel; -1 on the one-pixel border."""
    b = np.asarray(bits).astype(np.int64)
    h, w = b.shape
    out = np.full((h, w), -1, dtype=np.int64)
    if h < 3 or w < 3:
        return out
    acc = np.zeros((h - 2, w - 2), dtype=np.int64)
    for dr in range(3):
        for dc in range(3):
            acc += _WEIGHTS[dr, dc] * b[dr: dr + h - 2, dc: dc + w - 2]
    out[1:-1, 1:-1] = acc
    return out


@dataclass
class PatternTable:
    """Per-pattern statistics. ``count == 0`` marks an unobserved pattern."""

    count: np.ndarray = field(default_factory=lambda: np.zeros(N_PATTERNS, dtype=np.int64))
    mean: np.ndarray = field(default_factory=lambda: np.zeros(N_PATTERNS))
    std: np.ndarray = field(default_factory=lambda: np.zeros(N_PATTERNS))
    flip_prob: np.ndarray = field(default_factory=lambda: np.zeros(N_PATTERNS))

    def __post_init__(self):
        for name in ("count", "mean", "std", "flip_prob"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (N_PATTERNS,):
                raise ParameterError(f"PatternTable.{name} must have {N_PATTERNS} entries")
        if np.any(np.asarray(self.std) < 0):
            raise ParameterError("PatternTable.std must be non-negative")
        fp = np.asarray(self.flip_prob)
        if np.any((fp < 0) | (fp > 1)):
            raise ParameterError("PatternTable.flip_prob must lie in [0, 1]")

    @property
    def observed(self) -> np.ndarray:
        return np.asarray(self.count) > 0

    def rows(self):
        for p in range(N_PATTERNS):
            yield p, int(self.count[p]), float(self.mean[p]), float(self.std[p]), float(self.flip_prob[p])

    def to_csv(self) -> str:
        lines = ["pattern,count,mean,std,flip_prob"]
        lines.extend(f"{p},{c},{m:.17g},{s:.17g},{f:.17g}" for p, c, m, s, f in self.rows())
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ChannelModel:
    """Fitted (or hand-specified) twin. ``table.mean/std`` hold the sampling law
    per pattern; unobserved entries already carry their fallback values."""

    direction: str
    scale: int
    table: PatternTable
    sampling_law: str = "gaussian-clipped"
    fallback_mean: tuple = (0.0, 1.0)   # indexed by central bit
    fallback_std: tuple = (0.0, 0.0)
    fit_target: str = "center"

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ParameterError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.scale not in (1, 3):
            raise ParameterError(f"scale must be 1 or 3, got {self.scale}")
        if self.sampling_law not in SAMPLING_LAWS:
            raise ParameterError(f"unsupported sampling law {self.sampling_law!r}")

    def law_maps(self, cond_bits):
        """Per-pixel (mean, std) over a governing binary field, borders resolved by central bit."""
        bits = np.asarray(cond_bits, dtype=np.int64)
        pm = pattern_map(bits)
        safe = np.maximum(pm, 0)
        mu = np.asarray(self.table.mean, dtype=np.float64)[safe]
        sd = np.asarray(self.table.std, dtype=np.float64)[safe]
        border = pm < 0
        mu[border] = np.asarray(self.fallback_mean)[bits[border]]
        sd[border] = np.asarray(self.fallback_std)[bits[border]]
        return mu, sd

    # --- persistence -------------------------------------------------------

    def to_json(self) -> str:
        t = self.table
        doc = {
            "direction": self.direction,
            "scale": self.scale,
            "sampling_law": self.sampling_law,
            "table": [
                {"pattern": p, "count": c, "mean": m, "std": s, "flip_prob": f}
                for p, c, m, s, f in t.rows()
            ],
            "bit_order": BIT_ORDER,
            "fit_target": self.fit_target,
            "unobserved_fallback": "interior statistics of the same central bit",
            "fallback": {"mean": list(self.fallback_mean), "std": list(self.fallback_std)},
        }
        return jsonio.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ChannelModel":
        doc = jsonio.loads(text)
        try:
            rows = doc["table"]
            if len(rows) != N_PATTERNS or [r["pattern"] for r in rows] != list(range(N_PATTERNS)):
                raise ParameterError("model table must list patterns 0..511 in order")
            table = PatternTable(
                count=np.array([r["count"] for r in rows], dtype=np.int64),
                mean=np.array([r["mean"] for r in rows], dtype=np.float64),
                std=np.array([r["std"] for r in rows], dtype=np.float64),
                flip_prob=np.array([r["flip_prob"] for r in rows], dtype=np.float64),
            )
            fb = doc.get("fallback", {"mean": [0.0, 1.0], "std": [0.0, 0.0]})
            return cls(
                direction=doc["direction"],
                scale=int(doc["scale"]),
                table=table,
                sampling_law=doc.get("sampling_law", "gaussian-clipped"),
                fallback_mean=tuple(float(v) for v in fb["mean"]),
                fallback_std=tuple(float(v) for v in fb["std"]),
                fit_target=doc.get("fit_target", "center"),
            )
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed channel model document: {exc}") from exc


# --- conditioning and targets ------------------------------------------------


def governing_bits(model_direction: str, scale: int, source, bins: int = 256) -> np.ndarray:
    """Binary field whose patterns condition the output.

    For ``print`` it is the template itself; for ``estimate`` the block-mean
    downscaled image binarized with a per-image Otsu threshold.
    """
    if model_direction == "print":
        return as_template(source)
    img = as_gray(source)
    return binarize(block_mean_downscale(img, scale), "otsu", bins)


def _print_target(x, scale: int, fit_target: str) -> np.ndarray:
    if fit_target == "center":
        return block_center(x, scale) if scale > 1 else np.asarray(x, dtype=np.float64)
    if fit_target == "block":
        return block_mean_downscale(x, scale)
    raise ParameterError(f"fit_target must be 'center' or 'block', got {fit_target!r}")


def _check_pair_geometry(z, x, scale):
    h, w = z.shape
    if x.shape != (h * scale, w * scale):
        raise ParameterError(
            f"image {x.shape[1]}x{x.shape[0]} does not match template {w}x{h} at scale {scale}"
        )


def training_observations(pairs, direction: str, scale: int, fit_target: str = "center"):
    """Flattened (pattern id, target value, binarized target, central bit) over interior pixels."""
    pids, vals, flips = [], [], []
    for z, x in pairs:
        z = as_template(z)
        x = as_gray(x)
        _check_pair_geometry(z, x, scale)
        if direction == "print":
            cond = z
            target = _print_target(x, scale, fit_target)
            out_bits = binarize(x, "otsu")
            out_bits = block_center(out_bits, scale) if scale > 1 else out_bits
        else:
            cond = governing_bits("estimate", scale, x)
            target = z.astype(np.float64)
            out_bits = z
        pm = pattern_map(cond)
        inside = pm >= 0
        pids.append(pm[inside])
        vals.append(target[inside])
        flips.append((out_bits[inside] != cond[inside]).astype(np.float64))
    if not pids:
        raise ParameterError("at least one (template, image) pair is required")
    return np.concatenate(pids), np.concatenate(vals), np.concatenate(flips)


def table_from_observations(pids, vals, flips) -> PatternTable:
    """Empirical per-pattern mean, population std and flip rate. Unobserved entries stay 0."""
    count = np.bincount(pids, minlength=N_PATTERNS)
    safe = np.maximum(count, 1)
    mean = np.bincount(pids, weights=vals, minlength=N_PATTERNS) / safe
    dev = vals - mean[pids]
    var = np.bincount(pids, weights=dev * dev, minlength=N_PATTERNS) / safe
    flip = np.bincount(pids, weights=flips, minlength=N_PATTERNS) / safe
    return PatternTable(count.astype(np.int64), mean, np.sqrt(var), np.clip(flip, 0.0, 1.0))


def fit_channel(pairs, direction: str, scale: int, fit_target: str = "center") -> ChannelModel:
    """Fit the per-pattern clipped-Gaussian twin on (template, image) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ParameterError("fit_channel needs at least one (template, image) pair")
    if direction not in DIRECTIONS:
        raise ParameterError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if scale not in (1, 3):
        raise ParameterError(f"scale must be 1 or 3, got {scale}")
    pids, vals, flips = training_observations(pairs, direction, scale, fit_target)
    if pids.size == 0:
        raise ParameterError("templates are too small to contain any full 3x3 neighbourhood")
    table = table_from_observations(pids, vals, flips)

    gmean, gstd = float(vals.mean()), float(vals.std())
    fb_mean, fb_std = [], []
    cb = center_bit(pids)
    for bit in (0, 1):
        sel = vals[cb == bit]
        if sel.size:
            fb_mean.append(float(sel.mean()))
            fb_std.append(float(sel.std()))
        else:
            fb_mean.append(gmean)
            fb_std.append(gstd)
    unobserved = table.count == 0
    ub = center_bit(np.arange(N_PATTERNS))
    table.mean[unobserved] = np.asarray(fb_mean)[ub[unobserved]]
    table.std[unobserved] = np.asarray(fb_std)[ub[unobserved]]
    return ChannelModel(direction, scale, table, "gaussian-clipped", tuple(fb_mean), tuple(fb_std), fit_target)


def _draw(mu, sd, k, seed, tag, stream_index):
    out = np.empty((k,) + mu.shape)
    for r in range(k):
        gen = rng.stream(seed, tag, stream_index, r)
        out[r] = np.clip(mu + sd * gen.standard_normal(mu.shape), 0.0, 1.0)
    return out


def simulate_print(model: ChannelModel, template, k: int = 1, seed: int = 0, stream_index: int = 0,
                   tag: str = "simulate_print") -> np.ndarray:
    """``k`` synthetic prints of one template, shape ``(k, s*h, s*w)``.

    Realization ``r`` depends only on ``(seed, tag, stream_index, r)``. Use a
    distinct ``tag`` when the same seed drives both a ground-truth channel and
    its twin, otherwise both share noise.
    """
    if model.direction != "print":
        raise UsageError(f"simulate_print needs a print-direction model, got {model.direction!r}")
    if int(k) < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    z = as_template(template)
    mu, sd = model.law_maps(z)
    s = model.scale
    if s > 1:
        mu = np.repeat(np.repeat(mu, s, axis=0), s, axis=1)
        sd = np.repeat(np.repeat(sd, s, axis=0), s, axis=1)
    return _draw(mu, sd, int(k), seed, tag, stream_index)


def estimate_template(model: ChannelModel, image, k: int = 1, seed: int = 0, stream_index: int = 0,
                      tag: str = "estimate_template") -> np.ndarray:
    """``k`` continuous template estimates of one printed image, shape ``(k, h, w)``."""
    if model.direction != "estimate":
        raise UsageError(f"estimate_template needs an estimate-direction model, got {model.direction!r}")
    if int(k) < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    cond = governing_bits("estimate", model.scale, image)
    mu, sd = model.law_maps(cond)
    return _draw(mu, sd, int(k), seed, tag, stream_index)


def synthetic_channel(direction: str = "print", scale: int = 1, *, low: float = 0.2, high: float = 0.8,
                      gain: float = 0.45, bleed: float = 0.15, noise: float = 0.03,
                      noise_slope: float = 0.12) -> ChannelModel:
    """Hand-specified ground-truth channel with a dot-gain-like pattern dependence.

    Bit 1 is rendered bright (``high``) and bit 0 dark (``low``). A bright pixel
    is darkened in proportion to its dark neighbours (4-neighbours count double),
    a dark pixel is lightened by its bright neighbours, and the noise grows with
    the number of neighbours that disagree with the centre.
    """
    ids = np.arange(N_PATTERNS)
    mean = np.empty(N_PATTERNS)
    std = np.empty(N_PATTERNS)
    for p in ids:
        nb = pattern_from_id(p).astype(np.float64)
        c = nb[1, 1]
        cross = nb[0, 1] + nb[1, 0] + nb[1, 2] + nb[2, 1]
        diag = nb[0, 0] + nb[0, 2] + nb[2, 0] + nb[2, 2]
        bright = (2.0 * cross + diag) / 12.0
        if c:
            mean[p] = high - gain * (1.0 - bright)
        else:
            mean[p] = low + bleed * bright
        disagree = (np.sum(nb != c)) / 8.0
        std[p] = noise + noise_slope * disagree
    table = PatternTable(np.zeros(N_PATTERNS, dtype=np.int64), mean, std, np.zeros(N_PATTERNS))
    cb = center_bit(ids)
    fb_mean = tuple(float(mean[cb == b].mean()) for b in (0, 1))
    fb_std = tuple(float(std[cb == b].mean()) for b in (0, 1))
    return ChannelModel(direction, scale, table, "gaussian-clipped", fb_mean, fb_std)
