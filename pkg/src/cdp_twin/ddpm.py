"""Conditional DDPM machinery: schedules, forward diffusion, training loss,
ancestral sampling and desk-scale denoisers.

Timesteps are 1-based: ``beta[t - 1]`` is beta_t and alpha_bar_0 is taken to be 1.
A denoiser is any object with
``predict(noisy, condition, t, alpha_bar=None) -> predicted noise`` where the
output has the shape of ``noisy``. ``alpha_bar`` is the noise level of the
schedule being sampled; denoisers trained under another schedule use it to
find the matching training step.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from cdp_twin import jsonio, rng
from cdp_twin.errors import ParameterError

RIDGE = 1e-8


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray = field(init=False)
    alpha_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64)
        if beta.ndim != 1 or beta.size < 1:
            raise ParameterError("schedule needs at least one step")
        if np.any(beta <= 0) or np.any(beta >= 1):
            raise ParameterError("every beta_t must lie in (0, 1)")
        alpha = 1.0 - beta
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "alpha_bar", np.cumprod(alpha))

    @property
    def T(self) -> int:
        return int(self.beta.size)

    def check_step(self, t: int) -> int:
        t = int(t)
        if not 1 <= t <= self.T:
            raise ParameterError(f"timestep must lie in [1, {self.T}], got {t}")
        return t

    def alpha_bar_prev(self, t: int) -> float:
        return 1.0 if t == 1 else float(self.alpha_bar[t - 2])


def linear_schedule(beta_start: float, beta_end: float, T: int) -> NoiseSchedule:
    if int(T) < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ParameterError(f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    T = int(T)
    if T == 1:
        return NoiseSchedule(np.array([float(beta_start)]))
    beta = beta_start + np.arange(T) * ((beta_end - beta_start) / (T - 1))
    beta[0] = beta_start
    beta[-1] = beta_end
    return NoiseSchedule(beta)


def forward_sample(x0, t: int, eps, sched: NoiseSchedule) -> np.ndarray:
    """sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps (no clamping)."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ParameterError(f"noise shape {eps.shape} does not match image shape {x0.shape}")
    ab = sched.alpha_bar[sched.check_step(t) - 1]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def reverse_step(xt, eps_hat, t: int, sched: NoiseSchedule, noise=None, variance: str = "posterior") -> np.ndarray:
    """One ancestral step x_t -> x_{t-1}.

    ``variance`` selects the posterior variance beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t)
    or plain ``beta``. The noise term is dropped at t = 1 or when ``noise`` is None.
    """
    t = int(t)
    if t < 1:
        raise ParameterError(f"reverse_step needs t >= 1, got {t}")
    t = sched.check_step(t)
    xt = np.asarray(xt, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if xt.shape != eps_hat.shape:
        raise ParameterError(f"eps_hat shape {eps_hat.shape} does not match x_t shape {xt.shape}")
    beta = sched.beta[t - 1]
    alpha = sched.alpha[t - 1]
    ab = sched.alpha_bar[t - 1]
    mean = (xt - (beta / np.sqrt(1.0 - ab)) * eps_hat) / np.sqrt(alpha)
    if t == 1 or noise is None:
        return mean
    if variance == "posterior":
        var = beta * (1.0 - sched.alpha_bar_prev(t)) / (1.0 - ab)
    elif variance == "beta":
        var = beta
    else:
        raise ParameterError(f"variance must be 'posterior' or 'beta', got {variance!r}")
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != xt.shape:
        raise ParameterError(f"noise shape {noise.shape} does not match x_t shape {xt.shape}")
    return mean + np.sqrt(var) * noise


# --- reference denoisers ------------------------------------------------------


class ZeroDenoiser:
    """Predicts zero noise everywhere; the loss baseline."""

    def predict(self, noisy, condition, t, alpha_bar=None):
        return np.zeros_like(np.asarray(noisy, dtype=np.float64))


class OracleDenoiser:
    """Knows the clean target and returns the exact noise implied by ``noisy``."""

    def __init__(self, x0, sched: NoiseSchedule):
        self.x0 = np.asarray(x0, dtype=np.float64)
        self.sched = sched

    def predict(self, noisy, condition, t, alpha_bar=None):
        ab = self.sched.alpha_bar[int(t) - 1] if alpha_bar is None else alpha_bar
        return (np.asarray(noisy) - np.sqrt(ab) * self.x0) / np.sqrt(1.0 - ab)


def _shifts(img, r):
    """The (2r+1)^2 edge-padded shifted copies of ``img`` (row-major offsets)."""
    if r == 0:
        return [img]
    p = np.pad(img, r, mode="edge")
    h, w = img.shape
    return [p[dr: dr + h, dc: dc + w] for dr in range(2 * r + 1) for dc in range(2 * r + 1)]


def _features(noisy, condition, r):
    return _shifts(noisy, r) + _shifts(condition, r)


@dataclass
class LinearDenoiser:
    """Per-timestep-bucket affine map over a (2r+1)^2 patch of the noisy input
    and the same patch of the condition.

    ``train_alpha_bar`` is the noise-level table of the training schedule; a
    query with an explicit ``alpha_bar`` is routed to the training step with
    the closest noise level, so the denoiser can run under a different
    (e.g. refinement) schedule.
    """

    buckets: int
    patch_radius: int
    coef: np.ndarray        # (buckets, 2 * (2r+1)^2)
    intercept: np.ndarray   # (buckets,)
    train_alpha_bar: np.ndarray
    ridge_used: list = field(default_factory=list)
    train_loss: float = float("nan")
    zero_loss: float = float("nan")
    direction: str | None = None

    @property
    def T(self) -> int:
        return int(len(self.train_alpha_bar))

    def bucket_of(self, t: int) -> int:
        return (int(t) - 1) * self.buckets // self.T

    def step_for(self, alpha_bar: float) -> int:
        # train_alpha_bar is strictly decreasing; compare in log space
        lab = np.log(self.train_alpha_bar)
        target = np.log(max(float(alpha_bar), 1e-300))
        return int(np.argmin(np.abs(lab - target))) + 1

    def predict(self, noisy, condition, t, alpha_bar=None):
        noisy = np.asarray(noisy, dtype=np.float64)
        condition = np.asarray(condition, dtype=np.float64)
        if noisy.shape != condition.shape:
            raise ParameterError(f"condition shape {condition.shape} does not match {noisy.shape}")
        step = self.step_for(alpha_bar) if alpha_bar is not None else int(t)
        if not 1 <= step <= self.T:
            raise ParameterError(f"timestep {step} outside the training range [1, {self.T}]")
        b = self.bucket_of(step)
        out = np.full(noisy.shape, self.intercept[b])
        for w, f in zip(self.coef[b], _features(noisy, condition, self.patch_radius)):
            out += w * f
        return out

    def to_json(self) -> str:
        doc = {
            "kind": "linear",
            "direction": self.direction,
            "buckets": self.buckets,
            "patch_radius": self.patch_radius,
            "train_alpha_bar": list(self.train_alpha_bar),
            "coefficients": {str(b): {"A": list(self.coef[b]), "c": float(self.intercept[b])}
                             for b in range(self.buckets)},
            "ridge_used": [int(b) for b in self.ridge_used],
            "train_loss": self.train_loss,
            "zero_loss": self.zero_loss,
        }
        return jsonio.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "LinearDenoiser":
        doc = jsonio.loads(text)
        try:
            if doc.get("kind") != "linear":
                raise ParameterError(f"unsupported denoiser kind {doc.get('kind')!r}")
            B = int(doc["buckets"])
            coefs = doc["coefficients"]
            return cls(
                buckets=B,
                patch_radius=int(doc["patch_radius"]),
                coef=np.array([coefs[str(b)]["A"] for b in range(B)], dtype=np.float64),
                intercept=np.array([coefs[str(b)]["c"] for b in range(B)], dtype=np.float64),
                train_alpha_bar=np.array(doc["train_alpha_bar"], dtype=np.float64),
                ridge_used=list(doc.get("ridge_used", [])),
                train_loss=float(doc.get("train_loss", float("nan"))),
                zero_loss=float(doc.get("zero_loss", float("nan"))),
                direction=doc.get("direction"),
            )
        except (KeyError, TypeError) as exc:
            raise ParameterError(f"malformed denoiser document: {exc}") from exc


def _pairs(x0, condition):
    x0 = np.asarray(x0, dtype=np.float64)
    condition = np.asarray(condition, dtype=np.float64)
    if x0.ndim == 2:
        x0, condition = x0[None], condition[None]
    if x0.shape != condition.shape or x0.ndim != 3:
        raise ParameterError(f"target shape {x0.shape} does not match condition shape {condition.shape}")
    return x0, condition


def ddpm_loss(denoiser, x0, condition, sched: NoiseSchedule, batch: int = 64, seed: int = 0) -> float:
    """Monte-Carlo estimate of E ||eps - g(sqrt(ab_t) x0 + sqrt(1 - ab_t) eps, cond, t)||^2,
    normalized per pixel, with t uniform on [1, T].

    ``x0``/``condition`` may be single images or equally shaped stacks; draw ``i``
    uses pair ``i mod n`` and its own random stream.
    """
    if int(batch) < 1:
        raise ParameterError(f"batch must be >= 1, got {batch}")
    xs, cs = _pairs(x0, condition)
    total = 0.0
    for i in range(int(batch)):
        gen = rng.stream(seed, "ddpm_loss", i)
        t = int(gen.integers(1, sched.T + 1))
        j = i % xs.shape[0]
        eps = gen.standard_normal(xs[j].shape)
        xt = forward_sample(xs[j], t, eps, sched)
        pred = denoiser.predict(xt, cs[j], t, sched.alpha_bar[t - 1])
        d = eps - pred
        total += float(np.mean(d * d))
    return total / int(batch)


def fit_linear_denoiser(pairs, sched: NoiseSchedule, buckets: int = 8, patch_radius: int = 1,
                        samples_per_pair: int = 32, seed: int = 0) -> LinearDenoiser:
    """Least-squares fit of one affine noise predictor per timestep bucket.

    ``pairs`` are ``(condition, target)`` images of equal shape. Draw ``j`` of a
    pair is assigned to bucket ``j mod buckets`` with t uniform inside it, so every
    bucket sees data. Near-singular normal equations fall back to a ridge solve
    (recorded in ``ridge_used``).
    """
    pairs = [(np.asarray(c, dtype=np.float64), np.asarray(x, dtype=np.float64)) for c, x in pairs]
    if not pairs:
        raise ParameterError("fit_linear_denoiser needs at least one (condition, target) pair")
    if int(buckets) < 1 or int(buckets) > sched.T:
        raise ParameterError(f"buckets must lie in [1, T={sched.T}], got {buckets}")
    if int(patch_radius) < 0:
        raise ParameterError(f"patch radius must be >= 0, got {patch_radius}")
    if int(samples_per_pair) < 1:
        raise ParameterError("samples_per_pair must be >= 1")
    B, r = int(buckets), int(patch_radius)
    d = 2 * (2 * r + 1) ** 2 + 1
    gram = np.zeros((B, d, d))
    rhs = np.zeros((B, d))
    yy = np.zeros(B)
    npix = np.zeros(B)
    T = sched.T
    for p, (cond, target) in enumerate(pairs):
        if cond.shape != target.shape:
            raise ParameterError(f"pair {p}: condition {cond.shape} and target {target.shape} differ")
        for j in range(int(samples_per_pair)):
            gen = rng.stream(seed, "fit_linear_denoiser", p, j)
            b = j % B
            lo, hi = b * T // B + 1, (b + 1) * T // B
            t = int(gen.integers(lo, hi + 1))
            eps = gen.standard_normal(target.shape)
            xt = forward_sample(target, t, eps, sched)
            X = np.column_stack([f.ravel() for f in _features(xt, cond, r)] + [np.ones(target.size)])
            y = eps.ravel()
            gram[b] += X.T @ X
            rhs[b] += X.T @ y
            yy[b] += y @ y
            npix[b] += y.size

    coef = np.zeros((B, d - 1))
    intercept = np.zeros(B)
    ridge_used = []
    sse = 0.0
    for b in range(B):
        g, v = gram[b], rhs[b]
        if npix[b] == 0:
            ridge_used.append(b)
            continue
        sol = None
        if np.linalg.cond(g) < 1e12:
            try:
                sol = np.linalg.solve(g, v)
            except np.linalg.LinAlgError:
                sol = None
        if sol is None:
            ridge_used.append(b)
            sol = np.linalg.solve(g + RIDGE * np.eye(d), v)
        coef[b], intercept[b] = sol[:-1], sol[-1]
        # residual sum of squares from the normal equations
        sse += yy[b] - 2.0 * sol @ v + sol @ g @ sol
    if ridge_used:
        warnings.warn(f"regularized solve used for buckets {ridge_used}", RuntimeWarning, stacklevel=2)
    n = npix.sum()
    return LinearDenoiser(B, r, coef, intercept, sched.alpha_bar.copy(), ridge_used,
                          train_loss=float(max(sse, 0.0) / n), zero_loss=float(yy.sum() / n))


def sample(denoiser, condition, sched: NoiseSchedule, k: int = 1, seed: int = 0, clamp: bool = True,
           variance: str = "posterior", stream_index: int = 0) -> np.ndarray:
    """``k`` ancestral-sampling runs from x_T ~ N(0, I); returns shape ``(k, h, w)``.

    Realization ``r`` uses its own stream keyed by ``(seed, stream_index, r)``.
    Clamping to [0, 1] is applied once, after the last step.
    """
    if int(k) < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    cond = np.asarray(condition, dtype=np.float64)
    out = np.empty((int(k),) + cond.shape)
    for r in range(int(k)):
        gen = rng.stream(seed, "ddpm_sample", stream_index, r)
        x = gen.standard_normal(cond.shape)
        for t in range(sched.T, 0, -1):
            eps_hat = denoiser.predict(x, cond, t, sched.alpha_bar[t - 1])
            noise = gen.standard_normal(cond.shape) if t > 1 else None
            x = reverse_step(x, eps_hat, t, sched, noise, variance)
        out[r] = np.clip(x, 0.0, 1.0) if clamp else x
    return out
