"""Run configuration: defaults, JSON loading, overrides and total validation."""

import copy

from cdp_twin import jsonio
from cdp_twin.errors import ParameterError

DEFAULTS = {
    "seed": 0,
    "template": {"width": 228, "height": 228, "density": 0.5, "scale": 3},
    "channel": {
        "model": None,
        "fit_target": "center",
        "synthetic": {"low": 0.2, "high": 0.8, "gain": 0.45, "bleed": 0.15,
                      "noise": 0.03, "noise_slope": 0.12},
    },
    "io": {"bit_depth": 16},
    "ddpm": {
        "train": {"beta_start": 1e-6, "beta_end": 0.01, "T": 2000},
        "refine": {"beta_start": 1e-4, "beta_end": 0.09, "T": 1000},
        "variance": "posterior",
        "clamp": True,
        "loss_batch": 36,
    },
    "denoiser": {"buckets": 16, "patch_radius": 1, "samples_per_pair": 32},
    "turbo": {"lambda_T": 1.0, "lambda_D": 1.0, "lambda_R": 1.0},
    "metrics": {
        "ssim": {"window": 11, "sigma": 1.5, "k1": 0.01, "k2": 0.03, "data_range": 1.0},
        "otsu_bins": 256,
        "binarization": "otsu",
        "reduction": "mean",
        "pfid_patch": 16,
        "pfid_bins": 16,
    },
    "aggregation": {
        "k": 21,
        "eval_mode": "mean",
        "modes": ["mean", "median", "mean_of_scores"],
        "ks": [1, 3, 7, 21],
        "metrics": ["mse", "ssim", "hamming"],
    },
}


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ParameterError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and base[key] and isinstance(val, dict):
            out[key] = _merge(base[key], val, where + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _need(cond, msg):
    if not cond:
        raise ParameterError(f"invalid config: {msg}")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg: dict) -> dict:
    """Check every field against the preconditions of the module that consumes it."""
    _need(_is_int(cfg["seed"]) and cfg["seed"] >= 0, "seed must be a non-negative integer")
    t = cfg["template"]
    _need(_is_int(t["width"]) and t["width"] > 0, "template.width must be a positive integer")
    _need(_is_int(t["height"]) and t["height"] > 0, "template.height must be a positive integer")
    _need(_is_num(t["density"]) and 0 < t["density"] < 1, "template.density must lie in (0, 1)")
    _need(t["scale"] in (1, 3), "template.scale must be 1 or 3")
    ch = cfg["channel"]
    _need(ch["model"] is None or isinstance(ch["model"], str), "channel.model must be a path or null")
    _need(ch["fit_target"] in ("center", "block"), "channel.fit_target must be 'center' or 'block'")
    for k, v in ch["synthetic"].items():
        _need(_is_num(v), f"channel.synthetic.{k} must be a number")
    _need(ch["synthetic"]["noise"] >= 0 and ch["synthetic"]["noise_slope"] >= 0,
          "channel.synthetic noise terms must be non-negative")
    _need(cfg["io"]["bit_depth"] in (8, 16), "io.bit_depth must be 8 or 16")
    d = cfg["ddpm"]
    for name in ("train", "refine"):
        s = d[name]
        _need(_is_int(s["T"]) and s["T"] >= 1, f"ddpm.{name}.T must be a positive integer")
        _need(_is_num(s["beta_start"]) and _is_num(s["beta_end"])
              and 0 < s["beta_start"] <= s["beta_end"] < 1,
              f"ddpm.{name} needs 0 < beta_start <= beta_end < 1")
    _need(d["variance"] in ("posterior", "beta"), "ddpm.variance must be 'posterior' or 'beta'")
    _need(isinstance(d["clamp"], bool), "ddpm.clamp must be a boolean")
    _need(_is_int(d["loss_batch"]) and d["loss_batch"] >= 1, "ddpm.loss_batch must be >= 1")
    dn = cfg["denoiser"]
    _need(_is_int(dn["buckets"]) and 1 <= dn["buckets"] <= d["train"]["T"],
          "denoiser.buckets must lie in [1, ddpm.train.T]")
    _need(_is_int(dn["patch_radius"]) and dn["patch_radius"] >= 0, "denoiser.patch_radius must be >= 0")
    _need(_is_int(dn["samples_per_pair"]) and dn["samples_per_pair"] >= 1,
          "denoiser.samples_per_pair must be >= 1")
    for k, v in cfg["turbo"].items():
        _need(_is_num(v) and v >= 0, f"turbo.{k} must be a non-negative number")
    m = cfg["metrics"]
    ss = m["ssim"]
    _need(_is_int(ss["window"]) and ss["window"] >= 1 and ss["window"] % 2 == 1, "metrics.ssim.window must be odd")
    _need(all(_is_num(ss[k]) and ss[k] > 0 for k in ("sigma", "k1", "k2", "data_range")),
          "metrics.ssim constants must be positive")
    _need(_is_int(m["otsu_bins"]) and m["otsu_bins"] >= 2, "metrics.otsu_bins must be >= 2")
    _need(m["binarization"] in ("otsu", "fixed"), "metrics.binarization must be 'otsu' or 'fixed'")
    _need(m["reduction"] in ("mean", "center"), "metrics.reduction must be 'mean' or 'center'")
    _need(_is_int(m["pfid_patch"]) and m["pfid_patch"] >= 1, "metrics.pfid_patch must be >= 1")
    _need(_is_int(m["pfid_bins"]) and m["pfid_bins"] >= 1, "metrics.pfid_bins must be >= 1")
    a = cfg["aggregation"]
    _need(_is_int(a["k"]) and a["k"] >= 1, "aggregation.k must be >= 1")
    _need(a["eval_mode"] in ("mean", "median", "mean_of_scores"), "aggregation.eval_mode is not a known mode")
    _need(isinstance(a["modes"], list) and a["modes"]
          and all(x in ("mean", "median", "mean_of_scores") for x in a["modes"]),
          "aggregation.modes must list known modes")
    ks = a["ks"]
    _need(isinstance(ks, list) and ks and all(_is_int(k) and k >= 1 for k in ks)
          and all(b > a_ for a_, b in zip(ks, ks[1:])), "aggregation.ks must be strictly increasing positive integers")
    _need(isinstance(a["metrics"], list) and a["metrics"]
          and all(x in ("mse", "ssim", "hamming") for x in a["metrics"]),
          "aggregation.metrics must list mse/ssim/hamming")
    return cfg


def load(path=None, overrides: dict | None = None) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = jsonio.loads(fh.read())
        except ValueError as exc:
            raise ParameterError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ParameterError("config root must be a JSON object")
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate(cfg)


def dumps(cfg: dict) -> str:
    return jsonio.dumps(cfg)
