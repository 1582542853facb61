"""Command-line interface.

Exit codes: 0 success, 2 config/parameter error, 3 I/O or format error,
4 numerical failure.

Directory conventions
---------------------
* template directories hold ``<id>.pgm`` binary templates (plus ``manifest.json``);
* image directories hold ``<id>.pgm`` or realization files ``<id>_r<NNN>.pgm``;
* ``eval`` expects ``REF/templates`` and ``REF/prints`` and, per model directory,
  ``estimates/`` (x -> z_tilde) and/or ``prints/`` (z -> x_tilde).
"""

import argparse
import logging
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from cdp_twin import analysis, channel, config, ddpm, imaging, jsonio, metrics
from cdp_twin.errors import CdpTwinError, FormatError, ParameterError, UsageError

log = logging.getLogger("cdp_twin")

_STACK_RE = re.compile(r"^(?P<id>.+?)(?:_r(?P<r>\d+))?\.pgm$")
WO_ROW = "W/O processing"


# --- helpers ---------------------------------------------------------------


def threads() -> int:
    raw = os.environ.get("CDP_TWIN_THREADS", "")
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"CDP_TWIN_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ParameterError("CDP_TWIN_THREADS must be >= 1")
    return n


def pmap(fn, items):
    """Ordered parallel map; results do not depend on scheduling."""
    items = list(items)
    n = threads()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def scan_dir(path) -> dict:
    """Map ``id -> [paths sorted by realization index]``."""
    path = Path(path)
    if not path.is_dir():
        raise FormatError("directory not found", path=path)
    found = {}
    for p in sorted(path.iterdir()):
        m = _STACK_RE.match(p.name)
        if not m or p.name.startswith("."):
            continue
        r = int(m["r"]) if m["r"] is not None else 0
        found.setdefault(m["id"], []).append((r, p))
    return {k: [p for _, p in sorted(v)] for k, v in sorted(found.items())}


def load_template(path) -> np.ndarray:
    img = imaging.read_pgm(path)
    if not np.all((img == 0.0) | (img == 1.0)):
        raise FormatError("template file is not binary (values other than 0 and maxval)", path=path)
    return img.astype(np.uint8)


def load_stack(paths) -> np.ndarray:
    return np.stack([imaging.read_pgm(p) for p in paths])


def write_stack(out_dir, ident, stack, bit_depth):
    for r, img in enumerate(stack, start=1):
        imaging.write_pgm(Path(out_dir) / f"{ident}_r{r:03d}.pgm", img, bit_depth)


def save_config_copy(cfg, out, is_dir):
    out = Path(out)
    target = out / "config.json" if is_dir else out.with_name(out.stem + ".config.json")
    imaging.atomic_write_text(target, config.dumps(cfg))


def paired(templates: dict, images: dict, what="images"):
    """Match template ids with image ids, listing every problem before failing."""
    missing = [i for i in templates if i not in images]
    if missing:
        raise FormatError(f"{len(missing)} template(s) without {what}: {', '.join(missing)}")
    return [(i, templates[i][0], images[i]) for i in templates]


def infer_scale(z_shape, x_shape) -> int:
    h, w = z_shape
    if x_shape[0] % h or x_shape[1] % w or x_shape[0] // h != x_shape[1] // w:
        raise ParameterError(f"image {x_shape} is not an integer rescale of template {z_shape}")
    return x_shape[0] // h


def load_channel(cfg, model_path, direction):
    """Model from ``--model``, else ``channel.model``, else the synthetic ground truth.

    Returns the model and the random-stream tag to sample it with; the synthetic
    ground truth gets its own tag so a twin run with the same seed does not
    replay its noise.
    """
    path = model_path or cfg["channel"]["model"]
    if path:
        return channel.ChannelModel.from_json(Path(path).read_text(encoding="utf-8")), f"{direction}:model"
    synth = channel.synthetic_channel(direction, cfg["template"]["scale"], **cfg["channel"]["synthetic"])
    return synth, f"{direction}:ground-truth"


def _ssim_kwargs(cfg):
    s = cfg["metrics"]["ssim"]
    return {"window": s["window"], "sigma": s["sigma"], "k1": s["k1"], "k2": s["k2"], "data_range": s["data_range"]}


# --- commands -----------------------------------------------------------------


def cmd_gen(cfg, out_dir, count):
    t = cfg["template"]
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    out = Path(out_dir)
    ids = [f"t{i:05d}" for i in range(count)]

    def one(i):
        z = imaging.generate_template(t["width"], t["height"], t["density"], cfg["seed"], i)
        imaging.write_pgm(out / f"{ids[i]}.pgm", z, 8)

    out.mkdir(parents=True, exist_ok=True)
    pmap(one, range(count))
    manifest = {"seed": cfg["seed"], "density": t["density"], "width": t["width"], "height": t["height"],
                "count": count, "templates": ids}
    imaging.atomic_write_text(out / "manifest.json", jsonio.dumps(manifest))
    save_config_copy(cfg, out, True)
    return f"wrote {count} templates to {out}"


def cmd_fit(cfg, templates_dir, images_dir, direction, out):
    temps = scan_dir(templates_dir)
    imgs = scan_dir(images_dir)
    pairs = []
    for ident, tpath, ipaths in paired(temps, imgs):
        z = load_template(tpath)
        for p in ipaths:
            pairs.append((z, imaging.read_pgm(p)))
    if not pairs:
        raise ParameterError("no (template, image) pairs found")
    scale = infer_scale(pairs[0][0].shape, pairs[0][1].shape)
    model = channel.fit_channel(pairs, direction, scale, cfg["channel"]["fit_target"])
    imaging.atomic_write_text(out, model.to_json())
    save_config_copy(cfg, out, False)
    obs = int(model.table.observed.sum())
    return f"fitted {direction} model (scale {scale}) on {len(pairs)} pairs, {obs}/512 patterns observed -> {out}"


def cmd_print(cfg, templates_dir, out_dir, model_path, k):
    model, tag = load_channel(cfg, model_path, "print")
    if model.direction != "print":
        raise UsageError(f"print needs a print-direction model, got {model.direction!r}")
    temps = scan_dir(templates_dir)
    order = list(temps)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(ident):
        z = load_template(temps[ident][0])
        stack = channel.simulate_print(model, z, k, cfg["seed"], stream_index=order.index(ident), tag=tag)
        write_stack(out, ident, stack, cfg["io"]["bit_depth"])

    pmap(one, order)
    save_config_copy(cfg, out, True)
    return f"wrote {k} realization(s) for {len(order)} template(s) to {out}"


def cmd_estimate(cfg, images_dir, out_dir, model_path, k):
    model, tag = load_channel(cfg, model_path, "estimate")
    if model.direction != "estimate":
        raise UsageError(f"estimate needs an estimate-direction model, got {model.direction!r}")
    imgs = scan_dir(images_dir)
    order = list(imgs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(ident):
        x = imaging.read_pgm(imgs[ident][0])
        stack = channel.estimate_template(model, x, k, cfg["seed"], stream_index=order.index(ident), tag=tag)
        write_stack(out, ident, stack, cfg["io"]["bit_depth"])

    pmap(one, order)
    save_config_copy(cfg, out, True)
    return f"wrote {k} estimate(s) for {len(order)} image(s) to {out}"


def _ddpm_pairs(templates_dir, images_dir, direction):
    """(condition, target) pairs at the target's geometry."""
    temps = scan_dir(templates_dir)
    imgs = scan_dir(images_dir)
    pairs = []
    for ident, tpath, ipaths in paired(temps, imgs):
        z = load_template(tpath).astype(np.float64)
        for p in ipaths:
            x = imaging.read_pgm(p)
            s = infer_scale(z.shape, x.shape)
            if direction == "print":
                pairs.append((imaging.upscale(z, s), x))
            else:
                pairs.append((imaging.block_mean_downscale(x, s), z))
    if not pairs:
        raise ParameterError("no training pairs found")
    return pairs


def _schedule(cfg, name):
    s = cfg["ddpm"][name]
    return ddpm.linear_schedule(s["beta_start"], s["beta_end"], s["T"])


def cmd_ddpm_fit(cfg, templates_dir, images_dir, direction, out):
    pairs = _ddpm_pairs(templates_dir, images_dir, direction)
    sched = _schedule(cfg, "train")
    dn = cfg["denoiser"]
    model = ddpm.fit_linear_denoiser(pairs, sched, dn["buckets"], dn["patch_radius"],
                                     dn["samples_per_pair"], cfg["seed"])
    model.direction = direction
    conds = np.stack([c for c, _ in pairs])
    targets = np.stack([x for _, x in pairs])
    # held-out draws: a seed stream the fit never touched
    batch = cfg["ddpm"]["loss_batch"]
    held_seed = cfg["seed"] + 1
    fitted = ddpm.ddpm_loss(model, targets, conds, sched, batch, held_seed)
    zero = ddpm.ddpm_loss(ddpm.ZeroDenoiser(), targets, conds, sched, batch, held_seed)
    imaging.atomic_write_text(out, model.to_json())
    save_config_copy(cfg, out, False)
    verdict = "PASS" if fitted < zero else "FAIL"
    return (f"fitted {direction} denoiser on {len(pairs)} pairs -> {out}\n"
            f"held-out loss: fitted {fitted:.6f} vs zero denoiser {zero:.6f} [{verdict}]")


def cmd_ddpm_sample(cfg, denoiser_path, inputs_dir, direction, out_dir, k, scale):
    model = ddpm.LinearDenoiser.from_json(Path(denoiser_path).read_text(encoding="utf-8"))
    if model.direction is not None and model.direction != direction:
        raise UsageError(f"denoiser was fitted for {model.direction!r}, not {direction!r}")
    sched = _schedule(cfg, "refine")
    inputs = scan_dir(inputs_dir)
    order = list(inputs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(ident):
        src = inputs[ident][0]
        if direction == "print":
            cond = imaging.upscale(load_template(src), scale).astype(np.float64)
        else:
            cond = imaging.block_mean_downscale(imaging.read_pgm(src), scale)
        stack = ddpm.sample(model, cond, sched, k, cfg["seed"], cfg["ddpm"]["clamp"],
                            cfg["ddpm"]["variance"], stream_index=order.index(ident))
        if not cfg["ddpm"]["clamp"]:
            stack = np.clip(stack, 0.0, 1.0)  # PGM cannot hold values outside [0, 1]
        write_stack(out, ident, stack, cfg["io"]["bit_depth"])

    pmap(one, order)
    save_config_copy(cfg, out, True)
    return f"sampled {k} realization(s) for {len(order)} input(s) with the refinement schedule -> {out}"


# --- eval -----------------------------------------------------------------------


def _to_template_geometry(img, shape, reduction):
    if img.shape == shape:
        return img
    s = infer_scale(shape, img.shape)
    return imaging.block_mean_downscale(img, s) if reduction == "mean" else imaging.block_center(img, s)


def _to_image_geometry(img, shape):
    if img.shape == shape:
        return img
    return imaging.upscale(img, infer_scale(img.shape, shape)).astype(np.float64)


def _collapse(stacks, mode):
    """Per-id images to score: one aggregated image, or every realization."""
    if mode == "mean_of_scores":
        return stacks
    return [analysis.aggregate(s, mode)[None] for s in stacks]


def evaluate(cfg, zs, xs, z_tildes, x_tildes, name) -> metrics.MetricReport:
    """Score one model. ``z_tildes``/``x_tildes`` are per-id stacks (or None)."""
    m = cfg["metrics"]
    mode = cfg["aggregation"]["eval_mode"]
    nan = float("nan")
    pfid_x2z = ham = pfid_z2x = mse_v = ssim_v = nan

    if z_tildes is not None:
        stacks = [np.stack([_to_template_geometry(im, z.shape, m["reduction"]) for im in st])
                  for st, z in zip(_collapse(z_tildes, mode), zs)]
        ham = float(np.mean([np.mean([metrics.hamming(metrics.binarize(im, m["binarization"], m["otsu_bins"]), z)
                                      for im in st]) for st, z in zip(stacks, zs)]))
        pfid_x2z = _pfid(stacks, zs, m)
    if x_tildes is not None:
        stacks = [np.stack([_to_image_geometry(im, x.shape) for im in st])
                  for st, x in zip(_collapse(x_tildes, mode), xs)]
        mse_v = float(np.mean([np.mean([metrics.mse(im, x) for im in st]) for st, x in zip(stacks, xs)]))
        kw = _ssim_kwargs(cfg)
        ssim_v = float(np.mean([np.mean([metrics.ssim(im, x, **kw) for im in st]) for st, x in zip(stacks, xs)]))
        pfid_z2x = _pfid(stacks, xs, m)
    return metrics.MetricReport(name, pfid_x2z, ham, pfid_z2x, mse_v, ssim_v)


def _pfid(stacks, refs, m):
    """Fréchet distance over the pooled patch features; averaged over realization
    index when several realizations per id are scored."""
    kmin = min(s.shape[0] for s in stacks)
    refs = [np.asarray(r, dtype=np.float64) for r in refs]
    vals = [metrics.proxy_fid([s[r] for s in stacks], refs, m["pfid_patch"], m["pfid_bins"]) for r in range(kmin)]
    return float(np.mean(vals))


def cmd_eval(cfg, ref_dir, pred_dirs, report_path):
    ref = Path(ref_dir)
    temps = scan_dir(ref / "templates")
    prints = scan_dir(ref / "prints")
    problems = [f"{ref / 'prints'}: missing {i}" for i in temps if i not in prints]
    preds = []
    for d in pred_dirs:
        d = Path(d)
        if not d.is_dir():
            problems.append(f"{d}: not a directory")
            continue
        sub = {}
        for key in ("estimates", "prints"):
            if (d / key).is_dir():
                sub[key] = scan_dir(d / key)
                problems.extend(f"{d / key}: missing {i}" for i in temps if i not in sub[key])
        if not sub:
            problems.append(f"{d}: neither estimates/ nor prints/ present")
        preds.append((d, sub))
    if problems:
        raise FormatError("evaluation inputs incomplete:\n  " + "\n  ".join(problems))
    ids = list(temps)
    zs = [load_template(temps[i][0]) for i in ids]
    xs = [imaging.read_pgm(prints[i][0]) for i in ids]

    rows = [evaluate(cfg, zs, xs, [x[None] for x in xs], [z.astype(np.float64)[None] for z in zs], WO_ROW)]
    for d, sub in preds:
        zt = [load_stack(sub["estimates"][i]) for i in ids] if "estimates" in sub else None
        xt = [load_stack(sub["prints"][i]) for i in ids] if "prints" in sub else None
        rows.append(evaluate(cfg, zs, xs, zt, xt, d.name))
    imaging.atomic_write_text(report_path, metrics.report_csv(rows))
    meta = {
        "columns": list(metrics.REPORT_COLUMNS),
        "pfid": {"features": "patch intensity histograms (not Inception-comparable)",
                 "patch": cfg["metrics"]["pfid_patch"], "bins": cfg["metrics"]["pfid_bins"]},
        "ssim": cfg["metrics"]["ssim"],
        "otsu_bins": cfg["metrics"]["otsu_bins"],
        "binarization": cfg["metrics"]["binarization"],
        "reduction": cfg["metrics"]["reduction"],
        "aggregation": cfg["aggregation"]["eval_mode"],
        "wo_processing": "z_tilde = x and x_tilde = z",
        "images": len(ids),
    }
    out = Path(report_path)
    imaging.atomic_write_text(out.with_name(out.stem + ".meta.json"), jsonio.dumps(meta))
    save_config_copy(cfg, out, False)
    return metrics.report_csv(rows).rstrip("\n")


# --- analyze ------------------------------------------------------------------


def _template_stacks(templates_dir, images_dir):
    temps = scan_dir(templates_dir)
    imgs = scan_dir(images_dir)
    zs, stacks = [], []
    for ident, tpath, ipaths in paired(temps, imgs):
        zs.append(load_template(tpath))
        stacks.append(load_stack(ipaths))
    if not zs:
        raise ParameterError("no templates found")
    return zs, stacks, infer_scale(zs[0].shape, stacks[0].shape[1:])


def cmd_analyze_patterns(cfg, templates_dir, images_dir, out):
    zs, stacks, scale = _template_stacks(templates_dir, images_dir)
    m = cfg["metrics"]
    table = analysis.pattern_statistics(zs, stacks, scale, m["otsu_bins"], m["binarization"])
    imaging.atomic_write_text(out, table.to_csv())
    save_config_copy(cfg, out, False)
    return f"pattern table ({int(table.observed.sum())}/512 observed, population std) -> {out}"


def cmd_analyze_stdmap(cfg, images_dir, out_dir):
    imgs = scan_dir(images_dir)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def one(ident):
        sm = analysis.std_map(load_stack(imgs[ident]))
        lo, hi = float(sm.min()), float(sm.max())
        scaled = (sm - lo) / (hi - lo) if hi > lo else np.zeros_like(sm)
        imaging.write_pgm(out / f"{ident}_std.pgm", scaled, 16)
        side = {"min": lo, "max": hi, "k": len(imgs[ident]), "std": "population"}
        imaging.atomic_write_text(out / f"{ident}_std.json", jsonio.dumps(side))

    pmap(one, list(imgs))
    save_config_copy(cfg, out, True)
    return f"wrote {len(imgs)} std map(s) to {out}"


def cmd_analyze_ksweep(cfg, images_dir, reference_dir, out):
    imgs = scan_dir(images_dir)
    refs = scan_dir(reference_dir)
    missing = [i for i in imgs if i not in refs]
    if missing:
        raise FormatError(f"no reference for: {', '.join(missing)}")
    a = cfg["aggregation"]
    m = cfg["metrics"]
    metric_names = list(a["metrics"])
    kw = {"bins": m["otsu_bins"], "binarization": m["binarization"]}
    per_id = []
    for ident in imgs:
        stack = load_stack(imgs[ident])
        ref = imaging.read_pgm(refs[ident][0])
        if ref.shape != stack.shape[1:]:
            ref = _to_image_geometry(ref, stack.shape[1:]) if ref.shape[0] < stack.shape[1] else \
                _to_template_geometry(ref, stack.shape[1:], m["reduction"])
        per_id.append(analysis.k_sweep(stack, ref, metric_names, a["ks"], a["modes"], **kw))
    curves = []
    for j, c in enumerate(per_id[0]):
        scores = np.mean([p[j].scores for p in per_id], axis=0)
        curves.append(analysis.KSweepCurve(c.metric, c.mode, list(c.ks), [float(v) for v in scores]))
    imaging.atomic_write_text(out, analysis.k_sweep_csv(curves))
    save_config_copy(cfg, out, False)
    return f"k-sweep over {len(per_id)} image stack(s) -> {out}"


def cmd_analyze_bitflip(cfg, templates_dir, real_dir, twin_dir, out):
    m = cfg["metrics"]
    zs, real, scale = _template_stacks(templates_dir, real_dir)
    zs2, twin, scale2 = _template_stacks(templates_dir, twin_dir)
    if scale != scale2:
        raise ParameterError("real and twin images have different geometry")
    t_real = analysis.bit_flip_probability(zs, real, scale, m["otsu_bins"], m["binarization"])
    t_twin = analysis.bit_flip_probability(zs2, twin, scale, m["otsu_bins"], m["binarization"])
    lines = ["pattern,count_real,flip_real,count_twin,flip_twin"]
    for p in range(channel.N_PATTERNS):
        lines.append(f"{p},{int(t_real.count[p])},{t_real.flip_prob[p]:.17g},"
                     f"{int(t_twin.count[p])},{t_twin.flip_prob[p]:.17g}")
    imaging.atomic_write_text(out, "\n".join(lines) + "\n")
    save_config_copy(cfg, out, False)
    both = t_real.observed & t_twin.observed
    r = metrics.pearson(t_real.flip_prob[both], t_twin.flip_prob[both])
    return f"bit-flip curves -> {out}\npearson(real, twin) = {r:.6f} over {int(both.sum())} patterns"


# --- argument parsing ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--seed", type=int, help="override config seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="cdp-twin", description="Stochastic digital twin for copy detection patterns")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen", parents=[common], help="generate binary templates")
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--out", required=True)

    s = sub.add_parser("fit", parents=[common], help="fit a pattern-conditioned channel model")
    s.add_argument("--templates", required=True)
    s.add_argument("--images", required=True)
    s.add_argument("--direction", choices=channel.DIRECTIONS, default="print")
    s.add_argument("--out", required=True, help="model JSON path")

    s = sub.add_parser("print", parents=[common], help="simulate prints (z -> x)")
    s.add_argument("--templates", required=True)
    s.add_argument("--model", help="channel model JSON; defaults to the config's channel")
    s.add_argument("--k", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("estimate", parents=[common], help="estimate templates (x -> z)")
    s.add_argument("--images", required=True)
    s.add_argument("--model", help="channel model JSON; defaults to the config's channel")
    s.add_argument("--k", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("ddpm-fit", parents=[common], help="fit the linear DDPM denoiser")
    s.add_argument("--templates", required=True)
    s.add_argument("--images", required=True)
    s.add_argument("--direction", choices=channel.DIRECTIONS, default="print")
    s.add_argument("--out", required=True, help="denoiser JSON path")

    s = sub.add_parser("ddpm-sample", parents=[common], help="sample with a fitted denoiser")
    s.add_argument("--denoiser", required=True)
    s.add_argument("--inputs", required=True, help="templates (print) or images (estimate)")
    s.add_argument("--direction", choices=channel.DIRECTIONS, default="print")
    s.add_argument("--k", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("eval", parents=[common], help="metric report in table column order")
    s.add_argument("--ref", required=True, help="directory with templates/ and prints/")
    s.add_argument("--pred", action="append", default=[], help="model directory (repeatable)")
    s.add_argument("--out", required=True, help="report CSV path")

    s = sub.add_parser("analyze", parents=[common], help="variability analyses")
    an = s.add_subparsers(dest="analysis", required=True)
    a = an.add_parser("patterns", parents=[common])
    a.add_argument("--templates", required=True)
    a.add_argument("--images", required=True)
    a.add_argument("--out", required=True)
    a = an.add_parser("stdmap", parents=[common])
    a.add_argument("--images", required=True)
    a.add_argument("--out", required=True)
    a = an.add_parser("ksweep", parents=[common])
    a.add_argument("--images", required=True)
    a.add_argument("--reference", required=True)
    a.add_argument("--out", required=True)
    a = an.add_parser("bitflip", parents=[common])
    a.add_argument("--templates", required=True)
    a.add_argument("--real", required=True)
    a.add_argument("--twin", required=True)
    a.add_argument("--out", required=True)
    return p


def run(args) -> str:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "k", None) is not None:
        overrides["aggregation"] = {"k": args.k}
    cfg = config.load(args.config, overrides)
    k = cfg["aggregation"]["k"]
    c = args.command
    if c == "gen":
        return cmd_gen(cfg, args.out, args.count)
    if c == "fit":
        return cmd_fit(cfg, args.templates, args.images, args.direction, args.out)
    if c == "print":
        return cmd_print(cfg, args.templates, args.out, args.model, k)
    if c == "estimate":
        return cmd_estimate(cfg, args.images, args.out, args.model, k)
    if c == "ddpm-fit":
        return cmd_ddpm_fit(cfg, args.templates, args.images, args.direction, args.out)
    if c == "ddpm-sample":
        return cmd_ddpm_sample(cfg, args.denoiser, args.inputs, args.direction, args.out, k,
                               cfg["template"]["scale"])
    if c == "eval":
        return cmd_eval(cfg, args.ref, args.pred, args.out)
    if c == "analyze":
        if args.analysis == "patterns":
            return cmd_analyze_patterns(cfg, args.templates, args.images, args.out)
        if args.analysis == "stdmap":
            return cmd_analyze_stdmap(cfg, args.images, args.out)
        if args.analysis == "ksweep":
            return cmd_analyze_ksweep(cfg, args.images, args.reference, args.out)
        if args.analysis == "bitflip":
            return cmd_analyze_bitflip(cfg, args.templates, args.real, args.twin, args.out)
    raise UsageError(f"unknown command {c!r}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        print(run(args))
    except CdpTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
