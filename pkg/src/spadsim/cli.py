"""Command-line front end: ``spadsim {fisher,sim,sweep,validate}``.

Every command takes ``--config PATH`` or ``--preset NAME``; ``--set
section.key=value`` overrides individual config fields and ``--range`` /
``--reflectivity`` override the target patch. Exit codes: 0 success, 2
config error, 3 I/O error, 4 numerical nonconvergence.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import crb_imager, estimation, radiometry, scene_io, spad_sampler
from .config import PRESETS, ConfigError, TargetPatch, dump_config, load_config, load_preset, parse_config
from .errors import DomainError, EdgeProximityWarning, FormatError, QuadratureError
from .fisher import crb_sigma_star, fisher_per_pulse, min_distinguishability
from .likelihood import build_model, edge_margin, total_alpha
from .scene import CODE_NAMES, Scene, resolution_target

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


def _config(args):
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    if args.set:
        parser = configparser.ConfigParser()
        parser.read_string(dump_config(cfg))
        for item in args.set:
            key, sep, value = item.partition("=")
            section, dot, name = key.strip().partition(".")
            if not (sep and dot):
                raise ConfigError(f"expected section.key=value, got {item!r}")
            if not parser.has_section(section):
                parser.add_section(section)
            parser[section][name] = value.strip()
        buf = []
        for section in parser.sections():
            buf.append(f"[{section}]")
            buf += [f"{k} = {v}" for k, v in parser[section].items()]
        cfg = parse_config("\n".join(buf))
    if args.range is not None or args.reflectivity is not None:
        base = cfg.target
        rng = args.range if args.range is not None else (base.range if base else None)
        refl = args.reflectivity if args.reflectivity is not None else (base.reflectivity if base else None)
        if rng is None or refl is None:
            raise ConfigError("both range and reflectivity are needed", "target")
        try:
            cfg = cfg.replace(target=TargetPatch(rng, refl))
        except DomainError as exc:
            raise ConfigError(str(exc), "target") from None
    return cfg


def _need_target(cfg):
    if cfg.target is None:
        raise ConfigError("missing section (or pass --range and --reflectivity)", "target")
    return cfg.target


def _fmt(x):
    return f"{x:.6g}" if isinstance(x, float) else str(x)


# --- commands ----------------------------------------------------------------------------

def cmd_fisher(args) -> int:
    cfg = _config(args)
    target = _need_target(cfg)
    model = build_model(cfg.laser, cfg.atmosphere, cfg.optics, cfg.sensor, target)
    rtol = args.rtol or cfg.tolerances.quadrature_rel
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", EdgeProximityWarning)
        alpha = total_alpha(model, cfg.tolerances.edge_sigma_guard)
        res = fisher_per_pulse(model, rtol=rtol, max_evaluations=cfg.tolerances.max_evaluations,
                               edge_sigma_guard=cfg.tolerances.edge_sigma_guard)
    s_star = crb_sigma_star(res.info_per_pulse, alpha, cfg.acquisition)
    estimable = math.isfinite(s_star)
    report = {
        "photons_per_pulse": model.signal_ppp,
        "background_rate_hz": model.background_rate,
        "alpha": alpha,
        "sbnr": radiometry.sbnr(cfg.laser, cfg.atmosphere, cfg.optics, target),
        "fisher_per_pulse_s-2": res.info_per_pulse,
        "fisher_abs_error": res.abs_error,
        "sigma_star_s": s_star if estimable else None,
        "sigma_mu_s": min_distinguishability(s_star) if estimable else None,
        "depth_distinguishability_m": 0.5 * radiometry.LIGHT_SPEED * min_distinguishability(s_star)
        if estimable else None,
        "estimable": estimable,
        "warnings": [str(w.message) for w in caught],
    }
    for key, value in report.items():
        if key == "warnings":
            continue
        shown = "not estimable" if value is None else _fmt(value)
        print(f"{key:28s} {shown}")
    for w in report["warnings"]:
        print(f"warning: {w}")
    if args.out:
        report["sbnr"] = None if math.isinf(report["sbnr"]) else report["sbnr"]
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    return EXIT_OK


def _scene(args, cfg) -> tuple[Scene, str]:
    if args.depth_map or args.reflectivity_map:
        if not (args.depth_map and args.reflectivity_map):
            raise ConfigError("--depth-map and --reflectivity-map go together")
        return scene_io.load_scene(args.depth_map, args.reflectivity_map), "files"
    rows, cols = args.rows or cfg.sensor.rows, args.cols or cfg.sensor.cols
    if args.scene == "resolution-target":
        refl = cfg.target.reflectivity if cfg.target else 0.09
        rng = cfg.target.range if cfg.target else 14.73
        return resolution_target(rows, cols, rng, refl)[0], "resolution-target"
    target = _need_target(cfg)
    return Scene.uniform(rows, cols, target.range, target.reflectivity), "uniform"


def _code_summary(codes):
    vals, counts = np.unique(codes, return_counts=True)
    return ", ".join(f"{CODE_NAMES[int(v)]}: {n}" for v, n in zip(vals, counts))


def cmd_sim(args) -> int:
    cfg = _config(args)
    scene, source = _scene(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "csv" if args.format == "csv" else "bin"
    meta = {"mode": args.mode, "seed": cfg.seed, "config_digest": cfg.digest(), "scene": source,
            "shape": list(scene.shape)}
    if args.mode == "crb":
        codes = None
        for img in crb_imager.iter_crb_batch(scene, cfg, args.images):
            scene_io.save_depth_image(img, out / f"depth_{img.provenance['image_index']:05d}.{ext}", args.format)
            codes = img.codes
        meta["images"] = args.images
    else:
        cube = spad_sampler.simulate_histogram_cube(scene, cfg, threads=args.threads)
        scene_io.save_histogram_cube(cube, out / "cube.bin")
        img = estimation.depth_image_from_cube(cube, estimation.MatchFilterSpec.for_config(cfg))
        scene_io.save_depth_image(img, out / f"depth.{ext}", args.format)
        codes = img.codes
        meta["frames"] = cube.n_frames
    meta["pixel_status"] = {CODE_NAMES[int(v)]: int(n) for v, n in zip(*np.unique(codes, return_counts=True))}
    (out / "provenance.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (out / "config.ini").write_text(dump_config(cfg))
    print(f"wrote {out} ({_code_summary(codes)})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config(args)
    target = _need_target(cfg)
    hist, crb = estimation.distinguishability_sweep(
        cfg, target, total_frames=args.frames_max, increments=args.increments, repeats=args.repeats,
        sigma_k=args.sigma_k)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene_io.save_curve(hist, out / "histogram_curve.csv")
    scene_io.save_curve(crb, out / "crb_curve.csv")
    print(f"{'frames':>8s} {'histogram_m':>14s} {'std_err_m':>12s} {'crb_m':>12s}")
    for h, c in zip(hist.points, crb.points):
        flag = "" if h.well_defined else "  ill-defined"
        print(f"{h.frames:8d} {h.value:14.6g} {h.std_error:12.3g} {c.value:12.6g}{flag}")
    return EXIT_OK


def validate_findings(cfg) -> list[tuple[str, str]]:
    """Checks beyond field validation; returns ``(severity, message)`` pairs."""
    found = []
    if cfg.target is None:
        return [("warning", "target: no target patch; per-pixel checks skipped")]
    model = build_model(cfg.laser, cfg.atmosphere, cfg.optics, cfg.sensor, cfg.target)
    alpha = model.window * model.floor_rate + model.signal_ppp
    mu = model.pulse.peak_time
    if not math.isfinite(alpha):
        found.append(("error", "radiometry: non-finite expected counts"))
    elif alpha >= 1:
        found.append(("error", f"alpha = {alpha:.4g} >= 1: detector saturated, reduce signal or background"))
    if mu < 0 or mu >= model.window:
        found.append(("error", f"target return at {mu:.4g} s lies outside the window [0, {model.window:.4g}) s"))
    elif edge_margin(model) < cfg.tolerances.edge_sigma_guard:
        found.append(("warning", f"target return is {edge_margin(model):.2f} sigma from a window edge "
                                 f"(guard {cfg.tolerances.edge_sigma_guard:g})"))
    if model.signal_ppp == 0:
        found.append(("warning", "zero signal photons: depth is not estimable"))
    return found


def cmd_validate(args) -> int:
    cfg = _config(args)
    findings = validate_findings(cfg)
    for severity, msg in findings:
        print(f"{severity}: {msg}")
    if any(s == "error" for s, _ in findings):
        return EXIT_CONFIG
    print("ok")
    return EXIT_OK


# --- entry point --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    src = common.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="INI config file")
    src.add_argument("--preset", choices=PRESETS, help="shipped preset")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config field")
    common.add_argument("--range", type=float, help="target range (m)")
    common.add_argument("--reflectivity", type=float, help="target reflectivity")

    p = argparse.ArgumentParser(prog="spadsim", description="SPAD lidar simulator")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fisher", parents=[common], help="per-pulse Fisher information and CRB report")
    f.add_argument("--rtol", type=float, help="quadrature relative tolerance")
    f.add_argument("--out", help="write the report as JSON")
    f.set_defaults(func=cmd_fisher)

    s = sub.add_parser("sim", parents=[common], help="simulate depth images or histogram cubes")
    s.add_argument("--mode", choices=("crb", "histogram"), default="crb")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--images", type=int, default=1, help="images in crb mode")
    s.add_argument("--threads", type=int, default=1, help="worker threads in histogram mode")
    s.add_argument("--format", choices=("grid_binary", "csv"), default="grid_binary")
    s.add_argument("--depth-map", help="ground-truth depth grid (csv or binary)")
    s.add_argument("--reflectivity-map", help="reflectivity grid (csv or binary)")
    s.add_argument("--scene", choices=("uniform", "resolution-target"), default="uniform",
                   help="built-in scene when no maps are given")
    s.add_argument("--rows", type=int, help="built-in scene rows (default: sensor rows)")
    s.add_argument("--cols", type=int, help="built-in scene cols (default: sensor cols)")
    s.set_defaults(func=cmd_sim)

    w = sub.add_parser("sweep", parents=[common], help="distinguishability versus frames")
    w.add_argument("--frames-max", type=int, default=1000)
    w.add_argument("--increments", type=int, default=100)
    w.add_argument("--repeats", type=int, default=100)
    w.add_argument("--sigma-k", type=float, default=0.0, help="per-frame trigger skew std (s)")
    w.add_argument("--out", required=True, help="output directory")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", parents=[common], help="check a config")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QuadratureError as exc:
        print(f"nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
