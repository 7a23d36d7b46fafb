"""Command-line entry point: ``guidedreg <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .edt import signed_edt, warp_mask_edt, warp_mask_plain
from .errors import DivergenceError, GuidedRegError, InvalidArgumentError
from .frangi import FrangiParams, extract_dense_mask
from .io import file_sha256, read_volume, write_manifest, write_volume
from .losses import LossConfig
from .metrics import MetricReport, dice, ssim_region
from .phantom import AnalyticDeformation, PhantomSpec, apply_analytic, generate
from .registration import RegistrationConfig, register_pair
from .volume import Volume, as_mask_array
from .warp import warp

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    p = _Parser(prog="guidedreg", description="Two-stage guided 3D registration toolkit.")
    p.add_argument("--version", action="version", version=f"guidedreg {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("register", help="register a moving volume onto a fixed volume")
    r.add_argument("--fixed", required=True)
    r.add_argument("--moving", required=True)
    r.add_argument("--fixed-mask")
    r.add_argument("--moving-mask")
    r.add_argument("--filter", action="store_true",
                   help="extract guidance masks with the vesselness filter")
    r.add_argument("--similarity", choices=("mse", "cc"), default="mse")
    r.add_argument("--lambda", dest="lam", type=float)
    r.add_argument("--alpha", type=float, default=1.0)
    r.add_argument("--iters", type=int, default=500)
    r.add_argument("--step", type=float, default=5e-4)
    r.add_argument("--alpha-period", type=int)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out-dir", required=True)

    w = sub.add_parser("warp", help="apply a displacement field")
    w.add_argument("--in", dest="inp", required=True)
    w.add_argument("--field", required=True)
    w.add_argument("--mask", action="store_true", help="treat the input as a binary mask")
    mode = w.add_mutually_exclusive_group()
    mode.add_argument("--edt", dest="mask_mode", action="store_const", const="edt")
    mode.add_argument("--nearest", dest="mask_mode", action="store_const", const="nearest")
    mode.add_argument("--bilinear", dest="mask_mode", action="store_const", const="trilinear")
    w.add_argument("--out", required=True)

    e = sub.add_parser("extract", help="vesselness-based dense-structure mask")
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--percentile", type=float, default=90.0)
    e.add_argument("--scales", type=float, nargs="+", default=[1.0, 1.5, 2.0])
    e.add_argument("--alpha", type=float, default=0.5)
    e.add_argument("--beta", type=float, default=0.5)
    e.add_argument("--c", default="auto")
    e.add_argument("--out", required=True)

    d = sub.add_parser("edt", help="signed distance map of a mask")
    d.add_argument("--in", dest="inp", required=True)
    d.add_argument("--out", required=True)

    m = sub.add_parser("metrics", help="compare a warped volume with the fixed one")
    m.add_argument("--fixed", required=True)
    m.add_argument("--warped", required=True)
    m.add_argument("--fixed-mask")
    m.add_argument("--warped-mask")
    m.add_argument("--region")
    m.add_argument("--out", required=True)

    ph = sub.add_parser("phantom", help="write a synthetic pair with ground truth")
    ph.add_argument("--kind", default="sphere",
                    choices=("sphere", "tube", "tube-bundle", "sheet", "textured-blob"))
    ph.add_argument("--deform", default="none",
                    help="none | translation:tx,ty,tz | radial:gain | "
                         "sinusoidal:amplitude,wavelength[,width]")
    ph.add_argument("--size", type=int, default=32)
    ph.add_argument("--radius", type=float)
    ph.add_argument("--noise", type=float, default=0.0)
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--out-dir", required=True)
    return p


def _load(path):
    return read_volume(path)


def _load_mask(path):
    v = read_volume(path)
    return as_mask_array(v.data, path)


def _entry(path):
    return {"path": path, "sha256": file_sha256(path)}


def _cmd_register(a):
    if a.filter and (a.fixed_mask or a.moving_mask):
        raise UsageError("--filter cannot be combined with --fixed-mask/--moving-mask")
    if not a.filter and not (a.fixed_mask and a.moving_mask):
        raise UsageError("give --fixed-mask and --moving-mask, or --filter")
    fixed, moving = _load(a.fixed), _load(a.moving)
    fm = mm = None
    if not a.filter:
        fm, mm = _load_mask(a.fixed_mask), _load_mask(a.moving_mask)
    lam = a.lam if a.lam is not None else (0.08 if a.similarity == "mse" else 8.0)
    cfg = RegistrationConfig(
        loss=LossConfig(similarity=a.similarity, lam=lam, alpha=a.alpha),
        iterations=a.iters, step_size=a.step, alpha_double_every=a.alpha_period,
        mode="filter" if a.filter else "mask-supplied", seed=a.seed)
    result = register_pair(fixed.data, moving.data, fm, mm, cfg)

    os.makedirs(a.out_dir, exist_ok=True)
    outputs = {}
    for name, arr in (("u_volume", result.u_volume), ("u_mask", result.u_mask),
                      ("u_fused", result.u_fused), ("warped", result.warped)):
        path = os.path.join(a.out_dir, f"{name}.nrrd")
        write_volume(path, Volume(arr, fixed.spacing))
        # relative to the manifest so the file does not depend on --out-dir
        outputs[name] = {"path": os.path.basename(path), "sha256": file_sha256(path)}
    totals = result.trace_totals()
    manifest = {
        "tool": "guidedreg",
        "version": __version__,
        "inputs": {
            "fixed": _entry(a.fixed),
            "moving": _entry(a.moving),
            "fixed_mask": _entry(a.fixed_mask) if a.fixed_mask else None,
            "moving_mask": _entry(a.moving_mask) if a.moving_mask else None,
        },
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "metrics": result.metrics.to_dict(),
        "loss_trace": {
            "first": float(totals[0]),
            "last": float(totals[-1]),
            "min": float(totals.min()),
            "final_base_weights": result.final_loss.to_dict(),
        },
        "outputs": outputs,
    }
    write_manifest(os.path.join(a.out_dir, "manifest.json"), manifest)


def _cmd_warp(a):
    src = _load(a.inp)
    u = _load(a.field)
    if not u.is_field:
        raise InvalidArgumentError(f"{a.field} is not a displacement field")
    if a.mask:
        m = as_mask_array(src.data, a.inp)
        mode = a.mask_mode or "edt"
        if mode == "edt":
            out = warp_mask_edt(m, u.data)
        else:
            out = warp_mask_plain(m, u.data, mode)
        out = out.astype(np.float32)
    else:
        if a.mask_mode:
            raise UsageError("--edt/--nearest/--bilinear require --mask")
        out = warp(src.data, u.data)
    write_volume(a.out, Volume(out, src.spacing))


def _cmd_extract(a):
    src = _load(a.inp)
    c = None if str(a.c).lower() == "auto" else float(a.c)
    params = FrangiParams(scales=tuple(a.scales), alpha_f=a.alpha, beta_f=a.beta, c_f=c)
    mask = extract_dense_mask(src.data, params, a.percentile)
    write_volume(a.out, Volume(mask.astype(np.float32), src.spacing))


def _cmd_edt(a):
    src = _load(a.inp)
    write_volume(a.out, Volume(signed_edt(as_mask_array(src.data, a.inp)), src.spacing))


def _cmd_metrics(a):
    fixed, warped = _load(a.fixed), _load(a.warped)
    if bool(a.fixed_mask) != bool(a.warped_mask):
        raise UsageError("--fixed-mask and --warped-mask go together")
    dice_dt = None
    if a.fixed_mask:
        dice_dt = dice(_load_mask(a.fixed_mask), _load_mask(a.warped_mask))
    region = _load_mask(a.region) if a.region else None
    report = MetricReport(dice_dt=dice_dt, ssim=ssim_region(fixed.data, warped.data, region))
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    if a.out == "-":
        sys.stdout.write(text)
    else:
        with open(a.out, "w") as fh:
            fh.write(text)


def _parse_deform(text, center):
    kind, _, args = text.partition(":")
    try:
        vals = [float(x) for x in args.split(",")] if args else []
    except ValueError:
        raise UsageError(f"bad --deform value {text!r}") from None
    if kind == "none" and not vals:
        return AnalyticDeformation("identity")
    if kind == "translation" and len(vals) == 3:
        return AnalyticDeformation("translation", translation=tuple(vals))
    if kind == "radial" and len(vals) == 1:
        return AnalyticDeformation("radial", center=center, gain=vals[0])
    if kind == "sinusoidal" and len(vals) in (2, 3):
        width = vals[2] if len(vals) == 3 else 6.0
        return AnalyticDeformation("sinusoidal", center=center, amplitude=vals[0],
                                   wavelength=vals[1], support_width=width)
    raise UsageError(f"bad --deform value {text!r}")


def _cmd_phantom(a):
    kw = {}
    if a.radius is not None:
        kw["radius"] = a.radius
    elif a.kind != "sphere":
        kw["radius"] = 1.5
    spec = PhantomSpec(kind=a.kind, dims=(a.size,) * 3, noise_sigma=a.noise, seed=a.seed, **kw)
    T = _parse_deform(a.deform, spec.center)
    moving, m_dense, m_body = generate(spec)
    fixed, f_dense, f_body, u_gt = apply_analytic(spec, T)
    os.makedirs(a.out_dir, exist_ok=True)
    for name, arr in (("moving", moving), ("moving_dense", m_dense), ("moving_body", m_body),
                      ("fixed", fixed), ("fixed_dense", f_dense), ("fixed_body", f_body),
                      ("u_gt", u_gt)):
        write_volume(os.path.join(a.out_dir, f"{name}.nrrd"), np.asarray(arr, dtype=np.float32))


_COMMANDS = {
    "register": _cmd_register,
    "warp": _cmd_warp,
    "extract": _cmd_extract,
    "edt": _cmd_edt,
    "metrics": _cmd_metrics,
    "phantom": _cmd_phantom,
}


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"guidedreg: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"guidedreg: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (GuidedRegError, OSError) as exc:
        print(f"guidedreg: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
