"""Command-line front end: one subcommand per figure recipe.

Each run writes into ``<root>/<command>-<timestamp>-<confighash>/`` where
the root is ``--out``, else ``$QSRS_OUT``, else ``./runs``.  The directory
always holds ``config.txt``, the resolved configuration.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import io
from .chain import (
    direct_detection_snr, lockin_demodulate, lockin_snr, optimize_phase, psd,
    synthesize_photocurrent,
)
from .config import RunConfig
from .dwell import min_dwell, quantum_speedup, tau_grid, video_rate_budget
from .errors import DomainError, FitError, InvalidRegionError, UsageError
from .fixtures import data_path
from .imaging import (
    acquire_image, acquire_multispectral, calibrate_gain, find_background_region,
    label_components, measure_enhancement,
)
from .phantom import build_phantom, default_yeast_spec, parse_phantom_spec
from .squeeze import detected_variance, fit_opa, optimal_aperture, pumped_profile, sweep_aperture
from .theory import CHEMICALS, optimal_ratio, snr_vs_ratio
from .units import to_db

EXIT_OK = 0
EXIT_FIT = 2
EXIT_FAILURE = 1
EXIT_USAGE = 64
EXIT_IO = 74
OUT_ENV = "QSRS_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _kv(d):
    return "".join(f"{k} = {v}\n" for k, v in d.items())


def _g(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


class Run:
    """Output directory plus the resolved config for one subcommand."""

    def __init__(self, command, cfg, out=None):
        self.cfg = cfg
        root = Path(out or os.environ.get(OUT_ENV) or "runs")
        stamp = time.strftime("%Y%m%dT%H%M%S")
        self.dir = root / f"{command}-{stamp}-{cfg.digest()}"
        n = 1
        while self.dir.exists():
            n += 1
            self.dir = root / f"{command}-{stamp}-{cfg.digest()}-{n}"
        io.atomic_write(self.dir / "config.txt", cfg.resolved_text())

    def path(self, name):
        return self.dir / name

    def summary(self, record):
        text = _kv({k: _g(v) for k, v in record.items()})
        io.atomic_write(self.path("summary.txt"), text)
        sys.stdout.write(text)


# --- subcommands -------------------------------------------------------------

def cmd_fit_opa(args, cfg):
    src = args.profile or data_path("opa_profile_noisy.csv" if args.fixture == "noisy" else "opa_profile.csv")
    r, y = io.read_csv(src, ["r", "intensity"])
    run = Run("fit-opa", cfg, args.out)
    try:
        fit = fit_opa(r, y, normalization=cfg["opa.normalization"],
                      a00=cfg["opa.a00"] if cfg["opa.normalization"] == "peak" else None,
                      rms_tol=cfg["opa.rms_tol"])
    except FitError as exc:
        rec = {"status": "failed", "reason": str(exc)}
        if exc.result is not None:
            rec.update(w0=exc.result.model.w0, a00=exc.result.model.a00, a01=exc.result.model.a01,
                       rms=exc.result.rms)
        run.summary(rec)
        return EXIT_FIT
    m = fit.model
    io.write_csv(run.path("fit.csv"), ["r", "intensity", "model"],
                 zip(r, y, pumped_profile(m, r, normalize=cfg["opa.normalization"])))
    run.summary({"status": "ok", "w0": m.w0, "a00": m.a00, "a01": m.a01, "rms": fit.rms,
                 "normalization": fit.normalization, "profile": str(src)})
    return EXIT_OK


def cmd_squeeze_sweep(args, cfg):
    model = cfg.opa_model()
    eta = cfg["squeeze.eta"]
    radii = np.linspace(cfg["squeeze.r_min"], cfg["squeeze.r_max"], cfg["squeeze.points"])
    curve = sweep_aperture(model, eta, radii)
    r_opt = optimal_aperture(curve)
    run = Run("squeeze-sweep", cfg, args.out)
    io.write_csv(run.path("squeeze.csv"), ["r_ap", "variance", "squeezing_db"], curve.rows())
    v_opt = detected_variance(model, eta, r_opt)
    run.summary({"no_aperture_variance": curve.no_aperture_variance,
                 "no_aperture_db": curve.no_aperture_db,
                 "optimal_r_ap": r_opt, "optimal_db": float(-to_db(v_opt)),
                 "max_variance": float(np.max(curve.variance)),
                 "reference_r_ap": 1.1, "reference_db": 1.5,
                 "model_db_at_reference": float(-to_db(detected_variance(model, eta, 1.1)))})
    return EXIT_OK


def cmd_snr_sweep(args, cfg):
    r = np.geomspace(cfg["snr.r_min"], cfg["snr.r_max"], cfg["snr.points"])
    s = snr_vs_ratio(r)
    run = Run("snr-sweep", cfg, args.out)
    io.write_csv(run.path("snr.csv"), ["ratio", "snr", "snr_db"], zip(r, s, to_db(s)))
    k = int(np.argmax(s))
    step = float(max(r[k] - r[max(k - 1, 0)], r[min(k + 1, r.size - 1)] - r[k]))
    run.summary({"argmax_ratio": float(r[k]), "grid_step": step, "optimal_ratio": optimal_ratio(),
                 "gain_0.5_vs_0.1_db": float(to_db(snr_vs_ratio(0.5) / snr_vs_ratio(0.1))),
                 "measured_gain_0.5_vs_0.1_db": 5.5})
    return EXIT_OK


def cmd_lockin_demo(args, cfg):
    noise = cfg.noise(squeeze=False)
    det = cfg.detector()
    kw = dict(power_mw=cfg["lockin.power_mw"])
    amp, dur = cfg["lockin.amplitude"], cfg["lockin.duration_s"]
    seed = cfg["seed"]
    run = Run("lockin-demo", cfg, args.out)

    tr = synthesize_photocurrent(amp, noise, det, dur, seed=(seed, 0), **kw)
    io.write_trace_binary(run.path("trace.bin"), tr.samples, tr.sample_rate)
    if cfg["lockin.csv_trace"]:
        io.write_csv(run.path("trace.csv"), ["t_s", "current_au"], zip(tr.t, tr.samples))
    f, p = psd(tr)
    io.write_csv(run.path("psd.csv"), ["f_hz", "psd_db"], zip(f, to_db(np.maximum(p, 1e-300))))
    phi = optimize_phase(tr)
    res = lockin_demodulate(tr, lo_phase=phi)
    io.write_csv(run.path("demod.csv"), ["t_s", "dc"], zip(np.arange(res.i.size) / res.sample_rate, res.i))

    rows = []
    for k in range(cfg["lockin.trials"]):
        t = synthesize_photocurrent(amp, noise, det, dur, seed=(seed, k + 1), **kw)
        d, l = direct_detection_snr(t), lockin_snr(t)
        rows.append((k, float(to_db(max(d, 1e-30))), float(to_db(l))))
    io.write_csv(run.path("gain.csv"), ["trial", "direct_db", "lockin_db"], rows)
    gains = np.array([b - a for _, a, b in rows])
    run.summary({"lo_phase_rad": phi, "dc": res.dc, "trials": len(rows),
                 "mean_gain_db": float(gains.mean()) if rows else math.nan,
                 "std_gain_db": float(gains.std(ddof=1)) if len(rows) > 1 else math.nan})
    return EXIT_OK


def _load_phantom(cfg, seed=None):
    path = cfg["image.phantom"]
    if path:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read phantom {path}: {exc.strerror}") from None
        spec = parse_phantom_spec(text)
    else:
        spec = default_yeast_spec(seed, size=(cfg["scan.rows"], cfg["scan.cols"]),
                                  pitch_nm=cfg["scan.pitch_nm"])
    return spec, build_phantom(spec)


def _norm01(x):
    lo, hi = float(np.min(x)), float(np.max(x))
    return np.zeros_like(x) if hi <= lo else (x - lo) / (hi - lo)


def cmd_phantom_gen(args, cfg):
    spec, ph = _load_phantom(cfg, cfg["seed"])
    run = Run("phantom-gen", cfg, args.out)
    io.atomic_write(run.path("phantom.txt"), spec.to_text())
    for c in CHEMICALS:
        io.write_pgm(run.path(f"{c}.pgm"), _norm01(ph.maps[c]))
    rows, cols = ph.shape
    yy, xx = np.mgrid[0:rows, 0:cols]
    io.write_csv(run.path("phantom.csv"), ["x", "y", *CHEMICALS],
                 zip(xx.ravel(), yy.ravel(), *(ph.maps[c].ravel() for c in CHEMICALS)))
    run.summary({"rows": rows, "cols": cols, "pitch_nm": ph.pitch_nm, "shapes": len(ph.shapes)})
    return EXIT_OK


def _parse_region(text):
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad region {text!r}; expected x0,y0,x1,y1") from None
    if len(vals) != 4:
        raise UsageError(f"bad region {text!r}; expected x0,y0,x1,y1")
    return tuple(vals)


def _image_outputs(run, tag, img, cfg):
    rows, cols = img.shape
    yy, xx = np.mgrid[0:rows, 0:cols]
    io.write_csv(run.path(f"{tag}.csv"), ["x", "y", "dc", "snr_db"],
                 zip(xx.ravel(), yy.ravel(), img.dc.ravel(), img.snr_db.ravel()))
    io.write_pgm(run.path(f"{tag}.pgm"), _norm01(img.dc))
    mask = img.snr_db >= cfg["image.threshold_db"]
    io.write_pgm(run.path(f"{tag}-contour.pgm"), mask.astype(float))
    _, n = label_components(mask, cfg["image.min_area"])
    return n


def cmd_image(args, cfg):
    if args.shift is not None:
        cfg.set("scan.shift_cm1", float(args.shift))
    if args.squeeze is not None:
        cfg.set("scan.squeeze", args.squeeze)
    if args.enhance_region is not None:
        cfg.set("image.enhance_region", args.enhance_region)
    _, ph = _load_phantom(cfg, cfg["seed"])
    illum, det = cfg.illumination(), cfg.detector()
    noise = cfg.noise(squeeze=True)
    scan = cfg.scan(size=ph.shape)
    allow = cfg["image.allow_photodamage"]
    gain = calibrate_gain(ph, illum, noise, target_db=cfg["image.target_snr_db"], detector=det)
    run = Run("image", cfg, args.out)

    region = cfg["image.enhance_region"]
    region = _parse_region(region) if region else find_background_region(ph.support())
    ref = acquire_image(ph, cfg.scan(size=ph.shape, squeeze=False, pump=False, stream=100),
                        illum, noise, gain=gain, detector=det, allow_photodamage=allow)
    if args.multispectral:
        ms = acquire_multispectral(ph, scan, illum, noise, gain=gain, detector=det, allow_photodamage=allow)
        record = {"gain": gain, "wall_time_s": scan.wall_time}
        for c, img in ms.images.items():
            record[f"organelles_{c}"] = _image_outputs(run, c, img, cfg)
            record[f"peak_snr_db_{c}"] = float(np.max(img.snr_db))
            record[f"enhancement_db_{c}"] = measure_enhancement(img, ref, region)
        io.write_ppm(run.path("composite.ppm"), ms.rgb)
        for c, m in ms.concentrations.items():
            io.write_pgm(run.path(f"unmixed-{c}.pgm"), _norm01(m))
        record["enhance_region"] = ",".join(map(str, region))
        run.summary(record)
        return EXIT_OK
    img = acquire_image(ph, scan, illum, noise, gain=gain, detector=det, allow_photodamage=allow)
    n = _image_outputs(run, "image", img, cfg)
    run.summary({"gain": gain, "shift_cm1": scan.shift_cm1, "squeeze": scan.squeeze,
                 "peak_snr_db": float(np.max(img.snr_db)), "organelles": n,
                 "enhancement_db": measure_enhancement(img, ref, region),
                 "enhance_region": ",".join(map(str, region)), "wall_time_s": scan.wall_time})
    return EXIT_OK


def cmd_dwell(args, cfg):
    src = args.trace or data_path("squeezed_pixel.csv")
    t, dc = io.read_csv(src, ["t_s", "dc"])
    if t.size < 2:
        raise UsageError(f"{src}: need at least two samples")
    dt = float(np.median(np.diff(t)))
    if not dt > 0 or not np.allclose(np.diff(t), dt, rtol=1e-6, atol=0):
        raise UsageError(f"{src}: t_s must be uniformly spaced and increasing")
    taus = tau_grid(dc.size, dt, cfg["dwell.points"])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        curve = min_dwell((dt, dc), taus, numerator=cfg["dwell.numerator"],
                          squeezing_db=cfg["noise.squeezing_db"], max_residual=cfg["dwell.max_residual"])
    for w in caught:
        sys.stderr.write(f"warning: {w.message}\n")
    ratio, saving = quantum_speedup(cfg["noise.squeezing_db"])
    rate = cfg["dwell.frame_rate_hz"]
    run = Run("dwell", cfg, args.out)
    io.write_csv(run.path("dwell.csv"), ["tau_s", "snr"], curve.rows())
    run.summary({"tau_min_s": curve.tau_min, "shot_noise_tau_min_s": curve.tau_min * ratio,
                 "speedup_ratio": ratio, "time_saving": saving, "fit_residual": curve.residual_rms,
                 "free_slope": curve.slope_free, "poor_fit": curve.poor_fit,
                 "video_side_px": video_rate_budget(rate, curve.tau_min),
                 "video_side_shot_noise_px": video_rate_budget(rate, curve.tau_min * ratio)})
    return EXIT_OK


# --- entry point -------------------------------------------------------------

def _onoff(text):
    t = text.lower()
    if t not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return t == "on"


def _common(suppress):
    # subcommand copies must not reset globals given before the subcommand
    d = argparse.SUPPRESS if suppress else None
    common = _Parser(add_help=False, argument_default=d)
    common.add_argument("--config", help="key = value run configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./runs)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key; repeatable")
    return common


def build_parser():
    common = _common(True)
    p = _Parser(prog="qsrs", description="Quantum-enhanced SRS microscopy simulator",
                parents=[_common(False)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("fit-opa", parents=[common], help="fit the two-mode OPA model to a profile")
    s.add_argument("profile", nargs="?", help="CSV with columns r,intensity (default: bundled)")
    s.add_argument("--fixture", choices=("clean", "noisy"), default="clean")
    s.set_defaults(func=cmd_fit_opa)

    s = sub.add_parser("squeeze-sweep", parents=[common], help="squeezing versus aperture radius")
    s.set_defaults(func=cmd_squeeze_sweep)
    s = sub.add_parser("snr-sweep", parents=[common], help="SNR versus Stokes-to-pump ratio")
    s.set_defaults(func=cmd_snr_sweep)
    s = sub.add_parser("lockin-demo", parents=[common], help="lock-in versus direct detection")
    s.set_defaults(func=cmd_lockin_demo)
    s = sub.add_parser("phantom-gen", parents=[common], help="rasterise a phantom")
    s.set_defaults(func=cmd_phantom_gen)

    s = sub.add_parser("image", parents=[common], help="raster-scan a phantom")
    s.add_argument("--shift", type=float, help="Raman shift in cm^-1")
    s.add_argument("--squeeze", type=_onoff, help="on|off")
    s.add_argument("--multispectral", action="store_true", help="image at all three chemical shifts")
    s.add_argument("--enhance-region", metavar="x0,y0,x1,y1")
    s.set_defaults(func=cmd_image)

    s = sub.add_parser("dwell", parents=[common], help="minimum pixel dwell time from a trace")
    s.add_argument("trace", nargs="?", help="CSV with columns t_s,dc (default: bundled)")
    s.set_defaults(func=cmd_dwell)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
        for item in args.set or []:
            if "=" not in item:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            cfg.set(k.strip(), v)
        if args.seed is not None:
            cfg.set("seed", args.seed)
        return args.func(args, cfg)
    except (UsageError, DomainError, InvalidRegionError) as exc:
        sys.stderr.write(f"qsrs: error: {exc}\n")
        return EXIT_USAGE
    except FitError as exc:
        sys.stderr.write(f"qsrs: fit failed: {exc}\n")
        return EXIT_FIT
    except OSError as exc:
        sys.stderr.write(f"qsrs: I/O error: {exc}\n")
        return EXIT_IO
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"qsrs: {exc}\n")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
