"""Command-line interface.

Subcommands: ``chi`` (susceptibility sweep), ``scan`` (intensity or
pinhole scan), ``fit`` (Lorentzian spectral fit), ``calibrate`` (set the
strength constant from a target index change).  Every run writes its
delimited output, an SVG figure unless ``--no-plot`` is given, and a
``manifest.json`` listing each emitted file with its SHA-256 digest;
identical inputs reproduce identical digests.

Exit codes: 0 success, 2 configuration errors, 3 physics/grid errors,
4 fit errors or non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, experiment, lineshape, medium
from .fitting import (
    SpectrumData,
    fit as run_fit,
    format_fit_report,
    initial_guess,
    load_spectrum_csv,
    predict_chi_prime,
)
from .config import load_scan_config, save_scan_config
from .errors import ConfigError, FitError, PhysicsError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_FIT = 4


def _common_flags(parser):
    parser.add_argument("--output-dir", default=".", help="directory for emitted files")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the noise seed from the config")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for scan points")
    parser.add_argument("--no-plot", action="store_true",
                        help="skip the SVG figure")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vaporlens",
        description="Virtual gain/absorption-pair vapor experiment",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("chi", help="susceptibility sweep to CSV")
    p.add_argument("config")
    p.add_argument("--from", dest="freq_from", type=float, default=None,
                   metavar="MHZ", help="sweep start (default: scan window)")
    p.add_argument("--to", dest="freq_to", type=float, default=None, metavar="MHZ")
    p.add_argument("--points", type=int, default=None)
    _common_flags(p)
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("scan", help="intensity / pinhole frequency scan")
    p.add_argument("config")
    p.add_argument("--pinhole", choices=("on", "off"), default=None,
                   help="override the config's pinhole.enabled")
    p.add_argument("--noise", type=float, default=None, metavar="SIGMA",
                   help="override the relative noise level")
    _common_flags(p)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("fit", help="fit gain/absorption lines to a spectrum CSV")
    p.add_argument("data")
    p.add_argument("--resonances", type=int, default=2, choices=(1, 2))
    p.add_argument("--kinds", default="gain,absorption",
                   help="comma-separated kinds, e.g. gain,absorption")
    p.add_argument("--depth", type=float, default=None,
                   help="fixed optical-depth scale (default 1.0)")
    p.add_argument("--config", default=None,
                   help="config file from which to compute the depth k0*L")
    p.add_argument("--free-depth", action="store_true",
                   help="fit the depth too (degenerate with strengths)")
    _common_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calibrate", help="set kappa from a target peak index change")
    p.add_argument("config")
    p.add_argument("--target-dn", type=float, default=1e-6)
    _common_flags(p)
    p.set_defaults(func=cmd_calibrate)
    return parser


class _Emitter:
    """Collects emitted files and writes the run manifest."""

    def __init__(self, args, command):
        self.dir = Path(args.output_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config_path = getattr(args, "config", None)
        self.seed = args.seed
        self.files = []

    def path(self, name: str) -> Path:
        return self.dir / name

    def add(self, name: str):
        digest = hashlib.sha256(self.path(name).read_bytes()).hexdigest()
        self.files.append({"name": name, "sha256": digest})

    def write_text(self, name: str, text: str):
        self.path(name).write_text(text)
        self.add(name)

    def finish(self):
        manifest = {
            "command": self.command,
            "config_path": self.config_path,
            "output_dir": str(self.dir),
            "seed": self.seed,
            "files": self.files,
            "version": __version__,
        }
        with open(self.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _load_config(args) -> experiment.ScanConfig:
    cfg = load_scan_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, noise=replace(cfg.noise, seed=args.seed))
    return cfg


def cmd_chi(args) -> int:
    cfg = _load_config(args)
    lo = cfg.freq_start_mhz if args.freq_from is None else args.freq_from
    hi = cfg.freq_stop_mhz if args.freq_to is None else args.freq_to
    n = cfg.n_points if args.points is None else args.points
    if not lo < hi or n < 2:
        raise ConfigError("sweep needs --from < --to and --points >= 2")
    model = medium.build_model(cfg.scenario)
    deltas = np.linspace(lo, hi, n)
    chi = lineshape.chi_at(model, deltas)
    index = np.sqrt(1.0 + chi)
    k0 = 2.0 * math.pi / (cfg.beam.wavelength_nm * 1e-9)
    alpha = 2.0 * k0 * index.imag

    out = _Emitter(args, "chi")
    with open(out.path("chi.csv"), "w", newline="") as fh:
        fh.write("delta_mhz,chi_re,chi_im,n_minus_1,alpha_per_m\n")
        for i in range(n):
            fh.write(",".join(repr(float(v)) for v in (
                deltas[i], chi.real[i], chi.imag[i], index.real[i] - 1.0, alpha[i],
            )) + "\n")
    out.add("chi.csv")

    step = max(model.min_hwhm / 20.0, (hi - lo) / 2000.0)
    crossings = []
    if model.resonances and step < model.min_hwhm:
        crossings = lineshape.im_zero_crossings(model, (lo, hi), step)
    print(f"zero_crossings_mhz = {crossings}")
    try:
        guess = crossings[0] if crossings else 0.5 * (lo + hi)
        ext = lineshape.re_extremum_near(model, guess)
        kind = "maximum" if ext.is_maximum else "minimum"
        print(f"chi_re_extremum: delta_mhz = {ext.delta!r}, chi_re = {ext.chi_re!r}, "
              f"{kind}")
        print(f"epsilon_at_extremum = {1.0 + ext.chi_re!r}")
        n_ext = lineshape.refractive_index(lineshape.chi_at(model, ext.delta))
        print(f"delta_n_at_extremum = {n_ext.real - 1.0!r}")
    except lineshape.NoExtremumError:
        print("chi_re_extremum: none within the sweep window")

    if not args.no_plot:
        from . import plotting
        fig = plotting.chi_sweep_figure(deltas, chi.real, chi.imag, crossings)
        plotting.save_figure(fig, out.path("chi.svg"))
        out.add("chi.svg")
    out.finish()
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _load_config(args)
    if args.pinhole is not None:
        cfg = replace(cfg, pinhole=replace(cfg.pinhole, enabled=args.pinhole == "on"))
    if args.noise is not None:
        if args.noise < 0:
            raise ConfigError("--noise must be >= 0")
        cfg = replace(cfg, noise=replace(cfg.noise, relative_sigma=args.noise))

    if cfg.pinhole.enabled:
        records = experiment.run_pinhole_scan(cfg, workers=args.threads)
    else:
        records = experiment.run_intensity_scan(cfg)

    out = _Emitter(args, "scan")
    experiment.save_scan_csv(records, out.path("scan.csv"))
    out.add("scan.csv")
    if not args.no_plot:
        from . import plotting
        fig = plotting.scan_figure(records, pinhole=cfg.pinhole.enabled)
        plotting.save_figure(fig, out.path("scan.svg"))
        out.add("scan.svg")
    out.finish()
    return EXIT_OK


def _parse_kinds(text: str, count: int):
    table = {"gain": lineshape.Kind.GAIN, "absorption": lineshape.Kind.ABSORPTION}
    kinds = []
    for name in text.split(","):
        name = name.strip().lower()
        if name not in table:
            raise ConfigError(f"unknown resonance kind {name!r}")
        kinds.append(table[name])
    if len(kinds) != count:
        raise ConfigError(f"--kinds lists {len(kinds)} kinds for {count} resonances")
    return tuple(kinds)


def _load_fit_data(path):
    """Spectrum CSV (freq_mhz,value[,sigma]) or a scan CSV's intensity."""
    try:
        return load_spectrum_csv(path)
    except (OSError, ValueError) as strict_exc:
        try:
            rows = np.genfromtxt(path, delimiter=",", names=True)
            names = rows.dtype.names or ()
            if "delta_mhz" in names and "intensity_ratio" in names:
                return SpectrumData(np.atleast_1d(rows["delta_mhz"]),
                                    np.atleast_1d(rows["intensity_ratio"]))
        except (OSError, ValueError):
            pass
        raise ConfigError(f"{path}: {strict_exc}") from strict_exc


def cmd_fit(args) -> int:
    kinds = _parse_kinds(args.kinds, args.resonances)
    if args.depth is not None and args.config is not None:
        raise ConfigError("give either --depth or --config, not both")
    depth = args.depth if args.depth is not None else 1.0
    if args.config is not None:
        cfg = load_scan_config(args.config)
        depth = (2.0 * math.pi / (cfg.beam.wavelength_nm * 1e-9)
                 * cfg.scenario.cell.length_m)
    data = _load_fit_data(args.data)

    init = initial_guess(data, args.resonances, kinds, depth=depth,
                         depth_fixed=not args.free_depth)
    result = run_fit(data, init)

    out = _Emitter(args, "fit")
    out.config_path = args.data
    out.write_text("fit_report.txt", format_fit_report(result))
    chi_curve = None
    if result.converged and args.resonances == 2 and len(set(kinds)) == 2:
        chi_curve = predict_chi_prime(result)
        freqs, chi_re, delta_n = chi_curve
        with open(out.path("chi_prime.csv"), "w", newline="") as fh:
            fh.write("freq_mhz,chi_re,delta_n\n")
            for row in zip(freqs, chi_re, delta_n):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        out.add("chi_prime.csv")
    if not args.no_plot:
        from . import plotting
        fig = plotting.fit_figure(data, result, chi_curve)
        plotting.save_figure(fig, out.path("fit.svg"))
        out.add("fit.svg")
    out.finish()
    sys.stdout.write(format_fit_report(result))
    if not result.converged:
        print("fit did not converge; best-so-far parameters reported",
              file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def cmd_calibrate(args) -> int:
    cfg = _load_config(args)
    if args.target_dn < 0:
        raise ConfigError("--target-dn must be >= 0")
    kappa = medium.calibrate_kappa(cfg.scenario, args.target_dn)
    cfg = replace(cfg, scenario=replace(cfg.scenario, kappa=kappa))
    out = _Emitter(args, "calibrate")
    save_scan_config(cfg, out.path("calibrated.toml"))
    out.add("calibrated.toml")
    out.finish()
    print(f"kappa = {kappa!r}")
    if kappa > 0:
        delta, dn = medium.peak_delta_n(cfg.scenario)
        print(f"peak_delta_n = {dn!r} at delta_mhz = {delta!r}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhysicsError as exc:
        print(f"physics/grid error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
