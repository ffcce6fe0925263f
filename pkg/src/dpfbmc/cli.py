"""Command-line entry point: ``dpfbmc ber|psd|offsets|tables|filter-export``.

Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""
import argparse
import logging
import os
import sys

import yaml

from . import experiments, filters, interference, svg
from .experiments import ConfigError, ExperimentConfig, NumericalError

log = logging.getLogger("dpfbmc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _load_config(path, defaults=None):
    data = dict(defaults or {})
    if path:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a mapping")
        data.update(loaded)
    return data


def _parse_set(items):
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = yaml.safe_load(val)
    return out


def _build_config(args, defaults=None):
    data = _load_config(args.config, defaults)
    over = _parse_set(args.set)
    if not args.out_dir and (over.get("out_dir") or data.get("out_dir")):
        args.out_dir = str(over.get("out_dir") or data.get("out_dir"))
    for key in ("frames", "seed", "workers", "profile", "equalizer", "modulation"):
        v = getattr(args, key, None)
        if v is not None:
            over[key] = v
    if getattr(args, "systems", None):
        over["systems"] = [s.strip() for s in args.systems.split(",") if s.strip()]
    if getattr(args, "filter", None):
        over["filter"] = args.filter
    if getattr(args, "sweep_var", None) or getattr(args, "sweep_values", None):
        sw = dict(data.get("sweep") or {})
        if args.sweep_var:
            sw["variable"] = args.sweep_var
        if args.sweep_values:
            sw["values"] = [yaml.safe_load(v) for v in args.sweep_values.split(",")]
        over["sweep"] = sw
    data.update(over)
    return ExperimentConfig.from_dict(data)


def _out_dir(args):
    d = args.out_dir or "."
    os.makedirs(d, exist_ok=True)
    return d


def _plot_table(table, path, ylabel, logy, metric):
    series = [(s, *table.series(s, metric)) for s in table.systems()]
    svg.line_plot(series, path, xlabel=table.sweep_variable, ylabel=ylabel, logy=logy)


def cmd_ber(args, defaults=None, stem="ber"):
    cfg = _build_config(args, defaults)
    runner = experiments.run_offset_sweep if stem == "offsets" else experiments.run_ber_sweep
    table = runner(cfg)
    out = _out_dir(args)
    table.write_csv(os.path.join(out, f"{stem}.csv"))
    if "ber" in cfg.metrics:
        _plot_table(table, os.path.join(out, f"{stem}.svg"), "BER", True, "ber")
    for r in table.rows:
        log.info("%s=%g %s %s=%g", table.sweep_variable, r.sweep_value, r.system, r.metric, r.value)
    return EXIT_OK


def cmd_offsets(args):
    defaults = dict(experiments.OFFSET_DEFAULTS)
    defaults["sweep"] = {"variable": "cfo", "values": [0.0, 0.02, 0.04, 0.06, 0.08, 0.1]}
    return cmd_ber(args, defaults, stem="offsets")


def cmd_psd(args):
    defaults = {"systems": ["cp_ofdm", "cp_ofdm_wola", "fbmc@phydyas:4", "fbmc@srrc:4", "fbmc@srrc:8",
                            "dp_fbmc_s1@srrc:8"], "cp_fraction": "1/16"}
    cfg = _build_config(args, defaults)
    table, spectra = experiments.run_psd(cfg)
    out = _out_dir(args)
    table.write_csv(os.path.join(out, "psd.csv"))
    svg.line_plot([(k, v.freqs, v.density_db) for k, v in spectra.items()], os.path.join(out, "psd.svg"),
                  xlabel="frequency (subcarrier spacings)", ylabel="PSD (dB)")
    for r in table.select(metric="oob_db"):
        print(f"{r.system}: out-of-band {r.value:.2f} dB")
    return EXIT_OK


def cmd_tables(args):
    out = _out_dir(args)
    if args.filter:
        f = filters.design_filter(args.filter, args.k, args.n, args.alpha)
        t = interference.localization_table(f, args.dn, args.dm)
        text = interference.render_table(t, args.format)
        path = args.out or os.path.join(out, f"table_{f.kind.value}_k{f.K}.{'md' if args.format == 'markdown' else 'csv'}")
        with open(path, "w") as fh:
            fh.write(text)
        sys.stdout.write(text)
        return EXIT_OK
    report = experiments.run_table_report(args.n, out)
    for (kind, K), (_, diff) in report.items():
        print(f"{kind} K={K}: max abs deviation {diff.max():.4f}")
    return EXIT_OK


def cmd_filter_export(args):
    f = filters.design_filter(args.filter, args.k, args.n, args.alpha)
    path = args.out or os.path.join(_out_dir(args), f"filter_{f.kind.value}_k{f.K}_n{f.N}.csv")
    filters.export_csv(f, path)
    print(path)
    return EXIT_OK


def _common(p):
    p.add_argument("--config", help="YAML experiment configuration")
    p.add_argument("--out-dir", help="directory for CSV/SVG artifacts")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--systems", help="comma-separated system list, e.g. cp_ofdm,dp_fbmc_s1@srrc:8")
    p.add_argument("--filter", help="default FBMC filter, e.g. srrc:8")
    p.add_argument("--profile")
    p.add_argument("--equalizer", choices=("LS_DFT", "PCK"))
    p.add_argument("--modulation", type=int)
    p.add_argument("--sweep-var")
    p.add_argument("--sweep-values", help="comma-separated grid")


def build_parser():
    ap = argparse.ArgumentParser(prog="dpfbmc", description="FBMC / DP-FBMC / CP-OFDM simulation")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for name, fn, helptext in (("ber", cmd_ber, "BER / SINR sweep"),
                               ("offsets", cmd_offsets, "BER versus CFO or CTO"),
                               ("psd", cmd_psd, "power spectral density and out-of-band power")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.set_defaults(func=fn)
    for name in ("tables", "table"):
        p = sub.add_parser(name, help="localization tables")
        p.add_argument("--out-dir")
        p.add_argument("--filter", choices=[k.value for k in filters.FilterKind])
        p.add_argument("--k", type=int, default=4)
        p.add_argument("--n", type=int, default=512)
        p.add_argument("--alpha", type=float)
        p.add_argument("--dn", type=int, default=2)
        p.add_argument("--dm", type=int, default=3)
        p.add_argument("--format", choices=("csv", "markdown"), default="csv")
        p.add_argument("--out")
        p.set_defaults(func=cmd_tables)
    p = sub.add_parser("filter-export", help="write prototype taps as CSV")
    p.add_argument("--filter", required=True, choices=[k.value for k in filters.FilterKind])
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_filter_export)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, filters.UnsupportedDesignError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
