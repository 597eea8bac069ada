"""Command-line entry point: ``insarchain {simulate,run,stats,export,plot}``.

Exit status is 0 on success, 1 for invalid configuration or input files and
2 for failures while processing.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, georef, tsinvert
from .errors import ConfigError, FormatError, InsarChainError, StageError
from .geomodel import ViewGeometry
from .pipeline import (CSV_NAME, CSV_NOGIA_NAME, atomic_text, csv_text, load_config, read_csv,
                       run_pipeline, simulate_inputs, write_csv)

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--verbose", "-v", action="store_true", help="log stage progress to stderr")

    cfg = argparse.ArgumentParser(add_help=False)
    cfg.add_argument("--config", required=True, type=Path, help="YAML pipeline configuration")
    cfg.add_argument("--seed", type=_seed, help="override the configured seed")
    cfg.add_argument("--output", type=Path, help="override the configured output directory")

    p = _Parser(prog="insarchain", description="Sparse-pixel InSAR time-series processing chain.")
    p.add_argument("--version", action="version", version=f"insarchain {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common, cfg],
                       help="write a synthetic stack, truth and auxiliary inputs")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("run", parents=[common, cfg], help="run the full pipeline")
    r.add_argument("--skip-gia", action="store_true", help="do not produce the GIA-removed variant")
    r.set_defaults(func=cmd_run)

    st = sub.add_parser("stats", parents=[common], help="summary statistics of a product")
    st.add_argument("product", type=Path, help="product.npz or a CSV product")
    st.add_argument("--cdf", action="store_true", help="include the full CDF table")
    st.set_defaults(func=cmd_stats)

    ex = sub.add_parser("export", parents=[common], help="write CSV and time series from a product")
    ex.add_argument("product", type=Path, help="product.npz written by 'run'")
    ex.add_argument("--output", type=Path, required=True)
    ex.add_argument("--gia-grid", type=Path, help="also write the GIA-removed CSV")
    ex.add_argument("--skip-gia", action="store_true")
    ex.add_argument("--incidence", type=float, default=38.9,
                    help="incidence angle for the GIA projection (deg)")
    ex.set_defaults(func=cmd_export)

    pl = sub.add_parser("plot", parents=[common], help="write CDF and velocity-map tables")
    pl.add_argument("product", type=Path)
    pl.add_argument("--output", type=Path, required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def _load_cfg(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.output is not None:
        cfg = replace(cfg, output_dir=args.output)
    return cfg


def cmd_simulate(args):
    files = simulate_inputs(_load_cfg(args))
    for name, path in files.items():
        print(f"{name}: {path}")
    return EXIT_OK


def cmd_run(args):
    cfg = _load_cfg(args)
    if args.skip_gia:
        cfg = replace(cfg, skip_gia=True)
    result = run_pipeline(cfg)
    print(json.dumps(result.stats, indent=2, sort_keys=True))
    for name, path in sorted(result.files.items()):
        print(f"{name}: {path}")
    return EXIT_OK


def _velocities(path):
    if path.suffix == ".npz":
        try:
            return tsinvert.load_product(path).velocity_mm_yr
        except (OSError, ValueError, KeyError) as exc:
            raise FormatError(f"{path}: {exc}") from exc
    return read_csv(path)[:, 3] * 10.0


def cmd_stats(args):
    fs = georef.field_stats(_velocities(args.product))
    out = fs.as_dict()
    if args.cdf:
        out["cdf"] = [[float(v), float(f)] for v, f in zip(fs.cdf_values, fs.cdf_fractions)]
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def _load_product(path):
    try:
        return tsinvert.load_product(path)
    except (OSError, ValueError, KeyError) as exc:
        raise FormatError(f"{path}: {exc}") from exc


def cmd_export(args):
    prod = _load_product(args.product)
    out = args.output
    n = write_csv(prod, out / CSV_NAME)
    print(f"csv: {out / CSV_NAME} ({n} rows)")
    if args.gia_grid is not None and not args.skip_gia:
        grid = georef.read_gia_grid(args.gia_grid)
        nogia = georef.subtract_gia(prod, grid, ViewGeometry(args.incidence))
        write_csv(nogia, out / CSV_NOGIA_NAME)
        print(f"csv_gia_removed: {out / CSV_NOGIA_NAME}")
    if prod.displacement_cm is not None:
        atomic_text(out / "timeseries.txt", tsinvert.timeseries_text(prod))
        print(f"timeseries: {out / 'timeseries.txt'}")
    return EXIT_OK


def cmd_plot(args):
    v = _velocities(args.product)
    fs = georef.field_stats(v)
    cdf = ["# insarchain-cdf v1", "velocity_mm_yr,fraction"]
    cdf += [f"{x:.6f},{f:.6f}" for x, f in zip(fs.cdf_values, fs.cdf_fractions)]
    atomic_text(args.output / "cdf.txt", "\n".join(cdf) + "\n")
    if args.product.suffix == ".npz":
        prod = _load_product(args.product)
        text = csv_text(prod)
    else:
        text = args.product.read_text(encoding="utf-8")
    rows = ["# insarchain-velocity-map v1", "lon,lat,velocity_mm_yr"]
    for line in text.splitlines():
        lon, lat, _, rate, _ = line.split(",")
        rows.append(f"{lon},{lat},{float(rate) * 10.0:.5f}")
    atomic_text(args.output / "velocity_map.txt", "\n".join(rows) + "\n")
    print(f"cdf: {args.output / 'cdf.txt'}")
    print(f"velocity_map: {args.output / 'velocity_map.txt'}")
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StageError as exc:
        cause = exc.cause
        code = EXIT_VALIDATION if isinstance(cause, (ConfigError, FormatError)) else EXIT_RUNTIME
        print(f"error: {exc}", file=sys.stderr)
        return code
    except FormatError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InsarChainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - keep the documented exit status
        if args.verbose:
            logging.getLogger("insarchain").exception("unexpected failure")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
