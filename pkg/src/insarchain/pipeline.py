"""Configuration, stage orchestration and product serialization."""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import atmorb, georef, mcfunwrap, tsinvert
from .elitepix import assess_stack, select_elite
from .errors import ConfigError, EmptyProduct, FormatError, InsarChainError, IoFailure, StageError
from .geomodel import RadarConstants, ViewGeometry
from .pairnet import catalog_text, read_catalog, select_pairs
from .synthstack import (SceneParams, build_scene, generate_stack, load_stack, save_stack,
                         save_truth, station_lonlat, wrap)

log = logging.getLogger("insarchain")

CSV_NAME = "velocity_los.csv"
CSV_NOGIA_NAME = "velocity_los_gia_removed.csv"


# -- configuration -------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    perp_max_m: float = 150.0
    temp_max_days: float = 400.0
    coherence: float = 0.7

    def validate(self, prefix):
        for name in ("perp_max_m", "temp_max_days"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{prefix}.{name}", "must be positive")
        if not 0.0 < self.coherence <= 1.0:
            raise ConfigError(f"{prefix}.coherence", "must lie in (0, 1]")


@dataclass(frozen=True)
class Corrections:
    atmosphere: bool = True
    orbit: bool = True
    robust_orbit: bool = True
    levels: int = 4

    def validate(self, prefix):
        if not 1 <= self.levels <= 8:
            raise ConfigError(f"{prefix}.levels", "must be between 1 and 8")


@dataclass(frozen=True)
class Unwrap:
    cost: str = "inverse_length"
    use_quality: bool = False

    def validate(self, prefix):
        if self.cost not in ("inverse_length", "unit"):
            raise ConfigError(f"{prefix}.cost", "must be 'inverse_length' or 'unit'")


@dataclass(frozen=True)
class Inversion:
    reweighting: str = "tukey"
    max_iter: int = 30

    def validate(self, prefix):
        if self.reweighting not in ("tukey", "none"):
            raise ConfigError(f"{prefix}.reweighting", "must be 'tukey' or 'none'")
        if self.max_iter < 1:
            raise ConfigError(f"{prefix}.max_iter", "must be >= 1")


@dataclass(frozen=True)
class Calibration:
    radius_m: float = 200.0

    def validate(self, prefix):
        if not self.radius_m > 0:
            raise ConfigError(f"{prefix}.radius_m", "must be positive")


@dataclass(frozen=True)
class Geometry:
    incidence_deg: float = 38.9
    heading_deg: float = 347.0
    wavelength_m: float = 0.0554658

    def validate(self, prefix):
        try:
            ViewGeometry(self.incidence_deg, self.heading_deg)
            RadarConstants(self.wavelength_m)
        except ValueError as exc:
            raise ConfigError(prefix, str(exc)) from None


SECTIONS = {"thresholds": Thresholds, "corrections": Corrections, "unwrap": Unwrap,
            "inversion": Inversion, "calibration": Calibration, "geometry": Geometry}


@dataclass(frozen=True)
class PipelineConfig:
    output_dir: Path
    seed: int = 0
    scene: SceneParams | None = None
    stack: Path | None = None
    catalog: Path | None = None
    gnss_tie: Path | None = None
    gia_grid: Path | None = None
    skip_gia: bool = False
    thresholds: Thresholds = field(default_factory=Thresholds)
    corrections: Corrections = field(default_factory=Corrections)
    unwrap: Unwrap = field(default_factory=Unwrap)
    inversion: Inversion = field(default_factory=Inversion)
    calibration: Calibration = field(default_factory=Calibration)
    geometry: Geometry = field(default_factory=Geometry)

    @property
    def view_geometry(self):
        if self.scene is not None:
            return ViewGeometry(self.scene.incidence_deg, self.scene.heading_deg)
        return ViewGeometry(self.geometry.incidence_deg, self.geometry.heading_deg)

    @property
    def radar(self):
        wl = self.scene.wavelength_m if self.scene is not None else self.geometry.wavelength_m
        return RadarConstants(wl)

    def to_dict(self):
        out = {"output_dir": str(self.output_dir), "seed": self.seed, "skip_gia": self.skip_gia}
        for name in ("stack", "catalog", "gnss_tie", "gia_grid"):
            if getattr(self, name) is not None:
                out[name] = str(getattr(self, name))
        if self.scene is not None:
            out["scene"] = {k: _plain(v) for k, v in asdict(self.scene).items()}
        for name in SECTIONS:
            if name == "geometry" and self.scene is not None:
                continue    # a scene carries its own geometry
            out[name] = asdict(getattr(self, name))
        return out


def _plain(value):
    return [_plain(v) for v in value] if isinstance(value, (tuple, list)) else value


def _check_type(value, typ, name):
    if typ is bool:
        ok = isinstance(value, bool)
    elif typ is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif typ is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif typ is str:
        ok = isinstance(value, str)
    else:
        ok = True
    if not ok:
        raise ConfigError(name, f"expected {typ.__name__}, got {type(value).__name__}")
    return value


def _section(cls, data, prefix):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(prefix, "must be a mapping")
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
    kwargs = {}
    for key, value in data.items():
        typ = type(known[key].default)
        kwargs[key] = _check_type(value, typ, f"{prefix}.{key}")
    obj = cls(**kwargs)
    obj.validate(prefix)
    return obj


def _scene(data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("scene", "must be a mapping of scene parameters")
    known = {f.name: f for f in fields(SceneParams)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"scene.{key}", "unknown key")
        default = known[key].default
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"scene.{key}", "expected a list")
            kwargs[key] = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        else:
            kwargs[key] = _check_type(value, type(default), f"scene.{key}")
    try:
        return SceneParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("scene", str(exc)) from None


def config_from_dict(data, base_dir=".") -> PipelineConfig:
    """Validate a parsed config mapping; relative paths resolve against ``base_dir``."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    allowed = {"output_dir", "seed", "scene", "stack", "catalog", "gnss_tie", "gia_grid",
               "skip_gia", *SECTIONS}
    for key in data:
        if key not in allowed:
            raise ConfigError(key, "unknown key")
    base = Path(base_dir)

    def path(key, required=False):
        value = data.get(key)
        if value is None:
            if required:
                raise ConfigError(key, "is required")
            return None
        if not isinstance(value, str) or not value.strip():
            raise ConfigError(key, "must be a non-empty path")
        p = Path(value)
        return p if p.is_absolute() else base / p

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed", "must be an integer in [0, 2**64)")
    has_scene, has_stack = "scene" in data, data.get("stack") is not None
    if has_scene == has_stack:
        raise ConfigError("scene", "give exactly one of 'scene' (simulate) or 'stack' (load)")
    if has_scene and "geometry" in data:
        raise ConfigError("geometry", "simulated runs take geometry from the scene section")
    skip_gia = _check_type(data.get("skip_gia", False), bool, "skip_gia")
    sections = {name: _section(cls, data.get(name), name) for name, cls in SECTIONS.items()}
    return PipelineConfig(
        output_dir=path("output_dir", required=True), seed=seed,
        scene=_scene(data["scene"]) if has_scene else None, stack=path("stack"),
        catalog=path("catalog"), gnss_tie=path("gnss_tie"), gia_grid=path("gia_grid"),
        skip_gia=skip_gia, **sections,
    )


def load_config(path) -> PipelineConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("--config", f"{path} is not valid YAML: {exc}") from None
    return config_from_dict(data if data is not None else {}, path.parent)


# -- atomic file output ----------------------------------------------------------

def _file_mode():
    """0o666 filtered by the process umask (mkstemp alone would leave 0o600)."""
    mask = os.umask(0)
    os.umask(mask)
    return 0o666 & ~mask


def atomic_write(path, write):
    """Call ``write(fh)`` on a temp file in the target directory, then rename into place."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            write(fh)
        os.chmod(tmp, _file_mode())
        os.replace(tmp, path)
    except BaseException as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        if isinstance(exc, OSError):
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        raise


def atomic_text(path, text):
    atomic_write(path, lambda fh: fh.write(text.encode("utf-8")))


def atomic_json(path, obj):
    atomic_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _fmt(value, spec):
    s = format(value, spec)
    # "-0.000000" carries no information and would make golden files sign-sensitive
    return s[1:] if s.startswith("-") and float(s) == 0.0 else s


def csv_text(product) -> str:
    """Product rows as ``lon,lat,incidence,rate_cm_yr,std_cm_yr`` text."""
    keep = np.flatnonzero(np.isfinite(product.velocity_mm_yr) & np.isfinite(product.velocity_std_mm_yr))
    if not len(keep):
        raise EmptyProduct("product has no valid pixels; refusing to write an empty CSV")
    rows = []
    for k in keep:
        rows.append(",".join((
            _fmt(product.lon[k], ".6f"), _fmt(product.lat[k], ".6f"),
            _fmt(product.incidence_deg[k], ".4f"),
            _fmt(product.velocity_mm_yr[k] / 10.0, ".6f"),
            _fmt(product.velocity_std_mm_yr[k] / 10.0, ".6f"),
        )))
    return "\n".join(rows) + "\n"


def write_csv(product, path) -> int:
    """Write the 5-column CSV product; returns the row count."""
    text = csv_text(product)
    atomic_text(path, text)
    return text.count("\n")


def read_csv(path) -> np.ndarray:
    """(rows, 5) array of a CSV product (lon, lat, incidence, rate cm/yr, std cm/yr)."""
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise IoFailure(f"cannot read CSV product {path}: {exc}") from exc
    except ValueError as exc:
        raise FormatError(f"{path}: not a CSV product ({exc})") from exc
    if arr.shape[1] != 5:
        raise FormatError(f"{path}: expected 5 columns, found {arr.shape[1]}")
    return arr


def corrections_text(pairs, report) -> str:
    lines = ["# insarchain-corrections v1",
             "pair,epoch_i,epoch_j,atmo_rad_per_m,ramp_a0,ramp_a1,ramp_a2,rms_before,rms_after"]
    for q, ((i, j), rec) in enumerate(zip(pairs, report)):
        ramp = rec.get("ramp_coeffs", [0.0, 0.0, 0.0])
        vals = [rec.get("atmo_aggregate_rad_per_m", 0.0), *ramp[:3], rec["rms_before"], rec["rms_after"]]
        lines.append(f"{q},{i},{j}," + ",".join(f"{v:.9e}" for v in vals))
    return "\n".join(lines) + "\n"


# -- stages --------------------------------------------------------------------

@dataclass
class RunResult:
    product: tsinvert.DisplacementProduct           # calibrated, GIA still in
    product_nogia: tsinvert.DisplacementProduct | None
    stats: dict
    files: dict
    reports: dict


class _Runner:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.output_dir)
        self.reports = {}
        self.files = {}
        self._n = 0

    def stage(self, name, fn, hint):
        t0 = time.perf_counter()
        log.info("stage %s: start", name)
        try:
            report, value = fn()
        except StageError:
            raise
        except (InsarChainError, ValueError, np.linalg.LinAlgError, RuntimeError) as exc:
            raise StageError(name, exc, hint) from exc
        self._n += 1
        report = {"stage": name, **report}
        path = self.out / "reports" / f"{self._n:02d}_{name}.json"
        atomic_json(path, report)
        self.reports[name] = report
        log.info("stage %s: done in %.2f s", name, time.perf_counter() - t0)
        return value


def _scene_inputs(cfg: PipelineConfig):
    """Simulate the stack and the auxiliary GNSS/GIA inputs a scene implies."""
    p = cfg.scene
    catalog = read_catalog(cfg.catalog) if cfg.catalog is not None else None
    truth, catalog = build_scene(p, cfg.seed, catalog)
    lon, lat = station_lonlat(p)
    tie = georef.GnssTie(p.station_id, lon, lat, p.gia_vertical_mm_yr, p.station_sigma_mm_yr)
    px = truth.pixels
    pad = 0.01
    grid = georef.GiaGrid.uniform(p.gia_vertical_mm_yr, (px.lon.min() - pad, px.lon.max() + pad),
                                  (px.lat.min() - pad, px.lat.max() + pad))
    return truth, catalog, tie, grid


def run_pipeline(cfg: PipelineConfig) -> RunResult:
    """Run every stage, writing reports, products and the CSV(s) under ``cfg.output_dir``."""
    r = _Runner(cfg)
    out = r.out
    geom, radar = cfg.view_geometry, cfg.radar
    th = cfg.thresholds
    state = {}

    def load_inputs():
        if cfg.scene is not None:
            truth, catalog, tie, grid = _scene_inputs(cfg)
            state.update(truth=truth, catalog=catalog, tie=tie, grid=grid)
            return {"mode": "simulate", "n_acquisitions": len(catalog),
                    "n_pixels_out": len(truth.pixels)}, None
        stack = load_stack(cfg.stack)
        if cfg.catalog is not None and read_catalog(cfg.catalog) != stack.catalog:
            raise ValueError("catalog file disagrees with the stack's acquisitions")
        state.update(stack=stack, catalog=stack.catalog)
        state["tie"] = georef.read_gnss_tie(cfg.gnss_tie) if cfg.gnss_tie is not None else None
        state["grid"] = georef.read_gia_grid(cfg.gia_grid) if cfg.gia_grid is not None else None
        return {"mode": "load", "n_acquisitions": len(stack.catalog), "n_pixels_out": stack.n_pixels,
                "n_pairs_out": len(stack.pairs)}, None

    r.stage("inputs", load_inputs, "check the stack/catalog/GNSS/GIA paths and file formats")
    if cfg.scene is not None:
        if cfg.gnss_tie is not None:
            state["tie"] = georef.read_gnss_tie(cfg.gnss_tie)
        if cfg.gia_grid is not None:
            state["grid"] = georef.read_gia_grid(cfg.gia_grid)

    def pairs_stage():
        ps = select_pairs(state["catalog"], th.perp_max_m, th.temp_max_days)
        n_in = len(state["catalog"]) * (len(state["catalog"]) - 1) // 2
        if "stack" in state:
            stack = state["stack"]
            allowed = set(ps.pairs)
            keep = [q for q, pr in enumerate(stack.pairs.pairs) if pr in allowed]
            n_in = len(stack.pairs)
            stack = stack.take_pairs(keep)
            state["stack"] = replace(stack, pairs=replace(stack.pairs, perp_max_m=th.perp_max_m,
                                                          temp_max_days=th.temp_max_days))
            ps = state["stack"].pairs
        if not len(ps):
            raise ValueError("no interferogram pairs satisfy the baseline thresholds")
        state["pairs"] = ps
        return {"n_pairs_in": n_in, "n_pairs_out": len(ps), "perp_max_m": th.perp_max_m,
                "temp_max_days": th.temp_max_days}, None

    r.stage("pairs", pairs_stage, "relax thresholds.perp_max_m or thresholds.temp_max_days")

    if "stack" not in state:
        def simulate():
            stack, _ = generate_stack(state["truth"], state["catalog"], state["pairs"])
            state["stack"] = stack
            atomic_write(out / "truth.npz", lambda fh: save_truth(state["truth"], fh))
            return {"n_pixels_out": stack.n_pixels, "n_pairs_out": len(stack.pairs),
                    "noise_sigma_rad": state["truth"].noise_sigma_rad}, None

        r.stage("simulate", simulate, "check the scene parameters")

    def elite_stage():
        stack = state["stack"]
        wrapped = stack if stack.wrapped else replace(stack, phase=wrap(stack.phase), wrapped=True)
        quality = assess_stack(wrapped, th.coherence)
        ids = np.array(select_elite(quality, th.coherence), dtype=np.int64)
        if len(ids) < 3:
            raise ValueError(f"only {len(ids)} pixels reach coherence {th.coherence}")
        coh = np.array([q.temporal_coherence for q in quality])
        state["stack"] = stack.take_pixels(ids)
        state["elite_ids"] = ids
        state["quality"] = coh[ids]
        return {"n_pixels_in": stack.n_pixels, "n_pixels_out": len(ids),
                "n_pairs_in": len(stack.pairs), "n_pairs_out": len(stack.pairs),
                "coherence_threshold": th.coherence,
                "coherence_median": float(np.median(coh))}, None

    r.stage("elite", elite_stage, "lower thresholds.coherence or check the stack for decorrelation")

    def unwrap_stage():
        stack = state["stack"]
        net = mcfunwrap.triangulate(stack.pixels.coords)
        n_res = 0
        if stack.wrapped:
            q = state["quality"] if cfg.unwrap.use_quality else None
            unw, counts = mcfunwrap.unwrap_stack(net, stack.phase, cfg.unwrap.cost, q)
            n_res = int(np.sum(counts))
            state["stack"] = replace(stack, phase=unw, wrapped=False)
        state["net"] = net
        return {"n_pixels_in": stack.n_pixels, "n_pixels_out": stack.n_pixels,
                "n_pairs_in": len(stack.pairs), "n_pairs_out": len(stack.pairs),
                "n_triangles": net.n_triangles, "n_arcs": net.n_edges,
                "total_residues": n_res, "already_unwrapped": not stack.wrapped,
                "cost": cfg.unwrap.cost}, None

    r.stage("unwrap", unwrap_stage, "the elite pixels may be collinear; lower thresholds.coherence")

    def corrections_stage(kind):
        def run():
            stack = state["stack"]
            c = cfg.corrections
            counts = {"n_pixels_in": stack.n_pixels, "n_pixels_out": stack.n_pixels,
                      "n_pairs_in": len(stack.pairs), "n_pairs_out": len(stack.pairs)}
            if not getattr(c, kind):
                return {"applied": False, **counts}, None
            px = stack.pixels
            corrected, rep = atmorb.correct_stack(
                stack.phase, px.elevation_m, px.coords, c.levels,
                atmosphere=kind == "atmosphere", orbit=kind == "orbit", robust_orbit=c.robust_orbit)
            state["stack"] = replace(stack, phase=corrected)
            state.setdefault("corr", [dict() for _ in rep])
            for acc, rec in zip(state["corr"], rep):
                before = acc.get("rms_before", rec["rms_before"])
                acc.update(rec)
                acc["rms_before"] = before
            key = "atmo_aggregate_rad_per_m" if kind == "atmosphere" else "ramp_coeffs"
            return {"applied": True, **counts,
                    "per_pair": [{key: rec[key], "rms_before": rec["rms_before"],
                                  "rms_after": rec["rms_after"]} for rec in rep]}, None
        return run

    r.stage("atmosphere", corrections_stage("atmosphere"),
            "disable corrections.atmosphere or lower corrections.levels")
    r.stage("orbit", corrections_stage("orbit"), "disable corrections.orbit")
    if "corr" in state:
        text = corrections_text(state["stack"].pairs.pairs, state["corr"])
        atomic_text(out / "corrections.csv", text)
        r.files["corrections"] = str(out / "corrections.csv")

    def invert_stage():
        stack = state["stack"]
        prod = tsinvert.invert_stack(stack, geom, radar, reweighting=cfg.inversion.reweighting,
                                     max_iter=cfg.inversion.max_iter)
        prod.pixel_id = state["elite_ids"].copy()
        state["product"] = prod
        flagged = int(np.sum(prod.flags != tsinvert.FLAG_OK))
        return {"n_pixels_in": stack.n_pixels, "n_pixels_out": stack.n_pixels - flagged,
                "n_pairs_in": len(stack.pairs), "n_flagged": flagged,
                "n_epochs": len(prod.epochs),
                "excluded_epochs": [d.isoformat() for d in prod.excluded_epochs]}, None

    r.stage("invert", invert_stage, "check that the pair network is connected")

    def calibrate_stage():
        prod = state["product"]
        tie = state.get("tie")
        if tie is None:
            return {"applied": False, "n_pixels_in": len(prod), "n_pixels_out": len(prod)}, None
        cal, offset, n_near = georef.calibrate_to_gnss(prod, tie, geom, cfg.calibration.radius_m)
        state["product"] = cal
        return {"applied": True, "station": tie.station_id, "offset_mm_yr": offset,
                "n_tie_pixels": n_near, "n_pixels_in": len(prod), "n_pixels_out": len(cal)}, None

    r.stage("calibrate", calibrate_stage, "raise calibration.radius_m or check the station coordinates")

    skip_gia = cfg.skip_gia or state.get("grid") is None
    if not skip_gia:
        def gia_stage():
            prod = state["product"]
            state["nogia"] = georef.subtract_gia(prod, state["grid"], geom)
            return {"n_pixels_in": len(prod), "n_pixels_out": len(prod)}, None

        r.stage("gia", gia_stage, "the GIA grid must cover every pixel; extend it or pass --skip-gia")

    def stats_stage():
        prod = state["product"]
        rep = {"n_pixels_in": len(prod), "n_pixels_out": len(prod),
               "los": georef.field_stats(prod).as_dict()}
        if "nogia" in state:
            rep["los_gia_removed"] = georef.field_stats(state["nogia"]).as_dict()
        return rep, None

    r.stage("stats", stats_stage, "no valid pixels survived the inversion")

    def export_stage():
        prod = state["product"]
        n = write_csv(prod, out / CSV_NAME)
        r.files["csv"] = str(out / CSV_NAME)
        if "nogia" in state:
            write_csv(state["nogia"], out / CSV_NOGIA_NAME)
            r.files["csv_gia_removed"] = str(out / CSV_NOGIA_NAME)
        atomic_write(out / "product.npz", lambda fh: tsinvert.save_product(prod, fh))
        atomic_text(out / "timeseries.txt", tsinvert.timeseries_text(prod))
        r.files.update(product=str(out / "product.npz"), timeseries=str(out / "timeseries.txt"))
        return {"n_pixels_in": len(prod), "n_pixels_out": n, "files": sorted(r.files)}, None

    r.stage("export", export_stage, "check that the output directory is writable")
    atomic_json(out / "config.resolved.json", cfg.to_dict())
    stats = {k: v for k, v in r.reports["stats"].items() if k.startswith("los")}
    return RunResult(state["product"], state.get("nogia"), stats, r.files, r.reports)


# -- simulate-only entry point --------------------------------------------------

def simulate_inputs(cfg: PipelineConfig) -> dict:
    """Write a simulated stack plus its catalog, truth, GNSS tie and GIA grid; returns paths."""
    if cfg.scene is None:
        raise ConfigError("scene", "simulate needs a scene section")
    out = Path(cfg.output_dir)
    truth, catalog, tie, grid = _scene_inputs(cfg)
    ps = select_pairs(catalog, cfg.thresholds.perp_max_m, cfg.thresholds.temp_max_days)
    stack, _ = generate_stack(truth, catalog, ps)
    files = {name: out / fname for name, fname in (
        ("stack", "stack.npz"), ("truth", "truth.npz"), ("catalog", "catalog.txt"),
        ("gnss_tie", "gnss_tie.txt"), ("gia_grid", "gia_grid.txt"), ("config", "run.yaml"))}
    atomic_write(files["stack"], lambda fh: save_stack(stack, fh))
    atomic_write(files["truth"], lambda fh: save_truth(truth, fh))
    atomic_text(files["catalog"], catalog_text(catalog))
    atomic_text(files["gnss_tie"], georef.gnss_tie_text(tie))
    atomic_text(files["gia_grid"], georef.gia_grid_text(grid))
    p = cfg.scene
    run_cfg = {
        "output_dir": "run", "seed": cfg.seed, "stack": "stack.npz", "catalog": "catalog.txt",
        "gnss_tie": "gnss_tie.txt", "gia_grid": "gia_grid.txt",
        "geometry": {"incidence_deg": p.incidence_deg, "heading_deg": p.heading_deg,
                     "wavelength_m": p.wavelength_m},
        **{name: asdict(getattr(cfg, name)) for name in SECTIONS if name != "geometry"},
    }
    atomic_text(files["config"], yaml.safe_dump(run_cfg, sort_keys=False))
    return {k: str(v) for k, v in files.items()}
