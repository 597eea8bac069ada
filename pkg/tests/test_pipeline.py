import json
import os
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
import yaml

from insarchain import pipeline as pl
from insarchain.errors import ConfigError, EmptyProduct, IoFailure, StageError
from insarchain.synthstack import null_scene_params
from insarchain.tsinvert import DisplacementProduct, load_product

from conftest import GOLDEN, SMALL_SCENE, run_scene


def one_pixel(lon=-73.91, lat=40.74, inc=38.9, rate_mm=-2.57, std_mm=0.02):
    a = lambda v: np.array([v], float)  # noqa: E731
    return DisplacementProduct(np.array([0]), a(0), a(0), a(lon), a(lat), a(inc), a(rate_mm), a(std_mm))


# -- CSV ------------------------------------------------------------------------------

def test_csv_example_row_matches_golden(tmp_path):
    n = pl.write_csv(one_pixel(), tmp_path / "x.csv")
    assert n == 1
    assert (tmp_path / "x.csv").read_bytes() == (GOLDEN / "example_row.csv").read_bytes()


def test_csv_signed_zero_and_nan_rows(tmp_path):
    p = one_pixel(rate_mm=-1e-9)
    assert pl.csv_text(p).split(",")[3] == "0.000000"
    two = DisplacementProduct(np.arange(2), np.zeros(2), np.zeros(2), np.array([1.0, 2.0]), np.zeros(2),
                              np.full(2, 38.9), np.array([np.nan, 1.0]), np.array([np.nan, 0.1]))
    assert pl.csv_text(two) == "2.000000,0.000000,38.9000,0.100000,0.010000\n"


def test_empty_product_writes_nothing(tmp_path):
    empty = one_pixel().take(np.array([], dtype=int))
    with pytest.raises(EmptyProduct):
        pl.write_csv(empty, tmp_path / "x.csv")
    assert not (tmp_path / "x.csv").exists() and not list(tmp_path.iterdir())


def test_csv_round_trip(tmp_path, rng):
    n = 30
    p = DisplacementProduct(np.arange(n), np.zeros(n), np.zeros(n), rng.uniform(-74, -73, n),
                            rng.uniform(40, 41, n), rng.uniform(30, 45, n), rng.normal(0, 10, n),
                            rng.uniform(0.01, 1, n))
    pl.write_csv(p, tmp_path / "x.csv")
    back = pl.read_csv(tmp_path / "x.csv")
    assert back.shape == (n, 5)
    assert np.allclose(back[:, 0], p.lon, atol=5e-7) and np.allclose(back[:, 2], p.incidence_deg, atol=5e-5)
    assert np.allclose(back[:, 3], p.velocity_mm_yr / 10, atol=5e-7)


def test_unwritable_target_is_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoFailure):
        pl.write_csv(one_pixel(), blocker / "x.csv")


def test_atomic_write_leaves_no_temp_on_failure(tmp_path):
    def boom(fh):
        fh.write(b"partial")
        raise RuntimeError("stop")
    with pytest.raises(RuntimeError):
        pl.atomic_write(tmp_path / "a.txt", boom)
    assert list(tmp_path.iterdir()) == []


# -- configuration ------------------------------------------------------------------------

BASE = {"output_dir": "out", "scene": {}}


@pytest.mark.parametrize("patch, field", [
    ({"thresholds": {"perp_max_m": -1}}, "thresholds.perp_max_m"),
    ({"thresholds": {"temp_max_days": 0}}, "thresholds.temp_max_days"),
    ({"thresholds": {"coherence": 1.5}}, "thresholds.coherence"),
    ({"thresholds": {"perp_max_m": "150"}}, "thresholds.perp_max_m"),
    ({"thresholds": {"perp_max_m": True}}, "thresholds.perp_max_m"),
    ({"thresholds": {"bogus": 1}}, "thresholds.bogus"),
    ({"corrections": {"levels": 0}}, "corrections.levels"),
    ({"unwrap": {"cost": "magic"}}, "unwrap.cost"),
    ({"inversion": {"reweighting": "x"}}, "inversion.reweighting"),
    ({"calibration": {"radius_m": -5}}, "calibration.radius_m"),
    ({"seed": -1}, "seed"),
    ({"seed": 2 ** 64}, "seed"),
    ({"seed": 1.5}, "seed"),
    ({"typo": 1}, "typo"),
    ({"scene": {"n_pixelz": 3}}, "scene.n_pixelz"),
    ({"scene": {"noise_sigma_rad": -1.0}}, "scene"),
    ({"stack": "s.npz"}, "scene"),
    ({"geometry": {"incidence_deg": 30.0}}, "geometry"),
    ({"skip_gia": "yes"}, "skip_gia"),
    ({"output_dir": ""}, "output_dir"),
])
def test_config_errors_name_the_field(patch, field):
    with pytest.raises(ConfigError) as info:
        pl.config_from_dict({**BASE, **patch})
    assert info.value.field == field
    assert str(info.value).startswith(field)


def test_config_requires_input_and_output():
    with pytest.raises(ConfigError) as info:
        pl.config_from_dict({"output_dir": "out"})
    assert info.value.field == "scene"
    with pytest.raises(ConfigError) as info:
        pl.config_from_dict({"scene": {}})
    assert info.value.field == "output_dir"


def test_config_defaults_and_paths(tmp_path):
    cfg = pl.config_from_dict({"output_dir": "out", "stack": "s.npz", "gia_grid": "/abs/g.txt"},
                              base_dir=tmp_path)
    assert cfg.output_dir == tmp_path / "out" and cfg.stack == tmp_path / "s.npz"
    assert cfg.gia_grid == Path("/abs/g.txt")
    assert (cfg.thresholds.perp_max_m, cfg.thresholds.temp_max_days, cfg.thresholds.coherence) == (150, 400, 0.7)
    assert cfg.seed == 0 and cfg.scene is None


def test_load_config_yaml(tmp_path):
    (tmp_path / "c.yaml").write_text("output_dir: o\nseed: 5\nscene:\n  grid_size: 20\n  n_pixels: 100\n")
    cfg = pl.load_config(tmp_path / "c.yaml")
    assert cfg.seed == 5 and cfg.scene.grid_size == 20 and cfg.output_dir == tmp_path / "o"
    (tmp_path / "bad.yaml").write_text("output_dir: [unclosed\n")
    with pytest.raises(ConfigError):
        pl.load_config(tmp_path / "bad.yaml")
    with pytest.raises(ConfigError):
        pl.load_config(tmp_path / "missing.yaml")


def test_resolved_config_round_trips(small_run):
    data = json.loads((small_run.out / "config.resolved.json").read_text())
    cfg = pl.config_from_dict(data)
    assert cfg.to_dict() == data


# -- end-to-end on a small scene ---------------------------------------------------------------

def test_small_scene_matches_golden(small_run):
    assert small_run.csv_bytes == (GOLDEN / "small_scene_seed7.csv").read_bytes()
    nogia = (small_run.out / pl.CSV_NOGIA_NAME).read_bytes()
    assert nogia == (GOLDEN / "small_scene_seed7_gia_removed.csv").read_bytes()


def test_csv_rows_equal_elite_count(small_run):
    rows = small_run.csv_bytes.decode().splitlines()
    assert len(rows) == small_run.result.reports["elite"]["n_pixels_out"]
    assert all(len(r.split(",")) == 5 for r in rows)


def test_every_stage_reports_counts_and_counts_never_grow(small_run):
    reports = sorted((small_run.out / "reports").glob("*.json"))
    names = [json.loads(p.read_text())["stage"] for p in reports]
    assert names == ["inputs", "pairs", "simulate", "elite", "unwrap", "atmosphere", "orbit",
                     "invert", "calibrate", "gia", "stats", "export"]
    pixels, pairs = [], []
    for p in reports:
        rep = json.loads(p.read_text())
        assert "n_pixels_out" in rep or "n_pairs_out" in rep
        if "n_pixels_in" in rep:
            assert rep["n_pixels_out"] <= rep["n_pixels_in"]
        if "n_pixels_out" in rep:
            pixels.append(rep["n_pixels_out"])
        if "n_pairs_out" in rep:
            pairs.append(rep["n_pairs_out"])
    assert pixels == sorted(pixels, reverse=True)
    assert pairs == sorted(pairs, reverse=True)


def test_seeded_runs_are_byte_identical(tmp_path, small_run):
    again = run_scene(tmp_path, seed=7, **SMALL_SCENE)
    assert again.csv_bytes == small_run.csv_bytes
    for name in ("timeseries.txt", "corrections.csv"):
        assert (again.out / name).read_bytes() == (small_run.out / name).read_bytes()


def test_different_seed_differs(tmp_path, small_run):
    assert run_scene(tmp_path, seed=8, **SMALL_SCENE).csv_bytes != small_run.csv_bytes


def test_products_written_and_consistent(small_run):
    prod = load_product(small_run.out / "product.npz")
    assert np.array_equal(prod.velocity_mm_yr, small_run.result.product.velocity_mm_yr)
    assert pl.csv_text(prod).encode() == small_run.csv_bytes
    text = (small_run.out / "corrections.csv").read_text().splitlines()
    assert text[0] == "# insarchain-corrections v1"


def test_null_scene_gives_zero_rates(tmp_path):
    cfg = pl.config_from_dict({"output_dir": str(tmp_path), "scene": {
        **{k: v for k, v in SMALL_SCENE.items()}, **_null_overrides()}})
    pl.run_pipeline(cfg)
    rows = (tmp_path / pl.CSV_NAME).read_text().splitlines()
    assert rows and all(r.split(",")[3] == "0.000000" for r in rows)


def _null_overrides():
    p = null_scene_params()
    return {k: list(getattr(p, k)) if isinstance(getattr(p, k), tuple) else getattr(p, k)
            for k in ("subsidence_peak_mm_yr", "uplift_peak_mm_yr", "gia_vertical_mm_yr",
                      "atmo_sigma_rad_per_m", "ramp_sigma", "dem_error_sigma_m", "noise_sigma_rad",
                      "decorrelated_fraction")}


def test_skip_gia(tmp_path):
    cfg = pl.config_from_dict({"output_dir": str(tmp_path), "seed": 7, "skip_gia": True,
                               "scene": SMALL_SCENE})
    res = pl.run_pipeline(cfg)
    assert res.product_nogia is None and not (tmp_path / pl.CSV_NOGIA_NAME).exists()
    assert (tmp_path / pl.CSV_NAME).read_bytes() == (GOLDEN / "small_scene_seed7.csv").read_bytes()


def test_simulate_then_run_from_files_matches_scene_mode(tmp_path, small_run):
    cfg = pl.config_from_dict({"output_dir": str(tmp_path / "sim"), "seed": 7, "scene": SMALL_SCENE})
    files = pl.simulate_inputs(cfg)
    run_cfg = pl.load_config(files["config"])
    assert run_cfg.stack is not None and run_cfg.scene is None
    res = pl.run_pipeline(run_cfg)
    assert Path(res.files["csv"]).read_bytes() == small_run.csv_bytes


def test_gia_grid_not_covering_pixels_is_stage_error(tmp_path):
    (tmp_path / "g.txt").write_text("# insarchain-gia-grid v1\nnlon 2\nnlat 2\nlon 0 1\nlat 0 1\n"
                                    "rates\n0 0\n0 0\n")
    cfg = pl.config_from_dict({"output_dir": str(tmp_path / "o"), "seed": 7, "scene": SMALL_SCENE,
                               "gia_grid": str(tmp_path / "g.txt")})
    with pytest.raises(StageError) as info:
        pl.run_pipeline(cfg)
    assert info.value.stage == "gia" and info.value.hint
    assert not (tmp_path / "o" / pl.CSV_NAME).exists()


def test_far_station_is_calibrate_stage_error(tmp_path):
    (tmp_path / "t.txt").write_text("FAR,0.0,0.0,1.0,0.5\n")
    cfg = pl.config_from_dict({"output_dir": str(tmp_path / "o"), "seed": 7, "scene": SMALL_SCENE,
                               "gnss_tie": str(tmp_path / "t.txt")})
    with pytest.raises(StageError) as info:
        pl.run_pipeline(cfg)
    assert info.value.stage == "calibrate"


def test_corrections_can_be_switched_off(tmp_path):
    cfg = pl.config_from_dict({"output_dir": str(tmp_path), "seed": 7, "scene": SMALL_SCENE,
                               "corrections": {"atmosphere": False, "orbit": False}})
    res = pl.run_pipeline(cfg)
    assert "per_pair" not in res.reports["atmosphere"]
    assert res.reports["atmosphere"].get("applied") is False


def test_output_files_respect_umask(small_run):
    mode = os.stat(small_run.out / pl.CSV_NAME).st_mode & 0o777
    mask = os.umask(0)
    os.umask(mask)
    assert mode == 0o666 & ~mask


def test_config_file_with_stack_and_geometry(tmp_path, small_run):
    cfg = pl.config_from_dict({"output_dir": str(tmp_path / "sim"), "seed": 7, "scene": SMALL_SCENE})
    files = pl.simulate_inputs(cfg)
    data = yaml.safe_load(Path(files["config"]).read_text())
    assert data["geometry"]["incidence_deg"] == 38.9 and data["stack"] == "stack.npz"
    run_cfg = replace(pl.load_config(files["config"]), skip_gia=True)
    assert run_cfg.view_geometry.incidence_deg == 38.9
