import time
from pathlib import Path

import numpy as np
import pytest

from insarchain.pipeline import config_from_dict, run_pipeline
from insarchain.synthstack import load_truth_velocity

GOLDEN = Path(__file__).parent / "golden"

ACCEPTANCE_LINES = []

# a 40 x 40 scene that runs end to end in about a second
SMALL_SCENE = dict(grid_size=40, n_pixels=600, n_epochs=12, subsidence_center=[20.0, 20.0],
                   subsidence_sigma_px=5.0, uplift_center=[32.0, 8.0], uplift_sigma_px=3.0,
                   station_pixel=[5.0, 5.0], hills=[[8.0, 32.0, 6.0, 80.0]])


def record(criterion, name, ok, detail=""):
    """Remember one acceptance line; they are echoed in the terminal summary."""
    line = f"ACCEPTANCE {criterion} {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class SceneRun:
    def __init__(self, result, out, seconds):
        self.result = result
        self.out = out
        self.seconds = seconds
        pixels, velocity = load_truth_velocity(out / "truth.npz")
        self.truth_velocity = velocity[result.product.pixel_id]
        self.truth_pixels = pixels

    @property
    def csv_bytes(self):
        return (self.out / "velocity_los.csv").read_bytes()


def run_scene(out, seed=0, **scene):
    cfg = config_from_dict({"output_dir": str(out), "seed": seed, "scene": scene})
    t0 = time.perf_counter()
    result = run_pipeline(cfg)
    return SceneRun(result, Path(out), time.perf_counter() - t0)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    """The default synthetic scene pushed through the whole pipeline once per session."""
    return run_scene(tmp_path_factory.mktemp("default_scene"))


@pytest.fixture(scope="session")
def small_run(tmp_path_factory):
    return run_scene(tmp_path_factory.mktemp("small_scene"), seed=7, **SMALL_SCENE)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
