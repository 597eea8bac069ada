import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings, strategies as st

from insarchain.elitepix import (PixelQuality, assess_stack, model_phase, select_elite,
                                 temporal_coherence)
from insarchain.errors import DimensionMismatch
from insarchain.pairnet import select_pairs
from insarchain.synthstack import SceneParams, build_scene, generate_stack, wrap


def test_perfect_model_gives_one():
    phi = np.random.default_rng(0).uniform(-np.pi, np.pi, (50, 7))
    assert np.allclose(temporal_coherence(phi, phi), 1.0)


def test_half_pairs_flipped_gives_zero():
    model = np.zeros((40, 3))
    obs = model.copy()
    obs[::2] += np.pi
    assert np.allclose(temporal_coherence(obs, model), 0.0, atol=1e-12)


def test_random_phase_coherence_monte_carlo():
    # 10^4 pixels of pure noise over 200 pairs. N |mean|^2 is close to Exp(1), so
    # P(coh < c) = 1 - exp(-200 c^2): 0.9439 at c = 0.12 and 0.99 at c = 0.1517.
    rng = np.random.default_rng(2024)
    obs = rng.uniform(-np.pi, np.pi, (200, 10_000))
    coh = temporal_coherence(obs, np.zeros_like(obs))
    assert abs(np.mean(coh < 0.12) - (1 - np.exp(-200 * 0.12 ** 2))) < 0.01
    assert np.mean(coh < 0.1517) > 0.985
    assert abs(coh.mean() - np.sqrt(np.pi / 800)) < 0.003
    assert np.all(coh < 0.7)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        temporal_coherence(np.zeros((3, 2)), np.zeros((2, 3)))


def test_select_examples():
    q = [PixelQuality(1, 0.9), PixelQuality(2, 0.5), PixelQuality(3, 0.75)]
    assert select_elite(q, 0.7) == [1, 3]
    assert select_elite(q, 0.0) == [1, 2, 3]
    assert select_elite(q + [PixelQuality(4, 1.0)], 1.0) == [4]
    with pytest.raises(ValueError):
        select_elite(q, 1.5)
    with pytest.raises(ValueError):
        PixelQuality(0, 1.2)


@given(st.lists(st.floats(0, 1), max_size=40), st.floats(0, 1), st.floats(0, 1))
def test_threshold_monotone(cohs, t1, t2):
    lo, hi = sorted((t1, t2))
    q = [PixelQuality(k, c) for k, c in enumerate(cohs)]
    assert set(select_elite(q, hi)) <= set(select_elite(q, lo))


def small_stack(seed=0, **kw):
    p = SceneParams(grid_size=40, n_pixels=600, n_epochs=14, **kw)
    truth, cat = build_scene(p, seed)
    stack, _ = generate_stack(truth, cat, select_pairs(cat))
    return truth, stack


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_coherence_invariant_to_per_pair_constants(seed):
    truth, stack = small_stack(1)
    shift = np.random.default_rng(seed).uniform(-10, 10, size=(len(stack.pairs), 1))
    a = np.array([q.temporal_coherence for q in assess_stack(stack)])
    moved = replace(stack, phase=wrap(stack.phase + shift))
    b = np.array([q.temporal_coherence for q in assess_stack(moved)])
    assert np.max(np.abs(a - b)) < 1e-9


def test_separates_decorrelated_pixels():
    truth, stack = small_stack(3)
    sel = np.array(select_elite(assess_stack(stack), 0.7))
    assert not truth.decorrelated[sel].any()
    assert len(sel) >= 0.95 * (~truth.decorrelated).sum()


def test_selection_deterministic():
    _, s1 = small_stack(4)
    _, s2 = small_stack(4)
    assert select_elite(assess_stack(s1)) == select_elite(assess_stack(s2))


def test_model_phase_shape():
    truth, stack = small_stack(5)
    years = stack.catalog.decimal_years()
    pr = stack.pairs.as_array()
    m = model_phase(stack.phase, stack.pixels.coords, years[pr[:, 1]] - years[pr[:, 0]])
    assert m.shape == stack.phase.shape and np.all(np.isfinite(m))
