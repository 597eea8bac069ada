import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from insarchain.errors import DisconnectedNetwork, EmptyCatalog, FormatError
from insarchain.pairnet import (AcquisitionCatalog, PairSet, connected_components, design_matrix,
                                incidence_matrix, largest_component, read_catalog, select_pairs,
                                write_catalog)
from oracles import brute_pairs, rank_oracle

D0 = dt.date(2015, 3, 12)


def catalog(days, perp):
    return AcquisitionCatalog.from_arrays([D0 + dt.timedelta(days=int(d)) for d in days], perp)


def random_catalog(rng, n):
    days = np.cumsum(rng.integers(1, 40, size=n)) - 1
    return catalog(days, np.round(rng.normal(0, 80, size=n), 1))


def test_three_acquisition_example():
    ps = select_pairs(catalog([0, 12, 500], [0, 50, 300]), 150, 400)
    assert ps.pairs == ((0, 1),)


def test_single_acquisition_gives_no_pairs():
    assert len(select_pairs(catalog([0], [0.0]))) == 0


def test_empty_catalog_rejected():
    with pytest.raises(EmptyCatalog):
        select_pairs(AcquisitionCatalog([]))


def test_183_dates_gives_5478_pairs():
    cat = catalog(np.arange(183) * 12, np.zeros(183))
    ps = select_pairs(cat, 150, 400)
    assert len(ps) == 5478 == len(brute_pairs(cat.day_numbers, cat.perp_baselines, 150, 400))


def test_thresholds_are_inclusive():
    cat = catalog([0, 400, 801], [0.0, 150.0, 0.0])
    assert select_pairs(cat, 150, 400).pairs == ((0, 1),)


def test_matches_brute_force_on_random_catalogs():
    rng = np.random.default_rng(1)
    for _ in range(200):
        cat = random_catalog(rng, int(rng.integers(1, 60)))
        pmax, tmax = float(rng.uniform(10, 200)), float(rng.integers(12, 500))
        got = list(select_pairs(cat, pmax, tmax).pairs)
        assert got == brute_pairs(cat.day_numbers, cat.perp_baselines, pmax, tmax)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 40), st.integers(-5000, 5000), st.floats(-1e3, 1e3), st.integers(0, 2 ** 32 - 1))
def test_pair_count_translation_invariant(n, shift_days, shift_perp, seed):
    rng = np.random.default_rng(seed)
    days = np.cumsum(rng.integers(1, 30, size=n)) + 6000
    perp = np.round(rng.normal(0, 60, size=n), 3)
    a = select_pairs(catalog(days, perp), 100, 200)
    b = select_pairs(catalog(days + shift_days, perp + shift_perp), 100, 200)
    # a float shift can move a baseline difference across the threshold only by rounding
    assert abs(len(a) - len(b)) <= sum(
        1 for i, j in a.pairs + b.pairs if abs(abs(perp[j] - perp[i]) - 100) < 1e-9)


def test_pairs_sorted_and_unique():
    rng = np.random.default_rng(3)
    ps = select_pairs(random_catalog(rng, 80), 120, 300)
    assert list(ps.pairs) == sorted(set(ps.pairs))
    assert all(i < j for i, j in ps.pairs)


@pytest.mark.parametrize("pairs, n, expected", [
    (((0, 1), (1, 2)), 3, [[0, 1, 2]]),
    ((), 2, [[0], [1]]),
    (((0, 1), (2, 3)), 4, [[0, 1], [2, 3]]),
])
def test_connected_components(pairs, n, expected):
    assert connected_components(PairSet(pairs, 1, 1), n) == expected


def test_largest_component_prefers_size_then_earliest():
    assert largest_component(PairSet(((0, 1), (2, 3), (3, 4)), 1, 1), 5) == [2, 3, 4]
    assert largest_component(PairSet(((0, 1), (2, 3)), 1, 1), 4) == [0, 1]


def test_design_matrix_examples():
    G = design_matrix(PairSet(((0, 1), (1, 2)), 1, 1), 3, 0)
    assert G.tolist() == [[1, 0], [-1, 1]]
    assert design_matrix(PairSet(((0, 1),), 1, 1), 2).tolist() == [[1]]
    chain = PairSet(((0, 1), (1, 2), (2, 3)), 1, 1)
    assert np.linalg.matrix_rank(design_matrix(chain, 4).astype(float)) == 3


def test_design_matrix_other_reference():
    G = design_matrix(PairSet(((0, 1), (1, 2), (0, 2)), 1, 1), 3, ref_index=1)
    assert G.tolist() == [[-1, 0], [0, 1], [-1, 1]]


def test_design_matrix_disconnected():
    with pytest.raises(DisconnectedNetwork) as err:
        design_matrix(PairSet(((0, 1), (2, 3)), 1, 1), 4)
    assert err.value.components == [[0, 1], [2, 3]]


def test_incidence_rank_matches_oracle_on_random_graphs():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 13))
        all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        keep = [p for p in all_pairs if rng.random() < rng.uniform(0.05, 0.6)]
        A = incidence_matrix(keep, n).astype(float)
        rank = np.linalg.matrix_rank(A) if keep else 0
        assert rank == rank_oracle(keep, n)


def test_catalog_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    cat = random_catalog(rng, 25)
    write_catalog(cat, tmp_path / "cat.txt")
    assert read_catalog(tmp_path / "cat.txt") == cat
    assert (tmp_path / "cat.txt").read_text().startswith("# insarchain-catalog v1")


@pytest.mark.parametrize("body", ["0,2015-01-01\n", "0,2015-13-01,1.0\n", "1,2015-01-01,0\n",
                                  "0,2015-01-02,0\n1,2015-01-01,0\n"])
def test_catalog_malformed(tmp_path, body):
    p = tmp_path / "bad.txt"
    p.write_text(body)
    with pytest.raises(FormatError):
        read_catalog(p)
