"""Acquisition catalog, small-baseline pair selection and the network design matrix."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DisconnectedNetwork, EmptyCatalog, FormatError

CATALOG_HEADER = "# insarchain-catalog v1: id,date(YYYY-MM-DD),perp_baseline_m"


@dataclass(frozen=True)
class Acquisition:
    id: int
    date: dt.date
    perp_baseline_m: float


class AcquisitionCatalog:
    """Ordered, immutable list of acquisitions with ids ``0..n-1``."""

    def __init__(self, acquisitions):
        acqs = tuple(acquisitions)
        for k, a in enumerate(acqs):
            if a.id != k:
                raise ValueError(f"acquisition ids must be 0..n-1 in order; got id {a.id} at position {k}")
            if k and a.date <= acqs[k - 1].date:
                raise ValueError(f"dates must be strictly increasing (id {a.id})")
            if not np.isfinite(a.perp_baseline_m):
                raise ValueError(f"non-finite perpendicular baseline at id {a.id}")
        self._acqs = acqs

    @classmethod
    def from_arrays(cls, dates, perp_baselines_m):
        return cls(
            Acquisition(k, d, float(b)) for k, (d, b) in enumerate(zip(dates, perp_baselines_m))
        )

    def __len__(self):
        return len(self._acqs)

    def __getitem__(self, k):
        return self._acqs[k]

    def __iter__(self):
        return iter(self._acqs)

    def __eq__(self, other):
        return isinstance(other, AcquisitionCatalog) and self._acqs == other._acqs

    @property
    def dates(self):
        return [a.date for a in self._acqs]

    @property
    def day_numbers(self) -> np.ndarray:
        """Proleptic ordinal day of each acquisition (int64)."""
        return np.array([a.date.toordinal() for a in self._acqs], dtype=np.int64)

    @property
    def perp_baselines(self) -> np.ndarray:
        return np.array([a.perp_baseline_m for a in self._acqs], dtype=float)

    def decimal_years(self, ref_index=0) -> np.ndarray:
        """Time since the reference acquisition in years of 365.25 days."""
        days = self.day_numbers
        return (days - days[ref_index]) / 365.25


@dataclass(frozen=True)
class PairSet:
    pairs: tuple
    perp_max_m: float
    temp_max_days: float

    def __len__(self):
        return len(self.pairs)

    def as_array(self) -> np.ndarray:
        return np.array(self.pairs, dtype=np.int64).reshape(-1, 2)

    def subset(self, keep):
        """PairSet restricted to the pairs whose positions are in ``keep``."""
        return PairSet(tuple(self.pairs[k] for k in keep), self.perp_max_m, self.temp_max_days)


def select_pairs(catalog: AcquisitionCatalog, perp_max_m=150.0, temp_max_days=400.0) -> PairSet:
    """All pairs (i, j), i < j, within both baseline thresholds (inclusive)."""
    if len(catalog) == 0:
        raise EmptyCatalog("catalog has no acquisitions")
    if perp_max_m <= 0 or temp_max_days <= 0:
        raise ValueError("thresholds must be positive")
    days = catalog.day_numbers
    bperp = catalog.perp_baselines
    ii, jj = np.triu_indices(len(catalog), k=1)
    ok = (np.abs(bperp[jj] - bperp[ii]) <= perp_max_m) & (days[jj] - days[ii] <= temp_max_days)
    pairs = tuple((int(i), int(j)) for i, j in zip(ii[ok], jj[ok]))
    return PairSet(pairs, float(perp_max_m), float(temp_max_days))


def connected_components(ps: PairSet, n: int):
    """Connected components of the pair graph, each sorted, ordered by smallest member."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in ps.pairs:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return sorted(groups.values(), key=lambda g: g[0])


def largest_component(ps: PairSet, n: int):
    """Largest component (ties go to the one containing the earliest acquisition)."""
    comps = connected_components(ps, n)
    return max(comps, key=lambda c: (len(c), -c[0]))


def design_matrix(ps: PairSet, n: int, ref_index: int = 0) -> np.ndarray:
    """Incidence matrix (pairs x n-1) mapping epoch phases to pair phases.

    Columns follow acquisition order with the reference acquisition removed.
    """
    if not 0 <= ref_index < n:
        raise ValueError(f"ref_index {ref_index} outside 0..{n - 1}")
    comps = connected_components(ps, n)
    if len(comps) > 1:
        raise DisconnectedNetwork(comps)
    col = np.full(n, -1, dtype=np.int64)
    others = [k for k in range(n) if k != ref_index]
    col[others] = np.arange(n - 1)
    G = np.zeros((len(ps), n - 1), dtype=np.int8)
    for row, (i, j) in enumerate(ps.pairs):
        if col[j] >= 0:
            G[row, col[j]] = 1
        if col[i] >= 0:
            G[row, col[i]] = -1
    return G


def incidence_matrix(pairs, n: int) -> np.ndarray:
    """Full (pairs x n) incidence matrix with no reference column removed."""
    G = np.zeros((len(pairs), n), dtype=np.int8)
    for row, (i, j) in enumerate(pairs):
        G[row, j] = 1
        G[row, i] = -1
    return G


def catalog_text(catalog: AcquisitionCatalog) -> str:
    lines = [CATALOG_HEADER]
    lines += [f"{a.id},{a.date.isoformat()},{a.perp_baseline_m!r}" for a in catalog]
    return "\n".join(lines) + "\n"


def write_catalog(catalog: AcquisitionCatalog, path) -> None:
    Path(path).write_text(catalog_text(catalog), encoding="utf-8")


def read_catalog(path) -> AcquisitionCatalog:
    acqs = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise FormatError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
        try:
            acqs.append(Acquisition(int(parts[0]), dt.date.fromisoformat(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    try:
        return AcquisitionCatalog(acqs)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
