"""Multi-level geographic sampling.

Stage one splits a total sample budget across countries in proportion to a
weighted blend of their road-length, population, and land-area shares
(weights 0.5/0.2/0.3), rounded to integers by the largest-remainder method
so the budget is conserved exactly. Stage two weights each country's 1x1
degree grid cells by log(1 + population), which spreads draws over
populated areas without letting megacities swallow the budget.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from dataclasses import dataclass
from itertools import cycle, islice
from typing import Optional, Sequence

import numpy as np

from .geo import GeoPoint

DEFAULT_LAMBDAS = (0.5, 0.2, 0.3)

GRID_LAT_CELLS = 180
GRID_LON_CELLS = 360


@dataclass(frozen=True)
class CountryStats:
    """Per-country allocation inputs; at least one stat must be positive."""

    code: str
    road_km: float
    population: float
    area_km2: float

    def __post_init__(self) -> None:
        if not self.code:
            raise ValueError("country code must be nonempty")
        for name in ("road_km", "population", "area_km2"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{self.code}: {name} must be finite and >= 0")
        if self.road_km == 0 and self.population == 0 and self.area_km2 == 0:
            raise ValueError(f"{self.code}: all stats zero, country not includable")


@dataclass(frozen=True)
class GridCell:
    """One cell of the fixed 360x180 one-degree global grid."""

    lat_index: int
    lon_index: int
    population: float

    def __post_init__(self) -> None:
        if not 0 <= self.lat_index < GRID_LAT_CELLS:
            raise ValueError(f"lat_index out of range: {self.lat_index}")
        if not 0 <= self.lon_index < GRID_LON_CELLS:
            raise ValueError(f"lon_index out of range: {self.lon_index}")
        if not math.isfinite(self.population) or self.population < 0:
            raise ValueError("population must be finite and >= 0")

    def centroid(self) -> GeoPoint:
        return GeoPoint(
            lat=self.lat_index - 90.0 + 0.5, lon=self.lon_index - 180.0 + 0.5
        )


@dataclass(frozen=True)
class SamplingPlan:
    """Per-country integer budgets plus per-cell draw weights."""

    total: int
    per_country: dict[str, int]
    cells: dict[str, tuple[GridCell, ...]]
    weights: dict[str, tuple[float, ...]]


def country_shares(
    stats: Sequence[CountryStats], lambdas: Sequence[float] = DEFAULT_LAMBDAS
) -> dict[str, float]:
    """Real-valued allocation share per country: the weighted blend
    l1*road_share + l2*population_share + l3*area_share. Shares sum to 1."""
    if not stats:
        raise ValueError("stats must be nonempty")
    if len(lambdas) != 3 or abs(sum(lambdas) - 1.0) > 1e-9:
        raise ValueError(f"lambdas must be 3 weights summing to 1, got {lambdas}")
    codes = [s.code for s in stats]
    if len(set(codes)) != len(codes):
        raise ValueError("duplicate country codes")
    sum_r = sum(s.road_km for s in stats)
    sum_p = sum(s.population for s in stats)
    sum_a = sum(s.area_km2 for s in stats)
    if sum_r <= 0 or sum_p <= 0 or sum_a <= 0:
        raise ValueError("each stat must have a positive global sum")
    # Each ratio is formed before scaling by its lambda: ratios live in
    # [0, 1] regardless of the stats' magnitudes, so subnormal inputs
    # cannot underflow a term to zero.
    return {
        s.code: (
            lambdas[0] * (s.road_km / sum_r)
            + lambdas[1] * (s.population / sum_p)
            + lambdas[2] * (s.area_km2 / sum_a)
        )
        for s in stats
    }


def allocate_countries(
    stats: Sequence[CountryStats],
    total: int,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
) -> dict[str, int]:
    """Integer sample counts per country: total times each country's share,
    rounded by the largest-remainder method so the budget is conserved
    exactly. Fractional-part ties break by country code, making the result
    independent of input order."""
    if total < 1:
        raise ValueError(f"total must be >= 1, got {total}")
    raw = {code: total * share for code, share in country_shares(stats, lambdas).items()}
    floors = {code: int(math.floor(x)) for code, x in raw.items()}
    remainder = total - sum(floors.values())
    by_fraction = sorted(raw, key=lambda c: (-(raw[c] - floors[c]), c))
    out = dict(floors)
    # remainder is in [0, n] up to float noise in the shares; cycling makes
    # conservation unconditional either way.
    for code in islice(cycle(by_fraction), remainder):
        out[code] += 1
    return out


def cell_weights(cells: Sequence[GridCell]) -> np.ndarray:
    """Normalized log(1 + population) weights for one country's cells.
    A country whose every cell has zero population gets uniform weights."""
    if not cells:
        raise ValueError("cells must be nonempty")
    logs = np.log1p(np.array([c.population for c in cells], dtype=np.float64))
    denom = logs.sum()
    if denom == 0.0:
        return np.full(len(cells), 1.0 / len(cells))
    return logs / denom


def build_plan(
    stats: Sequence[CountryStats],
    cells_by_country: dict[str, Sequence[GridCell]],
    total: int,
    lambdas: Sequence[float] = DEFAULT_LAMBDAS,
) -> SamplingPlan:
    """Allocate the budget and attach per-country cell weights. A country
    with a positive budget must have at least one known cell."""
    per_country = allocate_countries(stats, total, lambdas)
    cells: dict[str, tuple[GridCell, ...]] = {}
    weights: dict[str, tuple[float, ...]] = {}
    for code, count in per_country.items():
        country_cells = tuple(cells_by_country.get(code, ()))
        if count > 0 and not country_cells:
            raise ValueError(f"{code}: allocated {count} samples but has no cells")
        if country_cells:
            cells[code] = country_cells
            weights[code] = tuple(cell_weights(country_cells).tolist())
    return SamplingPlan(total=total, per_country=per_country, cells=cells, weights=weights)


def _country_rng(seed: int, code: str) -> np.random.Generator:
    # Per-country stream derived from (seed, code hash): draws for one
    # country are identical no matter which other countries run, so
    # parallel per-country execution cannot change results.
    return np.random.default_rng([seed, zlib.crc32(code.encode("utf-8"))])


def draw_plan(plan: SamplingPlan, rng_seed: int) -> list[tuple[str, GridCell]]:
    """Execute the plan: per country, draw its budget of cells with
    replacement according to the weight vector. Output is ordered by
    country code, then draw order."""
    draws: list[tuple[str, GridCell]] = []
    for code in sorted(plan.per_country):
        count = plan.per_country[code]
        if count == 0:
            continue
        cells = plan.cells[code]
        weights = np.array(plan.weights[code])
        rng = _country_rng(rng_seed, code)
        for index in rng.choice(len(cells), size=count, replace=True, p=weights):
            draws.append((code, cells[index]))
    return draws


# --- ingestion ---------------------------------------------------------------

def load_country_stats_csv(path) -> list[CountryStats]:
    """CSV columns: code, road_km, population, area_km2."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(
                CountryStats(
                    code=row["code"].strip(),
                    road_km=float(row["road_km"]),
                    population=float(row["population"]),
                    area_km2=float(row["area_km2"]),
                )
            )
    return out


def load_grid_csv(path) -> list[tuple[GridCell, Optional[str]]]:
    """CSV columns: lat_index, lon_index, population and optionally a
    country column preassigning the cell. Cells without a country need a
    boundary file to be assigned."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            cell = GridCell(
                lat_index=int(row["lat_index"]),
                lon_index=int(row["lon_index"]),
                population=float(row["population"]),
            )
            country = (row.get("country") or "").strip() or None
            out.append((cell, country))
    return out


def load_boundaries_geojson(path) -> list[tuple[str, object]]:
    """GeoJSON FeatureCollection with a `code` property per feature and
    Polygon or MultiPolygon geometry. Returns (code, shapely geometry)."""
    from shapely.geometry import shape

    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    out = []
    for feature in doc.get("features", []):
        code = feature.get("properties", {}).get("code")
        if not code:
            raise ValueError("boundary feature missing properties.code")
        out.append((code, shape(feature["geometry"])))
    return out


def assign_cells_to_countries(
    tagged_cells: Sequence[tuple[GridCell, Optional[str]]],
    boundaries: Optional[Sequence[tuple[str, object]]] = None,
) -> dict[str, list[GridCell]]:
    """Group cells by country.

    Pre-tagged cells keep their tag. Untagged cells are assigned to the
    first boundary whose polygon covers the cell centroid (a cell that
    straddles a border belongs to whichever country contains its center);
    cells covered by no boundary are dropped as open water.
    """
    point_cls = None
    if boundaries and any(tag is None for _, tag in tagged_cells):
        from shapely.geometry import Point

        point_cls = Point
    out: dict[str, list[GridCell]] = {}
    for cell, tag in tagged_cells:
        code = tag
        if code is None:
            if not boundaries:
                continue
            centroid = cell.centroid()
            point = point_cls(centroid.lon, centroid.lat)
            for candidate_code, geometry in boundaries:
                if geometry.covers(point):
                    code = candidate_code
                    break
            if code is None:
                continue
        out.setdefault(code, []).append(cell)
    return out
