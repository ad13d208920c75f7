"""Density deciles and the allocation of existing assets across them.

Areas are ranked by population density and split into ten near-equal-count
contiguous groups (decile 1 = densest). Existing sites and fiber backhaul
are then spread densest-first, mirroring how operators actually deploy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .ingest import AreaRecord


class DecileError(ValueError):
    pass


@dataclass(frozen=True)
class Decile:
    country_iso3: str
    decile_index: int  # 1..10, 1 = densest
    population: float
    area_km2: float
    member_area_ids: tuple[str, ...]

    @property
    def density(self) -> float:
        return self.population / self.area_km2


@dataclass(frozen=True)
class DecileAssets:
    decile_index: int
    existing_4g_sites: int = 0
    existing_non4g_sites: int = 0
    fiber_backhaul_sites: int = 0

    @property
    def total_sites(self) -> int:
        return self.existing_4g_sites + self.existing_non4g_sites


def _snap(x: float) -> float:
    # Guards integer boundaries against float noise from percentage math.
    return round(x, 9)


def build_deciles(country_iso3: str, areas: Sequence[AreaRecord]) -> list[Decile]:
    """Group one country's areas into ten density deciles.

    Sort is density descending with area_id as the tie-break, so the split is
    deterministic. Group sizes are ceil(n/10) for the first n mod 10 groups
    and floor(n/10) for the rest.
    """
    areas = [a for a in areas if a.country_iso3 == country_iso3]
    n = len(areas)
    if n < 10:
        raise DecileError(f"country {country_iso3}: need >= 10 areas to build deciles, have {n}")
    ordered = sorted(areas, key=lambda a: (-a.density, a.area_id))
    base, extra = divmod(n, 10)
    deciles = []
    start = 0
    for idx in range(1, 11):
        size = base + (1 if idx <= extra else 0)
        members = ordered[start:start + size]
        start += size
        deciles.append(Decile(
            country_iso3=country_iso3,
            decile_index=idx,
            population=sum(a.population for a in members),
            area_km2=sum(a.area_km2 for a in members),
            member_area_ids=tuple(a.area_id for a in members),
        ))
    return deciles


def _spread_sites(populations: Sequence[float], covered_population: float,
                  site_count: int) -> list[int]:
    """Spread ``site_count`` sites over deciles, proportional to the share of
    the covered population living in each.

    Deciles are walked densest-first; coverage is consumed until exhausted, so
    sites only land inside the coverage frontier. Rounding leftovers go to the
    densest decile with a fractional share.
    """
    counts = [0] * len(populations)
    if site_count <= 0 or covered_population <= 0:
        return counts
    covered = []
    remaining = covered_population
    for pop in populations:
        take = min(pop, remaining)
        covered.append(take)
        remaining -= take
    total_covered = sum(covered)
    if total_covered <= 0:
        return counts
    shares = [_snap(site_count * c / total_covered) for c in covered]
    counts = [int(math.floor(s)) for s in shares]
    leftover = site_count - sum(counts)
    if leftover > 0:
        for i, share in enumerate(shares):
            if share > counts[i]:  # densest decile left incomplete by rounding
                counts[i] += leftover
                break
        else:
            counts[0] += leftover
    return counts


def allocate_sites(deciles: Sequence[Decile], total_sites: int,
                   coverage_4g_pct: float, coverage_2g_pct: float) -> list[DecileAssets]:
    """Split the national site stock into per-decile 4G and non-4G counts.

    National 4G sites are the 4G coverage share of the total stock and are
    placed first; the 2G coverage share (capped by what is left of the stock)
    is placed as non-4G. Each category lands inside its own population
    coverage frontier, so the sparsest deciles can end up with nothing.
    """
    if not 0 <= coverage_4g_pct <= 100 or not 0 <= coverage_2g_pct <= 100:
        raise ValueError("coverage percentages must be in [0, 100]")
    if total_sites < 0:
        raise ValueError(f"total_sites must be >= 0, got {total_sites}")
    pops = [d.population for d in deciles]
    national = sum(pops)
    n4g = min(total_sites, int(round(_snap(total_sites * coverage_4g_pct / 100.0))))
    four_g = _spread_sites(pops, national * coverage_4g_pct / 100.0, n4g)
    placed_4g = sum(four_g)
    n_non4g = min(total_sites - placed_4g,
                  int(round(_snap(total_sites * coverage_2g_pct / 100.0))))
    non4g = _spread_sites(pops, national * coverage_2g_pct / 100.0, n_non4g)
    return [
        DecileAssets(d.decile_index, existing_4g_sites=f, existing_non4g_sites=n)
        for d, f, n in zip(deciles, four_g, non4g)
    ]


def allocate_fiber(assets: Sequence[DecileAssets], fiber_share_pct: float) -> list[DecileAssets]:
    """Mark the fiber-backhauled share of existing sites, densest-first."""
    if not 0 <= fiber_share_pct <= 100:
        raise ValueError(f"fiber share must be in [0, 100], got {fiber_share_pct}")
    national_sites = sum(a.total_sites for a in assets)
    remaining = min(national_sites, int(round(_snap(national_sites * fiber_share_pct / 100.0))))
    out = []
    for a in assets:
        take = min(a.total_sites, remaining)
        remaining -= take
        out.append(replace(a, fiber_backhaul_sites=take))
    return out
