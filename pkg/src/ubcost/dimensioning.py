"""Network dimensioning: invert capacity lookups into required site counts.

Finds the smallest site density whose area capacity meets the demand
density, turns it into a whole-site requirement per decile, and splits the
shortfall into tower upgrades (cheaper) and greenfield builds. Deciles whose
demand exceeds the lookup range entirely are flagged for satellite service.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

from .deciles import Decile, DecileAssets
from .ingest import SpectrumBand
from .radio import CapacityLookup, area_capacity

_BISECTION_STEPS = 100  # halves the interval to double-precision exhaustion


class Strategy(str, Enum):
    TERRESTRIAL = "terrestrial"
    SATELLITE = "satellite"
    NONE_NEEDED = "none_needed"


@dataclass(frozen=True)
class DensityRequirement:
    density: float
    unmeetable: bool = False


@dataclass(frozen=True)
class DecilePlan:
    decile_index: int
    required_total_sites: int
    existing_sites: int        # existing 4G sites (already providing capacity)
    new_builds: int
    upgrades: int
    strategy: Strategy
    satellite_users: int = 0
    unmeetable: bool = False


def _snap_ceil(x: float) -> int:
    # ceil with a 1e-9 snap so float noise on exact integers does not
    # force a phantom extra site
    return int(math.ceil(round(x, 9)))


def required_density(
    demand_density_mbps_km2: float,
    portfolio: Sequence[SpectrumBand],
    lookups: Mapping[float, CapacityLookup],
) -> DensityRequirement:
    """Smallest site density on the interpolated curve meeting the demand.

    Returns an unmeetable outcome when even the top of the lookup grid cannot
    carry the demand; callers resolve that to satellite service.
    """
    if demand_density_mbps_km2 < 0:
        raise ValueError(f"demand density must be >= 0, got {demand_density_mbps_km2}")
    if demand_density_mbps_km2 == 0:
        return DensityRequirement(0.0)
    hi = min(lookups[b.frequency_mhz].max_density for b in portfolio)
    if area_capacity(hi, portfolio, lookups) < demand_density_mbps_km2:
        return DensityRequirement(math.inf, unmeetable=True)
    lo = 0.0
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if area_capacity(mid, portfolio, lookups) >= demand_density_mbps_km2:
            hi = mid
        else:
            lo = mid
    return DensityRequirement(hi)


def plan_decile(
    decile: Decile,
    assets: DecileAssets,
    demand_density_mbps_km2: float,
    lookups: Mapping[float, CapacityLookup],
    portfolio: Sequence[SpectrumBand],
) -> DecilePlan:
    """Site requirement and build split for one decile.

    Existing 4G sites count against the requirement first; the remaining
    shortfall reuses existing non-4G towers as upgrades before any greenfield
    build. A negative raw difference clamps to zero.
    """
    req = required_density(demand_density_mbps_km2, portfolio, lookups)
    if req.unmeetable:
        return DecilePlan(
            decile_index=decile.decile_index,
            required_total_sites=0,
            existing_sites=assets.existing_4g_sites,
            new_builds=0,
            upgrades=0,
            strategy=Strategy.SATELLITE,
            unmeetable=True,
        )
    required_sites = _snap_ceil(req.density * decile.area_km2)
    shortfall = max(0, required_sites - assets.existing_4g_sites)
    upgrades = min(shortfall, assets.existing_non4g_sites)
    new_builds = shortfall - upgrades
    strategy = Strategy.NONE_NEEDED if shortfall == 0 else Strategy.TERRESTRIAL
    return DecilePlan(
        decile_index=decile.decile_index,
        required_total_sites=required_sites,
        existing_sites=assets.existing_4g_sites,
        new_builds=new_builds,
        upgrades=upgrades,
        strategy=strategy,
    )


def choose_satellite(terrestrial_cost_per_user: float, satellite_cost_per_user: float) -> Strategy:
    """Satellite only when strictly cheaper per user; ties stay terrestrial."""
    if terrestrial_cost_per_user > satellite_cost_per_user:
        return Strategy.SATELLITE
    return Strategy.TERRESTRIAL


def to_satellite(plan: DecilePlan, users: int) -> DecilePlan:
    """Rewrite a plan as satellite-served: no terrestrial builds remain."""
    return replace(
        plan,
        strategy=Strategy.SATELLITE,
        new_builds=0,
        upgrades=0,
        satellite_users=users,
    )
