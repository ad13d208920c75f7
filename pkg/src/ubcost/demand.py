"""Traffic demand: active users, busy-hour rate per user, demand density.

Demand is dimensioned against the busiest hour of the day: only a small
share of the subscriber base exchanges traffic at any instant, and only a
slice of daily traffic falls in the busy hour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


@dataclass(frozen=True)
class TrafficProfile:
    """Monthly consumption target and how it concentrates into the busy hour."""

    monthly_gb: float
    days_per_month: int = 30
    busy_hour_share_pct: float = 15.0  # observed range is roughly 5-20%

    def __post_init__(self):
        if self.monthly_gb < 0:
            raise ValueError(f"monthly_gb must be >= 0, got {self.monthly_gb}")
        if self.days_per_month not in range(28, 32):
            raise ValueError(f"days_per_month must be 28..31, got {self.days_per_month}")
        if not 0 < self.busy_hour_share_pct <= 100:
            raise ValueError(
                f"busy_hour_share_pct must be in (0, 100], got {self.busy_hour_share_pct}"
            )


class UserCounts(NamedTuple):
    active: float   # on the network in the busy hour
    served: float   # subscriber base (before the active-share factor)


@dataclass(frozen=True)
class DemandResult:
    active_users: float
    per_user_rate_mbps: float
    demand_density_mbps_km2: float
    served_users: float


def growth_factor(rate_pct_per_year: float, years: int, literal_exponent: bool = False) -> float:
    """Population growth multiplier over the assessment span.

    Standard compounding (1 + g)^years. ``literal_exponent=True`` switches to
    the alternative 1 + g^years reading, kept only for auditability; it is
    not meaningful for years == 0 and is never the default.
    """
    if years < 0:
        raise ValueError(f"years must be >= 0, got {years}")
    g = rate_pct_per_year / 100.0
    if literal_exponent:
        return 1.0 + g ** years
    return (1.0 + g) ** years


def active_users(
    population: float,
    growth_rate_pct: float,
    years: int,
    adoption_rate_pct: float,
    market_share_pct: float,
    active_share_pct: float,
    literal_growth_exponent: bool = False,
) -> UserCounts:
    """Busy-hour active users on the modeled network, plus its subscriber base.

    The subscriber base is grown population times adoption times the modeled
    operator's market share; the active count further applies the share of
    subscribers exchanging traffic at one instant.
    """
    if population < 0:
        raise ValueError(f"population must be >= 0, got {population}")
    for name, pct in (("adoption_rate_pct", adoption_rate_pct),
                      ("market_share_pct", market_share_pct),
                      ("active_share_pct", active_share_pct)):
        if not 0 <= pct <= 100:
            raise ValueError(f"{name} must be in [0, 100], got {pct}")
    served = (
        population
        * growth_factor(growth_rate_pct, years, literal_growth_exponent)
        * (adoption_rate_pct / 100.0)
        * (market_share_pct / 100.0)
    )
    return UserCounts(active=served * (active_share_pct / 100.0), served=served)


def busy_hour_rate_mbps(profile: TrafficProfile) -> float:
    """Mean per-user rate in the busy hour, in Mbps.

    GB/month -> megabits/month -> per-day -> busy-hour slice -> per-second.
    """
    return (
        profile.monthly_gb
        * 1000.0                                # GB -> MB
        * 8.0                                   # MB -> Mbit
        * (1.0 / profile.days_per_month)
        * (profile.busy_hour_share_pct / 100.0)
        * (1.0 / 3600.0)
    )


def demand_density(active: float, rate_mbps: float, area_km2: float) -> float:
    """Traffic demand density in Mbps per km^2."""
    if area_km2 <= 0:
        raise ValueError(f"area_km2 must be > 0, got {area_km2}")
    return active * rate_mbps / area_km2


def decile_demand(
    population: float,
    area_km2: float,
    growth_rate_pct: float,
    years: int,
    adoption_rate_pct: float,
    market_share_pct: float,
    active_share_pct: float,
    profile: TrafficProfile,
    literal_growth_exponent: bool = False,
) -> DemandResult:
    """Full demand calculation for one decile."""
    users = active_users(
        population, growth_rate_pct, years, adoption_rate_pct,
        market_share_pct, active_share_pct, literal_growth_exponent,
    )
    rate = busy_hour_rate_mbps(profile)
    return DemandResult(
        active_users=users.active,
        per_user_rate_mbps=rate,
        demand_density_mbps_km2=demand_density(users.active, rate, area_km2),
        served_users=users.served,
    )
