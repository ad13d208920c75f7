"""Cost accounting: per-site capex, metro/core fiber, opex, satellite, roll-ups.

All money is carried in integer cents so decile and country totals are exact
sums. Dollar inputs are rounded to cents once, at the component level.
"""

from __future__ import annotations

import math
from dataclasses import MISSING, dataclass, field, fields
from pathlib import Path
from typing import Mapping

import yaml

INCOME_GROUPS = ("AE", "EME", "LIDC")

WIRELESS = "wireless"
FIBER = "fiber"


class CostBookError(ValueError):
    """Malformed, incomplete, or out-of-range cost book."""


def cents(amount_usd: float) -> int:
    """Dollars to integer cents (round-half-even)."""
    return int(round(amount_usd * 100))


def usd(amount_cents: int) -> float:
    return amount_cents / 100.0


@dataclass(frozen=True)
class CostBook:
    """Unit costs, labor assumptions, and recurring-cost parameters.

    ``horizon_years=None`` means each country's assessment span
    (end_year - start_year) is used as the opex/satellite horizon.
    """

    ran_usd: float
    backhaul_wireless_usd: float
    backhaul_fiber_per_m_usd: float
    civils_usd: float
    power_system_usd: float
    wage_ict_usd_hr: float
    wage_logistics_usd_hr: float
    wage_construction_usd_hr: float
    fiber_cost_per_m_usd: float
    labor_hours_per_component: float = 16.0
    opex_rate_pct_per_year: float = 15.0
    fiber_core_split_alpha_pct: float = 10.0
    policy_per_user_usd: float = 2.0
    skills_per_user_usd: float = 12.0
    satellite_monthly_usd: float = 200.0
    satellite_users_per_subscription: Mapping[str, int] = field(
        default_factory=lambda: {"LIDC": 12, "EME": 8, "AE": 4}
    )
    horizon_years: int | None = None

    def __post_init__(self):
        money = (
            "ran_usd", "backhaul_wireless_usd", "backhaul_fiber_per_m_usd",
            "civils_usd", "power_system_usd", "wage_ict_usd_hr",
            "wage_logistics_usd_hr", "wage_construction_usd_hr",
            "fiber_cost_per_m_usd", "labor_hours_per_component",
            "policy_per_user_usd", "skills_per_user_usd",
            "satellite_monthly_usd",
        )
        for name in money:
            if getattr(self, name) < 0:
                raise CostBookError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0 <= self.opex_rate_pct_per_year <= 100:
            raise CostBookError(
                f"opex_rate_pct_per_year must be in [0, 100], got {self.opex_rate_pct_per_year}"
            )
        if not 0 <= self.fiber_core_split_alpha_pct <= 100:
            raise CostBookError(
                f"fiber_core_split_alpha_pct must be in [0, 100], got {self.fiber_core_split_alpha_pct}"
            )
        groups = set(self.satellite_users_per_subscription)
        if groups != set(INCOME_GROUPS):
            raise CostBookError(
                f"satellite_users_per_subscription must have keys {INCOME_GROUPS}, got {sorted(groups)}"
            )
        for group, n in self.satellite_users_per_subscription.items():
            if n < 1:
                raise CostBookError(f"satellite_users_per_subscription[{group}] must be >= 1")
        if self.horizon_years is not None and self.horizon_years < 0:
            raise CostBookError(f"horizon_years must be >= 0, got {self.horizon_years}")


def load_costbook(path: Path | str) -> CostBook:
    """Read a YAML cost book. Unknown keys are errors, not warnings."""
    path = Path(path)
    raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise CostBookError(f"{path}: cost book must be a key-value mapping")
    known = {f.name for f in fields(CostBook)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise CostBookError(f"{path}: unknown cost book key(s): {', '.join(unknown)}")
    missing = sorted(
        f.name for f in fields(CostBook)
        if f.name not in raw and f.default is MISSING and f.default_factory is MISSING
    )
    if missing:
        raise CostBookError(f"{path}: missing cost book key(s): {', '.join(missing)}")
    try:
        return CostBook(**raw)
    except TypeError as exc:
        raise CostBookError(f"{path}: {exc}") from exc


def save_costbook(book: CostBook, path: Path | str) -> None:
    data = {}
    for f in fields(CostBook):
        value = getattr(book, f.name)
        if isinstance(value, Mapping):
            value = dict(value)
        data[f.name] = value
    Path(path).write_text(yaml.safe_dump(data, sort_keys=True), encoding="utf-8")


@dataclass(frozen=True)
class CapexBreakdown:
    """Per-site (or decile-aggregate) capex components, integer cents."""

    ran: int = 0
    backhaul: int = 0
    civils: int = 0
    power: int = 0
    labor_planning: int = 0
    labor_logistics: int = 0
    labor_construction: int = 0
    labor_installation: int = 0

    @property
    def total(self) -> int:
        return (
            self.ran + self.backhaul + self.civils + self.power
            + self.labor_planning + self.labor_logistics
            + self.labor_construction + self.labor_installation
        )

    @property
    def hardware(self) -> int:
        """Asset value the recurring opex rate applies to (no labor)."""
        return self.ran + self.backhaul + self.civils + self.power

    @property
    def recurring_labor(self) -> int:
        """Labor components that recur annually (construction does not)."""
        return self.labor_planning + self.labor_logistics + self.labor_installation

    def scaled(self, count: int) -> "CapexBreakdown":
        return CapexBreakdown(**{f.name: getattr(self, f.name) * count for f in fields(self)})

    def __add__(self, other: "CapexBreakdown") -> "CapexBreakdown":
        return CapexBreakdown(
            **{f.name: getattr(self, f.name) + getattr(other, f.name) for f in fields(self)}
        )


def mean_intersite_distance_km(
    area_km2: float, total_sites: int, literal_site_count: bool = False
) -> float:
    """Mean spacing between sites in a decile.

    Default reads the site term as a density (sites per km^2), giving
    0.5 * sqrt(area / sites) in km. ``literal_site_count=True`` keeps the
    dimensionless 0.5 * sqrt(1 / sites) form for auditing.
    """
    if total_sites < 1:
        raise ValueError(f"total_sites must be >= 1, got {total_sites}")
    if area_km2 <= 0:
        raise ValueError(f"area_km2 must be > 0, got {area_km2}")
    if literal_site_count:
        return math.sqrt(1.0 / total_sites) / 2.0
    return math.sqrt(area_km2 / total_sites) / 2.0


def site_capex(
    book: CostBook,
    backhaul: str,
    greenfield: bool,
    inter_site_distance_km: float = 0.0,
) -> CapexBreakdown:
    """Capex for one site build.

    Greenfield builds carry civil works and construction labor; upgrades of
    an existing tower carry neither. Fiber-fed sites price their backhaul as
    fiber-per-meter over the mean inter-site distance; otherwise one wireless
    backhaul unit.
    """
    if backhaul not in (WIRELESS, FIBER):
        raise ValueError(f"backhaul must be '{WIRELESS}' or '{FIBER}', got {backhaul!r}")
    if backhaul == FIBER:
        if inter_site_distance_km <= 0:
            raise ValueError("fiber-fed site needs a positive inter-site distance")
        backhaul_cents = cents(inter_site_distance_km * 1000.0 * book.backhaul_fiber_per_m_usd)
    else:
        backhaul_cents = cents(book.backhaul_wireless_usd)
    hours = book.labor_hours_per_component
    return CapexBreakdown(
        ran=cents(book.ran_usd),
        backhaul=backhaul_cents,
        civils=cents(book.civils_usd) if greenfield else 0,
        power=cents(book.power_system_usd),
        labor_planning=cents(hours * book.wage_ict_usd_hr),
        labor_logistics=cents(hours * book.wage_logistics_usd_hr),
        labor_construction=cents(hours * book.wage_construction_usd_hr) if greenfield else 0,
        labor_installation=cents(hours * book.wage_ict_usd_hr),
    )


def metro_core_fiber_cents(
    area_km2: float,
    total_sites: int,
    new_sites: int,
    alpha_pct: float,
    fiber_per_m_usd: float,
    literal_site_count: bool = False,
) -> int:
    """Metro/core fiber to hook new sites into the wider network.

    Mean inter-site spacing, times the number of new sites, a core-split
    factor, and the per-meter fiber price.
    """
    if new_sites == 0:
        return 0
    if new_sites < 0:
        raise ValueError(f"new_sites must be >= 0, got {new_sites}")
    dist_km = mean_intersite_distance_km(area_km2, total_sites, literal_site_count)
    return cents(dist_km * 1000.0 * new_sites * (alpha_pct / 100.0) * fiber_per_m_usd)


def opex_to_horizon_cents(capex: CapexBreakdown, book: CostBook, horizon_years: int) -> int:
    """Undiscounted opex for one site over the horizon.

    Annual charge is the opex rate on hardware asset value plus the recurring
    labor components (planning, logistics, installation).
    """
    if horizon_years < 0:
        raise ValueError(f"horizon_years must be >= 0, got {horizon_years}")
    annual = int(round(book.opex_rate_pct_per_year / 100.0 * capex.hardware))
    annual += capex.recurring_labor
    return annual * horizon_years


def satellite_per_user_month_cents(income_group: str, book: CostBook) -> int:
    """Monthly satellite cost per user: one subscription split across users."""
    try:
        per_sub = book.satellite_users_per_subscription[income_group]
    except KeyError:
        raise CostBookError(f"unknown income group {income_group!r}") from None
    return int(round(cents(book.satellite_monthly_usd) / per_sub))


def satellite_cost_cents(
    users: int, income_group: str, book: CostBook, horizon_years: int
) -> int:
    """Satellite subscription spend for ``users`` over the horizon."""
    if users < 0:
        raise ValueError(f"users must be >= 0, got {users}")
    if horizon_years < 0:
        raise ValueError(f"horizon_years must be >= 0, got {horizon_years}")
    return satellite_per_user_month_cents(income_group, book) * users * 12 * horizon_years


@dataclass(frozen=True)
class DecileCostResult:
    """All cost lines attributable to one decile, integer cents."""

    decile_index: int
    capex: CapexBreakdown = field(default_factory=CapexBreakdown)
    metro_core_fiber_cents: int = 0
    opex_cents: int = 0
    satellite_cents: int = 0
    policy_cents: int = 0
    skills_cents: int = 0

    @property
    def total_cents(self) -> int:
        return (
            self.capex.total + self.metro_core_fiber_cents + self.opex_cents
            + self.satellite_cents + self.policy_cents + self.skills_cents
        )


def terrestrial_build_cents(
    required_total_sites: int,
    new_builds: int,
    upgrades: int,
    area_km2: float,
    fiber_share_pct: float,
    book: CostBook,
    horizon_years: int,
) -> tuple[CapexBreakdown, int, int]:
    """Price a terrestrial build: (aggregate capex, opex, metro/core fiber).

    A share of the built sites matching the country's fiber-backhaul share is
    fiber-fed (assigned to upgrades first); the rest use wireless backhaul.
    """
    n_total = new_builds + upgrades
    if n_total == 0:
        return CapexBreakdown(), 0, 0
    dist_km = mean_intersite_distance_km(area_km2, required_total_sites)
    n_fiber = min(n_total, int(round(fiber_share_pct / 100.0 * n_total)))
    fiber_up = min(upgrades, n_fiber)
    fiber_new = n_fiber - fiber_up
    classes = (
        (fiber_up, FIBER, False),
        (upgrades - fiber_up, WIRELESS, False),
        (fiber_new, FIBER, True),
        (new_builds - fiber_new, WIRELESS, True),
    )
    agg = CapexBreakdown()
    opex = 0
    for count, backhaul, greenfield in classes:
        if count == 0:
            continue
        per_site = site_capex(book, backhaul, greenfield, dist_km)
        agg = agg + per_site.scaled(count)
        opex += opex_to_horizon_cents(per_site, book, horizon_years) * count
    metro = metro_core_fiber_cents(
        area_km2,
        required_total_sites,
        n_total,
        book.fiber_core_split_alpha_pct,
        book.fiber_cost_per_m_usd,
    )
    return agg, opex, metro


def tpu_usd(total_cents: int, served_users: float) -> float:
    """Total cost of ownership per user over the subscriber base."""
    if total_cents == 0:
        return 0.0
    if served_users <= 0:
        raise ValueError("nonzero cost with an empty subscriber base")
    return usd(total_cents) / served_users


def total_cost_usd(tpu: float, unconnected_users: float) -> float:
    """Country price tag: per-user cost times the unconnected population."""
    if unconnected_users < 0:
        raise ValueError(f"unconnected_users must be >= 0, got {unconnected_users}")
    return tpu * unconnected_users
