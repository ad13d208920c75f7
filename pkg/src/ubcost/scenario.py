"""Scenario orchestration: per-country runs, aggregation, sensitivity sweeps.

Countries are independent and may run in parallel; aggregation is a
deterministic fold in sorted country order, so output bytes never depend on
the worker count. Capacity lookups are generated once per (frequency,
reliability, simulation-config) and cached on disk.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import costs as costs_mod
from .costs import CostBook, DecileCostResult, cents, usd
from .deciles import Decile, DecileAssets, allocate_fiber, allocate_sites, build_deciles
from .demand import DemandResult, TrafficProfile, decile_demand
from .dimensioning import DecilePlan, Strategy, choose_satellite, plan_decile, to_satellite
from .ingest import Dataset, IncomeGroup, Sector, impute_wages
from .radio import CapacityLookup, SimConfig, build_lookup, config_hash, \
    config_from_mapping, lookup_filename, read_lookup_csv, write_lookup_csv

log = logging.getLogger(__name__)

_SCENARIO_KEYS = (
    "name", "monthly_gb", "reliability_pct", "adoption_rate_pct",
    "busy_hour_share_pct", "days_per_month", "end_year", "lookup",
)


class ScenarioError(ValueError):
    pass


class CountryRunError(RuntimeError):
    def __init__(self, country_iso3: str, cause: Exception):
        self.country_iso3 = country_iso3
        super().__init__(f"country {country_iso3}: {cause}")


@dataclass(frozen=True)
class Scenario:
    """One policy point: consumption targets per income group plus QoS."""

    name: str
    monthly_gb: Mapping[str, float]  # keys AE, EME, LIDC
    reliability_pct: float = 95.0
    adoption_rate_pct: float | None = None   # None: per-country value
    busy_hour_share_pct: float = 15.0
    days_per_month: int = 30
    end_year: int | None = None              # None: per-country value
    sim: SimConfig = SimConfig()

    def __post_init__(self):
        groups = {g.value for g in IncomeGroup}
        if set(self.monthly_gb) != groups:
            raise ScenarioError(
                f"monthly_gb must cover exactly {sorted(groups)}, got {sorted(self.monthly_gb)}"
            )
        if not 0 < self.reliability_pct < 100:
            raise ScenarioError(
                f"reliability_pct must be in (0, 100), got {self.reliability_pct}"
            )


def load_scenario(path: Path | str) -> Scenario:
    path = Path(path)
    raw = yaml_load(path)
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: scenario must be a key-value mapping")
    unknown = sorted(set(raw) - set(_SCENARIO_KEYS))
    if unknown:
        raise ScenarioError(f"{path}: unknown scenario key(s): {', '.join(unknown)}")
    missing = sorted(k for k in ("name", "monthly_gb") if k not in raw)
    if missing:
        raise ScenarioError(f"{path}: missing scenario key(s): {', '.join(missing)}")
    try:
        sim = config_from_mapping(raw.get("lookup") or {}, base=SimConfig())
    except ValueError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    kwargs = {k: v for k, v in raw.items() if k not in ("lookup",)}
    try:
        return Scenario(sim=sim, **kwargs)
    except TypeError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def yaml_load(path: Path):
    import yaml

    return yaml.safe_load(path.read_text(encoding="utf-8"))


def scenario_hash(scenario: Scenario) -> str:
    payload = asdict(scenario)
    payload["monthly_gb"] = dict(sorted(dict(scenario.monthly_gb).items()))
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()[:16]


class LookupStore:
    """Capacity lookups with a disk cache keyed by simulation config.

    With ``keyed_by_hash=False`` the directory itself is the table location
    (used for explicitly supplied lookup tables).
    """

    def __init__(self, sim: SimConfig, cache_dir: Path | str | None = None,
                 keyed_by_hash: bool = True):
        self.sim = sim
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.keyed_by_hash = keyed_by_hash

    def directory(self) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / config_hash(self.sim) if self.keyed_by_hash else self.cache_dir

    def get(self, frequencies: Iterable[float], reliability_pct: float,
            ) -> dict[float, CapacityLookup]:
        wanted = sorted(set(frequencies))
        found: dict[float, CapacityLookup] = {}
        directory = self.directory()
        missing: list[float] = []
        for freq in wanted:
            path = directory / lookup_filename(freq, reliability_pct) if directory else None
            if path is not None and path.exists():
                found[freq] = read_lookup_csv(path)
            else:
                missing.append(freq)
        if missing:
            log.info("building capacity lookups for %s MHz at %g%% reliability",
                     ",".join(f"{f:g}" for f in missing), reliability_pct)
            built = build_lookup(missing, reliability_pct, self.sim)
            if directory is not None:
                for lookup in built.values():
                    write_lookup_csv(lookup, directory)
            found.update(built)
        return found


@dataclass(frozen=True)
class DecileOutcome:
    decile: Decile
    assets: DecileAssets
    demand: DemandResult
    plan: DecilePlan
    cost: DecileCostResult
    unconnected_users: int
    investment_cents: int = 0    # share of the country price tag


@dataclass(frozen=True)
class CountryResult:
    country_iso3: str
    income_group: str
    region: str
    tpu_usd: float
    total_cost_usd: float
    total_cost_cents: int
    served_users: float
    unconnected_users: int
    gdp_usd: float
    gdp_share_pct: float
    deciles: tuple[DecileOutcome, ...]


def _apportion(total: int, weights: Sequence[float]) -> list[int]:
    """Split an integer total proportionally to weights (largest remainder)."""
    if total < 0:
        raise ValueError("total must be >= 0")
    n = len(weights)
    weight_sum = float(sum(weights))
    if n == 0:
        if total:
            raise ValueError("cannot apportion a nonzero total over nothing")
        return []
    if weight_sum <= 0:
        out = [0] * n
        out[0] = total
        return out
    shares = [round(total * w / weight_sum, 9) for w in weights]
    out = [int(math.floor(s)) for s in shares]
    remainders = [(s - o, -i) for i, (s, o) in enumerate(zip(shares, out))]
    leftover = total - sum(out)
    for _, neg_i in sorted(remainders, reverse=True)[:leftover]:
        out[-neg_i] += 1
    return out


def effective_costbook(dataset: Dataset, country_iso3: str) -> CostBook:
    """Cost book with this country's (imputed) wages substituted in."""
    book = dataset.cost_book
    updates = {}
    for sector, field_name in ((Sector.ICT, "wage_ict_usd_hr"),
                               (Sector.LOGISTICS, "wage_logistics_usd_hr"),
                               (Sector.CONSTRUCTION, "wage_construction_usd_hr")):
        wage = dataset.wages.wage_for(country_iso3, sector)
        if wage is not None:
            updates[field_name] = wage
    return replace(book, **updates) if updates else book


def run_country(
    dataset: Dataset,
    country_iso3: str,
    scenario: Scenario,
    lookups: Mapping[float, CapacityLookup],
    deciles_override: Sequence[Decile] | None = None,
) -> CountryResult:
    """Full pipeline for one country: deciles -> demand -> plan -> costs."""
    try:
        return _run_country(dataset, country_iso3, scenario, lookups, deciles_override)
    except CountryRunError:
        raise
    except Exception as exc:
        raise CountryRunError(country_iso3, exc) from exc


def _run_country(dataset, country_iso3, scenario, lookups, deciles_override):
    params = dataset.country(country_iso3)
    decs = list(deciles_override) if deciles_override is not None else \
        build_deciles(country_iso3, dataset.areas_for(country_iso3))
    assets = allocate_sites(decs, params.total_sites,
                            params.coverage_4g_pct, params.coverage_2g_pct)
    assets = allocate_fiber(assets, params.fiber_backhaul_share_pct)

    end_year = scenario.end_year if scenario.end_year is not None else params.end_year
    years = end_year - params.start_year
    if years < 0:
        raise ValueError(f"scenario end year {end_year} precedes start year {params.start_year}")
    book = effective_costbook(dataset, country_iso3)
    horizon = book.horizon_years if book.horizon_years is not None else years
    adoption = scenario.adoption_rate_pct if scenario.adoption_rate_pct is not None \
        else params.adoption_rate_pct
    profile = TrafficProfile(
        monthly_gb=scenario.monthly_gb[params.income_group.value],
        days_per_month=scenario.days_per_month,
        busy_hour_share_pct=scenario.busy_hour_share_pct,
    )
    unconnected = _apportion(params.unconnected_users, [d.population for d in decs])
    group = params.income_group.value

    policy_cents = cents(book.policy_per_user_usd)
    skills_cents = cents(book.skills_per_user_usd)
    outcomes: list[DecileOutcome] = []
    for dec, asset, unconn in zip(decs, assets, unconnected):
        dem = decile_demand(
            dec.population, dec.area_km2, params.pop_growth_rate_pct_per_year,
            years, adoption, params.market_share_pct, params.active_share_pct, profile,
        )
        plan = plan_decile(dec, asset, dem.demand_density_mbps_km2,
                           lookups, params.spectrum_portfolio)
        satellite_cents = costs_mod.satellite_cost_cents(unconn, group, book, horizon)
        use_satellite = plan.unmeetable
        capex = costs_mod.CapexBreakdown()
        opex = metro = 0
        if not plan.unmeetable:
            capex, opex, metro = costs_mod.terrestrial_build_cents(
                plan.required_total_sites, plan.new_builds, plan.upgrades,
                dec.area_km2, params.fiber_backhaul_share_pct, book, horizon,
            )
            if plan.strategy is Strategy.TERRESTRIAL and unconn > 0:
                infra_cents = capex.total + opex + metro
                terrestrial_per_user = usd(infra_cents) / unconn
                satellite_per_user = usd(satellite_cents) / unconn
                use_satellite = (
                    choose_satellite(terrestrial_per_user, satellite_per_user)
                    is Strategy.SATELLITE
                )
        if use_satellite:
            plan = to_satellite(plan, unconn)
            cost = DecileCostResult(
                decile_index=dec.decile_index,
                satellite_cents=satellite_cents,
                policy_cents=policy_cents * unconn,
                skills_cents=skills_cents * unconn,
            )
        else:
            cost = DecileCostResult(
                decile_index=dec.decile_index,
                capex=capex,
                metro_core_fiber_cents=metro,
                opex_cents=opex,
                policy_cents=policy_cents * unconn,
                skills_cents=skills_cents * unconn,
            )
        outcomes.append(DecileOutcome(
            decile=dec, assets=asset, demand=dem, plan=plan,
            cost=cost, unconnected_users=unconn,
        ))

    numerator_cents = sum(o.cost.total_cents for o in outcomes)
    served = sum(o.demand.served_users for o in outcomes)
    tpu = costs_mod.tpu_usd(numerator_cents, served) if numerator_cents else 0.0
    total_cost = costs_mod.total_cost_usd(tpu, params.unconnected_users)
    total_cost_cents = int(round(total_cost * 100))
    investment = _apportion(total_cost_cents, [o.cost.total_cents for o in outcomes])
    outcomes = [replace(o, investment_cents=i) for o, i in zip(outcomes, investment)]
    return CountryResult(
        country_iso3=country_iso3,
        income_group=group,
        region=params.region.value,
        tpu_usd=tpu,
        total_cost_usd=total_cost,
        total_cost_cents=total_cost_cents,
        served_users=served,
        unconnected_users=params.unconnected_users,
        gdp_usd=params.gdp_usd,
        gdp_share_pct=total_cost / params.gdp_usd * 100.0,
        deciles=tuple(outcomes),
    )


@dataclass(frozen=True)
class AggregateReport:
    scenario_name: str
    countries: tuple[CountryResult, ...]
    global_total_cents: int
    by_income_group: dict[str, int]
    by_region: dict[str, int]
    by_group_decile: dict[tuple[str, int], int]
    by_region_decile: dict[tuple[str, int], int]
    gdp_share_by_group: dict[str, float]
    gdp_share_by_region: dict[str, float]
    gdp_share_global_pct: float


def aggregate(scenario_name: str, results: Sequence[CountryResult]) -> AggregateReport:
    """Fold country results into group/region/decile totals (exact cents)."""
    ordered = tuple(sorted(results, key=lambda r: r.country_iso3))
    by_group: dict[str, int] = {}
    by_region: dict[str, int] = {}
    by_group_decile: dict[tuple[str, int], int] = {}
    by_region_decile: dict[tuple[str, int], int] = {}
    gdp_by_group: dict[str, float] = {}
    gdp_by_region: dict[str, float] = {}
    for res in ordered:
        by_group[res.income_group] = by_group.get(res.income_group, 0) + res.total_cost_cents
        by_region[res.region] = by_region.get(res.region, 0) + res.total_cost_cents
        gdp_by_group[res.income_group] = gdp_by_group.get(res.income_group, 0.0) + res.gdp_usd
        gdp_by_region[res.region] = gdp_by_region.get(res.region, 0.0) + res.gdp_usd
        for outcome in res.deciles:
            gkey = (res.income_group, outcome.decile.decile_index)
            rkey = (res.region, outcome.decile.decile_index)
            by_group_decile[gkey] = by_group_decile.get(gkey, 0) + outcome.investment_cents
            by_region_decile[rkey] = by_region_decile.get(rkey, 0) + outcome.investment_cents
    total = sum(r.total_cost_cents for r in ordered)
    total_gdp = sum(r.gdp_usd for r in ordered)
    return AggregateReport(
        scenario_name=scenario_name,
        countries=ordered,
        global_total_cents=total,
        by_income_group=by_group,
        by_region=by_region,
        by_group_decile=by_group_decile,
        by_region_decile=by_region_decile,
        gdp_share_by_group={g: usd(c) / gdp_by_group[g] * 100.0 for g, c in by_group.items()},
        gdp_share_by_region={r: usd(c) / gdp_by_region[r] * 100.0 for r, c in by_region.items()},
        gdp_share_global_pct=(usd(total) / total_gdp * 100.0) if total_gdp else 0.0,
    )


def _country_task(args) -> CountryResult:
    dataset, iso3, scenario, lookups = args
    return run_country(dataset, iso3, scenario, lookups)


def run_global(
    dataset: Dataset,
    scenario: Scenario,
    lookup_store: LookupStore,
    jobs: int = 1,
) -> AggregateReport:
    """Run every country and aggregate. Any country failure aborts the run."""
    dataset = prepare_dataset(dataset)
    frequencies = {
        band.frequency_mhz
        for country in dataset.countries
        for band in country.spectrum_portfolio
    }
    lookups = lookup_store.get(frequencies, scenario.reliability_pct)
    codes = dataset.country_codes()
    if jobs > 1 and len(codes) > 1:
        tasks = [(dataset, iso3, scenario, lookups) for iso3 in codes]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_country_task, tasks))
    else:
        results = [run_country(dataset, iso3, scenario, lookups) for iso3 in codes]
    return aggregate(scenario.name, results)


def prepare_dataset(dataset: Dataset) -> Dataset:
    """Impute missing wages; log the per-sector fit quality."""
    if all(r.hourly_wage_usd is not None for r in dataset.wages.rows):
        return dataset
    imputed, r2 = impute_wages(dataset.wages)
    for sector, value in sorted(r2.items(), key=lambda kv: kv[0].value):
        log.info("wage imputation %s: R^2 = %.4f", sector.value, value)
    return replace(dataset, wages=imputed)


# ---------------------------------------------------------------------------
# result files

def _atomic_writer(path: Path):
    tmp = path.with_name(path.name + ".tmp")
    return tmp


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    tmp = _atomic_writer(path)
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    tmp.replace(path)


def _money(cents_value: int) -> str:
    return f"{usd(cents_value):.2f}"


def write_results(report: AggregateReport, out_dir: Path | str) -> list[Path]:
    """Write the four result tables. Returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    path = out_dir / "results_country.csv"
    _write_csv(path, (
        "country_iso3", "income_group", "region", "served_users",
        "unconnected_users", "tpu_usd", "total_cost_usd", "gdp_share_pct",
    ), (
        (
            r.country_iso3, r.income_group, r.region, f"{r.served_users:.3f}",
            r.unconnected_users, f"{r.tpu_usd:.4f}", _money(r.total_cost_cents),
            f"{r.gdp_share_pct:.6f}",
        )
        for r in report.countries
    ))
    paths.append(path)

    path = out_dir / "results_decile.csv"
    _write_csv(path, (
        "country_iso3", "decile", "population", "area_km2", "density_per_km2",
        "existing_4g_sites", "existing_non4g_sites", "fiber_backhaul_sites",
        "required_total_sites", "new_builds", "upgrades", "strategy",
        "satellite_users", "unconnected_users", "capex_usd",
        "metro_core_fiber_usd", "opex_usd", "satellite_usd", "policy_usd",
        "skills_usd", "decile_cost_usd", "investment_usd",
    ), (
        (
            r.country_iso3, o.decile.decile_index, f"{o.decile.population:.3f}",
            f"{o.decile.area_km2:.3f}", f"{o.decile.density:.6f}",
            o.assets.existing_4g_sites, o.assets.existing_non4g_sites,
            o.assets.fiber_backhaul_sites, o.plan.required_total_sites,
            o.plan.new_builds, o.plan.upgrades, o.plan.strategy.value,
            o.plan.satellite_users, o.unconnected_users, _money(o.cost.capex.total),
            _money(o.cost.metro_core_fiber_cents), _money(o.cost.opex_cents),
            _money(o.cost.satellite_cents), _money(o.cost.policy_cents),
            _money(o.cost.skills_cents), _money(o.cost.total_cents),
            _money(o.investment_cents),
        )
        for r in report.countries for o in r.deciles
    ))
    paths.append(path)

    rows: list[tuple] = [("global", "ALL", "", _money(report.global_total_cents),
                          f"{report.gdp_share_global_pct:.6f}")]
    for group in sorted(report.by_income_group):
        rows.append(("income_group", group, "", _money(report.by_income_group[group]),
                     f"{report.gdp_share_by_group[group]:.6f}"))
    for region in sorted(report.by_region):
        rows.append(("region", region, "", _money(report.by_region[region]),
                     f"{report.gdp_share_by_region[region]:.6f}"))
    for group, decile in sorted(report.by_group_decile):
        rows.append(("income_group_decile", group, decile,
                     _money(report.by_group_decile[(group, decile)]), ""))
    for region, decile in sorted(report.by_region_decile):
        rows.append(("region_decile", region, decile,
                     _money(report.by_region_decile[(region, decile)]), ""))
    path = out_dir / "results_aggregate.csv"
    _write_csv(path, ("kind", "key", "decile", "total_usd", "gdp_share_pct"), rows)
    paths.append(path)

    path = out_dir / "deciles.csv"
    _write_csv(path, (
        "country_iso3", "decile", "population", "area_km2", "density_per_km2",
        "existing_4g_sites", "existing_non4g_sites", "fiber_backhaul_sites",
    ), (
        (
            r.country_iso3, o.decile.decile_index, f"{o.decile.population:.3f}",
            f"{o.decile.area_km2:.3f}", f"{o.decile.density:.6f}",
            o.assets.existing_4g_sites, o.assets.existing_non4g_sites,
            o.assets.fiber_backhaul_sites,
        )
        for r in report.countries for o in r.deciles
    ))
    paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepRow:
    scenario: str
    kind: str   # global | income_group | region
    key: str
    total_cents: int
    baseline_cents: int

    @property
    def delta_cents(self) -> int:
        return self.total_cents - self.baseline_cents

    @property
    def delta_pct(self) -> float:
        if self.baseline_cents == 0:
            return 0.0
        return self.delta_cents / self.baseline_cents * 100.0


@dataclass(frozen=True)
class SweepReport:
    baseline: str
    rows: tuple[SweepRow, ...]
    reports: tuple[AggregateReport, ...]


def sweep(
    dataset: Dataset,
    scenarios: Sequence[Scenario],
    store_for: "callable",
    jobs: int = 1,
) -> SweepReport:
    """Run several scenarios and tabulate totals against the first (baseline).

    ``store_for(scenario)`` supplies the lookup store, so sweeps over
    reliability re-simulate at the right percentile while sharing the cache.
    """
    if len(scenarios) < 2:
        raise ScenarioError("a sweep needs at least 2 scenarios")
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ScenarioError(f"duplicate scenario name(s): {', '.join(dupes)}")
    reports = tuple(
        run_global(dataset, s, store_for(s), jobs=jobs) for s in scenarios
    )
    base = reports[0]
    rows: list[SweepRow] = []
    for rep in reports:
        rows.append(SweepRow(rep.scenario_name, "global", "ALL",
                             rep.global_total_cents, base.global_total_cents))
        for group in sorted(rep.by_income_group):
            rows.append(SweepRow(rep.scenario_name, "income_group", group,
                                 rep.by_income_group[group],
                                 base.by_income_group.get(group, 0)))
        for region in sorted(rep.by_region):
            rows.append(SweepRow(rep.scenario_name, "region", region,
                                 rep.by_region[region],
                                 base.by_region.get(region, 0)))
    return SweepReport(baseline=base.scenario_name, rows=tuple(rows), reports=reports)


def write_sweep(report: SweepReport, out_dir: Path | str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "sweep.csv"
    _write_csv(path, (
        "scenario", "kind", "key", "total_usd", "baseline_total_usd",
        "delta_usd", "delta_pct",
    ), (
        (
            row.scenario, row.kind, row.key, _money(row.total_cents),
            _money(row.baseline_cents), _money(row.delta_cents),
            f"{row.delta_pct:.4f}",
        )
        for row in report.rows
    ))
    return path
