"""Tabular input loading, validation, and wage imputation.

Input files (UTF-8 CSV, decimal point, no thousands separators):

* ``areas.csv``      -- area_id,country_iso3,population,area_km2
* ``countries.csv``  -- one row per country (see COUNTRY_COLUMNS); the
  spectrum portfolio is encoded ``freq:bw|freq:bw`` in MHz
* ``wages.csv``      -- country_iso3,sector,hourly_wage_usd,gdp_per_capita_usd
  (empty wage cell = missing, to be imputed)
* ``costbook.yaml``  -- keys mirror the CostBook fields one-to-one

Validation collects every violation before rejecting, so the CLI can print
a full report rather than the first failure.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .costs import CostBook, load_costbook, save_costbook

log = logging.getLogger(__name__)


class IncomeGroup(str, Enum):
    AE = "AE"
    EME = "EME"
    LIDC = "LIDC"


class Region(str, Enum):
    AE = "AE"
    CCA = "CCA"
    EDA = "EDA"
    EDE = "EDE"
    LAC = "LAC"
    MENAP = "MENAP"
    SSA = "SSA"


class Sector(str, Enum):
    ICT = "ICT"
    LOGISTICS = "logistics"
    CONSTRUCTION = "construction"


# Continental fiber-backhaul shares folded onto the region taxonomy; used
# only when a country row leaves fiber_backhaul_share_pct empty.
REGION_FIBER_SHARE_DEFAULT_PCT = {
    Region.AE: 62.0,
    Region.CCA: 17.0,
    Region.EDA: 17.0,
    Region.EDE: 33.0,
    Region.LAC: 21.0,
    Region.MENAP: 20.0,
    Region.SSA: 15.0,
}

AREA_COLUMNS = ("area_id", "country_iso3", "population", "area_km2")
COUNTRY_COLUMNS = (
    "country_iso3", "income_group", "region", "pop_growth_rate_pct_per_year",
    "start_year", "end_year", "adoption_rate_pct", "market_share_pct",
    "active_share_pct", "total_sites", "coverage_2g_pct", "coverage_4g_pct",
    "fiber_backhaul_share_pct", "spectrum_portfolio", "unconnected_users",
    "gdp_usd", "monthly_data_target_gb", "reliability_pct",
)
WAGE_COLUMNS = ("country_iso3", "sector", "hourly_wage_usd", "gdp_per_capita_usd")


@dataclass(frozen=True)
class Violation:
    file: str
    row: int | None
    field: str | None
    message: str

    def __str__(self) -> str:
        where = self.file
        if self.row is not None:
            where += f":row {self.row}"
        if self.field:
            where += f":{self.field}"
        return f"{where}: {self.message}"


class ValidationError(ValueError):
    """One or more input violations; ``violations`` holds all of them."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        lines = "\n".join(str(v) for v in self.violations)
        super().__init__(f"{len(self.violations)} input violation(s):\n{lines}")


class WageImputationError(ValueError):
    pass


@dataclass(frozen=True)
class AreaRecord:
    """One local statistical area: the unit that gets grouped into deciles."""

    area_id: str
    country_iso3: str
    population: float
    area_km2: float

    @property
    def density(self) -> float:
        return self.population / self.area_km2


@dataclass(frozen=True)
class SpectrumBand:
    frequency_mhz: float
    bandwidth_mhz: float


@dataclass(frozen=True)
class CountryParams:
    country_iso3: str
    income_group: IncomeGroup
    region: Region
    pop_growth_rate_pct_per_year: float
    start_year: int
    end_year: int
    adoption_rate_pct: float
    market_share_pct: float
    active_share_pct: float
    total_sites: int
    coverage_2g_pct: float
    coverage_4g_pct: float
    fiber_backhaul_share_pct: float
    spectrum_portfolio: tuple[SpectrumBand, ...]
    unconnected_users: int
    gdp_usd: float
    monthly_data_target_gb: float
    reliability_pct: float

    @property
    def assessment_years(self) -> int:
        return self.end_year - self.start_year


@dataclass(frozen=True)
class WageRow:
    country_iso3: str
    sector: Sector
    hourly_wage_usd: float | None
    gdp_per_capita_usd: float


@dataclass(frozen=True)
class WageTable:
    rows: tuple[WageRow, ...]

    def wage_for(self, country_iso3: str, sector: Sector) -> float | None:
        for row in self.rows:
            if row.country_iso3 == country_iso3 and row.sector == sector:
                return row.hourly_wage_usd
        return None

    def observed(self, sector: Sector) -> list[WageRow]:
        return [r for r in self.rows if r.sector == sector and r.hourly_wage_usd is not None]

    def missing(self, sector: Sector) -> list[WageRow]:
        return [r for r in self.rows if r.sector == sector and r.hourly_wage_usd is None]


@dataclass(frozen=True)
class Dataset:
    """Validated, immutable input bundle shared across country runs."""

    areas: tuple[AreaRecord, ...]
    countries: tuple[CountryParams, ...]
    wages: WageTable
    cost_book: CostBook

    def country(self, iso3: str) -> CountryParams:
        for c in self.countries:
            if c.country_iso3 == iso3:
                return c
        raise KeyError(f"unknown country {iso3!r}")

    def areas_for(self, iso3: str) -> list[AreaRecord]:
        return [a for a in self.areas if a.country_iso3 == iso3]

    def country_codes(self) -> list[str]:
        return sorted(c.country_iso3 for c in self.countries)


def _parse_number(
    text: str, kind: str, file: str, row: int, col: str, violations: list[Violation]
) -> float | int | None:
    try:
        return int(text) if kind == "int" else float(text)
    except ValueError:
        violations.append(Violation(file, row, col, f"not a valid {kind}: {text!r}"))
        return None


def _check_header(header: list[str] | None, expected: tuple[str, ...], file: str,
                  violations: list[Violation]) -> bool:
    if header is None:
        violations.append(Violation(file, None, None, "empty file"))
        return False
    if tuple(h.strip() for h in header) != expected:
        violations.append(Violation(
            file, None, None,
            f"bad header: expected {','.join(expected)}, got {','.join(header)}",
        ))
        return False
    return True


def _read_rows(path: Path) -> tuple[list[str] | None, list[tuple[int, dict[str, str]]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return None, []
        rows = []
        for i, raw in enumerate(reader, start=2):  # row 1 is the header
            if not raw or all(not cell.strip() for cell in raw):
                continue
            rows.append((i, dict(zip(header, (cell.strip() for cell in raw)))))
    return header, rows


def load_areas(path: Path, violations: list[Violation]) -> list[AreaRecord]:
    fname = path.name
    header, rows = _read_rows(path)
    if not _check_header(header, AREA_COLUMNS, fname, violations):
        return []
    areas: list[AreaRecord] = []
    seen: set[tuple[str, str]] = set()
    for rownum, rec in rows:
        pop = _parse_number(rec["population"], "float", fname, rownum, "population", violations)
        area = _parse_number(rec["area_km2"], "float", fname, rownum, "area_km2", violations)
        if pop is None or area is None:
            continue
        if pop < 0:
            violations.append(Violation(fname, rownum, "population", f"must be >= 0, got {pop}"))
            continue
        if area <= 0:
            violations.append(Violation(fname, rownum, "area_km2", f"must be > 0, got {area}"))
            continue
        key = (rec["country_iso3"], rec["area_id"])
        if key in seen:
            violations.append(Violation(
                fname, rownum, "area_id", f"duplicate area {key[1]!r} for country {key[0]}"
            ))
            continue
        seen.add(key)
        areas.append(AreaRecord(rec["area_id"], rec["country_iso3"], pop, area))
    return areas


def parse_spectrum_portfolio(text: str) -> tuple[SpectrumBand, ...]:
    """Parse ``freq:bw|freq:bw`` (MHz) into spectrum bands."""
    bands = []
    for chunk in text.split("|"):
        freq_s, _, bw_s = chunk.partition(":")
        band = SpectrumBand(float(freq_s), float(bw_s))
        if band.frequency_mhz <= 0 or band.bandwidth_mhz <= 0:
            raise ValueError(f"non-positive frequency or bandwidth in {chunk!r}")
        bands.append(band)
    return tuple(bands)


def format_spectrum_portfolio(portfolio: tuple[SpectrumBand, ...]) -> str:
    return "|".join(f"{b.frequency_mhz:g}:{b.bandwidth_mhz:g}" for b in portfolio)


_PCT_COLUMNS = (
    "adoption_rate_pct", "market_share_pct", "active_share_pct",
    "coverage_2g_pct", "coverage_4g_pct", "reliability_pct",
)


def load_countries(path: Path, violations: list[Violation]) -> list[CountryParams]:
    fname = path.name
    header, rows = _read_rows(path)
    if not _check_header(header, COUNTRY_COLUMNS, fname, violations):
        return []
    countries: list[CountryParams] = []
    seen: set[str] = set()
    for rownum, rec in rows:
        bad = False
        iso3 = rec["country_iso3"]
        if iso3 in seen:
            violations.append(Violation(fname, rownum, "country_iso3", f"duplicate country {iso3}"))
            continue
        seen.add(iso3)
        try:
            group = IncomeGroup(rec["income_group"])
        except ValueError:
            violations.append(Violation(
                fname, rownum, "income_group",
                f"must be one of {[g.value for g in IncomeGroup]}, got {rec['income_group']!r}",
            ))
            bad = True
        try:
            region = Region(rec["region"])
        except ValueError:
            violations.append(Violation(
                fname, rownum, "region",
                f"must be one of {[r.value for r in Region]}, got {rec['region']!r}",
            ))
            bad = True
        nums: dict[str, float | int] = {}
        int_cols = ("start_year", "end_year", "total_sites", "unconnected_users")
        float_cols = (
            "pop_growth_rate_pct_per_year", "adoption_rate_pct", "market_share_pct",
            "active_share_pct", "coverage_2g_pct", "coverage_4g_pct",
            "gdp_usd", "monthly_data_target_gb", "reliability_pct",
        )
        for col in int_cols:
            v = _parse_number(rec[col], "int", fname, rownum, col, violations)
            if v is None:
                bad = True
            else:
                nums[col] = v
        for col in float_cols:
            v = _parse_number(rec[col], "float", fname, rownum, col, violations)
            if v is None:
                bad = True
            else:
                nums[col] = v
        fiber_raw = rec["fiber_backhaul_share_pct"]
        fiber_share: float | None
        if fiber_raw == "":
            fiber_share = None
        else:
            fiber_share = _parse_number(
                fiber_raw, "float", fname, rownum, "fiber_backhaul_share_pct", violations
            )
            if fiber_share is None:
                bad = True
        try:
            portfolio = parse_spectrum_portfolio(rec["spectrum_portfolio"])
        except ValueError as exc:
            violations.append(Violation(fname, rownum, "spectrum_portfolio", str(exc)))
            bad = True
        if bad:
            continue
        if fiber_share is None:
            fiber_share = REGION_FIBER_SHARE_DEFAULT_PCT[region]
            log.warning(
                "%s: fiber_backhaul_share_pct missing, using %s default %.0f%%",
                iso3, region.value, fiber_share,
            )
        for col in _PCT_COLUMNS:
            if not 0 <= nums[col] <= 100:
                violations.append(Violation(fname, rownum, col, f"must be in [0, 100], got {nums[col]}"))
                bad = True
        if not 0 <= fiber_share <= 100:
            violations.append(Violation(
                fname, rownum, "fiber_backhaul_share_pct", f"must be in [0, 100], got {fiber_share}"
            ))
            bad = True
        if nums["end_year"] < nums["start_year"]:
            violations.append(Violation(
                fname, rownum, "end_year",
                f"end_year {nums['end_year']} before start_year {nums['start_year']}",
            ))
            bad = True
        if nums["total_sites"] < 0:
            violations.append(Violation(fname, rownum, "total_sites", "must be >= 0"))
            bad = True
        if nums["unconnected_users"] < 0:
            violations.append(Violation(fname, rownum, "unconnected_users", "must be >= 0"))
            bad = True
        if nums["gdp_usd"] <= 0:
            violations.append(Violation(fname, rownum, "gdp_usd", "must be > 0"))
            bad = True
        if nums["monthly_data_target_gb"] < 0:
            violations.append(Violation(fname, rownum, "monthly_data_target_gb", "must be >= 0"))
            bad = True
        if bad:
            continue
        countries.append(CountryParams(
            country_iso3=iso3,
            income_group=group,
            region=region,
            pop_growth_rate_pct_per_year=nums["pop_growth_rate_pct_per_year"],
            start_year=int(nums["start_year"]),
            end_year=int(nums["end_year"]),
            adoption_rate_pct=nums["adoption_rate_pct"],
            market_share_pct=nums["market_share_pct"],
            active_share_pct=nums["active_share_pct"],
            total_sites=int(nums["total_sites"]),
            coverage_2g_pct=nums["coverage_2g_pct"],
            coverage_4g_pct=nums["coverage_4g_pct"],
            fiber_backhaul_share_pct=fiber_share,
            spectrum_portfolio=portfolio,
            unconnected_users=int(nums["unconnected_users"]),
            gdp_usd=nums["gdp_usd"],
            monthly_data_target_gb=nums["monthly_data_target_gb"],
            reliability_pct=nums["reliability_pct"],
        ))
    return countries


def load_wages(path: Path, violations: list[Violation]) -> WageTable:
    fname = path.name
    header, rows = _read_rows(path)
    if not _check_header(header, WAGE_COLUMNS, fname, violations):
        return WageTable(())
    out: list[WageRow] = []
    seen: set[tuple[str, str]] = set()
    for rownum, rec in rows:
        try:
            sector = Sector(rec["sector"])
        except ValueError:
            violations.append(Violation(
                fname, rownum, "sector",
                f"must be one of {[s.value for s in Sector]}, got {rec['sector']!r}",
            ))
            continue
        key = (rec["country_iso3"], sector.value)
        if key in seen:
            violations.append(Violation(
                fname, rownum, "sector", f"duplicate wage row for {key[0]}/{key[1]}"
            ))
            continue
        seen.add(key)
        wage: float | None = None
        if rec["hourly_wage_usd"] != "":
            wage = _parse_number(rec["hourly_wage_usd"], "float", fname, rownum,
                                 "hourly_wage_usd", violations)
            if wage is None:
                continue
            if wage <= 0:
                violations.append(Violation(fname, rownum, "hourly_wage_usd",
                                            f"must be > 0 when present, got {wage}"))
                continue
        gdp = _parse_number(rec["gdp_per_capita_usd"], "float", fname, rownum,
                            "gdp_per_capita_usd", violations)
        if gdp is None:
            continue
        if gdp <= 0:
            violations.append(Violation(fname, rownum, "gdp_per_capita_usd",
                                        f"must be > 0, got {gdp}"))
            continue
        out.append(WageRow(rec["country_iso3"], sector, wage, gdp))
    return WageTable(tuple(out))


def _cross_checks(areas: list[AreaRecord], countries: list[CountryParams],
                  wages: WageTable, violations: list[Violation]) -> None:
    known = {c.country_iso3 for c in countries}
    area_countries = {a.country_iso3 for a in areas}
    for a in areas:
        if a.country_iso3 not in known:
            violations.append(Violation(
                "areas.csv", None, "country_iso3",
                f"area {a.area_id!r} references unknown country {a.country_iso3}",
            ))
            known.add(a.country_iso3)  # report each unknown code once
    for c in countries:
        if c.country_iso3 not in area_countries:
            violations.append(Violation(
                "countries.csv", None, "country_iso3",
                f"country {c.country_iso3} has no area rows",
            ))
    for w in wages.rows:
        if w.country_iso3 not in {c.country_iso3 for c in countries}:
            violations.append(Violation(
                "wages.csv", None, "country_iso3",
                f"wage row references unknown country {w.country_iso3}",
            ))
    pop_by_country: dict[str, float] = {}
    for a in areas:
        pop_by_country[a.country_iso3] = pop_by_country.get(a.country_iso3, 0.0) + a.population
    for c in countries:
        national = pop_by_country.get(c.country_iso3, 0.0)
        if c.unconnected_users > national:
            violations.append(Violation(
                "countries.csv", None, "unconnected_users",
                f"{c.country_iso3}: unconnected_users {c.unconnected_users} exceeds "
                f"national population {national:g}",
            ))


def validate_inputs(data_dir: Path | str, costbook_path: Path | str | None = None,
                    ) -> tuple[Dataset | None, list[Violation]]:
    """Load everything, returning (dataset, violations).

    The dataset is None whenever any violation was found. Missing files raise
    FileNotFoundError (an environment problem, not a data problem).
    """
    data_dir = Path(data_dir)
    costbook_path = Path(costbook_path) if costbook_path else data_dir / "costbook.yaml"
    for p in (data_dir / "areas.csv", data_dir / "countries.csv",
              data_dir / "wages.csv", costbook_path):
        if not p.exists():
            raise FileNotFoundError(f"missing input file: {p}")
    violations: list[Violation] = []
    areas = load_areas(data_dir / "areas.csv", violations)
    countries = load_countries(data_dir / "countries.csv", violations)
    wages = load_wages(data_dir / "wages.csv", violations)
    try:
        book = load_costbook(costbook_path)
    except Exception as exc:  # costbook errors become violations too
        violations.append(Violation(costbook_path.name, None, None, str(exc)))
        book = None
    _cross_checks(areas, countries, wages, violations)
    if violations or book is None:
        return None, violations
    dataset = Dataset(
        areas=tuple(areas),
        countries=tuple(sorted(countries, key=lambda c: c.country_iso3)),
        wages=wages,
        cost_book=book,
    )
    return dataset, []


def load_dataset(data_dir: Path | str, costbook_path: Path | str | None = None) -> Dataset:
    """Load and validate inputs, raising ValidationError with every violation."""
    dataset, violations = validate_inputs(data_dir, costbook_path)
    if dataset is None:
        raise ValidationError(violations)
    return dataset


def save_dataset(dataset: Dataset, out_dir: Path | str) -> None:
    """Re-serialize a dataset; reloading the result reproduces it exactly."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "areas.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(AREA_COLUMNS)
        for a in dataset.areas:
            w.writerow([a.area_id, a.country_iso3, repr(a.population), repr(a.area_km2)])
    with (out_dir / "countries.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(COUNTRY_COLUMNS)
        for c in dataset.countries:
            w.writerow([
                c.country_iso3, c.income_group.value, c.region.value,
                repr(c.pop_growth_rate_pct_per_year), c.start_year, c.end_year,
                repr(c.adoption_rate_pct), repr(c.market_share_pct),
                repr(c.active_share_pct), c.total_sites,
                repr(c.coverage_2g_pct), repr(c.coverage_4g_pct),
                repr(c.fiber_backhaul_share_pct),
                format_spectrum_portfolio(c.spectrum_portfolio),
                c.unconnected_users, repr(c.gdp_usd),
                repr(c.monthly_data_target_gb), repr(c.reliability_pct),
            ])
    with (out_dir / "wages.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(WAGE_COLUMNS)
        for row in dataset.wages.rows:
            wage = "" if row.hourly_wage_usd is None else repr(row.hourly_wage_usd)
            w.writerow([row.country_iso3, row.sector.value, wage, repr(row.gdp_per_capita_usd)])
    save_costbook(dataset.cost_book, out_dir / "costbook.yaml")


def fit_log_wage_curve(observed: list[WageRow]) -> tuple[float, float, float]:
    """OLS of ln(wage) on ln(gdp per capita): returns (intercept, slope, r_squared)."""
    gdp = np.array([r.gdp_per_capita_usd for r in observed], dtype=float)
    wage = np.array([r.hourly_wage_usd for r in observed], dtype=float)
    ln_x = np.log(gdp)
    ln_y = np.log(wage)
    if np.ptp(ln_x) == 0:
        raise WageImputationError("gdp per capita has no variation; cannot fit")
    slope, intercept = np.polyfit(ln_x, ln_y, 1)
    resid = ln_y - (intercept + slope * ln_x)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((ln_y - ln_y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 and ss_res == 0 else 1.0 - ss_res / ss_tot
    return float(intercept), float(slope), r2


def impute_wages(wages: WageTable) -> tuple[WageTable, dict[Sector, float]]:
    """Fill missing hourly wages from a per-sector log-log wage curve.

    Observed rows pass through untouched. Returns the completed table and the
    per-sector fit quality (R^2 in log space).
    """
    r2_by_sector: dict[Sector, float] = {}
    fits: dict[Sector, tuple[float, float]] = {}
    for sector in Sector:
        observed = wages.observed(sector)
        if not observed and not wages.missing(sector):
            continue  # sector absent from the table entirely
        if len(observed) < 2:
            raise WageImputationError(
                f"sector {sector.value}: need >= 2 observed wages to fit, have {len(observed)}"
            )
        try:
            intercept, slope, r2 = fit_log_wage_curve(observed)
        except WageImputationError as exc:
            raise WageImputationError(f"sector {sector.value}: {exc}") from None
        fits[sector] = (intercept, slope)
        r2_by_sector[sector] = r2
    out = []
    for row in wages.rows:
        if row.hourly_wage_usd is None:
            intercept, slope = fits[row.sector]
            predicted = math.exp(intercept + slope * math.log(row.gdp_per_capita_usd))
            out.append(replace(row, hourly_wage_usd=predicted))
        else:
            out.append(row)
    return WageTable(tuple(out)), r2_by_sector
