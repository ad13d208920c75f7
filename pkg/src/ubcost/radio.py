"""Monte Carlo capacity lookups: site density -> spectral-efficiency density.

Users are dropped uniformly into a hexagonal cell; the serving signal fades
with free-space path loss plus log-normal shadowing, against first-tier
co-channel interference and thermal noise. Per-user spectral efficiency is
an attenuated, capped Shannon curve. A reliability percentile of the sample,
scaled by cells per site and site density, gives the lookup value in
bps/Hz/km^2 for each grid density.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import SpectrumBand

log = logging.getLogger(__name__)

THERMAL_NOISE_DBM_HZ = -174.0

# 12 log-spaced densities spanning remote to dense-urban, plus the zero row.
DEFAULT_DENSITY_GRID: tuple[float, ...] = (0.0,) + tuple(
    float(d) for d in np.logspace(math.log10(0.001), math.log10(10.0), 12)
)


class MissingLookupError(KeyError):
    """A portfolio frequency has no capacity lookup."""


@dataclass(frozen=True)
class SimConfig:
    iterations: int = 10_000
    rng_seed: int = 42
    shadow_mu_db: float = 2.0
    shadow_sigma_db: float = 10.0
    cells_per_site: int = 3
    se_attenuation: float = 0.75      # fraction of the Shannon bound achieved
    se_max_bps_hz: float = 8.0
    interferer_ring: int = 6
    ue_noise_figure_db: float = 7.0
    tx_power_dbm: float = 40.0
    antenna_gain_dbi: float = 16.0
    channel_bandwidth_mhz: float = 10.0  # reference bandwidth for thermal noise
    density_grid: tuple[float, ...] = DEFAULT_DENSITY_GRID

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.shadow_sigma_db < 0:
            raise ValueError(f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}")
        if not 0 < self.se_attenuation <= 1:
            raise ValueError(f"se_attenuation must be in (0, 1], got {self.se_attenuation}")
        if self.se_max_bps_hz <= 0:
            raise ValueError(f"se_max_bps_hz must be > 0, got {self.se_max_bps_hz}")
        if self.cells_per_site < 1:
            raise ValueError(f"cells_per_site must be >= 1, got {self.cells_per_site}")
        if self.interferer_ring < 0:
            raise ValueError(f"interferer_ring must be >= 0, got {self.interferer_ring}")
        if self.channel_bandwidth_mhz <= 0:
            raise ValueError(f"channel_bandwidth_mhz must be > 0, got {self.channel_bandwidth_mhz}")
        grid = self.density_grid
        if len(grid) < 2 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("density_grid must be strictly increasing with >= 2 points")
        object.__setattr__(self, "density_grid", tuple(float(d) for d in grid))


def config_hash(config: SimConfig) -> str:
    """Stable digest of a simulation configuration, for cache keying."""
    payload = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def config_from_mapping(raw: Mapping, base: SimConfig | None = None) -> SimConfig:
    """Build a SimConfig from file keys; unknown keys are errors."""
    known = {f.name for f in fields(SimConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"unknown simulation config key(s): {', '.join(unknown)}")
    merged = asdict(base) if base else {}
    merged.update(raw)
    if "density_grid" in merged:
        merged["density_grid"] = tuple(float(d) for d in merged["density_grid"])
    return SimConfig(**merged)


def path_loss_db(distance_km: float, frequency_mhz: float):
    """Free-space path loss: 20 log10(d_km) + 20 log10(f_MHz) + 32.44."""
    if np.any(np.asarray(distance_km) <= 0):
        raise ValueError("distance must be > 0")
    if frequency_mhz <= 0:
        raise ValueError(f"frequency must be > 0, got {frequency_mhz}")
    return 20.0 * np.log10(distance_km) + 20.0 * np.log10(frequency_mhz) + 32.44


def _derive_seed(master_seed: int, frequency_mhz: float, site_density: float) -> np.random.SeedSequence:
    # Partition the stream by (frequency, density) so lookup points can be
    # generated in any order, or in parallel, without changing the draws.
    freq_key = int(round(frequency_mhz * 1000))
    dens_key = int(np.float64(site_density).view(np.uint64))
    return np.random.SeedSequence([master_seed & (2**64 - 1), freq_key, dens_key])


def _uniform_hex_points(rng: np.random.Generator, circumradius: float, n: int) -> np.ndarray:
    """n points uniform over a flat-top regular hexagon centered at the origin."""
    out = np.empty((0, 2))
    height = math.sqrt(3.0) / 2.0 * circumradius
    while len(out) < n:
        need = n - len(out)
        batch = max(16, int(need * 1.5))
        x = rng.uniform(-circumradius, circumradius, batch)
        y = rng.uniform(-height, height, batch)
        inside = np.abs(y) <= math.sqrt(3.0) * (circumradius - np.abs(x)) + 1e-12
        inside &= np.abs(x) <= circumradius
        out = np.concatenate([out, np.stack([x[inside], y[inside]], axis=1)])
    return out[:n]


def simulate_sinr_db(
    site_density: float,
    frequency_mhz: float,
    config: SimConfig,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """One SINR sample (dB) per iteration for a given site density.

    Cell area is 1/(site_density * cells_per_site); interferers sit on the
    first tier of the site lattice, each with independent shadowing and full
    load. Deterministic for a fixed config seed.
    """
    if site_density <= 0:
        raise ValueError(f"site_density must be > 0, got {site_density}")
    if rng is None:
        rng = np.random.default_rng(_derive_seed(config.rng_seed, frequency_mhz, site_density))
    n = config.iterations
    cell_area = 1.0 / (site_density * config.cells_per_site)
    circumradius = math.sqrt(cell_area * 2.0 / (3.0 * math.sqrt(3.0)))
    points = _uniform_hex_points(rng, circumradius, n)
    # distances in km; floor avoids a singular path loss for a dead-center drop
    d_serve = np.maximum(np.hypot(points[:, 0], points[:, 1]), 1e-6)
    eirp = config.tx_power_dbm + config.antenna_gain_dbi
    shadow = rng.normal(config.shadow_mu_db, config.shadow_sigma_db, n)
    signal_dbm = eirp - path_loss_db(d_serve, frequency_mhz) - shadow

    noise_dbm = (
        THERMAL_NOISE_DBM_HZ
        + 10.0 * math.log10(config.channel_bandwidth_mhz * 1e6)
        + config.ue_noise_figure_db
    )
    noise_mw = 10.0 ** (noise_dbm / 10.0)

    interference_mw = np.zeros(n)
    ring = config.interferer_ring
    if ring > 0:
        lattice_spacing = math.sqrt(2.0 / (math.sqrt(3.0) * site_density))
        angles = 2.0 * math.pi * np.arange(ring) / ring
        sites = lattice_spacing * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        diff = points[:, None, :] - sites[None, :, :]
        d_int = np.maximum(np.hypot(diff[:, :, 0], diff[:, :, 1]), 1e-6)
        shadow_int = rng.normal(config.shadow_mu_db, config.shadow_sigma_db, (n, ring))
        p_int_dbm = eirp - path_loss_db(d_int, frequency_mhz) - shadow_int
        interference_mw = np.sum(10.0 ** (p_int_dbm / 10.0), axis=1)

    signal_mw = 10.0 ** (signal_dbm / 10.0)
    return 10.0 * np.log10(signal_mw / (interference_mw + noise_mw))


def sinr_to_se(sinr_linear, config: SimConfig = SimConfig()):
    """Spectral efficiency (bps/Hz) from linear SINR: capped, attenuated Shannon."""
    sinr = np.asarray(sinr_linear, dtype=float)
    if np.any(sinr < 0):
        raise ValueError("linear SINR must be >= 0")
    se = np.minimum(config.se_max_bps_hz, config.se_attenuation * np.log2(1.0 + sinr))
    return float(se) if np.isscalar(sinr_linear) else se


@dataclass(frozen=True)
class CapacityLookup:
    """Site density -> spectral-efficiency density at one reliability level."""

    frequency_mhz: float
    reliability_pct: float
    densities: tuple[float, ...]    # strictly increasing, starts at 0
    values: tuple[float, ...]       # bps/Hz/km^2, non-decreasing
    clamp_count: int = 0            # grid points lifted by monotone clamping

    def value_at(self, site_density: float) -> float:
        if site_density < self.densities[0] or site_density > self.densities[-1]:
            log.warning(
                "density %.4g outside lookup grid [%g, %g] for %g MHz; clamping",
                site_density, self.densities[0], self.densities[-1], self.frequency_mhz,
            )
        return float(np.interp(site_density, self.densities, self.values))

    @property
    def max_density(self) -> float:
        return self.densities[-1]


def build_lookup(
    frequencies: Iterable[float],
    reliability_pct: float,
    config: SimConfig,
) -> dict[float, CapacityLookup]:
    """Simulate every (frequency, grid density) point and tabulate capacity.

    The reliability percentile is the value achieved by that share of draws
    (95% reliability = 5th percentile). Monte Carlo noise is smoothed by
    clamping the value sequence to be non-decreasing in density.
    """
    if not 0 < reliability_pct < 100:
        raise ValueError(f"reliability_pct must be in (0, 100), got {reliability_pct}")
    grid = config.density_grid
    if grid[0] != 0.0:
        grid = (0.0,) + grid
    lookups: dict[float, CapacityLookup] = {}
    for freq in frequencies:
        raw = [0.0]
        for density in grid[1:]:
            sinr_db = simulate_sinr_db(density, freq, config)
            se = sinr_to_se(10.0 ** (sinr_db / 10.0), config)
            se_at_reliability = float(np.percentile(se, 100.0 - reliability_pct))
            raw.append(se_at_reliability * config.cells_per_site * density)
        clamped = np.maximum.accumulate(raw)
        clamp_count = int(np.sum(clamped != np.asarray(raw)))
        if clamp_count:
            log.info("lookup %g MHz @ %g%%: monotone clamp lifted %d point(s)",
                     freq, reliability_pct, clamp_count)
        lookups[freq] = CapacityLookup(
            frequency_mhz=freq,
            reliability_pct=reliability_pct,
            densities=grid,
            values=tuple(float(v) for v in clamped),
            clamp_count=clamp_count,
        )
    return lookups


def area_capacity(
    site_density: float,
    portfolio: Sequence[SpectrumBand],
    lookups: Mapping[float, CapacityLookup],
) -> float:
    """Total area capacity (Mbps/km^2) a spectrum portfolio delivers.

    Per band: interpolated spectral-efficiency density times bandwidth in MHz.
    """
    total = 0.0
    for band in portfolio:
        if band.frequency_mhz not in lookups:
            raise MissingLookupError(f"no capacity lookup for {band.frequency_mhz:g} MHz")
        total += lookups[band.frequency_mhz].value_at(site_density) * band.bandwidth_mhz
    return total


def lookup_filename(frequency_mhz: float, reliability_pct: float) -> str:
    return f"lookup_{frequency_mhz:g}_{reliability_pct:g}.csv"


def write_lookup_csv(lookup: CapacityLookup, directory: Path | str) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / lookup_filename(lookup.frequency_mhz, lookup.reliability_pct)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["site_density_per_km2", "se_density_bps_hz_km2"])
        for d, v in zip(lookup.densities, lookup.values):
            w.writerow([repr(d), repr(v)])
    tmp.replace(path)
    return path


def read_lookup_csv(path: Path | str) -> CapacityLookup:
    path = Path(path)
    stem = path.stem  # lookup_<freq>_<rel>
    try:
        _, freq_s, rel_s = stem.split("_")
        freq, rel = float(freq_s), float(rel_s)
    except ValueError:
        raise ValueError(f"{path.name}: expected name lookup_<freq>_<rel>.csv") from None
    densities: list[float] = []
    values: list[float] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["site_density_per_km2", "se_density_bps_hz_km2"]:
            raise ValueError(f"{path.name}: bad lookup header {header}")
        for row in reader:
            densities.append(float(row[0]))
            values.append(float(row[1]))
    if not densities or densities[0] != 0.0 or values[0] != 0.0:
        raise ValueError(f"{path.name}: lookup must start with a (0, 0) row")
    if any(b <= a for a, b in zip(densities, densities[1:])):
        raise ValueError(f"{path.name}: densities must be strictly increasing")
    if any(b < a for a, b in zip(values, values[1:])):
        raise ValueError(f"{path.name}: values must be non-decreasing")
    return CapacityLookup(freq, rel, tuple(densities), tuple(values))
