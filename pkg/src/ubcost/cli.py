"""Command-line interface: validate, lookup, run, sweep.

Exit codes: 0 success, 1 domain/validation failure, 2 environment/I-O
failure. Output files are written to a temp name and renamed on success, so
a failing run never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .costs import CostBookError
from .ingest import ValidationError, WageImputationError, load_dataset, validate_inputs
from .radio import SimConfig, build_lookup, config_from_mapping, write_lookup_csv
from .scenario import (
    LookupStore, Scenario, ScenarioError, CountryRunError, load_scenario,
    run_global, scenario_hash, sweep, write_results, write_sweep, yaml_load,
)

log = logging.getLogger("ubcost")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_ENVIRONMENT = 2


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest_timestamp() -> str | None:
    # Wall-clock stamps would break byte-identical reruns, so the field is
    # only populated when the caller pins the epoch explicitly.
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()


def _write_manifest(out_dir: Path, inputs: dict[str, str], scenario_names: list[str],
                    scenario_digest: str, seed: int, outputs: list[Path]) -> Path:
    manifest = {
        "engine_version": __version__,
        "inputs": inputs,
        "scenarios": scenario_names,
        "scenario_hash": scenario_digest,
        "rng_seed": seed,
        "timestamp": _manifest_timestamp(),
        "outputs": sorted(p.name for p in outputs),
    }
    path = out_dir / "run_manifest.json"
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    tmp.replace(path)
    return path


def _input_digests(data_dir: Path, costbook: Path | None, extra: list[Path]) -> dict[str, str]:
    paths = [data_dir / "areas.csv", data_dir / "countries.csv", data_dir / "wages.csv"]
    paths.append(costbook if costbook else data_dir / "costbook.yaml")
    paths.extend(extra)
    return {p.name: _sha256(p) for p in paths if p.exists()}


def _apply_seed(scenario: Scenario, seed: int | None) -> Scenario:
    if seed is None:
        return scenario
    return replace(scenario, sim=replace(scenario.sim, rng_seed=seed))


def cmd_validate(args) -> int:
    dataset, violations = validate_inputs(args.data, args.costbook)
    if violations:
        for v in violations:
            print(str(v), file=sys.stderr)
        print(f"FAIL: {len(violations)} violation(s)", file=sys.stderr)
        return EXIT_DOMAIN
    assert dataset is not None
    print(
        f"OK: {len(dataset.countries)} countries, {len(dataset.areas)} areas, "
        f"{len(dataset.wages.rows)} wage rows"
    )
    return EXIT_OK


def cmd_lookup(args) -> int:
    sim = SimConfig()
    if args.config:
        raw = yaml_load(Path(args.config))
        if not isinstance(raw, dict):
            raise ScenarioError(f"{args.config}: simulation config must be a mapping")
        sim = config_from_mapping(raw, base=sim)
    if args.seed is not None:
        sim = replace(sim, rng_seed=args.seed)
    dataset = load_dataset(args.data, args.costbook)
    frequencies = sorted({
        band.frequency_mhz
        for country in dataset.countries
        for band in country.spectrum_portfolio
    })
    reliabilities = sorted({c.reliability_pct for c in dataset.countries})
    out = Path(args.out)
    written = []
    for reliability in reliabilities:
        lookups = build_lookup(frequencies, reliability, sim)
        for lookup in lookups.values():
            written.append(write_lookup_csv(lookup, out))
    for path in written:
        print(path)
    return EXIT_OK


def _load_scenarios(paths: list[str]) -> list[Scenario]:
    return [load_scenario(Path(p)) for p in paths]


def cmd_run(args) -> int:
    data_dir = Path(args.data)
    scenario = _apply_seed(load_scenario(Path(args.scenario)), args.seed)
    dataset = load_dataset(data_dir, args.costbook)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _input_digests(data_dir, Path(args.costbook) if args.costbook else None,
                            [Path(args.scenario)])
    if args.lookups:
        store = LookupStore(scenario.sim, Path(args.lookups), keyed_by_hash=False)
    else:
        store = LookupStore(scenario.sim, out / "lookups")
    report = run_global(dataset, scenario, store, jobs=args.jobs)
    outputs = write_results(report, out)
    _write_manifest(out, inputs, [scenario.name], scenario_hash(scenario),
                    scenario.sim.rng_seed, outputs)
    print(f"total investment: ${report.global_total_cents / 100:,.2f} "
          f"({report.gdp_share_global_pct:.4f}% of GDP)")
    return EXIT_OK


def cmd_sweep(args) -> int:
    data_dir = Path(args.data)
    scenarios = [_apply_seed(s, args.seed) for s in _load_scenarios(args.scenario)]
    dataset = load_dataset(data_dir, args.costbook)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = _input_digests(data_dir, Path(args.costbook) if args.costbook else None,
                            [Path(p) for p in args.scenario])
    if args.lookups:
        def store_for(s: Scenario) -> LookupStore:
            return LookupStore(s.sim, Path(args.lookups), keyed_by_hash=False)
    else:
        def store_for(s: Scenario) -> LookupStore:
            return LookupStore(s.sim, out / "lookups")
    report = sweep(dataset, scenarios, store_for, jobs=args.jobs)
    path = write_sweep(report, out)
    digest = hashlib.sha256(
        "|".join(scenario_hash(s) for s in scenarios).encode()
    ).hexdigest()[:16]
    _write_manifest(out, inputs, [s.name for s in scenarios], digest,
                    scenarios[0].sim.rng_seed, [path])
    print(path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ubcost",
        description="Estimate the investment required for universal 4G broadband.",
    )
    parser.add_argument("--version", action="version", version=f"ubcost {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common_data = dict(help="dataset directory with areas.csv, countries.csv, wages.csv")

    p = sub.add_parser("validate", help="validate input tables and cost book")
    p.add_argument("data", **common_data)
    p.add_argument("--costbook", help="cost book path (default: <data>/costbook.yaml)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("lookup", help="generate capacity lookup tables")
    p.add_argument("--data", required=True, **common_data)
    p.add_argument("--config", help="simulation config YAML (SimConfig keys)")
    p.add_argument("--costbook", help="cost book path (default: <data>/costbook.yaml)")
    p.add_argument("--out", required=True, help="output directory for lookup_<freq>_<rel>.csv")
    p.add_argument("--seed", type=int, help="override the simulation seed")
    p.set_defaults(func=cmd_lookup)

    p = sub.add_parser("run", help="run one scenario end to end")
    p.add_argument("data", **common_data)
    p.add_argument("--scenario", required=True, help="scenario YAML")
    p.add_argument("--costbook", help="cost book path (default: <data>/costbook.yaml)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the simulation seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel country workers")
    p.add_argument("--lookups", help="directory of precomputed lookup tables")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="compare several scenarios against the first")
    p.add_argument("data", **common_data)
    p.add_argument("--scenario", action="append", required=True,
                   help="scenario YAML (repeat; first is the baseline)")
    p.add_argument("--costbook", help="cost book path (default: <data>/costbook.yaml)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the simulation seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel country workers")
    p.add_argument("--lookups", help="directory of precomputed lookup tables")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        for violation in exc.violations:
            print(str(violation), file=sys.stderr)
        print(f"FAIL: {len(exc.violations)} violation(s)", file=sys.stderr)
        return EXIT_DOMAIN
    except (ScenarioError, CostBookError, WageImputationError, CountryRunError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT


if __name__ == "__main__":
    sys.exit(main())
