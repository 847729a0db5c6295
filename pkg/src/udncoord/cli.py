"""Command-line front end: ``udncoord run | study | verify``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import fields
from pathlib import Path

import jsonschema

from . import __version__
from .errors import ConfigError
from .sim import MAX_FAILURE_RATE, Campaign, run_campaign
from .topology import Scenario, Strategy

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_FAILURE_RATE = 0, 1, 2, 3, 4

ALL_STRATEGIES = [s.value for s in Strategy]

DEFAULTS = {
    "K": 8,
    "M": 8,
    "L": 4,
    "snr_ref_db": 10.0,
    "alpha_pl": 4.0,
    "area_side": 1000.0,
    "u_max": None,
    "edge_ref": "corner",
    "power_form": "squared",
    "n_snapshots": 250,
    "seed": 0,
    "km_pairs": None,
    "snr_grid": None,
    "strategies": ALL_STRATEGIES,
    "epsilon": 1e-3,
}

_pos_int = {"type": "integer", "minimum": 1}
_pos_num = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "K": _pos_int,
        "M": _pos_int,
        "L": _pos_int,
        "snr_ref_db": {"type": "number"},
        "alpha_pl": _pos_num,
        "area_side": _pos_num,
        "u_max": {"anyOf": [_pos_int, {"type": "null"}]},
        "edge_ref": {"enum": ["corner", "midpoint"]},
        "power_form": {"enum": ["squared", "literal"]},
        "n_snapshots": _pos_int,
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "km_pairs": {"anyOf": [{"type": "null"}, {
            "type": "array", "minItems": 1,
            "items": {"type": "array", "items": _pos_int, "minItems": 2, "maxItems": 2}}]},
        "snr_grid": {"anyOf": [{"type": "null"}, {"type": "array", "minItems": 1, "items": {"type": "number"}}]},
        "strategies": {"type": "array", "minItems": 1, "uniqueItems": True, "items": {"enum": ALL_STRATEGIES}},
        "epsilon": _pos_num,
    },
}

STUDIES = {
    # K = M, growing population at fixed ratio 1
    "proportionate": lambda full: {
        "km_pairs": [[k, k] for k in ((8, 16, 24, 32) if full else (8, 16, 24))],
        "snr_grid": [10.0],
    },
    # lambda_UE = 8, AN density from ratio 0.5 to 4, three power budgets
    "densification": lambda full: {
        "km_pairs": [[8, m] for m in (4, 6, 8, 12, 16, 24, 32)],
        "snr_grid": [10.0, 20.0, 30.0],
    },
    # lambda_UE in {8, 16} over the same ratio sweep
    "ue-density": lambda full: {
        "km_pairs": [[k, int(k * r)] for k in (8, 16) for r in (0.5, 0.75, 1, 1.5, 2, 3, 4)],
        "snr_grid": [10.0],
    },
}
QUICK_SNAPSHOTS = 25

log = logging.getLogger("udncoord")


class InfeasibleScenario(ConfigError):
    pass


def parse_override(text: str):
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not KEY=VAL")
    key, val = text.split("=", 1)
    try:
        value = json.loads(val)
    except json.JSONDecodeError:
        value = val  # bare strings such as power_form=literal
    return key.strip(), value


def load_config(path: str | None, overrides=(), extra: dict | None = None) -> dict:
    """Defaults, then the file, then study presets, then ``--override`` pairs."""
    cfg = dict(DEFAULTS)
    if path is not None:
        p = Path(path)
        try:
            user = json.loads(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from None
        if not isinstance(user, dict):
            raise ConfigError(f"{p}: top level must be an object")
        # resolved-config.json files carry the version; accept and drop it
        user.pop("version", None)
        cfg.update(user)
    cfg.update(extra or {})
    for text in overrides:
        key, value = parse_override(text)
        cfg[key] = value
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    if cfg["u_max"] is None:
        cfg["u_max"] = cfg["L"]
    if cfg["km_pairs"] is None:
        cfg["km_pairs"] = [[cfg["K"], cfg["M"]]]
    if cfg["snr_grid"] is None:
        cfg["snr_grid"] = [cfg["snr_ref_db"]]
    cfg["snr_grid"] = [float(v) for v in cfg["snr_grid"]]
    for key in ("snr_ref_db", "alpha_pl", "area_side", "epsilon"):
        cfg[key] = float(cfg[key])
    return cfg


def build_campaign(cfg: dict) -> Campaign:
    for K, M in cfg["km_pairs"]:
        if M < math.ceil(K / cfg["L"]):
            raise InfeasibleScenario(f"K={K}, M={M}: fewer than ceil(K/L) ANs, no pairing exists")
    names = {f.name for f in fields(Scenario)}
    base = Scenario(**{k: v for k, v in cfg.items() if k in names and k != "strategy"},
                    strategy=Strategy(cfg["strategies"][0]))
    return Campaign(base, km_pairs=cfg["km_pairs"], snr_ref_db=cfg["snr_grid"],
                    strategies=cfg["strategies"], n_snapshots=cfg["n_snapshots"],
                    master_seed=cfg["seed"], epsilon=cfg["epsilon"])


def execute(cfg: dict, out_dir: Path, threads: int) -> int:
    campaign = build_campaign(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = dict(cfg, version=__version__)
    n_jobs = len(campaign.km_pairs) * len(campaign.snr_ref_db) * campaign.n_snapshots
    log.info("%d snapshots x %d strategies on %d worker(s)", n_jobs, len(campaign.strategies), threads)
    result = run_campaign(campaign, threads=threads)
    (out_dir / "resolved-config.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    (out_dir / "results.csv").write_text(result.to_csv(resolved))
    (out_dir / "results.json").write_text(result.to_json(resolved) + "\n")
    (out_dir / "diagnostics.json").write_text(json.dumps(result.diagnostics, indent=2, sort_keys=True) + "\n")
    rate = result.failure_rate
    if rate > MAX_FAILURE_RATE:
        log.error("failure rate %.2f%% exceeds %.0f%%", 100 * rate, 100 * MAX_FAILURE_RATE)
        return EXIT_FAILURE_RATE
    log.info("wrote %s (failure rate %.2f%%)", out_dir, 100 * rate)
    return EXIT_OK


def _overrides(args) -> list:
    extra = list(args.override or [])
    if args.snapshots is not None:
        extra.append(f"n_snapshots={args.snapshots}")
    if args.seed is not None:
        extra.append(f"seed={args.seed}")
    return extra


def cmd_run(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    return execute(cfg, Path(args.out), args.threads)


def cmd_study(args) -> int:
    preset = STUDIES[args.name](args.full)
    preset["n_snapshots"] = QUICK_SNAPSHOTS
    cfg = load_config(args.config, _overrides(args), extra=preset)
    return execute(cfg, Path(args.out), args.threads)


def cmd_verify(args) -> int:
    from .verify import run_all

    results = run_all(solver_epsilon=args.corrupt_epsilon)
    lines = [r.line() for r in results]
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} oracle suites passed")
    report = "\n".join(lines) + "\n"
    sys.stdout.write(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "verify.txt").write_text(report)
    return EXIT_OK if n_fail == 0 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="udncoord", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--override", action="append", metavar="KEY=VAL",
                       help="config override, value parsed as JSON (repeatable)")
        p.add_argument("--snapshots", type=int, help="snapshots per grid cell")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")

    p = sub.add_parser("run", help="run the campaign described by a config")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("study", help="run one of the pre-baked result studies")
    p.add_argument("name", choices=sorted(STUDIES))
    common(p)
    p.add_argument("--full", action="store_true", help="include the K=M=32 cell")
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("verify", help="run the oracle self-checks")
    p.add_argument("--out", help="also write the report to DIR/verify.txt")
    p.add_argument("--corrupt-epsilon", type=float, default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except InfeasibleScenario as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
