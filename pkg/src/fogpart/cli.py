"""Command line: ``fogpart generate|place|simulate|report``.

Exit codes: 0 success, 1 usage error, 2 data error. Every flag can also be
given in a JSON file passed with ``--config``; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from .graphkit import fog_graph, girvan_newman
from .io import (
    DataError,
    check_placement,
    load_placement,
    load_scenario,
    save_placement,
    save_scenario,
)
from .model import placement_feasible
from .placement import POLICIES, run_policy
from .reports import write_reports, write_run_metadata
from .scenario import ExperimentParams, generate_scenario, scenario_summary
from .simulator import FailureSchedule, build_failure_schedule, run_simulation

log = logging.getLogger("fogpart")

EXIT_USAGE = 1
EXIT_DATA = 2

DEFAULT_DURATION = 100000.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def cmd_generate(args) -> int:
    params = ExperimentParams()
    for flag, attr in (("devices", "n_devices"), ("gateway_frac", "gateway_fraction"),
                       ("apps", "n_apps"), ("ba_m", "ba_m"), ("popularity", "popularity")):
        value = getattr(args, flag)
        if value is not None:
            setattr(params, attr, value)
    try:
        params.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sc = generate_scenario(params, args.seed)
    out = Path(args.out)
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        save_scenario(sc, out)
        provenance = {"seed": args.seed, "params": params.to_dict(),
                      "note": "cloud link and cloud speed are invented defaults"}
        (out.parent / "params.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc}") from exc
    s = scenario_summary(sc)
    print(f"devices={s.devices} gateways={s.gateways} apps={s.apps} services={s.services} "
          f"demand={s.demand:g} fog_capacity={s.fog_capacity:g} workloads={s.workloads} "
          f"request_rate_per_ms={s.request_rate:.6f}")
    return 0


def cmd_place(args) -> int:
    if args.policy not in POLICIES:
        raise UsageError(f"unknown policy {args.policy}")
    sc = load_scenario(args.scenario)
    dendrogram = girvan_newman(fog_graph(sc.infra)) if args.policy == "partition" else None
    P = run_policy(args.policy, sc.infra, sc.apps, sc.workloads, dendrogram)
    report = placement_feasible(P, sc.infra, sc.apps)
    if not report.ok:
        raise DataError(f"infeasible placement on devices {report.overloaded()}")
    cr = {s.id: s.consumption for a in sc.apps for s in a.services}
    fog = [(s, d) for s, d in P if d != sc.infra.cloud_id]
    try:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        save_placement(P, args.policy, sc.seed, args.out)
    except OSError as exc:
        raise UsageError(f"cannot write {args.out}: {exc}") from exc
    print(f"policy={args.policy} instances={len(fog)} resource_units={sum(cr[s] for s, _ in fog):g}")
    return 0


def cmd_simulate(args) -> int:
    if args.failures not in ("all", "none"):
        raise UsageError("--failures must be 'all' or 'none'")
    if not args.duration > 0:
        raise UsageError("--duration must be positive")
    sc = load_scenario(args.scenario)
    P, policy, _ = load_placement(args.placement)
    check_placement(P, sc)
    if args.failures == "all":
        schedule = build_failure_schedule(sc.infra, args.duration, args.seed)
    else:
        schedule = FailureSchedule()
    metrics = run_simulation(sc, P, schedule, args.duration, args.seed)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_requests_csv(out / "requests.csv")
        metrics.write_availability_csv(out / "availability.csv")
        write_run_metadata(out, policy, args.seed, args.duration, args.failures, schedule, sc.infra)
        for src, name in ((args.scenario, "scenario.json"), (args.placement, "placement.json")):
            if Path(src).resolve() != (out / name).resolve():
                shutil.copyfile(src, out / name)
    except OSError as exc:
        raise UsageError(f"cannot write to {out}: {exc}") from exc
    sat = sum(metrics.satisfied(r) for r in metrics.requests)
    print(f"policy={policy} requests={len(metrics.requests)} satisfied={sat} "
          f"failures={len(schedule)} snapshots={len(metrics.snapshots)}")
    return 0


def cmd_report(args) -> int:
    written = write_reports(args.runs, args.out_dir)
    for name, path in written.items():
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fogpart", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file with flag values")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("generate", help="generate a random scenario")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--devices", type=int)
    p.add_argument("--gateway-frac", type=float)
    p.add_argument("--apps", type=int)
    p.add_argument("--ba-m", type=int)
    p.add_argument("--popularity", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("place", help="compute a placement")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", default="partition", choices=POLICIES)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_place)

    p = sub.add_parser("simulate", help="simulate a scenario under a placement")
    p.add_argument("--scenario", required=True)
    p.add_argument("--placement", required=True)
    p.add_argument("--duration", type=float, default=DEFAULT_DURATION)
    p.add_argument("--failures", choices=("all", "none"), default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="build figure CSVs from run directories")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> list:
    """Turn config file entries into leading flags so explicit flags override them."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return argv
    try:
        cfg = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    commands = {"generate", "place", "simulate", "report"}
    idx = next((i for i, a in enumerate(argv) if a in commands), None)
    if idx is None:
        return argv
    injected = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        values = value if isinstance(value, list) else [value]
        injected += [flag, *map(str, values)]
    return argv[: idx + 1] + injected + argv[idx + 1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
    except UsageError as exc:
        print(f"fogpart: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fogpart: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"fogpart: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
