"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 divergence (partial outputs
are still written).
"""

import argparse
import json
import sys
from pathlib import Path

from . import experiments as ex
from .errors import ConfigError, InvalidArgumentError, NoSolutionError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, assignment: str) -> dict:
    """Set a dotted path such as ``params.alpha=13``; list items use integer segments."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form KEY=VALUE")
    key, _, raw = assignment.partition("=")
    parts = key.strip().split(".")
    if not all(parts):
        raise ConfigError(f"override key {key!r} is malformed")
    node = config
    for i, part in enumerate(parts[:-1]):
        where = ".".join(parts[: i + 1])
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                raise ConfigError(f"unknown key '{where}'")
            node = node[int(part)]
        elif isinstance(node, dict):
            node = node.setdefault(part, {})
        else:
            raise ConfigError(f"unknown key '{where}'")
    last = parts[-1]
    if isinstance(node, list):
        if not last.isdigit() or int(last) >= len(node):
            raise ConfigError(f"unknown key '{key}'")
        node[int(last)] = _parse_value(raw)
    elif isinstance(node, dict):
        node[last] = _parse_value(raw)
    else:
        raise ConfigError(f"unknown key '{key}'")
    return config


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="tikhonov-pd",
        description="Simulate Tikhonov regularized primal-dual dynamics and emit metric tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run a single scenario"), ("sweep", "sweep the exponent r"),
                        ("compare", "compare systems on one problem")):
        p = sub.add_parser(name, help=help_)
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", metavar="PATH", help="JSON config file")
        src.add_argument("--preset", metavar="NAME", help="built-in preset (see 'presets')")
        p.add_argument("--out", metavar="DIR", default="results", help="output directory (default: results)")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                       help="override a config entry by dotted path; repeatable")
        p.add_argument("--jobs", metavar="N", type=int, default=1, help="parallel runs for sweep/compare")
    p = sub.add_parser("presets", help="list built-in presets")
    p.add_argument("--write", metavar="DIR", help="also write each preset as DIR/<name>.json")
    return parser


def _resolve_config(args) -> dict:
    if args.preset is not None:
        entry = ex.PRESETS.get(args.preset)
        if entry is None:
            raise ConfigError(f"unknown preset {args.preset!r}")
        if entry["kind"] != args.command:
            raise ConfigError(f"preset {args.preset!r} is a '{entry['kind']}' config, not '{args.command}'")
        config = ex.preset_config(args.preset)
    else:
        config = load_config(args.config)
    for assignment in args.overrides:
        apply_override(config, assignment)
    return config


def _status_line(kind, name, statuses, paths):
    print(f"{kind} {name}: {', '.join(statuses)} -> {paths}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "presets":
        for name in ex.PRESETS:
            print(name)
        if args.write:
            out = Path(args.write)
            out.mkdir(parents=True, exist_ok=True)
            for name in ex.PRESETS:
                ex.write_json(out / f"{name}.json", ex.preset_config(name))
        return EXIT_OK
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        config = _resolve_config(args)
        if args.command == "run":
            result = ex.run_scenario(ex.ScenarioConfig.from_dict(config))
            paths = ex.emit_scenario(result, args.out)
            statuses = [result.status]
            _status_line("run", result.config.name, statuses, paths["csv"].parent)
            errors = [result.error] if result.error else []
        elif args.command == "sweep":
            sweep = ex.run_sweep_config(config, jobs=args.jobs)
            paths = ex.emit_sweep(sweep, args.out)
            statuses = [res.status for res in sweep.results.values()]
            errors = [res.error for res in sweep.results.values() if res.error]
            _status_line("sweep", sweep.name, statuses, paths["table"].parent)
        else:
            cmp = ex.run_compare_config(config, jobs=args.jobs)
            paths = ex.emit_compare(cmp, args.out)
            statuses = [res.status for res in cmp.results.values()]
            errors = [res.error for res in cmp.results.values() if res.error]
            _status_line("compare", cmp.name, statuses, paths["table"].parent)
    except (ConfigError, InvalidArgumentError, NoSolutionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if any(s != "ok" for s in statuses):
        for err in errors:
            print(f"integration failed: {err}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
