"""Command-line entry point: ``diamond-ib --preset fig2 --out rates.csv``.

Exit status is 0 when every point succeeded, 2 when some points recorded
errors (their cells read ``NA``), and 1 for configuration problems.
"""

from __future__ import annotations

import argparse
import sys

import jsonschema
import yaml

from .channel import ChannelConfig
from .sweep import MODES, PRESETS, SweepSpec, emit, preset, run_sweep

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["mode", "grid"],
    "properties": {
        "mode": {"enum": list(MODES)},
        "grid": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "channel": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M": {"type": "integer", "minimum": 1},
                "N1": {"type": "integer", "minimum": 1},
                "N2": {"type": "integer", "minimum": 1},
                "snr_db": {"type": "number"},
                "C1": {"type": "number", "minimum": 0},
                "C2": {"type": "number", "minimum": 0},
            },
        },
        "qci_bits": {"type": "array", "items": {"type": "integer", "minimum": 0},
                     "uniqueItems": True},
        "monte_carlo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "grid_samples": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["csv", "json"]},
            },
        },
    },
}


class ConfigError(ValueError):
    pass


def _node_line(root, path) -> int | None:
    """1-based line of the YAML node at ``path`` (deepest existing ancestor)."""
    node = root
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = next((v for k, v in node.value if k.value == key), None)
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            nxt = node.value[key]
        else:
            nxt = None
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def load_config(path: str) -> SweepSpec:
    """Parse and validate a YAML sweep description."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from exc
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}:{mark.column + 1}" if mark else path
        raise ConfigError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}:1: config must be a mapping")
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(data),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for e in errors:
            field = ".".join(str(p) for p in e.absolute_path) or "<root>"
            lines.append(f"{path}:{_node_line(root, list(e.absolute_path))}: {field}: {e.message}")
        raise ConfigError("\n".join(lines))
    ch = dict(data.get("channel", {}))
    snr_db = ch.pop("snr_db", 40.0)
    mc = data.get("monte_carlo", {})
    out = data.get("output", {})
    mode = data["mode"]
    grid = data["grid"]
    try:
        base = ChannelConfig.from_snr_db(snr_db, **ch)
        return SweepSpec(mode=mode, grid=tuple(grid), base=base,
                         qci_bits=tuple(data.get("qci_bits", (1, 2, 3, 4))),
                         samples=mc.get("samples", 10_000), seed=mc.get("seed", 0),
                         grid_samples=mc.get("grid_samples", 1_000_000),
                         out=out.get("path"), format=out.get("format", "csv"))
    except ValueError as exc:
        raise ConfigError(f"{path}:{_node_line(root, ['grid'])}: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="diamond-ib",
        description="Upper and lower bounds on the bottleneck rate of a two-relay diamond MIMO channel.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", metavar="PATH", help="YAML sweep description")
    src.add_argument("--preset", choices=PRESETS, help="built-in sweep")
    p.add_argument("--seed", type=int, help="root RNG seed (unsigned 64-bit)")
    p.add_argument("--samples", type=int, help="Monte Carlo draws per MMSE point")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), help="output format")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = load_config(args.config) if args.config else preset(args.preset)
        overrides = {k: v for k, v in (("seed", args.seed), ("samples", args.samples),
                                       ("out", args.out), ("format", args.format)) if v is not None}
        if overrides:
            spec = spec.with_(**overrides)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    points = run_sweep(spec, jobs=args.jobs)
    text = emit(points, spec.format, spec, spec.out)
    if spec.out is None:
        sys.stdout.write(text)
    failed = [p for p in points if p.errors]
    for p in failed:
        for msg in p.errors:
            print(f"warning: point snr_db={p.snr_db} c_bits={p.c_bits}: {msg}", file=sys.stderr)
    return 2 if failed else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
