"""Command-line frontend.

Subcommands:

* ``run-layer``: simulate one layer with random seeded data, verify
  against the functional reference, emit a stats document.
* ``run-model``: run an ordered list of layers, feeding each layer's
  output tensor to the next layer's input.
* ``search-tile``: enumerate and rank tiles for a layer.
* ``verify``: repeat randomized runs and report a pass/fail summary.

All documents (hardware, layer, tile, model, stats) are YAML with a
``version`` field.  Identical command lines and seeds produce
byte-identical stats output.

Exit codes: 0 success, 2 parse error, 3 invalid configuration,
4 mapping error, 5 verification failure.

A model file looks like::

    version: 1
    layers:
      - name: conv1
        layer: {kind: conv, R: 3, S: 3, C: 4, K: 8, X: 8, Y: 8}
        tile: {T_R: 3, T_S: 3, T_C: 1, T_X: 2}
      - name: conv2
        layer: {...}
        tile: search

``tile: search`` picks the best enumerated tile automatically.  Setting
the environment variable ``TREEFAB_INJECT_FAULT`` corrupts one simulated
output element before comparison; it exists so the verification path can
be shown to catch real mismatches.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import yaml

from . import config as cfg
from .engine import simulate_layer
from .errors import (
    MappingError,
    ParseError,
    TreefabError,
    ValidationError,
)
from .oracle import compare, conv_reference
from .tiler import enumerate_tiles, rank_by_simulation

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_CONFIG = 3
EXIT_MAPPING = 4
EXIT_VERIFY = 5

FAULT_ENV = "TREEFAB_INJECT_FAULT"


def _read(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _random_tensors(layer: cfg.LayerConfig, rng: np.random.Generator):
    inputs = rng.integers(
        -8, 9, size=(layer.n, layer.g, layer.c, layer.x, layer.y),
        dtype=np.int32,
    )
    weights = rng.integers(
        -8, 9, size=(layer.g, layer.k, layer.c, layer.r, layer.s),
        dtype=np.int32,
    )
    return inputs, weights


def _maybe_inject_fault(output: np.ndarray) -> np.ndarray:
    if os.environ.get(FAULT_ENV):
        output = output.copy()
        flat = output.reshape(-1)
        flat[0] += 1
    return output


def _emit(doc: dict, path: str | None) -> None:
    text = yaml.safe_dump(doc, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _stats_doc(stats) -> dict:
    doc = {"version": cfg.SCHEMA_VERSION}
    doc.update(stats.as_dict())
    return doc


def _strategy(args) -> cfg.FoldingStrategy | None:
    if args.strategy is None:
        return None
    return cfg.FoldingStrategy(args.strategy)


def _trace_printer(enabled: bool):
    if not enabled:
        return None

    def emit(event: dict) -> None:
        line = " ".join(f"{k}={event[k]}" for k in sorted(event))
        print(f"trace: {line}", file=sys.stderr)

    return emit


# -- subcommands -----------------------------------------------------------


def _cmd_run_layer(args) -> int:
    hw = cfg.parse_hardware_config(_read(args.hw))
    layer = cfg.parse_layer_config(_read(args.layer))
    tile = cfg.parse_tile_config(_read(args.tile))
    rng = np.random.default_rng(args.seed)
    inputs, weights = _random_tensors(layer, rng)
    result = simulate_layer(hw, layer, tile, inputs, weights,
                            strategy=_strategy(args),
                            trace=_trace_printer(args.trace))
    _emit(_stats_doc(result.stats), args.stats_out)
    if not args.no_verify:
        reference = conv_reference(layer, inputs, weights)
        outcome = compare(_maybe_inject_fault(result.output), reference.output)
        if not outcome.ok:
            print(f"verification failed: {outcome.report()}", file=sys.stderr)
            return EXIT_VERIFY
        print("verification passed", file=sys.stderr)
    return EXIT_OK


def _parse_model(text: str):
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed model document: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("layers"), list):
        raise ParseError("model document must map 'layers' to a list")
    if doc.get("version", cfg.SCHEMA_VERSION) != cfg.SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported model schema version {doc.get('version')}"
        )
    entries = []
    names = set()
    for i, entry in enumerate(doc["layers"]):
        if not isinstance(entry, dict) or "layer" not in entry:
            raise ParseError(f"model layer {i} must be a mapping with 'layer'")
        name = str(entry.get("name", f"layer{i}"))
        if name in names:
            raise ValidationError(f"duplicate layer name {name!r}")
        names.add(name)
        layer = cfg.parse_layer_config(yaml.safe_dump(entry["layer"]))
        tile_spec = entry.get("tile", "search")
        tile = (None if tile_spec == "search"
                else cfg.parse_tile_config(yaml.safe_dump(tile_spec)))
        entries.append((name, layer, tile))
    return entries


def _chain_input(prev_name: str, prev_out: np.ndarray, name: str,
                 layer: cfg.LayerConfig) -> np.ndarray:
    want = (layer.n, layer.g, layer.c, layer.x, layer.y)
    if prev_out.size != int(np.prod(want)):
        raise ValidationError(
            f"output of {prev_name!r} has {prev_out.size} elements but "
            f"{name!r} expects input dims {want} "
            f"({int(np.prod(want))} elements)"
        )
    return prev_out.reshape(want)


def _cmd_run_model(args) -> int:
    hw = cfg.parse_hardware_config(_read(args.hw))
    entries = _parse_model(_read(args.model))
    if not entries:
        raise ValidationError("model has no layers")
    rng = np.random.default_rng(args.seed)
    per_layer = []
    totals: dict[str, int] = {}
    current = None
    prev_name = None
    for name, layer, tile in entries:
        if current is None:
            current, weights = _random_tensors(layer, rng)
        else:
            current = _chain_input(prev_name, current, name, layer)
            _, weights = _random_tensors(layer, rng)
        if tile is None:
            tile = enumerate_tiles(hw, layer, limit=1)[0].tile
        try:
            result = simulate_layer(hw, layer, tile, current, weights,
                                    strategy=_strategy(args))
        except MappingError as exc:
            print(f"mapping error in layer {name!r}: {exc}", file=sys.stderr)
            return EXIT_MAPPING
        except TreefabError as exc:
            print(f"error in layer {name!r}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        reference = conv_reference(layer, current, weights)
        outcome = compare(_maybe_inject_fault(result.output), reference.output)
        if not outcome.ok:
            print(f"layer {name!r} verification failed: {outcome.report()}",
                  file=sys.stderr)
            return EXIT_VERIFY
        entry = {"name": name, "tile": yaml.safe_load(
            cfg.serialize_tile_config(tile))}
        entry.update(result.stats.as_dict())
        per_layer.append(entry)
        for key, value in result.stats.as_dict().items():
            if isinstance(value, int) and not isinstance(value, bool):
                totals[key] = totals.get(key, 0) + value
        current = result.output
        prev_name = name
    _emit(
        {"version": cfg.SCHEMA_VERSION, "layers": per_layer,
         "totals": totals},
        args.stats_out,
    )
    print(f"model verification passed ({len(per_layer)} layers)",
          file=sys.stderr)
    return EXIT_OK


def _cmd_search_tile(args) -> int:
    hw = cfg.parse_hardware_config(_read(args.hw))
    layer = cfg.parse_layer_config(_read(args.layer))
    candidates = enumerate_tiles(hw, layer)
    top = rank_by_simulation(candidates[:max(args.top_k * 4, args.top_k)],
                             hw, layer, args.top_k, seed=args.seed)
    doc = {
        "version": cfg.SCHEMA_VERSION,
        "candidates": [
            {
                "tile": yaml.safe_load(cfg.serialize_tile_config(c.tile)),
                "predicted": c.predicted,
            }
            for c in top
        ],
    }
    _emit(doc, args.stats_out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    hw = cfg.parse_hardware_config(_read(args.hw))
    layer = cfg.parse_layer_config(_read(args.layer))
    tile = cfg.parse_tile_config(_read(args.tile))
    if args.trials == 0:
        print("warning: 0 trials requested, vacuous pass", file=sys.stderr)
        return EXIT_OK
    rng = np.random.default_rng(args.seed)
    failures = []
    for trial in range(args.trials):
        inputs, weights = _random_tensors(layer, rng)
        result = simulate_layer(hw, layer, tile, inputs, weights,
                                strategy=_strategy(args))
        reference = conv_reference(layer, inputs, weights)
        outcome = compare(_maybe_inject_fault(result.output),
                          reference.output)
        if not outcome.ok:
            failures.append((trial, outcome.report()))
    passed = args.trials - len(failures)
    print(f"{passed}/{args.trials} trials passed")
    for trial, report in failures:
        print(f"trial {trial}: {report}")
    return EXIT_OK if not failures else EXIT_VERIFY


# -- argument parsing ------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treefab",
        description="Cycle-accurate simulator for a tree-based flexible "
                    "DNN inference accelerator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tile=False, model=False):
        p.add_argument("--hw", required=True, help="hardware YAML file")
        if model:
            p.add_argument("--model", required=True, help="model YAML file")
        else:
            p.add_argument("--layer", required=True, help="layer YAML file")
        if tile:
            p.add_argument("--tile", required=True, help="tile YAML file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--strategy", choices=["roundtrip", "ideal"],
                       default=None, help="override the folding strategy")
        p.add_argument("--stats-out", default=None,
                       help="write the stats document here (default stdout)")

    p = sub.add_parser("run-layer", help="simulate and verify one layer")
    common(p, tile=True)
    p.add_argument("--trace", action="store_true",
                   help="print per-wave trace events to stderr")
    p.add_argument("--no-verify", action="store_true",
                   help="skip the functional-reference comparison")
    p.set_defaults(func=_cmd_run_layer)

    p = sub.add_parser("run-model", help="run a chained multi-layer model")
    common(p, model=True)
    p.set_defaults(func=_cmd_run_model)

    p = sub.add_parser("search-tile", help="enumerate and rank tiles")
    common(p)
    p.add_argument("--top-k", type=int, default=5)
    p.set_defaults(func=_cmd_search_tile)

    p = sub.add_parser("verify", help="randomized verification runs")
    common(p, tile=True)
    p.add_argument("--trials", type=int, default=50)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MappingError as exc:
        print(f"mapping error: {exc}", file=sys.stderr)
        return EXIT_MAPPING
    except TreefabError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
