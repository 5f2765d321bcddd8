"""Command-line front-end: ``amsobolev run CONFIG``, ``--preset NAME``, ``--list-catalog``."""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import catalog
from .errors import ConfigError
from .experiments import PRESETS, exit_status, parse_batch, run_batch, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="amsobolev", description="Sobolev energies on structured measures.")
    p.add_argument("command", nargs="?", choices=["run"], help="run an experiment config")
    p.add_argument("config", nargs="?", help="JSON experiment or batch config")
    p.add_argument("--preset", choices=sorted(PRESETS), help="run a named preset instead of a config file")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--seed", type=int, default=None, help="override the seed of every experiment")
    p.add_argument("--resolution-scale", type=float, default=None, help="multiply grid resolutions")
    p.add_argument("--list-catalog", action="store_true", help="list catalog measures, ensembles and presets")
    p.add_argument("--workers", type=int, default=None, help="experiments run concurrently (default: up to 4)")
    return p


def list_catalog(stream=None):
    stream = sys.stdout if stream is None else stream
    print("measures:", file=stream)
    for name, mu in catalog.catalog_measures().items():
        kinds = ", ".join(c.label for _, c in mu.components)
        print(f"  {name:18s} R^{mu.dim}  {kinds}", file=stream)
    print("ensembles:", file=stream)
    for name, doc in catalog.ENSEMBLES.items():
        print(f"  {name:18s} {doc['type']}", file=stream)
    print("fields: x<i> (coordinate times cutoff), one (cutoff)", file=stream)
    print("presets:", file=stream)
    for name in sorted(PRESETS):
        print(f"  {name}", file=stream)


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.list_catalog:
        list_catalog()
        return EXIT_OK
    if args.preset:
        if args.command or args.config:
            print("error: give either --preset or run CONFIG, not both", file=sys.stderr)
            return EXIT_CONFIG
        doc = PRESETS[args.preset]()
    elif args.command == "run" and args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    else:
        _parser().print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        configs, seed, scale = parse_batch(doc, args.seed, args.resolution_scale)
    except ConfigError as exc:
        for e in getattr(exc, "errors", [exc]):
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    results = run_batch(configs, args.workers)
    info = {"batch": doc.get("name", "custom") if isinstance(doc, dict) else "custom",
            "seed": seed, "resolution_scale": scale, "input": doc}
    write_outputs(results, args.out, info)
    for r in results:
        print(f"[{r.status}] {r.name} ({r.kind}): {r.summary}")
    print(f"{len(results)} experiment(s) in {time.perf_counter() - t0:.2f}s -> {args.out}")
    return EXIT_INVARIANT if exit_status(results) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
