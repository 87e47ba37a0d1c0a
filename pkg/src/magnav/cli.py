"""Command-line entry point: ``magnav genmap | simulate | sweep``.

Exit status is 0 on success, 1 for configuration problems (bad or missing
config, bad arguments) and 2 for failures while running.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import sim
from ._backend import current_backend
from .config import load_config, load_map_spec
from .errors import ConfigError, MagNavError
from .fieldmap import save_map

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("magnav")


def _ratio_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("at least one ratio is required")
    if any(not v >= 0 for v in vals):
        raise argparse.ArgumentTypeError("ratios must be >= 0")
    return vals


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; bad arguments are a config error here.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="magnav", description="Magnetic-anomaly navigation simulator.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("genmap", help="render a map spec to a MAGMAP file")
    g.add_argument("spec", help="TOML map spec")
    g.add_argument("-o", "--output", required=True, help="map file to write")

    s = sub.add_parser("simulate", help="run one closed-loop simulation")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("-o", "--output", required=True, help="trace CSV to write")

    w = sub.add_parser("sweep", help="sweep W_obs/W_goal ratios over several seeds")
    w.add_argument("-c", "--config", required=True)
    w.add_argument("--ratios", type=_ratio_list, default=[0.0, 0.5, 1.0, 1.5, 2.0])
    w.add_argument("--seeds", type=_positive_int, default=20,
                   help="number of seeds, counting up from the config's seed")
    w.add_argument("-o", "--output", required=True, help="summary CSV to write")
    return p


def _genmap(args) -> int:
    m = load_map_spec(args.spec)
    save_map(m, args.output)
    log.info("wrote %dx%d map to %s", m.nx, m.ny, args.output)
    return EXIT_OK


def _simulate(args) -> int:
    cfg = load_config(args.config)
    records = sim.run_sim(cfg)
    sim.write_trace(records, args.output)
    log.info("%d steps, trace written to %s", len(records) - 1, args.output)
    return EXIT_OK


def _sweep(args) -> int:
    cfg = load_config(args.config)
    seeds = [cfg.seed + i for i in range(args.seeds)]
    rows = sim.sweep_ratios(cfg, args.ratios, seeds)
    sim.write_sweep(rows, args.output)
    for r in rows:
        for f in r.failures:
            log.warning("ratio %g: %s", r.ratio, f)
        if r.flagged:
            log.warning("ratio %g exceeds %g; expect diminishing returns", r.ratio, sim.FLAG_RATIO)
    failed = sum(len(r.failures) for r in rows)
    if failed == sum(len(r.failures) + len(r.values) for r in rows):
        log.error("every run failed")
        return EXIT_RUNTIME
    return EXIT_OK


COMMANDS = {"genmap": _genmap, "simulate": _simulate, "sweep": _sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    log.debug("kernel backend: %s", current_backend())
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"magnav: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MagNavError, OSError) as exc:
        print(f"magnav: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
