"""Command-line entry point for benchmark campaigns."""

from __future__ import annotations

import argparse
import logging
import sys

from .adaptivity import MODES
from .bench import OVERKILL_MODES, ExperimentConfig, fit_rate, load_config, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hpplast-bench",
                                 description="Adaptive elastoplasticity convergence campaigns.")
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--p", type=int, help="initial polynomial degree")
    ap.add_argument("--levels", type=int, help="maximum number of levels")
    ap.add_argument("--theta", type=float, help="bulk parameter for Doerfler marking")
    ap.add_argument("--out", help="CSV output path")
    ap.add_argument("--overkill", choices=OVERKILL_MODES)
    ap.add_argument("--verbose", action="store_true", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("mode", "p", "levels", "theta", "out", "overkill", "verbose")}
    try:
        cfg = load_config(args.config, **overrides) if args.config else ExperimentConfig().replace(**overrides)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if cfg.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    res = run(cfg)
    print(f"wrote {cfg.out} ({len(res.rows)} levels)")
    if len(res.rows) >= 3:
        print(f"estimator slope (last 3 levels): {fit_rate(res.rows, 'eta_total', 3):.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
