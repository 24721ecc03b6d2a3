"""Command-line entry point: ``kolmoflow <experiment> [--config path.json] [overrides]``.

Exit codes: 0 pass (or no pass criterion), 1 criterion failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .dynamics import ConfigurationError
from .experiments import EXPERIMENTS, ExperimentConfig, run

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kolmoflow", description="Run a Kolmogorov-flow experiment.")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", type=Path, help="JSON config; defaults to the packaged one")
    ap.add_argument("--omega", type=float, help="mean-flow speed; collapses any Omega grid to this value")
    ap.add_argument("--lambda", dest="lam", type=float, help="forcing amplitude")
    ap.add_argument("--n", type=int, help="truncation |k|_inf <= N")
    ap.add_argument("--norm", choices=("integral", "coefficient"), help="norm convention for outputs")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    source = None
    try:
        if args.config is not None:
            try:
                source = args.config.read_bytes()
            except OSError as exc:
                raise ConfigurationError(f"cannot read config {args.config}: {exc}") from exc
            cfg = ExperimentConfig.from_json(args.config)
            if cfg.experiment != args.experiment:
                raise ConfigurationError(f"config is for {cfg.experiment!r}, not {args.experiment!r}")
        else:
            cfg = ExperimentConfig.default(args.experiment)
        cfg = cfg.with_overrides(Omega=args.omega, lam=args.lam, N=args.n, norm=args.norm, out=args.out)
        result = run(cfg, source)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(result.summary())
    print(json.dumps(_short(result.metrics), indent=2, default=str))
    return EXIT_FAIL if result.passed is False else EXIT_PASS


def _short(metrics: dict) -> dict:
    return {k: v for k, v in metrics.items() if not isinstance(v, dict) or len(v) <= 12}


if __name__ == "__main__":
    sys.exit(main())
