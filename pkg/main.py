"""
Dispersal Survival Lab - command line
=====================================

Compares three birth-death populations on the same random environment:
- Dispersion: every survivor of a collapsing colony founds its own colony
  with a fresh (λ, τ); survives iff m = E[exp((Λ-1)τ)] > 1
- Global: one population, birth rate redrawn for everyone at renewal
  times; survives iff E(Λ) > 1
- Fixed: constant birth rate, the classical baseline

Usage:
    python main.py criterion --mu two_point:0,2,0.5 --nu exp:1.5
    python main.py compare --mu two_point:0,2,0.5 --nu exp:1.5 --trials 10000 --seed 7
    python main.py sweep --mu two_point:0.5,1.5,0.8 --nu exp:1 --sweep a=0.3:1.2:0.1

Artifacts go to standard output (or --out); logs go to standard error.
"""
import logging
import sys
from typing import Optional, Sequence

from config import settings
from app.cli.args import RunSpecError, parse_args
from app.cli.runner import EXIT_USAGE, run

logger = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )
    try:
        spec = parse_args(argv)
    except RunSpecError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_USAGE

    if spec.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    logger.debug(f"🚀 {spec.subcommand}: {spec}")
    return run(spec)


if __name__ == "__main__":
    sys.exit(main())
