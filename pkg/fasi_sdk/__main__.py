import argparse
import logging
import sys
from typing import List, Optional

from .commands import cmd_conformal, cmd_evaluate, cmd_rvalue, cmd_simulate, cmd_stability
from .constants import DEFAULT_THREADS, DEFAULT_VARIANT
from .core.errors import FasiError

logger = logging.getLogger("fasi_sdk")


def _configure_logging(level: str) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("[%(asctime)s] %(message)s"))
    root = logging.getLogger("fasi_sdk")
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
    root.propagate = False


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="Output file (default: stdout)")
    common.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None, help="Random seed; FASI_SEED overrides it")

    threaded = argparse.ArgumentParser(add_help=False)
    threaded.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="Worker threads")

    parser = argparse.ArgumentParser(prog="fasi", description="Fairness-adjusted selective classification")
    sub = parser.add_subparsers(dest="command", required=True)

    rv = sub.add_parser("rvalue", parents=[common, threaded], help="R-values and selections for a test file")
    rv.add_argument("--cal", required=True, help="Labeled calibration score file")
    rv.add_argument("--test", required=True, help="Test score file")
    rv.add_argument("--class", dest="classes", action="append", required=True, help="Target class (repeatable)")
    rv.add_argument("--alpha", dest="alphas", type=float, action="append", help="FSR level, one per --class")
    rv.add_argument("--variant", default=DEFAULT_VARIANT, help="standard, plus, conservative, conservative_plus")
    rv.add_argument("--class-set", default=None, help="Comma-separated full class set (default: score columns of --cal)")
    rv.add_argument("--groups", default=None, help="Comma-separated declared groups")
    rv.add_argument("--fcc", action="store_true", help="Pool groups (full covariate classifier baseline)")
    rv.add_argument("--rcc", action="store_true", help="Pool groups for reduced covariate scores")
    rv.add_argument("--conservative", action="store_true", help="Use the conservative R-value")
    rv.add_argument("--selections", default=None, help="Also write one decision per record to this file")
    rv.set_defaults(func=cmd_rvalue)

    cf = sub.add_parser("conformal", parents=[common], help="Conformal p-values and BH q-values")
    cf.add_argument("--cal", required=True, help="Calibration score file; labeled rows of --class are dropped")
    cf.add_argument("--test", required=True)
    cf.add_argument("--class", dest="cls", required=True, help="Class whose score column is used")
    cf.add_argument("--alpha", type=float, required=True)
    cf.set_defaults(func=cmd_conformal)

    ev = sub.add_parser("evaluate", parents=[common], help="FSP, EPI and power of a selection file")
    ev.add_argument("--selections", required=True)
    ev.add_argument("--truth", required=True, help="File with id and label columns")
    ev.add_argument("--class", dest="classes", action="append", default=None)
    ev.add_argument("--groups", default=None, help="Comma-separated groups to report")
    ev.set_defaults(func=cmd_evaluate)

    sim = sub.add_parser("simulate", parents=[common, seeded, threaded], help="Two-group Gaussian simulation sweep")
    sim.add_argument("--scenario", type=int, choices=[1, 2], default=1)
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--alpha", dest="alphas", type=float, action="append", help="One value, or one per class")
    sim.add_argument("--pi2f", default=None, help="LO:HI:STEP or comma-separated values")
    sim.add_argument("--methods", default=None, help="Comma-separated subset of fasi,fcc,rcc,oracle")
    sim.add_argument("--scores", choices=["oracle", "logistic"], default="oracle")
    sim.add_argument("--variant", default=DEFAULT_VARIANT)
    sim.add_argument("--quantiles", default=None, help="Comma-separated quantile levels")
    sim.set_defaults(func=cmd_simulate)

    st = sub.add_parser("stability", parents=[common, seeded], help="Spread of R vs R+ at a fixed score")
    st.add_argument("--test-sizes", default="5,50,200")
    st.add_argument("--n-cal", type=int, default=1000)
    st.add_argument("--score", type=float, default=0.9)
    st.add_argument("--draws", type=int, default=1000)
    st.set_defaults(func=cmd_stability)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    try:
        return args.func(args)
    except FasiError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except Exception as e:
        logger.exception("unexpected failure: %s", e)
        return 4


if __name__ == "__main__":
    sys.exit(main())
