"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 numeric failure, 3 degenerate result.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import NULL_VARIANTS, RunConfig, load_config
from .errors import CoaggError
from .network import CLIP_POLICIES
from .pipeline import run_pipeline, run_stage
from .synthetic import SyntheticSpec, generate_synthetic_economy, write_economy

log = logging.getLogger("coagg")

STAGE_HELP = {
    "proximity": "parse input tables and write EG, L, IO and K proximity CSVs",
    "network": "build the co-agglomeration network and its DOT exports",
    "communities": "Markov-time sweep with Louvain repeats, null models and partition selection",
    "regress": "channel regressions at global, industry and community scope",
    "education": "pooled regressions of community coefficients on education",
    "pipeline": "run every stage in order",
}


class _Parser(argparse.ArgumentParser):
    # usage errors are input errors: exit 1, since 2 means a numeric failure
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser):
    d = RunConfig()
    g = p.add_argument_group("run configuration (flags override --config, which overrides defaults)")
    g.add_argument("--config", help="INI file with a [run] section")
    g.add_argument("--inputs", help=f"directory holding the input CSVs (default {d.inputs!r})")
    g.add_argument("--out", help=f"run directory (default {d.out!r})")
    g.add_argument("--seed", type=int, help=f"master seed (default {d.seed})")
    g.add_argument("--mode", choices=("continuous", "discrete"), help=f"random-walk time (default {d.mode})")
    g.add_argument("--times", help=f"Markov time grid min:max:points[:lin] (default {d.times})")
    g.add_argument("--repeats", type=int, help=f"Louvain runs per Markov time (default {d.repeats})")
    g.add_argument("--nulls", type=int, help=f"number of shuffled null networks (default {d.nulls})")
    g.add_argument("--null-variant", choices=NULL_VARIANTS, help=f"null shuffle (default {d.null_variant})")
    g.add_argument("--clip", choices=CLIP_POLICIES, help=f"negative EG policy (default {d.clip})")
    g.add_argument("--x-mode", choices=("national", "mean"), help=f"EG reference shares (default {d.x_mode})")
    g.add_argument("--alpha", type=float, help=f"significance level for annotations (default {d.alpha})")
    g.add_argument("--weighting", help=f"education schemes, comma separated (default {d.weighting})")
    g.add_argument("--zeroing", help=f"zeroing variants, comma separated (default {d.zeroing})")
    g.add_argument("--channels", help=f"regression channels from L,IO,K (default {d.channels})")
    g.add_argument("--max-k", type=int, help=f"largest P_k kept (default {d.max_k})")
    g.add_argument("--min-size", type=int,
                   help=f"smallest community pooled in education fits (default {d.min_size})")
    g.add_argument("--education", dest="education", action="store_true", default=None,
                   help="enable the education stage (default on)")
    g.add_argument("--no-education", dest="education", action="store_false",
                   help="skip the education stage")
    g.add_argument("--education-weighted", action="store_true", default=None,
                   help="employment-weighted community education means")
    g.add_argument("--top-fraction", type=float, help=f"edge share in the display graph (default {d.top_fraction})")
    g.add_argument("--workers", type=int, help=f"parallel processes for the sweep (default {d.workers})")


CONFIG_KEYS = ("inputs", "out", "seed", "mode", "times", "repeats", "nulls", "null_variant", "clip",
               "x_mode", "alpha", "weighting", "zeroing", "channels", "max_k", "min_size", "education",
               "education_weighted", "top_fraction", "workers")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coagg", description="Industry co-agglomeration networks, "
                                     "multiscale communities and channel regressions.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in STAGE_HELP.items():
        p = sub.add_parser(name, help=text, description=text)
        _add_run_flags(p)
        if name == "regress":
            p.add_argument("--partition", help="regress on one partition JSON only")
    s = sub.add_parser("synth", help="write a synthetic economy with planted clusters",
                       description="write a synthetic economy with planted clusters")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--clusters", type=_int_list, default=(10, 10), help="cluster sizes, e.g. 10,10")
    s.add_argument("--regimes", default="labour,io", help="one regime per cluster: labour or io")
    s.add_argument("--regions", type=int, default=SyntheticSpec.n_regions)
    s.add_argument("--occupations", type=int, default=SyntheticSpec.n_occupations)
    s.add_argument("--out", default="synthetic", help="output directory (default 'synthetic')")
    return parser


def _config(args) -> RunConfig:
    flags = {k: getattr(args, k, None) for k in CONFIG_KEYS}
    path = args.config
    if path is None and args.command != "pipeline":
        # later stages reuse the configuration stored with the run
        stored = Path(flags["out"] or RunConfig.out) / "config.ini"
        if stored.is_file():
            path = stored
    return load_config(path, flags)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            spec = SyntheticSpec(cluster_sizes=args.clusters,
                                 regimes=tuple(r.strip() for r in args.regimes.split(",")),
                                 n_regions=args.regions, n_occupations=args.occupations, seed=args.seed)
            out = write_economy(generate_synthetic_economy(spec), args.out)
        elif args.command == "pipeline":
            out = run_pipeline(_config(args))
        else:
            kw = {"partition": args.partition} if args.command == "regress" and args.partition else {}
            out = run_stage(args.command, _config(args), **kw)
    except CoaggError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
