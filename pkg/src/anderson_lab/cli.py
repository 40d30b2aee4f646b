"""Command-line entry point: anderson-lab <command> [flags]."""

import argparse
import sys
from collections.abc import Callable, Sequence
from typing import Any, NoReturn

from dotenv import load_dotenv
from loguru import logger
from pydantic import ValidationError

from anderson_lab.classify import Verdict, classify, make_classifier
from anderson_lab.config import RunConfig, default_log_level
from anderson_lab.errors import AndersonLabError, ConfigError, GridError
from anderson_lab.grid import TorusGrid, bfs_distances, laplacian
from anderson_lab.perturbation import (
    coefficient_entry,
    fourier_pair,
    fourier_vanishing_vertices,
    minimal_paths,
    path_sum,
)
from anderson_lab.probability import (
    PotentialDistribution,
    enumerate_bernoulli,
    exact_bad_prob_prime_cycle,
    lower_bound_bad,
    monte_carlo,
    reflection_symmetric_prob,
    shift_symmetric_mass,
    trial_rng,
)
from anderson_lab.selftest import run_selftest
from anderson_lab.services.writer import ReportWriter
from anderson_lab.spectral import DEFAULT_EIGH_TOL, Potential, ipr_heatmap
from anderson_lab.symmetry import reflection_centers
from anderson_lab.utils import load_potential_file, parse_dims, parse_floats, parse_t_grid

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2
LOG_FORMAT = "{time:HH:mm:ss} | {level: <8} | {message}"
CONTINUOUS_FALLBACK = "uniform:-1,1"


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on usage errors."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dims", help="Torus side lengths, e.g. 7 or 3,3")
    common.add_argument("--L", dest="L", type=int, help="Cycle length for the exact formula")
    common.add_argument("--p", type=float, default=0.5, help="Bernoulli probability of +1")
    common.add_argument("--dist", help="bernoulli:P, uniform:A,B or explicit:X,Y,...")
    common.add_argument("--potential", help="Comma-separated values in vertex order")
    common.add_argument("--potential-file", help="File of comma- or newline-separated values")
    common.add_argument("--t-grid", help="Coupling range start:stop:count")
    common.add_argument("--t-samples", type=int, default=3, help="Generic t samples per verdict")
    common.add_argument("--gap-tol", type=float, help="Simple-spectrum tolerance")
    common.add_argument("--entry-tol", type=float, default=1e-8, help="Non-vanishing tolerance")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--k", type=int, help="Anchor vertex (paths) or Fourier mode")
    common.add_argument("--classifier", default="full", help="exact, full, numerical or certificate")
    common.add_argument("--solver", help="jacobi or lapack (default: ANDERSON_LAB_SOLVER)")
    common.add_argument("--threads", type=int, help="Worker threads (default: ANDERSON_LAB_THREADS)")
    common.add_argument("--out", help="Output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), help="Output format")
    common.add_argument("--log-level", help="Log level (default: ANDERSON_LAB_LOG_LEVEL or WARNING)")
    return common


def build_parser() -> CliParser:
    parser = CliParser(
        prog="anderson-lab",
        description="Good and bad potentials of the Anderson model on torus grids",
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="Good/bad verdict for one potential")
    sub.add_parser("heatmap", parents=[common], help="Eigenvalue and log IPR sweep over t")
    sub.add_parser("exact", parents=[common], help="Closed-form P(bad) on a prime cycle")
    sub.add_parser("bound", parents=[common], help="Shift-symmetry lower bound on P(bad)")
    sub.add_parser("shift-mass", parents=[common], help="Enumerated shift-symmetric mass")
    sub.add_parser("enumerate", parents=[common], help="Exact P(bad) over all sign patterns")
    sub.add_parser("mc", parents=[common], help="Monte Carlo estimate of P(bad)")
    sub.add_parser("paths", parents=[common], help="Minimal paths and perturbation coefficients")
    sub.add_parser("fourier", parents=[common], help="First-order Fourier problem on a cycle")
    selftest = sub.add_parser("selftest", parents=[common], help="Reduced acceptance suite")
    selftest.add_argument("--eigh-tol", type=float, default=DEFAULT_EIGH_TOL, help=argparse.SUPPRESS)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """
    Parse raw flag strings and validate them as one RunConfig.

    Raises:
        ConfigError: On malformed flag text
        ValidationError: On out-of-range values
    """
    if args.potential is not None and args.potential_file is not None:
        raise ConfigError("Give either --potential or --potential-file, not both")
    potential = None
    if args.potential is not None:
        potential = parse_floats(args.potential)
    elif args.potential_file is not None:
        potential = load_potential_file(args.potential_file)
    fields: dict[str, Any] = {
        "dims": parse_dims(args.dims) if args.dims else None,
        "p": args.p,
        "dist": args.dist,
        "t_grid": parse_t_grid(args.t_grid) if args.t_grid else None,
        "t_samples": args.t_samples,
        "gap_tol": args.gap_tol,
        "entry_tol": args.entry_tol,
        "seed": args.seed,
        "trials": args.trials,
        "out": args.out,
        "potential": potential,
        "L": args.L,
        "k": args.k,
        "classifier": args.classifier,
        "threads": args.threads,
    }
    if args.format is not None:
        fields["format"] = args.format
    if args.solver is not None:
        fields["solver"] = args.solver
    if args.log_level is not None:
        fields["log_level"] = args.log_level
    return RunConfig(**fields)


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level, format=LOG_FORMAT)


def resolve_potential(
    config: RunConfig, grid: TorusGrid, fallback: str | None = None
) -> Potential:
    """
    --potential or --potential-file if given, else a seeded draw from --dist.

    Without --dist the draw uses `fallback`, or Bernoulli with --p.
    """
    if config.potential is not None:
        return Potential(config.potential)
    dist = config.distribution()
    if config.dist is None and fallback is not None:
        dist = PotentialDistribution.parse(fallback)
    return dist.sample(grid.n, trial_rng(config.seed, 0))


def _json_only(config: RunConfig, command: str) -> None:
    if config.format != "json":
        raise ConfigError(f"{command} writes JSON only")


def cmd_classify(config: RunConfig, args: argparse.Namespace) -> int:
    _json_only(config, "classify")
    grid = config.grid()
    v = resolve_potential(config, grid)
    result = classify(grid, v, config.classify_params())
    logger.info(f"{grid}: {result}")
    ReportWriter(config.out).write_json(
        "classify",
        {"dims": list(grid.dims), "potential": v.values.tolist(), "classification": result},
    )
    return EXIT_INCONCLUSIVE if result.verdict == Verdict.INCONCLUSIVE else EXIT_OK


def cmd_heatmap(config: RunConfig, args: argparse.Namespace) -> int:
    if config.t_grid is None:
        raise ConfigError("heatmap needs --t-grid start:stop:count")
    grid = config.grid()
    v = resolve_potential(config, grid, CONTINUOUS_FALLBACK)
    rows = ipr_heatmap(grid, v, config.t_grid, config.solver, config.runner())
    writer = ReportWriter(config.out)
    # CSV unless JSON was asked for explicitly.
    if args.format == "json":
        writer.write_json(
            "heatmap", {"potential": v.values.tolist(), "rows": [r._asdict() for r in rows]}
        )
    else:
        writer.write_heatmap(rows)
    return EXIT_OK


def cmd_exact(config: RunConfig, args: argparse.Namespace) -> int:
    _json_only(config, "exact")
    L = config.L
    if L is None and config.dims is not None and len(config.dims) == 1:
        L = config.dims[0]
    if L is None:
        raise ConfigError("exact needs --L (or one-dimensional --dims)")
    bad = exact_bad_prob_prime_cycle(L, config.p)
    ReportWriter(config.out).write_json(
        "exact",
        {
            "L": L,
            "p": config.p,
            "bad_probability": bad,
            "good_probability": 1.0 - bad,
            "reflection_symmetric_prob": reflection_symmetric_prob(L, config.p),
        },
    )
    return EXIT_OK


def cmd_bound(config: RunConfig, args: argparse.Namespace) -> int:
    _json_only(config, "bound")
    grid = config.grid()
    bound = lower_bound_bad(grid.dims, config.p)
    ReportWriter(config.out).write_json(
        "bound", {"dims": list(grid.dims), "p": config.p, "lower_bound": bound}
    )
    return EXIT_OK


def cmd_shift_mass(config: RunConfig, args: argparse.Namespace) -> int:
    _json_only(config, "shift-mass")
    grid = config.grid()
    mass = shift_symmetric_mass(grid, config.p, config.runner())
    ReportWriter(config.out).write_json(
        "shift-mass",
        {
            "dims": list(grid.dims),
            "p": config.p,
            "shift_symmetric_mass": mass,
            "lower_bound": lower_bound_bad(grid.dims, config.p),
        },
    )
    return EXIT_OK


def cmd_enumerate(config: RunConfig, args: argparse.Namespace) -> int:
    _json_only(config, "enumerate")
    grid = config.grid()
    classifier = make_classifier(config.classifier, config.classify_params())
    runner = config.runner()
    estimate = enumerate_bernoulli(grid, config.p, classifier, runner)
    bound = lower_bound_bad(grid.dims, config.p)
    ReportWriter(config.out).write_json(
        "enumerate",
        {"estimate": estimate, "lower_bound": bound, "bound_gap": estimate.estimate - bound},
    )
    return EXIT_OK


def cmd_mc(config: RunConfig, args: argparse.Namespace) -> int:
    _json_only(config, "mc")
    grid = config.grid()
    classifier = make_classifier(config.classifier, config.classify_params())
    estimate = monte_carlo(
        grid, config.distribution(), config.trials, config.seed, classifier, config.runner()
    )
    ReportWriter(config.out).write_json("mc", estimate)
    return EXIT_OK


def cmd_paths(config: RunConfig, args: argparse.Namespace) -> int:
    _json_only(config, "paths")
    grid = config.grid()
    k = config.k if config.k is not None else 0
    grid.check_vertex(k)
    v = resolve_potential(config, grid, CONTINUOUS_FALLBACK)
    a = laplacian(grid)
    dist = bfs_distances(a, k)
    entries = []
    for i in range(grid.n):
        if i == k:
            continue
        paths = minimal_paths(a, i, k)
        entries.append(
            {
                "i": i,
                "distance": int(dist[i]),
                "paths": [list(path) for path in paths],
                "path_sum": path_sum(v.values, a, i, k),
                "coefficient": coefficient_entry(v.values, a, k, i),
            }
        )
    ReportWriter(config.out).write_json(
        "paths", {"dims": list(grid.dims), "k": k, "diagonal": v.values.tolist(), "entries": entries}
    )
    return EXIT_OK


def cmd_fourier(config: RunConfig, args: argparse.Namespace) -> int:
    _json_only(config, "fourier")
    grid = config.grid()
    if grid.d != 1:
        raise GridError(f"fourier needs a cycle, got {grid}")
    v = resolve_potential(config, grid)
    modes = [config.k] if config.k is not None else list(range(1, grid.n))
    result = []
    for k in modes:
        pair = fourier_pair(v, k)
        result.append(
            {
                "k": k,
                "values": pair.as_pairs(),
                "eigenvalues": list(pair.eigenvalues),
                "vanishing_vertices": fourier_vanishing_vertices(v, k),
            }
        )
    ReportWriter(config.out).write_json(
        "fourier",
        {
            "L": grid.n,
            "potential": v.values.tolist(),
            "reflection_centers": reflection_centers(v),
            "modes": result,
        },
    )
    return EXIT_OK


def cmd_selftest(config: RunConfig, args: argparse.Namespace) -> int:
    report = run_selftest(eigh_tol=args.eigh_tol, threads=config.threads)
    print(report, file=sys.stderr)
    ReportWriter(config.out).write_json("selftest", report)
    return EXIT_OK if report.passed else EXIT_ERROR


COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "classify": cmd_classify,
    "heatmap": cmd_heatmap,
    "exact": cmd_exact,
    "bound": cmd_bound,
    "shift-mass": cmd_shift_mass,
    "enumerate": cmd_enumerate,
    "mc": cmd_mc,
    "paths": cmd_paths,
    "fourier": cmd_fourier,
    "selftest": cmd_selftest,
}


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 1 on usage, validation or IO errors, 2 on an
        Inconclusive verdict
    """
    load_dotenv()
    args = build_parser().parse_args(argv)
    # Validation builds grids and logs; the default sink would print DEBUG.
    try:
        configure_logging(default_log_level())
    except ValueError:
        configure_logging("WARNING")
    try:
        config = config_from_args(args)
    except (AndersonLabError, ValidationError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_ERROR

    configure_logging(config.log_level)
    config.log_summary()
    try:
        return COMMANDS[args.command](config, args)
    except (AndersonLabError, ValidationError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR


def run() -> None:
    sys.exit(main())
