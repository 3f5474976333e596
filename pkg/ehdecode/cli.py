import argparse
import json
import logging
import sys
import warnings
from typing import Any, Mapping, Optional, Sequence

from .axioms import single_user_example, solver_defaults
from .bc import solve_bc, sweep_bc_region
from .mac import DecodingMode, WeightPair, solve_mac_simultaneous, solve_mac_successive, sweep_region
from .model import (
    DecodingFunction,
    DomainError,
    InfeasibleError,
    LinkModel,
    NonConvergenceWarning,
    RateFunction,
    Scenario,
    Topology,
    UnsupportedConfigurationError,
    check_scenario,
)
from .oracle import policy_record
from .single_user import solve_single_user, solve_single_user_no_battery
from .two_hop import solve_two_hop
from .verify import bc_fixture, mac_fixture, run_suite

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NONCONVERGED = 0, 1, 2, 3

EXAMPLES = ("single_user", "mac", "bc_A", "bc_B", "bc_C", "bc_free")


class ScenarioFileError(ValueError):
    """A scenario document is malformed."""


def scenario_from_dict(data: Mapping[str, Any]) -> Scenario:
    """Builds a :class:`Scenario` from a scenario document.

    Parameters
    ----------
    data : Mapping
        Decoded JSON with the keys ``topology``, ``energy`` and optionally
        ``slots``, ``rate_function``, ``decoding``, ``sigma2`` and
        ``rx_has_battery``.

    Returns
    -------
    Scenario
        The instance. Invariant violations are left to
        :func:`ehdecode.model.check_scenario`.

    Raises
    ------
    ScenarioFileError
        If the document cannot be read as a scenario.
    """
    try:
        log_base = data.get("rate_function", {}).get("log_base", "natural")
        decoding = dict(data.get("decoding", {"kind": "inverse_g"}))
        decoding.setdefault("log_base", log_base)

        link = LinkModel(RateFunction(log_base), DecodingFunction(**decoding))
        scenario = Scenario(
            data["topology"],
            data["energy"],
            link,
            data.get("sigma2"),
            bool(data.get("rx_has_battery", True)),
        )
    except KeyError as error:
        raise ScenarioFileError(f"Missing key {error} in the scenario document.") from None
    except (TypeError, AttributeError, ValueError) as error:
        raise ScenarioFileError(str(error)) from None

    if "slots" in data and int(data["slots"]) != scenario.slots:
        raise ScenarioFileError(f"slots is {data['slots']} but the profiles have {scenario.slots} slots.")

    return scenario


def scenario_to_dict(scenario: Scenario) -> dict:
    """Scenario document of ``scenario``."""
    decoding = scenario.link.decoding
    params = dict(linear=("a", "b"), exponential=("c", "d", "e"), inverse_g=())[decoding.kind]

    data = dict(
        topology=scenario.topology.value,
        slots=scenario.slots,
        energy={role: [float(v) for v in profile.amounts] for role, profile in scenario.profiles.items()},
        rate_function=dict(log_base=scenario.link.log_base),
        decoding=dict(kind=decoding.kind, **{p: getattr(decoding, p) for p in params}),
    )
    if scenario.bc_noise_sigma2 is not None:
        data["sigma2"] = scenario.bc_noise_sigma2
    if scenario.topology is Topology.SINGLE_USER:
        data["rx_has_battery"] = scenario.rx_has_battery

    return data


def load_scenario(path: str) -> Scenario:
    """Reads a scenario document from ``path``."""
    try:
        with open(path, encoding="utf-8") as fd:
            data = json.load(fd)
    except OSError as error:
        raise ScenarioFileError(f"Cannot read {path}: {error.strerror}.") from None
    except json.JSONDecodeError as error:
        raise ScenarioFileError(f"{path} is not valid JSON: {error}.") from None

    if not isinstance(data, dict):
        raise ScenarioFileError(f"{path} does not hold a JSON object.")

    return scenario_from_dict(data)


def example_scenario(name: str) -> Scenario:
    """One of the bundled instances: ``single_user``, ``mac``, ``bc_A``,
    ``bc_B``, ``bc_C`` or ``bc_free`` (profile A without decoding limits)."""
    if name == "single_user":
        profiles = {role: single_user_example[role] for role in ("tx", "rx")}
        return Scenario(Topology.SINGLE_USER, profiles, LinkModel())
    if name == "mac":
        return mac_fixture()
    if name == "bc_free":
        return bc_fixture("A", relaxed=True)
    if name in ("bc_A", "bc_B", "bc_C"):
        return bc_fixture(name[-1])

    raise ValueError(f"Unknown example {name!r}; expected one of {EXAMPLES}.")


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fd:
            fd.write(text)


def _parse_weights(text: str) -> WeightPair:
    try:
        mu1, mu2 = (float(v) for v in text.split(","))
        return WeightPair(mu1, mu2)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two non-negative numbers 'mu1,mu2', got {text!r}")


def _scenario_or_exit(path: str) -> Any:
    """The scenario at ``path``, or the exit code explaining why there is none."""
    try:
        scenario = load_scenario(path)
    except ScenarioFileError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE

    violations = check_scenario(scenario)
    if violations:
        for violation in violations:
            print(f"error: {violation}", file=sys.stderr)
        return EXIT_INFEASIBLE

    return scenario


def _solve(scenario: Scenario, args: argparse.Namespace):
    tol = args.tol
    max_iters = args.max_iters

    if scenario.topology is Topology.SINGLE_USER:
        tx, rx = scenario.profiles["tx"], scenario.profiles["rx"]
        if scenario.rx_has_battery:
            return solve_single_user(tx, rx, scenario.link)
        return solve_single_user_no_battery(tx, rx, scenario.link)

    if scenario.topology is Topology.TWO_HOP:
        return solve_two_hop(
            scenario,
            solver_defaults["two_hop_tol"] if tol is None else tol,
            solver_defaults["outer_max_iters"] if max_iters is None else max_iters,
        )

    outer_tol = solver_defaults["outer_tol"] if tol is None else tol
    outer_iters = solver_defaults["outer_max_iters"] if max_iters is None else max_iters

    if scenario.topology is Topology.BC:
        return solve_bc(scenario, args.weights, outer_tol, outer_iters)

    if DecodingMode(args.mode) is DecodingMode.SIMULTANEOUS:
        return solve_mac_simultaneous(scenario, args.weights, outer_tol, outer_iters)

    init = None
    if args.init == "simultaneous":
        init = solve_mac_simultaneous(scenario, args.weights).policy

    return solve_mac_successive(
        scenario,
        args.weights,
        init,
        solver_defaults["sca_tol"] if tol is None else tol,
        solver_defaults["sca_max_iters"] if max_iters is None else max_iters,
    )


def cmd_solve(args: argparse.Namespace) -> int:
    """Solves one scenario and writes the policy as JSON."""
    scenario = _scenario_or_exit(args.scenario)
    if isinstance(scenario, int):
        return scenario

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            result = _solve(scenario, args)
    except (InfeasibleError, DomainError) as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UnsupportedConfigurationError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE

    record = policy_record(result, scenario)
    _write(json.dumps(record, indent=2, sort_keys=True) + "\n", args.out)

    if not record["converged"]:
        print("warning: the solver stopped before converging", file=sys.stderr)
        return EXIT_NONCONVERGED

    return EXIT_OK


def cmd_region(args: argparse.Namespace) -> int:
    """Sweeps a MAC or BC departure region and writes it as CSV."""
    scenario = _scenario_or_exit(args.scenario)
    if isinstance(scenario, int):
        return scenario

    if scenario.topology not in (Topology.MAC, Topology.BC):
        print(f"error: regions need a mac or bc scenario, got {scenario.topology.value}", file=sys.stderr)
        return EXIT_USAGE

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            if scenario.topology is Topology.MAC:
                region = sweep_region(scenario, args.mode, args.n_weights, args.tol)
            else:
                region = sweep_bc_region(
                    scenario, args.n_weights, solver_defaults["outer_tol"] if args.tol is None else args.tol
                )
    except (InfeasibleError, DomainError) as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UnsupportedConfigurationError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE

    _write(region.to_frame().to_csv(index=False, float_format="%.12g"), args.out)

    if not region.converged:
        print("warning: some region points did not converge", file=sys.stderr)
        return EXIT_NONCONVERGED

    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    """Runs a verification suite and prints the pass/fail table."""
    try:
        table = run_suite(args.suite, args.seed, args.check, quiet=not args.progress)
    except ValueError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE

    print(table.to_string(index=False))

    return EXIT_OK if table["passed"].all() else EXIT_INFEASIBLE


def cmd_example(args: argparse.Namespace) -> int:
    """Writes a bundled scenario document."""
    scenario = example_scenario(args.name)
    _write(json.dumps(scenario_to_dict(scenario), indent=2, sort_keys=True) + "\n", args.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    # Usage errors exit with 1
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ehdecode",
        description="Offline transmission policies for energy harvesting networks with decoding costs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver iterations")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = commands.add_parser("solve", help="solve one scenario")
    solve.add_argument("scenario", help="scenario JSON file")
    solve.add_argument("--weights", type=_parse_weights, default=WeightPair(1.0, 1.0), help="mu1,mu2")
    solve.add_argument("--mode", choices=[m.value for m in DecodingMode], default="simultaneous")
    solve.add_argument(
        "--init",
        choices=["simultaneous", "zero"],
        default="simultaneous",
        help="starting powers of successive decoding",
    )
    solve.add_argument("--tol", type=float, default=None)
    solve.add_argument("--max-iters", type=int, default=None)
    solve.add_argument("--out", default=None, help="output file, standard output by default")
    solve.set_defaults(handler=cmd_solve)

    region = commands.add_parser("region", help="sweep a MAC or BC departure region")
    region.add_argument("scenario", help="scenario JSON file")
    region.add_argument("--mode", choices=[m.value for m in DecodingMode], default="simultaneous")
    region.add_argument("--n-weights", type=int, default=9)
    region.add_argument("--tol", type=float, default=None)
    region.add_argument("--out", default=None, help="output CSV, standard output by default")
    region.set_defaults(handler=cmd_region)

    verify = commands.add_parser("verify", help="run the verification suites")
    verify.add_argument("--suite", choices=["lemmas", "oracle", "all"], default="all")
    verify.add_argument("--seed", type=int, default=7)
    verify.add_argument("--check", action="append", default=None, help="run only this check")
    verify.add_argument("--progress", action="store_true", help="show a progress bar")
    verify.set_defaults(handler=cmd_verify)

    example = commands.add_parser("example", help="write a bundled scenario")
    example.add_argument("name", choices=EXAMPLES)
    example.add_argument("--out", default=None, help="output file, standard output by default")
    example.set_defaults(handler=cmd_example)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point of the ``ehdecode`` command."""
    args = build_parser().parse_args(argv)

    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, format="%(name)s: %(message)s")

    if getattr(args, "n_weights", 9) < 3:
        print("error: --n-weights must be at least 3", file=sys.stderr)
        return EXIT_USAGE

    return args.handler(args)
