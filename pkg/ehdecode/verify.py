import logging
import warnings
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .axioms import bc_example, mac_example, roles
from .bc import _inner as _bc_inner
from .bc import _weak_budget, solve_bc, sweep_bc_region
from .gp import GeometricProgram, Monomial, Posynomial, solve_gp
from .mac import DecodingMode, RegionPoint, WeightPair, solve_mac_simultaneous, sweep_region, weight_grid
from .model import LinkModel, NonConvergenceWarning, Scenario, Topology, relax_receivers
from .oracle import (
    GridSpec,
    audit,
    oracle_bc_single_slot,
    oracle_common_rate,
    oracle_gp,
    oracle_single_user,
    oracle_virtual_relay,
    oracle_weighted,
)
from .single_user import solve_single_user
from .two_hop import solve_inner, solve_two_hop
from .utils import _budget_from_cumulative

logger = logging.getLogger(__name__)

Check = Callable[[np.random.Generator], Tuple[bool, str]]


def random_scenario(
    rng: np.random.Generator,
    topology: str,
    slots: int,
    low: float = 0.1,
    high: float = 2.0,
    link: Optional[LinkModel] = None,
    sigma2: Optional[float] = None,
) -> Scenario:
    """Scenario with every profile drawn uniformly from ``[low, high)``.

    MAC and BC instances default to the base-2 ``phi = g^-1`` link, the
    others to the natural-log one. BC instances draw ``sigma2`` from
    ``[1.5, 3)`` unless given.
    """
    topology = Topology(topology)
    if link is None:
        multi_user = topology in (Topology.MAC, Topology.BC)
        link = LinkModel.inverse("base2" if multi_user else "natural")

    profiles = {role: rng.uniform(low, high, slots) for role in roles[topology.value]}

    if topology is Topology.BC and sigma2 is None:
        sigma2 = float(rng.uniform(1.5, 3.0))

    return Scenario(topology, profiles, link, sigma2)


def random_program(
    rng: np.random.Generator, n_vars: int, n_terms: int = 5, box: float = 3.0
) -> GeometricProgram:
    """Random geometric program confined to the log-domain box ``[-box, box]``.

    ``n_terms`` random terms are split between the objective and one
    constraint. Exponents are drawn from ``[-0.5, 0.5)``; the constraint's
    coefficients sum to less than 1, so ``x = 1`` is strictly feasible.
    """
    if n_terms < 2:
        raise ValueError(f"A random program needs at least 2 terms, got {n_terms}.")

    names = [f"x{i}" for i in range(n_vars)]

    def term(coefficient: float) -> Monomial:
        return Monomial(coefficient, dict(zip(names, rng.uniform(-0.5, 0.5, n_vars))))

    k = int(rng.integers(1, n_terms))
    objective = Posynomial([term(c) for c in rng.uniform(0.5, 2.0, k)])
    shares = rng.dirichlet(np.ones(n_terms - k)) * rng.uniform(0.3, 0.9)
    constraint = Posynomial([term(c) for c in shares])

    bounds = [Monomial(np.exp(-box), {v: sign}) for v in names for sign in (1, -1)]

    return GeometricProgram(objective, [constraint, *bounds], variables=names)


def bc_fixture(profile: str, relaxed: bool = False) -> Scenario:
    """One of the three-slot BC instances with the given receiver profile."""
    scenario = Scenario(
        Topology.BC,
        dict(tx=bc_example["tx"], **bc_example[profile]),
        LinkModel.inverse("base2"),
        bc_example["sigma2"],
    )
    return relax_receivers(scenario) if relaxed else scenario


def mac_fixture() -> Scenario:
    """The three-slot MAC instance."""
    return Scenario(Topology.MAC, mac_example, LinkModel.inverse("base2"))


def _summary(failures: List[str], total: int) -> Tuple[bool, str]:
    if failures:
        return False, f"{len(failures)}/{total} failed; first: {failures[0]}"
    return True, f"{total} instance(s)"


# Structural properties ------------------------------------------------------


def _single_user_structure(rng: np.random.Generator, count: int = 1000) -> Tuple[bool, str]:
    """Rates never decrease, every increase and the deadline exhaust a node."""
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "single_user", int(rng.integers(1, 9)), 0.0, 3.0)
        solution = solve_single_user(scenario.profiles["tx"], scenario.profiles["rx"], scenario.link)
        rates = solution.rates.rates

        slack = audit(solution, scenario).frame.pivot(index="slot", columns="constraint", values="slack")
        tight = slack.min(axis=1).to_numpy() <= 1e-6

        if np.any(np.diff(rates) < -1e-6):
            failures.append(f"instance {trial}: rates decrease")
        elif not np.all(tight[:-1][np.diff(rates) > 1e-6]):
            failures.append(f"instance {trial}: a rate increase without an exhausted node")
        elif not tight[-1]:
            failures.append(f"instance {trial}: energy left at the deadline")

    return _summary(failures, count)


def _two_hop_separable(rng: np.random.Generator, count: int = 200) -> Tuple[bool, str]:
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "two_hop", int(rng.integers(1, 7)))
        delta = rng.uniform(0.0, 1.0, scenario.slots) * scenario.energy("relay")

        source = solve_inner(scenario, delta).source_rates.rates
        alone = solve_single_user(scenario.profiles["tx"], delta, scenario.link).rates.rates
        if not np.array_equal(source, alone):
            failures.append(f"instance {trial}: source rates differ from the single-user solution")

    return _summary(failures, count)


def _two_hop_concave(rng: np.random.Generator, count: int = 50) -> Tuple[bool, str]:
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "two_hop", int(rng.integers(1, 7)))
        relay = scenario.energy("relay")

        def throughput(delta):
            return solve_inner(scenario, delta).throughput

        a = rng.uniform(0.0, 1.0, scenario.slots) * relay
        b = rng.uniform(0.0, 1.0, scenario.slots) * relay

        if throughput(0.5 * (a + b)) < 0.5 * (throughput(a) + throughput(b)) - 1e-6:
            failures.append(f"instance {trial}: throughput is not concave in delta")
        elif throughput(np.zeros(scenario.slots)) != 0.0 or throughput(relay) != 0.0:
            failures.append(f"instance {trial}: nonzero throughput at an extreme reservation")

    return _summary(failures, count)


def _mac_fixture_region(rng: np.random.Generator) -> Tuple[bool, str]:
    """Simultaneous boundary concave; successive points dominate and keep the SCA contract."""
    scenario = mac_fixture()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonConvergenceWarning)
        simultaneous = sweep_region(scenario, DecodingMode.SIMULTANEOUS, 9)
        successive = sweep_region(scenario, DecodingMode.SUCCESSIVE, 9)

    if not simultaneous.is_concave():
        return False, "simultaneous boundary is not concave"
    if not successive.dominates(simultaneous):
        return False, "a successive point falls below its simultaneous start"

    for point in successive:
        values = [value for _, _, value in point.history]
        if np.any(np.diff(values) < -1e-10):
            return False, f"objective decreased at weights {point.weights}"
        for p1, p2, _ in point.history:
            if not audit(_successive_record(point, p1, p2, scenario.link), scenario).feasible:
                return False, f"infeasible iterate at weights {point.weights}"

    return True, f"{len(successive)} weights"


def _successive_record(point: RegionPoint, p1: np.ndarray, p2: np.ndarray, link: LinkModel) -> dict:
    # The user with the larger weight is decoded last
    if point.weights.mu1 >= point.weights.mu2:
        r1, r2 = link.g(p1), link.g(p2 / (1.0 + p1))
    else:
        r1, r2 = link.g(p1 / (1.0 + p2)), link.g(p2)
    return dict(
        rates=dict(tx1=r1, tx2=r2),
        powers=dict(tx1=p1, tx2=p2),
        mode=DecodingMode.SUCCESSIVE.value,
    )


def _bc_fixture_regions(rng: np.random.Generator) -> Tuple[bool, str]:
    """Regions shrink from the free receivers through A, B and C."""
    names = ["free", "A", "B", "C"]
    scenarios = [bc_fixture("A", relaxed=True)] + [bc_fixture(name) for name in "ABC"]
    regions = [sweep_bc_region(scenario, 9) for scenario in scenarios]

    for outer, inner, outer_name, inner_name in zip(regions, regions[1:], names, names[1:]):
        if not outer.dominates(inner):
            return False, f"region {inner_name} leaves region {outer_name}"

    failures = []
    for name, scenario, region in zip(names, scenarios, regions):
        for point in region:
            failures += _bc_structure_failures(point, f"region {name}")
            if not _bc_inner_structure(scenario, point.policy[1].powers):
                failures.append(f"region {name}: inner increase away from floors and budgets")

    return _summary(failures, sum(len(region) for region in regions))


def _bc_structure_failures(point: RegionPoint, label: str = "") -> List[str]:
    """Monotone sum rate, weak rate and total-rate power."""
    failures = []
    p_t = point.policy[0].powers
    r1, r2 = (rates.rates for rates in point.rates)

    if np.any(np.diff(r1 + r2) < -1e-6):
        failures.append(f"{label}: sum rate decreases")
    if np.any(np.diff(r2) < -1e-6):
        failures.append(f"{label}: weak rate decreases")
    if np.any(np.diff(p_t) < -1e-6):
        failures.append(f"{label}: total-rate power decreases")

    return failures


def _bc_inner_structure(scenario: Scenario, p2: np.ndarray) -> bool:
    """Every increase of ``p_t`` starts at a floor or ends an exhausted budget."""
    p_t = _bc_inner(scenario, p2)
    sigma2 = scenario.bc_noise_sigma2
    limit = np.minimum(scenario.cumulative("rx1"), np.cumsum(scenario.energy("tx") - (sigma2 - 1.0) * p2))
    envelope = np.cumsum(_budget_from_cumulative(limit))
    spent = np.cumsum(p_t)

    for k in np.flatnonzero(np.diff(p_t) > 1e-6):
        at_floor = abs(p_t[k + 1] - p2[k + 1]) <= 1e-6
        exhausted = spent[k] >= envelope[k] - 1e-6
        if not (at_floor or exhausted):
            return False

    return bool(np.all(np.diff(p_t) >= -1e-6))


def _random_weak_power(rng: np.random.Generator, scenario: Scenario) -> np.ndarray:
    """Non-decreasing weak power inside half of the feasibility envelope."""
    shape = np.sort(rng.uniform(0.0, 1.0, scenario.slots))
    envelope = _weak_budget(scenario)
    spent = np.cumsum(shape)
    scale = 0.5 * np.min(envelope / np.maximum(spent, 1e-12))
    return shape * scale


def _bc_random_structure(rng: np.random.Generator, count: int = 100) -> Tuple[bool, str]:
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "bc", int(rng.integers(1, 5)))
        weights = WeightPair.from_ratio(float(rng.uniform(1.05, 10.0)))
        point = solve_bc(scenario, weights)

        failures += [f"instance {trial}{m}" for m in _bc_structure_failures(point)]
        if not _bc_inner_structure(scenario, point.policy[1].powers):
            failures.append(f"instance {trial}: inner increase away from floors and budgets")
        if not audit(point, scenario).feasible:
            failures.append(f"instance {trial}: infeasible solution")

    return _summary(failures, count)


def _bc_inner_concave(rng: np.random.Generator, count: int = 50) -> Tuple[bool, str]:
    """The inner optimum decreases in the weak power and is concave in it."""
    failures = []
    eps = 1e-3
    for trial in range(count):
        scenario = random_scenario(rng, "bc", int(rng.integers(1, 5)))
        g = scenario.link.g

        def H(p2):
            return float(np.sum(g(_bc_inner(scenario, p2))))

        a, b = _random_weak_power(rng, scenario), _random_weak_power(rng, scenario)
        if H(0.5 * (a + b)) < 0.5 * (H(a) + H(b)) - 1e-6:
            failures.append(f"instance {trial}: not concave")
            continue

        # Raising a suffix keeps the power non-decreasing
        start = int(rng.integers(0, scenario.slots))
        raised = a.copy()
        raised[start:] += eps
        if np.all(np.cumsum(raised) <= _weak_budget(scenario)) and H(raised) > H(a) + 1e-9:
            failures.append(f"instance {trial}: increases with the weak power")

    return _summary(failures, count)


# Oracle comparisons ---------------------------------------------------------


def _single_user_oracle(rng: np.random.Generator, count: int = 20) -> Tuple[bool, str]:
    step = 1e-3
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "single_user", int(rng.integers(1, 4)), 0.1, 1.5)
        tx, rx = scenario.profiles["tx"], scenario.profiles["rx"]

        solver = solve_single_user(tx, rx, scenario.link).throughput
        _, best = oracle_single_user(tx, rx, scenario.link, GridSpec(step))

        # Rounding the optimum down to the grid keeps it feasible
        if not best - 1e-9 <= solver <= best + scenario.slots * step + 1e-9:
            failures.append(f"instance {trial}: solver {solver:.6f}, oracle {best:.6f}")

    return _summary(failures, count)


def _virtual_relay_oracle(rng: np.random.Generator, count: int = 10) -> Tuple[bool, str]:
    grid = GridSpec(1e-2)
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "single_user", 2, 0.1, 1.5)
        tx, rx = scenario.profiles["tx"], scenario.profiles["rx"]

        _, _, relayed = oracle_virtual_relay(tx, rx, scenario.link, grid)
        _, direct = oracle_single_user(tx, rx, scenario.link, grid)
        if abs(relayed - direct) > 1e-9:
            failures.append(f"instance {trial}: virtual relay {relayed:.6f}, direct {direct:.6f}")

    return _summary(failures, count)


def _two_hop_oracle(rng: np.random.Generator, count: int = 20) -> Tuple[bool, str]:
    step = 1e-2
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "two_hop", int(rng.integers(1, 3)), 0.1, 1.5)
        dims = 2 * scenario.slots - 1

        solution = solve_two_hop(scenario)
        _, best = oracle_weighted(scenario, grid=GridSpec(step))
        common = oracle_common_rate(scenario, GridSpec(step))

        if solution.throughput < best - 3 * step * dims:
            failures.append(f"instance {trial}: solver {solution.throughput:.6f}, oracle {best:.6f}")
        elif solution.throughput < common - 1e-6:
            failures.append(f"instance {trial}: below the no-buffer relay")
        elif not audit(solution, scenario).feasible:
            failures.append(f"instance {trial}: infeasible solution")

    return _summary(failures, count)


def _mac_oracle(rng: np.random.Generator, count: int = 20) -> Tuple[bool, str]:
    step = 5e-3
    grid = weight_grid(5)
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "mac", int(rng.integers(1, 3)), 0.05, 0.5)
        weights = grid[int(rng.integers(0, len(grid)))]
        dims = 2 * scenario.slots - 1

        point = solve_mac_simultaneous(scenario, weights)
        _, best = oracle_weighted(scenario, weights, GridSpec(step), DecodingMode.SIMULTANEOUS)

        if point.weighted_value < best - 3 * step * dims:
            failures.append(f"instance {trial}: solver {point.weighted_value:.6f}, oracle {best:.6f}")
        elif not audit(point, scenario).feasible:
            failures.append(f"instance {trial}: infeasible solution")

    return _summary(failures, count)


def _bc_oracle(rng: np.random.Generator, count: int = 20) -> Tuple[bool, str]:
    step = 5e-3
    grid = weight_grid(5)
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "bc", int(rng.integers(1, 3)), 0.1, 1.5)
        weights = grid[int(rng.integers(0, len(grid)))]
        dims = 2 * scenario.slots - 1

        point = solve_bc(scenario, weights)
        _, best = oracle_weighted(scenario, weights, GridSpec(step))

        if point.weighted_value < best - 3 * step * dims:
            failures.append(f"instance {trial}: solver {point.weighted_value:.6f}, oracle {best:.6f}")

    return _summary(failures, count)


def _bc_single_slot(rng: np.random.Generator, count: int = 20) -> Tuple[bool, str]:
    failures = []
    for trial in range(count):
        scenario = random_scenario(rng, "bc", 1, 0.1, 4.0)
        weights = WeightPair.from_ratio(float(rng.uniform(0.0, 5.0)))

        point = solve_bc(scenario, weights)
        _, _, best = oracle_bc_single_slot(scenario, weights)
        if abs(point.weighted_value - best) > 1e-6:
            failures.append(f"instance {trial}: solver {point.weighted_value:.8f}, oracle {best:.8f}")

    return _summary(failures, count)


def _gp_oracle(rng: np.random.Generator, count: int = 100) -> Tuple[bool, str]:
    failures = []
    for trial in range(count):
        prog = random_program(rng, int(rng.integers(1, 3)))

        solution = solve_gp(prog)
        _, best = oracle_gp(prog, 5e-3)

        # Compared in the log domain, where the grid spacing applies
        gap = np.log(best) - np.log(solution.objective_value)
        if not -1e-6 <= gap <= 1e-2:
            failures.append(f"program {trial}: solver {solution.objective_value:.6g}, oracle {best:.6g}")

    return _summary(failures, count)


SUITES: Dict[str, Dict[str, Check]] = dict(
    lemmas=dict(
        single_user_structure=_single_user_structure,
        two_hop_separable=_two_hop_separable,
        two_hop_concave=_two_hop_concave,
        mac_fixture_region=_mac_fixture_region,
        bc_fixture_regions=_bc_fixture_regions,
        bc_random_structure=_bc_random_structure,
        bc_inner_concave=_bc_inner_concave,
    ),
    oracle=dict(
        single_user_oracle=_single_user_oracle,
        virtual_relay_oracle=_virtual_relay_oracle,
        two_hop_oracle=_two_hop_oracle,
        mac_oracle=_mac_oracle,
        bc_oracle=_bc_oracle,
        bc_single_slot=_bc_single_slot,
        gp_oracle=_gp_oracle,
    ),
)


def run_suite(
    name: str = "all",
    seed: int = 7,
    checks: Optional[Sequence[str]] = None,
    quiet: bool = True,
) -> pd.DataFrame:
    """Runs a verification suite.

    Every check draws its instances from its own generator seeded with
    ``seed``, so results do not depend on which checks run.

    Parameters
    ----------
    name : str, default = "all"
        ``lemmas``, ``oracle`` or ``all``.
    seed : int, default = 7
        Seed of the random instances.
    checks : Sequence[str], optional
        Subset of check names to run.
    quiet : bool, default = True
        Whether to hide the progress bar.

    Returns
    -------
    pandas.DataFrame
        One row per check with the columns ``suite``, ``check``, ``passed``
        and ``detail``.
    """
    if name == "all":
        selected = [(suite, check) for suite in SUITES for check in SUITES[suite]]
    elif name in SUITES:
        selected = [(name, check) for check in SUITES[name]]
    else:
        raise ValueError(f"Unknown suite {name!r}; expected one of {['all', *SUITES]}.")

    if checks is not None:
        unknown = set(checks) - {check for _, check in selected}
        if unknown:
            raise ValueError(f"Unknown check(s) for suite {name!r}: {sorted(unknown)}")
        selected = [(suite, check) for suite, check in selected if check in checks]

    rows = []
    for suite, check in tqdm(selected, disable=quiet):
        logger.debug(f"Running {suite}.{check}")
        passed, detail = SUITES[suite][check](np.random.default_rng(seed))
        rows.append(dict(suite=suite, check=check, passed=bool(passed), detail=detail))

    return pd.DataFrame(rows, columns=["suite", "check", "passed", "detail"])
