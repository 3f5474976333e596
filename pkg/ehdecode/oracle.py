import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterator, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from .axioms import FEASIBILITY_TOL, oracle_limits
from .bc import BcPowerSplit
from .gp import GeometricProgram, _LogSumExp
from .mac import DecodingMode, RegionPoint, WeightPair, _as_weights
from .model import (
    EnergyProfile,
    InfeasibleError,
    LinkModel,
    OracleSizeError,
    PowerPolicy,
    RatePolicy,
    Scenario,
    Topology,
    decoding_energy,
    validate_scenario,
)
from .single_user import StaircaseSolution
from .two_hop import TwoHopSolution

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    """Lattice of candidate rates (or powers) per slot.

    Parameters
    ----------
    step : float
        Grid spacing, positive.
    bound : float, optional
        Largest candidate value. When omitted every oracle derives it from
        the largest amount a single slot could carry.
    """

    step: float
    bound: Optional[float] = None

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"Grid step must be positive, got {self.step}.")
        if self.bound is not None and self.bound < self.step:
            raise ValueError(f"Grid bound {self.bound} is below the step {self.step}.")

    def values(self, fallback: float) -> np.ndarray:
        """Grid points ``0, step, ..., bound``."""
        bound = self.bound
        if bound is None:
            bound = max(math.ceil(fallback / self.step - 1e-9), 1) * self.step
        count = int(math.floor(bound / self.step + 1e-9)) + 1
        return np.arange(count) * self.step

    def floor(self, values: np.ndarray) -> np.ndarray:
        """Largest grid points not above ``values``."""
        return np.floor(np.clip(values, 0.0, None) / self.step + 1e-9) * self.step


def _check_size(n: int, dims: int, count: int, max_slots: int = oracle_limits["max_slots"]):
    if n > max_slots:
        raise OracleSizeError(f"The oracle handles at most {max_slots} slots, got {n}.")
    points = float(count) ** dims
    if points > oracle_limits["max_points"]:
        raise OracleSizeError(
            f"The grid has {points:.3g} points over {dims} dimension(s), "
            f"above the limit of {oracle_limits['max_points']:.3g}."
        )


def _grid_chunks(values: np.ndarray, dims: int) -> Iterator[np.ndarray]:
    """Every point of ``values ** dims`` in row-major order, a chunk at a time."""
    if dims == 0:
        yield np.zeros((1, 0))
        return

    shape = (values.size,) * dims
    total = values.size**dims
    chunk = oracle_limits["chunk_points"]

    for start in range(0, total, chunk):
        index = np.arange(start, min(start + chunk, total))
        yield values[np.stack(np.unravel_index(index, shape), axis=1)]


def _within(spent: np.ndarray, budget: np.ndarray, tol: float = FEASIBILITY_TOL) -> np.ndarray:
    """Rows whose running spending never exceeds the running budget."""
    return np.all(np.cumsum(spent, axis=1) <= budget + tol, axis=1)


def _search(
    values: np.ndarray,
    dims: int,
    evaluate: Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]],
) -> Tuple[np.ndarray, Any, float]:
    """Exhaustive maximization; ``evaluate`` returns per-row values (``-inf`` when
    infeasible) and the closed-form last coordinate(s) of every row."""
    best_point, best_last, best_value = None, None, -np.inf

    for points in _grid_chunks(values, dims):
        value, last = evaluate(points)
        k = int(np.argmax(value))
        # Strict improvement keeps the first maximizer in enumeration order
        if value[k] > best_value:
            best_point, best_last, best_value = points[k], np.asarray(last)[k], float(value[k])

    return best_point, best_last, best_value


def oracle_single_user(
    tx: Union[EnergyProfile, Sequence[float]],
    rx: Union[EnergyProfile, Sequence[float]],
    link: LinkModel = LinkModel(),
    grid: GridSpec = GridSpec(1e-3),
    rx_has_battery: bool = True,
) -> Tuple[RatePolicy, float]:
    """Grid optimum of the single-user throughput.

    Rates of the first ``N - 1`` slots run over the grid; the last rate is
    the largest grid point the leftover energies of both nodes allow.

    Parameters
    ----------
    tx, rx : EnergyProfile | Sequence[float]
        Transmitter and receiver energy profiles.
    link : LinkModel
        Rate and decoding functions.
    grid : GridSpec, default = GridSpec(1e-3)
        Rate grid.
    rx_has_battery : bool, default = True
        Whether the receiver may store energy across slots.

    Returns
    -------
    tuple
        Best rates and their throughput.

    Raises
    ------
    OracleSizeError
        If the instance is above the oracle's size guard.
    """
    C = np.cumsum(tx.amounts if isinstance(tx, EnergyProfile) else np.asarray(tx, float))
    harvested = rx.amounts if isinstance(rx, EnergyProfile) else np.asarray(rx, float)
    D = np.cumsum(harvested)
    n = C.size

    if D.size != n:
        raise ValueError(f"tx has {n} slots but rx has {D.size}.")

    receiver_bound = D[-1] if rx_has_battery else harvested.max()
    values = grid.values(min(link.g(C[-1]), link.psi(receiver_bound)))
    _check_size(n, n - 1, values.size)

    def evaluate(points):
        spent = link.f(points)
        decoded = decoding_energy(points, link)

        feasible = _within(spent, C[:-1])
        if rx_has_battery:
            feasible &= _within(decoded, D[:-1])
            left_rx = D[-1] - decoded.sum(axis=1)
        else:
            feasible &= np.all(decoded <= harvested[:-1] + FEASIBILITY_TOL, axis=1)
            left_rx = np.full(points.shape[0], harvested[-1])

        left_tx = C[-1] - spent.sum(axis=1)
        feasible &= (left_tx >= -FEASIBILITY_TOL) & (left_rx >= -FEASIBILITY_TOL)

        last = grid.floor(
            np.minimum(link.g(np.clip(left_tx, 0.0, None)), link.psi(np.clip(left_rx, 0.0, None)))
        )
        return np.where(feasible, points.sum(axis=1) + last, -np.inf), last

    point, last, value = _search(values, n - 1, evaluate)

    return RatePolicy(np.append(point, last)), value


def oracle_virtual_relay(
    tx: Union[EnergyProfile, Sequence[float]],
    rx: Union[EnergyProfile, Sequence[float]],
    link: LinkModel = LinkModel(),
    grid: GridSpec = GridSpec(1e-2),
) -> Tuple[RatePolicy, RatePolicy, float]:
    """Grid optimum of the single-user problem seen through a virtual relay.

    The transmitter sends ``r`` under its own energy, the receiver decodes
    ``r_bar <= r`` slot by slot under its decoding energy, and the
    throughput is ``sum(r_bar)``.

    Returns
    -------
    tuple
        Transmitted rates, decoded rates and the throughput.
    """
    C = np.cumsum(tx.amounts if isinstance(tx, EnergyProfile) else np.asarray(tx, float))
    D = np.cumsum(rx.amounts if isinstance(rx, EnergyProfile) else np.asarray(rx, float))
    n = C.size

    values = grid.values(link.g(C[-1]))
    _check_size(n, 2 * (n - 1), values.size)

    def evaluate(points):
        sent, decoded = points[:, : n - 1], points[:, n - 1 :]
        spent = link.f(sent)
        used = decoding_energy(decoded, link)

        feasible = np.all(decoded <= sent, axis=1) & _within(spent, C[:-1]) & _within(used, D[:-1])
        left_tx = C[-1] - spent.sum(axis=1)
        left_rx = D[-1] - used.sum(axis=1)
        feasible &= (left_tx >= -FEASIBILITY_TOL) & (left_rx >= -FEASIBILITY_TOL)

        last_sent = grid.floor(link.g(np.clip(left_tx, 0.0, None)))
        last_decoded = np.minimum(last_sent, grid.floor(link.psi(np.clip(left_rx, 0.0, None))))

        value = np.where(feasible, decoded.sum(axis=1) + last_decoded, -np.inf)
        return value, np.stack([last_sent, last_decoded], axis=1)

    point, last, value = _search(values, 2 * (n - 1), evaluate)

    sent = np.append(point[: n - 1], last[0])
    decoded = np.append(point[n - 1 :], last[1])

    return RatePolicy(sent), RatePolicy(decoded), value


def _two_hop_oracle(scenario: Scenario, grid: GridSpec) -> Tuple[Tuple[RatePolicy, RatePolicy], float]:
    link = scenario.link
    C, R, D = (scenario.cumulative(role) for role in ("tx", "relay", "rx"))
    n = scenario.slots
    dims = 2 * n - 1

    bound = max(
        min(link.g(C[-1]), link.psi(R[-1])),
        min(link.g(R[-1]), link.psi(D[-1])),
    )
    values = grid.values(bound)
    _check_size(n, dims, values.size)

    def evaluate(points):
        source, relay = points[:, :n], points[:, n:]
        source_spent = link.f(source)
        relay_decoding = decoding_energy(source, link)
        relay_spent = link.f(relay)
        rx_decoding = decoding_energy(relay, link)

        feasible = _within(source_spent, C)
        feasible &= _within(relay_decoding[:, : n - 1] + relay_spent, R[:-1])
        feasible &= _within(rx_decoding, D[:-1])
        feasible &= _within(relay, np.cumsum(source, axis=1)[:, : n - 1])

        left_relay = R[-1] - relay_decoding.sum(axis=1) - relay_spent.sum(axis=1)
        left_rx = D[-1] - rx_decoding.sum(axis=1)
        left_data = source.sum(axis=1) - relay.sum(axis=1)
        feasible &= (left_relay >= -FEASIBILITY_TOL) & (left_rx >= -FEASIBILITY_TOL)
        feasible &= left_data >= -FEASIBILITY_TOL

        last = grid.floor(
            np.minimum.reduce(
                [
                    link.g(np.clip(left_relay, 0.0, None)),
                    link.psi(np.clip(left_rx, 0.0, None)),
                    left_data + FEASIBILITY_TOL,
                ]
            )
        )
        return np.where(feasible, relay.sum(axis=1) + last, -np.inf), last

    point, last, value = _search(values, dims, evaluate)

    return (RatePolicy(point[:n]), RatePolicy(np.append(point[n:], last))), value


def oracle_common_rate(scenario: Scenario, grid: GridSpec = GridSpec(1e-2)) -> float:
    """Grid optimum of a two-hop network whose relay forwards every slot's data
    in the same slot (no data buffer)."""
    validate_scenario(scenario, Topology.TWO_HOP)

    link = scenario.link
    C, R, D = (scenario.cumulative(role) for role in ("tx", "relay", "rx"))
    n = scenario.slots

    values = grid.values(min(link.g(C[-1]), link.psi(R[-1]), link.psi(D[-1])))
    _check_size(n, n, values.size)

    def evaluate(points):
        decoded = decoding_energy(points, link)
        feasible = _within(link.f(points), C)
        feasible &= _within(decoded + link.f(points), R)
        feasible &= _within(decoded, D)
        return np.where(feasible, points.sum(axis=1), -np.inf), np.zeros(points.shape[0])

    return _search(values, n, evaluate)[2]


def _mac_oracle(
    scenario: Scenario, weights: WeightPair, grid: GridSpec, mode: DecodingMode
) -> Tuple[Tuple[PowerPolicy, PowerPolicy], float]:
    """Power-space grid search; user 1 carries the larger weight and is decoded last."""
    link = scenario.link
    C1, C2, CE = (scenario.cumulative(role) for role in ("tx1", "tx2", "rx"))
    n = scenario.slots
    dims = 2 * n - 1
    mu1, mu2 = weights.mu1, weights.mu2

    bound = max(C1[-1], C2[-1])
    if mode is DecodingMode.SIMULTANEOUS:
        bound = min(bound, link.f(link.psi(CE[-1])))
    values = grid.values(bound)
    _check_size(n, dims, values.size)

    def evaluate(points):
        p1, p2 = points[:, :n], points[:, n:]
        feasible = _within(p1, C1) & _within(p2, C2[:-1])
        left_tx2 = C2[-1] - p2.sum(axis=1)

        if mode is DecodingMode.SIMULTANEOUS:
            used = decoding_energy(link.g(p1[:, : n - 1] + p2), link)
            left_rx = CE[-1] - used.sum(axis=1)
            headroom = link.f(link.psi(np.clip(left_rx, 0.0, None))) - p1[:, -1]
        else:
            r1 = link.g(p1)
            used = decoding_energy(r1[:, : n - 1], link) + decoding_energy(
                link.g(p2 / (1.0 + p1[:, : n - 1])), link
            )
            left_rx = CE[-1] - used.sum(axis=1) - decoding_energy(r1[:, -1], link)
            headroom = (1.0 + p1[:, -1]) * link.f(link.psi(np.clip(left_rx, 0.0, None)))

        feasible &= _within(used, CE[:-1])
        feasible &= (left_rx >= -FEASIBILITY_TOL) & (left_tx2 >= -FEASIBILITY_TOL)
        feasible &= headroom >= -FEASIBILITY_TOL

        last = grid.floor(np.minimum(left_tx2, headroom) + FEASIBILITY_TOL)
        p2_full = np.column_stack([p2, last])

        r1 = link.g(p1)
        if mode is DecodingMode.SIMULTANEOUS:
            r2 = link.g(p1 + p2_full) - r1
        else:
            r2 = link.g(p2_full / (1.0 + p1))

        value = mu1 * r1.sum(axis=1) + mu2 * r2.sum(axis=1)
        return np.where(feasible, value, -np.inf), last

    point, last, value = _search(values, dims, evaluate)

    return (PowerPolicy(point[:n]), PowerPolicy(np.append(point[n:], last))), value


def _bc_oracle(
    scenario: Scenario, weights: WeightPair, grid: GridSpec
) -> Tuple[Tuple[RatePolicy, RatePolicy], float]:
    """Rate-space grid search over the weak rates and all but the last strong rate."""
    link = scenario.link
    sigma2 = scenario.bc_noise_sigma2
    CE, D1, D2 = (scenario.cumulative(role) for role in ("tx", "rx1", "rx2"))
    n = scenario.slots
    dims = 2 * n - 1

    values = grid.values(min(link.g(CE[-1]), link.psi(D1[-1])))
    _check_size(n, dims, values.size)

    def evaluate(points):
        weak, strong = points[:, :n], points[:, n:]
        weak_head = weak[:, : n - 1]
        spent = (sigma2 - 1.0) * link.f(weak_head) + link.f(strong + weak_head)
        strong_decoding = decoding_energy(strong + weak_head, link)

        feasible = _within(decoding_energy(weak, link), D2)
        feasible &= _within(spent, CE[:-1]) & _within(strong_decoding, D1[:-1])

        left_tx = CE[-1] - spent.sum(axis=1) - (sigma2 - 1.0) * link.f(weak[:, -1])
        left_rx1 = D1[-1] - strong_decoding.sum(axis=1)
        feasible &= (left_tx >= -FEASIBILITY_TOL) & (left_rx1 >= -FEASIBILITY_TOL)

        total = np.minimum(link.g(np.clip(left_tx, 0.0, None)), link.psi(np.clip(left_rx1, 0.0, None)))
        feasible &= total - weak[:, -1] >= -FEASIBILITY_TOL
        last = grid.floor(total - weak[:, -1] + FEASIBILITY_TOL)

        value = weights.mu1 * (strong.sum(axis=1) + last) + weights.mu2 * weak.sum(axis=1)
        return np.where(feasible, value, -np.inf), last

    point, last, value = _search(values, dims, evaluate)

    return (RatePolicy(np.append(point[n:], last)), RatePolicy(point[:n])), value


def oracle_weighted(
    scenario: Scenario,
    weights: Union[WeightPair, Sequence[float]] = (1.0, 1.0),
    grid: GridSpec = GridSpec(1e-2),
    mode: Union[DecodingMode, str] = DecodingMode.SIMULTANEOUS,
) -> Tuple[tuple, float]:
    """Grid optimum of a topology's weighted objective under its exact constraints.

    Single-user and two-hop instances maximize their throughput (the weights
    are ignored), the MAC searches powers and the BC searches rates.

    Parameters
    ----------
    scenario : Scenario
        Instance with at most 3 slots.
    weights : WeightPair | Sequence[float], default = (1, 1)
        Weights ``(mu1, mu2)`` for the MAC and the BC.
    grid : GridSpec, default = GridSpec(1e-2)
        Candidate grid.
    mode : DecodingMode | str, default = "simultaneous"
        MAC decoding mode.

    Returns
    -------
    tuple
        Best policies (rates, or MAC powers, one entry per user or hop) and
        the best objective.

    Raises
    ------
    OracleSizeError
        If the instance is above the oracle's size guard.
    """
    validate_scenario(scenario, scenario.topology)
    weights = _as_weights(weights)

    if scenario.slots > 3:
        raise OracleSizeError(f"oracle_weighted handles at most 3 slots, got {scenario.slots}.")

    topology = scenario.topology

    if topology is Topology.SINGLE_USER:
        rates, value = oracle_single_user(
            scenario.profiles["tx"],
            scenario.profiles["rx"],
            scenario.link,
            grid,
            scenario.rx_has_battery,
        )
        return (rates,), value

    if topology is Topology.TWO_HOP:
        return _two_hop_oracle(scenario, grid)

    if topology is Topology.MAC:
        mode = DecodingMode(mode)
        if weights.mu1 < weights.mu2:
            (p2, p1), value = _mac_oracle(scenario.swap_users(), weights.swapped(), grid, mode)
            return (p1, p2), value
        return _mac_oracle(scenario, weights, grid, mode)

    return _bc_oracle(scenario, weights, grid)


def oracle_gp(prog: GeometricProgram, step: float = 1e-2, box: float = 3.0) -> Tuple[Dict[str, float], float]:
    """Grid minimum of a geometric program over the log-domain box ``[-box, box]``.

    Every variable ``x = exp(y)`` takes the values ``y = -box, -box + step,
    ..., box``; grid points violating a constraint by more than the
    feasibility tolerance are skipped.

    Parameters
    ----------
    prog : GeometricProgram
        Program to search.
    step : float, default = 1e-2
        Spacing of the log-domain grid.
    box : float, default = 3.0
        Half-width of the log-domain box.

    Returns
    -------
    tuple
        Best assignment and its objective value.

    Raises
    ------
    OracleSizeError
        If the grid has more than four variables or too many points.
    InfeasibleError
        If no grid point satisfies the constraints.
    """
    if not step > 0 or not box > 0:
        raise ValueError(f"Expected a positive step and box, got {step} and {box}.")

    index = {v: i for i, v in enumerate(prog.variables)}
    objective = _LogSumExp.compile(prog.objective, index)
    constraints = [_LogSumExp.compile(c, index) for c in prog.constraints]

    values = np.arange(-box, box + step / 2, step)
    dims = len(index)
    _check_size(dims, dims, values.size)

    def evaluate(points):
        value = -logsumexp(points @ objective.A.T + objective.b, axis=1)
        for constraint in constraints:
            violated = logsumexp(points @ constraint.A.T + constraint.b, axis=1) > FEASIBILITY_TOL
            value[violated] = -np.inf
        return value, np.zeros((points.shape[0], 0))

    point, _, value = _search(values, dims, evaluate)
    if not np.isfinite(value):
        raise InfeasibleError("No grid point satisfies the constraints.")

    return {v: float(np.exp(point[i])) for v, i in index.items()}, float(np.exp(-value))


def oracle_bc_single_slot(
    scenario: Scenario, weights: Union[WeightPair, Sequence[float]]
) -> Tuple[float, float, float]:
    """Exact one-slot BC optimum by a bounded scalar search over the weak rate.

    For a given weak rate the strong rate is the largest one the transmitter
    and the strong receiver afford, and the weighted objective is concave in
    the weak rate.

    Returns
    -------
    tuple
        Strong rate, weak rate and the weighted objective.
    """
    validate_scenario(scenario, Topology.BC)
    weights = _as_weights(weights)

    if scenario.slots != 1:
        raise OracleSizeError(f"Expected a single-slot BC scenario, got {scenario.slots} slots.")

    link = scenario.link
    sigma2 = scenario.bc_noise_sigma2
    E, E1, E2 = (float(scenario.energy(role)[0]) for role in ("tx", "rx1", "rx2"))

    def strong_rate(r2: float) -> float:
        total = min(link.g(max(E - (sigma2 - 1.0) * link.f(r2), 0.0)), link.psi(E1))
        return max(total - r2, 0.0)

    def objective(r2: float) -> float:
        return weights.mu1 * strong_rate(r2) + weights.mu2 * r2

    upper = min(link.psi(E2), link.g(E / sigma2), link.psi(E1))
    candidates = [0.0, upper]
    if upper > 0:
        result = minimize_scalar(
            lambda r2: -objective(r2), bounds=(0.0, upper), method="bounded", options={"xatol": 1e-12}
        )
        candidates.append(float(result.x))

    r2 = max(candidates, key=objective)

    return strong_rate(r2), r2, objective(r2)


def policy_record(result: Any, scenario: Scenario) -> dict:
    """Plain mapping of a solver result: per-role rates and powers plus the
    topology's summary values.

    Parameters
    ----------
    result : StaircaseSolution | RatePolicy | TwoHopSolution | RegionPoint
        Solver output for ``scenario``.
    scenario : Scenario
        Instance the result was computed for.

    Returns
    -------
    dict
        JSON-ready record.
    """
    link = scenario.link
    topology = scenario.topology

    def listed(values) -> list:
        return [float(v) for v in np.asarray(values, dtype=float)]

    record = dict(topology=topology.value, converged=True)

    if topology is Topology.SINGLE_USER:
        if isinstance(result, StaircaseSolution):
            rates = result.rates.rates
            record.update(
                change_points=[int(i) for i in result.change_points],
                binding=[b.value for b in result.binding],
            )
        else:
            rates = result.rates if isinstance(result, RatePolicy) else np.asarray(result, float)
            record.update(change_points=[], binding=[])
        record.update(
            rates=dict(tx=listed(rates)),
            powers=dict(tx=listed(link.f(rates)), rx=listed(decoding_energy(rates, link))),
            throughput=float(np.sum(rates)),
        )

    elif topology is Topology.TWO_HOP:
        source, relay = result.source_rates.rates, result.relay_rates.rates
        record.update(
            converged=bool(result.converged),
            rates=dict(tx=listed(source), relay=listed(relay)),
            powers=dict(
                tx=listed(link.f(source)),
                relay=listed(link.f(relay)),
                rx=listed(decoding_energy(relay, link)),
            ),
            throughput=float(result.throughput),
            delta=listed(result.delta.delta.powers),
        )

    elif topology is Topology.MAC:
        p1, p2 = (policy.powers for policy in result.policy)
        r1, r2 = (rates.rates for rates in result.rates)
        weights = result.weights.normalized()
        record.update(
            converged=bool(result.converged),
            rates=dict(tx1=listed(r1), tx2=listed(r2)),
            powers=dict(tx1=listed(p1), tx2=listed(p2)),
            mode=DecodingMode(result.mode).value,
            weights=[weights.mu1, weights.mu2],
            b1=float(result.b1),
            b2=float(result.b2),
        )

    else:
        split = BcPowerSplit(*result.policy)
        r1, r2 = (rates.rates for rates in result.rates)
        weights = result.weights.normalized()
        record.update(
            converged=bool(result.converged),
            rates=dict(rx1=listed(r1), rx2=listed(r2)),
            powers=dict(tx=listed(split.transmit_power(scenario.bc_noise_sigma2))),
            weights=[weights.mu1, weights.mu2],
            b1=float(result.b1),
            b2=float(result.b2),
        )

    return record


@dataclass(frozen=True, eq=False)
class AuditReport:
    """Per-prefix slacks of every constraint family.

    ``frame`` has one row per constraint and slot with the columns
    ``constraint``, ``slot`` (1-based prefix length) and ``slack``.
    """

    frame: pd.DataFrame
    tol: float = FEASIBILITY_TOL

    @property
    def feasible(self) -> bool:
        return bool((self.frame["slack"] >= -self.tol).all())

    @property
    def min_slack(self) -> float:
        return float(self.frame["slack"].min())

    def summary(self) -> pd.Series:
        """Minimum slack per constraint family."""
        return self.frame.groupby("constraint", sort=False)["slack"].min()

    def violations(self) -> pd.DataFrame:
        """Rows whose slack is below ``-tol``."""
        return self.frame[self.frame["slack"] < -self.tol].reset_index(drop=True)


def audit(policy: Union[Mapping, Any], scenario: Scenario, tol: float = FEASIBILITY_TOL) -> AuditReport:
    """Replays the raw constraint families of ``scenario`` on a policy.

    Parameters
    ----------
    policy : Mapping | solver result
        A solver result or its :func:`policy_record` (e.g. a policy JSON
        written by the command line).
    scenario : Scenario
        Instance to audit against.
    tol : float, default = 1e-9
        Slack below ``-tol`` counts as a violation.

    Returns
    -------
    AuditReport
        Slacks per constraint and prefix.

    Examples
    --------
    >>> from ehdecode.model import LinkModel, Scenario
    >>> from ehdecode.single_user import solve_single_user
    >>> scenario = Scenario("single_user", dict(tx=[1, 1], rx=[1, 1]), LinkModel())
    >>> audit(solve_single_user([1, 1], [1, 1]), scenario).feasible
    True
    """
    record = policy if isinstance(policy, Mapping) else policy_record(policy, scenario)
    link = scenario.link
    rates = {role: np.asarray(values, dtype=float) for role, values in record["rates"].items()}
    powers = {role: np.asarray(values, dtype=float) for role, values in record.get("powers", {}).items()}

    def running(budget_role: str, spent: np.ndarray) -> np.ndarray:
        return scenario.cumulative(budget_role) - np.cumsum(spent)

    topology = scenario.topology
    families = {}

    if topology is Topology.SINGLE_USER:
        r = rates["tx"]
        families["tx_energy"] = running("tx", link.f(r))
        if scenario.rx_has_battery:
            families["rx_decoding"] = running("rx", decoding_energy(r, link))
        else:
            families["rx_decoding"] = scenario.energy("rx") - decoding_energy(r, link)

    elif topology is Topology.TWO_HOP:
        source, relay = rates["tx"], rates["relay"]
        families["tx_energy"] = running("tx", link.f(source))
        families["relay_energy"] = running(
            "relay", decoding_energy(source, link) + link.f(relay)
        )
        families["rx_decoding"] = running("rx", decoding_energy(relay, link))
        families["data"] = np.cumsum(source) - np.cumsum(relay)

    elif topology is Topology.MAC:
        r1, r2 = rates["tx1"], rates["tx2"]
        p1, p2 = powers["tx1"], powers["tx2"]
        families["tx1_energy"] = running("tx1", p1)
        families["tx2_energy"] = running("tx2", p2)

        if DecodingMode(record.get("mode", DecodingMode.SIMULTANEOUS)) is DecodingMode.SIMULTANEOUS:
            used = decoding_energy(r1 + r2, link)
        else:
            used = decoding_energy(r1, link) + decoding_energy(r2, link)
        families["rx_decoding"] = running("rx", used)
        families["capacity"] = np.minimum.reduce(
            [link.g(p1) - r1, link.g(p2) - r2, link.g(p1 + p2) - r1 - r2]
        )

    else:
        r1, r2 = rates["rx1"], rates["rx2"]
        sigma2 = scenario.bc_noise_sigma2
        families["tx_energy"] = running("tx", (sigma2 - 1.0) * link.f(r2) + link.f(r1 + r2))
        families["rx1_decoding"] = running("rx1", decoding_energy(r1 + r2, link))
        families["rx2_decoding"] = running("rx2", decoding_energy(r2, link))

    frame = pd.DataFrame(
        [
            dict(constraint=name, slot=i + 1, slack=float(slack))
            for name, slacks in families.items()
            for i, slack in enumerate(slacks)
        ],
        columns=["constraint", "slot", "slack"],
    )
    report = AuditReport(frame, tol)

    if not report.feasible:
        logger.debug(f"Audit found {len(report.violations())} violated constraint(s)")

    return report
