import logging
from dataclasses import dataclass, field
from typing import Any, List, Union

import numpy as np

from .axioms import FEASIBILITY_TOL, solver_defaults
from .model import (
    EnergyProfile,
    InfeasibleError,
    PowerPolicy,
    RatePolicy,
    Scenario,
    Topology,
    validate_scenario,
)
from .single_user import Binding, StaircaseSolution, _energy_streams, _solve_staircase, solve_single_user
from .utils import _Stream
from .waterfill import OuterProblem, outer_waterflow

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RelayDecodingStrategy:
    """Relay energy reserved for decoding in every slot."""

    delta: Union[PowerPolicy, Any]

    def __post_init__(self):
        if not isinstance(self.delta, PowerPolicy):
            object.__setattr__(self, "delta", PowerPolicy(self.delta))

    def __len__(self) -> int:
        return len(self.delta)

    def violation(self, relay: EnergyProfile, tol: float = FEASIBILITY_TOL):
        """First prefix (0-based slot) where the reservation outruns the relay, or ``None``."""
        excess = np.cumsum(self.delta.powers) - relay.cumulative
        bad = np.flatnonzero(excess > tol)
        return int(bad[0]) if bad.size else None


@dataclass(frozen=True, eq=False)
class TwoHopSolution:
    """Source and relay rates of a decode-and-forward two-hop policy.

    Parameters
    ----------
    source_rates : RatePolicy
        Source-to-relay rates.
    relay_rates : RatePolicy
        Relay-to-destination rates.
    delta : RelayDecodingStrategy
        Relay decoding reservation the rates were computed for.
    throughput : float
        Data delivered to the destination.
    converged : bool, default = True
        Whether the search over ``delta`` converged.
    relay_change_points : list of int
        Segment boundaries of the relay staircase.
    relay_binding : list of Binding
        Family ending every relay segment.
    """

    source_rates: RatePolicy
    relay_rates: RatePolicy
    delta: RelayDecodingStrategy
    throughput: float
    converged: bool = True
    relay_change_points: List[int] = field(default_factory=list)
    relay_binding: List[Binding] = field(default_factory=list)


def _relay_staircase(scenario: Scenario, delta: np.ndarray, source: StaircaseSolution) -> StaircaseSolution:
    """Relay rates under transmit energy, destination decoding energy and data availability."""
    link = scenario.link
    transmit = scenario.cumulative("relay") - np.cumsum(delta)

    streams = _energy_streams(transmit, scenario.cumulative("rx"), link)
    # Data is measured in rate units directly
    streams.append(_Stream("data", np.cumsum(source.rates.rates), lambda x: x, lambda r: r))

    return _solve_staircase(streams, scenario.slots)


def _inner(scenario: Scenario, delta: np.ndarray) -> TwoHopSolution:
    source = solve_single_user(scenario.profiles["tx"], EnergyProfile(delta), scenario.link)
    relay = _relay_staircase(scenario, delta, source)

    return TwoHopSolution(
        source.rates,
        relay.rates,
        RelayDecodingStrategy(delta),
        relay.throughput,
        relay_change_points=relay.change_points,
        relay_binding=relay.binding,
    )


def solve_inner(scenario: Scenario, delta: Union[RelayDecodingStrategy, Any]) -> TwoHopSolution:
    """Solves the two-hop problem for a fixed relay decoding reservation.

    The source link is a single-user problem against the reservation
    ``delta``. The relay then follows a staircase whose segment rate is the
    minimum of three levels: ``g`` of its residual transmit energy
    ``E_relay - delta``, ``psi`` of the destination's residual energy, and
    the average data received from the source and not yet forwarded.

    Parameters
    ----------
    scenario : Scenario
        Two-hop instance.
    delta : RelayDecodingStrategy | array-like
        Relay energy reserved for decoding per slot.

    Returns
    -------
    TwoHopSolution
        Source and relay rates.

    Raises
    ------
    InfeasibleError
        If ``delta`` outruns the relay's harvested energy on some prefix.
    """
    validate_scenario(scenario, Topology.TWO_HOP)

    if not isinstance(delta, RelayDecodingStrategy):
        delta = RelayDecodingStrategy(delta)

    if len(delta) != scenario.slots:
        raise ValueError(f"delta has {len(delta)} slots, expected {scenario.slots}.")

    k = delta.violation(scenario.profiles["relay"])
    if k is not None:
        raise InfeasibleError(
            f"Relay decoding reservation exceeds the relay's energy over the first {k + 1} slot(s)."
        )

    return _inner(scenario, delta.delta.powers)


def solve_two_hop(
    scenario: Scenario,
    tol: float = solver_defaults["two_hop_tol"],
    max_iters: int = solver_defaults["outer_max_iters"],
) -> TwoHopSolution:
    """Maximizes the two-hop throughput over the relay's decoding reservation.

    The throughput ``R(delta)`` of the inner problem is concave, so the
    reservation is found by the outer water-flow search over the relay's
    cumulative budget. Leaving relay energy unreserved is allowed.

    Parameters
    ----------
    scenario : Scenario
        Two-hop instance.
    tol : float, default = 1e-6
        Relative tolerance of the outer search.
    max_iters : int, default = 10000
        Maximum number of outer sweeps.

    Returns
    -------
    TwoHopSolution
        Inner solution at the best reservation found.
    """
    validate_scenario(scenario, Topology.TWO_HOP)

    def throughput(delta: np.ndarray) -> float:
        return _inner(scenario, delta).throughput

    problem = OuterProblem(throughput, scenario.profiles["relay"], allow_discard=True)
    outer = outer_waterflow(problem, tol=tol, max_iters=max_iters)

    logger.debug(f"Two-hop: throughput {outer.value:.6g} after {outer.iterations} sweeps")

    solution = _inner(scenario, outer.allocation.powers)

    return TwoHopSolution(
        solution.source_rates,
        solution.relay_rates,
        solution.delta,
        solution.throughput,
        outer.converged,
        solution.relay_change_points,
        solution.relay_binding,
    )
