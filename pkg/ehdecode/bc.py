import logging
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from .axioms import solver_defaults
from .mac import DepartureRegion, RegionPoint, WeightPair, _as_weights, _require_inverse_decoding, weight_grid
from .model import (
    DomainError,
    EnergyProfile,
    LinkModel,
    PowerPolicy,
    RatePolicy,
    Scenario,
    Topology,
    validate_scenario,
)
from .utils import _budget_from_cumulative
from .waterfill import OuterProblem, _directional_fill_cumulative, make_bins, min_power_backward_fill, outer_waterflow

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BcPowerSplit:
    """Superposition powers in rate coordinates.

    ``p_t = f(r1 + r2)`` is the power the strong receiver needs for both
    messages and ``p_2 = f(r2)`` the weak receiver's share.
    """

    p_t: PowerPolicy
    p_2: PowerPolicy

    def __post_init__(self):
        for name in ("p_t", "p_2"):
            value = getattr(self, name)
            if not isinstance(value, PowerPolicy):
                object.__setattr__(self, name, PowerPolicy(value))
        if len(self.p_t) != len(self.p_2):
            raise ValueError("p_t and p_2 must have the same number of slots.")
        if np.any(self.p_t.powers < self.p_2.powers - 1e-12):
            raise ValueError("The total-rate power cannot fall below the weak-user power.")

    def rates(self, link: LinkModel):
        """Strong-user and weak-user rates ``(r1, r2)``."""
        r2 = np.asarray(link.g(self.p_2.powers), dtype=float)
        r1 = np.clip(np.asarray(link.g(self.p_t.powers), dtype=float) - r2, 0.0, None)
        return RatePolicy(r1), RatePolicy(r2)

    def transmit_power(self, sigma2: float) -> np.ndarray:
        """Transmitter power per slot, ``(sigma2 - 1) * p_2 + p_t``."""
        return (sigma2 - 1.0) * self.p_2.powers + self.p_t.powers


def _check_sigma2(sigma2: Optional[float]) -> float:
    if sigma2 is None or not sigma2 > 1:
        raise DomainError(f"The weak receiver's noise variance must exceed 1, got {sigma2}.")
    return float(sigma2)


def bc_min_power(r1: Any, r2: Any, sigma2: float, link: Optional[LinkModel] = None) -> Any:
    """Minimum transmit power for rates ``(r1, r2)`` by superposition coding.

    ``F(r1, r2) = (sigma2 - 1) * f(r2) + f(r1 + r2)``, which for base-2 rates
    is ``(sigma2 - 1) * 2**(2*r2) + 2**(2*(r1 + r2)) - sigma2``.

    Parameters
    ----------
    r1, r2 : float | array-like
        Strong-user and weak-user rates, non-negative.
    sigma2 : float
        Noise variance of the weak receiver, above 1.
    link : LinkModel, optional
        Rate convention; base 2 by default.

    Returns
    -------
    float | numpy.ndarray
        Minimum transmit power.

    Raises
    ------
    DomainError
        If a rate is negative or ``sigma2 <= 1``.
    """
    sigma2 = _check_sigma2(sigma2)
    link = LinkModel.inverse("base2") if link is None else link

    if np.any(np.asarray(r1) < 0) or np.any(np.asarray(r2) < 0):
        raise DomainError("Rates must be non-negative.")

    r1 = np.asarray(r1, dtype=float) if np.ndim(r1) else float(r1)
    r2 = np.asarray(r2, dtype=float) if np.ndim(r2) else float(r2)

    return (sigma2 - 1.0) * link.f(r2) + link.f(r1 + r2)


def inner_total_power(scenario: Scenario, p2: Union[PowerPolicy, Any]) -> PowerPolicy:
    """Best total-rate power ``p_t`` for a fixed non-decreasing weak-user power.

    Maximizes ``sum(g(p_t))`` subject to ``p_t >= p2`` and the budget
    ``min(cum(E_rx1), cum(E_tx - (sigma2 - 1) * p2))``.
    """
    p2 = p2.powers if isinstance(p2, PowerPolicy) else np.asarray(p2, dtype=float)
    return PowerPolicy(_inner(scenario, p2))


def _inner(scenario: Scenario, p2: np.ndarray) -> np.ndarray:
    sigma2 = scenario.bc_noise_sigma2
    limit = np.minimum(
        scenario.cumulative("rx1"), np.cumsum(scenario.energy("tx") - (sigma2 - 1.0) * p2)
    )
    budget = EnergyProfile(_budget_from_cumulative(limit))

    bins = make_bins(np.ones(scenario.slots), min_powers=p2)

    return min_power_backward_fill(bins, budget).powers


def _weak_budget(scenario: Scenario) -> np.ndarray:
    """Cumulative envelope keeping the inner problem feasible for any weak power inside it."""
    return np.minimum.reduce(
        [
            scenario.cumulative("rx2"),
            scenario.cumulative("rx1"),
            scenario.cumulative("tx") / scenario.bc_noise_sigma2,
        ]
    )


def solve_bc(
    scenario: Scenario,
    weights: Union[WeightPair, Sequence[float]],
    tol: float = solver_defaults["outer_tol"],
    max_iters: int = solver_defaults["outer_max_iters"],
) -> RegionPoint:
    """Maximizes ``mu1*B1 + mu2*B2`` over a degraded broadcast channel.

    For ``mu1 >= mu2`` all power goes to the strong user, a single-user
    problem over ``min(cum(E_tx), cum(E_rx1))``. Otherwise the weak-user power
    ``p2`` is chosen, non-decreasing, by the outer water-flow search over
    ``mu * H(p2) + sum(g(p2))`` with ``mu = mu1 / (mu2 - mu1)``, where ``H``
    is the inner optimum of :func:`inner_total_power`.

    Parameters
    ----------
    scenario : Scenario
        BC instance with ``phi = g^-1`` and ``bc_noise_sigma2 > 1``.
    weights : WeightPair | Sequence[float]
        Weights ``(mu1, mu2)`` of the strong and the weak user.
    tol : float, default = 1e-8
        Relative tolerance of the outer search.
    max_iters : int, default = 10000
        Maximum number of outer sweeps.

    Returns
    -------
    RegionPoint
        Departed data with ``policy = (p_t, p_2)`` and per-slot rates.

    Raises
    ------
    DomainError
        If ``bc_noise_sigma2 <= 1``.
    UnsupportedConfigurationError
        If the decoding function is not ``g^-1``.
    """
    validate_scenario(scenario, Topology.BC)
    _require_inverse_decoding(scenario.link)
    weights = _as_weights(weights)

    link = scenario.link
    n = scenario.slots
    converged = True

    if weights.mu1 >= weights.mu2:
        # The degraded user gets nothing
        limit = np.minimum(scenario.cumulative("tx"), scenario.cumulative("rx1"))
        p_t = _directional_fill_cumulative(np.ones(n), limit)
        p2 = np.zeros(n)
    else:
        mu = weights.mu1 / (weights.mu2 - weights.mu1)

        def evaluate(p2: np.ndarray) -> float:
            return mu * float(np.sum(link.g(_inner(scenario, p2)))) + float(np.sum(link.g(p2)))

        budget = EnergyProfile(_budget_from_cumulative(_weak_budget(scenario)))
        problem = OuterProblem(evaluate, budget, monotone_allocation_required=True)
        outer = outer_waterflow(problem, tol=tol, max_iters=max_iters)

        p2 = outer.allocation.powers
        p_t = _inner(scenario, p2)
        converged = outer.converged

        logger.debug(f"BC outer search: value {outer.value:.12g} after {outer.iterations} sweeps")

    split = BcPowerSplit(np.maximum(p_t, p2), p2)
    r1, r2 = split.rates(link)

    return RegionPoint(
        r1.total,
        r2.total,
        weights,
        (split.p_t, split.p_2),
        (r1, r2),
        None,
        converged,
    )


def sweep_bc_region(
    scenario: Scenario,
    n_weights: int = 9,
    tol: float = solver_defaults["outer_tol"],
    quiet: bool = True,
) -> DepartureRegion:
    """Traces the BC departure region over :func:`ehdecode.mac.weight_grid`.

    Every weight with ``mu1 >= mu2`` lands on the same extreme point.
    """
    points = [
        solve_bc(scenario, weights, tol)
        for weights in tqdm(weight_grid(n_weights), disable=quiet, leave=False)
    ]
    return DepartureRegion(points, None)
