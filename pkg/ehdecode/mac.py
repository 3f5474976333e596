import enum
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from .axioms import FEASIBILITY_TOL, gp_defaults, solver_defaults
from .gp import GeometricProgram, Monomial, Posynomial, solve_gp
from .model import (
    EnergyProfile,
    InfeasibleError,
    LinkModel,
    NonConvergenceWarning,
    PowerPolicy,
    RatePolicy,
    Scenario,
    Topology,
    UnsupportedConfigurationError,
    validate_scenario,
)
from .utils import _budget_from_cumulative, _clip_roundoff, _suffix_min
from .waterfill import OuterProblem, _directional_fill_cumulative, outer_waterflow

logger = logging.getLogger(__name__)


class DecodingMode(str, enum.Enum):
    SIMULTANEOUS = "simultaneous"
    SUCCESSIVE = "successive"


@dataclass(frozen=True)
class WeightPair:
    """Non-negative weights of the two users' departed data, not both zero."""

    mu1: float
    mu2: float

    def __post_init__(self):
        mu1, mu2 = float(self.mu1), float(self.mu2)
        if not (math.isfinite(mu1) and math.isfinite(mu2)) or mu1 < 0 or mu2 < 0:
            raise ValueError(f"Weights must be finite and non-negative, got ({mu1}, {mu2}).")
        if mu1 + mu2 <= 0:
            raise ValueError("At least one weight must be positive.")
        object.__setattr__(self, "mu1", mu1)
        object.__setattr__(self, "mu2", mu2)

    @classmethod
    def from_ratio(cls, ratio: float) -> "WeightPair":
        """Normalized weights with ``mu2 / mu1 = ratio`` (``inf`` gives ``(0, 1)``)."""
        if math.isinf(ratio):
            return cls(0.0, 1.0)
        return cls(1.0 / (1.0 + ratio), ratio / (1.0 + ratio))

    @property
    def equal(self) -> bool:
        return abs(self.mu1 - self.mu2) <= 1e-12 * max(self.mu1, self.mu2)

    def normalized(self) -> "WeightPair":
        total = self.mu1 + self.mu2
        return WeightPair(self.mu1 / total, self.mu2 / total)

    def swapped(self) -> "WeightPair":
        return WeightPair(self.mu2, self.mu1)


def _as_weights(weights: Union[WeightPair, Sequence[float]]) -> WeightPair:
    return weights if isinstance(weights, WeightPair) else WeightPair(*weights)


def weight_grid(n_weights: int) -> List[WeightPair]:
    """Weight pairs swept from ``mu2 = 0`` to ``mu1 = 0``.

    The grid always holds both axes and the equal-weight point; the remaining
    ratios ``mu2 / mu1`` are log-spaced on either side of 1, denser towards
    the corners.

    Parameters
    ----------
    n_weights : int
        Number of weight pairs, at least 3.

    Returns
    -------
    list of WeightPair
        Normalized weights ordered by increasing ``mu2 / mu1``.
    """
    if n_weights < 3:
        raise ValueError(f"A region sweep needs at least 3 weights, got {n_weights}.")

    interior = n_weights - 3
    below = np.logspace(-2, 0, math.ceil(interior / 2), endpoint=False)
    above = (1.0 / below[::-1])[: interior - below.size]

    ratios = [0.0, *below, 1.0, *above, math.inf]

    return [WeightPair.from_ratio(float(r)) for r in ratios]


@dataclass(frozen=True, eq=False)
class RegionPoint:
    """One boundary point of a departure region.

    Parameters
    ----------
    b1, b2 : float
        Data departed for user 1 and user 2 by the deadline.
    weights : WeightPair
        Weights the point maximizes.
    policy : tuple of PowerPolicy
        MAC: transmit powers of the two users. BC: total-rate power ``p_t``
        and weak-user power ``p_2``.
    rates : tuple of RatePolicy, optional
        Per-slot rates of user 1 and user 2.
    mode : DecodingMode, optional
        MAC decoding mode; ``None`` for the BC.
    converged : bool, default = True
        Whether the iterative solver converged.
    history : list
        Successive decoding: ``(p1, p2, objective)`` for every accepted
        iterate.
    """

    b1: float
    b2: float
    weights: WeightPair
    policy: Tuple[PowerPolicy, PowerPolicy]
    rates: Optional[Tuple[RatePolicy, RatePolicy]] = None
    mode: Optional[DecodingMode] = None
    converged: bool = True
    history: List[Tuple[np.ndarray, np.ndarray, float]] = field(default_factory=list)

    @property
    def weighted_value(self) -> float:
        return self.weights.mu1 * self.b1 + self.weights.mu2 * self.b2

    def swapped(self) -> "RegionPoint":
        """Same point with the roles of the two users exchanged."""
        return replace(
            self,
            b1=self.b2,
            b2=self.b1,
            weights=self.weights.swapped(),
            policy=self.policy[::-1],
            rates=None if self.rates is None else self.rates[::-1],
            history=[(p2, p1, value) for p1, p2, value in self.history],
        )


@dataclass(frozen=True, eq=False)
class DepartureRegion:
    """Boundary points of a departure region in sweep order."""

    points: List[RegionPoint]
    mode: Optional[DecodingMode] = None

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[RegionPoint]:
        return iter(self.points)

    @property
    def converged(self) -> bool:
        return all(point.converged for point in self.points)

    def to_frame(self) -> pd.DataFrame:
        """One row per point: normalized weights, departed data and convergence."""
        rows = []
        for point in self.points:
            weights = point.weights.normalized()
            rows.append(
                dict(
                    mu1=weights.mu1,
                    mu2=weights.mu2,
                    b1=point.b1,
                    b2=point.b2,
                    converged=point.converged,
                )
            )
        return pd.DataFrame(rows, columns=["mu1", "mu2", "b1", "b2", "converged"])

    def dominates(self, other: "DepartureRegion", tol: float = 1e-6) -> bool:
        """Whether every point beats ``other``'s point at the same weights.

        Points are compared by their weighted sum, which orders the regions'
        support functions.
        """
        if len(self) != len(other):
            raise ValueError(f"Regions have {len(self)} and {len(other)} points.")

        for mine, theirs in zip(self.points, other.points):
            w, v = mine.weights.normalized(), theirs.weights.normalized()
            if abs(w.mu1 - v.mu1) > 1e-12:
                raise ValueError("Regions were swept over different weights.")
            if w.mu1 * mine.b1 + w.mu2 * mine.b2 < w.mu1 * theirs.b1 + w.mu2 * theirs.b2 - tol:
                return False

        return True

    def is_concave(self, tol: float = 1e-6) -> bool:
        """Whether boundary slopes never increase when ordered by ``b1``."""
        points = sorted(((p.b1, p.b2) for p in self.points), key=lambda q: (q[0], -q[1]))
        points = np.array(points)

        for p0, p1, p2 in zip(points[:-2], points[1:-1], points[2:]):
            # The middle point must not lie below the chord of its neighbours
            turn = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])
            if turn > tol:
                return False

        return True


def _require_inverse_decoding(link: LinkModel) -> None:
    if not link.decoding.is_inverse_rate:
        raise UnsupportedConfigurationError(
            "Multi-user solvers need the decoding function phi = g^-1 "
            f"(got {link.decoding.kind} decoding)."
        )


def _second_user_power(p1: np.ndarray, C2: np.ndarray, CE: np.ndarray) -> np.ndarray:
    """User 2's best response: water-filling above ``1 + p1`` within its own and the
    receiver's leftover budget."""
    return _directional_fill_cumulative(1.0 + p1, np.minimum(C2, CE - np.cumsum(p1)))


def _greedy_split(total: np.ndarray, C1: np.ndarray) -> np.ndarray:
    """Gives user 1 as much of ``total`` as its own energy allows, slot by slot."""
    p1 = np.zeros_like(total)
    used = 0.0
    for i, amount in enumerate(total):
        p1[i] = min(amount, max(C1[i] - used, 0.0))
        used += p1[i]
    return p1


def solve_mac_simultaneous(
    scenario: Scenario,
    weights: Union[WeightPair, Sequence[float]],
    tol: float = solver_defaults["outer_tol"],
    max_iters: int = solver_defaults["outer_max_iters"],
) -> RegionPoint:
    """Maximizes ``mu1*B1 + mu2*B2`` when the receiver decodes both users jointly.

    For ``mu1 > mu2 > 0`` user 1's powers are chosen by the outer water-flow
    search over ``mu * G(p1) + sum(g(p1))`` with ``mu = mu2 / (mu1 - mu2)``,
    where ``G`` is the sum rate after user 2 water-fills above ``1 + p1``.
    ``mu2 = 0`` reduces to a single-user problem for user 1, ``mu1 < mu2``
    swaps the users, and equal weights water-fill the sum power directly and
    split it greedily in favour of user 1.

    Parameters
    ----------
    scenario : Scenario
        MAC instance with ``phi = g^-1``.
    weights : WeightPair | Sequence[float]
        Weights ``(mu1, mu2)``.
    tol : float, default = 1e-8
        Relative tolerance of the outer search.
    max_iters : int, default = 10000
        Maximum number of outer sweeps.

    Returns
    -------
    RegionPoint
        Departed data, powers and per-slot rates of both users.

    Raises
    ------
    UnsupportedConfigurationError
        If the decoding function is not ``g^-1``.
    """
    validate_scenario(scenario, Topology.MAC)
    _require_inverse_decoding(scenario.link)
    weights = _as_weights(weights)

    if weights.mu1 < weights.mu2 and not weights.equal:
        swapped = solve_mac_simultaneous(scenario.swap_users(), weights.swapped(), tol, max_iters)
        return swapped.swapped()

    g = scenario.link.g
    C1, C2, CE = (scenario.cumulative(role) for role in ("tx1", "tx2", "rx"))
    n = scenario.slots
    converged = True

    if weights.equal:
        # Any causal split of the best sum power is feasible
        total = _directional_fill_cumulative(np.ones(n), np.minimum(C1 + C2, CE))
        p1 = _greedy_split(total, C1)
        p2 = np.clip(total - p1, 0.0, None)
    elif weights.mu2 == 0:
        p1 = _directional_fill_cumulative(np.ones(n), np.minimum(C1, CE))
        p2 = np.zeros(n)
    else:
        mu = weights.mu2 / (weights.mu1 - weights.mu2)

        def evaluate(p1: np.ndarray) -> float:
            p2 = _second_user_power(p1, C2, CE)
            return mu * float(np.sum(g(p1 + p2))) + float(np.sum(g(p1)))

        budget = EnergyProfile(_budget_from_cumulative(np.minimum(C1, CE)))
        outer = outer_waterflow(OuterProblem(evaluate, budget), tol=tol, max_iters=max_iters)

        p1 = outer.allocation.powers
        p2 = _second_user_power(p1, C2, CE)
        converged = outer.converged

    r1 = g(p1)
    r2 = np.clip(g(p1 + p2) - r1, 0.0, None)

    return RegionPoint(
        float(r1.sum()),
        float(r2.sum()),
        weights,
        (PowerPolicy(p1), PowerPolicy(p2)),
        (RatePolicy(r1), RatePolicy(r2)),
        DecodingMode.SIMULTANEOUS,
        converged,
    )


class _SuccessiveProblem:
    """Successive decoding of user 2 first, in variables ``x1 = p1`` and
    ``x2 = p2 / (1 + p1)``.

    Transmitter 2 spends ``x2 + x1*x2`` and the receiver ``x1 + x2`` per slot.
    """

    def __init__(self, scenario: Scenario, weights: WeightPair):
        self.link = scenario.link
        self.weights = weights
        self.C1, self.C2, self.CE = (scenario.cumulative(r) for r in ("tx1", "tx2", "rx"))
        self.n = scenario.slots

        # Slots whose variables are forced to zero by an empty budget
        empty1, empty2, emptyE = (_suffix_min(C) <= 1e-12 for C in (self.C1, self.C2, self.CE))
        self.active1 = ~(empty1 | emptyE)
        self.active2 = ~(empty2 | emptyE)

    def objective(self, x1: np.ndarray, x2: np.ndarray) -> float:
        g = self.link.g
        return self.weights.mu1 * float(np.sum(g(x1))) + self.weights.mu2 * float(np.sum(g(x2)))

    def slacks(self, x1: np.ndarray, x2: np.ndarray) -> dict:
        return dict(
            tx1=self.C1 - np.cumsum(x1),
            tx2=self.C2 - np.cumsum(x2 + x1 * x2),
            rx=self.CE - np.cumsum(x1 + x2),
        )

    def feasible(self, x1: np.ndarray, x2: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
        return all(np.all(s >= -tol) for s in self.slacks(x1, x2).values())

    def _constrained_rows(self) -> dict:
        # Prefixes that contain at least one free variable
        any1, any2 = np.cumsum(self.active1) > 0, np.cumsum(self.active2) > 0
        return dict(tx1=any1, tx2=any2, rx=any1 | any2)

    def _strictly_feasible(self, x1: np.ndarray, x2: np.ndarray) -> bool:
        rows = self._constrained_rows()
        return all(np.all(s[rows[k]] > 0) for k, s in self.slacks(x1, x2).items())

    def interior(self, x1: np.ndarray, x2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """A strictly feasible point near ``(x1, x2) / 2``."""
        budgets = np.concatenate([self.C1, self.C2, self.CE])
        eps = 1e-3 * float(budgets[budgets > 1e-12].min())

        for _ in range(40):
            y1 = np.where(self.active1, 0.5 * x1 + eps, 0.0)
            y2 = np.where(self.active2, 0.5 * x2 + eps, 0.0)
            if self._strictly_feasible(y1, y2):
                return y1, y2
            eps /= 10

        raise InfeasibleError("No strictly feasible point found for the successive program.")

    def program(
        self, alpha1: np.ndarray, alpha2: np.ndarray
    ) -> Tuple[GeometricProgram, List[Tuple[str, int, float]]]:
        """Geometric program with ``1 + x`` replaced by its monomial lower bound at ``alpha``."""
        x1 = {i: Monomial(1.0, {f"x1_{i}": 1}) for i in np.flatnonzero(self.active1)}
        x2 = {i: Monomial(1.0, {f"x2_{i}": 1}) for i in np.flatnonzero(self.active2)}

        constraints = []
        for k in range(self.n):
            first = [x1[i] * (1.0 / self.C1[k]) for i in x1 if i <= k]
            if first:
                constraints.append(Posynomial(first))

            second = []
            for i in (i for i in x2 if i <= k):
                second.append(x2[i] * (1.0 / self.C2[k]))
                if i in x1:
                    second.append(x1[i] * x2[i] * (1.0 / self.C2[k]))
            if second:
                constraints.append(Posynomial(second))

            receiver = [x1[i] * (1.0 / self.CE[k]) for i in x1 if i <= k]
            receiver += [x2[i] * (1.0 / self.CE[k]) for i in x2 if i <= k]
            if receiver:
                constraints.append(Posynomial(receiver))

        # t <= u(x; alpha) <= 1 + x for every rewarded variable
        rewarded = []
        objective = Monomial(1.0)
        for user, variables, alpha, mu in (
            (1, x1, alpha1, self.weights.mu1),
            (2, x2, alpha2, self.weights.mu2),
        ):
            if mu == 0:
                continue
            for i, x in variables.items():
                a = float(alpha[i])
                t = Monomial(1.0, {f"t{user}_{i}": 1})
                scale = a**a * (1.0 - a) ** (1.0 - a)
                constraints.append(Posynomial([t * x ** -(1.0 - a) * scale]))
                objective = objective * t**-mu
                rewarded.append((f"t{user}_{i}", f"x{user}_{i}", a))

        return GeometricProgram(objective, constraints), rewarded

    def step(self, x1: np.ndarray, x2: np.ndarray, gp_tol: float) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """One convex approximation solved around ``(x1, x2)``; ``None`` when nothing is free."""
        floor = solver_defaults["alpha_floor"]
        alpha1 = 1.0 / (1.0 + np.maximum(x1, floor))
        alpha2 = 1.0 / (1.0 + np.maximum(x2, floor))

        program, rewarded = self.program(alpha1, alpha2)
        if not rewarded:
            return None

        y1, y2 = self.interior(x1, x2)
        initial = {f"x1_{i}": y1[i] for i in np.flatnonzero(self.active1)}
        initial.update({f"x2_{i}": y2[i] for i in np.flatnonzero(self.active2)})

        # Strictly below the monomial bound
        for name, variable, a in rewarded:
            x = initial[variable]
            initial[name] = 0.99 * (1.0 / a) ** a * (x / (1.0 - a)) ** (1.0 - a)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NonConvergenceWarning)
            solution = solve_gp(program, tol=gp_tol, initial=initial)

        if not solution.converged:
            logger.debug("Successive step: geometric program hit its stage cap")

        new1 = np.array([solution.assignment.get(f"x1_{i}", 0.0) for i in range(self.n)])
        new2 = np.array([solution.assignment.get(f"x2_{i}", 0.0) for i in range(self.n)])

        return new1, new2


def _successive_start(
    problem: _SuccessiveProblem, init: Optional[Tuple[Any, Any]]
) -> Tuple[np.ndarray, np.ndarray]:
    if init is None:
        return np.zeros(problem.n), np.zeros(problem.n)

    p1, p2 = (p.powers if isinstance(p, PowerPolicy) else np.asarray(p, dtype=float) for p in init)
    x1 = np.where(problem.active1, np.clip(p1, 0.0, None), 0.0)
    x2 = np.where(problem.active2, np.clip(p2, 0.0, None) / (1.0 + x1), 0.0)

    if not problem.feasible(x1, x2):
        raise InfeasibleError("The initial powers violate the successive decoding constraints.")

    return x1, x2


def solve_mac_successive(
    scenario: Scenario,
    weights: Union[WeightPair, Sequence[float]],
    init: Optional[Tuple[Any, Any]] = None,
    tol: float = solver_defaults["sca_tol"],
    max_sca_iters: int = solver_defaults["sca_max_iters"],
) -> RegionPoint:
    """Locally maximizes ``mu1*B1 + mu2*B2`` under successive cancellation decoding.

    The user with the larger weight is decoded last, interference free. In
    the variables ``x1 = p1`` and ``x2 = p2 / (1 + p1)`` the problem is a
    signomial program; every iteration replaces ``1 + x`` in the objective by
    the monomial lower bound ``(1/a)**a * (x/(1-a))**(1-a)`` with
    ``a = 1 / (1 + x)`` at the current iterate and solves the resulting
    geometric program. The bound is tight at the current iterate and the
    constraints are exact, so iterates stay feasible and the objective never
    decreases. Iterations stop when the relative improvement drops below
    ``tol``.

    Parameters
    ----------
    scenario : Scenario
        MAC instance with ``phi = g^-1``.
    weights : WeightPair | Sequence[float]
        Weights ``(mu1, mu2)``.
    init : tuple of PowerPolicy, optional
        Starting powers ``(p1, p2)``, e.g. a simultaneous decoding solution.
        Defaults to all zeros.
    tol : float, default = 1e-8
        Relative improvement below which iterations stop.
    max_sca_iters : int, default = 200
        Maximum number of approximation steps.

    Returns
    -------
    RegionPoint
        Best powers found, with the accepted iterates in ``history``.

    Raises
    ------
    InfeasibleError
        If ``init`` violates the successive decoding constraints.
    UnsupportedConfigurationError
        If the decoding function is not ``g^-1``.
    """
    validate_scenario(scenario, Topology.MAC)
    _require_inverse_decoding(scenario.link)
    weights = _as_weights(weights)

    if weights.mu1 < weights.mu2 and not weights.equal:
        swapped_init = None if init is None else (init[1], init[0])
        swapped = solve_mac_successive(
            scenario.swap_users(), weights.swapped(), swapped_init, tol, max_sca_iters
        )
        return swapped.swapped()

    problem = _SuccessiveProblem(scenario, weights)
    x1, x2 = _successive_start(problem, init)
    value = problem.objective(x1, x2)
    history = [(x1.copy(), (1.0 + x1) * x2, value)]

    gp_tol = gp_defaults["tol"]
    converged, failure = False, None

    for iteration in range(max_sca_iters):
        step = problem.step(x1, x2, gp_tol)
        if step is None:
            converged = True
            break

        new1, new2 = (np.clip(_clip_roundoff(x), 0.0, None) for x in step)
        new_value = problem.objective(new1, new2)

        logger.debug(f"SCA iteration {iteration}: objective {new_value:.12g}")

        if not problem.feasible(new1, new2):
            failure = f"SCA iteration {iteration} left the feasible set"
            break
        if new_value < value:
            # Losses within the tolerance are stalls at the optimum
            if value - new_value <= tol * max(1.0, abs(value)):
                converged = True
            else:
                failure = f"SCA iteration {iteration} lost {value - new_value:.3g} of the objective"
            break

        improvement = (new_value - value) / max(1.0, abs(value))
        x1, x2, value = new1, new2, new_value
        history.append((x1.copy(), (1.0 + x1) * x2, value))

        if improvement < tol:
            converged = True
            break

    if not converged:
        failure = failure or f"no convergence after {max_sca_iters} iterations"
        warnings.warn(f"solve_mac_successive stopped: {failure}.", NonConvergenceWarning)

    g = scenario.link.g
    p1, p2 = x1, (1.0 + x1) * x2
    r1, r2 = g(x1), g(x2)

    return RegionPoint(
        float(r1.sum()),
        float(r2.sum()),
        weights,
        (PowerPolicy(p1), PowerPolicy(p2)),
        (RatePolicy(r1), RatePolicy(r2)),
        DecodingMode.SUCCESSIVE,
        converged,
        history,
    )


def sweep_region(
    scenario: Scenario,
    mode: Union[DecodingMode, str] = DecodingMode.SIMULTANEOUS,
    n_weights: int = 9,
    tol: Optional[float] = None,
    max_sca_iters: int = solver_defaults["sca_max_iters"],
    quiet: bool = True,
) -> DepartureRegion:
    """Traces a MAC departure region by maximizing weighted sums over a weight grid.

    In successive mode every point starts from the simultaneous decoding
    solution at the same weights.

    Parameters
    ----------
    scenario : Scenario
        MAC instance.
    mode : DecodingMode | str, default = "simultaneous"
        Decoding mode.
    n_weights : int, default = 9
        Number of weight pairs, see :func:`weight_grid`.
    tol : float, optional
        Solver tolerance; the solver's default when omitted.
    max_sca_iters : int, default = 200
        Successive mode iteration cap per point.
    quiet : bool, default = True
        Whether to hide the progress bar.

    Returns
    -------
    DepartureRegion
        Points in sweep order.
    """
    mode = DecodingMode(mode)
    points = []

    for weights in tqdm(weight_grid(n_weights), disable=quiet, leave=False):
        simultaneous = solve_mac_simultaneous(
            scenario, weights, solver_defaults["outer_tol"] if tol is None else tol
        )
        if mode is DecodingMode.SIMULTANEOUS:
            points.append(simultaneous)
            continue

        points.append(
            solve_mac_successive(
                scenario,
                weights,
                init=simultaneous.policy,
                tol=solver_defaults["sca_tol"] if tol is None else tol,
                max_sca_iters=max_sca_iters,
            )
        )

    return DepartureRegion(points, mode)
