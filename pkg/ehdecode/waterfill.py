import itertools
import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .axioms import FEASIBILITY_TOL, solver_defaults
from .model import EnergyProfile, InfeasibleError, NonConvergenceWarning, PowerPolicy
from .utils import _budget_from_cumulative, _clip_roundoff

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Bin:
    """One slot of a water-filling problem.

    Parameters
    ----------
    index : int
        Slot index.
    water : float, default = 0.0
        Energy arriving at the slot. Used when no budget profile is given.
    floor : float, default = 1.0
        Effective noise level (``1 + interference``).
    cap : float, optional
        Largest amount of water the slot can hold.
    min_power : float, optional
        Lower bound on the slot's total power.
    """

    index: int
    water: float = 0.0
    floor: float = 1.0
    cap: Optional[float] = None
    min_power: Optional[float] = None

    def __post_init__(self):
        if self.water < 0:
            raise ValueError(f"Bin {self.index}: water must be non-negative.")
        if self.floor <= 0:
            raise ValueError(f"Bin {self.index}: floor must be positive.")
        if self.cap is not None and self.cap < 0:
            raise ValueError(f"Bin {self.index}: cap must be non-negative.")
        if self.min_power is not None and self.min_power < 0:
            raise ValueError(f"Bin {self.index}: min_power must be non-negative.")


def make_bins(
    floors: Sequence[float],
    water: Optional[Sequence[float]] = None,
    caps: Optional[Sequence[float]] = None,
    min_powers: Optional[Sequence[float]] = None,
) -> List[Bin]:
    """Builds one :class:`Bin` per slot from per-slot vectors.

    Infinite caps are stored as ``None``.
    """
    n = len(floors)
    water = np.zeros(n) if water is None else np.asarray(water, dtype=float)

    bins = []
    for i in range(n):
        cap = None if caps is None or not np.isfinite(caps[i]) else float(caps[i])
        min_power = None if min_powers is None else float(min_powers[i])
        bins.append(Bin(i, float(water[i]), float(floors[i]), cap, min_power))

    return bins


def _segment_level(floors: np.ndarray, caps: np.ndarray, amount: float) -> Tuple[float, float]:
    """Water level of a pooled segment and the surplus it cannot hold.

    The level solves ``sum(clip(level - floors, 0, caps)) = amount``; when the
    amount exceeds the total capacity the level is the highest filled surface
    and the excess is returned as surplus.
    """
    if amount <= 0.0:
        return float(floors.min()), 0.0

    capacity = caps.sum()
    if amount >= capacity:
        return float((floors + caps).max()), float(amount - capacity)

    # The filled volume is piecewise linear between these breakpoints
    tops = floors + caps
    points = np.unique(np.concatenate([floors, tops[np.isfinite(tops)]]))
    volumes = np.clip(points[:, None] - floors[None, :], 0.0, caps[None, :]).sum(axis=1)

    k = int(np.searchsorted(volumes, amount, side="right"))
    if k == points.size:
        slope = np.count_nonzero(~np.isfinite(caps))
        return float(points[-1] + (amount - volumes[-1]) / slope), 0.0

    return float(np.interp(amount, volumes[k - 1 : k + 1], points[k - 1 : k + 1])), 0.0


def _pools_backward(segments: List[list], level: float) -> bool:
    """Whether an earlier segment sits above ``level``, looking past full segments."""
    for segment in reversed(segments):
        if segment[3] > level:
            return True
        if not segment[4]:
            return False
    return False


def _directional_fill(
    floors: np.ndarray, budget: np.ndarray, caps: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, float]:
    """Forward-only water-filling by segment merging.

    Parameters
    ----------
    floors : numpy.ndarray
        Effective noise level per slot.
    budget : numpy.ndarray
        Non-negative water arriving per slot.
    caps : numpy.ndarray, optional
        Per-slot capacity, ``inf`` for none.

    Returns
    -------
    tuple
        Allocation per slot and the water left over after the last slot.
    """
    floors = np.asarray(floors, dtype=float)
    budget = np.clip(np.asarray(budget, dtype=float), 0.0, None)
    n = floors.size
    caps = np.full(n, np.inf) if caps is None else np.asarray(caps, dtype=float)

    # Each segment is [start, end, water kept, level, full]
    segments = []
    carry = 0.0

    for j in range(n):
        start, amount = j, budget[j] + carry

        while True:
            level, surplus = _segment_level(
                floors[start : j + 1], caps[start : j + 1], amount
            )
            # A full segment never takes earlier water and never gives its own back
            if surplus <= 0.0 and segments and _pools_backward(segments, level):
                previous = segments.pop()
                start, amount = previous[0], previous[2] + amount
                continue
            break

        segments.append([start, j, amount - surplus, level, surplus > 0.0])
        carry = surplus

    allocation = np.zeros(n)
    for start, end, _, level, _ in segments:
        allocation[start : end + 1] = np.clip(
            level - floors[start : end + 1], 0.0, caps[start : end + 1]
        )

    return allocation, carry


def _directional_fill_cumulative(
    floors: np.ndarray, cumulative: np.ndarray, caps: Optional[np.ndarray] = None
) -> np.ndarray:
    """Forward-only water-filling under cumulative bounds ``cumsum(x) <= cumulative``."""
    allocation, _ = _directional_fill(floors, _budget_from_cumulative(cumulative), caps)
    return allocation


def _bin_vectors(bins: Sequence[Bin]) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    water = np.array([b.water for b in bins], dtype=float)
    floors = np.array([b.floor for b in bins], dtype=float)
    caps = np.array([np.inf if b.cap is None else b.cap for b in bins], dtype=float)
    min_powers = np.array([0.0 if b.min_power is None else b.min_power for b in bins])
    return water, floors, caps, min_powers


def _budget_vector(bins: Sequence[Bin], budget) -> np.ndarray:
    if budget is None:
        return _bin_vectors(bins)[0]
    amounts = budget.amounts if isinstance(budget, EnergyProfile) else np.asarray(budget, float)
    if amounts.size != len(bins):
        raise ValueError(f"Got {len(bins)} bins but a budget of {amounts.size} slots.")
    return amounts


def directional_waterfill(
    bins: Sequence[Bin], total_respecting_cumulative: Optional[EnergyProfile] = None
) -> PowerPolicy:
    """Maximizes ``sum(log(floor + x))`` when water only flows forward in time.

    Water levels ``floor + x`` end up non-decreasing wherever water is
    present, and constant between slots where the cumulative constraint is
    slack. Water that no bin can hold (caps) is pushed forward and is wasted
    after the last slot.

    Parameters
    ----------
    bins : Sequence[Bin]
        Slots with their floors and optional caps.
    total_respecting_cumulative : EnergyProfile, optional
        Energy arriving per slot. Defaults to the bins' ``water``.

    Returns
    -------
    PowerPolicy
        Water poured in every slot.

    Examples
    --------
    >>> from ehdecode.model import EnergyProfile
    >>> from ehdecode.waterfill import directional_waterfill, make_bins
    >>> directional_waterfill(make_bins([1, 1]), EnergyProfile([2, 0])).powers
    array([1., 1.])
    """
    if any(b.min_power for b in bins):
        raise ValueError("Bins with min_power belong to min_power_backward_fill.")

    _, floors, caps, _ = _bin_vectors(bins)
    allocation, wasted = _directional_fill(
        floors, _budget_vector(bins, total_respecting_cumulative), caps
    )

    if wasted > 0:
        logger.debug(f"Directional water-filling wasted {wasted:.3g} units")

    return PowerPolicy(allocation)


def min_power_backward_fill(bins: Sequence[Bin], budget: Optional[EnergyProfile] = None) -> PowerPolicy:
    """Equalizes powers as much as possible above per-slot minimum powers.

    Maximizes ``sum(log(floor + p))`` subject to ``p >= min_power`` and the
    cumulative budget. The minimum powers are reserved first; the remaining
    cumulative budget is water-filled forward above floors raised by the
    minimum powers. The output never decreases over slots when the minimum
    powers do not.

    Parameters
    ----------
    bins : Sequence[Bin]
        Slots with ``min_power`` set (``None`` counts as 0).
    budget : EnergyProfile, optional
        Energy arriving per slot. Defaults to the bins' ``water``.

    Returns
    -------
    PowerPolicy
        Total power per slot.

    Raises
    ------
    InfeasibleError
        If the minimum powers exceed the cumulative budget on some prefix.
    """
    _, floors, _, min_powers = _bin_vectors(bins)
    amounts = _budget_vector(bins, budget)

    # Budget left once the minimum powers are reserved
    residual = np.cumsum(amounts) - np.cumsum(min_powers)

    violations = np.flatnonzero(residual < -FEASIBILITY_TOL)
    if violations.size:
        k = int(violations[0])
        raise InfeasibleError(
            f"Minimum powers exceed the budget over the first {k + 1} slot(s) "
            f"by {-residual[k]:.3g}."
        )

    extra = _directional_fill_cumulative(floors + min_powers, residual)

    return PowerPolicy(min_powers + extra)


@dataclass(frozen=True, eq=False)
class OuterProblem:
    """Concave maximization over a cumulatively constrained allocation.

    Parameters
    ----------
    evaluate : Callable[[numpy.ndarray], float]
        Concave objective on the feasible polytope.
    cumulative_budget : EnergyProfile
        Per-slot amounts whose running sums bound the allocation's running sums.
    allow_discard : bool, default = True
        Whether the allocation may leave budget unused (the extra slot).
    monotone_allocation_required : bool, default = False
        Whether the allocation must be non-decreasing over slots.
    initial : array-like, optional
        Feasible starting allocation.
    """

    evaluate: Callable[[np.ndarray], float]
    cumulative_budget: EnergyProfile
    allow_discard: bool = True
    monotone_allocation_required: bool = False
    initial: Optional[np.ndarray] = None

    @property
    def slots(self) -> int:
        return len(self.cumulative_budget)


@dataclass(frozen=True, eq=False)
class OuterSolution:
    """Best allocation found by :func:`outer_waterflow`.

    Unpacks as ``allocation, value``.
    """

    allocation: PowerPolicy
    value: float
    converged: bool
    iterations: int
    history: List[float] = field(default_factory=list)

    def __iter__(self) -> Iterator:
        return iter((self.allocation, self.value))


class _CachedObjective:
    """Memoizes an objective on allocations quantized to a fixed grid."""

    def __init__(self, evaluate: Callable[[np.ndarray], float], quantum: float):
        self.evaluate = evaluate
        self.quantum = quantum
        self.cache = {}
        self.calls = 0

    def __call__(self, x: np.ndarray) -> float:
        key = np.round(np.asarray(x, dtype=float) / self.quantum).astype(np.int64).tobytes()
        if key not in self.cache:
            self.calls += 1
            self.cache[key] = float(self.evaluate(np.array(x, dtype=float)))
        return self.cache[key]


def _directions(n: int, allow_discard: bool) -> List[np.ndarray]:
    """Interval indicators (when discarding is allowed) and pairwise transfers."""
    directions = []

    if allow_discard:
        for a in range(n):
            for b in range(a, n):
                d = np.zeros(n)
                d[a : b + 1] = 1.0
                directions.append(d)

    for i, j in itertools.combinations(range(n), 2):
        d = np.zeros(n)
        d[i], d[j] = -1.0, 1.0
        directions.append(d)

    return directions


def _pair_directions(directions: List[np.ndarray]) -> List[np.ndarray]:
    pairs = []
    for u, v in itertools.combinations(directions, 2):
        pairs.extend([u + v, u - v])
    return [d for d in pairs if np.any(d != 0)]


def _step_range(
    x: np.ndarray, d: np.ndarray, cumulative: np.ndarray, monotone: bool
) -> Tuple[float, float]:
    """Interval of steps ``t`` keeping ``x + t*d`` inside the polytope."""
    slacks = [x, cumulative - np.cumsum(x)]
    rates = [d, -np.cumsum(d)]
    if monotone and x.size > 1:
        slacks.append(np.diff(x))
        rates.append(np.diff(d))

    slack = np.clip(np.concatenate(slacks), 0.0, None)
    rate = np.concatenate(rates)

    # Every constraint reads slack + t*rate >= 0
    up, down = rate > 0, rate < 0
    lo = float(np.max(-slack[up] / rate[up])) if up.any() else -np.inf
    hi = float(np.min(slack[down] / -rate[down])) if down.any() else np.inf

    return lo, hi


def _line_search(
    objective: _CachedObjective,
    x: np.ndarray,
    d: np.ndarray,
    value: float,
    lo: float,
    hi: float,
    tol: float,
) -> Tuple[np.ndarray, float]:
    """Best point of the concave restriction ``t -> objective(x + t*d)``."""
    steps = [lo, hi]
    result = minimize_scalar(
        lambda t: -objective(_clip_roundoff(x + t * d)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": tol / 10},
    )
    steps.append(float(result.x))

    best_x, best_value = x, value
    for t in steps:
        candidate = np.clip(_clip_roundoff(x + t * d), 0.0, None)
        candidate_value = objective(candidate)
        if candidate_value > best_value:
            best_x, best_value = candidate, candidate_value

    return best_x, best_value


def _sweep(
    objective: _CachedObjective,
    x: np.ndarray,
    value: float,
    directions: List[np.ndarray],
    cumulative: np.ndarray,
    monotone: bool,
    tol: float,
) -> Tuple[np.ndarray, float]:
    for d in directions:
        lo, hi = _step_range(x, d, cumulative, monotone)
        if not hi - lo > 1e-15:
            continue
        x, value = _line_search(objective, x, d, value, lo, hi, tol)
    return x, value


def _starting_point(problem: OuterProblem, cumulative: np.ndarray) -> np.ndarray:
    if problem.initial is not None:
        x = np.clip(_clip_roundoff(np.asarray(problem.initial, dtype=float)), 0.0, None)
        if x.size != cumulative.size:
            raise ValueError(f"Initial allocation has {x.size} slots, expected {cumulative.size}.")
        if np.any(x < 0) or np.any(np.cumsum(x) > cumulative + FEASIBILITY_TOL):
            raise InfeasibleError("Initial allocation violates the cumulative budget.")
        return x

    if problem.monotone_allocation_required:
        if not problem.allow_discard:
            raise ValueError("A monotone problem without discarding needs an initial allocation.")
        return np.zeros(cumulative.size)

    # Spend everything as it arrives
    return _budget_from_cumulative(cumulative)


def outer_waterflow(
    problem: OuterProblem,
    tol: float = solver_defaults["outer_tol"],
    max_iters: int = solver_defaults["outer_max_iters"],
) -> OuterSolution:
    """Maximizes a concave objective over ``{x >= 0 : cumsum(x) <= cumsum(budget)}``.

    Projected coordinate ascent: each sweep moves water along interval
    directions (towards or away from the discard slot) and between pairs of
    slots, with a bounded line search on the one-dimensional restriction.
    Only improving moves are accepted, so values never decrease. Sweeps stop
    once one improves the value by less than ``tol`` relative to its
    magnitude. For at most six slots, pairwise combinations of directions are
    tried before declaring convergence.

    Parameters
    ----------
    problem : OuterProblem
        Objective and polytope.
    tol : float, default = 1e-8
        Relative improvement below which a sweep counts as converged.
    max_iters : int, default = 10000
        Maximum number of sweeps.

    Returns
    -------
    OuterSolution
        Best allocation, its value, the convergence flag and the value after
        every sweep.
    """
    n = problem.slots
    cumulative = problem.cumulative_budget.cumulative
    monotone = problem.monotone_allocation_required

    objective = _CachedObjective(problem.evaluate, solver_defaults["cache_quantum"])

    x = _starting_point(problem, cumulative)
    value = objective(x)
    history = [value]

    directions = _directions(n, problem.allow_discard)
    polish = _pair_directions(directions) if n <= 6 else []

    converged = False
    iterations = 0

    while iterations < max_iters:
        iterations += 1
        x, new_value = _sweep(objective, x, value, directions, cumulative, monotone, tol)
        improvement = new_value - value
        value = new_value
        history.append(value)

        logger.debug(f"Outer sweep {iterations}: value {value:.12g}")

        if improvement < tol * max(1.0, abs(value)):
            # Stalled: try combined directions before stopping
            x, polished = _sweep(objective, x, value, polish, cumulative, monotone, tol)
            if polished - value < tol * max(1.0, abs(polished)):
                value = polished
                history[-1] = value
                converged = True
                break
            value = polished
            history[-1] = value

    if not converged:
        warnings.warn(
            f"outer_waterflow stopped after {max_iters} sweeps without converging.",
            NonConvergenceWarning,
        )

    logger.debug(f"Outer water-flow: {objective.calls} evaluations")

    return OuterSolution(PowerPolicy(x), value, converged, iterations, history)
