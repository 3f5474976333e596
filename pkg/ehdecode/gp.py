import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import logsumexp, softmax

from .axioms import gp_defaults
from .model import InfeasibleError, NonConvergenceWarning

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Monomial:
    """``coefficient * prod(x_v ** exponents[v])`` with a positive coefficient."""

    coefficient: float
    exponents: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.coefficient > 0 or not math.isfinite(self.coefficient):
            raise ValueError(f"Monomial coefficient must be positive, got {self.coefficient}.")
        exponents = {v: float(a) for v, a in dict(self.exponents).items() if a != 0}
        object.__setattr__(self, "exponents", exponents)

    def __hash__(self):
        return hash((self.coefficient, tuple(sorted(self.exponents.items()))))

    def __mul__(self, other: Union["Monomial", float]) -> "Monomial":
        if not isinstance(other, Monomial):
            return Monomial(self.coefficient * float(other), self.exponents)
        exponents = dict(self.exponents)
        for v, a in other.exponents.items():
            exponents[v] = exponents.get(v, 0.0) + a
        return Monomial(self.coefficient * other.coefficient, exponents)

    __rmul__ = __mul__

    def __pow__(self, power: float) -> "Monomial":
        return Monomial(self.coefficient**power, {v: a * power for v, a in self.exponents.items()})

    def __add__(self, other) -> "Posynomial":
        return Posynomial([self]) + other

    @property
    def variables(self) -> set:
        return set(self.exponents)

    def __call__(self, assignment: Mapping[str, float]) -> float:
        value = self.coefficient
        for v, a in self.exponents.items():
            value *= assignment[v] ** a
        return value


@dataclass(frozen=True)
class Posynomial:
    """Sum of monomials; at least one term."""

    terms: Sequence[Monomial]

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("A posynomial needs at least one term.")
        object.__setattr__(self, "terms", terms)

    def __add__(self, other: Union["Posynomial", Monomial]) -> "Posynomial":
        other_terms = (other,) if isinstance(other, Monomial) else other.terms
        return Posynomial(self.terms + tuple(other_terms))

    def __mul__(self, other: Union[Monomial, float]) -> "Posynomial":
        return Posynomial([term * other for term in self.terms])

    __rmul__ = __mul__

    @property
    def variables(self) -> set:
        return set().union(*(term.variables for term in self.terms))

    def __call__(self, assignment: Mapping[str, float]) -> float:
        return sum(term(assignment) for term in self.terms)


def _as_posynomial(value: Union[Posynomial, Monomial]) -> Posynomial:
    return value if isinstance(value, Posynomial) else Posynomial([value])


@dataclass(frozen=True)
class GeometricProgram:
    """Minimize a posynomial subject to posynomials ``<= 1`` over positive variables.

    Parameters
    ----------
    objective : Posynomial | Monomial
        Function to minimize.
    constraints : Sequence[Posynomial | Monomial]
        Each must stay ``<= 1``.
    variables : Sequence[str], optional
        Declared variables. Inferred (sorted) when omitted.
    """

    objective: Posynomial
    constraints: Sequence[Posynomial] = ()
    variables: Optional[Sequence[str]] = None

    def __post_init__(self):
        objective = _as_posynomial(self.objective)
        constraints = tuple(_as_posynomial(c) for c in self.constraints)
        used = objective.variables.union(*(c.variables for c in constraints))

        if self.variables is None:
            variables = tuple(sorted(used))
        else:
            variables = tuple(self.variables)
            undeclared = used - set(variables)
            if undeclared:
                raise ValueError(f"Undeclared variables: {sorted(undeclared)}.")

        object.__setattr__(self, "objective", objective)
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "variables", variables)


@dataclass(frozen=True, eq=False)
class GPSolution:
    """Result of :func:`solve_gp`; unpacks as ``assignment, objective_value``."""

    assignment: Dict[str, float]
    objective_value: float
    converged: bool
    history: List[float] = field(default_factory=list)

    def __iter__(self) -> Iterator:
        return iter((self.assignment, self.objective_value))


class _LogSumExp:
    """A posynomial in log-variables: ``log(sum(exp(A @ y + b)))``."""

    def __init__(self, A: np.ndarray, b: np.ndarray):
        self.A = A
        self.b = b

    @classmethod
    def compile(cls, posynomial: Posynomial, index: Mapping[str, int]) -> "_LogSumExp":
        A = np.zeros((len(posynomial.terms), len(index)))
        b = np.zeros(len(posynomial.terms))
        for k, term in enumerate(posynomial.terms):
            b[k] = math.log(term.coefficient)
            for v, a in term.exponents.items():
                A[k, index[v]] = a
        return cls(A, b)

    def value(self, y: np.ndarray) -> float:
        return float(logsumexp(self.A @ y + self.b))

    def derivatives(self, y: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
        z = self.A @ y + self.b
        w = softmax(z)
        gradient = self.A.T @ w
        hessian = self.A.T @ (np.diag(w) - np.outer(w, w)) @ self.A
        return float(logsumexp(z)), gradient, hessian


def _newton_direction(hessian: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
        try:
            return scipy.linalg.solve(hessian, -gradient, assume_a="sym")
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning, ValueError):
            return np.linalg.lstsq(hessian, -gradient, rcond=None)[0]


class _Barrier:
    """``t * f0(y) - sum(log(-f_j(y)))`` over compiled log-sum-exp functions."""

    def __init__(self, objective: _LogSumExp, constraints: List[_LogSumExp]):
        self.objective = objective
        self.constraints = constraints

    def constraint_values(self, y: np.ndarray) -> np.ndarray:
        return np.array([c.value(y) for c in self.constraints])

    def value(self, y: np.ndarray, t: float) -> float:
        values = self.constraint_values(y)
        if values.size and np.any(values >= 0):
            return np.inf
        return t * self.objective.value(y) - float(np.sum(np.log(-values)))

    def derivatives(self, y: np.ndarray, t: float) -> Tuple[float, np.ndarray, np.ndarray]:
        f0, gradient, hessian = self.objective.derivatives(y)
        value, gradient, hessian = t * f0, t * gradient, t * hessian

        for constraint in self.constraints:
            fj, gj, hj = constraint.derivatives(y)
            value -= math.log(-fj)
            gradient = gradient + gj / -fj
            hessian = hessian + hj / -fj + np.outer(gj, gj) / fj**2

        return value, gradient, hessian

    def center(
        self,
        y: np.ndarray,
        t: float,
        tol: float,
        max_newton: int,
        stop: Optional[Callable[[np.ndarray], bool]] = None,
    ) -> np.ndarray:
        """Damped Newton minimization of the barrier at fixed ``t``."""
        armijo, backtrack = gp_defaults["armijo"], gp_defaults["backtrack"]

        for _ in range(max_newton):
            value, gradient, hessian = self.derivatives(y, t)
            step = _newton_direction(hessian, gradient)
            slope = float(gradient @ step)

            # Newton decrement
            if -slope / 2 <= tol:
                break

            s = 1.0
            while s > 1e-20 and self.value(y + s * step, t) > value + armijo * s * slope:
                s *= backtrack
            if s <= 1e-20:
                break

            y = y + s * step
            if stop is not None and stop(y):
                break

        return y


def _interior_point(
    barrier: _Barrier,
    y: np.ndarray,
    tol: float,
    max_newton: int,
    max_stages: int,
    stop: Optional[Callable[[np.ndarray], bool]] = None,
) -> Tuple[np.ndarray, bool, List[float]]:
    """Barrier stages with ``t`` growing geometrically until ``m / t < tol``."""
    m = len(barrier.constraints)
    growth = gp_defaults["growth"]

    if m == 0:
        return barrier.center(y, 1.0, tol, max_newton * max_stages), True, [0.0]

    t = 1.0
    history = []

    for stage in range(max_stages):
        y = barrier.center(y, t, tol, max_newton, stop)
        history.append(m / t)

        logger.debug(f"Barrier stage {stage}: gap {m / t:.3g}")

        if stop is not None and stop(y):
            return y, True, history
        if m / t < tol:
            return y, True, history
        t *= growth

    return y, False, history


def _phase_one(
    constraints: List[_LogSumExp], y: np.ndarray, tol: float, max_newton: int, max_stages: int
) -> np.ndarray:
    """Finds ``y`` with every constraint strictly negative, or raises.

    Minimizes a slack ``s`` subject to ``f_j(y) <= s``, which is again a
    geometric program in ``(y, s)``; the search stops as soon as ``s < 0``.
    """
    n = y.size
    shifted = [_LogSumExp(np.hstack([c.A, -np.ones((c.A.shape[0], 1))]), c.b) for c in constraints]
    slack = _LogSumExp(np.hstack([np.zeros((1, n)), np.ones((1, 1))]), np.zeros(1))

    start = max(c.value(y) for c in constraints) + 1.0
    z = np.append(y, start)

    def strictly_feasible(z: np.ndarray) -> bool:
        return max(c.value(z[:n]) for c in constraints) < 0

    z, _, _ = _interior_point(_Barrier(slack, shifted), z, tol, max_newton, max_stages, strictly_feasible)

    if not strictly_feasible(z):
        raise InfeasibleError("The geometric program has no strictly feasible point.")

    return z[:n]


def solve_gp(
    prog: GeometricProgram,
    tol: float = gp_defaults["tol"],
    max_iters: int = gp_defaults["max_stages"],
    initial: Optional[Mapping[str, float]] = None,
    max_newton: int = gp_defaults["max_newton"],
) -> GPSolution:
    """Solves a geometric program by a log-domain barrier method.

    With ``y = log(x)`` every posynomial becomes a convex log-sum-exp. A
    phase-1 search produces a strictly feasible start unless ``initial``
    already is one; the barrier parameter then grows tenfold per stage until
    the duality-gap surrogate ``m / t`` drops below ``tol``.

    Parameters
    ----------
    prog : GeometricProgram
        Program to solve.
    tol : float, default = 1e-9
        Target for the Newton decrement and the gap surrogate.
    max_iters : int, default = 30
        Maximum number of barrier stages.
    initial : Mapping[str, float], optional
        Positive starting point.
    max_newton : int, default = 50
        Maximum Newton steps per stage.

    Returns
    -------
    GPSolution
        Positive assignment, objective value, convergence flag and the gap
        surrogate after every stage.

    Raises
    ------
    InfeasibleError
        If phase 1 finds no strictly feasible point.

    Examples
    --------
    >>> from ehdecode.gp import GeometricProgram, Monomial, solve_gp
    >>> x = Monomial(1.0, {"x": 1})
    >>> solution = solve_gp(GeometricProgram(x, [2 * x**-1]))
    >>> round(solution.objective_value, 6)
    2.0
    """
    index = {v: i for i, v in enumerate(prog.variables)}
    objective = _LogSumExp.compile(prog.objective, index)
    constraints = [_LogSumExp.compile(c, index) for c in prog.constraints]

    y = np.zeros(len(index))
    if initial is not None:
        y = np.log(np.array([initial[v] for v in prog.variables], dtype=float))

    barrier = _Barrier(objective, constraints)
    if constraints and not np.all(barrier.constraint_values(y) < 0):
        y = _phase_one(constraints, y, tol, max_newton, max_iters)

    y, converged, history = _interior_point(barrier, y, tol, max_newton, max_iters)

    if not converged:
        warnings.warn(
            f"solve_gp stopped after {max_iters} barrier stages without converging.",
            NonConvergenceWarning,
        )

    assignment = {v: float(math.exp(y[i])) for v, i in index.items()}

    return GPSolution(assignment, float(math.exp(objective.value(y))), converged, history)
