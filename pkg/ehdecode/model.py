import dataclasses
import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, List, Mapping, Optional, Sequence, Union

import numpy as np

from .axioms import FEASIBILITY_TOL, RATE_CAP, receiver_roles, roles


class DomainError(ValueError):
    """A rate, energy or noise parameter lies outside the admissible domain."""


class InfeasibleError(ValueError):
    """The requested problem (or starting point) admits no feasible policy."""


class UnsupportedConfigurationError(ValueError):
    """The solver does not handle the requested decoding function."""


class OracleSizeError(ValueError):
    """The brute-force oracle refuses an instance above its size guard."""


class NonConvergenceWarning(UserWarning):
    """An iterative solver stopped before converging."""


LOG_BASES = ("natural", "base2")

DECODING_KINDS = ("linear", "exponential", "inverse_g")

# Entries this far below zero are round-off and are clipped.
_ROUNDOFF = 1e-12


def _slot_vector(values: Any, name: str) -> np.ndarray:
    """Validates and freezes a per-slot vector of non-negative reals.

    Parameters
    ----------
    values : Any
        Sequence (or array) of per-slot amounts.
    name : str
        Name used in error messages.

    Returns
    -------
    numpy.ndarray
        Read-only float64 copy of the values.
    """
    array = np.array(values, dtype=float).ravel()

    if array.size == 0:
        raise ValueError(f"{name} needs at least one slot.")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} entries must be finite.")
    if np.any(array < -_ROUNDOFF):
        raise ValueError(f"{name} entries must be non-negative.")

    array = np.clip(array, 0.0, None)
    array.setflags(write=False)

    return array


def _as_float(template: Any, values: np.ndarray) -> Any:
    # Scalars in, scalars out
    if np.ndim(template) == 0:
        return float(values)
    return values


def _check_rates(rate: np.ndarray) -> None:
    if np.any(rate < -_ROUNDOFF):
        raise DomainError("Rates must be non-negative.")
    if np.any(rate > RATE_CAP):
        raise DomainError(f"Rates above the cap of {RATE_CAP} cannot be exponentiated.")


@dataclass(frozen=True, eq=False)
class EnergyProfile:
    """Per-slot energy harvested by one node."""

    amounts: Any

    def __post_init__(self):
        object.__setattr__(self, "amounts", _slot_vector(self.amounts, "EnergyProfile"))

    def __len__(self) -> int:
        return self.amounts.size

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.amounts)

    @property
    def total(self) -> float:
        return float(self.amounts.sum())

    @classmethod
    def from_cumulative(cls, cumulative: Any) -> "EnergyProfile":
        """Builds the profile whose running sum is ``cumulative``."""
        cumulative = np.asarray(cumulative, dtype=float)
        return cls(np.diff(cumulative, prepend=0.0))


@dataclass(frozen=True, eq=False)
class RatePolicy:
    """Per-slot rates (nats or bits per slot)."""

    rates: Any

    def __post_init__(self):
        object.__setattr__(self, "rates", _slot_vector(self.rates, "RatePolicy"))

    def __len__(self) -> int:
        return self.rates.size

    @property
    def total(self) -> float:
        return float(self.rates.sum())


@dataclass(frozen=True, eq=False)
class PowerPolicy:
    """Per-slot powers (energy per slot)."""

    powers: Any

    def __post_init__(self):
        object.__setattr__(self, "powers", _slot_vector(self.powers, "PowerPolicy"))

    def __len__(self) -> int:
        return self.powers.size

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.powers)


@dataclass(frozen=True)
class RateFunction:
    """Rate-power map ``g`` and its inverse ``f``.

    ``natural`` gives ``g(p) = log(1 + p)``; ``base2`` gives
    ``g(p) = 0.5 * log2(1 + p)``.
    """

    log_base: str = "natural"

    def __post_init__(self):
        if self.log_base not in LOG_BASES:
            raise ValueError(f"log_base must be one of {LOG_BASES}, got {self.log_base!r}.")

    @property
    def scale(self) -> float:
        # g(p) = scale * ln(1 + p)
        return 1.0 if self.log_base == "natural" else 0.5 / math.log(2.0)

    def g(self, power: Any) -> Any:
        p = np.asarray(power, dtype=float)
        if np.any(p < -_ROUNDOFF):
            raise DomainError("Powers must be non-negative.")
        return _as_float(power, self.scale * np.log1p(np.clip(p, 0.0, None)))

    def f(self, rate: Any) -> Any:
        r = np.asarray(rate, dtype=float)
        _check_rates(r)
        return _as_float(rate, np.expm1(np.clip(r, 0.0, None) / self.scale))


@dataclass(frozen=True)
class DecodingFunction:
    """Decoding power ``phi`` as a function of the incoming rate, and ``psi``.

    Parameters
    ----------
    kind : str, default = "inverse_g"
        One of ``linear`` (``a*r + b``), ``exponential`` (``c*base**(d*r) + e``)
        or ``inverse_g`` (``phi = g^-1``).
    a, b : float
        Linear parameters, ``a > 0`` and ``b >= 0``.
    c, d, e : float
        Exponential parameters, ``c > 0``, ``d > 0`` and ``c + e >= 0``.
    log_base : str, default = "natural"
        ``natural`` exponentiates with ``e``, ``base2`` with 2.
    """

    kind: str = "inverse_g"
    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    d: float = 1.0
    e: float = -1.0
    log_base: str = "natural"

    def __post_init__(self):
        if self.kind not in DECODING_KINDS:
            raise ValueError(f"kind must be one of {DECODING_KINDS}, got {self.kind!r}.")
        if self.log_base not in LOG_BASES:
            raise ValueError(f"log_base must be one of {LOG_BASES}, got {self.log_base!r}.")
        if self.kind == "linear" and not (self.a > 0 and self.b >= 0):
            raise ValueError("Linear decoding needs a > 0 and b >= 0.")
        if self.kind == "exponential" and not (
            self.c > 0 and self.d > 0 and self.c + self.e >= 0
        ):
            raise ValueError("Exponential decoding needs c > 0, d > 0 and c + e >= 0.")

    @classmethod
    def linear(cls, a: float, b: float = 0.0, log_base: str = "natural"):
        return cls(kind="linear", a=a, b=b, log_base=log_base)

    @classmethod
    def exponential(cls, c: float, d: float, e: float, log_base: str = "base2"):
        return cls(kind="exponential", c=c, d=d, e=e, log_base=log_base)

    @classmethod
    def inverse_g(cls, log_base: str = "natural"):
        return cls(kind="inverse_g", log_base=log_base)

    @property
    def _rate(self) -> RateFunction:
        return RateFunction(self.log_base)

    @property
    def _log_of_base(self) -> float:
        return 1.0 if self.log_base == "natural" else math.log(2.0)

    @property
    def is_inverse_rate(self) -> bool:
        """Whether ``phi`` coincides with ``g^-1`` for this log base."""
        if self.kind == "inverse_g":
            return True
        if self.kind != "exponential":
            return False
        d = 1.0 if self.log_base == "natural" else 2.0
        return self.c == 1.0 and self.e == -1.0 and self.d == d

    def phi(self, rate: Any) -> Any:
        r = np.asarray(rate, dtype=float)
        _check_rates(r)
        r = np.clip(r, 0.0, None)

        if self.kind == "linear":
            out = self.a * r + self.b
        elif self.kind == "exponential":
            out = self.c * np.exp(self.d * r * self._log_of_base) + self.e
        else:
            out = self._rate.f(r)

        return _as_float(rate, out)

    def psi(self, energy: Any) -> Any:
        """Largest rate whose decoding power does not exceed ``energy``.

        Energies below ``phi(0)`` map to rate 0.
        """
        y = np.clip(np.asarray(energy, dtype=float), 0.0, None)

        if self.kind == "linear":
            out = (y - self.b) / self.a
        elif self.kind == "exponential":
            ratio = np.maximum((y - self.e) / self.c, 1.0)
            out = np.log(ratio) / (self.d * self._log_of_base)
        else:
            out = self._rate.g(y)

        return _as_float(energy, np.clip(out, 0.0, None))


@dataclass(frozen=True)
class LinkModel:
    """Bundles the rate function pair (g, f) and decoding pair (phi, psi)."""

    rate: RateFunction = field(default_factory=RateFunction)
    decoding: DecodingFunction = field(default_factory=DecodingFunction)

    def __post_init__(self):
        if self.rate.log_base != self.decoding.log_base:
            raise ValueError(
                f"Rate function is {self.rate.log_base} but decoding function is "
                f"{self.decoding.log_base}; both must use the same log base."
            )

    @classmethod
    def inverse(cls, log_base: str = "natural") -> "LinkModel":
        """Link with ``phi = g^-1`` (the multi-user convention)."""
        return cls(RateFunction(log_base), DecodingFunction.inverse_g(log_base))

    @property
    def log_base(self) -> str:
        return self.rate.log_base

    def g(self, power: Any) -> Any:
        return self.rate.g(power)

    def f(self, rate: Any) -> Any:
        return self.rate.f(rate)

    def phi(self, rate: Any) -> Any:
        return self.decoding.phi(rate)

    def psi(self, energy: Any) -> Any:
        return self.decoding.psi(energy)


class Topology(str, enum.Enum):
    SINGLE_USER = "single_user"
    TWO_HOP = "two_hop"
    MAC = "mac"
    BC = "bc"


@dataclass(frozen=True, eq=False)
class Scenario:
    """A complete problem instance.

    Parameters
    ----------
    topology : Topology | str
        ``single_user``, ``two_hop``, ``mac`` or ``bc``.
    profiles : Mapping[str, EnergyProfile | Sequence[float]]
        Energy profiles keyed by role (``tx``, ``rx``, ``relay``, ``tx1``, ``tx2``,
        ``rx1``, ``rx2`` as the topology demands).
    link : LinkModel
        Rate and decoding functions.
    bc_noise_sigma2 : float, optional
        Noise variance of the weak BC receiver, must exceed 1.
    rx_has_battery : bool, default = True
        Single-user only: whether the receiver can store energy.
    """

    topology: Union[Topology, str]
    profiles: Mapping[str, Any]
    link: LinkModel = field(default_factory=LinkModel)
    bc_noise_sigma2: Optional[float] = None
    rx_has_battery: bool = True

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology(self.topology))
        profiles = {
            role: value if isinstance(value, EnergyProfile) else EnergyProfile(value)
            for role, value in self.profiles.items()
        }
        object.__setattr__(self, "profiles", MappingProxyType(profiles))

    @property
    def roles(self) -> Sequence[str]:
        return roles[self.topology.value]

    @property
    def slots(self) -> int:
        for role in self.roles:
            if role in self.profiles:
                return len(self.profiles[role])
        return len(next(iter(self.profiles.values())))

    def energy(self, role: str) -> np.ndarray:
        try:
            return self.profiles[role].amounts
        except KeyError:
            raise ValueError(f"Scenario has no {role!r} profile.") from None

    def cumulative(self, role: str) -> np.ndarray:
        return np.cumsum(self.energy(role))

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def with_profiles(self, **profiles) -> "Scenario":
        merged = dict(self.profiles)
        merged.update(profiles)
        return self.replace(profiles=merged)

    def swap_users(self) -> "Scenario":
        """Exchanges the two MAC transmitters."""
        if self.topology is not Topology.MAC:
            raise ValueError("Only MAC scenarios have two transmitters to swap.")
        return self.with_profiles(tx1=self.profiles["tx2"], tx2=self.profiles["tx1"])


def relax_receivers(scenario: Scenario, amount: float = 1e9) -> Scenario:
    """Replaces every receiver profile by a constant, effectively unlimited one.

    The result is the reference instance without decoding costs.

    Parameters
    ----------
    scenario : Scenario
        Instance to relax.
    amount : float, default = 1e9
        Energy per slot given to every receiver.

    Returns
    -------
    Scenario
        Relaxed instance.
    """
    relaxed = {
        role: np.full(len(profile), float(amount))
        for role, profile in scenario.profiles.items()
        if role in receiver_roles
    }
    return scenario.with_profiles(**relaxed)


def decoding_power(rate: float, link: LinkModel) -> float:
    """Decoding power ``phi(rate)`` spent by a receiver.

    Parameters
    ----------
    rate : float
        Incoming rate, non-negative.
    link : LinkModel
        Link whose decoding function is evaluated.

    Returns
    -------
    float
        Decoding power.

    Raises
    ------
    DomainError
        If the rate is negative or above the rate cap.
    """
    if np.any(np.asarray(rate, dtype=float) < 0):
        raise DomainError(f"Rate must be non-negative, got {rate}.")
    return link.phi(rate)


def decoding_energy(rates: Any, link: LinkModel) -> np.ndarray:
    """Per-slot decoding energy; idle slots (rate 0) cost nothing."""
    rates = np.asarray(rates, dtype=float)
    return np.where(rates > 0.0, link.phi(np.clip(rates, 0.0, None)), 0.0)


def cumulative_feasible(
    policy: Union[PowerPolicy, Any],
    profile: Union[EnergyProfile, Any],
    tol: float = FEASIBILITY_TOL,
) -> bool:
    """Checks the cumulative (causality) constraints of a spending schedule.

    Parameters
    ----------
    policy : PowerPolicy | array-like
        Energy spent per slot.
    profile : EnergyProfile | array-like
        Energy harvested per slot.
    tol : float, default = 1e-9
        Absolute slack allowed on every prefix.

    Returns
    -------
    bool
        Whether every prefix of spending is covered by the harvested prefix.
    """
    spent = policy.powers if isinstance(policy, PowerPolicy) else np.asarray(policy, float)
    harvested = (
        profile.amounts if isinstance(profile, EnergyProfile) else np.asarray(profile, float)
    )

    if spent.shape != harvested.shape:
        raise ValueError(
            f"Policy has {spent.size} slots but the profile has {harvested.size}."
        )

    return bool(np.all(np.cumsum(spent) <= np.cumsum(harvested) + tol))


def check_scenario(s: Scenario) -> List[str]:
    """Lists every violated scenario invariant.

    Parameters
    ----------
    s : Scenario
        Instance to check.

    Returns
    -------
    list of str
        Human-readable violations; empty when the scenario is well formed.
    """
    violations = []
    expected = s.roles

    for role in expected:
        if role not in s.profiles:
            violations.append(f"missing profile {role!r} for topology {s.topology.value}")
    for role in s.profiles:
        if role not in expected:
            violations.append(f"unexpected profile {role!r} for topology {s.topology.value}")

    lengths = {role: len(profile) for role, profile in s.profiles.items()}
    if len(set(lengths.values())) > 1:
        listed = ", ".join(f"{role}={n}" for role, n in lengths.items())
        violations.append(f"profile lengths differ: {listed}")

    if s.topology is Topology.BC:
        if s.bc_noise_sigma2 is None or not s.bc_noise_sigma2 > 1:
            violations.append(
                f"bc_noise_sigma2 must be > 1 for topology bc, got {s.bc_noise_sigma2}"
            )

    if not s.rx_has_battery and s.topology is not Topology.SINGLE_USER:
        violations.append("rx_has_battery=False is only defined for single_user")

    return violations


def validate_scenario(s: Scenario, topology: Union[Topology, str]) -> None:
    """Raises when ``s`` is not a well-formed instance of ``topology``.

    Raises
    ------
    DomainError
        If a BC scenario has ``bc_noise_sigma2 <= 1``.
    ValueError
        For any other violation reported by :func:`check_scenario`.
    """
    topology = Topology(topology)
    if s.topology is not topology:
        raise ValueError(f"Expected a {topology.value} scenario, got {s.topology.value}.")

    violations = check_scenario(s)
    if not violations:
        return

    if any(v.startswith("bc_noise_sigma2") for v in violations):
        raise DomainError("; ".join(violations))
    raise ValueError("; ".join(violations))
