import enum
import logging
from dataclasses import dataclass, field
from typing import Any, List, Sequence, Tuple, Union

import numpy as np

from .axioms import RATE_CAP
from .model import EnergyProfile, LinkModel, PowerPolicy, RatePolicy
from .utils import _staircase, _Stream
from .waterfill import _directional_fill

logger = logging.getLogger(__name__)


class Binding(str, enum.Enum):
    """Constraint family that ends a constant-rate segment."""

    TX_ENERGY = "tx_energy"
    RX_ENERGY = "rx_energy"
    BOTH = "both"
    DATA = "data"


@dataclass(frozen=True, eq=False)
class StaircaseSolution:
    """Non-decreasing piecewise-constant rate policy.

    Parameters
    ----------
    rates : RatePolicy
        Rate per slot.
    change_points : list of int
        Segment boundaries ``0 = i_0 < i_1 < ... = N``; segment ``n`` covers
        slots ``i_{n-1}`` to ``i_n - 1`` (0-based).
    binding : list of Binding
        Family attaining the segment rate, one per segment.
    """

    rates: RatePolicy
    change_points: List[int]
    binding: List[Binding] = field(default_factory=list)

    @property
    def throughput(self) -> float:
        return self.rates.total

    @property
    def segments(self) -> List[Tuple[int, int, float, Binding]]:
        """``(start, stop, rate, binding)`` per segment, ``stop`` exclusive."""
        bounds = zip(self.change_points[:-1], self.change_points[1:])
        return [
            (start, stop, float(self.rates.rates[start]), binding)
            for (start, stop), binding in zip(bounds, self.binding)
        ]


def _as_profile(profile: Union[EnergyProfile, Sequence[float]]) -> EnergyProfile:
    return profile if isinstance(profile, EnergyProfile) else EnergyProfile(profile)


def _classify(names: Tuple[str, ...]) -> Binding:
    if "data" in names:
        return Binding.DATA
    if "tx" in names and "rx" in names:
        return Binding.BOTH
    if "tx" in names:
        return Binding.TX_ENERGY
    return Binding.RX_ENERGY


def _energy_streams(tx_cumulative: np.ndarray, rx_cumulative: np.ndarray, link: LinkModel) -> List[_Stream]:
    """Transmitter (g-level) and receiver (psi-level) constraint families."""
    return [
        _Stream("tx", tx_cumulative, link.g, link.f),
        _Stream("rx", rx_cumulative, link.psi, link.phi),
    ]


def _solve_staircase(streams: List[_Stream], n: int) -> StaircaseSolution:
    rates, change_points, names = _staircase(streams, n)
    return StaircaseSolution(
        RatePolicy(rates), change_points, [_classify(binding) for binding in names]
    )


def solve_single_user(
    tx: Union[EnergyProfile, Sequence[float]],
    rx: Union[EnergyProfile, Sequence[float]],
    link: LinkModel = LinkModel(),
) -> StaircaseSolution:
    """Computes the throughput-optimal single-user rate policy.

    Every segment rate is the smaller of two water levels taken over the
    candidate segment: ``g`` of the transmitter's average residual energy
    and ``psi`` of the receiver's average residual decoding energy. The
    segment ends at the largest slot attaining the minimum, so the rates
    never decrease.

    Parameters
    ----------
    tx : EnergyProfile | Sequence[float]
        Energy harvested by the transmitter.
    rx : EnergyProfile | Sequence[float]
        Energy harvested by the receiver.
    link : LinkModel
        Rate and decoding functions.

    Returns
    -------
    StaircaseSolution
        Rates, change points and the binding family of every segment.

    Examples
    --------
    >>> from ehdecode.single_user import solve_single_user
    >>> solve_single_user([2, 2, 1, 2.5, 0.5], [1, 1, 0.5, 2.5, 3]).rates.rates.round(4)
    array([0.6061, 0.6061, 0.6061, 1.2528, 1.3863])
    """
    tx, rx = _as_profile(tx), _as_profile(rx)

    if len(tx) != len(rx):
        raise ValueError(f"Transmitter has {len(tx)} slots but the receiver has {len(rx)}.")

    solution = _solve_staircase(_energy_streams(tx.cumulative, rx.cumulative, link), len(tx))

    logger.debug(f"Single-user change points {solution.change_points}")

    return solution


def no_battery_caps(rx: Union[EnergyProfile, Sequence[float]], link: LinkModel) -> np.ndarray:
    """Largest power per slot a battery-less receiver can decode, ``f(psi(E_rx))``."""
    levels = np.asarray(link.psi(_as_profile(rx).amounts), dtype=float)

    caps = np.full(levels.size, np.inf)
    finite = levels <= RATE_CAP
    caps[finite] = link.f(levels[finite])

    return caps


def solve_single_user_no_battery(
    tx: Union[EnergyProfile, Sequence[float]],
    rx: Union[EnergyProfile, Sequence[float]],
    link: LinkModel = LinkModel(),
) -> RatePolicy:
    """Computes the optimal policy when the receiver cannot store energy.

    The receiver can only decode what the energy of the current slot pays
    for, which caps every slot's power at ``f(psi(E_rx))``. Transmitter energy
    is water-filled forward under these caps; water a capped slot cannot hold
    moves on to later slots and is wasted after the last one.

    Parameters
    ----------
    tx : EnergyProfile | Sequence[float]
        Energy harvested by the transmitter.
    rx : EnergyProfile | Sequence[float]
        Energy harvested by the receiver per slot.
    link : LinkModel
        Rate and decoding functions.

    Returns
    -------
    RatePolicy
        Rate per slot.
    """
    tx, rx = _as_profile(tx), _as_profile(rx)

    if len(tx) != len(rx):
        raise ValueError(f"Transmitter has {len(tx)} slots but the receiver has {len(rx)}.")

    powers, wasted = _directional_fill(np.ones(len(tx)), tx.amounts, no_battery_caps(rx, link))

    if wasted > 0:
        logger.debug(f"Battery-less receiver: {wasted:.3g} units of transmit energy wasted")

    return RatePolicy(link.g(powers))


def rates_to_powers(rates: Union[RatePolicy, Any], link: LinkModel) -> PowerPolicy:
    """Transmit power ``f(r)`` per slot."""
    rates = rates.rates if isinstance(rates, RatePolicy) else np.asarray(rates, dtype=float)
    return PowerPolicy(link.f(rates))
