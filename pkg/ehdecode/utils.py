from typing import Callable, List, NamedTuple, Sequence, Tuple

import numpy as np

# Relative tolerance used when comparing water levels
_LEVEL_RTOL = 1e-12


class _Stream(NamedTuple):
    """One cumulative constraint family seen by the staircase solver.

    ``cumulative`` holds the running budget, ``level`` maps an average
    per-slot budget to a rate and ``cost`` maps a rate back to its per-slot
    spending.
    """

    name: str
    cumulative: np.ndarray
    level: Callable[[np.ndarray], np.ndarray]
    cost: Callable[[float], float]


def _suffix_min(values: np.ndarray) -> np.ndarray:
    """Running minimum taken from the last entry backwards."""
    values = np.asarray(values, dtype=float)
    return np.minimum.accumulate(values[::-1])[::-1]


def _budget_from_cumulative(cumulative: np.ndarray) -> np.ndarray:
    """Per-slot budget equivalent to a cumulative bound for non-negative spending.

    Parameters
    ----------
    cumulative : numpy.ndarray
        Cumulative upper bounds, one per prefix.

    Returns
    -------
    numpy.ndarray
        Non-negative per-slot amounts whose running sum is the tightest
        non-decreasing envelope of ``cumulative``.
    """
    # Spending is non-negative, so only the suffix minimum of the bound matters
    envelope = np.clip(_suffix_min(cumulative), 0.0, None)

    return np.clip(np.diff(envelope, prepend=0.0), 0.0, None)


def _clip_roundoff(values: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Clips entries within ``atol`` below zero."""
    values = np.asarray(values, dtype=float)
    return np.where((values < 0.0) & (values >= -atol), 0.0, values)


def _binding_streams(levels: dict, end: int, rate: float) -> Tuple[str, ...]:
    threshold = rate + _LEVEL_RTOL * max(1.0, abs(rate))
    return tuple(name for name, level in levels.items() if level[end] <= threshold)


def _staircase(
    streams: Sequence[_Stream], n: int
) -> Tuple[np.ndarray, List[int], List[Tuple[str, ...]]]:
    """Builds the non-decreasing staircase policy under several cumulative families.

    Each segment starts right after the previous change point. For every
    candidate end slot the level of every stream is evaluated on the residual
    budget averaged over the candidate segment; the segment rate is the smallest
    of all these levels and the segment extends to the largest end slot that
    attains it.

    Parameters
    ----------
    streams : Sequence[_Stream]
        Constraint families sharing the same rate vector.
    n : int
        Number of slots.

    Returns
    -------
    tuple
        Rates, change points (starting with 0) and, per segment, the names of
        the streams whose level attains the segment rate.
    """
    rates = np.zeros(n)
    change_points = [0]
    binding = []

    # Budget already spent by each stream
    consumed = {stream.name: 0.0 for stream in streams}

    start = 0
    while start < n:
        lengths = np.arange(1, n - start + 1, dtype=float)

        # Level of every stream for every candidate end slot
        levels = {}
        for stream in streams:
            residual = stream.cumulative[start:] - consumed[stream.name]
            levels[stream.name] = np.asarray(
                stream.level(np.clip(residual, 0.0, None) / lengths), dtype=float
            )

        combined = np.min(np.vstack(list(levels.values())), axis=0)
        rate = max(float(combined.min()), 0.0)

        # Largest minimizer gives the longest constant stretch
        threshold = rate + _LEVEL_RTOL * max(1.0, abs(rate))
        offset = int(np.flatnonzero(combined <= threshold)[-1])
        end = start + offset + 1

        rates[start:end] = rate
        binding.append(_binding_streams(levels, offset, rate))

        if rate > 0.0:
            for stream in streams:
                consumed[stream.name] += (end - start) * float(stream.cost(rate))

        change_points.append(end)
        start = end

    return rates, change_points, binding
