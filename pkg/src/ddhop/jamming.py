"""Narrowband and periodic-impulse jammers and their DD-domain footprints.

A single-tone jammer at an integer frequency index lands in exactly one
Doppler column of the DD grid; a periodic impulse train whose period equals
the block duration lands in exactly one delay row.  Those footprints are
what make row/column partitions of a static allocation easy prey, and what
the per-block hopping defeats.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ddcore import DDGrid, sfft_rx
from .scma import PartitionScheme


@dataclass(frozen=True)
class NbiSpec:
    """Single complex tone: amplitude b, frequency index xi (frequency
    xi*delta_f/N), phase phi."""

    b: float
    xi: float
    phi: float = 0.0

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("amplitude must be >= 0")

    def per_sample_power(self, grid: DDGrid) -> float:
        return self.b ** 2


@dataclass(frozen=True)
class PinSpec:
    """Periodic impulse train.

    `gamma` is the per-element DD-domain response of one impulse: the
    footprint row carries elements of magnitude |gamma| under the unitary
    receive transform, which puts the time-domain impulse amplitude at
    gamma * sqrt(N).  Offset and period are in samples of the CP-stripped
    receive stream; the default period of one full block keeps every
    impulse on the same delay row.
    """

    gamma: complex
    period_samples: int
    offset_samples: int

    def __post_init__(self):
        if self.period_samples < 1:
            raise ValueError("period must be >= 1 sample")
        if not 0 <= self.offset_samples < self.period_samples:
            raise ValueError("offset must lie in [0, period)")

    def impulse_amplitude(self, grid: DDGrid) -> complex:
        return self.gamma * np.sqrt(grid.N)

    def impulse_positions(self, grid: DDGrid, block_index: int = 0) -> np.ndarray:
        """Sample indices of impulses inside the given block, receiver clock."""
        start = block_index * grid.size
        first = -(start - self.offset_samples) % self.period_samples
        return np.arange(first, grid.size, self.period_samples, dtype=np.int64)

    def per_sample_power(self, grid: DDGrid) -> float:
        n_imp = len(self.impulse_positions(grid, 0))
        return abs(self.impulse_amplitude(grid)) ** 2 * n_imp / grid.size


JammerSpec = NbiSpec | PinSpec


def gen_nbi(spec: NbiSpec, grid: DDGrid) -> np.ndarray:
    """b * exp(j(2 pi xi c / MN + phi)) for c = 0..MN-1."""
    c = np.arange(grid.size)
    return spec.b * np.exp(1j * (2 * np.pi * spec.xi * c / grid.size + spec.phi))


def gen_pin(spec: PinSpec, grid: DDGrid, block_index: int = 0) -> np.ndarray:
    """Impulse train restricted to one block; positions follow the global clock."""
    jam = np.zeros(grid.size, dtype=np.complex128)
    jam[spec.impulse_positions(grid, block_index)] = spec.impulse_amplitude(grid)
    return jam


def gen_jam_block(specs, grid: DDGrid, block_index: int = 0) -> np.ndarray:
    """Superpose all jammers' time-domain signals for one block."""
    total = np.zeros(grid.size, dtype=np.complex128)
    for spec in specs:
        if isinstance(spec, NbiSpec):
            total += gen_nbi(spec, grid)
        elif isinstance(spec, PinSpec):
            total += gen_pin(spec, grid, block_index)
        else:
            raise TypeError(f"unknown jammer spec {type(spec)!r}")
    return total


def dd_footprint(time_jam: np.ndarray, grid: DDGrid) -> np.ndarray:
    """DD-domain image of a time-domain jamming block, as seen after demodulation."""
    return grid.devectorize(sfft_rx(np.asarray(time_jam, dtype=np.complex128), grid))


# ----------------------------------------------------------------------------
# Hit-set prediction (no simulation)
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class HitPrediction:
    """Groups whose static slot the jammer lands in; `spread` marks jammers
    whose footprint has no single row/column (e.g. non-integer tone index)."""

    groups: frozenset[int]
    spread: bool = False


def predict_hit_set(jammer: JammerSpec, partition: PartitionScheme,
                    grid: DDGrid) -> HitPrediction:
    all_groups = frozenset(range(partition.G))
    if isinstance(jammer, NbiSpec):
        if jammer.xi != int(jammer.xi):
            return HitPrediction(groups=all_groups, spread=True)
        if partition.axis != "doppler":
            # a full Doppler column crosses every delay slot
            return HitPrediction(groups=all_groups)
        col = int(jammer.xi) % grid.N
        return HitPrediction(groups=frozenset({partition.slot_of_index(col, grid)}))
    if isinstance(jammer, PinSpec):
        if partition.axis != "delay":
            return HitPrediction(groups=all_groups)
        rows = {int(p % grid.M) for p in jammer.impulse_positions(grid, 0)}
        slots = {partition.slot_of_index(r, grid) for r in rows}
        return HitPrediction(groups=frozenset(slots))
    raise TypeError(f"unknown jammer spec {type(jammer)!r}")


# ----------------------------------------------------------------------------
# Power calibration and targeted parameter draws
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class JammerSet:
    """A collection of jammers with per-sample power bookkeeping."""

    specs: tuple[JammerSpec, ...] = field(default_factory=tuple)

    def total_per_sample_power(self, grid: DDGrid) -> float:
        return float(sum(s.per_sample_power(grid) for s in self.specs))


def nbi_amplitude_for_power(per_sample_power: float) -> float:
    return float(np.sqrt(per_sample_power))


def pin_gamma_for_power(per_sample_power: float, grid: DDGrid,
                        period_samples: int) -> float:
    """|gamma| that puts the impulse train at the requested per-sample power."""
    n_imp = len(np.arange(0, grid.size, period_samples))
    amp = np.sqrt(per_sample_power * grid.size / n_imp)
    return float(amp / np.sqrt(grid.N))


def draw_targeted_nbi(target_group: int, scheme: PartitionScheme, grid: DDGrid,
                      rng: np.random.Generator, per_sample_power: float) -> NbiSpec:
    """NBI whose footprint column lies inside the target group's static slot.

    The tone index is drawn from the full [0, M-1] range, restricted to
    indices that fold onto the slot's Doppler columns.
    """
    if scheme.axis != "doppler":
        raise ValueError("NBI targeting assumes a Doppler partition")
    lo, hi = scheme.slot_range(target_group, grid)
    candidates = [xi for xi in range(grid.M) if lo <= xi % grid.N < hi]
    if not candidates:
        raise ValueError("no tone index folds into the target slot")
    xi = int(rng.choice(candidates))
    phi = float(rng.uniform(-np.pi, np.pi))
    return NbiSpec(b=nbi_amplitude_for_power(per_sample_power), xi=xi, phi=phi)


def draw_targeted_pin(target_group: int, scheme: PartitionScheme, grid: DDGrid,
                      rng: np.random.Generator, per_sample_power: float,
                      period_samples: int | None = None,
                      exclude_rows=()) -> PinSpec:
    """PIN whose impulse row lies inside the target group's static slot.

    `exclude_rows` lets a set of jammers pick distinct delay rows.
    """
    if scheme.axis != "delay":
        raise ValueError("PIN targeting assumes a delay partition")
    period = grid.size if period_samples is None else int(period_samples)
    lo, hi = scheme.slot_range(target_group, grid)
    candidates = [c for c in range(min(period, grid.size))
                  if lo <= c % grid.M < hi and (c % grid.M) not in exclude_rows]
    if not candidates:
        raise ValueError("no impulse offset folds into the target slot")
    offset = int(rng.choice(candidates))
    gamma_mag = pin_gamma_for_power(per_sample_power, grid, period)
    phase = float(rng.uniform(-np.pi, np.pi))
    return PinSpec(gamma=gamma_mag * np.exp(1j * phase),
                   period_samples=period, offset_samples=offset)
