"""OTFS modulation with a rectangular waveform and one cyclic prefix per block."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ddcore import DDGrid, isfft_tx, sfft_rx


@dataclass(frozen=True)
class TimeBlock:
    """One transmitted block: cp_len guard samples followed by M*N payload samples."""

    samples: np.ndarray
    cp_len: int
    block_index: int = 0

    @property
    def payload(self) -> np.ndarray:
        return self.samples[self.cp_len:]


def default_cp_len(tau_max_samples: float) -> int:
    # One extra sample over the integer delay spread guards the interpolation
    # tails of fractional delays.
    return int(np.ceil(tau_max_samples)) + 1


def modulate(dd_block: np.ndarray, grid: DDGrid, cp_len: int = 0,
             block_index: int = 0) -> TimeBlock:
    """DD block -> time samples, prepending the last cp_len samples as a CP."""
    if cp_len < 0 or cp_len > grid.size:
        raise ValueError(f"cp_len {cp_len} outside [0, {grid.size}]")
    body = isfft_tx(grid.vectorize(dd_block), grid)
    if cp_len:
        samples = np.concatenate([body[-cp_len:], body])
    else:
        samples = body
    return TimeBlock(samples=samples, cp_len=cp_len, block_index=block_index)


def demodulate(received: TimeBlock, grid: DDGrid) -> np.ndarray:
    """Strip the CP and transform the payload back to an (M, N) DD block."""
    payload = received.payload
    if payload.shape[0] != grid.size:
        raise ValueError(
            f"payload has {payload.shape[0]} samples after CP strip, expected {grid.size}"
        )
    return grid.devectorize(sfft_rx(payload, grid))
