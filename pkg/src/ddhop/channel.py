"""Doubly-selective multiuser channels on the delay-Doppler lattice.

Each user sees P independent paths with complex Gaussian gains, uniform
delays, and Jakes-distributed Dopplers; both delay and Doppler taps may be
fractional.  The per-user DD-domain matrix is the composition

    H = sum_i  h_i * SFFT * Pi^{delay_i} * Delta^{doppler_i} * ISFFT

and the same path operators applied to the CP-stripped time block give the
time-domain route, so the two computations agree to numerical precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ddcore import DDGrid, LinearOperator, cyclic_shift_power, doppler_phase_power, isfft_tx, sfft_rx
from .otfsmodem import TimeBlock

SPEED_OF_LIGHT = 3e8

# Relative magnitude below which an entry of a realized channel matrix is
# treated as structurally zero when counting nonzeros.
SPARSITY_THRESHOLD = 1e-6


@dataclass(frozen=True)
class ChannelPath:
    """One propagation path: complex gain, delay in samples, Doppler in bins."""

    gain: complex
    delay_taps: float
    doppler_taps: float

    def __post_init__(self):
        if self.delay_taps < 0:
            raise ValueError("delay must be non-negative")


@dataclass(frozen=True)
class UserChannel:
    group: int
    user: int
    paths: tuple[ChannelPath, ...]

    def __post_init__(self):
        if not self.paths:
            raise ValueError("a user channel needs at least one path")

    @property
    def max_delay(self) -> float:
        return max(p.delay_taps for p in self.paths)


@dataclass(frozen=True)
class ChannelEnsemble:
    """Per-user channels for all U = G*J users, ordered group-major."""

    users: tuple[UserChannel, ...]
    G: int
    J: int

    def __post_init__(self):
        if len(self.users) != self.G * self.J:
            raise ValueError(f"expected {self.G * self.J} user channels, got {len(self.users)}")

    def user(self, g: int, j: int) -> UserChannel:
        return self.users[g * self.J + j]


@dataclass(frozen=True)
class ChannelConfig:
    paths_per_user: int = 5
    tau_max_samples: float = 2.0
    velocity_kmh: float = 120.0
    carrier_hz: float = 4e9
    block_fading: str = "per_block"       # per_block | fixed

    def __post_init__(self):
        if self.paths_per_user < 1:
            raise ValueError("paths_per_user must be >= 1")
        if self.tau_max_samples < 0:
            raise ValueError("tau_max_samples must be >= 0")
        if self.block_fading not in ("per_block", "fixed"):
            raise ValueError(f"unknown block_fading mode {self.block_fading!r}")

    def max_doppler_hz(self) -> float:
        return self.velocity_kmh / 3.6 * self.carrier_hz / SPEED_OF_LIGHT


def sample_channels(cfg: ChannelConfig, grid: DDGrid, G: int, J: int,
                    rng: np.random.Generator) -> ChannelEnsemble:
    """Draw an i.i.d. channel realization for all G*J users.

    Gains are complex Gaussian with per-component variance 1/(2*U*P), so the
    expected total path power per user is 1/U.  Delays are uniform in
    [0, tau_max]; Dopplers follow nu_max*cos(theta) with uniform angle.
    """
    U = G * J
    P = cfg.paths_per_user
    nu_max = cfg.max_doppler_hz()
    NT = grid.N * grid.T
    comp_std = np.sqrt(1.0 / (2.0 * U * P))

    users = []
    for g in range(G):
        for j in range(J):
            gains = comp_std * (rng.standard_normal(P) + 1j * rng.standard_normal(P))
            delays = rng.uniform(0.0, cfg.tau_max_samples, size=P)
            theta = rng.uniform(-np.pi, np.pi, size=P)
            dopplers = nu_max * np.cos(theta) * NT
            paths = tuple(
                ChannelPath(gain=complex(gains[i]), delay_taps=float(delays[i]),
                            doppler_taps=float(dopplers[i]))
                for i in range(P)
            )
            users.append(UserChannel(group=g, user=j, paths=paths))
    return ChannelEnsemble(users=tuple(users), G=G, J=J)


def _path_operators(user_channel: UserChannel, grid: DDGrid):
    ops = []
    for p in user_channel.paths:
        shift = cyclic_shift_power(p.delay_taps, grid.size)
        phase = doppler_phase_power(p.doppler_taps, grid.size)
        ops.append((p.gain, shift, phase))
    return ops


def _apply_paths(x: np.ndarray, ops) -> np.ndarray:
    acc = None
    for gain, shift, phase in ops:
        term = gain * shift.apply(phase.apply(x))
        acc = term if acc is None else acc + term
    return acc


def build_dd_channel_matrix(user_channel: UserChannel, grid: DDGrid) -> LinearOperator:
    """The user's MN x MN DD-domain channel as a fast FFT-composed operator."""
    ops = _path_operators(user_channel, grid)

    def apply_fn(x):
        return sfft_rx(_apply_paths(isfft_tx(x, grid), ops), grid)

    return LinearOperator(grid.size, apply_fn,
                          label=f"H[{user_channel.group},{user_channel.user}]")


def apply_channel_time(tx: TimeBlock, user_channel: UserChannel, grid: DDGrid) -> np.ndarray:
    """This user's contribution at the receiver, computed in the time domain.

    Operates on the CP-stripped circular block, so it matches the DD-matrix
    route exactly: demodulating the result equals applying the DD matrix to
    the transmitted DD block.
    """
    if tx.cp_len < int(np.ceil(user_channel.max_delay)):
        raise ValueError(
            f"cp_len {tx.cp_len} shorter than the channel delay spread "
            f"{user_channel.max_delay:.3f} samples"
        )
    payload = tx.payload
    if payload.shape[0] != grid.size:
        raise ValueError("payload length does not match the grid")
    return _apply_paths(np.asarray(payload, dtype=np.complex128),
                        _path_operators(user_channel, grid))


class StackedChannel:
    """Block-row operator [H_{1,1}, ..., H_{G,J}] acting on stacked user signals."""

    def __init__(self, ensemble: ChannelEnsemble, grid: DDGrid):
        self.ensemble = ensemble
        self.grid = grid
        self.user_ops = [build_dd_channel_matrix(u, grid) for u in ensemble.users]

    @property
    def n_users(self) -> int:
        return len(self.user_ops)

    def user_op(self, g: int, j: int) -> LinearOperator:
        return self.user_ops[g * self.ensemble.J + j]

    def apply(self, x_stacked: np.ndarray) -> np.ndarray:
        x_stacked = np.asarray(x_stacked, dtype=np.complex128)
        mn = self.grid.size
        if x_stacked.shape != (mn * self.n_users,):
            raise ValueError(
                f"stacked input must have length {mn * self.n_users}, got {x_stacked.shape}"
            )
        y = np.zeros(mn, dtype=np.complex128)
        for u, op in enumerate(self.user_ops):
            y += op.apply(x_stacked[u * mn:(u + 1) * mn])
        return y

    def nnz_census(self, threshold: float = SPARSITY_THRESHOLD) -> int:
        """Count entries of the stacked matrix above threshold * max|entry|.

        Materializes one user matrix at a time, so memory stays at one
        MN x MN block; sizes beyond the dense cap raise.
        """
        total = 0
        for op in self.user_ops:
            dense = op.materialize()
            peak = np.abs(dense).max()
            if peak == 0.0:
                continue
            total += int(np.count_nonzero(np.abs(dense) > threshold * peak))
        return total


def stack_full_matrix(ensemble: ChannelEnsemble, grid: DDGrid) -> StackedChannel:
    return StackedChannel(ensemble, grid)
