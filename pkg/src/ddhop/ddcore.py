"""Delay-Doppler lattice geometry and the FFT-based linear operators.

Everything downstream composes the few primitives defined here: the
column-stacked vectorization of an M x N delay-Doppler block, the unitary
Doppler-axis (I)SFFT pair, and fractional powers of the cyclic shift and
progressive-phase matrices that model channel delay and Doppler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Dense realizations are for oracle testing only; refuse silly sizes.
DENSE_SIZE_LIMIT = 4096


@dataclass(frozen=True)
class DDGrid:
    """Delay-Doppler lattice: M delay bins x N Doppler bins.

    The symbol period is tied to the subcarrier spacing (T = 1/delta_f),
    so it is derived rather than stored.  Sample period is T/M and one
    block spans M*N samples.
    """

    M: int
    N: int
    delta_f: float = 15e3
    f_c: float = 4e9

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError(f"grid needs M >= 1 and N >= 1, got {self.M}x{self.N}")
        if self.delta_f <= 0:
            raise ValueError("subcarrier spacing must be positive")

    @property
    def T(self) -> float:
        return 1.0 / self.delta_f

    @property
    def T_s(self) -> float:
        return self.T / self.M

    @property
    def size(self) -> int:
        return self.M * self.N

    def vectorize(self, block: np.ndarray) -> np.ndarray:
        """Column-stack an (M, N) block: entry (alpha, beta) -> index alpha + beta*M."""
        block = np.asarray(block)
        if block.shape != (self.M, self.N):
            raise ValueError(f"block shape {block.shape} != ({self.M}, {self.N})")
        return block.reshape(self.size, order="F")

    def devectorize(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec)
        if vec.shape != (self.size,):
            raise ValueError(f"vector length {vec.shape} != {self.size}")
        return vec.reshape((self.M, self.N), order="F")


def _as_columns(x: np.ndarray, size: int) -> tuple[np.ndarray, bool]:
    """Accept (size,) or (size, B); return a (size, B) view plus a was-1d flag."""
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 1:
        if x.shape[0] != size:
            raise ValueError(f"vector length {x.shape[0]} != {size}")
        return x[:, None], True
    if x.ndim == 2 and x.shape[0] == size:
        return x, False
    raise ValueError(f"expected ({size},) or ({size}, B) array, got {x.shape}")


def sfft_rx(time_block: np.ndarray, grid: DDGrid) -> np.ndarray:
    """Receive-side transform to the DD domain: apply F_N (x) I_M.

    Unitary, so energy is preserved.  Equivalent to a row-wise N-point
    DFT of the devectorized block (right-multiplication by F_N).
    """
    x, was_1d = _as_columns(time_block, grid.size)
    cube = x.reshape(grid.M, grid.N, -1, order="F")
    out = np.fft.fft(cube, axis=1) / np.sqrt(grid.N)
    out = out.reshape(grid.size, -1, order="F")
    return out[:, 0] if was_1d else out


def isfft_tx(dd_vector: np.ndarray, grid: DDGrid) -> np.ndarray:
    """Transmit-side inverse of :func:`sfft_rx`: apply F_N^H (x) I_M."""
    x, was_1d = _as_columns(dd_vector, grid.size)
    cube = x.reshape(grid.M, grid.N, -1, order="F")
    out = np.fft.ifft(cube, axis=1) * np.sqrt(grid.N)
    out = out.reshape(grid.size, -1, order="F")
    return out[:, 0] if was_1d else out


class LinearOperator:
    """A square complex operator with a fast apply rule.

    `apply` accepts an (n,) vector or an (n, B) batch of columns.  A dense
    realization (for oracle tests) is built by applying the operator to
    the identity; sizes above DENSE_SIZE_LIMIT are refused.
    """

    def __init__(self, size: int, apply_fn, label: str = ""):
        if size < 1:
            raise ValueError("operator size must be >= 1")
        self.size = size
        self._apply = apply_fn
        self.label = label

    def apply(self, x: np.ndarray) -> np.ndarray:
        x, was_1d = _as_columns(x, self.size)
        out = self._apply(x)
        return out[:, 0] if was_1d else out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    def materialize(self) -> np.ndarray:
        if self.size > DENSE_SIZE_LIMIT:
            raise ValueError(
                f"dense mode capped at {DENSE_SIZE_LIMIT}, operator has size {self.size}"
            )
        return self._apply(np.eye(self.size, dtype=np.complex128))

    def compose(self, other: "LinearOperator") -> "LinearOperator":
        """self after other: (self.compose(other))(x) == self(other(x))."""
        if other.size != self.size:
            raise ValueError("composed operators must share a size")
        return LinearOperator(
            self.size,
            lambda x: self._apply(other._apply(x)),
            label=f"{self.label}*{other.label}",
        )


def cyclic_shift_power(x_exponent: float, size: int) -> LinearOperator:
    """Fractional power Pi^x of the forward cyclic shift.

    Pi maps e_c to e_{c+1 (mod size)}.  Fractional powers are defined in
    the DFT eigenbasis with unnormalized frequency indices m = 0..size-1:

        Pi^x = F^H diag(exp(-2j pi x m / size)) F

    which reduces to the exact x-step shift for integer x and to periodic
    band-limited interpolation otherwise.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    x_exponent = float(x_exponent)
    if x_exponent == int(x_exponent):
        steps = int(x_exponent) % size

        def apply_int(v, steps=steps):
            return np.roll(v, steps, axis=0)

        return LinearOperator(size, apply_int, label=f"Pi^{x_exponent:g}")

    phase = np.exp(-2j * np.pi * x_exponent * np.arange(size) / size)[:, None]

    def apply_frac(v, phase=phase):
        return np.fft.ifft(np.fft.fft(v, axis=0) * phase, axis=0)

    return LinearOperator(size, apply_frac, label=f"Pi^{x_exponent:g}")


def doppler_phase_power(x_exponent: float, size: int) -> LinearOperator:
    """Power Delta^x of the progressive phase ramp diag(exp(2j pi c / size)).

    Diagonal, so any real power is a direct exponent scaling; all entries
    stay unit modulus.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    diag = np.exp(2j * np.pi * x_exponent * np.arange(size) / size)[:, None]
    return LinearOperator(size, lambda v: diag * v, label=f"Delta^{x_exponent:g}")


def dft_matrix(n: int) -> np.ndarray:
    """Unitary n-point DFT matrix (symmetric)."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)
