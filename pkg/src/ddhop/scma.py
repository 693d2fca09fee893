"""Sparse code multiple access on the DD lattice, plus per-block resource hopping.

A group of J users shares its lattice partition through sparse codewords:
each codeword spans K bins with D nonzero entries on a fixed per-user
support.  Groups are mapped to partition slots by a seeded per-block
permutation that transmitter and receiver derive independently.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .ddcore import DDGrid

SUPPORT_EPS = 1e-12
ENERGY_TOL = 0.01


class CodebookError(ValueError):
    """A codebook file violated one of the structural invariants."""


# ----------------------------------------------------------------------------
# Codebook
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class ScmaCodebook:
    """Per-user tables of Q complex K-vectors with D nonzeros each."""

    J: int
    K: int
    Q: int
    D: int
    codewords: np.ndarray          # (J, Q, K) complex

    @property
    def bits_per_codeword(self) -> int:
        return int(np.log2(self.Q))

    @property
    def supports(self) -> tuple[tuple[int, ...], ...]:
        out = []
        for j in range(self.J):
            nz = np.abs(self.codewords[j]).max(axis=0) > SUPPORT_EPS
            out.append(tuple(int(i) for i in np.flatnonzero(nz)))
        return tuple(out)

    def bit_patterns(self) -> np.ndarray:
        """(Q, log2 Q) matrix: row q holds the bits that map to codeword q, MSB first."""
        nb = self.bits_per_codeword
        q = np.arange(self.Q)
        return np.stack([(q >> (nb - 1 - i)) & 1 for i in range(nb)], axis=1)

    def validate(self) -> None:
        if self.Q < 2 or self.Q & (self.Q - 1):
            raise CodebookError(f"Q must be a power of two, got {self.Q}")
        if self.codewords.shape != (self.J, self.Q, self.K):
            raise CodebookError(
                f"codeword table shape {self.codewords.shape} != ({self.J}, {self.Q}, {self.K})"
            )
        if self.J * self.D % self.K:
            raise CodebookError(
                f"degree J*D/K = {self.J}*{self.D}/{self.K} is not an integer"
            )
        degree = self.J * self.D // self.K
        usage = np.zeros(self.K, dtype=int)
        for j in range(self.J):
            nz = np.abs(self.codewords[j]) > SUPPORT_EPS
            per_cw = nz.sum(axis=1)
            if np.any(per_cw != self.D):
                raise CodebookError(
                    f"support: user {j} has codewords with {sorted(set(per_cw))} "
                    f"nonzeros, expected exactly {self.D}"
                )
            if np.any(nz != nz[0]):
                raise CodebookError(
                    f"support: user {j} codewords do not share one fixed support"
                )
            usage[nz[0]] += 1
        if np.any(usage != degree):
            raise CodebookError(
                f"degree: resource usage {usage.tolist()} != {degree} everywhere"
            )
        energy = np.mean(np.sum(np.abs(self.codewords) ** 2, axis=2), axis=1)
        worst = np.abs(energy - 1.0).max()
        if worst > ENERGY_TOL:
            raise CodebookError(
                f"energy: per-user mean codeword energy off by {worst:.3g} (> {ENERGY_TOL})"
            )


def build_phase_rotation_codebook(J: int = 6, K: int = 4, Q: int = 4,
                                  D: int = 2) -> ScmaCodebook:
    """Construct a PSK phase-rotation codebook with balanced resource degrees.

    Users colliding on a resource are separated by evenly spaced phase
    rotations inside one PSK symmetry sector; codeword indices are placed
    Gray-coded on the PSK ring.  This is the generator behind the shipped
    reference codebook file.
    """
    if J * D % K:
        raise CodebookError("J*D must be divisible by K")
    if J * D == K:
        supports = [tuple(range(j * D, (j + 1) * D)) for j in range(J)]
    else:
        all_combos = list(combinations(range(K), D))
        if J != len(all_combos):
            raise CodebookError(
                f"no support layout implemented for J={J}, K={K}, D={D}"
            )
        supports = all_combos

    degree = J * D // K
    rank_on_resource = {}
    for r in range(K):
        users_r = [j for j in range(J) if r in supports[j]]
        for i, j in enumerate(users_r):
            rank_on_resource[(j, r)] = i

    gray = np.arange(Q) ^ (np.arange(Q) >> 1)
    ring = np.exp(1j * (np.pi / Q + gray * 2 * np.pi / Q))
    sector = 2 * np.pi / Q

    cw = np.zeros((J, Q, K), dtype=np.complex128)
    for j in range(J):
        for d, r in enumerate(supports[j]):
            theta = rank_on_resource[(j, r)] * sector / degree
            cw[j, :, r] = ring * np.exp(1j * theta) / np.sqrt(D)
    book = ScmaCodebook(J=J, K=K, Q=Q, D=D, codewords=cw)
    book.validate()
    return book


def write_codebook(book: ScmaCodebook, path) -> None:
    with open(path, "w") as fh:
        fh.write("# ddhop SCMA codebook\n")
        fh.write("# labeling: natural binary, MSB first\n")
        fh.write(f"J {book.J}\nK {book.K}\nQ {book.Q}\nD {book.D}\n")
        for j in range(book.J):
            fh.write(f"user {j}\n")
            for q in range(book.Q):
                parts = []
                for k in range(book.K):
                    z = book.codewords[j, q, k]
                    parts.append(f"{z.real:.14e} {z.imag:.14e}")
                fh.write(" ".join(parts) + "\n")


def load_codebook(path, renormalize: bool = False) -> ScmaCodebook:
    """Parse and validate a codebook file; every invariant is checked at load."""
    header = {}
    rows: dict[int, list[list[complex]]] = {}
    current = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if tokens[0] in ("J", "K", "Q", "D"):
                header[tokens[0]] = int(tokens[1])
            elif tokens[0] == "user":
                current = int(tokens[1])
                rows[current] = []
            else:
                if current is None:
                    raise CodebookError(f"line {lineno}: codeword row before any 'user'")
                vals = [float(t) for t in tokens]
                if len(vals) % 2:
                    raise CodebookError(f"line {lineno}: odd number of floats")
                rows[current].append(
                    [complex(vals[2 * i], vals[2 * i + 1]) for i in range(len(vals) // 2)]
                )
    for key in ("J", "K", "Q", "D"):
        if key not in header:
            raise CodebookError(f"missing header field {key}")
    J, K, Q, D = header["J"], header["K"], header["Q"], header["D"]
    if sorted(rows) != list(range(J)):
        raise CodebookError(f"expected users 0..{J - 1}, found {sorted(rows)}")
    cw = np.zeros((J, Q, K), dtype=np.complex128)
    for j in range(J):
        if len(rows[j]) != Q or any(len(r) != K for r in rows[j]):
            raise CodebookError(f"user {j}: expected {Q} rows of {K} complex entries")
        cw[j] = np.array(rows[j])
    if renormalize:
        energy = np.mean(np.sum(np.abs(cw) ** 2, axis=2), axis=1)
        cw /= np.sqrt(energy)[:, None, None]
    book = ScmaCodebook(J=J, K=K, Q=Q, D=D, codewords=cw)
    book.validate()
    return book


def scma_encode(coded_bits: np.ndarray, user_index: int,
                book: ScmaCodebook) -> np.ndarray:
    """Map groups of log2(Q) bits (natural binary, MSB first) to codewords."""
    bits = np.asarray(coded_bits, dtype=np.int64).ravel()
    nb = book.bits_per_codeword
    if bits.size % nb:
        raise ValueError(f"bit count {bits.size} not divisible by log2(Q) = {nb}")
    groups = bits.reshape(-1, nb)
    weights = 1 << np.arange(nb - 1, -1, -1)
    indices = groups @ weights
    return book.codewords[user_index, indices, :]


def codeword_indices(coded_bits: np.ndarray, book: ScmaCodebook) -> np.ndarray:
    bits = np.asarray(coded_bits, dtype=np.int64).reshape(-1, book.bits_per_codeword)
    weights = 1 << np.arange(book.bits_per_codeword - 1, -1, -1)
    return bits @ weights


# ----------------------------------------------------------------------------
# Partitioning and hopping
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionScheme:
    """Equal split of one lattice axis into G group slots."""

    axis: str                       # "delay" (rows) or "doppler" (columns)
    G: int

    def __post_init__(self):
        if self.axis not in ("delay", "doppler"):
            raise ValueError(f"axis must be 'delay' or 'doppler', got {self.axis!r}")
        if self.G < 1:
            raise ValueError("G must be >= 1")

    def extent(self, grid: DDGrid) -> int:
        return grid.M if self.axis == "delay" else grid.N

    def slot_size(self, grid: DDGrid) -> int:
        ext = self.extent(grid)
        if ext % self.G:
            raise ValueError(
                f"{self.axis} extent {ext} not divisible into {self.G} equal slots"
            )
        return ext // self.G

    def slot_range(self, slot: int, grid: DDGrid) -> tuple[int, int]:
        size = self.slot_size(grid)
        if not 0 <= slot < self.G:
            raise ValueError(f"slot {slot} out of range")
        return slot * size, (slot + 1) * size

    def slot_of_index(self, axis_index: int, grid: DDGrid) -> int:
        return axis_index // self.slot_size(grid)


@dataclass(frozen=True)
class HopState:
    """Group -> slot assignment for one block; identical at tx and rx by seed."""

    seed: int
    block_index: int
    permutation: tuple[int, ...]

    @classmethod
    def derive(cls, seed: int, block_index: int, G: int,
               enabled: bool = True) -> "HopState":
        perm = gen_hop_permutation(seed, block_index, G) if enabled \
            else np.arange(G)
        return cls(seed=seed, block_index=block_index,
                   permutation=tuple(int(p) for p in perm))

    def slot_of_group(self, group: int) -> int:
        return self.permutation[group]


def gen_hop_permutation(seed: int, block_index: int, G: int) -> np.ndarray:
    """Uniform random permutation of {0..G-1}, deterministic in (seed, block)."""
    if G < 1:
        raise ValueError("G must be >= 1")
    rng = np.random.default_rng([int(seed), int(block_index)])
    return rng.permutation(G)


def sites_per_user(grid: DDGrid, scheme: PartitionScheme, K: int) -> int:
    slot = scheme.slot_size(grid)
    cross = grid.N if scheme.axis == "delay" else grid.M
    if cross % K:
        raise ValueError(f"{'Doppler' if scheme.axis == 'delay' else 'delay'} "
                         f"extent {cross} not divisible by K={K}")
    return (cross // K) * slot


def placement_map(scheme: PartitionScheme, hop: HopState, group: int,
                  grid: DDGrid, K: int) -> np.ndarray:
    """Global vector indices, shape (sites, K), of the group's codeword bins.

    Each codeword's K bins run across the partition axis (along Doppler for
    a delay partition and vice versa) at maximum stride.  Two effects: a
    single jammed row or column contains whole codewords of the one group
    owning that slot, and the K bins of a codeword sit in decorrelated
    fading instead of one coherence patch.  Sites iterate delay-fastest
    then Doppler.
    """
    slot = hop.slot_of_group(group)
    start, _stop = scheme.slot_range(slot, grid)
    size = scheme.slot_size(grid)
    out = np.empty((sites_per_user(grid, scheme, K), K), dtype=np.int64)
    s = 0
    if scheme.axis == "delay":
        if grid.N % K:
            raise ValueError(f"Doppler extent {grid.N} not divisible by K={K}")
        stride = grid.N // K
        for b in range(stride):
            cols = b + stride * np.arange(K)
            for r in range(size):
                out[s] = (start + r) + cols * grid.M
                s += 1
    else:
        if grid.M % K:
            raise ValueError(f"delay extent {grid.M} not divisible by K={K}")
        stride = grid.M // K
        for c in range(size):
            for b in range(stride):
                rows = b + stride * np.arange(K)
                out[s] = rows + (start + c) * grid.M
                s += 1
    return out


def allocate(codewords_per_user: list[np.ndarray], group: int,
             scheme: PartitionScheme, hop: HopState, grid: DDGrid,
             K: int) -> list[np.ndarray]:
    """Place each user's codeword sequence into its group's hopped slot.

    Users of the same group superpose on the same bins, so each returned
    (M, N) block is that user's own sparse contribution.
    """
    pmap = placement_map(scheme, hop, group, grid, K)
    n_sites = pmap.shape[0]
    blocks = []
    for cw in codewords_per_user:
        cw = np.asarray(cw, dtype=np.complex128)
        if cw.shape != (n_sites, K):
            raise ValueError(
                f"need exactly {n_sites} codewords of length {K}, got {cw.shape}"
            )
        vec = np.zeros(grid.size, dtype=np.complex128)
        vec[pmap.ravel()] = cw.ravel()
        blocks.append(grid.devectorize(vec))
    return blocks


def deallocate(dd_block: np.ndarray, scheme: PartitionScheme, hop: HopState,
               group: int, grid: DDGrid, K: int) -> np.ndarray:
    """Inverse of :func:`allocate`'s placement: extract (sites, K) bin values."""
    vec = grid.vectorize(np.asarray(dd_block, dtype=np.complex128))
    pmap = placement_map(scheme, hop, group, grid, K)
    return vec[pmap]


def placement_checksum(scheme: PartitionScheme, hop: HopState, grid: DDGrid,
                       K: int) -> int:
    """Checksum of every group's placement map; mismatched hop seeds show up here."""
    crc = 0
    for g in range(scheme.G):
        pmap = placement_map(scheme, hop, g, grid, K)
        crc = zlib.adler32(pmap.astype(np.int64).tobytes(), crc)
    return crc
