"""Experiment driver: seeded Monte Carlo over OTFS blocks, Eb/N0 x JNR sweeps,
hopped-vs-static comparison, and CSV results emission.

Every random draw is derived from (master_seed, role, block, user) so results
are independent of execution order and bit-reproducible.
"""

from __future__ import annotations

import csv
import importlib.resources
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from . import jamming, scma
from .channel import ChannelConfig, ChannelEnsemble, sample_channels, stack_full_matrix, apply_channel_time
from .ddcore import DDGrid, sfft_rx
from .fec import LdpcCode, extract_info, ldpc_encode, peg_construct
from .otfsmodem import default_cp_len, modulate
from .receiver import TurboConfig, interleave, turbo_receive
from .scma import HopState, PartitionScheme, ScmaCodebook, allocate, load_codebook, scma_encode, sites_per_user

# seed-derivation roles
ROLE_BITS = 1
ROLE_CHANNEL = 2
ROLE_NOISE = 3
ROLE_JAM = 4

CSV_COLUMNS = ["eb_n0_db", "jnr_db", "axis", "hop", "jammer", "group",
               "bits", "errors", "ber", "blocks", "seed", "runtime_s"]


class ConfigError(ValueError):
    """Inconsistent or malformed experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    # lattice
    M: int = 32
    N: int = 16
    delta_f: float = 15e3
    f_c: float = 4e9
    # users / partition
    J: int = 6
    groups: int = 4
    axis: str = "delay"
    hop_mode: str = "both"          # on | off | both (sweep runs both sides)
    hop_seed: int = 77
    # channel
    paths_per_user: int = 5
    tau_max_samples: float = 2.0
    velocity_kmh: float = 120.0
    block_fading: str = "per_block"
    # jamming
    jam_type: str = "pin"           # pin | nbi | none
    jam_count: int = 3
    jam_target_group: int = 0
    jam_xi: float | None = None
    jam_phi: float | None = None
    jam_gamma_phase: float | None = None
    jam_period_samples: int | None = None
    jam_offset_samples: int | None = None
    # codebook / code
    codebook_path: str | None = None
    code_n: int = 64
    code_seed: int = 11
    # receiver
    turbo_loops: int = 3
    detector_iters: int = 10
    damping: float = 0.5
    noise_var_mode: str = "residual"
    # sweep
    eb_n0_db: tuple[float, ...] = (4.0,)
    jnr_db: tuple[float, ...] = (0.0, 3.0, 6.0)
    blocks: int = 200
    master_seed: int = 2024

    def grid(self) -> DDGrid:
        return DDGrid(M=self.M, N=self.N, delta_f=self.delta_f, f_c=self.f_c)

    def scheme(self) -> PartitionScheme:
        return PartitionScheme(axis=self.axis, G=self.groups)

    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(paths_per_user=self.paths_per_user,
                             tau_max_samples=self.tau_max_samples,
                             velocity_kmh=self.velocity_kmh,
                             carrier_hz=self.f_c,
                             block_fading=self.block_fading)

    def receiver_config(self) -> TurboConfig:
        return TurboConfig(n_loops=self.turbo_loops, n_inner=self.detector_iters,
                           damping=self.damping,
                           noise_variance_mode=self.noise_var_mode)


def desk_preset(**overrides) -> ExperimentConfig:
    """CI-scale system: 32x16 lattice, 4 groups of 6 users, length-64 code."""
    return replace(ExperimentConfig(), **overrides)


def paper_preset(**overrides) -> ExperimentConfig:
    """Full-scale system: 128x16 lattice and the length-256 rate-1/2 code."""
    base = ExperimentConfig(M=128, N=16, code_n=256, blocks=1000,
                            eb_n0_db=(0.0, 2.0, 4.0, 6.0, 8.0),
                            jnr_db=(0.0, 3.0, 6.0))
    return replace(base, **overrides)


PRESETS = {"desk": desk_preset, "paper": paper_preset}


# ----------------------------------------------------------------------------
# Config file parsing: line-oriented "key = value"
# ----------------------------------------------------------------------------

_KEYMAP = {
    "grid.m": ("M", int),
    "grid.n": ("N", int),
    "grid.delta_f": ("delta_f", float),
    "grid.f_c": ("f_c", float),
    "users.j": ("J", int),
    "users.g": ("groups", int),
    "scheme.groups": ("groups", int),
    "scheme.axis": ("axis", str),
    "scheme.hop": ("hop_mode", str),
    "scheme.hop_seed": ("hop_seed", int),
    "channel.paths_per_user": ("paths_per_user", int),
    "channel.tau_max_samples": ("tau_max_samples", float),
    "channel.velocity_kmh": ("velocity_kmh", float),
    "channel.carrier_hz": ("f_c", float),
    "channel.block_fading": ("block_fading", str),
    "jam.type": ("jam_type", str),
    "jam.count": ("jam_count", int),
    "jam.target_group": ("jam_target_group", int),
    "jam.jnr_db": ("jnr_db", "float_list"),
    "jam.xi": ("jam_xi", float),
    "jam.phi": ("jam_phi", float),
    "jam.gamma_phase": ("jam_gamma_phase", float),
    "jam.period_samples": ("jam_period_samples", int),
    "jam.offset_samples": ("jam_offset_samples", int),
    "codebook.path": ("codebook_path", str),
    "code.n": ("code_n", int),
    "code.seed": ("code_seed", int),
    "rx.turbo_loops": ("turbo_loops", int),
    "rx.detector_iters": ("detector_iters", int),
    "rx.damping": ("damping", float),
    "rx.noise_var_mode": ("noise_var_mode", str),
    "sweep.eb_n0_db": ("eb_n0_db", "float_list"),
    "sweep.jnr_db": ("jnr_db", "float_list"),
    "run.blocks": ("blocks", int),
    "run.master_seed": ("master_seed", int),
}


def parse_config_file(path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base if base is not None else ExperimentConfig()
    updates = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            entry = _KEYMAP.get(key.lower())
            if entry is None:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            name, kind = entry
            if kind == "float_list":
                updates[name] = tuple(float(t) for t in value.split(","))
            elif kind is int:
                updates[name] = int(value)
            elif kind is float:
                updates[name] = float(value)
            else:
                updates[name] = value
    return replace(cfg, **updates)


def reference_codebook_path() -> str:
    return str(importlib.resources.files("ddhop").joinpath("data/codebook_j6_k4_q4.txt"))


def load_experiment_codebook(cfg: ExperimentConfig) -> ScmaCodebook:
    path = cfg.codebook_path or reference_codebook_path()
    return load_codebook(path)


def build_code(cfg: ExperimentConfig) -> LdpcCode:
    return peg_construct(cfg.code_n, dv=3, dc=6, seed=cfg.code_seed)


def validate_experiment(cfg: ExperimentConfig, book: ScmaCodebook,
                        code: LdpcCode) -> None:
    """Cross-module consistency checks, run before any block is simulated."""
    grid = cfg.grid()
    scheme = cfg.scheme()
    try:
        n_sites = sites_per_user(grid, scheme, book.K)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    coded_bits = n_sites * book.bits_per_codeword
    if coded_bits != code.n:
        raise ConfigError(
            f"coded bits per user per block ({coded_bits}) != code length ({code.n}); "
            f"adjust grid/groups/K or the code"
        )
    if cfg.jam_type not in ("pin", "nbi", "none"):
        raise ConfigError(f"unknown jam type {cfg.jam_type!r}")
    if cfg.jam_type == "nbi" and cfg.axis != "doppler":
        raise ConfigError("NBI targeting needs scheme.axis = doppler")
    if cfg.jam_type == "pin" and cfg.axis != "delay":
        raise ConfigError("PIN targeting needs scheme.axis = delay")
    if not 0 <= cfg.jam_target_group < cfg.groups:
        raise ConfigError("jam.target_group out of range")
    if cfg.hop_mode not in ("on", "off", "both"):
        raise ConfigError(f"scheme.hop must be on/off/both, got {cfg.hop_mode!r}")
    if cfg.blocks < 1:
        raise ConfigError("run.blocks must be >= 1")


# ----------------------------------------------------------------------------
# Power calibration
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerCalibration:
    signal_scale: float
    noise_var: float
    jam_power_total: float
    jam_power_each: float
    eb: float


def calibrate_powers(eb_n0_db: float, jnr_db: float, cfg: ExperimentConfig,
                     book: ScmaCodebook, code: LdpcCode) -> PowerCalibration:
    """Fix the noise and jamming powers for one operating point.

    Eb is the average received energy per information bit per user: the
    per-user block energy (unit-mean codewords, unit signal scale) passes
    through a channel whose expected path power is 1/U.  The per-sample
    noise variance follows from Eb/N0 and total jam power from JNR, split
    equally among the configured jammers.
    """
    grid = cfg.grid()
    n_sites = sites_per_user(grid, cfg.scheme(), book.K)
    mean_cw_energy = float(np.mean(np.sum(np.abs(book.codewords) ** 2, axis=2)))
    U = cfg.groups * cfg.J
    scale = 1.0
    eb = scale ** 2 * mean_cw_energy * n_sites / (U * code.k)
    noise_var = eb / 10.0 ** (eb_n0_db / 10.0)
    if noise_var <= 0:
        raise ConfigError("non-positive noise power")
    jam_total = 10.0 ** (jnr_db / 10.0) * noise_var
    n_jam = max(cfg.jam_count, 1)
    return PowerCalibration(signal_scale=scale, noise_var=noise_var,
                            jam_power_total=jam_total,
                            jam_power_each=jam_total / n_jam, eb=eb)


# ----------------------------------------------------------------------------
# Jammer realization
# ----------------------------------------------------------------------------

def draw_jammers(cfg: ExperimentConfig, cal: PowerCalibration,
                 grid: DDGrid) -> jamming.JammerSet:
    """Fixed-parameter jammers aimed at the target group's static slot.

    Geometry (tone index / impulse offset / phases) depends only on the
    master seed, so every operating point sees the same adversary with its
    power rescaled.
    """
    if cfg.jam_type == "none" or cfg.jam_count == 0:
        return jamming.JammerSet(specs=())
    scheme = cfg.scheme()
    specs = []
    used_rows: set[int] = set()
    for idx in range(cfg.jam_count):
        rng = np.random.default_rng([cfg.master_seed, ROLE_JAM, idx])
        if cfg.jam_type == "nbi":
            spec = jamming.draw_targeted_nbi(cfg.jam_target_group, scheme, grid,
                                             rng, cal.jam_power_each)
            if cfg.jam_xi is not None:
                spec = jamming.NbiSpec(b=spec.b, xi=cfg.jam_xi, phi=spec.phi)
            if cfg.jam_phi is not None:
                spec = jamming.NbiSpec(b=spec.b, xi=spec.xi, phi=cfg.jam_phi)
        else:
            # impulse trains take distinct start offsets (distinct delay rows)
            spec = jamming.draw_targeted_pin(
                cfg.jam_target_group, scheme, grid, rng, cal.jam_power_each,
                period_samples=cfg.jam_period_samples,
                exclude_rows=frozenset(used_rows))
            used_rows.add(spec.offset_samples % grid.M)
            if cfg.jam_offset_samples is not None:
                spec = jamming.PinSpec(gamma=spec.gamma,
                                       period_samples=spec.period_samples,
                                       offset_samples=cfg.jam_offset_samples)
            if cfg.jam_gamma_phase is not None:
                spec = jamming.PinSpec(
                    gamma=abs(spec.gamma) * np.exp(1j * cfg.jam_gamma_phase),
                    period_samples=spec.period_samples,
                    offset_samples=spec.offset_samples)
        specs.append(spec)
    return jamming.JammerSet(specs=tuple(specs))


# ----------------------------------------------------------------------------
# The Monte Carlo point
# ----------------------------------------------------------------------------

@dataclass
class BerRecord:
    eb_n0_db: float
    jnr_db: float
    axis: str
    hop: bool
    jammer: str
    target_group: int
    bits_jammed: int
    errors_jammed: int
    blocks: int
    seed: int
    runtime_s: float
    group_bits: np.ndarray
    group_errors: np.ndarray

    @property
    def ber_jammed(self) -> float:
        return self.errors_jammed / self.bits_jammed

    @property
    def ber_unjammed(self) -> float:
        others = [g for g in range(len(self.group_bits)) if g != self.target_group]
        bits = sum(int(self.group_bits[g]) for g in others)
        errs = sum(int(self.group_errors[g]) for g in others)
        return errs / bits if bits else 0.0

    def group_ber(self, g: int) -> float:
        return self.group_errors[g] / self.group_bits[g]


def run_point(cfg: ExperimentConfig, eb_n0_db: float, jnr_db: float,
              hop_on: bool, book: ScmaCodebook | None = None,
              code: LdpcCode | None = None) -> BerRecord:
    """Simulate one (Eb/N0, JNR, hop) operating point over cfg.blocks blocks."""
    t0 = time.perf_counter()
    book = book if book is not None else load_experiment_codebook(cfg)
    code = code if code is not None else build_code(cfg)
    validate_experiment(cfg, book, code)

    grid = cfg.grid()
    scheme = cfg.scheme()
    ch_cfg = cfg.channel_config()
    rx_cfg = cfg.receiver_config()
    cal = calibrate_powers(eb_n0_db, jnr_db, cfg, book, code)
    jammers = draw_jammers(cfg, cal, grid)
    G, J = cfg.groups, cfg.J
    U = G * J
    cp_len = default_cp_len(cfg.tau_max_samples)
    interleaver_seed = cfg.master_seed

    group_bits = np.zeros(G, dtype=np.int64)
    group_errors = np.zeros(G, dtype=np.int64)

    # jammers are fixed for the whole run, so their DD power profile is too
    jam_dd_power = None
    if jammers.specs:
        jam0 = jamming.gen_jam_block(jammers.specs, grid, block_index=0)
        jam_dd_power = np.abs(sfft_rx(jam0, grid)) ** 2

    fixed_ensemble: ChannelEnsemble | None = None
    if ch_cfg.block_fading == "fixed":
        rng_ch = np.random.default_rng([cfg.master_seed, ROLE_CHANNEL, 0])
        fixed_ensemble = sample_channels(ch_cfg, grid, G, J, rng_ch)

    for b in range(cfg.blocks):
        if fixed_ensemble is not None:
            ensemble = fixed_ensemble
        else:
            rng_ch = np.random.default_rng([cfg.master_seed, ROLE_CHANNEL, b])
            ensemble = sample_channels(ch_cfg, grid, G, J, rng_ch)
        hop = HopState.derive(cfg.hop_seed, b, G, enabled=hop_on)

        info_true = np.zeros((U, code.k), dtype=np.uint8)
        rx_time = np.zeros(grid.size, dtype=np.complex128)
        for g in range(G):
            cw_group = []
            for j in range(J):
                u = g * J + j
                rng_bits = np.random.default_rng([cfg.master_seed, ROLE_BITS, b, u])
                info = rng_bits.integers(0, 2, size=code.k).astype(np.uint8)
                info_true[u] = info
                coded = ldpc_encode(info, code)
                coded_int = interleave(coded, interleaver_seed, u)
                cw_group.append(cal.signal_scale *
                                scma_encode(coded_int, j, book))
            dd_blocks = allocate(cw_group, g, scheme, hop, grid, book.K)
            for j in range(J):
                u = g * J + j
                tx = modulate(dd_blocks[j], grid, cp_len=cp_len, block_index=b)
                rx_time += apply_channel_time(tx, ensemble.users[u], grid)

        rng_noise = np.random.default_rng([cfg.master_seed, ROLE_NOISE, b])
        noise = np.sqrt(cal.noise_var / 2.0) * (
            rng_noise.standard_normal(grid.size)
            + 1j * rng_noise.standard_normal(grid.size))
        rx_time += noise
        rx_time += jamming.gen_jam_block(jammers.specs, grid, block_index=b)

        y = sfft_rx(rx_time, grid)
        stacked = stack_full_matrix(ensemble, grid)
        result = turbo_receive(
            y, stacked, book, code, scheme, hop, rx_cfg,
            interleaver_seed=interleaver_seed, noise_var=cal.noise_var,
            signal_scale=cal.signal_scale, jam_dd_power=jam_dd_power)

        errs = (result.info_bits != info_true).sum(axis=1)
        for g in range(G):
            group_bits[g] += J * code.k
            group_errors[g] += int(errs[g * J:(g + 1) * J].sum())

    tgt = cfg.jam_target_group
    return BerRecord(
        eb_n0_db=eb_n0_db, jnr_db=jnr_db, axis=cfg.axis, hop=hop_on,
        jammer=cfg.jam_type, target_group=tgt,
        bits_jammed=int(group_bits[tgt]), errors_jammed=int(group_errors[tgt]),
        blocks=cfg.blocks, seed=cfg.master_seed,
        runtime_s=time.perf_counter() - t0,
        group_bits=group_bits, group_errors=group_errors)


# ----------------------------------------------------------------------------
# Sweeps and CSV persistence
# ----------------------------------------------------------------------------

def _row_key(eb, jnr, hop):
    return (f"{eb:.6g}", f"{jnr:.6g}", "on" if hop else "off")


def record_to_row(rec: BerRecord) -> list[str]:
    return [f"{rec.eb_n0_db:.6g}", f"{rec.jnr_db:.6g}", rec.axis,
            "on" if rec.hop else "off", rec.jammer, str(rec.target_group),
            str(rec.bits_jammed), str(rec.errors_jammed),
            f"{rec.ber_jammed:.10e}", str(rec.blocks), str(rec.seed),
            f"{rec.runtime_s:.3f}"]


def completed_keys(out_path) -> set:
    done = set()
    if out_path and os.path.exists(out_path):
        with open(out_path, newline="") as fh:
            for row in csv.DictReader(fh):
                done.add((row["eb_n0_db"], row["jnr_db"], row["hop"]))
    return done


def run_sweep(cfg: ExperimentConfig, hop_modes=(True, False),
              out_path=None, groups_path=None, resume: bool = True,
              progress=None) -> list[BerRecord]:
    """Cartesian product of (eb_n0, jnr, hop); appends rows as points finish.

    With `resume`, (eb_n0, jnr, hop) combinations already present in the
    CSV are skipped; partial results survive interruption.
    """
    book = load_experiment_codebook(cfg)
    code = build_code(cfg)
    validate_experiment(cfg, book, code)
    if out_path and groups_path is None:
        root, ext = os.path.splitext(str(out_path))
        groups_path = root + "_groups" + (ext or ".csv")

    done = completed_keys(out_path) if (resume and out_path) else set()
    new_file = not (out_path and os.path.exists(out_path) and
                    os.path.getsize(out_path) > 0)

    records = []
    for eb in cfg.eb_n0_db:
        for jnr in cfg.jnr_db:
            for hop_on in hop_modes:
                if _row_key(eb, jnr, hop_on) in done:
                    continue
                rec = run_point(cfg, eb, jnr, hop_on, book=book, code=code)
                records.append(rec)
                if out_path:
                    _append_rows(out_path, [record_to_row(rec)], new_file)
                    _append_group_rows(groups_path, rec, new_file)
                    new_file = False
                if progress is not None:
                    progress(rec)
    return records


def _append_rows(path, rows, write_header):
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if write_header:
            w.writerow(CSV_COLUMNS)
        w.writerows(rows)


GROUP_CSV_COLUMNS = ["eb_n0_db", "jnr_db", "axis", "hop", "jammer", "group",
                     "targeted", "bits", "errors", "ber", "blocks", "seed"]


def _append_group_rows(path, rec: BerRecord, write_header):
    if not path:
        return
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        if write_header:
            w.writerow(GROUP_CSV_COLUMNS)
        for g in range(len(rec.group_bits)):
            w.writerow([f"{rec.eb_n0_db:.6g}", f"{rec.jnr_db:.6g}", rec.axis,
                        "on" if rec.hop else "off", rec.jammer, str(g),
                        str(int(g == rec.target_group)),
                        str(int(rec.group_bits[g])), str(int(rec.group_errors[g])),
                        f"{rec.group_ber(g):.10e}", str(rec.blocks), str(rec.seed)])
