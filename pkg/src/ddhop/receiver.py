"""Turbo receiver: Gaussian-approximation EP detection over the stacked
DD-domain model y = Hx + w, exchanging extrinsic LLRs with the LDPC decoder.

The detector treats each SCMA codeword as one discrete variable with Q
hypotheses spanning its D active bins.  A serial schedule visits every
variable once per inner iteration: subtract the other variables' means from
y, weight the residual by the cavity variance, score the Q candidates
against it (plus the decoder's prior), project the discrete posterior to a
Gaussian, and damp the update.  An exhaustive exact-MAP oracle is provided
for tiny instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numba import njit

from .channel import SPARSITY_THRESHOLD, StackedChannel
from .ddcore import DDGrid
from .fec import LLR_CLIP, LdpcCode, bp_decode, extract_info
from .scma import HopState, PartitionScheme, ScmaCodebook, placement_map

VAR_FLOOR = 1e-12
ORACLE_MAX_HYPOTHESES = 1 << 20


# ----------------------------------------------------------------------------
# Interleaving
# ----------------------------------------------------------------------------

def interleave_permutation(seed: int, user: int, length: int) -> np.ndarray:
    rng = np.random.default_rng([int(seed), 104729, int(user), int(length)])
    return rng.permutation(length)


def interleave(x: np.ndarray, seed: int, user: int) -> np.ndarray:
    x = np.asarray(x)
    return x[interleave_permutation(seed, user, x.shape[0])]


def deinterleave(x: np.ndarray, seed: int, user: int) -> np.ndarray:
    x = np.asarray(x)
    out = np.empty_like(x)
    out[interleave_permutation(seed, user, x.shape[0])] = x
    return out


# ----------------------------------------------------------------------------
# Detector model: per-variable channel columns and candidate tables
# ----------------------------------------------------------------------------

class DetectorModel:
    """Receiver-side view of one block: bipartite structure between receive
    bins and (user, codeword-site) variables, under a known hop state.

    Per-variable channel columns are held in a CSR-like layout (indptr into
    flat row-index / coefficient arrays) so the serial sweep can run as one
    compiled kernel.  Columns are truncated at the same relative threshold
    the channel census uses, which makes the per-variable footprint exactly
    the nonzero structure the complexity claim counts.
    """

    def __init__(self, stacked: StackedChannel, book: ScmaCodebook,
                 scheme: PartitionScheme, hop: HopState, grid: DDGrid,
                 signal_scale: float = 1.0,
                 truncate: float = SPARSITY_THRESHOLD):
        self.grid = grid
        self.book = book
        self.n_users = stacked.n_users
        self.bit_patterns = book.bit_patterns()
        self.Q = book.Q
        self.D = book.D
        supports = book.supports
        mn = grid.size

        idx_parts: list[np.ndarray] = []
        p_parts: list[np.ndarray] = []
        cands: list[np.ndarray] = []
        var_user: list[int] = []
        var_site: list[int] = []
        for u, uch in enumerate(stacked.ensemble.users):
            pmap = placement_map(scheme, hop, uch.group, grid, book.K)
            support = np.array(supports[uch.user], dtype=np.int64)
            active = pmap[:, support]                       # (sites, D)
            onehot = np.zeros((mn, active.size), dtype=np.complex128)
            onehot[active.ravel(), np.arange(active.size)] = 1.0
            cols = stacked.user_ops[u].apply(onehot)        # (mn, sites*D)
            cand = signal_scale * book.codewords[uch.user][:, support].T.copy()
            for s in range(pmap.shape[0]):
                P = cols[:, s * self.D:(s + 1) * self.D]
                mags = np.abs(P)
                peak = mags.max()
                keep = np.flatnonzero((mags > truncate * peak).any(axis=1)) \
                    if peak > 0 else np.arange(mn)
                idx_parts.append(keep.astype(np.int64))
                p_parts.append(np.ascontiguousarray(P[keep]))
                cands.append(cand)
                var_user.append(u)
                var_site.append(s)

        self.n_vars = len(idx_parts)
        self.sites_per_user = self.n_vars // self.n_users
        self.indptr = np.zeros(self.n_vars + 1, dtype=np.int64)
        np.cumsum([part.size for part in idx_parts], out=self.indptr[1:])
        self.idx = np.concatenate(idx_parts)
        self.P = np.concatenate(p_parts, axis=0)
        self.W = np.abs(self.P) ** 2
        self.cand = np.ascontiguousarray(np.stack(cands))   # (V, D, Q)
        self.var_user = np.array(var_user, dtype=np.int64)
        self.var_site = np.array(var_site, dtype=np.int64)
        # variable index of each CSR row, for vectorized state init
        self.row_var = np.repeat(np.arange(self.n_vars), np.diff(self.indptr))

    def var_slice(self, user: int) -> slice:
        return slice(user * self.sites_per_user, (user + 1) * self.sites_per_user)

    def var_columns(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """(receive-bin indices, coefficient block) of one variable."""
        sl = slice(self.indptr[v], self.indptr[v + 1])
        return self.idx[sl], self.P[sl]


def prior_logits_from_bit_llrs(bit_llrs: np.ndarray | None,
                               bit_patterns: np.ndarray,
                               n_vars: int) -> np.ndarray:
    """(V, Q) unnormalized log-priors from per-variable bit LLRs (V, log2 Q)."""
    Q = bit_patterns.shape[0]
    if bit_llrs is None:
        return np.zeros((n_vars, Q))
    bit_llrs = np.asarray(bit_llrs, dtype=np.float64)
    # log p(q) (up to a constant) = -sum over bits that are 1 of the bit LLR
    return -bit_llrs @ bit_patterns.T.astype(np.float64)


def _bit_llrs_from_probs(probs: np.ndarray, bit_patterns: np.ndarray) -> np.ndarray:
    nb = bit_patterns.shape[1]
    eps = 1e-300
    out = np.empty((probs.shape[0], nb))
    for i in range(nb):
        zero = probs[:, bit_patterns[:, i] == 0].sum(axis=1)
        one = probs[:, bit_patterns[:, i] == 1].sum(axis=1)
        out[:, i] = np.log(zero + eps) - np.log(one + eps)
    return np.clip(out, -LLR_CLIP, LLR_CLIP)


@dataclass
class SymbolPosterior:
    """Per-variable codeword probabilities and the implied Gaussian moments."""

    probs: np.ndarray              # (V, Q)
    means: np.ndarray              # (V, D) complex
    variances: np.ndarray          # (V, D) real

    def normalization_error(self) -> float:
        return float(np.abs(self.probs.sum(axis=1) - 1.0).max())


@dataclass
class DetectorResult:
    posterior: SymbolPosterior
    bit_llrs: np.ndarray           # (V, log2 Q), includes the prior
    extrinsic: np.ndarray          # bit_llrs - prior
    n_inner: int
    op_count: int
    variance_floored: bool
    residual: np.ndarray | None = None   # y minus all posterior means


def _noise_vector(noise_var, size: int) -> np.ndarray:
    arr = np.asarray(noise_var, dtype=np.float64)
    if arr.ndim == 0:
        if arr <= 0:
            raise ValueError("noise_var must be positive")
        return np.full(size, float(arr))
    if arr.shape != (size,) or np.any(arr <= 0):
        raise ValueError(f"noise_var must be a positive scalar or ({size},) vector")
    return arr.copy()


@njit(cache=True)
def _serial_sweeps(noise_scales, damping, indptr, idx, P, W, cand, logits0,
                   means, svars, residual, total_var, noise_vec, probs,
                   var_floor):
    """Compiled serial EP sweep; mutates means/svars/residual/total_var/probs.

    noise_scales holds one working-noise multiplier per pass (annealing);
    total_var enters scaled for the current pass and leaves at scale 1.
    """
    V, D = means.shape
    Q = probs.shape[1]
    mn = noise_vec.shape[0]
    g = np.zeros(D, dtype=np.complex128)
    A = np.zeros((D, D), dtype=np.complex128)
    logits = np.zeros(Q)
    ops = 0
    floored = False
    prev_scale = 1.0
    for p in range(noise_scales.shape[0]):
        scale = noise_scales[p]
        if scale != prev_scale:
            for o in range(mn):
                total_var[o] += (scale - prev_scale) * noise_vec[o]
            prev_scale = scale
        for v in range(V):
            a, b = indptr[v], indptr[v + 1]
            n_obs = b - a
            for d in range(D):
                g[d] = 0.0
                for e in range(D):
                    A[d, e] = 0.0
            for t in range(a, b):
                o = idx[t]
                mc = 0.0 + 0.0j
                wc = 0.0
                for d in range(D):
                    mc += P[t, d] * means[v, d]
                    wc += W[t, d] * svars[v, d]
                ri = residual[o] + mc
                vi = total_var[o] - wc
                if vi < var_floor:
                    vi = var_floor
                iv = 1.0 / vi
                x = iv * ri
                for d in range(D):
                    pc = P[t, d].conjugate()
                    g[d] += pc * x
                    for e in range(D):
                        A[d, e] += pc * iv * P[t, e]
            best = -1e300
            for q in range(Q):
                lin = 0.0
                quad = 0.0
                for d in range(D):
                    cq = cand[v, d, q]
                    lin += (g[d].conjugate() * cq).real
                    acc = 0.0 + 0.0j
                    for e in range(D):
                        acc += A[d, e] * cand[v, e, q]
                    quad += (cq.conjugate() * acc).real
                lq = 2.0 * lin - quad + logits0[v, q]
                logits[q] = lq
                if lq > best:
                    best = lq
            psum = 0.0
            for q in range(Q):
                pq = np.exp(logits[q] - best)
                probs[v, q] = pq
                psum += pq
            for q in range(Q):
                probs[v, q] /= psum
            for d in range(D):
                m_new = 0.0 + 0.0j
                e2 = 0.0
                for q in range(Q):
                    cq = cand[v, d, q]
                    m_new += cq * probs[v, q]
                    e2 += (cq.real * cq.real + cq.imag * cq.imag) * probs[v, q]
                s_new = e2 - (m_new.real * m_new.real + m_new.imag * m_new.imag)
                if s_new < var_floor:
                    s_new = var_floor
                    floored = True
                m_d = damping * m_new + (1.0 - damping) * means[v, d]
                s_d = damping * s_new + (1.0 - damping) * svars[v, d]
                dm = m_d - means[v, d]
                ds = s_d - svars[v, d]
                for t in range(a, b):
                    o = idx[t]
                    residual[o] -= P[t, d] * dm
                    total_var[o] += W[t, d] * ds
                means[v, d] = m_d
                svars[v, d] = s_d
            ops += n_obs * (4 * D + D * D + 3) + Q * (D * D + 3 * D + 2)
    if prev_scale != 1.0:
        for o in range(mn):
            total_var[o] += (1.0 - prev_scale) * noise_vec[o]
    return ops, floored


def gaep_detect(y: np.ndarray, model: DetectorModel,
                prior_bit_llrs: np.ndarray | None, noise_var: float,
                n_inner: int = 10, damping: float = 0.5,
                anneal_start: float = 1.0) -> DetectorResult:
    """Serial-schedule EP sweep over all codeword variables.

    Returns codeword posteriors (priors included) and extrinsic bit LLRs;
    `op_count` tallies the multiply-accumulates of the core updates so the
    cost can be checked against the channel's nonzero census.  `noise_var`
    may be a scalar or a per-bin vector.  With anneal_start > 1 the working
    noise decays geometrically from anneal_start * noise_var to noise_var
    across the passes, which keeps early hard decisions soft and avoids
    interference-limited fixed points; the final pass always runs at the
    true noise level.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must be in (0, 1]")
    if anneal_start < 1.0:
        raise ValueError("anneal_start must be >= 1")
    y = np.asarray(y, dtype=np.complex128)
    V = model.n_vars
    Q, D = model.Q, model.D
    logits0 = prior_logits_from_bit_llrs(prior_bit_llrs, model.bit_patterns, V)

    # prior moments
    p0 = np.exp(logits0 - logits0.max(axis=1, keepdims=True))
    p0 /= p0.sum(axis=1, keepdims=True)
    means = np.einsum("vdq,vq->vd", model.cand, p0)
    variances = np.einsum("vdq,vq->vd", np.abs(model.cand) ** 2, p0) \
        - np.abs(means) ** 2
    variances = np.maximum(variances, VAR_FLOOR)

    residual = y.copy()
    total_var = _noise_vector(noise_var, model.grid.size)
    np.subtract.at(residual, model.idx,
                   np.einsum("td,td->t", model.P, means[model.row_var]))
    np.add.at(total_var, model.idx,
              np.einsum("td,td->t", model.W, variances[model.row_var]))

    probs = p0.copy()
    if n_inner > 1:
        scales = anneal_start ** (1.0 - np.arange(n_inner) / (n_inner - 1))
        scales[-1] = 1.0
    else:
        scales = np.ones(1)
    noise_base = _noise_vector(noise_var, model.grid.size)
    ops, floored = _serial_sweeps(
        scales, float(damping), model.indptr, model.idx, model.P, model.W,
        model.cand, logits0, means, variances, residual, total_var,
        noise_base, probs, VAR_FLOOR)

    bit_llrs = _bit_llrs_from_probs(probs, model.bit_patterns)
    prior = np.zeros_like(bit_llrs) if prior_bit_llrs is None \
        else np.asarray(prior_bit_llrs, dtype=np.float64)
    # both terms are saturated already, so the difference stays bounded
    extrinsic = bit_llrs - prior
    posterior = SymbolPosterior(probs=probs, means=means, variances=variances)
    return DetectorResult(posterior=posterior, bit_llrs=bit_llrs,
                          extrinsic=extrinsic, n_inner=n_inner,
                          op_count=int(ops), variance_floored=bool(floored),
                          residual=residual)


def map_oracle_detect(y: np.ndarray, model: DetectorModel,
                      prior_bit_llrs: np.ndarray | None,
                      noise_var: float) -> SymbolPosterior:
    """Exact Bayes posterior by enumerating every joint codeword hypothesis.

    Only viable on tiny instances; refuses more than 2^20 hypotheses.
    """
    V, Q = model.n_vars, model.Q
    if Q ** V > ORACLE_MAX_HYPOTHESES:
        raise ValueError(f"{Q}^{V} hypotheses exceed the oracle limit")
    y = np.asarray(y, dtype=np.complex128)
    mn = model.grid.size
    noise_vec = _noise_vector(noise_var, mn)
    logits0 = prior_logits_from_bit_llrs(prior_bit_llrs, model.bit_patterns, V)

    contrib = np.zeros((V, Q, mn), dtype=np.complex128)
    for v in range(V):
        obs_idx, P = model.var_columns(v)
        block = np.zeros((mn, Q), dtype=np.complex128)
        block[obs_idx] = P @ model.cand[v]
        contrib[v] = block.T

    joint = np.empty([Q] * V)
    for combo in itertools.product(range(Q), repeat=V):
        total = contrib[range(V), combo].sum(axis=0)
        ll = -np.sum(np.abs(y - total) ** 2 / noise_vec)
        joint[combo] = ll + sum(logits0[v, q] for v, q in enumerate(combo))

    joint -= joint.max()
    w = np.exp(joint)
    w /= w.sum()
    probs = np.empty((V, Q))
    for v in range(V):
        axes = tuple(i for i in range(V) if i != v)
        probs[v] = w.sum(axis=axes)

    means = np.einsum("vdq,vq->vd", model.cand, probs)
    variances = np.einsum("vdq,vq->vd", np.abs(model.cand) ** 2, probs) \
        - np.abs(means) ** 2
    return SymbolPosterior(probs=probs, means=means, variances=variances)


# ----------------------------------------------------------------------------
# Turbo loop
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TurboConfig:
    """Loop counts plus the equalizer's working noise model.

    noise_variance_mode:
      thermal_only  - the thermal noise power everywhere (no jam knowledge);
      genie_total   - thermal plus the realized jam's per-bin DD power
                      (ablation mode; requires jam_dd_power);
      residual      - thermal on the first loop, then per-bin robust
                      estimates from the equalizer's own residuals, so
                      unmodeled interference gets down-weighted without
                      granting the receiver any jammer knowledge.
    """

    n_loops: int = 3
    n_inner: int = 10
    damping: float = 0.5
    noise_variance_mode: str = "residual"
    anneal_start: float = 1.0

    def __post_init__(self):
        if self.n_loops < 1 or self.n_inner < 1:
            raise ValueError("n_loops and n_inner must be >= 1")
        if self.noise_variance_mode not in ("thermal_only", "genie_total",
                                            "residual"):
            raise ValueError(f"unknown noise mode {self.noise_variance_mode!r}")
        if self.anneal_start < 1.0:
            raise ValueError("anneal_start must be >= 1")


@dataclass
class LlrMatrices:
    """The four LLR buffers of the final turbo loop.

    forwarded == L_IE - L_ID (codeword-bit domain, (V, log2 Q)) and
    feedback == L_D - L_E (coded-bit domain, (U, n)) hold exactly.
    """

    L_IE: np.ndarray               # equalizer output, (V, log2 Q)
    L_ID: np.ndarray               # prior the final equalizer pass consumed
    L_E: np.ndarray                # decoder input, (U, n)
    L_D: np.ndarray                # decoder output, (U, n)
    forwarded: np.ndarray
    feedback: np.ndarray


@dataclass
class TurboResult:
    info_bits: np.ndarray          # (U, k) hard decisions after the final loop
    info_bits_per_loop: np.ndarray  # (loops, U, k)
    converged: np.ndarray          # (U,) decoder syndrome satisfied, final loop
    llrs: LlrMatrices
    detector_ops: int
    detector_runs: list[DetectorResult]


def turbo_receive(y: np.ndarray, stacked: StackedChannel, book: ScmaCodebook,
                  code: LdpcCode, scheme: PartitionScheme, hop: HopState,
                  cfg: TurboConfig, interleaver_seed: int, noise_var: float,
                  signal_scale: float = 1.0,
                  jam_dd_power: np.ndarray | None = None,
                  decoder_iters: int = 10,
                  model: DetectorModel | None = None) -> TurboResult:
    """Run the full equalizer <-> decoder exchange and output info bits."""
    grid = stacked.grid
    if model is None:
        model = DetectorModel(stacked, book, scheme, hop, grid,
                              signal_scale=signal_scale)
    U = model.n_users
    nb = book.bits_per_codeword
    n_coded = model.sites_per_user * nb
    if n_coded != code.n:
        raise ValueError(
            f"coded bits per user per block ({n_coded}) != code length ({code.n})"
        )
    eff_noise = _noise_vector(noise_var, grid.size)
    if cfg.noise_variance_mode == "genie_total":
        if jam_dd_power is None:
            raise ValueError("genie_total needs the jam's per-bin DD power")
        eff_noise = eff_noise + np.asarray(jam_dd_power, dtype=np.float64)

    L_ID = np.zeros((model.n_vars, nb))
    info_per_loop = np.zeros((cfg.n_loops, U, code.k), dtype=np.uint8)
    converged = np.zeros(U, dtype=bool)
    L_E_final = np.zeros((U, code.n))
    L_D_final = np.zeros((U, code.n))
    fb_final = np.zeros((U, code.n))
    fwd_final = np.zeros_like(L_ID)
    last_L_ID = L_ID
    det_runs = []
    total_ops = 0

    for loop in range(cfg.n_loops):
        det = gaep_detect(y, model, L_ID, eff_noise,
                          n_inner=cfg.n_inner, damping=cfg.damping,
                          anneal_start=cfg.anneal_start)
        det_runs.append(det)
        total_ops += det.op_count
        if cfg.noise_variance_mode == "residual":
            # unexplained residual power marks bins the model cannot account
            # for; the next pass trusts those bins proportionally less
            base = _noise_vector(noise_var, grid.size)
            eff_noise = np.maximum(base, 0.5 * np.abs(det.residual) ** 2)
        fwd = det.extrinsic                       # L_IE - L_ID
        new_L_ID = np.zeros_like(L_ID)
        for u in range(U):
            sl = model.var_slice(u)
            seq = fwd[sl].reshape(-1)             # interleaved coded-bit order
            L_E = deinterleave(seq, interleaver_seed, u)
            dec = bp_decode(L_E, code, max_iter=decoder_iters)
            fb = dec.llr_posterior - L_E          # L_D - L_E
            new_L_ID[sl] = interleave(fb, interleaver_seed, u).reshape(-1, nb)
            info_per_loop[loop, u] = extract_info(dec.bits, code)
            if loop == cfg.n_loops - 1:
                converged[u] = dec.converged
                L_E_final[u] = L_E
                L_D_final[u] = dec.llr_posterior
                fb_final[u] = fb
        fwd_final = fwd
        last_L_ID = L_ID
        L_ID = new_L_ID

    llrs = LlrMatrices(
        L_IE=det_runs[-1].bit_llrs,
        L_ID=last_L_ID,
        L_E=L_E_final,
        L_D=L_D_final,
        forwarded=fwd_final,
        feedback=fb_final,
    )
    return TurboResult(info_bits=info_per_loop[-1], info_bits_per_loop=info_per_loop,
                       converged=converged, llrs=llrs, detector_ops=total_ops,
                       detector_runs=det_runs)


@dataclass(frozen=True)
class ComplexityReport:
    total_macs: int
    per_pass_macs: float
    n_passes: int
    sbar: int | None = None


def complexity_census(det_runs, sbar: int | None = None) -> ComplexityReport:
    """Aggregate detector operation counts; per-pass cost is exact because
    every inner pass does identical work."""
    if isinstance(det_runs, DetectorResult):
        det_runs = [det_runs]
    total = sum(r.op_count for r in det_runs)
    passes = sum(r.n_inner for r in det_runs)
    per_pass = total / passes if passes else 0.0
    return ComplexityReport(total_macs=total, per_pass_macs=per_pass,
                            n_passes=passes, sbar=sbar)
