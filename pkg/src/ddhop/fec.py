"""(3,6)-regular LDPC code: greedy girth-maximizing construction, systematic
encoding, and sum-product belief-propagation decoding.

LLR convention throughout: L = log P(bit=0) / P(bit=1), saturated at +/-30.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

LLR_CLIP = 30.0
_TANH_GUARD = 1.0 - 1e-15


class CodeConstructionError(ValueError):
    """Raised when the requested parity structure cannot be realized."""


@dataclass(frozen=True)
class LdpcCode:
    """Parity structure plus the systematic encoding realization.

    check_vars[c] lists the dc variables of check c; var_checks[v] lists the
    dv checks of variable v.  Encoding uses a column-pivoted GF(2)
    elimination of H: info bits sit at `info_positions` and parities at
    `pivot_positions`, so the transmitted code equals the constructed one.
    """

    n: int
    k: int
    dv: int
    dc: int
    check_vars: np.ndarray         # (m, dc) int
    var_checks: np.ndarray         # (n, dv) int
    info_positions: np.ndarray     # (k,) int
    pivot_positions: np.ndarray    # (m,) int
    parity_map: np.ndarray         # (m, k) uint8, parity = parity_map @ info mod 2
    seed: int = 0

    @property
    def m(self) -> int:
        return self.n - self.k

    def parity_check_matrix(self) -> np.ndarray:
        H = np.zeros((self.m, self.n), dtype=np.uint8)
        for c in range(self.m):
            H[c, self.check_vars[c]] = 1
        return H

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        return np.bitwise_and(bits[self.check_vars].sum(axis=1), 1)


def peg_construct(n: int, dv: int = 3, dc: int = 6, seed: int = 0) -> LdpcCode:
    """Progressive edge growth with exact (dv, dc) regularity.

    Edges are placed variable by variable; each new edge goes to the check
    that is farthest from the variable in the current graph (unreached
    checks first), lowest fill first, ties broken by a seeded priority
    order.  Checks that already hold dc edges are never candidates.
    """
    if (n * dv) % dc:
        raise CodeConstructionError(f"n*dv = {n * dv} is not divisible by dc = {dc}")
    m = n * dv // dc
    if m >= n:
        raise CodeConstructionError("code rate must be positive")

    rng = np.random.default_rng(seed)
    priority = rng.permutation(m)
    check_deg = np.zeros(m, dtype=int)
    var_checks = [[] for _ in range(n)]
    check_vars = [[] for _ in range(m)]

    def depths_from(v) -> np.ndarray:
        """BFS distance (in check hops) from variable v to every check;
        unreached checks get a sentinel of m+1."""
        depth = np.full(m, m + 1, dtype=int)
        frontier_checks = var_checks[v]
        d = 1
        for c in frontier_checks:
            depth[c] = d
        seen_vars = {v}
        while frontier_checks:
            next_vars = set()
            for c in frontier_checks:
                next_vars.update(check_vars[c])
            next_vars -= seen_vars
            seen_vars |= next_vars
            new_checks = []
            d += 1
            for fv in next_vars:
                for c in var_checks[fv]:
                    if depth[c] > m:
                        depth[c] = d
                        new_checks.append(c)
            frontier_checks = new_checks
        return depth

    for v in range(n):
        for t in range(dv):
            attached = set(var_checks[v])
            open_checks = [c for c in np.flatnonzero(check_deg < dc)
                           if c not in attached]
            if not open_checks:
                raise CodeConstructionError(
                    f"variable {v} has no open check left; try another seed"
                )
            if t == 0:
                chosen = min(open_checks,
                             key=lambda c: (check_deg[c], priority[c]))
            else:
                depth = depths_from(v)
                # farthest first (unreached beats any finite depth), then
                # lowest fill, then the seeded priority
                chosen = min(open_checks,
                             key=lambda c: (-depth[c], check_deg[c], priority[c]))
            var_checks[v].append(int(chosen))
            check_vars[int(chosen)].append(v)
            check_deg[chosen] += 1

    if np.any(check_deg != dc):
        raise CodeConstructionError("construction left uneven check degrees")

    # The degree cap can wedge the last few variables into short cycles;
    # degree-preserving edge swaps clear them without touching regularity.
    # Girth 6 needs n*C(dv,2) distinct check pairs, impossible below that
    # bound (e.g. n=16, m=8), so only enforce where it can exist.
    girth6_feasible = n * dv * (dv - 1) // 2 <= m * (m - 1) // 2
    if girth6_feasible and not _break_4cycles(var_checks, check_vars, rng):
        raise CodeConstructionError(
            "could not remove all 4-cycles; try another seed"
        )

    check_mat = np.array([sorted(c) for c in check_vars], dtype=np.int64)
    var_mat = np.array([sorted(v) for v in var_checks], dtype=np.int64)
    info_pos, pivot_pos, parity_map = _systematic_form(check_mat, n, m)
    return LdpcCode(n=n, k=n - m, dv=dv, dc=dc,
                    check_vars=check_mat, var_checks=var_mat,
                    info_positions=info_pos, pivot_positions=pivot_pos,
                    parity_map=parity_map, seed=seed)


def _cycle_partners(v: int, var_checks, check_vars) -> list[int]:
    """Variables sharing two or more checks with v (each pair is a 4-cycle)."""
    seen: dict[int, int] = {}
    for c in var_checks[v]:
        for v2 in check_vars[c]:
            if v2 != v:
                seen[v2] = seen.get(v2, 0) + 1
    return [v2 for v2, k in seen.items() if k >= 2]


def _break_4cycles(var_checks, check_vars, rng, max_passes: int = 64) -> bool:
    """Swap edges (v1,c1)<->(v3,c3) until no two variables share two checks.

    Swaps preserve every variable and check degree; a candidate swap is kept
    only if it leaves both touched variables 4-cycle-free.
    """
    n = len(var_checks)

    def do_swap(v1, c1, v3, c3):
        var_checks[v1].remove(c1)
        var_checks[v1].append(c3)
        var_checks[v3].remove(c3)
        var_checks[v3].append(c1)
        check_vars[c1].remove(v1)
        check_vars[c1].append(v3)
        check_vars[c3].remove(v3)
        check_vars[c3].append(v1)

    for _ in range(max_passes):
        offender = None
        for v in range(n):
            partners = _cycle_partners(v, var_checks, check_vars)
            if partners:
                offender = (v, min(partners))
                break
        if offender is None:
            return True
        v1, v2 = offender
        shared = sorted(set(var_checks[v1]) & set(var_checks[v2]))
        c1 = shared[0]
        fixed = False
        for v3 in rng.permutation(n):
            if v3 in (v1, v2):
                continue
            for c3 in list(var_checks[v3]):
                if c3 in var_checks[v1] or c1 in var_checks[v3]:
                    continue
                do_swap(v1, c1, v3, c3)
                if (not _cycle_partners(v1, var_checks, check_vars)
                        and not _cycle_partners(v3, var_checks, check_vars)):
                    fixed = True
                    break
                do_swap(v1, c3, v3, c1)      # revert
            if fixed:
                break
        if not fixed:
            return False
    return not any(_cycle_partners(v, var_checks, check_vars) for v in range(n))


def _systematic_form(check_vars: np.ndarray, n: int, m: int):
    """Column-pivoted GF(2) RREF of H; raises on rank deficiency."""
    H = np.zeros((m, n), dtype=np.uint8)
    for c in range(m):
        H[c, check_vars[c]] = 1
    Hw = H.copy()
    pivot_cols = []
    r = 0
    for col in range(n):
        rows = np.flatnonzero(Hw[r:, col])
        if rows.size == 0:
            continue
        pr = r + rows[0]
        if pr != r:
            Hw[[r, pr]] = Hw[[pr, r]]
        others = np.flatnonzero(Hw[:, col])
        others = others[others != r]
        Hw[others] ^= Hw[r]
        pivot_cols.append(col)
        r += 1
        if r == m:
            break
    if r < m:
        raise CodeConstructionError(
            f"parity structure is rank deficient: rank {r} < {m}"
        )
    pivot_pos = np.array(pivot_cols, dtype=np.int64)
    info_pos = np.setdiff1d(np.arange(n), pivot_pos)
    parity_map = Hw[:, info_pos].copy()
    return info_pos, pivot_pos, parity_map


def ldpc_encode(info_bits: np.ndarray, code: LdpcCode) -> np.ndarray:
    info_bits = np.asarray(info_bits, dtype=np.uint8).ravel()
    if info_bits.size != code.k:
        raise ValueError(f"expected {code.k} info bits, got {info_bits.size}")
    word = np.zeros(code.n, dtype=np.uint8)
    word[code.info_positions] = info_bits
    word[code.pivot_positions] = (code.parity_map @ info_bits) & 1
    return word


def extract_info(codeword_bits: np.ndarray, code: LdpcCode) -> np.ndarray:
    return np.asarray(codeword_bits)[code.info_positions]


@dataclass(frozen=True)
class DecodeResult:
    bits: np.ndarray
    converged: bool
    iterations: int
    llr_posterior: np.ndarray


@njit(cache=True)
def _layered_sweeps(cmat, llr, posterior, msg_c2v, max_iter, clip, guard):
    """Layered sum-product: checks processed serially, posteriors in place.

    Returns (iterations, converged); converged requires a zero syndrome with
    no zero-evidence bit (a posterior of exactly 0 never counts as decided).
    """
    m, dc = cmat.shape
    t = np.empty(dc)
    it = 0
    for it in range(1, max_iter + 1):
        for c in range(m):
            prod = 1.0
            for i in range(dc):
                v = cmat[c, i]
                v2c = posterior[v] - msg_c2v[c, i]
                if v2c > clip:
                    v2c = clip
                elif v2c < -clip:
                    v2c = -clip
                t[i] = np.tanh(0.5 * v2c)
                prod *= t[i]
            for i in range(dc):
                v = cmat[c, i]
                if t[i] != 0.0:
                    ext = prod / t[i]
                else:
                    ext = 1.0
                    for k in range(dc):
                        if k != i:
                            ext *= t[k]
                if ext > guard:
                    ext = guard
                elif ext < -guard:
                    ext = -guard
                new_msg = 2.0 * np.arctanh(ext)
                old = msg_c2v[c, i]
                msg_c2v[c, i] = new_msg
                # the accumulator stays unclipped so message subtraction is
                # exact; bounded anyway by dv*arctanh(guard) + |llr|
                posterior[v] = posterior[v] + new_msg - old
        ok = True
        for c in range(m):
            s = 0
            for i in range(dc):
                if posterior[cmat[c, i]] < 0.0:
                    s += 1
                if posterior[cmat[c, i]] == 0.0:
                    ok = False
            if s & 1:
                ok = False
            if not ok:
                break
        if ok:
            return it, True
    return it, False


def bp_decode(llr: np.ndarray, code: LdpcCode, max_iter: int = 10) -> DecodeResult:
    """Sum-product decoding (layered schedule) with early exit on a zero
    syndrome.

    Non-convergence is reported through the flag, never raised; the
    posterior LLRs are returned for extrinsic use in a turbo loop.
    """
    llr = np.clip(np.asarray(llr, dtype=np.float64).ravel(), -LLR_CLIP, LLR_CLIP)
    if llr.size != code.n:
        raise ValueError(f"expected {code.n} LLRs, got {llr.size}")
    cmat = code.check_vars
    posterior = llr.copy()
    msg_c2v = np.zeros(cmat.shape)
    it, converged = _layered_sweeps(cmat, llr, posterior, msg_c2v,
                                    max_iter, LLR_CLIP, _TANH_GUARD)
    bits = (posterior < 0).astype(np.uint8)
    posterior = np.clip(posterior, -LLR_CLIP, LLR_CLIP)
    return DecodeResult(bits=bits, converged=bool(converged), iterations=int(it),
                        llr_posterior=posterior)


# ----------------------------------------------------------------------------
# Adjacency-list import/export
# ----------------------------------------------------------------------------

def save_code(code: LdpcCode, path) -> None:
    """One check row per line, sorted column indices."""
    with open(path, "w") as fh:
        for c in range(code.m):
            fh.write(" ".join(str(v) for v in sorted(code.check_vars[c])) + "\n")


def load_code(path) -> LdpcCode:
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append(sorted(int(t) for t in line.split()))
    if not rows:
        raise CodeConstructionError("empty code file")
    dc = len(rows[0])
    if any(len(r) != dc for r in rows):
        raise CodeConstructionError("check rows have uneven degrees")
    m = len(rows)
    n = max(max(r) for r in rows) + 1
    check_mat = np.array(rows, dtype=np.int64)
    var_lists = [[] for _ in range(n)]
    for c, r in enumerate(rows):
        for v in r:
            var_lists[v].append(c)
    dv_set = {len(x) for x in var_lists}
    if len(dv_set) != 1:
        raise CodeConstructionError(f"variable degrees are uneven: {sorted(dv_set)}")
    dv = dv_set.pop()
    var_mat = np.array([sorted(x) for x in var_lists], dtype=np.int64)
    info_pos, pivot_pos, parity_map = _systematic_form(check_mat, n, m)
    return LdpcCode(n=n, k=n - m, dv=dv, dc=dc, check_vars=check_mat,
                    var_checks=var_mat, info_positions=info_pos,
                    pivot_positions=pivot_pos, parity_map=parity_map)


def count_4cycles(code: LdpcCode) -> int:
    """Number of variable pairs sharing two or more checks (zero means girth >= 6)."""
    H = code.parity_check_matrix().astype(np.int64)
    overlap = H.T @ H
    np.fill_diagonal(overlap, 0)
    return int((overlap >= 2).sum() // 2)
