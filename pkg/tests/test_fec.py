"""PEG construction, systematic encoding, and BP decoding."""

import numpy as np
import pytest

from ddhop.fec import (CodeConstructionError, LdpcCode, bp_decode, count_4cycles,
                       extract_info, ldpc_encode, load_code, peg_construct,
                       save_code)


@pytest.fixture(scope="module")
def code256():
    return peg_construct(256, dv=3, dc=6, seed=0)


@pytest.fixture(scope="module")
def code64():
    return peg_construct(64, dv=3, dc=6, seed=11)


class TestConstruction:
    def test_edge_and_check_counts(self, code256):
        H = code256.parity_check_matrix()
        assert H.shape == (128, 256)
        assert H.sum() == 768

    def test_exact_regularity(self, code256):
        H = code256.parity_check_matrix()
        assert set(H.sum(axis=0).tolist()) == {3}
        assert set(H.sum(axis=1).tolist()) == {6}

    def test_no_4cycles(self, code256, code64):
        assert count_4cycles(code256) == 0
        assert count_4cycles(code64) == 0

    def test_deterministic_in_seed(self):
        a = peg_construct(64, seed=3)
        b = peg_construct(64, seed=3)
        assert np.array_equal(a.check_vars, b.check_vars)

    def test_rejects_inconsistent_degrees(self):
        with pytest.raises(CodeConstructionError):
            peg_construct(63, dv=3, dc=6)

    def test_small_code_where_girth6_is_impossible(self):
        # 16 variables need 48 distinct check pairs, only C(8,2)=28 exist
        code = peg_construct(16, dv=3, dc=6, seed=0)
        assert code.k == 8
        H = code.parity_check_matrix()
        assert set(H.sum(axis=0).tolist()) == {3}
        assert set(H.sum(axis=1).tolist()) == {6}


class TestEncoding:
    def test_all_zero(self, code256):
        assert not ldpc_encode(np.zeros(128, dtype=np.uint8), code256).any()

    def test_every_word_passes_syndrome(self, code256):
        rng = np.random.default_rng(0)
        for _ in range(50):
            u = rng.integers(0, 2, code256.k).astype(np.uint8)
            x = ldpc_encode(u, code256)
            assert not code256.syndrome(x).any()

    def test_single_flip_violates_three_checks(self, code256):
        rng = np.random.default_rng(1)
        u = rng.integers(0, 2, code256.k).astype(np.uint8)
        x = ldpc_encode(u, code256)
        x[37] ^= 1
        assert code256.syndrome(x).sum() == 3        # column weight 3

    def test_info_extraction(self, code256):
        rng = np.random.default_rng(2)
        u = rng.integers(0, 2, code256.k).astype(np.uint8)
        assert np.array_equal(extract_info(ldpc_encode(u, code256), code256), u)


class TestDecoding:
    def test_noiseless_converges_in_one_iteration(self, code256):
        rng = np.random.default_rng(3)
        u = rng.integers(0, 2, code256.k).astype(np.uint8)
        x = ldpc_encode(u, code256)
        res = bp_decode(30.0 * (1.0 - 2.0 * x), code256)
        assert res.converged and res.iterations == 1
        assert np.array_equal(res.bits, x)

    def test_two_weak_flips_corrected(self, code256):
        rng = np.random.default_rng(4)
        u = rng.integers(0, 2, code256.k).astype(np.uint8)
        x = ldpc_encode(u, code256)
        llr = 30.0 * (1.0 - 2.0 * x)
        llr[[5, 100]] = -10.0 * (1.0 - 2.0 * x[[5, 100]])
        res = bp_decode(llr, code256)
        assert res.converged
        assert np.array_equal(res.bits, x)

    def test_all_zero_llr_does_not_converge(self, code256):
        res = bp_decode(np.zeros(256), code256, max_iter=10)
        assert not res.converged
        assert res.iterations == 10

    def test_matches_nearest_codeword_on_tiny_code(self):
        # exhaustive ML check on the n=16 code
        code = peg_construct(16, dv=3, dc=6, seed=0)
        words = np.array([ldpc_encode(
            np.array([(i >> b) & 1 for b in range(code.k)], dtype=np.uint8), code)
            for i in range(1 << code.k)])
        rng = np.random.default_rng(5)
        agree = 0
        trials = 200
        sigma2 = 0.5
        for _ in range(trials):
            x = words[rng.integers(len(words))]
            y = (1.0 - 2.0 * x) + np.sqrt(sigma2) * rng.standard_normal(16)
            res = bp_decode(2.0 * y / sigma2, code, max_iter=50)
            ml = words[np.argmin(((1.0 - 2.0 * words) - y) ** 2 @ np.ones(16))]
            if res.converged and np.array_equal(res.bits, ml):
                agree += 1
        # BP on a short loopy code tracks ML most of the time
        assert agree / trials > 0.7

    def test_noiseless_roundtrip_many_words(self, code64):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            u = rng.integers(0, 2, code64.k).astype(np.uint8)
            x = ldpc_encode(u, code64)
            res = bp_decode(30.0 * (1.0 - 2.0 * x), code64)
            assert np.array_equal(extract_info(res.bits, code64), u)

    def test_soft_output_sign_matches_hard_decision(self, code64):
        rng = np.random.default_rng(7)
        u = rng.integers(0, 2, code64.k).astype(np.uint8)
        x = ldpc_encode(u, code64)
        y = (1.0 - 2.0 * x) + 0.7 * rng.standard_normal(64)
        res = bp_decode(2.0 * y / 0.49, code64)
        hard = (res.llr_posterior < 0).astype(np.uint8)
        assert np.array_equal(hard, res.bits)


class TestBerMonotonicity:
    def test_awgn_ber_decreases(self, code256):
        # BPSK over AWGN, Eb/N0 = 1..4 dB
        rng = np.random.default_rng(8)
        R = code256.k / code256.n
        bers = []
        for ebn0_db in (1.0, 2.0, 3.0, 4.0):
            sigma2 = 1.0 / (2.0 * R * 10 ** (ebn0_db / 10.0))
            nerr = ntot = 0
            while ntot < 30_000:
                u = rng.integers(0, 2, code256.k).astype(np.uint8)
                x = ldpc_encode(u, code256)
                y = (1.0 - 2.0 * x) + np.sqrt(sigma2) * rng.standard_normal(256)
                res = bp_decode(2.0 * y / sigma2, code256)
                nerr += int((extract_info(res.bits, code256) != u).sum())
                ntot += code256.k
            bers.append(nerr / ntot)
        assert all(b2 < b1 for b1, b2 in zip(bers, bers[1:])), bers


class TestAdjacencyFile:
    def test_roundtrip(self, tmp_path, code64):
        path = tmp_path / "code.txt"
        save_code(code64, path)
        again = load_code(path)
        assert np.array_equal(again.parity_check_matrix(),
                              code64.parity_check_matrix())
        assert (again.n, again.k) == (code64.n, code64.k)

    def test_rows_are_sorted(self, tmp_path, code64):
        path = tmp_path / "code.txt"
        save_code(code64, path)
        for line in path.read_text().splitlines():
            cols = [int(t) for t in line.split()]
            assert cols == sorted(cols)
