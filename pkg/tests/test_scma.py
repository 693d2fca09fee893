"""Codebook validation, encoding, partitioning, hopping, and allocation."""

import numpy as np
import pytest
from scipy import stats

from ddhop.ddcore import DDGrid
from ddhop.scma import (CodebookError, HopState, PartitionScheme, allocate,
                        build_phase_rotation_codebook, deallocate,
                        gen_hop_permutation, load_codebook, placement_checksum,
                        placement_map, scma_encode, sites_per_user, write_codebook)
from ddhop.harness import reference_codebook_path


@pytest.fixture(scope="module")
def book():
    return load_codebook(reference_codebook_path())


class TestCodebookLoad:
    def test_reference_codebook_degrees(self, book):
        assert (book.J, book.K, book.Q, book.D) == (6, 4, 4, 2)
        usage = np.zeros(4, int)
        for support in book.supports:
            assert len(support) == 2
            for r in support:
                usage[r] += 1
        assert (usage == 3).all()                    # J*D/K = 3 everywhere

    def test_energy_normalized(self, book):
        energy = np.mean(np.sum(np.abs(book.codewords) ** 2, axis=2), axis=1)
        assert np.allclose(energy, 1.0, atol=1e-12)

    def test_rejects_wrong_nonzero_count(self, tmp_path, book):
        bad = book.codewords.copy()
        bad[0, 0, 3] = 0.5                           # third nonzero
        from ddhop.scma import ScmaCodebook
        broken = ScmaCodebook(J=6, K=4, Q=4, D=2, codewords=bad)
        with pytest.raises(CodebookError, match="support"):
            broken.validate()

    def test_rejects_scaled_energy_unless_renormalized(self, tmp_path, book):
        from ddhop.scma import ScmaCodebook
        scaled = ScmaCodebook(J=6, K=4, Q=4, D=2, codewords=2.0 * book.codewords)
        path = tmp_path / "scaled.txt"
        write_codebook(scaled, path)
        with pytest.raises(CodebookError, match="energy"):
            load_codebook(path)
        fixed = load_codebook(path, renormalize=True)
        energy = np.mean(np.sum(np.abs(fixed.codewords) ** 2, axis=2), axis=1)
        assert np.allclose(energy, 1.0, atol=1e-12)

    def test_rejects_bad_degree_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("J 5\nK 4\nQ 4\nD 2\n")
        with pytest.raises(CodebookError):
            load_codebook(path)

    def test_file_roundtrip(self, tmp_path, book):
        path = tmp_path / "book.txt"
        write_codebook(book, path)
        again = load_codebook(path)
        assert np.allclose(again.codewords, book.codewords, atol=1e-13)

    def test_generator_rejects_impossible_layout(self):
        with pytest.raises(CodebookError):
            build_phase_rotation_codebook(J=5, K=4, Q=4, D=2)


class TestScmaEncode:
    def test_bits_to_codeword_indices(self, book):
        # natural binary, MSB first: 00 -> 0, 01 -> 1, 10 -> 2, 11 -> 3
        cw = scma_encode(np.array([0, 0, 0, 1, 1, 0, 1, 1]), 2, book)
        assert np.allclose(cw, book.codewords[2, [0, 1, 2, 3]])

    def test_length(self, book):
        rng = np.random.default_rng(0)
        bits = rng.integers(0, 2, 256)
        assert scma_encode(bits, 0, book).shape == (128, 4)

    def test_rejects_odd_length(self, book):
        with pytest.raises(ValueError):
            scma_encode(np.array([0, 1, 0]), 0, book)

    def test_hard_roundtrip(self, book):
        rng = np.random.default_rng(1)
        bits = rng.integers(0, 2, 64)
        cw = scma_encode(bits, 3, book)
        # nearest-codeword decisions invert the mapping exactly
        patterns = book.bit_patterns()
        decoded = []
        for vec in cw:
            d = np.sum(np.abs(book.codewords[3] - vec) ** 2, axis=1)
            decoded.extend(patterns[int(d.argmin())])
        assert np.array_equal(np.array(decoded), bits)


class TestPartition:
    def test_slot_ranges(self):
        g = DDGrid(M=128, N=16)
        scheme = PartitionScheme(axis="delay", G=4)
        assert scheme.slot_range(2, g) == (64, 96)
        assert scheme.slot_of_index(37, g) == 1

    def test_indivisible_extent_rejected(self):
        g = DDGrid(M=10, N=16)
        with pytest.raises(ValueError):
            PartitionScheme(axis="delay", G=4).slot_size(g)

    def test_bins_cover_lattice_once(self):
        g = DDGrid(M=32, N=16)
        for axis in ("delay", "doppler"):
            scheme = PartitionScheme(axis=axis, G=4)
            hop = HopState.derive(3, 7, 4)
            seen = np.zeros(g.size, int)
            for group in range(4):
                pmap = placement_map(scheme, hop, group, g, K=4)
                seen[pmap.ravel()] += 1
            assert (seen == 1).all()


class TestHopping:
    def test_disabled_is_identity(self):
        for b in range(5):
            hop = HopState.derive(123, b, 4, enabled=False)
            assert hop.permutation == (0, 1, 2, 3)

    def test_deterministic(self):
        p1 = gen_hop_permutation(9, 1000, 4)
        p2 = gen_hop_permutation(9, 1000, 4)
        assert np.array_equal(p1, p2)

    def test_is_bijection(self):
        for b in range(50):
            perm = gen_hop_permutation(5, b, 4)
            assert sorted(perm.tolist()) == [0, 1, 2, 3]

    def test_slot_occupancy_uniform(self):
        # (group, slot) pair frequencies over many blocks, chi-square and
        # 3-sigma binomial screen
        G = 4
        n_blocks = 100_000
        counts = np.zeros((G, G), int)
        for b in range(n_blocks):
            perm = gen_hop_permutation(31, b, G)
            for g in range(G):
                counts[g, perm[g]] += 1
        expected = n_blocks / G
        chi2 = ((counts - expected) ** 2 / expected).sum()
        # 16 cells with 3 free dofs per row -> 12 dof is conservative here
        p = 1.0 - stats.chi2.cdf(chi2, df=12)
        assert p > 0.01
        sigma = np.sqrt(n_blocks * (1 / G) * (1 - 1 / G))
        assert np.abs(counts - expected).max() < 3 * sigma + 1


class TestAllocation:
    def setup_method(self):
        self.grid = DDGrid(M=32, N=16)
        self.scheme = PartitionScheme(axis="delay", G=4)
        self.book = load_codebook(reference_codebook_path())
        self.hop = HopState.derive(7, 3, 4)
        self.n_sites = sites_per_user(self.grid, self.scheme, 4)

    def test_counts_match_grid_arithmetic(self):
        g = DDGrid(M=128, N=16)
        assert sites_per_user(g, PartitionScheme(axis="delay", G=4), 4) == 128
        assert sites_per_user(g, PartitionScheme(axis="doppler", G=4), 4) == 128

    def test_single_group_ignores_hopping(self):
        g = DDGrid(M=8, N=4)
        scheme = PartitionScheme(axis="delay", G=1)
        rng = np.random.default_rng(2)
        cw = rng.standard_normal((sites_per_user(g, scheme, 4), 4)) + 0j
        on = allocate([cw], 0, scheme, HopState.derive(1, 5, 1, True), g, 4)
        off = allocate([cw], 0, scheme, HopState.derive(1, 5, 1, False), g, 4)
        assert np.array_equal(on[0], off[0])

    def test_deallocate_inverts_allocate(self):
        rng = np.random.default_rng(3)
        cws = [rng.standard_normal((self.n_sites, 4))
               + 1j * rng.standard_normal((self.n_sites, 4)) for _ in range(2)]
        blocks = allocate(cws, 1, self.scheme, self.hop, self.grid, 4)
        for cw, block in zip(cws, blocks):
            back = deallocate(block, self.scheme, self.hop, 1, self.grid, 4)
            assert np.array_equal(back, cw)

    def test_group_lands_in_hopped_slot(self):
        perm = self.hop.permutation
        rng = np.random.default_rng(4)
        cw = rng.standard_normal((self.n_sites, 4)) + 0j
        block = allocate([cw], 2, self.scheme, self.hop, self.grid, 4)[0]
        rows = np.flatnonzero(np.abs(block).sum(axis=1))
        lo, hi = self.scheme.slot_range(perm[2], self.grid)
        assert rows.min() >= lo and rows.max() < hi

    def test_wrong_codeword_count_rejected(self):
        with pytest.raises(ValueError):
            allocate([np.zeros((self.n_sites + 1, 4), complex)], 0,
                     self.scheme, self.hop, self.grid, 4)

    def test_block_energy_equals_codeword_count(self):
        rng = np.random.default_rng(5)
        bits = rng.integers(0, 2, 2 * self.n_sites)
        cw = scma_encode(bits, 0, self.book)
        block = allocate([cw], 0, self.scheme, self.hop, self.grid, 4)[0]
        assert np.isclose(np.sum(np.abs(block) ** 2), self.n_sites, rtol=1e-9)

    def test_checksum_detects_wrong_seed(self):
        right = placement_checksum(self.scheme, HopState.derive(7, 3, 4),
                                   self.grid, 4)
        same = placement_checksum(self.scheme, HopState.derive(7, 3, 4),
                                  self.grid, 4)
        wrong = placement_checksum(self.scheme, HopState.derive(8, 3, 4),
                                   self.grid, 4)
        assert right == same
        assert right != wrong
