import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rbcert.polarimetry import (
    MAX_CUTOFF,
    PnrdModel,
    PolarimetrySetting,
    TwoModeSource,
    angular_momentum_ops,
    auto_cutoff,
    dpol_per_port,
    dpol_total_photon,
    pnrd_diagonal,
    pnrd_matrix,
    response_matrix,
    single_port_povm,
    source_distribution,
    squeezing_db_to_r,
    two_port_povm,
    waveplate_unitary,
)


def occupied_bins_law(k: int, n0: int) -> np.ndarray:
    """P(exactly n of n0 bins hit) for k photons placed uniformly, by enumeration."""
    out = np.zeros(n0 + 1)
    for assignment in itertools.product(range(n0), repeat=k):
        out[len(set(assignment))] += 1
    return out / n0**k


def pnrd_oracle(eta: float, n0: int, m: int) -> np.ndarray:
    """Loss then binning: each photon survives with probability eta."""
    out = np.zeros(n0 + 1)
    for k in range(m + 1):
        survive = math.comb(m, k) * eta**k * (1 - eta) ** (m - k)
        out += survive * occupied_bins_law(k, n0)
    return out


def span_rank(elements, tol=1e-8) -> int:
    mat = np.array([e.ravel() for e in elements])
    s = np.linalg.svd(mat, compute_uv=False)
    return int((s > tol * s[0]).sum())


class TestPnrd:
    @pytest.mark.parametrize("eta", [0.25, 0.5, 0.9, 1.0])
    @pytest.mark.parametrize("n0", [1, 2, 3, 4])
    def test_combinatorial_oracle(self, eta, n0):
        model = PnrdModel(eta, n0)
        table = pnrd_matrix(model, 6)
        for m in range(7):
            np.testing.assert_allclose(table[:, m], pnrd_oracle(eta, n0, m), atol=1e-10, rtol=0)

    def test_vacuum_and_complement(self):
        model = PnrdModel(1.0, 1)
        np.testing.assert_array_equal(pnrd_diagonal(model, 0, 5), [1, 0, 0, 0, 0, 0])
        np.testing.assert_array_equal(pnrd_diagonal(model, 1, 5), [0, 1, 1, 1, 1, 1])

    def test_two_bins_two_photons(self):
        assert pnrd_diagonal(PnrdModel(1.0, 2), 1, 2)[2] == pytest.approx(0.5, abs=1e-15)

    def test_outcome_range(self):
        with pytest.raises(ValueError):
            pnrd_diagonal(PnrdModel(0.5, 2), 3, 4)

    @pytest.mark.parametrize("bad", [(-0.1, 1), (1.1, 1), (0.5, 0), (0.5, 1.5)])
    def test_model_validation(self, bad):
        with pytest.raises(ValueError):
            PnrdModel(*bad)

    @pytest.mark.parametrize("eta", [0.0, 0.1, 0.5, 0.9, 1.0])
    @pytest.mark.parametrize("n0", [1, 2, 5, 8])
    def test_completeness(self, eta, n0):
        table = pnrd_matrix(PnrdModel(eta, n0), 30)
        np.testing.assert_allclose(table.sum(axis=0), 1.0, atol=1e-10)
        assert table.min() >= 0


class TestSource:
    def test_vacuum(self):
        p, tail = source_distribution(TwoModeSource("tmsv", 0.0), 4)
        assert p[0, 0] == 1 and p.sum() == 1 and tail == 0

    def test_half_tanh(self):
        r = math.atanh(1 / math.sqrt(2))
        p, _ = source_distribution(TwoModeSource("bell", r), 5)
        assert p[1, 1] == pytest.approx(1 / 16, rel=1e-12)
        m, n = np.indices(p.shape)
        np.testing.assert_allclose(p, 0.25 * 0.5 ** (m + n), rtol=1e-12)

    def test_bell_equals_tmsv(self):
        a, _ = source_distribution(TwoModeSource("bell", 0.3), 10)
        b, _ = source_distribution(TwoModeSource("tmsv", 0.3), 10)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("r", [0.05, 0.2256, 0.5, 1.0])
    def test_tail_mass(self, r):
        tails = [source_distribution(TwoModeSource("tmsv", r), c) for c in range(0, 25)]
        masses = [t for _, t in tails]
        assert all(b <= a for a, b in zip(masses, masses[1:]))
        for p, t in tails:
            assert p.sum() + t == pytest.approx(1.0, abs=1e-12)
        c = auto_cutoff(r)
        assert source_distribution(TwoModeSource("tmsv", r), c)[1] < 1e-12
        if c > 0:
            assert source_distribution(TwoModeSource("tmsv", r), c - 1)[1] >= 1e-12

    def test_cutoff_cap(self):
        assert auto_cutoff(5.0) == MAX_CUTOFF

    def test_source_validation(self):
        with pytest.raises(ValueError):
            TwoModeSource("coherent", 0.1)
        with pytest.raises(ValueError):
            TwoModeSource("tmsv", -0.1)


class TestResponse:
    def test_perfect_counting_up_to_bin_collisions(self):
        # eta = 1: m photons give m clicks unless two share a bin, which
        # happens with probability at most m(m-1)/(2 N0)
        n0, cutoff = 60, 3
        resp = response_matrix(PnrdModel(1.0, n0), cutoff)
        rows = [a * (n0 + 1) + b for a in range(cutoff + 1) for b in range(cutoff + 1)]
        block = resp[rows]
        m = np.arange(cutoff + 1)
        miss = m * (m - 1) / (2 * n0)
        bound = 1 - np.outer(1 - miss, 1 - miss).ravel()
        assert np.all(1 - np.diag(block) <= bound + 1e-12)
        assert np.all(np.diag(block) > 0.9)

    def test_single_photons_counted_exactly(self):
        resp = response_matrix(PnrdModel(1.0, 4), 1)
        rows = [a * 5 + b for a in range(2) for b in range(2)]
        np.testing.assert_allclose(resp[rows], np.eye(4), atol=1e-15)

    def test_blind(self):
        resp = response_matrix(PnrdModel(0.0, 3), 4)
        np.testing.assert_allclose(resp[0], 1.0)
        np.testing.assert_allclose(resp[1:], 0.0)

    def test_single_loss(self):
        resp = response_matrix(PnrdModel(0.9, 1), 3)
        # outcome (0, 0) given (m, m') = (1, 0)
        assert resp[0, 1 * 4 + 0] == pytest.approx(0.1)

    def test_stochastic(self):
        resp = response_matrix(PnrdModel(0.9, 8), 12)
        np.testing.assert_allclose(resp.sum(axis=0), 1.0, atol=1e-9)


class TestWavePlates:
    def test_j3_eigenvalues(self):
        j2, j3 = angular_momentum_ops(2)
        # index n_H * 3 + n_V
        assert j3[3, 3].real == pytest.approx(0.5)
        assert j3[0, 0] == 0
        np.testing.assert_allclose(j2, j2.conj().T, atol=1e-12)
        np.testing.assert_allclose(j3, j3.conj().T, atol=1e-12)
        assert abs(np.trace(j2)) < 1e-12

    def test_identity(self):
        np.testing.assert_allclose(waveplate_unitary(0.0, 0.0, 3), np.eye(16), atol=1e-12)

    def test_full_turn_on_one_photon(self):
        u = waveplate_unitary(0.0, 2 * math.pi, 2)
        for idx in (1, 3):  # |0,1> and |1,0>
            assert u[idx, idx] == pytest.approx(-1.0, abs=1e-12)

    def _blocks(self, n0):
        total = np.add.outer(np.arange(n0 + 1), np.arange(n0 + 1)).ravel()
        return total

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-7, 7), st.floats(-7, 7), st.integers(1, 4))
    def test_unitary_and_number_conserving(self, theta, phi, n0):
        u = waveplate_unitary(theta, phi, n0)
        np.testing.assert_allclose(u.conj().T @ u, np.eye((n0 + 1) ** 2), atol=1e-9)
        total = self._blocks(n0)
        leak = np.abs(u[total[:, None] != total[None, :]])
        assert leak.max(initial=0) < 1e-12

    def test_half_wave_plate_swaps_single_photon(self):
        # J2 rotation by pi maps |1,0> onto |0,1> up to phase
        u = waveplate_unitary(math.pi, 0.0, 1)
        assert abs(u[1, 2]) == pytest.approx(1.0, abs=1e-12)


class TestPovm:
    def test_special_case(self):
        model = PnrdModel(1.0, 1)
        elems = two_port_povm(0.0, 0.0, model)
        vac = np.diag([1.0, 0.0])
        comp = np.eye(2) - vac
        expected = [np.kron(a, b) for a in (vac, comp) for b in (vac, comp)]
        for got, want in zip(elems, expected):
            np.testing.assert_allclose(got, want, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-4, 4), st.floats(-4, 4), st.sampled_from([0.5, 0.9, 1.0]), st.integers(1, 3))
    def test_psd_and_sum(self, theta, phi, eta, n0):
        model = PnrdModel(eta, n0)
        elems = two_port_povm(theta, phi, model)
        assert np.linalg.eigvalsh(elems).min() > -1e-10
        u = waveplate_unitary(theta, phi, n0)
        single = pnrd_matrix(model, n0)
        total = np.kron(np.diag(single.sum(axis=0)), np.diag(single.sum(axis=0)))
        np.testing.assert_allclose(elems.sum(axis=0), u @ total @ u.conj().T, atol=1e-10)

    def test_identity_sum_perfect(self):
        np.testing.assert_allclose(two_port_povm(0.4, 1.1, PnrdModel(1.0, 2)).sum(axis=0), np.eye(9), atol=1e-10)

    @pytest.mark.parametrize("n0", [1, 2])
    def test_span_rank_bound(self, n0):
        rng = np.random.default_rng(5)
        model = PnrdModel(0.9, n0)
        elems = []
        for _ in range(200):
            s = PolarimetrySetting(*rng.uniform(0, 2 * math.pi, 4))
            elems.extend(two_port_povm(*s.arm("a"), model))
        assert span_rank(elems) <= dpol_per_port(n0)

    @pytest.mark.parametrize("n0", [1, 2, 3])
    def test_single_port_quarter_wave_bound(self, n0):
        rng = np.random.default_rng(11)
        model = PnrdModel(0.9, n0)
        elems = []
        for _ in range(100):
            elems.extend(single_port_povm(0.0, rng.uniform(0, 2 * math.pi), model))
        assert span_rank(elems) <= n0 + 1

    def test_setting_arm(self):
        s = PolarimetrySetting(1, 2, 3, 4)
        assert s.arm("a") == (1, 2) and s.arm("b") == (3, 4)
        with pytest.raises(ValueError):
            s.arm("c")


class TestDpol:
    @pytest.mark.parametrize("n0,value", [(1, 6), (2, 19), (3, 44)])
    def test_per_port(self, n0, value):
        assert dpol_per_port(n0) == value

    @pytest.mark.parametrize("n0,value", [(1, 14), (2, 55)])
    def test_total_photon(self, n0, value):
        assert dpol_total_photon(n0) == value

    def test_partial_sums(self):
        for n0 in range(1, 51):
            assert dpol_per_port(n0) == 2 * sum((k + 1) ** 2 for k in range(n0)) + (n0 + 1) ** 2
            assert dpol_total_photon(n0) == sum((s + 1) ** 2 for s in range(2 * n0 + 1))

    def test_block_sizes_give_per_port(self):
        # blocks of fixed total photon number inside the per-port box
        for n0 in range(1, 8):
            sizes = [min(s, 2 * n0 - s) + 1 for s in range(2 * n0 + 1)]
            assert sum(k * k for k in sizes) == dpol_per_port(n0)

    def test_invalid(self):
        with pytest.raises(ValueError):
            dpol_per_port(0)
        with pytest.raises(ValueError):
            dpol_total_photon(0)


class TestSqueezing:
    def test_zero(self):
        assert squeezing_db_to_r(0) == 0

    def test_unit(self):
        assert squeezing_db_to_r(20 / math.log(10)) == pytest.approx(1.0, rel=1e-15)

    def test_one_point_nine_six_db(self):
        assert squeezing_db_to_r(1.96) == pytest.approx(0.22565, abs=5e-6)

    def test_negative(self):
        with pytest.raises(ValueError):
            squeezing_db_to_r(-1)
