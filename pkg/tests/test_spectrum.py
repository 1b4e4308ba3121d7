import math

import numpy as np
import pytest

from oracles import jacobi_eigenvalues
from sshlab.model import (
    BoundaryCondition,
    ChainParams,
    Realization,
    build_chain,
    coherence_length,
    dispersion,
)
from sshlab.spectrum import (
    SpectralResult,
    eigenvalues_dense,
    eigenvalues_tridiagonal,
    eigenvector_near_zero,
    eigvals_ql,
    eigvals_sturm,
    householder_tridiagonalize,
    midgap_pair,
    sturm_count,
)


def random_chain(rng, n=None, bc=BoundaryCondition.OPEN, w=None):
    n = n or int(rng.integers(2, 12))
    w = w if w is not None else float(rng.uniform(0.3, 1.7))
    params = ChainParams(n=n, u=1.0, w=w, bc=bc)
    return params, build_chain(params, Realization(couplings=rng.uniform(0.3, 1.7, n)))


class TestTridiagonal:
    def test_single_dimer_pair(self):
        # 2x2 block with off-diagonal u1 has eigenvalues +-u1
        ev = eigvals_sturm(np.zeros(2), np.array([0.7]))
        np.testing.assert_allclose(ev, [-0.7, 0.7], atol=1e-15)

    def test_clean_open_chain_vs_jacobi_oracle(self):
        params = ChainParams(n=8, u=1.0, w=0.8)
        m = build_chain(params, Realization(couplings=np.full(8, 1.0)))
        got = eigenvalues_tridiagonal(m).eigenvalues
        expected = jacobi_eigenvalues(m.to_dense())
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_sum_of_squares_trace_identity(self):
        rng = np.random.default_rng(3)
        params, m = random_chain(rng, n=40)
        ev = eigenvalues_tridiagonal(m).eigenvalues
        assert float(np.sum(ev**2)) == pytest.approx(m.trace_h2(), rel=1e-10)

    def test_ql_and_bisection_agree(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            n = int(rng.integers(2, 30))
            d = rng.standard_normal(n)
            e = rng.standard_normal(n - 1)
            scale = max(np.max(np.abs(d)), np.max(np.abs(e)), 1.0)
            np.testing.assert_allclose(
                eigvals_sturm(d, e), np.sort(eigvals_ql(d, e)), atol=1e-11 * scale
            )

    def test_rejects_periodic_matrix(self):
        rng = np.random.default_rng(5)
        _, m = random_chain(rng, bc=BoundaryCondition.PERIODIC)
        with pytest.raises(ValueError):
            eigenvalues_tridiagonal(m)

    def test_sturm_count_brackets_spectrum(self):
        rng = np.random.default_rng(6)
        d = rng.standard_normal(9)
        e = rng.standard_normal(8)
        ev = eigvals_sturm(d, e)
        e2 = e * e
        assert sturm_count(d, e2, np.array([ev[0] - 1.0]))[0] == 0
        assert sturm_count(d, e2, np.array([ev[-1] + 1.0]))[0] == 9
        mid = 0.5 * (ev[3] + ev[4])
        assert sturm_count(d, e2, np.array([mid]))[0] == 4


class TestDense:
    def test_clean_periodic_matches_dispersion(self):
        n, u, w = 6, 1.0, 0.8
        params = ChainParams(n=n, u=u, w=w, bc=BoundaryCondition.PERIODIC)
        m = build_chain(params, Realization(couplings=np.full(n, u)))
        got = eigenvalues_dense(m).eigenvalues
        ks = 2.0 * np.pi * np.arange(n) / n
        bands = dispersion(u, w, ks)
        expected = np.sort(np.concatenate([bands, -bands]))
        np.testing.assert_allclose(got, expected, atol=1e-12)
        # clean even ring: gap equals 2|u - w|
        assert eigenvalues_dense(m).gap == pytest.approx(0.4, abs=1e-12)

    def test_agrees_with_tridiagonal_backend(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            params, m = random_chain(rng)
            a = eigenvalues_tridiagonal(m).eigenvalues
            b = eigenvalues_dense(m.to_dense()).eigenvalues
            scale = max(float(np.max(np.abs(a))), 1.0)
            assert float(np.max(np.abs(a - b))) <= 1e-10 * scale

    def test_householder_preserves_spectrum(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((12, 12))
        a = a + a.T
        d, e = householder_tridiagonalize(a)
        np.testing.assert_allclose(
            eigvals_sturm(d, e), jacobi_eigenvalues(a), atol=1e-12
        )

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            eigenvalues_dense(np.array([[0.0, 1.0], [2.0, 0.0]]))


class TestSpectralResult:
    def test_gap_and_pair_indices(self):
        res = SpectralResult.from_eigenvalues(np.array([-2.0, -0.3, 0.3, 2.0]))
        assert res.gap == pytest.approx(0.6)
        assert res.min_pair_indices == (1, 2)

    def test_eigenvalues_sorted(self):
        rng = np.random.default_rng(9)
        _, m = random_chain(rng, n=20)
        ev = eigenvalues_tridiagonal(m).eigenvalues
        assert np.all(np.diff(ev) >= 0.0)


class TestEigenvectors:
    def test_residual_and_orthogonality(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            params, m = random_chain(rng, n=int(rng.integers(4, 40)))
            spectral = eigenvalues_tridiagonal(m)
            v_minus, v_plus = midgap_pair(m, spectral)
            lam = 0.5 * spectral.gap
            norm = m.norm_bound()
            for v, sign in ((v_plus, 1.0), (v_minus, -1.0)):
                assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
                resid = m.matvec(v) - sign * lam * v
                assert np.linalg.norm(resid) <= 1e-10 * norm
            assert abs(float(v_minus @ v_plus)) <= 1e-10

    def test_dense_periodic_eigenvector(self):
        rng = np.random.default_rng(11)
        params, m = random_chain(rng, n=10, bc=BoundaryCondition.PERIODIC)
        spectral = eigenvalues_dense(m)
        v_plus = eigenvector_near_zero(m, "plus", spectral)
        lam = 0.5 * spectral.gap
        resid = m.matvec(v_plus) - lam * v_plus
        assert np.linalg.norm(resid) <= 1e-10 * m.norm_bound()

    def test_clean_topological_envelope_slope(self):
        # left-edge amplitude decays as exp(-n/xi) on the a-sublattice
        u, w, n = 0.8, 1.0, 60
        params = ChainParams(n=n, u=u, w=w)
        m = build_chain(params, Realization(couplings=np.full(n, u)))
        v = eigenvector_near_zero(m, "plus")
        if abs(v[0]) < abs(v[-1]):
            v = v[::-1]  # the plus state may lean on either edge; use the a-side
        amps = np.abs(v[0::2])[:16]
        slope = np.polyfit(np.arange(16), np.log(amps), 1)[0]
        xi = coherence_length(u, w)
        assert abs(slope + 1.0 / xi) <= 0.05 / xi

    def test_amplitude_alternation_on_a_sublattice(self):
        u, w, n = 0.8, 1.0, 60
        params = ChainParams(n=n, u=u, w=w)
        m = build_chain(params, Realization(couplings=np.full(n, u)))
        spectral = eigenvalues_tridiagonal(m)
        v_minus, v_plus = midgap_pair(m, spectral)
        # the symmetric/antisymmetric combinations isolate the left edge mode
        left = (v_plus + v_minus) / math.sqrt(2.0)
        if abs(left[0]) < abs(left[-1]):
            left = (v_plus - v_minus) / math.sqrt(2.0)
        a_part = left[0::2][:10]
        signs = np.sign(a_part) * np.sign(a_part[0])
        np.testing.assert_array_equal(signs, [(-1.0) ** i for i in range(10)])

    def test_midgap_splitting_exponentially_small(self):
        u, w, n = 0.8, 1.0, 60
        params = ChainParams(n=n, u=u, w=w)
        m = build_chain(params, Realization(couplings=np.full(n, u)))
        xi = coherence_length(u, w)
        e_min = 0.5 * eigenvalues_tridiagonal(m).gap
        assert e_min <= 10.0 * math.exp(-n / (2.0 * xi))

    def test_deep_degenerate_pair_still_resolved(self):
        # N=150 gives a +- splitting below machine resolution of the pair
        u, w, n = 0.8, 1.0, 150
        params = ChainParams(n=n, u=u, w=w)
        m = build_chain(params, Realization(couplings=np.full(n, u)))
        v_minus, v_plus = midgap_pair(m)
        assert abs(float(v_minus @ v_plus)) <= 1e-10
        for v in (v_minus, v_plus):
            resid = m.matvec(v) - float(v @ m.matvec(v)) * v
            assert np.linalg.norm(resid) <= 1e-10 * m.norm_bound()

    def test_invalid_which(self):
        rng = np.random.default_rng(12)
        _, m = random_chain(rng)
        with pytest.raises(ValueError):
            eigenvector_near_zero(m, "both")
