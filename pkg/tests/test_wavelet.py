import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmwave import ConfigError, build_basis, eval_phi, eval_psi, gram_matrix, quadrature_coefficient
from lmwave.wavelet import cascade, daubechies_filter, level_analysis, level_synthesis

from oracles import DB_FILTERS, lattice_sum, refined_quadrature

# frozen from the depth-20 lattice-sum oracle (tests/oracles.py)
PSI_DB3_J3_K2_AT_03 = 0.13711841646104264
PHI_DB3_J2_K1_AT_06 = 1.3401841001411325
# frozen from refined_quadrature on the depth-20 table, converged to 1e-9
QUAD_F_DB3_J2_K1 = 0.004514213564638318


def quad_f(t):
    return 8.0 * (t - 0.5) ** 2 - 2.0 / 3.0


@pytest.fixture(scope="module")
def db3():
    return build_basis(3, 14)


@pytest.fixture(scope="module")
def db3_deep():
    return build_basis(3, 20)


@pytest.fixture(scope="module")
def haar():
    return build_basis(1, 14)


class TestFilters:
    @pytest.mark.parametrize("vm", sorted(DB_FILTERS))
    def test_matches_published(self, vm):
        np.testing.assert_allclose(daubechies_filter(vm), DB_FILTERS[vm], atol=1e-10)

    @pytest.mark.parametrize("vm", range(1, 11))
    def test_orthonormality_conditions(self, vm):
        h = daubechies_filter(vm)
        assert h.sum() == pytest.approx(np.sqrt(2.0), abs=1e-12)
        for shift in range(0, len(h), 2):
            dot = np.dot(h[shift:], h[: len(h) - shift])
            assert dot == pytest.approx(1.0 if shift == 0 else 0.0, abs=1e-9)

    def test_db2_integer_values_closed_form(self):
        phi, _ = cascade(daubechies_filter(2), 8)
        per = 2**8
        assert phi[per] == pytest.approx((1 + np.sqrt(3)) / 2, abs=1e-12)
        assert phi[2 * per] == pytest.approx((1 - np.sqrt(3)) / 2, abs=1e-12)


class TestBuildBasis:
    def test_haar_tables(self, haar):
        x = haar.table_grid()
        inside = x < 1.0
        np.testing.assert_array_equal(haar.eval_table_phi[inside], 1.0)
        assert np.all(haar.eval_table_psi[x < 0.5] == 1.0)
        assert np.all(haar.eval_table_psi[(x >= 0.5) & inside] == -1.0)

    def test_support_length(self, db3):
        assert db3.support_length == 5
        assert db3.eval_table_phi.size == 5 * 2**14 + 1

    def test_depth_refinement_agrees(self, db3, db3_deep):
        coarse = db3.eval_table_phi
        fine = db3_deep.eval_table_phi[:: 2**6]
        assert np.abs(coarse - fine).max() < 1e-6
        assert np.abs(db3.eval_table_psi - db3_deep.eval_table_psi[:: 2**6]).max() < 1e-6

    @pytest.mark.parametrize("p", [0, 1, 2])
    def test_vanishing_moments(self, db3_deep, p):
        x = db3_deep.table_grid()
        dx = x[1] - x[0]
        y = db3_deep.eval_table_psi * x**p
        moment = (y.sum() - 0.5 * (y[0] + y[-1])) * dx
        assert abs(moment) < 1e-6

    def test_phi_integrates_to_one(self, db3):
        dx = 2.0**-14
        assert np.sum(db3.eval_table_phi) * dx == pytest.approx(1.0, abs=1e-10)

    def test_partition_of_unity(self, db3):
        per = 2**14
        sums = db3.eval_table_phi[:-1].reshape(5, per).sum(axis=0)
        assert np.abs(sums - 1.0).max() < 1e-6

    def test_two_scale_relation(self, db3):
        phi = db3.eval_table_phi
        per = 2**14
        i = np.arange(phi.size)
        rhs = np.zeros(phi.size)
        for n, c in enumerate(db3.filter):
            idx = 2 * i - n * per
            ok = (idx >= 0) & (idx < phi.size)
            rhs[ok] += np.sqrt(2.0) * c * phi[idx[ok]]
        assert np.abs(phi - rhs).max() < 1e-6

    @pytest.mark.parametrize("vm,depth", [(0, 14), (11, 14), (3, 7), (3, 21)])
    def test_rejects_unsupported(self, vm, depth):
        with pytest.raises(ConfigError):
            build_basis(vm, depth)

    def test_cached_and_immutable(self, db3):
        assert build_basis(3, 14) is db3
        with pytest.raises(ValueError):
            db3.eval_table_psi[0] = 1.0


class TestEvaluation:
    def test_haar_psi_closed_form(self, haar):
        assert eval_psi(haar, 0, 0, 0.25) == pytest.approx(1.0, abs=1e-10)
        assert eval_psi(haar, 0, 0, 0.75) == pytest.approx(-1.0, abs=1e-10)

    def test_haar_phi_closed_form(self, haar):
        assert eval_phi(haar, 1, 0, 0.25) == pytest.approx(np.sqrt(2.0), abs=1e-10)
        assert eval_phi(haar, 1, 0, 0.75) == pytest.approx(0.0, abs=1e-10)

    def test_haar_level2_values(self, haar):
        t = np.array([0.05, 0.2, 0.3, 0.45, 0.6])
        np.testing.assert_allclose(eval_psi(haar, 2, 1, t), [0, 0, 2, -2, 0], atol=1e-12)

    def test_phi00_is_one(self, db3):
        t = np.linspace(0, 1, 97, endpoint=False)
        np.testing.assert_array_equal(eval_phi(db3, 0, 0, t), 1.0)

    def test_db3_psi_lattice_sum(self, db3, db3_deep):
        oracle = lattice_sum(db3_deep.eval_table_psi, 20, 5, 3, 2, 0.3)
        assert oracle == pytest.approx(PSI_DB3_J3_K2_AT_03, abs=1e-14)
        assert eval_psi(db3_deep, 3, 2, 0.3) == pytest.approx(PSI_DB3_J3_K2_AT_03, abs=1e-12)
        assert eval_psi(db3, 3, 2, 0.3) == pytest.approx(PSI_DB3_J3_K2_AT_03, abs=1e-6)

    def test_db3_phi_lattice_sum(self, db3, db3_deep):
        oracle = lattice_sum(db3_deep.eval_table_phi, 20, 5, 2, 1, 0.6)
        assert oracle == pytest.approx(PHI_DB3_J2_K1_AT_06, abs=1e-14)
        assert eval_phi(db3, 2, 1, 0.6) == pytest.approx(PHI_DB3_J2_K1_AT_06, abs=1e-6)

    @settings(max_examples=60, deadline=None)
    @given(j=st.integers(0, 5), data=st.data(), t=st.floats(0.0, 1.0, exclude_max=True))
    def test_matches_lattice_sum_everywhere(self, db3, j, data, t):
        k = data.draw(st.integers(0, 2**j - 1))
        expected = lattice_sum(db3.eval_table_psi, 14, 5, j, k, t)
        assert eval_psi(db3, j, k, t) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("j,k", [(0, 1), (2, 4), (3, -1)])
    def test_shift_out_of_range(self, db3, j, k):
        with pytest.raises(ValueError):
            eval_psi(db3, j, k, 0.5)
        with pytest.raises(ValueError):
            eval_phi(db3, j, k, 0.5)

    @pytest.mark.parametrize("t", [-0.1, 1.0, np.nan])
    def test_point_out_of_range(self, db3, t):
        with pytest.raises(ValueError):
            eval_psi(db3, 1, 0, t)

    def test_pure_and_deterministic(self, db3):
        t = np.random.default_rng(3).random(1000)
        a = eval_psi(db3, 4, 5, t)
        b = eval_psi(db3, 4, 5, t.copy())
        assert a.tobytes() == b.tobytes()

    def test_array_shape_preserved(self, db3):
        t = np.random.default_rng(0).random((3, 4))
        assert eval_psi(db3, 2, 1, t).shape == (3, 4)


class TestLevelOperations:
    def test_analysis_matches_pointwise(self, db3):
        rng = np.random.default_rng(7)
        t = rng.random(500)
        w = rng.standard_normal(500)
        for kind, fn in (("psi", eval_psi), ("phi", eval_phi)):
            sums = level_analysis(db3, 3, t, w, kind)
            direct = [np.dot(w, fn(db3, 3, k, t)) for k in range(8)]
            np.testing.assert_allclose(sums, direct, atol=1e-12)

    def test_synthesis_matches_pointwise(self, db3):
        rng = np.random.default_rng(8)
        t = rng.random(200)
        c = rng.standard_normal(4)
        direct = sum(c[k] * eval_psi(db3, 2, k, t) for k in range(4))
        np.testing.assert_allclose(level_synthesis(db3, 2, t, c), direct, atol=1e-12)


class TestQuadrature:
    @pytest.mark.parametrize("j,k", [(0, 0), (2, 3), (4, 9)])
    def test_constant_is_annihilated(self, db3, j, k):
        assert abs(quadrature_coefficient(db3, lambda t: 2.5 + 0 * t, j, k)) < 1e-8

    def test_haar_symmetric_function(self, haar):
        assert abs(quadrature_coefficient(haar, quad_f, 0, 0)) < 1e-12

    def test_db3_oracle_value(self, db3, db3_deep):
        refined = refined_quadrature(quad_f, lambda t: eval_psi(db3_deep, 2, 1, t))
        assert refined == pytest.approx(QUAD_F_DB3_J2_K1, abs=1e-9)
        assert quadrature_coefficient(db3, quad_f, 2, 1) == pytest.approx(QUAD_F_DB3_J2_K1, abs=1e-7)

    def test_grid_too_coarse(self, db3):
        with pytest.raises(ValueError):
            quadrature_coefficient(db3, quad_f, 3, 0, grid_size=2**10)

    @pytest.mark.parametrize("j", range(6))
    def test_integral_and_norm(self, db3, j):
        t = np.arange(2**16) / 2**16
        for k in range(2**j):
            v = eval_psi(db3, j, k, t)
            assert abs(v.mean()) < 1e-6
            assert np.mean(v * v) == pytest.approx(1.0, abs=1e-4)

    def test_phi_integral(self, db3):
        t = np.arange(2**16) / 2**16
        for j in (1, 2, 3):
            for k in range(2**j):
                assert eval_phi(db3, j, k, t).mean() == pytest.approx(2.0 ** (-j / 2), abs=1e-10)


class TestGram:
    def test_haar_identity(self, haar):
        G = gram_matrix(haar, 2)
        assert np.abs(G - np.eye(len(G))).max() < 1e-10

    def test_db3_identity(self, db3):
        G = gram_matrix(db3, 4, 2**16)
        assert G.shape == (16, 16)
        assert np.abs(G - np.eye(16)).max() < 1e-4
        assert np.abs(np.diag(G) - 1.0).max() < 1e-4

    def test_depth_refinement_improves_gram(self):
        errs = [np.abs(gram_matrix(build_basis(3, d), 4) - np.eye(16)).max() for d in (8, 14)]
        assert errs[1] < errs[0]
