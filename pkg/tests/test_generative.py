import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wcca.cca import compute_k, fit_cca
from wcca.errors import DimensionError, ValidationError
from wcca.generative import (
    GenerativeCcaModel,
    alternating_lambdas,
    complete_rotation,
    mixing_matrix,
    sample_level2,
    sample_observed,
    simulation_design,
)
from wcca.whitening import matrix_sqrt_inv_sym


class TestLevel2:
    def test_no_shared_latent(self):
        xt, yt = sample_level2(np.zeros(3), 20000, seed=1)
        c = np.corrcoef(np.hstack([xt, yt]), rowvar=False)
        assert np.max(np.abs(c - np.eye(6))) < 4 / np.sqrt(20000)

    def test_fully_shared(self):
        xt, yt = sample_level2([1.0, -1.0], 50, seed=2)
        np.testing.assert_array_equal(xt[:, 0], yt[:, 0])
        np.testing.assert_array_equal(xt[:, 1], -yt[:, 1])
        assert np.corrcoef(xt[:, 0], yt[:, 0])[0, 1] == pytest.approx(1.0)

    def test_monte_carlo_correlation(self):
        n = 200_000
        lambdas = np.array([0.5, -0.5])
        xt, yt = sample_level2(lambdas, n, seed=3)
        for i, lam in enumerate(lambdas):
            r = np.corrcoef(xt[:, i], yt[:, i])[0, 1]
            assert abs(r - lam) <= 3 * (1 - lam**2) / np.sqrt(n)

    def test_extra_components_are_unshared(self):
        xt, yt = sample_level2([0.8], 10, p=4, q=1, seed=0)
        assert xt.shape == (10, 4) and yt.shape == (10, 1)

    @pytest.mark.parametrize("dof", [3.0, 5.0, 30.0])
    def test_scaled_t_unit_variance(self, dof):
        n = 100_000
        xt, yt = sample_level2([0.4, -0.2], n, latent_dist="t", dof=dof, seed=4)
        for col in np.hstack([xt, yt]).T:
            v = col.var(ddof=1)
            se = np.sqrt(np.var(col**2, ddof=1) / n)
            assert abs(v - 1) <= 3 * se

    def test_errors(self):
        with pytest.raises(ValidationError):
            sample_level2([1.2], 10)
        with pytest.raises(ValidationError):
            sample_level2([0.5], 10, latent_dist="t", dof=2.0)
        with pytest.raises(ValidationError):
            sample_level2([0.5], 10, latent_dist="cauchy")
        with pytest.raises(DimensionError):
            sample_level2([0.5, 0.1], 10, p=3, q=3)

    def test_determinism(self):
        a = sample_level2([0.3, -0.6], 100, p=3, seed=123)
        b = sample_level2([0.3, -0.6], 100, p=3, seed=123)
        c = sample_level2([0.3, -0.6], 100, p=3, seed=124)
        for u, v in zip(a, b):
            assert u.tobytes() == v.tobytes()
        assert not np.array_equal(a[0], c[0])
        r = np.corrcoef(a[0][:, 2], c[0][:, 2])[0, 1]
        assert abs(r) < 4 / np.sqrt(100)

    def test_stream_order(self):
        # Z^X, Z^Y and Z^shared come from three spawned streams in that order
        lambdas = np.array([0.36, -0.64])
        gx, gy, gs = (np.random.default_rng(s) for s in np.random.SeedSequence(9).spawn(3))
        z = np.hstack([gx.standard_normal((5, 2)), gy.standard_normal((5, 2)), gs.standard_normal((5, 2))])
        xt, yt = sample_level2(lambdas, 5, seed=9)
        np.testing.assert_allclose(np.hstack([xt, yt]), z @ mixing_matrix(lambdas).T, atol=1e-15)


class TestMixingAlgebra:
    @pytest.mark.parametrize("alpha", [0.0, 0.25, 0.7, 1.0])
    def test_two_variable_illustration(self, alpha):
        # X1 and X2 share one latent with weight alpha
        a = mixing_matrix([alpha])
        cov = a @ a.T
        assert cov[0, 1] / np.sqrt(cov[0, 0] * cov[1, 1]) == pytest.approx(alpha, abs=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(
        lambdas=st.lists(st.floats(-1, 1), min_size=1, max_size=6),
        extra=st.integers(0, 4),
    )
    def test_population_covariance(self, lambdas, extra):
        m = len(lambdas)
        a = mixing_matrix(lambdas, p=m + extra, q=m)
        cov = a @ a.T
        expected = np.eye(2 * m + extra)
        idx = np.arange(m)
        expected[idx, m + extra + idx] = expected[m + extra + idx, idx] = lambdas
        np.testing.assert_allclose(cov, expected, atol=1e-14)


class TestObserved:
    def test_identity_coloring_matches_level2(self):
        lambdas = np.array([0.7, -0.2])
        model = GenerativeCcaModel(lambdas, np.eye(3), np.eye(2), seed=5)
        x, y = sample_observed(model, 40)
        xt, yt = sample_level2(lambdas, 40, 3, 2, seed=5)
        np.testing.assert_array_equal(x, xt)
        np.testing.assert_array_equal(y, yt)

    def test_translation(self, rng):
        phi = np.eye(2) + 0.4 * rng.standard_normal((2, 2))
        mu = np.array([10.0, -3.0])
        model = GenerativeCcaModel([0.3], phi, np.eye(1), mean_x=mu, seed=6)
        n = 50_000
        x, _ = model.sample(n)
        sigma = np.sqrt(np.diag(phi.T @ phi))
        assert np.all(np.abs(x.mean(0) - mu) <= 3 * sigma / np.sqrt(n))
        np.testing.assert_allclose(np.cov(x, rowvar=False), phi.T @ phi, atol=0.05)

    def test_population_summary_recovers_lambdas(self, rng):
        phi_x = np.eye(4) + 0.3 * rng.standard_normal((4, 4))
        phi_y = np.eye(3) + 0.3 * rng.standard_normal((3, 3))
        lambdas = np.array([0.8, -0.5, 0.1])
        model = GenerativeCcaModel(lambdas, phi_x, phi_y)
        K = compute_k(model.population_summary())
        s = np.sort(np.linalg.svd(K, compute_uv=False))[::-1]
        np.testing.assert_allclose(s, np.abs(lambdas), atol=1e-12)

    def test_invalid_models(self):
        with pytest.raises(ValidationError, match="invertible"):
            GenerativeCcaModel([0.1], np.zeros((2, 2)), np.eye(1))
        with pytest.raises(DimensionError):
            GenerativeCcaModel([0.1], np.ones((2, 3)), np.eye(1))
        with pytest.raises(DimensionError):
            GenerativeCcaModel([0.1, 0.2], np.eye(2), np.eye(1))
        with pytest.raises(ValidationError):
            GenerativeCcaModel([1.5], np.eye(1), np.eye(1))


class TestSimulationDesign:
    def test_default_dimensions(self):
        model = simulation_design(60, 10, 0.9)
        sxy = model.cross_covariance()
        expected = np.zeros((60, 10))
        expected[np.arange(10), np.arange(10)] = 0.9 * np.array([1, -1] * 5)
        np.testing.assert_array_equal(sxy, expected)
        cov = model.joint_covariance()
        np.testing.assert_array_equal(cov[:60, :60], np.eye(60))
        np.testing.assert_array_equal(cov[60:, 60:], np.eye(10))

    def test_zero_magnitude(self):
        assert not simulation_design(12, 10, 0.0).cross_covariance().any()

    @pytest.mark.parametrize("lam", [0.0, 0.3, 0.9, 0.99])
    def test_positive_definite(self, lam):
        vals = np.linalg.eigvalsh(simulation_design(60, 10, lam).joint_covariance())
        assert vals[0] == pytest.approx(1 - lam, abs=1e-12)

    def test_alternating_beyond_ten(self):
        np.testing.assert_array_equal(alternating_lambdas(12, 0.5), [0.5, -0.5] * 5 + [0, 0])

    def test_invalid_magnitude(self):
        with pytest.raises(ValidationError):
            simulation_design(60, 10, 1.1)


def test_complete_rotation(rng):
    q, _ = np.linalg.qr(rng.standard_normal((7, 3)))
    full = complete_rotation(q.T)
    np.testing.assert_allclose(full @ full.T, np.eye(7), atol=1e-12)
    np.testing.assert_array_equal(full[:3], q.T)
    np.testing.assert_array_equal(complete_rotation(np.eye(3)[:1]), np.eye(3))


def _aligned_estimates(truth, est):
    """Signed estimate for each true component, matched by direction alignment.

    The sign of the estimate is taken relative to the true orientation of both
    rotations, so it is unaffected by how the diagonal sign rule happens to
    resolve a poorly conditioned rotation row.
    """
    ax = truth.rotation_x @ est.rotation_x.T
    ay = truth.rotation_y @ est.rotation_y.T
    out = np.empty(truth.m)
    for i in range(truth.m):
        j = int(np.argmax(np.abs(ax[i]) + np.abs(ay[i])))
        out[i] = est.lambdas[j] * np.sign(ax[i, j]) * np.sign(ay[i, j])
    return out


@pytest.fixture(scope="module")
def nutrimouse_round_trip(nutrimouse):
    x, y = nutrimouse["gene"], nutrimouse["lipid"]
    fitted = fit_cca(x, y)
    gen = GenerativeCcaModel.from_cca_model(fitted, x, y, seed=2)
    xs, ys = gen.sample(50_000)
    return fitted, fit_cca(xs, ys, shrinkage="none"), gen


class TestNutrimouseRoundTrip:
    def test_generating_covariance(self, nutrimouse_round_trip, nutrimouse):
        fitted, _, gen = nutrimouse_round_trip
        sd = np.sqrt(np.diag(gen.joint_covariance()))
        np.testing.assert_allclose(sd[:120], fitted.sd_x, rtol=1e-10)
        K = compute_k(gen.population_summary())
        s = np.linalg.svd(K, compute_uv=False)
        np.testing.assert_allclose(s, np.sort(np.abs(fitted.lambdas))[::-1], atol=1e-10)

    def test_lambdas_recovered(self, nutrimouse_round_trip):
        fitted, refit, _ = nutrimouse_round_trip
        est = _aligned_estimates(fitted, refit)
        strong = np.abs(fitted.lambdas) >= 0.05
        assert np.all(np.abs(est - fitted.lambdas)[strong] <= 0.02)
        assert np.all(np.sign(est[strong]) == np.sign(fitted.lambdas[strong]))
        # the weakest components sit at the sampling noise floor
        assert np.all(np.abs(est - fitted.lambdas) <= 0.05)

    @pytest.mark.xfail(
        strict=True,
        reason="components with near-zero correlation or ill-conditioned sign rows "
        "cannot be recovered to 0.02 by positional comparison at n = 50000",
    )
    def test_lambdas_recovered_positionally(self, nutrimouse_round_trip):
        fitted, refit, _ = nutrimouse_round_trip
        assert np.all(np.abs(refit.lambdas - fitted.lambdas) <= 0.02)


def test_designed_round_trip():
    lambdas = np.array([0.85, -0.6, 0.4, -0.25])
    rng = np.random.default_rng(7)
    a = rng.standard_normal((300, 10))
    cor = np.corrcoef(a, rowvar=False)
    root, _ = matrix_sqrt_inv_sym(cor)
    sd = np.linspace(0.5, 3, 10)
    model = GenerativeCcaModel(lambdas, root[:6, :6] * sd[:6], root[6:, 6:] * sd[6:], seed=1)
    refit = fit_cca(*model.sample(50_000), shrinkage="none")
    assert np.all(np.abs(refit.lambdas - lambdas) <= 0.02)
    assert np.array_equal(np.sign(refit.lambdas), np.sign(lambdas))
