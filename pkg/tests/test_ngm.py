import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epinet.dynamics import jacobian
from epinet.errors import ConvergenceError, DataError
from epinet.equilibria import compute_dfe
from epinet.netflux import ZoneNetwork, build_flux
from epinet.ngm import build_ngm, jacobian_blocks_at_dfe, ngm_from_phi, spectral_abscissa, spectral_radius

from helpers import (EE2_BETA, NU2, RATES, SIGMA2, dense_rho, ee2_params, g_closed_2zone, r0_2x2,
                     random_network, random_params, two_zone_net)


def test_ee2_r0_matches_characteristic_polynomial():
    G = g_closed_2zone(EE2_BETA, NU2, SIGMA2, RATES["gamma"], RATES["mu"], RATES["p"])
    nd = build_ngm(two_zone_net(), ee2_params())
    np.testing.assert_allclose(nd.G, G, rtol=1e-15)
    assert nd.r0 == pytest.approx(r0_2x2(G), rel=1e-12)
    # frozen from the quadratic above
    assert nd.r0 == pytest.approx(1.1765536724657373, rel=1e-12)


def test_assembled_G_equals_closed_form(rng):
    for _ in range(10):
        n = int(rng.integers(2, 9))
        net = random_network(rng, n)
        params = random_params(rng, n)
        nd = build_ngm(net, params)
        np.testing.assert_allclose(nd.G, nd.F @ np.linalg.inv(nd.Vmat), rtol=1e-13)
        np.testing.assert_allclose(nd.G, ngm_from_phi(build_flux(net).phi, net.sigma, params), rtol=1e-14)


def test_no_commuting_infectives_gives_diagonal_G(rng):
    net = random_network(rng, 5)
    params = random_params(rng, 5, p=0.0)
    nd = build_ngm(net, params)
    beta, nu = params.vectors(5)
    expected = beta / nu / (params.gamma + params.mu)
    np.testing.assert_allclose(nd.G, np.diag(expected), rtol=1e-15)
    assert nd.r0 == pytest.approx(expected.max(), rel=1e-12)


def test_uniform_symmetric_network_has_equal_perron_vectors():
    c = (np.ones((4, 4)) - np.eye(4)) / 3
    net = ZoneNetwork(c, [0.2] * 4)
    nd = build_ngm(net, ee2_params().replace(beta=0.3, nu=2.0))
    np.testing.assert_allclose(nd.v, 0.25, rtol=1e-12)
    np.testing.assert_allclose(nd.w / nd.w.sum(), nd.v, rtol=1e-10)


def test_perron_pair_residuals(rng):
    for _ in range(10):
        n = int(rng.integers(2, 9))
        nd = build_ngm(random_network(rng, n), random_params(rng, n))
        assert np.all(nd.G >= 0)
        assert np.all(nd.v > 0) and np.all(nd.w > 0)
        assert nd.v.sum() == pytest.approx(1.0, abs=1e-14)
        assert nd.w @ nd.v == pytest.approx(1.0, abs=1e-12)
        assert np.abs(nd.G @ nd.v - nd.r0 * nd.v).max() <= 1e-10 * nd.r0
        assert np.abs(nd.w @ nd.G - nd.r0 * nd.w).max() <= 1e-10 * nd.r0 * nd.w.max()


def test_spectral_radius_scaled_identity():
    rho, v, w, _ = spectral_radius(3.5 * np.eye(4))
    assert rho == pytest.approx(3.5, rel=1e-14)


def test_spectral_radius_periodic_matrix():
    rho, v, w, _ = spectral_radius([[0.0, 1.0], [1.0, 0.0]])
    assert rho == pytest.approx(1.0, rel=1e-12)
    np.testing.assert_allclose(v, [0.5, 0.5], rtol=1e-12)
    np.testing.assert_allclose(w, [1.0, 1.0], rtol=1e-12)
    cycle = 2.0 * np.roll(np.eye(5), 1, axis=0)
    assert spectral_radius(cycle)[0] == pytest.approx(2.0, rel=1e-10)


def test_spectral_radius_against_dense_solver(rng):
    for _ in range(10):
        M = rng.random((8, 8))
        assert spectral_radius(M)[0] == pytest.approx(dense_rho(M), rel=1e-10)


def test_spectral_radius_errors(rng):
    with pytest.raises(DataError):
        spectral_radius([[0.0, -1.0], [1.0, 0.0]])
    M = rng.random((6, 6))
    with pytest.raises(ConvergenceError):
        spectral_radius(M, max_iter=2)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10))
def test_r0_bounded_by_max_column_sum(seed, n):
    rng = np.random.default_rng(seed)
    nd = build_ngm(random_network(rng, n), random_params(rng, n))
    assert nd.r0 <= np.abs(nd.G).sum(axis=0).max() * (1 + 1e-12)
    assert nd.r0 == pytest.approx(dense_rho(nd.G), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 10))
def test_scaled_flux_is_singular_M_matrix(seed, n):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n)
    A = -build_flux(net).scaled
    off = A[~np.eye(n, dtype=bool)]
    assert np.all(off <= 0)
    ev = np.linalg.eigvals(A)
    assert ev.real.min() >= -1e-12 * net.sigma.max()
    assert np.sort(np.abs(ev))[0] <= 1e-12 * net.sigma.max()


def test_threshold_agrees_with_abscissa_of_F_minus_V(rng):
    for _ in range(50):
        n = int(rng.integers(2, 8))
        net = random_network(rng, n)
        params = random_params(rng, n)
        nd = build_ngm(net, params)
        if abs(nd.r0 - 1.0) < 1e-8:
            continue
        assert (nd.r0 < 1) == (spectral_abscissa(nd.F - nd.Vmat) < 0)


def test_block_spectra_match_full_jacobian_at_dfe(rng):
    for _ in range(5):
        n = int(rng.integers(2, 6))
        net = random_network(rng, n)
        params = random_params(rng, n)
        dfe = compute_dfe(net, params, 1000.0)
        blocks = jacobian_blocks_at_dfe(net, params, dfe)
        union = np.concatenate([np.linalg.eigvals(b) for b in (blocks.flux, blocks.infective, blocks.recovered)])
        full = np.linalg.eigvals(jacobian(dfe.as_vector(), net, params))
        key = lambda z: (round(z.real, 8), round(z.imag, 8))
        a = np.array(sorted(union, key=key))
        b = np.array(sorted(full, key=key))
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_block_properties(rng):
    net = random_network(rng, 5)
    params = random_params(rng, 5)
    nd = build_ngm(net, params)
    blocks = jacobian_blocks_at_dfe(net, params)
    s = blocks.summary()
    assert abs(s["flux"]["spectral_abscissa"]) <= 1e-12
    assert s["recovered"]["spectral_abscissa"] == pytest.approx(-(params.mu + params.kappa), rel=1e-9)
    np.testing.assert_allclose(blocks.infective, nd.F - nd.Vmat, atol=1e-15)
    assert (s["infective"]["spectral_abscissa"] < 0) == (nd.r0 < 1)
