import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epinet.errors import DataError, DegeneracyError, StructuralError, ValidationError
from epinet.netflux import (ZoneNetwork, build_flux, check_singular, kernel_vector, numerical_rank,
                            read_commuter_csv, shifted_stability, strongly_connected, validate_commuter)

from helpers import ANTIDIAG, random_commuter, random_network


def test_valid_two_zone_commuter():
    assert validate_commuter(ANTIDIAG).ok


def test_nonzero_diagonal_is_reported_by_index():
    res = validate_commuter([[0.5, 1.0], [0.5, 0.0]])
    assert not res.ok
    assert any("c_11" in m for m in res.messages())


def test_bad_column_sum_names_the_column():
    res = validate_commuter([[0.0, 0.9], [1.0, 0.0]])
    assert res.messages() == ["column 2 sums to 0.9"]


def test_negative_entry_reported():
    res = validate_commuter([[0.0, 1.2, 0.5], [1.0, 0.0, 0.5], [0.0, -0.2, 0.0]])
    assert not res.ok


def test_reducible_commuter_rejected():
    block = np.zeros((4, 4))
    block[0, 1] = block[1, 0] = block[2, 3] = block[3, 2] = 1.0
    res = validate_commuter(block)
    assert not res.ok
    assert any("reducible" in m for m in res.messages())
    with pytest.raises(ValidationError):
        ZoneNetwork(block, [0.1] * 4)


def test_structural_and_data_errors():
    with pytest.raises(StructuralError):
        validate_commuter([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    with pytest.raises(StructuralError):
        validate_commuter([[0.0]])
    with pytest.raises(DataError):
        validate_commuter([[0.0, np.nan], [1.0, 0.0]])


def test_tolerance_loosens_column_sum_check():
    c = [[0.0, 1.0 + 1e-9], [1.0, 0.0]]
    assert not validate_commuter(c).ok
    assert validate_commuter(c, tol=1e-8).ok


def test_sigma_validation():
    with pytest.raises(ValidationError):
        ZoneNetwork(ANTIDIAG, [0.1, -0.2])
    with pytest.raises(ValidationError):
        ZoneNetwork(ANTIDIAG, [0.1, 0.2, 0.3])


def test_network_arrays_are_read_only():
    net = ZoneNetwork(ANTIDIAG, [0.1, 0.2])
    with pytest.raises(ValueError):
        net.sigma[0] = 1.0
    assert net.zone_ids == ("z1", "z2")


def test_strong_connectivity_direction():
    adj = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=bool)
    assert strongly_connected(adj)
    adj[0, 2] = False
    assert not strongly_connected(adj)


def test_flux_two_zone():
    flux = build_flux(ZoneNetwork(ANTIDIAG, [0.4, 0.2]))
    np.testing.assert_array_equal(flux.phi, [[-1, 1], [1, -1]])
    np.testing.assert_allclose(flux.scaled, [[-0.4, 0.2], [0.4, -0.2]])
    np.testing.assert_array_equal(flux.phi_plus, ANTIDIAG)


def test_flux_three_zone_ring():
    c = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)
    flux = build_flux(ZoneNetwork(c, [1.0, 1.0, 1.0]))
    np.testing.assert_array_equal(flux.phi, c - np.eye(3))
    assert np.abs(flux.phi.sum(axis=0)).max() == 0.0


def test_check_singular_two_zone():
    det, singular = check_singular([[-0.4, 0.2], [0.4, -0.2]])
    assert singular
    assert abs(det) < 1e-15


def test_check_singular_detects_regular_matrix(rng):
    net = random_network(rng, 5)
    m = build_flux(net).scaled - 0.1 * np.eye(5)
    det, singular = check_singular(m)
    assert not singular
    # independent route: product of eigenvalues
    assert det == pytest.approx(np.prod(np.linalg.eigvals(m)).real, rel=1e-9)


def test_shifted_stability_closed_form():
    # eigenvalues of [[-a, b], [a, -b]] are 0 and -(a + b)
    ev, stable = shifted_stability([[-0.4, 0.2], [0.4, -0.2]], 0.1)
    assert stable
    np.testing.assert_allclose(np.sort(ev.real), [-0.7, -0.1], atol=1e-14)


def test_shifted_stability_tiny_shift_and_bad_shift(rng):
    m = build_flux(random_network(rng, 6)).scaled
    assert shifted_stability(m, 1e-12)[1]
    with pytest.raises(ValueError):
        shifted_stability(m, 0.0)
    with pytest.raises(ValueError):
        shifted_stability(m, -1.0)


def test_shifted_stability_random_networks(rng):
    for _ in range(10):
        m = build_flux(random_network(rng, int(rng.integers(2, 9)))).scaled
        for r in (0.01, 1.0, 100.0):
            assert shifted_stability(m, r)[1]


def test_kernel_two_zone():
    # sigma = (0.4, 0.2): kernel is proportional to (1/0.4, 1/0.2)
    np.testing.assert_allclose(kernel_vector([[-0.4, 0.2], [0.4, -0.2]]), [1 / 3, 2 / 3], rtol=1e-14)


def test_kernel_uniform_symmetric():
    c = (np.ones((3, 3)) - np.eye(3)) / 2
    net = ZoneNetwork(c, [0.3, 0.3, 0.3])
    np.testing.assert_allclose(kernel_vector(build_flux(net).scaled), [1 / 3] * 3, rtol=1e-13)


def test_kernel_against_svd_null_space(rng):
    for n in (3, 6, 10):
        m = build_flux(random_network(rng, n)).scaled
        null = np.linalg.svd(m)[2][-1]
        null = null / null.sum()
        np.testing.assert_allclose(kernel_vector(m), null, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("alpha", [0.5, 2.0, 10.0])
def test_kernel_invariant_under_sigma_scaling(rng, alpha):
    net = random_network(rng, 6)
    x = kernel_vector(build_flux(net).scaled)
    y = kernel_vector(build_flux(net.with_sigma(alpha * net.sigma)).scaled)
    np.testing.assert_allclose(x, y, rtol=1e-10)


def test_kernel_degenerate_null_space():
    block = np.zeros((4, 4))
    block[0, 1] = block[1, 0] = block[2, 3] = block[3, 2] = 1.0
    with pytest.raises(DegeneracyError):
        kernel_vector(0.3 * (block - np.eye(4)))


def test_kernel_rejects_regular_matrix():
    with pytest.raises(DegeneracyError):
        kernel_vector(np.diag([-1.0, -2.0]))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12))
def test_scaled_flux_properties(seed, n):
    rng = np.random.default_rng(seed)
    net = random_network(rng, n, sigma_range=(1e-3, 10.0))
    m = build_flux(net).scaled
    assert np.abs(m.sum(axis=0)).max() <= 1e-12 * max(1.0, net.sigma.max())
    assert check_singular(m)[1]
    assert numerical_rank(m) == n - 1
    assert shifted_stability(m, 1e-3 * net.sigma.min())[1]
    x = kernel_vector(m)
    assert np.all(x > 0)
    assert np.abs(m @ x).max() <= 1e-12 * net.sigma.max()


def test_random_commuter_helper_is_valid(rng):
    for n in range(2, 10):
        assert validate_commuter(random_commuter(rng, n)).ok


def test_read_commuter_csv(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("zone,a,b,c\na,0,0.5,0.5\nb,0.5,0,0.5\nc,0.5,0.5,0\n")
    ids, m = read_commuter_csv(path)
    assert ids == ["a", "b", "c"]
    np.testing.assert_array_equal(m, (np.ones((3, 3)) - np.eye(3)) / 2)
    path.write_text("x,y\n0,1\n1,0\n")
    ids, m = read_commuter_csv(path)
    assert ids == ["x", "y"]
    np.testing.assert_array_equal(m, ANTIDIAG)
