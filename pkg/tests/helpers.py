"""Random instance generators and small independent oracles for the test suite."""

import numpy as np

from epinet.dynamics import EpiParams, EpiState
from epinet.netflux import ZoneNetwork

ANTIDIAG = [[0.0, 1.0], [1.0, 0.0]]
RATES = dict(mu=4e-5, kappa=1e-3, gamma=0.1, p=0.5)
EE2_BETA = (0.3, 0.2)
NU2 = (2.0, 2.0)
SIGMA2 = (0.1, 0.05)


def random_commuter(rng, n, density=0.5):
    """Column-stochastic, zero-diagonal, strongly connected commuter matrix."""
    c = rng.random((n, n)) * (rng.random((n, n)) < density)
    perm = rng.permutation(n)
    # a Hamiltonian cycle guarantees strong connectivity
    for k in range(n):
        c[perm[(k + 1) % n], perm[k]] += rng.uniform(0.1, 1.0)
    np.fill_diagonal(c, 0.0)
    return c / c.sum(axis=0)


def random_network(rng, n, sigma_range=(0.01, 1.0)):
    return ZoneNetwork(random_commuter(rng, n), rng.uniform(*sigma_range, size=n))


def random_params(rng, n, p=None):
    return EpiParams(mu=4e-5, kappa=rng.uniform(1e-4, 0.05), gamma=rng.uniform(0.05, 0.3),
                     p=rng.uniform(0, 1) if p is None else p, beta=rng.uniform(0.01, 0.6, n),
                     nu=rng.uniform(0.5, 3.0, n))


def random_state(rng, n, total=None, positive=False):
    y = rng.random(3 * n) + (0.01 if positive else 0.0)
    if not positive:
        y *= rng.random(3 * n) < 0.8
        if y.sum() == 0:
            y[0] = 1.0
    if total is not None:
        y *= total / y.sum()
    else:
        y *= rng.uniform(10, 1e4)
    return EpiState.from_vector(y)


def two_zone_net(sigma=SIGMA2):
    return ZoneNetwork(ANTIDIAG, sigma)


def r0_2x2(G):
    """Larger root of the characteristic polynomial of a 2x2 matrix."""
    tr = G[0][0] + G[1][1]
    det = G[0][0] * G[1][1] - G[0][1] * G[1][0]
    return 0.5 * (tr + np.sqrt(tr * tr - 4 * det))


def g_closed_2zone(beta, nu, sigma, gamma, mu, p):
    """Entrywise G for the antidiagonal 2-zone network, written out by hand."""
    d1 = gamma + mu + p * sigma[0]
    d2 = gamma + mu + p * sigma[1]
    return [[beta[0] / nu[0] / d1, p * sigma[1] / d2],
            [p * sigma[0] / d1, beta[1] / nu[1] / d2]]


def dfe1_beta_scale(target=0.8):
    """Bisection for the beta scale giving R0 = target on the 2-zone network."""
    def r0(s):
        beta = (s * EE2_BETA[0], s * EE2_BETA[1])
        return r0_2x2(g_closed_2zone(beta, NU2, SIGMA2, RATES["gamma"], RATES["mu"], RATES["p"]))
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if r0(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def dfe1_params():
    s = dfe1_beta_scale()
    return EpiParams(beta=[s * EE2_BETA[0], s * EE2_BETA[1]], nu=NU2, **RATES)


def ee2_params():
    return EpiParams(beta=EE2_BETA, nu=NU2, **RATES)


def dense_rho(G):
    return float(np.max(np.linalg.eigvals(np.asarray(G)).real))


def fd_rho_wrt_entries(G, h):
    """Central differences of the dense spectral radius w.r.t. each entry."""
    G = np.asarray(G, dtype=float)
    n = G.shape[0]
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            up = G.copy()
            up[i, j] += h
            dn = G.copy()
            dn[i, j] -= h
            out[i, j] = (dense_rho(up) - dense_rho(dn)) / (2 * h)
    return out
