"""Next-generation matrix, basic reproductive number and Perron vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DataError, NumericalError
from .netflux import build_flux


@dataclass(frozen=True)
class NextGenData:
    """F, V, G = F V^-1, R0 = rho(G) and the Perron pair of G.

    ``v`` is the right Perron vector (sums to 1), ``w`` the left one scaled so
    that ``w @ v == 1``.
    """

    F: np.ndarray
    Vmat: np.ndarray
    G: np.ndarray
    r0: float
    v: np.ndarray
    w: np.ndarray
    iterations: int = 0

    def to_dict(self):
        return {
            "r0": self.r0,
            "G": self.G.tolist(),
            "v": self.v.tolist(),
            "w": self.w.tolist(),
            "power_iterations": self.iterations,
        }


def spectral_abscissa(matrix):
    return float(np.max(np.linalg.eigvals(np.asarray(matrix, dtype=float)).real))


def ngm_from_phi(phi, sigma, params):
    """G from its entrywise closed form for arbitrary off-diagonal ``phi``.

    ``g_ij = p sigma_j phi_ij / (gamma + mu + p sigma_j)`` off the diagonal and
    ``g_jj = (beta_j / nu_j) / (gamma + mu + p sigma_j)``. The diagonal of
    ``phi`` is never read.
    """
    phi = np.asarray(phi, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    n = phi.shape[0]
    beta, nu = params.vectors(n)
    denom = params.gamma + params.mu + params.p * sigma
    G = params.p * sigma[np.newaxis, :] * phi / denom[np.newaxis, :]
    G[np.diag_indices(n)] = (beta / nu) / denom
    return G


def spectral_radius(M, tol=1e-12, max_iter=100_000, check=True):
    """Perron root and vectors of a nonnegative irreducible matrix.

    Power iteration on ``M`` and ``M.T`` starting from the all-ones vector.
    The eigenvalue estimate is the 1-norm growth ``sum(M x) / sum(x)``; the
    iteration stops once successive estimates differ by at most
    ``tol * max(1, rho)`` and the eigen-residual is below ``100 * tol * rho``.
    The returned root is the two-sided Rayleigh quotient ``w M v / w v``.
    When the diagonal is entirely zero the matrix may be periodic, so the
    iteration runs on ``M + tau*id`` with ``tau`` half the largest column sum.

    Returns
    -------
    rho : float
    v : ndarray
        Right vector, sums to 1.
    w : ndarray
        Left vector, ``w @ v == 1``.
    iterations : int
    """
    M = np.asarray(M, dtype=float)
    if check and np.any(M < 0):
        raise DataError("spectral_radius needs a nonnegative matrix")
    n = M.shape[0]
    tau = 0.0
    if not np.any(np.diag(M) > 0):
        tau = 0.5 * float(M.sum(axis=0).max())
    B = M + tau * np.eye(n)

    def run(A):
        x = np.full(n, 1.0 / n)
        lam_old = np.inf
        gap = np.inf
        for it in range(1, max_iter + 1):
            y = A @ x
            s = y.sum()
            if s <= 0:
                return 0.0, x, it
            lam = s
            y /= s
            gap = abs(lam - lam_old)
            scale = max(1.0, abs(lam))
            if gap <= tol * scale:
                resid = np.abs(A @ y - lam * y).sum()
                if resid <= 100 * tol * scale:
                    return lam, y, it
            x, lam_old = y, lam
        raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations (gap {gap:.3e})",
                               iterations=max_iter, gap=gap)

    lam_r, v, it_r = run(B)
    lam_l, w, it_l = run(B.T)
    wv = w @ v
    if wv <= 0:
        raise NumericalError("left and right Perron vectors are orthogonal")
    # two-sided Rayleigh quotient: error quadratic in the vector errors
    rho = (w @ M @ v) / wv
    return float(rho), v, w / wv, max(it_r, it_l)


def build_ngm(net, params, tol=1e-12, max_iter=100_000):
    """Assemble F, V and G for a network and compute R0 with its Perron pair."""
    flux = build_flux(net)
    n = net.n
    beta, nu = params.vectors(n)
    sigma = net.sigma
    phi_plus_scaled = flux.scaled + np.diag(sigma)
    F = np.diag(beta / nu) + params.p * phi_plus_scaled
    vdiag = params.gamma + params.mu + params.p * sigma
    Vmat = np.diag(vdiag)
    G = F / vdiag[np.newaxis, :]
    r0, v, w, it = spectral_radius(G, tol=tol, max_iter=max_iter)
    for a in (F, Vmat, G, v, w):
        a.setflags(write=False)
    return NextGenData(F, Vmat, G, r0, v, w, it)


@dataclass(frozen=True)
class JacobianBlocks:
    flux: np.ndarray
    infective: np.ndarray
    recovered: np.ndarray

    def summary(self):
        out = {}
        for name in ("flux", "infective", "recovered"):
            ev = np.linalg.eigvals(getattr(self, name))
            out[name] = {
                "spectral_abscissa": float(ev.real.max()),
                "eigenvalues_real": sorted(float(x) for x in ev.real),
            }
        return out


def jacobian_blocks_at_dfe(net, params, dfe=None):
    """Diagonal blocks of the Jacobian at the disease-free equilibrium.

    The full Jacobian is block triangular at the DFE, so its spectrum is the
    union of the spectra of ``sigma|>Phi``, ``F - V`` and
    ``-(mu + kappa) id + sigma|>Phi``. ``dfe`` is accepted for interface
    symmetry; the blocks do not depend on it.
    """
    M = build_flux(net).scaled
    n = net.n
    beta, nu = params.vectors(n)
    eye = np.eye(n)
    infective = np.diag(beta / nu) - (params.gamma + params.mu) * eye + params.p * M
    recovered = -(params.mu + params.kappa) * eye + M
    return JacobianBlocks(np.array(M), infective, recovered)
