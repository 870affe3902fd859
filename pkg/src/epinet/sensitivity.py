"""Sensitivity of R0 to the next-generation matrix, the flux matrix and the rates.

Three routes to the derivative of R0 with respect to a flux entry are kept
side by side: the formula as it is usually printed (``dR0_dphi_printed``),
the chain rule through the closed form of G (``dR0_dphi_chain``), and a
central finite difference (``fd_dR0_dphi``). The finite difference evaluates
R0 with a dense eigensolver, so it does not share code with the power
iteration behind the other two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .netflux import build_flux
from .ngm import build_ngm, ngm_from_phi

CONVEXITY_TOL = 1e-10


def dense_r0(G):
    """Perron root of a nonnegative matrix as its largest real eigenvalue."""
    return float(np.max(np.linalg.eigvals(np.asarray(G, dtype=float)).real))


def sensitivity_wrt_G(ngm_data):
    """Matrix of ``dR0/dg_ij = w_i v_j``.

    ``w`` is the left and ``v`` the right Perron vector with ``w @ v = 1``.
    """
    return np.outer(ngm_data.w, ngm_data.v)


def _denominators(net, params):
    return params.gamma + params.mu + params.p * net.sigma


def dR0_dphi_printed(ngm_data, net, params):
    """Flux sensitivity evaluated term by term from the commonly quoted formula.

    Entry ``(s, j)`` is
    ``-sum_{i != j} dR0/dg_ij p^2 sigma_j^2 phi_ij / D_j^2 - dR0/dg_jj p sigma_j (beta_j/nu_j) / D_j^2``
    with ``D_j = gamma + mu + p sigma_j``. Nothing depends on ``s``, so all rows
    are equal.
    """
    n = net.n
    dG = sensitivity_wrt_G(ngm_data)
    phi = build_flux(net).phi
    sigma = net.sigma
    beta, nu = params.vectors(n)
    p = params.p
    D2 = _denominators(net, params) ** 2
    col = np.empty(n)
    for j in range(n):
        off = sum(dG[i, j] * p ** 2 * sigma[j] ** 2 * phi[i, j] for i in range(n) if i != j)
        col[j] = -off / D2[j] - dG[j, j] * p * sigma[j] * beta[j] / nu[j] / D2[j]
    return np.tile(col, (n, 1))


def dR0_dphi_chain(ngm_data, net, params):
    """``dR0/dphi_sj = dR0/dg_sj * p sigma_j / D_j`` off the diagonal, 0 on it."""
    dG = sensitivity_wrt_G(ngm_data)
    factor = params.p * net.sigma / _denominators(net, params)
    out = dG * factor[np.newaxis, :]
    np.fill_diagonal(out, 0.0)
    return out


def fd_dR0_dphi(net, params, h=1e-6):
    """Central differences of R0 under single-entry perturbations of phi.

    Each entry is perturbed by ``h * max(1, |phi_sj|)`` without restoring the
    zero column sums (unconstrained directional derivative); G is rebuilt
    from its closed form. Diagonal entries do not enter G and come out as 0;
    they carry no physical meaning.
    """
    if not 1e-8 <= h <= 1e-4:
        raise ValueError(f"finite-difference step must lie in [1e-8, 1e-4], got {h}")
    phi = np.array(build_flux(net).phi)
    n = net.n
    out = np.zeros((n, n))
    for s in range(n):
        for j in range(n):
            step = h * max(1.0, abs(phi[s, j]))
            up = phi.copy()
            up[s, j] += step
            dn = phi.copy()
            dn[s, j] -= step
            out[s, j] = (dense_r0(ngm_from_phi(up, net.sigma, params))
                         - dense_r0(ngm_from_phi(dn, net.sigma, params))) / (2 * step)
    return out


@dataclass(frozen=True)
class ProbeOutcome:
    """Result of one monotonicity or convexity probe.

    ``asserted`` probes carry a verdict in ``holds``; report-only probes
    record the observed ``value`` and leave ``holds`` as None.
    """

    name: str
    parameter: str
    expected: str
    value: float
    observed: str
    asserted: bool
    holds: bool | None

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if self.holds is not None:
            object.__setattr__(self, "holds", bool(self.holds))

    def to_dict(self):
        return dict(name=self.name, parameter=self.parameter, expected=self.expected, value=self.value,
                    observed=self.observed, asserted=self.asserted, holds=self.holds)


def _sign(x, tol=0.0):
    if x > tol:
        return "positive"
    if x < -tol:
        return "negative"
    return "zero"


def _fd(func, x0, h):
    step = h * max(1.0, abs(x0))
    return (func(x0 + step) - func(x0 - step)) / (2 * step)


def parameter_probe(net, params, target, zone=0, h=1e-6, grid=5):
    """Probe one qualitative claim about R0.

    ``target`` is one of ``beta``, ``nu``, ``sigma``, ``g_diag`` (convexity of
    R0 along a diagonal entry of G) or ``phi`` (sign of the flux
    sensitivities). Returns a list of :class:`ProbeOutcome`.
    """
    n = net.n
    j = zone
    beta, nu = (np.array(a) for a in params.vectors(n))

    def r0_with(**kw):
        return dense_r0(ngm_from_phi(build_flux(net).phi, kw.pop("sigma", net.sigma), params.replace(**kw)))

    if target == "beta":
        def f(x):
            b = beta.copy()
            b[j] = x
            return r0_with(beta=b)
        d = _fd(f, beta[j], h)
        return [ProbeOutcome(f"beta_{j + 1}", f"beta[{j}]", "positive", d, _sign(d), True, d > 0)]
    if target == "nu":
        def f(x):
            v = nu.copy()
            v[j] = x
            return r0_with(nu=v)
        d = _fd(f, nu[j], h)
        return [ProbeOutcome(f"nu_{j + 1}", f"nu[{j}]", "negative", d, _sign(d), True, d < 0)]
    if target == "sigma":
        def f(x):
            s = np.array(net.sigma)
            s[j] = x
            return r0_with(sigma=s)
        d = _fd(f, net.sigma[j], h)
        return [ProbeOutcome(f"sigma_{j + 1}", f"sigma[{j}]", "positive", d, _sign(d), False, None)]
    if target == "g_diag":
        return [_convexity_probe(ngm_from_phi(build_flux(net).phi, net.sigma, params), j, grid)]
    if target == "phi":
        fd = fd_dR0_dphi(net, params, h)
        out = []
        for s in range(n):
            for k in range(n):
                if s != k and net.commuter[s, k] > 0:
                    out.append(ProbeOutcome(f"phi_{s + 1}{k + 1}", f"phi[{s},{k}]", "negative", fd[s, k],
                                            _sign(fd[s, k], 1e-10), False, None))
        return out
    raise ValueError(f"unknown probe target {target!r}")


def _convexity_probe(G, j, grid=5, span=0.5):
    """Midpoint convexity of R0 along ``g_jj`` on a ``grid``-point segment."""
    g0 = G[j, j]
    lo = max(0.0, g0 * (1 - span))
    hi = g0 * (1 + span) + span
    xs = np.linspace(lo, hi, grid)

    def r0_at(x):
        H = np.array(G)
        H[j, j] = x
        return dense_r0(H)

    vals = [r0_at(x) for x in xs]
    worst = -np.inf
    for a in range(grid):
        for b in range(a + 2, grid, 2):
            mid = r0_at(0.5 * (xs[a] + xs[b]))
            worst = max(worst, mid - 0.5 * (vals[a] + vals[b]))
    holds = worst <= CONVEXITY_TOL
    return ProbeOutcome(f"g_{j + 1}{j + 1}_convexity", f"G[{j},{j}]", "convex", float(worst),
                        "convex" if holds else "nonconvex", True, bool(holds))


@dataclass(frozen=True)
class SensitivityReport:
    dR0_dG: np.ndarray
    dR0_dphi_printed: np.ndarray
    dR0_dphi_chain: np.ndarray
    fd_dR0_dphi: np.ndarray
    r0: float
    probes: tuple = field(default=(), compare=False)
    fd_step: float = 1e-6

    def discrepancy_table(self):
        """Rows ``(s, j, printed, chain, fd)`` for every off-diagonal entry."""
        n = self.dR0_dG.shape[0]
        return [(s, j, float(self.dR0_dphi_printed[s, j]), float(self.dR0_dphi_chain[s, j]),
                 float(self.fd_dR0_dphi[s, j])) for s in range(n) for j in range(n) if s != j]

    def max_deviations(self):
        off = ~np.eye(self.dR0_dG.shape[0], dtype=bool)
        fd = self.fd_dR0_dphi[off]
        denom = np.maximum(np.abs(fd), 1e-300)
        return {
            "chain_vs_fd": float(np.max(np.abs(self.dR0_dphi_chain[off] - fd) / denom)),
            "printed_vs_fd": float(np.max(np.abs(self.dR0_dphi_printed[off] - fd) / denom)),
            "printed_vs_chain": float(np.max(np.abs(self.dR0_dphi_printed[off] - self.dR0_dphi_chain[off])
                                             / np.maximum(np.abs(self.dR0_dphi_chain[off]), 1e-300))),
        }

    def to_dict(self, sections=("G", "phi", "beta", "nu", "sigma")):
        out = {"r0": self.r0, "fd_step": self.fd_step}
        if "G" in sections:
            out["dR0_dG"] = self.dR0_dG.tolist()
        if "phi" in sections:
            out["dR0_dphi_printed"] = self.dR0_dphi_printed.tolist()
            out["dR0_dphi_chain"] = self.dR0_dphi_chain.tolist()
            out["fd_dR0_dphi"] = self.fd_dR0_dphi.tolist()
            out["fd_diagonal_nonphysical"] = True
            out["discrepancy_table"] = [dict(s=s, j=j, printed=a, chain=b, fd=c)
                                        for s, j, a, b, c in self.discrepancy_table()]
            out["max_relative_deviation"] = self.max_deviations()
        out["probes"] = [p.to_dict() for p in self.probes if p.parameter.split("[")[0] in sections]
        return out


def sensitivity_report(net, params, h=1e-6, ngm_data=None):
    nd = build_ngm(net, params) if ngm_data is None else ngm_data
    probes = []
    for j in range(net.n):
        for target in ("beta", "nu", "sigma", "g_diag"):
            probes.extend(parameter_probe(net, params, target, zone=j, h=h))
    probes.extend(parameter_probe(net, params, "phi", h=h))
    return SensitivityReport(sensitivity_wrt_G(nd), dR0_dphi_printed(nd, net, params), dR0_dphi_chain(nd, net, params),
                             fd_dR0_dphi(net, params, h), float(nd.r0), tuple(probes), h)
