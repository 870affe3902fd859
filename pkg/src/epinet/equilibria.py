"""Disease-free and endemic equilibria, and the checkable hypotheses around them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import EpiState, integrate, jacobian, make_vector_field
from .errors import NumericalError, PreconditionError
from .netflux import build_flux, kernel_vector, numerical_rank
from .ngm import spectral_radius

DFE_STABILITY = "global stability of the disease-free equilibrium"
R_NONNEG = "nonnegativity of endemic recovered subpopulations"
EE_EXISTENCE = "existence of an endemic equilibrium"

NEWTON_TOL = 1e-10
COLLAPSE_TOL = 1e-8
DISTINCT_TOL = 1e-6


@dataclass(frozen=True)
class ConditionReport:
    """One evaluated hypothesis ``lhs <op> rhs``.

    ``source`` names the result the hypothesis belongs to.
    """

    name: str
    holds: bool
    lhs: float
    rhs: float
    source: str
    relation: str = ""
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        out = {"name": self.name, "holds": self.holds, "lhs": self.lhs, "rhs": self.rhs,
               "relation": self.relation, "citation": self.source}
        if self.details:
            out["details"] = dict(self.details)
        return out


def compute_dfe(net, params, total_population) -> EpiState:
    """Disease-free equilibrium: ``I = R = 0`` and ``S`` along the flux kernel."""
    if not total_population > 0:
        raise ValueError(f"total population must be > 0, got {total_population}")
    x = kernel_vector(build_flux(net).scaled)
    zero = np.zeros(net.n)
    return EpiState(total_population * x, zero, zero)


def check_dfe_stability_conditions(net, params, ngm_data):
    pmax = params.p * float(net.sigma.max())
    bound = params.gamma + params.mu
    return [
        ConditionReport("pmax_condition", bool(pmax <= bound), pmax, bound, DFE_STABILITY, "<="),
        ConditionReport("r0_condition", bool(ngm_data.r0 < 1.0), float(ngm_data.r0), 1.0, DFE_STABILITY, "<"),
    ]


def check_R_nonneg_sufficient(net, params):
    lhs = params.mu + params.kappa
    spread = float(net.sigma.max() - net.sigma.min())
    return ConditionReport("r_nonneg_sufficient", bool(lhs > spread), lhs, spread, R_NONNEG, ">")


def trace_rank_bound(t, q, k):
    """Lower bound on the spectral radius from ``t = tr(A)``, ``q = tr(A^2)``, ``k = rk(A)``.

    Returns ``(bound, branch)``; branch 1 is ``q >= t^2/k``.
    """
    gap = q - t * t / k
    if gap >= 0:
        return abs(t) / k + float(np.sqrt(gap / (k * (k - 1)))), 1
    return float(np.sqrt(-gap / (k * (k - 1)))), 2


def check_R_nonneg_necessary_bound(net, params):
    """Trace/rank lower bound on ``mu + kappa + max(sigma)`` implied by R >= 0.

    With ``A = diag(max(sigma) e - sigma) + sigma|>Phi_+``, ``t = tr(A)``,
    ``q = tr(A^2)`` and ``k = rk(A)``, the bound is
    ``|t|/k + sqrt((q - t^2/k) / (k(k-1)))`` when ``q >= t^2/k`` and
    ``sqrt((t^2/k - q) / (k(k-1)))`` otherwise.

    Raises
    ------
    PreconditionError
        ``rk(A) < 2``, where the bound is undefined.
    """
    sigma = net.sigma
    smax = float(sigma.max())
    phi_plus_scaled = build_flux(net).scaled + np.diag(sigma)
    A = np.diag(smax - sigma) + phi_plus_scaled
    k = numerical_rank(A)
    if k < 2:
        raise PreconditionError(f"rank of A is {k}; the necessary bound needs rank >= 2")
    t = float(np.trace(A))
    q = float(np.trace(A @ A))
    bound, branch = trace_rank_bound(t, q, k)
    lhs = params.mu + params.kappa + smax
    return ConditionReport("r_nonneg_necessary_bound", bool(lhs > bound), lhs, float(bound), R_NONNEG, ">",
                           {"trace": t, "trace_of_square": q, "rank": k, "branch": branch})


def check_ee_existence_conditions(net, params, ngm_data):
    suff = check_R_nonneg_sufficient(net, params)
    return [
        ConditionReport("flux_spread_condition", suff.holds, suff.lhs, suff.rhs, EE_EXISTENCE, ">"),
        ConditionReport("r0_above_one", bool(ngm_data.r0 > 1.0), float(ngm_data.r0), 1.0, EE_EXISTENCE, ">"),
    ]


def recovered_from_infective(I, net, params):
    """``R = gamma ((mu + kappa) id - sigma|>Phi)^-1 I`` by a direct solve."""
    M = build_flux(net).scaled
    K = (params.mu + params.kappa) * np.eye(net.n) - M
    try:
        return params.gamma * np.linalg.solve(K, np.asarray(I, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"(mu+kappa) id - sigma|>Phi is singular: {exc}") from exc


@dataclass(frozen=True)
class EEResult:
    found: bool
    state: EpiState | None
    path: str | None
    residual: float
    r0: float
    newton_iterations: int = 0
    multiple_equilibria: bool = False
    other_equilibria: tuple = ()
    diagnostics: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        out = {"found": self.found, "path": self.path, "residual": self.residual, "r0": self.r0,
               "newton_iterations": self.newton_iterations, "multiple_equilibria": self.multiple_equilibria}
        if self.state is not None:
            out["S"] = self.state.S.tolist()
            out["I"] = self.state.I.tolist()
            out["R"] = self.state.R.tolist()
        if self.other_equilibria:
            out["other_equilibria"] = [s.as_vector().tolist() for s in self.other_equilibria]
        out["diagnostics"] = dict(self.diagnostics)
        return out


def newton_equilibrium(y0, net, params, total_population, tol=NEWTON_TOL, max_iter=100, max_halvings=30):
    """Damped Newton on the equilibrium equations with ``sum(y) = N`` in place of
    the first equation.

    Returns
    -------
    y : ndarray
    converged : bool
    iterations : int
    residual : float
        Infinity norm of the vector field at ``y``.
    """
    flux = build_flux(net)
    f = make_vector_field(flux, params, net.n)

    def residual(y):
        r = f(0.0, y)
        r[0] = y.sum() - total_population
        return r

    y = np.array(y0, dtype=float)
    r = residual(y)
    rnorm = np.linalg.norm(r)
    target = tol * total_population
    for it in range(1, max_iter + 1):
        J = jacobian(y, flux, params)
        J[0, :] = 1.0
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return y, False, it, float(np.abs(f(0.0, y)).max())
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = y + lam * step
            rt = residual(trial)
            nt = np.linalg.norm(rt)
            if np.isfinite(nt) and nt < rnorm:
                break
            lam *= 0.5
        else:
            return y, False, it, float(np.abs(f(0.0, y)).max())
        y, r, rnorm = trial, rt, nt
        if np.abs(f(0.0, y)).max() <= target and abs(r[0]) <= target:
            y, r = _polish(y, r, residual, flux, params)
            return y, True, it, float(np.abs(f(0.0, y)).max())
    return y, False, max_iter, float(np.abs(f(0.0, y)).max())


def _polish(y, r, residual, flux, params, steps=3):
    """Extra full Newton steps, kept only while they shrink the residual.

    The slow mode near the endemic state makes the solution error much
    larger than the residual, so accepting at the tolerance leaves digits
    on the table.
    """
    for _ in range(steps):
        J = jacobian(y, flux, params)
        J[0, :] = 1.0
        try:
            trial = y - np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            break
        rt = residual(trial)
        if not np.linalg.norm(rt) < np.linalg.norm(r):
            break
        y, r = trial, rt
    return y, r


def _classify(y, n, total_population):
    """'endemic', 'dfe' or 'infeasible' for a converged root."""
    if y.min() < -1e-12:
        return "infeasible"
    if y[n:2 * n].max() <= COLLAPSE_TOL * total_population:
        return "dfe"
    return "endemic"


def _unstable_direction(ngm_data):
    A = np.asarray(ngm_data.F - ngm_data.Vmat)
    shift = max(0.0, -float(np.diag(A).min()))
    _, u, _, _ = spectral_radius(A + shift * np.eye(A.shape[0]))
    return u


def solve_ee(net, params, total_population, ngm_data, seeds=10, rng=None, integration_tol=1e-9,
             t_max=2e6, chunk=1000.0):
    """Locate an endemic equilibrium.

    Damped Newton starts at ``DFE + eps (-u, u, gamma/(mu+kappa) u)`` with
    ``u`` the positive eigenvector of ``F - V`` and ``eps = 1e-3 N``. If it
    fails or collapses onto the DFE, the model is integrated from the same
    start (rescaled into the feasible set) until the vector field drops below
    ``integration_tol * N``, then polished by Newton when possible.

    Afterwards Newton is restarted from ``seeds`` random feasible states; any
    endemic root farther than ``1e-6 N`` from the reported one raises the
    ``multiple_equilibria`` flag.
    """
    n = net.n
    Ntot = float(total_population)
    rng = np.random.default_rng(0) if rng is None else rng
    dfe = compute_dfe(net, params, Ntot)
    u = _unstable_direction(ngm_data)
    eps = 1e-3 * Ntot
    y0 = dfe.as_vector() + eps * np.concatenate([-u, u, params.gamma / (params.mu + params.kappa) * u])
    diagnostics = {}

    y, ok, iters, res = newton_equilibrium(y0, net, params, Ntot)
    kind = _classify(y, n, Ntot) if ok else "failed"
    diagnostics["newton"] = {"converged": ok, "outcome": kind, "iterations": iters, "residual": res}
    path = "newton" if kind == "endemic" else None

    if path is None:
        start = np.maximum(y0, 0.0)
        start *= Ntot / start.sum()
        f = make_vector_field(net, params)
        threshold = integration_tol * Ntot

        def stop(t, yy, dy):
            return np.abs(dy).max() <= threshold or yy[n:2 * n].max() <= 1e-14 * Ntot

        traj = integrate(EpiState.from_vector(start), net, params, t_max, stride=chunk, stop=stop)
        y = np.array(traj.states[-1])
        res = float(np.abs(f(0.0, y)).max())
        kind = _classify(y, n, Ntot)
        diagnostics["integration"] = {"t_final": float(traj.times[-1]), "residual": res, "outcome": kind}
        if kind == "endemic":
            path = "integration"
            yp, okp, itp, resp = newton_equilibrium(y, net, params, Ntot)
            if okp and _classify(yp, n, Ntot) == "endemic" and np.abs(yp - y).max() <= 1e-3 * Ntot:
                y, res, iters, path = yp, resp, itp, "integration+newton"

    if path is None:
        return EEResult(False, None, None, res, float(ngm_data.r0), iters, diagnostics=diagnostics)

    y = np.where(y < 0, 0.0, y)
    others = []
    for _ in range(seeds):
        seed = rng.dirichlet(np.ones(3 * n)) * Ntot
        ys, oks, _, _ = newton_equilibrium(seed, net, params, Ntot)
        if not oks or _classify(ys, n, Ntot) != "endemic":
            continue
        if np.abs(ys - y).max() > DISTINCT_TOL * Ntot and all(
                np.abs(ys - o).max() > DISTINCT_TOL * Ntot for o in others):
            others.append(ys)
    diagnostics["seeds"] = seeds
    return EEResult(True, EpiState.from_vector(y), path, res, float(ngm_data.r0), iters,
                    bool(others), tuple(EpiState.from_vector(o) for o in others), diagnostics)
