"""SIR vector field on a zone network and its time integration.

State layout for flat vectors is ``[S_1..S_n, I_1..I_n, R_1..R_n]``. Time is
measured in days and all rates are per day.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DomainError, StructuralError
from .netflux import FluxMatrix, ZoneNetwork, build_flux
from .ode import dopri5

NEG_FLOOR = 1e-12


def _ro(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EpiParams:
    """Epidemiological rates.

    ``beta`` and ``nu`` may be scalars (uniform over zones) or length-n
    vectors; :meth:`vectors` expands them.
    """

    mu: float
    beta: np.ndarray
    nu: np.ndarray
    kappa: float
    gamma: float
    p: float

    def __post_init__(self):
        for name in ("mu", "kappa", "gamma", "p"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise DataError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)
        if self.p > 1:
            raise DataError(f"p must lie in [0, 1], got {self.p}")
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        if beta.ndim != 1 or nu.ndim != 1:
            raise StructuralError("beta and nu must be scalars or 1-d vectors")
        if not np.all(np.isfinite(beta)) or np.any(beta < 0):
            raise DataError(f"beta entries must be finite and >= 0, got {beta.tolist()}")
        if not np.all(np.isfinite(nu)) or np.any(nu <= 0):
            raise DomainError(f"nu entries must be finite and > 0, got {nu.tolist()}")
        object.__setattr__(self, "beta", _ro(beta))
        object.__setattr__(self, "nu", _ro(nu))

    def vectors(self, n):
        """Return ``(beta, nu)`` as length-n arrays."""
        try:
            return np.broadcast_to(self.beta, (n,)), np.broadcast_to(self.nu, (n,))
        except ValueError:
            raise StructuralError(
                f"beta/nu lengths {self.beta.size}/{self.nu.size} do not match {n} zones") from None

    def replace(self, **changes):
        fields = dict(mu=self.mu, beta=self.beta, nu=self.nu, kappa=self.kappa, gamma=self.gamma, p=self.p)
        fields.update(changes)
        return EpiParams(**fields)


@dataclass(frozen=True)
class EpiState:
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(x, dtype=float)) for x in (self.S, self.I, self.R)]
        if not (arrs[0].shape == arrs[1].shape == arrs[2].shape) or arrs[0].ndim != 1:
            raise StructuralError(f"S, I, R must be equal-length vectors, got {[a.shape for a in arrs]}")
        for name, a in zip("SIR", arrs):
            if not np.all(np.isfinite(a)):
                raise DataError(f"{name} has non-finite entries")
            object.__setattr__(self, name, _ro(a))

    @property
    def n(self):
        return self.S.size

    @property
    def N(self):
        return self.S + self.I + self.R

    @property
    def total(self):
        return float(np.sum(self.S) + np.sum(self.I) + np.sum(self.R))

    def as_vector(self):
        return np.concatenate([self.S, self.I, self.R])

    @classmethod
    def from_vector(cls, y):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.size % 3:
            raise StructuralError(f"flat state length {y.size} is not a multiple of 3")
        n = y.size // 3
        return cls(y[:n], y[n:2 * n], y[2 * n:])

    def min(self):
        return float(min(self.S.min(), self.I.min(), self.R.min()))


def _scaled_of(flux):
    if isinstance(flux, ZoneNetwork):
        flux = build_flux(flux)
    if isinstance(flux, FluxMatrix):
        return flux.scaled
    return np.asarray(flux, dtype=float)


def _force(S, I, R, beta, nu):
    denom = I + nu * (S + I + R)
    num = beta * S * I
    out = np.zeros_like(num)
    np.divide(num, denom, out=out, where=denom > 0)
    return out


def force_of_infection(state: EpiState, params: EpiParams):
    """Per-zone incidence ``beta_i S_i I_i / (I_i + nu_i N_i)``.

    Zones with ``S_i = I_i = R_i = 0`` contribute zero.
    """
    if state.min() < -NEG_FLOOR:
        raise DomainError(f"state has a component {state.min():.3e} below -{NEG_FLOOR:g}")
    beta, nu = params.vectors(state.n)
    return _force(state.S, state.I, state.R, beta, nu)


def make_vector_field(flux, params, n=None):
    """Return ``f(t, y)`` for the flat 3n-state, closed over the flux and rates."""
    M = _scaled_of(flux)
    n = M.shape[0] if n is None else n
    if M.shape != (n, n):
        raise StructuralError(f"flux matrix shape {M.shape} does not match {n} zones")
    beta, nu = params.vectors(n)
    beta = np.array(beta)
    nu = np.array(nu)
    mu, kappa, gamma, p = params.mu, params.kappa, params.gamma, params.p
    mix = np.ones(3)
    mix[1] = p

    def f(t, y):
        Y = y.reshape(3, n)
        S, I, R = Y
        lam = _force(S, I, R, beta, nu)
        move = (M @ Y.T) * mix
        dS = mu * (I + R) - lam + kappa * R + move[:, 0]
        dI = lam - (gamma + mu) * I + move[:, 1]
        dR = gamma * I - (mu + kappa) * R + move[:, 2]
        return np.concatenate([dS, dI, dR])

    return f


def rhs(state: EpiState, flux, params: EpiParams) -> EpiState:
    """Time derivative of (S, I, R) as an :class:`EpiState`."""
    if state.min() < -NEG_FLOOR:
        raise DomainError(f"state has a component {state.min():.3e} below -{NEG_FLOOR:g}")
    f = make_vector_field(flux, params, state.n)
    return EpiState.from_vector(f(0.0, state.as_vector()))


def jacobian(y, flux, params):
    """Analytic Jacobian of the flat vector field at ``y``."""
    M = _scaled_of(flux)
    n = M.shape[0]
    beta, nu = params.vectors(n)
    S, I, R = np.asarray(y, dtype=float).reshape(3, n)
    D = I + nu * (S + I + R)
    with np.errstate(divide="ignore", invalid="ignore"):
        D2 = np.where(D > 0, D * D, np.inf)
        fS = beta * I * (D - nu * S) / D2
        fI = beta * S * (D - (1 + nu) * I) / D2
        fR = -beta * S * I * nu / D2
    eye = np.eye(n)
    mu, kappa, gamma, p = params.mu, params.kappa, params.gamma, params.p
    J = np.zeros((3 * n, 3 * n))
    J[:n, :n] = M - np.diag(fS)
    J[:n, n:2 * n] = mu * eye - np.diag(fI)
    J[:n, 2 * n:] = (mu + kappa) * eye - np.diag(fR)
    J[n:2 * n, :n] = np.diag(fS)
    J[n:2 * n, n:2 * n] = np.diag(fI) - (gamma + mu) * eye + p * M
    J[n:2 * n, 2 * n:] = np.diag(fR)
    J[2 * n:, n:2 * n] = gamma * eye
    J[2 * n:, 2 * n:] = M - (mu + kappa) * eye
    return J


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    zone_ids: tuple = ()
    nfev: int = field(default=0, compare=False)

    @property
    def n(self):
        return self.states.shape[1] // 3

    @property
    def S(self):
        return self.states[:, :self.n]

    @property
    def I(self):
        return self.states[:, self.n:2 * self.n]

    @property
    def R(self):
        return self.states[:, 2 * self.n:]

    @property
    def totals(self):
        return self.states.sum(axis=1)

    def state(self, k):
        return EpiState.from_vector(self.states[k])

    @property
    def final(self):
        return self.state(-1)

    def columns(self):
        ids = self.zone_ids or tuple(f"z{k + 1}" for k in range(self.n))
        return ["t"] + [f"{c}_{z}" for c in "SIR" for z in ids]

    def to_csv(self, path_or_file):
        """Write ``t, S_1..S_n, I_1..I_n, R_1..R_n`` rows with round-trip floats."""
        if hasattr(path_or_file, "write"):
            self._write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                self._write(fh)

    def _write(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.columns())
        for t, row in zip(self.times, self.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def sample_times(t_end, stride):
    if not t_end > 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    if not stride > 0:
        raise ValueError(f"stride must be > 0, got {stride}")
    k = int(np.floor(t_end / stride + 1e-9))
    ts = stride * np.arange(k + 1)
    if t_end - ts[-1] > 1e-9 * t_end:
        ts = np.append(ts, t_end)
    else:
        ts[-1] = min(ts[-1], t_end)
    return ts


def integrate(initial: EpiState, net, params: EpiParams, t_end, stride=1.0, rtol=1e-8, atol=1e-10,
              max_steps=10**6, stop=None, zone_ids=None):
    """Integrate the SIR system from ``initial`` up to ``t_end`` days.

    Output is sampled every ``stride`` days (plus ``t_end`` itself).
    ``stop(t, y, dy)`` may end the run early at a sample time.

    Raises
    ------
    StiffnessError
        Step size underflow; carries the time stamp.
    PositivityError
        A component dropped below ``-1e-12`` and could not be recovered by
        shrinking the step.
    """
    f = make_vector_field(net, params, initial.n)
    if zone_ids is None and isinstance(net, ZoneNetwork):
        zone_ids = net.zone_ids
    times, ys, nfev = dopri5(f, initial.as_vector(), sample_times(t_end, stride), rtol=rtol, atol=atol,
                             floor=NEG_FLOOR, max_steps=max_steps, stop=stop)
    times.setflags(write=False)
    ys.setflags(write=False)
    return Trajectory(times, ys, tuple(zone_ids or ()), nfev)
