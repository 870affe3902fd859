"""Lyapunov candidates for the two equilibria, evaluated along trajectories."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dynamics import EpiState, make_vector_field


def v_dfe(state: EpiState) -> float:
    """Squared Euclidean norm of the infective vector."""
    return float(state.I @ state.I)


def v_dfe_rate(state: EpiState, flux, params) -> float:
    """``2 <I, dI/dt>``."""
    dy = make_vector_field(flux, params, state.n)(0.0, state.as_vector())
    return float(2.0 * state.I @ dy[state.n:2 * state.n])


def _volterra_terms(x, ref):
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    out = np.array(x, dtype=float)
    pos = ref > 0
    with np.errstate(divide="ignore"):
        logs = np.log(x[pos] / ref[pos])
    out[pos] = x[pos] - ref[pos] - ref[pos] * logs
    return out


def v_ee(state: EpiState, ee: EpiState) -> float:
    """Volterra function ``sum(x - x* - x* log(x / x*))`` over all compartments.

    Coordinates with ``x* = 0`` contribute ``x``. A zero coordinate where the
    equilibrium is positive makes the value ``+inf``.
    """
    x = state.as_vector()
    ref = ee.as_vector()
    if np.any((x <= 0) & (ref > 0)):
        return float("inf")
    return float(np.sum(_volterra_terms(x, ref)))


def v_ee_rate(state: EpiState, ee: EpiState, flux, params) -> float:
    """``sum(dx/dt * (1 - x*/x))``."""
    x = state.as_vector()
    ref = ee.as_vector()
    if np.any((x <= 0) & (ref > 0)):
        return float("nan")
    dy = make_vector_field(flux, params, state.n)(0.0, x)
    weight = np.ones_like(x)
    pos = ref > 0
    weight[pos] = 1.0 - ref[pos] / x[pos]
    return float(dy @ weight)


@dataclass(frozen=True)
class Verdict:
    nonincreasing: bool
    first_violation: int | None = None
    worst_increase: float = 0.0

    def __str__(self):
        if self.nonincreasing:
            return "monotone-nonincreasing"
        return f"violated at index {self.first_violation}"


def _relative_increments(values):
    """``(V[k+1] - V[k]) / max(1, |V[k]|)``; leaving +inf counts as a decrease."""
    prev, nxt = values[:-1], values[1:]
    with np.errstate(invalid="ignore"):
        rel = (nxt - prev) / np.maximum(1.0, np.abs(prev))
    rel[np.isinf(prev) & (prev > 0)] = -np.inf
    return rel


def monotonicity_verdict(trace_or_values, tol=1e-10):
    """Nonincreasing iff every ``V[k+1] - V[k] <= tol * max(1, |V[k]|)``.

    ``worst_increase`` is the largest relative increase seen, 0 if none.
    """
    values = trace_or_values.values if isinstance(trace_or_values, LyapunovTrace) else trace_or_values
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        raise ValueError(f"need at least 3 samples, got {values.size}")
    rel = _relative_increments(values)
    bad = np.flatnonzero(rel > tol)
    worst = float(max(np.max(rel), 0.0))
    if bad.size:
        return Verdict(False, int(bad[0]) + 1, worst)
    return Verdict(True, None, worst)


@dataclass(frozen=True)
class LyapunovTrace:
    times: np.ndarray
    values: np.ndarray
    derivative_estimates: np.ndarray
    verdict: Verdict
    tol: float = 1e-10

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")

    def to_csv(self, path_or_file):
        """Write ``t, V, dVdt, ok`` rows; ``ok`` is 0 where V rose beyond tol."""
        if hasattr(path_or_file, "write"):
            self._write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                self._write(fh)

    def _write(self, fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "V", "dVdt", "ok"])
        v = self.values
        rel = np.r_[0.0, _relative_increments(v)]
        for t, val, d, r in zip(self.times, v, self.derivative_estimates, rel):
            w.writerow([repr(float(t)), repr(float(val)), repr(float(d)), int(r <= self.tol)])


def trace_dfe(traj, flux, params, tol=1e-10):
    states = [traj.state(k) for k in range(len(traj.times))]
    values = np.array([v_dfe(s) for s in states])
    rates = np.array([v_dfe_rate(s, flux, params) for s in states])
    return LyapunovTrace(np.array(traj.times), values, rates, monotonicity_verdict(values, tol), tol)


def trace_ee(traj, ee, flux, params, tol=1e-8):
    states = [traj.state(k) for k in range(len(traj.times))]
    values = np.array([v_ee(s, ee) for s in states])
    rates = np.array([v_ee_rate(s, ee, flux, params) for s in states])
    return LyapunovTrace(np.array(traj.times), values, rates, monotonicity_verdict(values, tol), tol)


def centered_rates(times, values):
    """Second-order finite-difference estimate of dV/dt at interior samples."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    return (v[2:] - v[:-2]) / (t[2:] - t[:-2])


def flux_log_inequality_check(phi, S, S_ref):
    """``<phi S, diag(S)^-1 S_ref>``.

    Nonnegative whenever ``phi @ S_ref == 0``; for an arbitrary positive
    reference it can be negative.
    """
    S = np.asarray(S, dtype=float)
    S_ref = np.asarray(S_ref, dtype=float)
    return float((np.asarray(phi) @ S) @ (S_ref / S))


def sup_norm_inner_gap(X, Y):
    """``X.Y - ||X||_inf (e.Y)``; reported only, used to log counterexamples."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return float(X @ Y - np.abs(X).max() * Y.sum())
