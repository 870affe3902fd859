"""Dormand-Prince 5(4) integrator with a positivity floor.

scipy's ``solve_ivp`` cannot reject a step because a component went negative,
so the stepping loop lives here. The propagated solution is 5th order; the
embedded 4th order solution drives step-size control.
"""

import numpy as np

from .errors import PositivityError, StiffnessError

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [np.array(row) for row in [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


def _initial_step(f, t0, y0, f0, rtol, atol, order=5):
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


def dopri5(f, y0, t_eval, rtol=1e-8, atol=1e-10, floor=1e-12, max_steps=10**6, stop=None):
    """Integrate ``y' = f(t, y)`` and return the solution at each ``t_eval``.

    Steps are shortened to land exactly on the requested times. An accepted
    step whose result has a component below ``-floor`` is rejected and retried
    with half the step; components in ``[-floor, 0)`` are clipped to zero.

    ``stop(t, y, dy)``, when given, is checked at every output time and ends
    the integration early when it returns True.

    Returns
    -------
    times : ndarray
    ys : ndarray, shape (len(times), len(y0))
    nfev : int
    """
    t_eval = np.asarray(t_eval, dtype=float)
    y = np.array(y0, dtype=float)
    t = float(t_eval[0])
    if floor is not None:
        if np.any(y < -floor):
            raise PositivityError(f"initial state has a component {y.min():.3e} below -{floor:g}", t)
        y = np.where(y < 0, 0.0, y)
    fy = f(t, y)
    nfev = 1
    out_t = [t]
    out_y = [y.copy()]
    if stop is not None and stop(t, y, fy):
        return np.array(out_t), np.array(out_y), nfev

    h = _initial_step(f, t, y, fy, rtol, atol)
    nfev += 1
    k = np.empty((7, y.size))
    steps = 0
    for target in t_eval[1:]:
        while t < target:
            if steps >= max_steps:
                raise StiffnessError(f"exceeded {max_steps} steps at t={t:.6g}", t)
            hmin = 16 * np.finfo(float).eps * max(abs(t), 1.0)
            if h < hmin:
                raise StiffnessError(f"step size underflow (h={h:.3e}) at t={t:.6g}", t)
            last = t + h >= target
            step = target - t if last else h
            k[0] = fy
            for s in range(1, 7):
                k[s] = f(t + C[s] * step, y + step * (A[s] @ k[:s]))
            nfev += 6
            y_new = y + step * (B5 @ k)
            err_vec = step * (E @ k)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((err_vec / scale) ** 2))
            if err > 1.0 or not np.isfinite(err):
                factor = MIN_FACTOR if not np.isfinite(err) else max(MIN_FACTOR, SAFETY * err ** -0.2)
                h = step * factor
                continue
            low = 0.0 if floor is None else y_new.min()
            if floor is not None and low < -floor:
                h = step * 0.5
                if h < hmin:
                    raise PositivityError(
                        f"component fell to {low:.3e} below -{floor:g} and step cannot shrink further", t)
                continue
            if low < 0:
                y_new = np.where(y_new < 0, 0.0, y_new)
                fy = f(t + step, y_new)
                nfev += 1
            else:
                fy = k[6].copy()
            t = float(target) if last else t + step
            y = y_new
            steps += 1
            factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** -0.2))
            # a landing step may be shorter than the controller asked for
            h = max(step * factor, h) if last and step < h else step * factor
        out_t.append(t)
        out_y.append(y.copy())
        if stop is not None and stop(t, y, fy):
            break
    return np.array(out_t), np.array(out_y), nfev
