"""Adaptive embedded Runge-Kutta integration with chart guards.

The workhorse is a Dormand-Prince 4(5) pair with FSAL and standard
error-per-step control.  Two behaviours matter for everything built on
top and are not offered in this form by off-the-shelf solvers:

* when an output grid is supplied the integrator *steps onto* every grid
  time exactly, so recorded states carry no interpolation roughness and
  grid-level finite differences of the output see only the (smooth)
  global integration error;
* leaving a chart domain and step-size collapse are first-class exits,
  not failures: the boundary crossing is bisected on the step-local
  Hermite interpolant, and a step underflow below ``1e-13 * |t1 - t0|``
  (or a state norm beyond ``escape_norm``) is reported as blow-up with a
  bracket around the escape time.

A fixed-step classical RK4 mode (``method="rk4"``) is kept for
bit-reproducible runs and for finite differencing through the solver,
where adaptive step-sequence switches would show up as noise.
"""

from dataclasses import dataclass

import numpy as np

# Dormand-Prince 4(5) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])
_ERR = _B5 - _B4

STEP_FLOOR_FACTOR = 1e-13
DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-12


@dataclass
class OdeSolution:
    """Trajectory samples plus how and where the integration ended."""

    times: np.ndarray
    states: np.ndarray
    t_reached: float
    exit_reason: str          # completed | left_domain | blow_up | step_limit
    n_steps: int
    n_rejected: int
    blowup_bracket: tuple = None

    @property
    def completed(self):
        return self.exit_reason == "completed"


def _error_norm(err, y_old, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def _hermite(y0, f0, y1, f1, h, s):
    """Cubic Hermite on one step, s in [0, 1]."""
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * f0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * f1)


def _bisect_crossing(inside, y0, f0, y1, f1, h):
    """Largest fraction of the step still inside the domain.

    Returns (s_inside, y_inside) with the state re-evaluated on the
    step-local Hermite interpolant.
    """
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if inside(_hermite(y0, f0, y1, f1, h, mid)):
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15:
            break
    return lo, _hermite(y0, f0, y1, f1, h, lo)


def _initial_step(f, t0, y0, f0, direction, rtol, atol, h_max):
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = f(t0 + h0 * direction, y1)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, h_max)


def solve_ode(f, y0, t_span, *, t_grid=None, rtol=DEFAULT_RTOL,
              atol=DEFAULT_ATOL, domain=None, method="rk45",
              rk4_substeps=16, escape_norm=1e12, max_steps=500_000):
    """Integrate ``y' = f(t, y)`` over ``t_span = (t0, t1)``.

    ``t_grid``, when given, must run from ``t0`` to ``t1`` monotonically;
    states are recorded exactly at those times.  Without a grid every
    accepted step is recorded.  ``domain`` is a predicate on states; the
    trajectory is truncated at the (bisected) boundary crossing when it
    ever turns false.  Backward integration is requested simply by
    ``t1 < t0``.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = np.asarray(y0, dtype=float)
    if domain is not None and not domain(y0):
        raise ValueError("initial state outside the chart domain")
    if method == "rk4":
        return _solve_rk4(f, y0, t0, t1, t_grid, domain, rk4_substeps,
                          escape_norm)
    if method != "rk45":
        raise ValueError(f"unknown method {method!r}")

    if t_grid is not None:
        t_grid = np.asarray(t_grid, dtype=float)

    out_t, out_y = [t0], [y0.copy()]
    if t1 == t0:
        return OdeSolution(np.array(out_t), np.array(out_y), t0,
                           "completed", 0, 0)

    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    h_floor = STEP_FLOOR_FACTOR * span
    f0 = np.asarray(f(t0, y0), dtype=float)
    h = _initial_step(f, t0, y0, f0, direction, rtol, atol, span)

    t, y = t0, y0.copy()
    gi = 1  # next grid index to hit
    n_steps = n_rejected = 0
    while True:
        if n_steps + n_rejected >= max_steps:
            return OdeSolution(np.array(out_t), np.array(out_y), t,
                               "step_limit", n_steps, n_rejected)
        remaining = abs(t1 - t)
        h_try = min(h, remaining)
        t_target = None
        if t_grid is not None and gi < len(t_grid):
            to_grid = abs(t_grid[gi] - t)
            if h_try >= to_grid:
                h_try, t_target = to_grid, t_grid[gi]
        elif h_try >= remaining:
            t_target = t1
        if h_try < h_floor:
            bracket = (t, t + direction * max(h_try, h_floor))
            return OdeSolution(np.array(out_t), np.array(out_y), t,
                               "blow_up", n_steps, n_rejected,
                               blowup_bracket=bracket)

        # Stages (FSAL: stage 7 value is reused as f0 of the next step).
        k = np.empty((7, y.size))
        k[0] = f0
        bad = False
        for i in range(1, 7):
            yi = y + direction * h_try * (_A[i] @ k[:i])
            if not np.all(np.isfinite(yi)):
                bad = True
                break
            k[i] = f(t + direction * h_try * _C[i], yi)
            if not np.all(np.isfinite(k[i])):
                bad = True
                break
        if not bad:
            y_new = y + direction * h_try * (_B5 @ k)
            bad = not np.all(np.isfinite(y_new))
        if bad:
            n_rejected += 1
            h = 0.5 * h_try
            continue
        err = _error_norm(direction * h_try * (_ERR @ k), y, y_new,
                          rtol, atol)
        if err > 1.0:
            n_rejected += 1
            h = h_try * max(0.2, 0.9 * err ** -0.2)
            continue

        n_steps += 1
        t_new = t_target if t_target is not None else t + direction * h_try
        f_new = k[6]
        if float(np.max(np.abs(y_new))) > escape_norm:
            bracket = (t, t_new)
            return OdeSolution(np.array(out_t), np.array(out_y), t,
                               "blow_up", n_steps, n_rejected,
                               blowup_bracket=bracket)
        if domain is not None and not domain(y_new):
            s, y_cross = _bisect_crossing(domain, y, f0, y_new, f_new,
                                          direction * h_try)
            t_cross = t + s * direction * h_try
            out_t.append(t_cross)
            out_y.append(y_cross)
            return OdeSolution(np.array(out_t), np.array(out_y), t_cross,
                               "left_domain", n_steps, n_rejected)
        t, y, f0 = t_new, y_new, f_new
        if t_grid is None:
            out_t.append(t)
            out_y.append(y.copy())
        elif gi < len(t_grid) and t == t_grid[gi]:
            out_t.append(t)
            out_y.append(y.copy())
            gi += 1
        if t == t1 or (t_grid is not None and gi >= len(t_grid)):
            return OdeSolution(np.array(out_t), np.array(out_y), t,
                               "completed", n_steps, n_rejected)
        h = h_try * min(5.0, max(0.2, 0.9 * max(err, 1e-10) ** -0.2))


def _solve_rk4(f, y0, t0, t1, t_grid, domain, substeps, escape_norm):
    """Classical fixed-step RK4 on the grid (bit-reproducible path)."""
    if t_grid is None:
        t_grid = np.array([t0, t1])
    else:
        t_grid = np.asarray(t_grid, dtype=float)
    out_t, out_y = [t_grid[0]], [np.asarray(y0, dtype=float).copy()]
    y = out_y[0].copy()
    n_steps = 0
    for seg in range(len(t_grid) - 1):
        ta, tb = t_grid[seg], t_grid[seg + 1]
        h = (tb - ta) / substeps
        for j in range(substeps):
            t = ta + j * h
            k1 = f(t, y)
            k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = f(t + h, y + h * k3)
            y_new = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            n_steps += 1
            blown = (not np.all(np.isfinite(y_new))
                     or float(np.max(np.abs(y_new))) > escape_norm)
            if blown:
                return OdeSolution(np.array(out_t), np.array(out_y), t,
                                   "blow_up", n_steps, 0,
                                   blowup_bracket=(t, t + h))
            if domain is not None and not domain(y_new):
                f_new = f(t + h, y_new)
                s, y_cross = _bisect_crossing(domain, y, k1, y_new, f_new, h)
                t_cross = t + s * h
                out_t.append(t_cross)
                out_y.append(y_cross)
                return OdeSolution(np.array(out_t), np.array(out_y),
                                   t_cross, "left_domain", n_steps, 0)
            y = y_new
        out_t.append(tb)
        out_y.append(y.copy())
    return OdeSolution(np.array(out_t), np.array(out_y), t_grid[-1],
                       "completed", n_steps, 0)
