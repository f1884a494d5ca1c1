"""Charts, vector fields, brackets, integral curves and local flows.

Everything here works in a single coordinate chart: points are plain
``R^D`` vectors constrained to a chart domain, vector fields are smooth
maps with optional analytic Jacobians, and flows come from the adaptive
integrator with chart-exit and blow-up handled as recorded outcomes.

Bracket sign convention: ``[X, Y]`` acts on functions as
``X.(Y.f) - Y.(X.f)``, whose chart representation is
``Y'(x) X(x) - X'(x) Y(x)``.  This is the convention under which the
chart covariant derivative ``(X, Y) -> Y' X - S(X, Y)`` is torsion-free,
which the connection contracts require.
"""

from dataclasses import dataclass, field

import numpy as np

from .curves import CurvePath
from .errors import DomainExitError
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL, solve_ode

_EPS_CBRT = float(np.cbrt(np.finfo(float).eps))


def default_fd_step(x, norm=None):
    """Central-difference step: cbrt(machine eps) * (1 + |x|)."""
    scale = norm(x) if norm is not None else float(np.linalg.norm(x))
    return _EPS_CBRT * (1.0 + scale)


# ---------------------------------------------------------------------------
# Chart domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BallDomain:
    """Open coordinate ball ``|x - center| < radius``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=float))

    def contains(self, x):
        return float(np.linalg.norm(np.asarray(x) - self.center)) < self.radius

    def describe(self):
        return {"kind": "ball", "center": self.center.tolist(),
                "radius": self.radius}


@dataclass(frozen=True)
class BoxDomain:
    """Open coordinate box ``lo < x < hi`` componentwise."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))

    def contains(self, x):
        x = np.asarray(x)
        return bool(np.all(x > self.lo) and np.all(x < self.hi))

    def describe(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True)
class PredicateDomain:
    """Domain given by an arbitrary membership predicate."""

    predicate: object
    label: str = "predicate"

    def contains(self, x):
        return bool(self.predicate(np.asarray(x)))

    def describe(self):
        return {"kind": self.label}


def require_inside(domain, x, what="point"):
    if domain is not None and not domain.contains(x):
        raise DomainExitError(f"{what} outside the chart domain")


# ---------------------------------------------------------------------------
# Smooth maps and vector fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmoothMap:
    """Closed-form map with an optional analytic derivative.

    ``fn`` maps a point to a scalar or a vector; ``jac`` maps a point to
    the Jacobian (gradient for scalar maps).  When ``jac`` is absent the
    derivative falls back to central differences.
    """

    fn: object
    jac: object = None
    name: str = ""

    def __call__(self, x):
        return self.fn(np.asarray(x, dtype=float))

    def jacobian(self, x, step=None):
        x = np.asarray(x, dtype=float)
        if self.jac is not None:
            return np.asarray(self.jac(x), dtype=float)
        if step is None:
            step = default_fd_step(x)
        cols = []
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = step
            cols.append((np.asarray(self(x + e), dtype=float)
                         - np.asarray(self(x - e), dtype=float)) / (2 * step))
        return np.stack(cols, axis=-1)


VectorFieldSpec = SmoothMap


def fd_directional_derivative(f, x, h, step=None):
    """Central difference ``(f(x + s h) - f(x - s h)) / (2 s)``."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if step is None:
        step = default_fd_step(x)
    fp = np.asarray(f(x + step * h), dtype=float)
    fm = np.asarray(f(x - step * h), dtype=float)
    out = (fp - fm) / (2.0 * step)
    return float(out) if out.ndim == 0 else out


def directional_derivative(f, x, h, step=None, domain=None):
    """Derivative of ``f`` at ``x`` along ``h``.

    Uses the registered analytic derivative when ``f`` carries one and
    central differences otherwise; ``fd_directional_derivative`` stays
    available for cross-checks against the analytic path.
    """
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    if step is None:
        step = default_fd_step(x)
    if domain is not None:
        for probe in (x, x + step * h, x - step * h):
            require_inside(domain, probe, "evaluation point")
    if isinstance(f, SmoothMap) and f.jac is not None:
        out = np.asarray(f.jac(x), dtype=float) @ h
        return float(out) if np.ndim(out) == 0 else out
    return fd_directional_derivative(f, x, h, step=step)


def lie_bracket(X, Y, x, step=None, domain=None):
    """``[X, Y](x) = Y'(x) X(x) - X'(x) Y(x)`` (derivation convention)."""
    x = np.asarray(x, dtype=float)
    if domain is not None:
        require_inside(domain, x, "evaluation point")
    return Y.jacobian(x, step=step) @ X(x) - X.jacobian(x, step=step) @ Y(x)


def bracket_field(X, Y):
    """The bracket as a field; its own Jacobian is left to differences
    (which are accurate because the bracket itself evaluates exactly)."""
    return SmoothMap(fn=lambda x: lie_bracket(X, Y, x),
                     name=f"[{X.name},{Y.name}]")


# ---------------------------------------------------------------------------
# Integral curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowSolution:
    """Integral-curve sample with the integrator's exit record."""

    path: CurvePath
    exit_reason: str
    t_reached: float
    n_steps: int
    n_rejected: int


def _domain_predicate(domain):
    return None if domain is None else (lambda y: domain.contains(y))


def integrate_vector_field(X, x0, t_end, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                           domain=None, grid_size=None, method="rk45"):
    """Solve ``l' = X(l)``, ``l(0) = x0`` up to ``t_end`` (either sign).

    The trajectory is sampled on a uniform grid (the integrator steps
    onto grid times exactly); chart exit and blow-up truncate it and are
    reported in the exit reason rather than raised.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    require_inside(domain, x0, "initial point")
    if grid_size is None:
        grid_size = max(33, min(257, int(64 * abs(t_end)) + 1))
    grid = np.linspace(0.0, t_end, grid_size)
    sol = solve_ode(lambda t, y: np.asarray(X(y), dtype=float), x0,
                    (0.0, t_end), t_grid=grid, rtol=rtol, atol=atol,
                    domain=_domain_predicate(domain), method=method)
    times, states = sol.times, sol.states
    if len(times) < 2:
        # exited before the first grid node; fall back to natural output
        sol = solve_ode(lambda t, y: np.asarray(X(y), dtype=float), x0,
                        (0.0, t_end), rtol=rtol, atol=atol,
                        domain=_domain_predicate(domain), method=method)
        times, states = sol.times, sol.states
    vels = np.array([np.asarray(X(s), dtype=float) for s in states])
    accs = None
    if X.jac is not None:
        accs = np.array([X.jacobian(s) @ v for s, v in zip(states, vels)])
    if t_end < 0:
        times, states, vels = times[::-1], states[::-1], vels[::-1]
        accs = None if accs is None else accs[::-1]
    path = CurvePath(times, states, vels, accs)
    return FlowSolution(path=path, exit_reason=sol.exit_reason,
                        t_reached=sol.t_reached, n_steps=sol.n_steps,
                        n_rejected=sol.n_rejected)


def flow_endpoint(X, x0, t, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                  domain=None, method="rk45"):
    """Flow endpoint ``F(x0, t)`` without path assembly; raises on early
    exit."""
    sol = solve_ode(lambda _, y: np.asarray(X(y), dtype=float),
                    np.atleast_1d(np.asarray(x0, dtype=float)),
                    (0.0, t), rtol=rtol, atol=atol,
                    domain=_domain_predicate(domain), method=method)
    if not sol.completed:
        raise DomainExitError(f"flow ended early ({sol.exit_reason})",
                              t_reached=sol.t_reached,
                              exit_reason=sol.exit_reason)
    return sol.states[-1]


_endpoint = flow_endpoint


# ---------------------------------------------------------------------------
# Local flows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowTable:
    """Flow values ``F(x_p, t_m)`` with law diagnostics.

    ``valid[p, m]`` marks table entries actually reached; per-point early
    exits are listed in ``exits`` as ``(point_index, direction, reason)``.
    """

    points: np.ndarray
    t_grid: np.ndarray
    values: np.ndarray
    valid: np.ndarray
    exits: tuple
    group_law_defect: float
    inverse_defect: float
    pairs: tuple

    def to_dict(self):
        return {
            "t_min": float(self.t_grid[0]),
            "t_max": float(self.t_grid[-1]),
            "points": self.points.tolist(),
            "group_law_defect": float(self.group_law_defect),
            "inverse_defect": float(self.inverse_defect),
            "pairs": [list(p) for p in self.pairs],
            "exits": [list(e) for e in self.exits],
        }


def local_flow(X, points, a, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
               domain=None, grid_size=17, norm=None):
    """Tabulate the flow of ``X`` on ``(-a, a)`` over sample points.

    Diagnostics report the worst observed group-law defect
    ``|F_t(F_s(x)) - F_{t+s}(x)|`` and inverse defect
    ``|F_{-t}(F_t(x)) - x|`` over grid-aligned ``(s, t)`` pairs, in the
    supplied norm (Euclidean when absent).
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if grid_size % 2 == 0:
        grid_size += 1
    points = np.atleast_2d(np.asarray(points, dtype=float))
    for p in points:
        require_inside(domain, p, "sample point")
    nrm = norm if norm is not None else np.linalg.norm
    half = (grid_size - 1) // 2
    t_grid = np.linspace(-a, a, grid_size)
    values = np.full((len(points), grid_size, points.shape[1]), np.nan)
    valid = np.zeros((len(points), grid_size), dtype=bool)
    exits = []
    for ip, p in enumerate(points):
        values[ip, half] = p
        valid[ip, half] = True
        for drn in (1, -1):
            grid = t_grid[half:] if drn == 1 else t_grid[half::-1]
            sol = solve_ode(lambda t, y: np.asarray(X(y), dtype=float), p,
                            (0.0, grid[-1]), t_grid=grid, rtol=rtol,
                            atol=atol, domain=_domain_predicate(domain))
            reached = len(sol.times) if sol.completed else len(sol.times) - 1
            for j in range(1, max(reached, 1)):
                m = half + drn * j
                values[ip, m] = sol.states[j]
                valid[ip, m] = True
            if not sol.completed:
                exits.append((ip, "forward" if drn == 1 else "backward",
                              sol.exit_reason))

    # (s, t) pairs on the grid: s, t, s + t all representable.
    q = max(half // 2, 1)
    pairs = ((q, q), (2 * q, -q), (-q, 2 * q), (q, -2 * q))
    group_defect = 0.0
    inverse_defect = 0.0
    dt = t_grid[1] - t_grid[0]
    for ip, p in enumerate(points):
        for (si, ti) in pairs:
            ms, mst = half + si, half + si + ti
            if not (valid[ip, ms] and valid[ip, mst]):
                continue
            try:
                w = _endpoint(X, values[ip, ms], ti * dt, rtol, atol, domain)
            except DomainExitError:
                continue
            group_defect = max(group_defect, float(nrm(w - values[ip, mst])))
        mt = half + 2 * q
        if valid[ip, mt]:
            try:
                back = _endpoint(X, values[ip, mt], -2 * q * dt, rtol, atol,
                                 domain)
                inverse_defect = max(inverse_defect, float(nrm(back - p)))
            except DomainExitError:
                pass
    return FlowTable(points=points, t_grid=t_grid, values=values,
                     valid=valid, exits=tuple(exits),
                     group_law_defect=group_defect,
                     inverse_defect=inverse_defect,
                     pairs=tuple((si * dt, ti * dt) for si, ti in pairs))


# ---------------------------------------------------------------------------
# Flow domain probing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FlowDomain:
    """Per-point existence interval ``(t_minus, t_plus)`` with exit reasons.

    Reasons are ``horizon`` (integration ran out of requested time),
    ``left_domain`` or ``blow_up``; blow-up times carry a bracket.
    """

    base_point: np.ndarray
    t_minus: float
    t_plus: float
    reason_minus: str
    reason_plus: str
    bracket_minus: tuple = None
    bracket_plus: tuple = None

    def __post_init__(self):
        if not self.t_minus < 0.0 < self.t_plus:
            raise ValueError("existence interval must contain 0")

    def to_dict(self):
        return {
            "base_point": np.asarray(self.base_point).tolist(),
            "t_minus": float(self.t_minus),
            "t_plus": float(self.t_plus),
            "reason_minus": self.reason_minus,
            "reason_plus": self.reason_plus,
            "bracket_minus": None if self.bracket_minus is None
            else [float(v) for v in self.bracket_minus],
            "bracket_plus": None if self.bracket_plus is None
            else [float(v) for v in self.bracket_plus],
        }


def flow_domain(X, x, horizon, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                domain=None):
    """Probe the existence interval of the integral curve through ``x``.

    Continues forward and backward until the horizon, a chart exit or a
    blow-up; the blow-up time estimate inherits the step-collapse bracket
    of the integrator (relative width well under 1e-6).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    require_inside(domain, x, "base point")
    ends = {}
    for sgn in (1.0, -1.0):
        sol = solve_ode(lambda t, y: np.asarray(X(y), dtype=float), x,
                        (0.0, sgn * horizon), rtol=rtol, atol=atol,
                        domain=_domain_predicate(domain))
        reason = "horizon" if sol.completed else sol.exit_reason
        ends[sgn] = (sol.t_reached if not sol.completed else sgn * horizon,
                     reason, sol.blowup_bracket)
    t_plus, reason_plus, br_plus = ends[1.0]
    t_minus, reason_minus, br_minus = ends[-1.0]
    return FlowDomain(base_point=x, t_minus=float(t_minus),
                      t_plus=float(t_plus), reason_minus=reason_minus,
                      reason_plus=reason_plus, bracket_minus=br_minus,
                      bracket_plus=br_plus)
