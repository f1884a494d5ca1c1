"""Sprays, the geodesic ODE, exponential maps and shooting.

A spray is represented in the chart by its symmetric bilinear form
``S(x)(u, v)``; the geodesic equation reads ``l'' = S(l)(l', l')``.  For
a metric-derived spray ``S = -Gamma_n`` (Christoffel form of the level-n
Gram family), which turns the geodesic equation into the classical
``l''^k + Gamma^k_ij l'^i l'^j = 0``.
"""

from dataclasses import dataclass
import json

import numpy as np

from .curves import CurvePath, grid_derivative
from .errors import (
    ConvergenceError,
    DomainExitError,
    SingularMetricError,
)
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL, solve_ode
from .manifold import default_fd_step, require_inside

_EPS_CBRT = float(np.cbrt(np.finfo(float).eps))


@dataclass(frozen=True)
class Spray:
    """Point-indexed symmetric bilinear map driving the geodesic ODE."""

    dim: int
    tensor_fn: object            # x -> (D, D, D) array S[k, i, j]
    provenance: str = "catalog"

    def tensor(self, x):
        return np.asarray(self.tensor_fn(np.asarray(x, dtype=float)),
                          dtype=float)

    def bilinear(self, x, u, v):
        return np.einsum("kij,i,j->k", self.tensor(x),
                         np.asarray(u, float), np.asarray(v, float))

    def quadratic(self, x, v):
        return self.bilinear(x, v, v)


def zero_spray(dim):
    z = np.zeros((dim, dim, dim))
    return Spray(dim=dim, tensor_fn=lambda x: z, provenance="zero")


def spray_from_metric(family, n):
    """Spray of the level-``n`` Gram family: ``S = -Gamma_n``.

    Christoffel symbols come from the family's Gram derivatives (analytic
    when registered, central differences otherwise); the Gram solve fails
    loudly at points where ``G_n`` is singular.
    """
    n = family.check_level(n)
    d = family.dim

    def tensor(x):
        g = family.gram(x, n)
        dg = family.gram_jacobian(x, n)    # dg[k, a, b] = dG_ab / dx_k
        lower = 0.5 * (np.transpose(dg, (1, 0, 2))
                       + np.transpose(dg, (2, 1, 0)) - dg)
        try:
            gamma = np.linalg.solve(g, lower.reshape(d, d * d))
        except np.linalg.LinAlgError as exc:
            raise SingularMetricError(
                f"level-{n} Gram singular at {np.asarray(x).tolist()}",
                point=np.asarray(x)) from exc
        return -gamma.reshape(d, d, d)

    return Spray(dim=d, tensor_fn=tensor, provenance=f"from_metric({n})")


# ---------------------------------------------------------------------------
# Geodesic integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicSolution:
    """Geodesic sample with integrator statistics."""

    path: CurvePath
    x0: np.ndarray
    v0: np.ndarray
    rtol: float
    atol: float
    exit_reason: str
    t_reached: float
    n_steps: int
    n_rejected: int

    @property
    def completed(self):
        return self.exit_reason == "completed"

    def endpoint(self):
        return self.path.nodes[-1], self.path.velocities[-1]


def _geodesic_rhs(spray):
    d = spray.dim

    def rhs(t, y):
        x, v = y[:d], y[d:]
        return np.concatenate([v, spray.quadratic(x, v)])

    return rhs


def _state_domain(domain, d):
    if domain is None:
        return None
    return lambda y: domain.contains(y[:d])


def integrate_geodesic(spray, x0, v0, t_end, rtol=DEFAULT_RTOL,
                       atol=DEFAULT_ATOL, domain=None, grid_size=129,
                       method="rk45", rk4_substeps=16):
    """Solve ``(x, v)' = (v, S(x)(v, v))`` up to ``t_end``.

    The output grid is uniform and the integrator steps onto it exactly,
    so nodal finite differences of the stored velocities reproduce the
    acceleration to integration accuracy (the residual contract).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    v0 = np.atleast_1d(np.asarray(v0, dtype=float))
    require_inside(domain, x0, "initial point")
    d = spray.dim
    grid = np.linspace(0.0, t_end, grid_size)
    sol = solve_ode(_geodesic_rhs(spray), np.concatenate([x0, v0]),
                    (0.0, t_end), t_grid=grid, rtol=rtol, atol=atol,
                    domain=_state_domain(domain, d), method=method,
                    rk4_substeps=rk4_substeps)
    times, states = sol.times, sol.states
    if len(times) < 2:
        sol = solve_ode(_geodesic_rhs(spray), np.concatenate([x0, v0]),
                        (0.0, t_end), rtol=rtol, atol=atol,
                        domain=_state_domain(domain, d), method=method,
                        rk4_substeps=rk4_substeps)
        times, states = sol.times, sol.states
    xs, vs = states[:, :d], states[:, d:]
    accs = np.array([spray.quadratic(x, v) for x, v in zip(xs, vs)])
    if t_end < 0:
        times, xs, vs, accs = times[::-1], xs[::-1], vs[::-1], accs[::-1]
    path = CurvePath(times, xs, vs, accs)
    return GeodesicSolution(path=path, x0=x0, v0=v0, rtol=rtol, atol=atol,
                            exit_reason=sol.exit_reason,
                            t_reached=sol.t_reached, n_steps=sol.n_steps,
                            n_rejected=sol.n_rejected)


def geodesic_residual(solution, spray):
    """Sup over interior grid nodes of ``|l'' - S(l)(l', l')|``.

    ``l''`` is estimated by grid differences of the stored velocities;
    must stay below ``10 * rtol`` for healthy solutions.
    """
    path = solution.path
    dv = grid_derivative(path.times, path.velocities)
    worst = 0.0
    for i in range(2, len(path.times) - 2):
        r = dv[i] - spray.quadratic(path.nodes[i], path.velocities[i])
        worst = max(worst, float(np.linalg.norm(r)))
    return worst


def _geodesic_endpoint(spray, x, v, rtol, atol, domain, method="rk45",
                       rk4_substeps=64):
    """Endpoint (position, velocity) of the unit-time geodesic; raises
    ``DomainExitError`` when the chart is left before t = 1."""
    d = spray.dim
    sol = solve_ode(_geodesic_rhs(spray),
                    np.concatenate([np.asarray(x, float),
                                    np.asarray(v, float)]),
                    (0.0, 1.0), t_grid=np.array([0.0, 1.0]),
                    rtol=rtol, atol=atol, domain=_state_domain(domain, d),
                    method=method, rk4_substeps=rk4_substeps)
    if not sol.completed:
        raise DomainExitError(
            f"geodesic left the chart at t = {sol.t_reached:.6g} "
            "(initial velocity outside the exponential domain)",
            t_reached=sol.t_reached, exit_reason=sol.exit_reason)
    return sol.states[-1][:d], sol.states[-1][d:]


def exp_map(spray, x, v, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, domain=None,
            method="rk45"):
    """Position at time 1 of the geodesic with initial data ``(x, v)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    require_inside(domain, x, "base point")
    if not np.any(v):
        return x.copy()
    return _geodesic_endpoint(spray, x, v, rtol, atol, domain,
                              method=method)[0]


def exp_jacobian(spray, x, v, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                 domain=None, step=None, method="rk4", rk4_substeps=128):
    """Central-difference Jacobian of ``w -> exp_x(w)`` at ``w = v``.

    Defaults to the fixed-step integrator: differencing through adaptive
    step-count switches would contaminate the columns.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if step is None:
        step = _EPS_CBRT ** 0.5 * 1e-2 * (1.0 + float(np.linalg.norm(v)))
    cols = []
    for k in range(spray.dim):
        e = np.zeros(spray.dim)
        e[k] = step
        p = _geodesic_endpoint(spray, x, v + e, rtol, atol, domain,
                               method=method, rk4_substeps=rk4_substeps)[0]
        m = _geodesic_endpoint(spray, x, v - e, rtol, atol, domain,
                               method=method, rk4_substeps=rk4_substeps)[0]
        cols.append((p - m) / (2 * step))
    return np.stack(cols, axis=1)


def check_homogeneity(spray, x, v, s, t, rtol=DEFAULT_RTOL,
                      atol=DEFAULT_ATOL, domain=None, norm=None):
    """Defects of the scaling law: the geodesic with initial velocity
    ``s v`` at time ``t`` against the geodesic with velocity ``v`` at
    time ``s t`` (velocities compared after scaling by ``s``).

    Returns ``(position_error, velocity_error)``.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    nrm = norm if norm is not None else np.linalg.norm
    if s == 0.0 or not np.any(v):
        xa = exp_map(spray, x, 0.0 * v, rtol, atol, domain)
        return float(nrm(xa - x)), 0.0
    sol_a = integrate_geodesic(spray, x, s * v, t, rtol, atol, domain,
                               grid_size=3)
    sol_b = integrate_geodesic(spray, x, v, s * t, rtol, atol, domain,
                               grid_size=3)
    if not (sol_a.completed and sol_b.completed):
        raise DomainExitError("geodesic left the chart during the "
                              "homogeneity check")
    xa, va = sol_a.endpoint()
    xb, vb = sol_b.endpoint()
    if s * t < 0:
        xb, vb = sol_b.path.nodes[0], sol_b.path.velocities[0]
    if t < 0:
        xa, va = sol_a.path.nodes[0], sol_a.path.velocities[0]
    return float(nrm(xa - xb)), float(nrm(va - s * vb))


# ---------------------------------------------------------------------------
# Shooting (the chartwise logarithm)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShootingReport:
    """Damped-Newton shooting record."""

    converged: bool
    iterations: int
    residuals: tuple
    jacobian_condition: float
    damping_floor_hit: bool
    message: str = ""

    def certified(self, cond_threshold=1e8):
        """A posteriori normal-neighborhood certificate: convergence with
        a well-conditioned exponential differential."""
        return self.converged and self.jacobian_condition < cond_threshold

    def to_dict(self):
        return {
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "residuals": [float(r) for r in self.residuals],
            "jacobian_condition": float(self.jacobian_condition),
            "damping_floor_hit": bool(self.damping_floor_hit),
            "message": self.message,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


DAMPING_FLOOR = 1e-4


def connect(spray, x, y, v_init=None, max_iter=50, tol=1e-10,
            rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL, domain=None, norm=None):
    """Initial velocity ``v`` with ``exp_x(v) = y`` by damped Newton.

    Armijo backtracking with damping floor ``1e-4``; the exponential is
    only locally invertible, so non-convergence (reported with history)
    usually means ``y`` sits outside a normal neighborhood of ``x``.
    Returns ``(v, ShootingReport)`` or raises ``ConvergenceError``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nrm = norm if norm is not None else np.linalg.norm
    v = (y - x).astype(float) if v_init is None else np.asarray(v_init,
                                                                dtype=float)

    def residual(w):
        return exp_map(spray, x, w, rtol, atol, domain) - y

    res = residual(v)
    history = [float(nrm(res))]
    cond = 1.0
    floor_hit = False
    for it in range(1, max_iter + 1):
        if history[-1] <= tol:
            report = ShootingReport(True, it - 1, tuple(history), cond,
                                    floor_hit)
            return v, report
        jac = exp_jacobian(spray, x, v, rtol, atol, domain)
        cond = float(np.linalg.cond(jac))
        try:
            delta = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            report = ShootingReport(False, it, tuple(history), np.inf,
                                    floor_hit,
                                    "singular shooting Jacobian "
                                    "(conjugate point suspected)")
            raise ConvergenceError(report.message, report=report) from exc
        alpha = 1.0
        accepted = False
        while alpha >= DAMPING_FLOOR:
            try:
                trial_res = residual(v + alpha * delta)
            except DomainExitError:
                alpha *= 0.5
                continue
            if float(nrm(trial_res)) <= (1 - 1e-4 * alpha) * history[-1]:
                v = v + alpha * delta
                res = trial_res
                history.append(float(nrm(res)))
                accepted = True
                if alpha <= 2 * DAMPING_FLOOR:
                    floor_hit = True
                break
            alpha *= 0.5
        if not accepted:
            report = ShootingReport(False, it, tuple(history), cond, True,
                                    "line search stalled at the damping "
                                    "floor")
            raise ConvergenceError(report.message, report=report)
    if history[-1] <= tol:
        report = ShootingReport(True, max_iter, tuple(history), cond,
                                floor_hit)
        return v, report
    report = ShootingReport(False, max_iter, tuple(history), cond, floor_hit,
                            "no convergence within max_iter (target may "
                            "lie outside a normal neighborhood)")
    raise ConvergenceError(report.message, report=report)


# ---------------------------------------------------------------------------
# Injectivity radius estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InjectivityEstimate:
    """Bisection bracket for the largest certifiable exponential radius.

    ``criterion`` names the failure that capped the radius:
    ``no_failure`` (r_max reached), ``conjugate`` (ill-conditioned
    exponential differential), ``collision`` (two sampled velocities
    landing together) or ``domain_exit`` (chart too small to probe
    further).  An estimate, not a proof.
    """

    radius: float
    criterion: str
    bracket: tuple
    probes: tuple

    def to_dict(self):
        return {
            "radius": float(self.radius),
            "criterion": self.criterion,
            "bracket": [float(b) for b in self.bracket],
            "probes": [[float(r), c] for r, c in self.probes],
        }


def _unit_sphere_velocities(family, x, level, samples, seed):
    d = family.dim
    rng = np.random.default_rng(seed)
    dirs = [np.eye(d)[k] for k in range(d)] + [-np.eye(d)[k]
                                               for k in range(d)]
    while len(dirs) < samples:
        u = rng.standard_normal(d)
        nn = np.linalg.norm(u)
        if nn > 1e-12:
            dirs.append(u / nn)
    out = []
    for u in dirs[:max(samples, 2 * d)]:
        nrm = family.norm(x, level, u)
        if nrm > 1e-300:
            out.append(u / nrm)
    return out


def injectivity_radius_estimate(spray, family, x, r_max, samples=12,
                                level=None, seed=0, cond_threshold=1e8,
                                collision_tol=1e-8, rel_width=0.01,
                                rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                                domain=None, jacobian_probes=4):
    """Bisect the largest radius at which sampled exponential probes fail
    no injectivity surrogate.

    At each radius ``r`` velocities of level-``level`` speed ``r`` are
    sampled on the unit sphere; failure criteria are the conjugate-point
    surrogate (exponential differential condition number beyond
    ``cond_threshold``), the collision surrogate (two endpoints closer
    than ``collision_tol``) and chart exit before time 1.
    """
    if r_max <= 0:
        raise ValueError("r_max must be positive")
    x = np.asarray(x, dtype=float)
    if level is None:
        level = family.levels
    units = _unit_sphere_velocities(family, x, level, samples, seed)

    def probe(r):
        endpoints = []
        for u in units:
            try:
                p, _ = _geodesic_endpoint(spray, x, r * u, rtol, atol,
                                          domain)
            except DomainExitError:
                return "domain_exit"
            endpoints.append(p)
        for i in range(len(endpoints)):
            for j in range(i + 1, len(endpoints)):
                if np.linalg.norm(endpoints[i] - endpoints[j]) < collision_tol:
                    return "collision"
        for u in units[:jacobian_probes]:
            try:
                jac = exp_jacobian(spray, x, r * u, rtol, atol, domain)
            except DomainExitError:
                return "domain_exit"
            if not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > cond_threshold:
                return "conjugate"
        return None

    probes = []
    verdict = probe(r_max)
    probes.append((r_max, verdict or "pass"))
    if verdict is None:
        return InjectivityEstimate(radius=float(r_max),
                                   criterion="no_failure",
                                   bracket=(float(r_max), float(r_max)),
                                   probes=tuple(probes))
    lo, hi = 0.0, r_max
    criterion = verdict
    while hi - lo > rel_width * hi:
        mid = 0.5 * (lo + hi)
        verdict = probe(mid)
        probes.append((mid, verdict or "pass"))
        if verdict is None:
            lo = mid
        else:
            hi = mid
            criterion = verdict
    return InjectivityEstimate(radius=float(lo), criterion=criterion,
                               bracket=(float(lo), float(hi)),
                               probes=tuple(probes))
