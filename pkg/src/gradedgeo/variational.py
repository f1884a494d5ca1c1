"""Length ladder, energies, distances and variational checks.

Lengths and energies integrate the Hermite interpolant with composite
5-point Gauss-Legendre quadrature per grid segment.  Distances are
certified through geodesic shooting inside normal neighborhoods and fall
back to a polygonal upper bound (graph shortest path over seeded
samples) that is flagged as such.  The energy integrand is the velocity
self-product ``<l'(t), l'(t)>_n``, the form required by the
Euler-Lagrange machinery.
"""

from dataclasses import dataclass
import heapq
import json

import numpy as np

from ._threads import indexed_map
from .connection import covariant_along_curve, velocity_lift
from .curves import CurvePath, grid_derivative
from .errors import ConvergenceError, DomainExitError
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL
from .spray import connect, integrate_geodesic

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def _segments(curve):
    if isinstance(curve, CurvePath):
        return [curve]
    return list(curve)


def _quad_points(path):
    """Gauss-Legendre abscissae/weights over every grid segment."""
    t0 = path.times[:-1]
    h = np.diff(path.times)
    ts = (t0[:, None] + 0.5 * h[:, None] * (_GL_NODES[None, :] + 1.0)).ravel()
    ws = (0.5 * h[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return ts, ws


def length_n(family, n, curve):
    """Level-``n`` length ``int |l'(t)|^n_{l(t)} dt`` (piecewise paths sum
    their segments)."""
    total = 0.0
    for seg in _segments(curve):
        ts, ws = _quad_points(seg)
        xs = seg.position(ts)
        vs = seg.velocity(ts)
        vals = np.array([family.norm(x, n, v) for x, v in zip(xs, vs)])
        total += float(vals @ ws)
    return total


def energy_n(family, n, curve):
    """Level-``n`` energy ``(1/2) int <l'(t), l'(t)>_n dt``."""
    total = 0.0
    for seg in _segments(curve):
        ts, ws = _quad_points(seg)
        xs = seg.position(ts)
        vs = seg.velocity(ts)
        vals = np.array([family.product(x, n, v, v) for x, v in zip(xs, vs)])
        total += 0.5 * float(vals @ ws)
    return total


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelDistance:
    value: float
    method: str            # "geodesic" | "polygonal-upper-bound"
    certified: bool
    detail: dict

    def to_dict(self):
        return {"value": float(self.value), "method": self.method,
                "certified": bool(self.certified), "detail": self.detail}


def _straight_path(x, y, samples=17):
    return CurvePath.straight_line(np.asarray(x, float),
                                   np.asarray(y, float)
                                   - np.asarray(x, float),
                                   samples=samples)


def _segment_inside(domain, a, b, checks=9):
    if domain is None:
        return True
    for lam in np.linspace(0.0, 1.0, checks):
        if not domain.contains((1 - lam) * a + lam * b):
            return False
    return True


def _polygonal_upper_bound(problem, n, x, y, seed=0, n_samples=160,
                           k_neighbors=8):
    """Dijkstra over a seeded sample graph; an upper bound by
    construction (every edge is an admissible polygonal segment)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.default_rng(seed)
    lo = np.minimum(x, y)
    hi = np.maximum(x, y)
    pad = 0.6 * np.linalg.norm(hi - lo) + 1e-3
    nodes = [x, y]
    tries = 0
    while len(nodes) < n_samples + 2 and tries < 20 * n_samples:
        tries += 1
        p = rng.uniform(lo - pad, hi + pad)
        if problem.domain is None or problem.domain.contains(p):
            nodes.append(p)
    pts = np.array(nodes)
    m = len(pts)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    order = np.argsort(d2, axis=1)
    adj = [[] for _ in range(m)]
    for i in range(m):
        for j in order[i, 1:k_neighbors + 1]:
            j = int(j)
            if not _segment_inside(problem.domain, pts[i], pts[j]):
                continue
            w = length_n(problem.family, n,
                         _straight_path(pts[i], pts[j], samples=5))
            adj[i].append((j, w))
            adj[j].append((i, w))
    dist = np.full(m, np.inf)
    dist[0] = 0.0
    heap = [(0.0, 0)]
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist[i]:
            continue
        if i == 1:
            break
        for j, w in adj[i]:
            nd = d + w
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(heap, (nd, j))
    if not np.isfinite(dist[1]):
        raise ConvergenceError("no polygonal path found in the sample graph")
    return float(dist[1])


def distance_n(problem, n, x, y, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
               tol=1e-9, grid_size=129, seed=0):
    """Level-``n`` distance with its method and certificate.

    Primary route: shoot a connecting geodesic and measure its length
    (valid inside normal neighborhoods, certified a posteriori by the
    shooting report).  Fallback: polygonal upper bound, flagged.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.array_equal(x, y):
        return LevelDistance(0.0, "geodesic", True, {"trivial": True})
    spray = problem.spray_for_level(n)
    try:
        v, report = connect(spray, x, y, rtol=rtol, atol=atol,
                            domain=problem.domain, tol=tol,
                            norm=problem.norm)
        sol = integrate_geodesic(spray, x, v, 1.0, rtol=rtol, atol=atol,
                                 domain=problem.domain, grid_size=grid_size)
        if sol.completed:
            val = length_n(problem.family, n, sol.path)
            return LevelDistance(val, "geodesic", report.certified(),
                                 {"shooting": report.to_dict()})
    except (ConvergenceError, DomainExitError) as exc:
        detail = {"shooting_error": str(exc)}
    else:
        detail = {"shooting_error": "geodesic left the chart"}
    val = _polygonal_upper_bound(problem, n, x, y, seed=seed)
    detail["note"] = "upper bound only"
    return LevelDistance(val, "polygonal-upper-bound", False, detail)


@dataclass(frozen=True)
class DistanceReport:
    """Per-level distances and the combined weighted metric."""

    levels: tuple                  # LevelDistance per level
    combined: float
    all_certified: bool

    def to_dict(self):
        return {
            "levels": [ld.to_dict() for ld in self.levels],
            "combined": float(self.combined),
            "all_certified": bool(self.all_certified),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def combine_distances(per_level):
    """``sum_n 2^{-n} rho_n / (1 + rho_n)`` over the truncated ladder."""
    return float(sum(2.0 ** (-(i + 1)) * r / (1.0 + r)
                     for i, r in enumerate(per_level)))


def finsler_distance(problem, x, y, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL,
                     tol=1e-9, seed=0):
    """Assemble the per-level distances into the combined metric."""
    per = [distance_n(problem, n, x, y, rtol=rtol, atol=atol, tol=tol,
                      seed=seed)
           for n in range(1, problem.levels + 1)]
    combined = combine_distances([ld.value for ld in per])
    return DistanceReport(levels=tuple(per), combined=combined,
                          all_certified=all(ld.certified for ld in per))


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ElResidual:
    """Residual of the level-``n`` Euler-Lagrange equations on the grid.

    ``residuals[i] = dL/dx (l, l') - d/dt [G_n(l) l']`` at node ``i``;
    the sup norm runs over interior nodes (the fourth-order difference
    region).  Both terms are also reported separately.
    """

    level: int
    times: np.ndarray
    residuals: np.ndarray
    sup_norm: float
    dx_term_sup: float
    dt_term_sup: float
    interior: tuple

    def to_dict(self):
        return {
            "level": int(self.level),
            "sup_norm": float(self.sup_norm),
            "dx_term_sup": float(self.dx_term_sup),
            "dt_term_sup": float(self.dt_term_sup),
            "interior": [int(i) for i in self.interior],
        }


def el_residual(family, n, curve):
    """Euler-Lagrange residual of a curve for the level-``n`` Lagrangian
    ``L(x, v) = (1/2) v^T G_n(x) v``.

    The momentum ``p(t) = G_n(l(t)) l'(t)`` is evaluated at the nodes and
    differentiated with grid differences (fourth order in the interior).
    """
    ts = curve.times
    xs, vs = curve.nodes, curve.velocities
    m = len(ts)
    p = np.array([family.gram(x, n) @ v for x, v in zip(xs, vs)])
    dpdt = grid_derivative(ts, p)
    dxl = np.array([0.5 * np.einsum("kab,a,b->k",
                                    family.gram_jacobian(x, n), v, v)
                    for x, v in zip(xs, vs)])
    res = dxl - dpdt
    lo, hi = (2, m - 2) if m >= 7 else (1, m - 1)
    sup = float(np.max(np.linalg.norm(res[lo:hi], axis=1)))
    return ElResidual(
        level=int(n), times=ts, residuals=res, sup_norm=sup,
        dx_term_sup=float(np.max(np.linalg.norm(dxl[lo:hi], axis=1))),
        dt_term_sup=float(np.max(np.linalg.norm(dpdt[lo:hi], axis=1))),
        interior=(lo, hi))


# ---------------------------------------------------------------------------
# First variation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FirstVariation:
    fd_value: float
    integral_value: float

    @property
    def difference(self):
        return abs(self.fd_value - self.integral_value)

    def to_dict(self):
        return {"fd_value": float(self.fd_value),
                "integral_value": float(self.integral_value),
                "difference": float(self.difference)}


def _require_proper(curve, variation):
    if len(variation.times) != len(curve.times) or not np.allclose(
            variation.times, curve.times, rtol=0, atol=1e-12):
        raise ValueError("variation grid disagrees with the curve grid")
    scale = 1.0 + float(np.max(np.abs(variation.nodes)))
    ends = max(float(np.linalg.norm(variation.nodes[0])),
               float(np.linalg.norm(variation.nodes[-1])))
    if ends > 1e-12 * scale:
        raise ValueError("variation field must vanish at both endpoints "
                         "(proper variation)")


def first_variation(family, n, curve, variation, h_step=1e-4, spray=None):
    """Derivative of ``h -> E_n(curve + h * variation)`` at ``h = 0``.

    Returns the five-point finite-difference value together with the
    first-variation integral ``-int <Y, nabla_{l'} l'>_n dt``; their
    agreement is the cross-check of the variational machinery.
    """
    _require_proper(curve, variation)
    if spray is None:
        from .spray import spray_from_metric
        spray = spray_from_metric(family, n)

    def energy_at(h):
        moved = curve.shifted(h * variation.nodes, h * variation.velocities)
        return energy_n(family, n, moved)

    d = h_step
    fd = (8 * (energy_at(d / 2) - energy_at(-d / 2))
          - (energy_at(d) - energy_at(-d))) / (6 * d)

    lift = velocity_lift(curve)
    ts, ws = _quad_points(curve)
    acc = covariant_along_curve(spray, curve, lift, ts)
    ys = variation.position(ts)
    xs = curve.position(ts)
    vals = np.array([family.product(x, n, y, a)
                     for x, y, a in zip(xs, ys, acc)])
    integral = -float(vals @ ws)
    return FirstVariation(fd_value=float(fd), integral_value=integral)


# ---------------------------------------------------------------------------
# Minimality trials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MinimalityReport:
    passed: bool
    trials: int
    violations: int
    shorter_trials: int          # trials producing a strictly shorter path
    worst_shortfall: float       # most negative L_n(comp) - L_n(base)
    base_lengths: tuple
    resampled: int

    def to_dict(self):
        return {
            "passed": bool(self.passed),
            "trials": int(self.trials),
            "violations": int(self.violations),
            "shorter_trials": int(self.shorter_trials),
            "worst_shortfall": float(self.worst_shortfall),
            "base_lengths": [float(v) for v in self.base_lengths],
            "resampled": int(self.resampled),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _bump_lift(curve, amplitude, rng):
    """Random proper bump: endpoint-vanishing cubics times seeded
    directions, scaled to peak amplitude."""
    d = curve.dim
    t0, t1 = curve.t_start, curve.t_end
    span = t1 - t0
    s = (curve.times - t0) / span
    phi1 = s * (1 - s) ** 2
    phi2 = s ** 2 * (1 - s)
    dphi1 = (1 - s) * (1 - 3 * s) / span
    dphi2 = s * (2 - 3 * s) / span
    d1 = rng.standard_normal(d)
    d2 = rng.standard_normal(d)
    nodes = np.outer(phi1, d1) + np.outer(phi2, d2)
    vels = np.outer(dphi1, d1) + np.outer(dphi2, d2)
    peak = float(np.max(np.linalg.norm(nodes, axis=1)))
    if peak <= 1e-300:
        return None
    scale = amplitude / peak
    return CurvePath(curve.times, scale * nodes, scale * vels)


def minimality_test(problem, geodesic, trials=100, amplitude=0.05, seed=0,
                    slack=1e-9, max_resample=8):
    """Compare the geodesic's length ladder against proper perturbations.

    Each trial perturbs by ``+/- amplitude * bump``; pass iff no
    perturbation is shorter than the base at any level beyond ``slack``.
    The report also counts trials that *did* find a strictly shorter
    competitor, which is the expected outcome for planted non-geodesics.
    """
    family = problem.family
    levels = range(1, family.levels + 1)
    base = [length_n(family, n, geodesic) for n in levels]
    rng = np.random.default_rng(seed)
    resampled = 0

    def run_trial(trial_idx):
        trial_rng = np.random.default_rng((seed, trial_idx))
        amp = amplitude
        for _ in range(max_resample):
            bump = _bump_lift(geodesic, amp, trial_rng)
            if bump is None:
                continue
            candidates = [geodesic.shifted(bump.nodes, bump.velocities),
                          geodesic.shifted(-bump.nodes, -bump.velocities)]
            if problem.domain is not None and not all(
                    all(problem.domain.contains(p) for p in c.nodes)
                    for c in candidates):
                amp *= 0.5
                continue
            lengths = [[length_n(family, n, c) for n in levels]
                       for c in candidates]
            return lengths, amp != amplitude
        return None, True

    results = indexed_map(run_trial, range(trials))
    violations = 0
    shorter = 0
    worst = 0.0
    for lengths, was_resampled in results:
        if lengths is None:
            resampled += 1
            continue
        if was_resampled:
            resampled += 1
        for cand in lengths:
            gaps = [cand[i] - base[i] for i in range(len(base))]
            if any(g < -slack for g in gaps):
                violations += 1
            worst = min(worst, min(gaps))
        if any(all(cand[i] < base[i] - 1e-12 for i in range(len(base)))
               for cand in lengths):
            shorter += 1
    del rng
    return MinimalityReport(
        passed=violations == 0, trials=trials, violations=violations,
        shorter_trials=shorter, worst_shortfall=float(worst),
        base_lengths=tuple(base), resampled=resampled)


# ---------------------------------------------------------------------------
# Gauss lemma check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussReport:
    """Radial-sphere orthogonality and radial-speed constancy defects."""

    epsilon: float
    level: int
    orthogonality_defect: float
    radial_constancy_defect: float
    s_samples: int
    t_samples: int

    def to_dict(self):
        return {
            "epsilon": float(self.epsilon),
            "level": int(self.level),
            "orthogonality_defect": float(self.orthogonality_defect),
            "radial_constancy_defect": float(self.radial_constancy_defect),
            "s_samples": int(self.s_samples),
            "t_samples": int(self.t_samples),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def gauss_check(problem, x, epsilon, s_samples=6, t_samples=8, seed=0,
                delta_t=1e-4, rk4_substeps=256):
    """Geodesic-sphere orthogonality check around ``x``.

    Builds the radial surface ``(s, t) -> exp_x(s j(t))`` over a closed
    unit-speed curve ``j`` on the driving-level sphere, with the radial
    partial taken from the integrated velocities (exact) and the angular
    partial from central differences across neighboring rays.  Uses the
    fixed-step integrator so the angular differences see a smooth error.
    """
    x = np.asarray(x, dtype=float)
    d = problem.dim
    family = problem.family
    level = problem.driving_level
    spray = problem.spray_for_level(level)
    rng = np.random.default_rng(seed)
    if d == 2:
        a = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0])
    else:
        q, _ = np.linalg.qr(rng.standard_normal((d, 2)))
        a, b = q[:, 0], q[:, 1]

    def ray_dir(t):
        u = a * np.cos(t) + b * np.sin(t)
        return u / family.norm(x, level, u)

    s_grid = np.linspace(0.0, epsilon, s_samples + 1)
    t_grid = np.linspace(0.0, 2 * np.pi, t_samples, endpoint=False)

    def shoot(t):
        sol = integrate_geodesic(spray, x, ray_dir(t), epsilon,
                                 domain=problem.domain,
                                 grid_size=s_samples + 1, method="rk4",
                                 rk4_substeps=max(4, rk4_substeps
                                                  // max(s_samples, 1)))
        if not sol.completed:
            raise DomainExitError(
                "epsilon exceeds the certifiable radius at this point",
                t_reached=sol.t_reached, exit_reason=sol.exit_reason)
        return sol.path

    orth = 0.0
    radial = 0.0
    for t in t_grid:
        mid = shoot(t)
        plus = shoot(t + delta_t)
        minus = shoot(t - delta_t)
        d2 = (plus.nodes - minus.nodes) / (2 * delta_t)
        for i in range(1, s_samples + 1):
            pt = mid.nodes[i]
            d1 = mid.velocities[i]
            for n in range(1, family.levels + 1):
                ip = family.product(pt, n, d1, d2[i])
                denom = (family.norm(pt, n, d1) * family.norm(pt, n, d2[i])
                         + 1e-30)
                orth = max(orth, abs(ip) / denom)
        for n in range(1, family.levels + 1):
            speeds = np.array([family.product(mid.nodes[i], n,
                                              mid.velocities[i],
                                              mid.velocities[i])
                               for i in range(s_samples + 1)])
            base = speeds[0] if speeds[0] > 0 else 1.0
            radial = max(radial, float(np.max(np.abs(speeds - speeds[0]))
                                       / base))
    return GaussReport(epsilon=float(epsilon), level=int(level),
                       orthogonality_defect=float(orth),
                       radial_constancy_defect=float(radial),
                       s_samples=s_samples, t_samples=t_samples)
