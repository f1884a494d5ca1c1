"""Koszul covariant derivatives, derivatives along curves, transport.

The per-level covariant derivative is pinned by metric compatibility and
torsion-freeness.  ``koszul_covariant`` recovers it numerically from Lie
derivatives of the fiber products and brackets (the defining data), and
is cross-checked elsewhere against the independent chart formula
``(X, Y) -> Y'(x) X(x) - S(x)(X(x), Y(x))`` with the metric spray; the
two routes share no code.
"""

from dataclasses import dataclass
import json

import numpy as np

from .curves import CurvePath
from .errors import SingularMetricError
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL, solve_ode
from .manifold import default_fd_step, fd_directional_derivative, lie_bracket


def _product_scalar(family, n, A, B):
    """The function ``p -> A(p)^T G_n(p) B(p)`` as a plain callable."""

    def fn(p):
        return float(np.asarray(A(p), float)
                     @ family.gram(p, n) @ np.asarray(B(p), float))

    return fn


def lie_derivative_of_product(family, n, A, B, x, along, step=None):
    """Directional derivative of ``<A, B>_n`` along the vector ``along``.

    Always computed by central differences of the product scalar; this
    keeps the Koszul route independent of the registered analytic Gram
    derivatives used by the spray route.
    """
    return fd_directional_derivative(_product_scalar(family, n, A, B),
                                     x, along, step=step)


def koszul_covariant(family, n, X, Y, x, step=None):
    """``(nabla^n_X Y)(x)`` from the Koszul data.

    Components against the coordinate fields ``e_k``:

        2 <nabla_X Y, e_k> = L_X <Y, e_k> + L_Y <X, e_k> - L_{e_k} <X, Y>
                             + <[X, Y], e_k> - <[X, e_k], Y> - <[Y, e_k], X>

    followed by a solve against ``G_n(x)``.  Fails loudly when ``G_n(x)``
    is singular (degenerate levels carry products and lengths but no
    covariant derivative).
    """
    x = np.asarray(x, dtype=float)
    d = family.dim
    g = family.gram(x, n)
    xv = np.asarray(X(x), float)
    yv = np.asarray(Y(x), float)
    jx = X.jacobian(x)
    jy = Y.jacobian(x)
    if step is None:
        step = default_fd_step(x)

    k_vec = np.empty(d)
    bracket_xy = jy @ xv - jx @ yv
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        const_e = _ConstField(e)
        lx = lie_derivative_of_product(family, n, Y, const_e, x, xv, step)
        ly = lie_derivative_of_product(family, n, X, const_e, x, yv, step)
        lz = lie_derivative_of_product(family, n, X, Y, x, e, step)
        # coordinate fields are constant: [X, e_k] = -X'(x) e_k
        term_bx = float((jx @ e) @ g @ yv)     # -<[X, e_k], Y>
        term_by = float((jy @ e) @ g @ xv)     # -<[Y, e_k], X>
        term_xy = float(bracket_xy @ g @ e)    # <[X, Y], e_k>
        k_vec[k] = lx + ly - lz + term_xy + term_bx + term_by
    try:
        return np.linalg.solve(g, 0.5 * k_vec)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError(
            f"level-{n} Gram singular at {x.tolist()}", point=x) from exc


class _ConstField:
    """Constant vector field with the SmoothMap call/jacobian surface."""

    def __init__(self, value):
        self.value = np.asarray(value, dtype=float)
        self.jac = lambda x: np.zeros((self.value.size, self.value.size))
        self.name = "const"

    def __call__(self, x):
        return self.value

    def jacobian(self, x, step=None):
        return np.zeros((self.value.size, self.value.size))


def chart_covariant(spray, X, Y, x):
    """Chart formula ``(nabla_X Y)(x) = Y'(x) X(x) - S(x)(X(x), Y(x))``."""
    x = np.asarray(x, dtype=float)
    xv = np.asarray(X(x), float)
    yv = np.asarray(Y(x), float)
    return Y.jacobian(x) @ xv - spray.bilinear(x, xv, yv)


# ---------------------------------------------------------------------------
# Covariant derivative along a curve, parallel transport
# ---------------------------------------------------------------------------

def lift_from_values(times, values):
    """Lift path from sampled values; slopes from grid differences."""
    from .curves import grid_derivative

    values = np.asarray(values, dtype=float)
    return CurvePath(times, values, grid_derivative(times, values))


def velocity_lift(curve):
    """The canonical lift ``t -> l'(t)`` of a curve as a lift path."""
    return CurvePath(curve.times, curve.velocities, curve.node_slopes())


def covariant_along_curve(spray, curve, lift, t):
    """``(nabla_{l'} gamma)(t) = gamma'(t) - S(l(t))(l'(t), gamma(t))``.

    ``lift`` must be sampled on the same grid as ``curve``.
    """
    if len(lift.times) != len(curve.times) or not np.allclose(
            lift.times, curve.times, rtol=0, atol=1e-12):
        raise ValueError("lift grid disagrees with the curve grid")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    lam = curve.position(ts)
    lam_dot = curve.velocity(ts)
    gam = lift.position(ts)
    gam_dot = lift.velocity(ts)
    out = np.empty_like(gam)
    for i in range(len(ts)):
        out[i] = gam_dot[i] - spray.bilinear(lam[i], lam_dot[i], gam[i])
    return out[0] if np.isscalar(t) else out


def parallel_transport(spray, family, curve, v0, rtol=DEFAULT_RTOL,
                       atol=DEFAULT_ATOL):
    """Solve ``gamma' = S(l(t))(l'(t), gamma)`` along the curve.

    Returns the transported lift on the curve's own grid.  For sprays
    derived from a metric level the level norm of the lift is a
    conserved quantity (checked by ``transport_norm_drift``).
    """
    v0 = np.asarray(v0, dtype=float)

    def rhs(t, g):
        lam = curve.position(t)
        lam_dot = curve.velocity(t)
        return spray.bilinear(lam, lam_dot, g)

    sol = solve_ode(rhs, v0, (curve.t_start, curve.t_end),
                    t_grid=curve.times, rtol=rtol, atol=atol)
    values = sol.states
    slopes = np.array([rhs(t, g) for t, g in zip(curve.times, values)])
    return CurvePath(curve.times, values, slopes)


def transport_norm_drift(family, n, curve, lift):
    """Max relative drift of ``|gamma(t)|_n`` along the curve."""
    norms = np.array([family.norm(x, n, g)
                      for x, g in zip(curve.nodes, lift.nodes)])
    base = norms[0] if norms[0] > 0 else 1.0
    return float(np.max(np.abs(norms - norms[0])) / base)


# ---------------------------------------------------------------------------
# Defining-property report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConnectionPropertyReport:
    """Residuals of the two defining properties plus the chart-formula
    cross-check, maximized over sample points."""

    level: int
    samples: int
    compatibility_residual: float
    torsion_residual: float
    chart_agreement: float
    worst_point: tuple

    def to_dict(self):
        return {
            "level": int(self.level),
            "samples": int(self.samples),
            "compatibility_residual": float(self.compatibility_residual),
            "torsion_residual": float(self.torsion_residual),
            "chart_agreement": float(self.chart_agreement),
            "worst_point": [float(v) for v in self.worst_point],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def connection_property_report(family, n, spray, X, Y, Z, points):
    """Evaluate compatibility, torsion and chart agreement over points.

    compatibility:  L_Z <X, Y>_n - <nabla_Z X, Y>_n - <X, nabla_Z Y>_n
    torsion:        nabla_X Y - nabla_Y X - [X, Y]
    chart:          koszul route against the chart formula with ``spray``
    """
    worst_c = worst_t = worst_a = 0.0
    worst_pt = None
    for x in np.atleast_2d(np.asarray(points, dtype=float)):
        g = family.gram(x, n)
        zv = np.asarray(Z(x), float)
        nab_zx = koszul_covariant(family, n, Z, X, x)
        nab_zy = koszul_covariant(family, n, Z, Y, x)
        lz = lie_derivative_of_product(family, n, X, Y, x, zv)
        compat = abs(lz - float(nab_zx @ g @ np.asarray(Y(x), float))
                     - float(np.asarray(X(x), float) @ g @ nab_zy))
        nab_xy = koszul_covariant(family, n, X, Y, x)
        nab_yx = koszul_covariant(family, n, Y, X, x)
        torsion = float(np.linalg.norm(
            nab_xy - nab_yx - lie_bracket(X, Y, x)))
        agree = float(np.linalg.norm(nab_xy - chart_covariant(spray, X, Y, x)))
        if max(compat, torsion, agree) > max(worst_c, worst_t, worst_a):
            worst_pt = x
        worst_c = max(worst_c, compat)
        worst_t = max(worst_t, torsion)
        worst_a = max(worst_a, agree)
    return ConnectionPropertyReport(
        level=int(n), samples=len(np.atleast_2d(points)),
        compatibility_residual=worst_c, torsion_residual=worst_t,
        chart_agreement=worst_a,
        worst_point=tuple(worst_pt if worst_pt is not None else ()))
