"""Manifold kernel: derivatives, brackets, integral curves, flows."""

import numpy as np
import pytest
import sympy as sp

from gradedgeo.curves import CurvePath, grid_derivative
from gradedgeo.errors import DomainExitError
from gradedgeo.manifold import (
    BallDomain,
    BoxDomain,
    SmoothMap,
    bracket_field,
    directional_derivative,
    fd_directional_derivative,
    flow_domain,
    flow_endpoint,
    integrate_vector_field,
    lie_bracket,
    local_flow,
)

# ---------------------------------------------------------------------------
# symbolic oracles
# ---------------------------------------------------------------------------

X1, X2 = sp.symbols("x1 x2")


def sympy_directional(expr, point, direction):
    grad = [sp.diff(expr, v) for v in (X1, X2)]
    subs = {X1: point[0], X2: point[1]}
    return float(sum(float(g.subs(subs)) * d for g, d in zip(grad, direction)))


def sympy_bracket(xexprs, yexprs, point):
    """[X, Y] = Y'X - X'Y evaluated symbolically."""
    subs = {X1: point[0], X2: point[1]}
    jx = sp.Matrix([[sp.diff(e, v) for v in (X1, X2)] for e in xexprs])
    jy = sp.Matrix([[sp.diff(e, v) for v in (X1, X2)] for e in yexprs])
    xv = sp.Matrix(xexprs)
    yv = sp.Matrix(yexprs)
    out = (jy @ xv - jx @ yv).subs(subs)
    return np.array([float(out[0]), float(out[1])])


# ---------------------------------------------------------------------------
# fields used throughout
# ---------------------------------------------------------------------------

ROTATION = SmoothMap(fn=lambda x: np.array([-x[1], x[0]]),
                     jac=lambda x: np.array([[0.0, -1.0], [1.0, 0.0]]),
                     name="rotation")
EXPAND = SmoothMap(fn=lambda x: x.copy(), jac=lambda x: np.eye(len(x)),
                   name="scale")
SQUARE = SmoothMap(fn=lambda x: x * x, jac=lambda x: np.diag(2 * x),
                   name="square")
ONE_PLUS_SQUARE = SmoothMap(fn=lambda x: 1.0 + x * x,
                            jac=lambda x: np.diag(2 * x),
                            name="one_plus_square")
SHEAR_SQ = SmoothMap(fn=lambda x: np.array([x[1] ** 2, 0.0]),
                     jac=lambda x: np.array([[0.0, 2 * x[1]], [0.0, 0.0]]),
                     name="shear_sq")
COORD_RAMP = SmoothMap(fn=lambda x: np.array([0.0, x[0]]),
                       jac=lambda x: np.array([[0.0, 0.0], [1.0, 0.0]]),
                       name="coord_ramp")


# ---------------------------------------------------------------------------
# directional derivatives
# ---------------------------------------------------------------------------

def test_directional_derivative_linear_form():
    c = np.array([2.0, -3.0])
    f = SmoothMap(fn=lambda x: float(c @ x), jac=lambda x: c)
    x = np.array([0.4, 0.7])
    h = np.array([1.0, 2.0])
    assert directional_derivative(f, x, h) == pytest.approx(c @ h, abs=1e-12)
    assert fd_directional_derivative(f, x, h) == pytest.approx(c @ h, abs=1e-9)


def test_directional_derivative_squared_norm():
    f = SmoothMap(fn=lambda x: float(x @ x))
    x = np.array([1.0, -0.5])
    h = np.array([0.3, 0.2])
    assert directional_derivative(f, x, h) == pytest.approx(2 * x @ h, abs=1e-8)


def test_directional_derivative_exponential_vs_symbolic():
    expr = sp.exp(2 * X1)
    x = np.array([0.3, 0.0])
    h = np.array([1.0, 0.0])
    expected = sympy_directional(expr, x, h)
    assert expected == pytest.approx(2 * np.exp(0.6), rel=1e-12)
    f = SmoothMap(fn=lambda p: float(np.exp(2 * p[0])))
    assert directional_derivative(f, x, h) == pytest.approx(expected, abs=1e-6)


def test_directional_derivative_outside_domain_raises():
    f = SmoothMap(fn=lambda x: float(x @ x))
    dom = BallDomain(np.zeros(2), 1.0)
    with pytest.raises(DomainExitError):
        directional_derivative(f, np.array([2.0, 0.0]), np.array([1.0, 0.0]),
                               domain=dom)


def test_analytic_and_fd_directional_agree():
    f = SmoothMap(fn=lambda x: np.array([np.sin(x[0]), x[0] * x[1]]),
                  jac=lambda x: np.array([[np.cos(x[0]), 0.0],
                                          [x[1], x[0]]]))
    x = np.array([0.2, -0.8])
    h = np.array([0.5, 1.5])
    ana = directional_derivative(f, x, h)
    fd = fd_directional_derivative(f, x, h)
    assert np.allclose(ana, fd, atol=1e-8)


# ---------------------------------------------------------------------------
# Lie brackets
# ---------------------------------------------------------------------------

def test_bracket_constant_fields():
    A = SmoothMap(fn=lambda x: np.array([1.0, 2.0]),
                  jac=lambda x: np.zeros((2, 2)))
    B = SmoothMap(fn=lambda x: np.array([-1.0, 3.0]),
                  jac=lambda x: np.zeros((2, 2)))
    assert np.allclose(lie_bracket(A, B, np.array([0.3, 0.4])), 0.0)


def test_bracket_linear_fields_matrix_commutator():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((2, 2))
    B = rng.standard_normal((2, 2))
    XA = SmoothMap(fn=lambda x: A @ x, jac=lambda x: A)
    XB = SmoothMap(fn=lambda x: B @ x, jac=lambda x: B)
    x = rng.standard_normal(2)
    # derivation convention [X, Y] = Y'X - X'Y gives (BA - AB) x
    assert np.allclose(lie_bracket(XA, XB, x), (B @ A - A @ B) @ x,
                       atol=1e-12)


def test_bracket_nonlinear_pair_vs_symbolic():
    rng = np.random.default_rng(4)
    for _ in range(5):
        x = rng.uniform(-1, 1, size=2)
        expected = sympy_bracket([X2 ** 2, sp.Integer(0)],
                                 [sp.Integer(0), X1], x)
        got = lie_bracket(SHEAR_SQ, COORD_RAMP, x)
        assert np.allclose(got, expected, atol=1e-6)


def test_bracket_antisymmetry_seeded():
    rng = np.random.default_rng(5)
    F = SmoothMap(fn=lambda x: np.array([np.sin(x[1]), x[0] ** 2]))
    G = SmoothMap(fn=lambda x: np.array([x[0] * x[1], np.cos(x[0])]))
    for _ in range(50):
        x = rng.uniform(-1.5, 1.5, size=2)
        assert np.allclose(lie_bracket(F, G, x), -lie_bracket(G, F, x),
                           atol=1e-8)


def test_jacobi_identity_on_polynomial_triple():
    Z = SmoothMap(fn=lambda x: np.array([x[0] * x[1], x[0] - x[1] ** 2]),
                  jac=lambda x: np.array([[x[1], x[0]], [1.0, -2 * x[1]]]),
                  name="poly")
    rng = np.random.default_rng(6)
    for _ in range(10):
        x = rng.uniform(-1, 1, size=2)
        lhs = lie_bracket(SHEAR_SQ, bracket_field(COORD_RAMP, Z), x)
        rhs = (lie_bracket(bracket_field(SHEAR_SQ, COORD_RAMP), Z, x)
               + lie_bracket(COORD_RAMP, bracket_field(SHEAR_SQ, Z), x))
        assert np.allclose(lhs, rhs, atol=1e-5)


# ---------------------------------------------------------------------------
# integral curves
# ---------------------------------------------------------------------------

def test_integral_curve_exponential():
    sol = integrate_vector_field(EXPAND, [1.0], 1.0)
    assert sol.exit_reason == "completed"
    assert sol.path.nodes[-1, 0] == pytest.approx(np.e, abs=1e-8)


def test_integral_curve_rotation_quarter_turn():
    sol = integrate_vector_field(ROTATION, [1.0, 0.0], np.pi / 2)
    assert np.allclose(sol.path.nodes[-1], [0.0, 1.0], atol=1e-8)


def test_integral_curve_riccati_closed_form():
    sol = integrate_vector_field(SQUARE, [1.0], 0.5)
    assert sol.path.nodes[-1, 0] == pytest.approx(2.0, abs=1e-8)


def test_integral_curve_backward():
    sol = integrate_vector_field(EXPAND, [1.0], -1.0)
    assert sol.path.t_start == pytest.approx(-1.0)
    assert sol.path.nodes[0, 0] == pytest.approx(np.exp(-1.0), abs=1e-8)
    assert sol.path.nodes[-1, 0] == pytest.approx(1.0, abs=1e-12)


def test_integral_curve_truncates_at_chart_boundary():
    dom = BoxDomain([-2.0, -2.0], [2.0, 2.0])
    drift = SmoothMap(fn=lambda x: np.array([1.0, 0.0]))
    sol = integrate_vector_field(drift, [0.0, 0.0], 10.0, domain=dom)
    assert sol.exit_reason == "left_domain"
    assert sol.t_reached == pytest.approx(2.0, abs=1e-9)


# ---------------------------------------------------------------------------
# local flows
# ---------------------------------------------------------------------------

def test_local_flow_exponential_group_law():
    table = local_flow(EXPAND, [[1.0]], a=1.0, grid_size=17)
    assert table.group_law_defect <= 1e-8
    assert table.inverse_defect <= 1e-8
    # t = 0 slice is the identity exactly
    half = (len(table.t_grid) - 1) // 2
    assert table.values[0, half, 0] == 1.0


def test_local_flow_rotation_composition():
    z = flow_endpoint(ROTATION, [1.0, 0.0], np.pi / 6)
    w = flow_endpoint(ROTATION, z, np.pi / 3)
    direct = flow_endpoint(ROTATION, [1.0, 0.0], np.pi / 2)
    assert np.linalg.norm(w - direct) <= 1e-8


def test_flow_uniqueness_restart_agrees():
    # integrating from F(x, s) for time t agrees with F(x, s + t)
    s, t = 0.4, 0.35
    mid = flow_endpoint(SHEAR_SQ, [0.2, 0.5], s)
    w = flow_endpoint(SHEAR_SQ, mid, t)
    direct = flow_endpoint(SHEAR_SQ, [0.2, 0.5], s + t)
    assert np.linalg.norm(w - direct) <= 1e-7


def test_group_law_error_decreases_with_tolerance():
    field = SmoothMap(fn=lambda x: np.array([x[1] ** 2 + 0.3,
                                             x[0] * x[1] - 0.2]))
    defects = []
    for rtol in (1e-5, 1e-7, 1e-9):
        table = local_flow(field, [[0.3, 0.2]], a=0.8, rtol=rtol,
                           atol=rtol * 1e-3, grid_size=17)
        defects.append(table.group_law_defect)
    assert defects[0] >= defects[1] >= defects[2]


# ---------------------------------------------------------------------------
# flow domains
# ---------------------------------------------------------------------------

def test_flow_domain_square_blowup():
    fd = flow_domain(SQUARE, [2.0], horizon=10.0)
    assert fd.reason_plus == "blow_up"
    assert fd.t_plus == pytest.approx(0.5, abs=1e-6)


def test_flow_domain_linear_horizon():
    fd = flow_domain(EXPAND, [1.0], horizon=10.0)
    assert fd.reason_plus == "horizon" and fd.reason_minus == "horizon"
    assert fd.t_plus == 10.0 and fd.t_minus == -10.0


def test_flow_domain_tangent_blowup():
    fd = flow_domain(ONE_PLUS_SQUARE, [0.0], horizon=5.0)
    assert fd.reason_plus == "blow_up"
    assert fd.t_plus == pytest.approx(np.pi / 2, abs=1e-6)
    assert fd.t_minus == pytest.approx(-np.pi / 2, abs=1e-6)


def test_flow_domain_serializes():
    fd = flow_domain(SQUARE, [2.0], horizon=2.0)
    d = fd.to_dict()
    assert d["reason_plus"] == "blow_up"
    assert d["bracket_plus"] is not None


# ---------------------------------------------------------------------------
# curve paths
# ---------------------------------------------------------------------------

def test_curvepath_straight_line_interpolation():
    path = CurvePath.straight_line([0.0, 1.0], [2.0, -1.0], samples=9)
    ts = np.linspace(0, 1, 31)
    expect = np.array([[2 * t, 1 - t] for t in ts])
    assert np.allclose(path.position(ts), expect, atol=1e-14)
    assert np.allclose(path.velocity(0.37), [2.0, -1.0], atol=1e-12)


def test_curvepath_velocity_consistency_circle():
    ts = np.linspace(0, 2 * np.pi, 257)
    path = CurvePath(ts, np.stack([np.cos(ts), np.sin(ts)], axis=1),
                     np.stack([-np.sin(ts), np.cos(ts)], axis=1))
    assert path.consistency_defect() <= 1e-6


def test_curvepath_csv_roundtrip(tmp_path):
    sol = integrate_vector_field(ROTATION, [1.0, 0.0], 1.0)
    f = tmp_path / "curve.csv"
    sol.path.to_csv(f)
    back = CurvePath.from_csv(f)
    assert np.max(np.abs(back.nodes - sol.path.nodes)) <= 1e-12
    assert np.max(np.abs(back.times - sol.path.times)) <= 1e-12
    assert np.max(np.abs(back.velocities - sol.path.velocities)) <= 1e-12


def test_grid_derivative_fourth_order():
    ts = np.linspace(0, 1, 101)
    vals = np.sin(3 * ts)[:, None]
    d = grid_derivative(ts, vals)
    err = np.max(np.abs(d[2:-2, 0] - 3 * np.cos(3 * ts[2:-2])))
    assert err <= 1e-7
