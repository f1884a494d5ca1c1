"""Level metric families, Finsler products and the compatibility check."""

import numpy as np
import pytest

from gradedgeo.catalog import catalog_problem
from gradedgeo.errors import LevelRangeError
from gradedgeo.metric import (
    constant_family,
    f_orthogonal,
    finsler_check,
    finsler_product,
    scalar_scaled_family,
)

from _oracles import conformal_gram_expr, sphere_gram_expr


@pytest.fixture
def conformal():
    return catalog_problem("conformal")


@pytest.fixture
def const_fam():
    return constant_family([np.eye(2), 2.0 * np.eye(2)])


def test_finsler_product_zero_vector(const_fam):
    x = np.array([0.1, 0.2])
    assert finsler_product(const_fam, 1, x, [0.0, 0.0], [1.0, 2.0]) == 0.0


def test_finsler_product_orthogonal_axes():
    fam = constant_family([np.eye(2), 3.0 * np.eye(2)])
    x = np.zeros(2)
    assert finsler_product(fam, 2, x, [1.0, 0.0], [0.0, 1.0]) == 0.0


def test_finsler_product_scaled_identity():
    fam = constant_family([2.0 * np.eye(2)])
    assert finsler_product(fam, 1, np.zeros(2), [1, 0], [1, 0]) == 2.0


def test_finsler_product_symmetry_bilinearity(conformal):
    rng = np.random.default_rng(8)
    fam = conformal.family
    for _ in range(100):
        x = rng.uniform(-1, 1, 2)
        u, v, w = rng.standard_normal((3, 2))
        a, b = rng.standard_normal(2)
        p_uv = finsler_product(fam, 1, x, u, v)
        assert p_uv == pytest.approx(finsler_product(fam, 1, x, v, u),
                                     abs=1e-14)
        lin = finsler_product(fam, 1, x, u, a * v + b * w)
        assert lin == pytest.approx(
            a * p_uv + b * finsler_product(fam, 1, x, u, w),
            rel=1e-12, abs=1e-12)


def test_level_out_of_range(const_fam):
    with pytest.raises(LevelRangeError):
        finsler_product(const_fam, 3, np.zeros(2), [1, 0], [1, 0])


def test_gram_jacobian_matches_symbolic(conformal):
    g_expr, coords = conformal_gram_expr(scale=1.0)
    import sympy as sp
    x = np.array([0.3, -0.2])
    got = conformal.family.gram_jacobian(x, 1)
    for k in range(2):
        expected = np.array(
            [[float(sp.diff(g_expr[i, j], coords[k]).subs(
                {coords[0]: x[0], coords[1]: x[1]}))
              for j in range(2)] for i in range(2)])
        assert np.allclose(got[k], expected, atol=1e-12)


def test_gram_jacobian_fd_fallback_close_to_analytic():
    def base(x):
        return np.exp(2 * x[0]) * np.eye(2)

    fam_fd = scalar_scaled_family((1.0, 2.0), base, 2)
    fam_an = catalog_problem("conformal").family
    x = np.array([0.25, 0.4])
    assert np.allclose(fam_fd.gram_jacobian(x, 2),
                       fam_an.gram_jacobian(x, 2), atol=1e-7)


def test_f_orthogonal_zero_vector(const_fam):
    ok, values = f_orthogonal(const_fam, np.zeros(2), [1.0, 2.0], [0.0, 0.0])
    assert ok and values == [0.0, 0.0]


def test_f_orthogonal_scalar_scaled_all_levels(conformal):
    x = np.array([0.2, 0.1])
    u = np.array([1.0, 1.0])
    v = np.array([1.0, -1.0])  # orthogonal in the base metric
    ok, values = f_orthogonal(conformal.family, x, u, v)
    assert ok
    assert np.allclose(values, 0.0, atol=1e-12)


def test_f_orthogonal_self_fails(const_fam):
    ok, _ = f_orthogonal(const_fam, np.zeros(2), [1.0, 0.0], [1.0, 0.0])
    assert not ok


def test_finsler_check_constant_family_passes(const_fam):
    rep = finsler_check(const_fam, np.zeros(2), k=1.0001, radius=1.0, seed=1)
    assert rep.passed
    assert max(rep.level_max_ratio) == pytest.approx(1.0, abs=1e-12)
    assert min(rep.level_min_ratio) == pytest.approx(1.0, abs=1e-12)


def test_finsler_check_conformal_boundary_ratio(conformal):
    # ratio of fiber norms is exactly exp(dx1); the axis samples hit the
    # boundary so the worst ratio reaches exp(r)
    r = 1.0
    rep = finsler_check(conformal.family, np.zeros(2), k=np.e + 1e-3,
                        radius=r, samples=64, seed=2,
                        domain=conformal.domain)
    assert rep.passed
    assert max(rep.level_max_ratio) == pytest.approx(np.e, abs=1e-3)
    assert min(rep.level_min_ratio) == pytest.approx(1 / np.e, abs=1e-3)


def test_finsler_check_conformal_tight_k_fails(conformal):
    rep = finsler_check(conformal.family, np.zeros(2), k=1.1, radius=1.0,
                        samples=64, seed=2)
    assert not rep.passed
    # witness sits near the ball boundary along the conformal axis
    w = np.asarray(rep.witness_max[0])
    assert abs(w[0]) >= 0.9
    assert rep.to_json().startswith("{")


def test_finsler_check_k_must_exceed_one(const_fam):
    with pytest.raises(ValueError):
        finsler_check(const_fam, np.zeros(2), k=1.0, radius=0.5)


def test_finsler_check_radius_outside_domain(conformal):
    with pytest.raises(ValueError):
        finsler_check(conformal.family, np.zeros(2), k=2.0, radius=10.0,
                      domain=conformal.domain)


def test_grading_holds_at_sampled_points():
    rng = np.random.default_rng(9)
    for prob in (catalog_problem("conformal"),
                 catalog_problem("sphere_stereographic"),
                 catalog_problem("spd", m=2, kind="ebin")):
        for _ in range(20):
            x = prob.center + 0.2 * rng.standard_normal(prob.dim)
            if not prob.domain.contains(x):
                continue
            assert prob.family.grading_report_at(x).passed, prob.name


def test_sphere_family_matches_symbolic():
    prob = catalog_problem("sphere_stereographic")
    g_expr, coords = sphere_gram_expr(radius=1.0)
    import sympy as sp
    x = np.array([0.4, -0.6])
    got = prob.family.gram(x, 1)
    expected = np.array(
        [[float(g_expr[i, j].subs({coords[0]: x[0], coords[1]: x[1]}))
          for j in range(2)] for i in range(2)])
    assert np.allclose(got, expected, atol=1e-12)
