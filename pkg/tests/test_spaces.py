"""Graded model spaces: seminorms, model metric, grading, Lipschitz gap."""

import numpy as np
import pytest

from gradedgeo.errors import (
    DimensionMismatchError,
    GradingError,
    LevelRangeError,
)
from gradedgeo.spaces import (
    GradedSeminormSpace,
    LinearOperatorSample,
    check_grading,
    lipschitz_gap,
    model_metric,
    seminorm,
)


def scalar_gap_oracle(c):
    """Brute-force sup of rho(c*x, 0)/sigma(x, 0) for the 1-D identity
    ladder, i.e. of (|c|x/(1+|c|x)) / (x/(1+x)) over x > 0."""
    x = np.logspace(-12, 12, 200001)
    ratio = (abs(c) * x / (1 + abs(c) * x)) / (x / (1 + x))
    return float(ratio.max())


@pytest.fixture
def space22():
    return GradedSeminormSpace.create([np.eye(2), 2.0 * np.eye(2)])


def test_seminorm_euclidean_345(space22):
    assert seminorm(space22, 1, [3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)


def test_seminorm_zero_vector(space22):
    assert seminorm(space22, 1, [0.0, 0.0]) == 0.0
    assert seminorm(space22, 2, [0.0, 0.0]) == 0.0


def test_seminorm_level_two_scaled(space22):
    assert seminorm(space22, 2, [1.0, 0.0]) == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_seminorm_level_out_of_range(space22):
    with pytest.raises(LevelRangeError):
        seminorm(space22, 0, [1.0, 0.0])
    with pytest.raises(LevelRangeError):
        seminorm(space22, 3, [1.0, 0.0])


def test_seminorm_monotone_in_level():
    rng = np.random.default_rng(7)
    a = rng.standard_normal((3, 3))
    g1 = a @ a.T + 0.1 * np.eye(3)
    g2 = g1 + np.diag([0.5, 0.0, 1.0])
    g3 = g2 + 0.3 * np.eye(3)
    space = GradedSeminormSpace.create([g1, g2, g3])
    for _ in range(200):
        x = rng.standard_normal(3) * rng.uniform(0.01, 100)
        s = [seminorm(space, n, x) for n in (1, 2, 3)]
        assert s[0] <= s[1] + 1e-10
        assert s[1] <= s[2] + 1e-10


def test_model_metric_identity_of_indiscernibles(space22):
    x = np.array([0.3, -1.2])
    assert model_metric(space22, x, x) == 0.0


def test_model_metric_one_level_closed_form():
    sp = GradedSeminormSpace.create([np.eye(1)])
    assert model_metric(sp, [1.0], [0.0]) == pytest.approx(0.25, abs=1e-15)


def test_model_metric_two_level_sup():
    sp = GradedSeminormSpace.create([np.eye(1), 4.0 * np.eye(1)])
    # max(0.5*0.5, 0.25*(2/3)) = 0.25
    assert model_metric(sp, [1.0], [0.0]) == pytest.approx(0.25, abs=1e-15)


def test_model_metric_translation_invariance(space22):
    rng = np.random.default_rng(11)
    for _ in range(300):
        x, y, z = rng.standard_normal((3, 2)) * 3.0
        a = model_metric(space22, x, y)
        b = model_metric(space22, x + z, y + z)
        assert abs(a - b) <= 1e-12


def test_model_metric_symmetry_and_bound(space22):
    rng = np.random.default_rng(12)
    for _ in range(200):
        x, y = rng.standard_normal((2, 2)) * 50.0
        d = model_metric(space22, x, y)
        assert d == model_metric(space22, y, x)
        assert 0.0 <= d <= 0.5


def test_triangle_inequalities_seeded():
    rng = np.random.default_rng(13)
    a = rng.standard_normal((3, 3))
    space = GradedSeminormSpace.create(
        [a @ a.T + 0.2 * np.eye(3), a @ a.T + np.eye(3)])
    for _ in range(1000):
        x, y, z = rng.standard_normal((3, 3)) * rng.uniform(0.1, 10)
        for n in (1, 2):
            sxz = seminorm(space, n, x - z)
            sxy = seminorm(space, n, x - y)
            syz = seminorm(space, n, y - z)
            assert sxz <= sxy + syz + 1e-10
        dxz = model_metric(space, x, z)
        dxy = model_metric(space, x, y)
        dyz = model_metric(space, y, z)
        assert dxz <= dxy + dyz + 1e-10


def test_check_grading_pass():
    sp = GradedSeminormSpace(dim=2, grams=(np.eye(2), 2 * np.eye(2)))
    rep = check_grading(sp)
    assert rep.passed
    assert rep.failed_pairs == ()


def test_check_grading_reversed_pair_fails():
    sp = GradedSeminormSpace(dim=2, grams=(2 * np.eye(2), np.eye(2)))
    rep = check_grading(sp)
    assert not rep.passed
    assert rep.first_bad_pair() == (1, 2)
    assert "(1, 2)" in rep.failure_message()


def test_check_grading_indefinite_difference_fails():
    sp = GradedSeminormSpace(
        dim=2, grams=(np.diag([1.0, 3.0]), np.diag([2.0, 2.0])))
    rep = check_grading(sp)
    assert not rep.passed
    assert (1, 2) in rep.failed_pairs


def test_check_grading_degenerate_top_fails():
    sp = GradedSeminormSpace(dim=2, grams=(np.diag([1.0, 0.0]),))
    rep = check_grading(sp)
    assert not rep.passed and not rep.top_definite


def test_create_raises_on_bad_grading():
    with pytest.raises(GradingError) as exc:
        GradedSeminormSpace.create([2 * np.eye(2), np.eye(2)])
    assert exc.value.pair == (1, 2)


def test_from_config_roundtrip():
    cfg = {"dim": 2, "grams": [[[1, 0], [0, 1]], [[2, 0], [0, 2]]],
           "psd_tol": 1e-10}
    sp = GradedSeminormSpace.from_config(cfg)
    assert sp.dim == 2 and sp.levels == 2
    rep = check_grading(sp)
    assert rep.to_json().startswith("{")


def test_vector_dimension_mismatch(space22):
    with pytest.raises(DimensionMismatchError):
        seminorm(space22, 1, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatchError):
        model_metric(space22, [1.0], [0.0])


def _op1d(c):
    sp = GradedSeminormSpace.euclidean(1)
    return LinearOperatorSample(np.array([[c]]), sp, sp)


def test_lipschitz_gap_zero_difference():
    sp = GradedSeminormSpace.euclidean(3, weights=(1.0, 2.0))
    r = np.random.default_rng(5).standard_normal((3, 3))
    L = LinearOperatorSample(r, sp, sp)
    H = LinearOperatorSample(r.copy(), sp, sp)
    assert lipschitz_gap(L, H, sample_count=8, seed=1) == 0.0


def test_lipschitz_gap_expanding_scalar():
    # sup of 3(1+x)/(1+3x) is 3, attained as x -> 0.
    expected = scalar_gap_oracle(3.0)
    assert expected == pytest.approx(3.0, abs=1e-3)
    got = lipschitz_gap(_op1d(3.0), _op1d(0.0), sample_count=4, seed=2)
    assert got == pytest.approx(expected, abs=1e-3)


def test_lipschitz_gap_contracting_scalar():
    # sup of 0.5(1+x)/(1+0.5x) is 1, attained as x -> inf.
    expected = scalar_gap_oracle(0.5)
    assert expected == pytest.approx(1.0, abs=1e-3)
    got = lipschitz_gap(_op1d(0.5), _op1d(0.0), sample_count=4, seed=2)
    assert got == pytest.approx(expected, abs=1e-3)


def test_lipschitz_gap_exact_symmetry():
    sp2 = GradedSeminormSpace.euclidean(2, weights=(1.0, 3.0))
    sp3 = GradedSeminormSpace.euclidean(3)
    rng = np.random.default_rng(21)
    L = LinearOperatorSample(rng.standard_normal((3, 2)), sp2, sp3)
    H = LinearOperatorSample(rng.standard_normal((3, 2)), sp2, sp3)
    assert lipschitz_gap(L, H, 16, seed=3) == lipschitz_gap(H, L, 16, seed=3)


def test_operator_shape_checked():
    sp2 = GradedSeminormSpace.euclidean(2)
    sp3 = GradedSeminormSpace.euclidean(3)
    with pytest.raises(DimensionMismatchError):
        LinearOperatorSample(np.eye(2), sp2, sp3)
