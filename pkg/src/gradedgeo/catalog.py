"""Built-in problem catalog.

Problems are selected by id and parameters so that run configurations
stay fully serializable:

* ``flat``: constant Gram ladder on R^D (optionally explicit Grams).
* ``conformal``: ``G(x) = exp(2 c x_1) I`` on R^2.
* ``sphere_stereographic``: round 2-sphere of radius R in a stereographic
  chart, ``G(x) = 4 R^4 / (R^2 + |x|^2)^2 I``.
* ``spd``: constant-coefficient metrics on a torus; points are SPD
  matrices (flattened) carrying the flat, affine-invariant or
  volume-weighted (``ebin``) family.

Every catalog problem registers analytic Gram derivatives and an oracle
record (family id plus parameters) from which tests rebuild independent
symbolic references.
"""

import numpy as np

from .errors import ConfigError
from .manifold import BallDomain, PredicateDomain, SmoothMap
from .metric import constant_family, scalar_scaled_family
from .problem import ChartedProblem, TransitionMap
from .spaces import GradedSeminormSpace
from .spray import zero_spray

DEFAULT_WEIGHTS = (1.0, 2.0)


# ---------------------------------------------------------------------------
# Shared vector fields and scalar maps
# ---------------------------------------------------------------------------

def _standard_fields(dim):
    fields = {
        "scale": SmoothMap(fn=lambda x: x.copy(),
                           jac=lambda x: np.eye(dim), name="scale"),
        "drift": SmoothMap(fn=lambda x: np.eye(dim)[0].copy(),
                           jac=lambda x: np.zeros((dim, dim)), name="drift"),
    }
    if dim == 1:
        fields["square"] = SmoothMap(fn=lambda x: x * x,
                                     jac=lambda x: np.diag(2 * x),
                                     name="square")
        fields["one_plus_square"] = SmoothMap(fn=lambda x: 1.0 + x * x,
                                              jac=lambda x: np.diag(2 * x),
                                              name="one_plus_square")
    if dim >= 2:
        def rot(x):
            out = np.zeros(dim)
            out[0], out[1] = -x[1], x[0]
            return out

        def rot_jac(x):
            j = np.zeros((dim, dim))
            j[0, 1], j[1, 0] = -1.0, 1.0
            return j

        fields["rotation"] = SmoothMap(fn=rot, jac=rot_jac, name="rotation")

        def shear(x):
            out = np.zeros(dim)
            out[0] = x[1] ** 2
            return out

        def shear_jac(x):
            j = np.zeros((dim, dim))
            j[0, 1] = 2 * x[1]
            return j

        fields["shear_sq"] = SmoothMap(fn=shear, jac=shear_jac,
                                       name="shear_sq")

        def ramp(x):
            out = np.zeros(dim)
            out[1] = x[0]
            return out

        def ramp_jac(x):
            j = np.zeros((dim, dim))
            j[1, 0] = 1.0
            return j

        fields["coord_ramp"] = SmoothMap(fn=ramp, jac=ramp_jac,
                                         name="coord_ramp")

        def swirl(x):
            out = np.zeros(dim)
            out[0] = x[1] ** 2 + 0.3
            out[1] = x[0] * x[1] - 0.2
            return out

        def swirl_jac(x):
            j = np.zeros((dim, dim))
            j[0, 1] = 2 * x[1]
            j[1, 0] = x[1]
            j[1, 1] = x[0]
            return j

        fields["swirl"] = SmoothMap(fn=swirl, jac=swirl_jac, name="swirl")
    return fields


def _standard_scalar_maps(dim):
    ones = np.ones(dim)
    maps = {
        "linear_form": SmoothMap(fn=lambda x: float(ones @ x),
                                 jac=lambda x: ones, name="linear_form"),
        "sqnorm": SmoothMap(fn=lambda x: float(x @ x),
                            jac=lambda x: 2 * x, name="sqnorm"),
        "exp_axis": SmoothMap(
            fn=lambda x: float(np.exp(2 * x[0])),
            jac=lambda x: np.concatenate([[2 * np.exp(2 * x[0])],
                                          np.zeros(dim - 1)]),
            name="exp_axis"),
    }
    return maps


# ---------------------------------------------------------------------------
# Conformal-type families
# ---------------------------------------------------------------------------

def _conformal_family(weights, dim, scale):
    def base(x):
        return np.exp(2.0 * scale * x[0]) * np.eye(dim)

    def base_jac(x):
        out = np.zeros((dim, dim, dim))
        out[0] = 2.0 * scale * np.exp(2.0 * scale * x[0]) * np.eye(dim)
        return out

    return scalar_scaled_family(weights, base, dim, base_jac=base_jac)


def _sphere_family(weights, radius):
    r2 = radius * radius
    r4 = r2 * r2

    def factor(x):
        return 4.0 * r4 / (r2 + float(x @ x)) ** 2

    def base(x):
        return factor(x) * np.eye(2)

    def base_jac(x):
        c = -16.0 * r4 / (r2 + float(x @ x)) ** 3
        out = np.zeros((2, 2, 2))
        out[0] = c * x[0] * np.eye(2)
        out[1] = c * x[1] * np.eye(2)
        return out

    return scalar_scaled_family(weights, base, 2, base_jac=base_jac)


# ---------------------------------------------------------------------------
# SPD coordinate helpers
# ---------------------------------------------------------------------------

def sym_dim(m):
    return m * (m + 1) // 2


def sym_index_pairs(m):
    pairs = [(a, a) for a in range(m)]
    pairs += [(a, b) for a in range(m) for b in range(a + 1, m)]
    return pairs


def sym_basis(m):
    """Basis of Sym(m) matching the flattening: E_aa, then
    E_ab = e_a e_b^T + e_b e_a^T for a < b."""
    out = []
    for a, b in sym_index_pairs(m):
        e = np.zeros((m, m))
        e[a, b] = 1.0
        e[b, a] = 1.0
        out.append(e)
    return out


def vec_to_sym(x, m):
    x = np.asarray(x, dtype=float)
    s = np.zeros((m, m))
    for val, (a, b) in zip(x, sym_index_pairs(m)):
        s[a, b] = val
        s[b, a] = val
    return s


def sym_to_vec(s):
    s = np.asarray(s, dtype=float)
    m = s.shape[0]
    return np.array([s[a, b] for a, b in sym_index_pairs(m)])


def _spd_base_maps(m, kind):
    basis = sym_basis(m)
    d = sym_dim(m)

    def gram_and_jac(x):
        g = vec_to_sym(x, m)
        ginv = np.linalg.inv(g)
        a_mats = [ginv @ b for b in basis]
        core = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                core[i, j] = core[j, i] = np.trace(a_mats[i] @ a_mats[j])
        dcore = np.empty((d, d, d))
        for k in range(d):
            ak = a_mats[k]
            for i in range(d):
                aki = ak @ a_mats[i]
                for j in range(d):
                    dcore[k, i, j] = -(np.trace(aki @ a_mats[j])
                                       + np.trace(a_mats[i] @ ak
                                                  @ a_mats[j]))
        if kind == "affine_invariant":
            return core, dcore
        vol = float(np.sqrt(np.linalg.det(g)))
        traces = np.array([np.trace(a) for a in a_mats])
        jac = vol * dcore + 0.5 * vol * traces[:, None, None] * core[None]
        return vol * core, jac

    def base(x):
        return gram_and_jac(x)[0]

    def base_jac(x):
        return gram_and_jac(x)[1]

    return base, base_jac


def spd_family(m, kind, weights):
    d = sym_dim(m)
    if kind == "flat":
        basis = sym_basis(m)
        core = np.array([[np.trace(bi @ bj) for bj in basis]
                         for bi in basis])
        return constant_family([w * core for w in weights])
    if kind not in ("affine_invariant", "ebin"):
        raise ConfigError(f"unknown spd family kind {kind!r}")
    base, base_jac = _spd_base_maps(m, kind)
    return scalar_scaled_family(weights, base, d, base_jac=base_jac)


def spd_domain(m, eig_floor=1e-8, coord_bound=1e6):
    def pred(x):
        if float(np.max(np.abs(x))) >= coord_bound:
            return False
        g = vec_to_sym(x, m)
        return float(np.linalg.eigvalsh(g)[0]) > eig_floor

    return PredicateDomain(pred, label=f"spd({m})")


class SpdMetricSpace:
    """Constant-coefficient metrics on an m-torus: points are SPD m x m
    matrices flattened to ``m (m + 1) / 2`` coordinates."""

    KINDS = ("flat", "affine_invariant", "ebin")

    def __init__(self, m, weights=DEFAULT_WEIGHTS, kind="ebin"):
        if kind not in self.KINDS:
            raise ConfigError(f"unknown spd family kind {kind!r}")
        self.m = int(m)
        self.weights = tuple(float(w) for w in weights)
        self.kind = kind
        self.dim = sym_dim(self.m)

    def family(self):
        return spd_family(self.m, self.kind, self.weights)

    def domain(self):
        return spd_domain(self.m)

    def problem(self):
        return catalog_problem("spd", m=self.m, kind=self.kind,
                               weights=self.weights)

    def to_vec(self, g):
        return sym_to_vec(g)

    def to_matrix(self, x):
        return vec_to_sym(x, self.m)

    def positivity_report(self, curve):
        """Minimum eigenvalue over the curve's nodes; positive means the
        curve stayed inside the cone."""
        worst = np.inf
        for node in curve.nodes:
            worst = min(worst, float(np.linalg.eigvalsh(
                self.to_matrix(node))[0]))
        return worst


# ---------------------------------------------------------------------------
# Catalog dispatch
# ---------------------------------------------------------------------------

def _freeze_space(family, center, psd_tol=1e-10):
    return GradedSeminormSpace.create(list(family.gram_stack(center)),
                                      psd_tol=psd_tol)


def catalog_problem(name, **params):
    """Build a fully wired catalog problem; unknown names or invalid
    parameters raise ``ConfigError``."""
    if name == "flat":
        dim = int(params.pop("dim", 2))
        weights = tuple(params.pop("weights", DEFAULT_WEIGHTS))
        grams = params.pop("grams", None)
        chart_radius = float(params.pop("chart_radius", 1e6))
        _reject_unknown(name, params)
        if grams is not None:
            family = constant_family(grams)
            dim = family.dim
            oracle = {"family": "flat", "grams": True}
        else:
            family = constant_family([w * np.eye(dim) for w in weights])
            oracle = {"family": "flat", "weights": list(weights)}
        center = np.zeros(dim)
        return ChartedProblem(
            name="flat", params={"dim": dim, "weights": list(weights)},
            space=_freeze_space(family, center),
            domain=BallDomain(center, chart_radius), family=family,
            center=center, fields=_standard_fields(dim),
            scalar_maps=_standard_scalar_maps(dim),
            catalog_spray=zero_spray(dim), oracle=oracle)

    if name == "conformal":
        dim = int(params.pop("dim", 2))
        weights = tuple(params.pop("weights", DEFAULT_WEIGHTS))
        scale = float(params.pop("scale", 1.0))
        chart_radius = float(params.pop("chart_radius", 4.0))
        _reject_unknown(name, params)
        family = _conformal_family(weights, dim, scale)
        center = np.zeros(dim)
        return ChartedProblem(
            name="conformal",
            params={"dim": dim, "weights": list(weights), "scale": scale,
                    "chart_radius": chart_radius},
            space=_freeze_space(family, center),
            domain=BallDomain(center, chart_radius), family=family,
            center=center, fields=_standard_fields(dim),
            scalar_maps=_standard_scalar_maps(dim),
            oracle={"family": "conformal", "scale": scale})

    if name == "sphere_stereographic":
        radius = float(params.pop("radius", 1.0))
        weights = tuple(params.pop("weights", DEFAULT_WEIGHTS))
        # Chart wide enough that the injectivity probe can certify within
        # 5% of pi R before running off the chart (2 atan(16) = 0.960 pi).
        chart_radius = float(params.pop("chart_radius", 16.0 * radius))
        _reject_unknown(name, params)
        family = _sphere_family(weights, radius)
        center = np.zeros(2)
        r2 = radius * radius

        def invert(x):
            return r2 * x / float(x @ x)

        def invert_jac(x):
            q = float(x @ x)
            return r2 * (np.eye(2) / q - 2.0 * np.outer(x, x) / q ** 2)

        inner = r2 / chart_radius
        transition = TransitionMap(
            forward=SmoothMap(fn=invert, jac=invert_jac, name="inversion"),
            inverse=SmoothMap(fn=invert, jac=invert_jac, name="inversion"),
            overlap=lambda x: inner < float(np.linalg.norm(x)) < chart_radius,
            name="antipodal_chart")
        return ChartedProblem(
            name="sphere_stereographic",
            params={"radius": radius, "weights": list(weights),
                    "chart_radius": chart_radius},
            space=_freeze_space(family, center),
            domain=BallDomain(center, chart_radius), family=family,
            center=center, fields=_standard_fields(2),
            scalar_maps=_standard_scalar_maps(2), transition=transition,
            oracle={"family": "sphere_stereographic", "radius": radius})

    if name == "spd":
        m = int(params.pop("m", 2))
        kind = params.pop("kind", "ebin")
        weights = tuple(params.pop("weights", DEFAULT_WEIGHTS))
        _reject_unknown(name, params)
        family = spd_family(m, kind, weights)
        center = sym_to_vec(np.eye(m))
        return ChartedProblem(
            name="spd", params={"m": m, "kind": kind,
                                "weights": list(weights)},
            space=_freeze_space(family, center), domain=spd_domain(m),
            family=family, center=center,
            fields={"scale": SmoothMap(fn=lambda x: x.copy(),
                                       jac=lambda x: np.eye(sym_dim(m)),
                                       name="scale")},
            scalar_maps=_standard_scalar_maps(sym_dim(m)),
            oracle={"family": "spd", "m": m, "kind": kind})

    raise ConfigError(f"unknown catalog problem {name!r}; known: "
                      "flat, conformal, sphere_stereographic, spd")


def _reject_unknown(name, params):
    if params:
        raise ConfigError(
            f"unknown parameter(s) for catalog problem {name!r}: "
            f"{sorted(params)}")


CATALOG_NAMES = ("flat", "conformal", "sphere_stereographic", "spd")
