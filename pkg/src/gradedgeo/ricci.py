"""Ricci-flow curve on an Einstein metric and the non-geodesy report.

For an Einstein metric ``Ric(g0) = lambda g0`` the flow scales uniformly:
``g(t) = (1 - 2 lambda t) g0`` with constant velocity ``-2 lambda g0``.
The report runs the Euler-Lagrange residual ladder and a first-variation
probe on this curve inside a chosen metric family on the SPD cone, with
two controls: a true geodesic of the same family (fixing the verdict
thresholds) and the same curve inside the flat-kind family (where the
straight line *is* geodesic), so the metric dependence of the verdict is
explicit in the output.
"""

from dataclasses import dataclass
import json

import numpy as np

from .catalog import SpdMetricSpace, sym_to_vec
from .curves import CurvePath
from .errors import ConfigError
from .spray import integrate_geodesic
from .variational import el_residual, first_variation

FLAT_RESIDUAL_BOUND = 1e-8
CONTROL_MARGIN = 1e4


@dataclass(frozen=True)
class RicciCurve:
    """Uniformly scaling flow curve ``g(t) = (1 - 2 lambda t) g0``."""

    lam: float
    g0: np.ndarray
    horizon: float
    grid_size: int = 129

    def __post_init__(self):
        g0 = np.asarray(self.g0, dtype=float)
        object.__setattr__(self, "g0", g0)
        if float(np.linalg.eigvalsh(g0)[0]) <= 0:
            raise ValueError("g0 must be positive-definite")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.lam > 0 and self.horizon >= 0.5 / self.lam:
            raise ValueError(
                f"horizon {self.horizon} reaches the singular time "
                f"{0.5 / self.lam:.6g}; positivity fails")


def einstein_ricci_curve(lam, g0, horizon, grid_size=129):
    """Sampled flow curve with exact nodes and exact constant velocity."""
    rc = RicciCurve(lam=float(lam), g0=g0, horizon=float(horizon),
                    grid_size=int(grid_size))
    x0 = sym_to_vec(rc.g0)
    vel = -2.0 * rc.lam * x0
    ts = np.linspace(0.0, rc.horizon, rc.grid_size)
    nodes = (1.0 - 2.0 * rc.lam * ts)[:, None] * x0[None, :]
    vels = np.tile(vel, (rc.grid_size, 1))
    accs = np.zeros_like(nodes)
    return CurvePath(ts, nodes, vels, accs)


def _seeded_proper_variation(curve, seed, amplitude):
    ts = curve.times
    span = ts[-1] - ts[0]
    s = (ts - ts[0]) / span
    phi1 = s * (1 - s) ** 2
    phi2 = s ** 2 * (1 - s)
    dphi1 = (1 - s) * (1 - 3 * s) / span
    dphi2 = s * (2 - 3 * s) / span
    rng = np.random.default_rng(seed)
    d1 = rng.standard_normal(curve.dim)
    d2 = rng.standard_normal(curve.dim)
    nodes = np.outer(phi1, d1) + np.outer(phi2, d2)
    vels = np.outer(dphi1, d1) + np.outer(dphi2, d2)
    peak = float(np.max(np.linalg.norm(nodes, axis=1))) or 1.0
    scale = amplitude / peak
    return CurvePath(ts, scale * nodes, scale * vels)


@dataclass(frozen=True)
class RicciReport:
    """Per-level Euler-Lagrange data for the flow curve with controls."""

    kind: str
    lam: float
    horizon: float
    weights: tuple
    residual_sup: tuple            # flow curve, per level
    dx_term_sup: tuple             # first E-L term, per level
    dt_term_sup: tuple             # second E-L term, per level
    control_residual_sup: tuple    # true geodesic of the same family
    thresholds: tuple              # CONTROL_MARGIN * control residual
    first_variation_fd: float
    first_variation_integral: float
    control_first_variation_fd: float
    variation_threshold: float
    flat_residual_sup: tuple       # same curve, flat-kind family
    flat_verdict: str
    verdict: str
    levels_exceeding: tuple

    def to_dict(self):
        return {
            "kind": self.kind,
            "lambda": float(self.lam),
            "horizon": float(self.horizon),
            "weights": [float(w) for w in self.weights],
            "residual_sup": [float(v) for v in self.residual_sup],
            "dx_term_sup": [float(v) for v in self.dx_term_sup],
            "dt_term_sup": [float(v) for v in self.dt_term_sup],
            "control_residual_sup": [float(v)
                                     for v in self.control_residual_sup],
            "thresholds": [float(v) for v in self.thresholds],
            "first_variation_fd": float(self.first_variation_fd),
            "first_variation_integral": float(self.first_variation_integral),
            "control_first_variation_fd":
                float(self.control_first_variation_fd),
            "variation_threshold": float(self.variation_threshold),
            "flat_residual_sup": [float(v) for v in self.flat_residual_sup],
            "flat_verdict": self.flat_verdict,
            "verdict": self.verdict,
            "levels_exceeding": [int(v) for v in self.levels_exceeding],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def ricci_nongeodesic_report(space, curve, seed=0, variation_amplitude=0.05,
                             rtol=1e-9, atol=1e-12):
    """Euler-Lagrange verdict for the flow curve in ``space``'s family.

    ``space.kind`` must be point-dependent (``affine_invariant`` or
    ``ebin``); thresholds are calibrated at ``1e4`` times the residual
    and first variation observed on a true geodesic of the same family
    started from the same initial data.  The flat-kind control runs the
    same curve against the constant family, where it must pass as a
    geodesic; both controls are part of the report.
    """
    if space.kind not in ("affine_invariant", "ebin"):
        raise ConfigError("the non-geodesy report needs a point-dependent "
                          "family kind (affine_invariant or ebin)")
    problem = space.problem()
    family = problem.family
    if space.positivity_report(curve) <= 0:
        raise ValueError("curve leaves the positive-definite cone")
    levels = range(1, family.levels + 1)

    flow_res = [el_residual(family, n, curve) for n in levels]
    spray = problem.spray
    control = integrate_geodesic(
        spray, curve.nodes[0], curve.velocities[0],
        curve.t_end - curve.t_start, rtol=rtol, atol=atol,
        domain=problem.domain, grid_size=len(curve.times))
    control_res = [el_residual(family, n, control.path) for n in levels]
    thresholds = [CONTROL_MARGIN * r.sup_norm for r in control_res]

    variation = _seeded_proper_variation(curve, seed, variation_amplitude)
    fv = first_variation(family, family.levels, curve, variation,
                         spray=spray)
    control_fv = first_variation(family, family.levels, control.path,
                                 variation, spray=spray)
    fv_threshold = CONTROL_MARGIN * max(abs(control_fv.fd_value), 1e-16)

    flat_space = SpdMetricSpace(space.m, weights=space.weights, kind="flat")
    flat_family = flat_space.problem().family
    flat_res = [el_residual(flat_family, n, curve) for n in levels]
    flat_verdict = ("geodesic"
                    if max(r.sup_norm for r in flat_res)
                    <= FLAT_RESIDUAL_BOUND else "not geodesic")

    exceeding = [n for n, r, th in zip(levels, flow_res, thresholds)
                 if r.sup_norm >= th]
    variation_fired = abs(fv.fd_value) >= fv_threshold
    verdict = ("not geodesic" if exceeding and variation_fired
               else "geodesic")
    return RicciReport(
        kind=space.kind, lam=float(-0.5 * curve.velocities[0][0]
                                   / curve.nodes[0][0])
        if curve.nodes[0][0] else 0.0,
        horizon=float(curve.t_end - curve.t_start),
        weights=space.weights,
        residual_sup=tuple(r.sup_norm for r in flow_res),
        dx_term_sup=tuple(r.dx_term_sup for r in flow_res),
        dt_term_sup=tuple(r.dt_term_sup for r in flow_res),
        control_residual_sup=tuple(r.sup_norm for r in control_res),
        thresholds=tuple(thresholds),
        first_variation_fd=fv.fd_value,
        first_variation_integral=fv.integral_value,
        control_first_variation_fd=control_fv.fd_value,
        variation_threshold=fv_threshold,
        flat_residual_sup=tuple(r.sup_norm for r in flat_res),
        flat_verdict=flat_verdict,
        verdict=verdict,
        levels_exceeding=tuple(exceeding))
