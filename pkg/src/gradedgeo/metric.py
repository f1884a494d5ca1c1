"""Point-dependent Gram ladders and the Finsler compatibility check.

A ``LevelMetricFamily`` assigns to each chart point ``x`` a graded stack
of Gram matrices ``G_1(x) <= ... <= G_N(x)``.  Most families here are
*scalar scaled*: ``G_n(x) = w_n * G(x)`` with positive nondecreasing
weights, which makes the per-level connections and geodesics coincide.
General stacks are supported but then every operation that needs "the"
spray requires an explicitly designated driving level.
"""

from dataclasses import dataclass
import json

import numpy as np

from .errors import DimensionMismatchError, LevelRangeError
from .manifold import default_fd_step, require_inside
from .spaces import GradedSeminormSpace, check_grading


@dataclass(frozen=True)
class LevelMetricFamily:
    """Graded family of fiber Gram matrices over a chart."""

    dim: int
    levels: int
    structure: str                 # "scalar_scaled" | "general"
    weights: tuple = None          # scalar_scaled only
    base_fn: object = None         # x -> (D, D); scalar_scaled only
    base_jac: object = None        # x -> (D, D, D), [k] = dG/dx_k
    stack_fn: object = None        # x -> (N, D, D); general only
    stack_jac: object = None       # x -> (N, D, D, D), [n, k] = dG_n/dx_k

    def check_level(self, n):
        if not 1 <= n <= self.levels:
            raise LevelRangeError(f"level {n} outside 1..{self.levels}")
        return int(n)

    def base_gram(self, x):
        return np.asarray(self.base_fn(np.asarray(x, dtype=float)),
                          dtype=float)

    def gram(self, x, n):
        n = self.check_level(n)
        x = np.asarray(x, dtype=float)
        if self.structure == "scalar_scaled":
            return self.weights[n - 1] * self.base_gram(x)
        return np.asarray(self.stack_fn(x), dtype=float)[n - 1]

    def gram_stack(self, x):
        x = np.asarray(x, dtype=float)
        if self.structure == "scalar_scaled":
            g = self.base_gram(x)
            return np.array([w * g for w in self.weights])
        return np.asarray(self.stack_fn(x), dtype=float)

    def _fd_base_jacobian(self, x, evaluate):
        step = default_fd_step(x)
        first = np.asarray(evaluate(x), dtype=float)
        out = np.empty((self.dim,) + first.shape)
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = step
            out[k] = (np.asarray(evaluate(x + e), dtype=float)
                      - np.asarray(evaluate(x - e), dtype=float)) / (2 * step)
        return out

    def gram_jacobian(self, x, n):
        """``dG_n/dx`` as an array ``J[k, a, b]``; analytic when registered,
        otherwise symmetrized central differences."""
        n = self.check_level(n)
        x = np.asarray(x, dtype=float)
        if self.structure == "scalar_scaled":
            if self.base_jac is not None:
                j = np.asarray(self.base_jac(x), dtype=float)
            else:
                j = self._fd_base_jacobian(x, self.base_fn)
            out = self.weights[n - 1] * j
        else:
            if self.stack_jac is not None:
                out = np.asarray(self.stack_jac(x), dtype=float)[n - 1]
            else:
                out = self._fd_base_jacobian(
                    x, lambda p: np.asarray(self.stack_fn(p))[n - 1])
        return 0.5 * (out + np.transpose(out, (0, 2, 1)))

    def has_analytic_jacobian(self):
        return (self.base_jac is not None if self.structure == "scalar_scaled"
                else self.stack_jac is not None)

    def product(self, x, n, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape != (self.dim,) or v.shape != (self.dim,):
            raise DimensionMismatchError("vector shape disagrees with family")
        return float(u @ self.gram(x, n) @ v)

    def norm(self, x, n, v):
        return float(np.sqrt(max(self.product(x, n, v, v), 0.0)))

    def space_at(self, x, psd_tol=1e-10):
        """Freeze the fiber at ``x`` into a graded model space (no
        validation; pair with ``check_grading``)."""
        return GradedSeminormSpace(dim=self.dim,
                                   grams=tuple(self.gram_stack(x)),
                                   psd_tol=psd_tol)

    def grading_report_at(self, x, psd_tol=1e-10):
        return check_grading(self.space_at(x, psd_tol))


def scalar_scaled_family(weights, base_fn, dim, base_jac=None):
    weights = tuple(float(w) for w in weights)
    if not weights or any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    if any(b < a for a, b in zip(weights, weights[1:])):
        raise ValueError("weights must be nondecreasing")
    return LevelMetricFamily(dim=int(dim), levels=len(weights),
                             structure="scalar_scaled", weights=weights,
                             base_fn=base_fn, base_jac=base_jac)


def general_family(stack_fn, dim, levels, stack_jac=None):
    return LevelMetricFamily(dim=int(dim), levels=int(levels),
                             structure="general", stack_fn=stack_fn,
                             stack_jac=stack_jac)


def constant_family(grams):
    """Family with point-independent Gram ladder (flat problems)."""
    grams = np.array([np.asarray(g, dtype=float) for g in grams])
    n, d = grams.shape[0], grams.shape[1]
    zeros = np.zeros((n, d, d, d))
    return LevelMetricFamily(
        dim=d, levels=n, structure="general",
        stack_fn=lambda x: grams,
        stack_jac=lambda x: zeros)


# ---------------------------------------------------------------------------
# Finslerian products and orthogonality
# ---------------------------------------------------------------------------

def finsler_product(family, n, x, u, v, domain=None):
    """Level-``n`` fiber product ``u^T G_n(x) v`` (symmetric bilinear)."""
    require_inside(domain, x, "base point")
    return family.product(x, n, u, v)


def f_orthogonal(family, x, u, v, tol=1e-10):
    """True when the fiber products vanish at every level, relative to
    ``tol * (1 + |u|_n |v|_n)``; the per-level values come along."""
    values = []
    ok = True
    for n in range(1, family.levels + 1):
        p = family.product(x, n, u, v)
        bound = tol * (1.0 + family.norm(x, n, u) * family.norm(x, n, v))
        values.append(p)
        if abs(p) > bound:
            ok = False
    return ok, values


# ---------------------------------------------------------------------------
# Finsler compatibility check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FinslerCheckReport:
    """Sampled fiber-norm ratios against the ``[1/k, k]`` corridor."""

    k: float
    radius: float
    passed: bool
    level_max_ratio: tuple
    level_min_ratio: tuple
    witness_max: tuple      # per level: point achieving the max ratio
    witness_min: tuple
    samples: int
    seed: int

    def worst_ratio(self):
        return max(max(self.level_max_ratio),
                   1.0 / min(self.level_min_ratio))

    def to_dict(self):
        return {
            "k": float(self.k),
            "radius": float(self.radius),
            "passed": bool(self.passed),
            "level_max_ratio": [float(v) for v in self.level_max_ratio],
            "level_min_ratio": [float(v) for v in self.level_min_ratio],
            "witness_max": [list(map(float, w)) for w in self.witness_max],
            "witness_min": [list(map(float, w)) for w in self.witness_min],
            "samples": int(self.samples),
            "seed": int(self.seed),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def finsler_check(family, x0, k, radius, samples=64, seed=0, domain=None):
    """Sample fiber-norm ratios ``|f|_u / |f|_x0`` over a coordinate ball.

    Points include the axis extremes of the ball (where smooth conformal
    factors peak) plus seeded uniform draws; directions include the axes
    plus seeded unit vectors.  Pass iff every sampled ratio at every
    level sits inside ``[1/k, k]``.
    """
    if k <= 1.0:
        raise ValueError("k must exceed 1")
    x0 = np.asarray(x0, dtype=float)
    d = family.dim
    rng = np.random.default_rng(seed)
    points = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = radius
        points.extend([x0 + e, x0 - e])
    while len(points) < max(samples, 2 * d):
        u = rng.standard_normal(d)
        u *= radius * rng.uniform() ** (1.0 / d) / np.linalg.norm(u)
        points.append(x0 + u)
    if domain is not None:
        for p in points:
            if not domain.contains(p):
                raise ValueError("sampling ball exceeds the chart domain")
    dirs = [np.eye(d)[i] for i in range(d)]
    while len(dirs) < max(8, d + 4):
        f = rng.standard_normal(d)
        dirs.append(f / np.linalg.norm(f))

    n_levels = family.levels
    max_ratio = [0.0] * n_levels
    min_ratio = [np.inf] * n_levels
    wit_max = [x0.copy()] * n_levels
    wit_min = [x0.copy()] * n_levels
    for u in points:
        for f in dirs:
            for n in range(1, n_levels + 1):
                base = family.norm(x0, n, f)
                moved = family.norm(u, n, f)
                if base <= 0.0:
                    ratio = np.inf if moved > 0.0 else 1.0
                else:
                    ratio = moved / base
                if ratio > max_ratio[n - 1]:
                    max_ratio[n - 1] = ratio
                    wit_max[n - 1] = np.asarray(u)
                if ratio < min_ratio[n - 1]:
                    min_ratio[n - 1] = ratio
                    wit_min[n - 1] = np.asarray(u)
    passed = all(r <= k for r in max_ratio) and all(r >= 1.0 / k
                                                    for r in min_ratio)
    return FinslerCheckReport(
        k=float(k), radius=float(radius), passed=passed,
        level_max_ratio=tuple(max_ratio), level_min_ratio=tuple(min_ratio),
        witness_max=tuple(wit_max), witness_min=tuple(wit_min),
        samples=len(points), seed=seed)
