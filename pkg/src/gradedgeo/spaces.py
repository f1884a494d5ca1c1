"""Truncated graded-seminorm model spaces.

A model space is a finite-dimensional surrogate for a space whose topology
is generated by a nondecreasing ladder of Hilbertian seminorms: ``N`` Gram
matrices ``G_1 <= ... <= G_N`` (in the PSD order) on R^D, with the top
level positive-definite.  On top of the ladder sit the translation
invariant model metric

    rho(x, y) = max_n 2^{-n} s_n / (1 + s_n),   s_n = ||x - y||^n,

and the sampled Lipschitz gap between linear operators measured in the
model metrics of their domain and codomain.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from .errors import DimensionMismatchError, GradingError, LevelRangeError

#: Default eigenvalue floor used when deciding positive semidefiniteness.
DEFAULT_PSD_TOL = 1e-10

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class GradedSeminormSpace:
    """A truncated model space: ``levels`` Gram matrices on R^``dim``.

    Construction via ``create`` (or ``from_config``) validates the grading;
    the bare constructor does not, which lets diagnostic code build
    deliberately broken spaces and report on them.
    """

    dim: int
    grams: tuple = field(repr=False)
    psd_tol: float = DEFAULT_PSD_TOL

    @property
    def levels(self):
        return len(self.grams)

    @staticmethod
    def create(grams, psd_tol=DEFAULT_PSD_TOL):
        grams = tuple(np.asarray(g, dtype=float) for g in grams)
        if not grams:
            raise GradingError("at least one Gram matrix is required")
        dim = grams[0].shape[0]
        for g in grams:
            if g.shape != (dim, dim):
                raise DimensionMismatchError(
                    f"Gram shape {g.shape} != ({dim}, {dim})")
        space = GradedSeminormSpace(dim=dim, grams=grams, psd_tol=psd_tol)
        report = check_grading(space)
        if not report.passed:
            raise GradingError(report.failure_message(), pair=report.first_bad_pair())
        return space

    @staticmethod
    def euclidean(dim, weights=(1.0,)):
        """Scalar-weighted identity ladder, the simplest valid space."""
        eye = np.eye(dim)
        return GradedSeminormSpace.create([w * eye for w in weights])

    @staticmethod
    def from_config(cfg):
        """Build from ``{"dim": D, "grams": [[...], ...], "psd_tol": t}``."""
        grams = [np.asarray(g, dtype=float) for g in cfg["grams"]]
        space = GradedSeminormSpace.create(
            grams, psd_tol=float(cfg.get("psd_tol", DEFAULT_PSD_TOL)))
        if "dim" in cfg and int(cfg["dim"]) != space.dim:
            raise DimensionMismatchError(
                f"declared dim {cfg['dim']} != Gram size {space.dim}")
        return space

    def check_vector(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatchError(
                f"vector shape {x.shape} != ({self.dim},)")
        return x

    def check_level(self, n):
        if not 1 <= n <= self.levels:
            raise LevelRangeError(f"level {n} outside 1..{self.levels}")
        return int(n)


def seminorm(space, n, x):
    """Level-``n`` seminorm ``sqrt(x^T G_n x)``; monotone in ``n``."""
    n = space.check_level(n)
    x = space.check_vector(x)
    q = float(x @ space.grams[n - 1] @ x)
    # Tiny negative quadratic forms are PSD roundoff, not errors.
    return float(np.sqrt(max(q, 0.0)))


def all_seminorms(space, x):
    x = space.check_vector(x)
    return np.array([seminorm(space, n, x) for n in range(1, space.levels + 1)])


def model_metric(space, x, y):
    """Translation-invariant metric ``max_n 2^{-n} s_n/(1+s_n)`` with
    ``s_n = ||x-y||^n``.  Bounded by 1/2; zero iff ``x == y`` because the
    top Gram is definite."""
    x = space.check_vector(x)
    y = space.check_vector(y)
    d = x - y
    best = 0.0
    for n in range(1, space.levels + 1):
        s = seminorm(space, n, d)
        best = max(best, 2.0 ** (-n) * s / (1.0 + s))
    return best


def _min_eig(sym):
    return float(np.linalg.eigvalsh(0.5 * (sym + sym.T))[0])


@dataclass(frozen=True)
class GradingReport:
    """Outcome of the grading check, with the worst eigenvalue per pair."""

    passed: bool
    symmetry_defects: tuple       # max |G - G^T| entry per level
    pair_min_eigs: tuple          # min eig of G_{n+1} - G_n, pairs (n, n+1)
    top_min_eig: float
    psd_tol: float
    failed_pairs: tuple           # 1-based (n, n+1) pairs violating the order
    top_definite: bool

    def first_bad_pair(self):
        return self.failed_pairs[0] if self.failed_pairs else None

    def failure_message(self):
        if self.passed:
            return "grading holds"
        parts = []
        for k, d in enumerate(self.symmetry_defects):
            if d > _SYMMETRY_TOL:
                parts.append(f"G_{k + 1} asymmetric (defect {d:.3e})")
        for (a, b) in self.failed_pairs:
            eig = self.pair_min_eigs[a - 1]
            parts.append(
                f"grading fails at level pair ({a}, {b}): "
                f"min eig of G_{b} - G_{a} is {eig:.3e}")
        if not self.top_definite:
            parts.append(f"top Gram not positive-definite "
                         f"(min eig {self.top_min_eig:.3e})")
        return "; ".join(parts) or "grading fails"

    def to_dict(self):
        return {
            "passed": bool(self.passed),
            "symmetry_defects": [float(v) for v in self.symmetry_defects],
            "pair_min_eigs": [float(v) for v in self.pair_min_eigs],
            "top_min_eig": float(self.top_min_eig),
            "psd_tol": float(self.psd_tol),
            "failed_pairs": [list(p) for p in self.failed_pairs],
            "top_definite": bool(self.top_definite),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def check_grading(space):
    """Check symmetry, levelwise PSD, the grading order and top definiteness.

    Never raises; failures are carried in the report.
    """
    tol = space.psd_tol
    sym_defects = []
    ok = True
    for g in space.grams:
        d = float(np.max(np.abs(g - g.T))) if g.size else 0.0
        sym_defects.append(d)
        if d > _SYMMETRY_TOL:
            ok = False
    level_min_eigs = [_min_eig(g) for g in space.grams]
    if any(e < -tol for e in level_min_eigs):
        ok = False
    pair_min_eigs = []
    failed_pairs = []
    for n in range(space.levels - 1):
        e = _min_eig(space.grams[n + 1] - space.grams[n])
        pair_min_eigs.append(e)
        if e < -tol:
            failed_pairs.append((n + 1, n + 2))
            ok = False
    top_min_eig = level_min_eigs[-1]
    top_definite = top_min_eig > tol
    if not top_definite:
        ok = False
    return GradingReport(
        passed=ok,
        symmetry_defects=tuple(sym_defects),
        pair_min_eigs=tuple(pair_min_eigs),
        top_min_eig=top_min_eig,
        psd_tol=tol,
        failed_pairs=tuple(failed_pairs),
        top_definite=top_definite,
    )


@dataclass(frozen=True)
class LinearOperatorSample:
    """A linear map between model spaces, given by its matrix."""

    matrix: np.ndarray
    domain: GradedSeminormSpace
    codomain: GradedSeminormSpace

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.shape != (self.codomain.dim, self.domain.dim):
            raise DimensionMismatchError(
                f"matrix shape {m.shape} != "
                f"({self.codomain.dim}, {self.domain.dim})")


def _gap_directions(dim, sample_count, seed):
    """Deterministic probe directions: coordinate axes plus seeded unit
    vectors.  Argument-order independent so the gap is exactly symmetric."""
    rng = np.random.default_rng(seed)
    dirs = [np.eye(dim)[k] for k in range(dim)]
    while len(dirs) < max(sample_count, dim):
        v = rng.standard_normal(dim)
        nrm = np.linalg.norm(v)
        if nrm > 1e-12:
            dirs.append(v / nrm)
    return dirs


# Radii span [1e-8, 1e8]: the ratio sup can be attained only as |x| -> 0
# (operator gap above 1) or |x| -> inf (gap below 1), so the bracket must
# reach far in both directions.
_GAP_RADII = np.logspace(-8.0, 8.0, 161)


def lipschitz_gap(L, H, sample_count=32, seed=0):
    """Sampled lower bound for ``sup_x rho((L-H)x, 0) / sigma(x, 0)``.

    ``sigma`` is the model metric of the shared domain, ``rho`` the one of
    the shared codomain.  Deterministic for a fixed seed, exactly symmetric
    in ``(L, H)``, and exactly zero when the matrices agree.
    """
    if L.domain.dim != H.domain.dim or L.codomain.dim != H.codomain.dim:
        raise DimensionMismatchError("operator shapes disagree")
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    diff = L.matrix - H.matrix
    if not np.any(diff):
        return 0.0
    dom, cod = L.domain, L.codomain
    zero = np.zeros(cod.dim)
    zero_dom = np.zeros(dom.dim)
    best = 0.0
    for d in _gap_directions(dom.dim, sample_count, seed):
        img = diff @ d
        for r in _GAP_RADII:
            num = model_metric(cod, r * img, zero)
            den = model_metric(dom, r * d, zero_dom)
            if den > 0.0:
                best = max(best, num / den)
    return best
