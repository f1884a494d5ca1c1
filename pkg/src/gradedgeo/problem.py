"""Problem container: a chart, a metric family and its sprays.

A ``ChartedProblem`` bundles everything the higher-level operations
need: the chart domain, the level metric family, named catalog vector
fields and scalar maps, a designated driving level (the level whose
spray integrates "the" geodesics; immaterial for scalar-scaled families
where all levels share one spray), and an optional second chart given by
a transition diffeomorphism for chart-independence spot checks.
"""

from dataclasses import dataclass, field

import numpy as np

from .metric import LevelMetricFamily
from .spaces import GradedSeminormSpace, seminorm
from .spray import Spray, spray_from_metric


@dataclass(frozen=True)
class TransitionMap:
    """Catalog diffeomorphism between two charts on a declared overlap."""

    forward: object              # SmoothMap
    inverse: object              # SmoothMap
    overlap: object              # predicate on first-chart coordinates
    name: str = ""

    def roundtrip_defect(self, points):
        worst = 0.0
        for p in np.atleast_2d(np.asarray(points, dtype=float)):
            if not self.overlap(p):
                continue
            q = self.inverse(self.forward(p))
            worst = max(worst, float(np.linalg.norm(q - p)))
        return worst


@dataclass(frozen=True, eq=False)
class ChartedProblem:
    """A catalog problem wired for the numerical engine."""

    name: str
    params: dict
    space: GradedSeminormSpace          # fiber ladder frozen at the center
    domain: object
    family: LevelMetricFamily
    center: np.ndarray
    driving_level: int = None
    fields: dict = field(default_factory=dict)
    scalar_maps: dict = field(default_factory=dict)
    transition: TransitionMap = None
    catalog_spray: Spray = None          # closed-form spray, if registered
    oracle: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "center",
                           np.asarray(self.center, dtype=float))
        if self.driving_level is None:
            object.__setattr__(self, "driving_level", self.family.levels)
        object.__setattr__(self, "_spray_cache", {})

    @property
    def dim(self):
        return self.family.dim

    @property
    def levels(self):
        return self.family.levels

    def spray_for_level(self, n):
        n = self.family.check_level(n)
        if self.family.structure == "scalar_scaled":
            n_key = 1  # all levels share the spray; weights cancel
        else:
            n_key = n
        cache = self.__dict__["_spray_cache"]
        if n_key not in cache:
            cache[n_key] = spray_from_metric(self.family, n_key)
        return cache[n_key]

    @property
    def spray(self):
        if self.catalog_spray is not None:
            return self.catalog_spray
        return self.spray_for_level(self.driving_level)

    def norm(self, v):
        """Top-level model norm at the chart center."""
        return seminorm(self.space, self.space.levels, np.asarray(v, float))

    def field_named(self, name):
        try:
            return self.fields[name]
        except KeyError:
            raise KeyError(
                f"problem {self.name!r} has no vector field {name!r}; "
                f"known: {sorted(self.fields)}") from None
