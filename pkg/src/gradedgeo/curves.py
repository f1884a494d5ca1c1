"""Discretized curves: time grid, nodes, velocities, Hermite interpolation.

A ``CurvePath`` stores positions and velocities on a strictly increasing
time grid.  Positions interpolate by cubic Hermite from ``(nodes,
velocities)``.  The velocity channel interpolates in its own right, with
nodal slopes taken from the stored accelerations when the producer knows
them (integrated paths do) and otherwise from fourth-order grid
differences, so that differentiating interpolated velocities stays
accurate enough for residual checks at integrator tolerances.
"""

import csv as _csv
from dataclasses import dataclass, field

import numpy as np


def grid_derivative(times, values):
    """Differentiate node values along the grid.

    Fourth-order five-point central differences in the interior of a
    uniform grid, one-sided second order at the edges; non-uniform grids
    fall back to ``np.gradient`` (second order).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    m = len(times)
    if m < 5:
        return np.gradient(values, times, axis=0, edge_order=2 if m > 2 else 1)
    h = np.diff(times)
    if np.max(h) - np.min(h) > 1e-9 * np.max(h):
        return np.gradient(values, times, axis=0, edge_order=2)
    out = np.empty_like(values)
    hm = float(np.mean(h))
    v = values
    out[2:-2] = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * hm)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * hm)
    out[1] = (v[2] - v[0]) / (2 * hm)
    out[-2] = (v[-1] - v[-3]) / (2 * hm)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * hm)
    return out


def _hermite_coeffs(s):
    s2, s3 = s * s, s * s * s
    return (2 * s3 - 3 * s2 + 1, s3 - 2 * s2 + s,
            -2 * s3 + 3 * s2, s3 - s2)


def _hermite_dcoeffs(s):
    s2 = s * s
    return (6 * s2 - 6 * s, 3 * s2 - 4 * s + 1,
            -6 * s2 + 6 * s, 3 * s2 - 2 * s)


@dataclass(frozen=True, eq=False)
class CurvePath:
    """Sampled curve with cubic Hermite interpolation between nodes."""

    times: np.ndarray
    nodes: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        x = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        v = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if x.shape[0] != len(t) or v.shape != x.shape:
            raise ValueError("times/nodes/velocities shapes disagree")
        if len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing "
                             "with at least two samples")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "velocities", v)
        if self.accelerations is not None:
            a = np.atleast_2d(np.asarray(self.accelerations, dtype=float))
            if a.shape != x.shape:
                raise ValueError("accelerations shape disagrees")
            object.__setattr__(self, "accelerations", a)

    @property
    def dim(self):
        return self.nodes.shape[1]

    @property
    def t_start(self):
        return float(self.times[0])

    @property
    def t_end(self):
        return float(self.times[-1])

    def node_slopes(self):
        """Nodal dv/dt: stored accelerations or grid differences."""
        if self.accelerations is not None:
            return self.accelerations
        return grid_derivative(self.times, self.velocities)

    def _locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.times, t, side="right") - 1
        idx = np.clip(idx, 0, len(self.times) - 2)
        h = self.times[idx + 1] - self.times[idx]
        s = (t - self.times[idx]) / h
        return idx, h, s

    def _eval(self, t, values, slopes):
        idx, h, s = self._locate(t)
        c0, c1, c2, c3 = _hermite_coeffs(s)
        out = (c0[:, None] * values[idx]
               + c1[:, None] * (h[:, None] * slopes[idx])
               + c2[:, None] * values[idx + 1]
               + c3[:, None] * (h[:, None] * slopes[idx + 1]))
        return out

    def position(self, t):
        out = self._eval(t, self.nodes, self.velocities)
        return out[0] if np.isscalar(t) else out

    def velocity(self, t):
        out = self._eval(t, self.velocities, self.node_slopes())
        return out[0] if np.isscalar(t) else out

    def velocity_derivative(self, t):
        """d/dt of the velocity-channel interpolant (the curve's
        acceleration estimate)."""
        slopes = self.node_slopes()
        idx, h, s = self._locate(np.atleast_1d(t))
        d0, d1, d2, d3 = _hermite_dcoeffs(s)
        out = (d0[:, None] * self.velocities[idx]
               + d1[:, None] * (h[:, None] * slopes[idx])
               + d2[:, None] * self.velocities[idx + 1]
               + d3[:, None] * (h[:, None] * slopes[idx + 1]))
        out = out / h[:, None]
        return out[0] if np.isscalar(t) else out

    def position_derivative(self, t):
        """d/dt of the position interpolant (coincides with ``velocity``
        at nodes, differs between them at interpolation order)."""
        idx, h, s = self._locate(np.atleast_1d(t))
        d0, d1, d2, d3 = _hermite_dcoeffs(s)
        out = (d0[:, None] * self.nodes[idx]
               + d1[:, None] * (h[:, None] * self.velocities[idx])
               + d2[:, None] * self.nodes[idx + 1]
               + d3[:, None] * (h[:, None] * self.velocities[idx + 1]))
        out = out / h[:, None]
        return out[0] if np.isscalar(t) else out

    def consistency_defect(self, refine=8):
        """Max gap between stored velocities and differentiated positions,
        sampled at interior nodes with a refined five-point difference."""
        h = np.min(np.diff(self.times)) / refine
        ts = self.times[1:-1]
        fd = (-self.position(ts + 2 * h) + 8 * self.position(ts + h)
              - 8 * self.position(ts - h) + self.position(ts - 2 * h)) / (12 * h)
        return float(np.max(np.abs(fd - self.velocities[1:-1])))

    def shifted(self, delta_nodes, delta_velocities):
        return CurvePath(self.times, self.nodes + delta_nodes,
                         self.velocities + delta_velocities)

    def reversed(self):
        t = self.times[-1] - self.times[::-1] + self.times[0]
        acc = None if self.accelerations is None else self.accelerations[::-1]
        return CurvePath(t, self.nodes[::-1], -self.velocities[::-1], acc)

    @staticmethod
    def from_function(fn, vfn, t0, t1, samples=129, afn=None):
        ts = np.linspace(t0, t1, samples)
        nodes = np.array([np.atleast_1d(fn(t)) for t in ts], dtype=float)
        vels = np.array([np.atleast_1d(vfn(t)) for t in ts], dtype=float)
        accs = None
        if afn is not None:
            accs = np.array([np.atleast_1d(afn(t)) for t in ts], dtype=float)
        return CurvePath(ts, nodes, vels, accs)

    @staticmethod
    def straight_line(x0, v, t0=0.0, t1=1.0, samples=65):
        x0 = np.asarray(x0, dtype=float)
        v = np.asarray(v, dtype=float)
        ts = np.linspace(t0, t1, samples)
        nodes = x0[None, :] + ts[:, None] * v[None, :]
        vels = np.tile(v, (samples, 1))
        accs = np.zeros_like(nodes)
        return CurvePath(ts, nodes, vels, accs)

    def to_csv(self, path):
        """Columns: t, x_1..x_D, v_1..v_D, full float precision."""
        d = self.dim
        header = (["t"] + [f"x_{k + 1}" for k in range(d)]
                  + [f"v_{k + 1}" for k in range(d)])
        with open(path, "w", newline="") as fh:
            w = _csv.writer(fh)
            w.writerow(header)
            for i in range(len(self.times)):
                row = [self.times[i], *self.nodes[i], *self.velocities[i]]
                w.writerow([format(val, ".17g") for val in row])

    @staticmethod
    def from_csv(path):
        with open(path, newline="") as fh:
            r = _csv.reader(fh)
            header = next(r)
            rows = np.array([[float(v) for v in row] for row in r])
        d = (len(header) - 1) // 2
        if header[0] != "t" or len(header) != 1 + 2 * d:
            raise ValueError("unrecognized curve CSV header")
        return CurvePath(rows[:, 0], rows[:, 1:1 + d], rows[:, 1 + d:])
