"""Independent symbolic references used across the test suite.

Everything here is built with sympy directly from catalog parameters and
never touches the package's numeric paths, so agreement between the two
is a genuine cross-check.
"""

import numpy as np
import sympy as sp


def christoffel_oracle(gram_expr, coords):
    """Lambdified Christoffel symbols Gamma[k, i, j] of a sympy metric."""
    d = len(coords)
    ginv = gram_expr.inv()
    gamma = [[[sp.simplify(sum(
        ginv[k, l] * (sp.diff(gram_expr[l, j], coords[i])
                      + sp.diff(gram_expr[i, l], coords[j])
                      - sp.diff(gram_expr[i, j], coords[l])) / 2
        for l in range(d))) for j in range(d)] for i in range(d)]
        for k in range(d)]
    fns = [[[sp.lambdify(coords, gamma[k][i][j], "numpy")
             for j in range(d)] for i in range(d)] for k in range(d)]

    def evaluate(x):
        out = np.empty((d, d, d))
        for k in range(d):
            for i in range(d):
                for j in range(d):
                    out[k, i, j] = fns[k][i][j](*x)
        return out

    return evaluate


def conformal_gram_expr(scale=1.0, dim=2):
    coords = sp.symbols(f"x1:{dim + 1}")
    g = sp.exp(2 * sp.Float(scale) * coords[0]) * sp.eye(dim)
    return g, coords


def sphere_gram_expr(radius=1.0):
    coords = sp.symbols("x1 x2")
    r2 = sp.Float(radius) ** 2
    factor = 4 * r2 ** 2 / (r2 + coords[0] ** 2 + coords[1] ** 2) ** 2
    return factor * sp.eye(2), coords


def covariant_oracle(gram_expr, coords, x_exprs, y_exprs):
    """Lambdified Levi-Civita covariant derivative (nabla_X Y)^k for
    symbolic fields, from first principles."""
    d = len(coords)
    ginv = gram_expr.inv()
    gamma = [[[sum(ginv[k, l] * (sp.diff(gram_expr[l, j], coords[i])
                                 + sp.diff(gram_expr[i, l], coords[j])
                                 - sp.diff(gram_expr[i, j], coords[l])) / 2
               for l in range(d)) for j in range(d)] for i in range(d)]
             for k in range(d)]
    comps = []
    for k in range(d):
        expr = sum(x_exprs[i] * sp.diff(y_exprs[k], coords[i])
                   for i in range(d))
        expr += sum(gamma[k][i][j] * x_exprs[i] * y_exprs[j]
                    for i in range(d) for j in range(d))
        comps.append(sp.lambdify(coords, sp.simplify(expr), "numpy"))

    def evaluate(x):
        return np.array([float(c(*x)) for c in comps])

    return evaluate
