"""Independent reference implementations used only by the test suite.

Each oracle takes a different computational route than the code under test:
finite-difference weights via Fornberg's recursion (vs. the moment-matrix
solve), polynomial roots via Aberth–Ehrlich simultaneous iteration (vs.
companion-matrix eigenvalues), and conditional expectations via seeded Monte
Carlo (vs. Gauss–Hermite quadrature).
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def fornberg_weights(z, nodes, order: int) -> list[list[Fraction]]:
    """Finite-difference weights by Fornberg's recursion, exact over rationals.

    Returns W with W[i][v] = weight of the sample at nodes[i] in the
    approximation of the v-th derivative at z, for v = 0..order.
    """
    z = Fraction(z)
    x = [Fraction(v) for v in nodes]
    n = len(x)
    W = [[Fraction(0)] * (order + 1) for _ in range(n)]
    W[0][0] = Fraction(1)
    c1 = Fraction(1)
    c4 = x[0] - z
    for i in range(1, n):
        mn = min(i, order)
        c2 = Fraction(1)
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for v in range(mn, 0, -1):
                    W[i][v] = c1 * (v * W[i - 1][v - 1] - c5 * W[i - 1][v]) / c2
                W[i][0] = -c1 * c5 * W[i - 1][0] / c2
            for v in range(mn, 0, -1):
                W[j][v] = (c4 * W[j][v] - v * W[j][v - 1]) / c3
            W[j][0] = c4 * W[j][0] / c3
        c1 = c2
    return W


def aberth_roots(coeffs, tol: float = 1e-13, max_iter: int = 500) -> np.ndarray:
    """All roots of a polynomial by Aberth–Ehrlich simultaneous iteration.

    ``coeffs`` are descending-power; leading zeros are not allowed.  This is
    deliberately not built on numpy.roots (the route under test).
    """
    c = np.asarray([complex(v) for v in coeffs])
    if c[0] == 0:
        raise ValueError("leading coefficient must be nonzero")
    c = c / c[0]
    n = c.size - 1
    if n == 0:
        return np.array([], dtype=complex)
    dc = c[:-1] * np.arange(n, 0, -1)
    radius = 1.0 + float(np.max(np.abs(c[1:])))
    angles = 2.0 * np.pi * (np.arange(n) + 0.376) / n
    z = radius * np.exp(1j * angles)
    for _ in range(max_iter):
        p = np.polyval(c, z)
        dp = np.polyval(dc, z)
        # Newton correction; treat dp = 0 by nudging (does not survive iteration).
        dp = np.where(dp == 0, 1e-30, dp)
        w = p / dp
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = np.sum(1.0 / diff, axis=1)
        dz = w / (1.0 - w * s)
        z = z - dz
        if np.max(np.abs(dz)) < tol:
            break
    return z


def mc_euler_expectation(
    problem,
    x,
    t_n: float,
    j: int,
    dt: float,
    func,
    nsamples: int = 400_000,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo (mean, standard error) of func(one-shot Euler predictor).

    The predictor over a span of j steps freezes (a, b) at (t_n, x) with the
    problem's closed-form (y, z) and draws ΔW ~ N(0, jΔt·I_d) with a seeded
    generator.  ``func`` maps ((S, n) samples, (S, d) increments) to
    per-sample values.
    """
    rng = np.random.default_rng(seed)
    x = np.atleast_1d(np.asarray(x, float))
    y = problem.analytic_y(t_n, x) if problem.has_analytic else None
    z = problem.analytic_z(t_n, x) if problem.has_analytic else None
    a = np.asarray(problem.a(t_n, x, y, z), float)
    b = np.asarray(problem.b(t_n, x, y, z), float)
    dw = rng.normal(0.0, math.sqrt(j * dt), size=(nsamples, problem.d))
    nodes = x + a * (j * dt) + dw @ b.T
    vals = np.asarray(func(nodes, dw), float)
    mean = vals.mean(axis=0)
    stderr = vals.std(axis=0, ddof=1) / math.sqrt(nsamples)
    return mean, stderr
