"""Root-condition analysis of the combined multi-step recursions.

The characteristic polynomial of a (k, m) combined scheme, written in the
future-to-past direction, has the window sums of the weights as coefficients:

    P(λ) = Σ_{ℓ=0}^{k+m-1} c_ℓ λ^{k+m-1-ℓ},   c_ℓ = Σ_{i∈window(ℓ)} w_i.

P factors exactly as Q(λ)·(1 + λ + ⋯ + λ^{m-1}) with Q(λ) = Σ_i w_i λ^{k-i},
and Q(1) = 0 because the weights sum to zero.  The (always present, always
simple) m-th roots of unity and the root at 1 carry no information about the
scheme, so the headline statistic ``max_modulus_excl_one`` is taken over the
roots of Q(λ)/(λ-1); the root-condition verdict ``is_stable`` still inspects
the full root set.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fdweights import WeightSet, solve_weights

#: Modulus slack for the root condition and the simple-root test.
TOL_ROOT = 1e-9
#: Relative residual bound for accepting companion-matrix roots.
TOL_RESIDUAL = 1e-8


class NoConvergence(RuntimeError):
    """Raised when computed roots fail the polynomial residual check."""


@dataclass(frozen=True)
class CharPolynomial:
    """Characteristic polynomial with exact rational coefficients.

    ``coeffs[ℓ]`` multiplies λ^{degree-ℓ} (descending powers, numpy's `roots`
    convention).
    """

    k: int
    m: int
    coeffs: tuple[Fraction, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def as_float(self) -> np.ndarray:
        return np.array([float(c) for c in self.coeffs], dtype=float)


def characteristic_polynomial(ws: WeightSet) -> CharPolynomial:
    """Characteristic polynomial of the recursion driven by a weight set.

    The coefficient of λ^{k+m-1-ℓ} is the window sum c_ℓ; the coefficients sum
    to zero exactly, so λ = 1 is always a root.
    """
    coeffs = ws.window_sums()
    if sum(coeffs) != 0:
        raise AssertionError("window sums must cancel exactly; weight solve is broken")
    return CharPolynomial(k=ws.k, m=ws.m, coeffs=coeffs)


def synthetic_division_at_one(coeffs: tuple[Fraction, ...]) -> tuple[Fraction, ...]:
    """Exact deflation of the root λ = 1 from a rational polynomial.

    ``coeffs`` are descending-power coefficients whose sum must be exactly zero
    (i.e. 1 really is a root); returns the descending-power quotient.
    """
    if sum(coeffs) != 0:
        raise ValueError("1 is not an exact root: coefficients do not sum to zero")
    quotient: list[Fraction] = []
    acc = Fraction(0)
    for c in coeffs[:-1]:
        acc += c
        quotient.append(acc)
    return tuple(quotient)


def polynomial_roots(coeffs) -> np.ndarray:
    """All complex roots (with multiplicity) of a polynomial.

    ``coeffs`` are descending-power coefficients (sequence of numbers; Fractions
    are converted).  Roots come from the companion-matrix eigenvalues; each root
    must satisfy |P(root)| / max|coeff| < 1e-8 or NoConvergence is raised.
    """
    c = np.array([float(v) for v in coeffs], dtype=float)
    if c.ndim != 1 or c.size == 0:
        raise ValueError("coeffs must be a non-empty 1-D sequence")
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise ValueError("zero polynomial has no well-defined roots")
    c = c[nz[0] :]
    if c.size == 1:
        return np.array([], dtype=complex)
    roots = np.roots(c)
    residuals = np.abs(np.polyval(c, roots)) / np.max(np.abs(c))
    if np.any(residuals > TOL_RESIDUAL):
        worst = float(np.max(residuals))
        raise NoConvergence(f"root residual {worst:.3e} exceeds {TOL_RESIDUAL:.1e}")
    return roots


@dataclass(frozen=True)
class StabilityReport:
    """Root-condition summary for a (k, m) combined scheme."""

    k: int
    m: int
    coeffs: tuple[Fraction, ...]
    roots: np.ndarray
    max_modulus_excl_one: float
    is_stable: bool
    one_is_simple: bool


def _unity_roots(m: int) -> np.ndarray:
    return np.array(
        [cmath.exp(2j * cmath.pi * j / m) for j in range(1, m)], dtype=complex
    )


def stability_report(k: int, m: int) -> StabilityReport:
    """Analyze the root condition of the (k, m) combined scheme.

    The reported ``max_modulus_excl_one`` excludes the root at 1 (deflated by
    exact synthetic division) and the structural roots-of-unity factor; it is
    the quantity the stability tables of multi-step analyses list.  The
    verdict ``is_stable`` applies the root condition to the *full* root set:
    every root inside the closed unit disk (with 1e-9 slack) and every root of
    modulus ≥ 1 - 1e-9 simple, simplicity tested via |P'(λ)| > 1e-9·max|coeff|.
    """
    ws = solve_weights(k, m)
    poly = characteristic_polynomial(ws)

    # Exact factor Q(λ) = Σ w_i λ^{k-i}; deflate its exact root at 1.
    q_coeffs = ws.weights
    quotient = synthetic_division_at_one(q_coeffs)
    informative = polynomial_roots(quotient) if len(quotient) > 1 else np.array([], complex)
    max_excl = float(np.max(np.abs(informative))) if informative.size else 0.0

    roots = np.concatenate([informative, np.array([1.0 + 0j]), _unity_roots(m)])

    pc = poly.as_float()
    dpc = np.polyder(pc)
    scale = np.max(np.abs(pc))
    on_circle = np.abs(roots) >= 1.0 - TOL_ROOT
    simple = np.abs(np.polyval(dpc, roots)) > TOL_ROOT * scale
    is_stable = bool(
        np.all(np.abs(roots) <= 1.0 + TOL_ROOT) and np.all(simple[on_circle])
    )
    one_is_simple = bool(np.abs(np.polyval(dpc, 1.0)) > TOL_ROOT * scale)

    return StabilityReport(
        k=k,
        m=m,
        coeffs=poly.coeffs,
        roots=roots,
        max_modulus_excl_one=max_excl,
        is_stable=is_stable,
        one_is_simple=one_is_simple,
    )
