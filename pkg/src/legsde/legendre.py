"""Legendre polynomials on [-1, 1] and the shifted orthonormal system on [t, T].

Two evaluation routes are kept deliberately separate: a float three-term
recurrence for fast numerics, and exact monomial coefficients over arbitrary
precision rationals for the coefficient integrals, where roundoff would be
indistinguishable from a genuine table mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

# Degrees above this are refused by the exact-coefficient path.  Nothing in
# the shipped tables needs more than ~20; the cap only guards runaway loops.
MAX_EXACT_DEGREE = 64


def legendre_eval(n: int, x):
    """Evaluate the Legendre polynomial P_n at x (scalar or ndarray).

    Uses the three-term recurrence (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1};
    |P_n(x)| <= 1 on [-1, 1].
    """
    if n < 0:
        raise ValueError("degree must be nonnegative")
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev if p_prev.ndim else float(p_prev)
    p = x.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    return p if p.ndim else float(p)


@dataclass(frozen=True)
class PolyRational:
    """Polynomial with exact rational coefficients, ascending degree.

    The zero polynomial is represented as ``(Fraction(0),)``; otherwise the
    leading coefficient is nonzero and ``degree == len(coeffs) - 1``.
    """

    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("coefficient list must be nonempty")
        if len(self.coeffs) > 1 and self.coeffs[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")

    @staticmethod
    def from_list(coeffs) -> "PolyRational":
        cs = [Fraction(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        return PolyRational(tuple(cs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        """Horner evaluation; exact when x is a Fraction or int."""
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = acc * x + c
        return acc

    def eval_float(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float),
                                                [float(c) for c in self.coeffs])

    def __mul__(self, other: "PolyRational") -> "PolyRational":
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return PolyRational.from_list(out)

    def antiderivative_from(self, lower: Fraction = Fraction(-1)) -> "PolyRational":
        """Antiderivative vanishing at ``lower`` (default -1)."""
        out = [Fraction(0)] + [c / (i + 1) for i, c in enumerate(self.coeffs)]
        p = PolyRational.from_list(out)
        return PolyRational.from_list([out[0] - p(lower)] + out[1:])

    def integrate(self, a: Fraction = Fraction(-1), b: Fraction = Fraction(1)) -> Fraction:
        anti = self.antiderivative_from(a)
        return anti(b)


@lru_cache(maxsize=None)
def legendre_poly(n: int) -> PolyRational:
    """Exact monomial coefficients of P_n on [-1, 1]."""
    if n < 0:
        raise ValueError("degree must be nonnegative")
    if n > MAX_EXACT_DEGREE:
        raise ValueError(f"degree {n} exceeds exact-arithmetic cap {MAX_EXACT_DEGREE}")
    if n == 0:
        return PolyRational((Fraction(1),))
    if n == 1:
        return PolyRational((Fraction(0), Fraction(1)))
    p_prev = legendre_poly(n - 2)
    p = legendre_poly(n - 1)
    x_p = [Fraction(0)] + list(p.coeffs)
    prev = list(p_prev.coeffs) + [Fraction(0)] * (len(x_p) - len(p_prev.coeffs))
    coeffs = [(Fraction(2 * n - 1) * a - Fraction(n - 1) * b) / n
              for a, b in zip(x_p, prev)]
    return PolyRational.from_list(coeffs)


@dataclass(frozen=True)
class IntervalScaling:
    """Affine map between a step interval [t, T] and the reference [-1, 1].

    The midpoint and half-width are fixed at construction so repeated
    evaluations within one step share the same rounding.
    """

    t: float
    T: float

    def __post_init__(self):
        if not self.T > self.t:
            raise ValueError("need T > t")

    @property
    def step(self) -> float:
        return self.T - self.t

    def to_reference(self, s):
        return (np.asarray(s, dtype=float) - 0.5 * (self.T + self.t)) * (2.0 / self.step)


def phi_eval(j: int, s, scaling: IntervalScaling):
    """j-th element of the orthonormal Legendre system on [t, T].

    phi_j(s) = sqrt((2j+1)/(T-t)) * P_j(x(s)) with x the affine map onto
    [-1, 1]; the family is orthonormal in L2([t, T]).
    """
    return np.sqrt((2 * j + 1) / scaling.step) * legendre_eval(j, scaling.to_reference(s))
