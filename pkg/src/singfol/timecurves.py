"""Piecewise-polynomial coefficient curves on [0,1] and the gluing reparameterization.

A coefficient curve is the t-dependence of one generator coefficient of a
time-dependent foliation element.  Pieces are polynomials in the joint ring
Q[x_1..x_n, t] (t is the last variable) so spatially varying coefficients such
as (x-1)*c(t) are representable exactly.  Most curves are spatially constant.
"""

from __future__ import annotations

import bisect
from fractions import Fraction
from typing import Sequence

import numpy as np

from .poly import Polynomial, parse_polynomial


class CoefficientCurve:
    """Piecewise polynomial c(x,t) on t in [0,1], continuous pieces, sorted breakpoints."""

    __slots__ = ("space_dim", "breakpoints", "pieces")

    def __init__(self, space_dim: int, breakpoints: Sequence, pieces: Sequence[Polynomial]):
        self.space_dim = int(space_dim)
        if len(breakpoints) != len(pieces) + 1:
            raise ValueError("need len(breakpoints) == len(pieces) + 1")
        bp = list(breakpoints)
        if float(bp[0]) != 0.0 or float(bp[-1]) != 1.0:
            raise ValueError("curve must cover [0, 1]")
        if any(float(a) >= float(b) for a, b in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        for p in pieces:
            if p.ambient_dim != self.space_dim + 1:
                raise ValueError("pieces must live in Q[x_1..x_n, t]")
        self.breakpoints = bp
        self.pieces = list(pieces)

    # ------------------------------------------------------------ constructors
    @classmethod
    def constant(cls, space_dim: int, value) -> "CoefficientCurve":
        return cls(space_dim, [0, 1], [Polynomial.constant(space_dim + 1, value)])

    @classmethod
    def from_time_poly(cls, space_dim: int, p: Polynomial) -> "CoefficientCurve":
        """Promote a univariate polynomial in t to a single-piece curve."""
        if p.ambient_dim != 1:
            raise ValueError("expected a univariate polynomial in t")
        return cls(space_dim, [0, 1], [p.promote(space_dim + 1, offset=space_dim)])

    @classmethod
    def parse_time(cls, text: str, space_dim: int) -> "CoefficientCurve":
        return cls.from_time_poly(space_dim, parse_polynomial(text, 1, names=["t"]))

    @classmethod
    def from_joint_poly(cls, space_dim: int, p: Polynomial) -> "CoefficientCurve":
        if p.ambient_dim != space_dim + 1:
            raise ValueError("joint polynomial has wrong ring")
        return cls(space_dim, [0, 1], [p])

    # ------------------------------------------------------------ structure
    def piece_index(self, t: float) -> int:
        floats = [float(b) for b in self.breakpoints]
        i = bisect.bisect_right(floats, t) - 1
        return min(max(i, 0), len(self.pieces) - 1)

    def is_spatially_constant(self) -> bool:
        return all(not p.depends_on(ax) for p in self.pieces for ax in range(self.space_dim))

    def time_polys(self) -> list[Polynomial]:
        """Pieces as univariate polynomials in t (requires spatial constancy)."""
        out = []
        for p in self.pieces:
            q = p
            for ax in reversed(range(self.space_dim)):
                q = q.drop_axis(ax)
            out.append(q)
        return out

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.pieces)

    # ------------------------------------------------------------ evaluation
    def eval(self, x, t: float) -> float:
        p = self.pieces[self.piece_index(t)]
        pt = np.concatenate([np.asarray(x, dtype=float), [t]])
        return float(p.compiled()(pt))

    def eval_scalar(self, t: float) -> float:
        """Evaluate a spatially constant curve."""
        p = self.pieces[self.piece_index(t)]
        pt = np.zeros(self.space_dim + 1)
        pt[-1] = t
        return float(p.compiled()(pt))

    def at_time(self, t) -> Polynomial:
        """The spatial polynomial c(., t); exact when t is rational."""
        return self.pieces[self.piece_index(float(t))].substitute(self.space_dim, t)

    # ------------------------------------------------------------ calculus
    def dt(self) -> "CoefficientCurve":
        return CoefficientCurve(
            self.space_dim, self.breakpoints, [p.partial(self.space_dim) for p in self.pieces]
        )

    def partial_space(self, axis: int) -> "CoefficientCurve":
        return CoefficientCurve(
            self.space_dim, self.breakpoints, [p.partial(axis) for p in self.pieces]
        )

    def integral(self, a: float = 0.0, b: float = 1.0):
        """Definite integral in t of a spatially constant curve; exact on exact input."""
        exact = all(isinstance(v, (int, Fraction)) for v in self.breakpoints) and isinstance(
            a, (int, Fraction)
        ) and isinstance(b, (int, Fraction))
        total = Fraction(0) if exact else 0.0
        ta = self.space_dim  # index of t axis
        for i, p in enumerate(self.pieces):
            lo, hi = self.breakpoints[i], self.breakpoints[i + 1]
            lo = max(float(lo), float(a)) if not exact else max(lo, a, key=float)
            hi = min(float(hi), float(b)) if not exact else min(hi, b, key=float)
            if float(lo) >= float(hi):
                continue
            anti = p.antiderivative(ta)
            for ax in range(self.space_dim):
                if anti.depends_on(ax):
                    raise ValueError("integral of a spatially varying curve is not scalar")
            if exact:
                total += anti.substitute(ta, hi).constant_value() - anti.substitute(
                    ta, lo
                ).constant_value()
            else:
                z = np.zeros(self.space_dim + 1)
                z[-1] = hi
                vhi = float(anti.compiled()(z))
                z[-1] = lo
                vlo = float(anti.compiled()(z))
                total += vhi - vlo
        return total

    # ------------------------------------------------------------ algebra
    def _aligned(self, other: "CoefficientCurve"):
        merged: list = []
        for b in sorted(set(float(x) for x in self.breakpoints) | set(float(x) for x in other.breakpoints)):
            # keep exact breakpoint objects when available
            cand = None
            for src in (self.breakpoints, other.breakpoints):
                for x in src:
                    if float(x) == b:
                        cand = x if cand is None or isinstance(x, Fraction) else cand
            merged.append(cand)
        p1 = [self.pieces[self.piece_index((float(merged[i]) + float(merged[i + 1])) / 2)] for i in range(len(merged) - 1)]
        p2 = [other.pieces[other.piece_index((float(merged[i]) + float(merged[i + 1])) / 2)] for i in range(len(merged) - 1)]
        return merged, p1, p2

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CoefficientCurve.constant(self.space_dim, other)
        bp, p1, p2 = self._aligned(other)
        return CoefficientCurve(self.space_dim, bp, [a + b for a, b in zip(p1, p2)])

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = CoefficientCurve.constant(self.space_dim, other)
        bp, p1, p2 = self._aligned(other)
        return CoefficientCurve(self.space_dim, bp, [a - b for a, b in zip(p1, p2)])

    def __neg__(self):
        return CoefficientCurve(self.space_dim, self.breakpoints, [-p for p in self.pieces])

    def scale(self, c) -> "CoefficientCurve":
        """Scale by a rational constant or a spatial polynomial."""
        if isinstance(c, Polynomial):
            c = c.promote(self.space_dim + 1)
        return CoefficientCurve(self.space_dim, self.breakpoints, [p * c for p in self.pieces])

    def time_reflect(self) -> "CoefficientCurve":
        """c(x, 1-t) with reversed breakpoints; exact."""
        ta = self.space_dim
        one_minus_t = Polynomial.constant(ta + 1, 1) - Polynomial.variable(ta + 1, ta)
        bp = [1 - b if isinstance(b, (int, Fraction)) else 1.0 - b for b in reversed(self.breakpoints)]
        pieces = [p.substitute(ta, one_minus_t) for p in reversed(self.pieces)]
        return CoefficientCurve(self.space_dim, bp, pieces)

    def __repr__(self):
        segs = ", ".join(
            f"[{float(a):g},{float(b):g}]: {p.to_string()}"
            for a, b, p in zip(self.breakpoints, self.breakpoints[1:], self.pieces)
        )
        return f"CoefficientCurve({segs})"


def as_curve(value, space_dim: int) -> CoefficientCurve:
    """Coerce constants, strings, univariate or joint polynomials to a curve.

    Floats are converted by exact binary-to-rational promotion, so numerical
    inputs like 2*pi round-trip bit-exactly into the rational representation.
    """
    if isinstance(value, CoefficientCurve):
        if value.space_dim != space_dim:
            raise ValueError("curve has wrong spatial dimension")
        return value
    if isinstance(value, float):
        return CoefficientCurve.constant(space_dim, Fraction(value))
    if isinstance(value, (int, Fraction)):
        return CoefficientCurve.constant(space_dim, value)
    if isinstance(value, str):
        return CoefficientCurve.parse_time(value, space_dim)
    if isinstance(value, Polynomial):
        if value.ambient_dim == 1:
            return CoefficientCurve.from_time_poly(space_dim, value)
        if value.ambient_dim == space_dim + 1:
            return CoefficientCurve.from_joint_poly(space_dim, value)
        if value.ambient_dim == space_dim:
            return CoefficientCurve.from_joint_poly(space_dim, value.promote(space_dim + 1))
    raise TypeError(f"cannot interpret {value!r} as a coefficient curve")


class Reparameterization:
    """The fixed gluing map r: [0,1] -> [0,1], flat on the outer tenths.

    r is 0 on [0, 1/10], 1 on [9/10, 1] and the degree-7 monotone spline
    35u^4 - 84u^5 + 70u^6 - 20u^7 (in u = (10t-1)/8) in between; r' =
    140 u^3 (1-u)^3 / (4/5) >= 0 vanishes to third order at the junctions.
    """

    LO = Fraction(1, 10)
    HI = Fraction(9, 10)

    def __init__(self):
        u = Polynomial.variable(1, 0)
        s3 = 35 * u ** 4 - 84 * u ** 5 + 70 * u ** 6 - 20 * u ** 7
        affine = (u - Fraction(1, 10)) * Fraction(5, 4)  # maps [1/10, 9/10] to [0, 1]
        self.mid = s3.compose([affine])   # polynomial valid on [1/10, 9/10]
        self.mid_deriv = self.mid.partial(0)

    def value(self, t: float) -> float:
        if t <= float(self.LO):
            return 0.0
        if t >= float(self.HI):
            return 1.0
        return float(self.mid.compiled()(np.array([t])))

    def derivative(self, t: float) -> float:
        if t <= float(self.LO) or t >= float(self.HI):
            return 0.0
        return float(self.mid_deriv.compiled()(np.array([t])))

    def invert(self, tau: float) -> float:
        """The unique t in [1/10, 9/10] with r(t) = tau, for tau in (0,1); bisection."""
        if not 0.0 < tau < 1.0:
            raise ValueError("invert requires tau strictly inside (0,1)")
        lo, hi = float(self.LO), float(self.HI)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.value(mid) < tau:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-16:
                break
        return 0.5 * (lo + hi)

    def scaled_mid(self, a, b) -> tuple[Polynomial, Polynomial]:
        """Exact polynomials r(a*t + b) and d/dt[r(a*t + b)] on the middle window."""
        t = Polynomial.variable(1, 0)
        inner = t * Fraction(a) + Fraction(b)
        comp = self.mid.compose([inner])
        return comp, comp.partial(0)


REPARAM = Reparameterization()
