"""Exact multivariate polynomial algebra and polynomial vector fields.

Coefficients are `fractions.Fraction` throughout, so equality of polynomials,
brackets and certificates is decided exactly.  Floating point enters only when
a polynomial is *evaluated* at a floating point.  Terms are kept in a
canonical map from exponent multi-indices to nonzero coefficients; printing
and leading-term selection use graded lexicographic order.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Exponents = tuple[int, ...]

# canonical variable names: x1..xn, with x,y,z accepted as aliases for n <= 3
_ALIASES = {"x": 0, "y": 1, "z": 2}


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"expected an exact rational coefficient, got {type(c).__name__}")


class Polynomial:
    """A polynomial in ``ambient_dim`` variables with exact rational coefficients."""

    __slots__ = ("ambient_dim", "terms", "_compiled")

    def __init__(self, ambient_dim: int, terms: Mapping[Exponents, Fraction] | None = None):
        self.ambient_dim = int(ambient_dim)
        norm: dict[Exponents, Fraction] = {}
        if terms:
            for exps, c in terms.items():
                c = _as_fraction(c)
                if c == 0:
                    continue
                exps = tuple(int(e) for e in exps)
                if len(exps) != self.ambient_dim:
                    raise ValueError(
                        f"exponent vector {exps} does not match ambient dimension {self.ambient_dim}"
                    )
                if any(e < 0 for e in exps):
                    raise ValueError(f"negative exponent in {exps}")
                norm[exps] = norm.get(exps, Fraction(0)) + c
                if norm[exps] == 0:
                    del norm[exps]
        self.terms = norm
        self._compiled: Callable | None = None

    # ---------------------------------------------------------------- constructors
    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n)

    @classmethod
    def constant(cls, n: int, c) -> "Polynomial":
        return cls(n, {(0,) * n: _as_fraction(c)})

    @classmethod
    def variable(cls, n: int, axis: int) -> "Polynomial":
        if not 0 <= axis < n:
            raise ValueError(f"axis {axis} out of range for dimension {n}")
        e = [0] * n
        e[axis] = 1
        return cls(n, {tuple(e): Fraction(1)})

    @classmethod
    def monomial(cls, n: int, exps: Sequence[int], c=1) -> "Polynomial":
        return cls(n, {tuple(exps): _as_fraction(c)})

    # ---------------------------------------------------------------- queries
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> Fraction:
        if not self.terms:
            return Fraction(0)
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return next(iter(self.terms.values()))

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def depends_on(self, axis: int) -> bool:
        return any(e[axis] > 0 for e in self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.ambient_dim == other.ambient_dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.ambient_dim, frozenset(self.terms.items())))

    # ---------------------------------------------------------------- arithmetic
    def _check_dim(self, other: "Polynomial"):
        if self.ambient_dim != other.ambient_dim:
            raise ValueError(
                f"dimension mismatch: {self.ambient_dim} vs {other.ambient_dim}"
            )

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.ambient_dim, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_dim(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return Polynomial(self.ambient_dim, terms)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.ambient_dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.ambient_dim, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.__add__(-other)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = _as_fraction(other)
            return Polynomial(self.ambient_dim, {e: c * v for e, v in self.terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_dim(other)
        terms: dict[Exponents, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                terms[e] = terms.get(e, Fraction(0)) + c1 * c2
        return Polynomial(self.ambient_dim, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            raise ValueError("negative power")
        out = Polynomial.constant(self.ambient_dim, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def mul_term(self, exps: Exponents, c: Fraction) -> "Polynomial":
        """Multiply by the single term c * x^exps (used by the Groebner engine)."""
        if c == 0:
            return Polynomial.zero(self.ambient_dim)
        return Polynomial(
            self.ambient_dim,
            {tuple(a + b for a, b in zip(e, exps)): v * c for e, v in self.terms.items()},
        )

    # ---------------------------------------------------------------- calculus
    def partial(self, axis: int) -> "Polynomial":
        if not 0 <= axis < self.ambient_dim:
            raise ValueError(f"axis {axis} out of range")
        terms: dict[Exponents, Fraction] = {}
        for e, c in self.terms.items():
            k = e[axis]
            if k == 0:
                continue
            e2 = list(e)
            e2[axis] = k - 1
            e2 = tuple(e2)
            terms[e2] = terms.get(e2, Fraction(0)) + c * k
        return Polynomial(self.ambient_dim, terms)

    def antiderivative(self, axis: int) -> "Polynomial":
        terms: dict[Exponents, Fraction] = {}
        for e, c in self.terms.items():
            e2 = list(e)
            e2[axis] = e[axis] + 1
            terms[tuple(e2)] = c / (e[axis] + 1)
        return Polynomial(self.ambient_dim, terms)

    # ---------------------------------------------------------------- evaluation
    def eval(self, point: Sequence) -> Fraction | float:
        """Exact when every coordinate is int/Fraction, floating otherwise."""
        if len(point) != self.ambient_dim:
            raise ValueError(
                f"point of length {len(point)} in dimension {self.ambient_dim}"
            )
        exact = all(isinstance(v, (int, Fraction, np.integer)) for v in point)
        if exact:
            acc = Fraction(0)
            pt = [_as_fraction(v) for v in point]
            for e, c in self.terms.items():
                term = c
                for v, k in zip(pt, e):
                    if k:
                        term *= v ** k
                acc += term
            return acc
        return float(self.compiled()(np.asarray(point, dtype=float)))

    def compiled(self) -> Callable:
        """A vectorized float evaluator; accepts arrays of shape (..., n)."""
        if self._compiled is None:
            if not self.terms:
                self._compiled = lambda pts: np.zeros(np.shape(pts)[:-1])
            else:
                E = np.array(sorted(self.terms), dtype=np.int64)
                C = np.array([float(self.terms[tuple(e)]) for e in E])

                def f(pts, _E=E, _C=C):
                    pts = np.asarray(pts, dtype=float)
                    return np.dot(np.prod(pts[..., None, :] ** _E, axis=-1), _C)

                self._compiled = f
        return self._compiled

    # ---------------------------------------------------------------- substitution
    def compose(self, args: Sequence["Polynomial"]) -> "Polynomial":
        """Substitute args[i] for variable i; args live in a common ring."""
        if len(args) != self.ambient_dim:
            raise ValueError("wrong number of substitution polynomials")
        if not args:
            raise ValueError("cannot compose in dimension 0")
        m = args[0].ambient_dim
        out = Polynomial.zero(m)
        for e, c in self.terms.items():
            term = Polynomial.constant(m, c)
            for arg, k in zip(args, e):
                if k:
                    term = term * arg ** k
            out = out + term
        return out

    def substitute(self, axis: int, value) -> "Polynomial":
        """Substitute a rational value or same-ring polynomial for one variable."""
        if isinstance(value, Polynomial):
            args = [
                Polynomial.variable(self.ambient_dim, i) if i != axis else value
                for i in range(self.ambient_dim)
            ]
            return self.compose(args)
        v = _as_fraction(value)
        terms: dict[Exponents, Fraction] = {}
        for e, c in self.terms.items():
            e2 = list(e)
            k = e2[axis]
            e2[axis] = 0
            e2 = tuple(e2)
            terms[e2] = terms.get(e2, Fraction(0)) + c * v ** k
        return Polynomial(self.ambient_dim, terms)

    def drop_axis(self, axis: int) -> "Polynomial":
        """Remove a variable the polynomial does not depend on."""
        if self.depends_on(axis):
            raise ValueError("polynomial depends on the dropped axis")
        return Polynomial(
            self.ambient_dim - 1,
            {e[:axis] + e[axis + 1:]: c for e, c in self.terms.items()},
        )

    def promote(self, n: int, offset: int = 0) -> "Polynomial":
        """Embed into a larger ring, mapping variable i to variable i+offset."""
        if offset + self.ambient_dim > n:
            raise ValueError("target ring too small")
        pad_l = (0,) * offset
        pad_r = (0,) * (n - offset - self.ambient_dim)
        return Polynomial(n, {pad_l + e + pad_r: c for e, c in self.terms.items()})

    # ---------------------------------------------------------------- printing
    def to_string(self, names: Sequence[str] | None = None) -> str:
        if names is None:
            names = default_names(self.ambient_dim)
        if not self.terms:
            return "0"
        out = []
        for e in sorted(self.terms, key=grlex_key, reverse=True):
            c = self.terms[e]
            mag = abs(c)
            factors = []
            if mag != 1 or sum(e) == 0:
                factors.append(str(mag))
            for name, k in zip(names, e):
                if k == 1:
                    factors.append(name)
                elif k > 1:
                    factors.append(f"{name}^{k}")
            term = "*".join(factors)
            if not out:
                out.append(term if c > 0 else f"-{term}")
            else:
                out.append(f"+ {term}" if c > 0 else f"- {term}")
        return " ".join(out)

    def __repr__(self):
        return f"Polynomial({self.to_string()!r})"


def grlex_key(e: Exponents):
    return (sum(e), e)


def default_names(n: int) -> list[str]:
    if n == 1:
        return ["x"]
    if n <= 3:
        return ["x", "y", "z"][:n]
    return [f"x{i + 1}" for i in range(n)]


# -------------------------------------------------------------------- parsing

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<var>[a-zA-Z][a-zA-Z0-9]*)(?:\^(?P<pow>\d+))?)\s*")


def parse_polynomial(text: str, ambient_dim: int, names: Sequence[str] | None = None) -> Polynomial:
    """Parse ``c * x1^a1 * ... * xn^an + ...`` with integer or p/q coefficients.

    Variables are x1..xn; x, y, z are accepted for n <= 3 and t for n == 1.
    """
    var_index: dict[str, int] = {f"x{i + 1}": i for i in range(ambient_dim)}
    if names is not None:
        for i, nm in enumerate(names):
            var_index[nm] = i
    else:
        for nm, i in _ALIASES.items():
            if i < ambient_dim <= 3:
                var_index[nm] = i
        if ambient_dim == 1:
            var_index.setdefault("t", 0)

    text = text.replace("−", "-").strip()
    if not text:
        raise ValueError("empty polynomial string")
    # split into signed terms at top level
    terms: list[tuple[int, str]] = []
    sign, buf = 1, []
    for ch in text:
        if ch in "+-":
            if buf and "".join(buf).strip():
                terms.append((sign, "".join(buf)))
                buf = []
                sign = 1 if ch == "+" else -1
            else:
                sign = sign * (1 if ch == "+" else -1)
        else:
            buf.append(ch)
    if buf and "".join(buf).strip():
        terms.append((sign, "".join(buf)))
    if not terms:
        raise ValueError(f"could not parse polynomial {text!r}")

    poly = Polynomial.zero(ambient_dim)
    for sgn, term in terms:
        coeff = Fraction(sgn)
        exps = [0] * ambient_dim
        for factor in term.split("*"):
            factor = factor.strip()
            if not factor:
                raise ValueError(f"empty factor in term {term!r}")
            m = _TOKEN.fullmatch(factor)
            if not m:
                raise ValueError(f"cannot parse factor {factor!r}")
            if m.group("num"):
                coeff *= Fraction(m.group("num"))
            else:
                name = m.group("var")
                if name not in var_index:
                    raise ValueError(f"unknown variable {name!r} in dimension {ambient_dim}")
                exps[var_index[name]] += int(m.group("pow") or 1)
        poly = poly + Polynomial.monomial(ambient_dim, exps, coeff)
    return poly


# -------------------------------------------------------------------- vector fields


class PolyVectorField:
    """A vector field on R^n whose components are exact polynomials."""

    __slots__ = ("ambient_dim", "components")

    def __init__(self, components: Sequence[Polynomial]):
        components = tuple(components)
        if not components:
            raise ValueError("a vector field needs at least one component")
        n = components[0].ambient_dim
        for p in components:
            if p.ambient_dim != n:
                raise ValueError("components live in different rings")
        if len(components) != n:
            raise ValueError(
                f"{len(components)} components for ambient dimension {n}"
            )
        self.ambient_dim = n
        self.components = components

    # construction helpers
    @classmethod
    def zero(cls, n: int) -> "PolyVectorField":
        return cls([Polynomial.zero(n)] * n)

    @classmethod
    def coordinate(cls, n: int, axis: int) -> "PolyVectorField":
        comps = [Polynomial.zero(n)] * n
        comps[axis] = Polynomial.constant(n, 1)
        return cls(comps)

    @classmethod
    def parse(cls, text: str, ambient_dim: int) -> "PolyVectorField":
        """Parse a ';'-separated list of component polynomials."""
        parts = text.split(";")
        if len(parts) != ambient_dim:
            raise ValueError(
                f"expected {ambient_dim} components separated by ';', got {len(parts)}"
            )
        return cls([parse_polynomial(p, ambient_dim) for p in parts])

    @classmethod
    def linear(cls, matrix) -> "PolyVectorField":
        """The field x -> A x for an exact matrix A (rows of rationals)."""
        n = len(matrix)
        comps = []
        for row in matrix:
            p = Polynomial.zero(n)
            for j, a in enumerate(row):
                p = p + Polynomial.variable(n, j) * _as_fraction(a)
            comps.append(p)
        return cls(comps)

    def to_string(self) -> str:
        return " ; ".join(p.to_string() for p in self.components)

    def __repr__(self):
        return f"PolyVectorField({self.to_string()!r})"

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def __add__(self, other: "PolyVectorField"):
        return PolyVectorField([a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other: "PolyVectorField"):
        return PolyVectorField([a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return PolyVectorField([-a for a in self.components])

    def scale(self, f) -> "PolyVectorField":
        """Multiply by a rational or by a polynomial function."""
        return PolyVectorField([p * f for p in self.components])

    def eval(self, point) -> np.ndarray:
        return np.array([float(p.compiled()(np.asarray(point, dtype=float))) for p in self.components])

    def eval_exact(self, point):
        return [p.eval(point) for p in self.components]

    def apply_to(self, f: Polynomial) -> Polynomial:
        """Directional derivative X(f) = sum_j X^j d_j f."""
        out = Polynomial.zero(self.ambient_dim)
        for j, comp in enumerate(self.components):
            out = out + comp * f.partial(j)
        return out

    def jacobian(self) -> list[list[Polynomial]]:
        """J[k][j] = d X^k / d x_j."""
        return [[comp.partial(j) for j in range(self.ambient_dim)] for comp in self.components]

    def linear_matrix(self):
        """Return A (list of Fraction rows) when the field is x -> Ax, else None."""
        n = self.ambient_dim
        A = [[Fraction(0)] * n for _ in range(n)]
        for k, comp in enumerate(self.components):
            for e, c in comp.terms.items():
                if sum(e) != 1:
                    return None
                A[k][e.index(1)] = c
        return A


# -------------------------------------------------------------------- spec ops


def poly_eval(p: Polynomial, point):
    return p.eval(point)


def poly_equal(p: Polynomial, q: Polynomial) -> bool:
    return p == q


def partial_derivative(p: Polynomial, axis: int) -> Polynomial:
    return p.partial(axis)


def lie_bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """[X,Y]^k = sum_j X^j d_j Y^k - Y^j d_j X^k, exact."""
    if X.ambient_dim != Y.ambient_dim:
        raise ValueError("dimension mismatch in lie_bracket")
    n = X.ambient_dim
    comps = []
    for k in range(n):
        acc = Polynomial.zero(n)
        for j in range(n):
            acc = acc + X.components[j] * Y.components[k].partial(j)
            acc = acc - Y.components[j] * X.components[k].partial(j)
        comps.append(acc)
    return PolyVectorField(comps)
