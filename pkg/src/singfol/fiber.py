"""Exact computation in the fiber A(F)_x = F(M) / I_x F(M).

Everything here is exact linear/module algebra over Q, so points must have
rational coordinates.  Two membership backends are provided: the complete
Groebner route and a degree-bounded dense linear solve used as an independent
oracle in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import modgb
from .foliation import FoliationPresentation, distribution_at, matrix_rank
from .poly import Polynomial, PolyVectorField


def rational_point(values) -> tuple[Fraction, ...]:
    if isinstance(values, str):
        values = values.split(",")
    return tuple(Fraction(v) if not isinstance(v, Fraction) else v for v in values)


def _require_rational(x) -> tuple[Fraction, ...]:
    pt = []
    for v in x:
        if isinstance(v, (int, np.integer)):
            pt.append(Fraction(int(v)))
        elif isinstance(v, Fraction):
            pt.append(v)
        elif isinstance(v, str):
            pt.append(Fraction(v))
        else:
            raise TypeError(
                "fiber computations need rational coordinates; "
                f"got {v!r} of type {type(v).__name__}"
            )
    return tuple(pt)


def ideal_module_generators(F: FoliationPresentation, x) -> list[list[Polynomial]]:
    """Generators (x_j - a_j) X_i of I_x * <X_1..X_q> in Q[x]^dim."""
    a = _require_rational(x)
    if len(a) != F.dim:
        raise ValueError("point dimension mismatch")
    gens = []
    for Xi in F.generators:
        for j in range(F.dim):
            lin = Polynomial.variable(F.dim, j) - Polynomial.constant(F.dim, a[j])
            gens.append([comp * lin for comp in Xi.components])
    return gens


def ideal_module_basis(F: FoliationPresentation, x) -> modgb.ModuleBasis:
    return modgb.ModuleBasis(ideal_module_generators(F, x))


def module_membership(F: FoliationPresentation, V: PolyVectorField, x) -> bool:
    """Decide V in I_x F for the presented module, by Groebner normal form."""
    if V.ambient_dim != F.dim:
        raise ValueError("field dimension mismatch")
    return ideal_module_basis(F, x).contains(list(V.components))


def module_membership_bounded(
    F: FoliationPresentation, V: PolyVectorField, x, degree_bound: int = 6
) -> bool:
    """Degree-bounded dense oracle for the same membership question."""
    gens = ideal_module_generators(F, x)
    return modgb.bounded_membership(gens, list(V.components), degree_bound) is not None


def submodule_membership(
    generators: Sequence[PolyVectorField], V: PolyVectorField, cofactors: bool = False
):
    """Membership of V in the plain submodule <generators>, optionally with cofactors."""
    basis = modgb.ModuleBasis([list(g.components) for g in generators], track_cofactors=cofactors)
    if not cofactors:
        return basis.contains(list(V.components))
    return basis.cofactors(list(V.components))


@dataclass
class FiberVector:
    """The class of sum_i coeffs_i X_i in A(F)_base, stored by its coefficients."""

    foliation: FoliationPresentation
    base: tuple
    coeffs: tuple


@dataclass
class FiberBasisReport:
    base: tuple
    dimension: int
    kernel_basis: list[list[Fraction]]
    minimal_generator_indices: list[int]


def fiber_kernel(F: FoliationPresentation, x) -> list[list[Fraction]]:
    """Basis of {c in Q^q : sum c_i X_i in I_x F}, via normal forms.

    The normal form against a fixed Groebner basis is Q-linear, so the kernel
    is the nullspace of the map c -> NF(sum c_i X_i) written in the finitely
    many (position, monomial) pairs that occur.
    """
    basis = ideal_module_basis(F, x)
    nfs = [basis.normal_form(list(g.components)) for g in F.generators]
    coords: dict[tuple[int, tuple], int] = {}
    for nf in nfs:
        for pos, p in enumerate(nf):
            for e in p.terms:
                coords.setdefault((pos, e), len(coords))
    if not coords:
        # every generator reduces to zero: the kernel is all of Q^q
        return [[Fraction(1 if i == j else 0) for j in range(F.q)] for i in range(F.q)]
    rows = [[Fraction(0)] * F.q for _ in range(len(coords))]
    for i, nf in enumerate(nfs):
        for pos, p in enumerate(nf):
            for e, c in p.terms.items():
                rows[coords[(pos, e)]][i] = c
    return modgb.nullspace(rows, F.q)


def fiber_dimension(F: FoliationPresentation, x) -> int:
    return F.q - len(fiber_kernel(F, x))


def minimal_generators(F: FoliationPresentation, x) -> FiberBasisReport:
    """Pick the lexicographically first generator subset whose classes are a basis."""
    kernel = fiber_kernel(F, x)
    dim = F.q - len(kernel)
    # classes of e_i modulo span(kernel): select independent columns greedily
    # complement test: e_i independent of chosen + kernel
    chosen: list[int] = []
    for i in range(F.q):
        if len(chosen) == dim:
            break
        rows = [list(v) for v in kernel]
        for c in chosen:
            e = [Fraction(0)] * F.q
            e[c] = Fraction(1)
            rows.append(e)
        e = [Fraction(0)] * F.q
        e[i] = Fraction(1)
        rows.append(e)
        work = [list(r) for r in rows]
        before = len(modgb.rref([list(r) for r in rows[:-1]])) if rows[:-1] else 0
        after = len(modgb.rref(work))
        if after > before:
            chosen.append(i)
    return FiberBasisReport(
        base=_require_rational(x),
        dimension=dim,
        kernel_basis=kernel,
        minimal_generator_indices=chosen,
    )


def evaluate(F: FoliationPresentation, coeffs, x) -> FiberVector:
    """The class ev_x(sum_i coeffs_i X_i) in A(F)_x."""
    pt = _require_rational(x)
    coeffs = tuple(coeffs)
    if len(coeffs) != F.q:
        raise ValueError("coefficient vector has wrong length")
    return FiberVector(foliation=F, base=pt, coeffs=coeffs)


def fiber_vectors_equal(v: FiberVector, w: FiberVector, tol: float = 0.0) -> bool:
    """Equality of classes: the coefficient difference lies in the fiber kernel."""
    if v.foliation is not w.foliation or v.base != w.base:
        return False
    diff = [a - b for a, b in zip(v.coeffs, w.coeffs)]
    return coeffs_in_kernel(v.foliation, diff, v.base, tol=tol)


def coeffs_in_kernel(F: FoliationPresentation, coeffs, x, tol: float = 0.0) -> bool:
    """Is the constant-coefficient combination in I_x F?  Exact for rational coeffs."""
    kernel = fiber_kernel(F, x)
    if all(isinstance(c, (int, Fraction)) for c in coeffs):
        rows = [list(v) for v in kernel]
        rows_t = [[row[i] for row in rows] for i in range(F.q)] if rows else [[] for _ in range(F.q)]
        if not rows:
            return all(c == 0 for c in coeffs)
        sol = modgb.solve_exact(rows_t, [Fraction(c) for c in coeffs])
        return sol is not None
    return kernel_distance(F, coeffs, x, kernel=kernel) <= tol


def kernel_distance(F: FoliationPresentation, coeffs, x, kernel=None) -> float:
    """Euclidean distance from a float coefficient vector to span(kernel)."""
    if kernel is None:
        kernel = fiber_kernel(F, x)
    c = np.asarray([float(v) for v in coeffs])
    if not kernel:
        return float(np.linalg.norm(c))
    K = np.asarray([[float(v) for v in row] for row in kernel]).T  # (q, k)
    proj, *_ = np.linalg.lstsq(K, c, rcond=None)
    return float(np.linalg.norm(c - K @ proj))


def anchor(F: FoliationPresentation, v: FiberVector) -> np.ndarray:
    """rho(ev_x(X)) = X(x): evaluate the representative at the base point."""
    base = np.array([float(b) for b in v.base])
    out = np.zeros(F.dim)
    for c, g in zip(v.coeffs, F.generators):
        out += float(c) * g.eval(base)
    return out


def nakayama_consistent(
    F: FoliationPresentation, x, report: FiberBasisReport | None = None, radius: Fraction = Fraction(1, 10)
) -> bool:
    """Do the selected minimal generators span the distribution on a rational sample near x?"""
    report = report or minimal_generators(F, x)
    base = _require_rational(x)
    offsets = [tuple(Fraction(0) for _ in range(F.dim))]
    for j in range(F.dim):
        for s in (radius, -radius):
            off = [Fraction(0)] * F.dim
            off[j] = s
            offsets.append(tuple(off))
    for off in offsets:
        y = [float(b + o) for b, o in zip(base, off)]
        all_vecs = F.generator_matrix(y)
        sel = all_vecs[report.minimal_generator_indices] if report.minimal_generator_indices else np.zeros((0, F.dim))
        if matrix_rank(np.vstack([sel, all_vecs]) if sel.size else all_vecs) != matrix_rank(sel):
            return False
    return True
