"""Groebner bases for submodules of the free module Q[x_1..x_n]^m.

Module elements are lists of Polynomial (one per free-module position).
The monomial order is position-over-term: e_0 > e_1 > ... dominates, with
graded lexicographic order on the scalar monomials inside a position.  This
is all that is needed to decide membership in I_x * <X_1..X_q> and in plain
generated submodules; sizes here are tiny, so plain Buchberger with full
normal forms is plenty.

Cofactor tracking keeps, for every basis element, its expression in the
original generators, so a successful reduction to zero yields an explicit
certificate V = sum_r h_r * G_r.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from .poly import Polynomial, grlex_key

ModuleElement = list[Polynomial]


def _dims(element: Sequence[Polynomial]) -> tuple[int, int]:
    m = len(element)
    n = element[0].ambient_dim
    return m, n


def leading_term(f: Sequence[Polynomial]):
    """((position, exponents), coefficient) maximal in POT-grlex, or None if f = 0."""
    for pos, p in enumerate(f):
        if not p.is_zero():
            e = max(p.terms, key=grlex_key)
            return (pos, e), p.terms[e]
    return None


def _divides(e1, e2) -> bool:
    return all(a <= b for a, b in zip(e1, e2))


def _quotient(e2, e1):
    return tuple(b - a for a, b in zip(e1, e2))


def _lcm(e1, e2):
    return tuple(max(a, b) for a, b in zip(e1, e2))


class ModuleBasis:
    """A Groebner basis of the submodule generated by ``generators``."""

    def __init__(self, generators: Sequence[Sequence[Polynomial]], track_cofactors: bool = False):
        self.input_gens = [list(g) for g in generators]
        nonzero = [(i, g) for i, g in enumerate(self.input_gens) if any(not p.is_zero() for p in g)]
        if not nonzero:
            raise ValueError("submodule needs at least one nonzero generator")
        self.m, self.n = _dims(nonzero[0][1])
        for _, g in nonzero:
            if _dims(g) != (self.m, self.n):
                raise ValueError("generators of mixed shape")
        self.track = track_cofactors
        self.n_gens = len(self.input_gens)
        self.basis: list[ModuleElement] = []
        self.reps: list[list[Polynomial] | None] = []
        for i, g in nonzero:
            rep = None
            if track_cofactors:
                rep = [Polynomial.zero(self.n) for _ in range(self.n_gens)]
                rep[i] = Polynomial.constant(self.n, 1)
            self._insert(g, rep)
        self._buchberger()

    # -------------------------------------------------------------- internals
    def _insert(self, f: ModuleElement, rep):
        lt = leading_term(f)
        assert lt is not None
        inv = Fraction(1) / lt[1]
        self.basis.append([p * inv for p in f])
        self.reps.append([p * inv for p in rep] if rep is not None else None)

    def _divide(self, f: Sequence[Polynomial]):
        """Multivariate division: f = (used . G_orig) + remainder.

        Returns (remainder, used) where used is the cofactor row against the
        ORIGINAL generators (None unless tracking).
        """
        work = [Polynomial(self.n, dict(p.terms)) for p in f]
        remainder = [Polynomial.zero(self.n) for _ in range(self.m)]
        used = [Polynomial.zero(self.n) for _ in range(self.n_gens)] if self.track else None
        while True:
            lt = leading_term(work)
            if lt is None:
                break
            (pos, e), c = lt
            hit = None
            for g, grep in zip(self.basis, self.reps):
                (gpos, ge), _ = leading_term(g)
                if gpos == pos and _divides(ge, e):
                    hit = (g, grep, _quotient(e, ge))
                    break
            if hit is None:
                mono = Polynomial.monomial(self.n, e, c)
                work[pos] = work[pos] - mono
                remainder[pos] = remainder[pos] + mono
            else:
                g, grep, q = hit
                work = [wp - gp.mul_term(q, c) for wp, gp in zip(work, g)]
                if used is not None and grep is not None:
                    used = [up + rp.mul_term(q, c) for up, rp in zip(used, grep)]
        return remainder, used

    def _buchberger(self):
        pairs = [(i, j) for i in range(len(self.basis)) for j in range(i)]
        while pairs:
            i, j = pairs.pop()
            fi, fj = self.basis[i], self.basis[j]
            (pi, ei), _ = leading_term(fi)
            (pj, ej), _ = leading_term(fj)
            if pi != pj:
                continue  # S-vectors only make sense in a common position
            L = _lcm(ei, ej)
            qi, qj = _quotient(L, ei), _quotient(L, ej)
            s = [a.mul_term(qi, Fraction(1)) - b.mul_term(qj, Fraction(1)) for a, b in zip(fi, fj)]
            r, used = self._divide(s)
            if any(not p.is_zero() for p in r):
                rep = None
                if self.track:
                    rep_s = [a.mul_term(qi, Fraction(1)) - b.mul_term(qj, Fraction(1))
                             for a, b in zip(self.reps[i], self.reps[j])]
                    rep = [a - b for a, b in zip(rep_s, used)]
                k = len(self.basis)
                self._insert(r, rep)
                pairs.extend((k, t) for t in range(k))

    # -------------------------------------------------------------- public api
    def normal_form(self, f: Sequence[Polynomial]) -> ModuleElement:
        r, _ = self._divide(list(f))
        return r

    def contains(self, f: Sequence[Polynomial]) -> bool:
        return all(p.is_zero() for p in self.normal_form(f))

    def cofactors(self, f: Sequence[Polynomial]):
        """If f is in the submodule, return h with f = sum h_r * G_r, else None."""
        if not self.track:
            raise ValueError("basis was built without cofactor tracking")
        r, used = self._divide(list(f))
        if any(not p.is_zero() for p in r):
            return None
        return used

    def max_degree(self) -> int:
        return max(p.total_degree() for g in self.basis for p in g)


# ---------------------------------------------------------------- exact linear algebra


def rref(rows: list[list[Fraction]]):
    """Reduced row echelon form in place; returns pivot column list."""
    if not rows:
        return []
    ncols = len(rows[0])
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = Fraction(1) / rows[r][c]
        rows[r] = [v * inv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return pivots


def nullspace(rows: list[list[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of the kernel of the matrix (rows of Fractions) acting on Q^ncols."""
    work = [list(row) for row in rows]
    pivots = rref(work)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for r, pc in enumerate(pivots):
            v[pc] = -work[r][fc]
        basis.append(v)
    return basis


def solve_exact(rows: list[list[Fraction]], rhs: list[Fraction]):
    """One exact solution of A x = b, or None when inconsistent."""
    if not rows:
        return [] if all(v == 0 for v in rhs) else None
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    ncols = len(rows[0])
    pivots = rref(aug)
    if ncols in pivots:
        return None  # pivot in the augmented column
    x = [Fraction(0)] * ncols
    for r, c in enumerate(pivots):
        x[c] = aug[r][ncols]
    return x


def bounded_membership(
    generators: Sequence[Sequence[Polynomial]],
    target: Sequence[Polynomial],
    degree_bound: int,
):
    """Dense degree-bounded solve of  target = sum_r f_r * G_r,  deg f_r <= bound.

    Independent of the Groebner route: sets up one exact linear system over Q in
    the coefficients of the f_r and solves it by fraction elimination.  Returns
    the list of cofactor polynomials or None when no solution exists within the
    bound.  Complete only up to the bound.
    """
    m, n = _dims(list(generators[0]))
    monos = _monomials_up_to(n, degree_bound)
    col_index = {}
    cols = []
    for r, _ in enumerate(generators):
        for e in monos:
            col_index[(r, e)] = len(cols)
            cols.append((r, e))
    row_index: dict[tuple[int, tuple], int] = {}
    rows: list[dict[int, Fraction]] = []

    def row_of(pos, e):
        key = (pos, e)
        if key not in row_index:
            row_index[key] = len(rows)
            rows.append({})
        return row_index[key]

    for (r, e), ci in col_index.items():
        for pos, comp in enumerate(generators[r]):
            for ge, gc in comp.terms.items():
                te = tuple(a + b for a, b in zip(ge, e))
                ri = row_of(pos, te)
                rows[ri][ci] = rows[ri].get(ci, Fraction(0)) + gc
    rhs_map: dict[int, Fraction] = {}
    for pos, comp in enumerate(target):
        for te, tc in comp.terms.items():
            rhs_map[row_of(pos, te)] = tc
    dense = [[row.get(ci, Fraction(0)) for ci in range(len(cols))] for row in rows]
    rhs = [rhs_map.get(i, Fraction(0)) for i in range(len(rows))]
    sol = solve_exact(dense, rhs)
    if sol is None:
        return None
    out = []
    for r, _ in enumerate(generators):
        p = Polynomial.zero(n)
        for e in monos:
            c = sol[col_index[(r, e)]]
            if c != 0:
                p = p + Polynomial.monomial(n, e, c)
        out.append(p)
    return out


def _monomials_up_to(n: int, d: int) -> list[tuple[int, ...]]:
    out: list[tuple[int, ...]] = []

    def rec(prefix, remaining, slots):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], d, n)
    return out
