"""Paths tangent to a foliation: concatenation, variations, the complement
field of a variation, and the homotopy test.

The concatenation of (X, p) then (Y, q) uses one fixed reparameterization r
(flat on the outer tenths) through the formula

    (Y . X)(t) = 2 r'(2t)   X(r(2t))      on [0, 1/2]
               = 2 r'(2t-1) Y(r(2t-1))    on (1/2, 1]

assembled exactly on the coefficient curves; the glued base curve is
re-integrated and checked against the formula.  The complement of a variation
is the variation-of-parameters integral

    Y(t,s) = (Phi^{t,s})_* int_0^t (Phi^{u,s})_*^{-1} (dX/ds)(u,s) du

evaluated by Gauss-Legendre quadrature per panel on top of the variational
Jacobians, with an exact coefficient-transport route when the structure
functions and coefficients are spatially constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .fiber import kernel_distance
from .foliation import FoliationPresentation
from .flow import (
    DEFAULT_TOL,
    IntegralCurve,
    TimeDependentElement,
    integrate_curve,
    integrate_ode,
    integrate_with_jacobian,
    matrix_exponential,
    split_state,
)
from .poly import Polynomial
from .timecurves import REPARAM, CoefficientCurve, as_curve

TAU_PT = 1e-7
TAU_MEM = 1e-6
BALL_RADIUS = 0.05
BALL_COUNT = 60
GRID_T = 33
GRID_S = 17


class FPath:
    """A time-dependent element together with one of its integral curves."""

    def __init__(self, element: TimeDependentElement, curve: IntegralCurve, tol: float = DEFAULT_TOL):
        self.element = element
        self.curve = curve
        self.tol = tol

    @property
    def foliation(self) -> FoliationPresentation:
        return self.element.foliation

    @property
    def source(self) -> np.ndarray:
        return self.curve.source

    @property
    def target(self) -> np.ndarray:
        return self.curve.target

    def point(self, t: float) -> np.ndarray:
        return self.curve.point(t)

    def flow_images(self, points, with_jacobian: bool = False, tol: float | None = None):
        """Time-1 flow of the element applied to arbitrary points."""
        from .flow import flow_map

        res = flow_map(self.element, 1.0, points, tol=tol or self.tol)
        return (res.images, res.jacobians) if with_jacobian else res.images

    def __repr__(self):
        s = np.array2string(self.source, precision=4)
        t = np.array2string(self.target, precision=4)
        return f"FPath({self.foliation!r}, {s} -> {t})"


def make_fpath(F: FoliationPresentation, coeffs: Sequence, x0, tol: float = DEFAULT_TOL) -> FPath:
    element = TimeDependentElement(F, coeffs)
    curve = integrate_curve(element, x0, tol=tol)
    return FPath(element, curve, tol=tol)


def zero_path(F: FoliationPresentation, x0, tol: float = DEFAULT_TOL) -> FPath:
    return make_fpath(F, [0] * F.q, x0, tol=tol)


# ---------------------------------------------------------------- concatenation


def _concat_curve(cX: CoefficientCurve, cY: CoefficientCurve) -> CoefficientCurve:
    """Assemble the coefficient curve of the concatenation, exactly."""
    n = cX.space_dim
    t_axis = n
    zero = Polynomial.zero(n + 1)
    breakpoints: list = [Fraction(0)]
    pieces: list[Polynomial] = []

    for half, src in ((0, cX), (1, cY)):
        shift = Fraction(half, 2)
        # sigma(t) = r(2t - half); the required factor 2 r'(2t - half) is d sigma / dt
        sigma, dsigma = REPARAM.scaled_mid(2, -half)
        sigma_j = sigma.promote(n + 1, offset=n)
        factor_j = dsigma.promote(n + 1, offset=n)
        lo = shift + Fraction(1, 20)
        hi = shift + Fraction(9, 20)
        # flat lead-in: r' = 0
        breakpoints.append(lo)
        pieces.append(zero)
        # middle window, split at preimages of the source curve's breakpoints
        cuts: list = [lo]
        for b in src.breakpoints[1:-1]:
            fb = float(b)
            if 0.0 < fb < 1.0:
                cuts.append((REPARAM.invert(fb) + half) / 2)
        cuts.append(hi)
        for a, b in zip(cuts, cuts[1:]):
            if float(b) - float(a) <= 1e-15:
                continue
            mid_t = (float(a) + float(b)) / 2
            src_piece = src.pieces[src.piece_index(REPARAM.value(2 * mid_t - half))]
            pieces.append(src_piece.substitute(t_axis, sigma_j) * factor_j)
            breakpoints.append(b)
        # flat tail
        breakpoints.append(shift + Fraction(1, 2))
        pieces.append(zero)
    return CoefficientCurve(n, breakpoints, pieces)


def concatenate(Q: FPath, P: FPath, tau_pt: float = TAU_PT, tol: float | None = None) -> FPath:
    """The concatenation Q after P (sources and targets chained as flows compose)."""
    if P.foliation is not Q.foliation and P.foliation.generators != Q.foliation.generators:
        raise ValueError("paths live on different presentations")
    gap = float(np.linalg.norm(P.target - Q.source))
    if gap > tau_pt:
        raise ValueError(f"endpoint mismatch: |P.target - Q.source| = {gap:.3e} > {tau_pt}")
    tol = tol or min(P.tol, Q.tol)
    F = P.foliation
    coeffs = [_concat_curve(cx, cy) for cx, cy in zip(P.element.coeffs, Q.element.coeffs)]
    element = TimeDependentElement(F, coeffs)
    curve = integrate_curve(element, P.source, tol=tol)
    # check against the glued curve from the displayed formula
    for t in np.linspace(0.0, 1.0, 17):
        if t <= 0.5:
            ref = P.curve.point(REPARAM.value(2 * t))
        else:
            ref = Q.curve.point(REPARAM.value(2 * t - 1))
        err = float(np.linalg.norm(curve.point(t) - ref))
        if err > max(200 * tol, 1e-8) + gap:
            raise RuntimeError(f"concatenated curve deviates from the glued curve by {err:.3e} at t={t}")
    return FPath(element, curve, tol=tol)


def reverse(P: FPath) -> FPath:
    """The reversed path, running the element backwards: -X(1-t)."""
    element = P.element.reversed()
    curve = integrate_curve(element, P.target, tol=P.tol)
    return FPath(element, curve, tol=P.tol)


# ---------------------------------------------------------------- variations


class Variation:
    """A two-parameter family c_i(x,t,s) = sum_k s^k * powers[k][i], fixed start point."""

    def __init__(
        self,
        F: FoliationPresentation,
        s_power_coeffs: Sequence[Sequence],
        x0,
        tol: float = DEFAULT_TOL,
    ):
        self.foliation = F
        self.powers = [[as_curve(c, F.dim) for c in row] for row in s_power_coeffs]
        for row in self.powers:
            if len(row) != F.q:
                raise ValueError("each s-power row needs one curve per generator")
        self.x0 = np.asarray(x0, dtype=float)
        self.tol = tol
        self._paths: dict[Fraction, FPath] = {}

    @classmethod
    def from_pair(cls, F, coeffs0: Sequence, coeffs1: Sequence, x0, tol: float = DEFAULT_TOL):
        """Linear interpolation in s between two coefficient rows (Claim-2 form)."""
        c0 = [as_curve(c, F.dim) for c in coeffs0]
        c1 = [as_curve(c, F.dim) for c in coeffs1]
        return cls(F, [c0, [b - a for a, b in zip(c0, c1)]], x0, tol=tol)

    @classmethod
    def constant(cls, P: FPath):
        return cls(P.foliation, [P.element.coeffs], P.source, tol=P.tol)

    def coeffs_at(self, s: Fraction) -> list[CoefficientCurve]:
        out = []
        for i in range(self.foliation.q):
            acc = self.powers[0][i]
            sk = Fraction(1)
            for row in self.powers[1:]:
                sk = sk * Fraction(s)
                acc = acc + row[i].scale(sk)
            out.append(acc)
        return out

    def ds_coeffs_at(self, s: Fraction) -> list[CoefficientCurve]:
        out = []
        for i in range(self.foliation.q):
            acc = CoefficientCurve.constant(self.foliation.dim, 0)
            sk = Fraction(1)
            for k, row in enumerate(self.powers[1:], start=1):
                acc = acc + row[i].scale(k * sk)
                sk = sk * Fraction(s)
            out.append(acc)
        return out

    def element_at(self, s: Fraction) -> TimeDependentElement:
        return TimeDependentElement(self.foliation, self.coeffs_at(s))

    def ds_element_at(self, s: Fraction) -> TimeDependentElement:
        return TimeDependentElement(self.foliation, self.ds_coeffs_at(s))

    def path_at(self, s: Fraction) -> FPath:
        s = Fraction(s)
        if s not in self._paths:
            element = self.element_at(s)
            self._paths[s] = FPath(element, integrate_curve(element, self.x0, tol=self.tol), tol=self.tol)
        return self._paths[s]

    def s_grid(self, n_s: int = GRID_S) -> list[Fraction]:
        return [Fraction(j, n_s - 1) for j in range(n_s)]

    def is_spatially_constant(self) -> bool:
        return all(c.is_spatially_constant() for row in self.powers for c in row)


def interpolate_paths(P0: FPath, P1: FPath, tau_pt: float = TAU_PT) -> Variation:
    """Linear-in-s interpolation of two paths sharing one base curve."""
    if P0.foliation is not P1.foliation and P0.foliation.generators != P1.foliation.generators:
        raise ValueError("paths live on different presentations")
    ts = np.linspace(0.0, 1.0, 33)
    dev = max(float(np.linalg.norm(P0.point(t) - P1.point(t))) for t in ts)
    if dev > tau_pt:
        raise ValueError(f"base curves differ by {dev:.3e} > {tau_pt}")
    return Variation.from_pair(
        P0.foliation,
        P0.element.coeffs,
        P1.element.coeffs,
        P0.source,
        tol=min(P0.tol, P1.tol),
    )


# ---------------------------------------------------------------- the complement


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


def _quadrature_panels(t_grid: np.ndarray, extra_cuts) -> list[tuple[float, float]]:
    cuts = sorted(set(float(t) for t in t_grid) | {c for c in extra_cuts if 0.0 < c < 1.0})
    return list(zip(cuts, cuts[1:]))


def _complement_along(element, ds_element, x0, tol, t_grid):
    """Cumulative variation-of-parameters integral along one trajectory.

    Returns (curve, w) where curve is the joint (x, J) trajectory and w[m] is
    int_0^{t_m} J(u)^{-1} (dX/ds)(u, x(u)) du on the t grid.
    """
    d = element.foliation.dim
    curve = integrate_with_jacobian(element, x0, tol=tol)
    panels = _quadrature_panels(t_grid, ds_element.breakpoints())
    w = np.zeros((len(t_grid), d))
    acc = np.zeros(d)
    grid_pos = {float(t): m for m, t in enumerate(t_grid)}
    if 0.0 in grid_pos:
        w[grid_pos[0.0]] = acc
    for a, b in panels:
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        for node, weight in zip(_GL_NODES, _GL_WEIGHTS):
            u = mid + half * node
            x, J = split_state(curve(u), d)
            acc = acc + weight * half * np.linalg.solve(J, ds_element.rhs(u, x))
        if b in grid_pos:
            w[grid_pos[b]] = acc
    return curve, w


@dataclass
class ComplementField:
    """The complement of a variation on a tensor grid, with per-backend data."""

    variation: Variation
    t_grid: np.ndarray
    s_grid: list
    base_values: np.ndarray          # (n_s, n_t, d): Y(t,s) at p(t,s)
    class_coeffs: np.ndarray | None  # (n_s, n_t, q) against the generators, or None
    _per_s: list = field(default_factory=list, repr=False)

    def endpoint_value_norms(self) -> np.ndarray:
        return np.linalg.norm(self.base_values[:, -1, :], axis=1)

    def endpoint_class_norms(self) -> np.ndarray | None:
        if self.class_coeffs is None:
            return None
        return np.linalg.norm(self.class_coeffs[:, -1, :], axis=1)

    def endpoint(self, s_index: int) -> np.ndarray:
        return self._per_s[s_index]["curve"].point(1.0)

    def endpoint_ball(self, s_index: int, radius: float = BALL_RADIUS, count: int = BALL_COUNT):
        """Y(1,s) evaluated at the flow images of a quasi-random ball around p(0)."""
        data = self._per_s[s_index]
        if "ball" not in data:
            element = data["element"]
            ds_element = data["ds_element"]
            sources = self.variation.x0 + ball_samples(self.variation.foliation.dim, radius, count)
            pts = np.empty_like(sources)
            vals = np.empty_like(sources)
            for m, x0 in enumerate(sources):
                curve, w = _complement_along(element, ds_element, x0, self.variation.tol, np.array([0.0, 1.0]))
                x, J = split_state(curve(1.0), self.variation.foliation.dim)
                pts[m] = x
                vals[m] = J @ w[-1]
            data["ball"] = (pts, vals)
        return data["ball"]


def ball_samples(dim: int, radius: float, count: int) -> np.ndarray:
    """Deterministic quasi-random points in the ball of the given radius."""
    sampler = qmc.Halton(d=dim, scramble=False)
    out = []
    while len(out) < count:
        block = 2.0 * sampler.random(2 * count) - 1.0
        for v in block:
            if np.dot(v, v) <= 1.0 and np.dot(v, v) > 0:
                out.append(v)
                if len(out) == count:
                    break
    return radius * np.array(out)


def complement(
    V: Variation,
    n_t: int = GRID_T,
    n_s: int = GRID_S,
    tol: float | None = None,
) -> ComplementField:
    """Evaluate the complement of a variation on an (n_t x n_s) grid."""
    tol = tol or V.tol
    F = V.foliation
    d, q = F.dim, F.q
    t_grid = np.linspace(0.0, 1.0, n_t)
    s_grid = V.s_grid(n_s)
    coeff_route = V.is_spatially_constant() and F.certificate.spatially_constant()

    base_values = np.zeros((n_s, n_t, d))
    class_coeffs = np.zeros((n_s, n_t, q)) if coeff_route else None
    per_s = []
    for si, s in enumerate(s_grid):
        element = V.element_at(s)
        ds_element = V.ds_element_at(s)
        curve, w = _complement_along(element, ds_element, V.x0, tol, t_grid)
        for m, t in enumerate(t_grid):
            x, J = split_state(curve(t), d)
            base_values[si, m] = J @ w[m]
        entry = {"element": element, "ds_element": ds_element, "curve": curve, "w": w}
        if coeff_route:
            class_coeffs[si] = _transport_class_coeffs(element, ds_element, t_grid, tol)
        per_s.append(entry)
    return ComplementField(
        variation=V,
        t_grid=t_grid,
        s_grid=s_grid,
        base_values=base_values,
        class_coeffs=class_coeffs,
        _per_s=per_s,
    )


def _transport_class_coeffs(element, ds_element, t_grid, tol) -> np.ndarray:
    """Generator-coordinate complement via the transport ODE dT/dt = T A(t).

    Valid when structure functions and coefficients are spatially constant:
    w(t) = int_0^t T(u) c'(u) du and the class coefficients are T(t)^{-1} w(t).
    """
    q = element.foliation.q

    def rhs(t, y):
        T = y[:q * q].reshape(q, q)
        A = element.structure_matrix(t)
        dsc = np.array([c.eval_scalar(t) for c in ds_element.coeffs])
        return np.concatenate([(T @ A).ravel(), T @ dsc])

    y0 = np.concatenate([np.eye(q).ravel(), np.zeros(q)])
    sol = integrate_ode(rhs, y0, element.breakpoints(), tol=tol)
    out = np.zeros((len(t_grid), q))
    for m, t in enumerate(t_grid):
        y = sol(t)
        T = y[:q * q].reshape(q, q)
        out[m] = np.linalg.solve(T, y[q * q:])
    return out


def linear_complement_matrix(V: Variation, s: Fraction, t: float = 1.0, nodes: int = 48) -> np.ndarray:
    """Exact-route complement for linear presentations with constant-in-t coefficients.

    Y(t,s) is the linear field with matrix
        Phi(t) [ int_0^t Phi(u)^{-1} (d_s A)(u) Phi(u) du ] Phi(t)^{-1},
    with Phi(u) = exp(u A(s)) from the matrix exponential subengine.
    """
    F = V.foliation
    mats = np.array(F.linear_matrices())
    c = V.element_at(s).constant_values()
    dc = V.ds_element_at(s).constant_values()
    if c is None or dc is None:
        raise ValueError("linear complement route needs constant-in-t coefficients")
    A = np.einsum("i,ijk->jk", np.array([float(v) for v in c]), mats)
    dA = np.einsum("i,ijk->jk", np.array([float(v) for v in dc]), mats)
    glx, glw = np.polynomial.legendre.leggauss(nodes)
    acc = np.zeros_like(A)
    half, mid = t / 2.0, t / 2.0
    for node, weight in zip(glx, glw):
        u = mid + half * node
        E = matrix_exponential(A, u)
        Einv = matrix_exponential(A, -u)
        acc = acc + weight * half * (Einv @ dA @ E)
    Et = matrix_exponential(A, t)
    Etinv = matrix_exponential(A, -t)
    return Et @ acc @ Etinv


# ---------------------------------------------------------------- homotopy test


@dataclass
class HomotopyReport:
    ok: bool
    residuals: list
    backend: str
    rank_deficient: bool = False


def membership_fit(
    F: FoliationPresentation,
    points: np.ndarray,
    values: np.ndarray,
    center: np.ndarray,
    degree: int = 2,
):
    """Least-squares fit values ~ sum_i f_i X_i with f_i(center) = 0, deg f_i <= degree.

    Returns (relative_residual, rank_deficient).
    """
    d = F.dim
    monos: list[tuple[int, ...]] = []

    def rec(prefix, remaining, slots):
        if slots == 0:
            if sum(prefix) >= 1:
                monos.append(tuple(prefix))
            return
        for k in range(remaining + 1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], degree, d)
    shifted = points - center
    mono_vals = np.array([[np.prod(z ** np.array(e)) for e in monos] for z in shifted])  # (N, M)
    gen_vals = np.array([[g.eval(z) for g in F.generators] for z in points])  # (N, q, d)
    N = len(points)
    cols = []
    for i in range(F.q):
        for mi in range(len(monos)):
            cols.append((mono_vals[:, mi, None] * gen_vals[:, i, :]).ravel())
    A = np.column_stack(cols) if cols else np.zeros((N * d, 0))
    b = values.ravel()
    scale = float(np.linalg.norm(b))
    if scale == 0.0:
        return 0.0, False
    sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    resid = float(np.linalg.norm(A @ sol - b)) / scale
    return resid, rank < A.shape[1]


def is_homotopy(
    V: Variation,
    tau_mem: float = TAU_MEM,
    comp: ComplementField | None = None,
    n_t: int = GRID_T,
    n_s: int = GRID_S,
) -> HomotopyReport:
    """Does the complement satisfy Y(1,s) in I_{p(1,s)} F for every grid s?"""
    comp = comp or complement(V, n_t=n_t, n_s=n_s)
    F = V.foliation
    residuals = []
    rank_flag = False
    backend = "coefficient" if comp.class_coeffs is not None else "sampled"
    for si in range(len(comp.s_grid)):
        endpoint = comp.endpoint(si)
        if comp.class_coeffs is not None:
            y = comp.class_coeffs[si, -1]
            norm_y = float(np.linalg.norm(y))
            if norm_y <= tau_mem:
                residuals.append(norm_y)
                continue
            anchor_val = np.zeros(F.dim)
            for c, g in zip(y, F.generators):
                anchor_val += c * g.eval(endpoint)
            if float(np.linalg.norm(anchor_val)) > tau_mem:
                residuals.append(float(np.linalg.norm(anchor_val)))
                continue
            # anchor vanishes but the coefficients do not: decide by distance
            # to the fiber kernel at a nearby rational point when available
            rk = kernel_distance(F, y, [Fraction(v).limit_denominator(10**9) for v in endpoint])
            residuals.append(rk)
            continue
        pts, vals = comp.endpoint_ball(si)
        resid, deficient = membership_fit(F, pts, vals, endpoint)
        rank_flag = rank_flag or deficient
        residuals.append(resid)
    ok = all(r <= tau_mem for r in residuals)
    return HomotopyReport(ok=ok, residuals=residuals, backend=backend, rank_deficient=rank_flag)
