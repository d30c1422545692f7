"""Flows of time-dependent foliation elements, with variational Jacobians.

Integration is adaptive RK5(4) (scipy's RK45 with its PI step controller),
restarted at the breakpoints of the coefficient curves so each solver segment
sees a smooth right-hand side; dense output is stitched across segments.
Backward flows integrate the time-reversed field.  A small exact subengine
handles linear fields through the hand-written matrix exponential, used as an
independent oracle against the adaptive integrator.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .foliation import Chart, ChartEscapeError, FoliationPresentation
from .poly import Polynomial
from .timecurves import CoefficientCurve, as_curve

DEFAULT_TOL = 1e-10
BLOWUP_LIMIT = 1e8


class IntegrationError(RuntimeError):
    pass


# ---------------------------------------------------------------- time-dependent elements


class TimeDependentElement:
    """X(t) = sum_i c_i(., t) X_i with piecewise-polynomial coefficient curves."""

    def __init__(self, foliation: FoliationPresentation, coeffs: Sequence):
        self.foliation = foliation
        self.coeffs = [as_curve(c, foliation.dim) for c in coeffs]
        if len(self.coeffs) != foliation.q:
            raise ValueError(f"expected {foliation.q} coefficient curves, got {len(self.coeffs)}")
        self._gen_comps = [[p.compiled() for p in g.components] for g in foliation.generators]
        self._gen_jacs = [
            [[p.compiled() for p in row] for row in g.jacobian()] for g in foliation.generators
        ]
        self._coeff_grads = [
            [c.partial_space(ax) for ax in range(foliation.dim)] for c in self.coeffs
        ]

    # constructors
    @classmethod
    def constant(cls, F: FoliationPresentation, values: Sequence) -> "TimeDependentElement":
        return cls(F, [as_curve(v if isinstance(v, (int, Fraction)) else Fraction(v), F.dim) for v in values])

    @classmethod
    def zero(cls, F: FoliationPresentation) -> "TimeDependentElement":
        return cls(F, [0] * F.q)

    def is_spatially_constant(self) -> bool:
        return all(c.is_spatially_constant() for c in self.coeffs)

    def constant_values(self):
        """Coefficient vector when every curve is a constant; None otherwise."""
        vals = []
        for c in self.coeffs:
            polys = c.pieces
            first = polys[0]
            if not all(p == first for p in polys) or not first.is_constant():
                return None
            vals.append(first.constant_value())
        return vals

    def breakpoints(self) -> list[float]:
        pts = {0.0, 1.0}
        for c in self.coeffs:
            pts.update(float(b) for b in c.breakpoints)
        return sorted(pts)

    def coefficient_vector(self, x, t: float) -> np.ndarray:
        return np.array([c.eval(x, t) for c in self.coeffs])

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.foliation.dim)
        for c, comps in zip(self.coeffs, self._gen_comps):
            cv = c.eval(x, t)
            if cv != 0.0:
                out += cv * np.array([f(x) for f in comps])
        return out

    def jac(self, t: float, x: np.ndarray) -> np.ndarray:
        """Spatial Jacobian of the field at (t, x), including coefficient gradients."""
        d = self.foliation.dim
        x = np.asarray(x, dtype=float)
        J = np.zeros((d, d))
        for c, grads, comps, jac in zip(self.coeffs, self._coeff_grads, self._gen_comps, self._gen_jacs):
            cv = c.eval(x, t)
            vec = np.array([f(x) for f in comps])
            if cv != 0.0:
                J += cv * np.array([[jac[k][j](x) for j in range(d)] for k in range(d)])
            g = np.array([gc.eval(x, t) for gc in grads])
            if np.any(g):
                J += np.outer(vec, g)
        return J

    def field_at(self, t):
        """The element at a fixed rational time, as an exact polynomial field."""
        from .poly import PolyVectorField

        acc = PolyVectorField.zero(self.foliation.dim)
        for c, g in zip(self.coeffs, self.foliation.generators):
            acc = acc + g.scale(c.at_time(t))
        return acc

    def reversed(self) -> "TimeDependentElement":
        """The element of the reversed path: -X(1-t); exact."""
        return TimeDependentElement(self.foliation, [(-c).time_reflect() for c in self.coeffs])

    def scaled(self, a) -> "TimeDependentElement":
        return TimeDependentElement(self.foliation, [c.scale(a) for c in self.coeffs])

    def structure_matrix(self, t: float) -> np.ndarray:
        """A(t)[k, j] with [X(t), X_j] = sum_k A[k, j] X_k; needs constant structure."""
        cert = self.foliation.certificate.constant_array()
        c = np.array([cc.eval_scalar(t) for cc in self.coeffs])
        return np.einsum("i,ijk->kj", c, cert)


def timedep_structure_coeffs(X: TimeDependentElement, j: int) -> list[CoefficientCurve]:
    """Curves a^k_j with [X(t), X_j] = sum_k a^k_j(t) X_k, from the certificate."""
    F = X.foliation
    out = []
    for k in range(F.q):
        acc = CoefficientCurve.constant(F.dim, 0)
        for i in range(F.q):
            ck = F.certificate.coeffs[i][j][k]
            if not ck.is_zero():
                acc = acc + X.coeffs[i].scale(ck)
        out.append(acc)
    return out


# ---------------------------------------------------------------- dense trajectories


class IntegralCurve:
    """Dense trajectory of a (possibly augmented) ODE on [0, t_final]."""

    def __init__(self, segments, dim: int, element=None):
        self.segments = segments  # list of (t0, t1, OdeSolution)
        self.dim = dim            # physical dimension (leading components)
        self.element = element

    def __call__(self, t: float) -> np.ndarray:
        t = float(t)
        for t0, t1, sol in self.segments:
            if t <= t1 or (t0, t1, sol) is self.segments[-1]:
                if t >= t0 or (t0, t1, sol) is self.segments[0]:
                    return np.asarray(sol(min(max(t, t0), t1)))
        raise ValueError(f"time {t} outside trajectory domain")

    def point(self, t: float) -> np.ndarray:
        return self(t)[: self.dim]

    @property
    def t_final(self) -> float:
        return self.segments[-1][1]

    @property
    def source(self) -> np.ndarray:
        return self(self.segments[0][0])[: self.dim]

    @property
    def target(self) -> np.ndarray:
        return self(self.t_final)[: self.dim]

    def velocity(self, t: float) -> np.ndarray:
        if self.element is None:
            raise ValueError("no element attached")
        return self.element.rhs(t, self.point(t))

    def sample(self, ts) -> np.ndarray:
        return np.array([self.point(t) for t in ts])


def _chart_events(chart: Chart, dim: int):
    events = []

    def blowup(t, y):
        return BLOWUP_LIMIT - float(np.max(np.abs(y[:dim])))

    blowup.terminal = True
    events.append(blowup)
    if not chart.unbounded:
        lo = np.array(chart.lo)
        hi = np.array(chart.hi)

        def margin(t, y):
            x = y[:dim]
            return float(min(np.min(x - lo), np.min(hi - x)))

        margin.terminal = True
        events.append(margin)
    return events


def integrate_ode(
    rhs: Callable,
    y0: np.ndarray,
    breakpoints: Sequence[float],
    t_final: float = 1.0,
    tol: float = DEFAULT_TOL,
    chart: Chart | None = None,
    dim: int | None = None,
    element=None,
) -> IntegralCurve:
    """Integrate on [0, t_final], restarting at breakpoints, with chart guards."""
    y0 = np.asarray(y0, dtype=float)
    dim = dim or y0.size
    events = _chart_events(chart, dim) if chart is not None else []
    cuts = sorted({0.0, float(t_final)} | {b for b in breakpoints if 0.0 < b < t_final})
    segments = []
    y = y0
    for a, b in zip(cuts, cuts[1:]):
        res = solve_ivp(
            rhs,
            (a, b),
            y,
            method="RK45",
            rtol=tol,
            atol=tol,
            dense_output=True,
            events=events or None,
        )
        if res.status == 1:  # a terminal event fired
            t_ev = min(te[0] for te in res.t_events if len(te))
            y_ev = res.sol(t_ev)
            if chart is not None and not chart.unbounded and chart.margin(y_ev[:dim]) <= 10 * tol + 1e-12:
                raise ChartEscapeError("trajectory left the chart", t=t_ev, point=y_ev[:dim])
            raise IntegrationError(f"trajectory blow-up at t={t_ev:.6g}")
        if res.status != 0:
            raise IntegrationError(f"integration failed: {res.message}")
        segments.append((a, b, res.sol))
        y = res.y[:, -1]
    return IntegralCurve(segments, dim, element=element)


def integrate_curve(
    X: TimeDependentElement,
    x0,
    tol: float = DEFAULT_TOL,
    t_final: float = 1.0,
) -> IntegralCurve:
    """The integral curve of X through x0, as a dense trajectory on [0, t_final]."""
    x0 = np.asarray(x0, dtype=float)
    chart = X.foliation.chart
    if not chart.contains(x0):
        raise ChartEscapeError("initial point outside chart", t=0.0, point=x0)
    return integrate_ode(
        lambda t, y: X.rhs(t, y),
        x0,
        X.breakpoints(),
        t_final=t_final,
        tol=tol,
        chart=chart,
        dim=X.foliation.dim,
        element=X,
    )


def integrate_with_jacobian(
    X: TimeDependentElement,
    x0,
    tol: float = DEFAULT_TOL,
    t_final: float = 1.0,
) -> IntegralCurve:
    """Joint trajectory + variational system dJ/dt = DX(t, x) J, J(0) = I."""
    d = X.foliation.dim
    x0 = np.asarray(x0, dtype=float)

    def rhs(t, y):
        x = y[:d]
        J = y[d:].reshape(d, d)
        return np.concatenate([X.rhs(t, x), (X.jac(t, x) @ J).ravel()])

    y0 = np.concatenate([x0, np.eye(d).ravel()])
    return integrate_ode(rhs, y0, X.breakpoints(), t_final=t_final, tol=tol,
                         chart=X.foliation.chart, dim=d, element=X)


def split_state(y: np.ndarray, d: int):
    return y[:d], y[d : d + d * d].reshape(d, d)


@dataclass
class FlowResult:
    sources: np.ndarray     # (N, d)
    images: np.ndarray      # (N, d)
    jacobians: np.ndarray   # (N, d, d)
    t_final: float


def flow_map(
    X: TimeDependentElement,
    t: float,
    stencil,
    tol: float = DEFAULT_TOL,
) -> FlowResult:
    """Flow a set of points for time t, with variational Jacobians."""
    pts = np.atleast_2d(np.asarray(stencil, dtype=float))
    d = X.foliation.dim
    element = X
    if t > 1.0:
        values = X.constant_values()
        if values is None:
            raise ValueError("t > 1 is only supported for constant elements")
        element, t = TimeDependentElement.constant(X.foliation, [v * Fraction(t).limit_denominator(10**12) for v in values]), 1.0
    images = np.empty_like(pts)
    jacs = np.empty((len(pts), d, d))
    for i, p in enumerate(pts):
        curve = integrate_with_jacobian(element, p, tol=tol, t_final=t)
        x, J = split_state(curve(t), d)
        images[i] = x
        jacs[i] = J
    return FlowResult(sources=pts, images=images, jacobians=jacs, t_final=t)


def flow_point(X: TimeDependentElement, x0, tol: float = DEFAULT_TOL, t: float = 1.0) -> np.ndarray:
    return integrate_curve(X, x0, tol=tol, t_final=t).target


def pushforward(
    X: TimeDependentElement,
    t: float,
    Y,
    samples,
    tol: float = DEFAULT_TOL,
) -> np.ndarray:
    """(Phi^t_X)_* Y evaluated at the sample points.

    Computed as J(pre) Y(pre) with pre the backward flow of each sample; the
    backward flow integrates the time-reversed field rather than inverting maps.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if t != 1.0:
        values = X.constant_values()
        if values is None:
            raise ValueError("pushforward at t != 1 requires a constant element")
        X = TimeDependentElement.constant(
            X.foliation, [v * Fraction(t).limit_denominator(10**12) for v in values]
        )
    rev = X.reversed()
    d = X.foliation.dim
    out = np.empty_like(samples)
    for i, z in enumerate(samples):
        pre = flow_point(rev, z, tol=tol)
        curve = integrate_with_jacobian(X, pre, tol=tol)
        x1, J = split_state(curve(1.0), d)
        Yv = Y.eval(pre) if hasattr(Y, "eval") else np.asarray(Y(pre), dtype=float)
        out[i] = J @ Yv
    return out


def flow_constant_with_sensitivity(
    F: FoliationPresentation,
    c,
    y0,
    tol: float = DEFAULT_TOL,
):
    """Time-1 flow of sum_i c_i X_i from y0 with d/dy and d/dc derivatives.

    Returns (image, J, V) where J is the d x d variational Jacobian and V the
    d x q sensitivity dPhi/dc, from the inhomogeneous variational equations
    dv_i/dt = DX v_i + X_i(x).
    """
    d, q = F.dim, F.q
    element = TimeDependentElement.constant(F, [Fraction(v).limit_denominator(10**12) for v in c])
    gen_comps = [[p.compiled() for p in g.components] for g in F.generators]

    def rhs(t, y):
        x = y[:d]
        J = y[d : d + d * d].reshape(d, d)
        V = y[d + d * d :].reshape(d, q)
        DX = element.jac(t, x)
        G = np.column_stack([np.array([f(x) for f in comps]) for comps in gen_comps])
        return np.concatenate([element.rhs(t, x), (DX @ J).ravel(), (DX @ V + G).ravel()])

    y0 = np.concatenate([np.asarray(y0, dtype=float), np.eye(d).ravel(), np.zeros(d * q)])
    curve = integrate_ode(rhs, y0, element.breakpoints(), tol=tol, chart=F.chart, dim=d)
    yf = curve(1.0)
    return yf[:d], yf[d : d + d * d].reshape(d, d), yf[d + d * d :].reshape(d, q)


# ---------------------------------------------------------------- exact linear subengine


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """Scaling-and-squaring Taylor evaluation of exp(t A) to ~1e-14 relative."""
    A = np.array([[float(v) for v in row] for row in A], dtype=float) * float(t)
    n = A.shape[0]
    nrm = np.linalg.norm(A, 1)
    s = 0 if nrm <= 0.25 else int(np.ceil(np.log2(nrm / 0.25)))
    M = A / (2.0 ** s)
    E = np.eye(n)
    term = np.eye(n)
    for k in range(1, 30):
        term = term @ M / k
        E = E + term
        if np.max(np.abs(term)) < 1e-20:
            break
    for _ in range(s):
        E = E @ E
    return E


class LinearEngine:
    """Closed-form flows for presentations whose generators are linear fields."""

    def __init__(self, F: FoliationPresentation):
        self.foliation = F
        self.matrices = F.linear_matrices()

    def field_matrix(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        return np.einsum("i,ijk->jk", c, np.array(self.matrices))

    def flow_matrix(self, coeffs, t: float = 1.0) -> np.ndarray:
        return matrix_exponential(self.field_matrix(coeffs), t)

    def pushforward_matrix(self, coeffs, B, t: float = 1.0) -> np.ndarray:
        """exp(tA) B exp(-tA) for the field x -> Bx under the flow of x -> Ax."""
        E = self.flow_matrix(coeffs, t)
        Einv = self.flow_matrix(coeffs, -t)
        return E @ np.asarray(B, dtype=float) @ Einv
