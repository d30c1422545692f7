"""Slices, the shooting slice correction, and truncated-jet holonomy of paths.

The holonomy of a path (X, p) is represented by the truncated Taylor jet of
Phi^1_Z o Phi^1_X restricted to a slice through p(0), where Z is a correction
field with coefficients vanishing at the target.  Equivalence of jets modulo
flows of slice-tangent elements is decided only in the regime where the slice
foliation has pointwise rank zero near the basepoint (then the quotient is
trivial); otherwise representatives are returned with an "inconclusive" tag.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .foliation import FoliationPresentation, distribution_at, matrix_rank
from .flow import DEFAULT_TOL, TimeDependentElement, integrate_ode
from .jets import TruncatedMap, chebyshev_stencil
from .paths import FPath

JET_ORDER = 2
STENCIL_SCALE = 0.1
CORRECTION_TOL = 1e-9


class SliceError(RuntimeError):
    pass


@dataclass
class Slice:
    """An affine transversal x + span(frame), frame orthonormal columns (d x c)."""

    base: np.ndarray
    frame: np.ndarray
    extent: float

    @property
    def dim(self) -> int:
        return self.frame.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.frame.shape[0]

    def embed(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return self.base + w @ self.frame.T

    def coords(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return (y - self.base) @ self.frame

    def off_slice(self, y) -> np.ndarray:
        """Components of y - base orthogonal to the slice."""
        y = np.asarray(y, dtype=float)
        delta = y - self.base
        return delta - (delta @ self.frame) @ self.frame.T

    def close_to(self, other: "Slice", tol: float = 1e-9) -> bool:
        return (
            self.frame.shape == other.frame.shape
            and float(np.max(np.abs(self.base - other.base))) <= tol
            and float(np.max(np.abs(self.frame - other.frame))) <= tol
        )


def default_slice(
    F: FoliationPresentation,
    x,
    extent: float = 0.5,
    tau_rank: float = 1e-9,
    n_check: int = 20,
) -> Slice:
    """Orthogonal complement of the distribution at x, shrunk until transversal.

    Transversality T_y M = T_y S + T_y L_y is re-checked at sample points of the
    slice; the extent is halved on failure, down to 1e-4.
    """
    x = np.asarray(x, dtype=float)
    fiber = distribution_at(F, x, tau_rank)
    d = F.dim
    r = fiber.rank
    if r == 0:
        frame = np.eye(d)
    else:
        _, _, Vt = np.linalg.svd(fiber.spanning_vectors)
        frame = Vt[r:].T  # (d, c), orthonormal columns
    c = frame.shape[1]
    if c == 0:
        return Slice(base=x, frame=np.zeros((d, 0)), extent=0.0)
    rng = np.random.default_rng(0)
    while extent >= 1e-4:
        ok = True
        for _ in range(n_check):
            w = rng.uniform(-extent, extent, size=c)
            y = x + frame @ w
            stacked = np.vstack([frame.T, F.generator_matrix(y)])
            if matrix_rank(stacked, tau_rank) < d:
                ok = False
                break
        if ok:
            return Slice(base=x, frame=frame, extent=extent)
        extent *= 0.5
    raise SliceError(f"no transversal extent >= 1e-4 at {x}")


def slice_foliation_rank_zero(F: FoliationPresentation, S: Slice, n_samples: int = 12) -> bool:
    """Pointwise shadow of F_S = 0 near the basepoint: dim(D_y ^ T_y S) = 0 on samples."""
    if S.dim == 0:
        return True
    rng = np.random.default_rng(1)
    pts = [S.base] + [S.base + S.frame @ rng.uniform(-0.5 * S.extent, 0.5 * S.extent, size=S.dim)
                      for _ in range(n_samples)]
    for y in pts:
        G = F.generator_matrix(y)
        rk_d = matrix_rank(G)
        rk_join = matrix_rank(np.vstack([G, S.frame.T]))
        if rk_d + S.dim - rk_join > 0:
            return False
    return True


# ---------------------------------------------------------------- slice correction


class CorrectionField:
    """Z = sum_i l_i(x, t) X_i with l_i(x, t) = (alpha_i + t beta_i) . (x - a).

    The coefficients vanish at the anchor point a by construction, so Z is a
    time-dependent element of I_a F for every alpha, beta.
    """

    def __init__(self, F: FoliationPresentation, anchor: np.ndarray, alpha: np.ndarray, beta=None):
        self.foliation = F
        self.anchor = np.asarray(anchor, dtype=float)
        self.alpha = np.asarray(alpha, dtype=float).reshape(F.q, F.dim)
        self.beta = None if beta is None else np.asarray(beta, dtype=float).reshape(F.q, F.dim)
        self._gen_comps = [[p.compiled() for p in g.components] for g in F.generators]
        self._gen_jacs = [[[p.compiled() for p in row] for row in g.jacobian()] for g in F.generators]

    def _rows(self, t: float) -> np.ndarray:
        return self.alpha if self.beta is None else self.alpha + t * self.beta

    def rhs(self, t: float, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        rows = self._rows(t)
        delta = x - self.anchor
        out = np.zeros(self.foliation.dim)
        for i, comps in enumerate(self._gen_comps):
            li = float(rows[i] @ delta)
            if li != 0.0:
                out += li * np.array([f(x) for f in comps])
        return out

    def jac(self, t: float, x: np.ndarray) -> np.ndarray:
        d = self.foliation.dim
        x = np.asarray(x, dtype=float)
        rows = self._rows(t)
        delta = x - self.anchor
        J = np.zeros((d, d))
        for i, (comps, jacs) in enumerate(zip(self._gen_comps, self._gen_jacs)):
            li = float(rows[i] @ delta)
            vec = np.array([f(x) for f in comps])
            if li != 0.0:
                J += li * np.array([[jacs[k][j](x) for j in range(d)] for k in range(d)])
            J += np.outer(vec, rows[i])
        return J

    def breakpoints(self):
        return [0.0, 1.0]

    def flow(self, points: np.ndarray, tol: float) -> np.ndarray:
        out = np.empty_like(points)
        for m, p in enumerate(points):
            curve = integrate_ode(
                lambda t, y: self.rhs(t, y), p, self.breakpoints(), tol=tol,
                chart=self.foliation.chart, dim=self.foliation.dim,
            )
            out[m] = curve.target
        return out


@dataclass
class CorrectionResult:
    alpha: np.ndarray
    beta: np.ndarray | None
    residual: float
    converged: bool
    iterations: int
    field: CorrectionField | None
    corrected: np.ndarray


def correct_to_slice(
    F: FoliationPresentation,
    images: np.ndarray,
    S1: Slice,
    tol: float = CORRECTION_TOL,
    flow_tol: float = DEFAULT_TOL,
    max_iter: int = 30,
    damping: float = 1e-8,
) -> CorrectionResult:
    """Gauss-Newton shooting for Z in I_a F with Phi^1_Z(images) inside S1.

    Constant-in-t affine coefficients first, then affine-in-t on stall.  The
    residual is the off-slice distance of the corrected stencil; divergence is
    reported through ``converged``/``residual``, never raised.
    """
    images = np.atleast_2d(np.asarray(images, dtype=float))
    d = F.dim
    c = S1.dim
    if c == d:
        return CorrectionResult(
            alpha=np.zeros((F.q, d)), beta=None, residual=0.0, converged=True,
            iterations=0, field=None, corrected=images.copy(),
        )
    if c == 0:
        normal = np.eye(d)
    else:
        _, _, Vt = np.linalg.svd(S1.frame.T)
        normal = Vt[c:].T  # (d, d-c) orthonormal complement of the slice span

    def residual_vec(theta: np.ndarray, affine: bool):
        if affine:
            fieldZ = CorrectionField(F, S1.base, theta[: F.q * d], theta[F.q * d:])
        else:
            fieldZ = CorrectionField(F, S1.base, theta)
        corrected = fieldZ.flow(images, flow_tol)
        res = ((corrected - S1.base) @ normal).ravel()
        return res, corrected, fieldZ

    best = None
    for affine in (False, True):
        nvar = F.q * d * (2 if affine else 1)
        theta = np.zeros(nvar)
        if affine and best is not None:
            theta[: F.q * d] = best[0]
        res, corrected, fieldZ = residual_vec(theta, affine)
        rnorm = float(np.linalg.norm(res))
        it = 0
        while rnorm > tol and it < max_iter:
            J = np.empty((res.size, nvar))
            eps = 1e-6 * max(1.0, float(np.linalg.norm(theta)))
            for k in range(nvar):
                pert = theta.copy()
                pert[k] += eps
                res_k, _, _ = residual_vec(pert, affine)
                J[:, k] = (res_k - res) / eps
            step = np.linalg.solve(J.T @ J + damping * np.eye(nvar), -J.T @ res)
            # backtracking line search on the Gauss-Newton step
            lam, improved = 1.0, False
            while lam > 1e-4:
                res_new, corrected_new, field_new = residual_vec(theta + lam * step, affine)
                if np.linalg.norm(res_new) < rnorm:
                    theta = theta + lam * step
                    res, corrected, fieldZ = res_new, corrected_new, field_new
                    rnorm = float(np.linalg.norm(res_new))
                    improved = True
                    break
                lam *= 0.25
            it += 1
            if not improved:
                break
        if affine:
            alpha, beta = theta[: F.q * d].reshape(F.q, d), theta[F.q * d:].reshape(F.q, d)
        else:
            alpha, beta = theta.reshape(F.q, d), None
        cand = (theta[: F.q * d], beta, rnorm, corrected, fieldZ, it, alpha)
        if best is None or rnorm < best[2]:
            best = cand
        if rnorm <= tol:
            break
    theta0, beta, rnorm, corrected, fieldZ, it, alpha = best
    return CorrectionResult(
        alpha=alpha, beta=beta, residual=rnorm, converged=rnorm <= tol,
        iterations=it, field=fieldZ, corrected=corrected,
    )


# ---------------------------------------------------------------- holonomy jets


@dataclass
class GermJet:
    """A representative truncated jet of a holonomy transformation."""

    order: int
    source_slice: Slice
    target_slice: Slice
    taylor: TruncatedMap
    correction_residual: float = 0.0
    equivalence_status: str = "exact"

    def linear_part(self) -> np.ndarray:
        return self.taylor.linear_part()

    def is_identity(self, tol: float = 1e-6) -> bool:
        return self.taylor.distance_to_identity() <= tol


def jet_of_flow(
    F: FoliationPresentation,
    flow_fn: Callable[[np.ndarray], np.ndarray],
    S0: Slice,
    S1: Slice,
    order: int = JET_ORDER,
    stencil_scale: float = STENCIL_SCALE,
    correction_tol: float = CORRECTION_TOL,
    flow_tol: float = DEFAULT_TOL,
) -> GermJet:
    """Fit the jet of (correction o flow) restricted to S0, landing in S1 coordinates."""
    scale = stencil_scale * S0.extent if S0.dim else 0.0
    W = chebyshev_stencil(S0.dim, order, scale)
    sources = S0.embed(W)
    images = flow_fn(sources)
    corr = correct_to_slice(F, images, S1, tol=correction_tol, flow_tol=flow_tol)
    V = S1.coords(corr.corrected)
    taylor = TruncatedMap.fit(W, V, order)
    status = "exact" if (
        slice_foliation_rank_zero(F, S0) and slice_foliation_rank_zero(F, S1)
    ) else "inconclusive"
    return GermJet(
        order=order,
        source_slice=S0,
        target_slice=S1,
        taylor=taylor,
        correction_residual=corr.residual,
        equivalence_status=status,
    )


def holonomy_jet(
    F: FoliationPresentation,
    P: FPath,
    S0: Slice | None = None,
    S1: Slice | None = None,
    order: int = JET_ORDER,
    tol: float | None = None,
    stencil_scale: float = STENCIL_SCALE,
    correction_tol: float = CORRECTION_TOL,
) -> GermJet:
    """The holonomy jet of an F-path between slices through its endpoints."""
    S0 = S0 or default_slice(F, P.source)
    S1 = S1 or default_slice(F, P.target)
    flow_tol = tol or P.tol
    return jet_of_flow(
        F,
        lambda pts: P.flow_images(pts, tol=flow_tol),
        S0,
        S1,
        order=order,
        stencil_scale=stencil_scale,
        correction_tol=correction_tol,
        flow_tol=flow_tol,
    )


def linearized_holonomy(
    F: FoliationPresentation,
    P: FPath,
    S0: Slice | None = None,
    S1: Slice | None = None,
    tol: float | None = None,
) -> np.ndarray:
    return holonomy_jet(F, P, S0, S1, order=1, tol=tol).linear_part()


def compose_jets(J2: GermJet, J1: GermJet, tol: float = 1e-7) -> GermJet:
    """Groupoid composition of germ representatives, truncated at min(order)."""
    if not J1.target_slice.close_to(J2.source_slice, tol):
        raise ValueError("slice mismatch: J1.target_slice != J2.source_slice")
    taylor = J2.taylor.compose(J1.taylor)
    status = "exact" if J1.equivalence_status == J2.equivalence_status == "exact" else "inconclusive"
    return GermJet(
        order=taylor.order,
        source_slice=J1.source_slice,
        target_slice=J2.target_slice,
        taylor=taylor,
        correction_residual=max(J1.correction_residual, J2.correction_residual),
        equivalence_status=status,
    )


@dataclass
class TrivialHolonomyResult:
    status: str  # "trivial" | "nontrivial" | "inconclusive"
    jet: GermJet | None
    deviation: float


def trivial_holonomy_check(
    F: FoliationPresentation,
    P: FPath,
    S0: Slice | None = None,
    base_point=None,
    tol: float = 1e-6,
) -> TrivialHolonomyResult:
    """Check the trivial-holonomy criterion for X with coefficients vanishing at p(0).

    The precondition (every coefficient of X lies in I_{p(0)}) is verified
    symbolically at a rational base point.  The boolean verdict is only
    offered when the slice foliation has pointwise rank 0 near the basepoint,
    where jet identity decides the quotient class; otherwise the status is
    "inconclusive".
    """
    if base_point is None:
        base_point = [Fraction(v).limit_denominator(10**12) for v in P.source]
    for curve in P.element.coeffs:
        for piece in curve.pieces:
            spatial = piece
            for ax in range(F.dim):
                spatial = spatial.substitute(ax, base_point[ax])
            if not spatial.is_zero():
                raise ValueError("coefficients of X do not vanish at the base point")
    S0 = S0 or default_slice(F, P.source)
    if not slice_foliation_rank_zero(F, S0):
        return TrivialHolonomyResult(status="inconclusive", jet=None, deviation=float("nan"))
    jet = holonomy_jet(F, P, S0, S0, order=1)
    dev = jet.taylor.distance_to_identity()
    return TrivialHolonomyResult(
        status="trivial" if dev <= tol else "nontrivial", jet=jet, deviation=dev
    )
