"""Generator-presented singular foliations with verifiable involutivity certificates."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .poly import Polynomial, PolyVectorField, lie_bracket

TAU_RANK = 1e-9


class ChartEscapeError(RuntimeError):
    """A trajectory left the chart box."""

    def __init__(self, message, t=None, point=None):
        super().__init__(message)
        self.t = t
        self.point = point


@dataclass(frozen=True)
class Chart:
    """An axis-aligned box, or all of Euclidean space when lo/hi are None."""

    dim: int
    lo: tuple | None = None
    hi: tuple | None = None

    @classmethod
    def everything(cls, dim: int) -> "Chart":
        return cls(dim)

    @classmethod
    def box(cls, lo, hi) -> "Chart":
        lo = tuple(float(v) for v in lo)
        hi = tuple(float(v) for v in hi)
        if len(lo) != len(hi) or any(a >= b for a, b in zip(lo, hi)):
            raise ValueError("invalid chart box")
        return cls(len(lo), lo, hi)

    @property
    def unbounded(self) -> bool:
        return self.lo is None

    def contains(self, x, margin: float = 0.0) -> bool:
        if self.unbounded:
            return True
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.array(self.lo) - margin) and np.all(x <= np.array(self.hi) + margin))

    def margin(self, x) -> float:
        """Signed distance to the boundary (positive inside); +inf when unbounded."""
        if self.unbounded:
            return np.inf
        x = np.asarray(x, dtype=float)
        return float(min(np.min(x - np.array(self.lo)), np.min(np.array(self.hi) - x)))

    def to_json(self):
        if self.unbounded:
            return "all"
        return {"min": list(self.lo), "max": list(self.hi)}

    @classmethod
    def from_json(cls, data, dim: int) -> "Chart":
        if data in (None, "all"):
            return cls.everything(dim)
        return cls.box(data["min"], data["max"])


class InvolutivityCertificate:
    """Structure coefficients c^k_{ij} with [X_i, X_j] = sum_k c^k_{ij} X_k."""

    def __init__(self, coeffs: Sequence[Sequence[Sequence[Polynomial]]]):
        self.q = len(coeffs)
        self.coeffs = [[list(row) for row in block] for block in coeffs]
        for block in self.coeffs:
            if len(block) != self.q or any(len(row) != self.q for row in block):
                raise ValueError("certificate must be a q x q x q array of polynomials")

    @classmethod
    def zeros(cls, q: int, dim: int) -> "InvolutivityCertificate":
        z = Polynomial.zero(dim)
        return cls([[[z for _ in range(q)] for _ in range(q)] for _ in range(q)])

    @classmethod
    def from_upper(cls, q: int, dim: int, upper: dict) -> "InvolutivityCertificate":
        """Build from {(i, j): [c^1_{ij}, .., c^q_{ij}]} for i < j, antisymmetrized."""
        cert = cls.zeros(q, dim)
        for (i, j), row in upper.items():
            if not i < j:
                raise ValueError("from_upper expects keys with i < j")
            row = [p if isinstance(p, Polynomial) else Polynomial.constant(dim, p) for p in row]
            cert.coeffs[i][j] = list(row)
            cert.coeffs[j][i] = [-p for p in row]
        return cert

    def row(self, i: int, j: int) -> list[Polynomial]:
        return self.coeffs[i][j]

    def is_antisymmetric(self) -> bool:
        for i in range(self.q):
            for j in range(self.q):
                for k in range(self.q):
                    if self.coeffs[i][j][k] != -self.coeffs[j][i][k]:
                        return False
        return True

    def spatially_constant(self) -> bool:
        return all(
            p.is_constant() for block in self.coeffs for row in block for p in row
        )

    def constant_array(self) -> np.ndarray:
        """c^k_{ij} as a float array [i, j, k]; requires spatial constancy."""
        if not self.spatially_constant():
            raise ValueError("certificate has non-constant structure functions")
        q = self.q
        out = np.zeros((q, q, q))
        for i in range(q):
            for j in range(q):
                for k in range(q):
                    out[i, j, k] = float(self.coeffs[i][j][k].constant_value())
        return out


class FoliationPresentation:
    """Ambient chart, polynomial generators and a bracket certificate."""

    def __init__(
        self,
        generators: Sequence[PolyVectorField],
        certificate: InvolutivityCertificate,
        chart: Chart | None = None,
        name: str = "",
    ):
        generators = tuple(generators)
        if not generators:
            raise ValueError("a presentation needs at least one generator")
        dim = generators[0].ambient_dim
        for g in generators:
            if g.ambient_dim != dim:
                raise ValueError("generators have mixed ambient dimension")
        if certificate.q != len(generators):
            raise ValueError("certificate size does not match generator count")
        self.generators = generators
        self.certificate = certificate
        self.dim = dim
        self.chart = chart or Chart.everything(dim)
        self.name = name

    @property
    def q(self) -> int:
        return len(self.generators)

    def generator_matrix(self, x) -> np.ndarray:
        """Rows are the generator values at x, shape (q, dim)."""
        return np.array([g.eval(x) for g in self.generators])

    def is_linear(self) -> bool:
        return all(g.linear_matrix() is not None for g in self.generators)

    def linear_matrices(self) -> list[np.ndarray]:
        mats = []
        for g in self.generators:
            A = g.linear_matrix()
            if A is None:
                raise ValueError("presentation is not linear")
            mats.append(np.array([[float(a) for a in row] for row in A]))
        return mats

    def __repr__(self):
        label = self.name or f"{self.q} generators on R^{self.dim}"
        return f"FoliationPresentation({label})"


@dataclass
class InvolutivityReport:
    ok: bool
    failures: list = field(default_factory=list)
    antisymmetric: bool = True


def verify_involutivity(F: FoliationPresentation) -> InvolutivityReport:
    """Check [X_i, X_j] = sum_k c^k_{ij} X_k symbolically for every i < j."""
    failures = []
    for i in range(F.q):
        for j in range(i + 1, F.q):
            expected = lie_bracket(F.generators[i], F.generators[j])
            acc = PolyVectorField.zero(F.dim)
            for k in range(F.q):
                acc = acc + F.generators[k].scale(F.certificate.coeffs[i][j][k])
            if not (expected - acc).is_zero():
                failures.append((i, j))
    anti = F.certificate.is_antisymmetric()
    return InvolutivityReport(ok=not failures and anti, failures=failures, antisymmetric=anti)


@dataclass
class DistributionFiber:
    base: np.ndarray
    spanning_vectors: np.ndarray  # shape (q, dim)
    rank: int


def distribution_at(F: FoliationPresentation, x, tau_rank: float = TAU_RANK) -> DistributionFiber:
    x = np.asarray(x, dtype=float)
    if not F.chart.contains(x):
        raise ChartEscapeError(f"point {x} outside chart", point=x)
    span = F.generator_matrix(x)
    rank = matrix_rank(span, tau_rank)
    return DistributionFiber(base=x, spanning_vectors=span, rank=rank)


def matrix_rank(A: np.ndarray, tau_rank: float = TAU_RANK) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tau_rank * s[0]))


@dataclass
class LeafSample:
    points: np.ndarray  # (N, dim)
    est_dim: int
    truncated: bool = False


def trace_leaf(
    F: FoliationPresentation,
    seed,
    budget: int = 200,
    h: float = 0.05,
    rng=0,
    tol: float = 1e-10,
) -> LeafSample:
    """Sample the orbit through ``seed`` by short flows of random generator combinations.

    The sample makes no completeness claim; est_dim is the largest distribution
    rank seen along the way.  On chart escape the trace is truncated and flagged.
    """
    from .flow import TimeDependentElement, integrate_curve

    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(int(rng))
    x = np.asarray(seed, dtype=float)
    if not F.chart.contains(x):
        raise ChartEscapeError("seed outside chart", point=x)
    pts = [x.copy()]
    est = distribution_at(F, x).rank
    truncated = False
    for _ in range(budget):
        c = rng.standard_normal(F.q)
        element = TimeDependentElement.constant(F, [Fraction(v).limit_denominator(10**6) for v in c * h])
        try:
            curve = integrate_curve(element, x, tol=tol)
        except ChartEscapeError:
            truncated = True
            break
        x = curve.target
        pts.append(x.copy())
        est = max(est, distribution_at(F, x).rank)
    return LeafSample(points=np.array(pts), est_dim=est, truncated=truncated)
