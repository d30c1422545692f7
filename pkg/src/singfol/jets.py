"""Truncated Taylor maps between slice charts: fitting, evaluation, composition."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def monomials(dim: int, order: int) -> list[tuple[int, ...]]:
    """Multi-indices alpha with 1 <= |alpha| <= order, in a fixed deterministic order."""
    out = []
    for total in range(1, order + 1):
        for alpha in itertools.product(range(total + 1), repeat=dim):
            if sum(alpha) == total:
                out.append(alpha)
    return out


class TruncatedMap:
    """A polynomial map R^src -> R^tgt with zero constant term, truncated at ``order``."""

    def __init__(self, src_dim: int, tgt_dim: int, order: int, coeffs: dict | None = None):
        self.src_dim = src_dim
        self.tgt_dim = tgt_dim
        self.order = order
        self.coeffs = {tuple(a): np.asarray(v, dtype=float) for a, v in (coeffs or {}).items()}
        for a in self.coeffs:
            if len(a) != src_dim or not 1 <= sum(a) <= order:
                raise ValueError(f"bad multi-index {a}")

    @classmethod
    def identity(cls, dim: int, order: int) -> "TruncatedMap":
        coeffs = {}
        for i in range(dim):
            alpha = tuple(1 if j == i else 0 for j in range(dim))
            coeffs[alpha] = np.eye(dim)[i]
        return cls(dim, dim, order, coeffs)

    @classmethod
    def fit(cls, inputs: np.ndarray, outputs: np.ndarray, order: int) -> "TruncatedMap":
        """Least-squares polynomial fit with the constant term forced to zero."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        outputs = np.atleast_2d(np.asarray(outputs, dtype=float))
        src = inputs.shape[1]
        tgt = outputs.shape[1]
        monos = monomials(src, order)
        if not monos:
            return cls(src, tgt, order, {})
        design = np.array([[np.prod(w ** np.array(a)) for a in monos] for w in inputs])
        sol, *_ = np.linalg.lstsq(design, outputs, rcond=None)
        coeffs = {a: sol[i] for i, a in enumerate(monos)}
        return cls(src, tgt, order, coeffs)

    def eval(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        out = np.zeros(self.tgt_dim)
        for a, c in self.coeffs.items():
            out += c * np.prod(w ** np.array(a))
        return out

    def linear_part(self) -> np.ndarray:
        A = np.zeros((self.tgt_dim, self.src_dim))
        for i in range(self.src_dim):
            alpha = tuple(1 if j == i else 0 for j in range(self.src_dim))
            if alpha in self.coeffs:
                A[:, i] = self.coeffs[alpha]
        return A

    def compose(self, inner: "TruncatedMap") -> "TruncatedMap":
        """self o inner, truncated at min(orders); inner's zero constant term keeps degrees honest."""
        if inner.tgt_dim != self.src_dim:
            raise ValueError("dimension mismatch in jet composition")
        order = min(self.order, inner.order)
        # inner components as float-coefficient polynomial dicts over src monomials
        comp_polys = []
        for i in range(self.src_dim):
            comp_polys.append({a: v[i] for a, v in inner.coeffs.items() if v[i] != 0.0})
        out: dict[tuple, np.ndarray] = {}
        one = {(0,) * inner.src_dim: 1.0}
        for alpha, cvec in self.coeffs.items():
            term = dict(one)
            for i, k in enumerate(alpha):
                for _ in range(k):
                    term = _poly_mul(term, comp_polys[i], order)
                    if not term:
                        break
                if not term:
                    break
            for beta, val in term.items():
                if sum(beta) == 0:
                    continue  # cannot happen: inner has zero constant term
                acc = out.setdefault(beta, np.zeros(self.tgt_dim))
                acc += val * cvec
        out = {b: v for b, v in out.items() if np.any(np.abs(v) > 0.0)}
        return TruncatedMap(inner.src_dim, self.tgt_dim, order, out)

    def max_coeff_distance(self, other: "TruncatedMap") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        dist = 0.0
        for a in keys:
            va = self.coeffs.get(a, np.zeros(self.tgt_dim))
            vb = other.coeffs.get(a, np.zeros(other.tgt_dim))
            dist = max(dist, float(np.max(np.abs(va - vb))) if len(va) else 0.0)
        return dist

    def distance_to_identity(self) -> float:
        if self.src_dim != self.tgt_dim:
            raise ValueError("identity distance needs equal dimensions")
        return self.max_coeff_distance(TruncatedMap.identity(self.src_dim, self.order))

    def __repr__(self):
        entries = ", ".join(
            f"{a}: {np.array2string(v, precision=5)}" for a, v in sorted(self.coeffs.items())
        )
        return f"TruncatedMap(order={self.order}, {{{entries}}})"


def _poly_mul(d1: dict, d2: dict, order: int) -> dict:
    out: dict[tuple, float] = {}
    for a1, c1 in d1.items():
        for a2, c2 in d2.items():
            a = tuple(x + y for x, y in zip(a1, a2))
            if sum(a) > order:
                continue
            out[a] = out.get(a, 0.0) + c1 * c2
    return {a: c for a, c in out.items() if c != 0.0}


def chebyshev_stencil(dim: int, order: int, scale: float) -> np.ndarray:
    """Tensor-product Chebyshev nodes of size (order+2)^dim, scaled; excludes the center."""
    if dim == 0:
        return np.zeros((1, 0))
    m = order + 2
    nodes = np.array([np.cos((2 * i + 1) * np.pi / (2 * m)) for i in range(m)]) * scale
    return np.array(list(itertools.product(nodes, repeat=dim)))
