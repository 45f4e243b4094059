"""Discrete Hodge theory on the scaled cubical torus.

The unit-coordinate torus is rescaled so its total volume is 2*pi: the side
length is s = (2*pi)**(1/d) and each k-cell has measure h**k with h = s/N.
Inner products are diagonal:

    <a, b>_k = h**(d - 2k) * sum_cells a b,

the L2 pairing of piecewise-constant representatives.  The codifferential is
the honest adjoint of the coboundary in these inner products, which works out
to h**(-2) times the value-level boundary operator — no cell-shift gymnastics.
The combinatorial star maps values on (S, p) to the complementary directions
(S^c, p) with the shuffle sign and the metric weight; star(star) = +/-1
exactly and the star of the constant function is the volume cochain.

Harmonic k-cochains are spanned by the direction-indicator cochains
1_{S}/N^k, which integrate to 1 over the corresponding coordinate subtorus
and to 0 over the others.  Poisson problems are solved by plain conjugate
gradients with the harmonic directions projected out of the right-hand side
and of every iterate, so the answer is the Green's-operator value orthogonal
to the harmonic space.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import pi

import numpy as np
import scipy.sparse as sp

from .cells import Cochain, CubicalTorusComplex, shuffle_sign

__all__ = [
    "FlatMetric",
    "HarmonicBasis",
    "hodge_star",
    "solve_poisson",
    "harmonic_basis",
    "delta_current",
    "PoissonError",
]


class PoissonError(RuntimeError):
    pass


@dataclass
class FlatMetric:
    """Scaled flat metric on a cubical torus complex (total volume 2*pi)."""

    complex: CubicalTorusComplex

    def __post_init__(self):
        d, N = self.complex.d, self.complex.N
        self.scale = (2 * pi) ** (1.0 / d)
        self.h = self.scale / N
        self._bmat = {}

    def weight(self, k):
        return self.h ** (self.complex.d - 2 * k)

    def inner(self, a: Cochain, b: Cochain) -> float:
        if a.degree != b.degree:
            raise ValueError("inner product needs equal degrees")
        return self.weight(a.degree) * float(np.dot(a.values, b.values))

    def norm(self, a: Cochain) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))

    def _boundary_f64(self, k):
        if k not in self._bmat:
            self._bmat[k] = self.complex.boundary_matrix(k).astype(np.float64)
        return self._bmat[k]

    # -- operators -------------------------------------------------------------

    def codifferential(self, a: Cochain) -> Cochain:
        """L2 adjoint of the coboundary: degree k -> k-1."""
        if a.degree == 0:
            return Cochain(self.complex, 0, np.zeros_like(a.values))
        vals = self._boundary_f64(a.degree) @ a.values / self.h**2
        return Cochain(self.complex, a.degree - 1, vals)

    def laplacian_apply(self, k, values):
        cx = self.complex
        out = np.zeros_like(values, dtype=float)
        if k < cx.d:
            B = self._boundary_f64(k + 1)
            out += B @ (B.T @ values)
        if k > 0:
            B = self._boundary_f64(k)
            out += B.T @ (B @ values)
        return out / self.h**2

    def laplacian_matrix(self, k):
        cx = self.complex
        n = cx.n_cells(k)
        L = sp.csr_matrix((n, n))
        if k < cx.d:
            B = self._boundary_f64(k + 1)
            L = L + B @ B.T
        if k > 0:
            B = self._boundary_f64(k)
            L = L + B.T @ B
        return L / self.h**2

    def volume_cochain(self) -> Cochain:
        cx = self.complex
        return Cochain(
            cx, cx.d, np.full(cx.n_cells(cx.d), self.h**cx.d)
        )


def hodge_star(metric: FlatMetric, a: Cochain) -> Cochain:
    """Metric star: values move to the complementary direction block."""
    cx = metric.complex
    k = a.degree
    nv = cx.n_positions
    out = np.zeros(cx.n_cells(cx.d - k), dtype=float)
    w = metric.weight(k)
    for S in cx.combos[k]:
        Sc = tuple(i for i in range(cx.d) if i not in S)
        sign = shuffle_sign(S, Sc)
        src = cx.combo_offset[k][S] * nv
        dst = cx.combo_offset[cx.d - k][Sc] * nv
        out[dst : dst + nv] = sign * w * a.values[src : src + nv]
    return Cochain(cx, cx.d - k, out)


@dataclass
class HarmonicBasis:
    """Flat harmonic k-cochains, one per direction set, period-normalized."""

    metric: FlatMetric
    degree: int
    labels: list = field(default_factory=list)
    vectors: np.ndarray = None  # (n_k, len(labels))

    def __post_init__(self):
        cx = self.metric.complex
        k = self.degree
        nv = cx.n_positions
        if self.vectors is None:
            self.labels = list(cx.combos[k])
            vecs = np.zeros((cx.n_cells(k), len(self.labels)))
            for j, S in enumerate(self.labels):
                off = cx.combo_offset[k][S] * nv
                vecs[off : off + nv, j] = 1.0 / cx.N**k
            self.vectors = vecs
        w = self.metric.weight(k)
        self._norm2 = w * np.einsum("ij,ij->j", self.vectors, self.vectors)

    def project_out(self, values):
        """Remove the harmonic component (in the L2 sense); returns a copy."""
        out = np.array(values, dtype=float, copy=True)
        w = self.metric.weight(self.degree)
        for j in range(self.vectors.shape[1]):
            u = self.vectors[:, j]
            out -= (w * np.dot(out, u) / self._norm2[j]) * u
        return out

    def component_norm(self, values) -> float:
        """L2 norm of the harmonic component of a value vector."""
        w = self.metric.weight(self.degree)
        total = 0.0
        for j in range(self.vectors.shape[1]):
            u = self.vectors[:, j]
            c = w * np.dot(values, u) / self._norm2[j]
            total += c * c * self._norm2[j]
        return float(np.sqrt(max(total, 0.0)))

    def coefficients(self, values):
        w = self.metric.weight(self.degree)
        return np.array(
            [
                w * np.dot(values, self.vectors[:, j]) / self._norm2[j]
                for j in range(self.vectors.shape[1])
            ]
        )

    def subtorus_chain(self, S):
        """Index array of the k-cells of the coordinate subtorus for S.

        The chain runs over all positions whose coordinates vanish outside S,
        with coefficient +1 on cells of direction set S; it is a cycle, and
        the basis vector labelled S has period 1 against it.
        """
        cx = self.metric.complex
        k = self.degree
        S = tuple(sorted(S))
        idx = []
        nv = cx.n_positions
        off = cx.combo_offset[k][S] * nv
        for p in range(nv):
            _, pos = cx.cell_at(k, p)
            if all(pos[i] == 0 for i in range(cx.d) if i not in S):
                idx.append(off + p)
        return np.array(idx, dtype=np.int64)

    def periods(self, a: Cochain):
        """Periods of a k-cochain over the coordinate subtori (basis order)."""
        return np.array(
            [float(a.values[self.subtorus_chain(S)].sum()) for S in self.labels]
        )


def harmonic_basis(metric: FlatMetric, k) -> HarmonicBasis:
    return HarmonicBasis(metric, k)


def delta_current(metric: FlatMetric, point) -> Cochain:
    """Unit Dirac top-cochain: indicator of the cell containing the point.

    Normalized so the pairing with the constant function 1 is exactly 1 (it
    is a current, not an L2 density: no cell-volume factor).
    """
    cx = metric.complex
    point = np.asarray(point, dtype=float)
    if point.shape != (cx.d,):
        raise ValueError(f"point must have {cx.d} coordinates")
    cell = tuple(int(np.floor(c * cx.N)) % cx.N for c in point)
    vals = np.zeros(cx.n_cells(cx.d))
    full = tuple(range(cx.d))
    vals[cx.cell_index(full, cell)] = 1.0
    return Cochain(cx, cx.d, vals)


def solve_poisson(
    metric: FlatMetric,
    rhs: Cochain,
    tol: float = 1e-12,
    max_iter: int | None = None,
    harmonic_tol: float = 1e-10,
) -> Cochain:
    """Solve laplacian(x) = rhs for the component orthogonal to harmonics.

    Plain conjugate gradients; the harmonic part is projected out of the
    right-hand side (it must already be below ``harmonic_tol`` in L2 norm,
    otherwise the problem is inconsistent and an error reports the magnitude)
    and re-projected from the iterates every step for drift control.
    """
    cx = metric.complex
    k = rhs.degree
    basis = harmonic_basis(metric, k)
    hnorm = basis.component_norm(rhs.values)
    if hnorm > harmonic_tol:
        raise PoissonError(
            f"rhs has a harmonic component of L2 norm {hnorm:.3e} > {harmonic_tol:.0e}; "
            "the Poisson problem is inconsistent"
        )
    b = basis.project_out(rhs.values)
    n = cx.n_cells(k)
    if max_iter is None:
        max_iter = 10 * n
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return Cochain(cx, k, np.zeros(n))
    x = np.zeros(n)
    r = b.copy()
    p = r.copy()
    rr = float(np.dot(r, r))
    target = tol * bnorm
    for _ in range(max_iter):
        Ap = metric.laplacian_apply(k, p)
        alpha = rr / float(np.dot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        r = basis.project_out(r)
        x = basis.project_out(x)
        rr_new = float(np.dot(r, r))
        if np.sqrt(rr_new) <= target:
            return Cochain(cx, k, x)
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise PoissonError(
        f"conjugate gradients did not reach tol={tol:.0e} in {max_iter} iterations "
        f"(residual {np.sqrt(rr):.3e}, target {target:.3e})"
    )
