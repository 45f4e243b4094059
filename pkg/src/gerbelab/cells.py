"""Cubical cell complexes on flat tori (R/Z)^d, d <= 3.

The torus is cut into N translates of the unit cube scaled by 1/N along every
axis.  A k-cell is a pair (direction set S, base position p): the cube spanned
from vertex p/N along the |S| = k axes in S.  Cells are indexed

    index = combo_offset(S) * N**d + row_major_position(p)

with the direction sets of each degree enumerated in lexicographic order
(``combos`` below); that ordering is the orientation convention everywhere:
a cell is positively oriented as the ordered product of its axes in
increasing order.

Boundary follows the product (Leibniz) rule.  With S = {i_1 < ... < i_k},

    boundary(p, S) = sum_j (-1)**(j-1) * [ (p + e_{i_j}, S \\ i_j)
                                           - (p,          S \\ i_j) ].

The cup product pairs a front-face value with a shifted back-face value over
every splitting of the direction set, weighted by the shuffle sign; it
satisfies the Leibniz rule on the nose, in integer/rational arithmetic, which
is what makes the pairing with the fundamental chain a cohomological pairing.

Values are plain numpy arrays; object dtype (Fraction) is supported by every
operation here, so chain-level identities can be tested exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp

__all__ = [
    "CubicalTorusComplex",
    "Cochain",
    "build_torus_complex",
    "wedge_pairing",
    "shuffle_sign",
]


def shuffle_sign(left, right):
    """Sign of the permutation sorting the concatenation left+right.

    Both arguments are strictly increasing tuples with disjoint entries.
    """
    inversions = sum(1 for x in left for y in right if y < x)
    return -1 if inversions % 2 else 1


class CubicalTorusComplex:
    """Cubical complex of the flat torus (R/Z)^d at resolution N."""

    def __init__(self, dimension, resolution):
        if dimension not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if resolution < 2:
            raise ValueError("resolution must be at least 2")
        self.d = int(dimension)
        self.N = int(resolution)
        self.n_positions = self.N**self.d
        self.combos = [
            [tuple(c) for c in combinations(range(self.d), k)]
            for k in range(self.d + 1)
        ]
        self.combo_offset = [
            {c: i for i, c in enumerate(level)} for level in self.combos
        ]
        arange = np.arange(self.n_positions).reshape((self.N,) * self.d)
        # shift[i][p] = row-major index of position p + e_i (mod N)
        self._shift = [
            np.roll(arange, -1, axis=i).ravel() for i in range(self.d)
        ]
        self._boundary = {}

    # -- indexing ------------------------------------------------------------

    def n_cells(self, k):
        if k < 0 or k > self.d:
            return 0
        return comb(self.d, k) * self.n_positions

    def cell_counts(self):
        return tuple(self.n_cells(k) for k in range(self.d + 1))

    def position_index(self, pos):
        idx = 0
        for c in pos:
            idx = idx * self.N + (int(c) % self.N)
        return idx

    def cell_index(self, dirs, pos):
        dirs = tuple(sorted(dirs))
        return self.combo_offset[len(dirs)][dirs] * self.n_positions + self.position_index(pos)

    def cell_at(self, k, index):
        block, rem = divmod(int(index), self.n_positions)
        pos = []
        for _ in range(self.d):
            pos.append(rem % self.N)
            rem //= self.N
        pos.reverse()
        return self.combos[k][block], tuple(pos)

    def shift_index(self, axes):
        """Index array sending p to p + sum_{i in axes} e_i (row-major)."""
        out = np.arange(self.n_positions)
        for i in axes:
            out = self._shift[i][out]
        return out

    # -- boundary / coboundary -----------------------------------------------

    def boundary_matrix(self, k):
        """Sparse integer matrix of the boundary, shape (n_{k-1}, n_k)."""
        if k < 1 or k > self.d:
            raise ValueError(f"no boundary operator for degree {k}")
        if k not in self._boundary:
            nv = self.n_positions
            rows, cols, data = [], [], []
            base = np.arange(nv)
            for S in self.combos[k]:
                col0 = self.combo_offset[k][S] * nv
                for j, i in enumerate(S):
                    S2 = tuple(x for x in S if x != i)
                    row0 = self.combo_offset[k - 1][S2] * nv
                    sign = -1 if j % 2 else 1
                    cols.append(col0 + base)
                    rows.append(row0 + self._shift[i])
                    data.append(np.full(nv, sign, dtype=np.int64))
                    cols.append(col0 + base)
                    rows.append(row0 + base)
                    data.append(np.full(nv, -sign, dtype=np.int64))
            mat = sp.coo_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.n_cells(k - 1), self.n_cells(k)),
            )
            self._boundary[k] = mat.tocsr()
        return self._boundary[k]

    def coboundary_values(self, k, values):
        """Apply d : C^k -> C^{k+1} to a value vector (any dtype)."""
        if k >= self.d:
            raise ValueError("coboundary exceeds top degree")
        nv = self.n_positions
        out = np.zeros(self.n_cells(k + 1), dtype=values.dtype)
        for S in self.combos[k + 1]:
            col0 = self.combo_offset[k + 1][S] * nv
            acc = None
            for j, i in enumerate(S):
                S2 = tuple(x for x in S if x != i)
                row0 = self.combo_offset[k][S2] * nv
                blk = values[row0 : row0 + nv]
                term = blk[self._shift[i]] - blk
                if j % 2:
                    term = -term
                acc = term if acc is None else acc + term
            out[col0 : col0 + nv] = acc
        return out

    def boundary_values(self, k, values):
        """Apply the transpose coboundary (value-level boundary) C^k -> C^{k-1}.

        This is the combinatorial part of the codifferential: for a k-cochain
        a, (boundary_values(a))(c) = a(boundary^T ...) = sum over cofaces with
        incidence signs, i.e. the matrix ``boundary_matrix(k) @ values`` but
        implemented with gathers so exact dtypes work too.
        """
        if k < 1:
            raise ValueError("no boundary below degree 0")
        nv = self.n_positions
        out = np.zeros(self.n_cells(k - 1), dtype=values.dtype)
        for S in self.combos[k]:
            col0 = self.combo_offset[k][S] * nv
            blk = values[col0 : col0 + nv]
            for j, i in enumerate(S):
                S2 = tuple(x for x in S if x != i)
                row0 = self.combo_offset[k - 1][S2] * nv
                sign = -1 if j % 2 else 1
                # scatter: head gets +sign, tail gets -sign
                head = np.zeros(nv, dtype=values.dtype)
                head[self._shift[i]] = blk
                if sign == 1:
                    out[row0 : row0 + nv] += head - blk
                else:
                    out[row0 : row0 + nv] += blk - head
        return out

    # -- cup product -----------------------------------------------------------

    def cup_values(self, ka, va, kb, vb):
        """Value vector of the cup product of a k_a- and a k_b-cochain."""
        k = ka + kb
        if k > self.d:
            raise ValueError("cup product exceeds top degree")
        nv = self.n_positions
        dtype = np.result_type(va.dtype, vb.dtype)
        if va.dtype == object or vb.dtype == object:
            dtype = object
        out = np.zeros(self.n_cells(k), dtype=dtype)
        for S in self.combos[k]:
            col0 = self.combo_offset[k][S] * nv
            acc = None
            for S1 in combinations(S, ka):
                S2 = tuple(x for x in S if x not in S1)
                sign = shuffle_sign(S1, S2)
                a0 = self.combo_offset[ka][tuple(S1)] * nv
                b0 = self.combo_offset[kb][S2] * nv
                front = va[a0 : a0 + nv]
                back = vb[b0 : b0 + nv][self.shift_index(S1)]
                term = front * back
                if sign < 0:
                    term = -term
                acc = term if acc is None else acc + term
            out[col0 : col0 + nv] = acc
        return out

    def __repr__(self):
        return f"CubicalTorusComplex(d={self.d}, N={self.N})"


@dataclass
class Cochain:
    """A cochain: one value per k-cell, in cell-index order."""

    complex: CubicalTorusComplex
    degree: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        expected = self.complex.n_cells(self.degree)
        if self.values.shape != (expected,):
            raise ValueError(
                f"degree {self.degree} needs {expected} values, got {self.values.shape}"
            )

    def d(self) -> "Cochain":
        return Cochain(
            self.complex,
            self.degree + 1,
            self.complex.coboundary_values(self.degree, self.values),
        )

    def cup(self, other: "Cochain") -> "Cochain":
        vals = self.complex.cup_values(
            self.degree, self.values, other.degree, other.values
        )
        return Cochain(self.complex, self.degree + other.degree, vals)

    def __add__(self, other):
        return Cochain(self.complex, self.degree, self.values + other.values)

    def __sub__(self, other):
        return Cochain(self.complex, self.degree, self.values - other.values)

    def __neg__(self):
        return Cochain(self.complex, self.degree, -self.values)

    def __rmul__(self, scalar):
        return Cochain(self.complex, self.degree, scalar * self.values)


@lru_cache(maxsize=None)
def build_torus_complex(dimension, resolution) -> CubicalTorusComplex:
    """Cubical torus complex (cached: repeated calls share the instance)."""
    return CubicalTorusComplex(dimension, resolution)


def wedge_pairing(a: Cochain, b: Cochain):
    """Pair complementary-degree cochains against the fundamental chain.

    Computed as the sum of the cup product over all top cells; exact when the
    inputs are integer- or Fraction-valued.
    """
    if a.degree + b.degree != a.complex.d:
        raise ValueError("degrees must sum to the top dimension")
    vals = a.complex.cup_values(a.degree, a.values, b.degree, b.values)
    return vals.sum()
