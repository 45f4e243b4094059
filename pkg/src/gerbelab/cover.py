"""Good covers of cubical tori by boxes, their nerves, and test cycles.

Each axis of the torus is split into three overlapping arcs whose pairwise
overlaps are single vertices and whose triple overlap is empty; products of
arcs give 3^d box sets.  Every nonempty intersection of sets is again a box
(hence contractible), so the nerve computes the cohomology of the torus.

The nerve is enumerated honestly — a simplex is recorded only after its
member boxes are actually intersected and found nonempty — and is exposed
through the same ``n_cells``/``boundary_matrix`` protocol the cubical
complexes use, so the integer cohomology calculator runs on it unchanged.

Shuffle cycles: explicit simplicial 1-, 2- and 3-cycles in the nerve built
as Eilenberg-Zilber products of the per-axis triangle cycle.  They pair with
nerve cochains to read off class coordinates in a fixed axis orientation,
independent of whatever generators the Smith-form calculator happens to pick.
"""

from __future__ import annotations

from itertools import permutations

import numpy as np
from scipy import sparse

from .boxes import Box, intersect_boxes
from .cells import CubicalTorusComplex

__all__ = [
    "GoodCover",
    "Nerve",
    "good_cover_torus",
]


def _axis_cuts(N):
    if N < 3:
        raise ValueError(f"need at least 3 vertices per axis for a good cover, got N={N}")
    c1 = -(-N // 3)
    c2 = -(-2 * N // 3)
    return (0, c1, c2)


class GoodCover:
    """Cover of a cubical torus by 3^d overlapping boxes."""

    def __init__(self, complex: CubicalTorusComplex):
        self.complex = complex
        N, d = complex.N, complex.d
        cuts = _axis_cuts(N)
        # arc a runs from cuts[a] to cuts[a+1] (cyclically), endpoints included
        bounds = cuts + (N,)
        self.arcs = tuple(
            (bounds[a], bounds[a + 1] - bounds[a] + 1) for a in range(3)
        )
        self.sets = []
        for flat in range(3 ** d):
            digits = []
            rem = flat
            for _ in range(d):
                digits.append(rem % 3)
                rem //= 3
            digits.reverse()  # axis 0 is the most significant digit
            start = tuple(self.arcs[a][0] for a in digits)
            extent = tuple(self.arcs[a][1] for a in digits)
            self.sets.append(Box(complex, start, extent))
        self.n_sets = len(self.sets)
        self._arc_of_vertex = self._build_arc_membership()
        self._intersections = {}
        self._nerve = None
        self.validate()

    # -- membership --------------------------------------------------------------

    def _build_arc_membership(self):
        N = self.complex.N
        memb = np.zeros((3, N), dtype=bool)
        for a, (s, L) in enumerate(self.arcs):
            memb[a, (s + np.arange(L)) % N] = True
        return memb

    def set_digits(self, index):
        digits = []
        rem = index
        for _ in range(self.complex.d):
            digits.append(rem % 3)
            rem //= 3
        digits.reverse()
        return tuple(digits)

    def sets_containing_cell(self, k, cell_index):
        """Indices of cover sets whose box contains the given cell."""
        cx = self.complex
        S, pos = cx.cell_at(k, cell_index)
        N = cx.N
        per_axis = []
        for i in range(cx.d):
            ok = []
            for a, (s, L) in enumerate(self.arcs):
                span = L - 1 if i in S else L
                if (pos[i] - s) % N < span:
                    ok.append(a)
            if not ok:
                return ()
            per_axis.append(ok)
        found = []
        for digits in _product_lists(per_axis):
            flat = 0
            for a in digits:
                flat = flat * 3 + a
            found.append(flat)
        return tuple(sorted(found))

    def sets_containing_vertex(self, vertex_index):
        return self.sets_containing_cell(0, vertex_index)

    def partition_weight(self, set_index, vertex_index):
        """Combinatorial partition of unity: 1/#{sets containing the vertex}."""
        owners = self.sets_containing_vertex(vertex_index)
        if set_index not in owners:
            return 0.0
        return 1.0 / len(owners)

    # -- intersections -------------------------------------------------------------

    def intersection(self, indices):
        """Common box of the given set indices (sorted tuple), or None."""
        key = tuple(sorted(set(int(i) for i in indices)))
        if key not in self._intersections:
            box = self.sets[key[0]]
            for i in key[1:]:
                box = intersect_boxes(box, self.sets[i])
                if box is None:
                    break
            self._intersections[key] = box
        return self._intersections[key]

    def validate(self):
        """Contractibility and overlap sanity for every recorded intersection."""
        N = self.complex.N
        for a in range(3):
            for b in range(a + 1, 3):
                s1, L1 = self.arcs[a]
                s2, L2 = self.arcs[b]
                common = set((s1 + j) % N for j in range(L1)) & set(
                    (s2 + j) % N for j in range(L2)
                )
                if len(common) != 1:
                    raise ValueError(
                        f"arcs {a},{b} overlap in {sorted(common)}; expected a single vertex"
                    )
        for box in self.sets:
            if any(L > N for L in box.extent):
                raise ValueError(f"cover set {box} wraps an axis completely")

    # -- nerve ----------------------------------------------------------------------

    @property
    def nerve(self):
        if self._nerve is None:
            self._nerve = Nerve(self)
        return self._nerve


def _product_lists(lists):
    if not lists:
        yield ()
        return
    for head in lists[0]:
        for tail in _product_lists(lists[1:]):
            yield (head,) + tail


# Nerves with identical simplex lists share one cohomology cache: the nerve
# of the three-arc cover depends only on the dimension, not on N, and its
# Smith reduction is the single most expensive exact computation here.
_shared_nerve_cohomology = {}


class Nerve:
    """Simplicial nerve of a good cover, enumerated up to dimension ``max_dim``.

    Duck-types the chain-complex protocol (``n_cells``, ``boundary_matrix``)
    so integer cohomology in degrees < max_dim is computed by the same
    Smith-form machinery as the cubical complexes.
    """

    def __init__(self, cover: GoodCover, max_dim=4):
        self.cover = cover
        self.max_dim = max_dim
        self.simplices = {0: [(i,) for i in range(cover.n_sets)]}
        for k in range(1, max_dim + 1):
            found = []
            for prev in self.simplices[k - 1]:
                box_prev = cover.intersection(prev)
                if box_prev is None:
                    continue
                for j in range(prev[-1] + 1, cover.n_sets):
                    if intersect_boxes(box_prev, cover.sets[j]) is not None:
                        found.append(prev + (j,))
            self.simplices[k] = found
        self.index = {
            k: {s: i for i, s in enumerate(v)} for k, v in self.simplices.items()
        }
        self._bmats = {}
        signature = (max_dim,) + tuple(
            tuple(self.simplices[k]) for k in range(max_dim + 1)
        )
        self._cohomology_cache = _shared_nerve_cohomology.setdefault(signature, {})

    def n_cells(self, k):
        if k < 0 or k > self.max_dim:
            return 0
        return len(self.simplices.get(k, []))

    def boundary_matrix(self, k):
        """Sparse integer matrix of the simplicial boundary C_k -> C_{k-1}."""
        if k not in self._bmats:
            if k < 1 or k > self.max_dim:
                self._bmats[k] = sparse.csr_matrix(
                    (self.n_cells(k - 1), self.n_cells(k)), dtype=np.int64
                )
            else:
                rows, cols, vals = [], [], []
                lower = self.index[k - 1]
                for col, simplex in enumerate(self.simplices[k]):
                    for j in range(len(simplex)):
                        face = simplex[:j] + simplex[j + 1 :]
                        rows.append(lower[face])
                        cols.append(col)
                        vals.append(-1 if j % 2 else 1)
                self._bmats[k] = sparse.csr_matrix(
                    (vals, (rows, cols)),
                    shape=(self.n_cells(k - 1), self.n_cells(k)),
                    dtype=np.int64,
                )
        return self._bmats[k]

    def simplex_box(self, simplex):
        return self.cover.intersection(simplex)

    # -- oriented test cycles ---------------------------------------------------

    def _vertex_of_digits(self, digits):
        flat = 0
        for a in digits:
            flat = flat * 3 + a
        return flat

    def triangle_edges(self, axis):
        """The per-axis triangle 1-cycle, as (edge tuple, coefficient) pairs.

        Walks the three arcs of one axis in order (others held at arc 0):
        (0,1) + (1,2) - (0,2).  Its boundary vanishes and it generates the
        axis circle in nerve homology.
        """
        d = self.cover.complex.d
        base = [0] * d
        verts = []
        for a in range(3):
            dig = list(base)
            dig[axis] = a
            verts.append(self._vertex_of_digits(dig))
        v0, v1, v2 = verts
        return [((v0, v1), 1), ((v1, v2), 1), ((v0, v2), -1)]

    def shuffle_cycle(self, axes):
        """Eilenberg-Zilber product of per-axis triangle cycles.

        ``axes`` is a tuple of 1-3 distinct axis numbers; the result is a
        chain vector over the nerve's len(axes)-simplices whose boundary is
        zero and whose homology class is the product of the axis circles,
        oriented by ascending axis order.
        """
        axes = tuple(axes)
        if len(set(axes)) != len(axes):
            raise ValueError("axes must be distinct")
        d = self.cover.complex.d
        k = len(axes)
        edges = {ax: [((0,), (1,), 1), ((1,), (2,), 1), ((0,), (2,), -1)] for ax in axes}
        chain = np.zeros(self.n_cells(k), dtype=np.int64)
        for combo in _product_lists([edges[ax] for ax in axes]):
            coeff0 = 1
            tails, heads = [], []
            for (t,), (h,), c in combo:
                coeff0 *= c
                tails.append(t)
                heads.append(h)
            for perm in permutations(range(k)):
                sign = _perm_sign(perm)
                digits = [0] * d
                for m, ax in enumerate(axes):
                    digits[ax] = tails[m]
                path = [self._vertex_of_digits(digits)]
                for step in perm:
                    digits[axes[step]] = heads[step]
                    path.append(self._vertex_of_digits(digits))
                simplex, ssign = _sort_simplex(path)
                if simplex is None:
                    continue
                idx = self.index[k].get(simplex)
                if idx is None:
                    raise ValueError(f"shuffle simplex {simplex} missing from nerve")
                chain[idx] += coeff0 * sign * ssign
        return chain

    def cycle_chain(self, axes):
        """Shuffle cycle as a dense integer vector, boundary-checked."""
        chain = self.shuffle_cycle(axes)
        k = len(tuple(axes))
        bd = self.boundary_matrix(k) @ chain
        if np.any(bd):
            raise AssertionError(f"shuffle cycle over axes {axes} is not closed")
        return chain

    def pair_with_cycle(self, values, axes):
        """Evaluate a nerve k-cochain on the shuffle k-cycle of ``axes``."""
        chain = self.cycle_chain(axes)
        return float(np.dot(np.asarray(values, dtype=float), chain))


def _perm_sign(perm):
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


def _sort_simplex(path):
    """Ordered vertex list -> (sorted tuple, permutation sign); None if degenerate."""
    if len(set(path)) != len(path):
        return None, 0
    order = sorted(range(len(path)), key=lambda i: path[i])
    sign = _perm_sign(order)
    return tuple(path[i] for i in order), sign


def good_cover_torus(complex: CubicalTorusComplex):
    """Standard three-arcs-per-axis good cover of the torus."""
    return GoodCover(complex)
