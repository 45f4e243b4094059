"""Box subcomplexes of a cubical torus and exact Poincare-lemma primitives.

A box is a product of vertex paths, one per axis: start vertex s_i and vertex
count L_i (the path has L_i - 1 edges; no axis wraps all the way around, so a
box is contractible).  Boxes are closed subcomplexes: all faces of their
cells belong to them.  They are both the cover sets and the local patches.

Box cochains use a local layout: for each direction set S (in the parent
complex's combo order) an array over local positions, C-order, with axis i
running over L_i vertices, or L_i - 1 edge offsets when i is in S.  The
layout makes the two local operators pure array manipulation:

* ``box_coboundary`` — forward differences along each direction, with the
  same Leibniz signs as the ambient complex (restriction commutes with d);
* ``box_primitive`` — the contraction homotopy onto the box's base corner,
  axis by axis.  For a closed k-cochain a (k >= 1) it returns P with
  dP = a exactly; the construction integrates along axis t after collapsing
  all later axes to their base slice, so the "root" of every primitive is
  the lexicographically smallest corner of the box in unwrapped coordinates.
"""

from __future__ import annotations

import numpy as np

from .cells import CubicalTorusComplex

__all__ = ["Box", "box_coboundary", "box_primitive", "intersect_boxes"]


class Box:
    """Product-of-paths subcomplex: start vertex and vertex counts per axis."""

    def __init__(self, complex: CubicalTorusComplex, start, extent):
        self.complex = complex
        self.start = tuple(int(v) % complex.N for v in start)
        self.extent = tuple(int(v) for v in extent)
        if len(self.start) != complex.d or len(self.extent) != complex.d:
            raise ValueError("start/extent must have one entry per axis")
        if any(L < 1 or L > complex.N for L in self.extent):
            raise ValueError(f"extents must lie in 1..N, got {self.extent}")
        self._cells = {}
        self._index_of = {}

    def __eq__(self, other):
        return (
            isinstance(other, Box)
            and self.complex is other.complex
            and self.start == other.start
            and self.extent == other.extent
        )

    def __hash__(self):
        return hash((self.start, self.extent))

    def __repr__(self):
        return f"Box(start={self.start}, extent={self.extent})"

    # -- structure -------------------------------------------------------------

    def block_shape(self, S):
        """Local array shape of the S-block (S a sorted direction tuple)."""
        return tuple(
            self.extent[i] - 1 if i in S else self.extent[i]
            for i in range(self.complex.d)
        )

    def n_cells(self, k):
        if k < 0 or k > self.complex.d:
            return 0
        total = 0
        for S in self.complex.combos[k]:
            shape = self.block_shape(S)
            if all(n >= 1 for n in shape):
                total += int(np.prod(shape))
        return total

    def blocks(self, k):
        """The nonempty S-blocks of degree k, in combo order."""
        return [
            S
            for S in self.complex.combos[k]
            if all(n >= 1 for n in self.block_shape(S))
        ]

    def cells(self, k):
        """Global cell indices in local layout order (per-S, local C-order)."""
        if k not in self._cells:
            cx = self.complex
            pieces = []
            for S in self.blocks(k):
                shape = self.block_shape(S)
                axes_idx = []
                for i in range(cx.d):
                    offs = (self.start[i] + np.arange(shape[i])) % cx.N
                    axes_idx.append(offs)
                grid = np.meshgrid(*axes_idx, indexing="ij")
                flat = np.zeros(int(np.prod(shape)), dtype=np.int64)
                for g in grid:
                    flat = flat * cx.N + g.ravel()
                pieces.append(cx.combo_offset[k][S] * cx.n_positions + flat)
            self._cells[k] = (
                np.concatenate(pieces) if pieces else np.zeros(0, dtype=np.int64)
            )
        return self._cells[k]

    def index_of(self, k):
        """Mapping global cell index -> local layout position."""
        if k not in self._index_of:
            self._index_of[k] = {
                int(g): i for i, g in enumerate(self.cells(k))
            }
        return self._index_of[k]

    def restrict_global(self, k, values):
        """Restrict a global value vector to this box (local layout)."""
        return np.asarray(values)[self.cells(k)]

    def restrict_from(self, other: "Box", k, values):
        """Restrict a value vector living on ``other`` to this box."""
        lookup = other.index_of(k)
        try:
            sel = np.array([lookup[int(g)] for g in self.cells(k)], dtype=np.int64)
        except KeyError as e:
            raise ValueError(f"box is not contained in the source box: cell {e}") from e
        return np.asarray(values)[sel]

    def contains_cell(self, k, index):
        S, pos = self.complex.cell_at(k, index)
        N = self.complex.N
        for i in range(self.complex.d):
            span = self.extent[i] - 1 if i in S else self.extent[i]
            if span < 1:
                return False
            off = (pos[i] - self.start[i]) % N
            if off >= span:
                return False
        return True

    def contains_box(self, other: "Box"):
        N = self.complex.N
        for i in range(self.complex.d):
            off = (other.start[i] - self.start[i]) % N
            if off + other.extent[i] > self.extent[i]:
                return False
        return True

    # -- local array layout ------------------------------------------------------

    def to_blocks(self, k, flat):
        out = {}
        pos = 0
        for S in self.blocks(k):
            shape = self.block_shape(S)
            n = int(np.prod(shape))
            out[S] = np.asarray(flat)[pos : pos + n].reshape(shape)
            pos += n
        return out

    def from_blocks(self, k, blocks):
        pieces = [np.asarray(blocks[S]).ravel() for S in self.blocks(k)]
        if not pieces:
            return np.zeros(0)
        return np.concatenate(pieces)


def intersect_boxes(a: Box, b: Box):
    """Intersection of two boxes, or None when empty.

    Raises if a circular interval intersection is disconnected (cannot happen
    for the covers built here; guarded to fail loudly rather than silently).
    """
    if a.complex is not b.complex:
        raise ValueError("boxes live on different complexes")
    N = a.complex.N
    start, extent = [], []
    for i in range(a.complex.d):
        pieces = _interval_intersection(
            a.start[i], a.extent[i], b.start[i], b.extent[i], N
        )
        if not pieces:
            return None
        if len(pieces) > 1:
            raise ValueError(
                f"disconnected overlap on axis {i}: {pieces}; the cover arcs are too wide"
            )
        s, L = pieces[0]
        start.append(s)
        extent.append(L)
    return Box(a.complex, tuple(start), tuple(extent))


def _interval_intersection(s1, L1, s2, L2, N):
    """Intersect circular vertex intervals; list of (start, length) pieces."""
    if L1 >= N and L2 >= N:
        return [(s1, N)]
    one = set((s1 + j) % N for j in range(L1))
    two = set((s2 + j) % N for j in range(L2))
    common = sorted(one & two)
    if not common:
        return []
    # stitch circular runs
    runs = []
    run = [common[0]]
    for v in common[1:]:
        if v == (run[-1] + 1) % N:
            run.append(v)
        else:
            runs.append(run)
            run = [v]
    runs.append(run)
    if len(runs) > 1 and (runs[0][0] == (runs[-1][-1] + 1) % N):
        runs[0] = runs.pop() + runs[0]
    return [(r[0], len(r)) for r in runs]


def box_coboundary(box: Box, k, values):
    """Coboundary within the box (local layout in, local layout out)."""
    cx = box.complex
    blocks = box.to_blocks(k, values)
    out = {}
    for S in box.blocks(k + 1):
        shape = box.block_shape(S)
        acc = np.zeros(shape, dtype=np.asarray(values).dtype)
        for j, i in enumerate(S):
            S2 = tuple(x for x in S if x != i)
            if S2 not in blocks:
                continue
            src = blocks[S2]
            sl_hi = tuple(
                slice(1, None) if u == i else slice(None) for u in range(cx.d)
            )
            sl_lo = tuple(
                slice(0, -1) if u == i else slice(None) for u in range(cx.d)
            )
            term = src[sl_hi] - src[sl_lo]
            if j % 2:
                term = -term
            acc += term
        out[S] = acc
    return box.from_blocks(k + 1, out)


def box_primitive(box: Box, k, values):
    """Primitive of a closed k-cochain on the box (k >= 1), local layout.

    Contraction homotopy toward the base corner: integrate along each axis t
    after collapsing all later axes to their base slice.  d(result) equals
    the input exactly (up to floating-point addition) whenever the input is
    closed; no closedness check is performed here.
    """
    if k < 1:
        raise ValueError("primitives exist for degree >= 1")
    cx = box.complex
    blocks = box.to_blocks(k, values)
    out = {
        S2: np.zeros(box.block_shape(S2), dtype=float)
        for S2 in box.blocks(k - 1)
    }
    for t in range(cx.d):
        for S2 in box.blocks(k - 1):
            if any(e >= t for e in S2):
                continue
            S = tuple(sorted(S2 + (t,)))
            if S not in blocks:
                continue
            src = blocks[S]
            # collapse axes beyond t to their base slice
            sel = tuple(
                slice(None) if u <= t else slice(0, 1) for u in range(cx.d)
            )
            base = src[sel].astype(float)
            # exclusive cumulative sum along axis t: value at vertex v is the
            # sum over edges 0..v-1
            pad_shape = list(base.shape)
            pad_shape[t] = 1
            csum = np.concatenate(
                [np.zeros(pad_shape), np.cumsum(base, axis=t)], axis=t
            )
            if len(S2) % 2:
                csum = -csum
            out[S2] += csum  # broadcasts over the collapsed later axes
    return box.from_blocks(k - 1, out)
