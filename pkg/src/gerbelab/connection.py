"""Gerbe connections on covered tori: validation, holonomy, point gerbes.

A connection consists of the circle 2-cocycle on the nerve (``transition``),
a 1-cochain on every pair overlap (``overlap_potentials``), a 2-cochain on
every cover set (``curvings``), and the global curvature 3-cochain.  All
local pieces use the box layouts from :mod:`gerbelab.boxes`.

Validation checks the three descent identities at every simplex and names
the first simplex that fails.  For flat connections the holonomy is the
degree-2 circle class read off by comparing local primitives of the curving
with the transition cocycle; its coordinates are reported per axis pair and,
on the three-torus, per dual axis.  ``surface_holonomy`` evaluates a closed
cubical 2-chain against the full connection (curving on faces, overlap
potentials across edges, transition values at corners) and is checked
against Stokes' theorem and homology invariance by the test-suite oracles.

Point gerbes: the canonical connection with constant curvature whose only
"charge" sits at a prescribed point.  A global codifferential potential has
a 2*pi flux defect at the point's cell; cover sets containing that cell
replace it with a grounded local solve on their own box, which removes the
defect there and raises the class to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import spsolve

from .boxes import Box, box_coboundary, box_primitive
from .cech import (
    TWO_PI,
    CechValidationError,
    CircleCochain,
    GerbeCocycle,
    staircase_from_potentials,
    wrap_unit,
)
from .cells import Cochain
from .cohomology import integer_cohomology
from .cover import GoodCover, good_cover_torus
from .hodge import FlatMetric, delta_current, solve_poisson

__all__ = [
    "ConnectionValidationError",
    "FlatTrivializationData",
    "GerbeConnection",
    "HolonomyClass",
    "connection_from_transfer",
    "difference_of_flat_trivializations",
    "flat_connection_from_two_form",
    "flat_trivialization",
    "holonomy",
    "point_gerbe_connection",
    "regauge",
    "surface_holonomy",
    "validate_connection",
]


class ConnectionValidationError(CechValidationError):
    pass


@dataclass
class GerbeConnection:
    """Cover-local gerbe connection data; see the module docstring."""

    cover: GoodCover
    transition: CircleCochain                 # degree-2 circle cochain
    overlap_potentials: dict                  # sorted pair -> 1-cochain on pair box
    curvings: dict                            # set index -> 2-cochain on set box
    curvature: np.ndarray                     # global 3-cochain

    def overlap(self, a, b):
        """Antisymmetric access to the pair potential."""
        if a == b:
            raise ValueError("overlap potential needs two distinct sets")
        if a < b:
            return self.overlap_potentials[(a, b)]
        return -self.overlap_potentials[(b, a)]

    def is_flat(self, tol=1e-9):
        return float(np.max(np.abs(self.curvature))) < tol

    def tensor(self, other: "GerbeConnection"):
        self._check_same_cover(other)
        return GerbeConnection(
            cover=self.cover,
            transition=(self.transition + other.transition).reduced(),
            overlap_potentials={
                k: v + other.overlap_potentials[k]
                for k, v in self.overlap_potentials.items()
            },
            curvings={k: v + other.curvings[k] for k, v in self.curvings.items()},
            curvature=self.curvature + other.curvature,
        )

    def inverse(self):
        return GerbeConnection(
            cover=self.cover,
            transition=(-self.transition).reduced(),
            overlap_potentials={k: -v for k, v in self.overlap_potentials.items()},
            curvings={k: -v for k, v in self.curvings.items()},
            curvature=-self.curvature,
        )

    def power(self, n):
        n = int(n)
        return GerbeConnection(
            cover=self.cover,
            transition=(n * self.transition).reduced(),
            overlap_potentials={k: n * v for k, v in self.overlap_potentials.items()},
            curvings={k: n * v for k, v in self.curvings.items()},
            curvature=n * self.curvature,
        )

    def characteristic_class(self):
        return GerbeCocycle(self.cover, self.transition).characteristic_class()

    def _check_same_cover(self, other):
        if other.cover is not self.cover:
            raise ValueError("connections live on different covers")


def connection_from_transfer(data):
    """Package a staircase transfer as a connection."""
    return GerbeConnection(
        cover=data.cover,
        transition=data.transition,
        overlap_potentials=dict(data.overlap_potentials),
        curvings=dict(data.local_potentials),
        curvature=np.asarray(data.curvature, dtype=float),
    )


def flat_connection_from_two_form(cover: GoodCover, omega):
    """Flat connection with a single global curving and trivial cocycle.

    ``omega`` must be a closed global 2-cochain; the curvature vanishes, the
    pair potentials are zero and the transition cocycle is trivial.
    """
    cx = cover.complex
    omega = np.asarray(omega, dtype=float)
    domega = cx.coboundary_values(2, omega)
    if domega.size and float(np.max(np.abs(domega))) > 1e-10:
        raise ValueError("the two-form must be closed")
    curvings = {a: box.restrict_global(2, omega) for a, box in enumerate(cover.sets)}
    overlaps = {
        pair: np.zeros(cover.intersection(pair).n_cells(1))
        for pair in cover.nerve.simplices[1]
    }
    return GerbeConnection(
        cover=cover,
        transition=CircleCochain.zeros(cover, 2),
        overlap_potentials=overlaps,
        curvings=curvings,
        curvature=np.zeros(cx.n_cells(3)),
    )


def regauge(conn: GerbeConnection, local_one_forms):
    """Shift the curvings by exact forms: F -> F + db, A -> A + (b_b - b_a).

    ``local_one_forms`` maps each set index to a 1-cochain on its box.  The
    transition cocycle and the curvature are untouched; every descent
    identity, and the holonomy class of a flat connection, is preserved.
    """
    cover = conn.cover
    curvings = {}
    for a, box in enumerate(cover.sets):
        b = np.asarray(local_one_forms[a], dtype=float)
        curvings[a] = conn.curvings[a] + box_coboundary(box, 1, b)
    overlaps = {}
    for pair in cover.nerve.simplices[1]:
        a, b = pair
        pbox = cover.intersection(pair)
        shift = pbox.restrict_from(cover.sets[b], 1, local_one_forms[b]) - \
            pbox.restrict_from(cover.sets[a], 1, local_one_forms[a])
        overlaps[pair] = conn.overlap_potentials[pair] + shift
    return GerbeConnection(
        cover=cover,
        transition=conn.transition,
        overlap_potentials=overlaps,
        curvings=curvings,
        curvature=conn.curvature,
    )


def validate_connection(conn: GerbeConnection, tol=1e-9):
    """Check the three descent identities; raise naming the failing simplex.

    (i) on every pair, d(overlap potential) matches the curving difference;
    (ii) on every triple, the alternating overlap sum is closed and its edge
    increments reproduce the transition cocycle's vertex differences times
    2*pi (modulo integers);
    (iii) on every set, d(curving) is the restricted curvature, and the
    curvature is globally closed.

    Returns a dict of worst-case residuals.
    """
    cover = conn.cover
    cx = cover.complex
    nerve = cover.nerve
    res = {"pair": 0.0, "triple_closed": 0.0, "triple_wrap": 0.0,
           "set": 0.0, "curvature_closed": 0.0}

    for pair in nerve.simplices[1]:
        a, b = pair
        pbox = cover.intersection(pair)
        lhs = box_coboundary(pbox, 1, conn.overlap_potentials[pair])
        rhs = pbox.restrict_from(cover.sets[b], 2, conn.curvings[b]) - \
            pbox.restrict_from(cover.sets[a], 2, conn.curvings[a])
        dev = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
        res["pair"] = max(res["pair"], dev)
        if dev > tol:
            raise ConnectionValidationError(
                f"overlap potential on {pair} fails d(A) = F_b - F_a "
                f"(residual {dev:.3e})", simplex=pair)

    for triple in nerve.simplices[2]:
        a, b, c = triple
        tbox = cover.intersection(triple)
        s = (
            tbox.restrict_from(cover.intersection((b, c)), 1, conn.overlap_potentials[(b, c)])
            - tbox.restrict_from(cover.intersection((a, c)), 1, conn.overlap_potentials[(a, c)])
            + tbox.restrict_from(cover.intersection((a, b)), 1, conn.overlap_potentials[(a, b)])
        )
        ds = box_coboundary(tbox, 1, s)
        dev = float(np.max(np.abs(ds))) if ds.size else 0.0
        res["triple_closed"] = max(res["triple_closed"], dev)
        if dev > tol:
            raise ConnectionValidationError(
                f"alternating overlap sum on {triple} is not closed "
                f"(residual {dev:.3e})", simplex=triple)
        gvals = conn.transition.values[triple]
        dev = _edge_increment_mismatch(tbox, s / TWO_PI, gvals)
        res["triple_wrap"] = max(res["triple_wrap"], dev)
        if dev > tol:
            raise ConnectionValidationError(
                f"overlap sum on {triple} does not match the transition "
                f"cocycle (wrap {dev:.3e})", simplex=triple)

    for a, box in enumerate(cover.sets):
        lhs = box_coboundary(box, 2, conn.curvings[a])
        rhs = box.restrict_global(3, conn.curvature)
        dev = float(np.max(np.abs(lhs - rhs))) if lhs.size else 0.0
        res["set"] = max(res["set"], dev)
        if dev > tol:
            raise ConnectionValidationError(
                f"curving on set {a} fails d(F) = curvature (residual {dev:.3e})",
                simplex=(a,))

    # curvature is a top-degree cochain, closed by definition
    return res


def _edge_increment_mismatch(box, one_form, vertex_vals):
    """Worst wrap distance between edge values and vertex differences."""
    cx = box.complex
    lookup = box.index_of(0)
    worst = 0.0
    edges = box.cells(1)
    vals = np.asarray(one_form)
    for li, g in enumerate(edges):
        S, pos = cx.cell_at(1, g)
        i = S[0]
        tail = lookup[int(cx.position_index(pos))]
        head_pos = list(pos)
        head_pos[i] += 1
        head = lookup[int(cx.position_index(tuple(head_pos)))]
        diff = vals[li] - (vertex_vals[head] - vertex_vals[tail])
        worst = max(worst, abs(float(wrap_unit(diff))))
    return worst


# -- holonomy of flat connections -------------------------------------------------


# Pairing a degree-2 circle class on the nerve with the shuffle cycle of the
# axis pair (j, k) measures the holonomy over that coordinate subtorus.  On
# the three-torus the component dual to axis i is the pair of the remaining
# axes, weighted by the sign of the permutation (i, j, k); these signs make
# the point-gerbe holonomy equal the displacement between the two points
# (pinned by the oracle tests, together with the overall sign below).
_DUAL_SIGN = {0: 1, 1: -1, 2: 1}
_CLASS_SIGN = 1


@dataclass
class HolonomyClass:
    """Holonomy of a flat gerbe: one circle value per axis pair."""

    by_pair: dict
    dual_components: tuple | None   # d=3 only: value for the subtorus dual to each axis
    constancy: float
    cocycle_wrap: float

    def is_trivial(self, tol=1e-8):
        return all(
            abs(float(wrap_unit(v))) < tol for v in self.by_pair.values()
        )

    def distance(self, other: "HolonomyClass"):
        return max(
            abs(float(wrap_unit(self.by_pair[k] - other.by_pair[k])))
            for k in self.by_pair
        )


def _curving_primitives(conn: GerbeConnection, curving_potentials=None):
    """Local 1-cochains B with dB = F on every set.

    A caller may supply its own primitives (any valid choice: different
    groundings, tree roots, gauge) — the extracted holonomy class must not
    depend on it, which the tests exercise.
    """
    cover = conn.cover
    if curving_potentials is None:
        return {
            a: box_primitive(box, 2, conn.curvings[a])
            for a, box in enumerate(cover.sets)
        }
    B = {}
    for a, box in enumerate(cover.sets):
        vals = np.asarray(curving_potentials[a], dtype=float)
        dev = box_coboundary(box, 1, vals) - conn.curvings[a]
        if dev.size and float(np.max(np.abs(dev))) > 1e-9:
            raise ValueError(f"supplied potential on set {a} has dB != F")
        B[a] = vals
    return B


def _overlap_primitives(conn: GerbeConnection, B):
    """Primitive f of A_ab + B_a - B_b on every pair box (flat case)."""
    cover = conn.cover
    f = {}
    for pair in cover.nerve.simplices[1]:
        a, b = pair
        pbox = cover.intersection(pair)
        u = (
            conn.overlap_potentials[pair]
            + pbox.restrict_from(cover.sets[a], 1, B[a])
            - pbox.restrict_from(cover.sets[b], 1, B[b])
        )
        f[pair] = box_primitive(pbox, 1, u)
    return f


def holonomy(conn: GerbeConnection, tol=1e-6, curving_potentials=None):
    """Holonomy class of a flat connection.

    Local primitives B of the curvings make every combination
    A_ab + B_a - B_b closed on its pair box; its primitive f, compared with
    the transition cocycle, is constant on every triple modulo 1.  Those
    constants form a circle 2-cocycle on the nerve whose pairings with the
    shuffle cycles are the holonomies over the coordinate subtori.
    """
    if not conn.is_flat():
        raise ConnectionValidationError("holonomy is defined for flat connections only")
    cover = conn.cover
    nerve = cover.nerve
    cx = cover.complex

    B = _curving_primitives(conn, curving_potentials)
    f = _overlap_primitives(conn, B)

    consts = np.zeros(nerve.n_cells(2))
    constancy = 0.0
    for col, triple in enumerate(nerve.simplices[2]):
        a, b, c = triple
        tbox = cover.intersection(triple)
        total = (
            tbox.restrict_from(cover.intersection((a, b)), 0, f[(a, b)])
            + tbox.restrict_from(cover.intersection((b, c)), 0, f[(b, c)])
            - tbox.restrict_from(cover.intersection((a, c)), 0, f[(a, c)])
        )
        cvals = total / TWO_PI - conn.transition.values[triple]
        mean, dev = _circular_mean(cvals)
        constancy = max(constancy, dev)
        if dev > tol:
            raise ConnectionValidationError(
                f"holonomy extraction not constant on {triple} (dev {dev:.3e})",
                simplex=triple)
        consts[col] = mean

    # the constants form a cocycle modulo 1
    wrap_dev = 0.0
    bt = nerve.boundary_matrix(3)
    delta = bt.T @ consts
    if delta.size:
        wrap_dev = float(np.max(np.abs(wrap_unit(delta))))
    if wrap_dev > tol:
        raise ConnectionValidationError(
            f"holonomy constants fail the cocycle identity (wrap {wrap_dev:.3e})")

    by_pair = {}
    for pair in _axis_pairs(cx.d):
        val = _CLASS_SIGN * nerve.pair_with_cycle(consts, pair)
        by_pair[pair] = float(val - np.floor(val))
    dual = None
    if cx.d == 3:
        dual = tuple(
            float(np.mod(_DUAL_SIGN[i] * by_pair[_dual_pair(i)], 1.0))
            for i in range(3)
        )
    return HolonomyClass(
        by_pair=by_pair,
        dual_components=dual,
        constancy=constancy,
        cocycle_wrap=wrap_dev,
    )


def _axis_pairs(d):
    return [(j, k) for j in range(d) for k in range(j + 1, d)]


def _dual_pair(i):
    return tuple(sorted(set(range(3)) - {i}))


def _circular_mean(vals):
    """Circle-valued mean and worst wrap deviation of an array."""
    vals = np.asarray(vals, dtype=float)
    if vals.size == 0:
        return 0.0, 0.0
    ang = TWO_PI * vals
    mean = float(np.arctan2(np.sin(ang).mean(), np.cos(ang).mean()) / TWO_PI) % 1.0
    dev = float(np.max(np.abs(wrap_unit(vals - mean))))
    return mean, dev


# -- flat trivializations ------------------------------------------------------------


@dataclass
class FlatTrivializationData:
    """Trivialization of a flat gerbe with trivial holonomy.

    ``curving_potentials`` holds a primitive of the curving on every set;
    ``cochain`` is the circle 1-cochain whose coboundary reproduces the
    transition cocycle; its lifted edge increments match the combination
    A_ab + B_a - B_b divided by 2*pi.
    """

    cover: GoodCover
    curving_potentials: dict
    cochain: CircleCochain
    constants: np.ndarray | None = None   # correction per nerve pair
    residuals: dict = field(default_factory=dict)


def flat_trivialization(conn: GerbeConnection, line_twist=None, tol=1e-6,
                        curving_potentials=None):
    """Trivialize a flat connection with trivial holonomy class.

    ``line_twist``, if given, is a real flat line cocycle on the nerve (one
    constant per pair, coboundary an integer on every triple) added to the
    correction constants; it shifts the answer by a flat line bundle.
    """
    if not conn.is_flat():
        raise ConnectionValidationError("only flat connections can be trivialized")
    cover = conn.cover
    nerve = cover.nerve

    B = _curving_primitives(conn, curving_potentials)
    f = _overlap_primitives(conn, B)

    consts = np.zeros(nerve.n_cells(2))
    constancy = 0.0
    for col, triple in enumerate(nerve.simplices[2]):
        a, b, c = triple
        tbox = cover.intersection(triple)
        total = (
            tbox.restrict_from(cover.intersection((a, b)), 0, f[(a, b)])
            + tbox.restrict_from(cover.intersection((b, c)), 0, f[(b, c)])
            - tbox.restrict_from(cover.intersection((a, c)), 0, f[(a, c)])
        )
        cvals = total / TWO_PI - conn.transition.values[triple]
        mean, dev = _circular_mean(cvals)
        constancy = max(constancy, dev)
        if dev > tol:
            raise ConnectionValidationError(
                f"trivialization data not constant on {triple} (dev {dev:.3e})",
                simplex=triple)
        # keep the real (unwrapped) level: subtracting the wrapped mean from
        # the actual values recovers the integer-shifted representative
        shift = np.round(np.mean(cvals - mean)) if cvals.size else 0.0
        consts[col] = mean + shift

    # holonomy must vanish: express the constants as integers plus a real
    # coboundary over the nerve
    group = integer_cohomology(nerve, 2)
    t, _, res = group.reduce_real(consts, tol=max(tol, 1e-6))
    n_coords = np.round(t).astype(np.int64)
    gap = float(np.max(np.abs(t - n_coords))) if t.size else 0.0
    hol_frac = np.abs(wrap_unit(t))
    if hol_frac.size and float(np.max(hol_frac)) > tol:
        raise ConnectionValidationError(
            f"holonomy class {tuple(np.mod(t, 1.0))} is nonzero; "
            "the connection admits no flat trivialization")
    target = consts
    if group.betti:
        target = target - group.free_generators[:, : group.betti] @ n_coords.astype(float)
    cob = np.asarray(nerve.boundary_matrix(2).T.todense(), dtype=float)
    kappa, *_ = np.linalg.lstsq(cob, target, rcond=None)
    corr_res = float(np.max(np.abs(cob @ kappa - target))) if target.size else 0.0

    if line_twist is not None:
        line_twist = np.asarray(line_twist, dtype=float)
        dev = float(np.max(np.abs(wrap_unit(cob @ line_twist)))) if line_twist.size else 0.0
        if dev > tol:
            raise ValueError("line_twist must be a flat line cocycle on the nerve")
        kappa = kappa - line_twist

    h_vals = {}
    for idx, pair in enumerate(nerve.simplices[1]):
        h_vals[pair] = f[pair] / TWO_PI - kappa[idx]
    cochain = CircleCochain(cover, 1, h_vals).reduced()

    wrap_dev = (cochain.coboundary() - conn.transition).wrap_norm()
    edge_dev = 0.0
    for pair in nerve.simplices[1]:
        pbox = cover.intersection(pair)
        a, b = pair
        u = (
            conn.overlap_potentials[pair]
            + pbox.restrict_from(cover.sets[a], 1, B[a])
            - pbox.restrict_from(cover.sets[b], 1, B[b])
        )
        edge_dev = max(edge_dev, _edge_increment_mismatch(
            pbox, u / TWO_PI, cochain.values[pair]))
    residuals = {
        "constancy": constancy,
        "correction_residual": corr_res,
        "reduction_residual": float(res),
        "cocycle_wrap": wrap_dev,
        "edge_increments": edge_dev,
        "class_gap": gap,
    }
    if wrap_dev > max(tol, 100 * corr_res + 1e-12):
        raise ConnectionValidationError(
            f"flat trivialization fails to reproduce the cocycle (wrap {wrap_dev:.3e})")
    return FlatTrivializationData(
        cover=cover,
        curving_potentials=B,
        cochain=cochain,
        constants=kappa,
        residuals=residuals,
    )


def difference_of_flat_trivializations(d1: FlatTrivializationData,
                                       d2: FlatTrivializationData, tol=1e-8):
    """Class of the flat line bundle separating two flat trivializations.

    The difference cochain xi = h1 - h2 satisfies (delta xi) = 0 mod 1, and
    together with the closed local 1-cochains beta_a = (B_a - B'_a)/2pi it
    forms a flat line bundle.  Subtracting a local primitive of beta from xi
    on every pair leaves constants; pairing them with the per-axis triangle
    cycles gives one circle value per axis (the bundle's holonomy).
    """
    cover = d1.cover
    nerve = cover.nerve
    diff = d1.cochain - d2.cochain
    phi = {}
    for a, box in enumerate(cover.sets):
        beta = (np.asarray(d1.curving_potentials[a], dtype=float)
                - np.asarray(d2.curving_potentials[a], dtype=float)) / TWO_PI
        closed = box_coboundary(box, 1, beta)
        if closed.size and float(np.max(np.abs(closed))) > tol:
            raise ConnectionValidationError(
                "trivializations do not share a connection "
                f"(potential difference on set {a} is not closed)")
        phi[a] = box_primitive(box, 1, beta)
    consts = np.zeros(nerve.n_cells(1))
    constancy = 0.0
    for idx, pair in enumerate(nerve.simplices[1]):
        a, b = pair
        pbox = cover.intersection(pair)
        vals = (
            diff.values[pair]
            - pbox.restrict_from(cover.sets[a], 0, phi[a])
            + pbox.restrict_from(cover.sets[b], 0, phi[b])
        )
        mean, dev = _circular_mean(vals)
        constancy = max(constancy, dev)
        if dev > tol:
            raise ConnectionValidationError(
                f"trivialization difference is not flat on {pair} (dev {dev:.3e})",
                simplex=pair)
        consts[idx] = mean
    per_axis = []
    for ax in range(cover.complex.d):
        val = nerve.pair_with_cycle(consts, (ax,))
        per_axis.append(float(np.mod(val, 1.0)))
    return diff, tuple(per_axis)


# -- surface holonomy ----------------------------------------------------------------


def surface_holonomy(conn: GerbeConnection, chain, assignment=None,
                     edge_assignment=None, vertex_assignment=None):
    """Holonomy of the connection over a closed cubical 2-chain, modulo 1.

    ``chain`` is an integer vector over 2-cells with zero boundary.  Each
    face f carries a cover set alpha(f), each participating edge a set
    beta(e) and each vertex a set sigma(v) (defaults: first containing set;
    override via the ``*assignment`` dicts mapping cell index -> set).  The
    value is

        (1/2pi) [ sum_f n_f F_alpha(f)
                  + sum_{f, e in df} n_f i(e,f) A_{alpha(f), beta(e)}(e) ]
        - sum_{f, e in df, v in de} n_f i(e,f) i(v,e) g_{alpha(f), beta(e), sigma(v)}(v)

    with i(.,.) the signed incidences.  Changing any single assignment
    shifts the overlap term by a triple-difference and the corner term by
    the matching cocycle-identity combination, so the total is independent
    of all three assignments modulo 1; additivity over faces plus the
    one-set Stokes identity then gives, for chains bounding a region R,
    the enclosed curvature integral over R divided by 2pi (the tests pin
    this against the volume connection).
    """
    cover = conn.cover
    cx = cover.complex
    chain = np.asarray(chain)
    if chain.shape != (cx.n_cells(2),):
        raise ValueError("chain must be an integer vector over 2-cells")
    if np.any(chain != np.round(chain)):
        raise ValueError("chain coefficients must be integers")
    chain = chain.astype(np.int64)
    bd = cx.boundary_matrix(2) @ chain
    if np.any(bd):
        raise ValueError("chain is not closed; surface holonomy needs a cycle")

    faces = {int(i): int(chain[i]) for i in np.nonzero(chain)[0]}
    if not faces:
        return 0.0

    def pick(k, idx, table, label):
        if table is not None and idx in table:
            s = int(table[idx])
            if not cover.sets[s].contains_cell(k, idx):
                raise ValueError(
                    f"assigned set {s} does not contain {label} {idx}")
            return s
        owners = cover.sets_containing_cell(k, idx)
        if not owners:
            raise ValueError(f"no cover set contains {label} {idx}")
        return owners[0]

    alpha = {f: pick(2, f, assignment, "face") for f in faces}

    B2 = cx.boundary_matrix(2).tocsc()
    face_edges = {}
    beta = {}
    sigma = {}
    ends = {}
    for fidx in faces:
        sl = slice(B2.indptr[fidx], B2.indptr[fidx + 1])
        pairs = list(zip(B2.indices[sl].tolist(), B2.data[sl].tolist()))
        face_edges[fidx] = pairs
        for e, _ in pairs:
            if e in beta:
                continue
            beta[e] = pick(1, e, edge_assignment, "edge")
            S, pos = cx.cell_at(1, e)
            tail = int(cx.position_index(pos))
            hp = list(pos)
            hp[S[0]] += 1
            head = int(cx.position_index(tuple(hp)))
            ends[e] = (tail, head)
            for v in (tail, head):
                if v not in sigma:
                    sigma[v] = pick(0, v, vertex_assignment, "vertex")

    total = 0.0
    corner = 0.0
    for fidx, nf in faces.items():
        a = alpha[fidx]
        abox = cover.sets[a]
        total += nf * conn.curvings[a][abox.index_of(2)[fidx]]
        for e, inc in face_edges[fidx]:
            b = beta[e]
            s = nf * int(inc)
            if b != a:
                key = (a, b) if a < b else (b, a)
                sgn = s if a < b else -s
                pbox = cover.intersection(key)
                total += sgn * conn.overlap_potentials[key][pbox.index_of(1)[e]]
            tail, head = ends[e]
            for v, iv in ((tail, -1), (head, 1)):
                c = sigma[v]
                triple = (a, b, c)
                if len({a, b, c}) != 3:
                    continue
                key = tuple(sorted(triple))
                tbox = cover.intersection(key)
                gval = conn.transition.value(triple)[tbox.index_of(0)[v]]
                corner -= s * iv * gval
    return float(np.mod(total / TWO_PI + corner, 1.0))


# -- point gerbes --------------------------------------------------------------------


def point_gerbe_connection(complex_or_cover, point, tol=1e-12):
    """Canonical gerbe connection of a point on the three-torus.

    The curvature is the constant volume cochain (total 2*pi).  A global
    potential from the Poisson solve carries a -2*pi flux defect at the
    point's cell; sets whose box contains that cell use a grounded local
    solve on their own box instead, which satisfies the descent equations
    exactly and carries the unit class.

    Returns (connection, diagnostics): diagnostics holds the Poisson
    residual, the flux difference of the two potentials through a small
    sphere around the point (exactly -2*pi), and the class.
    """
    if isinstance(complex_or_cover, GoodCover):
        cover = complex_or_cover
    else:
        cover = good_cover_torus(complex_or_cover)
    cx = cover.complex
    if cx.d != 3:
        raise ValueError("point gerbes are defined on three-dimensional tori")
    if cx.N < 4:
        raise ValueError(
            "point gerbes need at least 4 vertices per axis so the local "
            "patch around the point stays a proper box")
    metric = FlatMetric(cx)

    point = np.asarray(point, dtype=float)
    delta = delta_current(metric, point)
    cell_index = int(np.nonzero(delta.values)[0][0])
    _, cell_pos = cx.cell_at(3, cell_index)

    volume = np.full(cx.n_cells(3), metric.h ** cx.d)
    rhs = volume - TWO_PI * delta.values
    H = solve_poisson(metric, Cochain(cx, 3, rhs), tol=tol)
    lap = metric.laplacian_apply(3, H.values)
    poisson_res = float(np.max(np.abs(lap - rhs)))
    F0 = metric.codifferential(H).values

    lap_matrix = metric.laplacian_matrix(3).tocsr()

    def grounded_curving(box: Box):
        cells3 = box.cells(3)
        sub = lap_matrix[cells3][:, cells3]
        h_loc = spsolve(sub.tocsc(), volume[cells3])
        h_pad = np.zeros(cx.n_cells(3))
        h_pad[cells3] = h_loc
        return metric.codifferential(Cochain(cx, 3, h_pad)).values

    curvings = {}
    near = []
    for a, box in enumerate(cover.sets):
        if box.contains_cell(3, cell_index):
            curvings[a] = box.restrict_global(2, grounded_curving(box))
            near.append(a)
        else:
            curvings[a] = box.restrict_global(2, F0)

    # sphere-flux certificate on the standard patch around the point: the
    # global and defect-free local potentials differ by exactly one quantum
    # of flux through any small sphere enclosing the point
    wbox = Box(cx, tuple((c - 1) % cx.N for c in cell_pos), (4, 4, 4))
    f1_full = grounded_curving(wbox)
    ball_chain = np.zeros(cx.n_cells(3), dtype=np.int64)
    ball_chain[cell_index] = 1
    for i in range(3):
        for step in (-1, 1):
            q = list(cell_pos)
            q[i] = (q[i] + step) % cx.N
            ball_chain[cx.cell_index((0, 1, 2), tuple(q))] = 1
    sphere = cx.boundary_matrix(3) @ ball_chain
    flux_diff = float(np.dot(F0 - f1_full, sphere))

    # transitions must be supported near the point: away from it all sets
    # share the global potential and the gerbe patches trivially.  This pins
    # the flat twist left free by the staircase, making classes of tensor
    # differences position-faithful.
    support = [
        i for i, tri in enumerate(cover.nerve.simplices[2])
        if any(s in tri for s in near)
    ]
    A, transition, class_index, stair_res = staircase_from_potentials(
        cover, curvings, transition_support=support
    )
    far_norm = 0.0
    for i, tri in enumerate(cover.nerve.simplices[2]):
        if i not in support:
            far_norm = max(far_norm, float(np.max(np.abs(transition.values[tri]))))
    conn = GerbeConnection(
        cover=cover,
        transition=transition,
        overlap_potentials=A,
        curvings=curvings,
        curvature=volume,
    )
    diag = {
        "poisson_residual": poisson_res,
        "ball_boundary_flux_difference": flux_diff,
        "class": class_index,
        "cell": tuple(int(c) for c in cell_pos),
        "near_sets": tuple(near),
        "staircase_residuals": stair_res,
        "transition_far_norm": far_norm,
    }
    return conn, diag
