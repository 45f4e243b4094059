"""Smith normal form over the integers, with unimodular certificates.

The decomposition is ``U @ A @ V == D`` where ``U`` and ``V`` are unimodular
(integer matrices with integer inverses, which are returned alongside) and
``D`` is diagonal with nonnegative entries satisfying the divisibility chain
d1 | d2 | ... .  The certificates make every downstream claim checkable by
pure integer matrix multiplication, and they are what turns the reduction
into usable maps: kernels, integer solvability, quotient-group coordinates.

Row/column sweeps are vectorized on int64.  A guard watches for entry growth;
if any intermediate exceeds ``overflow_limit`` the whole computation is
restarted on an object-dtype (arbitrary precision) copy.  Incidence-type
matrices never trigger it, but random dense test matrices can.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SmithNormalForm",
    "smith_normal_form",
    "integer_kernel_basis",
    "solve_integer",
]


class _NeedExactArithmetic(Exception):
    """Raised internally when int64 entries risk overflow."""


@dataclass(frozen=True)
class SmithNormalForm:
    """Result of a Smith reduction U @ A @ V = diag(diagonal)."""

    diagonal: np.ndarray  # invariant factors, length min(m, n)
    rank: int
    U: np.ndarray
    U_inv: np.ndarray
    V: np.ndarray
    V_inv: np.ndarray
    shape: tuple

    def check(self, A) -> bool:
        """Exact verification of the certificate (integer matmul)."""
        A = np.asarray(A, dtype=object)
        m, n = self.shape
        D = np.zeros((m, n), dtype=object)
        k = min(m, n)
        D[range(k), range(k)] = list(self.diagonal)
        U = self.U.astype(object)
        V = self.V.astype(object)
        ok = bool(np.array_equal(U @ A @ V, D))
        eye_m = np.eye(m, dtype=object)
        eye_n = np.eye(n, dtype=object)
        ok &= bool(np.array_equal(U @ self.U_inv.astype(object), eye_m))
        ok &= bool(np.array_equal(self.V_inv.astype(object) @ V, eye_n))
        return ok


def _balanced_quotients(vals, p):
    """Quotients q so that vals - q*p has entries in [-|p|/2, |p|/2]."""
    q = vals // p
    r = vals - q * p  # same sign as p, |r| < |p|
    # shift remainders into the balanced window (strictly smaller than |p|/2
    # when possible) to speed up the Euclidean descent
    if p > 0:
        adjust = 2 * r > p
        q = q + adjust
    else:
        adjust = 2 * r < p
        q = q + adjust
    return q


class _Reducer:
    def __init__(self, A, exact, overflow_limit):
        dtype = object if exact else np.int64
        self.M = np.array(A, dtype=dtype, copy=True)
        if self.M.ndim != 2:
            raise ValueError("expected a 2-D integer matrix")
        m, n = self.M.shape
        self.U = np.eye(m, dtype=dtype)
        self.U_inv = np.eye(m, dtype=dtype)
        self.V = np.eye(n, dtype=dtype)
        self.V_inv = np.eye(n, dtype=dtype)
        self.exact = exact
        self.limit = overflow_limit

    # -- elementary operations, applied consistently to the certificates ----

    def swap_rows(self, i, j):
        if i == j:
            return
        for mat in (self.M, self.U):
            mat[[i, j], :] = mat[[j, i], :]
        self.U_inv[:, [i, j]] = self.U_inv[:, [j, i]]

    def swap_cols(self, i, j):
        if i == j:
            return
        for mat in (self.M, self.V):
            mat[:, [i, j]] = mat[:, [j, i]]
        self.V_inv[[i, j], :] = self.V_inv[[j, i], :]

    def negate_row(self, i):
        self.M[i, :] = -self.M[i, :]
        self.U[i, :] = -self.U[i, :]
        self.U_inv[:, i] = -self.U_inv[:, i]

    def _prebound(self, q, *mats):
        """Abort the int64 path if an update could overflow mid-product."""
        if self.exact:
            return
        qm = int(np.abs(q).max(initial=0))
        width = max(1, len(q))
        for mat in mats:
            worst = int(np.abs(mat).max(initial=0))
            if qm and worst and qm * worst * width > self.limit:
                raise _NeedExactArithmetic

    def row_eliminate(self, t, rows, q):
        """rows_i -= q_i * row_t (on M and U; U_inv gets the inverse op)."""
        self._prebound(q, self.M[t, :], self.U[t, :], self.U_inv)
        self.M[rows, :] -= q[:, None] * self.M[t, :]
        self.U[rows, :] -= q[:, None] * self.U[t, :]
        self.U_inv[:, t] += self.U_inv[:, rows] @ q

    def col_eliminate(self, t, cols, q):
        self._prebound(q, self.M[:, t], self.V[:, t], self.V_inv)
        self.M[:, cols] -= np.outer(self.M[:, t], q)
        self.V[:, cols] -= np.outer(self.V[:, t], q)
        self.V_inv[t, :] += q @ self.V_inv[cols, :]

    def add_col(self, dst, src):
        """col_dst += col_src."""
        self._prebound(np.array([1]), self.M, self.V, self.V_inv)
        self.M[:, dst] += self.M[:, src]
        self.V[:, dst] += self.V[:, src]
        self.V_inv[src, :] -= self.V_inv[dst, :]

    # -- pivot handling ------------------------------------------------------

    def _find_pivot(self, t):
        sub = self.M[t:, t:]
        rows, cols = np.nonzero(sub)
        if len(rows) == 0:
            return None
        vals = np.abs(sub[rows, cols])
        unit = np.nonzero(vals == 1)[0]
        pick = unit[0] if len(unit) else int(np.argmin(vals))
        return t + int(rows[pick]), t + int(cols[pick])

    def _clear_position(self, t):
        """Zero out row t and column t beyond the diagonal entry."""
        while True:
            p = self.M[t, t]
            col = self.M[t + 1 :, t]
            nz = np.nonzero(col)[0]
            if len(nz):
                q = _balanced_quotients(col[nz], p)
                live = np.nonzero(q)[0]
                if len(live):
                    self.row_eliminate(t, t + 1 + nz[live], q[live])
                col = self.M[t + 1 :, t]
                nz = np.nonzero(col)[0]
                if len(nz):
                    # remainder smaller than the pivot: promote it and retry
                    k = int(nz[np.argmin(np.abs(col[nz]))])
                    self.swap_rows(t, t + 1 + k)
                    continue
            row = self.M[t, t + 1 :]
            nz = np.nonzero(row)[0]
            if len(nz):
                p = self.M[t, t]
                q = _balanced_quotients(row[nz], p)
                live = np.nonzero(q)[0]
                if len(live):
                    self.col_eliminate(t, t + 1 + nz[live], q[live])
                row = self.M[t, t + 1 :]
                nz = np.nonzero(row)[0]
                if len(nz):
                    k = int(nz[np.argmin(np.abs(row[nz]))])
                    self.swap_cols(t, t + 1 + k)
                    continue
                # column ops may have refilled the pivot column
                if np.any(self.M[t + 1 :, t]):
                    continue
            break

    def run(self):
        m, n = self.M.shape
        t = 0
        while t < min(m, n):
            loc = self._find_pivot(t)
            if loc is None:
                break
            self.swap_rows(t, loc[0])
            self.swap_cols(t, loc[1])
            self._clear_position(t)
            t += 1
        rank = t
        for i in range(rank):
            if self.M[i, i] < 0:
                self.negate_row(i)
        # enforce the divisibility chain d_i | d_{i+1}
        changed = True
        while changed:
            changed = False
            for i in range(rank - 1):
                a = self.M[i, i]
                b = self.M[i + 1, i + 1]
                if b % a:
                    self.add_col(i, i + 1)
                    self._clear_position(i)
                    for j in (i, i + 1):
                        if self.M[j, j] < 0:
                            self.negate_row(j)
                    changed = True
        diag = np.array([self.M[i, i] for i in range(min(m, n))])
        return SmithNormalForm(
            diagonal=diag,
            rank=rank,
            U=self.U,
            U_inv=self.U_inv,
            V=self.V,
            V_inv=self.V_inv,
            shape=(m, n),
        )


def smith_normal_form(A, *, overflow_limit=2**40, exact=False) -> SmithNormalForm:
    """Diagonalize an integer matrix by unimodular row/column operations.

    Parameters
    ----------
    A : array_like, integer, shape (m, n)
    overflow_limit : int
        Entry-size watermark for the fast int64 path.
    exact : bool
        Force arbitrary-precision arithmetic from the start.

    Returns
    -------
    SmithNormalForm with ``U @ A @ V == diag`` and both inverses.
    """
    A = np.asarray(A)
    if not exact:
        try:
            return _Reducer(A, exact=False, overflow_limit=overflow_limit).run()
        except _NeedExactArithmetic:
            pass
    return _Reducer(A, exact=True, overflow_limit=overflow_limit).run()


def integer_kernel_basis(A, snf: SmithNormalForm | None = None) -> np.ndarray:
    """Basis (columns) of the integer kernel {x : A x = 0}.

    The columns of V beyond the rank form a saturated basis: every integer
    kernel vector is an integer combination of them.
    """
    if snf is None:
        snf = smith_normal_form(A)
    return np.array(snf.V[:, snf.rank :], copy=True)


def solve_integer(A, b, snf: SmithNormalForm | None = None):
    """One integer solution x of A x = b, or None when there is none."""
    A = np.asarray(A)
    if snf is None:
        snf = smith_normal_form(A)
    m, n = snf.shape
    y = snf.U.astype(object) @ np.asarray(b, dtype=object)
    x = np.zeros(n, dtype=object)
    for i in range(min(m, n)):
        d = snf.diagonal[i]
        if d != 0:
            if y[i] % d:
                return None
            x[i] = y[i] // d
    if any(y[i] != 0 for i in range(snf.rank, m)):
        return None
    out = snf.V.astype(object) @ x
    return np.array([int(v) for v in out], dtype=np.int64)
