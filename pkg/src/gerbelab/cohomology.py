"""Integer cohomology of finite (co)chain complexes, with usable coordinates.

Works for anything exposing ``n_cells(k)`` and ``boundary_matrix(k)`` (sparse
or dense integer matrices whose columns are boundaries of k-cells): the
cubical torus complexes and the cover nerves both do.

Beyond Betti numbers and torsion, the reduction keeps the Smith certificates,
so it can

* hand out explicit integer generator cocycles,
* reduce any integer cocycle to its class coordinates (free + torsion),
* produce an integer primitive when the class vanishes,
* reduce real-valued cocycles: class coordinates by least squares together
  with a real primitive and the residual, which is how staircase outputs are
  split into an integral part and an exact correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .snf import SmithNormalForm, smith_normal_form, solve_integer

__all__ = ["CohomologyGroup", "integer_cohomology", "betti_numbers"]


def _dense_int(mat, shape):
    if mat is None:
        return np.zeros(shape, dtype=np.int64)
    if sp.issparse(mat):
        return np.asarray(mat.todense(), dtype=np.int64)
    return np.asarray(mat, dtype=np.int64)


def _exact_matmul(A, B):
    """Integer matrix product, falling back to bignum when int64 could clip."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.dtype != object and B.dtype != object:
        bound = (
            int(np.abs(A).max(initial=0))
            * int(np.abs(B).max(initial=0))
            * max(1, A.shape[1])
        )
        if bound < 2**62:
            return A.astype(np.int64) @ B.astype(np.int64)
    return A.astype(object) @ B.astype(object)


@dataclass
class ClassCoordinates:
    free: np.ndarray          # integers, one per free generator
    torsion: tuple            # residues mod the torsion orders

    @property
    def is_zero(self):
        return not np.any(self.free) and not any(self.torsion)


@dataclass
class CohomologyGroup:
    """H^k of a chain-complex-like object, with certificate-backed maps."""

    degree: int
    betti: int
    torsion: tuple
    free_generators: np.ndarray = field(repr=False)     # (n_k, betti)
    torsion_generators: np.ndarray = field(repr=False)  # (n_k, #torsion)
    _kernel: np.ndarray = field(repr=False)             # (n_k, z)
    _kernel_coords: object = field(repr=False)          # callable z -> coords
    _quot_snf: SmithNormalForm | None = field(repr=False)
    _image_matrix: np.ndarray = field(repr=False)       # delta_{k-1}, dense
    _delta_k: object = field(repr=False)                # sparse/dense or None

    def describe(self):
        parts = ["Z"] * self.betti + [f"Z/{t}" for t in self.torsion]
        return " + ".join(parts) if parts else "0"

    # -- integer side ---------------------------------------------------------

    def is_cocycle(self, z):
        if self._delta_k is None:
            return True
        return not np.any(self._delta_k @ np.asarray(z))

    def class_coordinates(self, z) -> ClassCoordinates:
        """Coordinates of an integer cocycle's class in the chosen basis."""
        z = np.asarray(z)
        if not self.is_cocycle(z):
            raise ValueError("not a cocycle: coboundary is nonzero")
        y = self._kernel_coords(z)
        if self._quot_snf is None:
            return ClassCoordinates(free=np.asarray(y, dtype=np.int64), torsion=())
        w = self._quot_snf.U.astype(object) @ y
        r = self._quot_snf.rank
        free = np.array([int(v) for v in w[r:]], dtype=np.int64)
        tors = []
        for i in range(r):
            d = int(self._quot_snf.diagonal[i])
            if d > 1:
                tors.append(int(w[i]) % d)
        return ClassCoordinates(free=free, torsion=tuple(tors))

    def integer_primitive(self, z):
        """Integer w with delta w = z, or None when [z] != 0."""
        z = np.asarray(z)
        coords = self.class_coordinates(z)
        if not coords.is_zero:
            return None
        y = self._kernel_coords(z)
        if self._quot_snf is None:
            # kernel coords must vanish outright and there is nothing to solve
            return np.zeros(self._image_matrix.shape[1], dtype=np.int64)
        yk = np.array([int(v) for v in y], dtype=object)
        Bk = self._reduced_image()
        sol = solve_integer(Bk, yk, self._quot_snf)
        return sol

    def _reduced_image(self):
        return self._reduced_image_cache

    # -- real side --------------------------------------------------------------

    def reduce_real(self, z, tol=1e-9):
        """Split a real cocycle into generator coordinates and a primitive.

        Returns (t, kappa, residual): z = free_generators @ t + delta kappa
        up to the reported least-squares residual (torsion generators are
        boundaries over the reals and need no separate coordinates).
        """
        z = np.asarray(z, dtype=float)
        if self._delta_k is not None:
            dz = self._delta_k @ z
            worst = float(np.abs(dz).max()) if dz.size else 0.0
            if worst > tol * max(1.0, float(np.abs(z).max())):
                raise ValueError(f"not a real cocycle: |delta z| = {worst:.3e}")
        G = self.free_generators.astype(float)
        B = self._image_matrix.astype(float)
        A = np.hstack([G, B]) if G.size else B
        if A.size == 0:
            return np.zeros(0), np.zeros(B.shape[1]), float(np.linalg.norm(z))
        sol, *_ = np.linalg.lstsq(A, z, rcond=None)
        t = sol[: self.betti]
        kappa = sol[self.betti :]
        residual = float(np.linalg.norm(A @ sol - z))
        return t, kappa, residual


def _build(chain, k) -> CohomologyGroup:
    n_k = chain.n_cells(k)
    n_kp = chain.n_cells(k + 1)
    n_km = chain.n_cells(k - 1) if k >= 1 else 0

    delta_k = None
    if n_kp > 0:
        delta_k = chain.boundary_matrix(k + 1).T  # C^k -> C^{k+1}

    if delta_k is not None:
        Dk = _dense_int(delta_k, (n_kp, n_k))
        snf_k = smith_normal_form(Dk)
        rank = snf_k.rank
        kernel = np.array(snf_k.V[:, rank:], copy=True)
        V_inv = snf_k.V_inv

        def kernel_coords(z, V_inv=V_inv, rank=rank):
            x = V_inv.astype(object) @ np.asarray(z, dtype=object)
            if any(v != 0 for v in x[:rank]):
                raise ValueError("cocycle check passed but coordinates are inconsistent")
            return x[rank:]

    else:
        kernel = np.eye(n_k, dtype=np.int64)

        def kernel_coords(z):
            return np.asarray(z, dtype=object)

    z_dim = kernel.shape[1]

    if n_km > 0:
        B = _dense_int(chain.boundary_matrix(k).T, (n_k, n_km))
        # coordinates of the image columns inside the kernel, all at once
        if delta_k is not None:
            X = _exact_matmul(snf_k.V_inv, B)
            if np.any(X[: snf_k.rank, :]):
                raise ValueError("boundary columns are not cocycles; broken chain complex")
            Bk = X[snf_k.rank :, :]
        else:
            Bk = B
        if Bk.dtype == object:
            Bk = np.array([[int(v) for v in row] for row in Bk], dtype=np.int64)
        quot = smith_normal_form(Bk)
        r = quot.rank
        basis = quot.U_inv  # columns: basis of Z^z adapted to the image
        diag = quot.diagonal
        free_idx = list(range(r, z_dim))
        tors_idx = [i for i in range(r) if diag[i] > 1]
        free_gen = kernel.astype(np.int64) @ basis[:, free_idx].astype(np.int64) if free_idx else np.zeros((n_k, 0), dtype=np.int64)
        tors_gen = kernel.astype(np.int64) @ basis[:, tors_idx].astype(np.int64) if tors_idx else np.zeros((n_k, 0), dtype=np.int64)
        betti = len(free_idx)
        torsion = tuple(int(diag[i]) for i in tors_idx)
        group = CohomologyGroup(
            degree=k,
            betti=betti,
            torsion=torsion,
            free_generators=free_gen,
            torsion_generators=tors_gen,
            _kernel=kernel,
            _kernel_coords=kernel_coords,
            _quot_snf=quot,
            _image_matrix=B,
            _delta_k=delta_k,
        )
        group._reduced_image_cache = Bk
        return group

    # no incoming boundaries: H^k = kernel itself
    group = CohomologyGroup(
        degree=k,
        betti=z_dim,
        torsion=(),
        free_generators=kernel.astype(np.int64),
        torsion_generators=np.zeros((n_k, 0), dtype=np.int64),
        _kernel=kernel,
        _kernel_coords=kernel_coords,
        _quot_snf=None,
        _image_matrix=np.zeros((n_k, 0), dtype=np.int64),
        _delta_k=delta_k,
    )
    group._reduced_image_cache = np.zeros((z_dim, 0), dtype=np.int64)
    return group


def integer_cohomology(chain, k) -> CohomologyGroup:
    """H^k(chain, Z) with generators and reduction maps (cached per object)."""
    try:
        cache = chain._cohomology_cache
    except AttributeError:
        cache = {}
        try:
            chain._cohomology_cache = cache
        except AttributeError:
            pass
    if k not in cache:
        cache[k] = _build(chain, k)
    return cache[k]


def betti_numbers(chain, top) -> tuple:
    return tuple(integer_cohomology(chain, k).betti for k in range(top + 1))
