"""Computational laboratory for gerbes and semi-flat mirror geometry on flat tori.

Everything lives on the discretized torus T^d = (R/Z)^d, d <= 3, cut into N^d
cubical cells, with the flat metric scaled so the total volume is 2*pi.  The
package provides

* exact cubical (co)homology with Smith-normal-form certificates,
* a diagonal discrete Hodge theory (star, codifferential, Laplacians, Green's
  operators via conjugate gradients with harmonic deflation),
* circle-valued Cech machinery on a fixed good cover: gerbe cocycles,
  characteristic classes, trivializations, connections, holonomy,
* the point gerbe of a Dirac divisor and the linear-equivalence criterion
  for point divisors (dual Abel-Jacobi / holonomy routes),
* semi-flat mirror metrics: Hessian metrics, the real Monge-Ampere solver,
  Legendre-transform duality and exact flat Calabi-Yau algebra checks.

Numerical claims either hold exactly (integer / rational arithmetic) or are
checked against independently computed oracles in the test-suite.
"""

__version__ = "0.1.0"

from .cells import CubicalTorusComplex, Cochain, build_torus_complex, wedge_pairing
from .cohomology import CohomologyGroup, integer_cohomology
from .hodge import FlatMetric, HarmonicBasis, delta_current, harmonic_basis, hodge_star, solve_poisson
from .cover import GoodCover, good_cover_torus
from .cech import (
    CircleCochain,
    GerbeCocycle,
    Trivialization,
    characteristic_class,
    circle_coboundary,
    derham_to_cech,
    difference_of_trivializations,
    trivialize,
)
from .connection import (
    FlatTrivializationData,
    GerbeConnection,
    HolonomyClass,
    flat_trivialization,
    holonomy,
    point_gerbe_connection,
    surface_holonomy,
    validate_connection,
)
from .equivalence import (
    AbelJacobiClass,
    LatticePath,
    PointDivisor,
    abel_jacobi,
    holonomy_equivalent,
    linearly_equivalent,
)
from .syz import (
    HessianPotential,
    MirrorMetric,
    SemiFlatMetric,
    legendre_transform,
    ma_residual,
    mirror_metric_check,
    ricci_tensor,
    semi_flat_metric,
    solve_monge_ampere,
)
from .flatcy import FlatCYModel, flat_cy_check

__all__ = [
    "CubicalTorusComplex",
    "Cochain",
    "build_torus_complex",
    "wedge_pairing",
    "CohomologyGroup",
    "integer_cohomology",
    "FlatMetric",
    "HarmonicBasis",
    "hodge_star",
    "solve_poisson",
    "harmonic_basis",
    "delta_current",
    "GoodCover",
    "good_cover_torus",
    "CircleCochain",
    "GerbeCocycle",
    "Trivialization",
    "circle_coboundary",
    "characteristic_class",
    "trivialize",
    "difference_of_trivializations",
    "derham_to_cech",
    "GerbeConnection",
    "HolonomyClass",
    "FlatTrivializationData",
    "validate_connection",
    "holonomy",
    "flat_trivialization",
    "surface_holonomy",
    "point_gerbe_connection",
    "PointDivisor",
    "AbelJacobiClass",
    "LatticePath",
    "abel_jacobi",
    "linearly_equivalent",
    "holonomy_equivalent",
    "HessianPotential",
    "SemiFlatMetric",
    "MirrorMetric",
    "FlatCYModel",
    "semi_flat_metric",
    "ma_residual",
    "solve_monge_ampere",
    "ricci_tensor",
    "legendre_transform",
    "mirror_metric_check",
    "flat_cy_check",
    "__version__",
]
