"""coinlab: coin billiards on convex tables.

The coin map is the return dynamics of the non-smooth geodesic flow on a
cylinder of height ``ell`` capped by two copies of a convex table: a
classical billiard reflection followed by a shift of the boundary angle by
``ell * cot(theta)``.  The package provides the table geometry, the map and
its inverses and tangent maps, near-boundary expansions and rescaling
charts, generating functions, orbit classification, vertically mapped
graphs with their bounds, island measure estimates, and strip scans for
invariant curves, plus a CLI for portraits and verification.
"""

from .dynamics import (
    CoinSystem,
    LiftedPoint,
    OrbitRecord,
    PhasePoint,
    billiard_inverse,
    billiard_step,
    coin_inverse,
    coin_step,
    iterate,
    iterate_many,
    jacobian,
    make_system,
    shift_inverse,
    shift_step,
    tangent_map,
)
from .errors import (
    CoinLabError,
    DiscTableError,
    DomainError,
    NotInDeltaError,
    NumericError,
)
from .geometry import (
    ArcLengthTable,
    CurvatureProfile,
    PlaneCurve,
    Table,
    arclength_table,
    build_curve,
    curvature_profile,
    make_table,
    min_rho_dd,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
