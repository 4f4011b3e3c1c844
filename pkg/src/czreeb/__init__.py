"""Conley-Zehnder indices of symplectic paths and Reeb orbits on star-shaped levels in R^4."""

from .cz_geometric import CzResult, WindingInterval, cz_geometric, winding_interval
from .cz_spectral import (
    SymmetricPotential,
    crosscheck,
    cz_spectral,
    path_from_potential,
    potential_from_path,
    spectrum,
)
from .errors import CZReebError
from .linking import ClosedCurve, gauss_linking, link, self_linking
from .reeb import (
    PeriodicOrbit,
    StarShapedLevel,
    convexity_scan,
    find_orbit,
    flow,
    linearized_flow,
    orbit_cz,
    reeb_at,
)
from .sections import (
    area_preservation_check,
    ellipsoid_section,
    fixed_point,
    global_section_audit,
    return_map,
)
from .sp_path import SymplecticPath, maslov_index
from .strip import classify_end_matrix, strip_report

__version__ = "0.1.0"
