"""Exception hierarchy.

Every error carries a short machine-readable ``code`` which the command line
front end reports verbatim.
"""


class CZReebError(Exception):
    code = "error"

    def __init__(self, detail="", **info):
        super().__init__(detail)
        self.detail = detail
        self.info = info


# symplectic paths
class NonSymplecticPath(CZReebError):
    code = "non_symplectic_path"


class LiftResolutionFailure(CZReebError):
    code = "lift_resolution_failure"


class NotALoop(CZReebError):
    code = "not_a_loop"


class InconsistentWinding(CZReebError):
    code = "inconsistent_winding"


class DegenerateSection(CZReebError):
    code = "degenerate_section"


class GridMismatch(CZReebError):
    code = "grid_mismatch"


# geometric index
class DegeneracyMismatch(CZReebError):
    code = "degeneracy_mismatch"


class IntervalTooLong(CZReebError):
    code = "interval_too_long"


# spectral index
class IntegrationDivergence(CZReebError):
    code = "integration_divergence"


class NonPeriodicPotential(CZReebError):
    code = "non_periodic_potential"


class TruncationNotConverged(CZReebError):
    code = "truncation_not_converged"


class WindingAmbiguous(CZReebError):
    code = "winding_ambiguous"


class ZeroEigenvalueAmbiguity(CZReebError):
    code = "zero_eigenvalue_ambiguity"


# Reeb dynamics
class SingularSystem(CZReebError):
    code = "singular_system"


class StepSizeUnderflow(CZReebError):
    code = "step_size_underflow"


class FrameDegenerate(CZReebError):
    code = "frame_degenerate"


class NoConvergence(CZReebError):
    code = "no_convergence"


class NonMinimalWarning(UserWarning):
    pass


# linking
class PoleTooClose(CZReebError):
    code = "pole_too_close"


class CurvesTooClose(CZReebError):
    code = "curves_too_close"


class ResidualTooLarge(CZReebError):
    code = "residual_too_large"


class NotDisjoint(CZReebError):
    code = "not_disjoint"


class NotTransverse(CZReebError):
    code = "not_transverse"


class UnstableEps(CZReebError):
    code = "unstable_eps"


class InvalidCurve(CZReebError):
    code = "invalid_curve"


# transverse strip
class BoundaryCase(CZReebError):
    code = "boundary_case"


class ReconstructionFailure(CZReebError):
    code = "reconstruction_failure"


class InequalityViolated(CZReebError):
    code = "inequality_violated"


class SignChange(CZReebError):
    code = "sign_change"


# sections
class NoReturnWithinHorizon(CZReebError):
    code = "no_return_within_horizon"


class NoFixedPointFound(CZReebError):
    code = "no_fixed_point_found"


class TransversalityLost(CZReebError):
    code = "transversality_lost"
