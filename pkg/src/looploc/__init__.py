"""Sub-wavelength position measurement with closed-loop running-wave fields."""

from .dynamics import (
    DecayModel,
    DensityMatrix,
    DriveParams,
    build_generator,
    build_liouvillian,
    populations,
    steady_state,
)
from .errors import (
    AmbiguousBranch,
    DegenerateSteadyState,
    LoopLocError,
    NoConvergence,
    NonStaticPhase,
    NoSolution,
    VanishingDenominator,
    ZeroMagnification,
)
from .geometry import (
    FieldGeometry,
    LoopLayout,
    admissible_magnifications,
    diamond_layout,
    loop_phase,
    magnification,
    multiphoton_detuning,
    reduce_phase,
    wavevector_mismatch,
)
from .localization import (
    CandidateSet,
    Measurement,
    PositionInterval,
    ProtocolResult,
    StageResult,
    candidates,
    coarse_to_fine,
    invert_ratio,
    optimize_phase,
    propagate_error,
    select_branch,
    simulate_measurement,
)
from .observables import (
    RatioCurve,
    curve_extrema,
    curve_maximum,
    drive_quality,
    ratio_analytic,
    ratio_curve,
    ratio_numeric,
    slope,
)

__version__ = "0.1.0"
