"""Scalar-wave simulation of RIS wavefront engineering."""

__version__ = "0.1.0"

from .exceptions import (
    ConfigurationError,
    InfeasibleTargetError,
    InvalidArgumentError,
    MeasurementOutOfWindowError,
    ResolutionLimitError,
    RisWaveError,
    ScenarioFileError,
    SearchFailureError,
)
from .field import (
    ComplexFieldSlice,
    IntensityMap,
    ObstacleMask,
    apply_mask,
    march,
    propagate_direct,
    propagate_spectral,
    reflect,
)
from .phase import (
    PhaseProfile,
    compose,
    focus_at_point,
    focusing_phase,
    quantize,
    self_accelerating_phase,
    self_healing_phase,
    steering_phase,
    wrap,
)
from .scenario import Scenario, load_scenario
from .scene import (
    IncidentBeamSpec,
    Medium,
    RisGeometry,
    incident_field_on_ris,
    medium_from_frequency,
    medium_from_wavelength,
)
from .metrics import (
    caustic_trajectory,
    focal_ellipsoid,
    footprint_for_focal_size,
    fraunhofer_distance,
    reconstruction_distance,
    transverse_fwhm,
)
from .localization import (
    LocalizationResult,
    PolarGrid,
    SearchState,
    localize,
    phase1_angle_search,
    phase2_range_search,
    predict_warm_start,
    rss_measure,
)
from .estimators import BeamProfile, HierarchicalLocalizer
