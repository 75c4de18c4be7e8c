"""scikit-learn style wrappers.

:class:`BeamProfile` is a transformer: ``fit`` synthesizes the RIS phase for
a geometry, ``transform`` maps an incident field to the reflected one.
:class:`HierarchicalLocalizer` is an estimator whose ``predict`` maps UE
positions to (theta, range) estimates through the simulated search.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import InvalidArgumentError
from .field import reflect
from .localization import BeamwidthTable, PolarGrid, localize
from .phase import focus_at_point, focusing_phase, quantize, self_accelerating_phase, self_healing_phase, steering_phase


class BeamProfile(TransformerMixin, BaseEstimator):
    """Phase-profile synthesizer.

    Parameters
    ----------
    kind : {"steering", "focusing", "self_healing", "self_accelerating", "focus_point"}
    theta_i, theta_r : float
        Incidence and reflection angles in radians (steering).
    f0 : float
        Focal distance in metres (focusing).
    C, gamma : float
        Power-law coefficient and exponent (self_healing, self_accelerating).
        ``gamma=None`` picks 1 for self_healing and 1.5 for self_accelerating.
    target : tuple of float
        (x, z) focus point (focus_point).
    bits : int or None
        Quantize the fitted profile.
    """

    def __init__(self, kind="steering", theta_i=0.0, theta_r=0.0, f0=None, C=None, gamma=None, target=None,
                 bits=None):
        self.kind = kind
        self.theta_i = theta_i
        self.theta_r = theta_r
        self.f0 = f0
        self.C = C
        self.gamma = gamma
        self.target = target
        self.bits = bits

    def fit(self, ris, medium):
        """Build ``phase_`` for ``ris`` at ``medium``'s wavelength."""
        k = self.kind
        if k == "steering":
            prof = steering_phase(ris, medium, self.theta_i, self.theta_r)
        elif k == "focusing":
            prof = focusing_phase(ris, medium, self.f0)
        elif k == "self_healing":
            prof = self_healing_phase(ris, medium, self.C, 1.0 if self.gamma is None else self.gamma)
        elif k == "self_accelerating":
            prof = self_accelerating_phase(ris, medium, self.C, 1.5 if self.gamma is None else self.gamma)
        elif k == "focus_point":
            prof = focus_at_point(ris, medium, self.target)
        else:
            raise InvalidArgumentError(f"unknown profile kind {k!r}")
        if self.bits is not None:
            prof = quantize(prof, self.bits)
        self.phase_ = prof
        self.ris_ = ris
        return self

    def transform(self, incident):
        """Reflected field ``E_i * exp(j phase)``."""
        check_is_fitted(self, "phase_")
        return reflect(incident, self.phase_)


class HierarchicalLocalizer(BaseEstimator):
    """Two-phase hierarchical search as an estimator.

    ``fit(scenario)`` stores the scene and builds the beamwidth calibration
    table; ``predict(X)`` localizes a UE at each row ``(x, z)`` of ``X`` and
    returns ``(theta, range)`` estimates.
    """

    def __init__(self, fov_deg=(-60.0, 60.0), d_max=5.0, l1=5, l2=3, overlap=0.1):
        self.fov_deg = fov_deg
        self.d_max = d_max
        self.l1 = l1
        self.l2 = l2
        self.overlap = overlap

    def fit(self, scenario, y=None):
        self.scenario_ = scenario
        self.grid_ = PolarGrid.from_degrees(self.fov_deg, self.d_max)
        self.table_ = BeamwidthTable.build(scenario.ris, scenario.medium)
        return self

    def localize(self, X):
        """Full :class:`~riswave.localization.LocalizationResult` per UE."""
        check_is_fitted(self, "table_")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != 2:
            raise InvalidArgumentError(f"X must have shape (n, 2) of (x, z) positions, got {X.shape}")
        rng = np.random.default_rng(self.scenario_.seed)
        return [
            localize(self.scenario_.with_ue(tuple(p)), self.grid_, self.l1, self.l2, self.overlap,
                     table=self.table_, rng=rng)
            for p in X
        ]

    def predict(self, X):
        return np.array([[r.theta, r.range] for r in self.localize(X)])

    def score(self, X, y=None):
        """Fraction of UEs whose true (theta, range) lies in the returned sectors."""
        results = self.localize(X)
        X = np.atleast_2d(np.asarray(X, dtype=float))
        hits = [r.contains(math.atan2(-x, z), math.hypot(x, z)) for r, (x, z) in zip(results, X)]
        return float(np.mean(hits))
