"""Loewner evolution driven by complex Brownian motion with covariance (a, b, c)."""

from .diagnostics import (DisconnectionSurvey, DriftReport, DualityReport, EnclosureReport,
                          StationarityReport, disconnection_probe, disconnection_survey,
                          drift_logderiv, drift_logmod, duality_test, stationarity_test)
from .estimators import PhaseClassifier, StationaryDensityEstimator
from .model import (CovarianceSpec, DrivingPath, SigmaError, sample_driving_path, transform_path,
                    validate_sigma, zero_path)
from .phases import PhaseReport, classify, phase_integrals, phase_scan
from .point_tracker import angular_coefficients, evolve_point, polar_evolve, sigma_time
from .slit_engine import (HullPointCloud, compose_forward, inverse_slit_imag, inverse_slit_real,
                          left_hull_cloud, right_hull_cloud, slit_map_imag, slit_map_real)
from .stationary import StationaryDensity, fokker_planck_oracle, stationary_density

__version__ = "0.1.0"

__all__ = [
    "CovarianceSpec", "DrivingPath", "SigmaError", "validate_sigma", "sample_driving_path",
    "zero_path", "transform_path",
    "slit_map_real", "slit_map_imag", "inverse_slit_real", "inverse_slit_imag",
    "compose_forward", "left_hull_cloud", "right_hull_cloud", "HullPointCloud",
    "evolve_point", "sigma_time", "polar_evolve", "angular_coefficients",
    "StationaryDensity", "stationary_density", "fokker_planck_oracle",
    "phase_integrals", "classify", "phase_scan", "PhaseReport",
    "drift_logmod", "drift_logderiv", "stationarity_test", "duality_test",
    "disconnection_probe", "disconnection_survey", "DriftReport", "StationarityReport",
    "DualityReport", "EnclosureReport", "DisconnectionSurvey",
    "StationaryDensityEstimator", "PhaseClassifier",
]
