"""Measurement of slit-encoded photonic qudits.

Diffraction model, polarization-ancilla POVM, measurement planning, photon
counting simulation and a batch command-line front end.
"""

from .errors import SpatialQuditError
from .mc import CountRecord, DetectorModel, estimate_expectation, estimate_probabilities, reconstruct_qubit, simulate_counts
from .optics import OpticalGeometry, detection_density, outcome_probabilities, postselected_state
from .planner import PovmPlan, SpatialPlan, plan_povm, plan_spatial, predicted_statistics
from .povm import LcdSettings, apply_outcome, synthesize_settings, total_density
from .qstate import DensityMatrix, Observable, eigenbasis, validate_density

__version__ = "0.1.0"

__all__ = [
    "CountRecord",
    "DensityMatrix",
    "DetectorModel",
    "LcdSettings",
    "Observable",
    "OpticalGeometry",
    "PovmPlan",
    "SpatialPlan",
    "SpatialQuditError",
    "apply_outcome",
    "detection_density",
    "eigenbasis",
    "estimate_expectation",
    "estimate_probabilities",
    "outcome_probabilities",
    "plan_povm",
    "plan_spatial",
    "postselected_state",
    "predicted_statistics",
    "reconstruct_qubit",
    "simulate_counts",
    "synthesize_settings",
    "total_density",
    "validate_density",
]
