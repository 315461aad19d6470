"""Quantum-probe spectroscopy of exactly solvable lattice models."""
__version__ = "0.1.0"

from .models import BHModel, KitaevModel, SyntheticModel, model_modes  # noqa: E402
from .probe import ProbeConfig  # noqa: E402
from .rates import TransitionCurve, sweep  # noqa: E402
from .reconstruct import ReconstructionOptions, detect_peaks, reconstruct_dispersion  # noqa: E402
from .correlations import ProbePair, gamma_bar, lightcone_map  # noqa: E402
from .lindblad import LindbladParams, evolve_numeric, extract_coupling  # noqa: E402

__all__ = [
    "BHModel", "KitaevModel", "SyntheticModel", "model_modes", "ProbeConfig", "TransitionCurve",
    "sweep", "ReconstructionOptions", "detect_peaks", "reconstruct_dispersion", "ProbePair",
    "gamma_bar", "lightcone_map", "LindbladParams", "evolve_numeric", "extract_coupling",
]
