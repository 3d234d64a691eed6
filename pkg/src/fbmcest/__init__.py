"""Preamble-based channel estimation for OFDM/OQAM filter-bank multicarrier systems."""

from .errors import ConfigError, DegeneratePilotError, InterferenceNotApproximable, ParameterError
from .fbcore import (CellRole, FrameGrid, PrototypeFilter, analyze, design_prototype,
                     synthesize)
from .interference import InterferenceTable, closed_form_weights, pseudo_pilots
from .preamble import Family, PreambleSpec, generate

__version__ = "0.1.0"

__all__ = [
    "CellRole", "ConfigError", "DegeneratePilotError", "Family", "FrameGrid",
    "InterferenceNotApproximable", "InterferenceTable", "ParameterError", "PreambleSpec",
    "PrototypeFilter", "analyze", "closed_form_weights", "design_prototype", "generate",
    "pseudo_pilots", "synthesize",
]
