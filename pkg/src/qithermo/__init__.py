"""Small-scale quantum information thermodynamics: entanglement measures,
probe measurements and second-law bookkeeping for measurement-feedback
processes on few-qubit systems."""

__version__ = "0.1.0"
