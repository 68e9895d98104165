"""Template matching with temporal codes.

Two-level architecture: an adaptive level tracks unknown linear and
nonlinear perturbation parameters of an observed image so that a stored
template's temporal code can mimic the observation, and a detector level
of coupled bursting oscillators signals a match by synchronizing.
"""

__version__ = "0.1.0"
