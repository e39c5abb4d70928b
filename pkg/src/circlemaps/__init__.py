"""Expanding circle coverings: orbits, jets, metrizing conjugacies, parabolic normalization and return geometry."""

from .errors import *  # noqa: F401,F403
from .maps import (AdjustmentDiffeo, AverageLift, BlaschkePower, Compose, HdMap, IDENTITY, InverseDiffeo,  # noqa: F401
                   MobiusLift, QuadratureDiffeo, TrigLift, conjugate, deriv, eval_map, from_spec, iterate_with_deriv,
                   to_spec)
from .density import AdmissibleDensity, ConstantDensity, PushforwardDensity, TrigDensity  # noqa: F401

__version__ = "0.1.0"
