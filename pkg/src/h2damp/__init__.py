"""H2-optimal external damper gains via structure-preserving parametric model reduction."""

from .errors import *  # noqa: F401,F403
from .h2norm import H2Value, h2_full_oracle, h2_norm, linearize
from .model import SecondOrderSystem, build_example1, build_example2, read_model, write_model
from .modalsolve import ModalSystem, shifted_solve, to_modal, transfer_eval
from .optimizer import feasibility_wrap, nelder_mead
from .pmor import (OptimizationReport, OptimizerSettings, aggregate, build_surrogate,
                   optimize_adaptive, optimize_predetermined)
from .sym2irka import initial_interpolation, project, sym2irka

__version__ = '0.1.0'
