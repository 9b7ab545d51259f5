"""Rough paths with inhomogeneous roughness: signatures, extension, integration and RDEs."""

from .errors import (
    ConvergenceError,
    InvalidMultiIndexError,
    MissingLevelError,
    OffGridError,
    PiRoughError,
    PreconditionError,
    SpecMismatchError,
)
from .extension import AlmostFunctional, extend_signature, multiplicativity_defect, sew
from .grading import (
    GradingSpec,
    beta_lower_bound,
    degree_set,
    gamma_pi,
    multiindices,
    ordered_shuffles,
    shuffle_word,
)
from .integrate import almost_integral, defect_certificate, integrate_oneform
from .oneform import LipForm, constant_oneform, oneform_from_json, poly_oneform
from .path import (
    GridRoughPath,
    SampledPath,
    chen_eval,
    check_finite_pi_variation,
    control_from_path,
    lift_path,
    pi_variation_distance,
    refine,
    refine_uniform,
    segment_signature,
)
from .polynomial import Polynomial, from_callable
from .rde import (
    RdeProblem,
    RdeSolution,
    build_system_oneform,
    ode_oracle,
    picard_step,
    scaling_certificate,
    solve_rde,
    uniqueness_probe,
)
from .tensor import TensorElement, tensor_exp, tensor_mul

__version__ = "0.1.0"

__all__ = [n for n, v in list(globals().items()) if not n.startswith("_") and not isinstance(v, type(__import__("sys")))]
