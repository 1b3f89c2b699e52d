"""Weber location under q-th-powered l_p distances, 1 <= q <= p < 2."""

from .core import (
    IterateState,
    PowerNormParams,
    ProblemInstance,
    SingularityProfile,
    build_instance,
    cost,
    gradient,
    load_instance_csv,
    singularity_profile,
)
from .desingularity import (
    OptimalityCertificate,
    certify,
    descent_direction,
    desing_subgradient,
    desing_value,
    signed_power,
)
from .estimator import LpMedian
from .exceptions import (
    AtMinimum,
    CollinearWarning,
    LineSearchExhausted,
    LpWeberError,
    NonFiniteIterate,
    ParamOutOfRange,
    SingularPoint,
)
from .solver import (
    SolveResult,
    SolverConfig,
    convergence_rate,
    singular_step,
    solve,
    weiszfeld_step,
)

__version__ = "0.1.0"
