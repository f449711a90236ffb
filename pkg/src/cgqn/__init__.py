"""Conjugate gradients and Broyden-family quasi-Newton on quadratic programs,
with exact (rational) and float verification of their equivalence."""

from .cg import CgState, cg_init, cg_run, cg_step, steplength
from .linalg import Singular, Tolerance
from .problems import (
    NotPositiveDefinite,
    ProblemFormatError,
    ProblemSpec,
    QuadraticProblem,
    generate,
    make_problem,
    parse_spec,
    reference_problem,
)
from .qn import (
    BFGS,
    SR1,
    Breakdown,
    BreakdownKind,
    BroydenUpdate,
    NotBroyden,
    NotWellDefined,
    PhiSchedule,
    QnState,
    SR1Undefined,
    broyden_update,
    delta_of_phi,
    extract_phi,
    parse_schedule,
    phi_degenerate,
    phi_sr1,
    qn_init,
    qn_run,
    qn_step,
)
from .trace import IterationRecord, StopPolicy, Trace
from .verify import (
    VerificationReport,
    check_parallel,
    check_subspace_minimizer,
    check_update_conditions,
    gram_schmidt_conjugate,
    verify_equivalence,
)

__version__ = "0.1.0"
