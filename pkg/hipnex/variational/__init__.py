from .algorithm import (
    InvariantMonitor,
    RunResult,
    SolverState,
    Terminated,
    check_hpe_subsequence,
    check_rate_bounds,
    enlargement_gap,
    run,
    step,
)
from .baselines import NpeConfig, exact_resolvent_oracle, hpe_run, npe_run
from .core import Box, FullSpace, Projection, VIProblem, check_normal_cone, eval_linearization
from .costs import CostCounter
from .ergodic import ErgodicAccumulator, ErgodicCertificate, ergodic_direct, ergodic_update
from .params import (
    Params,
    budget_ergodic,
    budget_pointwise,
    derive_params,
    remark_budget_ergodic,
    remark_budget_pointwise,
)
from .problems import (
    AffineMonotoneSpec,
    BoxVipSpec,
    CubicMinMaxSpec,
    gen_affine,
    gen_box,
    gen_cubic_minmax,
    make_problem,
    random_orthogonal,
)
from .subproblem import (
    ApproxSolution,
    SubproblemInstance,
    solve_direct,
    solve_krylov,
    solve_subproblem,
    solve_tseng,
)
from .trace import CheckReport, IterationRecord, Trace
