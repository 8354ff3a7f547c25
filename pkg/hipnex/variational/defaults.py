ABS_TOL = 1e-9
REL_TOL = 1e-9

# Exact-zero test of the return branch, relative to 1 + ‖F(y)‖ + ‖ν‖.
RETURN_TOL = 1e-14

# F(y) + ν within this multiple of its estimated rounding error stops a run.
FLOOR_FACTOR = 100.0

# Rounding allowance of relative-error tests, in units of the estimated noise.
ROUNDING_MARGIN = 10.0

INVARIANT_SLACK = 1e-8
LAMBDA_LAW_RTOL = 1e-10
ERGODIC_FLOOR = 1e-10

NORM_INFLATION = 1.05
NORM_ITERATIONS = 50

TSENG_SAFETY_FACTOR = 2.0
TSENG_MAX_INNER = 50000
KRYLOV_MAX_INNER = 2000
KRYLOV_RESTART = 50

DIRECT_MAX_DIM = 500

SIGMA_HAT = 0.25
NPE_SIGMA_L = 0.1
NPE_SIGMA_U = 0.5
NPE_MAX_TRIALS = 50

BACKEND_DIRECT = 'direct'
BACKEND_KRYLOV = 'krylov'
BACKEND_TSENG = 'tseng'
BACKEND_AUTO = 'auto'

BACKENDS = (BACKEND_DIRECT, BACKEND_KRYLOV, BACKEND_TSENG)

STEP_LARGE = 'LARGE'
STEP_SMALL = 'SMALL'
STEP_SKIP = 'SKIP'
STEP_RETURN = 'RETURN'

CRITERION_POINTWISE = 'pointwise'
CRITERION_ERGODIC = 'ergodic'
CRITERION_EXACT = 'exact'
CRITERION_FLOOR = 'floor'
CRITERION_MAX_ITER = 'max_iter'
