import logging
from abc import ABCMeta, abstractmethod

import numpy as np

from ..exceptions import DimensionMismatch
from .defaults import ABS_TOL, REL_TOL


logger = logging.getLogger(__name__)


def as_point(value, dim=None, name='point'):
    """
    Return `value` as a finite 1-D float array, checking its dimension
    against `dim` when given.
    """
    point = np.asarray(value, dtype=float)
    if point.ndim != 1:
        raise DimensionMismatch('{} must be a vector, got shape {}'.format(name, point.shape))
    if dim is not None and point.shape[0] != dim:
        raise DimensionMismatch('{} has dimension {:d}, expected {:d}'.format(
            name, point.shape[0], dim,
        ))
    if not np.all(np.isfinite(point)):
        raise DimensionMismatch('{} has non-finite entries'.format(name))
    return point


def default_tol(*scales):
    return ABS_TOL + REL_TOL * max([1.0] + [float(s) for s in scales])


class Projection(metaclass=ABCMeta):
    is_identity = False

    @abstractmethod
    def __call__(self, z):
        pass  # pragma: no cover

    def contains(self, y, tol=ABS_TOL):
        return np.linalg.norm(self(y) - y) <= tol


class FullSpace(Projection):
    is_identity = True

    def __repr__(self):
        return '<FullSpace>'

    def __eq__(self, other):
        return isinstance(other, FullSpace)

    def __ne__(self, other):
        return not self.__eq__(other)

    def __call__(self, z):
        return np.array(z, dtype=float)


class Box(Projection):
    def __init__(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != hi.shape:
            raise DimensionMismatch('Box bounds have different shapes')
        if np.any(lo > hi):
            raise ValueError('Box bounds must satisfy lo <= hi')
        self.lo = lo
        self.hi = hi

    def __repr__(self):
        return '<Box: dim {}>'.format(self.lo.shape[0])

    def __eq__(self, other):
        if not isinstance(other, Box):
            return False
        return all((
            np.array_equal(self.lo, other.lo),
            np.array_equal(self.hi, other.hi),
            ))

    def __ne__(self, other):
        return not self.__eq__(other)

    def __call__(self, z):
        return np.clip(z, self.lo, self.hi)


class VIProblem(object):
    """
    A monotone variational inequality VIP(F, C): the operator F, the action
    of its derivative F'(anchor) on a direction, an optional dense Jacobian,
    the projection onto C and the Lipschitz constant L of F'.

    Instances are treated as immutable and may be shared between threads.
    """
    def __init__(self, dim, operator, jacobian_product, lipschitz,
                 projection=None, jacobian=None, known_solution=None,
                 known_certificate=None, name=None, spec=None):
        if dim < 1:
            raise ValueError('Problem dimension must be positive')
        if not lipschitz > 0:
            raise ValueError('Lipschitz constant must be positive')
        self.dim = int(dim)
        self._operator = operator
        self._jacobian_product = jacobian_product
        self._jacobian = jacobian
        self.lipschitz = float(lipschitz)
        self.projection = projection if projection is not None else FullSpace()
        if known_solution is not None:
            known_solution = as_point(known_solution, self.dim, 'known_solution')
        self.known_solution = known_solution
        self.known_certificate = known_certificate
        self.name = name or 'problem'
        self.spec = spec

    def __repr__(self):
        return '<VIProblem {}: dim {}>'.format(self.name, self.dim)

    @property
    def is_unconstrained(self):
        return self.projection.is_identity

    @property
    def can_materialize(self):
        return self._jacobian is not None

    def F(self, x):
        x = as_point(x, self.dim, 'x')
        return np.asarray(self._operator(x), dtype=float)

    def apply_J(self, anchor, direction):
        anchor = as_point(anchor, self.dim, 'anchor')
        direction = as_point(direction, self.dim, 'direction')
        return np.asarray(self._jacobian_product(anchor, direction), dtype=float)

    def materialize_J(self, anchor):
        anchor = as_point(anchor, self.dim, 'anchor')
        if self._jacobian is None:
            return np.column_stack([
                self._jacobian_product(anchor, e) for e in np.eye(self.dim)
            ])
        return np.asarray(self._jacobian(anchor), dtype=float)

    def project(self, z):
        return self.projection(as_point(z, self.dim, 'z'))

    def metered(self, costs):
        return MeteredProblem(self, costs)


class MeteredProblem(object):
    """
    Wrapper that records every operator evaluation, Jacobian product and
    Jacobian materialization of a shared problem in `costs`. Owned by a
    single run.
    """
    def __init__(self, problem, costs):
        self.problem = getattr(problem, 'problem', problem)
        self.costs = costs

    def __repr__(self):
        return '<MeteredProblem {}>'.format(self.problem.name)

    def __getattr__(self, name):
        if name == 'problem':
            raise AttributeError(name)
        return getattr(self.problem, name)

    def F(self, x):
        self.costs.f_evals += 1
        return self.problem.F(x)

    def apply_J(self, anchor, direction):
        self.costs.j_products += 1
        return self.problem.apply_J(anchor, direction)

    def materialize_J(self, anchor):
        if self.problem.can_materialize:
            self.costs.j_materializations += 1
        else:
            self.costs.j_products += self.problem.dim
        return self.problem.materialize_J(anchor)

    def project(self, z):
        return self.problem.project(z)

    def metered(self, costs):
        return MeteredProblem(self.problem, costs)


def eval_linearization(problem, anchor, x, f_anchor=None):
    """
    Evaluate F_anchor(x) = F(anchor) + F'(anchor)(x - anchor).
    """
    anchor = as_point(anchor, problem.dim, 'anchor')
    x = as_point(x, problem.dim, 'x')
    if f_anchor is None:
        f_anchor = problem.F(anchor)
    return f_anchor + problem.apply_J(anchor, x - anchor)


def linearization_error(problem, anchor, x):
    return float(np.linalg.norm(problem.F(x) - eval_linearization(problem, anchor, x)))


def rounding_noise(problem, y, fy, nu=None):
    """
    Estimated rounding error of F(y) + ν: machine epsilon times √dim times
    the size of the terms F(y) is summed from, split as F'(y)y and
    F(y) - F'(y)y. Uses the unmetered problem, so it adds no counted work.
    """
    base = getattr(problem, 'problem', problem)
    jy = base.apply_J(y, y)
    scale = np.linalg.norm(jy) + np.linalg.norm(fy - jy)
    if nu is not None:
        scale += np.linalg.norm(nu)
    return float(np.finfo(float).eps * np.sqrt(base.dim) * scale)


def check_normal_cone(problem, y, nu, tol=None):
    """
    Return True when `nu` lies in the normal cone of C at `y`, using the
    fixed-point characterization project(y + nu) == y.
    """
    y = as_point(y, problem.dim, 'y')
    nu = as_point(nu, problem.dim, 'nu')
    if tol is None:
        tol = default_tol(np.linalg.norm(y))
    return bool(np.linalg.norm(problem.project(y + nu) - y) <= tol)


def sample_points(problem, count, rng, scale=1.0):
    dim = problem.dim
    for _ in range(count):
        yield problem.project(scale * rng.standard_normal(dim))


def monotonicity_gap(problem, rng, pairs=100, scale=1.0):
    """
    Smallest value of <F(x) - F(y), x - y> + 1e-10 (1 + ‖x‖‖y‖) over sampled
    pairs in C. A negative result means monotonicity failed.
    """
    worst = np.inf
    for _ in range(pairs):
        x, y = sample_points(problem, 2, rng, scale)
        gap = np.dot(problem.F(x) - problem.F(y), x - y)
        slack = 1e-10 * (1.0 + np.linalg.norm(x) * np.linalg.norm(y))
        worst = min(worst, gap + slack)
    return worst


def linearization_gap(problem, rng, pairs=1000, scale=1.0):
    """
    Smallest value of (L/2)‖x - y‖² - ‖F(x) - F_y(x)‖ over sampled pairs.
    """
    worst = np.inf
    for _ in range(pairs):
        x, y = sample_points(problem, 2, rng, scale)
        bound = 0.5 * problem.lipschitz * np.dot(x - y, x - y)
        worst = min(worst, bound - linearization_error(problem, y, x))
    return worst


def jacobian_consistency(problem, anchor, direction, step=1e-6):
    anchor = as_point(anchor, problem.dim, 'anchor')
    direction = as_point(direction, problem.dim, 'direction')
    difference = (problem.F(anchor + step * direction) - problem.F(anchor)) / step
    return float(np.linalg.norm(difference - problem.apply_J(anchor, direction)))


def projection_defects(problem, rng, samples=100, scale=3.0):
    """
    Return the worst idempotence defect ‖P(P(z)) - P(z)‖ and the worst
    nonexpansiveness excess ‖P(a) - P(b)‖ - ‖a - b‖ over sampled points.
    """
    idempotence = 0.0
    expansion = -np.inf
    for _ in range(samples):
        a = scale * rng.standard_normal(problem.dim)
        b = scale * rng.standard_normal(problem.dim)
        pa = problem.project(a)
        pb = problem.project(b)
        idempotence = max(idempotence, np.linalg.norm(problem.project(pa) - pa))
        expansion = max(expansion, np.linalg.norm(pa - pb) - np.linalg.norm(a - b))
    return idempotence, expansion
