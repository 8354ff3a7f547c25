import numpy as np

from ..exceptions import ParameterError
from .core import Box, VIProblem


def random_orthogonal(n, seed=None):
    """
    Haar-distributed orthogonal matrix: the Q factor of an i.i.d. standard
    Gaussian matrix with the signs of R's diagonal absorbed. `seed` may be
    an integer or a numpy Generator.
    """
    if n < 1:
        raise ParameterError('n must be positive')
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def singular_values(n, cond):
    """Geometric pattern from 1 down to 1/cond, so σ_max/σ_min == cond."""
    if n == 1:
        return np.ones(1)
    return cond ** (-np.arange(n) / (n - 1.0))


def initial_point(dim, seed):
    """Standard-normal start shared by every method run on (dim, seed)."""
    return np.random.default_rng([int(seed), 1]).standard_normal(dim)


class CubicMinMaxSpec(object):
    """
    min_x max_y (L/6)‖x‖³ + yᵀ(Ax - b) with A = U diag(s) Vᵀ.
    """
    kind = 'cubic'

    def __init__(self, n, seed=0, L=1e-3, cond=20.0, matrix=None, rhs=None):
        if n < 1:
            raise ParameterError('n must be positive')
        if not L > 0 or not cond >= 1:
            raise ParameterError('L must be positive and cond at least 1')
        self.n = int(n)
        self.seed = seed
        self.L = float(L)
        self.cond = float(cond)
        rng = np.random.default_rng(seed)
        if matrix is None:
            u = random_orthogonal(self.n, rng)
            v = random_orthogonal(self.n, rng)
            matrix = (u * singular_values(self.n, self.cond)).dot(v.T)
        self.A = np.asarray(matrix, dtype=float)
        if rhs is None:
            rhs = rng.standard_normal(self.n)
        self.b = np.asarray(rhs, dtype=float)

    def __repr__(self):
        return '<CubicMinMaxSpec: n {} | seed {} | L {} | cond {}>'.format(
            self.n, self.seed, self.L, self.cond,
        )

    def to_dict(self):
        return {'kind': self.kind, 'n': self.n, 'seed': self.seed, 'L': self.L, 'cond': self.cond}

    def split(self, z):
        return z[:self.n], z[self.n:]

    def operator(self, z):
        x, y = self.split(z)
        top = 0.5 * self.L * np.linalg.norm(x) * x + self.A.T.dot(y)
        return np.concatenate([top, self.b - self.A.dot(x)])

    def jacobian_product(self, z, d):
        x, _ = self.split(z)
        dx, dy = self.split(d)
        norm_x = np.linalg.norm(x)
        top = self.A.T.dot(dy)
        if norm_x > 0:
            top = top + 0.5 * self.L * (norm_x * dx + x * (x.dot(dx) / norm_x))
        return np.concatenate([top, -self.A.dot(dx)])

    def jacobian(self, z):
        x, _ = self.split(z)
        n = self.n
        norm_x = np.linalg.norm(x)
        J = np.zeros((2 * n, 2 * n))
        if norm_x > 0:
            J[:n, :n] = 0.5 * self.L * (norm_x * np.eye(n) + np.outer(x, x) / norm_x)
        J[:n, n:] = self.A.T
        J[n:, :n] = -self.A
        return J

    def solution(self):
        x_star = np.linalg.solve(self.A, self.b)
        y_star = -0.5 * self.L * np.linalg.norm(x_star) * np.linalg.solve(self.A.T, x_star)
        return np.concatenate([x_star, y_star])


def gen_cubic_minmax(spec):
    return VIProblem(
        dim=2 * spec.n,
        operator=spec.operator,
        jacobian_product=spec.jacobian_product,
        jacobian=spec.jacobian,
        lipschitz=spec.L,
        known_solution=spec.solution(),
        name='cubic-{}'.format(spec.n),
        spec=spec,
    )


def _monotone_matrix(rng, n):
    half = rng.standard_normal((n, n))
    skew = rng.standard_normal((n, n))
    return half.dot(half.T) / n, (skew - skew.T) / (2.0 * np.sqrt(n))


class AffineMonotoneSpec(object):
    """
    F(z) = Mz + q with M = S + K, S symmetric positive semidefinite and K
    skew-symmetric.
    """
    kind = 'affine'

    def __init__(self, n, seed=0, lipschitz=1.0, sym=None, skew=None, q=None):
        if n < 1:
            raise ParameterError('n must be positive')
        self.n = int(n)
        self.seed = seed
        self.lipschitz = float(lipschitz)
        rng = np.random.default_rng(seed)
        drawn_sym, drawn_skew = _monotone_matrix(rng, self.n)
        self.S = drawn_sym if sym is None else np.asarray(sym, dtype=float)
        self.K = drawn_skew if skew is None else np.asarray(skew, dtype=float)
        if not np.allclose(self.K, -self.K.T):
            raise ParameterError('K must be skew-symmetric')
        if not np.allclose(self.S, self.S.T) or np.linalg.eigvalsh(self.S).min() < -1e-12:
            raise ParameterError('S must be symmetric positive semidefinite')
        self.M = self.S + self.K
        self.q = rng.standard_normal(self.n) if q is None else np.asarray(q, dtype=float)

    def __repr__(self):
        return '<AffineMonotoneSpec: n {} | seed {}>'.format(self.n, self.seed)

    def to_dict(self):
        return {'kind': self.kind, 'n': self.n, 'seed': self.seed, 'lipschitz': self.lipschitz}

    def operator(self, z):
        return self.M.dot(z) + self.q

    def jacobian_product(self, z, d):
        return self.M.dot(d)

    def jacobian(self, z):
        return self.M

    def resolvent(self, lam, x):
        """The y solving λ(My + q) + y = x."""
        return np.linalg.solve(lam * self.M + np.eye(self.n), x - lam * self.q)

    def solution(self):
        try:
            return np.linalg.solve(self.M, -self.q)
        except np.linalg.LinAlgError:
            return None


def gen_affine(spec):
    return VIProblem(
        dim=spec.n,
        operator=spec.operator,
        jacobian_product=spec.jacobian_product,
        jacobian=spec.jacobian,
        lipschitz=spec.lipschitz,
        known_solution=spec.solution(),
        name='affine-{}'.format(spec.n),
        spec=spec,
    )


class BoxVipSpec(object):
    """
    Affine monotone F on the box [lo, hi]^n with q chosen so that a drawn
    z* and ν* ∈ N_C(z*) satisfy F(z*) + ν* = 0. Coordinates of z* at hi
    carry ν* > 0, those at lo carry ν* < 0, interior ones ν* = 0.
    """
    kind = 'box'

    def __init__(self, n, seed=0, lo=0.0, hi=1.0, active_upper=None,
                 active_lower=None, solution=None, lipschitz=1.0):
        if n < 1:
            raise ParameterError('n must be positive')
        if not lo < hi:
            raise ParameterError('The box needs lo < hi')
        self.n = int(n)
        self.seed = seed
        self.lo = float(lo)
        self.hi = float(hi)
        self.lipschitz = float(lipschitz)
        rng = np.random.default_rng(seed)
        sym, skew = _monotone_matrix(rng, self.n)
        self.M = sym + skew
        if solution is None:
            upper = self.n // 4 if active_upper is None else int(active_upper)
            lower = self.n // 4 if active_lower is None else int(active_lower)
            if upper + lower > self.n:
                raise ParameterError('More active coordinates than dimensions')
            order = rng.permutation(self.n)
            z_star = rng.uniform(0.1, 0.9, self.n) * (self.hi - self.lo) + self.lo
            z_star[order[:upper]] = self.hi
            z_star[order[upper:upper + lower]] = self.lo
        else:
            z_star = np.asarray(solution, dtype=float)
            if np.any(z_star < self.lo) or np.any(z_star > self.hi):
                raise ParameterError('The solution must lie in the box')
        magnitude = rng.uniform(0.5, 1.5, self.n)
        nu_star = np.where(z_star == self.hi, magnitude, 0.0)
        nu_star = np.where(z_star == self.lo, -magnitude, nu_star)
        self.z_star = z_star
        self.nu_star = nu_star
        self.q = -self.M.dot(z_star) - nu_star

    def __repr__(self):
        return '<BoxVipSpec: n {} | seed {} | [{}, {}]>'.format(self.n, self.seed, self.lo, self.hi)

    def to_dict(self):
        return {'kind': self.kind, 'n': self.n, 'seed': self.seed, 'lo': self.lo, 'hi': self.hi}

    def operator(self, z):
        return self.M.dot(z) + self.q

    def jacobian_product(self, z, d):
        return self.M.dot(d)

    def jacobian(self, z):
        return self.M


def gen_box(spec):
    return VIProblem(
        dim=spec.n,
        operator=spec.operator,
        jacobian_product=spec.jacobian_product,
        jacobian=spec.jacobian,
        lipschitz=spec.lipschitz,
        projection=Box(np.full(spec.n, spec.lo), np.full(spec.n, spec.hi)),
        known_solution=spec.z_star,
        known_certificate=spec.nu_star,
        name='box-{}'.format(spec.n),
        spec=spec,
    )


PROBLEM_KINDS = {
    CubicMinMaxSpec.kind: (CubicMinMaxSpec, gen_cubic_minmax),
    AffineMonotoneSpec.kind: (AffineMonotoneSpec, gen_affine),
    BoxVipSpec.kind: (BoxVipSpec, gen_box),
}


def make_problem(kind, n, seed=0, **options):
    """
    Build a problem from its kind name ('cubic', 'affine' or 'box'). For
    'cubic', `n` is the size of each block, so the problem has dimension 2n.
    """
    try:
        spec_type, generator = PROBLEM_KINDS[kind]
    except KeyError:
        raise ParameterError('Unknown problem kind {!r}; choose from {}'.format(
            kind, ', '.join(sorted(PROBLEM_KINDS)),
        ))
    return generator(spec_type(n, seed=seed, **options))
