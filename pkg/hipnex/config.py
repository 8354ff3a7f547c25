import json
import logging

from .exceptions import ParameterError
from .variational.defaults import BACKEND_AUTO, BACKENDS, SIGMA_HAT
from .variational.params import derive_params
from .variational.problems import PROBLEM_KINDS, make_problem


logger = logging.getLogger(__name__)

METHODS = ('hipnex', 'npe', 'hpe')

# Lipschitz constant of F' each problem kind is generated with by default.
DEFAULT_LIPSCHITZ = {
    'cubic': 1e-3,
    'affine': 1.0,
    'box': 1.0,
}


class RunConfig(object):
    """
    Flat settings of one run or benchmark grid. Every key of `DEFAULTS` may
    appear in a JSON config file; unknown keys are rejected.
    """
    DEFAULTS = {
        'problem': 'cubic',
        'n': 50,
        'seed': 0,
        'L': None,
        'cond': None,
        'method': 'hipnex',
        'backend': BACKEND_AUTO,
        'sigma_hat': SIGMA_HAT,
        'theta': None,
        'eta': None,
        'lambda1': None,
        'rho': 1e-6,
        'max_iter': 10000,
        'strict': False,
        'out': 'results',
        'grid_methods': ['hipnex-direct', 'hipnex-krylov', 'npe-direct', 'npe-krylov'],
        'grid_sizes': [200],
        'grid_seeds': [0],
        'workers': 1,
    }

    def __init__(self, **kwargs):
        unknown = set(kwargs) - set(self.DEFAULTS)
        if unknown:
            raise ParameterError('Unknown config keys: {}'.format(', '.join(sorted(unknown))))
        for key, default in self.DEFAULTS.items():
            value = kwargs.get(key, default)
            setattr(self, key, list(value) if isinstance(value, (list, tuple)) else value)

    def __repr__(self):
        return '<RunConfig: {} on {} n {} | seed {} | {}>'.format(
            self.method,
            self.problem,
            self.n,
            self.seed,
            self.backend,
        )

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return False
        return self.to_dict() == other.to_dict()

    def __ne__(self, other):
        return not self.__eq__(other)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)

    @classmethod
    def from_file(cls, path):
        with open(path, 'r', encoding='utf-8') as f:
            try:
                data = json.load(f)
            except ValueError as exc:
                raise ParameterError('{} is not valid JSON: {}'.format(path, exc))
        if not isinstance(data, dict):
            raise ParameterError('{} must hold a JSON object'.format(path))
        return cls.from_dict(data)

    def to_dict(self):
        return {key: getattr(self, key) for key in sorted(self.DEFAULTS)}

    def override(self, **kwargs):
        """
        Return a copy with every non-None keyword applied, the way command
        line flags override file values.
        """
        data = self.to_dict()
        data.update((key, value) for key, value in kwargs.items() if value is not None)
        return self.from_dict(data)

    @property
    def lipschitz(self):
        if self.L is not None:
            return self.L
        return DEFAULT_LIPSCHITZ.get(self.problem, 1.0)

    def problem_options(self):
        options = {}
        if self.problem == 'cubic':
            if self.L is not None:
                options['L'] = self.L
            if self.cond is not None:
                options['cond'] = self.cond
        elif self.L is not None:
            options['lipschitz'] = self.L
        return options

    def make_problem(self, n=None, seed=None):
        return make_problem(
            self.problem,
            self.n if n is None else n,
            seed=self.seed if seed is None else seed,
            **self.problem_options()
        )

    def params(self):
        return derive_params(
            self.sigma_hat,
            self.lipschitz,
            theta=self.theta,
            eta=self.eta,
            lambda1=self.lambda1,
        )

    def validate(self):
        if self.problem not in PROBLEM_KINDS:
            raise ParameterError('Unknown problem kind {!r}'.format(self.problem))
        if self.method not in METHODS:
            raise ParameterError('Unknown method {!r}; choose from {}'.format(
                self.method, ', '.join(METHODS),
            ))
        if self.backend not in BACKENDS + (BACKEND_AUTO,):
            raise ParameterError('Unknown back-end {!r}'.format(self.backend))
        if not self.rho > 0:
            raise ParameterError('rho must be positive, got {}'.format(self.rho))
        if self.max_iter < 0:
            raise ParameterError('max_iter must be nonnegative')
        if self.n < 1:
            raise ParameterError('n must be positive')
        if self.workers < 1:
            raise ParameterError('workers must be positive')
        for cell in self.grid_methods:
            method, _, backend = cell.partition('-')
            if method not in METHODS or (backend and backend not in BACKENDS + (BACKEND_AUTO,)):
                raise ParameterError('Bad grid method {!r}; use METHOD or METHOD-BACKEND'.format(cell))
        self.params()
        return self
