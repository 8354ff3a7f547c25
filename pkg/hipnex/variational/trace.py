from .defaults import STEP_LARGE


class IterationRecord(object):
    def __init__(self, k, lam, lam_next, step_class, solved, residual_norm,
                 invariant_a, invariant_b, step_length, inner_iterations,
                 linear_solves, costs, wall_time_s, a_count, b_count,
                 ergodic_v_norm=None, ergodic_eps=None, x_prev=None, x=None,
                 y=None, w=None, noise=0.0):
        self.k = k
        self.lam = lam
        self.lam_next = lam_next
        self.step_class = step_class
        self.solved = solved
        self.residual_norm = residual_norm
        self.invariant_a = invariant_a
        self.invariant_b = invariant_b
        self.step_length = step_length
        self.inner_iterations = inner_iterations
        self.linear_solves = linear_solves
        self.costs = costs
        self.wall_time_s = wall_time_s
        self.a_count = a_count
        self.b_count = b_count
        self.ergodic_v_norm = ergodic_v_norm
        self.ergodic_eps = ergodic_eps
        self.x_prev = x_prev
        self.x = x
        self.y = y
        self.w = w
        self.noise = noise

    def __repr__(self):
        return '<IterationRecord {}: {} | λ {:.3e} | residual {:.3e}>'.format(
            self.k,
            self.step_class,
            self.lam,
            self.residual_norm,
        )

    @property
    def is_large(self):
        return self.step_class == STEP_LARGE

    @property
    def has_points(self):
        return self.y is not None

    def as_row(self):
        return {
            'k': self.k,
            'wall_time_s': self.wall_time_s,
            'lambda': self.lam,
            'residual_norm': self.residual_norm,
            'step_class': self.step_class,
            'inner_iters': self.inner_iterations,
            'cum_linear_solves': self.costs.linear_solves,
            'cum_F_evals': self.costs.f_evals,
            'cum_J_evals': self.costs.j_evals,
        }


class Trace(object):
    """
    Ordered collection of the IterationRecords of one run.
    """
    COLUMNS = ('k', 'wall_time_s', 'lambda', 'residual_norm', 'step_class',
               'inner_iters', 'cum_linear_solves', 'cum_F_evals', 'cum_J_evals')

    def __init__(self, records=None):
        self._records = list(records or ())

    def __repr__(self):
        return '<Trace: {} iterations>'.format(len(self))

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return False
        return self._records == other._records

    def __ne__(self, other):
        return not self.__eq__(other)

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        for record in self._records:
            yield record

    def __getitem__(self, key):
        if isinstance(key, slice):
            return Trace(self._records[key])
        elif isinstance(key, int):
            if key < -len(self) or key > len(self) - 1:
                raise IndexError('Index out of range')
            return self._records[key]
        else:
            raise TypeError('Indices must be integers, not {}'.format(type(key)))

    def append(self, record):
        self._records.append(record)

    @property
    def last(self):
        return self._records[-1] if self._records else None

    def filter(self, **kwargs):
        """
        Returns an iterator of records matching the specified criteria. Note
        that this operation is O(n).
        """
        def matches(record):
            for key, value in kwargs.items():
                if getattr(record, key, None) != value:
                    return False
            return True
        return (record for record in self if matches(record))

    def large_steps(self):
        return Trace(self.filter(step_class=STEP_LARGE))

    def to_rows(self):
        return [record.as_row() for record in self]


class CheckReport(object):
    """
    Outcome of a property check: the largest observed value of each
    monitored quantity (`maxima`, a violation when positive or above its
    bound), a list of human-readable failures and the cases that could not
    be decided (`skipped`), which count neither as passed nor as failed.
    """
    def __init__(self, name, maxima=None, failures=None, checked=0, skipped=None):
        self.name = name
        self.maxima = dict(maxima or {})
        self.failures = list(failures or ())
        self.checked = checked
        self.skipped = list(skipped or ())

    def __repr__(self):
        return '<CheckReport {}: {} | {} checked>'.format(
            self.name,
            'passed' if self.passed else 'FAILED',
            self.checked,
        )

    def __bool__(self):
        return self.passed

    @property
    def passed(self):
        return not self.failures

    def observe(self, key, value):
        if key not in self.maxima or value > self.maxima[key]:
            self.maxima[key] = value

    def fail(self, message):
        self.failures.append(message)

    def skip(self, message):
        self.skipped.append(message)

    def merge(self, other):
        for key, value in other.maxima.items():
            self.observe('{}.{}'.format(other.name, key), value)
        self.failures.extend('{}: {}'.format(other.name, f) for f in other.failures)
        self.skipped.extend('{}: {}'.format(other.name, s) for s in other.skipped)
        self.checked += other.checked
        return self
