class CostCounter(object):
    """
    Work counters of a solver run.

    A "linear solve" is one direct factorization and solve, or one complete
    Krylov subproblem solve. "Inner iterations" are Krylov matrix-vector
    products plus Tseng iterations. "J evaluations" combine Jacobian
    materializations and Jacobian-vector products.
    """
    FIELDS = ('linear_solves', 'f_evals', 'j_products', 'j_materializations',
              'inner_iterations')

    def __init__(self, linear_solves=0, f_evals=0, j_products=0,
                 j_materializations=0, inner_iterations=0):
        self.linear_solves = linear_solves
        self.f_evals = f_evals
        self.j_products = j_products
        self.j_materializations = j_materializations
        self.inner_iterations = inner_iterations

    def __repr__(self):
        return '<Costs: Linear solves {} | F {} | J {} | Inner {}>'.format(
            self.linear_solves,
            self.f_evals,
            self.j_evals,
            self.inner_iterations,
        )

    def __eq__(self, other):
        if not isinstance(other, CostCounter):
            return False
        return all((
            self.linear_solves == other.linear_solves,
            self.f_evals == other.f_evals,
            self.j_products == other.j_products,
            self.j_materializations == other.j_materializations,
            self.inner_iterations == other.inner_iterations,
            ))

    def __ne__(self, other):
        return not self.__eq__(other)

    def __add__(self, other):
        return CostCounter(
            linear_solves=(self.linear_solves + other.linear_solves),
            f_evals=(self.f_evals + other.f_evals),
            j_products=(self.j_products + other.j_products),
            j_materializations=(self.j_materializations + other.j_materializations),
            inner_iterations=(self.inner_iterations + other.inner_iterations),
        )

    def __sub__(self, other):
        return CostCounter(
            linear_solves=(self.linear_solves - other.linear_solves),
            f_evals=(self.f_evals - other.f_evals),
            j_products=(self.j_products - other.j_products),
            j_materializations=(self.j_materializations - other.j_materializations),
            inner_iterations=(self.inner_iterations - other.inner_iterations),
        )

    @property
    def j_evals(self):
        return self.j_products + self.j_materializations

    def snapshot(self):
        return CostCounter(**self.as_dict(breakdown=False))

    def as_dict(self, breakdown=True):
        data = {name: getattr(self, name) for name in self.FIELDS}
        if breakdown:
            data['j_evals'] = self.j_evals
        return data
