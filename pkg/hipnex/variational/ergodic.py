import numpy as np

from ..exceptions import NoCertificate
from .defaults import ERGODIC_FLOOR


class CompensatedSum(object):
    """
    Neumaier-compensated running sum of scalars or arrays.
    """
    def __init__(self, value=0.0):
        self.total = value
        self.compensation = value * 0.0

    def add(self, term):
        total = self.total + term
        bigger = np.abs(self.total) >= np.abs(term)
        lost = np.where(bigger, (self.total - total) + term, (term - total) + self.total)
        self.compensation = self.compensation + lost
        self.total = total

    @property
    def value(self):
        return self.total + self.compensation


class ErgodicCertificate(object):
    def __init__(self, y_a, v_a, eps_a, Lambda, count=None):
        self.y_a = y_a
        self.v_a = v_a
        self.eps_a = eps_a
        self.Lambda = Lambda
        self.count = count

    def __repr__(self):
        return '<ErgodicCertificate: ‖v‖ {:.3e} | ε {:.3e} | Λ {:.3e}>'.format(
            self.v_norm,
            self.eps_a,
            self.Lambda,
        )

    @property
    def v_norm(self):
        return float(np.linalg.norm(self.v_a))

    @property
    def measure(self):
        """max{‖v^a‖, ε^a}, the quantity compared with ρ."""
        return max(self.v_norm, self.eps_a)

    def eps_is_sane(self, floor=ERGODIC_FLOOR):
        scale = 1.0 + np.linalg.norm(self.y_a) * self.v_norm
        return self.eps_a >= -floor * scale


class ErgodicAccumulator(object):
    """
    Streaming weighted averages y^a = Σλy/Λ, v^a = Σλw/Λ and
    ε^a = Σλ⟨y - y^a, w - v^a⟩/Λ, the last computed as S/Λ - ⟨y^a, v^a⟩
    with S = Σλ⟨y, w⟩.
    """
    def __init__(self, dim):
        self.dim = dim
        self.count = 0
        self._Lambda = CompensatedSum(0.0)
        self._weighted_y = CompensatedSum(np.zeros(dim))
        self._weighted_w = CompensatedSum(np.zeros(dim))
        self._cross = CompensatedSum(0.0)

    def __repr__(self):
        return '<ErgodicAccumulator: {} terms>'.format(self.count)

    def __len__(self):
        return self.count

    def update(self, lam, y, w):
        self.count += 1
        self._Lambda.add(float(lam))
        self._weighted_y.add(lam * y)
        self._weighted_w.add(lam * w)
        self._cross.add(float(lam * np.dot(y, w)))
        return self

    def certificate(self):
        if not self.count:
            raise NoCertificate('No large step has been accumulated yet')
        Lambda = float(self._Lambda.value)
        y_a = self._weighted_y.value / Lambda
        v_a = self._weighted_w.value / Lambda
        eps_a = float(self._cross.value / Lambda - np.dot(y_a, v_a))
        return ErgodicCertificate(y_a=y_a, v_a=v_a, eps_a=eps_a, Lambda=Lambda, count=self.count)


def ergodic_update(accumulator, lam, y, w):
    return accumulator.update(lam, y, w)


def ergodic_direct(lams, ys, ws):
    """
    Direct evaluation of the ergodic triple from stored weights and points.
    """
    lams = np.asarray(lams, dtype=float)
    if not lams.size:
        raise NoCertificate('No terms given')
    ys = np.asarray(ys, dtype=float)
    ws = np.asarray(ws, dtype=float)
    Lambda = lams.sum()
    y_a = lams.dot(ys) / Lambda
    v_a = lams.dot(ws) / Lambda
    eps_a = float(np.sum(lams * np.einsum('ij,ij->i', ys - y_a, ws - v_a)) / Lambda)
    return ErgodicCertificate(y_a=y_a, v_a=v_a, eps_a=eps_a, Lambda=float(Lambda), count=lams.size)
