import logging

import numpy as np
import scipy.linalg

from .defaults import KRYLOV_MAX_INNER, KRYLOV_RESTART


logger = logging.getLogger(__name__)


class Givens(object):
    """
    Plane rotation G with G [a, b]^T = [r, 0]^T.
    """
    def __init__(self, a, b):
        r = np.hypot(a, b)
        if r == 0.0:
            self.c, self.s = 1.0, 0.0
        else:
            self.c, self.s = a / r, b / r

    def apply(self, pair):
        a, b = pair
        return np.array([self.c * a + self.s * b, -self.s * a + self.c * b])


class RestartedGmres(object):
    r"""
    Restarted GMRES for a (generally nonsymmetric) linear system A x = b,
    where A is given only through `matvec`.

    The iteration hands every inner iterate to an `accept(x, resnorm)`
    callback, with `resnorm` the Arnoldi estimate of ‖b - A x‖; the method
    stops as soon as the callback returns True. This lets a caller use a
    stopping rule that depends on the iterate itself and not only on its
    residual.

    Attributes after :py:meth:`solve`:
      ``products`` -- matrix-vector products spent (callback work excluded),
      ``resnorms`` -- Arnoldi residual estimates, one per inner iteration,
      ``converged`` -- whether `accept` returned True.
    """
    def __init__(self, matvec, rhs, restart=KRYLOV_RESTART, max_products=KRYLOV_MAX_INNER):
        self.matvec = matvec
        self.rhs = np.asarray(rhs, dtype=float)
        self.restart = max(1, int(restart))
        self.max_products = int(max_products)
        self.products = 0
        self.resnorms = []
        self.converged = False
        self.xk = None

    def _apply(self, v):
        self.products += 1
        return self.matvec(v)

    def _cycle(self, x0, accept):
        if self.products == 0 and not np.any(x0):
            r0 = self.rhs.copy()
        else:
            r0 = self.rhs - self._apply(x0)
        beta = np.linalg.norm(r0)
        if beta == 0.0:
            self.xk = x0
            self.converged = bool(accept(x0, 0.0))
            return True

        n = self.rhs.shape[0]
        m = min(self.restart, n)
        V = np.zeros((n, m + 1))
        R = np.zeros((m + 1, m))
        g = np.zeros(m + 1)
        g[0] = beta
        rotations = []
        V[:, 0] = r0 / beta

        for k in range(m):
            if self.products >= self.max_products:
                return True
            w = self._apply(V[:, k])
            # modified Gram-Schmidt
            for i in range(k + 1):
                R[i, k] = np.dot(w, V[:, i])
                w = w - R[i, k] * V[:, i]
            h_next = np.linalg.norm(w)
            R[k + 1, k] = h_next

            for i, rotation in enumerate(rotations):
                R[i:i + 2, k] = rotation.apply(R[i:i + 2, k])
            rotation = Givens(R[k, k], R[k + 1, k])
            rotations.append(rotation)
            R[k:k + 2, k] = rotation.apply(R[k:k + 2, k])
            g[k:k + 2] = rotation.apply(g[k:k + 2])

            resnorm = abs(g[k + 1])
            self.resnorms.append(resnorm)
            coeffs = scipy.linalg.solve_triangular(R[:k + 1, :k + 1], g[:k + 1])
            self.xk = x0 + V[:, :k + 1].dot(coeffs)
            if accept(self.xk, resnorm):
                self.converged = True
                return True
            if h_next <= 1e-14 * beta:
                # invariant subspace: the iterate is exact, restarting cannot help
                logger.debug('GMRES breakdown after %d products', self.products)
                return True
            V[:, k + 1] = w / h_next
        return False

    def solve(self, accept, x0=None):
        x = np.zeros_like(self.rhs) if x0 is None else np.asarray(x0, dtype=float)
        self.xk = x
        while self.products < self.max_products:
            done = self._cycle(self.xk, accept)
            if done:
                break
        return self.xk
