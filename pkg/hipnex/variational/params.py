import math

from ..exceptions import ParameterError


def log_plus(t):
    if t <= 0:
        return 0.0
    return max(math.log(t), 0.0)


def theta_hat_for(sigma_hat, theta):
    return theta * (sigma_hat / (1.0 - sigma_hat) + theta / (1.0 - sigma_hat) ** 2)


def tau_for(theta, theta_hat, eta, lipschitz):
    """
    Smallest root of q(t) = θt² - (2θ + ηL/2)t + θ - θ̂, in the
    cancellation-free closed form.
    """
    b = 2.0 * theta + 0.5 * eta * lipschitz
    c = theta - theta_hat
    return 2.0 * c / (b + math.sqrt(b * b - 4.0 * theta * c))


def tau_lower_bound(sigma_hat):
    return (1.0 - 2.0 * sigma_hat) / (8.0 * (1.0 - sigma_hat))


def init_lambda(norm_F_y0, theta, lipschitz):
    """
    Largest admissible initial step: λ₁²‖F(y₀)‖ <= 2θ/L, or 1.0 when
    F(y₀) = 0.
    """
    if norm_F_y0 <= 0:
        return 1.0
    return math.sqrt(2.0 * theta / (lipschitz * norm_F_y0))


class Params(object):
    def __init__(self, sigma_hat, theta, theta_hat, eta, tau, sigma, lipschitz,
                 lambda1=None):
        self.sigma_hat = sigma_hat
        self.theta = theta
        self.theta_hat = theta_hat
        self.eta = eta
        self.tau = tau
        self.sigma = sigma
        self.lipschitz = lipschitz
        self.lambda1 = lambda1

    def __repr__(self):
        return '<Params: σ̂ {} | θ {} | θ̂ {} | η {} | τ {} | σ {} | L {} | λ₁ {}>'.format(
            self.sigma_hat,
            self.theta,
            self.theta_hat,
            self.eta,
            self.tau,
            self.sigma,
            self.lipschitz,
            self.lambda1,
        )

    def __eq__(self, other):
        if not isinstance(other, Params):
            return False
        return all((
            self.sigma_hat == other.sigma_hat,
            self.theta == other.theta,
            self.theta_hat == other.theta_hat,
            self.eta == other.eta,
            self.tau == other.tau,
            self.sigma == other.sigma,
            self.lipschitz == other.lipschitz,
            self.lambda1 == other.lambda1,
            ))

    def __ne__(self, other):
        return not self.__eq__(other)

    def q(self, t):
        return (self.theta * t * t
                - (2.0 * self.theta + 0.5 * self.eta * self.lipschitz) * t
                + self.theta - self.theta_hat)

    def q_scale(self):
        b = 2.0 * self.theta + 0.5 * self.eta * self.lipschitz
        return self.theta * self.tau ** 2 + b * self.tau + self.theta + self.theta_hat

    @property
    def log_term_numerator(self):
        return self.eta + 2.0 * self.theta_hat / self.lipschitz

    def with_lambda1(self, lambda1):
        return Params(
            sigma_hat=self.sigma_hat,
            theta=self.theta,
            theta_hat=self.theta_hat,
            eta=self.eta,
            tau=self.tau,
            sigma=self.sigma,
            lipschitz=self.lipschitz,
            lambda1=lambda1,
        )

    def admits_lambda1(self, norm_F_y0, rtol=1e-12):
        if self.lambda1 is None:
            return False
        bound = 2.0 * self.theta / self.lipschitz
        return self.lambda1 ** 2 * norm_F_y0 <= bound * (1.0 + rtol)

    def violations(self, q_rtol=1e-12):
        """
        Return a list of descriptions of every broken parameter invariant.
        """
        found = []
        upper = (1.0 - self.sigma_hat) * (1.0 - 2.0 * self.sigma_hat)
        if not 0.0 <= self.sigma_hat < 0.5:
            found.append('σ̂ = {} outside [0, 1/2)'.format(self.sigma_hat))
        if not 0.0 < self.theta < upper:
            found.append('θ = {} outside (0, {})'.format(self.theta, upper))
        if self.theta_hat != theta_hat_for(self.sigma_hat, self.theta):
            found.append('θ̂ = {} does not match θ and σ̂'.format(self.theta_hat))
        if not 0.0 < self.theta_hat < self.theta:
            found.append('θ̂ = {} outside (0, θ)'.format(self.theta_hat))
        if not self.eta > 2.0 * self.theta_hat / self.lipschitz:
            found.append('η = {} not above 2θ̂/L'.format(self.eta))
        lower = (self.theta - self.theta_hat) / (2.0 * self.theta + 0.5 * self.eta * self.lipschitz)
        if not lower < self.tau < 1.0:
            found.append('τ = {} outside ({}, 1)'.format(self.tau, lower))
        if abs(self.q(self.tau)) > q_rtol * self.q_scale():
            found.append('q(τ) = {} is not zero'.format(self.q(self.tau)))
        if not 0.0 < self.sigma < 1.0:
            found.append('σ = {} outside (0, 1)'.format(self.sigma))
        if self.lambda1 is not None and not self.lambda1 > 0:
            found.append('λ₁ = {} is not positive'.format(self.lambda1))
        return found

    def validate(self):
        found = self.violations()
        if found:
            raise ParameterError('; '.join(found))
        return self


def derive_params(sigma_hat, lipschitz, theta=None, eta=None, lambda1=None):
    """
    Derive the full parameter pack from σ̂ and L. θ and η default to
    θ = (1 - σ̂)(1 - 2σ̂)/2 and η = 4θ/L; either may be overridden within its
    validity range.
    """
    if not 0.0 <= sigma_hat < 0.5:
        raise ParameterError('σ̂ must lie in [0, 1/2), got {}'.format(sigma_hat))
    if not lipschitz > 0:
        raise ParameterError('L must be positive, got {}'.format(lipschitz))
    upper = (1.0 - sigma_hat) * (1.0 - 2.0 * sigma_hat)
    if theta is None:
        theta = 0.5 * upper
    elif not 0.0 < theta < upper:
        raise ParameterError('θ must lie in (0, {}), got {}'.format(upper, theta))
    theta_hat = theta_hat_for(sigma_hat, theta)
    if eta is None:
        eta = 4.0 * theta / lipschitz
    elif not eta > 2.0 * theta_hat / lipschitz:
        raise ParameterError('η must exceed 2θ̂/L = {}, got {}'.format(
            2.0 * theta_hat / lipschitz, eta,
        ))
    if lambda1 is not None and not lambda1 > 0:
        raise ParameterError('λ₁ must be positive, got {}'.format(lambda1))
    params = Params(
        sigma_hat=sigma_hat,
        theta=theta,
        theta_hat=theta_hat,
        eta=eta,
        tau=tau_for(theta, theta_hat, eta, lipschitz),
        sigma=2.0 * theta_hat / (eta * lipschitz),
        lipschitz=lipschitz,
        lambda1=lambda1,
    )
    return params.validate()


def _require_lambda1(params):
    if params.lambda1 is None:
        raise ParameterError('The parameter pack has no λ₁; use with_lambda1 first')
    return params.lambda1


def _log_budget(params, rho):
    lambda1 = _require_lambda1(params)
    ratio = params.log_term_numerator / (lambda1 ** 2 * rho)
    return int(math.ceil(log_plus(ratio) / (2.0 * params.tau)))


def budget_pointwise(params, d0, rho):
    """
    Iterations within which the pointwise criterion ‖F(y) + ν‖ <= ρ must
    be met, for the exact τ of the pack.
    """
    if not rho > 0:
        raise ParameterError('ρ must be positive')
    p = params
    main = int(math.ceil(2.0 / (p.tau * p.eta * (1.0 - p.sigma)) * d0 ** 2 / rho))
    return main + _log_budget(p, rho)


def budget_ergodic(params, d0, rho):
    if not rho > 0:
        raise ParameterError('ρ must be positive')
    p = params
    scale = 2.0 * 4.0 ** (1.0 / 3.0) / (p.tau * p.eta ** (2.0 / 3.0))
    one_minus = 1.0 - p.sigma ** 2
    first = scale / one_minus ** (1.0 / 3.0) * (d0 ** 2 / rho) ** (2.0 / 3.0)
    second = scale / one_minus ** (2.0 / 3.0) * (d0 ** 3 / rho) ** (2.0 / 3.0)
    main = max(int(math.ceil(first)), int(math.ceil(second)))
    return main + _log_budget(p, rho)


def _remark_log_budget(sigma_hat, lipschitz, lambda1, rho):
    ratio = (1.0 - 2.0 * sigma_hat) * (2.5 - 2.0 * sigma_hat) / (lambda1 ** 2 * lipschitz * rho)
    return int(math.ceil(log_plus(ratio) / (2.0 * tau_lower_bound(sigma_hat))))


def remark_budget_pointwise(sigma_hat, lipschitz, lambda1, d0, rho):
    """
    Closed-form pointwise budget for the default θ and η, written with the
    lower bound of τ instead of its exact value.
    """
    main = int(math.ceil((4.0 / (1.0 - 2.0 * sigma_hat)) ** 2 * lipschitz * d0 ** 2 / rho))
    return main + _remark_log_budget(sigma_hat, lipschitz, lambda1, rho)


def remark_budget_ergodic(sigma_hat, lipschitz, lambda1, d0, rho):
    shape = (1.0 - sigma_hat) ** (1.0 / 3.0) / (1.0 - 2.0 * sigma_hat) ** (5.0 / 3.0)
    first = 16.0 * (4.0 / 3.0) ** (1.0 / 3.0) * shape * (lipschitz * d0 ** 2 / rho) ** (2.0 / 3.0)
    second = 32.0 * (2.0 / 9.0) ** (1.0 / 3.0) * shape * (lipschitz * d0 ** 3 / rho) ** (2.0 / 3.0)
    main = max(int(math.ceil(first)), int(math.ceil(second)))
    return main + _remark_log_budget(sigma_hat, lipschitz, lambda1, rho)
