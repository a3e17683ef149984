"""MCMC kernels for the non-conjugate posteriors.

* :func:`ess_t_posterior` -- elliptical slice sampling of Student-t degrees of
  freedom under a log-normal prior, run on ``eta = log(nu)`` so the prior is
  exactly Gaussian.
* :func:`bhm_posterior` -- Gibbs sampler for a binomial-logit hierarchical
  model with a normal-inverse-gamma hyperprior; the logits are updated by
  univariate slice sampling.

Both kernels are compiled with numba and consume a numpy ``Generator``
directly, so a chain is a deterministic function of its :class:`RngStream`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .stats_dist import RngLike, as_generator

__all__ = [
    "EssConfig",
    "BhmConfig",
    "ChainOutput",
    "ess_t_posterior",
    "bhm_posterior",
    "sigma2_conditional",
    "psrf",
]


@dataclass(frozen=True)
class EssConfig:
    prior_mean: float = 1.0
    prior_sd: float = 1.0
    n_samples: int = 3000
    burn_in: int = 500

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if not self.prior_sd > 0:
            raise ValueError("prior_sd must be positive")


@dataclass(frozen=True)
class BhmConfig:
    """Normal-inverse-gamma hyperprior ``(nu, omega, a, b)`` and chain length."""

    nu: float = 0.0
    omega: float = 0.01
    a: float = 0.001
    b: float = 0.001
    n_samples: int = 2000
    burn_in: int = 1000

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("a and b must be positive")
        if self.n_samples <= 0 or self.burn_in < 0:
            raise ValueError("invalid chain length")


@dataclass
class ChainOutput:
    draws: np.ndarray
    names: tuple
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.draws[:, self.names.index(name)]

    @property
    def n_samples(self) -> int:
        return self.draws.shape[0]


# ---------------------------------------------------------------------------
# elliptical slice sampler
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _t_loglik(y, nu):
    if not (nu > 0.0) or not math.isfinite(nu):
        return -math.inf
    c = math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu) - 0.5 * math.log(nu * math.pi)
    s = 0.0
    for i in range(y.size):
        s += math.log1p(y[i] * y[i] / nu)
    return y.size * c - 0.5 * (nu + 1.0) * s


@numba.njit(cache=True)
def _ess_chain(y, mean, sd, eta0, n_iter, use_lik, gen, out):
    eta = eta0
    ll = _t_loglik(y, math.exp(eta)) if use_lik else 0.0
    n_evals = 0
    for it in range(n_iter):
        aux = sd * gen.standard_normal()
        log_level = ll + math.log(gen.random())
        phi = 2.0 * math.pi * gen.random()
        lo = phi - 2.0 * math.pi
        hi = phi
        f0 = eta - mean
        while True:
            prop = mean + f0 * math.cos(phi) + aux * math.sin(phi)
            llp = _t_loglik(y, math.exp(prop)) if use_lik else 0.0
            n_evals += 1
            if llp > log_level:
                break
            if phi < 0.0:
                lo = phi
            else:
                hi = phi
            phi = lo + (hi - lo) * gen.random()
        eta = prop
        ll = llp
        out[it] = eta
    return n_evals


def ess_t_posterior(
    data: Sequence[float],
    cfg: EssConfig,
    rng: RngLike,
    use_likelihood: bool = True,
) -> ChainOutput:
    """Posterior draws of the t degrees of freedom given ``data``.

    The chain runs on ``eta = log(theta)`` with prior ``N(prior_mean,
    prior_sd^2)``; the returned column ``theta`` is ``exp(eta)`` after burn-in.
    ``use_likelihood=False`` samples the prior, which is how the sampler is
    checked for prior reproduction.
    """
    y = np.ascontiguousarray(data, dtype=float)
    if use_likelihood and y.size == 0:
        raise ValueError("ess_t_posterior needs at least one observation")
    eta0 = float(cfg.prior_mean)
    if use_likelihood and not math.isfinite(_t_loglik(y, math.exp(eta0))):
        raise FloatingPointError("non-finite likelihood at the initial state")
    g = as_generator(rng)
    total = cfg.burn_in + cfg.n_samples
    out = np.empty(total)
    n_evals = _ess_chain(y, float(cfg.prior_mean), float(cfg.prior_sd), eta0, total, use_likelihood, g, out)
    theta = np.exp(out[cfg.burn_in:])
    if not np.all(np.isfinite(theta)):
        raise FloatingPointError("non-finite draws in elliptical slice chain")
    return ChainOutput(theta[:, None], ("theta",), {"likelihood_evals": int(n_evals), "burn_in": cfg.burn_in})


# ---------------------------------------------------------------------------
# hierarchical logit model
# ---------------------------------------------------------------------------


SIGMA2_MAX = 1e200


@numba.njit(cache=True)
def _log1pexp(x):
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@numba.njit(cache=True)
def _phi_logf(phi, y, n, mu, sigma2, use_lik):
    lp = -0.5 * (phi - mu) * (phi - mu) / sigma2
    if use_lik:
        lp += y * phi - n * _log1pexp(phi)
    return lp


@numba.njit(cache=True)
def _slice_phi(x0, y, n, mu, sigma2, w, use_lik, gen):
    """Univariate slice sampling with stepping out and shrinkage."""
    max_steps = 64
    log_level = _phi_logf(x0, y, n, mu, sigma2, use_lik) + math.log(gen.random())
    left = x0 - w * gen.random()
    right = left + w
    j = int(max_steps * gen.random())
    k = max_steps - 1 - j
    while j > 0 and _phi_logf(left, y, n, mu, sigma2, use_lik) > log_level:
        left -= w
        j -= 1
    while k > 0 and _phi_logf(right, y, n, mu, sigma2, use_lik) > log_level:
        right += w
        k -= 1
    while True:
        x1 = left + (right - left) * gen.random()
        if _phi_logf(x1, y, n, mu, sigma2, use_lik) > log_level:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1


@numba.njit(cache=True)
def _loglik_sum(phi, y, n):
    ll = 0.0
    for i in range(phi.size):
        ll += y[i] * phi[i] - n[i] * _log1pexp(phi[i])
    return ll


@numba.njit(cache=True)
def _rescale_move(phi, y, n, nu, a, b, mu, sigma2, use_lik, gen):
    """Independence Metropolis step on sigma with standardized effects fixed.

    Holding ``z_i = (phi_i - mu)/sigma`` and ``u = (mu - nu)/sigma`` fixed,
    the conditional of sigma2 is its IG(a, b) prior times the likelihood, so
    a prior draw accepted on the likelihood ratio leaves the posterior
    invariant. Without data this is an exact draw, which the centered updates
    cannot manage under a vague hyperprior (log sigma2 then random-walks over
    a range of order 1/a). Phi is updated in place; returns (sigma2, mu).
    """
    # log-space IG draw: Ga(a) = Ga(a + 1) * U**(1/a) underflows otherwise
    log_g = math.log(gen.gamma(a + 1.0, 1.0)) + math.log(gen.random()) / a
    log_s2 = min(math.log(b) - log_g, math.log(SIGMA2_MAX))
    ratio = math.exp(0.5 * (log_s2 - math.log(sigma2)))
    K = phi.size
    new_phi = np.empty(K)
    for i in range(K):
        new_phi[i] = nu + (phi[i] - nu) * ratio
    if use_lik:
        log_acc = _loglik_sum(new_phi, y, n) - _loglik_sum(phi, y, n)
        if not (math.log(gen.random()) < log_acc):
            return sigma2, mu
    for i in range(K):
        phi[i] = new_phi[i]
    return math.exp(log_s2), nu + (mu - nu) * ratio


@numba.njit(cache=True)
def _bhm_chain(y, n, nu, omega, a, b, n_burn, n_keep, use_lik, gen, out):
    K = y.size
    phi = np.empty(K)
    for i in range(K):
        phi[i] = math.log((y[i] + 0.5) / (n[i] - y[i] + 0.5))
    mu = phi.mean()
    sigma2 = 1.0
    for i in range(K):
        sigma2 += (phi[i] - mu) ** 2
    sigma2 /= K
    shape = a + 0.5 * (K + 1)
    for it in range(n_burn + n_keep):
        w = max(math.sqrt(sigma2), 0.25)
        for i in range(K):
            phi[i] = _slice_phi(phi[i], y[i], n[i], mu, sigma2, w, use_lik, gen)
        # mu | phi, sigma2 ~ N((omega*nu + sum phi)/(omega + K), sigma2/(omega + K))
        s = 0.0
        for i in range(K):
            s += phi[i]
        mu = (omega * nu + s) / (omega + K) + math.sqrt(sigma2 / (omega + K)) * gen.standard_normal()
        # sigma2 | phi, mu ~ IG(a + (K+1)/2, b + (sum (phi-mu)^2 + omega (mu-nu)^2)/2)
        ss = omega * (mu - nu) ** 2
        for i in range(K):
            ss += (phi[i] - mu) ** 2
        # the cap only binds under vague hyperpriors with no data, where the
        # chain would otherwise drift to overflow
        sigma2 = min((b + 0.5 * ss) / gen.gamma(shape, 1.0), SIGMA2_MAX)
        sigma2, mu = _rescale_move(phi, y, n, nu, a, b, mu, sigma2, use_lik, gen)
        if it >= n_burn:
            row = it - n_burn
            for i in range(K):
                out[row, i] = 1.0 / (1.0 + math.exp(-phi[i]))
            out[row, K] = mu
            out[row, K + 1] = sigma2


def bhm_posterior(
    y: Sequence[int],
    n: Sequence[int],
    cfg: BhmConfig,
    rng: RngLike,
    use_likelihood: bool = True,
) -> ChainOutput:
    """Posterior draws of ``(theta_1..theta_K, mu, sigma2)``.

    Model: ``y_i ~ Bin(n_i, logistic(phi_i))``, ``phi_i ~ N(mu, sigma2)``,
    ``mu | sigma2 ~ N(nu, sigma2/omega)``, ``sigma2 ~ IG(a, b)``.
    """
    y = np.ascontiguousarray(y, dtype=float)
    n = np.ascontiguousarray(n, dtype=float)
    if y.ndim != 1 or y.size < 1 or y.shape != n.shape:
        raise ValueError("y and n must be equal-length 1-d sequences with K >= 1")
    if np.any(n < 0) or np.any(y < 0) or np.any(y > n) or np.any(y != np.floor(y)):
        raise ValueError("counts must satisfy 0 <= y_i <= n_i")
    g = as_generator(rng)
    K = y.size
    out = np.empty((cfg.n_samples, K + 2))
    _bhm_chain(y, n, cfg.nu, cfg.omega, cfg.a, cfg.b, cfg.burn_in, cfg.n_samples, use_likelihood, g, out)
    names = tuple(f"theta{i + 1}" for i in range(K)) + ("mu", "sigma2")
    return ChainOutput(out, names, {"burn_in": cfg.burn_in})


def sigma2_conditional(phi: Sequence[float], mu: float, cfg: BhmConfig) -> tuple[float, float]:
    """Inverse-gamma ``(shape, scale)`` of ``sigma2`` given the logits and ``mu``."""
    phi = np.asarray(phi, dtype=float)
    K = phi.size
    shape = cfg.a + 0.5 * (K + 1)
    scale = cfg.b + 0.5 * (np.sum((phi - mu) ** 2) + cfg.omega * (mu - cfg.nu) ** 2)
    return shape, float(scale)


@numba.njit(cache=True)
def _sigma2_draws(phi, mu, nu, omega, a, b, size, gen):
    K = phi.size
    ss = omega * (mu - nu) ** 2
    for i in range(K):
        ss += (phi[i] - mu) ** 2
    shape = a + 0.5 * (K + 1)
    out = np.empty(size)
    for j in range(size):
        out[j] = (b + 0.5 * ss) / gen.gamma(shape, 1.0)
    return out


def sample_sigma2_conditional(phi, mu: float, cfg: BhmConfig, rng: RngLike, size: int) -> np.ndarray:
    """Draws from the sampler's own ``sigma2`` update, for checking it in isolation."""
    g = as_generator(rng)
    return _sigma2_draws(np.ascontiguousarray(phi, dtype=float), float(mu), cfg.nu, cfg.omega, cfg.a, cfg.b, size, g)


# ---------------------------------------------------------------------------
# convergence diagnostics
# ---------------------------------------------------------------------------


def psrf(chains: Sequence[ChainOutput | np.ndarray]) -> np.ndarray:
    """Split-chain potential scale reduction factor per parameter.

    Each chain is cut in half and the halves are treated as separate chains.
    Values above about 1.05 indicate the chains have not mixed.
    """
    arrays = [c.draws if isinstance(c, ChainOutput) else np.asarray(c, dtype=float) for c in chains]
    arrays = [a[:, None] if a.ndim == 1 else a for a in arrays]
    if len(arrays) < 2:
        raise ValueError("psrf needs at least two chains")
    if len({a.shape for a in arrays}) != 1:
        raise ValueError("chains must have equal length and parameter count")
    n_total = arrays[0].shape[0]
    half = n_total // 2
    if half < 2:
        raise ValueError("chains are too short to split")
    split = np.stack([part for a in arrays for part in (a[:half], a[n_total - half :])])
    m, n, _ = split.shape
    means = split.mean(axis=1)
    within = split.var(axis=1, ddof=1).mean(axis=0)
    between = n * means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * within + between / n
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(var_plus / within)
    return r
