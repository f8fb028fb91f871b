"""Independent reference computations used as test oracles.

Nothing here calls into the package's density or score code; each oracle is
written from the model definition directly (scalar loops, closed forms,
quadrature, arbitrary precision).
"""
import itertools
import math

import mpmath
import numpy as np
from scipy import integrate


def normal_logpdf_mp(x, mean, var, dps=50):
    with mpmath.workdps(dps):
        x, mean, var = mpmath.mpf(x), mpmath.mpf(mean), mpmath.mpf(var)
        return float(-mpmath.log(2 * mpmath.pi * var) / 2 - (x - mean) ** 2 / (2 * var))


def _lnorm(x, mean, var):
    return -0.5 * math.log(2 * math.pi * var) - (x - mean) ** 2 / (2 * var)


def log_joint_loops(y, mu, z, K, tau2, sigma2):
    """Sum the three factor groups term by term with scalar arithmetic."""
    y, mu = np.atleast_2d(y), np.atleast_2d(mu)
    total = 0.0
    for k in range(K):
        for j in range(mu.shape[1]):
            total += _lnorm(mu[k, j], 0.0, tau2)
    for i in range(y.shape[0]):
        total += math.log(1.0 / K)
        for j in range(y.shape[1]):
            total += _lnorm(y[i, j], mu[z[i], j], sigma2)
    return total


def log_q_loops(m, log_s, logits, mu, z):
    m, log_s, mu = np.atleast_2d(m), np.atleast_2d(log_s), np.atleast_2d(mu)
    total = 0.0
    for k in range(m.shape[0]):
        for j in range(m.shape[1]):
            total += _lnorm(mu[k, j], m[k, j], math.exp(2 * log_s[k, j]))
    for i, row in enumerate(np.atleast_2d(logits) if len(logits) else []):
        mx = max(row)
        lse = mx + math.log(sum(math.exp(v - mx) for v in row))
        total += row[z[i]] - lse
    return total


def blanket_loops(y, mu, z, m, log_s, logits, K, tau2, sigma2, block):
    """Markov-blanket difference of one factor, summed term by term."""
    kind, j = block
    y, mu = np.atleast_2d(y), np.atleast_2d(mu)
    d = mu.shape[1]
    if kind == "mu":
        total = sum(_lnorm(mu[j, c], 0.0, tau2) for c in range(d))
        for i in range(y.shape[0]):
            if z[i] == j:
                total += sum(_lnorm(y[i, c], mu[j, c], sigma2) for c in range(d))
        total -= sum(_lnorm(mu[j, c], m[j][c], math.exp(2 * log_s[j][c])) for c in range(d))
        return total
    i = j
    row = logits[i]
    mx = max(row)
    lse = mx + math.log(sum(math.exp(v - mx) for v in row))
    return (math.log(1.0 / K) + sum(_lnorm(y[i, c], mu[z[i], c], sigma2) for c in range(d))
            - (row[z[i]] - lse))


def analytic_elbo(flat, K, d, N, y, tau2, sigma2):
    """Exact ELBO of the mixture model under the mean-field family (closed form)."""
    flat = np.asarray(flat, dtype=float)
    kd = K * d
    m = flat[:kd].reshape(K, d)
    s2 = np.exp(2 * flat[kd:2 * kd].reshape(K, d))
    logits = flat[2 * kd:].reshape(N, K)
    logphi = logits - logits.max(axis=1, keepdims=True)
    logphi = logphi - np.log(np.exp(logphi).sum(axis=1, keepdims=True))
    phi = np.exp(logphi)
    y = np.atleast_2d(y).reshape(N, d)

    e_prior = np.sum(-0.5 * np.log(2 * np.pi * tau2) - (m ** 2 + s2) / (2 * tau2))
    sq = ((y[:, None, :] - m[None, :, :]) ** 2 + s2[None, :, :]).sum(axis=2)  # (N, K)
    e_lik = np.sum(phi * (-0.5 * d * np.log(2 * np.pi * sigma2) - sq / (2 * sigma2)))
    e_z = -N * np.log(K)
    entropy_mu = np.sum(0.5 * np.log(2 * np.pi * np.e * s2))
    entropy_z = -np.sum(phi * logphi)
    return e_prior + e_lik + e_z + entropy_mu + entropy_z


def central_gradient(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def log_evidence_quadrature(y, K, tau2, sigma2):
    """``log p(y)`` for a univariate mixture: enumerate assignments, integrate each mean numerically."""
    y = np.ravel(y)
    total = 0.0
    for z in itertools.product(range(K), repeat=len(y)):
        term = K ** (-len(y))
        for k in range(K):
            members = [y[i] for i in range(len(y)) if z[i] == k]

            def integrand(mu, members=members):
                v = math.exp(_lnorm(mu, 0.0, tau2))
                for yi in members:
                    v *= math.exp(_lnorm(yi, mu, sigma2))
                return v

            val, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=0, epsrel=1e-12, limit=200)
            term *= val
        total += term
    return math.log(total)
