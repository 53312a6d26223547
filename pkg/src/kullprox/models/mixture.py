"""One-dimensional Gaussian mixture with a known common variance.

Parameters are ``theta = (w_1..w_{K-1}, mu_1..mu_K)``; the last weight is
``1 - sum(w)``. The latent data are component labels, so the Kullback
divergence is built on the responsibilities ``r_nk(theta)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..divergence import KullbackDivergence, TermBlock, TAU_LOG_TAU
from ..engine import PreconditionError, ProximalProblem

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GaussianMixtureModel:
    data: np.ndarray
    n_components: int = 2
    known_variance: float = 1.0

    def __post_init__(self):
        x = np.array(self.data, dtype=float).reshape(-1)
        if x.size == 0:
            raise PreconditionError("mixture data must be nonempty")
        if not np.all(np.isfinite(x)):
            raise ValueError("mixture data must be finite")
        if self.n_components < 1:
            raise ValueError("n_components must be positive")
        if not self.known_variance > 0:
            raise ValueError("known_variance must be positive")
        x.setflags(write=False)
        object.__setattr__(self, "data", x)

    @property
    def dimension(self) -> int:
        return 2 * self.n_components - 1

    def param_names(self) -> tuple[str, ...]:
        K = self.n_components
        return (tuple(f"w_{k}" for k in range(1, K))
                + tuple(f"mu_{k}" for k in range(1, K + 1)))

    def split(self, theta):
        """Full weight vector and means from a parameter vector."""
        theta = np.asarray(theta, dtype=float)
        K = self.n_components
        w = theta[..., :K - 1]
        w = np.concatenate((w, 1.0 - w.sum(axis=-1, keepdims=True)), axis=-1)
        return w, theta[..., K - 1:]

    def pack(self, weights, means) -> np.ndarray:
        return np.concatenate((np.asarray(weights, dtype=float)[:-1],
                               np.asarray(means, dtype=float)))

    def initial_point(self) -> np.ndarray:
        """Uniform weights, means at evenly spread sample quantiles."""
        K = self.n_components
        means = np.quantile(self.data, (np.arange(K) + 0.5) / K)
        return self.pack(np.full(K, 1.0 / K), means)

    def domain_guard(self, theta):
        lead, flat = self._kernel_input(theta)
        ok = _mixture_guard(flat, self.n_components).reshape(lead)
        return bool(ok) if ok.ndim == 0 else ok

    def _kernel_input(self, theta):
        theta = np.asarray(theta, dtype=float)
        flat = np.ascontiguousarray(theta.reshape(-1, theta.shape[-1]))
        return theta.shape[:-1], flat

    def loglik(self, theta):
        lead, flat = self._kernel_input(theta)
        val = _mixture_loglik(flat, self.data, self.n_components, self.known_variance)
        val = val.reshape(lead)
        return float(val) if val.ndim == 0 else val

    def responsibilities(self, theta) -> np.ndarray:
        """Shape ``(..., n, K)``."""
        lead, flat = self._kernel_input(theta)
        r = _mixture_resp(flat, self.data, self.n_components, self.known_variance)
        return r.reshape(lead + (self.data.size, self.n_components))

    def loglik_grad(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        K = self.n_components
        w, mu = self.split(theta)
        r = self.responsibilities(theta)
        g_w = (r[:, :K - 1] / w[:K - 1] - r[:, [K - 1]] / w[K - 1]).sum(axis=0)
        g_mu = (r * (self.data[:, None] - mu)).sum(axis=0) / self.known_variance
        return np.concatenate((g_w, g_mu))

    def _resp_jacobian(self, theta) -> np.ndarray:
        # d r_nk = r_nk (g_nk - sum_j r_nj g_nj), g_nk = grad log(w_k f_nk)
        theta = np.asarray(theta, dtype=float)
        K, n, d = self.n_components, self.data.size, self.dimension
        w, mu = self.split(theta)
        r = self.responsibilities(theta)
        g = np.zeros((n, K, d))
        for k in range(K - 1):
            g[:, k, k] = 1.0 / w[k]
        g[:, K - 1, :K - 1] = -1.0 / w[K - 1]
        for k in range(K):
            g[:, k, K - 1 + k] = (self.data - mu[k]) / self.known_variance
        mean_g = np.einsum("nk,nkd->nd", r, g)
        jac = r[:, :, None] * (g - mean_g[:, None, :])
        return jac.reshape(n * K, d)

    def divergence(self) -> KullbackDivergence:
        n, K = self.data.size, self.n_components
        labels = tuple(f"r_{i + 1},{k + 1}" for i in range(n) for k in range(K))
        block = TermBlock(
            np.ones(n * K),
            lambda th: self.responsibilities(th).reshape(np.shape(th)[:-1] + (n * K,)),
            self._resp_jacobian, labels)
        return KullbackDivergence((block,), TAU_LOG_TAU)

    def q_function(self, theta, theta_bar) -> float:
        """Expected complete-data log-likelihood."""
        w, mu = self.split(theta)
        r_bar = self.responsibilities(theta_bar)
        x = self.data[:, None]
        log_joint = (np.log(w) - 0.5 * (_LOG_2PI + math.log(self.known_variance))
                     - 0.5 * (x - mu) ** 2 / self.known_variance)
        return float((r_bar * log_joint).sum())

    def closed_form_step(self, theta) -> np.ndarray:
        """Textbook EM update of weights and means."""
        r = self.responsibilities(theta)
        nk = r.sum(axis=0)
        return self.pack(nk / self.data.size, (r * self.data[:, None]).sum(axis=0) / nk)

    def problem(self) -> ProximalProblem:
        return ProximalProblem(
            loglik=self.loglik,
            loglik_grad=self.loglik_grad,
            divergence=self.divergence(),
            domain_guard=self.domain_guard,
            dimension=self.dimension,
            names=self.param_names(),
            vectorized=True,
        )


@numba.njit(cache=True)
def _log_joint_row(th, x, K, var, out):
    # out[n, k] = log(w_k) + log N(x_n; mu_k, var); returns False off-domain
    wlast = 1.0
    for k in range(K - 1):
        wlast -= th[k]
    if wlast <= 0:
        return False
    c = -0.5 * (math.log(2.0 * math.pi) + math.log(var))
    for k in range(K):
        wk = th[k] if k < K - 1 else wlast
        if wk <= 0:
            return False
        lw = math.log(wk) + c
        mu = th[K - 1 + k]
        for i in range(x.size):
            z = x[i] - mu
            out[i, k] = lw - 0.5 * z * z / var
    return True


@numba.njit(cache=True)
def _mixture_guard(thetas, K):
    out = np.empty(thetas.shape[0], dtype=np.bool_)
    for p in range(thetas.shape[0]):
        ok = True
        total = 0.0
        for k in range(thetas.shape[1]):
            if not math.isfinite(thetas[p, k]):
                ok = False
        for k in range(K - 1):
            if not thetas[p, k] > 0:
                ok = False
            total += thetas[p, k]
        out[p] = ok and total < 1.0
    return out


@numba.njit(cache=True)
def _mixture_loglik(thetas, x, K, var):
    n_pts = thetas.shape[0]
    out = np.empty(n_pts)
    buf = np.empty((x.size, K))
    for p in range(n_pts):
        if not _log_joint_row(thetas[p], x, K, var, buf):
            out[p] = np.nan
            continue
        s = 0.0
        for i in range(x.size):
            mx = buf[i, 0]
            for k in range(1, K):
                if buf[i, k] > mx:
                    mx = buf[i, k]
            acc = 0.0
            for k in range(K):
                acc += math.exp(buf[i, k] - mx)
            s += mx + math.log(acc)
        out[p] = s
    return out


@numba.njit(cache=True)
def _mixture_resp(thetas, x, K, var):
    n_pts = thetas.shape[0]
    out = np.empty((n_pts, x.size * K))
    buf = np.empty((x.size, K))
    for p in range(n_pts):
        if not _log_joint_row(thetas[p], x, K, var, buf):
            out[p, :] = np.nan
            continue
        for i in range(x.size):
            mx = buf[i, 0]
            for k in range(1, K):
                if buf[i, k] > mx:
                    mx = buf[i, k]
            acc = 0.0
            for k in range(K):
                acc += math.exp(buf[i, k] - mx)
            for k in range(K):
                out[p, i * K + k] = math.exp(buf[i, k] - mx) / acc
    return out


def gmm_problem(model: GaussianMixtureModel) -> ProximalProblem:
    return model.problem()


def gmm_em_step(model: GaussianMixtureModel, params) -> np.ndarray:
    return model.closed_form_step(params)


def gmm_sample(n: int, weights, means, variance: float, seed: int) -> np.ndarray:
    """Draw ``n`` points; labels first, then the Gaussian noise."""
    rng = np.random.default_rng(seed)
    labels = rng.choice(len(weights), size=n, p=np.asarray(weights, dtype=float))
    return np.asarray(means, dtype=float)[labels] + math.sqrt(variance) * rng.standard_normal(n)
