"""Nonparametric competing-risks model for interval-censored carcinogenicity data.

Animals are removed from study in each interval ``(t_{j-1}, t_j]`` by natural
death (with or without tumor) or by sacrifice (with or without tumor). The
parameter vector is laid out as ``theta = (pi_1..pi_m, p_1..p_m, q_1..q_m)``
with

    pi_j = S(t_j) / P(t_j),   p_j = P(t_j) / P(t_{j-1}),   q_j = Q(t_j) / Q(t_{j-1}),

where S, P and Q are the survival functions of tumor onset, death from tumor
and death from another cause. ``pi_0`` is fixed at 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from ..divergence import (
    BoundaryViolation,
    KullbackDivergence,
    TermBlock,
    TAU_LOG_TAU,
)
from ..engine import ProximalProblem


@dataclass(frozen=True)
class CompetingRisksData:
    """Interval counts for ``m`` sacrifice intervals.

    ``N_alive[j-1]`` is the number of animals still on study at ``t_j``; the
    initial count ``N`` plays the role of ``N_0``.
    """

    N: int
    N_alive: np.ndarray
    deaths_with_tumor: np.ndarray
    deaths_without_tumor: np.ndarray
    sacrificed_with_tumor: np.ndarray
    sacrificed_without_tumor: np.ndarray

    def __post_init__(self):
        fields = ("N_alive", "deaths_with_tumor", "deaths_without_tumor",
                  "sacrificed_with_tumor", "sacrificed_without_tumor")
        arrays = []
        for name in fields:
            raw = np.asarray(getattr(self, name))
            arr = raw.astype(np.int64)
            if arr.ndim != 1 or np.any(arr != raw):
                raise ValueError(f"{name} must be a 1-d vector of integers")
            if np.any(arr < 0):
                raise ValueError(f"{name} must be nonnegative")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            arrays.append(arr)
        if len({a.size for a in arrays}) != 1 or arrays[0].size == 0:
            raise ValueError("all count vectors must share the same positive length")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError("N must be a nonnegative integer")
        object.__setattr__(self, "N", int(self.N))
        alive = np.concatenate(([self.N], self.N_alive))
        if np.any(np.diff(alive) > 0):
            raise ValueError("N_alive must be nonincreasing and start at or below N")

    @property
    def m(self) -> int:
        return self.N_alive.size

    @property
    def c(self) -> np.ndarray:
        return self.deaths_with_tumor

    @property
    def b1(self) -> np.ndarray:
        return self.deaths_without_tumor

    @property
    def a2(self) -> np.ndarray:
        return self.sacrificed_with_tumor

    @property
    def b2(self) -> np.ndarray:
        return self.sacrificed_without_tumor

    @property
    def removed(self) -> np.ndarray:
        """``N_{j-1} - N_j`` for each interval."""
        return -np.diff(np.concatenate(([self.N], self.N_alive)))

    def survival_weights(self) -> np.ndarray:
        """Coefficient of ``log(p_k q_k)`` in the log-likelihood, per interval."""
        removed = self.removed.astype(float)
        later = np.concatenate((np.cumsum(removed[::-1])[::-1][1:], [0.0]))
        return later + self.a2 + self.b2

    def pad(self, extra: int) -> "CompetingRisksData":
        """Append ``extra`` empty intervals (no events, census unchanged)."""
        z = np.zeros(extra, dtype=np.int64)
        return CompetingRisksData(
            self.N,
            np.concatenate((self.N_alive, np.full(extra, self.N_alive[-1]))),
            np.concatenate((self.c, z)), np.concatenate((self.b1, z)),
            np.concatenate((self.a2, z)), np.concatenate((self.b2, z)))


@dataclass(frozen=True)
class CompetingRisksParams:
    """Interior parameter point ``(pi, p, q)``, each of length ``m``."""

    pi: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        for name in ("pi", "p", "q"):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if not np.all((arr > 0) & (arr < 1)):
                raise BoundaryViolation(f"{name} must lie strictly inside (0, 1)", label=name)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.pi.size == self.p.size == self.q.size:
            raise ValueError("pi, p and q must have the same length")

    @property
    def m(self) -> int:
        return self.pi.size

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate((self.pi, self.p, self.q))

    @classmethod
    def from_vector(cls, theta) -> "CompetingRisksParams":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size % 3:
            raise ValueError("parameter vector length must be a multiple of 3")
        m = theta.size // 3
        return cls(theta[:m], theta[m:2 * m], theta[2 * m:])

    @classmethod
    def constant(cls, m: int, value: float = 0.5) -> "CompetingRisksParams":
        return cls(np.full(m, value), np.full(m, value), np.full(m, value))

    def slack(self) -> np.ndarray:
        """``pi_{j-1} - pi_j p_j`` for ``j = 2..m``."""
        return self.pi[:-1] - self.pi[1:] * self.p[1:]

    def is_feasible(self) -> bool:
        return bool(np.all(self.slack() > 0))


def param_names(m: int) -> list[str]:
    return ([f"pi_{j}" for j in range(1, m + 1)] + [f"p_{j}" for j in range(1, m + 1)]
            + [f"q_{j}" for j in range(1, m + 1)])


# --------------------------------------------------------------------------
# compiled kernels; every kernel takes a 2-d array of points (n, 3m)

@numba.njit(cache=True)
def _loglik_kernel(thetas, W, c, b1, a2, b2):
    n, d = thetas.shape
    m = d // 3
    out = np.empty(n)
    for k in range(n):
        th = thetas[k]
        s = 0.0
        ok = True
        for j in range(m):
            pi = th[j]
            p = th[m + j]
            q = th[2 * m + j]
            pim1 = 1.0 if j == 0 else th[j - 1]
            if W[j] > 0:
                if p > 0 and q > 0:
                    s += W[j] * (math.log(p) + math.log(q))
                else:
                    ok = False
            if c[j] > 0:
                D = (1.0 - p) + (1.0 - pi * p) * (1.0 - q)
                if D > 0:
                    s += c[j] * math.log(D)
                else:
                    ok = False
            if b1[j] > 0:
                if q < 1 and pim1 > 0:
                    s += b1[j] * (math.log(1.0 - q) + math.log(pim1))
                else:
                    ok = False
            if a2[j] > 0:
                if pi < 1:
                    s += a2[j] * math.log(1.0 - pi)
                else:
                    ok = False
            if b2[j] > 0:
                if pi > 0:
                    s += b2[j] * math.log(pi)
                else:
                    ok = False
        out[k] = s if ok else np.nan
    return out


@numba.njit(cache=True)
def _loglik_grad_kernel(th, W, c, b1, a2, b2):
    m = th.size // 3
    g = np.zeros(th.size)
    for j in range(m):
        pi = th[j]
        p = th[m + j]
        q = th[2 * m + j]
        D = (1.0 - p) + (1.0 - pi * p) * (1.0 - q)
        g[m + j] += W[j] / p
        g[2 * m + j] += W[j] / q
        if c[j] > 0:
            g[j] += c[j] * (-p * (1.0 - q)) / D
            g[m + j] += c[j] * (-1.0 - pi * (1.0 - q)) / D
            g[2 * m + j] += c[j] * (-(1.0 - pi * p)) / D
        if b1[j] > 0:
            g[2 * m + j] -= b1[j] / (1.0 - q)
            if j > 0:
                g[j - 1] += b1[j] / th[j - 1]
        g[j] += -a2[j] / (1.0 - pi) + b2[j] / pi
    return g


@numba.njit(cache=True)
def _tumor_split_kernel(thetas):
    # interleaved (t'_1, t''_1, t'_2, t''_2, ...)
    n, d = thetas.shape
    m = d // 3
    out = np.empty((n, 2 * m))
    for k in range(n):
        for j in range(m):
            pi = thetas[k, j]
            p = thetas[k, m + j]
            q = thetas[k, 2 * m + j]
            A = 1.0 - p
            B = (1.0 - pi * p) * (1.0 - q)
            D = A + B
            out[k, 2 * j] = A / D
            out[k, 2 * j + 1] = B / D
    return out


@numba.njit(cache=True)
def _slack_share_kernel(thetas):
    n, d = thetas.shape
    m = d // 3
    out = np.empty((n, m - 1))
    for k in range(n):
        total = 0.0
        for j in range(1, m):
            s = thetas[k, j - 1] - thetas[k, j] * thetas[k, m + j]
            out[k, j - 1] = s
            total += s
        if total > 0:
            for j in range(m - 1):
                out[k, j] /= total
        else:
            for j in range(m - 1):
                out[k, j] = np.nan
    return out


@numba.njit(cache=True)
def _all_stats_kernel(thetas):
    # tumor split followed by slack shares, in one pass
    n, d = thetas.shape
    m = d // 3
    out = np.empty((n, 3 * m - 1))
    split = _tumor_split_kernel(thetas)
    slack = _slack_share_kernel(thetas)
    out[:, :2 * m] = split
    out[:, 2 * m:] = slack
    return out


@numba.njit(cache=True)
def _guard_kernel(thetas, augmented):
    n, d = thetas.shape
    m = d // 3
    out = np.empty(n, dtype=np.bool_)
    for k in range(n):
        ok = True
        for i in range(d):
            v = thetas[k, i]
            if not (v > 0.0 and v < 1.0):
                ok = False
                break
        if ok and augmented:
            for j in range(1, m):
                if not (thetas[k, j] * thetas[k, m + j] < thetas[k, j - 1]):
                    ok = False
                    break
        out[k] = ok
    return out


def _batched(kernel, theta, *args):
    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 1 and theta.flags.c_contiguous:
        return kernel(theta.reshape(1, -1), *args)[0]
    flat = np.ascontiguousarray(theta.reshape(-1, theta.shape[-1]))
    out = kernel(flat, *args)
    return out.reshape(theta.shape[:-1] + out.shape[1:])


# --------------------------------------------------------------------------

def _as_vector(params) -> np.ndarray:
    if isinstance(params, CompetingRisksParams):
        return params.vector
    return np.asarray(params, dtype=float)


class CompetingRisksModel:
    """Log-likelihood, Q function and divergences for one dataset."""

    def __init__(self, data: CompetingRisksData):
        self.data = data
        self.m = data.m
        self.dimension = 3 * data.m
        self._W = data.survival_weights()
        self._counts = (self._W, data.c.astype(float), data.b1.astype(float),
                        data.a2.astype(float), data.b2.astype(float))

    def _check_shape(self, theta):
        if theta.shape[-1] != self.dimension:
            raise ValueError(f"expected {self.dimension} parameters, got {theta.shape[-1]}")

    def loglik(self, theta):
        """Observed-data log-likelihood (additive constant dropped)."""
        theta = np.asarray(theta, dtype=float)
        self._check_shape(theta)
        val = _batched(_loglik_kernel, theta, *self._counts)
        if theta.ndim == 1 and math.isfinite(val):
            return float(val)
        if not np.all(np.isfinite(val)):
            bad = theta if theta.ndim == 1 else theta.reshape(-1, self.dimension)[
                np.flatnonzero(~np.isfinite(val.reshape(-1)))[0]]
            raise BoundaryViolation(
                f"log argument not positive in {self._offending_term(bad)}",
                label=self._offending_term(bad))
        return float(val) if val.ndim == 0 else val

    def _offending_term(self, theta) -> str:
        m, d = self.m, self.data
        pi, p, q = theta[:m], theta[m:2 * m], theta[2 * m:]
        pim1 = np.concatenate(([1.0], pi[:-1]))
        checks = [
            ("log(p_{j} q_{j})", self._W, np.minimum(p, q)),
            ("log((1-p_{j}) + (1-pi_{j} p_{j})(1-q_{j}))", d.c, (1 - p) + (1 - pi * p) * (1 - q)),
            ("log((1-q_{j}) pi_{j-1})", d.b1, np.minimum(1 - q, pim1)),
            ("log(1-pi_{j})", d.a2, 1 - pi),
            ("log(pi_{j})", d.b2, pi),
        ]
        for template, weight, arg in checks:
            for j in range(m):
                if weight[j] > 0 and not arg[j] > 0:
                    return template.format(j=j + 1, **{"j-1": j})
        return "unknown term"

    def loglik_grad(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        self._check_shape(theta)
        self.loglik(theta)
        return _loglik_grad_kernel(np.ascontiguousarray(theta), *self._counts)

    def tumor_death_probability(self, theta_bar) -> np.ndarray:
        """``lambda_j``: chance a death with tumor present was caused by the tumor."""
        theta_bar = _as_vector(theta_bar)
        m = self.m
        pi, p, q = theta_bar[:m], theta_bar[m:2 * m], theta_bar[2 * m:]
        denom = (1 - p) + (1 - pi * p) * (1 - q)
        if np.any(~(denom > 0)):
            raise BoundaryViolation("lambda denominator is not positive")
        return (1 - p) / denom

    def q_function(self, theta, theta_bar) -> float:
        """Expected complete-data log-likelihood given ``theta_bar``."""
        theta = _as_vector(theta)
        lam = self.tumor_death_probability(theta_bar)
        m, d = self.m, self.data
        pi, p, q = theta[:m], theta[m:2 * m], theta[2 * m:]
        c = d.c.astype(float)
        # loglik without the c_j log D_j terms, then the expected split of c_j
        no_c = CompetingRisksModel(CompetingRisksData(
            d.N, d.N_alive, np.zeros(m, dtype=np.int64), d.b1, d.a2, d.b2))
        # no_c shares survival weights with self because N_alive is unchanged
        val = no_c.loglik(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            split = (lam * c * np.log(1 - p)
                     + (1 - lam) * c * np.log((1 - pi * p) * (1 - q)))
        split = np.where(c > 0, split, 0.0)
        if not np.all(np.isfinite(split)):
            raise BoundaryViolation("log argument not positive in the tumor-death split")
        return float(val + split.sum())

    # ----- divergence blocks

    def _split_jacobian(self, theta) -> np.ndarray:
        m = self.m
        pi, p, q = theta[:m], theta[m:2 * m], theta[2 * m:]
        A = 1 - p
        B = (1 - pi * p) * (1 - q)
        D2 = (A + B) ** 2
        jac = np.zeros((2 * m, 3 * m))
        idx = np.arange(m)
        d_pi = A * p * (1 - q) / D2
        d_p = (-B + A * pi * (1 - q)) / D2
        d_q = A * (1 - pi * p) / D2
        for off, sign in ((0, 1.0), (1, -1.0)):
            rows = 2 * idx + off
            jac[rows, idx] = sign * d_pi
            jac[rows, m + idx] = sign * d_p
            jac[rows, 2 * m + idx] = sign * d_q
        return jac

    def _slack_jacobian(self, theta) -> np.ndarray:
        m = self.m
        pi, p = theta[:m], theta[m:2 * m]
        ds = np.zeros((m - 1, 3 * m))
        for r, j in enumerate(range(1, m)):
            ds[r, j - 1] = 1.0
            ds[r, j] = -p[j]
            ds[r, m + j] = -pi[j]
        s = pi[:-1] - pi[1:] * p[1:]
        total = s.sum()
        share = s / total
        return ds / total - np.outer(share, ds.sum(axis=0)) / total

    def split_block(self) -> TermBlock:
        labels = tuple(lab for j in range(1, self.m + 1)
                       for lab in (f"t'_{j}", f"t''_{j}"))
        weights = np.repeat(self.data.c.astype(float), 2)
        return TermBlock(weights, lambda th: _batched(_tumor_split_kernel, th),
                         self._split_jacobian, labels)

    def slack_block(self) -> TermBlock:
        labels = tuple(f"t'''_{j}" for j in range(2, self.m + 1))
        return TermBlock(np.ones(self.m - 1), lambda th: _batched(_slack_share_kernel, th),
                         self._slack_jacobian, labels)

    def divergence(self, augmented: bool = False) -> KullbackDivergence:
        split = self.split_block()
        if not (augmented and self.m >= 2):
            return KullbackDivergence((split,), TAU_LOG_TAU)
        # one block with a fused kernel; term order is split terms, then slack shares
        slack = self.slack_block()
        block = TermBlock(
            np.concatenate((split.weights, slack.weights)),
            lambda th: _batched(_all_stats_kernel, th),
            lambda th: np.vstack((self._split_jacobian(th), self._slack_jacobian(th))),
            split.labels + slack.labels)
        return KullbackDivergence((block,), TAU_LOG_TAU)

    def domain_guard(self, augmented: bool):
        def guard(theta):
            theta = np.asarray(theta, dtype=float)
            out = _batched(_guard_kernel, theta, augmented)
            return bool(out) if out.ndim == 0 else out
        return guard

    def problem(self, augmented: bool = True) -> ProximalProblem:
        augmented = augmented and self.m >= 2
        return ProximalProblem(
            loglik=self.loglik,
            loglik_grad=self.loglik_grad,
            divergence=self.divergence(augmented),
            domain_guard=self.domain_guard(augmented),
            dimension=self.dimension,
            names=tuple(param_names(self.m)),
            vectorized=True,
        )


# --------------------------------------------------------------------------
# functional surface

def cr_loglik(data: CompetingRisksData, params) -> float:
    return CompetingRisksModel(data).loglik(_as_vector(params))


def cr_lambda(params_bar: CompetingRisksParams, j: int) -> float:
    """``lambda_j`` for interval ``j`` (1-based)."""
    theta_bar = _as_vector(params_bar)
    m = theta_bar.size // 3
    if not 1 <= j <= m:
        raise IndexError(f"interval index {j} outside 1..{m}")
    pi, p, q = theta_bar[j - 1], theta_bar[m + j - 1], theta_bar[2 * m + j - 1]
    denom = (1 - p) + (1 - pi * p) * (1 - q)
    if not denom > 0:
        raise BoundaryViolation("lambda denominator is not positive")
    return float((1 - p) / denom)


def cr_q_function(data: CompetingRisksData, params, params_bar) -> float:
    return CompetingRisksModel(data).q_function(params, params_bar)


def cr_divergence(data: CompetingRisksData) -> KullbackDivergence:
    return CompetingRisksModel(data).divergence(augmented=False)


def cr_divergence_augmented(data: CompetingRisksData) -> KullbackDivergence:
    return CompetingRisksModel(data).divergence(augmented=True)


def cr_problem(data: CompetingRisksData, augmented: bool = True) -> ProximalProblem:
    return CompetingRisksModel(data).problem(augmented)


def cell_probabilities(params: CompetingRisksParams) -> np.ndarray:
    """Per-interval probabilities of (death with tumor, death without tumor, survival).

    Rows are intervals. Survival to ``t_j`` has probability ``p_j q_j``; the
    remaining death mass is split between the two death categories in the
    ratio of the factors the log-likelihood attaches to them. Those factors do
    not sum to ``1 - p_j q_j`` in general, so fitting simulated data carries a
    small asymptotic bias.
    """
    pi, p, q = params.pi, params.p, params.q
    pim1 = np.concatenate(([1.0], pi[:-1]))
    with_tumor = (1 - p) + (1 - pi * p) * (1 - q)
    without = (1 - q) * pim1
    death = 1 - p * q
    share = with_tumor / (with_tumor + without)
    return np.stack([death * share, death * (1 - share), p * q], axis=1)


def cr_simulate(m: int, N: int, true_params: CompetingRisksParams, seed: int,
                sacrifice_fraction: float = 0.2) -> CompetingRisksData:
    """Forward-simulate the death/sacrifice process interval by interval.

    Animals alive at ``t_{j-1}`` die with tumor, die without tumor, or survive
    to ``t_j`` according to :func:`cell_probabilities`. A binomial
    ``sacrifice_fraction`` of the survivors is sacrificed at each ``t_j`` for
    ``j < m`` and every survivor is sacrificed at ``t_m``; each sacrificed
    animal carries a tumor with probability ``1 - pi_j``.

    Draws come from ``numpy.random.default_rng(seed)`` in the order:
    multinomial death split, sacrifice binomial, tumor binomial, per interval.
    """
    if true_params.m != m:
        raise ValueError(f"true_params has {true_params.m} intervals, expected {m}")
    if not true_params.is_feasible():
        raise ValueError("true_params violate pi_j p_j < pi_(j-1)")
    if not 0.0 <= sacrifice_fraction <= 1.0:
        raise ValueError("sacrifice_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    probs = cell_probabilities(true_params)
    cols = {k: np.zeros(m, dtype=np.int64) for k in ("alive", "c", "b1", "a2", "b2")}
    alive = int(N)
    for j in range(m):
        c, b1, surv = rng.multinomial(alive, probs[j])
        frac = 1.0 if j == m - 1 else sacrifice_fraction
        killed = int(rng.binomial(surv, frac))
        a2 = int(rng.binomial(killed, 1.0 - true_params.pi[j]))
        alive = int(surv - killed)
        cols["c"][j], cols["b1"][j] = c, b1
        cols["a2"][j], cols["b2"][j] = a2, killed - a2
        cols["alive"][j] = alive
    return CompetingRisksData(int(N), cols["alive"], cols["c"], cols["b1"], cols["a2"], cols["b2"])
