"""Kullback distance-like functions built from weighted statistic terms.

A divergence is the sum

    I(theta, theta_bar) = sum_i  w_i * t_i(theta) * phi(t_i(theta_bar) / t_i(theta))

over an ordered list of terms, each carrying a nonnegative weight ``w_i`` and a
positive statistic ``t_i``. Terms are stored in blocks so that a model can
compute all of its statistics in one vectorized call; the flat term order is
block-major.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

# Statistics at or below this value are treated as sitting on the boundary.
STATISTIC_FLOOR = 1e-300


class DomainError(ValueError):
    """Raised when a function is evaluated outside its domain."""


class BoundaryViolation(DomainError):
    """A statistic or log argument reached the boundary of its domain.

    ``index`` is the flat position of the offending term (or ``None`` when the
    violation is not attached to a divergence term) and ``label`` a readable
    name for it.
    """

    def __init__(self, message: str, index: int | None = None, label: str | None = None):
        super().__init__(message)
        self.index = index
        self.label = label


@dataclass(frozen=True)
class PhiFunction:
    """Convex generator ``phi`` with its derivative, both vectorized."""

    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    def __call__(self, tau):
        return self.eval(tau)


def _tau_log_tau(tau):
    return tau * np.log(tau)


def _tau_log_tau_deriv(tau):
    return np.log(tau) + 1.0


def _shifted_kl(tau):
    return tau * np.log(tau) - tau + 1.0


def _shifted_kl_deriv(tau):
    return np.log(tau)


#: phi(tau) = tau log tau, the generator giving the Kullback-Leibler form.
TAU_LOG_TAU = PhiFunction("tau_log_tau", _tau_log_tau, _tau_log_tau_deriv)

#: phi(tau) = tau log tau - tau + 1. Agrees with TAU_LOG_TAU on any group of
#: statistics that sums to a constant, and is nonnegative term by term.
SHIFTED_KL = PhiFunction("shifted_kl", _shifted_kl, _shifted_kl_deriv)


def phi_eval(tau: float, phi: PhiFunction = TAU_LOG_TAU) -> float:
    """Evaluate ``phi`` at a single positive ``tau``."""
    tau = float(tau)
    if not tau > 0.0:
        raise DomainError(f"phi is defined for tau > 0, got {tau!r}")
    return float(phi.eval(tau))


@dataclass(frozen=True)
class DivergenceTerm:
    """One summand: a weight and a scalar statistic with its gradient."""

    weight: float
    statistic: Callable[[np.ndarray], float]
    statistic_grad: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"term weight must be nonnegative, got {self.weight!r}")


@dataclass(frozen=True)
class TermBlock:
    """A vectorized group of terms sharing one statistics evaluator.

    ``statistics(theta)`` maps an array of shape ``(..., d)`` to shape
    ``(..., n_terms)``; ``jacobian(theta)`` maps a single point of shape
    ``(d,)`` to the ``(n_terms, d)`` matrix of statistic gradients.
    """

    weights: np.ndarray
    statistics: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ValueError("block weights must be one-dimensional")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("block weights must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.labels is not None and len(self.labels) != w.size:
            raise ValueError("one label per term is required")

    @property
    def size(self) -> int:
        return self.weights.size

    @classmethod
    def from_term(cls, term: DivergenceTerm, label: str | None = None) -> "TermBlock":
        def statistics(theta):
            return np.expand_dims(np.asarray(term.statistic(theta), dtype=float), -1)

        def jacobian(theta):
            return np.atleast_2d(np.asarray(term.statistic_grad(theta), dtype=float))

        return cls(np.array([term.weight]), statistics, jacobian,
                   None if label is None else (label,))


@dataclass(frozen=True)
class KullbackDivergence:
    """Sum of weighted ``t * phi(t_bar / t)`` terms, stored as blocks."""

    blocks: tuple[TermBlock, ...]
    phi: PhiFunction = TAU_LOG_TAU
    _offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        offsets, n = [], 0
        for block in self.blocks:
            offsets.append(n)
            n += block.size
        object.__setattr__(self, "_offsets", tuple(offsets))

    @classmethod
    def from_terms(cls, terms: Sequence[DivergenceTerm],
                   phi: PhiFunction = TAU_LOG_TAU) -> "KullbackDivergence":
        return cls(tuple(TermBlock.from_term(t) for t in terms), phi)

    def extend(self, *blocks: TermBlock) -> "KullbackDivergence":
        """Return a new divergence with ``blocks`` appended."""
        return KullbackDivergence(self.blocks + tuple(blocks), self.phi)

    @property
    def n_terms(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([b.weights for b in self.blocks]) if self.blocks else np.zeros(0)

    @property
    def terms(self) -> list[DivergenceTerm]:
        """Flat, ordered view of every term as a scalar ``DivergenceTerm``."""
        out = []
        for block in self.blocks:
            for i in range(block.size):
                out.append(DivergenceTerm(
                    float(block.weights[i]),
                    lambda theta, b=block, i=i: b.statistics(theta)[..., i],
                    lambda theta, b=block, i=i: b.jacobian(theta)[i],
                ))
        return out

    def label(self, index: int) -> str:
        for off, block in zip(self._offsets, self.blocks):
            if off <= index < off + block.size:
                if block.labels is not None:
                    return block.labels[index - off]
                break
        return f"term {index}"

    def statistics(self, theta) -> np.ndarray:
        """All statistics at ``theta``, concatenated in flat term order."""
        theta = np.asarray(theta, dtype=float)
        if len(self.blocks) == 1:
            return self.blocks[0].statistics(theta)
        return np.concatenate([b.statistics(theta) for b in self.blocks], axis=-1)

    def _checked(self, stats: np.ndarray, which: str) -> np.ndarray:
        if not (stats > STATISTIC_FLOOR).all():
            bad = ~(stats > STATISTIC_FLOOR)
            index = int(np.argmax(bad.reshape(-1, stats.shape[-1]).any(axis=0)))
            raise BoundaryViolation(
                f"statistic {self.label(index)} is not positive at {which}",
                index=index, label=self.label(index))
        return stats

    def __call__(self, theta, theta_bar):
        return self.evaluate(theta, theta_bar)

    def evaluate(self, theta, theta_bar):
        """I(theta, theta_bar); ``theta`` may carry leading batch axes."""
        t = self._checked(self.statistics(theta), "theta")
        tb = self._checked(self.statistics(theta_bar), "theta_bar")
        val = (self.weights * t * self.phi.eval(tb / t)).sum(axis=-1)
        return float(val) if np.ndim(val) == 0 else val

    def gradient(self, theta, theta_bar) -> np.ndarray:
        """Gradient of I(., theta_bar) at a single point ``theta``."""
        theta = np.asarray(theta, dtype=float)
        t = self._checked(self.statistics(theta), "theta")
        tb = self._checked(self.statistics(theta_bar), "theta_bar")
        r = tb / t
        coef = self.weights * (self.phi.eval(r) - r * self.phi.deriv(r))
        jac = np.concatenate([b.jacobian(theta) for b in self.blocks], axis=0)
        return coef @ jac

    def anchored(self, theta_bar) -> "AnchoredDivergence":
        """Freeze the second argument; statistics at ``theta_bar`` are cached."""
        tb = self._checked(self.statistics(theta_bar), "theta_bar")
        return AnchoredDivergence(self, tb)


@numba.njit(cache=True)
def _kl_rows(t, tb, w, floor):
    # t * phi(tb / t) with phi = tau log tau; nan flags a statistic at the floor
    out = np.empty(t.shape[0])
    for r in range(t.shape[0]):
        acc = 0.0
        for i in range(t.shape[1]):
            x = t[r, i]
            if not x > floor:
                acc = np.nan
                break
            ratio = tb[i] / x
            acc += w[i] * x * (ratio * np.log(ratio))
        out[r] = acc
    return out


class AnchoredDivergence:
    """``theta -> I(theta, theta_bar)`` with the anchor statistics precomputed."""

    __slots__ = ("divergence", "anchor_stats", "_weights")

    def __init__(self, divergence: KullbackDivergence, anchor_stats: np.ndarray):
        self.divergence = divergence
        self.anchor_stats = anchor_stats
        self._weights = divergence.weights

    def __call__(self, theta):
        div = self.divergence
        t = div.statistics(theta)
        if div.phi is TAU_LOG_TAU:
            flat = np.ascontiguousarray(t.reshape(-1, t.shape[-1]))
            val = _kl_rows(flat, self.anchor_stats, self._weights, STATISTIC_FLOOR)
            if not np.isnan(val).any():
                return float(val[0]) if t.ndim == 1 else val.reshape(t.shape[:-1])
        t = div._checked(t, "theta")
        val = (self._weights * t * div.phi.eval(self.anchor_stats / t)).sum(axis=-1)
        return float(val) if np.ndim(val) == 0 else val


def divergence_eval(div: KullbackDivergence, theta, theta_bar) -> float:
    return div.evaluate(theta, theta_bar)


def divergence_grad1(div: KullbackDivergence, theta, theta_bar) -> np.ndarray:
    return div.gradient(theta, theta_bar)
