"""Sharp constants ``c_p`` and the optimal mixing weight.

``c_p`` is computed two ways that must agree: as ``h(τ)`` with ``τ`` the root
of the critical-point equation, and as the maximum of ``h`` found by golden
section search. ``r(α)`` is likewise evaluated from its ``γ`` composition and
from its closed form, and the two are compared on every call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

DEFAULT_TOL = 1e-12


class InconsistencyError(ArithmeticError):
    """Two independent routes to the same quantity disagree."""


def _check_p(p: float) -> None:
    if not p > 1 or not math.isfinite(p):
        raise ValueError(f"p must be a finite number > 1, got {p}")


def h_value(p: float, t: float) -> float:
    """``((t+1)^k + (t-1)^k) / (2 k t)`` with ``k = (p-1)/p``, for ``t > 1``."""
    _check_p(p)
    if not t > 1:
        raise ValueError(f"h is defined for t > 1, got {t}")
    k = (p - 1.0) / p
    return ((t + 1.0) ** k + (t - 1.0) ** k) / (2.0 * k * t)


def tau_residual(p: float, tau: float) -> float:
    """``p log((p+τ)/(p-τ)) - log((τ+1)/(τ-1))``; increasing on ``(1, p)``."""
    return p * (math.log(p + tau) - math.log(p - tau)) - (math.log(tau + 1.0) - math.log(tau - 1.0))


def tau_of_p(p: float, tol: float = DEFAULT_TOL) -> float:
    """Unique root of :func:`tau_residual` in ``(1, p)``."""
    _check_p(p)
    eps = (p - 1.0) * 1e-12
    a, b = 1.0 + eps, p - eps
    if not (tau_residual(p, a) < 0 < tau_residual(p, b)):
        raise InconsistencyError(f"root of the tau equation is not bracketed for p={p}")
    return optimize.brentq(lambda t: tau_residual(p, t), a, b, xtol=tol * 1e-3, rtol=4 * np.finfo(float).eps, maxiter=500)


def _golden_max_h(p: float, tol: float) -> tuple[float, float]:
    """Maximize h on ``(1, T)``, growing T until the maximum is interior."""
    T = 4.0
    while True:
        ts = 1.0 + (T - 1.0) * np.geomspace(1e-9, 1.0, 400)
        vals = np.array([h_value(p, t) for t in ts])
        i = int(np.argmax(vals))
        if 0 < i < ts.size - 1:
            break
        if i == 0:
            raise InconsistencyError(f"h has no interior maximum near t=1 for p={p}")
        T *= 4.0
        if T > 1e12:
            raise InconsistencyError(f"could not bracket the maximum of h for p={p}")
    res = optimize.minimize_scalar(
        lambda t: -h_value(p, t), bracket=(ts[i - 1], ts[i], ts[i + 1]), method="golden", tol=max(tol, 1e-15)
    )
    return float(res.x), float(-res.fun)


def c_p(p: float, tol: float = DEFAULT_TOL) -> float:
    """Sharp constant; raises :class:`InconsistencyError` if the routes disagree."""
    by_root = h_value(p, tau_of_p(p, tol))
    _, by_search = _golden_max_h(p, tol)
    if abs(by_root - by_search) > 10 * tol * max(1.0, by_root):
        raise InconsistencyError(f"c_p routes disagree for p={p}: {by_root!r} vs {by_search!r}")
    return by_root


def c_p_by_search(p: float, tol: float = DEFAULT_TOL) -> float:
    _check_p(p)
    return _golden_max_h(p, tol)[1]


def _check_alpha(alpha: float) -> None:
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")


def beta_of_alpha(alpha: float, p: float) -> float:
    _check_alpha(alpha)
    _check_p(p)
    e = 1.0 / (p - 1.0)
    a, b = alpha**e, (1.0 - alpha) ** e
    return (a - b) / (a + b)


def alpha_of_beta(beta: float, p: float) -> float:
    """Inverse of :func:`beta_of_alpha`."""
    u, v = (1.0 + beta) ** (p - 1.0), (1.0 - beta) ** (p - 1.0)
    return u / (u + v)


def alpha0_of_p(p: float, tol: float = DEFAULT_TOL) -> float:
    tau = tau_of_p(p, tol)
    # ratio form of ((p+τ)^(p-1)) / ((p+τ)^(p-1) + (p-τ)^(p-1)); no overflow
    ratio = math.exp((p - 1.0) * (math.log(p - tau) - math.log(p + tau)))
    return 1.0 / (1.0 + ratio)


class RValue(float):
    """``r(α)`` carrying its ``γ₁`` and ``γ₂`` components."""

    gamma1: float
    gamma2: float

    def __new__(cls, value: float, gamma1: float, gamma2: float):
        obj = super().__new__(cls, value)
        obj.gamma1 = gamma1
        obj.gamma2 = gamma2
        return obj


def gammas(alpha: float, p: float) -> tuple[float, float]:
    beta = beta_of_alpha(alpha, p)
    lo, hi = (1.0 - beta) ** p, (1.0 + beta) ** p
    return alpha * lo - (1.0 - alpha) * hi, alpha * lo + (1.0 - alpha) * hi


def r_closed_form(alpha: float, p: float) -> float:
    _check_alpha(alpha)
    _check_p(p)
    e = 1.0 / (p - 1.0)
    a, b = alpha**e, (1.0 - alpha) ** e
    return 2.0**p * (p - 1.0) * alpha * (1.0 - alpha) * (a - b) / (a + b) ** p


R_RTOL = 1e-12


def r_of_alpha(alpha: float, p: float) -> RValue:
    """``γ₁ + p β γ₂``, checked against the closed form."""
    beta = beta_of_alpha(alpha, p)
    g1, g2 = gammas(alpha, p)
    composed = g1 + p * beta * g2
    closed = r_closed_form(alpha, p)
    # the composition cancels terms of size γ₂(1 + pβ), which stay O(1) while
    # r itself vanishes as alpha -> 1/2
    scale = max(abs(closed), g2 * (1.0 + p * beta))
    if abs(composed - closed) > R_RTOL * scale:
        raise InconsistencyError(f"r(alpha) forms disagree at alpha={alpha}, p={p}: {composed!r} vs {closed!r}")
    return RValue(composed, g1, g2)


@dataclass(frozen=True)
class ConstantsRecord:
    p: float
    tau: float
    c_p: float
    alpha0: float
    beta0: float
    r_at_alpha0: float
    cross_check_gap: float

    def row(self) -> tuple:
        return (self.p, self.tau, self.c_p, self.alpha0, self.beta0, self.r_at_alpha0, self.cross_check_gap)


CONSTANTS_HEADER = ("p", "tau", "c_p", "alpha0", "beta0", "r_alpha0", "gap")


@dataclass(frozen=True)
class AlphaSweep:
    p: float
    alphas: np.ndarray
    r_values: np.ndarray
    argmax_alpha: float
    max_r: float

    @property
    def step(self) -> float:
        return float(self.alphas[1] - self.alphas[0])


class CertificationError(AssertionError):
    pass


def constants_record(p: float, tol: float = DEFAULT_TOL) -> ConstantsRecord:
    tau = tau_of_p(p, tol)
    cp = c_p(p, tol)
    a0 = alpha0_of_p(p, tol)
    b0 = beta_of_alpha(a0, p)
    r0 = float(r_of_alpha(a0, p))
    return ConstantsRecord(p=float(p), tau=tau, c_p=cp, alpha0=a0, beta0=b0, r_at_alpha0=r0, cross_check_gap=abs(r0 - cp**-p))


def alpha_sweep(p: float, size: int = 10_000) -> AlphaSweep:
    """``r`` on the midpoint grid of ``(1/2, 1)`` with ``size`` cells."""
    alphas = 0.5 + 0.5 * (np.arange(size) + 0.5) / size
    r = np.array([float(r_of_alpha(a, p)) for a in alphas])
    i = int(np.argmax(r))
    return AlphaSweep(p=float(p), alphas=alphas, r_values=r, argmax_alpha=float(alphas[i]), max_r=float(r[i]))


def certify_lemma6(p: float, tol: float = 1e-9, alpha_grid_size: int = 10_000) -> tuple[ConstantsRecord, AlphaSweep]:
    """Check ``r(α₀) = c_p^-p`` and that no grid α beats ``α₀``.

    Raises :class:`CertificationError` naming the offending value.
    """
    rec = constants_record(p)
    if not rec.cross_check_gap <= tol:
        raise CertificationError(f"p={p}: |r(alpha0) - c_p^-p| = {rec.cross_check_gap:.3e} > {tol:.1e}")
    sweep = alpha_sweep(p, alpha_grid_size)
    over = sweep.r_values - rec.r_at_alpha0
    worst = int(np.argmax(over))
    if over[worst] > 1e-12:
        raise CertificationError(f"p={p}: r({sweep.alphas[worst]!r}) exceeds r(alpha0) by {over[worst]:.3e}")
    if abs(sweep.argmax_alpha - rec.alpha0) > sweep.step:
        raise CertificationError(f"p={p}: grid argmax {sweep.argmax_alpha!r} is not within one step of alpha0={rec.alpha0!r}")
    return rec, sweep
