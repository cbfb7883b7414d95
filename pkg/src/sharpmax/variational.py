"""Variational functional built from a maximal profile.

With ``g = Mf`` and ``g'`` sampled on a profile grid,

    F(x, y, z) = α (g + g' y)^p (z + 1) + (1 - α) (g - g' y)^p (z - 1)

and ``I(φ) = ∫ F(x, φ, φ') dx`` over the window ``a <= |x - c| <= d`` on both
sides of the peak ``c``. ``I(s) = ‖f‖_p^p`` for the signed optimal radius
``s``, and ``φ = s₀ = -β g / g'`` solves the Euler-Lagrange equation.

Quadrature treats ``φ'`` as the secant slope on each grid interval. Because
``F`` is affine in ``z`` this is the trapezoid rule for ``∫ A dφ + ∫ B dx``
with ``A = ∂F/∂z`` and ``B = F - zA``, so no pointwise derivative of the
kinked radius function ``s`` is needed.

Derivation of the Euler-Lagrange residual. With ``P = g + g'φ`` and
``Q = g - g'φ``,

    ∂_z F       = α P^p + (1-α) Q^p
    d/dx ∂_z F  = p α P^(p-1) (g' + g''φ + g'φ') + p (1-α) Q^(p-1) (g' - g''φ - g'φ')
    ∂_y F       = p α P^(p-1) g' (φ'+1) - p (1-α) Q^(p-1) g' (φ'-1)

and the difference collapses to ``p g'' φ [α P^(p-1) - (1-α) Q^(p-1)]``.
The bracket vanishes at ``φ = s₀`` by the definition of β, whatever ``g''``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import beta_of_alpha, r_of_alpha
from .funcrep import PiecewiseLinearFn, is_peak_shaped, lp_norm_p
from .maxop import GridSpec, MaximalProfile, maximal_profile

DOMAIN_RTOL = 1e-9
QUADRATURES = ("trapezoid",)


class DomainError(ValueError):
    """A point ``(x, y, z)`` lies outside the strip ``|y| <= g / |g'|``."""

    def __init__(self, message: str, index=None):
        super().__init__(message)
        self.index = index


class ChainViolation(AssertionError):
    pass


@dataclass(frozen=True)
class VariationalConfig:
    """``inner``/``outer`` are window offsets from the peak; ``None`` means
    ``1e-9`` and ``1e3`` times the support radius, deep enough for the spikes
    of the random generator."""

    p: float
    alpha: float
    inner: float | None = None
    outer: float | None = None
    n: int = 480
    quadrature: str = "trapezoid"
    budget_rel: float = 5e-3

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not 0.5 < self.alpha < 1:
            raise ValueError("alpha must lie in (1/2, 1)")
        if self.inner is not None and self.outer is not None and not 0 < self.inner < self.outer:
            raise ValueError("window needs 0 < inner < outer")
        if self.quadrature not in QUADRATURES:
            raise ValueError(f"unknown quadrature {self.quadrature!r}")

    def grid(self, f: PiecewiseLinearFn) -> GridSpec:
        radius = f.support_radius
        inner = self.inner if self.inner is not None else 1e-9 * radius
        outer = self.outer if self.outer is not None else 1e3 * radius
        return GridSpec(n=self.n, inner=inner, outer=outer)


def _bases(gx, gpx, y, strict: bool = True):
    gx = np.asarray(gx, dtype=float)
    gpx = np.asarray(gpx, dtype=float)
    y = np.asarray(y, dtype=float)
    plus = gx + gpx * y
    minus = gx - gpx * y
    if strict:
        bad = np.minimum(plus, minus) < -DOMAIN_RTOL * np.abs(gx)
        if np.any(bad):
            where = np.flatnonzero(np.atleast_1d(bad))
            raise DomainError(f"(y, g, g') outside the admissible strip at index {where[0]}", where)
    # points on the boundary of the strip carry f(x ± y) = 0 up to rounding
    return np.maximum(plus, 0.0), np.maximum(minus, 0.0)


def F_eval(gx, gpx, cfg: VariationalConfig, y, z):
    """Integrand value; vectorized over all array arguments."""
    plus, minus = _bases(gx, gpx, y)
    a, p = cfg.alpha, cfg.p
    return a * plus**p * (np.asarray(z) + 1.0) + (1.0 - a) * minus**p * (np.asarray(z) - 1.0)


def dF_dy(gx, gpx, cfg: VariationalConfig, y, z):
    plus, minus = _bases(gx, gpx, y)
    a, p = cfg.alpha, cfg.p
    z = np.asarray(z)
    return p * np.asarray(gpx) * (a * plus ** (p - 1) * (z + 1.0) - (1.0 - a) * minus ** (p - 1) * (z - 1.0))


def dF_dz(gx, gpx, cfg: VariationalConfig, y, z=None):
    plus, minus = _bases(gx, gpx, y)
    a, p = cfg.alpha, cfg.p
    return a * plus**p + (1.0 - a) * minus**p


def d2F_dydz(gx, gpx, cfg: VariationalConfig, y, z=None):
    plus, minus = _bases(gx, gpx, y)
    a, p = cfg.alpha, cfg.p
    return p * np.asarray(gpx) * (a * plus ** (p - 1) - (1.0 - a) * minus ** (p - 1))


def mixed_bracket(alpha: float, p: float) -> float:
    """``α(1-β)^(p-1) - (1-α)(1+β)^(p-1)``; zero by the choice of β."""
    beta = beta_of_alpha(alpha, p)
    return alpha * (1.0 - beta) ** (p - 1.0) - (1.0 - alpha) * (1.0 + beta) ** (p - 1.0)


@dataclass(frozen=True)
class S0Result:
    values: np.ndarray
    excluded: np.ndarray


def s0_of(prof: MaximalProfile, alpha: float, p: float) -> S0Result:
    """``-β g / g'``; points with ``g'`` indistinguishable from 0 are excluded."""
    beta = beta_of_alpha(alpha, p)
    dist = np.abs(prof.x - prof.center)
    flat = np.abs(prof.gprime) * dist <= 1e-12 * prof.g
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(flat, np.nan, -beta * prof.g / prof.gprime)
    return S0Result(values=vals, excluded=np.flatnonzero(flat))


def _window_sides(prof: MaximalProfile, cfg: VariationalConfig | None):
    dist = np.abs(prof.x - prof.center)
    inner = -np.inf if cfg is None or cfg.inner is None else cfg.inner * (1 - 1e-12)
    outer = np.inf if cfg is None or cfg.outer is None else cfg.outer * (1 + 1e-12)
    keep = (dist >= inner) & (dist <= outer)
    left, right = prof.sides()
    return left[keep[left]], right[keep[right]]


def functional_I(prof: MaximalProfile, phi, phi_prime, cfg: VariationalConfig) -> float:
    """Windowed ``I(φ)``.

    With ``phi_prime=None`` the derivative is the secant slope on each grid
    interval (see module notes); otherwise ``φ'`` is taken pointwise and the
    plain trapezoid rule is used.
    """
    phi = np.asarray(phi, dtype=float)
    total = 0.0
    for idx in _window_sides(prof, cfg):
        if idx.size < 2:
            continue
        x, g, gp, y = prof.x[idx], prof.g[idx], prof.gprime[idx], phi[idx]
        try:
            if phi_prime is None:
                dx = np.diff(x)
                m = np.diff(y) / dx
                lo = F_eval(g[:-1], gp[:-1], cfg, y[:-1], m)
                hi = F_eval(g[1:], gp[1:], cfg, y[1:], m)
                total += float(np.sum(0.5 * (lo + hi) * dx))
            else:
                vals = F_eval(g, gp, cfg, y, np.asarray(phi_prime, dtype=float)[idx])
                total += float(np.trapezoid(vals, x))
        except DomainError as exc:
            at = idx[exc.index[0]] if exc.index is not None and len(exc.index) else None
            raise DomainError(f"phi leaves the admissible strip at x={prof.x[at]!r}", exc.index) from None
    return total


def window_power_integral(prof: MaximalProfile, p: float, cfg: VariationalConfig | None = None) -> float:
    """Trapezoid ``∫ g^p`` over the window on both sides."""
    total = 0.0
    for idx in _window_sides(prof, cfg):
        if idx.size >= 2:
            total += float(np.trapezoid(prof.g[idx] ** p, prof.x[idx]))
    return total


@dataclass(frozen=True)
class IdentityCheck:
    lhs23: float
    lhs24: float
    rhs: float
    pointwise23: float
    pointwise24: float


def check_identities_23_24(f: PiecewiseLinearFn, prof: MaximalProfile, p: float) -> IdentityCheck:
    """Both change-of-variables integrals against ``‖f‖_p^p``.

    ``(s' ± 1) dx = d(s ± x)``, so each integral is a trapezoid sum in the
    pushed-forward variable.
    """
    lhs23 = lhs24 = 0.0
    for idx in prof.sides():
        x, g, gp, s = prof.x[idx], prof.g[idx], prof.gprime[idx], prof.s[idx]
        plus = np.maximum(g + gp * s, 0.0) ** p
        minus = np.maximum(g - gp * s, 0.0) ** p
        lhs23 += float(np.sum(0.5 * (plus[:-1] + plus[1:]) * np.diff(x + s)))
        lhs24 += float(np.sum(0.5 * (minus[:-1] + minus[1:]) * np.diff(s - x)))
    pw23 = float(np.max(np.abs(f(prof.x + prof.s) - (prof.g + prof.gprime * prof.s))))
    pw24 = float(np.max(np.abs(f(prof.x - prof.s) - (prof.g - prof.gprime * prof.s))))
    return IdentityCheck(lhs23, lhs24, lp_norm_p(f, p).value, pw23, pw24)


def _side_gradient(prof: MaximalProfile, y: np.ndarray) -> np.ndarray:
    out = np.full_like(y, np.nan, dtype=float)
    for idx in prof.sides():
        ok = idx[np.isfinite(y[idx])]
        if ok.size >= 3:
            out[ok] = np.gradient(y[ok], prof.x[ok], edge_order=2)
    return out


def el_residual(prof: MaximalProfile, phi, cfg: VariationalConfig) -> np.ndarray:
    """``p g'' φ [α (g+g'φ)^(p-1) - (1-α)(g-g'φ)^(p-1)]`` per grid point.

    ``g''`` comes from centered differences of the exact ``g'`` samples.
    """
    phi = np.asarray(phi, dtype=float)
    gpp = _side_gradient(prof, np.asarray(prof.gprime, dtype=float))
    plus, minus = _bases(prof.g, prof.gprime, np.nan_to_num(phi))
    a, p = cfg.alpha, cfg.p
    bracket = a * plus ** (p - 1) - (1.0 - a) * minus ** (p - 1)
    res = p * gpp * phi * bracket
    return np.where(np.isfinite(phi), res, np.nan)


@dataclass(frozen=True)
class ConvexityCheck:
    gaps: np.ndarray
    scale: float
    mixed_at_s0: float


def check_pointwise_convexity(prof: MaximalProfile, cfg: VariationalConfig, s0: np.ndarray | None = None) -> ConvexityCheck:
    """Gap between ``F(s, s')`` and the first-order expansion about ``s₀``.

    Also reports ``max |∂_y∂_z F(x, s₀, ·)| / (p |g'| g^(p-1))``, which is the
    β bracket evaluated at the samples.
    """
    if s0 is None:
        s0 = s0_of(prof, cfg.alpha, cfg.p).values
    s = np.asarray(prof.s, dtype=float)
    ds = _side_gradient(prof, s)
    ds0 = _side_gradient(prof, s0)
    g, gp = prof.g, prof.gprime
    ok = np.isfinite(s0) & np.isfinite(ds0) & np.isfinite(ds)
    gaps = np.full(s.shape, np.nan)
    g_, gp_, s_, s0_, ds_, ds0_ = g[ok], gp[ok], s[ok], s0[ok], ds[ok], ds0[ok]
    f_s = F_eval(g_, gp_, cfg, s_, ds_)
    f_0 = F_eval(g_, gp_, cfg, s0_, ds0_)
    lin = dF_dy(g_, gp_, cfg, s0_, ds0_) * (s_ - s0_) + dF_dz(g_, gp_, cfg, s0_) * (ds_ - ds0_)
    gaps[ok] = (f_s - f_0) - lin
    scale = float(np.max(np.abs(f_s))) if f_s.size else 0.0
    mixed = d2F_dydz(g_, gp_, cfg, s0_) / (cfg.p * np.abs(gp_) * g_ ** (cfg.p - 1))
    return ConvexityCheck(gaps=gaps, scale=scale, mixed_at_s0=float(np.max(np.abs(mixed))) if mixed.size else 0.0)


def boundary_terms(prof: MaximalProfile, alpha: float, p: float, cfg: VariationalConfig | None = None) -> tuple[float, float]:
    """Integration-by-parts remainders at the inner and outer window edges.

    On each half, ``∫ F(x, s₀, s₀') = r ∫ g^p + γ₂ β [g^(p+1)/g']`` evaluated
    between the edges; the two returned numbers are the inner-edge and
    outer-edge contributions summed over both halves.
    """
    beta = beta_of_alpha(alpha, p)
    gamma2 = r_of_alpha(alpha, p).gamma2
    G = prof.g ** (p + 1) / prof.gprime
    (li, ri) = _window_sides(prof, cfg)
    inner = gamma2 * beta * (G[ri[0]] - G[li[-1]])
    outer = gamma2 * beta * (G[li[0]] - G[ri[-1]])
    return float(inner), float(outer)


@dataclass(frozen=True)
class VariationalReport:
    p: float
    alpha: float
    I_s: float
    I_s0: float
    f_norm_p: float
    g_norm_p: float
    r_alpha: float
    r_g_norm: float
    el_residual_max: float
    el_scale: float
    pointwise_gap_min: float
    gap_scale: float
    mixed_bracket: float
    boundary_terms: tuple[float, float]
    identity23: float
    identity24: float
    excluded_points: int
    budget: float
    chain_ok: bool
    equality_s_ok: bool
    equality_s0_ok: bool
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["boundary_terms"] = list(self.boundary_terms)
        return d


@dataclass(frozen=True)
class PointwiseRows:
    x: np.ndarray
    s: np.ndarray
    s0: np.ndarray
    F_at_s: np.ndarray
    F_at_s0: np.ndarray
    gap: np.ndarray
    el_residual: np.ndarray

    def to_csv(self) -> str:
        from .io import csv_text

        keep = np.isfinite(self.s0) & np.isfinite(self.gap) & np.isfinite(self.el_residual)
        cols = [getattr(self, k)[keep] for k in ("x", "s", "s0", "F_at_s", "F_at_s0", "gap", "el_residual")]
        return csv_text(("x", "s", "s0", "F_at_s", "F_at_s0", "gap", "el_residual"), cols)


def certify_chain(
    f: PiecewiseLinearFn,
    p: float,
    alpha: float,
    cfg: VariationalConfig | None = None,
    prof: MaximalProfile | None = None,
    strict: bool = True,
    threads: int | None = None,
) -> tuple[VariationalReport, PointwiseRows]:
    """Evaluate ``I(s)``, ``I(s₀)`` and the inequalities linking them.

    The tolerance on ``I(s₀) ≈ r ‖g‖_p^p`` is the relative quadrature budget
    plus the magnitude of the boundary terms, which are not assumed to vanish.
    With ``strict`` a violated chain raises :class:`ChainViolation`.
    """
    if not is_peak_shaped(f).is_peak_shaped:
        raise ValueError("certify_chain requires a peak-shaped function")
    cfg = cfg or VariationalConfig(p=p, alpha=alpha)
    if cfg.p != p or cfg.alpha != alpha:
        cfg = VariationalConfig(p=p, alpha=alpha, inner=cfg.inner, outer=cfg.outer, n=cfg.n, quadrature=cfg.quadrature, budget_rel=cfg.budget_rel)
    grid = cfg.grid(f)
    if prof is None:
        prof = maximal_profile(f, grid, threads=threads)
    wcfg = VariationalConfig(p=p, alpha=alpha, inner=grid.inner, outer=grid.outer, n=cfg.n, quadrature=cfg.quadrature, budget_rel=cfg.budget_rel)

    s0 = s0_of(prof, alpha, p)
    i_s = functional_I(prof, prof.s, None, wcfg)
    s0_filled = s0.values
    i_s0 = functional_I(prof, s0_filled, None, wcfg) if s0.excluded.size == 0 else _functional_excluding(prof, s0_filled, wcfg)
    f_norm = lp_norm_p(f, p).value
    g_norm = window_power_integral(prof, p, wcfg)
    r = float(r_of_alpha(alpha, p))
    bnd = boundary_terms(prof, alpha, p, wcfg)

    el = el_residual(prof, s0_filled, wcfg)
    gpp_scale = np.abs(p * _side_gradient(prof, np.asarray(prof.gprime, dtype=float)) * s0_filled * prof.g ** (p - 1))
    el_scale = float(np.nanmax(gpp_scale))
    conv = check_pointwise_convexity(prof, wcfg, s0_filled)
    ident = check_identities_23_24(f, prof, p)

    budget = cfg.budget_rel * f_norm
    eq_s = abs(i_s - f_norm) <= cfg.budget_rel * f_norm
    eq_s0 = abs(i_s0 - r * g_norm) <= cfg.budget_rel * abs(r * g_norm) + abs(bnd[0]) + abs(bnd[1])
    chain = i_s >= i_s0 - budget
    report = VariationalReport(
        p=float(p),
        alpha=float(alpha),
        I_s=i_s,
        I_s0=i_s0,
        f_norm_p=f_norm,
        g_norm_p=g_norm,
        r_alpha=r,
        r_g_norm=r * g_norm,
        el_residual_max=float(np.nanmax(np.abs(el))),
        el_scale=el_scale,
        pointwise_gap_min=float(np.nanmin(conv.gaps)),
        gap_scale=conv.scale,
        mixed_bracket=abs(mixed_bracket(alpha, p)),
        boundary_terms=bnd,
        identity23=ident.lhs23,
        identity24=ident.lhs24,
        excluded_points=int(s0.excluded.size),
        budget=budget,
        chain_ok=bool(chain),
        equality_s_ok=bool(eq_s),
        equality_s0_ok=bool(eq_s0),
        config={"p": p, "alpha": alpha, "inner": grid.inner, "outer": grid.outer, "n": cfg.n, "quadrature": cfg.quadrature, "budget_rel": cfg.budget_rel},
    )
    f_at_s = np.full(prof.x.shape, np.nan)
    f_at_s0 = np.full(prof.x.shape, np.nan)
    ds = _side_gradient(prof, np.asarray(prof.s, dtype=float))
    ds0 = _side_gradient(prof, s0_filled)
    okp = np.isfinite(ds)
    f_at_s[okp] = F_eval(prof.g[okp], prof.gprime[okp], wcfg, prof.s[okp], ds[okp])
    ok0 = np.isfinite(s0_filled) & np.isfinite(ds0)
    f_at_s0[ok0] = F_eval(prof.g[ok0], prof.gprime[ok0], wcfg, s0_filled[ok0], ds0[ok0])
    rows = PointwiseRows(prof.x, np.asarray(prof.s), s0_filled, f_at_s, f_at_s0, conv.gaps, el)
    if strict and not (chain and eq_s and eq_s0):
        raise ChainViolation(
            f"chain check failed: I(s)={i_s!r}, ||f||^p={f_norm!r}, I(s0)={i_s0!r}, "
            f"r||g||^p={r * g_norm!r}, boundary={bnd!r}, budget={budget!r}"
        )
    return report, rows


def _functional_excluding(prof: MaximalProfile, phi: np.ndarray, cfg: VariationalConfig) -> float:
    """``I(φ)`` summed over runs of finite samples only."""
    total = 0.0
    for idx in _window_sides(prof, cfg):
        finite = np.isfinite(phi[idx])
        runs = np.split(idx, np.flatnonzero(np.diff(finite.astype(np.int8))) + 1)
        for run in runs:
            if run.size >= 2 and np.all(np.isfinite(phi[run])):
                x, g, gp, y = prof.x[run], prof.g[run], prof.gprime[run], phi[run]
                dx = np.diff(x)
                m = np.diff(y) / dx
                lo = F_eval(g[:-1], gp[:-1], cfg, y[:-1], m)
                hi = F_eval(g[1:], gp[1:], cfg, y[1:], m)
                total += float(np.sum(0.5 * (lo + hi) * dx))
    return total
