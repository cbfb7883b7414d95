"""Exact centered maximal function of piecewise-linear functions.

For a fixed center ``x`` the radius axis splits into cells at the radii where
``x + t`` or ``x - t`` crosses a breakpoint. Inside a cell the window
integral ``A(t) = ∫_{x-t}^{x+t} f`` is a quadratic ``a + b t + c t^2``, so the
window average ``A(t) / 2t`` has at most one interior critical point,
``t^2 = a / c``, and it is a local maximum exactly when ``c < 0`` (then
``a < 0`` too). The supremum is the best of these critical points, the cell
endpoints, and the ``t -> 0`` limit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .funcrep import NormValue, PeakShapeReport, PiecewiseLinearFn, discrete_convexity, lp_norm_p

TIE_RTOL = 1e-12
# one-sided slope test for endpoint maximizers, relative to the max value
CRITICAL_RTOL = 1e-10


class WindowAverage(NamedTuple):
    x: float
    t: float
    value: float


class MaximalValue(NamedTuple):
    g: float
    delta: float


def xi(f: PiecewiseLinearFn, x: float, t: float) -> WindowAverage:
    """Average of f over ``[x - t, x + t]``; the two-sided limit at ``t = 0``."""
    if t < 0:
        raise ValueError("radius must be nonnegative")
    if t == 0:
        value = 0.5 * (f(x, side="left") + f(x, side="right"))
    else:
        value = float(f.integral(x - t, x + t)) / (2.0 * t)
    return WindowAverage(float(x), float(t), float(value))


def _candidates(f: PiecewiseLinearFn, x: float):
    """Candidate radii, their averages, and a flag for local maximality."""
    xs = f.breakpoints
    d = np.abs(xs - x)
    ev = np.unique(d[d > 0])
    t = np.concatenate(([0.0], ev))
    mid = 0.5 * (t[:-1] + t[1:])
    width = np.diff(t)
    f_r = f(x + mid)
    f_l = f(x - mid)
    curv = 0.5 * (f.slope(x + mid) - f.slope(x - mid))
    # A'(t) at the left end of each cell
    b0 = f_r + f_l - curv * width
    area = f.integral(x - t, x + t)

    xi0 = 0.5 * (f(x, side="left") + f(x, side="right"))
    vals = [xi0]
    rads = [0.0]
    crit = [True]

    # cell endpoints t[1:]
    te = t[1:]
    ve = area[1:] / (2.0 * te)
    half_left = 0.5 * (b0 + 2.0 * curv * width)  # A'(t-)/2 at te
    half_right = np.concatenate((0.5 * b0[1:], [0.0]))  # A'(t+)/2 at te
    scale = max(float(np.max(ve)) if ve.size else 0.0, xi0, 1e-300)
    tol = CRITICAL_RTOL * scale
    ok = (half_left - ve >= -tol) & (half_right - ve <= tol)
    vals.extend(ve.tolist())
    rads.extend(te.tolist())
    crit.extend(ok.tolist())

    # interior critical points: t^2 = t_j^2 + (A_j - t_j A'_j) / c with c < 0
    neg = curv < 0
    if np.any(neg):
        tj = t[:-1][neg]
        c = curv[neg]
        ts2 = tj * tj + (area[:-1][neg] - tj * b0[neg]) / c
        hi = t[1:][neg]
        inside = (ts2 > tj * tj) & (ts2 < hi * hi)
        if np.any(inside):
            ts = np.sqrt(ts2[inside])
            u = ts - tj[inside]
            a_ts = area[:-1][neg][inside] + b0[neg][inside] * u + c[inside] * u * u
            vals.extend((a_ts / (2.0 * ts)).tolist())
            rads.extend(ts.tolist())
            crit.extend([True] * ts.size)
    return np.array(rads), np.array(vals), np.array(crit)


def maximal_at(f: PiecewiseLinearFn, x: float) -> MaximalValue:
    """``Mf(x)`` and the largest maximizing radius.

    Candidates within a relative ``1e-12`` of the maximum count as ties and
    the largest radius wins. An endpoint that is merely close to the maximum
    while the average still rises or falls through it is not a maximizer and
    is skipped in favor of the genuine critical point next to it.
    """
    rads, vals, crit = _candidates(f, float(x))
    vmax = float(vals.max())
    ties = vals >= vmax - TIE_RTOL * abs(vmax)
    pick = ties & crit
    if not np.any(pick):
        pick = ties
    return MaximalValue(vmax, float(rads[pick].max()))


def maximal_values(f: PiecewiseLinearFn, xs: Sequence[float], threads: int | None = None):
    """Vector of ``(g, delta)`` over centers; order preserved."""
    xs = [float(v) for v in xs]
    if threads is not None and threads > 1 and len(xs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(lambda v: maximal_at(f, v), xs))
    else:
        out = [maximal_at(f, v) for v in xs]
    g = np.array([o.g for o in out])
    delta = np.array([o.delta for o in out])
    return g, delta


@dataclass(frozen=True)
class GridSpec:
    """Symmetric geometric grid ``c ± r q^k`` about the peak ``c``.

    ``inner`` and ``outer`` are absolute offsets; when omitted they default to
    ``1e-3`` and ``1e3`` times the support radius.
    """

    n: int = 240
    inner: float | None = None
    outer: float | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("grid needs at least 3 points per side")
        if self.inner is not None and self.inner <= 0:
            raise ValueError("inner offset must be positive")
        if self.inner is not None and self.outer is not None and self.outer <= self.inner:
            raise ValueError("outer offset must exceed inner offset")

    def offsets(self, radius: float) -> np.ndarray:
        inner = self.inner if self.inner is not None else 1e-3 * radius
        outer = self.outer if self.outer is not None else 1e3 * radius
        if outer <= inner:
            raise ValueError("outer offset must exceed inner offset")
        return np.geomspace(inner, outer, self.n)

    def points(self, center: float, radius: float) -> np.ndarray:
        off = self.offsets(radius)
        return np.concatenate((center - off[::-1], center + off))

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """``"n,inner,outer"``; empty fields keep the defaults."""
        parts = [p.strip() for p in text.split(",")]
        if not 1 <= len(parts) <= 3:
            raise ValueError(f"bad grid spec {text!r}")
        parts += [""] * (3 - len(parts))
        n = int(parts[0]) if parts[0] else cls.n
        inner = float(parts[1]) if parts[1] else None
        outer = float(parts[2]) if parts[2] else None
        return cls(n=n, inner=inner, outer=outer)


@dataclass(frozen=True, eq=False)
class MaximalProfile:
    """Samples of ``g = Mf`` with the optimal radius and ``g'`` on a grid."""

    x: np.ndarray
    g: np.ndarray
    delta: np.ndarray
    s: np.ndarray
    gprime: np.ndarray
    center: float
    g_center: float
    source: PiecewiseLinearFn = field(repr=False)
    grid: GridSpec = field(default_factory=GridSpec)

    @property
    def right(self) -> np.ndarray:
        return self.x > self.center

    @property
    def left(self) -> np.ndarray:
        return self.x < self.center

    def sides(self):
        """Index arrays for the left and right halves, each sorted by x."""
        return np.flatnonzero(self.left), np.flatnonzero(self.right)

    def to_csv(self) -> str:
        from .io import csv_text

        return csv_text(("x", "g", "delta", "s", "gprime"), (self.x, self.g, self.delta, self.s, self.gprime))


def maximal_profile(f: PiecewiseLinearFn, grid_spec: GridSpec | None = None, threads: int | None = None) -> MaximalProfile:
    grid_spec = grid_spec or GridSpec()
    c = f.peak_location
    xs = grid_spec.points(c, f.support_radius)
    g, delta = maximal_values(f, xs, threads=threads)
    s = np.sign(xs - c) * delta
    # (f(x+δ) - f(x-δ)) / 2δ rewritten with g = (f(x+δ) + f(x-δ)) / 2 so that
    # only the endpoint away from the peak is read; when the optimal window
    # ends exactly on a jump at the peak this is still the derivative of g
    with np.errstate(divide="ignore", invalid="ignore"):
        gprime = (f(xs + s) - g) / s
    gc = maximal_at(f, c).g
    for arr in (xs, g, delta, s, gprime):
        arr.setflags(write=False)
    return MaximalProfile(x=xs, g=g, delta=delta, s=s, gprime=gprime, center=c, g_center=gc, source=f, grid=grid_spec)


def _power_law_segments(d: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``∫ y`` over each ``[d_i, d_{i+1}]`` assuming ``y = A d^k`` there.

    Exact for power laws; the ``k = -1`` case of the sharpness family goes
    through ``expm1`` without cancellation.
    """
    d0, d1, y0, y1 = d[:-1], d[1:], y[:-1], y[1:]
    L = np.log(d1 / d0)
    out = 0.5 * (y0 + y1) * (d1 - d0)
    pos = (y0 > 0) & (y1 > 0)
    k1 = np.log(y1[pos] / y0[pos]) / L[pos] + 1.0
    e = k1 * L[pos]
    small = np.abs(e) < 1e-12
    ratio = np.where(small, 1.0, np.expm1(e) / np.where(small, 1.0, e))
    out[pos] = d0[pos] * y0[pos] * L[pos] * ratio
    return out


def profile_norm_p(prof: MaximalProfile, p: float) -> NormValue:
    """``∫ g^p`` over the line from a profile.

    Power-law quadrature between grid points, a trapezoid from the innermost
    points to the peak value, and the exact ``1/|x|`` tail beyond the
    outermost points.
    """
    total = 0.0
    for idx in prof.sides():
        d = np.abs(prof.x[idx] - prof.center)
        order = np.argsort(d)
        d, y = d[order], prof.g[idx][order] ** p
        total += float(np.sum(_power_law_segments(d, y)))
        total += 0.5 * (prof.g_center**p + y[0]) * d[0]
        total += y[-1] * d[-1] / (p - 1.0)
    return NormValue(p=float(p), value=total)


def norm_grid(f: PiecewiseLinearFn, n: int = 480) -> GridSpec:
    """Grid deep enough to resolve a spiky peak: ``1e-9 R`` to ``1e3 R``."""
    radius = f.support_radius
    return GridSpec(n=n, inner=1e-9 * radius, outer=1e3 * radius)


def norm_ratio(
    f: PiecewiseLinearFn, p: float, prof: MaximalProfile | None = None, grid_spec: GridSpec | None = None, threads: int | None = None
) -> float:
    """``‖Mf‖_p / ‖f‖_p``; the default grid is :func:`norm_grid`."""
    prof = prof if prof is not None else maximal_profile(f, grid_spec or norm_grid(f), threads=threads)
    return (profile_norm_p(prof, p).value / lp_norm_p(f, p).value) ** (1.0 / p)


def _centered_derivative(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Second-order derivative on a nonuniform grid (one-sided at the ends)."""
    return np.gradient(y, x, edge_order=2)


@dataclass(frozen=True)
class StructuralCheckReport:
    lemma1_avg_residual: float
    lemma1_slope_residual: float
    s_slope_margin: float
    min_delta_excess: float
    mf_peakshape: PeakShapeReport


def structural_checks(f: PiecewiseLinearFn, prof: MaximalProfile, tol_convexity: float = 1e-12) -> StructuralCheckReport:
    x, g, delta, gp = prof.x, prof.g, prof.delta, prof.gprime
    avg = 0.5 * (f(x + delta) + f(x - delta))
    avg_res = float(np.max(np.abs(g - avg)))
    slope_res = 0.0
    margin = math.inf
    violation = 0.0
    for idx in prof.sides():
        if idx.size < 3:
            continue
        xi_, gi = x[idx], g[idx]
        slope_res = max(slope_res, float(np.max(np.abs(_centered_derivative(xi_, gi) - gp[idx]))))
        ds = np.diff(prof.s[idx]) / np.diff(xi_)
        margin = min(margin, float(np.min(ds)) - 1.0)
        # slopes of rounded samples carry errors of order eps * g / dx
        slopes = np.abs(np.diff(gi) / np.diff(xi_))
        floor = 64 * np.finfo(float).eps * float(np.max(gi)) / float(np.min(np.diff(xi_))) / max(float(np.max(slopes)), 1e-300)
        violation = min(violation, min(0.0, discrete_convexity(xi_, gi) + floor))
    excess = float(np.min(delta - np.abs(x - prof.center)))
    report = PeakShapeReport(
        is_peak_shaped=bool(np.all(g >= 0)) and violation >= -tol_convexity,
        peak_location=prof.center,
        max_convexity_violation=violation,
        positivity_ok=bool(np.all(g >= 0)),
    )
    return StructuralCheckReport(avg_res, slope_res, margin, excess, report)


def _level_crossing(f: PiecewiseLinearFn, lam: float, a: float, b: float) -> float:
    """Root of ``Mf - lam`` bracketed by ``[a, b]``; ``Mf`` is continuous."""
    return optimize.brentq(lambda v: maximal_at(f, v).g - lam, a, b, xtol=1e-15 * max(abs(a), abs(b), 1e-300), rtol=4 * np.finfo(float).eps)


def level_set_measure(f: PiecewiseLinearFn, prof: MaximalProfile, lam: float) -> float:
    """``|{Mf > lam}|`` by scanning samples and bisecting each crossing.

    Any window with mass sits at distance at most ``‖f‖₁ / 2λ`` from the
    support, so the scan is extended geometrically to that radius.
    """
    c = prof.center
    lo, hi = f.support
    reach = f.total_mass / (2.0 * lam)
    pts = [prof.x, [c, c - 1e-12 * f.support_radius, c + 1e-12 * f.support_radius]]
    vals = [prof.g, [prof.g_center] + [maximal_at(f, v).g for v in pts[1][1:]]]
    extra = []
    far_right = hi + reach
    far_left = lo - reach
    if prof.x[-1] < far_right:
        extra.append(prof.x[-1] + np.geomspace(1e-3, 1.0, 24) * (far_right - prof.x[-1]) * 1.01)
    if prof.x[0] > far_left:
        extra.append(prof.x[0] - np.geomspace(1e-3, 1.0, 24) * (prof.x[0] - far_left) * 1.01)
    for e in extra:
        pts.append(e)
        vals.append([maximal_at(f, v).g for v in e])
    x = np.concatenate([np.asarray(p, dtype=float) for p in pts])
    g = np.concatenate([np.asarray(v, dtype=float) for v in vals])
    order = np.argsort(x, kind="stable")
    x, g = x[order], g[order]
    above = g > lam
    if not np.any(above):
        return 0.0
    if above[0] or above[-1]:
        raise RuntimeError("level set reaches the end of the scan")
    flips = np.flatnonzero(np.diff(above.astype(np.int8)))
    ends = [_level_crossing(f, lam, x[i], x[i + 1]) for i in flips]
    return float(sum(b - a for a, b in zip(ends[0::2], ends[1::2])))


def weak_type_ratio(f: PiecewiseLinearFn, prof: MaximalProfile, lambdas: Sequence[float]) -> np.ndarray:
    """``λ |{Mf > λ}| / ‖f‖₁`` for each level."""
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas <= 0):
        raise ValueError("levels must be positive")
    mass = f.total_mass
    top = max(f.max_value, float(prof.g.max()), prof.g_center)
    out = np.empty_like(lambdas)
    for i, lam in enumerate(lambdas):
        out[i] = 0.0 if lam >= top else lam * level_set_measure(f, prof, lam) / mass
    return out


def power_xi(p: float, x: float, t: float) -> float:
    """Window average of ``|u|^(-1/p)`` over ``[x - t, x + t]`` in closed form."""
    if not p > 1:
        raise ValueError("p must exceed 1")
    k = (p - 1.0) / p
    ax = abs(x)
    if t <= 0:
        return ax ** (-1.0 / p)
    if t > ax:
        return ((t + ax) ** k + (t - ax) ** k) / (2.0 * k * t)
    return ((ax + t) ** k - (ax - t) ** k) / (2.0 * k * t)


def power_maximal(p: float, x: float) -> MaximalValue:
    """``sup_t`` of :func:`power_xi` by a log-grid scan and bounded refinement."""
    ax = abs(x)
    if ax == 0:
        raise ValueError("the power function is unbounded at 0")
    ts = ax * np.geomspace(1e-3, 1e3, 601)
    vals = np.array([power_xi(p, x, t) for t in ts])
    i = int(np.argmax(vals))
    lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]
    res = optimize.minimize_scalar(
        lambda t: -power_xi(p, x, t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-13 * ax}
    )
    best = max((-res.fun, res.x), (vals[i], ts[i]))
    return MaximalValue(float(best[0]), float(best[1]))
