"""Compactly supported piecewise-linear functions with a single peak.

A :class:`PiecewiseLinearFn` is the concrete stand-in for a peak-shaped
function: nonnegative, zero outside ``[breakpoints[0], breakpoints[-1]]``,
linear between breakpoints. One repeated abscissa is allowed and encodes a
jump; it must sit at the declared peak.

Window integrals are exact (up to rounding): the antiderivative is anchored
at the peak, so small windows near a tall spike do not lose precision to a
large cumulative mass.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "GeneratorParams",
    "NormValue",
    "PeakShapeReport",
    "PiecewiseLinearFn",
    "discrete_convexity",
    "evaluate",
    "integral",
    "is_peak_shaped",
    "is_unimodal",
    "lp_norm_p",
    "make_plf",
    "random_peak_shaped",
    "random_unimodal",
    "truncated_power",
]

USER_TOL_CONVEXITY = 1e-12


class PiecewiseLinearFn:
    """Nonnegative piecewise-linear function with compact support.

    Instances are immutable; the arrays are flagged read-only.
    """

    __slots__ = ("breakpoints", "values", "peak_index", "_slopes", "_anti")

    def __init__(self, breakpoints, values, peak_index: int):
        xs = np.array(breakpoints, dtype=float)
        ys = np.array(values, dtype=float)
        _validate(xs, ys, peak_index)
        widths = np.diff(xs)
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes = np.where(widths > 0, np.diff(ys) / np.where(widths > 0, widths, 1.0), 0.0)
        # antiderivative at each breakpoint, anchored at the peak abscissa
        areas = 0.5 * widths * (ys[:-1] + ys[1:])
        c = xs[peak_index]
        anti = np.zeros_like(xs)
        right = np.flatnonzero(xs[:-1] >= c)
        left = np.flatnonzero(xs[1:] <= c)
        if right.size:
            anti[right + 1] = np.cumsum(areas[right])
        if left.size:
            anti[left] = -np.cumsum(areas[left][::-1])[::-1]
        for arr in (xs, ys, slopes, anti):
            arr.setflags(write=False)
        object.__setattr__(self, "breakpoints", xs)
        object.__setattr__(self, "values", ys)
        object.__setattr__(self, "peak_index", int(peak_index))
        object.__setattr__(self, "_slopes", slopes)
        object.__setattr__(self, "_anti", anti)

    def __setattr__(self, name, value):
        raise AttributeError("PiecewiseLinearFn is immutable")

    def __repr__(self) -> str:
        return (
            f"PiecewiseLinearFn(n={self.breakpoints.size}, "
            f"support=[{self.support[0]:.6g}, {self.support[1]:.6g}], "
            f"peak={self.peak_location:.6g})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, PiecewiseLinearFn):
            return NotImplemented
        return (
            self.peak_index == other.peak_index
            and np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def support(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def peak_location(self) -> float:
        return float(self.breakpoints[self.peak_index])

    @property
    def support_radius(self) -> float:
        """Largest distance from the peak to a support endpoint."""
        lo, hi = self.support
        c = self.peak_location
        return max(c - lo, hi - c)

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @property
    def peak_limits(self) -> tuple[float, float]:
        """One-sided limits ``(f(c-), f(c+))`` at the peak."""
        c = self.peak_location
        return float(self(c, side="left")), float(self(c, side="right"))

    def scaled(self, factor: float) -> "PiecewiseLinearFn":
        if factor < 0:
            raise ValueError("scale factor must be nonnegative")
        return PiecewiseLinearFn(self.breakpoints, factor * self.values, self.peak_index)

    def _segment(self, x, side: str):
        xs = self.breakpoints
        if side == "right":
            idx = np.searchsorted(xs, x, side="right") - 1
        elif side == "left":
            idx = np.searchsorted(xs, x, side="left") - 1
        else:
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        return np.clip(idx, 0, xs.size - 2)

    def __call__(self, x, side: str = "left"):
        """Evaluate f at ``x``; zero outside the support.

        ``side`` picks the one-sided limit at a jump: ``"left"`` is the value
        approached from the left, ``"right"`` from the right.
        """
        x = np.asarray(x, dtype=float)
        xs, ys = self.breakpoints, self.values
        i = self._segment(x, side)
        width = xs[i + 1] - xs[i]
        # zero-width (jump) segments: pick the endpoint on the requested side
        jump = width == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(jump, 1.0 if side == "right" else 0.0, (x - xs[i]) / np.where(jump, 1.0, width))
        # convex combination so breakpoints return their stored values exactly
        out = (1.0 - w) * ys[i] + w * ys[i + 1]
        out = np.where((x < xs[0]) | (x > xs[-1]), 0.0, out)
        out = np.maximum(out, 0.0)
        return out if out.ndim else float(out)

    def slope(self, x, side: str = "left"):
        """Slope of the segment containing ``x`` (zero outside the support)."""
        x = np.asarray(x, dtype=float)
        xs = self.breakpoints
        i = self._segment(x, side)
        out = np.where((x < xs[0]) | (x > xs[-1]), 0.0, self._slopes[i])
        return out if out.ndim else float(out)

    def antiderivative(self, x):
        """``∫_c^x f`` with ``c`` the peak abscissa (signed)."""
        x = np.asarray(x, dtype=float)
        xs, ys, anti = self.breakpoints, self.values, self._anti
        c = xs[self.peak_index]
        xc = np.clip(x, xs[0], xs[-1])
        i = self._segment(xc, "right")
        fx = ys[i] + self._slopes[i] * (xc - xs[i])
        from_left = anti[i] + 0.5 * (xc - xs[i]) * (ys[i] + fx)
        from_right = anti[i + 1] - 0.5 * (xs[i + 1] - xc) * (ys[i + 1] + fx)
        out = np.where(xs[i + 1] <= c, from_right, from_left)
        return out if out.ndim else float(out)

    def integral(self, a, b):
        """Exact ``∫_a^b f``; vectorized over ``a`` and ``b``."""
        return np.subtract(self.antiderivative(b), self.antiderivative(a))

    @property
    def total_mass(self) -> float:
        return float(self._anti[-1] - self._anti[0])

    def to_dict(self) -> dict:
        return {
            "breakpoints": [float(v) for v in self.breakpoints],
            "values": [float(v) for v in self.values],
            "peak_index": self.peak_index,
        }

    def to_json(self) -> str:
        from .io import dumps

        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "PiecewiseLinearFn":
        try:
            return make_plf(data["breakpoints"], data["values"], data["peak_index"])
        except KeyError as exc:
            raise ValueError(f"function JSON is missing field {exc.args[0]!r}") from None

    @classmethod
    def from_json(cls, text: str) -> "PiecewiseLinearFn":
        return cls.from_dict(json.loads(text))


def _validate(xs: np.ndarray, ys: np.ndarray, peak_index: int) -> None:
    if xs.ndim != 1 or ys.ndim != 1 or xs.size != ys.size:
        raise ValueError("breakpoints and values must be 1-d sequences of equal length")
    if xs.size < 3:
        raise ValueError("need at least 3 breakpoints")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("breakpoints and values must be finite")
    if not 0 <= peak_index < xs.size:
        raise ValueError(f"peak_index {peak_index} out of range")
    dx = np.diff(xs)
    if np.any(dx < 0):
        raise ValueError("breakpoints must be sorted")
    repeated = np.flatnonzero(dx == 0)
    if repeated.size > 1:
        raise ValueError("at most one repeated abscissa (the peak jump) is allowed")
    if repeated.size == 1 and peak_index not in (repeated[0], repeated[0] + 1):
        raise ValueError("a repeated abscissa is only allowed at the peak")
    if np.any(ys < 0):
        raise ValueError("values must be nonnegative")
    if ys[0] != 0 or ys[-1] != 0:
        raise ValueError("values at the first and last breakpoint must be 0")


def make_plf(breakpoints: Sequence[float], values: Sequence[float], peak_index: int) -> PiecewiseLinearFn:
    return PiecewiseLinearFn(breakpoints, values, peak_index)


def evaluate(f: PiecewiseLinearFn, x, side: str = "left"):
    return f(x, side=side)


def integral(f: PiecewiseLinearFn, a, b):
    if np.any(np.asarray(a) > np.asarray(b)):
        raise ValueError("integral requires a <= b")
    return f.integral(a, b)


@dataclass(frozen=True)
class NormValue:
    """``value`` is ``∫|f|^p``; ``norm`` is its p-th root."""

    p: float
    value: float

    @property
    def norm(self) -> float:
        return self.value ** (1.0 / self.p)


# Gauss-Legendre nodes on [0, 1] for nearly-constant segments, where the
# closed form cancels catastrophically.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def segment_power_integrals(v0, v1, width, p: float) -> np.ndarray:
    """``∫ (linear from v0 to v1)^p`` over segments of the given widths."""
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    width = np.asarray(width, dtype=float)
    hi = np.maximum(v0, v1)
    dv = v1 - v0
    near = np.abs(dv) <= 1e-3 * hi
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = width * (v1 ** (p + 1) - v0 ** (p + 1)) / ((p + 1) * dv)
    nodes = v0[..., None] + dv[..., None] * _GL_X
    quad = width * (np.maximum(nodes, 0.0) ** p @ _GL_W)
    return np.where(near, quad, closed)


def lp_norm_p(f: PiecewiseLinearFn, p: float) -> NormValue:
    """Exact ``∫ f^p`` summed segment by segment."""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    xs, ys = f.breakpoints, f.values
    return NormValue(p=float(p), value=float(np.sum(segment_power_integrals(ys[:-1], ys[1:], np.diff(xs), p))))


@dataclass(frozen=True)
class PeakShapeReport:
    is_peak_shaped: bool
    peak_location: float
    max_convexity_violation: float
    positivity_ok: bool


def discrete_convexity(xs, ys) -> float:
    """Most negative slope increment of the polyline through ``(xs, ys)``.

    Increments are divided by the largest absolute slope so the result is
    scale free. Returns 0 when the polyline is convex.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size < 3:
        return 0.0
    slopes = np.diff(ys) / np.diff(xs)
    scale = np.max(np.abs(slopes))
    if scale == 0:
        return 0.0
    return float(min(0.0, np.min(np.diff(slopes)) / scale))


def is_peak_shaped(f: PiecewiseLinearFn, tol_convexity: float = USER_TOL_CONVEXITY) -> PeakShapeReport:
    """Convexity on each side of the peak, including the zero extension."""
    xs, ys = f.breakpoints, f.values
    k = f.peak_index
    c = xs[k]
    # left side runs up to the last breakpoint at c on the left branch, the right
    # side starts at the first breakpoint at c; zero slope extends outward
    left_end = np.searchsorted(xs, c, side="left")
    right_start = np.searchsorted(xs, c, side="right") - 1
    lx = np.concatenate(([xs[0] - 1.0], xs[: left_end + 1]))
    ly = np.concatenate(([0.0], ys[: left_end + 1]))
    rx = np.concatenate((xs[right_start:], [xs[-1] + 1.0]))
    ry = np.concatenate((ys[right_start:], [0.0]))
    violation = min(discrete_convexity(lx, ly), discrete_convexity(rx, ry))
    positivity_ok = bool(np.all(ys >= 0))
    return PeakShapeReport(
        is_peak_shaped=positivity_ok and violation >= -tol_convexity,
        peak_location=float(c),
        max_convexity_violation=violation,
        positivity_ok=positivity_ok,
    )


def is_unimodal(f: PiecewiseLinearFn) -> bool:
    """Nondecreasing up to the peak and nonincreasing after it."""
    k = f.peak_index
    ys = f.values
    c = f.breakpoints[k]
    left = ys[: np.searchsorted(f.breakpoints, c, side="left") + 1]
    right = ys[np.searchsorted(f.breakpoints, c, side="right") - 1 :]
    return bool(np.all(np.diff(left) >= 0) and np.all(np.diff(right) <= 0) and np.all(ys >= 0))


@dataclass(frozen=True)
class GeneratorParams:
    """Configuration for :func:`random_peak_shaped`.

    Each side samples ``A (d^-κ - R^-κ)`` at ``segments`` geometric distances
    from ``R 10^-inner_decades`` out to the support radius ``R``, then
    rescales every slope increment by a random factor from ``jitter``. The
    result is a spiky power-law peak whose mass sits in the bulk, with the
    innermost linear piece far below any grid the profiles use.
    """

    segments: tuple[int, int] = (18, 26)
    radius: tuple[float, float] = (0.5, 2.0)
    height: tuple[float, float] = (0.5, 2.0)
    inner_decades: tuple[float, float] = (7.0, 8.0)
    decay: tuple[float, float] = (0.05, 0.2)
    jitter: tuple[float, float] = (0.5, 1.5)
    jump_probability: float = 0.25
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        lo, hi = self.segments
        if lo < 2 or hi < lo:
            raise ValueError("segments range must satisfy 2 <= lo <= hi")
        for name in ("radius", "height", "inner_decades", "jitter"):
            a, b = getattr(self, name)
            if not 0 < a <= b:
                raise ValueError(f"{name} range must be positive and ordered")
        if not 0 < self.decay[0] <= self.decay[1] < 1:
            raise ValueError("decay must lie in (0, 1)")
        if not 0 <= self.jump_probability <= 1:
            raise ValueError("jump_probability must lie in [0, 1]")


def _convex_side(rng: np.random.Generator, params: GeneratorParams, height: float, radius: float):
    """Distances from the peak and values for one decreasing convex side."""
    n = int(rng.integers(params.segments[0], params.segments[1] + 1))
    kappa = rng.uniform(*params.decay)
    d1 = radius * 10.0 ** -rng.uniform(*params.inner_decades)
    dist = np.concatenate(([0.0], np.geomspace(d1, radius, n)))
    shape = dist[1:] ** -kappa - radius**-kappa
    slopes = np.diff(shape) / np.diff(dist[1:])
    # innermost piece: steeper than its neighbour by a random margin
    slopes = np.concatenate(([slopes[0] * rng.uniform(1.5, 3.0)], slopes))
    inc = np.diff(slopes) * rng.uniform(*params.jitter, size=n - 1)
    # rebuild slopes outward-in from the last one; increments stay positive
    slopes = slopes[-1] - np.concatenate((np.cumsum(inc[::-1])[::-1], [0.0]))
    drops = -slopes * np.diff(dist)
    values = np.concatenate((np.cumsum(drops[::-1])[::-1], [0.0]))
    return dist, values * (height / values[0])


def random_peak_shaped(seed: int, params: GeneratorParams | None = None) -> PiecewiseLinearFn:
    """Deterministic random member of the peak-shaped class."""
    params = params or GeneratorParams()
    rng = np.random.default_rng(seed)
    c = rng.uniform(*params.center)
    h_right = rng.uniform(*params.height)
    h_left = h_right
    if rng.uniform() < params.jump_probability:
        h_left = h_right * rng.uniform(0.3, 0.9)
        if rng.uniform() < 0.5:
            h_left, h_right = h_right, h_left
    dl, vl = _convex_side(rng, params, h_left, rng.uniform(*params.radius))
    dr, vr = _convex_side(rng, params, h_right, rng.uniform(*params.radius))
    if h_left == h_right:
        xs = np.concatenate((c - dl[::-1], c + dr[1:]))
        ys = np.concatenate((vl[::-1], vr[1:]))
        k = dl.size - 1
    else:
        xs = np.concatenate((c - dl[::-1], c + dr))
        ys = np.concatenate((vl[::-1], vr))
        k = dl.size - 1 if h_left > h_right else dl.size
    return PiecewiseLinearFn(xs, ys, k)


def random_unimodal(seed: int, segments: tuple[int, int] = (3, 12), radius: tuple[float, float] = (0.5, 2.0)) -> PiecewiseLinearFn:
    """Random function increasing then decreasing, not necessarily convex."""
    rng = np.random.default_rng(seed)
    sides = []
    for _ in range(2):
        n = int(rng.integers(segments[0], segments[1] + 1))
        widths = rng.uniform(0.1, 1.0, size=n)
        widths *= rng.uniform(*radius) / widths.sum()
        drops = rng.exponential(1.0, size=n)
        values = np.concatenate((np.cumsum(drops[::-1])[::-1], [0.0]))
        sides.append((np.concatenate(([0.0], np.cumsum(widths))), values))
    (dl, vl), (dr, vr) = sides
    vr = vr * (vl[0] / vr[0])
    xs = np.concatenate((-dl[::-1], dr[1:]))
    ys = np.concatenate((vl[::-1], vr[1:]))
    return PiecewiseLinearFn(xs, ys, dl.size - 1)


def truncated_power(p: float, cap: float, n_points: int, tail_factor: float = 1.0) -> PiecewiseLinearFn:
    """Peak-shaped interpolant of ``min(cap, |x|^(-1/p))``.

    Abscissas ``q^k`` (so ``x = 1`` is always a node) run from where the
    power reaches ``cap`` out to where it drops to ``tail_factor * cap^-p``;
    ``n_points`` sets the node count per side over that range. The flat top
    of the min would be concave at its corners, so the cap is realized as
    the peak value with the first node pushed out far enough that the first
    chord is steeper than the second.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if not cap > 1:
        raise ValueError("cap must exceed 1")
    if n_points < 16:
        raise ValueError("n_points must be at least 16")
    x_lo = cap ** -p
    x_hi = (tail_factor * cap ** -p) ** -p
    log_q = (math.log(x_hi) - math.log(x_lo)) / (n_points - 1)
    q = math.exp(log_q)
    # first chord from (0, cap) must not be shallower than the next one
    k_steep = 1.0 + (1.0 - q ** (-1.0 / p)) / (q - 1.0)
    x_first = (cap / (k_steep * (1.0 + 1e-6))) ** -p
    k_lo = math.ceil(math.log(x_first) / log_q - 1e-9)
    k_hi = round(math.log(x_hi) / log_q)
    nodes = q ** np.arange(k_lo, k_hi + 1, dtype=float)
    vals = nodes ** (-1.0 / p)
    # close the support with a chord no steeper than the last one
    last_slope = (vals[-1] - vals[-2]) / (nodes[-1] - nodes[-2])
    end = nodes[-1] + 1.01 * vals[-1] / abs(last_slope)
    right_x = np.concatenate((nodes, [end]))
    right_y = np.concatenate((vals, [0.0]))
    xs = np.concatenate((-right_x[::-1], [0.0], right_x))
    ys = np.concatenate((right_y[::-1], [cap], right_y))
    return PiecewiseLinearFn(xs, ys, right_x.size)
