"""Command-line entry point: ``sharpmax <subcommand> [options]``.

Every subcommand prints its table or report to ``--out`` (stdout by default)
and a short summary to stderr. The exit status is 0 when every check passes,
1 when a mathematical assertion fails and 2 for usage or input errors.
"""

from __future__ import annotations

import argparse
import enum
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import constants as K
from . import io as sio
from .funcrep import PiecewiseLinearFn, is_peak_shaped, is_unimodal, random_peak_shaped, random_unimodal, truncated_power
from .maxop import GridSpec, maximal_profile, norm_ratio, structural_checks, weak_type_ratio
from .variational import VariationalConfig, certify_chain


class ExitStatus(enum.IntEnum):
    OK = 0
    ASSERTION = 1
    USAGE = 2


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    p: list[float] = field(default_factory=list)
    alpha: float | None = None
    grid: GridSpec | None = None
    tol: float | None = None
    seeds: list[int] = field(default_factory=list)
    fn: Path | None = None
    out: Path | None = None
    fmt: str = "csv"
    threads: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.threads is not None and self.threads < 1:
            raise UsageError("--threads must be at least 1")
        for p in self.p:
            if not (p > 1 and math.isfinite(p)):
                raise UsageError(f"p must be a finite number > 1, got {p}")
        if self.alpha is not None and not 0.5 < self.alpha < 1:
            raise UsageError(f"alpha must lie in (1/2, 1), got {self.alpha}")


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _seeds(text: str) -> list[int]:
    """``7``, ``1,2,5`` or a half-open range ``0:20``."""
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            return list(range(int(a), int(b)))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed spec {text!r}") from None


def _alpha(text: str):
    if text == "auto":
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"alpha must be 'auto' or a number, got {text!r}") from None


def _grid(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="override the subcommand's main tolerance")
    common.add_argument("--grid", type=_grid, default=None, help="profile grid as n,inner,outer (inner/outer may be empty)")
    common.add_argument("--seed", type=_seeds, default=None, help="seed, comma list or range a:b for generated inputs")
    common.add_argument("--fn", type=Path, default=None, help="input function JSON")
    common.add_argument("--out", type=Path, default=None, help="output path (default stdout)")
    common.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads")

    with_p = argparse.ArgumentParser(add_help=False)
    with_p.add_argument("--p", type=_float_list, default=[2.0], help="exponent or comma list (default 2)")

    parser = argparse.ArgumentParser(prog="sharpmax", description="Verification harness for the sharp maximal inequality on peak-shaped functions.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    c = sub.add_parser("constants", parents=[common, with_p], help="c_p, tau, alpha0 and the r(alpha) certification")
    c.add_argument("--alpha-grid", type=int, default=10_000, help="alpha sweep size")

    m = sub.add_parser("maxfn", parents=[common], help="maximal profile of one function with structural checks")
    m.add_argument("--require-peak", action="store_true", help="reject inputs that are not peak-shaped")

    s = sub.add_parser("sharpness", parents=[common, with_p], help="norm ratios along the truncated power family")
    s.add_argument("--caps", type=_float_list, default=[10.0, 100.0, 1000.0, 10000.0])
    s.add_argument("--n-points", type=int, default=64, help="nodes per side of each family member")
    s.add_argument("--band", type=float, default=0.02, help="allowed relative shortfall of the last ratio")

    v = sub.add_parser("variational", parents=[common, with_p], help="variational chain for one or more functions")
    v.add_argument("--alpha", type=_alpha, default=None, help="'auto' (alpha0) or a value in (1/2, 1)")
    v.add_argument("--budget", type=float, default=5e-3, help="relative quadrature budget")

    w = sub.add_parser("weaktype", parents=[common], help="weak type (1,1) ratios")
    w.add_argument("--lambdas", type=_float_list, default=[1e-3, 1.0, 31.0], help="lo,hi,count for a log-spaced level grid")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    extra = {k: v for k, v in vars(args).items() if k not in {"subcommand", "p", "alpha", "grid", "tol", "seed", "fn", "out", "fmt", "threads"}}
    return RunConfig(
        subcommand=args.subcommand,
        p=list(getattr(args, "p", []) or []),
        alpha=getattr(args, "alpha", None),
        grid=args.grid,
        tol=args.tol,
        seeds=args.seed or [],
        fn=args.fn,
        out=args.out,
        fmt=args.fmt,
        threads=args.threads,
        extra=extra,
    )


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        cfg.out.write_text(text)


def _note(msg: str) -> None:
    print(msg, file=sys.stderr)


def _inputs(cfg: RunConfig, generator) -> list[tuple[str, PiecewiseLinearFn]]:
    fns = []
    if cfg.fn is not None:
        try:
            fns.append((str(cfg.fn), sio.load_function(cfg.fn)))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot load {cfg.fn}: {exc}") from None
    fns.extend((f"seed={s}", generator(s)) for s in cfg.seeds)
    if not fns:
        raise UsageError("give --fn or --seed")
    return fns


def cmd_constants(cfg: RunConfig) -> ExitStatus:
    tol = cfg.tol if cfg.tol is not None else 1e-9
    rows, status = [], ExitStatus.OK
    for p in cfg.p:
        try:
            rec, sweep = K.certify_lemma6(p, tol=tol, alpha_grid_size=cfg.extra["alpha_grid"])
        except (K.CertificationError, K.InconsistencyError) as exc:
            _note(f"FAIL {exc}")
            status = ExitStatus.ASSERTION
            rec, sweep = K.constants_record(p), None
        rows.append((rec, sweep))
        _note(f"p={p:g}: c_p={rec.c_p:.17g} gap={rec.cross_check_gap:.3e}" + ("" if sweep is None else f" argmax={sweep.argmax_alpha:.6f}"))
    if cfg.fmt == "json":
        _emit(cfg, sio.dumps([dict(zip(K.CONSTANTS_HEADER, r.row())) for r, _ in rows]))
    else:
        _emit(cfg, sio.csv_text(K.CONSTANTS_HEADER, zip(*[r.row() for r, _ in rows])))
    return status


def cmd_maxfn(cfg: RunConfig) -> ExitStatus:
    tol = cfg.tol if cfg.tol is not None else 1e-9
    fns = _inputs(cfg, random_peak_shaped)
    status = ExitStatus.OK
    reports = []
    for name, f in fns:
        peak = is_peak_shaped(f)
        if cfg.extra["require_peak"] and not peak.is_peak_shaped:
            raise UsageError(f"{name} is not peak-shaped (convexity violation {peak.max_convexity_violation:.3e})")
        prof = maximal_profile(f, cfg.grid, threads=cfg.threads)
        rep = structural_checks(f, prof)
        ok = True
        if peak.is_peak_shaped:
            # linear pieces at the peak (the tent) give s' = 1 exactly, so only
            # the non-strict form is asserted here
            ok = rep.lemma1_avg_residual <= tol * f.max_value and rep.s_slope_margin >= -tol and rep.mf_peakshape.is_peak_shaped
        _note(
            f"{name}: avg residual {rep.lemma1_avg_residual:.3e}, s' - 1 >= {rep.s_slope_margin:.3e}, "
            f"Mf peak-shaped {rep.mf_peakshape.is_peak_shaped}" + ("" if ok else "  FAIL")
        )
        if not ok:
            status = ExitStatus.ASSERTION
        reports.append((name, prof, rep, peak.is_peak_shaped))
    if cfg.fmt == "json":
        doc = [
            {
                "input": name,
                "peak_shaped": ps,
                "checks": {
                    "lemma1_avg_residual": rep.lemma1_avg_residual,
                    "lemma1_slope_residual": rep.lemma1_slope_residual,
                    "s_slope_margin": rep.s_slope_margin,
                    "min_delta_excess": rep.min_delta_excess,
                    "mf_peak_shaped": rep.mf_peakshape.is_peak_shaped,
                },
                "profile": {"x": prof.x, "g": prof.g, "delta": prof.delta, "s": prof.s, "gprime": prof.gprime},
            }
            for name, prof, rep, ps in reports
        ]
        _emit(cfg, sio.dumps(doc))
    else:
        _emit(cfg, "".join(prof.to_csv() for _, prof, _, _ in reports))
    return status


def cmd_sharpness(cfg: RunConfig) -> ExitStatus:
    caps = cfg.extra["caps"]
    band = cfg.extra["band"]
    upper = cfg.tol if cfg.tol is not None else 1e-6
    if len(caps) < 3:
        raise UsageError("the family needs at least 3 caps")
    if any(c <= 1 for c in caps) or list(caps) != sorted(caps):
        raise UsageError("caps must exceed 1 and increase")
    if not 0 < band < 1:
        raise UsageError("--band must lie in (0, 1)")
    if cfg.extra["n_points"] < 16:
        raise UsageError("--n-points must be at least 16")
    status = ExitStatus.OK
    header = ("p", "cap", "ratio", "ratio_over_c_p")
    rows = []
    for p in cfg.p:
        cp = K.c_p(p)
        ratios = []
        for cap in caps:
            f = truncated_power(p, cap, cfg.extra["n_points"])
            grid = cfg.grid or GridSpec(n=960, inner=1e-3 * cap**-p, outer=1e3 * f.support_radius)
            ratios.append(norm_ratio(f, p, grid_spec=grid, threads=cfg.threads))
            rows.append((p, cap, ratios[-1], ratios[-1] / cp))
        r = np.array(ratios)
        checks = {
            "nondecreasing": bool(np.all(np.diff(r) >= 0)),
            "final_within_band": bool(r[-1] >= (1 - band) * cp),
            "below_c_p": bool(np.all(r <= cp * (1 + upper))),
        }
        _note(f"p={p:g}: ratios/c_p = {', '.join(f'{x / cp:.6f}' for x in r)}; " + ", ".join(f"{k}={v}" for k, v in checks.items()))
        if not all(checks.values()):
            status = ExitStatus.ASSERTION
    if cfg.fmt == "json":
        _emit(cfg, sio.dumps([dict(zip(header, row)) for row in rows]))
    else:
        _emit(cfg, sio.csv_text(header, zip(*rows)))
    return status


def cmd_variational(cfg: RunConfig) -> ExitStatus:
    fns = _inputs(cfg, random_peak_shaped)
    el_tol = cfg.tol if cfg.tol is not None else 1e-9
    status = ExitStatus.OK
    reports, last_rows = [], None
    for name, f in fns:
        if not is_peak_shaped(f).is_peak_shaped:
            raise UsageError(f"{name} is not peak-shaped")
        for p in cfg.p:
            alpha = cfg.alpha if cfg.alpha is not None else K.alpha0_of_p(p)
            vcfg = VariationalConfig(p=p, alpha=alpha, budget_rel=cfg.extra["budget"])
            if cfg.grid is not None:
                vcfg = VariationalConfig(p=p, alpha=alpha, inner=cfg.grid.inner, outer=cfg.grid.outer, n=cfg.grid.n, budget_rel=cfg.extra["budget"])
            rep, rows = certify_chain(f, p, alpha, vcfg, strict=False, threads=cfg.threads)
            ok = (
                rep.chain_ok
                and rep.equality_s_ok
                and rep.equality_s0_ok
                and rep.el_residual_max <= el_tol * rep.el_scale
                and rep.pointwise_gap_min >= -1e-10 * rep.gap_scale
            )
            _note(
                f"{name} p={p:g} alpha={alpha:.12g}: I(s)={rep.I_s:.10g} ||f||^p={rep.f_norm_p:.10g} "
                f"I(s0)={rep.I_s0:.10g} r||g||^p={rep.r_g_norm:.10g} boundary={rep.boundary_terms[0]:.3e},{rep.boundary_terms[1]:.3e}"
                + ("" if ok else "  FAIL")
            )
            if not ok:
                status = ExitStatus.ASSERTION
            reports.append({"input": name, **rep.to_dict()})
            last_rows = rows
    if cfg.fmt == "json" or len(reports) > 1:
        _emit(cfg, sio.dumps(reports if len(reports) > 1 else reports[0]))
    else:
        _emit(cfg, last_rows.to_csv())
    return status


def cmd_weaktype(cfg: RunConfig) -> ExitStatus:
    lo, hi, count = (cfg.extra["lambdas"] + [31.0])[:3]
    if not (0 < lo < hi) or count < 2:
        raise UsageError("--lambdas needs 0 < lo < hi and count >= 2")
    lams = np.geomspace(lo, hi, int(count))
    bound = 1.0 + (cfg.tol if cfg.tol is not None else 1e-6)
    fns = _inputs(cfg, random_unimodal)
    status = ExitStatus.OK
    rows = []
    for name, f in fns:
        if not is_unimodal(f):
            raise UsageError(f"{name} is not unimodal")
        prof = maximal_profile(f, cfg.grid, threads=cfg.threads)
        ratios = weak_type_ratio(f, prof, lams)
        sup = float(ratios.max())
        ok = sup <= bound
        _note(f"{name}: sup ratio {sup:.12g}" + ("" if ok else "  FAIL"))
        if not ok:
            status = ExitStatus.ASSERTION
        rows.extend((name, lam, r) for lam, r in zip(lams, ratios))
    if cfg.fmt == "json":
        _emit(cfg, sio.dumps([{"input": n, "lambda": lam, "ratio": r} for n, lam, r in rows]))
    else:
        names, ls, rs = zip(*rows)
        text = "input,lambda,ratio\n" + "".join(f"{json.dumps(n)},{sio.fmt(lam)},{sio.fmt(r)}\n" for n, lam, r in zip(names, ls, rs))
        _emit(cfg, text)
    return status


COMMANDS = {
    "constants": cmd_constants,
    "maxfn": cmd_maxfn,
    "sharpness": cmd_sharpness,
    "variational": cmd_variational,
    "weaktype": cmd_weaktype,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return ExitStatus.OK if exc.code == 0 else ExitStatus.USAGE
    try:
        cfg = _config(args)
        return int(COMMANDS[cfg.subcommand](cfg))
    except UsageError as exc:
        _note(f"error: {exc}")
        return int(ExitStatus.USAGE)
    except ValueError as exc:
        # domain errors raised by the library for bad user input
        _note(f"error: {exc}")
        return int(ExitStatus.USAGE)


if __name__ == "__main__":
    sys.exit(main())
