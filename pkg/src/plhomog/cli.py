"""Command-line entry point: experiment orchestration with deterministic
tabular output and a provenance manifest per run.

Exit codes: 0 success, 2 assumption violation, 3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import __version__, coeffs
from .cell import (NoConvergence, PeriodicGrid, homogenized_operator,
                   nondegeneracy_report, solve_cell)
from .config import (ConfigError, RunConfig, RunManifest, StageTimer,
                     build_coefficient, build_problem, parse_config,
                     write_csv, write_json)
from .defect import TruncatedDomain, integrability_report, solve_defect
from .homog import STUDY_COLUMNS, convergence_study
from .ineq import lower_bound_feasibility
from .oned import SWEEP_COLUMNS, BracketFailure, remainder_norms, table_sweep

DEFAULT_EPS = (0.1, 0.05, 0.01, 0.005, 0.001, 0.0005)


def _parse_eps(text: str) -> list[float]:
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_vec(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.replace(",", " ").split()])


def _manifest_for(cfg: RunConfig) -> RunManifest:
    return RunManifest(cfg.content_hash(), __version__, cfg.seed)


def _emit_manifest(manifest: RunManifest, out_path: str | None) -> None:
    if out_path is None:
        return
    import os
    stem, _ = os.path.splitext(out_path)
    with open(stem + ".manifest.json", "w") as fh:
        fh.write(manifest.to_json() + "\n")


def cmd_validate(args) -> int:
    cfg = parse_config(args.config)
    coefficient = build_coefficient(cfg)
    try:
        report = coeffs.validate(coefficient)
    except coeffs.AssumptionViolated as exc:
        print(f"[coeffs/validate] FAIL: {exc.details}")
        return 2
    print(f"[coeffs/validate] a in [{report.a_min:.6g}, {report.a_max:.6g}], "
          f"periodicity residual {report.periodicity_residual:.3g}")
    for tail_r, tail_v in report.defect_tail:
        print(f"[coeffs/validate] defect tail at |y| >= {tail_r:g}: {tail_v:.3g}")
    if not report.passed:
        for msg in report.violations:
            print(f"[coeffs/validate] FAIL: {msg}")
        return 2
    print("[coeffs/validate] PASS")
    return 0


def cmd_ineq(args) -> int:
    report = lower_bound_feasibility(args.p, args.delta, args.samples, args.seed)
    payload = report.as_dict()
    if args.out:
        write_json(args.out, payload)
        print(f"[ineq] wrote {args.out}")
    else:
        import json
        print(json.dumps(payload, sort_keys=True, indent=2))
    return 0 if report.feasible else 2


def cmd_oned(args) -> int:
    cfg = parse_config(args.config)
    manifest = _manifest_for(cfg)
    eps_list = _parse_eps(args.eps_list) if args.eps_list else list(DEFAULT_EPS)
    prob = build_problem(cfg, eps_list[0])
    with StageTimer(manifest, "sweep"):
        rows = table_sweep(prob, eps_list)
    table = [(r.eps, r.r_per_linf, r.r_linf, r.r_per_l2, r.r_l2, r.c_eps, r.c_star)
             for r in rows]
    if args.out and args.out.endswith(".json"):
        write_json(args.out, [dict(zip(SWEEP_COLUMNS, row)) for row in table])
    elif args.out:
        write_csv(args.out, SWEEP_COLUMNS, table, cfg.precision)
    else:
        print(",".join(SWEEP_COLUMNS))
        for row in table:
            print(",".join(f"{v:.{cfg.precision}g}" for v in row))
    if args.figdir:
        from . import plots
        with StageTimer(manifest, "figures"):
            reports = [remainder_norms(prob.with_epsilon(e), kind, keep_profile=True)
                       for e in eps_list[:3] for kind in ("periodic", "full")]
            plots.plot_two_scale_profiles(reports, args.figdir)
            plots.plot_remainder_table(rows, args.figdir)
    _emit_manifest(manifest, args.out)
    if args.out:
        print(f"[oned] wrote {args.out}")
    return 0


def cmd_cell(args) -> int:
    cfg = parse_config(args.config)
    manifest = _manifest_for(cfg)
    coefficient = build_coefficient(cfg)
    xi = _parse_vec(args.xi)
    n = args.grid or (cfg.cell_grid if coefficient.dim == 1 else cfg.cell_grid_2d)
    grid = PeriodicGrid(coefficient.dim, n)
    with StageTimer(manifest, "cell_solve"):
        solve = solve_cell(xi, coefficient.periodic, cfg.p, grid,
                           tol=cfg.tol, max_iter=cfg.max_iter)
        op = homogenized_operator([xi], coefficient.periodic, cfg.p, grid,
                                  tol=cfg.tol, solves={tuple(xi): solve})
        a4 = nondegeneracy_report(coefficient.periodic, cfg.p, grid, [xi],
                                  tol=cfg.tol, solves={tuple(xi): solve})
    payload = {
        "xi": xi.tolist(),
        "a_star": op.entries[0][1].tolist(),
        "scalar_1d": op.scalar_1d,
        "energy": solve.energy,
        "residual": solve.residual,
        "iterations": solve.iterations,
        "c_est": a4.c_est,
    }
    if args.out:
        write_json(args.out, payload)
        print(f"[cell] wrote {args.out}")
    else:
        import json
        print(json.dumps(payload, sort_keys=True, indent=2))
    if args.figdir:
        from . import plots
        plots.plot_cell_solution(solve, args.figdir)
    _emit_manifest(manifest, args.out)
    return 0


def cmd_defect(args) -> int:
    cfg = parse_config(args.config)
    manifest = _manifest_for(cfg)
    coefficient = build_coefficient(cfg)
    xi = _parse_vec(args.xi)
    half = args.half_width or cfg.half_width
    domain = TruncatedDomain(coefficient.dim, half, cfg.defect_cells_per_unit)
    with StageTimer(manifest, "defect_solve"):
        solve = solve_defect(xi, coefficient, domain=domain, tol=cfg.tol,
                             max_iter=cfg.max_iter)
    tail = integrability_report(solve)
    payload = {
        "xi": xi.tolist(),
        "energy": solve.energy,
        "residual": solve.residual,
        "iterations": solve.iterations,
        "lp_grad": solve.norms.lp_grad,
        "weighted_l2": solve.norms.weighted_l2,
        "lp_prime": solve.norms.lp_prime,
        "lp_prime_over_xi": tail.lp_prime_over_xi,
        "truncation_share": solve.norms.truncation_share,
        "annuli": [dataclasses.asdict(r) for r in solve.norms.annuli],
        "warnings": solve.warnings,
    }
    manifest.warnings.extend(solve.warnings)
    if args.out:
        write_json(args.out, payload)
        print(f"[defect] wrote {args.out}")
    else:
        import json
        print(json.dumps(payload, sort_keys=True, indent=2))
    if args.figdir:
        from . import plots
        plots.plot_defect_solution(solve, args.figdir)
    _emit_manifest(manifest, args.out)
    return 0


def cmd_homog(args) -> int:
    cfg = parse_config(args.config)
    manifest = _manifest_for(cfg)
    eps_list = _parse_eps(args.eps_list) if args.eps_list else list(DEFAULT_EPS)
    prob = build_problem(cfg, eps_list[0])
    with StageTimer(manifest, "study"):
        series = convergence_study(prob, eps_list, kind=args.kind)
    rows = [(r.eps, r.u_err_lp, *r.flux_res, r.r_linf, r.r_l2)
            for r in series.records]
    if args.out and args.out.endswith(".json"):
        write_json(args.out, [dict(zip(STUDY_COLUMNS, row)) for row in rows])
    elif args.out:
        write_csv(args.out, STUDY_COLUMNS, rows, cfg.precision)
    else:
        print(",".join(STUDY_COLUMNS))
        for row in rows:
            print(",".join(f"{v:.{cfg.precision}g}" for v in row))
    if args.figdir:
        from . import plots
        plots.plot_convergence_series(series, args.figdir)
    _emit_manifest(manifest, args.out)
    if args.out:
        print(f"[homog] wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plhomog",
        description="Numerical homogenization of the p-Laplace equation "
                    "with a periodic coefficient and a localized defect.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check coefficient assumptions")
    sp.add_argument("--config", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("ineq", help="inequality feasibility report")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--delta", type=float, default=0.5)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_ineq)

    sp = sub.add_parser("oned", help="remainder table sweep")
    sp.add_argument("--config", required=True)
    sp.add_argument("--eps-list")
    sp.add_argument("--out")
    sp.add_argument("--figdir")
    sp.set_defaults(func=cmd_oned)

    sp = sub.add_parser("cell", help="periodic cell solve")
    sp.add_argument("--config", required=True)
    sp.add_argument("--xi", required=True)
    sp.add_argument("--grid", type=int)
    sp.add_argument("--out")
    sp.add_argument("--figdir")
    sp.set_defaults(func=cmd_cell)

    sp = sub.add_parser("defect", help="defect corrector solve")
    sp.add_argument("--config", required=True)
    sp.add_argument("--xi", required=True)
    sp.add_argument("--R", dest="half_width", type=float)
    sp.add_argument("--out")
    sp.add_argument("--figdir")
    sp.set_defaults(func=cmd_defect)

    sp = sub.add_parser("homog", help="epsilon-convergence study")
    sp.add_argument("--config", required=True)
    sp.add_argument("--eps-list")
    sp.add_argument("--kind", choices=("periodic", "full"), default="full")
    sp.add_argument("--out")
    sp.add_argument("--figdir")
    sp.set_defaults(func=cmd_homog)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for fieldname, reason in exc.violations:
            print(f"[config] {fieldname}: {reason}", file=sys.stderr)
        return 2
    except coeffs.AssumptionViolated as exc:
        print(f"[coeffs/{args.command}] assumption violated: {exc.details}",
              file=sys.stderr)
        return 2
    except (NoConvergence, BracketFailure) as exc:
        print(f"[solver/{args.command}] {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
