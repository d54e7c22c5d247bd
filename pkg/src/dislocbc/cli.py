"""Command-line entry point: ``dislocbc run``, ``dislocbc verify`` and ``dislocbc solve``."""

from __future__ import annotations

import os

# single-thread mode for reproducible reductions; must precede the numpy import
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse
import json
import sys

import numpy as np

__all__ = ["main"]


def _cmd_run(args) -> int:
    from .harness import STUDIES, StudyError, emit_reports, load_config, run_study

    if args.study not in STUDIES:
        print(f"unknown study {args.study!r}; choose from {', '.join(STUDIES)}", file=sys.stderr)
        return 2
    cfg = load_config(args.config, args.set, study=args.study)
    if args.out:
        cfg["output"] = args.out
    try:
        report = run_study(cfg)
    except StudyError as exc:
        print(f"study aborted: {exc}", file=sys.stderr)
        return 3
    paths = emit_reports(report, cfg["output"])
    for g in report.gates:
        print(f"[{'PASS' if g['passed'] else 'FAIL'}] {g['name']}: {g['value']} vs {g['target']}")
    for note in report.notes:
        print(f"note: {note}")
    print(f"report: {paths['report']}")
    return 0 if report.passed else 1


def _cmd_verify(args) -> int:
    from .acceptance import run_verify

    results, _ = run_verify(args.out, repeat=not args.once, progress=lambda r: print(r.line(), flush=True))
    ok = all(r.ok for r in results)
    print(f"{sum(r.ok for r in results)}/{len(results)} criteria passed")
    return 0 if ok else 1


def _cmd_solve(args) -> int:
    from .cellsolve import algorithm41, assemble_predictor, CellProblem, minimize
    from .harness import StudyConfig, load_config

    cfg = StudyConfig(load_config(args.config, args.set))
    model = cfg.model()
    if args.p == 0:
        res = minimize(CellProblem(model, 0, args.R, assemble_predictor(0, model.predictor)), cfg.solver())
        extra = {}
    else:
        out = algorithm41(model, args.R, spectral=cfg.spectral(), solver=cfg.solver(),
                          energy_radius=cfg.raw["energy_radius"], use_moment_iteration=cfg.raw["moment_iteration"])
        res = out["p1"]
        extra = {"moments": out["moments"].to_dict(), "algorithm_timings": out["timings"]}
    doc = res.to_dict(include_corrector=args.corrector)
    doc.update(extra)
    doc["config_hash"] = cfg.hash
    json.dump(doc, sys.stdout, indent=1, sort_keys=True, default=lambda o: np.asarray(o).tolist())
    sys.stdout.write("\n")
    return 0 if res.converged else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dislocbc", description="Higher-order boundary conditions for "
                                 "dislocation cell problems: studies, acceptance suite and single solves.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a study and write report.json, tables/ and plots/")
    run.add_argument("study", help="decay | geometry_convergence | energy_convergence | timing | spectral_convergence")
    run.add_argument("--config", help="JSON study configuration")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a configuration key (dotted path), repeatable")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.set_defaults(func=_cmd_run)

    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--out", default="verify_out", help="output directory")
    ver.add_argument("--once", action="store_true", help="skip the repeated run used for the determinism check")
    ver.set_defaults(func=_cmd_verify)

    sol = sub.add_parser("solve", help="single cell solve, JSON to stdout")
    sol.add_argument("--p", type=int, choices=(0, 1), required=True)
    sol.add_argument("--R", type=float, required=True)
    sol.add_argument("--config", help="JSON configuration (model, solver, spectral sections)")
    sol.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sol.add_argument("--corrector", action="store_true", help="include sites and corrector values")
    sol.set_defaults(func=_cmd_solve)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
