"""Command-line entry point ``prodstab``.

Exit codes: 0 success, 1 invalid input (parse or validation error),
2 runtime failure (non-finite state, oracle mismatch), 3 a stability
check found a failing step.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import experiments
from .config import format_config, parse_config
from .errors import NonFiniteState, OracleMismatch, ParseError, UnknownScenario, ValidationError
from .io import write_plot_script, write_study, write_trajectory
from .simulation import BACKENDS

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_UNSTABLE = 0, 1, 2, 3
OUTPUT_ENV = "PRODSTAB_OUTPUT_DIR"


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _slug(name: str) -> str:
    return name.replace("/", "_")


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _report(traj, stream=None):
    fails = int((~traj.passed).sum())
    print(
        f"K={len(traj.V)} nu={traj.nu:.6g} V0={traj.V[0]:.6g} VT={traj.V[-1]:.6g} "
        f"max V/V_up={float((traj.V / traj.V_up).max()):.12g} failed_steps={fails}",
        file=stream,
    )


def cmd_simulate(args):
    sc = parse_config(args.config)
    tr = sc.run(args.backend)
    path = write_trajectory(_out_dir(args) / f"{_slug(sc.name)}.csv", tr, args.stride or sc.stride)
    _report(tr)
    print(path)
    return EXIT_OK


def cmd_check(args):
    sc = parse_config(args.config)
    tr = sc.run(args.backend)
    k = tr.first_failure()
    _report(tr)
    if k is None:
        print("all steps pass")
        return EXIT_OK
    print(
        f"stability check failed: first failing step k={k} "
        f"(residual {tr.residual[k]:.6g}, V={tr.V[k]:.6g})",
        file=sys.stderr,
    )
    return EXIT_UNSTABLE


def cmd_converge(args):
    res = experiments.convergence_study(v=args.v, T=args.T, backend=args.backend)
    path = write_study(_out_dir(args) / f"converge_v{args.v:g}.csv", res)
    for row in res.rows:
        print(" ".join("-" if x is None else f"{x:.6g}" for x in row))
    print(path)
    return EXIT_OK


def cmd_sweep(args):
    kappas = _floats(args.kappas) if args.kappas else experiments.TABLE2_KAPPAS
    res = experiments.kappa_sweep(kappas, h=args.h, T=args.T, backend=args.backend)
    path = write_study(_out_dir(args) / "sweep_kappa.csv", res)
    for row in res.rows:
        print(" ".join(f"{x:.6g}" for x in row))
    print(path)
    return EXIT_OK


def cmd_scenario(args):
    variants = experiments.get_scenarios(args.name)
    out = _out_dir(args)
    files = {}
    for variant, sc in variants.items():
        tr = sc.run(args.backend)
        name = f"{_slug(sc.name)}.csv"
        write_trajectory(out / name, tr, args.stride or sc.stride)
        files[variant] = name
        print(f"{variant}: ", end="")
        _report(tr)
    if args.name == "fig7-capacity-gap":
        study = write_study(out / "capacity_gap.csv", experiments.capacity_gap_study(backend=args.backend))
        print(study)
    script = write_plot_script(out / f"plot_{_slug(args.name)}.py", files, args.name)
    for name in files.values():
        print(out / name)
    print(script)
    return EXIT_OK


def cmd_export(args):
    out = _out_dir(args)
    for sc in experiments.get_scenarios(args.name).values():
        path = out / f"{_slug(sc.name)}.ini"
        path.write_text(format_config(sc), encoding="utf-8")
        print(path)
    return EXIT_OK


def cmd_oracle(args):
    experiments.oracle_smallcase(backend=args.backend)
    print("oracle agreement ok")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="prodstab", description="Production line simulation and feedback stabilization.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./out)")
    common.add_argument("--backend", choices=BACKENDS, default=None, help="time-loop kernel")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run a scenario file and write its trajectory CSV")
    s.add_argument("config")
    s.add_argument("--stride", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("check-stability", parents=[common], help="exit 3 if any step fails the residual check")
    s.add_argument("config")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("converge", parents=[common], help="refinement study of the decay envelope")
    s.add_argument("--v", type=float, default=1.0)
    s.add_argument("--T", type=float, default=30.0)
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("sweep-kappa", parents=[common], help="V^T/V^0 for several feedback gains")
    s.add_argument("--kappas", help="comma-separated gains")
    s.add_argument("--h", type=float, default=0.00125)
    s.add_argument("--T", type=float, default=30.0)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("scenario", parents=[common], help="run a built-in scenario: CSV per variant plus plot script")
    s.add_argument("name", help=", ".join(experiments.BUILTIN_NAMES))
    s.add_argument("--stride", type=int, default=None)
    s.set_defaults(func=cmd_scenario)

    s = sub.add_parser("export-scenario", parents=[common], help="write built-in scenario variants as config files")
    s.add_argument("name", help=", ".join(experiments.BUILTIN_NAMES))
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("oracle", parents=[common], help="check the engine against the hand-computed small case")
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "stride", None) is not None and args.stride < 1:
        print("error: --stride must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        return args.func(args)
    except (ParseError, ValidationError, UnknownScenario, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonFiniteState, OracleMismatch, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
