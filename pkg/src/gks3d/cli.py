"""Command-line interface: run, genmesh, check, oracle.

Exit codes: 0 success (run: converged), 2 run hit the step cap without
converging, 1 any error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np


def _cmd_run(args):
    from .config import load_config
    from .driver import run_case

    config = load_config(args.config)
    if args.max_steps is not None:
        config.max_steps = args.max_steps

    def progress(step, info):
        if args.verbose and step % 10 == 0:
            print(f"step {step:6d}  res_rho_l1 {info.res_rho_l1:.3e}  res_l2 {info.res_l2:.3e}")

    result = run_case(config, progress=progress)
    last = result.history.res_rho_l1[-1]
    status = "converged" if result.converged else "step cap reached"
    print(f"{status} after {result.steps} steps, final residual {last:.3e}")
    for path in result.files:
        print(f"wrote {path}")
    return 0 if result.converged else 2


def _cmd_genmesh(args):
    from .mesh import generate_box_mesh, save_mesh

    mesh = generate_box_mesh(
        extent=args.extent,
        divisions=(args.nx, args.ny, args.nz),
        split=args.split,
        perturb=args.perturb,
        seed=args.seed,
    )
    save_mesh(mesh, args.out)
    print(f"wrote {args.out}: {mesh.ncells} cells, {mesh.nfaces} faces")
    return 0


def _cmd_check(args):
    from .mesh import load_mesh

    mesh = load_mesh(args.mesh)
    mesh.validate()
    interior = int(np.sum(mesh.face_neighbor >= 0))
    print(f"{args.mesh}: OK")
    print(f"  cells     {mesh.ncells}")
    print(f"  faces     {mesh.nfaces} ({interior} interior)")
    print(f"  volume    {mesh.cell_volume.sum():.12g}")
    print(f"  patches   {', '.join(mesh.patch_names) or '(none)'}")
    return 0


def _cmd_oracle(args):
    from .oracles import run_suite

    reports = run_suite(args.suite)
    ok = True
    for report in reports:
        print(report.format())
        ok = ok and report.passed
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="gks3d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a case from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--max-steps", type=int, default=None)
    p_run.add_argument("-v", "--verbose", action="store_true")
    p_run.set_defaults(fn=_cmd_run)

    p_gen = sub.add_parser("genmesh", help="generate a box mesh")
    gen_sub = p_gen.add_subparsers(dest="shape", required=True)
    p_box = gen_sub.add_parser("box")
    p_box.add_argument("--nx", type=int, required=True)
    p_box.add_argument("--ny", type=int, required=True)
    p_box.add_argument("--nz", type=int, required=True)
    p_box.add_argument("--split", choices=("tet", "hex"), default="hex")
    p_box.add_argument("--extent", type=float, nargs=3, default=(1.0, 1.0, 1.0))
    p_box.add_argument("--perturb", type=float, default=0.0)
    p_box.add_argument("--seed", type=int, default=None)
    p_box.add_argument("--out", required=True)
    p_box.set_defaults(fn=_cmd_genmesh)

    p_check = sub.add_parser("check", help="validate a mesh file")
    p_check.add_argument("mesh")
    p_check.set_defaults(fn=_cmd_check)

    p_oracle = sub.add_parser("oracle", help="run a brute-force oracle suite")
    p_oracle.add_argument("suite", choices=("moments", "flux", "jacobian", "linsolve", "all"))
    p_oracle.set_defaults(fn=_cmd_oracle)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # surface errors with exit code 1
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
