"""Command-line front end.

Subcommands::

    cbdm solve    PROBLEM [--rule linear|cubic] [--sor plain|chebyshev] [--step S] [--out DIR]
    cbdm oracle   PROBLEM [--oracle-h 1/64 1/128 1/256] [--out DIR]
    cbdm compare  PROBLEM [--steps 0.05 0.02] [--oracle-h ...] [--out DIR]
    cbdm map-dump PROBLEM [--out DIR]

Exit status is 0 on success, 1 on a numerical failure (no convergence,
failed map) and 2 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .discretize import discretize
from .errors import CBDMError
from .geometry import Dirichlet, ProblemSpec
from .oracle import fd_reference, richardson, richardson_order
from .post import capacitance, export_field, potential_profile, shield_contour
from .problem_io import ProblemFile, ProblemFileError, load_problem
from .solver import SolveOptions, solve, solve_plain

log = logging.getLogger("cbdm")

__all__ = ["RunConfig", "run", "main"]


@dataclass
class RunConfig:
    problem_path: Path
    command: str
    out: Path = Path("cbdm-out")
    tol_map: Optional[float] = None
    tol_sor: Optional[float] = None
    rule: str = "linear"
    sor: str = "chebyshev"
    step: Optional[float] = None
    steps: List[float] = field(default_factory=lambda: [0.05, 0.02])
    oracle_h: List[float] = field(default_factory=lambda: [1 / 64, 1 / 128, 1 / 256])
    field_export: bool = True
    figures: bool = True

    def __post_init__(self):
        if self.command not in ("solve", "oracle", "compare", "map-dump"):
            raise ValueError(f"unknown subcommand {self.command!r}")
        if self.rule not in ("linear", "cubic"):
            raise ValueError(f"rule must be linear or cubic, not {self.rule!r}")
        if self.sor not in ("plain", "chebyshev"):
            raise ValueError(f"sor must be plain or chebyshev, not {self.sor!r}")
        for name in ("tol_map", "tol_sor", "step"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, float) and v >= 0):
                raise ValueError(f"{name} must be a non-negative number")


def _with_overrides(problem: ProblemSpec, cfg: RunConfig, step: Optional[float]) -> ProblemSpec:
    subs = problem.subdomains
    if step is not None:
        subs = tuple(replace(s, steps={k: step for k in s.steps}) for s in subs)
    return ProblemSpec(subdomains=subs,
                       map_tol=cfg.tol_map if cfg.tol_map is not None else problem.map_tol,
                       sor_tol=cfg.tol_sor if cfg.tol_sor is not None else problem.sor_tol,
                       max_iter=problem.max_iter)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _profile_points(pf: ProblemFile):
    pr = pf.probe
    if not pr:
        return None, None
    ys = np.linspace(float(pr.get("y_min", 0.0)), float(pr.get("y_max", 1.0)),
                     int(pr.get("count", 101)))
    return float(pr["x"]), ys


def _bbox(problem: ProblemSpec):
    v = np.concatenate([s.polygon.vertices for s in problem.subdomains])
    return v.real.min(), v.real.max(), v.imag.min(), v.imag.max()


def _solve(problem, cfg):
    nodes = discretize(problem)
    fn = solve_plain if cfg.sor == "plain" else solve
    return fn(problem, nodes, SolveOptions(rule=cfg.rule))


def _cmd_solve(pf: ProblemFile, cfg: RunConfig) -> int:
    problem = _with_overrides(pf.problem, cfg, cfg.step)
    sol = _solve(problem, cfg)
    out = cfg.out
    _write_csv(out / "convergence.csv", ["n", "omega_odd", "omega_even", "max_abs_xi", "sum_xi"],
               sol.history)
    _write_csv(out / "nodes.csv", ["x", "y", "psi", "kind"],
               [(z.real, z.imag, p, k) for z, p, k in zip(sol.nodes.z, sol.psi, sol.nodes.kind)])
    cap_opts = pf.capacitance or {}
    contour = shield_contour(problem, d=float(cap_opts.get("offset", 0.025)),
                             spacing=float(cap_opts.get("spacing", 0.025)))
    C = capacitance(sol, contour)
    report = [
        f"variant      {sol.variant}",
        f"rule         {sol.rule}",
        f"nodes        {sol.nodes.J}",
        f"probes       {len(sol.nodes.probes)}",
        f"iterations   {sol.iterations}",
        f"max_residual {sol.max_residual:.6e}",
        f"sum_residual {sol.sum_residual:.6e}",
        f"capacitance  {C:.9e} F/m",
    ]
    (out / "capacitance.txt").write_text("\n".join(report) + "\n")
    x, ys = _profile_points(pf)
    if x is not None:
        vals = potential_profile(sol, x, ys)
        _write_csv(out / "profile.csv", ["x", "y", "psi"], [(x, y, v) for y, v in zip(ys, vals)])
    grid = None
    if cfg.field_export:
        fo = pf.field or {}
        x0, x1, y0, y1 = _bbox(problem)
        xs = np.linspace(x0, x1, int(fo.get("nx", 41)))
        ys_f = np.linspace(y0, y1, int(fo.get("ny", 81)))
        grid = export_field(sol, xs, ys_f, out / "field.csv", svg_path=out / "field.svg")
    if cfg.figures:
        from . import plotting

        plotting.plot_convergence(sol.history, out / "convergence.png")
        if x is not None:
            plotting.plot_profile(ys, {"CBDM": vals}, out / "profile.png", x=x)
        if grid is not None:
            plotting.plot_field(xs, ys_f, grid, problem, out / "field.png")
    print("\n".join(report))
    return 0


def _oracle_solutions(problem, hs):
    return [fd_reference(problem, h) for h in hs]


def _oracle_capacitance(grids):
    caps = [g.capacitance for g in grids]
    if len(caps) >= 3:
        p = richardson_order(*caps[-3:])
    else:
        p = 1.0
    if len(caps) >= 2:
        return float(richardson(caps[-2], caps[-1], p)), p, caps
    return caps[-1], float("nan"), caps


def _cmd_oracle(pf: ProblemFile, cfg: RunConfig) -> int:
    problem = _with_overrides(pf.problem, cfg, None)
    grids = _oracle_solutions(problem, cfg.oracle_h)
    C, p, caps = _oracle_capacitance(grids)
    g = grids[-1]
    rows = []
    for j, y in enumerate(g.y):
        for i, x in enumerate(g.x):
            if np.isfinite(g.psi[j, i]):
                rows.append((x, y, g.psi[j, i]))
    _write_csv(cfg.out / "oracle.csv", ["x", "y", "psi"], rows)
    lines = [f"h {h!r} capacitance {c:.9e} F/m" for h, c in zip(cfg.oracle_h, caps)]
    lines += [f"observed_order {p:.4f}", f"extrapolated   {C:.9e} F/m"]
    (cfg.out / "oracle.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _cmd_compare(pf: ProblemFile, cfg: RunConfig) -> int:
    base = _with_overrides(pf.problem, cfg, None)
    grids = _oracle_solutions(base, cfg.oracle_h)
    C_ref, p, _ = _oracle_capacitance(grids)
    rows = []
    profiles = {}
    x, ys = _profile_points(pf)
    for step in cfg.steps:
        problem = _with_overrides(pf.problem, cfg, step)
        sol = _solve(problem, cfg)
        C = capacitance(sol)
        label = ("PCHIP" if cfg.rule == "cubic" else "CBDM") + f"{round(step * 100):03d}"
        rows.append((label, len(problem.subdomains), (C - C_ref) / C_ref * 100.0, C, sol.iterations))
        if x is not None:
            profiles[label] = potential_profile(sol, x, ys)
    _write_csv(cfg.out / "error_table.csv",
               ["label", "partitions", "error_e-2", "capacitance", "iterations"], rows)
    if x is not None:
        pts = x + 1j * ys
        if len(grids) >= 2:
            ref = richardson(grids[-2].sample(pts), grids[-1].sample(pts), p)
        else:
            ref = grids[-1].sample(pts)
        cols = list(profiles)
        _write_csv(cfg.out / "profile_errors.csv", ["y", "oracle"] + cols,
                   [(y, r, *[profiles[c][j] - r for c in cols]) for j, (y, r) in enumerate(zip(ys, ref))])
        if cfg.figures:
            from . import plotting

            plotting.plot_profile(ys, {c: profiles[c] - ref for c in cols},
                                  cfg.out / "profile_errors.png", x=x)
    for r in rows:
        print(f"{r[0]:10s} {r[1]:3d} {r[2]:+.4f}e-2  C={r[3]:.7e}  iterations={r[4]}")
    print(f"oracle     C={C_ref:.7e} (order {p:.2f})")
    return 0


def _cmd_map_dump(pf: ProblemFile, cfg: RunConfig) -> int:
    from .scmap import solve_parameters

    problem = _with_overrides(pf.problem, cfg, None)
    for m, sub in enumerate(problem.subdomains):
        dmap = solve_parameters(sub.polygon, problem.map_tol, center=sub.center)
        name = sub.name or f"S{m}"
        dmap.dump(cfg.out / f"map_{name}.txt")
        if cfg.figures:
            from . import plotting

            plotting.plot_map(dmap, cfg.out / f"map_{name}.png")
        print(f"{name}: residual {dmap.residual:.3e}, vertex residual {dmap.vertex_residual:.3e}, "
              f"min prevertex gap {dmap.min_gap:.3e}")
    return 0


_COMMANDS = {"solve": _cmd_solve, "oracle": _cmd_oracle, "compare": _cmd_compare,
             "map-dump": _cmd_map_dump}


def run(cfg: RunConfig) -> int:
    try:
        pf = load_problem(cfg.problem_path)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create {cfg.out}: {exc.strerror}", file=sys.stderr)
        return 2
    try:
        return _COMMANDS[cfg.command](pf, cfg)
    except CBDMError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def _fraction(s: str) -> float:
    if "/" in s:
        a, b = s.split("/", 1)
        return float(a) / float(b)
    return float(s)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cbdm", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("problem", type=Path, help="problem file (TOML)")
        p.add_argument("--out", type=Path, default=Path("cbdm-out"), help="output directory")
        p.add_argument("--tol-map", type=float, default=None, help="map tolerance (default 1e-9)")
        p.add_argument("--tol-sor", type=float, default=None, help="SOR residual tolerance (default 1e-6)")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")
        if name in ("solve", "compare"):
            p.add_argument("--rule", choices=("linear", "cubic"), default="linear")
            p.add_argument("--sor", choices=("plain", "chebyshev"), default="chebyshev")
        if name == "solve":
            p.add_argument("--step", type=float, default=None, help="override every node step")
            p.add_argument("--no-field", action="store_true", help="skip the field export")
        if name == "compare":
            p.add_argument("--steps", type=float, nargs="+", default=[0.05, 0.02])
        if name in ("oracle", "compare"):
            p.add_argument("--oracle-h", type=_fraction, nargs="+",
                           default=[1 / 64, 1 / 128, 1 / 256],
                           help="oracle grid spacings, successively halved (e.g. 1/64 1/128 1/256)")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        problem_path=args.problem, command=args.command, out=args.out,
        tol_map=args.tol_map, tol_sor=args.tol_sor,
        rule=getattr(args, "rule", "linear"), sor=getattr(args, "sor", "chebyshev"),
        step=getattr(args, "step", None), steps=getattr(args, "steps", [0.05, 0.02]),
        oracle_h=getattr(args, "oracle_h", [1 / 64, 1 / 128, 1 / 256]),
        field_export=not getattr(args, "no_field", False), figures=not args.no_figures)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
