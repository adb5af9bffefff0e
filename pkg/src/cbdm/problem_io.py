"""Reading and writing problem files (TOML).

Layout::

    [solver]
    map_tol = 1e-9
    sor_tol = 1e-6
    max_iter = 0            # 0 or absent: 100 x node count

    [[subdomain]]
    name = "P"
    eps_r = 1.0             # relative permittivity
    vertices = [[0, 0], [2, 0], ...]   # counter-clockwise
    center = [1.0, 2.0]     # optional map centre

      [[subdomain.side]]    # one table per side; side k joins vertex k to k+1
      index = 0
      kind = "dirichlet"    # dirichlet | neumann | interface
      value = 0.0           # dirichlet only
      step = 0.05           # neumann and interface only
      neighbor = 1          # interface only

    [probe]                 # optional potential profile
    x = 0.999
    y_min = 0.0
    y_max = 4.0
    count = 401

    [field]                 # optional field export grid
    nx = 41
    ny = 81

    [capacitance]           # optional flux contour settings
    offset = 0.025
    spacing = 0.025
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import CBDMError
from .geometry import (EPS0, Dirichlet, Interface, Neumann, ProblemSpec, Subdomain,
                       _signed_area, validate_polygon)

__all__ = ["ProblemFileError", "ProblemFile", "load_problem", "parse_problem", "dump_problem"]


class ProblemFileError(CBDMError, ValueError):
    pass


@dataclass
class ProblemFile:
    problem: ProblemSpec
    probe: Optional[Dict[str, Any]] = None
    field: Optional[Dict[str, Any]] = None
    capacitance: Optional[Dict[str, Any]] = None


def _req(table: Dict[str, Any], key: str, where: str, kind=None):
    if key not in table:
        raise ProblemFileError(f"{where}: missing field {key!r}")
    v = table[key]
    if kind is not None and not isinstance(v, kind) or isinstance(v, bool):
        raise ProblemFileError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, "
                               f"got {type(v).__name__}")
    return v


_NUM = (int, float)


def parse_problem(text: str) -> ProblemFile:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ProblemFileError(f"syntax error: {exc}") from None

    solver = doc.get("solver", {})
    map_tol = float(solver.get("map_tol", 1e-9))
    sor_tol = float(solver.get("sor_tol", 1e-6))
    max_iter = int(solver.get("max_iter", 0)) or None

    raw = doc.get("subdomain")
    if not raw:
        raise ProblemFileError("no [[subdomain]] tables")
    subs = []
    for m, sd in enumerate(raw):
        where = f"subdomain[{m}]"
        verts = _req(sd, "vertices", where, list)
        try:
            zs = [complex(float(x), float(y)) for x, y in verts]
        except (TypeError, ValueError):
            raise ProblemFileError(f"{where}.vertices: expected a list of [x, y] pairs") from None
        if _signed_area(np.array(zs)) <= 0:
            raise ProblemFileError(f"{where}.vertices: list the vertices counter-clockwise")
        try:
            poly = validate_polygon(zs)
        except CBDMError as exc:
            raise ProblemFileError(f"{where}.vertices: {exc}") from None
        sides = sd.get("side", [])
        conds: list = [None] * len(zs)
        steps = {}
        for s in sides:
            k = _req(s, "index", where + ".side", int)
            sw = f"{where}.side[{k}]"
            if not 0 <= k < len(zs):
                raise ProblemFileError(f"{sw}: index out of range")
            if conds[k] is not None:
                raise ProblemFileError(f"{sw}: side given twice")
            kind = _req(s, "kind", sw, str)
            if kind == "dirichlet":
                conds[k] = Dirichlet(float(_req(s, "value", sw, _NUM)))
            elif kind in ("neumann", "interface"):
                steps[k] = float(_req(s, "step", sw, _NUM))
                if kind == "neumann":
                    conds[k] = Neumann(float(s.get("gamma", 0.0)))
                else:
                    conds[k] = Interface(int(_req(s, "neighbor", sw, int)))
            else:
                raise ProblemFileError(f"{sw}.kind: unknown side kind {kind!r}")
        missing = [k for k, c in enumerate(conds) if c is None]
        if missing:
            raise ProblemFileError(f"{where}: no condition for side(s) {missing}")
        center = sd.get("center")
        eps = float(sd.get("eps_r", 1.0)) * EPS0
        subs.append(Subdomain(polygon=poly, conditions=tuple(conds), eps=eps, steps=steps,
                              center=None if center is None else complex(*center),
                              name=str(sd.get("name", f"S{m}"))))
    try:
        problem = ProblemSpec(subdomains=tuple(subs), map_tol=map_tol, sor_tol=sor_tol,
                              max_iter=max_iter)
    except CBDMError as exc:
        raise ProblemFileError(str(exc)) from None
    return ProblemFile(problem=problem, probe=doc.get("probe"), field=doc.get("field"),
                       capacitance=doc.get("capacitance"))


def load_problem(path) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_problem(text)
    except ProblemFileError as exc:
        raise ProblemFileError(f"{path}: {exc}") from None


def dump_problem(problem: ProblemSpec, probe: Optional[dict] = None) -> str:
    """Serialise a problem to the file format above."""
    out = ["[solver]", f"map_tol = {problem.map_tol!r}", f"sor_tol = {problem.sor_tol!r}"]
    if problem.max_iter:
        out.append(f"max_iter = {problem.max_iter}")
    for sub in problem.subdomains:
        out += ["", "[[subdomain]]", f'name = "{sub.name}"', f"eps_r = {float(sub.eps / EPS0)!r}"]
        vs = ", ".join(f"[{float(v.real)!r}, {float(v.imag)!r}]" for v in sub.polygon.vertices)
        out.append(f"vertices = [{vs}]")
        if sub.center is not None:
            out.append(f"center = [{float(sub.center.real)!r}, {float(sub.center.imag)!r}]")
        for k, c in enumerate(sub.conditions):
            out += ["", "  [[subdomain.side]]", f"  index = {k}", f'  kind = "{c.kind}"']
            if isinstance(c, Dirichlet):
                out.append(f"  value = {float(c.value)!r}")
            else:
                out.append(f"  step = {float(sub.steps[k])!r}")
            if isinstance(c, Interface):
                out.append(f"  neighbor = {c.neighbor}")
    if probe:
        out += ["", "[probe]"] + [f"{k} = {v!r}" for k, v in probe.items()]
    return "\n".join(out) + "\n"
