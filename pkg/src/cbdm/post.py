"""Quantities derived from a converged solution.

Capacitance is the flux of ``eps * grad(psi)`` through a contour running
parallel to a conductor. Each contour segment is split where it crosses a
subdomain boundary and integrated with composite Gauss-Legendre panels, so
no sample ever sits on an interface or a corner.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import contourpy
import numpy as np

from .errors import DomainError, SingularGradientError
from .geometry import Dirichlet, Interface, ProblemSpec, point_in_polygon
from .solver import Solution

__all__ = ["FluxContour", "shield_contour", "strip_contour", "potential_profile",
           "capacitance", "export_field", "field_grid", "on_slit"]


@dataclass
class FluxContour:
    """Open polyline through the domain with a normal attached to each segment.

    ``normal_sign = +1`` uses ``1j * tangent`` (the left normal), ``-1`` the
    right one. Normals should point towards the higher-potential conductor.
    """

    vertices: np.ndarray
    d: float
    spacing: float = 0.025
    normal_sign: int = 1
    order: int = 4

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=complex)
        if not self.d > 0:
            raise ValueError("contour offset must be positive")
        if len(self.vertices) < 2:
            raise ValueError("contour needs at least two vertices")

    def normal(self, k: int) -> complex:
        a, b = self.vertices[k], self.vertices[k + 1]
        return self.normal_sign * 1j * (b - a) / abs(b - a)

    def quadrature(self, problem: ProblemSpec):
        """Sample points, normals and weights, split at subdomain crossings."""
        x, w = np.polynomial.legendre.leggauss(self.order)
        pts, nrm, wts = [], [], []
        for k in range(len(self.vertices) - 1):
            a, b = self.vertices[k], self.vertices[k + 1]
            n = self.normal(k)
            cuts = sorted({0.0, 1.0, *_crossings(problem, a, b)})
            for s0, s1 in zip(cuts[:-1], cuts[1:]):
                pa, pb = a + s0 * (b - a), a + s1 * (b - a)
                L = abs(pb - pa)
                if L < 1e-14:
                    continue
                panels = max(1, math.ceil(L / self.spacing - 1e-9))
                edges = np.linspace(0.0, 1.0, panels + 1)
                for e0, e1 in zip(edges[:-1], edges[1:]):
                    mid, half = (e0 + e1) / 2, (e1 - e0) / 2
                    pts.append(pa + (mid + half * x) * (pb - pa))
                    wts.append(half * L * w)
                    nrm.append(np.full(self.order, n))
        return np.concatenate(pts), np.concatenate(nrm), np.concatenate(wts)


def _crossings(problem: ProblemSpec, a: complex, b: complex) -> List[float]:
    """Parameters in (0, 1) where segment a-b crosses a subdomain side."""
    out = []
    d = b - a
    for sub in problem.subdomains:
        for k in range(sub.polygon.n):
            p, q = sub.polygon.side(k)
            e = q - p
            den = (d.conjugate() * e).imag
            if abs(den) < 1e-15:
                continue
            s = ((p - a).conjugate() * e).imag / den
            u = ((p - a).conjugate() * d).imag / den
            if 1e-12 < s < 1 - 1e-12 and -1e-12 <= u <= 1 + 1e-12:
                out.append(float(s))
    return out


def _line_intersection(p1, d1, p2, d2) -> complex:
    den = (d1.conjugate() * d2).imag
    if abs(den) < 1e-15:
        raise DomainError("parallel lines do not intersect")
    s = ((p2 - p1).conjugate() * d2).imag / den
    return p1 + s * d1


def _shield_chain(problem: ProblemSpec, value: float):
    """Shield sides as one chain of (a, b, inward normal), merged where collinear."""
    segs = []
    for sub in problem.subdomains:
        for k, c in enumerate(sub.conditions):
            if isinstance(c, Dirichlet) and c.value == value:
                a, b = sub.polygon.side(k)
                segs.append((complex(a), complex(b), sub.polygon.inward_normal(k)))
    if not segs:
        raise DomainError(f"no Dirichlet side carries the value {value}")
    starts = {s[0]: s for s in segs}
    ends = {s[1] for s in segs}
    heads = [s for s in segs if not any(abs(s[0] - e) < 1e-12 for e in ends)]
    if len(heads) != 1:
        raise DomainError("shield sides do not form a single open chain")
    chain = [heads[0]]
    while True:
        nxt = [s for s in segs if abs(s[0] - chain[-1][1]) < 1e-12]
        if not nxt:
            break
        chain.append(nxt[0])
    if len(chain) != len(segs):
        raise DomainError("shield sides do not form a single open chain")
    merged = [chain[0]]
    for a, b, n in chain[1:]:
        pa, pb, pn = merged[-1]
        if abs(n - pn) < 1e-12:
            merged[-1] = (pa, b, pn)
        else:
            merged.append((a, b, n))
    return merged


def _adjacent_side(problem: ProblemSpec, z: complex, exclude_value: float):
    """Direction of a non-shield boundary side ending or starting at ``z``."""
    for sub in problem.subdomains:
        for k, c in enumerate(sub.conditions):
            if isinstance(c, Interface) or (isinstance(c, Dirichlet) and c.value == exclude_value):
                continue
            a, b = sub.polygon.side(k)
            if abs(a - z) < 1e-12 or abs(b - z) < 1e-12:
                return complex(a), complex(b - a)
    raise DomainError(f"no boundary side continues the shield at {z}")


def shield_contour(problem: ProblemSpec, d: float = 0.025, spacing: float = 0.025,
                   value: Optional[float] = None) -> FluxContour:
    """Polyline offset by ``d`` into the domain from the conductor at ``value``.

    ``value`` defaults to the lowest Dirichlet value. The ends are cut where
    the offset lines meet the neighbouring boundary sides.
    """
    if not d > 0:
        raise ValueError("contour offset must be positive")
    if value is None:
        value = min(problem.dirichlet_values)
    chain = _shield_chain(problem, value)
    lines = [(a + d * n, b - a) for a, b, n in chain]
    p0, e0 = _adjacent_side(problem, chain[0][0], value)
    p1, e1 = _adjacent_side(problem, chain[-1][1], value)
    verts = [_line_intersection(lines[0][0], lines[0][1], p0, e0)]
    for (pa, da), (pb, db) in zip(lines[:-1], lines[1:]):
        verts.append(_line_intersection(pa, da, pb, db))
    verts.append(_line_intersection(lines[-1][0], lines[-1][1], p1, e1))
    return FluxContour(np.array(verts), d=d, spacing=spacing, normal_sign=1)


def strip_contour(x_end: float, h: float, W: float, d: float = 0.1,
                  spacing: float = 0.025) -> FluxContour:
    """U-shaped contour around a horizontal strip from ``x_end`` to the wall ``x = W``."""
    verts = [complex(W, h - d), complex(x_end - d, h - d), complex(x_end - d, h + d),
             complex(W, h + d)]
    return FluxContour(np.array(verts), d=d, spacing=spacing, normal_sign=-1)


def potential_profile(solution: Solution, x: float, ys: Sequence[float]) -> np.ndarray:
    """Potential along the vertical line ``x`` at heights ``ys``."""
    return np.array([solution.potential(complex(x, y)) for y in ys])


def capacitance(solution: Solution, contour: Optional[FluxContour] = None,
                exclusion: float = 1e-3) -> float:
    """Capacitance per unit length from the flux through ``contour``.

    Defaults to the shield contour at offset 0.025. Divides by the spread of
    the Dirichlet data.
    """
    problem = solution.problem
    vals = problem.dirichlet_values
    dv = max(vals) - min(vals)
    if dv == 0:
        return 0.0
    if contour is None:
        contour = shield_contour(problem)
    pts, nrm, wts = contour.quadrature(problem)
    flux = 0.0
    for j, (z, n, w) in enumerate(zip(pts, nrm, wts)):
        m = _owner(problem, z)
        if m is None:
            raise DomainError(f"contour sample {j} at {z} is not interior to any subdomain")
        try:
            gx, gy = solution.gradient(z, exclusion=exclusion)
        except SingularGradientError as exc:
            raise SingularGradientError(f"contour sample {j} at {z}: {exc}") from None
        flux += problem.subdomains[m].eps * (gx * n.real + gy * n.imag) * w
    return float(flux / dv)


def _owner(problem: ProblemSpec, z: complex) -> Optional[int]:
    for m, sub in enumerate(problem.subdomains):
        if point_in_polygon(sub.polygon, z):
            return m
    return None


def on_slit(problem: ProblemSpec, z: complex, tol: float = 1e-12) -> bool:
    """True where two Dirichlet faces run antiparallel through ``z`` (a zero-thickness conductor)."""
    dirs = []
    for sub in problem.subdomains:
        for k, c in enumerate(sub.conditions):
            if not isinstance(c, Dirichlet):
                continue
            a, b = sub.polygon.side(k)
            ab = b - a
            t = ((z - a) * np.conj(ab)).real / abs(ab) ** 2
            if -tol <= t <= 1 + tol and abs(z - (a + min(max(t, 0.0), 1.0) * ab)) <= tol * abs(ab):
                dirs.append(ab / abs(ab))
    return any(abs(u + v) < 1e-9 for i, u in enumerate(dirs) for v in dirs[i + 1:])


def field_grid(solution: Solution, xs: Sequence[float], ys: Sequence[float]) -> np.ndarray:
    """Potential on a tensor grid, ``out[j, i]`` at ``(xs[i], ys[j])``; NaN outside or on a slit."""
    problem = solution.problem
    out = np.full((len(ys), len(xs)), np.nan)
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            z = complex(x, y)
            if problem.locate(z) is None or on_slit(problem, z):
                continue
            out[j, i] = solution.potential(z)
    return out


def export_field(solution: Solution, xs: Sequence[float], ys: Sequence[float], path,
                 svg_path=None, levels: Sequence[float] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
                 ) -> np.ndarray:
    """Write ``x,y,psi`` rows (row-major, interior samples only) and optional SVG contours."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    grid = field_grid(solution, xs, ys)
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x", "y", "psi"])
        for j, y in enumerate(ys):
            for i, x in enumerate(xs):
                if np.isfinite(grid[j, i]):
                    wr.writerow([repr(float(x)), repr(float(y)), repr(float(grid[j, i]))])
    if svg_path is not None:
        write_contours_svg(xs, ys, grid, levels, svg_path)
    return grid


def contour_lines(xs, ys, grid, level: float) -> List[np.ndarray]:
    """Marching-squares polylines of ``grid`` at ``level`` as (k, 2) arrays."""
    gen = contourpy.contour_generator(xs, ys, np.ma.masked_invalid(grid),
                                      name="serial", corner_mask=True)
    return [ln for ln in gen.lines(level) if len(ln) >= 2]


def write_contours_svg(xs, ys, grid, levels, path, scale: float = 200.0) -> None:
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    x0, y1 = xs.min(), ys.max()
    wpx = (xs.max() - x0) * scale
    hpx = (y1 - ys.min()) * scale
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{wpx:.1f}" height="{hpx:.1f}" '
             f'viewBox="0 0 {wpx:.1f} {hpx:.1f}">']
    for lev in levels:
        cmds = []
        for ln in contour_lines(xs, ys, grid, lev):
            px = (ln[:, 0] - x0) * scale
            py = (y1 - ln[:, 1]) * scale
            cmds.append("M " + " L ".join(f"{a:.3f} {b:.3f}" for a, b in zip(px, py)))
        parts.append(f'<path data-level="{lev!r}" fill="none" stroke="black" stroke-width="1" '
                     f'd="{" ".join(cmds)}"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
