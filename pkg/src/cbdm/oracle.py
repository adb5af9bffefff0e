"""Brute-force finite-difference reference on a uniform grid.

Node-centred box integration over the bounding box of the problem: each
grid cell carries a permittivity (zero outside the domain), each grid edge
conducts with the mean permittivity of its two adjacent cells. Zero
permittivity outside makes the outer Neumann condition automatic; cells cut
by an interface get an area-weighted harmonic mean. Nodes on Dirichlet
sides (the slit included) are fixed.

This module shares no code with the conformal-map solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import spsolve
from shapely.geometry import Polygon as ShapelyPolygon, box

from .errors import DiscretizationError, NumericalFailureError
from .geometry import Dirichlet, ProblemSpec

__all__ = ["GridSolution", "fd_reference", "richardson", "richardson_order", "extrapolated_capacitance"]


@dataclass
class GridSolution:
    """Converged grid potentials; ``psi[j, i]`` sits at ``(x[i], y[j])``, NaN outside."""

    h: float
    x: np.ndarray
    y: np.ndarray
    psi: np.ndarray
    fixed: np.ndarray
    inside: np.ndarray
    cell_eps: np.ndarray
    capacitance: float
    charge: float
    max_residual: float

    def sample(self, pts) -> np.ndarray:
        """Bilinear interpolation at complex points."""
        pts = np.atleast_1d(np.asarray(pts, dtype=complex))
        f = RegularGridInterpolator((self.y, self.x), self.psi, method="linear",
                                    bounds_error=False, fill_value=np.nan)
        return f(np.column_stack([pts.imag, pts.real]))


def _dirichlet_segments(problem: ProblemSpec):
    segs = []
    for sub in problem.subdomains:
        for k, cond in enumerate(sub.conditions):
            if isinstance(cond, Dirichlet):
                a, b = sub.polygon.side(k)
                segs.append((a, b, float(cond.value)))
    return segs


def _on_segment(X, Y, a, b, tol):
    ab = b - a
    L2 = abs(ab) ** 2
    t = ((X - a.real) * ab.real + (Y - a.imag) * ab.imag) / L2
    t = np.clip(t, 0.0, 1.0)
    dx = X - (a.real + t * ab.real)
    dy = Y - (a.imag + t * ab.imag)
    return np.hypot(dx, dy) <= tol


def _cell_permittivity(problem: ProblemSpec, x, y, h):
    """Per-cell permittivity; cells straddling subdomain boundaries are cut with shapely."""
    xc = 0.5 * (x[:-1] + x[1:])
    yc = 0.5 * (y[:-1] + y[1:])
    XC, YC = np.meshgrid(xc, yc)
    ny, nx = XC.shape
    inv_sum = np.zeros((ny, nx))
    frac_sum = np.zeros((ny, nx))
    near = np.zeros((ny, nx), dtype=bool)
    shapes = []
    for sub in problem.subdomains:
        v = sub.polygon.vertices
        shapes.append(ShapelyPolygon(np.column_stack([v.real, v.imag])).buffer(0))
        for k in range(sub.polygon.n):
            a, b = sub.polygon.side(k)
            near |= _on_segment(XC, YC, a, b, 0.75 * h)
    for m, sub in enumerate(problem.subdomains):
        v = sub.polygon.vertices
        # crossing-number test at cell centres for the uncut cells
        inside = np.zeros((ny, nx), dtype=bool)
        n = len(v)
        for k in range(n):
            a, b = v[k], v[(k + 1) % n]
            if a.imag == b.imag:
                continue
            cond = (a.imag > YC) != (b.imag > YC)
            xi = a.real + (YC - a.imag) * (b.real - a.real) / (b.imag - a.imag)
            inside ^= cond & (XC < xi)
        f = np.where(inside & ~near, 1.0, 0.0)
        for j, i in zip(*np.nonzero(near)):
            cell = box(x[i], y[j], x[i + 1], y[j + 1])
            f[j, i] = shapes[m].intersection(cell).area / (h * h)
        frac_sum += f
        inv_sum += f / sub.eps
    with np.errstate(divide="ignore", invalid="ignore"):
        eps = np.where(frac_sum > 1e-12, frac_sum / inv_sum, 0.0)
    # a cell only partly inside the domain keeps the permittivity of its material part
    return eps, frac_sum


def fd_reference(problem: ProblemSpec, h: float, tol: float = 1e-10,
                 min_slit_nodes: int = 4) -> GridSolution:
    """Solve the full problem on a uniform grid of spacing ``h``."""
    verts = np.concatenate([s.polygon.vertices for s in problem.subdomains])
    x0, x1 = verts.real.min(), verts.real.max()
    y0, y1 = verts.imag.min(), verts.imag.max()
    nx = int(round((x1 - x0) / h)) + 1
    ny = int(round((y1 - y0) / h)) + 1
    if abs((nx - 1) * h - (x1 - x0)) > 1e-9 * h or abs((ny - 1) * h - (y1 - y0)) > 1e-9 * h:
        raise DiscretizationError("grid spacing must divide the bounding box")
    x = x0 + h * np.arange(nx)
    y = y0 + h * np.arange(ny)
    X, Y = np.meshgrid(x, y)

    fixed = np.zeros(X.shape, dtype=bool)
    value = np.zeros(X.shape)
    hi = -np.inf
    for a, b, v in _dirichlet_segments(problem):
        on = _on_segment(X, Y, a, b, 1e-9 * h)
        # where two values meet keep the smaller, matching the junction rule
        newv = np.where(fixed & on, np.minimum(value, v), v)
        value = np.where(on, newv, value)
        fixed |= on
        hi = max(hi, v)
    strip = fixed & (value == hi)
    # the shortest high-valued conductor must be resolved
    if np.count_nonzero(strip) < min_slit_nodes:
        raise DiscretizationError(f"grid spacing {h} puts fewer than {min_slit_nodes} nodes on the conductor")
    for sub in problem.subdomains:
        for k, cond in enumerate(sub.conditions):
            if isinstance(cond, Dirichlet) and cond.value == hi:
                a, b = sub.polygon.side(k)
                if np.count_nonzero(_on_segment(X, Y, a, b, 1e-9 * h)) < min_slit_nodes:
                    raise DiscretizationError(
                        f"grid spacing {h} resolves the conductor side with fewer than "
                        f"{min_slit_nodes} nodes")

    eps, frac = _cell_permittivity(problem, x, y, h)
    # edge conductances: mean of the two adjacent cells (zero-padded outside the box)
    E = np.pad(eps, 1)
    cx = 0.5 * (E[:-1, 1:-1] + E[1:, 1:-1])  # horizontal edges, shape (ny, nx-1)
    cy = 0.5 * (E[1:-1, :-1] + E[1:-1, 1:])  # vertical edges, shape (ny-1, nx)

    idx = np.arange(nx * ny).reshape(ny, nx)
    rows, cols, vals = [], [], []
    for c, ia, ib in ((cx, idx[:, :-1], idx[:, 1:]), (cy, idx[:-1, :], idx[1:, :])):
        c, ia, ib = c.ravel(), ia.ravel(), ib.ravel()
        keep = c > 0
        c, ia, ib = c[keep], ia[keep], ib[keep]
        rows += [ia, ib, ia, ib]
        cols += [ib, ia, ia, ib]
        vals += [-c, -c, c, c]
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nx * ny, nx * ny))
    diag = A.diagonal()
    active = diag > 0
    fx = fixed.ravel()
    free = active & ~fx
    known = fx & active
    ff = np.flatnonzero(free)
    kk = np.flatnonzero(known)
    Aff = A[ff][:, ff].tocsr()
    rhs = -A[ff][:, kk] @ value.ravel()[kk]
    sol = _spd_solve(Aff, rhs, tol)

    psi = np.full(nx * ny, np.nan)
    psi[kk] = value.ravel()[kk]
    psi[ff] = sol
    res = Aff @ sol - rhs
    scale = max(np.abs(rhs).max(), 1e-300)
    max_res = float(np.abs(res).max() / scale)
    if not np.all(np.isfinite(sol)):
        raise NumericalFailureError("oracle solve produced non-finite values")

    act = np.flatnonzero(active)
    p = np.where(np.isnan(psi), 0.0, psi)
    Aaa = A[act][:, act]
    pa = p[act]
    energy = 0.5 * float(pa @ (Aaa @ pa))
    lo = min(v for _, _, v in _dirichlet_segments(problem))
    dv = hi - lo
    flux = Aaa @ pa
    sel = strip.ravel()[act]
    charge = float(flux[sel].sum())
    cap = 2.0 * energy / dv ** 2 if dv > 0 else 0.0
    inside = active.reshape(ny, nx)
    return GridSolution(h=h, x=x, y=y, psi=psi.reshape(ny, nx), fixed=fixed & inside,
                        inside=inside, cell_eps=eps, capacitance=cap, charge=charge,
                        max_residual=max_res)


def _spd_solve(A, b, tol):
    if A.shape[0] < 20000:
        return spsolve(A.tocsc(), b)
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=500)
    x = ml.solve(b, tol=tol, accel="cg", maxiter=500)
    return x


def richardson_order(q1: float, q2: float, q3: float) -> float:
    """Observed order from three values at spacings h, h/2, h/4."""
    d12, d23 = q1 - q2, q2 - q3
    if d23 == 0 or d12 / d23 <= 0:
        raise NumericalFailureError("sequence is not in the asymptotic range")
    return math.log2(d12 / d23)


def richardson(q_h, q_h2, p: float = 2.0):
    """Extrapolate values at spacings h and h/2 to h -> 0 assuming order ``p``."""
    q_h = np.asarray(q_h, dtype=float)
    q_h2 = np.asarray(q_h2, dtype=float)
    return q_h2 + (q_h2 - q_h) / (2.0 ** p - 1.0)


def extrapolated_capacitance(problem: ProblemSpec, hs: Sequence[float] = (1 / 64, 1 / 128, 1 / 256)
                             ) -> Tuple[float, float, list]:
    """Richardson-extrapolated capacitance with an observed order.

    Returns ``(C, p, [C(h) ...])``; ``hs`` must halve successively.
    """
    caps = [fd_reference(problem, h).capacitance for h in hs]
    if len(caps) >= 3:
        p = richardson_order(*caps[-3:])
    else:
        p = 1.0
    return float(richardson(caps[-2], caps[-1], p)), p, caps
