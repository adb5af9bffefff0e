"""Schwarz-Christoffel maps from the unit disk to a polygon.

The map is

    F(t) = c + C * integral_0^t prod_k (1 - tau/t_k)**(alpha_k - 1) dtau

with prevertices ``t_k`` on the unit circle and the conformal centre
``c = F(0)``. Integrals are evaluated along straight segments with compound
Gauss-Jacobi quadrature: the subinterval touching a prevertex absorbs the
power singularity into the Jacobi weight, and later subintervals are kept
no longer than the distance to the nearest prevertex.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares
from scipy.special import roots_jacobi

from .errors import DomainError, InversionError, ParameterProblemError
from .geometry import Polygon, distance_to_boundary, point_in_polygon, _segments_conflict

__all__ = ["DiskMap", "solve_parameters", "derivative", "forward", "inverse",
           "default_center", "CROWDING_GAP"]

log = logging.getLogger(__name__)

CROWDING_GAP = 1e-6


def _qdata(betas: np.ndarray, nqpts: int):
    """Gauss-Jacobi rules on [-1, 1] with weight (1+x)**beta_k, plus Gauss-Legendre last."""
    rules = []
    for b in list(betas) + [0.0]:
        x, w = roots_jacobi(nqpts, 0.0, float(b))
        rules.append((x, w))
    return rules


def default_center(poly: Polygon) -> complex:
    """An interior point well away from the boundary.

    The centroid is used when it is comfortably inside; otherwise the best
    point of a coarse grid (largest distance to the boundary).
    """
    v = poly.vertices
    xs = np.linspace(v.real.min(), v.real.max(), 61)[1:-1]
    ys = np.linspace(v.imag.min(), v.imag.max(), 61)[1:-1]
    grid = (xs[None, :] + 1j * ys[:, None]).ravel()
    inside = point_in_polygon(poly, grid)
    grid = grid[inside]
    d = distance_to_boundary(poly, grid)
    best = grid[int(np.argmax(d))]
    c = poly.centroid
    if point_in_polygon(poly, c) and distance_to_boundary(poly, c) >= 0.5 * d.max():
        return complex(c)
    return complex(best)


@dataclass
class DiskMap:
    """Solved disk map. Immutable in use; ``_seeds`` is a lazily filled cache."""

    polygon: Polygon
    prevertices: np.ndarray
    C: complex
    center: complex
    tol: float = 1e-9
    nqpts: int = 12
    residual: float = 0.0
    vertex_residual: float = 0.0
    iterations: int = 0
    warnings: List[str] = field(default_factory=list)
    _seeds: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        self.prevertices = np.asarray(self.prevertices, dtype=complex)
        self.betas = self.polygon.alphas - 1.0
        self._qdat = _qdata(self.betas, self.nqpts)

    # ------------------------------------------------------------ basics

    @property
    def anchor(self):
        """Anchor pair ``(t0, z0)``: the origin maps to the conformal centre."""
        return 0j, self.center

    @property
    def theta(self) -> np.ndarray:
        """Prevertex angles, increasing, starting in [0, 2*pi)."""
        th = np.angle(self.prevertices)
        th = np.unwrap(th)
        return th - 2 * np.pi * np.floor(th[0] / (2 * np.pi))

    @property
    def min_gap(self) -> float:
        th = np.sort(np.mod(np.angle(self.prevertices), 2 * np.pi))
        gaps = np.diff(np.concatenate([th, [th[0] + 2 * np.pi]]))
        return float(gaps.min())

    @property
    def crowded(self) -> bool:
        return self.min_gap < CROWDING_GAP

    # ------------------------------------------------------------ integrand

    def _ftilde(self, t):
        t = np.asarray(t, dtype=complex)
        terms = 1.0 - t[..., None] / self.prevertices
        with np.errstate(divide="ignore"):
            return np.exp(np.log(terms) @ self.betas)

    def derivative(self, t):
        """dz/dt = C * prod (1 - t/t_k)**(alpha_k - 1)."""
        t = np.asarray(t, dtype=complex)
        if np.any(np.abs(t) > 1 + 1e-12):
            raise DomainError("derivative evaluated outside the closed disk")
        near = np.abs(t[..., None] - self.prevertices) < 1e-15
        if np.any(near & (self.betas < 0)):
            raise DomainError("derivative evaluated at a singular prevertex")
        out = self.C * self._ftilde(t)
        return out.item() if out.ndim == 0 else out

    def _dquad(self, za: complex, zb: complex, sing: int) -> complex:
        """Integral of the normalised integrand from za to zb along a segment.

        ``sing`` is the index of a prevertex sitting at ``za`` (or -1). ``zb``
        must not be a prevertex.
        """
        w = self.prevertices
        beta = self.betas
        L = abs(zb - za)
        if L == 0:
            return 0j
        if sing >= 0:
            others = np.delete(w, sing)
        else:
            others = w
        frac = min(1.0, float(np.min(np.abs(others - za))) / L)
        zr = za + frac * (zb - za)
        x, wt = self._qdat[sing] if sing >= 0 else self._qdat[-1]
        nd = ((zr - za) * x + zr + za) / 2
        ww = (zr - za) / 2 * wt
        terms = 1.0 - nd[:, None] / w[None, :]
        if sing >= 0:
            terms[:, sing] = terms[:, sing] / np.abs(terms[:, sing])
            ww = ww * (abs(zr - za) / 2) ** beta[sing]
        total = np.exp(np.log(terms) @ beta) @ ww
        xl, wl = self._qdat[-1]
        while frac < 1.0:
            zl = zr
            rem = abs(zb - zl)
            frac = min(1.0, float(np.min(np.abs(w - zl))) / rem)
            zr = zl + frac * (zb - zl)
            nd = ((zr - zl) * xl + zr + zl) / 2
            ww = (zr - zl) / 2 * wl
            terms = 1.0 - nd[:, None] / w[None, :]
            total += np.exp(np.log(terms) @ beta) @ ww
        return complex(total)

    # ------------------------------------------------------------ forward

    def _forward1(self, t: complex) -> complex:
        if abs(t) > 1 + 1e-12:
            raise DomainError(f"forward map evaluated outside the disk at {t}")
        d = np.abs(self.prevertices - t)
        k = int(np.argmin(d))
        if d[k] <= 1e-15:
            return complex(self.polygon.vertices[k])
        if d[k] < abs(t):
            return complex(self.polygon.vertices[k] + self.C * self._dquad(self.prevertices[k], t, k))
        return complex(self.center + self.C * self._dquad(0j, t, -1))

    def forward(self, t):
        """z = F(t) for scalar or array ``t``."""
        if np.ndim(t) == 0:
            return self._forward1(complex(t))
        t = np.asarray(t, dtype=complex)
        return np.array([self._forward1(complex(v)) for v in t.ravel()]).reshape(t.shape)

    __call__ = forward

    # ------------------------------------------------------------ inverse

    def _seed_table(self):
        if self._seeds is None:
            radii = np.array([0.0, 0.3, 0.55, 0.75, 0.87, 0.94, 0.975, 0.99])
            phis = np.linspace(0, 2 * np.pi, 64, endpoint=False)
            ts = [0j] + [r * np.exp(1j * p) for r in radii[1:] for p in phis]
            ts = np.array(ts)
            zs = self.forward(ts)
            self._seeds = (ts, zs)
        return self._seeds

    def _visible(self, a: complex, b: complex) -> bool:
        poly = self.polygon
        for k in range(poly.n):
            p, q = poly.side(k)
            if _segments_conflict(a, b, p, q):
                return False
        return True

    def _ode_guess(self, t0: complex, z0: complex, z: complex, nsteps: int) -> complex:
        # integrate dt/ds = (z - z0)/f(t), s in [0, 1], classical RK4
        dz = z - z0
        t = t0
        hs = 1.0 / nsteps

        def rhs(tt):
            return dz / (self.C * self._ftilde(tt))

        for _ in range(nsteps):
            k1 = rhs(t)
            k2 = rhs(t + 0.5 * hs * k1)
            k3 = rhs(t + 0.5 * hs * k2)
            k4 = rhs(t + hs * k3)
            t = t + hs * (k1 + 2 * k2 + 2 * k3 + k4) / 6
            if abs(t) >= 1:
                t = t / abs(t) * (1 - 1e-10)
        return complex(t)

    def _newton(self, t: complex, z: complex, scale: float):
        target = 1e-13 * scale
        err = self._forward1(t) - z
        for _ in range(60):
            if abs(err) <= target:
                return t, abs(err)
            step = err / (self.C * self._ftilde(t))
            lam = 1.0
            while True:
                tn = t - lam * step
                if abs(tn) < 1:
                    en = self._forward1(tn) - z
                    if abs(en) < abs(err) or lam < 1e-6:
                        break
                lam *= 0.5
                if lam < 1e-12:
                    return t, abs(err)
            t, err = tn, en
        return t, abs(err)

    def _inverse_interior(self, z: complex) -> complex:
        scale = float(np.abs(self.polygon.vertices - self.center).max())
        ts, zs = self._seed_table()
        order = np.argsort(np.abs(zs - z))
        tried = 0
        best = None
        for idx in order:
            if not self._visible(zs[idx], z):
                continue
            for nsteps in (12, 48):
                t = self._ode_guess(ts[idx], zs[idx], z, nsteps)
                t, err = self._newton(t, z, scale)
                if best is None or err < best[1]:
                    best = (t, err)
                if err <= 10 * self.tol * scale and abs(t) < 1:
                    return t
            tried += 1
            if tried >= 4:
                break
        if best is not None and best[1] <= 10 * self.tol * scale and abs(best[0]) < 1:
            return best[0]
        raise InversionError(f"inverse map failed to converge at z={z}", z=z)

    def boundary_inverse(self, z: complex, side: int) -> complex:
        """Preimage of a point on side ``side`` (between its two prevertices)."""
        poly = self.polygon
        n = poly.n
        a, b = poly.side(side)
        L = abs(b - a)
        u = (b - a) / L
        s = ((z - a) * np.conj(u)).real
        if abs(((z - a) * np.conj(u)).imag) > 1e-9 * max(1.0, L) or not (-1e-12 <= s <= L + 1e-12):
            raise DomainError(f"point {z} is not on side {side}")
        if s <= 1e-14 * L:
            return complex(self.prevertices[side])
        if s >= L * (1 - 1e-14):
            return complex(self.prevertices[(side + 1) % n])
        th0 = float(np.angle(self.prevertices[side]))
        th1 = float(np.angle(self.prevertices[(side + 1) % n]))
        while th1 <= th0:
            th1 += 2 * np.pi

        def g(th):
            if th == th0:
                return -s
            if th == th1:
                return L - s
            return ((self._forward1(np.exp(1j * th)) - a) * np.conj(u)).real - s

        th = brentq(g, th0, th1, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        return complex(np.exp(1j * th))

    def _locate_side(self, z: complex, tol: float):
        poly = self.polygon
        for k in range(poly.n):
            a, b = poly.side(k)
            ab = b - a
            t = ((z - a) * np.conj(ab)).real / abs(ab) ** 2
            if -tol <= t <= 1 + tol and abs(z - (a + min(max(t, 0), 1) * ab)) <= tol * abs(ab):
                return k
        return None

    def _inverse1(self, z: complex) -> complex:
        if abs(z - self.center) == 0:
            return 0j
        scale = float(np.abs(self.polygon.vertices - self.center).max())
        btol = 1e-12 * scale
        if distance_to_boundary(self.polygon, z) <= btol:
            k = self._locate_side(z, 1e-12)
            return self.boundary_inverse(z, k)
        if not point_in_polygon(self.polygon, z):
            raise DomainError(f"point {z} is outside the polygon")
        return self._inverse_interior(z)

    def inverse(self, z):
        """t = F^{-1}(z) for scalar or array ``z`` in the closed polygon."""
        if np.ndim(z) == 0:
            return self._inverse1(complex(z))
        z = np.asarray(z, dtype=complex)
        return np.array([self._inverse1(complex(v)) for v in z.ravel()]).reshape(z.shape)

    # ------------------------------------------------------------ diagnostics

    def side_ratio_residual(self) -> float:
        """Max |computed/target - 1| over side lengths."""
        poly = self.polygon
        n = poly.n
        errs = []
        for k in range(n):
            I = _side_integral(self, k)
            errs.append(abs(abs(self.C * I) / poly.side_length(k) - 1.0))
        return float(max(errs))

    # ------------------------------------------------------------ persistence

    def dump(self, path) -> None:
        """Write prevertices, constants and residuals as plain text."""
        lines = ["# cbdm disk map", f"n {self.polygon.n}",
                 f"center {float(self.center.real)!r} {float(self.center.imag)!r}",
                 f"C {float(self.C.real)!r} {float(self.C.imag)!r}",
                 f"tol {float(self.tol)!r}", f"nqpts {self.nqpts}",
                 f"residual {float(self.residual)!r}",
                 f"vertex_residual {float(self.vertex_residual)!r}",
                 "# k x y alpha theta"]
        for k in range(self.polygon.n):
            v = self.polygon.vertices[k]
            lines.append(f"vertex {k} {float(v.real)!r} {float(v.imag)!r} "
                         f"{float(self.polygon.alphas[k])!r} "
                         f"{float(np.angle(self.prevertices[k]))!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "DiskMap":
        vals = {}
        verts = []
        for line in Path(path).read_text().splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            key, *rest = line.split()
            if key == "vertex":
                verts.append([float(r) for r in rest[1:]])
            else:
                vals[key] = rest
        arr = np.array(verts)
        poly = Polygon(vertices=arr[:, 0] + 1j * arr[:, 1], alphas=arr[:, 2])
        return cls(polygon=poly, prevertices=np.exp(1j * arr[:, 3]),
                   C=complex(float(vals["C"][0]), float(vals["C"][1])),
                   center=complex(float(vals["center"][0]), float(vals["center"][1])),
                   tol=float(vals["tol"][0]), nqpts=int(vals["nqpts"][0]),
                   residual=float(vals["residual"][0]),
                   vertex_residual=float(vals["vertex_residual"][0]))


def _side_integral(m: DiskMap, k: int) -> complex:
    n = m.polygon.n
    ta, tb = m.prevertices[k], m.prevertices[(k + 1) % n]
    tha = np.angle(ta)
    thb = np.angle(tb)
    while thb <= tha:
        thb += 2 * np.pi
    mid = np.exp(1j * (tha + thb) / 2)
    return m._dquad(ta, mid, k) - m._dquad(tb, mid, (k + 1) % n)


def _pick_fixed_vertex(alphas: np.ndarray) -> int:
    n = len(alphas)
    for k in range(n - 1, -1, -1):
        if abs(alphas[k] - 1) > 1e-8 and abs(alphas[k] - 2) > 1e-8:
            return k
    raise ParameterProblemError("no vertex suitable for normalisation (all angles are pi or 2*pi)")


def solve_parameters(polygon: Polygon, tolerance: float = 1e-9, center: Optional[complex] = None,
                     fixed_vertex: Optional[int] = None, nqpts: Optional[int] = None) -> DiskMap:
    """Solve the parameter problem for ``polygon``.

    The normalisation sends the origin to ``center`` and the prevertex of
    ``fixed_vertex`` to ``t = 1``. The remaining ``n - 1`` real unknowns are
    log-ratios of consecutive prevertex gaps, fitted so that the side
    lengths and the centre position come out right.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    n = polygon.n
    if center is None:
        center = default_center(polygon)
    center = complex(center)
    if not point_in_polygon(polygon, center):
        raise DomainError(f"conformal centre {center} is not inside the polygon")
    if nqpts is None:
        nqpts = max(int(math.ceil(-math.log10(tolerance))), 4) + 3
    if fixed_vertex is None:
        fixed_vertex = _pick_fixed_vertex(polygon.alphas)
    elif abs(polygon.alphas[fixed_vertex] - 1) < 1e-8 or abs(polygon.alphas[fixed_vertex] - 2) < 1e-8:
        raise ParameterProblemError("fixed vertex must not have angle pi or 2*pi")

    # rotate so the fixed vertex is last
    shift = (fixed_vertex + 1) % n
    order = np.roll(np.arange(n), -shift)
    rp = Polygon(vertices=polygon.vertices[order], alphas=polygon.alphas[order])
    z = rp.vertices
    lengths = rp.side_lengths()
    target_ratio = np.log(lengths[1:n - 2] / lengths[0])
    target_center = (z[n - 1] - center) / (z[1] - z[0])

    work = DiskMap(polygon=rp, prevertices=np.exp(1j * 2 * np.pi * (np.arange(n) + 1) / n),
                   C=1.0 + 0j, center=center, tol=tolerance, nqpts=nqpts)
    history = []

    def prevertices_of(y):
        e = np.exp(np.concatenate([y, [0.0]]) - max(0.0, float(np.max(y))))
        gaps = 2 * np.pi * e / e.sum()
        th = np.cumsum(gaps)
        return np.exp(1j * th)

    def residual(y):
        work.prevertices = prevertices_of(y)
        I = [_side_integral(work, k) for k in range(n - 2)]
        I0 = I[0]
        r_len = np.log(np.abs(np.array(I[1:])) / abs(I0)) - target_ratio
        Ic = -work._dquad(work.prevertices[n - 1], 0j, n - 1)
        r_c = np.log((Ic / I0) / target_center)
        res = np.concatenate([r_len, [r_c.real, r_c.imag]])
        if not np.all(np.isfinite(res)):
            res = np.full(n - 1, 1e3)
        history.append(float(np.max(np.abs(res))))
        return res

    # trust-region first; Levenberg-Marquardt can stall on symmetric polygons
    y = np.zeros(n - 1)
    worst, nfev = np.inf, 0
    for method in ("trf", "lm"):
        try:
            sol = least_squares(residual, y, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=400 * n)
        except Exception as exc:  # pragma: no cover - scipy internal failure
            raise ParameterProblemError(f"parameter problem failed: {exc}", history) from exc
        nfev += sol.nfev
        res = residual(sol.x)
        w = float(np.max(np.abs(res))) if len(res) else 0.0
        if w < worst:
            worst, y = w, sol.x
        if worst <= tolerance:
            break
    res = residual(y)
    if not worst <= tolerance:
        raise ParameterProblemError(
            f"parameter problem did not converge: residual {worst:.3e} > {tolerance:.1e}", history)

    pre_rot = prevertices_of(y)
    I0 = _side_integral(work, 0)
    C = (z[1] - z[0]) / I0
    # back to the caller's vertex order
    pre = np.empty(n, dtype=complex)
    pre[order] = pre_rot
    dm = DiskMap(polygon=polygon, prevertices=pre, C=complex(C), center=center, tol=tolerance,
                 nqpts=nqpts, residual=worst, iterations=int(nfev))
    # each vertex reached from the centre along a radius
    vres = max(abs(center + C * -dm._dquad(dm.prevertices[k], 0j, k) - polygon.vertices[k])
               for k in range(n))
    dm.vertex_residual = float(vres)
    if dm.crowded:
        msg = f"prevertex crowding: minimum gap {dm.min_gap:.2e} rad"
        dm.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    log.debug("sc map solved: n=%d residual=%.2e nfev=%d", n, worst, nfev)
    return dm


def derivative(m: DiskMap, t):
    return m.derivative(t)


def forward(m: DiskMap, t):
    return m.forward(t)


def inverse(m: DiskMap, z):
    return m.inverse(z)
