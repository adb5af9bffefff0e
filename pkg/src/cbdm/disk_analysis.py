"""Potential and gradient evaluation on the unit disk.

The potential at the centre of the disk is the boundary mean. Any other
interior point ``t_i`` is handled by the disk automorphism

    g(t) = (t - t_i) / (1 - conj(t_i) t),

which sends ``t_i`` to the origin and only reshuffles the boundary angles.
Boundary data are piecewise linear in angle between samples, so the mean
reduces to a trapezoid sum over arcs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import DomainError, SingularGradientError

TWO_PI = 2.0 * np.pi

__all__ = [
    "BoundaryTrace",
    "mobius_angles",
    "mobius_recenter",
    "eval_center",
    "eval_center_cubic",
    "eval_at",
    "grad_center",
    "grad_at",
    "linear_weights",
    "pchip_means",
]


@dataclass(frozen=True)
class BoundaryTrace:
    """Closed loop of ``(theta, psi)`` samples on the unit circle.

    Arc ``n`` joins sample ``n`` to sample ``n + 1``; the last arc closes the
    loop back to sample 0 shifted by 2*pi. Two samples at the same angle
    encode a jump (a zero-width arc).
    """

    theta: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        ps = np.asarray(self.psi, dtype=float)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "psi", ps)
        if th.shape != ps.shape or th.ndim != 1 or len(th) < 1:
            raise ValueError("theta and psi must be 1-D arrays of equal length")
        d = np.diff(th)
        if np.any(d < -1e-12):
            raise ValueError("trace angles must be non-decreasing")
        if th[-1] - th[0] > TWO_PI + 1e-12:
            raise ValueError("trace spans more than one turn")

    @classmethod
    def from_arcs(cls, arcs: Sequence[Tuple[float, float, float, float]]) -> "BoundaryTrace":
        """Build from ``(theta_start, theta_end, psi_start, psi_end)`` arcs."""
        th, ps = [], []
        for i, (a, b, pa, pb) in enumerate(arcs):
            th.append(a)
            ps.append(pa)
            if pb != arcs[(i + 1) % len(arcs)][2]:
                # zero-width jump arc
                th.append(b)
                ps.append(pb)
        total = sum(b - a for a, b, _, _ in arcs)
        if abs(total - TWO_PI) > 1e-12:
            raise ValueError(f"arcs cover {total} rad, not 2*pi")
        return cls(np.array(th), np.array(ps))

    @property
    def widths(self) -> np.ndarray:
        th = self.theta
        return np.diff(np.concatenate([th, [th[0] + TWO_PI]]))

    @property
    def arcs(self):
        th = np.concatenate([self.theta, [self.theta[0] + TWO_PI]])
        ps = np.concatenate([self.psi, [self.psi[0]]])
        return [(th[i], th[i + 1], ps[i], ps[i + 1]) for i in range(len(self.theta))]

    def value_at(self, theta: float) -> float:
        """Linear interpolation of the trace at a boundary angle."""
        th = np.concatenate([self.theta, [self.theta[0] + TWO_PI]])
        ps = np.concatenate([self.psi, [self.psi[0]]])
        x = self.theta[0] + np.mod(theta - self.theta[0], TWO_PI)
        return float(np.interp(x, th, ps))

    def with_values(self, psi) -> "BoundaryTrace":
        return BoundaryTrace(self.theta, psi)


def mobius_angles(theta, t_i):
    """Boundary angles after sending ``t_i`` to the origin.

    Uses theta' = theta - 2 arg(1 - conj(t_i) e^{j theta}), which is
    continuous and increasing in theta, so no branch selection is needed.
    Broadcasts: ``t_i`` of shape (P,) and ``theta`` of shape (M,) give (P, M).
    """
    t_i = np.asarray(t_i, dtype=complex)
    if np.any(np.abs(t_i) >= 1):
        raise DomainError("recentering point must lie strictly inside the unit disk")
    theta = np.asarray(theta, dtype=float)
    a = np.conj(t_i)[..., None] if t_i.ndim else np.conj(t_i)
    return theta - 2.0 * np.angle(1.0 - a * np.exp(1j * theta))


def mobius_recenter(trace: BoundaryTrace, t_i: complex) -> BoundaryTrace:
    """Trace seen from ``t_i``: same values, recentred angles."""
    th = mobius_angles(trace.theta, complex(t_i))
    out = BoundaryTrace(th, trace.psi)
    total = out.widths.sum()
    assert abs(total - TWO_PI) <= 1e-10 and np.all(out.widths >= -1e-12)
    return out


def eval_center(trace: BoundaryTrace) -> float:
    """psi(0) = (1/2pi) sum_n (psi_n + psi_{n+1})/2 * dtheta_n."""
    ps = trace.psi
    nxt = np.roll(ps, -1)
    return float(np.sum(0.5 * (ps + nxt) * trace.widths) / TWO_PI)


def eval_at(trace: BoundaryTrace, t_i: complex) -> float:
    """Potential at an interior disk point from boundary data."""
    return eval_center(mobius_recenter(trace, t_i))


def _pchip_derivs(h, delta):
    """Monotone (Fritsch-Butland/Brodlie) slopes at periodic samples.

    ``h`` and ``delta`` have the arc axis last; slope j sits between arc j-1
    and arc j. Zero-width arcs (jumps) force a zero slope at their ends.
    """
    hl = np.roll(h, 1, axis=-1)
    dl = np.roll(delta, 1, axis=-1)
    w1 = 2 * h + hl
    w2 = h + 2 * hl
    same = (dl * delta) > 0
    ok = same & (h > 0) & (hl > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = (w1 + w2) / (w1 / dl + w2 / delta)
    return np.where(ok, d, 0.0)


def pchip_means(theta, psi):
    """Exact integrals of the periodic monotone cubic interpolant, per arc.

    ``theta`` has shape (..., M) and ``psi`` (M,) or the same shape. Returns
    ``(integrals, widths)`` per arc, with the arc axis last.
    """
    theta = np.asarray(theta, dtype=float)
    psi = np.broadcast_to(np.asarray(psi, dtype=float), theta.shape)
    first = theta[..., :1] + TWO_PI
    h = np.diff(np.concatenate([theta, first], axis=-1), axis=-1)
    h = np.where(h < 0, 0.0, h)
    dy = np.roll(psi, -1, axis=-1) - psi
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(h > 0, dy / np.where(h > 0, h, 1.0), 0.0)
    d = _pchip_derivs(h, delta)
    dn = np.roll(d, -1, axis=-1)
    integ = h * (psi + np.roll(psi, -1, axis=-1)) / 2 + h * h * (d - dn) / 12
    return integ, h


def eval_center_cubic(trace: BoundaryTrace) -> float:
    """Boundary mean using a monotone piecewise-cubic Hermite interpolant."""
    if len(trace.theta) < 4:
        warnings.warn("fewer than 4 samples; falling back to the linear rule",
                      RuntimeWarning, stacklevel=2)
        return eval_center(trace)
    integ, _ = pchip_means(trace.theta, trace.psi)
    return float(integ.sum() / TWO_PI)


def _arc_means(trace: BoundaryTrace, rule: str) -> np.ndarray:
    ps = trace.psi
    if rule == "cubic" and len(ps) >= 4:
        integ, h = pchip_means(trace.theta, ps)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(h > 0, integ / np.where(h > 0, h, 1.0), ps)
    return 0.5 * (ps + np.roll(ps, -1))


def grad_center(trace: BoundaryTrace, rule: str = "linear") -> Tuple[float, float]:
    """Closed-form gradient of the harmonic extension at the disk centre.

    grad psi(0) = sum_n <psi_n>/pi * (sin th_{n+1} - sin th_n, cos th_n - cos th_{n+1})
    where ``<psi_n>`` is the mean over arc n.
    """
    th = trace.theta
    thn = np.concatenate([th[1:], [th[0] + TWO_PI]])
    m = _arc_means(trace, rule)
    gx = np.sum(m * (np.sin(thn) - np.sin(th))) / np.pi
    gy = np.sum(m * (np.cos(th) - np.cos(thn))) / np.pi
    return float(gx), float(gy)


def grad_at(dmap, trace: BoundaryTrace, z_probe: complex, t_i: complex = None,
            exclusion: float = 1e-3, rule: str = "linear") -> Tuple[float, float]:
    """Gradient of the potential at a physical point ``z_probe``.

    The centre gradient of the recentred trace is carried back through the
    automorphism (factor 1/(1 - |t_i|^2)) and then through the map
    (division by conj(f(t_i))).
    """
    z_probe = complex(z_probe)
    poly = dmap.polygon
    reentrant = poly.vertices[poly.alphas > 1 + 1e-12]
    if len(reentrant) and np.min(np.abs(reentrant - z_probe)) < exclusion:
        raise SingularGradientError(
            f"probe {z_probe} lies within {exclusion} of a re-entrant vertex")
    if t_i is None:
        t_i = dmap.inverse(z_probe)
    t_i = complex(t_i)
    f = dmap.derivative(t_i)
    if abs(f) < 1e-14:
        raise SingularGradientError(f"map derivative vanishes at the image of {z_probe}")
    gx, gy = grad_center(mobius_recenter(trace, t_i), rule=rule)
    g_disk = complex(gx, gy) / (1.0 - abs(t_i) ** 2)
    g = g_disk / np.conj(f)
    return float(g.real), float(g.imag)


def linear_weights(theta_rec) -> np.ndarray:
    """Weights w such that eval_center == w @ psi for recentred angles.

    Accepts (M,) or (P, M) angle arrays.
    """
    th = np.asarray(theta_rec, dtype=float)
    first = th[..., :1] + TWO_PI
    h = np.diff(np.concatenate([th, first], axis=-1), axis=-1)
    return (h + np.roll(h, 1, axis=-1)) / (2.0 * TWO_PI)
