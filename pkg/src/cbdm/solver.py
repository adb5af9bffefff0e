"""SOR iteration on the Neumann and interface nodes.

Each sweep assembles the boundary traces of every subdomain from the current
node values, evaluates the potential at the probe points by recentred
boundary means, forms the five-point residual at each node and relaxes

    psi_k <- psi_k + omega * xi_k / 4.

With the linear rule a probe value is a fixed linear combination of the
trace samples, so the whole residual is an affine function of the node
vector and is precomputed once as a dense matrix. The cubic rule is
nonlinear (monotone slopes) and is re-evaluated from the traces every
half-sweep.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .disk_analysis import (BoundaryTrace, TWO_PI, eval_at, eval_center_cubic, grad_at,
                            linear_weights, mobius_angles, mobius_recenter, pchip_means)
from .discretize import NodeSet, discretize
from .errors import DomainError, NonConvergenceError, NumericalFailureError
from .geometry import Dirichlet, ProblemSpec, point_in_polygon

log = logging.getLogger(__name__)

__all__ = ["SorSchedule", "sor_schedule", "SolveOptions", "Solution", "solve", "solve_plain",
           "ResidualOperator"]

RULES = ("linear", "cubic")


@dataclass
class SorSchedule:
    """Chebyshev-accelerated relaxation factors for an odd/even sweep.

    ``rho`` is the Jacobi spectral radius estimate, ``omega_lim`` the
    asymptotic optimum used by the plain variant. The alternating sequence
    settles at ``omega_inf = 2/(1 + sqrt(1 - rho**2))``.
    """

    J: int
    rho: float
    omega_lim: float
    _seq: List[Tuple[float, float]] = field(default_factory=list, repr=False)

    @property
    def omega_inf(self) -> float:
        return 2.0 / (1.0 + math.sqrt(1.0 - self.rho ** 2))

    def omegas(self, n: int) -> Tuple[float, float]:
        """(omega_odd, omega_even) used in iteration ``n`` (0-based)."""
        r2 = self.rho ** 2
        if not self._seq:
            self._seq.append((1.0, 1.0 / (1.0 - 0.5 * r2)))
        while len(self._seq) <= n:
            _, we = self._seq[-1]
            wo = 1.0 / (1.0 - 0.25 * r2 * we)
            self._seq.append((wo, 1.0 / (1.0 - 0.25 * r2 * wo)))
        return self._seq[n]


def sor_schedule(J: int) -> SorSchedule:
    if J < 2:
        raise ValueError("the schedule needs at least two nodes")
    # the estimate turns negative for J = 2; a Jacobi radius cannot
    rho = max(0.999 * (1.0 - math.pi ** 2 / (2.0 * J * J)), 0.0)
    return SorSchedule(J=J, rho=rho, omega_lim=2.0 / (1.0 + math.pi / J))


@dataclass
class SolveOptions:
    """Solver settings.

    ``refresh`` sets how often the traces are rebuilt for probe evaluation:
    ``"iteration"`` (once per sweep, before relaxing any node), ``"half-sweep"``
    (before each colour of the odd/even sweep) or ``"node"`` (before every
    update; plain variant only). Neighbours along a side always use current
    values.
    """

    rule: str = "linear"
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    refresh: str = "iteration"
    callback: Optional[Callable[[int, np.ndarray, np.ndarray], None]] = None


class ResidualOperator:
    """All node-independent data needed to evaluate xi(psi).

    ``xi = F @ psi + f0 + probes(psi) - 4 psi``: ``F``/``f0`` hold the
    along-side neighbours and probes fixed on Dirichlet sides; ``probes``
    is the weighted sum of probe potentials, which for the linear rule is the
    affine map ``P @ psi + p0``.
    """

    def __init__(self, nodes: NodeSet):
        self.nodes = nodes
        J = nodes.J
        self.J = J
        F = np.zeros((J, J))
        f0 = np.zeros(J)
        nb_idx = np.full((J, 4), 0, dtype=int)
        nb_w = np.zeros((J, 4))
        for k in range(J):
            c = 0
            for aff in (nodes.prev[k], nodes.next[k]):
                for i, w in zip(aff.idx, aff.w):
                    F[k, i] += w
                    nb_idx[k, c], nb_w[k, c] = i, w
                    c += 1
                f0[k] += aff.const
        self.subs = []
        for lay in nodes.layouts:
            m = lay.subdomain
            S, s0 = lay.matrix(J)
            live = [p for p in nodes.probes if p.subdomain == m and p.value is None]
            t = np.array([p.t for p in live], dtype=complex)
            theta = mobius_angles(lay.theta, t) if len(live) else np.zeros((0, len(lay.theta)))
            node = np.array([p.node for p in live], dtype=int)
            coef = np.array([p.coef for p in live])
            self.subs.append((S, s0, theta, node, coef))
        for p in nodes.probes:
            if p.value is not None:
                f0[p.node] += p.coef * p.value
        P = np.zeros((J, J))
        p0 = np.zeros(J)
        self.cubic = []
        for S, s0, theta, node, coef in self.subs:
            W = linear_weights(theta) * coef[:, None]
            np.add.at(P, node, W @ S)
            np.add.at(p0, node, W @ s0)
            self.cubic.append(self._cubic_tables(theta, coef))
        self.F, self.f0, self.P, self.p0 = F, f0, P, p0
        self.nb_idx, self.nb_w = nb_idx, nb_w
        self.K = F + P - 4.0 * np.eye(J)
        self.b = f0 + p0

    @staticmethod
    def _cubic_tables(theta, coef):
        """Sample-independent parts of the monotone cubic correction.

        The exact integral of the cubic over arc j is the trapezoid value plus
        h_j^2 (d_j - d_{j+1})/12; summed around the circle that is
        sum_j d_j (h_j^2 - h_{j-1}^2)/12. The slopes d_j are weighted harmonic
        means whose weights only involve the (fixed) recentred widths.
        """
        if theta.shape[0] == 0 or theta.shape[1] < 4:
            return None
        h = np.diff(np.concatenate([theta, theta[:, :1] + TWO_PI], axis=1), axis=1)
        h = np.where(h < 0, 0.0, h)
        hl = np.roll(h, 1, axis=1)
        ok = (h > 0) & (hl > 0)
        with np.errstate(divide="ignore"):
            ih = np.where(h > 0, 1.0 / np.where(h > 0, h, 1.0), 0.0)
        ihl = np.roll(ih, 1, axis=1)
        w1 = 2 * h + hl
        w2 = h + 2 * hl
        C1 = np.where(ok, (w1 + w2) * ih * ihl, 0.0)
        A1 = np.where(ok, w1 * ih, 1.0)
        A2 = np.where(ok, w2 * ihl, 0.0)
        G = (h * h - hl * hl) / 12.0 / TWO_PI * coef[:, None]
        return C1, A1, A2, G

    def probe_sums(self, psi: np.ndarray, rule: str = "linear",
                   rows: Optional[np.ndarray] = None) -> np.ndarray:
        """Sum of c * psi(z_i) per node (only ``rows`` are meaningful if given)."""
        out = np.zeros(self.J)
        if rows is None:
            out[:] = self.P @ psi + self.p0
        else:
            out[rows] = self.P[rows] @ psi + self.p0[rows]
        if rule == "linear":
            return out
        for (S, s0, theta, node, coef), tab in zip(self.subs, self.cubic):
            if tab is None or len(node) == 0:
                continue
            C1, A1, A2, G = tab
            if rows is not None:
                sel = np.isin(node, rows)
                if not sel.any():
                    continue
                node = node[sel]
                C1, A1, A2, G = C1[sel], A1[sel], A2[sel], G[sel]
            y = S @ psi + s0
            dy = np.roll(y, -1) - y
            dyl = np.roll(dy, 1)
            cols = np.flatnonzero(dy * dyl > 0)
            if len(cols) == 0:
                continue
            d = C1[:, cols] * (dy * dyl)[cols] / (A1[:, cols] * dy[cols] + A2[:, cols] * dyl[cols])
            np.add.at(out, node, (d * G[:, cols]).sum(axis=1))
        return out

    def xi(self, psi: np.ndarray, rule: str = "linear", rows: Optional[np.ndarray] = None,
           probes: Optional[np.ndarray] = None) -> np.ndarray:
        """Residuals at ``rows`` (all nodes by default).

        ``probes`` may supply precomputed probe sums from a trace snapshot.
        """
        if probes is None:
            probes = self.probe_sums(psi, rule, rows)
        if rows is None:
            return self.F @ psi + self.f0 + probes - 4.0 * psi
        return self.F[rows] @ psi + self.f0[rows] + probes[rows] - 4.0 * psi[rows]


@dataclass
class Solution:
    """Converged node potentials plus everything needed to evaluate the field."""

    problem: ProblemSpec
    nodes: NodeSet
    psi: np.ndarray
    iterations: int
    max_residual: float
    sum_residual: float
    history: List[Tuple[int, float, float, float, float]]
    rule: str = "linear"
    variant: str = "chebyshev"

    @property
    def maps(self):
        return self.nodes.maps

    def trace(self, m: int) -> BoundaryTrace:
        lay = self.nodes.layouts[m]
        return BoundaryTrace(lay.theta, np.array([a(self.psi) for a in lay.sources]))

    def traces(self) -> List[BoundaryTrace]:
        return [self.trace(m) for m in range(len(self.problem.subdomains))]

    def _boundary_value(self, m: int, z: complex) -> Optional[float]:
        sub = self.problem.subdomains[m]
        dmap = self.maps[m]
        k = dmap._locate_side(z, 1e-12)
        if k is None:
            return None
        cond = sub.conditions[k]
        if isinstance(cond, Dirichlet):
            return float(cond.value)
        t = dmap.boundary_inverse(z, k)
        return self.trace(m).value_at(float(np.angle(t)))

    def _eval_disk(self, m: int, t: complex) -> float:
        tr = self.trace(m)
        if self.rule == "cubic":
            return eval_center_cubic(mobius_recenter(tr, t))
        return eval_at(tr, t)

    def potential(self, z) -> float:
        """Potential at a point of the closed domain."""
        z = complex(z)
        m = self.problem.locate(z)
        if m is None:
            raise DomainError(f"point {z} lies outside the problem domain")
        for mm, sub in enumerate(self.problem.subdomains):
            if point_in_polygon(sub.polygon, z, boundary=True) and \
                    not point_in_polygon(sub.polygon, z):
                v = self._boundary_value(mm, z)
                if v is not None:
                    return v
        return self._eval_disk(m, self.maps[m].inverse(z))

    def potentials(self, zs: Sequence[complex]) -> np.ndarray:
        return np.array([self.potential(z) for z in zs])

    def gradient(self, z, exclusion: float = 1e-3) -> Tuple[float, float]:
        """Field gradient at an interior point."""
        z = complex(z)
        for m, sub in enumerate(self.problem.subdomains):
            if point_in_polygon(sub.polygon, z):
                return grad_at(self.maps[m], self.trace(m), z, exclusion=exclusion,
                               rule=self.rule)
        raise DomainError(f"gradient requested at {z}, which is not interior to any subdomain")

    def node_potential(self, z: complex, tol: float = 1e-9) -> float:
        k = int(np.argmin(np.abs(self.nodes.z - z)))
        if abs(self.nodes.z[k] - z) > tol:
            raise KeyError(f"no node at {z}")
        return float(self.psi[k])


def _setup(problem, nodes, options, kw, refresh_choices):
    options = options or SolveOptions()
    for k, v in kw.items():
        if not hasattr(options, k):
            raise TypeError(f"unknown solver option {k!r}")
        setattr(options, k, v)
    if options.rule not in RULES:
        raise ValueError(f"unknown integration rule {options.rule!r}")
    if options.refresh not in refresh_choices:
        raise ValueError(f"refresh must be one of {refresh_choices}")
    if nodes is None:
        nodes = discretize(problem)
    tol = problem.sor_tol if options.tol is None else options.tol
    J = nodes.J
    cap = options.max_iter or problem.max_iter or 100 * max(J, 1)
    return options, nodes, tol, cap


def _finish(n, psi, xi, history, w_odd, w_even, options):
    if not (np.all(np.isfinite(psi)) and np.all(np.isfinite(xi))):
        raise NumericalFailureError(f"non-finite potentials at iteration {n + 1}")
    mx, sm = float(np.max(np.abs(xi))), float(np.sum(xi))
    history.append((n + 1, w_odd, w_even, mx, sm))
    if options.callback is not None:
        options.callback(n + 1, psi, xi)
    return mx, sm


def _converged(mx, sm, tol, J):
    return mx <= tol and abs(sm) <= tol * math.sqrt(J)


def _cap_error(cap, history):
    return NonConvergenceError(f"no convergence after {cap} iterations "
                               f"(max |xi| = {history[-1][3]:.3e})", history)


def solve(problem: ProblemSpec, nodes: Optional[NodeSet] = None,
          options: Optional[SolveOptions] = None, **kw) -> Solution:
    """Odd/even SOR with Chebyshev-accelerated relaxation factors."""
    options, nodes, tol, cap = _setup(problem, nodes, options, kw, ("iteration", "half-sweep"))
    J = nodes.J
    psi = np.zeros(J)
    if J == 0:
        return Solution(problem, nodes, psi, 0, 0.0, 0.0, [], options.rule, "chebyshev")
    op = ResidualOperator(nodes)
    sched = sor_schedule(max(J, 2))
    colors = [np.flatnonzero(nodes.color == c) for c in (0, 1)]
    history = []
    xi = np.zeros(J)
    for n in range(cap):
        w_odd, w_even = sched.omegas(n)
        probes = op.probe_sums(psi, options.rule)
        for half, (rows, w) in enumerate(zip(colors, (w_odd, w_even))):
            if len(rows) == 0:
                continue
            if half and options.refresh == "half-sweep":
                probes = op.probe_sums(psi, options.rule, rows)
            x = op.xi(psi, options.rule, rows, probes)
            xi[rows] = x
            psi[rows] += w * x / 4.0
        mx, sm = _finish(n, psi, xi, history, w_odd, w_even, options)
        if _converged(mx, sm, tol, J):
            return Solution(problem, nodes, psi, n + 1, mx, sm, history, options.rule,
                            "chebyshev")
    raise _cap_error(cap, history)


def solve_plain(problem: ProblemSpec, nodes: Optional[NodeSet] = None,
                options: Optional[SolveOptions] = None, **kw) -> Solution:
    """Sequential SOR sweeps in node order with the fixed factor omega_lim."""
    options, nodes, tol, cap = _setup(problem, nodes, options, kw, ("iteration", "node"))
    J = nodes.J
    psi = np.zeros(J)
    if J == 0:
        return Solution(problem, nodes, psi, 0, 0.0, 0.0, [], options.rule, "plain")
    op = ResidualOperator(nodes)
    w = sor_schedule(max(J, 2)).omega_lim
    history = []
    xi = np.zeros(J)
    nb_idx, nb_w, f0 = op.nb_idx, op.nb_w, op.f0
    per_node = options.refresh == "node"
    for n in range(cap):
        if not per_node:
            probes = op.probe_sums(psi, options.rule)
        for k in range(J):
            if per_node:
                pk = float(op.probe_sums(psi, options.rule, np.array([k]))[k])
            else:
                pk = probes[k]
            x = float(nb_w[k] @ psi[nb_idx[k]]) + f0[k] + pk - 4.0 * psi[k]
            xi[k] = x
            psi[k] += w * x / 4.0
        mx, sm = _finish(n, psi, xi, history, w, w, options)
        if _converged(mx, sm, tol, J):
            return Solution(problem, nodes, psi, n + 1, mx, sm, history, options.rule, "plain")
    raise _cap_error(cap, history)
