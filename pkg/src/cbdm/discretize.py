"""Nodes, probes and finite-difference stencils on Neumann sides and interfaces.

Only Neumann sides and interfaces are discretised. Each node ``z_k`` gets
neighbours along its side and one probe point per adjacent subdomain,
offset by the node step along the inward normal. All other potentials are
obtained by evaluating boundary traces on the disk.

Every quantity the solver needs is kept as an affine function of the node
potential vector: ``value = sum(w * psi[idx]) + const``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DiscretizationError, DomainError
from .geometry import Dirichlet, Interface, Neumann, ProblemSpec, interface_pairs, point_in_polygon
from .scmap import DiskMap, solve_parameters

__all__ = ["Affine", "Probe", "NodeSet", "TraceLayout", "discretize", "interface_coeffs",
           "residual", "nodes_on_side", "solve_maps"]


@dataclass(frozen=True)
class Affine:
    idx: Tuple[int, ...] = ()
    w: Tuple[float, ...] = ()
    const: float = 0.0

    def __call__(self, psi) -> float:
        return float(sum(wi * psi[i] for i, wi in zip(self.idx, self.w)) + self.const)

    @classmethod
    def node(cls, k: int) -> "Affine":
        return cls((k,), (1.0,), 0.0)

    @classmethod
    def fixed(cls, v: float) -> "Affine":
        return cls((), (), float(v))


@dataclass(frozen=True)
class Probe:
    node: int
    subdomain: int
    z: complex
    t: complex
    coef: float
    value: Optional[float] = None  # set when the probe sits on a Dirichlet side


@dataclass
class TraceLayout:
    """Sample angles of one subdomain trace and where each sample value comes from."""

    subdomain: int
    theta: np.ndarray
    sources: List[Affine]

    def matrix(self, J: int):
        """Dense ``(S, s0)`` with ``samples = S @ psi + s0``."""
        M = len(self.sources)
        S = np.zeros((M, J))
        s0 = np.zeros(M)
        for r, a in enumerate(self.sources):
            for i, w in zip(a.idx, a.w):
                S[r, i] += w
            s0[r] = a.const
        return S, s0


@dataclass
class NodeSet:
    problem: ProblemSpec
    maps: List[DiskMap]
    z: np.ndarray
    kind: List[str]
    step: np.ndarray
    color: np.ndarray
    prev: List[Affine]
    next: List[Affine]
    probes: List[Probe]
    images: List[Dict[int, complex]]
    side_nodes: Dict[Tuple[int, int], List[int]]
    layouts: List[TraceLayout]
    corners: Dict[Tuple[int, int], Affine] = field(default_factory=dict)

    @property
    def J(self) -> int:
        return len(self.z)

    def probes_of(self, k: int) -> List[Probe]:
        return [p for p in self.probes if p.node == k]


def interface_coeffs(eps_a: float, eps_b: float) -> Tuple[float, float]:
    """Flux-matching weights of the two probe values at an interface node.

    ``c_a = 2 eps_a/(eps_a + eps_b)``; the pair always sums to 2 and is
    (1, 1) for equal media.
    """
    if not (eps_a > 0 and eps_b > 0):
        raise DomainError("permittivities must be positive")
    s = eps_a + eps_b
    return 2.0 * eps_a / s, 2.0 * eps_b / s


def residual(prev: float, nxt: float, probe_values: Sequence[float], coefs: Sequence[float],
             center: float) -> float:
    """FD residual xi = psi_{k-1} + psi_{k+1} + sum(c * psi_i) - 4 psi_k.

    An outer Neumann node has a single probe with coefficient 2.
    """
    return prev + nxt + sum(c * v for c, v in zip(coefs, probe_values)) - 4.0 * center


def nodes_on_side(a: complex, b: complex, step: float) -> np.ndarray:
    """Interior node positions from ``a`` towards ``b``; the last gap absorbs the remainder."""
    L = abs(b - a)
    if not step > 0:
        raise DiscretizationError("step must be positive")
    count = int(math.floor(L / step + 1e-9)) - 1
    if count < 1:
        raise DiscretizationError(f"step {step} too large for a side of length {L}")
    u = (b - a) / L
    return a + u * step * np.arange(1, count + 1)


def solve_maps(problem: ProblemSpec) -> List[DiskMap]:
    return [solve_parameters(sub.polygon, problem.map_tol, center=sub.center)
            for sub in problem.subdomains]


def _unwrapped_prevertex_angles(dmap: DiskMap) -> np.ndarray:
    th = np.angle(dmap.prevertices)
    th = np.unwrap(th)
    th = th - 2 * np.pi * np.floor(th[0] / (2 * np.pi))
    return th


def discretize(problem: ProblemSpec, maps: Optional[List[DiskMap]] = None) -> NodeSet:
    """Place nodes and probes on every Neumann side and interface."""
    if maps is None:
        maps = solve_maps(problem)
    subs = problem.subdomains

    z_list: List[complex] = []
    kind: List[str] = []
    steps: List[float] = []
    color: List[int] = []
    owners: List[List[Tuple[int, int]]] = []
    side_nodes: Dict[Tuple[int, int], List[int]] = {}

    def add_side(m, k, kd):
        a, b = subs[m].polygon.side(k)
        h = subs[m].steps[k]
        try:
            pts = nodes_on_side(a, b, h)
        except DiscretizationError as exc:
            raise DiscretizationError(f"subdomain {m} side {k}: {exc}") from None
        ids = []
        for j, p in enumerate(pts):
            ids.append(len(z_list))
            z_list.append(complex(p))
            kind.append(kd)
            steps.append(h)
            color.append(j % 2)
            owners.append([(m, k)])
        side_nodes[(m, k)] = ids
        return ids

    for m, sub in enumerate(subs):
        for k, cond in enumerate(sub.conditions):
            if isinstance(cond, Neumann):
                add_side(m, k, "neumann")
    for m, k, n, j in interface_pairs(problem):
        ids = add_side(m, k, "interface")
        side_nodes[(n, j)] = ids[::-1]
        for i in ids:
            owners[i].append((n, j))

    J = len(z_list)
    z = np.array(z_list, dtype=complex)

    # ---- corner values: Dirichlet datum, else interpolated across the corner
    corners: Dict[Tuple[int, int], Affine] = {}

    def corner_value(m: int, v: int) -> Affine:
        key = (m, v)
        if key in corners:
            return corners[key]
        poly = subs[m].polygon
        P = complex(poly.vertices[v])
        val = problem.junction_value(P)
        if val is not None:
            aff = Affine.fixed(val)
        else:
            before = side_nodes.get((m, (v - 1) % poly.n), [])
            after = side_nodes.get((m, v), [])
            if not before or not after:
                raise DiscretizationError(
                    f"subdomain {m} vertex {v}: corner between Neumann sides without nodes")
            i0, i1 = before[-1], after[0]
            d0, d1 = abs(z[i0] - P), abs(z[i1] - P)
            aff = Affine((i0, i1), (d1 / (d0 + d1), d0 / (d0 + d1)), 0.0)
        corners[key] = aff
        return aff

    # ---- FD neighbours along each side (taken from the side's first owner)
    prev: List[Affine] = [Affine()] * J
    nxt: List[Affine] = [Affine()] * J
    for (m, k), ids in side_nodes.items():
        if owners[ids[0]][0] != (m, k):
            continue
        n_v = subs[m].polygon.n
        for j, i in enumerate(ids):
            prev[i] = Affine.node(ids[j - 1]) if j > 0 else corner_value(m, k)
            nxt[i] = Affine.node(ids[j + 1]) if j < len(ids) - 1 else corner_value(m, (k + 1) % n_v)

    # ---- boundary images of the nodes
    images: List[Dict[int, complex]] = [dict() for _ in range(J)]
    for (m, k), ids in side_nodes.items():
        for i in ids:
            images[i][m] = maps[m].boundary_inverse(z[i], k)

    # ---- probes
    probes: List[Probe] = []
    for i in range(J):
        own = owners[i]
        if kind[i] == "interface":
            (m, k), (n, j) = own
            ca, cb = interface_coeffs(subs[m].eps, subs[n].eps)
            targets = [(m, k, ca), (n, j, cb)]
        else:
            (m, k), = own
            targets = [(m, k, 2.0)]
        for m, k, c in targets:
            poly = subs[m].polygon
            zi = complex(z[i] + steps[i] * poly.inward_normal(k))
            if point_in_polygon(poly, zi):
                ti = maps[m].inverse(zi)
                probes.append(Probe(node=i, subdomain=m, z=zi, t=complex(ti), coef=c))
                continue
            # a probe landing on a Dirichlet side reads the datum directly
            side = maps[m]._locate_side(zi, 1e-12)
            cond = subs[m].conditions[side] if side is not None else None
            if not isinstance(cond, Dirichlet):
                raise DiscretizationError(
                    f"probe of node {i} at {zi} falls outside subdomain {m}")
            ti = maps[m].boundary_inverse(zi, side)
            probes.append(Probe(node=i, subdomain=m, z=zi, t=complex(ti), coef=c,
                                value=float(cond.value)))

    # ---- trace layouts
    layouts = []
    for m, sub in enumerate(subs):
        poly = sub.polygon
        th_v = _unwrapped_prevertex_angles(maps[m])
        th_v = np.concatenate([th_v, [th_v[0] + 2 * np.pi]])
        samples: List[Tuple[float, Affine]] = []
        for k, cond in enumerate(sub.conditions):
            ta, tb = th_v[k], th_v[k + 1]
            if isinstance(cond, Dirichlet):
                samples.append((ta, Affine.fixed(cond.value)))
                samples.append((tb, Affine.fixed(cond.value)))
                continue
            samples.append((ta, corner_value(m, k)))
            for i in side_nodes[(m, k)]:
                th = float(np.angle(images[i][m]))
                th = ta + np.mod(th - ta, 2 * np.pi)
                if not (ta < th < tb):
                    raise DiscretizationError(f"node {i} image falls outside its side's arc")
                samples.append((th, Affine.node(i)))
            samples.append((tb, corner_value(m, (k + 1) % poly.n)))
        merged: List[Tuple[float, Affine]] = []
        for th, a in samples:
            if merged and merged[-1][0] == th and merged[-1][1] == a:
                continue
            merged.append((th, a))
        if len(merged) > 1 and merged[-1][1] == merged[0][1] and \
                abs(merged[-1][0] - merged[0][0] - 2 * np.pi) < 1e-14:
            merged.pop()
        layouts.append(TraceLayout(subdomain=m, theta=np.array([s[0] for s in merged]),
                                   sources=[s[1] for s in merged]))

    return NodeSet(problem=problem, maps=maps, z=z, kind=kind, step=np.array(steps),
                   color=np.array(color, dtype=int), prev=prev, next=nxt, probes=probes,
                   images=images, side_nodes=side_nodes, layouts=layouts, corners=corners)
