"""Polygons, boundary conditions and problem definitions.

A problem is a list of simply connected polygonal subdomains. Every side of
every polygon carries exactly one condition: a fixed potential (Dirichlet),
a homogeneous Neumann condition, or an interface to a neighbouring
subdomain. Slits are represented by traversing the slit twice, with a tip
vertex whose interior angle is 2*pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.constants import epsilon_0 as EPS0

from .errors import GeometryError, InconsistencyError

__all__ = [
    "EPS0",
    "Polygon",
    "Dirichlet",
    "Neumann",
    "Interface",
    "Subdomain",
    "ProblemSpec",
    "validate_polygon",
    "microstrip_fixture",
    "point_in_polygon",
    "distance_to_boundary",
]

ANGLE_SUM_TOL = 1e-9
_PT_TOL = 1e-12


@dataclass(frozen=True)
class Polygon:
    """Counterclockwise polygon with interior-angle fractions.

    ``alphas[k]`` is the interior angle at ``vertices[k]`` divided by pi.
    Side ``k`` runs from vertex ``k`` to vertex ``k + 1`` (cyclically).
    """

    vertices: np.ndarray
    alphas: np.ndarray

    @property
    def n(self) -> int:
        return len(self.vertices)

    def side(self, k: int) -> Tuple[complex, complex]:
        return complex(self.vertices[k]), complex(self.vertices[(k + 1) % self.n])

    def side_length(self, k: int) -> float:
        a, b = self.side(k)
        return abs(b - a)

    def side_lengths(self) -> np.ndarray:
        return np.abs(np.roll(self.vertices, -1) - self.vertices)

    def inward_normal(self, k: int) -> complex:
        a, b = self.side(k)
        u = (b - a) / abs(b - a)
        return 1j * u

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)

    @property
    def centroid(self) -> complex:
        v = self.vertices
        w = np.roll(v, -1)
        cross = (v.real * w.imag - w.real * v.imag)
        a = cross.sum() / 2.0
        cx = ((v.real + w.real) * cross).sum() / (6.0 * a)
        cy = ((v.imag + w.imag) * cross).sum() / (6.0 * a)
        return complex(cx, cy)

    def contains(self, z, boundary: bool = False, tol: float = 1e-12):
        return point_in_polygon(self, z, boundary=boundary, tol=tol)

    def on_boundary(self, z, tol: float = 1e-12):
        return distance_to_boundary(self, z) <= tol


# ---------------------------------------------------------------- conditions


@dataclass(frozen=True)
class Dirichlet:
    value: float

    kind = "dirichlet"


@dataclass(frozen=True)
class Neumann:
    gamma: float = 0.0

    kind = "neumann"


@dataclass(frozen=True)
class Interface:
    neighbor: int

    kind = "interface"


SideCondition = Union[Dirichlet, Neumann, Interface]


@dataclass(frozen=True)
class Subdomain:
    """One polygonal piece of the problem domain.

    ``steps`` maps side index to the node spacing used on that side; it must
    cover every Neumann and interface side.
    """

    polygon: Polygon
    conditions: Tuple[SideCondition, ...]
    eps: float = EPS0
    steps: Dict[int, float] = field(default_factory=dict)
    center: Optional[complex] = None
    name: str = ""

    def __post_init__(self):
        if len(self.conditions) != self.polygon.n:
            raise GeometryError(
                f"subdomain {self.name!r}: {len(self.conditions)} conditions "
                f"for {self.polygon.n} sides")
        if not self.eps > 0:
            raise GeometryError(f"subdomain {self.name!r}: permittivity must be positive")


@dataclass(frozen=True)
class ProblemSpec:
    subdomains: Tuple[Subdomain, ...]
    map_tol: float = 1e-9
    sor_tol: float = 1e-6
    max_iter: Optional[int] = None

    def __post_init__(self):
        _check_problem(self)

    @property
    def dirichlet_values(self) -> List[float]:
        return [c.value for s in self.subdomains for c in s.conditions
                if isinstance(c, Dirichlet)]

    def locate(self, z: complex, tol: float = 1e-12) -> Optional[int]:
        """Index of the subdomain containing ``z`` (closure), or None."""
        for m, sub in enumerate(self.subdomains):
            if point_in_polygon(sub.polygon, z, boundary=True, tol=tol):
                return m
        return None

    def junction_value(self, z: complex, tol: float = 1e-12) -> Optional[float]:
        """Dirichlet value carried by a boundary point, if any side through it is Dirichlet.

        Where several Dirichlet sides meet with different values the point is a
        jump; the smallest value is returned (the choice is immaterial for the
        boundary mean, which ignores single points).
        """
        values = []
        for sub in self.subdomains:
            poly = sub.polygon
            for k, cond in enumerate(sub.conditions):
                if not isinstance(cond, Dirichlet):
                    continue
                a, b = poly.side(k)
                if _point_segment_distance(z, a, b) <= tol:
                    values.append(cond.value)
        return min(values) if values else None


# ---------------------------------------------------------------- polygons


def _signed_area(v: np.ndarray) -> float:
    w = np.roll(v, -1)
    return 0.5 * float(np.sum(v.real * w.imag - w.real * v.imag))


def _turning_alphas(v: np.ndarray) -> np.ndarray:
    d_in = v - np.roll(v, 1)
    d_out = np.roll(v, -1) - v
    turn = np.angle(d_out / d_in)
    # a full reversal is an interior slit tip: interior angle 2*pi
    reversal = np.abs(np.abs(turn) - np.pi) < 1e-12
    turn = np.where(reversal, -np.pi, turn)
    return 1.0 - turn / np.pi


def _segments_conflict(a, b, c, d, tol=1e-12) -> bool:
    """True if segments ab and cd cross or one touches the other's interior."""
    def cross(u, v):
        return u.real * v.imag - u.imag * v.real

    r, s = b - a, d - c
    denom = cross(r, s)
    scale = max(abs(r), abs(s))
    if abs(denom) <= tol * scale * scale:
        # parallel; overlap only matters if collinear
        if abs(cross(c - a, r)) > tol * scale * scale:
            return False
        rr = abs(r) ** 2
        t0 = ((c - a) * np.conj(r)).real / rr
        t1 = ((d - a) * np.conj(r)).real / rr
        lo, hi = min(t0, t1), max(t0, t1)
        return hi > tol and lo < 1 - tol and (min(hi, 1) - max(lo, 0)) > tol
    t = cross(c - a, s) / denom
    u = cross(c - a, r) / denom
    inside_t = tol < t < 1 - tol
    inside_u = tol < u < 1 - tol
    on_t = -tol <= t <= 1 + tol
    on_u = -tol <= u <= 1 + tol
    return (inside_t and on_u) or (inside_u and on_t)


def validate_polygon(vertices: Sequence[complex]) -> Polygon:
    """Build a :class:`Polygon` from a vertex list.

    The orientation is normalised to counterclockwise. Raises
    :class:`GeometryError` for fewer than three vertices, repeated
    consecutive points or self-intersections, and
    :class:`InconsistencyError` when the interior angles do not sum to
    ``(n - 2) * pi``.
    """
    v = np.asarray([complex(p) for p in vertices], dtype=complex)
    n = len(v)
    if n < 3:
        raise GeometryError(f"polygon needs at least 3 vertices, got {n}")
    gaps = np.abs(np.roll(v, -1) - v)
    if np.any(gaps <= _PT_TOL * max(1.0, np.abs(v).max())):
        k = int(np.argmin(gaps))
        raise GeometryError(f"repeated consecutive vertex at index {k}: {v[k]}")
    if _signed_area(v) < 0:
        v = v[::-1].copy()
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            a, b = v[i], v[(i + 1) % n]
            c, d = v[j], v[(j + 1) % n]
            if _segments_conflict(a, b, c, d):
                raise GeometryError(f"sides {i} and {j} intersect")
    alphas = _turning_alphas(v)
    if np.any(alphas <= 0):
        raise GeometryError("zero interior angle (outward spike)")
    total = alphas.sum()
    if abs(total - (n - 2)) > ANGLE_SUM_TOL:
        raise InconsistencyError(f"interior angles sum to {total}*pi, expected {n - 2}*pi")
    return Polygon(vertices=v, alphas=alphas)


def _point_segment_distance(z, a, b):
    z = np.asarray(z, dtype=complex)
    ab = b - a
    t = np.clip(((z - a) * np.conj(ab)).real / (abs(ab) ** 2), 0.0, 1.0)
    return np.abs(z - (a + t * ab))


def distance_to_boundary(poly: Polygon, z):
    z = np.asarray(z, dtype=complex)
    d = np.full(z.shape, np.inf)
    for k in range(poly.n):
        a, b = poly.side(k)
        d = np.minimum(d, _point_segment_distance(z, a, b))
    return d


def point_in_polygon(poly: Polygon, z, boundary: bool = False, tol: float = 1e-12):
    """Winding-number containment test; ``boundary`` decides boundary points."""
    z = np.asarray(z, dtype=complex)
    v = poly.vertices
    w = np.roll(v, -1)
    zz = z[..., None]
    # crossing number on a horizontal ray
    cond = (v.imag <= zz.imag) != (w.imag <= zz.imag)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = v.real + (zz.imag - v.imag) * (w.real - v.real) / (w.imag - v.imag)
    inside = (np.sum(cond & (zz.real < xint), axis=-1) % 2) == 1
    on = distance_to_boundary(poly, z) <= tol
    result = np.where(on, boundary, inside)
    return bool(result) if result.ndim == 0 else result


# ---------------------------------------------------------------- problems


def _check_problem(problem: ProblemSpec) -> None:
    subs = problem.subdomains
    if not subs:
        raise GeometryError("problem has no subdomains")
    for m, sub in enumerate(subs):
        for k, cond in enumerate(sub.conditions):
            if isinstance(cond, Neumann) and cond.gamma != 0.0:
                raise GeometryError(
                    f"subdomain {m} side {k}: only homogeneous Neumann conditions are supported")
            if isinstance(cond, (Neumann, Interface)):
                step = sub.steps.get(k)
                if step is None or not step > 0:
                    raise GeometryError(f"subdomain {m} side {k}: missing positive step")
            if isinstance(cond, Interface):
                nb = cond.neighbor
                if not (0 <= nb < len(subs)) or nb == m:
                    raise GeometryError(f"subdomain {m} side {k}: bad neighbor {nb}")
                a, b = sub.polygon.side(k)
                matches = [j for j, c in enumerate(subs[nb].conditions)
                           if isinstance(c, Interface) and c.neighbor == m
                           and abs(subs[nb].polygon.side(j)[0] - b) < 1e-12
                           and abs(subs[nb].polygon.side(j)[1] - a) < 1e-12]
                if len(matches) != 1:
                    raise GeometryError(
                        f"subdomain {m} side {k}: interface has no reversed twin in subdomain {nb}")


def interface_pairs(problem: ProblemSpec) -> List[Tuple[int, int, int, int]]:
    """Unique interface sides as ``(m, k, n, j)``: side k of m is side j of n reversed."""
    out = []
    for m, sub in enumerate(problem.subdomains):
        for k, cond in enumerate(sub.conditions):
            if isinstance(cond, Interface) and cond.neighbor > m:
                nb = problem.subdomains[cond.neighbor]
                a, b = sub.polygon.side(k)
                for j, c in enumerate(nb.conditions):
                    if isinstance(c, Interface) and c.neighbor == m:
                        p, q = nb.polygon.side(j)
                        if abs(p - b) < 1e-12 and abs(q - a) < 1e-12:
                            out.append((m, k, cond.neighbor, j))
    return out


def _insert_point(verts: List[complex], conds: List, z: complex) -> int:
    """Return the vertex index of ``z``, splitting a side if needed."""
    hits = [i for i, v in enumerate(verts) if abs(v - z) < 1e-12]
    if len(hits) == 1:
        return hits[0]
    if len(hits) > 1:
        raise GeometryError(f"interface endpoint {z} is ambiguous (repeated vertex)")
    n = len(verts)
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        if _point_segment_distance(z, a, b) < 1e-12:
            verts.insert(i + 1, z)
            conds.insert(i + 1, conds[i])
            return i + 1
    raise GeometryError(f"interface endpoint {z} is not on the boundary")


def split_polygon(vertices: Sequence[complex], conditions: Sequence, p: complex, q: complex):
    """Split a polygon along the chord ``p -> q``.

    Returns ``(first, second)`` where each item is ``(vertices, conditions,
    chord_side_index)``; the chord side gets a placeholder condition of None.
    """
    verts = list(vertices)
    conds = list(conditions)
    ia = _insert_point(verts, conds, p)
    ib = _insert_point(verts, conds, q)
    ia = [i for i, v in enumerate(verts) if abs(v - p) < 1e-12][0]
    if ia == ib:
        raise GeometryError("interface endpoints coincide")
    n = len(verts)
    a, b = min(ia, ib), max(ia, ib)
    if b - a == 1 or (a == 0 and b == n - 1):
        raise GeometryError("interface coincides with an existing side")
    first_v = verts[a:b + 1]
    first_c = conds[a:b] + [None]
    second_v = verts[b:] + verts[:a + 1]
    second_c = conds[b:] + conds[:a] + [None]
    poly = validate_polygon(verts)
    mid = 0.5 * (p + q)
    if not point_in_polygon(poly, mid) or any(
            _segments_conflict(p, q, verts[i], verts[(i + 1) % n]) for i in range(n)):
        raise GeometryError("interface does not run through the interior")
    return (first_v, first_c, len(first_v) - 1), (second_v, second_c, len(second_v) - 1)


def microstrip_fixture(W: float = 2.0, H: float = 4.0, h: float = 1.5, x_end: float = 1.0,
                       interface=None, eps_a: float = EPS0, eps_b: float = EPS0,
                       step: float = 0.05, side_steps: Optional[Dict[str, float]] = None,
                       map_tol: float = 1e-9, sor_tol: float = 1e-6,
                       strip_value: float = 1.0, shield_value: float = 0.0) -> ProblemSpec:
    """Half of a shielded thin microstrip, cut along its symmetry line.

    The rectangle ``[0, W] x [0, H]`` has the shield (left, top and bottom
    walls) at ``shield_value`` and a zero-thickness strip at height ``h``
    running from ``x = x_end`` to the right wall at ``strip_value``. The
    right wall is the symmetry line (homogeneous Neumann).

    ``interface`` is None for a single subdomain, ``"diagonal"`` for the
    chord from ``(x_end/2, 0)`` on the bottom wall to the strip tip, or a pair of
    boundary points. The upper piece gets ``eps_a`` and the lower one
    ``eps_b``. ``side_steps`` may override ``step`` per Neumann side with
    keys ``"upper_wall"``, ``"lower_wall"`` and ``"interface"``.
    """
    if not (0 < x_end < W):
        raise GeometryError(f"strip end x_end={x_end} must lie strictly inside (0, {W})")
    if not (0 < h < H):
        raise GeometryError(f"strip height h={h} must lie strictly inside (0, {H})")
    steps = {"upper_wall": step, "lower_wall": step, "interface": step}
    steps.update(side_steps or {})

    verts = [0j, complex(W, 0), complex(W, h), complex(x_end, h), complex(W, h),
             complex(W, H), complex(0, H)]
    walls = {1: "lower_wall", 4: "upper_wall"}
    conds = [Dirichlet(shield_value), Neumann(), Dirichlet(strip_value), Dirichlet(strip_value),
             Neumann(), Dirichlet(shield_value), Dirichlet(shield_value)]
    labels = [None, "lower_wall", None, None, "upper_wall", None, None]

    if interface is None:
        poly = validate_polygon(verts)
        sub = Subdomain(polygon=poly, conditions=tuple(conds), eps=eps_a,
                        steps={k: steps[v] for k, v in walls.items()}, name="P")
        return ProblemSpec(subdomains=(sub,), map_tol=map_tol, sor_tol=sor_tol)

    if isinstance(interface, str):
        if interface != "diagonal":
            raise GeometryError(f"unknown interface preset {interface!r}")
        p, q = complex(x_end / 2, 0), complex(x_end, h)
    else:
        try:
            (px, py), (qx, qy) = interface
        except (TypeError, ValueError):
            raise GeometryError("interface must be 'diagonal' or two boundary points") from None
        p, q = complex(px, py), complex(qx, qy)

    tagged = [(c, lab) for c, lab in zip(conds, labels)]
    pieces = split_polygon(verts, tagged, p, q)
    built = []
    for pv, pc, chord in pieces:
        poly = validate_polygon(pv)
        if abs(poly.vertices[0] - pv[0]) > 0:  # orientation got reversed
            raise GeometryError("split produced a clockwise piece")
        built.append((poly, pc, chord))
    # upper piece is A
    built.sort(key=lambda b: -b[0].centroid.imag)
    subs = []
    for m, (poly, pc, chord) in enumerate(built):
        cl, sd = [], {}
        for k, item in enumerate(pc):
            if item is None:
                cl.append(Interface(neighbor=1 - m))
                sd[k] = steps["interface"]
            else:
                c, lab = item
                cl.append(c)
                if lab is not None:
                    sd[k] = steps[lab]
        subs.append(Subdomain(polygon=poly, conditions=tuple(cl), eps=(eps_a, eps_b)[m],
                              steps=sd, name="AB"[m]))
    return ProblemSpec(subdomains=tuple(subs), map_tol=map_tol, sor_tol=sor_tol)
