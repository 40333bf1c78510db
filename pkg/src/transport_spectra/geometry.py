"""Convex spatial domains and chord exit times.

Everything downstream (attenuation integrals, streaming, resolvents,
spectra) is built on two primitives computed here: the backward and
forward exit times ``t_minus``, ``t_plus`` of the ray ``x + t v`` through
a convex domain, and quadrature nodes on the domain boundary.

Exit times are computed in closed form per shape (quadratic formula for
the disk, halfplane clipping for intervals and polygons).  A generic
bisection ray-marcher is provided as an independent cross-check oracle;
it never feeds production paths.

Conventions
-----------
Points and velocities are numpy arrays of shape ``(dim,)`` for scalar
queries and ``(n, dim)`` for batch queries.  A point is accepted as
"inside" the closure up to an absolute tolerance of ``1e-12`` times the
domain diameter; grazing directions (``v`` tangent to the boundary at
``x``) are resolved by continuity from the interior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import OutsideDomain, ZeroVelocity

#: Relative tolerance (times the diameter) for "x lies on the boundary".
BOUNDARY_RTOL = 1e-12


@dataclass(frozen=True)
class PhasePoint:
    """A position-velocity pair ``(x, v)``.

    Parameters
    ----------
    x : ndarray, shape (dim,)
        Position, inside the closure of the domain.
    v : ndarray, shape (dim,)
        Velocity. Must be nonzero wherever exit times are requested.
    """

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))

    def reversed(self) -> "PhasePoint":
        """The same position with the velocity flipped."""
        return PhasePoint(self.x, -self.v)


@dataclass(frozen=True)
class ExitTimes:
    """Backward and forward exit times of a ray through the domain.

    ``t_minus`` is the time to leave the domain moving backward along
    ``v`` and ``t_plus`` the time moving forward; both are nonnegative
    and their sum ``tau`` is the full chord traversal time.
    """

    t_minus: float
    t_plus: float

    @property
    def tau(self) -> float:
        return self.t_minus + self.t_plus


@dataclass(frozen=True)
class BoundaryNode:
    """A boundary quadrature node with unit outward normal and weight."""

    x: np.ndarray
    normal: np.ndarray
    weight: float


class SpatialDomain:
    """Base class for bounded convex domains in one or two dimensions.

    Subclasses provide vectorized membership tests and closed-form exit
    times. All instances are immutable after construction and safe for
    unlimited concurrent readers.
    """

    dim: int
    diameter: float

    @property
    def boundary_tol(self) -> float:
        return BOUNDARY_RTOL * self.diameter

    # -- interface -------------------------------------------------------

    def contains(self, x: np.ndarray, tol: float | None = None) -> np.ndarray:
        """Boolean membership of points in the closure (up to ``tol``)."""
        raise NotImplementedError

    def exit_times_batch(self, x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized ``(t_minus, t_plus)`` for rows of ``x`` and ``v``."""
        raise NotImplementedError

    def boundary_quadrature(self, resolution: int) -> list[BoundaryNode]:
        """Nodes covering the boundary whose weights sum to its measure."""
        raise NotImplementedError

    def clamp(self, x: np.ndarray) -> np.ndarray:
        """Project points that strayed outside by roundoff back onto the closure."""
        raise NotImplementedError

    def outward_normal(self, x: np.ndarray) -> np.ndarray:
        """Unit outward normals at boundary points (rows of ``x``)."""
        raise NotImplementedError

    # -- shared helpers ---------------------------------------------------

    def _check_batch(self, x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if x.shape[1] != self.dim or v.shape[1] != self.dim:
            raise OutsideDomain(f"expected points of dimension {self.dim}")
        speed = np.linalg.norm(v, axis=1)
        if np.any(speed == 0.0):
            raise ZeroVelocity("exit times are undefined for v = 0")
        inside = self.contains(x, tol=self.boundary_tol)
        if not np.all(inside):
            bad = x[~inside][0]
            raise OutsideDomain(f"point {bad} lies outside the domain closure")
        return x, v


class Interval(SpatialDomain):
    """The open interval ``(a, b)`` on the real line."""

    dim = 1

    def __init__(self, a: float, b: float) -> None:
        if not b > a:
            raise ValueError("interval requires b > a")
        self.a = float(a)
        self.b = float(b)
        self.diameter = self.b - self.a

    def contains(self, x: np.ndarray, tol: float | None = None) -> np.ndarray:
        tol = self.boundary_tol if tol is None else tol
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return (x[:, 0] >= self.a - tol) & (x[:, 0] <= self.b + tol)

    def exit_times_batch(self, x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, v = self._check_batch(x, v)
        xi, vi = x[:, 0], v[:, 0]
        pos = vi > 0
        t_plus = np.where(pos, (self.b - xi), (xi - self.a)) / np.abs(vi)
        t_minus = np.where(pos, (xi - self.a), (self.b - xi)) / np.abs(vi)
        return np.maximum(t_minus, 0.0), np.maximum(t_plus, 0.0)

    def boundary_quadrature(self, resolution: int) -> list[BoundaryNode]:
        # The boundary is two points regardless of the requested resolution;
        # the counting measure assigns weight one to each endpoint.
        del resolution
        return [
            BoundaryNode(np.array([self.a]), np.array([-1.0]), 1.0),
            BoundaryNode(np.array([self.b]), np.array([1.0]), 1.0),
        ]

    def clamp(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.clip(x, self.a, self.b)

    def outward_normal(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mid = 0.5 * (self.a + self.b)
        return np.where(x[:, :1] >= mid, 1.0, -1.0)


class Disk(SpatialDomain):
    """An open disk in the plane given by center and radius."""

    dim = 2

    def __init__(self, center: Sequence[float] = (0.0, 0.0), radius: float = 1.0) -> None:
        if not radius > 0:
            raise ValueError("disk requires radius > 0")
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.diameter = 2.0 * self.radius

    def contains(self, x: np.ndarray, tol: float | None = None) -> np.ndarray:
        tol = self.boundary_tol if tol is None else tol
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x - self.center, axis=1) <= self.radius + tol

    def exit_times_batch(self, x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, v = self._check_batch(x, v)
        w = x - self.center
        vv = np.einsum("ij,ij->i", v, v)
        vw = np.einsum("ij,ij->i", v, w)
        ww = np.einsum("ij,ij->i", w, w)
        # Roots of |w + t v|^2 = R^2; the discriminant is nonnegative for
        # points in the closure, up to roundoff which we clip away.
        disc = vw * vw + vv * (self.radius**2 - ww)
        root = np.sqrt(np.maximum(disc, 0.0))
        t_plus = (-vw + root) / vv
        t_minus = (vw + root) / vv
        return np.maximum(t_minus, 0.0), np.maximum(t_plus, 0.0)

    def boundary_quadrature(self, resolution: int) -> list[BoundaryNode]:
        if resolution < 2:
            raise ValueError("resolution must be at least 2")
        step = 2.0 * np.pi / resolution
        angles = (np.arange(resolution) + 0.5) * step
        normals = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        weight = self.radius * step
        return [
            BoundaryNode(self.center + self.radius * n, n, weight) for n in normals
        ]

    def clamp(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        w = x - self.center
        r = np.linalg.norm(w, axis=1)
        scale = np.where(r > self.radius, self.radius / np.maximum(r, 1e-300), 1.0)
        return self.center + w * scale[:, None]

    def outward_normal(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        w = x - self.center
        return w / np.maximum(np.linalg.norm(w, axis=1), 1e-300)[:, None]


class ConvexPolygon(SpatialDomain):
    """A strictly convex polygon with counterclockwise vertices.

    The boundary is polygonal rather than smooth; corner effects live on
    measure-zero sets and are excluded from quadrature nodes.
    """

    dim = 2

    def __init__(self, vertices: Sequence[Sequence[float]]) -> None:
        verts = np.asarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
            raise ValueError("polygon requires at least 3 planar vertices")
        edges = np.roll(verts, -1, axis=0) - verts
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(edges, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise ValueError("vertices must describe a strictly convex counterclockwise polygon")
        self.vertices = verts
        lengths = np.linalg.norm(edges, axis=1)
        # Outward normal of a counterclockwise edge (dx, dy) is (dy, -dx).
        self._edge_normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1) / lengths[:, None]
        self._edge_lengths = lengths
        diffs = verts[:, None, :] - verts[None, :, :]
        self.diameter = float(np.sqrt((diffs**2).sum(axis=2).max()))

    def _edge_gaps(self, x: np.ndarray) -> np.ndarray:
        """Signed distances to each edge halfplane (negative inside)."""
        return np.einsum("ped,ed->pe", x[:, None, :] - self.vertices[None, :, :], self._edge_normals)

    def contains(self, x: np.ndarray, tol: float | None = None) -> np.ndarray:
        tol = self.boundary_tol if tol is None else tol
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all(self._edge_gaps(x) <= tol, axis=1)

    def exit_times_batch(self, x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x, v = self._check_batch(x, v)
        gaps = self._edge_gaps(x)
        speed = np.einsum("pd,ed->pe", v, self._edge_normals)
        # The ray stays inside while gap + t * speed <= 0 for every edge.
        with np.errstate(divide="ignore", invalid="ignore"):
            crossing = -gaps / speed
        upper = np.where(speed > 0, crossing, np.inf).min(axis=1)
        lower = np.where(speed < 0, crossing, -np.inf).max(axis=1)
        return np.maximum(-lower, 0.0), np.maximum(upper, 0.0)

    def boundary_quadrature(self, resolution: int) -> list[BoundaryNode]:
        if resolution < 2:
            raise ValueError("resolution must be at least 2")
        perimeter = self._edge_lengths.sum()
        counts = np.maximum(1, np.round(resolution * self._edge_lengths / perimeter).astype(int))
        nodes: list[BoundaryNode] = []
        for start, edge_len, normal, count in zip(
            self.vertices, self._edge_lengths, self._edge_normals,
            counts, strict=True,
        ):
            direction = np.array([-normal[1], normal[0]])
            positions = (np.arange(count) + 0.5) * (edge_len / count)
            for s in positions:
                nodes.append(BoundaryNode(start + s * direction, normal, edge_len / count))
        return nodes

    def clamp(self, x: np.ndarray) -> np.ndarray:
        x = np.array(np.atleast_2d(np.asarray(x, dtype=float)))
        gaps = self._edge_gaps(x)
        for e in range(self.vertices.shape[0]):
            over = gaps[:, e] > 0
            if np.any(over):
                x[over] -= gaps[over, e][:, None] * self._edge_normals[e]
                gaps = self._edge_gaps(x)
        return x

    def outward_normal(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        nearest = np.argmax(self._edge_gaps(x), axis=1)
        return self._edge_normals[nearest]


def exit_times(domain: SpatialDomain, p: PhasePoint) -> ExitTimes:
    """Backward/forward exit times of the ray through ``p``.

    Parameters
    ----------
    domain : SpatialDomain
    p : PhasePoint
        Position in the closure of the domain, nonzero velocity.

    Returns
    -------
    ExitTimes
        ``t_minus``, ``t_plus`` with ``tau = t_minus + t_plus``.

    Raises
    ------
    ZeroVelocity
        If ``|v| = 0``.
    OutsideDomain
        If ``x`` is not in the closure of the domain.
    """
    tm, tp = domain.exit_times_batch(p.x[None, :], p.v[None, :])
    return ExitTimes(float(tm[0]), float(tp[0]))


def boundary_quadrature(domain: SpatialDomain, resolution: int) -> list[BoundaryNode]:
    """Quadrature nodes on the domain boundary; see the domain classes."""
    return domain.boundary_quadrature(resolution)


def exit_times_bisection(
    domain: SpatialDomain,
    p: PhasePoint,
    tol: float = 1e-13,
    membership_tol: float | None = None,
) -> ExitTimes:
    """Bisection ray-marcher used as an independent oracle for exit times.

    Brackets the boundary crossing between the last time known inside and
    the first time known outside, then bisects to ``tol``. Intentionally
    shares no code with the closed-form paths.
    """
    tm, tp = exit_times_bisection_batch(
        domain, p.x[None, :], p.v[None, :], tol=tol, membership_tol=membership_tol
    )
    return ExitTimes(float(tm[0]), float(tp[0]))


def exit_times_bisection_batch(
    domain: SpatialDomain,
    x: np.ndarray,
    v: np.ndarray,
    tol: float = 1e-13,
    membership_tol: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized bisection oracle; see ``exit_times_bisection``.

    ``membership_tol`` is handed to the membership probe. The default
    closure tolerance keeps start points sitting exactly on the boundary
    from being misclassified, but chords nearly tangent to the boundary
    amplify that spatial slack into the recovered times; comparisons
    that start strictly inside should pass ``0.0`` instead.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    speed = np.linalg.norm(v, axis=1)
    if np.any(speed == 0.0):
        raise ZeroVelocity("exit times are undefined for v = 0")

    def march(sign: float) -> np.ndarray:
        lo = np.zeros(x.shape[0])
        hi = 1.125 * domain.diameter / speed
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            inside = domain.contains(x + sign * mid[:, None] * v, tol=membership_tol)
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
            if np.all(hi - lo < tol):
                break
        return 0.5 * (lo + hi)

    return march(-1.0), march(+1.0)
