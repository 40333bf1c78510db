"""Collision frequencies, chord integrals, phase-space grids and kernels.

This module holds the scalar and discretized machinery that the
operator modules compose: the absorption frequency along chords and its
line integral, separable velocity-redistribution kernels, and the grid
containers with quadrature weights used for norms and grid sweeps.

Units: the collision frequency is an inverse time; positions carry
length units and velocities length over time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import GridMismatch, NumericalFailure
from .geometry import Disk, Interval, PhasePoint, SpatialDomain

ArrayFunc = Callable[[np.ndarray], np.ndarray]
PhaseFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]

#: Default absolute tolerance of the adaptive chord quadrature.
CHORD_TOL = 1e-10
#: Maximum bisection depth of the adaptive chord quadrature.
CHORD_MAX_DEPTH = 40


# ---------------------------------------------------------------------------
# collision frequency
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollisionFrequency:
    """Bounded nonnegative absorption frequency, even in the velocity.

    Three variants are supported. ``constant`` is a single number,
    ``speed`` depends on the velocity through its Euclidean norm only
    (hence even by construction), and ``general`` wraps an arbitrary
    ``f(x, v)`` which is symmetrized to ``(f(x, v) + f(x, -v)) / 2`` so
    evenness holds by construction rather than by trust.

    Attributes
    ----------
    kind : str
        One of ``"constant"``, ``"speed"``, ``"general"``.
    bound : float
        Essential supremum of the frequency over phase space.
    """

    kind: str
    bound: float
    value: float = 0.0
    profile: ArrayFunc | None = None
    func: PhaseFunc | None = None

    @classmethod
    def constant(cls, sigma: float) -> "CollisionFrequency":
        if sigma < 0:
            raise ValueError("collision frequency must be nonnegative")
        return cls(kind="constant", bound=float(sigma), value=float(sigma))

    @classmethod
    def from_speed_profile(cls, profile: ArrayFunc, bound: float) -> "CollisionFrequency":
        """Frequency depending on the velocity only.

        ``profile`` receives a one-dimensional array of speeds ``|v|``.
        """
        return cls(kind="speed", bound=float(bound), profile=profile)

    @classmethod
    def general(cls, func: PhaseFunc, bound: float) -> "CollisionFrequency":
        return cls(kind="general", bound=float(bound), func=func)

    @property
    def is_speed_homogeneous(self) -> bool:
        """True when the frequency does not depend on the position."""
        return self.kind in ("constant", "speed")

    def evaluate(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Frequency values at rows of ``x`` and ``v``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if self.kind == "constant":
            return np.full(max(x.shape[0], v.shape[0]), self.value)
        if self.kind == "speed":
            speeds = np.linalg.norm(v, axis=1)
            return np.asarray(self.profile(speeds), dtype=float)
        vals = 0.5 * (np.asarray(self.func(x, v)) + np.asarray(self.func(x, -v)))
        return np.asarray(vals, dtype=float)

    def speed_value(self, v: np.ndarray) -> float:
        """Scalar value for a speed-homogeneous frequency at velocity ``v``."""
        if self.kind == "constant":
            return self.value
        if self.kind == "speed":
            speed = np.linalg.norm(np.atleast_2d(np.asarray(v, dtype=float)), axis=1)
            return float(np.asarray(self.profile(speed[:1]))[0])
        raise NumericalFailure("frequency depends on the position")


# ---------------------------------------------------------------------------
# chord quadrature
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _gl_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def _gl_panel(f: Callable[[np.ndarray], np.ndarray], s0: float, s1: float, order: int) -> complex:
    nodes, weights = _gl_rule(order)
    mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
    return half * np.sum(weights * f(mid + half * nodes))


def adaptive_line_integral(
    f: Callable[[np.ndarray], np.ndarray],
    s0: float,
    s1: float,
    tol: float = CHORD_TOL,
    max_depth: int = CHORD_MAX_DEPTH,
) -> float:
    """Adaptive composite Gauss-Legendre integral of ``f`` on ``[s0, s1]``.

    Each panel is accepted when a 10-point and a 20-point estimate agree
    within the panel's share of ``tol``, otherwise it is bisected, up to
    ``max_depth`` levels.

    Raises
    ------
    NumericalFailure
        If the depth limit is reached before the tolerance is met.
    """
    if s1 == s0:
        return 0.0
    total = 0.0
    stack = [(float(s0), float(s1), float(tol), 0)]
    while stack:
        a, b, budget, depth = stack.pop()
        coarse = _gl_panel(f, a, b, 10)
        fine = _gl_panel(f, a, b, 20)
        if abs(fine - coarse) <= budget or abs(b - a) < 1e-15 * max(abs(s1 - s0), 1.0):
            total += fine
            continue
        if depth >= max_depth:
            raise NumericalFailure("adaptive chord quadrature failed to converge")
        mid = 0.5 * (a + b)
        stack.append((a, mid, 0.5 * budget, depth + 1))
        stack.append((mid, b, 0.5 * budget, depth + 1))
    return total


def chord_sigma_integral(
    sigma: CollisionFrequency,
    x: np.ndarray,
    v: np.ndarray,
    s0: float,
    s1: float,
    tol: float = CHORD_TOL,
) -> float:
    """The attenuation integral ``int_{s0}^{s1} Sigma(x - s v, v) ds``.

    Closed form for position-independent frequencies; adaptive
    Gauss-Legendre otherwise.
    """
    if sigma.kind == "constant":
        return sigma.value * (s1 - s0)
    if sigma.kind == "speed":
        return sigma.speed_value(v) * (s1 - s0)
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)

    def integrand(s: np.ndarray) -> np.ndarray:
        pts = x[None, :] - s[:, None] * v[None, :]
        return sigma.evaluate(pts, np.broadcast_to(v, pts.shape))

    return adaptive_line_integral(integrand, s0, s1, tol=tol)


def chord_sigma_integral_batch(
    sigma: CollisionFrequency,
    x: np.ndarray,
    v: np.ndarray,
    s0: np.ndarray,
    s1: np.ndarray,
    panels: int = 8,
    order: int = 16,
) -> np.ndarray:
    """Vectorized chord attenuation integrals with a fixed composite rule.

    Used on large batches where per-chord adaptivity would serialize;
    the fixed ``panels x order`` Gauss rule resolves smooth frequencies
    far below the tolerances of the adaptive reference.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    s0 = np.asarray(s0, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    if sigma.kind == "constant":
        return sigma.value * (s1 - s0)
    if sigma.kind == "speed":
        return sigma.evaluate(x, v) * (s1 - s0)
    nodes, weights = _gl_rule(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 / panels
    unit = (mids[:, None] + half * nodes[None, :]).ravel()
    wts = np.tile(half * weights, panels)
    n, q = x.shape[0], unit.size
    s = s0[:, None] + (s1 - s0)[:, None] * unit[None, :]
    pts = x[:, None, :] - s[:, :, None] * v[:, None, :]
    vels = np.broadcast_to(v[:, None, :], pts.shape)
    vals = sigma.evaluate(pts.reshape(n * q, -1), vels.reshape(n * q, -1)).reshape(n, q)
    return (s1 - s0) * (vals @ wts)


def theta(sigma: CollisionFrequency, domain: SpatialDomain, p: PhasePoint) -> float:
    """Full-chord attenuation ``int_{-t_plus}^{t_minus} Sigma(x - s v, v) ds``.

    Even in the velocity and invariant along the chord; both properties
    are exercised by the test suite rather than assumed.
    """
    tm, tp = domain.exit_times_batch(p.x[None, :], p.v[None, :])
    return chord_sigma_integral(sigma, p.x, p.v, -float(tp[0]), float(tm[0]))


def theta_batch(
    sigma: CollisionFrequency,
    domain: SpatialDomain,
    x: np.ndarray,
    v: np.ndarray,
) -> np.ndarray:
    """Vectorized ``theta`` over rows of ``x`` and ``v``."""
    tm, tp = domain.exit_times_batch(x, v)
    return chord_sigma_integral_batch(sigma, x, v, -tp, tm)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityGrid:
    """Quadrature nodes over the speed annulus ``a <= |v| <= b``.

    The node set is closed under ``v -> -v``; ``neg_index`` maps each
    node to the node holding its negation exactly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    a: float
    b: float
    neg_index: np.ndarray

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @classmethod
    def annulus_polar(cls, a: float, b: float, n_speeds: int, n_angles: int) -> "VelocityGrid":
        """Polar product grid on a planar annulus.

        Speeds are uniform on ``[a, b]`` including both endpoints with
        trapezoid weights; angles are uniform with an even count so the
        grid is exactly symmetric under velocity reversal.
        """
        if not 0 < a < b:
            raise ValueError("annulus requires 0 < a < b")
        if n_speeds < 2:
            raise ValueError("need at least two speed nodes")
        if n_angles < 2 or n_angles % 2:
            raise ValueError("angle count must be even and at least 2")
        speeds = np.linspace(a, b, n_speeds)
        ws = np.full(n_speeds, (b - a) / (n_speeds - 1))
        ws[0] *= 0.5
        ws[-1] *= 0.5
        dphi = 2.0 * np.pi / n_angles
        # build half the directions and mirror, so node negation is exact
        # in floating point rather than up to rounding in cos(phi + pi)
        phis = dphi * np.arange(n_angles // 2)
        half = np.stack([np.cos(phis), np.sin(phis)], axis=1)
        dirs = np.concatenate([half, -half], axis=0)
        nodes = (speeds[:, None, None] * dirs[None, :, :]).reshape(-1, 2)
        weights = np.outer(ws * speeds, np.full(n_angles, dphi)).ravel()
        k = np.arange(n_speeds * n_angles)
        neg = (k // n_angles) * n_angles + (k % n_angles + n_angles // 2) % n_angles
        return cls(nodes, weights, float(a), float(b), neg)

    @classmethod
    def line_symmetric(cls, a: float, b: float, n_speeds: int) -> "VelocityGrid":
        """Two mirrored speed intervals ``[-b, -a]`` and ``[a, b]`` on the line."""
        if not 0 < a < b:
            raise ValueError("speed range requires 0 < a < b")
        if n_speeds < 2:
            raise ValueError("need at least two speed nodes")
        speeds = np.linspace(a, b, n_speeds)
        ws = np.full(n_speeds, (b - a) / (n_speeds - 1))
        ws[0] *= 0.5
        ws[-1] *= 0.5
        nodes = np.concatenate([-speeds[::-1], speeds])[:, None]
        weights = np.concatenate([ws[::-1], ws])
        neg = np.arange(2 * n_speeds)[::-1].copy()
        return cls(nodes, weights, float(a), float(b), neg)


@dataclass(frozen=True)
class SpatialGrid:
    """Spatial quadrature nodes with optional interpolation structure."""

    nodes: np.ndarray
    weights: np.ndarray
    domain: SpatialDomain
    kind: str
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @classmethod
    def disk_polar(cls, domain: Disk, n_radial: int, n_angular: int) -> "SpatialGrid":
        """Midpoint-radial polar grid; total weight is the disk area exactly."""
        dr = domain.radius / n_radial
        dth = 2.0 * np.pi / n_angular
        radii = (np.arange(n_radial) + 0.5) * dr
        angles = dth * np.arange(n_angular)
        r = np.repeat(radii, n_angular)
        th = np.tile(angles, n_radial)
        nodes = domain.center + r[:, None] * np.stack([np.cos(th), np.sin(th)], axis=1)
        weights = r * dr * dth
        meta = {"n_radial": n_radial, "n_angular": n_angular, "dr": dr, "dth": dth}
        return cls(nodes, weights, domain, "disk_polar", meta)

    @classmethod
    def interval_midpoint(cls, domain: Interval, n: int) -> "SpatialGrid":
        h = (domain.b - domain.a) / n
        nodes = (domain.a + (np.arange(n) + 0.5) * h)[:, None]
        weights = np.full(n, h)
        return cls(nodes, weights, domain, "interval", {"n": n, "h": h})

    def interp_data(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Sparse interpolation stencils at arbitrary points.

        Returns ``(indices, coefficients)`` with one row per point; the
        coefficients are convex (nonnegative, summing to one), which
        keeps grid evolution positivity-preserving. Radial and axial
        overshoot is clamped to the nearest cell.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "interval":
            h, n = self.meta["h"], self.meta["n"]
            f = (points[:, 0] - self.domain.a) / h - 0.5
            i0 = np.clip(np.floor(f).astype(int), 0, max(n - 2, 0))
            t = np.clip(f - i0, 0.0, 1.0)
            idx = np.stack([i0, np.minimum(i0 + 1, n - 1)], axis=1)
            coef = np.stack([1.0 - t, t], axis=1)
            return idx, coef
        if self.kind == "disk_polar":
            nr, nth = self.meta["n_radial"], self.meta["n_angular"]
            dr, dth = self.meta["dr"], self.meta["dth"]
            w = points - self.domain.center
            r = np.linalg.norm(w, axis=1)
            ang = np.mod(np.arctan2(w[:, 1], w[:, 0]), 2.0 * np.pi)
            fr = r / dr - 0.5
            i0 = np.clip(np.floor(fr).astype(int), 0, max(nr - 2, 0))
            tr = np.clip(fr - i0, 0.0, 1.0)
            fa = ang / dth
            q0 = np.floor(fa).astype(int) % nth
            ta = np.clip(fa - np.floor(fa), 0.0, 1.0)
            q1 = (q0 + 1) % nth
            i1 = np.minimum(i0 + 1, nr - 1)
            idx = np.stack([i0 * nth + q0, i0 * nth + q1, i1 * nth + q0, i1 * nth + q1], axis=1)
            coef = np.stack(
                [(1 - tr) * (1 - ta), (1 - tr) * ta, tr * (1 - ta), tr * ta], axis=1
            )
            return idx, coef
        raise GridMismatch(f"grid kind {self.kind!r} has no interpolation structure")


@dataclass(frozen=True)
class PhaseGrid:
    """Product of a spatial grid and a velocity grid."""

    space: SpatialGrid
    velocity: VelocityGrid

    @property
    def n_x(self) -> int:
        return self.space.n

    @property
    def n_v(self) -> int:
        return self.velocity.n

    @property
    def size(self) -> int:
        return self.n_x * self.n_v

    def weight_matrix(self) -> np.ndarray:
        return np.outer(self.space.weights, self.velocity.weights)


@dataclass
class PhaseGridFunction:
    """Complex samples of a phase-space function on a product grid.

    Values are stored spatial-major as an ``(n_x, n_v)`` array.
    """

    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.n_x, self.grid.n_v):
            raise GridMismatch(
                f"value array of shape {self.values.shape} does not match the "
                f"{self.grid.n_x} x {self.grid.n_v} grid"
            )

    @classmethod
    def sample(cls, grid: PhaseGrid, func: PhaseFunc) -> "PhaseGridFunction":
        xs = np.repeat(grid.space.nodes, grid.n_v, axis=0)
        vs = np.tile(grid.velocity.nodes, (grid.n_x, 1))
        vals = np.asarray(func(xs, vs)).reshape(grid.n_x, grid.n_v)
        return cls(grid, vals)

    def copy(self) -> "PhaseGridFunction":
        return PhaseGridFunction(self.grid, self.values.copy())


def p_norm(phi: PhaseGridFunction, p: float) -> float:
    """Discrete phase-space norm ``(sum w |phi|^p)^(1/p)`` for finite p > 1."""
    if not 1.0 < p < np.inf:
        raise ValueError("p must lie in (1, inf)")
    w = phi.grid.weight_matrix()
    return float(np.sum(w * np.abs(phi.values) ** p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# separable collision kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelTerm:
    """One separable term ``alpha(x) beta(v) int theta(w) phi(x, w) dw``."""

    alpha: ArrayFunc
    beta: ArrayFunc
    theta: ArrayFunc


@dataclass(frozen=True)
class RegularCollisionKernel:
    """Finite sum of separable velocity-redistribution terms.

    The velocity factors of every term must vanish outside the speed
    annulus ``a <= |v| <= b`` with ``0 < a <= b``.
    """

    terms: tuple[KernelTerm, ...]
    a: float
    b: float

    def __post_init__(self) -> None:
        if not 0 < self.a <= self.b:
            raise ValueError("kernel support annulus requires 0 < a <= b")

    @property
    def is_zero(self) -> bool:
        return len(self.terms) == 0

    def check_grid(self, grid: VelocityGrid) -> None:
        tol = 1e-12 * max(self.b, 1.0)
        if grid.a > self.a + tol or grid.b < self.b - tol:
            raise GridMismatch(
                "velocity grid spans "
                f"[{grid.a}, {grid.b}] but the kernel is supported on "
                f"[{self.a}, {self.b}]"
            )

    def norm_bound(self, grid: PhaseGrid, p: float = 2.0) -> float:
        """Holder bound ``sum_i sup|alpha_i| |beta_i|_p |theta_i|_q``."""
        q = p / (p - 1.0)
        total = 0.0
        for term in self.terms:
            sup_alpha = float(np.max(np.abs(term.alpha(grid.space.nodes))))
            beta_p = float(
                np.sum(grid.velocity.weights * np.abs(term.beta(grid.velocity.nodes)) ** p)
                ** (1.0 / p)
            )
            theta_q = float(
                np.sum(grid.velocity.weights * np.abs(term.theta(grid.velocity.nodes)) ** q)
                ** (1.0 / q)
            )
            total += sup_alpha * beta_p * theta_q
        return total


def apply_K(kernel: RegularCollisionKernel, phi: PhaseGridFunction) -> PhaseGridFunction:
    """Apply the collision kernel to grid samples.

    The velocity integral uses the grid quadrature; the reduction order
    is fixed so repeated runs are bitwise identical.
    """
    grid = phi.grid
    kernel.check_grid(grid.velocity)
    out = np.zeros_like(phi.values, dtype=complex)
    vnodes, vweights = grid.velocity.nodes, grid.velocity.weights
    for term in kernel.terms:
        moments = phi.values @ (np.asarray(term.theta(vnodes)) * vweights)
        out += np.outer(np.asarray(term.alpha(grid.space.nodes)) * moments, term.beta(vnodes))
    return PhaseGridFunction(grid, out)


def kernel_matrix_factors(
    kernel: RegularCollisionKernel, grid: PhaseGrid
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """Per-term ``(alpha at x, beta at v, theta * w at v)`` vectors."""
    kernel.check_grid(grid.velocity)
    out = []
    for term in kernel.terms:
        out.append(
            (
                np.asarray(term.alpha(grid.space.nodes), dtype=float),
                np.asarray(term.beta(grid.velocity.nodes), dtype=float),
                np.asarray(term.theta(grid.velocity.nodes), dtype=float) * grid.velocity.weights,
            )
        )
    return out


# ---------------------------------------------------------------------------
# closed-form field factories (shared by tests and the CLI)
# ---------------------------------------------------------------------------

def _bump(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u, dtype=float)
    inside = np.abs(u) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    return out


def radial_bump(a: float, b: float, amplitude: float = 1.0) -> ArrayFunc:
    """Smooth bump in the speed, supported exactly on ``a <= |v| <= b``."""

    def profile(v: np.ndarray) -> np.ndarray:
        s = np.linalg.norm(np.atleast_2d(v), axis=1)
        return amplitude * _bump((2.0 * s - (a + b)) / (b - a))

    return profile


def spatial_bump(center, radius: float, amplitude: float = 1.0) -> ArrayFunc:
    """Smooth compactly supported bump around a point of the domain."""
    c = np.asarray(center, dtype=float)

    def fieldfn(x: np.ndarray) -> np.ndarray:
        r = np.linalg.norm(np.atleast_2d(x) - c, axis=1)
        return amplitude * _bump(r / radius)

    return fieldfn


def constant_field(value: float) -> ArrayFunc:
    def fieldfn(x: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(x).shape[0], float(value))

    return fieldfn
