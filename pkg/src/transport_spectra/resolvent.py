"""Closed-form resolvent algebra for bounce-back streaming.

The resolvent of the streaming generator factorizes into elementary
chord operators: interior and boundary attenuation maps, an attenuated
source integral along chords, and a rank-structured boundary inverse
that is solvable in closed form chord pair by chord pair. Everything
here is pointwise; no linear system is ever assembled.

Trace conventions
-----------------
A trace grid stores outgoing nodes ``(x, v)`` with ``v . n(x) > 0``,
and every node knows its chord partner ``(x - tau v, -v)``, which is
again an outgoing node of the grid. Incoming trace functions reuse the
same nodes through the mirror convention: the value slot ``i`` of an
incoming function holds the value at ``(x_i, -v_i)``. Under these
conventions the boundary reversal operator is a diagonal scaling and
the chord transport operator is a permutation times attenuation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NearSingular, TagMismatch
from .fields import (
    CollisionFrequency,
    _gl_rule,
    chord_sigma_integral_batch,
)
from .geometry import Disk, Interval, PhasePoint, SpatialDomain
from .streaming import flow_data, validate_gamma

PhaseFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]

#: Closed-form inverses refuse to divide when ``|1 - m^2|`` drops below this.
SINGULAR_DELTA = 1e-8


@dataclass(frozen=True)
class ComplexFrequency:
    """A complex resolvent frequency with its constant-shift convenience."""

    lam: complex

    def mu(self, sigma: CollisionFrequency) -> complex:
        """The shifted frequency ``lambda + sigma`` for constant frequencies."""
        return self.lam + sigma.value


# ---------------------------------------------------------------------------
# trace grids
# ---------------------------------------------------------------------------

class TraceGrid:
    """Outgoing boundary phase nodes with exact chord pairing.

    Nodes are generated per boundary quadrature node as a fan of
    directions around the outward normal times a range of speeds; the
    geometric chord partner of every node is appended as a node in its
    own right, so the pairing permutation is exact by construction.
    Weights approximate the outgoing trace measure
    ``|v . n(x)| dgamma(x) dv``.
    """

    def __init__(
        self,
        domain: SpatialDomain,
        points: np.ndarray,
        velocities: np.ndarray,
        normals: np.ndarray,
        weights: np.ndarray,
        partner: np.ndarray,
    ) -> None:
        self.domain = domain
        self.points = points
        self.velocities = velocities
        self.normals = normals
        self.weights = weights
        self.partner = partner
        tm, tp = domain.exit_times_batch(points, velocities)
        self.tau = tm + tp
        self._theta_cache: dict[int, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def theta_values(self, sigma: CollisionFrequency) -> np.ndarray:
        """Chord attenuation ``int_0^tau Sigma(x - s v, v) ds`` per node."""
        key = id(sigma)
        if key not in self._theta_cache:
            self._theta_cache[key] = chord_sigma_integral_batch(
                sigma, self.points, self.velocities, np.zeros(self.n), self.tau
            )
        return self._theta_cache[key]


def trace_grid(
    domain: SpatialDomain,
    n_boundary: int = 64,
    n_offsets: int = 9,
    speed_range: tuple[float, float] = (1.0, 2.0),
    n_speeds: int = 3,
) -> TraceGrid:
    """Build an outgoing trace grid over the boundary of ``domain``.

    ``n_offsets`` must be odd so the direction fan contains the outward
    normal itself; diametral chords of a disk are then sampled exactly.
    """
    a, b = speed_range
    if not 0 < a < b:
        raise ValueError("speed range requires 0 < a < b")
    if n_speeds < 2:
        raise ValueError("need at least two speed nodes")
    speeds = np.linspace(a, b, n_speeds)
    w_speed = np.full(n_speeds, (b - a) / (n_speeds - 1))
    w_speed[0] *= 0.5
    w_speed[-1] *= 0.5

    nodes = domain.boundary_quadrature(max(n_boundary, 2))
    bx = np.stack([n.x for n in nodes])
    bn = np.stack([n.normal for n in nodes])
    bw = np.array([n.weight for n in nodes])

    if domain.dim == 1:
        psis = np.array([0.0])
        w_psi = np.array([1.0])
    else:
        if n_offsets < 1 or n_offsets % 2 == 0:
            raise ValueError("offset count must be odd")
        dpsi = np.pi / n_offsets
        psis = -0.5 * np.pi + (np.arange(n_offsets) + 0.5) * dpsi
        w_psi = np.full(n_offsets, dpsi)

    points, velocities, normals, weights = [], [], [], []
    for xb, nb, wb in zip(bx, bn, bw, strict=True):
        for psi, wp in zip(psis, w_psi, strict=True):
            if domain.dim == 1:
                dirs = nb
            else:
                c, s = np.cos(psi), np.sin(psi)
                dirs = np.array([c * nb[0] - s * nb[1], s * nb[0] + c * nb[1]])
            for sk, wk in zip(speeds, w_speed, strict=True):
                v = sk * dirs
                # |v . n| = s cos(psi); the velocity element is s ds dpsi
                # in the plane and ds on the line.
                if domain.dim == 1:
                    w = wb * wk * sk
                else:
                    w = wb * wp * wk * sk * sk * np.cos(psi)
                points.append(xb)
                velocities.append(v)
                normals.append(nb)
                weights.append(w)

    points = np.array(points, dtype=float)
    velocities = np.array(velocities, dtype=float)
    normals = np.array(normals, dtype=float)
    weights = np.array(weights, dtype=float)

    tm, _ = domain.exit_times_batch(points, velocities)
    partner_pts = domain.clamp(points - tm[:, None] * velocities)
    n_primary = points.shape[0]
    all_points = np.concatenate([points, partner_pts])
    all_vel = np.concatenate([velocities, -velocities])
    all_norm = np.concatenate([normals, domain.outward_normal(partner_pts)])
    all_w = np.concatenate([weights, weights])
    partner = np.concatenate(
        [np.arange(n_primary) + n_primary, np.arange(n_primary)]
    )
    return TraceGrid(domain, all_points, all_vel, all_norm, all_w, partner)


@dataclass
class TraceFunction:
    """Values on the nodes of a trace grid, tagged by boundary side.

    Outgoing functions store ``f(x_i, v_i)``; incoming functions store
    ``f(x_i, -v_i)`` on the same node set (the mirror convention).
    ``source`` optionally keeps the callable the values were sampled
    from, which lets chord-endpoint pullbacks evaluate off-grid.
    """

    grid: TraceGrid
    values: np.ndarray
    tag: str
    source: PhaseFunc | None = None

    def __post_init__(self) -> None:
        if self.tag not in ("outgoing", "incoming"):
            raise TagMismatch(f"unknown trace tag {self.tag!r}")
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.n,):
            raise TagMismatch("trace values do not match the grid size")

    def expect(self, tag: str) -> None:
        if self.tag != tag:
            raise TagMismatch(f"expected a {tag} trace, got {self.tag}")


def sample_trace(func: PhaseFunc, grid: TraceGrid, tag: str = "outgoing") -> TraceFunction:
    """Sample a callable on the trace nodes under the tag's convention."""
    sign = 1.0 if tag == "outgoing" else -1.0
    vals = np.asarray(func(grid.points, sign * grid.velocities))
    return TraceFunction(grid, vals, tag, source=func)


# ---------------------------------------------------------------------------
# chord attenuation primitives
# ---------------------------------------------------------------------------

def attenuated_source_integral_batch(
    phi: PhaseFunc,
    y: np.ndarray,
    w: np.ndarray,
    upper: np.ndarray,
    lam: complex,
    sigma: CollisionFrequency,
    min_panels: int = 8,
    order: int = 16,
) -> np.ndarray:
    """Chord source integrals ``int_0^upper phi(y - s w, w) e^{-lam s - int_0^s Sigma} ds``.

    One fixed composite Gauss-Legendre rule serves the whole batch; the
    panel count scales with the oscillation ``|Im lam| * max(upper)`` so
    accuracy is kept for complex frequencies.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    w = np.atleast_2d(np.asarray(w, dtype=float))
    upper = np.asarray(upper, dtype=float)
    panels = int(max(min_panels, np.ceil(float(np.max(upper, initial=0.0)) * abs(np.imag(lam)) / 2.0)))
    nodes, wts = _gl_rule(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 / panels
    unit = (mids[:, None] + half * nodes[None, :]).ravel()
    unit_w = np.tile(half * wts, panels)

    n, q = y.shape[0], unit.size
    s = upper[:, None] * unit[None, :]
    pts = y[:, None, :] - s[:, :, None] * w[:, None, :]
    vels = np.broadcast_to(w[:, None, :], pts.shape)
    base = np.asarray(phi(pts.reshape(n * q, -1), vels.reshape(n * q, -1))).reshape(n, q)

    if sigma.is_speed_homogeneous:
        rate = sigma.evaluate(y, w)
        expo = -(lam + rate)[:, None] * s
    else:
        inner = np.array(
            [
                chord_sigma_integral_batch(
                    sigma,
                    y,
                    w,
                    np.zeros(n),
                    s[:, col],
                )
                for col in range(q)
            ]
        ).T
        expo = -lam * s - inner
    vals = base * np.exp(expo)
    return upper * (vals @ unit_w)


def m_lambda(
    p: PhasePoint,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
) -> complex:
    """Chord multiplier ``gamma exp(-int_0^tau (lam + Sigma)(x - s v, v) ds)``."""
    validate_gamma(gamma, allow_one=True)
    tm, tp = domain.exit_times_batch(p.x[None, :], p.v[None, :])
    tau = float(tm[0] + tp[0])
    att = chord_sigma_integral_batch(
        sigma, p.x[None, :], p.v[None, :], np.zeros(1), np.array([tau])
    )[0]
    return gamma * np.exp(-lam * tau - att)


def m_lambda_grid(
    grid: TraceGrid,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
) -> np.ndarray:
    """Vectorized chord multiplier on all trace nodes."""
    validate_gamma(gamma, allow_one=True)
    return gamma * np.exp(-lam * grid.tau - grid.theta_values(sigma))


# ---------------------------------------------------------------------------
# elementary operators
# ---------------------------------------------------------------------------

def apply_H_trace(phi_plus: TraceFunction, gamma: float) -> TraceFunction:
    """Bounce-back reversal of an outgoing trace, as grid data.

    In the mirror convention this is a pure scaling: the incoming value
    at ``(x, -v)`` is ``gamma`` times the outgoing value at ``(x, v)``.
    """
    validate_gamma(gamma, allow_one=True)
    phi_plus.expect("outgoing")
    source = phi_plus.source
    mirrored = None
    if source is not None:
        mirrored = lambda x, v: gamma * np.asarray(source(x, -np.asarray(v)))  # noqa: E731
    return TraceFunction(phi_plus.grid, gamma * phi_plus.values, "incoming", source=mirrored)


def apply_M_lambda(
    u: TraceFunction,
    lam: complex,
    sigma: CollisionFrequency,
) -> TraceFunction:
    """Chord transport of an incoming trace to the outgoing side.

    The output at ``(x, v)`` is the incoming value at the opposite
    chord endpoint times the full-chord attenuation.
    """
    u.expect("incoming")
    grid = u.grid
    att = np.exp(-lam * grid.tau - grid.theta_values(sigma))
    return TraceFunction(grid, att * u.values[grid.partner], "outgoing")


def apply_B_lambda(
    u: TraceFunction | PhaseFunc,
    lam: complex,
    sigma: CollisionFrequency,
    domain: SpatialDomain,
) -> PhaseFunc:
    """Interior lift of an incoming trace along backward characteristics.

    Returns a callable on interior phase points. A TraceFunction input
    must carry its sampling source, since the backward foot of an
    arbitrary interior point is not a grid node.
    """
    if isinstance(u, TraceFunction):
        u.expect("incoming")
        if u.source is None:
            raise TagMismatch(
                "this incoming trace has no off-grid source; lift a callable instead"
            )
        func = u.source
    else:
        func = u

    def lifted(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        tm, _ = domain.exit_times_batch(x, v)
        feet = domain.clamp(x - tm[:, None] * v)
        att = np.exp(
            -lam * tm
            - chord_sigma_integral_batch(sigma, x, v, np.zeros(len(tm)), tm)
        )
        return att * np.asarray(func(feet, v))

    return lifted


def apply_G_lambda(
    phi: PhaseFunc,
    lam: complex,
    sigma: CollisionFrequency,
    grid: TraceGrid,
) -> TraceFunction:
    """Attenuated accumulation of an interior source along full chords."""
    vals = attenuated_source_integral_batch(
        phi, grid.points, grid.velocities, grid.tau, lam, sigma
    )
    return TraceFunction(grid, vals, "outgoing")


def apply_C_lambda(
    phi: PhaseFunc,
    p: PhasePoint,
    lam: complex,
    sigma: CollisionFrequency,
    domain: SpatialDomain,
) -> complex:
    """No-reentry resolvent: attenuated source integral up to ``t_minus``.

    This is the decaying-exponent form; for a unit source and constant
    frequency it equals ``(1 - e^{-(lam+sigma) t_minus}) / (lam+sigma)``.
    """
    tm, _ = domain.exit_times_batch(p.x[None, :], p.v[None, :])
    return complex(
        attenuated_source_integral_batch(
            phi, p.x[None, :], p.v[None, :], tm, lam, sigma
        )[0]
    )


def solve_IminusMH(
    psi: TraceFunction,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
    delta: float = SINGULAR_DELTA,
) -> TraceFunction:
    """Exact inverse of the boundary loop operator on an outgoing trace.

    Chord pairs decouple into 2x2 systems whose inverse is
    ``(1 - m^2)^{-1} (I + M H)``; no iteration is involved.

    Raises
    ------
    NearSingular
        If ``|1 - m^2|`` falls below ``delta`` anywhere on the grid,
        signalling a frequency too close to the spectrum.
    """
    psi.expect("outgoing")
    grid = psi.grid
    m = m_lambda_grid(grid, lam, sigma, gamma)
    denom = 1.0 - m * m
    worst = float(np.min(np.abs(denom)))
    if worst <= delta:
        raise NearSingular(
            f"|1 - m^2| reaches {worst:.3e}; the boundary loop is not invertible "
            "at this frequency"
        )
    vals = (psi.values + m * psi.values[grid.partner]) / denom
    return TraceFunction(grid, vals, "outgoing")


# ---------------------------------------------------------------------------
# the resolvent and its series
# ---------------------------------------------------------------------------

def _chord_frame(
    x: np.ndarray,
    v: np.ndarray,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
) -> dict[str, np.ndarray]:
    """Shared per-chord quantities for the resolvent chain."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    tm, tp = domain.exit_times_batch(x, v)
    tau = tm + tp
    zeros = np.zeros(len(tm))
    theta_full = chord_sigma_integral_batch(sigma, x, v, -tp, tm)
    att_back = np.exp(-lam * tm - chord_sigma_integral_batch(sigma, x, v, zeros, tm))
    return {
        "x": x,
        "v": v,
        "t_minus": tm,
        "t_plus": tp,
        "tau": tau,
        "m": gamma * np.exp(-lam * tau - theta_full),
        "att_back": att_back,
        "back_foot": domain.clamp(x - tm[:, None] * v),
        "front_foot": domain.clamp(x + tp[:, None] * v),
    }


def resolvent_apply_batch(
    phi: PhaseFunc,
    x: np.ndarray,
    v: np.ndarray,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
    delta: float = SINGULAR_DELTA,
) -> np.ndarray:
    """Resolvent of the streaming generator applied to ``phi``, batched.

    Composes the no-reentry part with the boundary loop solved in
    closed form on the chord through each phase point.
    """
    validate_gamma(gamma, allow_one=False)
    frame = _chord_frame(x, v, lam, sigma, gamma, domain)
    m = frame["m"]
    denom = 1.0 - m * m
    worst = float(np.min(np.abs(denom)))
    if worst <= delta:
        raise NearSingular(
            f"|1 - m^2| reaches {worst:.3e} on the sampled chords"
        )
    interior = attenuated_source_integral_batch(
        phi, frame["x"], frame["v"], frame["t_minus"], lam, sigma
    )
    g_back = attenuated_source_integral_batch(
        phi, frame["back_foot"], -frame["v"], frame["tau"], lam, sigma
    )
    g_front = attenuated_source_integral_batch(
        phi, frame["front_foot"], frame["v"], frame["tau"], lam, sigma
    )
    loop = (g_back + m * g_front) / denom
    return interior + gamma * frame["att_back"] * loop


def resolvent_apply(
    phi: PhaseFunc,
    p: PhasePoint,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
    delta: float = SINGULAR_DELTA,
) -> complex:
    """Pointwise resolvent; see ``resolvent_apply_batch``."""
    return complex(
        resolvent_apply_batch(phi, p.x[None, :], p.v[None, :], lam, sigma, gamma, domain, delta)[0]
    )


def J_n_apply_batch(
    phi: PhaseFunc,
    x: np.ndarray,
    v: np.ndarray,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
    n: int,
    domain: SpatialDomain,
) -> np.ndarray:
    """The ``n``-th reflection term of the resolvent series, batched.

    Term ``n >= 1`` accounts for trajectories with exactly ``n`` wall
    reflections: a factor ``gamma`` and a chord multiplier per loop,
    with odd terms sourcing the reversed chord and even terms the
    forward chord. Partial sums converge geometrically (ratio ``m^2``)
    to the boundary part of the resolvent.
    """
    if n < 1:
        raise ValueError("series terms are indexed from n = 1")
    validate_gamma(gamma, allow_one=True)
    frame = _chord_frame(x, v, lam, sigma, gamma, domain)
    m = frame["m"]
    if n % 2:
        g = attenuated_source_integral_batch(
            phi, frame["back_foot"], -frame["v"], frame["tau"], lam, sigma
        )
    else:
        g = attenuated_source_integral_batch(
            phi, frame["front_foot"], frame["v"], frame["tau"], lam, sigma
        )
    return gamma * frame["att_back"] * m ** (n - 1) * g


def J_n_apply(
    phi: PhaseFunc,
    p: PhasePoint,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
    n: int,
    domain: SpatialDomain,
) -> complex:
    """Pointwise series term; see ``J_n_apply_batch``."""
    return complex(
        J_n_apply_batch(phi, p.x[None, :], p.v[None, :], lam, sigma, gamma, n, domain)[0]
    )


# ---------------------------------------------------------------------------
# time-domain cross-check
# ---------------------------------------------------------------------------

def laplace_resolvent_quadrature(
    phi: PhaseFunc,
    p: PhasePoint,
    lam: complex,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
    rel_tol: float = 1e-6,
) -> complex:
    """Time-quadrature oracle ``int_0^T e^{-lam t} (U(t) phi)(x, v) dt``.

    The horizon ``T`` is chosen from the analytic tail bound
    ``e^{-(Re lam + Sigma(v)) T} / (Re lam + Sigma(v))`` so the truncated
    tail is below ``rel_tol`` relative to a unit-scale integrand. Panels
    are aligned with the reflection windows, where the integrand is
    smooth, and refined against the oscillation of ``Im lam``.

    Requires ``Re lam + Sigma(v) > 0``; this is the absolutely
    convergent regime of the time integral.
    """
    validate_gamma(gamma, allow_one=True)
    rate = sigma.speed_value(p.v) + np.real(lam)
    if rate <= 0:
        raise ValueError("the time integral requires Re lam + Sigma(v) > 0")
    horizon = (np.log(1.0 / rel_tol) + 5.0) / rate

    tm, tp = domain.exit_times_batch(p.x[None, :], p.v[None, :])
    tau = float(tm[0] + tp[0])
    breaks = [0.0, float(tm[0])]
    while breaks[-1] < horizon:
        breaks.append(breaks[-1] + tau)
    breaks = np.array(breaks)
    breaks[-1] = min(breaks[-1], horizon) if breaks[-1] > horizon else breaks[-1]

    max_len = min(tau, 2.0 * np.pi / max(abs(np.imag(lam)), 1e-9) / 4.0, horizon)
    nodes, wts = _gl_rule(16)
    t_nodes, t_weights = [], []
    for left, right in zip(breaks[:-1], breaks[1:], strict=True):
        if right <= left:
            continue
        pieces = int(np.ceil((right - left) / max_len))
        edges = np.linspace(left, right, pieces + 1)
        for a_edge, b_edge in zip(edges[:-1], edges[1:], strict=True):
            mid, half = 0.5 * (a_edge + b_edge), 0.5 * (b_edge - a_edge)
            t_nodes.append(mid + half * nodes)
            t_weights.append(half * wts)
    t_nodes = np.concatenate(t_nodes)
    t_weights = np.concatenate(t_weights)

    x_rows = np.tile(p.x, (t_nodes.size, 1))
    v_rows = np.tile(p.v, (t_nodes.size, 1))
    points, flipped, power = flow_data(domain, x_rows, v_rows, t_nodes)
    signs = np.where(flipped, -1.0, 1.0)
    base = np.asarray(phi(points, signs[:, None] * v_rows))
    decay = np.exp(-sigma.speed_value(p.v) * t_nodes)
    integrand = (gamma ** power.astype(float)) * decay * base * np.exp(-lam * t_nodes)
    return complex(np.sum(t_weights * integrand))


def default_trace_grid(domain: SpatialDomain) -> TraceGrid:
    """A moderate trace grid suitable for verification sweeps."""
    if isinstance(domain, Interval):
        return trace_grid(domain, n_boundary=2, n_speeds=5)
    if isinstance(domain, Disk):
        return trace_grid(domain, n_boundary=48, n_offsets=9, n_speeds=3)
    return trace_grid(domain, n_boundary=40, n_offsets=7, n_speeds=3)
