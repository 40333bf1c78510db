"""Perturbation series, remainder compactness proxies, and decay sweeps.

Three related diagnostics live here.

First, the truncated perturbation series for the collided evolution:
``V_0(t) = U(t)`` and ``V_j(t) = int_0^t U(t-s) K V_{j-1}(s) ds``,
evaluated on a phase grid with one shared family of prefix quadrature
rules on a master time grid. Sharing the rules is what makes the
reported self-consistency residual equal to the first omitted term
exactly; quadrature error cancels between the two sides.

Second, singular-value diagnostics of the remainder ``R_1(t) = V(t) -
U(t)``. The remainder factors through the collision kernel, which has
rank one in velocity per spatial node and term, so the discretized
remainder is a short sum of products of sparse matrices. That gives
both a dense path (small grids, full spectrum) and a matrix-free path
(large grids, leading singular values plus an exact Frobenius total).

Third, high-frequency decay sweeps of sandwiched resolvent-series
terms. For constant collision frequency the middle factor is a spatial
integral operator whose kernel depends on the chord geometry only
through two scalar attenuation lengths, so it collapses to a single
tabulated profile; assembling it stays cheap even at frequencies where
the kernel oscillates thousands of times across the domain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, svds

from .errors import BadSupport, GridMismatch, NonHomogeneousSigma, ResourceLimit
from .fields import (
    CollisionFrequency,
    PhaseGrid,
    PhaseGridFunction,
    RegularCollisionKernel,
    SpatialGrid,
    VelocityGrid,
    _gl_rule,
    kernel_matrix_factors,
    p_norm,
)
from .geometry import Disk, Interval, SpatialDomain
from .streaming import evolve, streaming_matrix, validate_gamma


@dataclass(frozen=True)
class DysonConfig:
    """Resolution knobs for series evaluation and remainder diagnostics.

    ``nodes_per_unit`` controls the master time grid of the Duhamel
    quadrature; grid fields control the phase grid that remainder
    diagnostics build for themselves. ``dense_cap`` bounds the side
    length of any dense matrix this module is willing to form.
    """

    j_max: int = 3
    nodes_per_unit: int = 32
    n_radial: int = 16
    n_angular: int = 16
    n_speeds: int = 4
    n_angles: int = 4
    dense_cap: int = 4096

    def __post_init__(self) -> None:
        if self.j_max < 0:
            raise ValueError("truncation order must be nonnegative")
        if min(self.nodes_per_unit, self.n_radial, self.n_angular,
               self.n_speeds, self.n_angles, self.dense_cap) < 1:
            raise ValueError("all resolution fields must be positive")


@dataclass
class DysonResult:
    """Truncated series value with its self-consistency residual."""

    value: PhaseGridFunction
    residual: float
    term_norms: tuple[float, ...]


def prefix_weights(m: int, dt: float) -> np.ndarray:
    """Quadrature weights for ``int_0^{m dt}`` on nodes ``0..m dt``.

    The first cell uses a right-endpoint rectangle and the rest closed
    Newton-Cotes pieces (trapezoid, Simpson, three-eighths), so the
    node at zero always carries weight zero. The integrand of the
    Duhamel convolution has a streaming-times-collision slice at the
    lower limit that acts like a multiplication operator; giving it
    positive weight would plant a noncompact term in every iterate and
    swamp the singular-value diagnostics. All weights are nonnegative,
    which keeps the recursion positivity-preserving, and all prefixes
    share one node set, which is what lets the residual computation
    cancel quadrature error exactly.
    """
    if m < 0:
        raise ValueError("prefix length must be nonnegative")
    if m == 0:
        return np.zeros(1)
    w = np.zeros(m + 1)
    w[1] += 1.0
    if m == 1:
        return w * dt
    cells = m - 1

    def simpson(lo: int, hi: int) -> None:
        w[lo] += 1.0 / 3.0
        w[hi] += 1.0 / 3.0
        w[lo + 1:hi:2] += 4.0 / 3.0
        w[lo + 2:hi:2] += 2.0 / 3.0

    def three_eighths(lo: int) -> None:
        w[lo:lo + 4] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0

    if cells == 1:
        w[1:] += 0.5
    elif cells % 2 == 0:
        simpson(1, m)
    elif cells == 3:
        three_eighths(1)
    else:
        simpson(1, m - 3)
        three_eighths(m - 3)
    return w * dt


def _master_grid(t: float, nodes_per_unit: int) -> tuple[int, float]:
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return 0, 0.0
    m = max(2, int(np.ceil(t * nodes_per_unit)))
    return m, t / m


def _kernel_matrix(kernel: RegularCollisionKernel, grid: PhaseGrid) -> sp.csr_matrix:
    """The collision operator as a sparse block-diagonal matrix."""
    mat = sp.csr_matrix((grid.size, grid.size))
    for alpha, beta, theta_w in kernel_matrix_factors(kernel, grid):
        block = sp.csr_matrix(np.outer(beta, theta_w))
        mat = mat + sp.kron(sp.diags(alpha), block, format="csr")
    return mat.tocsr()


class DysonPropagator:
    """Series evaluation on a fixed grid, horizon, and master time grid.

    Building one of these caches the streaming matrices at every master
    node and the sparse collision matrix, so repeated applications (to
    many initial data, or to basis columns) pay the setup cost once.
    """

    def __init__(
        self,
        grid: PhaseGrid,
        t: float,
        config: DysonConfig,
        kernel: RegularCollisionKernel,
        sigma: CollisionFrequency,
        gamma: float,
    ) -> None:
        validate_gamma(gamma, allow_one=True)
        self.grid = grid
        self.t = float(t)
        self.config = config
        self.kernel = kernel
        self.sigma = sigma
        self.gamma = gamma
        self.m_steps, self.dt = _master_grid(t, config.nodes_per_unit)
        row_bytes = 8 + 16 * (2 ** grid.space.nodes.shape[1])
        cache_bytes = row_bytes * grid.size * (self.m_steps + 1)
        if cache_bytes > 2_000_000_000:
            raise ResourceLimit(
                "caching the streaming matrices would take about "
                f"{cache_bytes / 1e9:.1f} GB; lower the master grid density "
                "or the phase resolution"
            )
        self.u_mats = [
            streaming_matrix(grid, k * self.dt, sigma, gamma)
            for k in range(self.m_steps + 1)
        ]
        self.k_mat = None if kernel.is_zero else _kernel_matrix(kernel, grid)
        self.weights = [prefix_weights(m, self.dt) for m in range(self.m_steps + 1)]

    def _level_zero(self, vec: np.ndarray) -> list[np.ndarray]:
        return [u @ vec for u in self.u_mats]

    def _next_level(self, level: list[np.ndarray]) -> list[np.ndarray]:
        kv = [self.k_mat @ x for x in level]
        out = [np.zeros_like(level[0])]
        for m in range(1, self.m_steps + 1):
            w = self.weights[m]
            acc = np.zeros_like(level[0])
            for l in range(m + 1):
                if w[l] != 0.0:
                    acc = acc + w[l] * (self.u_mats[m - l] @ kv[l])
            out.append(acc)
        return out

    def terms_at_horizon(self, phi: PhaseGridFunction, j_max: int) -> list[np.ndarray]:
        """Values of each series term at the horizon, plus node sums.

        Returns the list ``[V_0(t) vec, ..., V_{j_max}(t) vec]``; as a
        side effect stores the per-node partial sums needed by the
        residual computation.
        """
        vec = phi.values.reshape(self.grid.size)
        level = self._level_zero(vec)
        partial = [x.copy() for x in level]
        horizon_terms = [level[-1]]
        for _ in range(j_max):
            if self.k_mat is None:
                horizon_terms.append(np.zeros_like(vec))
                continue
            level = self._next_level(level)
            for m in range(self.m_steps + 1):
                partial[m] = partial[m] + level[m]
            horizon_terms.append(level[-1])
        self._partial_nodes = partial
        return horizon_terms

    def apply(self, phi: PhaseGridFunction) -> DysonResult:
        """Truncated series at the horizon with the Duhamel residual.

        The residual is the grid norm of ``V phi - U phi - int_0^t
        U(t-s) K V(s) phi ds`` relative to the norm of ``phi``, with the
        integral evaluated by the same prefix rule the series used.
        """
        if self.t == 0.0:
            return DysonResult(phi.copy(), 0.0, (float(p_norm(phi, 2.0)),))
        if self.kernel.is_zero:
            value = evolve(phi, self.t, self.sigma, self.gamma)
            return DysonResult(value, 0.0, (float(p_norm(value, 2.0)),))
        terms = self.terms_at_horizon(phi, self.config.j_max)
        total = np.sum(terms, axis=0)
        w = self.weights[self.m_steps]
        duhamel = np.zeros_like(total)
        for l in range(self.m_steps + 1):
            if w[l] != 0.0:
                duhamel = duhamel + w[l] * (
                    self.u_mats[self.m_steps - l] @ (self.k_mat @ self._partial_nodes[l])
                )
        residual_vec = total - terms[0] - duhamel
        shape = (self.grid.n_x, self.grid.n_v)
        scale = p_norm(phi, 2.0)
        residual = p_norm(PhaseGridFunction(self.grid, residual_vec.reshape(shape)), 2.0)
        norms = tuple(
            float(p_norm(PhaseGridFunction(self.grid, x.reshape(shape)), 2.0))
            for x in terms
        )
        value = PhaseGridFunction(self.grid, total.reshape(shape))
        return DysonResult(value, float(residual / scale) if scale > 0 else 0.0, norms)


def V_j_apply(
    phi: PhaseGridFunction,
    t: float,
    j: int,
    kernel: RegularCollisionKernel,
    sigma: CollisionFrequency,
    gamma: float,
    config: DysonConfig | None = None,
) -> PhaseGridFunction:
    """A single term of the perturbation series at time ``t``.

    Term zero is the uncollided evolution and reuses its code path
    verbatim; higher terms integrate the previous one against the
    streaming flow with the shared prefix rule.
    """
    if j < 0:
        raise ValueError("series terms are indexed from j = 0")
    if j == 0:
        return evolve(phi, t, sigma, gamma)
    if t == 0.0 or kernel.is_zero:
        return PhaseGridFunction(phi.grid, np.zeros_like(phi.values))
    config = config or DysonConfig()
    prop = DysonPropagator(phi.grid, t, config, kernel, sigma, gamma)
    terms = prop.terms_at_horizon(phi, j)
    return PhaseGridFunction(phi.grid, terms[j].reshape(phi.grid.n_x, phi.grid.n_v))


def V_apply(
    phi: PhaseGridFunction,
    t: float,
    config: DysonConfig,
    kernel: RegularCollisionKernel,
    sigma: CollisionFrequency,
    gamma: float,
) -> DysonResult:
    """Partial series sum up to the configured order, with residual."""
    prop = DysonPropagator(phi.grid, t, config, kernel, sigma, gamma)
    return prop.apply(phi)


# ---------------------------------------------------------------------------
# remainder diagnostics
# ---------------------------------------------------------------------------

def phase_grid_for(
    domain: SpatialDomain,
    kernel: RegularCollisionKernel,
    config: DysonConfig,
) -> PhaseGrid:
    """The diagnostic phase grid spanning the kernel's speed annulus."""
    if isinstance(domain, Interval):
        space = SpatialGrid.interval_midpoint(domain, config.n_radial * config.n_angular)
        velocity = VelocityGrid.line_symmetric(
            kernel.a, kernel.b, config.n_speeds * config.n_angles
        )
    elif isinstance(domain, Disk):
        space = SpatialGrid.disk_polar(domain, config.n_radial, config.n_angular)
        velocity = VelocityGrid.annulus_polar(
            kernel.a, kernel.b, config.n_speeds, config.n_angles * 2
        )
    else:
        raise ValueError("remainder diagnostics support intervals and disks")
    return PhaseGrid(space, velocity)


def _kernel_projectors(
    kernel: RegularCollisionKernel, grid: PhaseGrid
) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Sparse factors ``K = P_out @ P_in.T`` of the collision matrix.

    Both factors map between phase vectors and the compressed space of
    (spatial node, kernel term) pairs; their inner dimension is what
    keeps the remainder factorization cheap.
    """
    factors = kernel_matrix_factors(kernel, grid)
    n_terms = len(factors)
    n_x, n_v, size = grid.n_x, grid.n_v, grid.size
    rows = np.arange(size)
    x_of_row = rows // n_v
    v_of_row = rows % n_v
    out_parts, in_parts = [], []
    for t_idx, (alpha, beta, theta_w) in enumerate(factors):
        cols = x_of_row * n_terms + t_idx
        out_parts.append(
            sp.coo_matrix(
                (alpha[x_of_row] * beta[v_of_row], (rows, cols)),
                shape=(size, n_x * n_terms),
            )
        )
        in_parts.append(
            sp.coo_matrix(
                (theta_w[v_of_row], (rows, cols)), shape=(size, n_x * n_terms)
            )
        )
    p_out = sum(out_parts[1:], out_parts[0]).tocsr()
    p_in = sum(in_parts[1:], in_parts[0]).tocsr()
    if p_out.count_nonzero() == 0 or p_in.count_nonzero() == 0:
        raise GridMismatch(
            "the velocity grid samples the kernel profiles only where "
            "they vanish; refine the speed resolution"
        )
    return p_out, p_in


def _remainder_factors(
    prop: DysonPropagator,
) -> tuple[list[sp.csr_matrix], list[sp.csr_matrix]]:
    """The remainder as ``sum_l A_l @ H_l`` with sparse factors.

    Works for any truncation order: the compressed images of each
    series level are accumulated per master node before the final
    streaming segment is attached.
    """
    grid, m_steps = prop.grid, prop.m_steps
    p_out, p_in = _kernel_projectors(prop.kernel, grid)
    if prop.config.j_max > 1:
        inner = p_out.shape[1]
        level_bytes = 8 * inner * grid.size * (m_steps + 1)
        if level_bytes > 1_500_000_000:
            raise ResourceLimit(
                "iterating the sandwiched factors would densify to about "
                f"{level_bytes / 1e9:.1f} GB; lower j_max, the master "
                "grid, or the phase resolution"
            )
    p_in_t = p_in.T.tocsr()
    g_level = [(p_in_t @ u).tocsr() for u in prop.u_mats]
    sandwich = [(p_in_t @ (u @ p_out)).tocsr() for u in prop.u_mats]
    g_sum = [g.copy() for g in g_level]
    for _ in range(prop.config.j_max - 1):
        nxt = [sp.csr_matrix(g_level[0].shape)]
        for m in range(1, m_steps + 1):
            w = prop.weights[m]
            acc = None
            for l in range(m + 1):
                if w[l] == 0.0:
                    continue
                piece = (sandwich[m - l] @ g_level[l]) * w[l]
                acc = piece if acc is None else acc + piece
            nxt.append(acc if acc is not None else sp.csr_matrix(g_level[0].shape))
        g_level = [g.tocsr() for g in nxt]
        g_sum = [a + b for a, b in zip(g_sum, g_level, strict=True)]
    w_final = prop.weights[m_steps]
    a_list, h_list = [], []
    for l in range(m_steps + 1):
        if w_final[l] == 0.0:
            continue
        a_list.append((prop.u_mats[m_steps - l] @ p_out).tocsr())
        h_list.append((g_sum[l] * w_final[l]).tocsr())
    return a_list, h_list


def _weighted_factors(
    grid: PhaseGrid,
    a_list: list[sp.csr_matrix],
    h_list: list[sp.csr_matrix],
) -> tuple[list[sp.csr_matrix], list[sp.csr_matrix]]:
    w = grid.weight_matrix().reshape(grid.size)
    d_half = sp.diags(np.sqrt(w))
    d_half_inv = sp.diags(1.0 / np.sqrt(w))
    return [d_half @ a for a in a_list], [h @ d_half_inv for h in h_list]


def R1_singular_values(
    t: float,
    config: DysonConfig,
    kernel: RegularCollisionKernel,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
    n_values: int = 48,
    method: str = "auto",
) -> np.ndarray:
    """Singular values of the discretized remainder ``V(t) - U(t)``.

    The operator is measured in the weighted grid norm, so the values
    approximate singular values of the continuum remainder. ``method``
    is ``"dense"`` (full spectrum, side length capped), ``"factored"``
    (leading values only, scales to large grids), or ``"auto"``.

    Raises
    ------
    ResourceLimit
        If the dense path is requested (or chosen) beyond the cap.
    """
    if method not in ("auto", "dense", "factored"):
        raise ValueError("method must be auto, dense, or factored")
    grid = phase_grid_for(domain, kernel, config)
    if kernel.is_zero or t == 0.0:
        return np.zeros(min(n_values, grid.size))
    prop = DysonPropagator(grid, t, config, kernel, sigma, gamma)
    a_list, h_list = _weighted_factors(grid, *_remainder_factors(prop))
    if method == "auto":
        method = "dense" if grid.size <= config.dense_cap else "factored"
    if method == "dense":
        if grid.size > config.dense_cap:
            raise ResourceLimit(
                f"dense remainder would be {grid.size} x {grid.size}; "
                f"the cap is {config.dense_cap}"
            )
        dense = np.zeros((grid.size, grid.size))
        for a, h in zip(a_list, h_list, strict=True):
            dense += (a @ h).toarray()
        return np.linalg.svd(dense, compute_uv=False)
    op = _remainder_operator(grid.size, a_list, h_list)
    k = min(n_values, grid.size - 2)
    vals = svds(
        op, k=k, v0=np.full(grid.size, 1.0 / np.sqrt(grid.size)),
        return_singular_vectors=False,
    )
    return np.sort(vals)[::-1]


def _remainder_operator(
    size: int, a_list: list[sp.csr_matrix], h_list: list[sp.csr_matrix]
) -> LinearOperator:
    def matvec(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x).reshape(size)
        out = np.zeros(size, dtype=np.result_type(x, np.float64))
        for a, h in zip(a_list, h_list, strict=True):
            out += a @ (h @ x)
        return out

    def rmatvec(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x).reshape(size)
        out = np.zeros(size, dtype=np.result_type(x, np.float64))
        for a, h in zip(a_list, h_list, strict=True):
            out += h.T @ (a.T @ x)
        return out

    return LinearOperator((size, size), matvec=matvec, rmatvec=rmatvec)


def r1_tail_mass(
    t: float,
    config: DysonConfig,
    kernel: RegularCollisionKernel,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
    rank: int = 32,
    n_probes: int = 64,
) -> float:
    """Relative singular-value mass of the remainder beyond ``rank``.

    The head mass comes from a partial SVD of the factored remainder.
    The tail mass is an unbiased stochastic estimate of the leftover
    Frobenius weight: seeded Gaussian probes are projected off the
    leading right singular subspace before application, so the
    estimator's variance is set by the first excluded singular value
    and a few dozen probes suffice. The result is deterministic for a
    fixed configuration.

    Decreasing tail mass under joint phase and time refinement is the
    discrete signature of a Hilbert-Schmidt limit. That reading needs
    the master time grid to resolve a spatial cell per unit relative
    velocity sweep (``dt |v - w| <~ dx``); a coarser time grid leaves
    the collision slices mutually unresolved and their weight inflates
    the tail on fine spatial grids.
    """
    grid = phase_grid_for(domain, kernel, config)
    if kernel.is_zero or t == 0.0:
        return 0.0
    prop = DysonPropagator(grid, t, config, kernel, sigma, gamma)
    a_list, h_list = _weighted_factors(grid, *_remainder_factors(prop))
    op = _remainder_operator(grid.size, a_list, h_list)
    k = min(rank, grid.size - 2)
    _, vals, vt = svds(
        op, k=k, v0=np.full(grid.size, 1.0 / np.sqrt(grid.size)),
        return_singular_vectors=True,
    )
    head = float(np.sum(vals**2))
    probes = np.random.default_rng(0).standard_normal((grid.size, n_probes))
    probes -= vt.T @ (vt @ probes)
    image = np.zeros_like(probes)
    for a, h in zip(a_list, h_list, strict=True):
        image += a @ (h @ probes)
    tail = float(np.sum(image**2)) / n_probes
    total = head + tail
    if total <= 0.0:
        return 0.0
    return tail / total


# ---------------------------------------------------------------------------
# high-frequency decay of sandwiched series terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class A2Norms:
    """Operator-norm estimate and analytic envelope bound."""

    estimate: float
    bound: float


@dataclass(frozen=True)
class NormSweep:
    """Decay sweep of a sandwiched series term along a vertical line."""

    alpha: float
    betas: np.ndarray
    estimates: np.ndarray
    envelope: np.ndarray
    bounds: np.ndarray
    n: int
    ratio: float


def _single_term(kernel: RegularCollisionKernel, which: str):
    if kernel.is_zero:
        return None
    if len(kernel.terms) != 1:
        raise ValueError(f"{which} must be a single-term kernel for the sweep")
    return kernel.terms[0]


def _radial_speed_profile(
    term1, term2, a: float, b: float
) -> Callable[[np.ndarray], np.ndarray]:
    """The combined velocity weight as a function of speed.

    The middle-factor reduction requires the weight ``theta_1(v)
    beta_2(-v)`` to depend on the speed only; that is verified here by
    comparing a few directions and rejected loudly otherwise.
    """

    def h_of(v: np.ndarray) -> np.ndarray:
        return np.asarray(term1.theta(v)) * np.asarray(term2.beta(-np.asarray(v)))

    def h_radial(c: np.ndarray) -> np.ndarray:
        c = np.atleast_1d(np.asarray(c, dtype=float))
        return h_of(np.stack([c, np.zeros_like(c)], axis=1))

    probe = np.linspace(a, b, 17)
    ref = h_radial(probe)
    for ang in (0.37, 1.91, 4.04):
        u = np.array([np.cos(ang), np.sin(ang)])
        vals = h_of(probe[:, None] * u)
        if not np.allclose(vals, ref, rtol=1e-9, atol=1e-12 * max(1.0, np.max(np.abs(ref)))):
            raise ValueError(
                "the combined velocity weight must depend on speed only"
            )
    return h_radial


def _chord_profile_table(
    h_radial: Callable[[np.ndarray], np.ndarray],
    mu: complex,
    a: float,
    b: float,
    q_max: float,
    dim: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Tabulate ``I(q) = int_a^b c^{dim-2} h(c) e^{-mu q / c} dc``.

    The whole middle-factor kernel is two lookups of this profile, so
    it is tabulated once per frequency on a grid fine enough for the
    oscillation ``|Im mu| q / a`` and interpolated linearly.
    """
    osc = abs(mu.imag)
    n_q = int(max(4000, np.ceil(6.0 * osc * q_max / a)))
    n_q = min(n_q, 200_000)
    q_grid = np.linspace(0.0, q_max, n_q)

    phase_span = osc * q_max * (1.0 / a - 1.0 / b)
    panels = int(max(8, np.ceil(phase_span / 20.0)))
    nodes, wts = _gl_rule(16)
    edges = np.linspace(a, b, panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    c_nodes = (mids[:, None] + half * nodes[None, :]).ravel()
    c_weights = np.tile(half * wts, panels)
    h_vals = h_radial(c_nodes) * c_nodes ** (dim - 2) * c_weights

    table = np.empty(n_q, dtype=complex)
    chunk = 2048
    inv_c = 1.0 / c_nodes
    for start in range(0, n_q, chunk):
        q_block = q_grid[start:start + chunk]
        table[start:start + chunk] = np.exp(-mu * q_block[:, None] * inv_c) @ h_vals
    return q_grid, table


def _profile_lookup(q_grid: np.ndarray, table: np.ndarray, q: np.ndarray) -> np.ndarray:
    re = np.interp(q, q_grid, table.real)
    im = np.interp(q, q_grid, table.imag)
    return re + 1j * im


def _a2_spatial_grid(domain: SpatialDomain, n_radial: int, n_angular: int) -> SpatialGrid:
    if isinstance(domain, Interval):
        return SpatialGrid.interval_midpoint(domain, n_radial * n_angular)
    if isinstance(domain, Disk):
        return SpatialGrid.disk_polar(domain, n_radial, n_angular)
    raise ValueError("decay sweeps support intervals and disks")


def _assemble_a2_matrix(
    space: SpatialGrid,
    domain: SpatialDomain,
    q_grid: np.ndarray,
    table: np.ndarray,
    n_round_trips: int,
    dim: int,
) -> np.ndarray:
    """Dense middle-factor kernel matrix on the spatial grid.

    Off-diagonal entries use the two-branch profile lookup; diagonal
    entries stand in for the cell average of the integrable
    ``rho^{1-dim}`` singularity via an equivalent-radius convention.
    """
    pts = space.nodes
    n = space.n
    mat = np.empty((n, n), dtype=complex)
    chunk = max(1, int(2e6) // n)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        x = pts[start:stop]
        diff = pts[None, :, :] - x[:, None, :]
        rho = np.linalg.norm(diff, axis=2)
        block_rows = stop - start
        safe = np.where(rho > 0, rho, 1.0)
        omega = diff / safe[:, :, None]
        flat_x = np.repeat(x, n, axis=0)
        flat_w = omega.reshape(block_rows * n, -1)
        mask = (rho > 0).reshape(-1)
        l_minus = np.zeros(block_rows * n)
        l_plus = np.zeros(block_rows * n)
        lm, lp = domain.exit_times_batch(flat_x[mask], flat_w[mask])
        l_minus[mask], l_plus[mask] = lm, lp
        l_minus = l_minus.reshape(block_rows, n)
        l_plus = l_plus.reshape(block_rows, n)
        chord = l_minus + l_plus
        q_fwd = rho + 2.0 * l_minus + 2.0 * n_round_trips * chord
        q_bwd = 2.0 * l_plus + 2.0 * n_round_trips * chord - rho
        vals = _profile_lookup(q_grid, table, q_fwd) + _profile_lookup(
            q_grid, table, q_bwd
        )
        with np.errstate(divide="ignore"):
            scale = np.where(rho > 0, safe ** (1 - dim), 0.0)
        mat[start:stop] = vals * scale
    _fill_a2_diagonal(mat, space, domain, q_grid, table, n_round_trips, dim)
    return mat


def _fill_a2_diagonal(
    mat: np.ndarray,
    space: SpatialGrid,
    domain: SpatialDomain,
    q_grid: np.ndarray,
    table: np.ndarray,
    n_round_trips: int,
    dim: int,
) -> None:
    pts = space.nodes
    if dim == 1:
        rho_eff = space.weights / 4.0
        omega = np.ones((space.n, 1))
    else:
        rho_eff = 0.5 * np.sqrt(space.weights / np.pi)
        center = getattr(domain, "center", np.zeros(2))
        rel = pts - center
        norms = np.linalg.norm(rel, axis=1, keepdims=True)
        omega = np.where(norms > 0, rel / np.maximum(norms, 1e-300), [[1.0, 0.0]])
    lm, lp = domain.exit_times_batch(pts, omega)
    chord = lm + lp
    q_fwd = rho_eff + 2.0 * lm + 2.0 * n_round_trips * chord
    q_bwd = 2.0 * lp + 2.0 * n_round_trips * chord - rho_eff
    vals = _profile_lookup(q_grid, table, q_fwd) + _profile_lookup(q_grid, table, q_bwd)
    np.fill_diagonal(mat, vals * rho_eff ** (1 - dim))


def _power_iteration_norm(
    mat: np.ndarray, weights: np.ndarray, iters: int = 60, tol: float = 1e-9,
    block: int = 4,
) -> float:
    """Weighted operator norm by blocked subspace iteration.

    The matrix is conjugated into the unweighted frame first, so the
    returned value is the norm with respect to the quadrature inner
    product rather than the plain Euclidean one. A small block rides
    out clustered leading singular values, where a single power vector
    stalls well below the norm; the Rayleigh-Ritz value approaches it
    from below either way. The start basis is fixed, so repeated calls
    are bitwise identical.
    """
    n = mat.shape[0]
    scale = np.sqrt(weights)
    s_mat = (scale[:, None] * mat) * (weights / scale)[None, :]
    block = min(block, n)
    idx = np.arange(n)
    cols = [np.ones(n)] + [
        np.cos(np.pi * k * (idx + 0.5) / n) for k in range(1, block)
    ]
    q, _ = np.linalg.qr(np.stack(cols, axis=1).astype(complex))
    last = 0.0
    for _ in range(iters):
        z = s_mat.conj().T @ (s_mat @ q)
        b = q.conj().T @ z
        top = float(np.linalg.eigvalsh(0.5 * (b + b.conj().T))[-1])
        if top <= 0.0:
            return 0.0
        current = np.sqrt(top)
        q, _ = np.linalg.qr(z)
        if last > 0 and abs(current - last) <= tol * current:
            last = current
            break
        last = current
    return float(last)


def A2_norm(
    lam: complex,
    n: int,
    kernel_one: RegularCollisionKernel,
    kernel_two: RegularCollisionKernel,
    domain: SpatialDomain,
    sigma: CollisionFrequency,
    gamma: float = 1.0,
    n_radial: int = 40,
    n_angular: int = 40,
    support: tuple[float, float] | None = None,
) -> A2Norms:
    """Norm of the middle factor of a sandwiched series term.

    Returns a power-iteration estimate of the weighted operator norm on
    a spatial grid together with an analytic envelope bound (a Schur
    bound through the running tail maximum of the chord profile). The
    estimate never exceeds the bound beyond quadrature tolerance.

    Raises
    ------
    BadSupport
        If the combined speed support does not stay away from zero.
    NonHomogeneousSigma
        If the collision frequency is not constant; the reduction to a
        single chord profile needs a constant.
    """
    validate_gamma(gamma, allow_one=True)
    if n < 0:
        raise ValueError("the round-trip index must be nonnegative")
    if sigma.kind != "constant":
        raise NonHomogeneousSigma(
            "decay sweeps require a constant collision frequency"
        )
    mu = complex(lam) + sigma.value
    if mu.real <= 0:
        raise ValueError("need Re(lambda) + sigma > 0 for the chord profile")
    term1 = _single_term(kernel_one, "the left kernel")
    term2 = _single_term(kernel_two, "the right kernel")
    if term1 is None or term2 is None:
        return A2Norms(0.0, 0.0)
    if support is not None:
        a, b = support
    else:
        a, b = max(kernel_one.a, kernel_two.a), min(kernel_one.b, kernel_two.b)
    if a <= 0:
        raise BadSupport("the combined speed support must satisfy a > 0")
    if a >= b:
        return A2Norms(0.0, 0.0)

    dim = domain.dim
    if dim == 1:
        h_radial_base = lambda c: (  # noqa: E731
            np.asarray(term1.theta(np.atleast_1d(c)[:, None]))
            * np.asarray(term2.beta(-np.atleast_1d(c)[:, None]))
        )
        h_radial = h_radial_base
    else:
        h_radial = _radial_speed_profile(term1, term2, a, b)

    d = domain.diameter
    q_max = (2.0 * n + 3.0) * d * 1.01
    q_grid, table = _chord_profile_table(h_radial, mu, a, b, q_max, dim)

    space = _a2_spatial_grid(domain, n_radial, n_angular)
    mat = _assemble_a2_matrix(space, domain, q_grid, table, n, dim)
    estimate = _power_iteration_norm(mat, space.weights)

    tail_max = np.maximum.accumulate(np.abs(table)[::-1])[::-1]
    keep = q_grid <= d
    surface = 2.0 * np.pi if dim == 2 else 2.0
    bound = 2.0 * surface * float(np.trapezoid(tail_max[keep], q_grid[keep]))

    loop_factor = gamma ** (2 * n + 1)
    return A2Norms(loop_factor * estimate, loop_factor * bound)


def _outer_factor_norms(
    kernel_one: RegularCollisionKernel,
    kernel_two: RegularCollisionKernel,
    domain: SpatialDomain,
    n_radial: int,
    n_angular: int,
) -> float:
    """Product of norm bounds for the outer factors of the sandwich."""
    term1 = kernel_one.terms[0]
    term2 = kernel_two.terms[0]
    space = _a2_spatial_grid(domain, n_radial, n_angular)

    def speed_l2(func, a, b):
        if domain.dim == 1:
            vgrid = VelocityGrid.line_symmetric(a, b, 64)
        else:
            vgrid = VelocityGrid.annulus_polar(a, b, 24, 32)
        vals = np.asarray(func(vgrid.nodes))
        return float(np.sqrt(np.sum(vgrid.weights * np.abs(vals) ** 2)))

    sup_alpha1 = float(np.max(np.abs(term1.alpha(space.nodes))))
    sup_alpha2 = float(np.max(np.abs(term2.alpha(space.nodes))))
    beta1_l2 = speed_l2(term1.beta, kernel_one.a, kernel_one.b)
    theta2_l2 = speed_l2(term2.theta, kernel_two.a, kernel_two.b)
    return sup_alpha1 * beta1_l2 * sup_alpha2 * theta2_l2


def rl_sweep(
    alpha: float,
    beta_list,
    n: int,
    kernel_one: RegularCollisionKernel,
    kernel_two: RegularCollisionKernel,
    domain: SpatialDomain,
    sigma: CollisionFrequency,
    gamma: float = 1.0,
    n_radial: int = 40,
    n_angular: int = 40,
) -> NormSweep:
    """High-frequency decay sweep of a sandwiched series term.

    Estimates the sandwiched norm along ``lambda = alpha + i beta`` for
    each requested ``beta``, reporting raw estimates, their monotone
    envelope from the right (raw values oscillate with the quadrature),
    the analytic bound, and the ratio of the final envelope value to
    the first.
    """
    if sigma.kind != "constant":
        raise NonHomogeneousSigma(
            "decay sweeps require a constant collision frequency"
        )
    if alpha <= -sigma.value:
        raise ValueError("the sweep abscissa must satisfy alpha > -sigma")
    betas = np.asarray(list(beta_list), dtype=float)
    if betas.size == 0:
        raise ValueError("need at least one frequency")
    if np.any(betas < 0) or np.any(np.diff(betas) <= 0):
        raise ValueError("frequencies must be nonnegative and increasing")

    if kernel_one.is_zero or kernel_two.is_zero:
        zeros = np.zeros_like(betas)
        return NormSweep(alpha, betas, zeros, zeros.copy(), zeros.copy(), n, 0.0)

    outer = _outer_factor_norms(kernel_one, kernel_two, domain, n_radial, n_angular)
    estimates = np.empty_like(betas)
    bounds = np.empty_like(betas)
    for i, beta in enumerate(betas):
        norms = A2_norm(
            complex(alpha, beta), n, kernel_one, kernel_two, domain, sigma,
            gamma=gamma, n_radial=n_radial, n_angular=n_angular,
        )
        estimates[i] = outer * norms.estimate
        bounds[i] = outer * norms.bound
    envelope = np.maximum.accumulate(estimates[::-1])[::-1]
    ratio = float(envelope[-1] / envelope[0]) if envelope[0] > 0 else 0.0
    return NormSweep(alpha, betas, estimates, envelope, bounds, n, ratio)
