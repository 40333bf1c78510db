"""Bounce-back streaming: the boundary reversal operator and the
explicit free-streaming evolution.

The evolution is evaluated pointwise along reflected characteristics.
For a position-independent (speed-homogeneous) collision frequency the
contributing term is selected in O(1) by counting wall reflections with
a floor division; for general even frequencies the reference evolution
is a segment-by-segment back-tracing oracle that accumulates the
attenuation by quadrature.

Time is partitioned per phase point into the free interval
``[0, t_minus)`` followed by half-open windows
``I_k = [k tau + t_minus, (k+1) tau + t_minus)``; the term for window
``k`` carries the reflection weight ``gamma^(k+1)``, with ties broken
toward the lower window.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import NonHomogeneousSigma, NumericalFailure, ZeroVelocity
from .fields import (
    CollisionFrequency,
    PhaseGrid,
    PhaseGridFunction,
    chord_sigma_integral,
)
from .geometry import PhasePoint, SpatialDomain

PhaseFunc = Callable[[np.ndarray, np.ndarray], np.ndarray]


def validate_gamma(gamma: float, allow_one: bool = False) -> float:
    """Check the reflection coefficient range.

    The strict range is ``0 < gamma < 1``; ``gamma = 1`` is admitted
    only where a caller explicitly opts in (perturbation diagnostics).
    """
    gamma = float(gamma)
    upper_ok = gamma <= 1.0 if allow_one else gamma < 1.0
    if not (0.0 < gamma and upper_ok):
        limit = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"gamma must lie in {limit}")
    return gamma


def apply_H(trace_plus: PhaseFunc, gamma: float) -> PhaseFunc:
    """Bounce-back boundary operator on outgoing traces.

    Maps an outgoing trace to the incoming trace
    ``(x, v) -> gamma * trace(x, -v)``.
    """
    validate_gamma(gamma, allow_one=True)

    def trace_minus(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        return gamma * np.asarray(trace_plus(x, np.asarray(v) * -1.0))

    return trace_minus


def flow_data(
    domain: SpatialDomain,
    x: np.ndarray,
    v: np.ndarray,
    t: float | np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized reflected-flow lookup (``t`` scalar or per-row).

    For each row returns the pre-flow evaluation point, whether the
    velocity argument is reversed, and the reflection count (the power
    of gamma). Evaluation points are clamped to the domain closure to
    guard against roundoff straddle.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    tm, tp = domain.exit_times_batch(x, v)
    tau = tm + tp
    free = t < tm
    # Window index k >= 0 for the reflected branches; arbitrary where free.
    k = np.where(free, 0, np.floor_divide(np.maximum(t - tm, 0.0), tau)).astype(int)
    even = k % 2 == 0
    shift = np.where(
        free,
        -t,
        np.where(even, t - 2.0 * tm - k * tau, -t + (k + 1) * tau),
    )
    points = domain.clamp(x + shift[:, None] * v)
    flipped = ~free & even
    power = np.where(free, 0, k + 1)
    return points, flipped, power


def U_eval(
    phi: PhaseFunc,
    p: PhasePoint,
    t: float,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
) -> complex:
    """Streaming evolution of ``phi`` at one phase point and time.

    Only valid for speed-homogeneous collision frequencies, for which
    the evolution has a closed form; position-dependent frequencies are
    served by ``characteristics_oracle``.

    Parameters
    ----------
    phi : callable
        Initial datum ``phi(x_rows, v_rows) -> values``.
    p : PhasePoint
    t : float
        Nonnegative time.
    sigma : CollisionFrequency
        Must not depend on the position.
    gamma : float
        Reflection coefficient in ``(0, 1]``.
    domain : SpatialDomain
    """
    if not sigma.is_speed_homogeneous:
        raise NonHomogeneousSigma(
            "the explicit evolution requires a speed-homogeneous frequency"
        )
    validate_gamma(gamma, allow_one=True)
    if t < 0:
        raise ValueError("time must be nonnegative")
    if np.all(p.v == 0.0):
        raise ZeroVelocity("streaming is undefined for v = 0")
    if t == 0.0:
        return complex(np.asarray(phi(p.x[None, :], p.v[None, :])).ravel()[0])
    points, flipped, power = flow_data(domain, p.x[None, :], p.v[None, :], t)
    vel = -p.v if flipped[0] else p.v
    base = complex(np.asarray(phi(points, vel[None, :])).ravel()[0])
    return (gamma ** int(power[0])) * np.exp(-sigma.speed_value(p.v) * t) * base


def evolve(
    phi: PhaseGridFunction | PhaseFunc,
    t: float,
    sigma: CollisionFrequency,
    gamma: float,
    grid: PhaseGrid | None = None,
) -> PhaseGridFunction:
    """Grid sweep of the streaming evolution.

    Grid-sampled data is evaluated off-grid by convex multilinear
    interpolation, so nonnegative inputs stay nonnegative. A callable
    input is evaluated exactly at the flow points (``grid`` must then
    be given).
    """
    if isinstance(phi, PhaseGridFunction):
        grid = phi.grid
        if t == 0.0:
            return phi.copy()
        matrix = streaming_matrix(grid, t, sigma, gamma)
        flat = matrix @ phi.values.reshape(grid.size)
        return PhaseGridFunction(grid, flat.reshape(grid.n_x, grid.n_v))
    if grid is None:
        raise ValueError("a grid is required when evolving a callable")
    if t == 0.0:
        return PhaseGridFunction.sample(grid, phi)
    vals = np.empty((grid.n_x, grid.n_v), dtype=complex)
    for j, v in enumerate(grid.velocity.nodes):
        vrows = np.broadcast_to(v, grid.space.nodes.shape)
        points, flipped, power = flow_data(grid.space.domain, grid.space.nodes, vrows, t)
        signs = np.where(flipped, -1.0, 1.0)
        base = np.asarray(phi(points, signs[:, None] * vrows))
        decay = np.exp(-sigma.speed_value(v) * t)
        vals[:, j] = (gamma ** power.astype(float)) * decay * base
    return PhaseGridFunction(grid, vals)


def streaming_matrix(
    grid: PhaseGrid,
    t: float,
    sigma: CollisionFrequency,
    gamma: float,
) -> sp.csr_matrix:
    """One-shot sparse matrix of the grid evolution at time ``t``.

    Rows follow the spatial-major layout of PhaseGridFunction values.
    Velocity reversal is exact (the velocity grid is closed under
    negation); only the spatial lookup interpolates.
    """
    if not sigma.is_speed_homogeneous:
        raise NonHomogeneousSigma(
            "the explicit evolution requires a speed-homogeneous frequency"
        )
    validate_gamma(gamma, allow_one=True)
    n_x, n_v = grid.n_x, grid.n_v
    if t == 0.0:
        return sp.identity(grid.size, format="csr")
    rows, cols, data = [], [], []
    for j, v in enumerate(grid.velocity.nodes):
        vrows = np.broadcast_to(v, grid.space.nodes.shape)
        points, flipped, power = flow_data(grid.space.domain, grid.space.nodes, vrows, t)
        idx, coef = grid.space.interp_data(points)
        col_v = np.where(flipped, grid.velocity.neg_index[j], j)
        decay = np.exp(-sigma.speed_value(v) * t)
        amp = (gamma ** power.astype(float)) * decay
        stencil = idx.shape[1]
        rows.append(np.repeat(np.arange(n_x) * n_v + j, stencil))
        cols.append((idx * n_v + col_v[:, None]).ravel())
        data.append((coef * amp[:, None]).ravel())
    matrix = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    )
    matrix.sum_duplicates()
    return matrix


def characteristics_oracle(
    phi: PhaseFunc,
    p: PhasePoint,
    t: float,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
) -> complex:
    """Reference evolution by explicit backward tracing.

    Follows the bounce-back flow backward segment by segment,
    accumulating ``exp(-int Sigma)`` by quadrature and a factor gamma
    per wall reflection. Shares no reflection bookkeeping with
    ``U_eval``; agreement between the two is asserted by tests, not
    assumed. Valid for any even collision frequency.
    """
    validate_gamma(gamma, allow_one=True)
    if np.all(p.v == 0.0):
        raise ZeroVelocity("streaming is undefined for v = 0")
    if t < 0:
        raise ValueError("time must be nonnegative")
    pos = p.x.astype(float).copy()
    vel = p.v.astype(float).copy()
    remaining = float(t)
    attenuation = 0.0
    reflections = 0
    tm0, tp0 = domain.exit_times_batch(pos[None, :], vel[None, :])
    max_iter = int(t / max(tm0[0] + tp0[0], 1e-300)) + 3
    for _ in range(max_iter):
        tm, _ = domain.exit_times_batch(pos[None, :], vel[None, :])
        tm = float(tm[0])
        if remaining < tm:
            attenuation += chord_sigma_integral(sigma, pos, vel, 0.0, remaining)
            pos = domain.clamp(pos - remaining * vel)[0]
            remaining = 0.0
            break
        attenuation += chord_sigma_integral(sigma, pos, vel, 0.0, tm)
        pos = domain.clamp(pos - tm * vel)[0]
        vel = -vel
        reflections += 1
        remaining -= tm
    else:
        raise NumericalFailure("backward tracing did not terminate")
    base = complex(np.asarray(phi(pos[None, :], vel[None, :])).ravel()[0])
    return (gamma**reflections) * np.exp(-attenuation) * base
