"""Spectrum point clouds for bounce-back streaming.

The spectrum of the streaming generator is the closure of the ranges of
countably many explicit functions of the chord geometry: for each
integer ``k``,

    F_k(x, v) = (ln gamma - theta(x, v)) / tau(x, v) - 2 k pi i / tau(x, v),

where ``tau`` is the chord traversal time and ``theta`` the accumulated
collision frequency along the chord. Scanning these functions over a
phase grid yields a point cloud inside the spectrum; its rightmost
abscissa approximates the spectral bound from below.

A frequency lies in the resolvent set precisely when the chord
multiplier ``m_lambda`` stays away from one in modulus terms on the
outgoing boundary; ``resolvent_set_test`` measures that margin on a
trace grid, guarding against both the ``m = 1`` and the ``m = -1``
families of singular chords.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloud, GrazingChord
from .fields import CollisionFrequency, theta_batch
from .geometry import Disk, Interval, PhasePoint, SpatialDomain
from .resolvent import TraceGrid, default_trace_grid, m_lambda_grid
from .streaming import validate_gamma

#: Default grazing clip, relative to the diameter crossing time at top speed.
TAU_FLOOR_REL = 1e-3


@dataclass(frozen=True)
class SpectralSample:
    """One spectrum point with the chord data it was computed from."""

    value: complex
    k: int
    tau: float
    theta: float
    x: np.ndarray
    v: np.ndarray

    def reevaluate(self, gamma: float) -> complex:
        """Recompute the value from the stored chord data."""
        return (np.log(gamma) - self.theta) / self.tau - 2j * np.pi * self.k / self.tau


@dataclass(frozen=True)
class ScanConfig:
    """Resolution knobs for a spectrum scan.

    The defaults put velocity angles on a subset of the spatial angles
    and include the slowest speed exactly, so the longest chords of a
    disk (the diameters at bottom speed) are sampled with no
    discretization error in ``tau``.
    """

    n_radial: int = 16
    n_angular: int = 16
    a: float = 1.0
    b: float = 2.0
    n_speeds: int = 4
    n_angles: int = 8
    k_max: int = 8
    tau_floor: float | None = None

    def __post_init__(self) -> None:
        if self.k_max < 0:
            raise ValueError("k range must be nonnegative")
        if self.tau_floor is not None and self.tau_floor <= 0:
            raise ValueError("the grazing clip must be positive")
        if not 0 < self.a < self.b:
            raise ValueError("speed range requires 0 < a < b")
        if min(self.n_radial, self.n_angular, self.n_speeds, self.n_angles) < 2:
            raise ValueError("every resolution must be at least 2")

    def effective_floor(self, domain: SpatialDomain) -> float:
        if self.tau_floor is not None:
            return self.tau_floor
        return TAU_FLOOR_REL * domain.diameter / self.b

    def phase_nodes(self, domain: SpatialDomain) -> tuple[np.ndarray, np.ndarray]:
        """All scanned phase points as ``(positions, velocities)`` rows."""
        if isinstance(domain, Interval):
            h = (domain.b - domain.a) / self.n_radial
            xs = (domain.a + (np.arange(self.n_radial) + 0.5) * h)[:, None]
            speeds = np.linspace(self.a, self.b, self.n_speeds)
            vs = np.concatenate([-speeds[::-1], speeds])[:, None]
        else:
            if not isinstance(domain, Disk):
                raise ValueError("spectrum scans support intervals and disks")
            dr = domain.radius / self.n_radial
            dth = 2.0 * np.pi / self.n_angular
            radii = (np.arange(self.n_radial) + 0.5) * dr
            angles = dth * np.arange(self.n_angular)
            r = np.repeat(radii, self.n_angular)
            th = np.tile(angles, self.n_radial)
            xs = domain.center + r[:, None] * np.stack(
                [np.cos(th), np.sin(th)], axis=1
            )
            speeds = np.linspace(self.a, self.b, self.n_speeds)
            phis = (2.0 * np.pi / self.n_angles) * np.arange(self.n_angles)
            vs = np.stack(
                [
                    np.outer(speeds, np.cos(phis)).ravel(),
                    np.outer(speeds, np.sin(phis)).ravel(),
                ],
                axis=1,
            )
        n_x, n_v = xs.shape[0], vs.shape[0]
        pos = np.repeat(xs, n_v, axis=0)
        vel = np.tile(vs, (n_x, 1))
        return pos, vel


def F_k_eval(
    p: PhasePoint,
    k: int,
    sigma: CollisionFrequency,
    gamma: float,
    domain: SpatialDomain,
    tau_floor: float | None = None,
) -> complex:
    """Evaluate the ``k``-th spectrum curve at one phase point.

    Raises
    ------
    GrazingChord
        If the chord traversal time falls below the grazing clip
        (default ``1e-3`` of the diameter crossing time at this speed).
    """
    validate_gamma(gamma, allow_one=False)
    tm, tp = domain.exit_times_batch(p.x[None, :], p.v[None, :])
    tau = float(tm[0] + tp[0])
    speed = float(np.linalg.norm(p.v))
    floor = tau_floor if tau_floor is not None else TAU_FLOOR_REL * domain.diameter / speed
    if tau < floor:
        raise GrazingChord(f"chord time {tau:.3e} is below the clip {floor:.3e}")
    th = float(theta_batch(sigma, domain, p.x[None, :], p.v[None, :])[0])
    return (np.log(gamma) - th) / tau - 2j * np.pi * k / tau


def scan_spectrum(
    config: ScanConfig,
    domain: SpatialDomain,
    sigma: CollisionFrequency,
    gamma: float,
) -> list[SpectralSample]:
    """Sample every spectrum curve over a phase grid.

    Returns one sample per (phase node, k) whose chord clears the
    grazing clip, ordered by phase node first and ``k`` ascending from
    ``-k_max``; the order is deterministic for fixed config.
    """
    validate_gamma(gamma, allow_one=False)
    pos, vel = config.phase_nodes(domain)
    tm, tp = domain.exit_times_batch(pos, vel)
    tau = tm + tp
    floor = config.effective_floor(domain)
    keep = tau >= floor
    pos, vel, tau = pos[keep], vel[keep], tau[keep]
    th = theta_batch(sigma, domain, pos, vel)

    log_gamma = np.log(gamma)
    ks = np.arange(-config.k_max, config.k_max + 1)
    real = (log_gamma - th) / tau
    samples: list[SpectralSample] = []
    for i in range(pos.shape[0]):
        for k in ks:
            value = complex(real[i], -2.0 * np.pi * k / tau[i])
            samples.append(
                SpectralSample(
                    value=value,
                    k=int(k),
                    tau=float(tau[i]),
                    theta=float(th[i]),
                    x=pos[i].copy(),
                    v=vel[i].copy(),
                )
            )
    return samples


def spectral_bound(samples: list[SpectralSample]) -> float:
    """Largest real part over the sampled cloud.

    This approximates the growth bound of the streaming semigroup from
    below and is monotone nondecreasing under grid refinement.
    """
    if not samples:
        raise EmptyCloud("no spectrum samples to bound")
    return max(s.value.real for s in samples)


@dataclass(frozen=True)
class ResolventMembership:
    """Outcome of a resolvent-set membership test."""

    in_resolvent: bool
    margin: float

    def __bool__(self) -> bool:  # pragma: no cover - convenience only
        return self.in_resolvent


def resolvent_set_test(
    lam: complex,
    domain: SpatialDomain,
    sigma: CollisionFrequency,
    gamma: float,
    grid: TraceGrid | None = None,
    delta: float = 1e-8,
) -> ResolventMembership:
    """Test whether a frequency sits inside the resolvent set.

    The margin is the sampled essential infimum over outgoing boundary
    chords of ``min(|1 - m|, |1 - m^2|)``; the second term also detects
    the sign-flipped singular family ``m = -1``. Membership is declared
    when the margin exceeds ``delta``.
    """
    validate_gamma(gamma, allow_one=False)
    if grid is None:
        grid = default_trace_grid(domain)
    m = m_lambda_grid(grid, lam, sigma, gamma)
    margin = float(np.min(np.minimum(np.abs(1.0 - m), np.abs(1.0 - m * m))))
    return ResolventMembership(in_resolvent=margin > delta, margin=margin)
