"""Resolvent chain tests.

The closed-form worked example used throughout: interval (-1, 1),
sigma = 1, gamma = 1/2, lam = 0, phi = 1, evaluated at x = 0, v = +1,
so t_minus = t_plus = 1 and tau = 2. Every frozen decimal below comes
from the elementary formulas

    m   = gamma e^{-(lam+sigma) tau}          = e^{-2} / 2
    C   = (1 - e^{-(lam+sigma) t_minus})      = 1 - e^{-1}
    G   = (1 - e^{-(lam+sigma) tau})          = 1 - e^{-2}
    J_n = gamma e^{-t_minus} m^{n-1} G
    R   = C + gamma e^{-t_minus} (G + m G) / (1 - m^2)

evaluated independently of the library.
"""

import numpy as np
import pytest

from transport_spectra import resolvent as res
from transport_spectra.errors import NearSingular, TagMismatch
from transport_spectra.fields import CollisionFrequency
from transport_spectra.geometry import Disk, Interval, PhasePoint

DOM = Interval(-1.0, 1.0)
SIGMA = CollisionFrequency.constant(1.0)
GAMMA = 0.5
POINT = PhasePoint([0.0], [1.0])

M_FROZEN = 0.06766764161830635
C_FROZEN = 0.6321205588285577
G_FROZEN = 0.8646647167633873
J1_FROZEN = 0.1590461864017892
J2_FROZEN = 0.01076228034219462
RESOLVENT_FROZEN = 0.8027101398636463
LOOP_INVERSE_FROZEN = 1.072578883495754


def unit_phi(x, v):
    return np.ones(np.atleast_2d(x).shape[0])


def test_chord_multiplier_frozen():
    m = res.m_lambda(POINT, 0.0, SIGMA, GAMMA, DOM)
    assert m == pytest.approx(M_FROZEN, rel=1e-14)


def test_no_reentry_part_frozen():
    c = res.apply_C_lambda(unit_phi, POINT, 0.0, SIGMA, DOM)
    assert c == pytest.approx(C_FROZEN, rel=1e-12)


def test_series_terms_frozen():
    j1 = res.J_n_apply(unit_phi, POINT, 0.0, SIGMA, GAMMA, 1, DOM)
    j2 = res.J_n_apply(unit_phi, POINT, 0.0, SIGMA, GAMMA, 2, DOM)
    assert j1 == pytest.approx(J1_FROZEN, rel=1e-12)
    assert j2 == pytest.approx(J2_FROZEN, rel=1e-12)


def test_resolvent_frozen():
    val = res.resolvent_apply(unit_phi, POINT, 0.0, SIGMA, GAMMA, DOM)
    assert val == pytest.approx(RESOLVENT_FROZEN, rel=1e-12)


def test_series_partial_sums_converge_to_loop():
    # the reflection series converges geometrically with ratio m^2
    direct = res.resolvent_apply(unit_phi, POINT, 0.0, SIGMA, GAMMA, DOM)
    c_part = res.apply_C_lambda(unit_phi, POINT, 0.0, SIGMA, DOM)
    total = 0.0
    for n in range(1, 9):
        total += res.J_n_apply(unit_phi, POINT, 0.0, SIGMA, GAMMA, n, DOM)
    assert abs(total - (direct - c_part)) / abs(direct - c_part) < 1e-8
    j1 = res.J_n_apply(unit_phi, POINT, 0.0, SIGMA, GAMMA, 1, DOM)
    j3 = res.J_n_apply(unit_phi, POINT, 0.0, SIGMA, GAMMA, 3, DOM)
    assert j3 / j1 == pytest.approx(M_FROZEN**2, rel=1e-12)


def test_series_on_disk_random_inputs():
    disk = Disk((0.0, 0.0), 1.0)
    rng = np.random.default_rng(31)

    def phi(x, v):
        x, v = np.atleast_2d(x), np.atleast_2d(v)
        return (1.0 + 0.4 * x[:, 0]) * np.exp(-0.3 * np.sum(v * v, axis=1))

    for lam in (0.0, 0.5 + 1.0j, -0.3 + 0.2j):
        r = 0.8 * np.sqrt(rng.random())
        ang = 2.0 * np.pi * rng.random()
        p = PhasePoint(
            [r * np.cos(ang), r * np.sin(ang)],
            1.3 * np.array([np.cos(ang + 0.7), np.sin(ang + 0.7)]),
        )
        direct = res.resolvent_apply(phi, p, lam, SIGMA, GAMMA, disk)
        c_part = res.apply_C_lambda(phi, p, lam, SIGMA, disk)
        total = sum(
            res.J_n_apply(phi, p, lam, SIGMA, GAMMA, n, disk) for n in range(1, 9)
        )
        assert abs(total - (direct - c_part)) <= 1e-6 * max(1.0, abs(direct))


def test_laplace_quadrature_cross_check():
    rng = np.random.default_rng(32)
    disk = Disk((0.0, 0.0), 1.0)

    def phi(x, v):
        x, v = np.atleast_2d(x), np.atleast_2d(v)
        return np.exp(-np.sum(x * x, axis=1)) * (1.0 + 0.1 * v[:, 0])

    for _ in range(6):
        r = 0.8 * np.sqrt(rng.random())
        ang = 2.0 * np.pi * rng.random()
        p = PhasePoint(
            [r * np.cos(ang), r * np.sin(ang)],
            (0.6 + rng.random()) * np.array([np.cos(ang + 2.0), np.sin(ang + 2.0)]),
        )
        lam = complex(-0.6 + 1.2 * rng.random(), 2.0 * rng.random() - 1.0)
        direct = res.resolvent_apply(phi, p, lam, SIGMA, GAMMA, disk)
        oracle = res.laplace_resolvent_quadrature(phi, p, lam, SIGMA, GAMMA, disk)
        assert abs(direct - oracle) <= 1e-5 * max(1.0, abs(oracle))


def test_laplace_frozen_reference():
    oracle = res.laplace_resolvent_quadrature(unit_phi, POINT, 0.0, SIGMA, GAMMA, DOM)
    assert oracle == pytest.approx(RESOLVENT_FROZEN, rel=1e-6)


def test_laplace_needs_decaying_integrand():
    with pytest.raises(ValueError):
        res.laplace_resolvent_quadrature(unit_phi, POINT, -1.0, SIGMA, GAMMA, DOM)


def test_bounce_back_identity_on_traces():
    # the incoming trace equals gamma times the outgoing trace at -v;
    # the pairing of the two chord integrals makes this float-exact
    grid = res.trace_grid(DOM, n_boundary=2, n_speeds=4)

    def phi(x, v):
        x, v = np.atleast_2d(x), np.atleast_2d(v)
        return 1.0 + 0.5 * x[:, 0] * np.sign(v[:, 0])

    lam = 0.4 + 0.9j
    out_vals = res.resolvent_apply_batch(
        phi, grid.points, grid.velocities, lam, SIGMA, GAMMA, DOM
    )
    in_vals = res.resolvent_apply_batch(
        phi, grid.points, -grid.velocities, lam, SIGMA, GAMMA, DOM
    )
    residual = np.max(np.abs(in_vals - GAMMA * out_vals) / np.maximum(1.0, np.abs(out_vals)))
    assert residual < 1e-13


def test_near_singular_on_the_spectrum():
    lam_star = np.log(GAMMA) / 2.0 - 1.0
    with pytest.raises(NearSingular):
        res.resolvent_apply(unit_phi, POINT, lam_star, SIGMA, GAMMA, DOM)


def test_gamma_one_excluded_from_resolvent():
    with pytest.raises(ValueError):
        res.resolvent_apply(unit_phi, POINT, 0.5, SIGMA, 1.0, DOM)


def test_loop_solve_frozen_and_round_trip():
    grid = res.trace_grid(DOM, n_boundary=2, speed_range=(1.0, 2.0), n_speeds=3)
    psi = res.TraceFunction(grid, np.ones(grid.n), "outgoing")
    sol = res.solve_IminusMH(psi, 0.0, SIGMA, GAMMA)
    # unit-speed nodes traverse tau = 2; there the solve is 1 / (1 - m)
    unit_speed = np.isclose(np.linalg.norm(grid.velocities, axis=1), 1.0)
    assert np.any(unit_speed)
    np.testing.assert_allclose(
        sol.values[unit_speed], LOOP_INVERSE_FROZEN, rtol=1e-13
    )
    # round trip: (I - M H) sol == psi
    reflected = res.apply_M_lambda(res.apply_H_trace(sol, GAMMA), 0.0, SIGMA)
    np.testing.assert_allclose(sol.values - reflected.values, psi.values, atol=1e-13)


def test_loop_solve_near_singular():
    grid = res.trace_grid(DOM, n_boundary=2, speed_range=(1.0, 2.0), n_speeds=3)
    psi = res.TraceFunction(grid, np.ones(grid.n), "outgoing")
    lam_star = np.log(GAMMA) / 2.0 - 1.0
    with pytest.raises(NearSingular):
        res.solve_IminusMH(psi, lam_star, SIGMA, GAMMA)


def test_trace_tags_are_enforced():
    grid = res.trace_grid(DOM, n_boundary=2, n_speeds=3)
    outgoing = res.TraceFunction(grid, np.ones(grid.n), "outgoing")
    with pytest.raises(TagMismatch):
        outgoing.expect("incoming")
    with pytest.raises(TagMismatch):
        res.apply_M_lambda(outgoing, 0.0, SIGMA)
    incoming_no_source = res.TraceFunction(grid, np.ones(grid.n), "incoming")
    with pytest.raises(TagMismatch):
        res.apply_B_lambda(incoming_no_source, 0.0, SIGMA, DOM)
    with pytest.raises(TagMismatch):
        res.TraceFunction(grid, np.ones(grid.n), "sideways")


def test_trace_grid_structure():
    disk = Disk((0.0, 0.0), 1.0)
    grid = res.trace_grid(disk, n_boundary=16, n_offsets=3, n_speeds=3)
    # all nodes sit on the boundary and point outward
    radii = np.linalg.norm(grid.points, axis=1)
    np.testing.assert_allclose(radii, 1.0, atol=1e-9)
    dots = np.sum(grid.velocities * grid.normals, axis=1)
    assert np.all(dots > 0)
    # the partner map is an involution pairing opposite chord endpoints
    assert np.array_equal(grid.partner[grid.partner], np.arange(grid.n))
    np.testing.assert_allclose(grid.tau, grid.tau[grid.partner], rtol=1e-12)


def test_attenuated_source_closed_form():
    lam = 0.3 + 0.7j
    upper = np.array([0.8, 1.7])
    vals = res.attenuated_source_integral_batch(
        unit_phi,
        np.array([[0.0], [0.1]]),
        np.array([[1.0], [-1.2]]),
        upper,
        lam,
        SIGMA,
    )
    mu = lam + 1.0
    expected = (1.0 - np.exp(-mu * upper)) / mu
    np.testing.assert_allclose(vals, expected, rtol=1e-12)


def test_apply_B_lifts_boundary_data():
    # lifting a callable: value at x is the attenuated backward foot value
    lam = 0.2
    lifted = res.apply_B_lambda(lambda x, v: np.full(np.atleast_2d(x).shape[0], 2.0),
                                lam, SIGMA, DOM)
    out = lifted(np.array([[0.0]]), np.array([[1.0]]))
    assert out[0] == pytest.approx(2.0 * np.exp(-(lam + 1.0) * 1.0), rel=1e-12)


def test_default_trace_grids():
    assert res.default_trace_grid(DOM).n > 0
    assert res.default_trace_grid(Disk((0.0, 0.0), 1.0)).n > 0
