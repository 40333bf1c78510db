import numpy as np
import pytest

from transport_spectra import spectra
from transport_spectra.errors import EmptyCloud, GrazingChord
from transport_spectra.fields import CollisionFrequency
from transport_spectra.geometry import Disk, Interval, PhasePoint
from transport_spectra.spectra import (
    ScanConfig,
    F_k_eval,
    resolvent_set_test,
    scan_spectrum,
    spectral_bound,
)

DISK = Disk((0.0, 0.0), 1.0)
SIGMA = CollisionFrequency.constant(1.0)
GAMMA = 0.5

# diametral unit-speed chord: tau = 2, theta = 2
BOUND_CLOSED_FORM = np.log(0.5) / 2.0 - 1.0  # -1.3465735902799727


def test_curve_value_by_hand():
    p = PhasePoint([0.0], [1.0])
    dom = Interval(-1.0, 1.0)
    val = F_k_eval(p, 1, SIGMA, GAMMA, dom)
    assert val == pytest.approx((np.log(0.5) - 2.0) / 2.0 - 1j * np.pi, rel=1e-14)


def test_curve_even_in_velocity():
    rng = np.random.default_rng(41)
    for _ in range(20):
        r = 0.9 * np.sqrt(rng.random())
        ang = 2.0 * np.pi * rng.random()
        p = PhasePoint(
            [r * np.cos(ang), r * np.sin(ang)],
            (1.0 + rng.random()) * np.array([np.cos(3 * ang), np.sin(3 * ang)]),
        )
        fwd = F_k_eval(p, 3, SIGMA, GAMMA, DISK)
        rev = F_k_eval(p.reversed(), 3, SIGMA, GAMMA, DISK)
        assert fwd == pytest.approx(rev, rel=1e-12)


def test_curve_conjugation_symmetry():
    p = PhasePoint([0.2, 0.1], [1.4, 0.3])
    plus = F_k_eval(p, 2, SIGMA, GAMMA, DISK)
    minus = F_k_eval(p, -2, SIGMA, GAMMA, DISK)
    assert minus == pytest.approx(np.conj(plus), rel=1e-14)


def test_grazing_chord_raises():
    # tangential ray near the rim: tau far below the clip
    p = PhasePoint([0.999999, 0.0], [0.0, 1.5])
    with pytest.raises(GrazingChord):
        F_k_eval(p, 0, SIGMA, GAMMA, DISK, tau_floor=0.5)


def test_gamma_one_rejected():
    with pytest.raises(ValueError):
        F_k_eval(PhasePoint([0.0, 0.0], [1.0, 0.0]), 0, SIGMA, 1.0, DISK)


def test_scan_spectral_bound_hits_closed_form():
    cfg = ScanConfig(n_radial=12, n_angular=16, a=1.0, b=2.0, n_speeds=4,
                     n_angles=8, k_max=2)
    samples = scan_spectrum(cfg, DISK, SIGMA, GAMMA)
    bound = spectral_bound(samples)
    # the scan includes the slowest speed and diametral directions, so
    # the bound is attained exactly, not merely approximated
    assert abs(bound - BOUND_CLOSED_FORM) < 1e-12


def test_scan_is_conjugation_symmetric():
    cfg = ScanConfig(n_radial=4, n_angular=4, n_speeds=2, n_angles=4, k_max=3)
    samples = scan_spectrum(cfg, DISK, SIGMA, GAMMA)
    values = {complex(round(s.value.real, 12), round(s.value.imag, 12)) for s in samples}
    conj = {complex(v.real, -v.imag) for v in values}
    assert values == conj


def test_scan_sample_count_and_order():
    cfg = ScanConfig(n_radial=3, n_angular=4, n_speeds=2, n_angles=4, k_max=1)
    samples = scan_spectrum(cfg, DISK, SIGMA, GAMMA)
    # every kept phase node contributes 2 k_max + 1 consecutive samples
    assert len(samples) % 3 == 0
    ks = [s.k for s in samples[:3]]
    assert ks == [-1, 0, 1]


def test_interval_scan():
    dom = Interval(-1.0, 1.0)
    cfg = ScanConfig(n_radial=8, n_angular=2, a=1.0, b=2.0, n_speeds=3, k_max=1)
    samples = scan_spectrum(cfg, dom, SIGMA, GAMMA)
    bound = spectral_bound(samples)
    # slowest chord: full interval at speed 1, tau = 2, theta = 2
    assert abs(bound - BOUND_CLOSED_FORM) < 1e-12


def test_reevaluate_tracks_gamma():
    cfg = ScanConfig(n_radial=3, n_angular=4, n_speeds=2, n_angles=4, k_max=1)
    sample = scan_spectrum(cfg, DISK, SIGMA, GAMMA)[7]
    new_val = sample.reevaluate(0.25)
    direct = F_k_eval(
        PhasePoint(sample.x, sample.v), sample.k, SIGMA, 0.25, DISK
    )
    assert new_val == pytest.approx(direct, rel=1e-12)


def test_empty_cloud_raises():
    with pytest.raises(EmptyCloud):
        spectral_bound([])


def test_scan_config_validation():
    with pytest.raises(ValueError):
        ScanConfig(k_max=-1)
    with pytest.raises(ValueError):
        ScanConfig(a=2.0, b=1.0)
    with pytest.raises(ValueError):
        ScanConfig(n_speeds=1)
    with pytest.raises(ValueError):
        ScanConfig(tau_floor=0.0)


def test_membership_flips_across_the_bound():
    inside = resolvent_set_test(complex(BOUND_CLOSED_FORM, 0.0), DISK, SIGMA, GAMMA)
    assert not inside.in_resolvent
    assert inside.margin <= 1e-12
    outside = resolvent_set_test(complex(BOUND_CLOSED_FORM + 0.1, 0.0), DISK, SIGMA, GAMMA)
    assert outside.in_resolvent
    assert outside.margin > 1e-3
    assert bool(outside) and not bool(inside)


def test_membership_detects_odd_singular_family():
    # half-way between curve crossings the multiplier passes through -1,
    # which 1 - m^2 flags even though |1 - m| stays large
    dom = Interval(-1.0, 1.0)
    grid = spectra.default_trace_grid(dom)
    lam_star = np.log(GAMMA) / 2.0 - 1.0
    lam_odd = complex(lam_star, np.pi / 2.0)
    verdict = resolvent_set_test(lam_odd, dom, SIGMA, GAMMA, grid=grid)
    assert not verdict.in_resolvent


def test_scan_rejects_unsupported_domains():
    from transport_spectra.geometry import ConvexPolygon

    square = ConvexPolygon([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])
    cfg = ScanConfig(n_radial=3, n_angular=4, n_speeds=2, n_angles=4)
    with pytest.raises(ValueError):
        scan_spectrum(cfg, square, SIGMA, GAMMA)
