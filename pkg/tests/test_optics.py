import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spatialqudit import optics, qstate
from spatialqudit.errors import DarkPoint, GeometryError, ImagePlaneSingular, NotOrthogonal, OutOfRange
from spatialqudit.optics import OpticalGeometry

F = 0.3
planes = st.floats(min_value=F, max_value=2 * F * (1 - 1e-6), exclude_max=True)
xs = st.floats(min_value=-5e-3, max_value=5e-3)


def test_geometry_validation():
    with pytest.raises(GeometryError, match="slit overlap"):
        OpticalGeometry(a=10e-6, d=20e-6)
    with pytest.raises(GeometryError):
        OpticalGeometry(D=1)
    with pytest.raises(GeometryError):
        OpticalGeometry(f=-1.0)
    with pytest.raises(GeometryError, match="paraxial"):
        OpticalGeometry(wavelength=1e-3, f=0.3)


def test_plane_params_focal_plane(geom):
    pp = optics.plane_params(geom, geom.f)
    assert pp.eta == 0 and math.isinf(pp.Z)
    assert pp.kappa == pytest.approx(2 * math.pi * geom.a / (geom.wavelength * geom.f), rel=1e-15)
    assert pp.kappa == pytest.approx(261.80, abs=0.005)
    assert pp.delta == 1.5


def test_plane_params_domain(geom):
    with pytest.raises(ImagePlaneSingular):
        optics.plane_params(geom, 2 * geom.f)
    with pytest.raises(OutOfRange):
        optics.plane_params(geom, 0.9 * geom.f)
    with pytest.raises(OutOfRange):
        optics.plane_params(geom, 2.1 * geom.f)


@given(st.floats(min_value=F * (1 + 1e-9), max_value=2 * F * (1 - 1e-6)))
def test_kappa_consistency(z):
    geom = OpticalGeometry()
    pp = optics.plane_params(geom, z)
    via_z = 2 * math.pi * geom.a / (geom.wavelength * pp.eta * pp.Z)
    assert via_z == pytest.approx(pp.kappa, rel=1e-12)
    assert pp.eta * pp.Z == pytest.approx(2 * geom.f - z, rel=1e-12)


def test_sinc_continuity():
    assert optics.sinc(0.0) == 1.0
    for e in (1e-9, 5e-5, 2e-4, 1.0):
        assert optics.sinc(e) == pytest.approx(math.sin(e) / e, rel=1e-15)


@given(planes)
def test_center_amplitudes_equal(z):
    geom = OpticalGeometry()
    a1, a2 = optics.slit_amplitudes(geom, 0.0, z)
    assert a1 == a2


@given(xs)
def test_focal_plane_moduli_independent_of_slit(x):
    geom = OpticalGeometry(D=3)
    mods = np.abs(optics.slit_amplitudes(geom, x, geom.f))
    assert np.allclose(mods, mods[0], rtol=1e-12, atol=0)


@given(planes, st.integers(1, 3))
def test_slit_envelope_peak(z, j):
    geom = OpticalGeometry(D=3)
    pp = optics.plane_params(geom, z)
    x = -geom.d * (j - geom.delta) * pp.eta
    assert abs(optics.slit_amplitude(geom, j, x, z)) == pytest.approx(math.sqrt(pp.kappa / math.pi), rel=1e-12)


def test_slit_amplitude_direct_formula():
    geom = OpticalGeometry()
    x, z = 3.3e-4, 0.41
    pp = optics.plane_params(geom, z)
    k = pp.kappa
    for j in (1, 2):
        arg = k * (x + geom.d * (j - 1.5) * pp.eta)
        expect = math.sqrt(k / math.pi) * np.exp(1j * k * x * geom.d * (j - 1) / geom.a) * math.sin(arg) / arg
        assert optics.slit_amplitude(geom, j, x, z) == pytest.approx(expect, rel=1e-13)


def test_postselected_examples(geom):
    st0 = optics.postselected_state(geom, 0.0, 0.4)
    assert np.allclose(st0.normalized, np.array([1, 1]) / math.sqrt(2), atol=1e-15)
    st1 = optics.postselected_state(geom, geom.wavelength * geom.f / (2 * geom.d), geom.f)
    assert np.allclose(st1.normalized, np.array([1, -1]) / math.sqrt(2), atol=1e-12)
    g3 = OpticalGeometry(D=3)
    st3 = optics.postselected_state(g3, 0.0, g3.f)
    assert np.allclose(st3.normalized, np.ones(3) / math.sqrt(3), atol=1e-15)


@given(xs, planes)
def test_postselected_invariants(x, z):
    geom = OpticalGeometry()
    try:
        st_ = optics.postselected_state(geom, x, z)
    except DarkPoint:
        return
    assert abs(np.linalg.norm(st_.normalized) - 1) <= 1e-12
    assert st_.norm2 > 0
    ratio = st_.normalized / (st_.amplitudes / math.sqrt(st_.norm2))
    assert np.allclose(ratio, ratio[0], rtol=1e-12)


def test_dark_point(geom):
    # both sinc factors vanish at the first zero of the focal-plane envelope
    x = math.pi / optics.plane_params(geom, geom.f).kappa
    with pytest.raises(DarkPoint):
        optics.postselected_state(geom, x, geom.f)


def test_image_plane_projectors():
    geom = OpticalGeometry()
    p1 = optics.image_plane_projector(geom, 1)
    p2 = optics.image_plane_projector(geom, 2)
    assert p1.x == -geom.d / 2 and p2.x == geom.d / 2
    assert np.array_equal(p1.normalized, [1, 0]) and np.array_equal(p2.normalized, [0, 1])
    assert p1.image_plane and p1.norm2 is None
    g3 = OpticalGeometry(D=3)
    p = optics.image_plane_projector(g3, 2)
    assert p.x == 0 and np.array_equal(p.normalized, [0, 1, 0])


def test_detection_density_examples(geom):
    z = 0.37
    mixed = qstate.validate_density(np.eye(2) / 2)
    st_ = optics.postselected_state(geom, 0.0, z)
    assert optics.detection_density(mixed, geom, 0.0, z) == pytest.approx(st_.norm2 / 2, rel=1e-13)
    minus = qstate.pure_density(np.array([1, -1]) / math.sqrt(2))
    assert optics.detection_density(minus, geom, 0.0, geom.f) == 0.0


@given(st.integers(0, 2**31), xs, planes)
def test_detection_density_matches_trace(seed, x, z):
    geom = OpticalGeometry()
    rho = qstate.random_density(seed, 2)
    amps = optics.slit_amplitudes(geom, x, z)
    oracle = np.real(np.trace(np.array(rho.entries) @ np.outer(amps, amps.conj())))
    dens = optics.detection_density(rho, geom, x, z)
    assert dens >= 0
    assert dens == pytest.approx(max(oracle, 0), rel=1e-10, abs=1e-12)


def test_outcome_probabilities_examples(geom):
    mixed = qstate.validate_density(np.eye(2) / 2)
    pts = [(0.0, geom.f), (geom.wavelength * geom.f / (2 * geom.d), geom.f)]
    assert np.allclose(optics.outcome_probabilities(mixed, geom, pts), [0.5, 0.5], atol=1e-12)
    one = qstate.pure_density([1, 0])
    img = [optics.image_plane_projector(geom, 1), optics.image_plane_projector(geom, 2)]
    assert np.array_equal(optics.outcome_probabilities(one, geom, img), [1.0, 0.0])


def test_outcome_probabilities_not_orthogonal(geom):
    with pytest.raises(NotOrthogonal):
        optics.outcome_probabilities(qstate.random_density(0, 2), geom, [(0.0, geom.f), (1e-4, geom.f)])


@given(st.integers(0, 2**31), st.floats(min_value=-2e-3, max_value=2e-3))
def test_born_rule_equivalence(seed, x):
    geom = OpticalGeometry()
    rho = qstate.random_density(seed, 2)
    pts = [(x, geom.f), (x + geom.wavelength * geom.f / (2 * geom.d), geom.f)]
    try:
        states = [optics.postselected_state(geom, *p) for p in pts]
    except DarkPoint:
        return
    overlap, _ = optics.max_overlap(states)
    assert overlap <= 1e-10
    probs = optics.outcome_probabilities(rho, geom, states)
    assert probs.sum() == pytest.approx(1, abs=1e-9)
    assert np.allclose(probs, qstate.born_probabilities(rho, [s.normalized for s in states]), atol=1e-9)


def test_sigma_x_points_match_eigenbasis(geom):
    obs = qstate.Observable.pauli("sigma_x")
    eb = qstate.eigenbasis(obs)
    pts = [(0.0, geom.f), (geom.wavelength * geom.f / (2 * geom.d), geom.f)]
    for seed in range(20):
        rho = qstate.random_density(seed, 2)
        assert np.allclose(optics.outcome_probabilities(rho, geom, pts), qstate.born_probabilities(rho, eb.vectors), atol=1e-10)


def test_position_to_bloch(geom):
    b = optics.position_to_bloch(geom, 0.0, 0.5)
    assert b.theta == pytest.approx(math.pi / 2, abs=1e-14) and b.phi == 0
    for x in np.linspace(-1e-3, 1e-3, 7):
        assert optics.position_to_bloch(geom, x, geom.f).theta == pytest.approx(math.pi / 2, abs=1e-12)
    pole = qstate.bloch_from_pure(optics.image_plane_projector(geom, 1).normalized)
    assert pole.theta == 0


def test_envelope_parity():
    geom = OpticalGeometry()
    for z in np.linspace(geom.f, 2 * geom.f * (1 - 1e-4), 10):
        x = np.linspace(-3e-3, 3e-3, 100)
        e_plus = optics.envelope(geom, x, z)
        e_minus = optics.envelope(geom, -x, z)
        assert np.all(np.abs(e_plus - e_minus) <= 1e-10 * e_plus)


def test_scan_density(geom):
    # x -> -x swaps the slit moduli off the focal plane, so mirror symmetry
    # needs equal populations as well as a real coherence
    rho = qstate.validate_density([[0.5, 0.2], [0.2, 0.5]])
    single = optics.scan_density(rho, geom, [1e-4], [0.4])
    assert single.shape == (1, 3)
    assert single[0, 2] == optics.detection_density(rho, geom, 1e-4, 0.4)
    xg = np.linspace(-2e-3, 2e-3, 41)
    zg = [0.3, 0.35, 0.5]
    table = optics.scan_density(rho, geom, xg, zg)
    assert table.shape == (len(xg) * len(zg), 3)
    assert np.all(table[:, 2] >= 0)
    assert np.array_equal(table[: len(xg), 1], np.full(len(xg), 0.3))
    for k in range(len(zg)):
        row = table[k * len(xg) : (k + 1) * len(xg), 2]
        assert np.allclose(row, row[::-1], rtol=1e-10, atol=1e-12)
    assert np.array_equal(optics.scan_density(rho, geom, xg, zg, workers=3), table)
    with pytest.raises(ImagePlaneSingular):
        optics.scan_density(rho, geom, xg, [2 * geom.f])


def test_scan_unequal_populations_symmetric_only_in_focal_plane(geom):
    rho = qstate.validate_density([[0.7, 0.2], [0.2, 0.3]])
    xg = np.linspace(-2e-3, 2e-3, 41)
    focal = optics.scan_density(rho, geom, xg, [geom.f])[:, 2]
    assert np.allclose(focal, focal[::-1], rtol=1e-10)
    off = optics.scan_density(rho, geom, xg, [0.45])[:, 2]
    assert not np.allclose(off, off[::-1], rtol=1e-3)
