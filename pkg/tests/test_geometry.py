import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doabeam.geometry import (ArrayGeometry, Doa, angular_distance, default_array,
                              direction_to_doa, steering_grid, steering_vector,
                              unit_direction, wavenumber)
from doabeam.wola import StftSpec

angles = st.floats(-np.pi, np.pi - 1e-9)
elevs = st.floats(-1.5, 1.5)


def test_unit_direction_value():
    u = unit_direction(Doa(np.pi / 4, np.pi / 6))
    np.testing.assert_allclose(u, [0.6123724357, 0.6123724357, 0.5], atol=1e-10)


def test_wavenumber_values():
    spec = StftSpec()
    assert wavenumber(256, spec) == pytest.approx(146.5466, abs=1e-4)
    assert wavenumber(8, spec) == pytest.approx(4.579582, abs=1e-6)


def test_steering_entry_value():
    geom = ArrayGeometry(np.array([[0.0, 0, 0], [0.04, 0, 0]]))
    a = steering_vector(geom, Doa(0.0), StftSpec())
    assert a[8, 1] == pytest.approx(0.98326881 + 0.18216048j, abs=1e-8)
    assert a[8, 0] == 1.0


def test_default_array():
    g = default_array()
    assert g.n_mics == 7 and g.reference_index == 0
    np.testing.assert_allclose(g.coords[0], 0.0)
    np.testing.assert_allclose(np.linalg.norm(g.coords[1:], axis=1), 0.04)
    np.testing.assert_allclose(g.coords[1], [0.04, 0, 0])
    assert g.is_planar()


def test_reference_entry_is_one():
    a = steering_vector(default_array(), Doa(1.0, 0.3), StftSpec())
    np.testing.assert_allclose(a[:, 0], 1.0)


def test_plane_wave_phase_matches_delay():
    # a wave from +x reaches the mic at +x earlier by d / c seconds
    g = default_array()
    spec = StftSpec()
    a = steering_vector(g, Doa(0.0), spec)
    tau = 0.04 / 343.0
    f = spec.bin_frequencies()
    np.testing.assert_allclose(a[:, 1], np.exp(2j * np.pi * f * tau), atol=1e-12)


def test_grid_matches_single():
    g, spec = default_array(), StftSpec()
    doas = [Doa(0.3, 0.1), Doa(-2.0, 0.0)]
    grid = steering_grid(g, doas, spec)
    for d, a in zip(doas, grid):
        np.testing.assert_allclose(a, steering_vector(g, d, spec))


def test_json_round_trip(tmp_path):
    g = default_array()
    p = tmp_path / "g.json"
    p.write_text(json.dumps(g.to_json()))
    h = ArrayGeometry.load(p)
    np.testing.assert_array_equal(h.coords, g.coords)
    assert h.reference_index == 0 and h.speed_of_sound == 343.0


def test_bad_coords():
    with pytest.raises(ValueError):
        ArrayGeometry(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        ArrayGeometry(np.zeros((3, 3)), reference_index=5)


def test_normalized_folds_elevation():
    d = Doa.from_degrees(10.0, 100.0)
    az, el = d.degrees()
    assert el == pytest.approx(80.0) and az == pytest.approx(-170.0)


@settings(max_examples=50, deadline=None)
@given(az=angles, el=elevs)
def test_direction_round_trip(az, el):
    d = direction_to_doa(unit_direction(Doa(az, el)))
    assert angular_distance(d, Doa(az, el)) < 1e-6


@settings(max_examples=30, deadline=None)
@given(az=angles, el=elevs)
def test_steering_unit_modulus(az, el):
    a = steering_vector(default_array(), Doa(az, el), StftSpec())
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(az=angles, el=elevs)
def test_planar_array_elevation_mirror(az, el):
    # a planar array cannot tell el from -el
    g, spec = default_array(), StftSpec()
    np.testing.assert_allclose(steering_vector(g, Doa(az, el), spec),
                               steering_vector(g, Doa(az, -el), spec), atol=1e-12)
