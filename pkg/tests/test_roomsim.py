import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.signal import csd, welch

from doabeam.errors import SignalLengthError, SingularDistanceError
from doabeam.geometry import Doa, default_array
from doabeam.roomsim import (ArrayPose, RoomSpec, SceneSpec, diffuse_noise, far_field_mixture,
                             image_sources, make_scene, simulate_rir, synthetic_speech,
                             window_rir)


def test_direct_pulse_three_metres():
    # 3 m / 343 m/s * 16 kHz = 139.9417 samples, gain 1 / (4 pi 3)
    room = RoomSpec((10.0, 10.0, 10.0))
    rir = simulate_rir(room, (2.0, 5.0, 5.0), [(5.0, 5.0, 5.0)])
    assert rir.direct_delay[0] == pytest.approx(139.9417, abs=1e-4)
    assert np.argmax(rir.data[0]) == 140
    assert rir.data[0].sum() == pytest.approx(1 / (12 * np.pi), rel=1e-4)
    assert 1 / (12 * np.pi) == pytest.approx(0.0265258, abs=1e-7)


def test_image_positions_one_axis():
    room = RoomSpec((4.0, 5.0, 6.0), 0.5, 2)
    pos, order = image_sources(room, (1.0, 2.0, 3.0))
    on_x = pos[(pos[:, 1] == 2.0) & (pos[:, 2] == 3.0)]
    assert sorted(on_x[:, 0]) == [-7.0, -1.0, 1.0, 7.0, 9.0]
    assert len(pos) == 25 and order.max() == 2


def test_first_order_reflection_amplitude():
    room = RoomSpec((10.0, 10.0, 10.0), 0.8, 1)
    src, mic = (5.0, 5.0, 2.0), (5.0, 5.0, 6.0)
    rir = simulate_rir(room, src, [mic], length=2000)
    # floor image at z = -2, distance 8 m
    d = 8.0
    k = int(round(d / 343 * 16000))
    seg = rir.data[0, k - 3:k + 4]
    assert seg.sum() == pytest.approx(0.8 / (4 * np.pi * d), rel=2e-2)


def test_sabine_coefficient():
    room = RoomSpec.from_t60((6.0, 5.0, 3.0), 0.5)
    assert room.reflection_coefficient == pytest.approx(np.sqrt(1 - 0.23), abs=1e-12)
    assert room.max_duration == 0.5


def test_singular_distance():
    with pytest.raises(SingularDistanceError):
        simulate_rir(RoomSpec(), (1.0, 1.0, 1.0), [(1.0, 1.0, 1.0)])


def test_source_outside_room():
    with pytest.raises(ValueError):
        simulate_rir(RoomSpec(), (7.0, 1.0, 1.0), [(1.0, 1.0, 1.0)])


def test_window_rir_cuts_and_fades():
    room = RoomSpec.from_t60((6.0, 5.0, 3.0), 0.4)
    rir = simulate_rir(room, (2.0, 2.0, 1.5), [(4.0, 3.0, 1.2)])
    w = window_rir(rir, 50.0, 5.0)
    cut = int(np.floor(rir.direct_delay[0] + 800))
    assert np.all(w.data[0, cut:] == 0)
    np.testing.assert_array_equal(w.data[0, :cut - 80], rir.data[0, :cut - 80])
    ratio = w.data[0, cut - 80:cut] / np.where(rir.data[0, cut - 80:cut] == 0, 1,
                                                rir.data[0, cut - 80:cut])
    assert np.all(np.diff(ratio[rir.data[0, cut - 80:cut] != 0]) <= 1e-12)


def test_far_field_mixture_delays():
    g = default_array()
    x = np.random.default_rng(0).standard_normal(4096)
    images, mix = far_field_mixture([x, 0 * x], [Doa(0.0), Doa(1.0)], g)
    np.testing.assert_allclose(images[0][:, 0], x, atol=1e-12)
    # mic 1 sits at +4 cm on the arrival axis: it leads the origin by d / c
    lead = 0.04 / 343 * 16000
    X = np.fft.rfft(x)
    f = np.fft.rfftfreq(4096)
    ref = np.fft.irfft(X * np.exp(2j * np.pi * f * lead), n=4096)
    np.testing.assert_allclose(images[0][:, 1], ref, atol=1e-10)
    np.testing.assert_allclose(mix, images.sum(0))


def test_diffuse_noise_basic():
    g = default_array()
    a = diffuse_noise(g, 32000, seed=3)
    b = diffuse_noise(g, 32000, seed=3)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (32000, 7)
    np.testing.assert_allclose(np.mean(a ** 2, axis=0), 1.0)
    with pytest.raises(ValueError):
        diffuse_noise(g, 100, n_directions=10)


def test_diffuse_noise_coherence_short():
    g = default_array()
    x = diffuse_noise(g, 16000 * 8, seed=1)
    f, pxy = csd(x[:, 1], x[:, 4], fs=16000, nperseg=256)
    _, pxx = welch(x[:, 1], fs=16000, nperseg=256)
    _, pyy = welch(x[:, 4], fs=16000, nperseg=256)
    coh = np.real(pxy) / np.sqrt(pxx * pyy)
    d = 0.08
    band = f <= 4000
    err = np.abs(coh - np.sinc(2 * f * d / 343))[band]
    assert err.max() < 0.1


def _spec(**kw):
    base = dict(room=RoomSpec.from_t60((6.0, 5.0, 3.0), 0.3), pose=ArrayPose((3.0, 2.5, 1.2), 0.4),
                sources=((4.5, 3.5, 1.6), (1.5, 3.0, 1.5)), ratio_db=3.0, snr_db=10.0,
                level_db=-25.0, seed=5, duration=1.0)
    base.update(kw)
    return SceneSpec(**base)


def _dry(n=16000, seed=0):
    rng = np.random.default_rng(seed)
    return [synthetic_speech(n, 16000, rng) for _ in range(2)]


def test_make_scene_levels():
    g = default_array()
    b = make_scene(_spec(), _dry(), g)
    s1, s2, v = (c[:, 0] for c in b.components)
    p = lambda x: np.mean(x ** 2)
    assert 10 * np.log10(p(s1) / p(s2)) == pytest.approx(3.0, abs=1e-9)
    assert 10 * np.log10(p(s1 + s2) / p(v)) == pytest.approx(10.0, abs=1e-9)
    assert 10 * np.log10(p(b.mixture[:, 0])) == pytest.approx(-25.0, abs=1e-9)
    assert b.metadata["draws"] == {"ratio_db": 3.0, "snr_db": 10.0, "level_db": -25.0}
    assert not b.metadata["clipped"]


def test_make_scene_no_noise_and_doas():
    g = default_array()
    spec = _spec(snr_db=None, room=RoomSpec((6.0, 5.0, 3.0)))
    b = make_scene(spec, _dry(), g)
    np.testing.assert_array_equal(b.components[2], 0)
    az, el = b.metadata["true_doas_deg"][0]
    v = np.array(spec.sources[0]) - np.array(spec.pose.position)
    assert az == pytest.approx(np.rad2deg(np.arctan2(v[1], v[0]) - 0.4))
    # anechoic: target equals the reference-mic image and the direct-path image
    np.testing.assert_allclose(b.targets[0], b.components[0][:, 0], atol=1e-12)
    np.testing.assert_allclose(b.direct[0], b.targets[0], atol=1e-12)


def test_make_scene_draws_are_seeded():
    g = default_array()
    spec = _spec(ratio_db="draw", snr_db="draw", level_db="draw", seed=9)
    a, b = make_scene(spec, _dry(), g), make_scene(spec, _dry(), g)
    np.testing.assert_array_equal(a.mixture, b.mixture)
    assert a.metadata["draws"] == b.metadata["draws"]


def test_make_scene_clips_fixed_level():
    b = make_scene(_spec(level_db=20.0), _dry(), default_array())
    assert b.metadata["clipped"] and np.max(np.abs(b.mixture)) <= 1.0


def test_make_scene_short_dry():
    with pytest.raises(SignalLengthError):
        make_scene(_spec(), _dry(1000), default_array())


def test_scene_spec_json_round_trip():
    spec = _spec()
    assert SceneSpec.from_json(spec.to_json()) == spec


@settings(max_examples=20, deadline=None)
@given(yaw=st.floats(-np.pi, np.pi), x=st.floats(0.6, 5.4), y=st.floats(0.6, 4.4),
       z=st.floats(0.6, 2.4))
def test_pose_doa_matches_steering_geometry(yaw, x, y, z):
    # the mic with the largest projection onto the DOA is the one closest to the source
    pose = ArrayPose((3.0, 2.5, 1.5), yaw)
    g = default_array()
    src = np.array([x, y, z])
    if np.linalg.norm(src - pose.position) < 0.3:
        return
    doa = pose.doa_of(src)
    from doabeam.geometry import unit_direction
    local = g.coords @ unit_direction(doa)
    world = np.linalg.norm(pose.mic_positions(g) - src, axis=1)
    assert np.argmax(local[1:]) == np.argmin(world[1:])
