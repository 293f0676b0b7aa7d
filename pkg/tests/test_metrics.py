import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from doabeam.errors import DecompositionError, DegenerateTargetError, ShapeError
from doabeam.metrics import CAP_DB, evaluate_scene, si_sdr, sir

from oracles import lstsq_sir


def test_si_sdr_known_value():
    # est = ref + e with e orthogonal to ref and |e|^2 = |ref|^2 / 100 -> 20 dB
    ref = np.array([1.0, 0.0, 0.0, 0.0])
    est = np.array([1.0, 0.1, 0.0, 0.0])
    assert si_sdr(est, ref) == pytest.approx(20.0, abs=1e-12)


def test_si_sdr_cap():
    ref = np.random.default_rng(0).standard_normal(100)
    assert si_sdr(ref, ref) == CAP_DB
    assert si_sdr(-3 * ref, ref) == CAP_DB


def test_si_sdr_zero_reference():
    with pytest.raises(DegenerateTargetError):
        si_sdr(np.ones(4), np.zeros(4))


def test_length_mismatch():
    with pytest.raises(ShapeError):
        si_sdr(np.ones(4), np.ones(5))


def test_sir_collinear():
    x = np.random.default_rng(1).standard_normal(50)
    with pytest.raises(DecompositionError):
        sir(x, x, 2 * x)


def test_sir_known_value():
    rng = np.random.default_rng(2)
    s, i = rng.standard_normal((2, 4000))
    i -= (i @ s) / (s @ s) * s
    i *= np.linalg.norm(s) / np.linalg.norm(i)
    assert sir(s + 0.1 * i, s, i) == pytest.approx(20.0, abs=1e-6)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), scale=st.floats(1e-3, 1e3))
def test_si_sdr_scale_invariance(seed, scale):
    rng = np.random.default_rng(seed)
    ref, noise = rng.standard_normal((2, 256))
    est = ref + 0.3 * noise
    assert si_sdr(scale * est, ref) == pytest.approx(si_sdr(est, ref), abs=1e-9)
    assert si_sdr(est, scale * ref) == pytest.approx(si_sdr(est, ref), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), a=st.floats(0.1, 3), b=st.floats(0.01, 3))
def test_sir_matches_lstsq(seed, a, b):
    rng = np.random.default_rng(seed)
    s, i, n = rng.standard_normal((3, 500))
    est = a * s + b * i + 0.05 * n
    assert sir(est, s, i) == pytest.approx(lstsq_sir(est, s, i), abs=1e-8)


def test_evaluate_scene_permutation():
    rng = np.random.default_rng(5)
    t1, t2 = rng.standard_normal((2, 3000))
    mix = t1 + t2
    r = evaluate_scene((t2 + 0.01 * t1, t1 + 0.01 * t2), (t1, t2), mix, "s")
    assert tuple(r.permutation) == (1, 0)
    assert min(r.delta_sir) > 30
    doc = json.loads(r.dumps())
    assert doc["scene_id"] == "s" and doc["permutation"] == [1, 0]
    assert doc["mean_delta_sir"] == pytest.approx(np.mean(r.delta_sir))


def test_evaluate_scene_identity_is_zero_delta():
    rng = np.random.default_rng(6)
    t1, t2 = rng.standard_normal((2, 3000))
    mix = t1 + t2
    r = evaluate_scene((mix, mix), (t1, t2), mix)
    np.testing.assert_allclose(r.delta_si_sdr, 0.0, atol=1e-12)
    np.testing.assert_allclose(r.delta_sir, 0.0, atol=1e-12)
