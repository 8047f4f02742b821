import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from miditonal.errors import EmptyCloud
from miditonal.spiral import (
    DEFAULT_PARAMS,
    KeyId,
    Mode,
    SpiralParams,
    center_of_effect,
    chord_center,
    distance,
    fifth_name,
    fifth_step_distance,
    key_center,
    pitch_position,
    pitch_positions,
)

R = DEFAULT_PARAMS.r
H = DEFAULT_PARAMS.h


def trig_position(k, r=R, h=H):
    """Helix point straight from the trig definition (independent of the lookup table)."""
    return np.array([r * math.sin(k * math.pi / 2), r * math.cos(k * math.pi / 2), k * h])


def rotate_raise(p, h=H):
    """Quarter turn about z followed by a rise of one fifth."""
    x, y, z = p
    # P(k+1) from P(k): (sin(a+pi/2), cos(a+pi/2)) = (cos a, -sin a)
    return np.array([y, -x, z + h])


def test_default_calibration():
    assert DEFAULT_PARAMS.r == 1.0
    assert DEFAULT_PARAMS.h == pytest.approx(math.sqrt(2 / 15))
    assert DEFAULT_PARAMS.w == DEFAULT_PARAMS.u == DEFAULT_PARAMS.omega == DEFAULT_PARAMS.nu == (0.536, 0.274, 0.19)
    assert DEFAULT_PARAMS.alpha == DEFAULT_PARAMS.beta == 0.75


def test_params_validation():
    with pytest.raises(ValueError):
        SpiralParams(r=0)
    with pytest.raises(ValueError):
        SpiralParams(w1=0.5, w2=0.5, w3=0.5)
    with pytest.raises(ValueError):
        SpiralParams(alpha=1.5)


def test_params_from_config(tmp_path):
    cfg = tmp_path / "spiral.ini"
    cfg.write_text("[spiral]\nr = 2\nalpha = 0.5\n")
    p = SpiralParams.from_config(cfg)
    assert p.r == 2.0 and p.alpha == 0.5 and p.h == DEFAULT_PARAMS.h
    cfg.write_text("[spiral]\nradius = 2\n")
    with pytest.raises(ValueError):
        SpiralParams.from_config(cfg)


class TestPitchPosition:
    def test_origin(self):
        np.testing.assert_array_equal(pitch_position(0), [0.0, R, 0.0])

    def test_full_turn(self):
        np.testing.assert_allclose(pitch_position(4), [0.0, R, 4 * H], atol=0)

    @pytest.mark.parametrize("k", range(-12, 13))
    def test_matches_trig_definition(self, k):
        np.testing.assert_allclose(pitch_position(k), trig_position(k), atol=1e-12)

    @pytest.mark.parametrize("k", range(-12, 12))
    def test_fifth_step_distance(self, k):
        d = distance(pitch_position(k), pitch_position(k + 1))
        assert abs(d - math.sqrt(2 * R**2 + H**2)) < 1e-9

    def test_vectorised(self):
        ks = np.arange(-15, 16)
        np.testing.assert_array_equal(pitch_positions(ks), np.array([pitch_position(int(k)) for k in ks]))

    @pytest.mark.parametrize("k, name", [(0, "C"), (6, "F#"), (-6, "Gb"), (-1, "F"), (-2, "Bb"), (5, "B"), (12, "B#"), (-8, "Fb")])
    def test_names(self, k, name):
        assert fifth_name(k) == name


class TestChords:
    def test_degenerate_weights(self):
        p = SpiralParams(w1=1.0, w2=0.0, w3=0.0)
        np.testing.assert_array_equal(chord_center(0, Mode.MAJOR, p), pitch_position(0, p))

    def test_c_major_direct(self):
        w = DEFAULT_PARAMS.w
        expected = w[0] * trig_position(0) + w[1] * trig_position(1) + w[2] * trig_position(4)
        np.testing.assert_allclose(chord_center(0, "major"), expected, atol=1e-12)

    def test_a_minor_direct(self):
        u = DEFAULT_PARAMS.u
        expected = u[0] * trig_position(3) + u[1] * trig_position(4) + u[2] * trig_position(0)
        np.testing.assert_allclose(chord_center(3, "minor"), expected, atol=1e-12)


class TestKeys:
    def test_degenerate_weights(self):
        p = SpiralParams(omega1=1.0, omega2=0.0, omega3=0.0)
        np.testing.assert_array_equal(key_center(KeyId(2, Mode.MAJOR), p), chord_center(2, Mode.MAJOR, p))

    def test_c_major_regression(self):
        np.testing.assert_allclose(
            key_center(KeyId(0, Mode.MAJOR)), [0.207848, 0.36612, 0.4082358795271838], atol=1e-12
        )

    def test_a_minor_regression(self):
        np.testing.assert_allclose(
            key_center(KeyId(3, Mode.MINOR)), [-0.27834, 0.323748, 1.1409024357995443], atol=1e-12
        )

    @pytest.mark.parametrize("mode", list(Mode))
    @pytest.mark.parametrize("k", range(-12, 12))
    def test_rotational_covariance(self, k, mode):
        shifted = key_center(KeyId(k + 1, mode))
        assert np.abs(shifted - rotate_raise(key_center(KeyId(k, mode)))).max() < 1e-9

    def test_nearest_pitch_to_c_major_is_c(self):
        kc = key_center(KeyId(0, Mode.MAJOR))
        nearest = min(range(-6, 7), key=lambda k: distance(kc, pitch_position(k)))
        assert nearest == 0


def _convex_residual(point, vertices):
    """Least-squares barycentric fit; returns (residual, weights)."""
    A = np.vstack([np.array(vertices).T, np.ones(len(vertices))])
    b = np.append(point, 1.0)
    weights, *_ = np.linalg.lstsq(A, b, rcond=None)
    return np.abs(A @ weights - b).max(), weights


@pytest.mark.parametrize("k", range(-6, 7))
def test_convex_combinations(k):
    res, wts = _convex_residual(chord_center(k, "major"), [pitch_position(k), pitch_position(k + 1), pitch_position(k + 4)])
    assert res < 1e-9 and (wts > -1e-9).all()
    res, wts = _convex_residual(chord_center(k, "minor"), [pitch_position(k), pitch_position(k + 1), pitch_position(k - 3)])
    assert res < 1e-9 and (wts > -1e-9).all()


class TestCenterOfEffect:
    def test_single_point(self):
        p = pitch_position(3)
        np.testing.assert_array_equal(center_of_effect([(p, 7.5)]), p)

    def test_midpoint(self):
        a, b = pitch_position(0), pitch_position(1)
        np.testing.assert_allclose(center_of_effect([(a, 1), (b, 1)]), (a + b) / 2, atol=1e-15)

    def test_weights_one_three(self):
        a, b = pitch_position(0), pitch_position(4)
        np.testing.assert_allclose(center_of_effect([(a, 1), (b, 3)]), 0.25 * a + 0.75 * b, atol=1e-15)

    def test_empty(self):
        with pytest.raises(EmptyCloud):
            center_of_effect([])

    @given(
        st.lists(st.tuples(st.integers(-10, 10), st.floats(0.01, 10)), min_size=1, max_size=8),
        st.floats(0.01, 100),
    )
    def test_scale_invariance(self, pts, c):
        cloud = [(pitch_position(k), w) for k, w in pts]
        scaled = [(p, w * c) for p, w in cloud]
        np.testing.assert_allclose(center_of_effect(cloud), center_of_effect(scaled), atol=1e-12)


class TestDistance:
    def test_zero(self):
        p = pitch_position(5)
        assert distance(p, p) == 0.0

    def test_adjacent_fifths(self):
        assert distance(pitch_position(0), pitch_position(1)) == pytest.approx(fifth_step_distance(), abs=1e-12)

    @given(st.lists(st.floats(-50, 50), min_size=9, max_size=9))
    def test_triangle_and_symmetry(self, xs):
        a, b, c = np.array(xs[:3]), np.array(xs[3:6]), np.array(xs[6:])
        assert distance(a, b) == distance(b, a)
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9
