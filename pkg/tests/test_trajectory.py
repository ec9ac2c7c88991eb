import numpy as np
import pytest

from impactlab.trajectory import (
    GlobalGauge,
    Offset,
    ParabolaParams,
    eval_parabola,
    eval_velocity,
    gravity_vector,
    yxy_rotation,
)


def fit_parabola_oracle(samples_t, samples_p):
    """Independent least-squares fit of p(t) = c0 + c1 t + c2 t² per coordinate."""
    A = np.stack([np.ones_like(samples_t), samples_t, samples_t**2], axis=1)
    coeffs, *_ = np.linalg.lstsq(A, samples_p, rcond=None)
    return coeffs


class TestYxyRotation:
    def test_identity(self):
        assert np.allclose(yxy_rotation(0.0, 0.0, 0.0), np.eye(3))

    def test_single_axis_reduction(self):
        for alpha in (-1.2, 0.4, 2.9):
            r = yxy_rotation(alpha, 0.0, 0.0)
            c, s = np.cos(alpha), np.sin(alpha)
            assert np.allclose(r, [[c, 0, s], [0, 1, 0], [-s, 0, c]], atol=1e-14)
            # the same angle placed on beta_y1 gives the same rotation
            assert np.allclose(yxy_rotation(0.0, 0.0, alpha), r, atol=1e-14)

    def test_orthonormal_unit_determinant(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a, b, c = rng.uniform(-np.pi, np.pi, size=3)
            r = yxy_rotation(a, b, c)
            assert np.allclose(r.T @ r, np.eye(3), atol=1e-12)
            assert abs(np.linalg.det(r) - 1.0) < 1e-12


class TestEvalParabola:
    def test_t_zero_returns_offset(self):
        gauge = GlobalGauge(b1=0.003, beta_x=0.2, beta_y1=-0.4, fps=60.0)
        seg = ParabolaParams(b2=-0.05, b3=0.02, beta_y0=1.1, offset=Offset([1.0, 2.0, 3.0]))
        assert np.allclose(eval_parabola(gauge, seg, 0.0), [1, 2, 3])

    def test_pure_curvature_term(self):
        gauge = GlobalGauge(b1=2.0, beta_x=0.0, beta_y1=0.0, fps=60.0)
        seg = ParabolaParams(b2=0.0, b3=0.0, beta_y0=0.0, offset=Offset([0.5, -0.5, 2.0]))
        assert np.allclose(eval_parabola(gauge, seg, 1.0), [0.5, 0.5, 2.0])

    def test_reproduces_known_parabola_from_samples(self):
        gauge = GlobalGauge(b1=9.81 / 60.0**2, beta_x=0.1, beta_y1=0.3, fps=60.0)
        seg = ParabolaParams(b2=-0.08, b3=0.04, beta_y0=0.7, offset=Offset([0.3, 1.2, -0.6]))
        t = np.array([-10.0, -4.0, 0.0, 3.0, 8.0])
        p = eval_parabola(gauge, seg, t)
        coeffs = fit_parabola_oracle(t, p)
        recon = np.stack([np.ones_like(t), t, t**2], axis=1) @ coeffs
        assert np.max(np.abs(recon - p)) < 1e-8
        # quadratic world coefficient encodes half the (rotated) gravity curvature
        rot = yxy_rotation(seg.beta_y0, gauge.beta_x, gauge.beta_y1)
        assert np.allclose(coeffs[2], rot @ [0, gauge.b1 / 2, 0], atol=1e-10)

    def test_shared_offset_segments_agree_at_collision(self):
        gauge = GlobalGauge(b1=0.002, beta_x=0.05, beta_y1=0.0, fps=60.0)
        shared = Offset(np.array([4.0, 5.0, 6.0]))
        pre = ParabolaParams(b2=-0.1, b3=0.03, beta_y0=0.4, offset=shared)
        post = ParabolaParams(b2=0.07, b3=-0.01, beta_y0=2.2, offset=shared)
        p0 = eval_parabola(gauge, pre, 0.0)
        p1 = eval_parabola(gauge, post, 0.0)
        assert np.array_equal(p0, p1)
        shared.b4[0] = -1.0  # shared by reference: both segments move together
        assert np.array_equal(eval_parabola(gauge, pre, 0.0), eval_parabola(gauge, post, 0.0))


class TestEvalVelocity:
    def test_value_at_collision_time(self):
        gauge = GlobalGauge(b1=0.004, beta_x=0.0, beta_y1=0.0, fps=50.0)
        seg = ParabolaParams(b2=-0.05, b3=0.02, beta_y0=0.0)
        assert np.allclose(eval_velocity(gauge, seg, 0.0), [50 * 0.02, 50 * -0.05, 0.0])

    def test_matches_finite_difference(self):
        gauge = GlobalGauge(b1=9.81 / 3600, beta_x=0.15, beta_y1=-0.25, fps=60.0)
        seg = ParabolaParams(b2=0.03, b3=-0.06, beta_y0=1.9, offset=Offset([1, 1, 1]))
        h = 1e-4
        for t in (-7.0, 0.0, 12.5):
            fd = (eval_parabola(gauge, seg, t + h) - eval_parabola(gauge, seg, t - h)) / (2 * h)
            analytic = eval_velocity(gauge, seg, t)
            assert np.allclose(analytic, fd * gauge.fps, rtol=1e-6, atol=1e-9)

    def test_constant_gravity_slope(self):
        fps = 60.0
        gauge = GlobalGauge(b1=9.81 / fps**2, beta_x=0.0, beta_y1=0.0, fps=fps)
        seg = ParabolaParams(b2=-0.02, b3=0.05, beta_y0=0.0)
        v0 = eval_velocity(gauge, seg, 0.0)
        v1 = eval_velocity(gauge, seg, fps)  # one second later
        assert np.allclose(v1[1] - v0[1], 9.81, atol=1e-10)
        assert np.allclose(v1[[0, 2]], v0[[0, 2]])


class TestGaugeSharing:
    def test_beta_y0_never_moves_gravity(self):
        # gravity is implied by the shared gauge alone (beta_y0 is pinned to 0
        # in its definition); per-segment rotations cannot touch it
        gauge = GlobalGauge(b1=9.81 / 3600, beta_x=0.3, beta_y1=0.8, fps=60.0)
        g = gravity_vector(gauge)
        seg = ParabolaParams(b2=0.1, b3=0.2, beta_y0=0.0)
        for beta_y0 in np.linspace(-np.pi, np.pi, 17):
            seg.beta_y0 = beta_y0
            assert np.array_equal(gravity_vector(gauge), g)
        # in the gravity-aligned regime (beta_x = 0) every segment's curvature
        # axis coincides with the implied gravity direction for any beta_y0
        aligned = GlobalGauge(b1=9.81 / 3600, beta_x=0.0, beta_y1=0.4, fps=60.0)
        g = gravity_vector(aligned)
        for beta_y0 in np.linspace(-np.pi, np.pi, 17):
            rot = yxy_rotation(beta_y0, aligned.beta_x, aligned.beta_y1)
            assert np.allclose(rot @ [0, aligned.b1 * aligned.fps**2, 0], g, atol=1e-12)

    def test_invalid_gauge(self):
        with pytest.raises(ValueError):
            GlobalGauge(b1=-0.1, beta_x=0.0, beta_y1=0.0, fps=60.0)
        with pytest.raises(ValueError):
            GlobalGauge(b1=0.1, beta_x=0.0, beta_y1=0.0, fps=0.0)
