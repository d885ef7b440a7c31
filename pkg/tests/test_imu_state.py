import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imumatch.errors import InvalidIntervalError, OrderingError, OutOfRangeError
from imumatch.geometry import EulerAngles
from imumatch.imu_state import (CameraState, FrameMode, ImuSample, IntegratorConfig, StateLog,
                                build_log, integrate_step, relative_pose, state_at)

CFG = IntegratorConfig()


def rest(t=0.0):
    return CameraState(t, EulerAngles(), np.zeros(3), np.zeros(3))


def constant_stream(n, dt, accel=(0, 0, 0), omega=(0, 0, 0)):
    return [ImuSample((k + 1) * dt, omega, accel) for k in range(n)]


def summation_oracle(n, dt, a):
    """Independent closed-form-free reference: sum per-step kinematics."""
    v = x = 0.0
    for _ in range(n):
        x += v * dt + 0.5 * a * dt * dt
        v += a * dt
    return v, x


def test_zero_dynamics_step():
    s = integrate_step(rest(1.0), ImuSample(1.5, (0, 0, 0), (0, 0, 0)), 0.5, CFG)
    assert s.t == 1.5
    assert s.theta == (0, 0, 0)
    np.testing.assert_array_equal(s.vel, 0)
    np.testing.assert_array_equal(s.disp, 0)


@pytest.mark.parametrize("dt", [0.0, -0.1])
def test_step_rejects_bad_interval(dt):
    with pytest.raises(InvalidIntervalError):
        integrate_step(rest(), ImuSample(1, (0, 0, 0), (0, 0, 0)), dt, CFG)


def test_constant_acceleration_is_exact():
    log = build_log(constant_stream(100, 0.01, accel=(1, 0, 0)))
    v_ref, x_ref = summation_oracle(100, 0.01, 1.0)
    last = log[-1]
    assert last.vel[0] == pytest.approx(v_ref, abs=1e-12)
    assert last.disp[0] == pytest.approx(x_ref, abs=1e-12)
    assert last.vel[0] == pytest.approx(1.0, abs=1e-9)
    assert last.disp[0] == pytest.approx(0.5, abs=1e-9)
    np.testing.assert_array_equal(last.vel[1:], 0)


def test_yaw_rate_accumulates_into_psi():
    log = build_log(constant_stream(100, 1.0, omega=(0, 0, math.pi / 100)))
    ref = 0.0
    for _ in range(100):
        ref += math.pi / 100
    assert log[-1].theta.psi == pytest.approx(ref, abs=1e-12)
    assert log[-1].theta.psi == pytest.approx(math.pi, abs=1e-9)
    assert log[-1].theta.theta == 0 and log[-1].theta.phi == 0


def test_gyro_axes_map_roll_pitch_yaw():
    s = integrate_step(rest(), ImuSample(1, (1, 2, 3), (0, 0, 0)), 1.0, CFG)
    assert s.theta == EulerAngles(psi=3, theta=2, phi=1)


def test_gravity_is_subtracted():
    cfg = IntegratorConfig(gravity=(0, 0, 9.81))
    log = build_log(constant_stream(10, 0.1, accel=(0, 0, 9.81)), cfg)
    np.testing.assert_allclose(log[-1].disp, 0, atol=1e-12)


def test_world_frame_rotates_acceleration():
    # camera yawed by +90 deg: body x points along world y
    cfg = IntegratorConfig(initial_theta=EulerAngles(psi=math.pi / 2), frame_mode=FrameMode.WORLD_FRAME)
    s = integrate_step(cfg.initial_state(), ImuSample(1, (0, 0, 0), (1, 0, 0)), 1.0, cfg)
    np.testing.assert_allclose(s.vel, (0, 1, 0), atol=1e-12)
    body = integrate_step(cfg.initial_state(), ImuSample(1, (0, 0, 0), (1, 0, 0)), 1.0, IntegratorConfig())
    np.testing.assert_allclose(body.vel, (1, 0, 0))


def test_empty_stream_is_ordering_error():
    with pytest.raises(OrderingError):
        build_log([])


def test_single_sample_log():
    log = build_log([ImuSample(0.01, (0, 0, 0), (0, 0, 0))])
    assert len(log) == 2
    assert log.times == [0.0, 0.01]
    for s in log:
        np.testing.assert_array_equal(s.disp, 0)


def test_non_monotonic_stream_names_index():
    samples = [ImuSample(0.1, (0, 0, 0), (0, 0, 0)), ImuSample(0.2, (0, 0, 0), (0, 0, 0)),
               ImuSample(0.2, (0, 0, 0), (0, 0, 0))]
    with pytest.raises(OrderingError) as exc:
        build_log(samples)
    assert exc.value.index == 2
    assert "2" in str(exc.value)


@given(st.lists(st.floats(1e-3, 0.1), min_size=1, max_size=40))
def test_log_timestamps_strictly_increase(dts):
    t, samples = 0.0, []
    for dt in dts:
        t += dt
        samples.append(ImuSample(t, (0.1, 0, 0), (0, 0.2, 0)))
    times = build_log(samples).times
    assert all(b > a for a, b in zip(times, times[1:]))


def _log(times):
    return StateLog([CameraState(t, EulerAngles(t, 0, 0), np.zeros(3), np.full(3, t)) for t in times])


def test_state_at_exact_hit():
    log = _log([0.0, 1.0, 1.1])
    assert state_at(log, 1.1).t == 1.1


def test_state_at_tie_goes_earlier():
    assert state_at(_log([0.0, 1.0, 1.1]), 1.05).t == 1.0


def test_state_at_out_of_range():
    with pytest.raises(OutOfRangeError):
        state_at(_log([0.0, 1.0, 1.1]), 2.1)


def test_relative_pose_same_time_is_identity():
    log = build_log(constant_stream(50, 0.02, accel=(1, 2, 3), omega=(0.1, 0.2, 0.3)))
    pose = relative_pose(log, 0.5, 0.5)
    assert pose.rotation == (0, 0, 0)
    np.testing.assert_array_equal(pose.translation, 0)


def test_relative_pose_stationary():
    log = build_log(constant_stream(50, 0.02))
    pose = relative_pose(log, 0.1, 0.9)
    assert pose.rotation == (0, 0, 0)
    np.testing.assert_array_equal(pose.translation, 0)


def test_relative_pose_constant_acceleration():
    log = build_log(constant_stream(100, 0.01, accel=(1, 0, 0)))
    pose = relative_pose(log, 0.0, 1.0)
    np.testing.assert_allclose(pose.translation, (0.5, 0, 0), atol=1e-9)
    assert pose.rotation == (0, 0, 0)


def test_relative_pose_euler_order():
    log = build_log(constant_stream(10, 0.1, omega=(1, 2, 3)))
    pose = relative_pose(log, 0.0, 1.0)
    assert pose.rotation == pytest.approx((3, 2, 1))


@settings(max_examples=50)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2)), min_size=3, max_size=30),
       st.data())
def test_translation_and_rotation_additivity(accels, data):
    samples = [ImuSample(0.05 * (k + 1), a, a[::-1]) for k, a in enumerate(accels)]
    log = build_log(samples)
    times = log.times
    i1 = data.draw(st.integers(0, len(times) - 1))
    i2 = data.draw(st.integers(i1, len(times) - 1))
    i3 = data.draw(st.integers(i2, len(times) - 1))
    t1, t2, t3 = times[i1], times[i2], times[i3]
    a, b, c = relative_pose(log, t1, t2), relative_pose(log, t2, t3), relative_pose(log, t1, t3)
    np.testing.assert_allclose(a.translation + b.translation, c.translation, atol=1e-9)
    np.testing.assert_allclose(np.add(a.rotation, b.rotation), c.rotation, atol=1e-9)


def test_build_log_is_deterministic():
    rng = np.random.default_rng(5)
    samples = [ImuSample(0.01 * (k + 1), rng.normal(size=3), rng.normal(size=3)) for k in range(200)]
    a, b = build_log(samples), build_log(samples)
    for x, y in zip(a, b):
        assert x.t == y.t and x.theta == y.theta
        assert x.vel.tobytes() == y.vel.tobytes() and x.disp.tobytes() == y.disp.tobytes()
