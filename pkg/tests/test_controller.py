import numpy as np
import pytest

from lqgsched import (
    InfinitePeriod,
    MeasurementUnavailable,
    initial_state,
    make_packet,
    optimal_period,
    step_decide,
)
from lqgsched.model import psd_sqrt

from conftest import A1, B, BETA, X0, make_problem, random_admissible_with_finite_T


def drive_plant(ps, x0, H, seed=0):
    """Run the online session against a seeded plant; returns full telemetry."""
    sys = ps.sys
    rng = np.random.default_rng(seed)
    noise_sqrt = psd_sqrt(sys.Sigma_S)
    state = initial_state(ps, x0)
    x = np.asarray(x0, dtype=float).copy()
    u_prev = None
    out = []
    for t in range(H):
        i, u, state = step_decide(state, x, ps, u_prev)
        out.append((i, u, state, x.copy()))
        w = noise_sqrt @ rng.standard_normal(sys.q)
        x = sys.A @ x + sys.B @ u + sys.C @ w
        u_prev = u
    return out


def test_packet_zero_state_zero_controls(ps1_O10):
    pkt = make_packet(np.zeros(3), ps1_O10)
    assert pkt.T == 6
    assert np.all(pkt.controls == 0.0)


def test_packet_length_matches_period():
    p = make_problem(A1, 50.0)
    ps = optimal_period(p.sys, p.cost)
    pkt = make_packet(X0, ps)
    assert pkt.T == 8
    assert pkt.controls.shape == (8, 2)


def test_packet_two_computation_routes_agree(ps1_O10):
    ps = ps1_O10
    pkt = make_packet(X0, ps)
    K = ps.are.K
    closed = A1 - B @ K
    for j in range(pkt.T):
        direct = -K @ (np.linalg.matrix_power(closed, j) @ X0)
        assert np.max(np.abs(pkt.controls[j] - direct)) < 1e-10


def test_packet_requires_cap_for_never_measure(ps2_O7):
    with pytest.raises(InfinitePeriod):
        make_packet(X0, ps2_O7)
    pkt = make_packet(X0, ps2_O7, horizon=12)
    assert pkt.T == 12


def test_packet_roundtrip_dict(ps1_O10):
    pkt = make_packet(X0, ps1_O10)
    back = type(pkt).from_dict(pkt.as_dict(), p=2)
    assert back.T == pkt.T
    assert np.array_equal(back.controls, pkt.controls)


def test_first_step_is_free(ps1_O10):
    state = initial_state(ps1_O10, X0)
    i, u, state = step_decide(state, X0, ps1_O10, None)
    assert i == 0
    assert np.array_equal(u, -(ps1_O10.are.K @ X0))
    assert state.t == 1 and state.m == 0


def test_trigger_quiet_on_fresh_state(ps1_O10):
    # right after a measurement the surrogate covariance is zero, so any
    # positive price keeps the trigger off
    telemetry = drive_plant(ps1_O10, X0, 2)
    assert telemetry[1][0] == 0


def test_online_period_matches_schedule(ps1_O10):
    telemetry = drive_plant(ps1_O10, X0, 60)
    fires = [t for t, (i, _, _, _) in enumerate(telemetry) if i == 1]
    assert fires == [6, 12, 18, 24, 30, 36, 42, 48, 54]


def test_zero_price_fires_every_step():
    p = make_problem(A1, 0.0)
    ps = optimal_period(p.sys, p.cost)
    telemetry = drive_plant(ps, X0, 10)
    assert [i for i, _, _, _ in telemetry] == [0] + [1] * 9


def test_measurement_required_when_trigger_fires(ps1_O10):
    ps = ps1_O10
    state = initial_state(ps, X0)
    x = X0
    u = None
    for _ in range(6):
        _, u_out, state = step_decide(state, x, ps, u)
        u = u_out
    with pytest.raises(MeasurementUnavailable):
        step_decide(state, None, ps, u)


def test_never_measure_trigger_stays_off(ps2_O7):
    telemetry = drive_plant(ps2_O7, X0, 80)
    assert all(i == 0 for i, _, _, _ in telemetry)


def test_surrogate_covariance_closed_form(ps1_O10):
    ps = ps1_O10
    G = ps.sys.noise_gram()
    telemetry = drive_plant(ps, X0, 25)
    for _, _, state, _ in telemetry:
        ref = np.zeros((3, 3))
        for j in range(state.m):
            ref += (1 - BETA ** (j + 1)) / (1 - BETA) * (
                np.linalg.matrix_power(A1.T, j) @ G @ np.linalg.matrix_power(A1, j)
            )
        assert np.max(np.abs(state.P_bar - ref)) < 1e-12


def test_estimate_is_noiseless_propagation(ps1_O10):
    ps = ps1_O10
    telemetry = drive_plant(ps, X0, 30, seed=3)
    x_hat = X0.copy()
    for t, (i, u, state, x_true) in enumerate(telemetry):
        if i == 1:
            x_hat = x_true.copy()
        elif t > 0:
            x_hat = A1 @ x_hat + B @ telemetry[t - 1][1]
        assert np.array_equal(state.x_bar, x_hat)
        assert np.array_equal(u, -(ps.are.K @ x_hat))


def packet_chain_stream(ps, x0, H, seed):
    """Replay the packet representation against an identically seeded plant."""
    sys = ps.sys
    rng = np.random.default_rng(seed)
    noise_sqrt = psd_sqrt(sys.Sigma_S)
    x = np.asarray(x0, dtype=float).copy()
    pkt = make_packet(x, ps)
    j = 0
    stream = []
    for t in range(H):
        if t > 0 and j == pkt.T:
            pkt = make_packet(x, ps)
            j = 0
            i = 1
        else:
            i = 0
        u = pkt.controls[j]
        j += 1
        stream.append((i, u.copy()))
        w = noise_sqrt @ rng.standard_normal(sys.q)
        x = sys.A @ x + sys.B @ u + sys.C @ w
    return stream


def test_online_equals_packet_chain_randomized():
    rng = np.random.default_rng(99)
    for _ in range(5):
        sys, cost, ps = random_admissible_with_finite_T(rng, T_cap=12)
        x0 = rng.normal(size=sys.q) * 3.0
        H = 5 * ps.period + 7
        online = drive_plant(ps, x0, H, seed=1234)
        chain = packet_chain_stream(ps, x0, H, seed=1234)
        for (i_a, u_a, _, _), (i_b, u_b) in zip(online, chain):
            assert i_a == i_b
            assert np.array_equal(u_a, u_b)
