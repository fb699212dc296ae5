import numpy as np
import pytest

from lqgsched import (
    CostModel,
    LinearSystem,
    Problem,
    controllability_check,
    observability_check,
    validate,
)
from lqgsched.model import psd_sqrt

from conftest import A1, B, C3, Q3, R2, SIGMA, make_problem


def codes(problem):
    return [v.code for v in validate(problem)]


def test_benchmark_problem_is_valid():
    assert validate(make_problem(A1, 10.0)) == []


def test_zero_R_flagged():
    sys = LinearSystem(A=A1, B=B, C=C3, Sigma_S=SIGMA)
    cost = CostModel(Q=Q3, R=np.zeros((2, 2)), beta=0.95, O=1.0)
    assert "R_not_pd" in codes(Problem(sys=sys, cost=cost))


def test_zero_noise_flagged():
    sys = LinearSystem(A=A1, B=B, C=C3, Sigma_S=np.zeros((3, 3)))
    cost = CostModel(Q=Q3, R=R2, beta=0.95, O=1.0)
    assert "noise_gram_not_pd" in codes(Problem(sys=sys, cost=cost))


def test_scalar_and_range_violations():
    sys = LinearSystem(A=A1, B=B, C=C3, Sigma_S=SIGMA)
    bad = CostModel(Q=Q3, R=R2, beta=1.5, O=-2.0)
    got = codes(Problem(sys=sys, cost=bad))
    assert "beta_range" in got and "O_negative" in got


def test_indefinite_Q_flagged():
    sys = LinearSystem(A=A1, B=B, C=C3, Sigma_S=SIGMA)
    Qbad = np.diag([1.0, -1.0, 1.0])
    cost = CostModel(Q=Qbad, R=R2, beta=0.95, O=1.0)
    assert "Q_not_psd" in codes(Problem(sys=sys, cost=cost))


def test_dimension_violations_reported_not_raised():
    sys = LinearSystem(A=A1, B=np.ones((2, 1)), C=C3, Sigma_S=SIGMA)
    cost = CostModel(Q=Q3, R=np.eye(1), beta=0.95, O=0.0)
    got = codes(Problem(sys=sys, cost=cost, x0=[1.0, 2.0]))
    assert "B_rows" in got and "x0_shape" in got


def test_validate_idempotent():
    sys = LinearSystem(A=A1, B=B, C=C3, Sigma_S=np.zeros((3, 3)))
    cost = CostModel(Q=Q3, R=np.zeros((2, 2)), beta=1.2, O=-1.0)
    p = Problem(sys=sys, cost=cost)
    assert codes(p) == codes(p)


def test_psd_sqrt_reconstructs_Q():
    rng = np.random.default_rng(7)
    for _ in range(50):
        q = int(rng.integers(1, 5))
        J = rng.normal(size=(q, q))
        # mix of full-rank and rank-deficient PSD matrices
        if rng.random() < 0.3:
            J[0] = 0.0
        Q = J.T @ J
        S = psd_sqrt(Q)
        assert np.max(np.abs(Q - S.T @ S)) < 1e-10


def test_controllability_sys_matrices():
    assert controllability_check(LinearSystem(A=A1, B=B, C=C3, Sigma_S=SIGMA))


def test_zero_input_map_uncontrollable():
    sys = LinearSystem(A=np.eye(3), B=np.zeros((3, 2)), C=C3, Sigma_S=SIGMA)
    assert not controllability_check(sys)


def test_full_rank_Q_always_observable():
    rng = np.random.default_rng(11)
    for _ in range(10):
        A = rng.normal(size=(3, 3))
        sys = LinearSystem(A=A, B=B, C=C3, Sigma_S=SIGMA)
        assert observability_check(sys, 0.1 * np.eye(3))


def test_rank_deficient_pair_not_observable():
    # Q weighs only the first coordinate and A keeps coordinates decoupled.
    A = np.diag([0.5, 0.6, 0.7])
    sys = LinearSystem(A=A, B=B, C=C3, Sigma_S=SIGMA)
    Q = np.diag([1.0, 0.0, 0.0])
    assert not observability_check(sys, Q)


def test_nonsquare_A_rejected():
    with pytest.raises(ValueError):
        LinearSystem(A=np.ones((2, 3)), B=np.ones((2, 1)), C=np.eye(2), Sigma_S=np.eye(2))
