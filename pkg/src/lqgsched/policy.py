"""Optimal measurement scheduling for the discounted LQG loop with paid queries.

Given the Riccati solution (P, K, phi), the per-query price O determines the
optimal waiting time T* between state queries: the scheduler accumulates the
weighted phase terms

    S(T) = sum_{t=0}^{T-1} (1 - beta^{t+1})/(1 - beta) * Tr((A')^t G A^t phi),
    G = C' Sigma_S C,

and T* is the first T with S(T) > O. For Schur-stable A the limit S(inf)
exists and equals the never-measure threshold: any O at or above it makes
waiting forever optimal. The state-independent value offset r solves the
scalar fixed-point equation r = min_T f(T, r) and is computed here in closed
form per case; the brute-force iteration lives in the oracle module.

Covariance convention: the planning sequence P_t follows the adjoint
recursion P_{t+1} = A' P_t A + G. A physical simulation of the plant
propagates forward (A Cov A' + C Sigma_S C'), which differs on non-normal A;
the simulator and oracle modules quantify that gap. All scheduling and value
formulas here use the adjoint form consistently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import CostModel, LinearSystem
from .riccati import AreSolution, dare_solve, lyapunov_solve, spectral_radius

__all__ = [
    "MeasureCase",
    "PolicySolution",
    "ErrorCovSeq",
    "ValueSummary",
    "NonFiniteSearch",
    "error_cov_seq",
    "f_value",
    "h_value",
    "optimal_period",
    "never_measure_threshold",
    "value_at",
]

# Waiting times beyond this are treated as a search failure, not a policy.
T_SEARCH_CAP = 10_000

# Tail cutoff for the discounted infinite sums in the stable branch.
TAIL_TOL = 1e-9


class MeasureCase(Enum):
    MEASURE_EVERY_STEP = "measure_every_step"
    FINITE_PERIOD = "finite_period"
    NEVER_MEASURE = "never_measure"


@dataclass(frozen=True)
class PolicySolution:
    """Solved schedule: waiting time T_star, value offset r, and inputs.

    T_star is an integer for finite schedules and math.inf when measuring is
    never worth the price (possible only for Schur-stable A).
    """

    sys: LinearSystem
    cost: CostModel
    are: AreSolution
    T_star: float
    r: float
    O: float
    case_id: MeasureCase
    never_threshold: float | None = None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.T_star)

    @property
    def period(self) -> int:
        if not self.finite:
            raise ValueError("schedule never measures; no finite period exists")
        return int(self.T_star)


@dataclass(frozen=True)
class ErrorCovSeq:
    """Planning error-covariance sequence cov[t] for t = 0..T, cov[0] = 0."""

    cov: np.ndarray

    def __len__(self) -> int:
        return self.cov.shape[0]

    def __getitem__(self, t: int) -> np.ndarray:
        return self.cov[t]


def error_cov_seq(sys: LinearSystem, T: int) -> ErrorCovSeq:
    """Unmeasured-error covariances under the adjoint recursion.

    cov[0] = 0 and cov[t+1] = A' cov[t] A + C'Sigma_S C, which telescopes to
    sum_{tau=0}^{t-1} (A')^tau C'Sigma_S C A^tau.
    """
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    q = sys.q
    G = sys.noise_gram()
    cov = np.zeros((T + 1, q, q))
    for t in range(T):
        nxt = sys.A.T @ cov[t] @ sys.A + G
        cov[t + 1] = (nxt + nxt.T) / 2.0
    return ErrorCovSeq(cov=cov)


def _noise_step_trace(sys: LinearSystem, P: np.ndarray) -> float:
    """Tr(Sigma_S C'PC), the per-step cost floor paid to process noise."""
    return float(np.trace(sys.Sigma_S @ sys.C.T @ P @ sys.C))


def _phase_terms(sys: LinearSystem, phi: np.ndarray, n: int) -> np.ndarray:
    """g[t] = Tr((A')^t G A^t phi) for t = 0..n-1."""
    g = np.empty(n)
    M = sys.noise_gram()
    for t in range(n):
        g[t] = float(np.trace(M @ phi))
        M = sys.A.T @ M @ sys.A
    return g


class NonFiniteSearch(RuntimeError):
    """Bracket search exhausted its cap without locating a finite waiting time."""


def f_value(T: int, r: float, sys: LinearSystem, cost: CostModel, are: AreSolution) -> float:
    """Cycle cost of waiting T steps and then paying for a query.

    f(T, r) = sum_{t=0}^{T-1} beta^t Tr(P_t phi)
            + sum_{t=1}^{T} beta^t Tr(Sigma_S C'PC)
            + beta^T (r + O).
    The offset r solves r = min_{T >= 1} f(T, r).
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    beta = cost.beta
    seq = error_cov_seq(sys, T - 1)
    err_sum = sum(beta**t * float(np.trace(seq[t] @ are.phi)) for t in range(T))
    noise_sum = _noise_step_trace(sys, are.P) * beta * (1.0 - beta**T) / (1.0 - beta)
    return err_sum + noise_sum + beta**T * (r + cost.O)


def h_value(T: int, r: float, sys: LinearSystem, cost: CostModel, are: AreSolution) -> float:
    """Forward difference of the cycle cost: f(T+1, r) - f(T, r) = beta^T h(T, r).

    h(T, r) = Tr(P_T phi) + beta Tr(Sigma_S C'PC) - (1 - beta)(r + O), and is
    nondecreasing in T, so the sign change of h locates the minimizer of f.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    beta = cost.beta
    g = _phase_terms(sys, are.phi, T)
    return float(np.sum(g)) + beta * _noise_step_trace(sys, are.P) - (1.0 - beta) * (r + cost.O)


def _discounted_err_trace_sum(
    sys: LinearSystem, cost: CostModel, phi: np.ndarray, trace_bound: float
) -> float:
    """sum_{t>=0} beta^t Tr(P_t phi), truncated once the tail bound drops below TAIL_TOL.

    trace_bound must dominate Tr(P_t phi) for all t (Tr(W_inf phi) works since
    P_t <= W_inf in the PSD order for stable A).
    """
    beta = cost.beta
    G = sys.noise_gram()
    P = np.zeros((sys.q, sys.q))
    total = 0.0
    t = 0
    while beta**t * trace_bound / (1.0 - beta) >= TAIL_TOL:
        total += beta**t * float(np.trace(P @ phi))
        P = sys.A.T @ P @ sys.A + G
        t += 1
    return total


def never_measure_threshold(
    sys: LinearSystem, cost: CostModel, are: AreSolution | None = None
) -> float:
    """Price above which a Schur-stable loop should never buy a measurement.

    Equals Tr(W_inf phi)/(1 - beta) - sum_t beta^t Tr(P_t phi); requires
    spectral_radius(A) < 1 and raises UnstableA otherwise.
    """
    W = lyapunov_solve(sys)  # raises UnstableA for unstable A
    if are is None:
        are = dare_solve(sys, cost)
    w_trace = float(np.trace(W @ are.phi))
    return w_trace / (1.0 - cost.beta) - _discounted_err_trace_sum(sys, cost, are.phi, w_trace)


def optimal_period(
    sys: LinearSystem,
    cost: CostModel,
    are: AreSolution | None = None,
    T_cap: int = T_SEARCH_CAP,
) -> PolicySolution:
    """Solve for the optimal waiting time T* and the value offset r.

    The bracket sums S(T) are accumulated until S(T) > O, which resolves a
    price sitting exactly on a bracket boundary toward the longer wait. For
    stable A the never-measure threshold is checked first; an exhausted
    search cap means O sits just under the threshold and is reported as an
    error rather than a schedule.
    """
    if are is None:
        are = dare_solve(sys, cost)
    beta, O = cost.beta, cost.O

    threshold = None
    if spectral_radius(sys.A) < 1.0 - 1e-9:
        threshold = never_measure_threshold(sys, cost, are)
        if O >= threshold:
            w_trace = float(np.trace(lyapunov_solve(sys) @ are.phi))
            r = (
                _discounted_err_trace_sum(sys, cost, are.phi, w_trace)
                + beta / (1.0 - beta) * _noise_step_trace(sys, are.P)
            )
            return PolicySolution(
                sys=sys, cost=cost, are=are, T_star=math.inf, r=r, O=O,
                case_id=MeasureCase.NEVER_MEASURE, never_threshold=threshold,
            )

    G = sys.noise_gram()
    M = G.copy()  # (A')^t G A^t
    bracket = 0.0
    T_star = None
    for t in range(T_cap):
        bracket += (1.0 - beta ** (t + 1)) / (1.0 - beta) * float(np.trace(M @ are.phi))
        if bracket > O:
            T_star = t + 1
            break
        M = sys.A.T @ M @ sys.A
    if T_star is None:
        raise NonFiniteSearch(
            f"no waiting time up to {T_cap} exceeded the bracket for O={O}; "
            "O is within tolerance of the never-measure threshold"
        )

    seq = error_cov_seq(sys, T_star - 1)
    err_sum = sum(beta**t * float(np.trace(seq[t] @ are.phi)) for t in range(T_star))
    r = (
        err_sum / (1.0 - beta**T_star)
        + beta / (1.0 - beta) * _noise_step_trace(sys, are.P)
        + beta**T_star * O / (1.0 - beta**T_star)
    )
    case = MeasureCase.MEASURE_EVERY_STEP if T_star == 1 else MeasureCase.FINITE_PERIOD
    return PolicySolution(
        sys=sys, cost=cost, are=are, T_star=float(T_star), r=r, O=O,
        case_id=case, never_threshold=threshold,
    )


@dataclass(frozen=True)
class ValueSummary:
    """Value of the solved schedule from a given state, with comparison figures.

    V / V_s are the fixed-point value and its measurement-outlay-free part.
    V_reported / V_s_reported use a one-phase-shorter error window
    (phases 0..T*-2 normalized by 1 - beta^(T*-1)); the benchmark validation
    targets this library reproduces were produced with that window, so both
    variants are kept. V_c is the free-measurement optimum, V_e the cost of
    measuring every step (V_c plus the query outlay), and
    V_e_excluding_noise drops the stationary noise floor from V_e.
    """

    V: float
    V_s: float
    V_c: float
    V_e: float
    V_e_excluding_noise: float
    V_reported: float
    V_s_reported: float


def value_at(ps: PolicySolution, x: np.ndarray) -> ValueSummary:
    """Evaluate the schedule's value function and comparison figures at x."""
    x = np.asarray(x, dtype=float).ravel()
    beta, O = ps.cost.beta, ps.O
    xPx = float(x @ ps.are.P @ x)
    noise = _noise_step_trace(ps.sys, ps.are.P)

    V = xPx + ps.r
    V_c = xPx + beta / (1.0 - beta) * noise
    V_e = V_c + beta * O / (1.0 - beta)
    V_e_bare = xPx + beta * O / (1.0 - beta)

    if not ps.finite:
        return ValueSummary(
            V=V, V_s=V, V_c=V_c, V_e=V_e, V_e_excluding_noise=V_e_bare,
            V_reported=V, V_s_reported=V,
        )

    T = ps.period
    outlay = beta**T * O / (1.0 - beta**T)
    V_s = V - outlay

    if T >= 2:
        seq = error_cov_seq(ps.sys, T - 2)
        short = sum(beta**t * float(np.trace(seq[t] @ ps.are.phi)) for t in range(T - 1))
        V_s_rep = V_c + short / (1.0 - beta ** (T - 1))
    else:
        V_s_rep = V_c
    V_rep = V_s_rep + outlay

    return ValueSummary(
        V=V, V_s=V_s, V_c=V_c, V_e=V_e, V_e_excluding_noise=V_e_bare,
        V_reported=V_rep, V_s_reported=V_s_rep,
    )
