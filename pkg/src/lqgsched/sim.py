"""Seeded closed-loop simulation with discounted cost accounting.

Noise is drawn from numpy's PCG64 generator; run k of a Monte Carlo batch
uses the substream seeded with ``seed + k``, so any single run can be
reproduced bit-for-bit in isolation. Gaussian plant noise w ~ N(0, Sigma_S)
is sampled as sqrt(Sigma_S) @ z with the symmetric PSD square root, which
also supports degenerate covariances (useful for noiseless test modes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import initial_state, step_decide
from .model import Problem, psd_sqrt
from .policy import PolicySolution

__all__ = [
    "Strategy",
    "OPTIMAL",
    "ALWAYS_MEASURE",
    "NEVER_MEASURE",
    "fixed_period",
    "SimConfig",
    "TrajectoryRecord",
    "simulate",
    "monte_carlo_value",
    "empirical_error_covariance",
]


@dataclass(frozen=True)
class Strategy:
    """Measurement schedule selector: optimal trigger, always, never, or fixed-T."""

    kind: str
    period: int | None = None

    def __post_init__(self):
        if self.kind not in ("optimal", "always", "never", "fixed"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "fixed" and (self.period is None or self.period < 1):
            raise ValueError("fixed strategy needs period >= 1")

    def measure_times(self, ps: PolicySolution, horizon: int) -> np.ndarray:
        """Deterministic query steps within [0, horizon); step 0 is always free."""
        if self.kind == "always":
            return np.arange(1, horizon)
        if self.kind == "never":
            return np.empty(0, dtype=int)
        if self.kind == "fixed":
            return np.arange(self.period, horizon, self.period)
        if not ps.finite:
            return np.empty(0, dtype=int)
        return np.arange(ps.period, horizon, ps.period)


OPTIMAL = Strategy("optimal")
ALWAYS_MEASURE = Strategy("always")
NEVER_MEASURE = Strategy("never")


def fixed_period(T: int) -> Strategy:
    return Strategy("fixed", period=int(T))


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters.

    The default horizon of 500 leaves a discount tail of beta^500 (about
    7e-12 at beta = 0.95), far below Monte Carlo noise.
    """

    horizon: int = 500
    seed: int = 0
    n_runs: int = 1
    strategy: Strategy = field(default_factory=lambda: OPTIMAL)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-step closed-loop trace with discounted cost accounting.

    stage_cost[t] = beta^t (x'Qx + u'Ru + i*O); cum_cost is its prefix sum,
    split into cum_state_control and cum_measure.
    """

    t: np.ndarray
    x: np.ndarray
    x_bar: np.ndarray
    err: np.ndarray
    u: np.ndarray
    i: np.ndarray
    stage_cost: np.ndarray
    cum_cost: np.ndarray
    cum_state_control: np.ndarray
    cum_measure: np.ndarray

    @property
    def total_cost(self) -> float:
        return float(self.cum_cost[-1])

    @property
    def n_measurements(self) -> int:
        return int(self.i.sum())

    def csv_text(self) -> str:
        q = self.x.shape[1]
        p = self.u.shape[1]
        header = (
            ["t"]
            + [f"x_{k+1}" for k in range(q)]
            + [f"xbar_{k+1}" for k in range(q)]
            + [f"err_{k+1}" for k in range(q)]
            + [f"u_{k+1}" for k in range(p)]
            + ["i", "stage_cost", "cum_cost"]
        )
        lines = [",".join(header)]
        for k in range(len(self.t)):
            row = (
                [str(int(self.t[k]))]
                + [repr(float(v)) for v in self.x[k]]
                + [repr(float(v)) for v in self.x_bar[k]]
                + [repr(float(v)) for v in self.err[k]]
                + [repr(float(v)) for v in self.u[k]]
                + [str(int(self.i[k])), repr(float(self.stage_cost[k])), repr(float(self.cum_cost[k]))]
            )
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.csv_text())


def _run_rng(seed: int, run: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed + run))


def simulate(problem: Problem, ps: PolicySolution, cfg: SimConfig) -> TrajectoryRecord:
    """One seeded closed-loop trajectory (substream ``seed + 0``).

    The optimal strategy runs the online controller session; the fixed
    schedules share its estimate/control arithmetic but take their query
    times from the schedule instead of the trigger.
    """
    sys, cost = problem.sys, problem.cost
    A, B, C = sys.A, sys.B, sys.C
    K = ps.are.K
    beta, O = cost.beta, cost.O
    H = cfg.horizon
    q, p = sys.q, sys.p

    rng = _run_rng(cfg.seed, 0)
    noise_sqrt = psd_sqrt(sys.Sigma_S)
    z = rng.standard_normal((H, q))

    online = cfg.strategy.kind == "optimal"
    sched = set() if online else set(cfg.strategy.measure_times(ps, H).tolist())

    x = problem.x0.copy()
    state = initial_state(ps, problem.x0)
    x_bar = problem.x0.copy()
    u_prev: np.ndarray | None = None

    X = np.empty((H, q))
    XB = np.empty((H, q))
    U = np.empty((H, p))
    I = np.zeros(H, dtype=int)
    stage = np.empty(H)
    cum_sc = np.empty(H)
    cum_ms = np.empty(H)
    tot_sc = 0.0
    tot_ms = 0.0

    for t in range(H):
        if online:
            i, u, state = step_decide(state, x, ps, u_prev)
            x_bar = state.x_bar
        else:
            if t == 0:
                i = 0
            elif t in sched:
                i = 1
                x_bar = x.copy()
            else:
                i = 0
                x_bar = A @ x_bar + B @ u_prev
            u = -(K @ x_bar)

        disc = beta**t
        sc = disc * (float(x @ cost.Q @ x) + float(u @ cost.R @ u))
        ms = disc * O if i else 0.0
        tot_sc += sc
        tot_ms += ms

        X[t] = x
        XB[t] = x_bar
        U[t] = u
        I[t] = i
        stage[t] = sc + ms
        cum_sc[t] = tot_sc
        cum_ms[t] = tot_ms

        w = noise_sqrt @ z[t]
        x = A @ x + B @ u + C @ w
        u_prev = u

    return TrajectoryRecord(
        t=np.arange(H),
        x=X,
        x_bar=XB,
        err=X - XB,
        u=U,
        i=I,
        stage_cost=stage,
        cum_cost=cum_sc + cum_ms,
        cum_state_control=cum_sc,
        cum_measure=cum_ms,
    )


def _batch_costs(problem: Problem, ps: PolicySolution, cfg: SimConfig) -> np.ndarray:
    """Total discounted cost of each run, propagated for all runs at once.

    Valid because every schedule here (including the optimal trigger, which
    is state-independent and periodic) fixes its query times in advance.
    """
    sys, cost = problem.sys, problem.cost
    A, B, C = sys.A, sys.B, sys.C
    K = ps.are.K
    beta, O = cost.beta, cost.O
    H, n = cfg.horizon, cfg.n_runs
    q = sys.q

    noise_sqrt = psd_sqrt(sys.Sigma_S)
    N_mat = C @ noise_sqrt
    W = np.empty((n, H, q))
    for r in range(n):
        W[r] = _run_rng(cfg.seed, r).standard_normal((H, q)) @ N_mat.T

    measure = np.zeros(H, dtype=bool)
    times = cfg.strategy.measure_times(ps, H)
    measure[times] = True

    X = np.tile(problem.x0, (n, 1))
    Xbar = X.copy()
    totals = np.zeros(n)
    for t in range(H):
        disc = beta**t
        if t > 0:
            if measure[t]:
                Xbar = X.copy()
                totals += disc * O
            else:
                Xbar = Xbar @ A.T + U @ B.T
        U = -(Xbar @ K.T)
        totals += disc * (
            np.einsum("ij,jk,ik->i", X, cost.Q, X) + np.einsum("ij,jk,ik->i", U, cost.R, U)
        )
        X = X @ A.T + U @ B.T + W[:, t, :]
    return totals


def monte_carlo_value(
    problem: Problem, ps: PolicySolution, cfg: SimConfig
) -> tuple[float, float]:
    """Mean total discounted cost over cfg.n_runs independent runs and its
    standard error (sample std / sqrt(n); meaningful for n_runs >= 30)."""
    totals = _batch_costs(problem, ps, cfg)
    mean = float(totals.mean())
    if cfg.n_runs == 1:
        return mean, 0.0
    se = float(totals.std(ddof=1) / math.sqrt(cfg.n_runs))
    return mean, se


def empirical_error_covariance(
    problem: Problem, ps: PolicySolution, cfg: SimConfig, t: int
) -> np.ndarray:
    """Sample covariance of the estimation error x_t - xbar_t across runs.

    Step 0 is a (free) query epoch, so for t inside the first waiting window
    the phase since the last query equals t itself.
    """
    sys = problem.sys
    A, B, C = sys.A, sys.B, sys.C
    K = ps.are.K
    n = cfg.n_runs
    q = sys.q
    if not (0 <= t < cfg.horizon):
        raise ValueError(f"step {t} outside horizon {cfg.horizon}")

    noise_sqrt = psd_sqrt(sys.Sigma_S)
    N_mat = C @ noise_sqrt
    W = np.empty((n, t if t > 0 else 1, q))
    for r in range(n):
        W[r] = _run_rng(cfg.seed, r).standard_normal((W.shape[1], q)) @ N_mat.T

    measure = np.zeros(max(t + 1, 1), dtype=bool)
    times = cfg.strategy.measure_times(ps, max(t + 1, 1))
    measure[times[times <= t]] = True

    X = np.tile(problem.x0, (n, 1))
    Xbar = X.copy()
    for step in range(t):
        if step > 0 and measure[step]:
            Xbar = X.copy()
        elif step > 0:
            Xbar = Xbar @ A.T + U @ B.T
        U = -(Xbar @ K.T)
        X = X @ A.T + U @ B.T + W[:, step, :]
    if t > 0 and measure[t]:
        Xbar = X.copy()
    elif t > 0:
        Xbar = Xbar @ A.T + U @ B.T

    E = X - Xbar
    E = E - E.mean(axis=0, keepdims=True)
    return (E.T @ E) / (n - 1)
