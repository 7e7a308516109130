"""Experiment instances, solver comparisons, and Monte-Carlo validation.

Two instance families are provided: a fixed pendulum discretization with
input-dependent noise scaled by a level factor eta in [0, 1], and randomly
generated two-state systems whose multiplicative noise variances are scaled
so the open loop sits exactly at the mean-square stability boundary before a
random fraction eta of that critical level is applied (the generated
instances are therefore open-loop mean-square stable by construction).

``run_comparison`` runs the configured solvers on one instance, computes the
relative-error trace

    e_k = max over blocks of ||M_k - M*||_F / ||M_0 - M*||_F

against a high-accuracy reference fixed point, and reports per-method
iteration counts, timings, and the value-iteration/policy-iteration ratios.

CSV outputs (written by the CLI): a summary with one row per
(instance, method) and a long-format trace of e_k per iteration.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import numpy.linalg as la

from . import moments, riccati
from .exceptions import RetryExhausted, SolverError, UnstableRollout
from .matrixmath import psd_factor, specrad
from .model import Controller, CostModel, NoiseModel, NoiseTerm, ProblemInstance, SystemModel
from .moments import ValueCovarianceTuple

__all__ = [
    "BenchConfig",
    "ConvergenceRecord",
    "ComparisonResult",
    "RolloutEstimate",
    "pendulum_problem",
    "random_problem",
    "convergence_metric",
    "run_comparison",
    "monte_carlo_cost",
    "SUMMARY_COLUMNS",
    "TRACE_COLUMNS",
    "write_summary_csv",
    "write_trace_csv",
]

METHODS = ("policy_iteration", "value_iteration")

# Denominators below this are treated as a zero initial error and the
# block's relative error is pinned to 0 so it cannot poison the max.
ZERO_ERROR_GUARD = 1e-300

REFERENCE_TOL = 1e-12


@dataclass(frozen=True)
class BenchConfig:
    """Benchmark configuration shared by the pendulum and random suites."""

    etas: tuple[float, ...] = ()
    count: int = 1
    seed: int = 0
    tol: float = riccati.DEFAULT_TOL
    max_iter: int | None = None  # None: per-method defaults
    methods: tuple[str, ...] = METHODS

    def __post_init__(self):
        for eta in self.etas:
            if not 0.0 <= eta <= 1.0:
                raise ValueError(f"eta must lie in [0, 1], got {eta}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        for method in self.methods:
            if method not in METHODS:
                raise ValueError(f"unknown method {method!r}")

    def max_iter_for(self, method: str) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return riccati.PI_MAX_ITER if method == "policy_iteration" else riccati.VI_MAX_ITER


@dataclass(frozen=True, eq=False)
class ConvergenceRecord:
    """Per-method outcome on one instance."""

    method: str
    converged: bool
    iterations: int | None
    wall_seconds: float | None
    final_residual: float | None
    cost: float | None
    e_k: tuple[float, ...] = ()
    cum_seconds: tuple[float, ...] = ()
    error: str | None = None


@dataclass(frozen=True, eq=False)
class ComparisonResult:
    """All method records for one instance plus the VI/PI ratios."""

    records: tuple[ConvergenceRecord, ...]
    ratio_iterations: float | None = None
    ratio_time: float | None = None


@dataclass(frozen=True, eq=False)
class RolloutEstimate:
    """Finite-horizon, finite-sample estimate of the average cost."""

    horizon: int
    trials: int
    seed: int
    cost_mean: float
    cost_stderr: float


def pendulum_problem(eta: float) -> ProblemInstance:
    """Euler-discretized torque-actuated pendulum with input-dependent noise.

    States are angular position and velocity; the single multiplicative
    noise term acts on the torque channel with standard deviation eta.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    system = SystemModel(
        A=[[1.0, 0.1], [1.0, 0.95]],
        B=[[0.0], [0.1]],
        C=[[1.0, 0.0]],
        noise_b=(NoiseTerm(eta * 1.0, [[0.0], [1.0]]),),
    )
    return ProblemInstance(
        system,
        CostModel(np.eye(3)),
        NoiseModel(W=np.diag([0.0, 0.01, 0.001]), X0=np.zeros((2, 2))),
    )


def _open_loop_radius(problem: ProblemInstance) -> float:
    aug = moments.build_augmented(problem, riccati.open_loop_controller(problem))
    return moments.spectral_radius(moments.build_second_moment_matrix(aug, "value"))


def _critical_noise_scale(A, B, C, patterns, variances, Q, W):
    """Scale c on the variances putting the open loop exactly at radius 1.

    The radius is monotone increasing in c, so the root is bracketed by
    doubling and then bisected until |radius - 1| <= 1e-10.  Returns None
    when the target is unreachable (noise directions that cannot push the
    open loop to the boundary).
    """

    def radius(c):
        sigmas = np.sqrt(c * variances)
        prob = _assemble_random(A, B, C, patterns, sigmas, Q, W)
        return _open_loop_radius(prob)

    hi = 1.0
    for _ in range(80):
        if radius(hi) >= 1.0:
            break
        hi *= 2.0
    else:
        return None
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = radius(mid)
        if abs(r - 1.0) <= 1e-10:
            return mid
        if r < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(hi, 1.0):
            break
    return 0.5 * (lo + hi)


def _assemble_random(A, B, C, patterns, sigmas, Q, W):
    Ad, Bd, Cd = patterns
    n = A.shape[0]
    system = SystemModel(
        A,
        B,
        C,
        noise_a=(NoiseTerm(sigmas[0], Ad),),
        noise_b=(NoiseTerm(sigmas[1], Bd),),
        noise_c=(NoiseTerm(sigmas[2], Cd),),
    )
    return ProblemInstance(
        system, CostModel(Q), NoiseModel(W=W, X0=np.zeros((n, n)))
    )


def random_problem(seed: int, max_redraws: int = 20):
    """Random two-state instance (n=2, m=1, p=1, one noise term per matrix).

    Entries of the mean matrices and noise patterns are standard normal; A
    is rescaled to a uniform random spectral radius in (0, 1); the noise
    variances are drawn uniform, rescaled so the open loop sits exactly at
    the mean-square stability boundary, and then multiplied by a uniform
    random level eta.  Returns (problem, eta); deterministic in ``seed``.

    Raises RetryExhausted when no draw reaches the boundary target within
    ``max_redraws`` attempts.
    """
    rng = np.random.default_rng(seed)
    n, m, p = 2, 1, 1
    Q = np.eye(n + m)
    W = 0.01 * np.eye(n + p)
    for _ in range(max_redraws):
        A = rng.standard_normal((n, n))
        rho_target = rng.uniform(0.0, 1.0)
        B = rng.standard_normal((n, m))
        C = rng.standard_normal((p, n))
        patterns = (
            rng.standard_normal((n, n)),
            rng.standard_normal((n, m)),
            rng.standard_normal((p, n)),
        )
        variances = rng.uniform(0.0, 1.0, size=3)
        eta = rng.uniform(0.0, 1.0)
        rho_A = specrad(A)
        if rho_A <= 1e-12:
            continue
        A = A * (rho_target / rho_A)
        scale = _critical_noise_scale(A, B, C, patterns, variances, Q, W)
        if scale is None:
            continue
        sigmas = np.sqrt(scale * variances * eta)
        return _assemble_random(A, B, C, patterns, sigmas, Q, W), eta
    raise RetryExhausted(
        f"could not reach the open-loop stability boundary in {max_redraws} draws"
    )


def convergence_metric(
    history, reference: ValueCovarianceTuple
) -> list[float]:
    """Relative errors e_k of an iterate trajectory against a fixed point.

    Per block, delta_k = ||M_k - M*|| / ||M_0 - M*|| (Frobenius); blocks
    whose initial error is zero contribute 0.  e_k is the max over the four
    blocks, so e_0 = 1 whenever the trajectory does not start at the fixed
    point.
    """
    if not history:
        return []
    base = [
        float(la.norm(b0 - br))
        for b0, br in zip(history[0].blocks(), reference.blocks())
    ]
    out = []
    for X in history:
        deltas = [
            0.0 if den <= ZERO_ERROR_GUARD else float(la.norm(bk - br)) / den
            for bk, br, den in zip(X.blocks(), reference.blocks(), base)
        ]
        out.append(max(deltas))
    return out


def _run_method(problem, method, config):
    if method == "value_iteration":
        return riccati.value_iteration_solve(
            problem, tol=config.tol, max_iter=config.max_iter_for(method)
        )
    initial = riccati.stabilizing_initial_controller(problem)
    return riccati.policy_iteration_solve(
        problem, initial, tol=config.tol, max_iter=config.max_iter_for(method)
    )


def _reference_solution(problem, config, reports):
    """High-accuracy anchor for e_k: the policy-iteration fixed point at
    tol 1e-12, falling back to value iteration when policy iteration is
    unavailable."""
    if config.tol <= REFERENCE_TOL:
        for method in ("policy_iteration", "value_iteration"):
            if method in reports:
                return reports[method].solution
        return None
    for method in ("policy_iteration", "value_iteration"):
        try:
            cfg = BenchConfig(tol=REFERENCE_TOL, methods=(method,))
            return _run_method(problem, method, cfg).solution
        except SolverError:
            continue
    return None


def run_comparison(problem: ProblemInstance, config: BenchConfig) -> ComparisonResult:
    """Run each configured method on one instance and collect records.

    Solver failures are captured per method (they do not raise), so a batch
    caller can keep going; the VI/PI ratios are filled only when both
    methods produced converged runs.
    """
    reports = {}
    failures = {}
    for method in config.methods:
        try:
            reports[method] = _run_method(problem, method, config)
        except SolverError as exc:
            failures[method] = exc

    reference = _reference_solution(problem, config, reports)

    records = []
    for method in config.methods:
        if method in reports:
            rep = reports[method]
            e_k = (
                tuple(convergence_metric(rep.solution_history, reference))
                if reference is not None
                else ()
            )
            records.append(
                ConvergenceRecord(
                    method=method,
                    converged=rep.converged,
                    iterations=rep.iterations,
                    wall_seconds=rep.history[-1].seconds,
                    final_residual=rep.residual_norm,
                    cost=rep.cost,
                    e_k=e_k,
                    cum_seconds=tuple(entry.seconds for entry in rep.history),
                )
            )
        else:
            exc = failures[method]
            records.append(
                ConvergenceRecord(
                    method=method,
                    converged=False,
                    iterations=getattr(exc, "iterations", None),
                    wall_seconds=None,
                    final_residual=None,
                    cost=None,
                    error=str(exc),
                )
            )

    ratio_iterations = None
    ratio_time = None
    if (
        "policy_iteration" in reports
        and "value_iteration" in reports
        and reports["policy_iteration"].iterations > 0
    ):
        pi_rep = reports["policy_iteration"]
        vi_rep = reports["value_iteration"]
        ratio_iterations = vi_rep.iterations / pi_rep.iterations
        pi_time = pi_rep.history[-1].seconds
        if pi_time > 0.0:
            ratio_time = vi_rep.history[-1].seconds / pi_time
    return ComparisonResult(tuple(records), ratio_iterations, ratio_time)


def monte_carlo_cost(
    problem: ProblemInstance,
    ctrl: Controller,
    horizon: int,
    trials: int,
    seed: int,
) -> RolloutEstimate:
    """Estimate the average cost by simulating the closed loop.

    Simulates ``trials`` independent rollouts of length ``horizon`` with
    Gaussian additive noise (joint covariance W), Gaussian multiplicative
    scalars, x0 ~ N(0, X0), and xhat0 = 0; returns the mean over trials of
    the time-averaged cost and its standard error.  Deterministic in
    ``seed``.  Raises UnstableRollout when the state overflows.
    """
    if horizon < 1 or trials < 1:
        raise ValueError("horizon and trials must be >= 1")
    sys = problem.system
    n, p = sys.n, sys.p
    if ctrl.F.shape != (n, n) or ctrl.K.shape != (sys.m, n) or ctrl.L.shape != (n, p):
        raise ValueError("controller dimensions do not match the problem")
    rng = np.random.default_rng(seed)
    W_factor = psd_factor(problem.noise.W)
    X0_factor = psd_factor(problem.noise.X0)
    x = rng.standard_normal((trials, n)) @ X0_factor.T
    xhat = np.zeros((trials, n))
    costs = np.zeros(trials)
    Q = problem.cost.Q
    for step in range(horizon):
        wv = rng.standard_normal((trials, n + p)) @ W_factor.T
        alphas = [rng.standard_normal((trials, 1)) for _ in sys.noise_a]
        betas = [rng.standard_normal((trials, 1)) for _ in sys.noise_b]
        gammas = [rng.standard_normal((trials, 1)) for _ in sys.noise_c]

        u = xhat @ ctrl.K.T
        z = np.hstack([x, u])
        costs += np.einsum("ti,ij,tj->t", z, Q, z)

        y = x @ sys.C.T + wv[:, n:]
        for g, t in zip(gammas, sys.noise_c):
            y += t.sigma * g * (x @ t.pattern.T)
        x_next = x @ sys.A.T + u @ sys.B.T + wv[:, :n]
        for a, t in zip(alphas, sys.noise_a):
            x_next += t.sigma * a * (x @ t.pattern.T)
        for b, t in zip(betas, sys.noise_b):
            x_next += t.sigma * b * (u @ t.pattern.T)
        xhat = xhat @ ctrl.F.T + y @ ctrl.L.T
        x = x_next
        if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > 1e100:
            raise UnstableRollout(step)
    per_trial = costs / horizon
    mean = float(per_trial.mean())
    stderr = float(per_trial.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return RolloutEstimate(horizon, trials, seed, mean, stderr)


# ---------------------------------------------------------------------------
# CSV output

SUMMARY_COLUMNS = (
    "seed",
    "eta",
    "method",
    "iterations",
    "wall_seconds",
    "final_residual",
    "cost_J",
    "converged",
    "ratio_iterations",
    "ratio_time",
    "error",
)

TRACE_COLUMNS = ("seed", "method", "k", "e_k", "cum_seconds")


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_summary_csv(path, entries) -> None:
    """Write one row per (instance, method).

    ``entries`` is a sequence of (seed, eta, ComparisonResult).  The
    wall_seconds and ratio_time columns are wall-clock measurements and are
    exempt from byte-level reproducibility; everything else is deterministic
    given seeds.
    """
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_COLUMNS)
        for seed, eta, result in entries:
            for rec in result.records:
                writer.writerow(
                    [
                        _cell(seed),
                        _cell(float(eta)),
                        rec.method,
                        _cell(rec.iterations),
                        _cell(rec.wall_seconds),
                        _cell(rec.final_residual),
                        _cell(rec.cost),
                        _cell(rec.converged),
                        _cell(result.ratio_iterations),
                        _cell(result.ratio_time),
                        _cell(rec.error),
                    ]
                )


def write_trace_csv(path, entries) -> None:
    """Write the long-format e_k traces, one row per (instance, method, k)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for seed, _eta, result in entries:
            for rec in result.records:
                for k, e_k in enumerate(rec.e_k):
                    cum = rec.cum_seconds[k] if k < len(rec.cum_seconds) else None
                    writer.writerow(
                        [_cell(seed), rec.method, k, _cell(float(e_k)), _cell(cum)]
                    )
