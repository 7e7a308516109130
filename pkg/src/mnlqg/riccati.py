"""Coupled Riccati equations for jointly optimal control and estimation.

With multiplicative noise the control and estimation designs do not
separate: the optimality conditions couple four n x n unknowns
X = (P, Phat, S, Shat) through two quadratic-form operators

    G(X)  over stacked (state, input)   -- the control side,
    H(X)  over stacked (state, output)  -- the estimation side,

whose off-diagonal and corner blocks give the gain updates

    K(X) = -G_uu^{-1} G_ux,      L(X) = H_xy H_yy^{-1},

and whose Schur complements give the fixed-point map.  The residual R(X)
stacks the four defining equations; X* solves R(X*) = 0 and the optimal
compensator is (A + B K(X*) - L(X*) C, K(X*), L(X*)).

Two solvers are provided:

* ``value_iteration_solve``: the contraction X <- X + R(X) from X = 0; needs
  no stabilizing policy but converges at a linear rate.
* ``policy_iteration_solve``: alternates exact policy evaluation (via the
  generalized Lyapunov equations) with the gain update; needs a mean-square
  stabilizing initial policy and converges in few iterations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import numpy.linalg as la

from . import moments
from .exceptions import (
    Diverged,
    DualityViolation,
    InitialPolicyNotStabilizing,
    IterateNotStabilizing,
    MaxIterationsExceeded,
    SingularBlock,
    SolverError,
)
from .matrixmath import frobenius, symmetrize
from .model import Controller, ProblemInstance
from .moments import ValueCovarianceTuple

__all__ = [
    "DEFAULT_TOL",
    "VI_MAX_ITER",
    "PI_MAX_ITER",
    "QFunctionPair",
    "RiccatiResidual",
    "HistoryEntry",
    "SolveReport",
    "gain_operators",
    "q_operators",
    "riccati_residual",
    "value_iteration_step",
    "value_iteration_solve",
    "policy_iteration_solve",
    "optimal_cost",
    "noise_free_gains",
    "open_loop_controller",
    "noise_free_controller",
    "stabilizing_initial_controller",
]

DEFAULT_TOL = 1e-12
VI_MAX_ITER = 100_000
PI_MAX_ITER = 1_000

COND_LIMIT = 1e12
OVERFLOW_GUARD = 1e100


@dataclass(frozen=True, eq=False)
class QFunctionPair:
    """Control-side and estimation-side quadratic-form matrices at some X."""

    G: np.ndarray  # (n+m) x (n+m)
    H: np.ndarray  # (n+p) x (n+p)


@dataclass(frozen=True, eq=False)
class RiccatiResidual:
    """The four stacked equation residuals at some X, one block per unknown."""

    P: np.ndarray
    Phat: np.ndarray
    S: np.ndarray
    Shat: np.ndarray

    def blocks(self):
        return (self.P, self.Phat, self.S, self.Shat)

    def block_norms(self):
        return tuple(float(la.norm(b)) for b in self.blocks())

    def max_norm(self) -> float:
        return max(self.block_norms())


@dataclass(frozen=True)
class HistoryEntry:
    """One iteration record: step size (None for the first policy
    evaluation) and cumulative wall-clock seconds."""

    delta: float | None
    seconds: float


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Outcome of a coupled-Riccati solve.

    ``solution_history`` keeps the full iterate trajectory so convergence
    metrics can be computed against a reference fixed point afterwards; it is
    not part of the serialized report.
    """

    controller: Controller
    solution: ValueCovarianceTuple
    cost: float
    iterations: int
    residual_norm: float
    history: tuple[HistoryEntry, ...]
    method: str  # "policy_iteration" or "value_iteration"
    converged: bool
    solution_history: tuple[ValueCovarianceTuple, ...]


def _check_condition(M, name):
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularBlock(name, cond)


def gain_operators(X: ValueCovarianceTuple, problem: ProblemInstance):
    """Gains (K, L) determined by X through the gain-relevant blocks.

    Only the G_ux/G_uu and H_xy/H_yy blocks enter, and none of them depend
    on the gains themselves, so this is an explicit function of X.  Raises
    SingularBlock when G_uu or H_yy is numerically singular.
    """
    sys = problem.system
    A, B, C = sys.A, sys.B, sys.C
    _, _, Qux, Quu = problem.q_blocks()
    _, Wxy, _, Wyy = problem.w_blocks()

    P_sum = X.P + X.Phat
    Guu = Quu + B.T @ X.P @ B
    for t in sys.noise_b:
        Guu = Guu + t.sigma**2 * (t.pattern.T @ P_sum @ t.pattern)
    Gux = Qux + B.T @ X.P @ A
    _check_condition(Guu, "G_uu")
    K = -la.solve(Guu, Gux)

    S_sum = X.S + X.Shat
    Hyy = Wyy + C @ X.S @ C.T
    for t in sys.noise_c:
        Hyy = Hyy + t.sigma**2 * (t.pattern @ S_sum @ t.pattern.T)
    Hxy = Wxy + A @ X.S @ C.T
    _check_condition(Hyy, "H_yy")
    L = la.solve(Hyy.T, Hxy.T).T
    return K, L


def q_operators(
    X: ValueCovarianceTuple, problem: ProblemInstance, K: np.ndarray, L: np.ndarray
) -> QFunctionPair:
    """Full G(X) and H(X) matrices; (K, L) must be gain_operators(X, problem)."""
    sys = problem.system
    A, B, C = sys.A, sys.B, sys.C
    n, m, p = sys.n, sys.m, sys.p
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)

    G = problem.cost.Q + np.block(
        [[A.T @ X.P @ A, A.T @ X.P @ B], [B.T @ X.P @ A, B.T @ X.P @ B]]
    )
    P_sum = X.P + X.Phat
    G_top = np.zeros((n, n))
    for t in sys.noise_a:
        G_top += t.sigma**2 * (t.pattern.T @ P_sum @ t.pattern)
    for t in sys.noise_c:
        G_top += t.sigma**2 * (t.pattern.T @ L.T @ X.Phat @ L @ t.pattern)
    G_bot = np.zeros((m, m))
    for t in sys.noise_b:
        G_bot += t.sigma**2 * (t.pattern.T @ P_sum @ t.pattern)
    G = G + np.block([[G_top, np.zeros((n, m))], [np.zeros((m, n)), G_bot]])

    H = problem.noise.W + np.block(
        [[A @ X.S @ A.T, A @ X.S @ C.T], [C @ X.S @ A.T, C @ X.S @ C.T]]
    )
    S_sum = X.S + X.Shat
    H_top = np.zeros((n, n))
    for t in sys.noise_a:
        H_top += t.sigma**2 * (t.pattern @ S_sum @ t.pattern.T)
    for t in sys.noise_b:
        H_top += t.sigma**2 * (t.pattern @ K @ X.Shat @ K.T @ t.pattern.T)
    H_bot = np.zeros((p, p))
    for t in sys.noise_c:
        H_bot += t.sigma**2 * (t.pattern @ S_sum @ t.pattern.T)
    H = H + np.block([[H_top, np.zeros((n, p))], [np.zeros((p, n)), H_bot]])

    return QFunctionPair(symmetrize(G), symmetrize(H))


def riccati_residual(X: ValueCovarianceTuple, problem: ProblemInstance) -> RiccatiResidual:
    """R(X): one symmetric n x n residual block per unknown."""
    n = problem.n
    K, L = gain_operators(X, problem)
    q = q_operators(X, problem, K, L)
    Gxx, Gxu = q.G[:n, :n], q.G[:n, n:]
    Gux, Guu = q.G[n:, :n], q.G[n:, n:]
    Hxx, Hxy = q.H[:n, :n], q.H[:n, n:]
    Hyx, Hyy = q.H[n:, :n], q.H[n:, n:]
    Zg = Gxu @ la.solve(Guu, Gux)
    Zh = Hxy @ la.solve(Hyy, Hyx)
    A, B, C = problem.system.A, problem.system.B, problem.system.C
    ALC = A - L @ C
    ABK = A + B @ K
    return RiccatiResidual(
        P=symmetrize(-X.P + Gxx - Zg),
        Phat=symmetrize(-X.Phat + ALC.T @ X.Phat @ ALC + Zg),
        S=symmetrize(-X.S + Hxx - Zh),
        Shat=symmetrize(-X.Shat + ABK @ X.Shat @ ABK.T + Zh),
    )


def value_iteration_step(
    X: ValueCovarianceTuple, problem: ProblemInstance
) -> ValueCovarianceTuple:
    """One update X <- X + R(X), blockwise."""
    R = riccati_residual(X, problem)
    return ValueCovarianceTuple(
        X.P + R.P, X.Phat + R.Phat, X.S + R.S, X.Shat + R.Shat
    )


def _finalize_report(problem, X_star, history, tuples, method):
    """Build the report fields shared by both solvers.

    The reported controller is recomputed from the converged X via
    gain_operators, so the report's gains and the gain operators agree
    exactly; its cost is evaluated through the Lyapunov equations with the
    duality cross-check.
    """
    A, B, C = problem.system.A, problem.system.B, problem.system.C
    K, L = gain_operators(X_star, problem)
    ctrl = Controller(A + B @ K - L @ C, K, L)
    _, _, cost = moments.evaluate_policy(problem, ctrl)
    residual_norm = riccati_residual(X_star, problem).max_norm()
    return SolveReport(
        controller=ctrl,
        solution=X_star,
        cost=cost,
        iterations=len(tuples) - 1,
        residual_norm=residual_norm,
        history=tuple(history),
        method=method,
        converged=True,
        solution_history=tuple(tuples),
    )


def value_iteration_solve(
    problem: ProblemInstance,
    tol: float = DEFAULT_TOL,
    max_iter: int = VI_MAX_ITER,
) -> SolveReport:
    """Solve R(X) = 0 by the recursion X <- X + R(X) from X = 0.

    Stops when the blockwise max Frobenius norm of the step drops to
    ``tol``.  Raises Diverged when any block norm passes the overflow guard
    (the instance then admits no mean-square stabilizing compensator) and
    MaxIterationsExceeded when the cap is hit first.
    """
    X = ValueCovarianceTuple.zeros(problem.n)
    tuples = [X]
    history = [HistoryEntry(delta=None, seconds=0.0)]
    start = time.perf_counter()
    for k in range(1, max_iter + 1):
        X_next = value_iteration_step(X, problem)
        delta = X_next.distance(X)
        history.append(HistoryEntry(delta, time.perf_counter() - start))
        tuples.append(X_next)
        X = X_next
        if not np.isfinite(delta) or X.max_norm() > OVERFLOW_GUARD:
            raise Diverged("value iteration", k)
        if delta <= tol:
            return _finalize_report(problem, X, history, tuples, "value_iteration")
    raise MaxIterationsExceeded("value iteration", max_iter, history[-1].delta)


def policy_iteration_solve(
    problem: ProblemInstance,
    initial: Controller,
    tol: float = DEFAULT_TOL,
    max_iter: int = PI_MAX_ITER,
) -> SolveReport:
    """Alternate exact policy evaluation and gain improvement.

    Each iteration evaluates the current policy by solving both generalized
    Lyapunov equations and extracting X, then updates the gains to
    (K(X), L(X)) with model matrix A + B K - L C.  Stops when successive
    evaluated X differ by at most ``tol`` (blockwise max Frobenius norm).

    The initial policy must be mean-square stabilizing
    (InitialPolicyNotStabilizing otherwise), and every improved policy is
    checked before it is evaluated (IterateNotStabilizing on failure; the
    solver never falls back to a different method silently).
    """
    sys = problem.system
    A, B, C = sys.A, sys.B, sys.C
    aug = moments.build_augmented(problem, initial)
    stable, radius = moments.is_ms_stable(aug)
    if not stable:
        raise InitialPolicyNotStabilizing(radius)

    tuples: list[ValueCovarianceTuple] = []
    history: list[HistoryEntry] = []
    previous: ValueCovarianceTuple | None = None
    start = time.perf_counter()
    for k in range(max_iter + 1):
        sol = moments.solve_both(aug)
        X = moments.extract_tuple(sol)
        tuples.append(X)
        delta = None if previous is None else X.distance(previous)
        history.append(HistoryEntry(delta, time.perf_counter() - start))
        if delta is not None and delta <= tol:
            return _finalize_report(problem, X, history, tuples, "policy_iteration")
        K, L = gain_operators(X, problem)
        improved = Controller(A + B @ K - L @ C, K, L)
        aug = moments.build_augmented(problem, improved)
        stable, radius = moments.is_ms_stable(aug)
        if not stable:
            raise IterateNotStabilizing(k + 1, radius)
        previous = X
    raise MaxIterationsExceeded("policy iteration", max_iter, history[-1].delta)


def optimal_cost(
    X: ValueCovarianceTuple,
    K: np.ndarray,
    L: np.ndarray,
    problem: ProblemInstance,
) -> float:
    """Cost at a converged solution, from the cost-weight/covariance side.

    Returns <Q_xx, S> + <[I; K]^T Q [I; K], Shat> and asserts agreement with
    the dual form <W_xx, P> + <[I, -L] W [I, -L]^T, Phat>; raises
    DualityViolation on disagreement beyond 1e-9 relative.
    """
    n = problem.n
    K = np.asarray(K, dtype=float)
    L = np.asarray(L, dtype=float)
    Qxx = problem.q_blocks()[0]
    Wxx = problem.w_blocks()[0]
    IK = np.vstack([np.eye(n), K])
    J_q = frobenius(Qxx, X.S) + frobenius(IK.T @ problem.cost.Q @ IK, X.Shat)
    IL = np.hstack([np.eye(n), -L])
    J_w = frobenius(Wxx, X.P) + frobenius(IL @ problem.noise.W @ IL.T, X.Phat)
    if abs(J_q - J_w) > 1e-9 * (1.0 + abs(J_q)):
        raise DualityViolation(J_q, J_w)
    return J_q


# ---------------------------------------------------------------------------
# initial policies


def open_loop_controller(problem: ProblemInstance) -> Controller:
    """The open-loop policy (F, K, L) = (A, 0, 0)."""
    sys = problem.system
    return Controller(
        sys.A.copy(), np.zeros((sys.m, sys.n)), np.zeros((sys.n, sys.p))
    )


def noise_free_gains(problem: ProblemInstance, tol: float = 1e-13, max_iter: int = 500_000):
    """Classical gains (K, L) ignoring the multiplicative noise terms.

    Fixed-point iteration of the two decoupled discrete Riccati recursions
    on the mean system; used to build fallback initial policies for policy
    iteration when the open loop is not mean-square stable.
    """
    sys = problem.system
    A, B, C = sys.A, sys.B, sys.C
    Qxx, Qxu, Qux, Quu = problem.q_blocks()
    Wxx, Wxy, Wyx, Wyy = problem.w_blocks()

    def iterate(update, start, label):
        M = start.copy()
        for _ in range(max_iter):
            M_next = update(M)
            if not np.all(np.isfinite(M_next)) or la.norm(M_next) > OVERFLOW_GUARD:
                raise Diverged(label, max_iter)
            if la.norm(M_next - M) <= tol * (1.0 + la.norm(M_next)):
                return M_next
            M = M_next
        raise MaxIterationsExceeded(label, max_iter, float(la.norm(M_next - M)))

    def control_update(P):
        Gux = Qux + B.T @ P @ A
        return symmetrize(Qxx + A.T @ P @ A - (Qxu + A.T @ P @ B) @ la.solve(Quu + B.T @ P @ B, Gux))

    def filter_update(S):
        Hyx = Wyx + C @ S @ A.T
        return symmetrize(Wxx + A @ S @ A.T - (Wxy + A @ S @ C.T) @ la.solve(Wyy + C @ S @ C.T, Hyx))

    P = iterate(control_update, Qxx, "noise-free control Riccati recursion")
    S = iterate(filter_update, Wxx, "noise-free filter Riccati recursion")
    K = -la.solve(Quu + B.T @ P @ B, Qux + B.T @ P @ A)
    L = la.solve((Wyy + C @ S @ C.T).T, (Wxy + A @ S @ C.T).T).T
    return K, L


def noise_free_controller(problem: ProblemInstance) -> Controller:
    """Compensator built from the classical noise-free gains."""
    sys = problem.system
    K, L = noise_free_gains(problem)
    return Controller(sys.A + sys.B @ K - L @ sys.C, K, L)


def stabilizing_initial_controller(problem: ProblemInstance) -> Controller:
    """Deterministic initial policy for policy iteration.

    Prefers the open-loop policy (A, 0, 0); when that is not mean-square
    stabilizing, falls back to the classical noise-free design.  Raises
    InitialPolicyNotStabilizing when neither candidate stabilizes the loop.
    """
    ol = open_loop_controller(problem)
    stable, ol_radius = moments.is_ms_stable(moments.build_augmented(problem, ol))
    if stable:
        return ol
    try:
        ctrl = noise_free_controller(problem)
    except SolverError as exc:
        raise InitialPolicyNotStabilizing(
            ol_radius, f"noise-free fallback failed: {exc}"
        ) from exc
    stable, radius = moments.is_ms_stable(moments.build_augmented(problem, ctrl))
    if stable:
        return ctrl
    raise InitialPolicyNotStabilizing(
        ol_radius,
        f"noise-free fallback is also not stabilizing (radius {radius:.6g})",
    )
