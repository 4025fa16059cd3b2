"""Accelerated dual proximal gradient solver for weighted graph identification.

Given the half-vectorized pairwise distance vector ``y`` of the node
trajectories, the solver minimizes

    2 w'y + beta ||w||^2 - alpha 1'log(S w)    subject to  w >= 0,

over edge weights ``w``, where ``S`` maps edge weights to node degrees.
The log barrier keeps every node connected and the quadratic term shrinks
weights toward zero.  The dual iteration uses a fixed step 1/L with
L = (n-1)/beta and Nesterov-style momentum; each dual step has a closed
form, which is what makes the iteration unrollable and differentiable.

``reference_solve`` is a deliberately independent check: projected gradient
descent with Armijo backtracking on the primal, sharing no code with the
dual iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalFailure, OracleFailure
from .graphcore import build_sum_operator, nodes_from_edge_count, num_edges


@dataclass(frozen=True)
class SolverConfig:
    """Regularizer weights and iteration budget for one solve."""
    alpha: float = 0.2
    beta: float = 1e-4
    max_iters: int = 2000
    tol: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise DimensionError("alpha and beta must be positive")
        if self.max_iters < 1:
            raise DimensionError("max_iters must be at least 1")
        if self.tol <= 0:
            raise DimensionError("tol must be positive")


@dataclass
class DualState:
    """Multipliers and momentum of the dual iteration.

    ``lam_prev`` is the multiplier one step behind ``lam``; both equal the
    seeded start before the first iteration.
    """
    lam: np.ndarray
    lam_prev: np.ndarray
    omega: np.ndarray
    tau: float = 1.0
    iteration: int = 0

    def copy(self) -> "DualState":
        return DualState(self.lam.copy(), self.lam_prev.copy(),
                         self.omega.copy(), self.tau, self.iteration)


@dataclass(frozen=True)
class SolveResult:
    w: np.ndarray
    iters_run: int
    converged: bool
    final_relative_step: float


def init_dual_state(n: int, seed: int) -> DualState:
    """Seeded uniform multiplier start shared by plain and unrolled solves."""
    rng = np.random.default_rng(seed)
    lam = rng.uniform(0.0, 1.0, size=n)
    return DualState(lam=lam.copy(), lam_prev=lam.copy(), omega=lam.copy())


def dual_step(y: np.ndarray, S: np.ndarray, St: np.ndarray, alpha: float,
              beta: float, lipschitz: float, state: DualState
              ) -> tuple[np.ndarray, DualState]:
    """One iteration of the dual method; returns the primal iterate and the
    advanced state.  Kept as a free function so the training unroll can mirror
    it operation for operation."""
    w = np.maximum(0.0, (St @ state.omega - 2.0 * y) / (2.0 * beta))
    Sw = S @ w
    z = Sw - lipschitz * state.omega
    u = 0.5 * (z + np.sqrt(z * z + 4.0 * alpha * lipschitz))
    lam = state.omega - (Sw - u) / lipschitz
    tau_next = (1.0 + np.sqrt(1.0 + 4.0 * state.tau * state.tau)) / 2.0
    omega = lam + ((state.tau - 1.0) / tau_next) * (lam - state.lam)
    new_state = DualState(lam=lam, lam_prev=state.lam, omega=omega,
                          tau=tau_next, iteration=state.iteration + 1)
    return w, new_state


def identify_graph(y: np.ndarray, n: int, cfg: SolverConfig) -> SolveResult:
    """Run the dual iteration until the relative multiplier step drops below
    ``cfg.tol`` or ``cfg.max_iters`` iterations have been spent."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (num_edges(n),):
        raise DimensionError(
            f"distance vector has shape {y.shape}, expected ({num_edges(n)},)")
    if np.min(y) < 0:
        raise DimensionError("pairwise distances must be nonnegative")

    S = build_sum_operator(n)
    St = S.T.copy()
    lipschitz = (n - 1) / cfg.beta
    state = init_dual_state(n, cfg.seed)

    w = np.zeros(num_edges(n))
    rel_step = np.inf
    converged = False
    iters = 0
    for k in range(cfg.max_iters):
        w, state = dual_step(y, S, St, cfg.alpha, cfg.beta, lipschitz, state)
        iters = k + 1
        if not (np.all(np.isfinite(state.lam)) and np.all(np.isfinite(w))):
            raise NumericalFailure(
                f"non-finite iterate at iteration {k}", iteration=k)
        denom = np.linalg.norm(state.lam_prev)
        step = np.linalg.norm(state.lam - state.lam_prev)
        rel_step = step / denom if denom > 0 else np.inf
        if rel_step < cfg.tol:
            converged = True
            break
    return SolveResult(w=w, iters_run=iters, converged=converged,
                       final_relative_step=float(rel_step))


def objective(w: np.ndarray, y: np.ndarray, cfg: SolverConfig) -> float:
    """Primal objective value; +inf sentinel when any node degree is
    nonpositive (outside the log barrier's domain)."""
    w = np.asarray(w, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if w.shape != y.shape:
        raise DimensionError(f"length mismatch: {w.shape} vs {y.shape}")
    n = nodes_from_edge_count(w.shape[0])
    degrees = build_sum_operator(n) @ w
    if np.min(degrees) <= 0:
        return np.inf
    return float(2.0 * w @ y + cfg.beta * w @ w
                 - cfg.alpha * np.sum(np.log(degrees)))


def reference_solve(y: np.ndarray, n: int, cfg: SolverConfig,
                    max_iters: int = 200_000, grad_tol: float = 1e-8
                    ) -> np.ndarray:
    """Independent primal oracle: projected gradient descent with Armijo
    backtracking.  Slow but simple; used to cross-check the dual method."""
    y = np.asarray(y, dtype=np.float64)
    m = num_edges(n)
    if y.shape != (m,):
        raise DimensionError(f"distance vector has shape {y.shape}, expected ({m},)")
    S = build_sum_operator(n)
    St = S.T

    def f(w):
        deg = S @ w
        if np.min(deg) <= 0:
            return np.inf
        return 2.0 * w @ y + cfg.beta * w @ w - cfg.alpha * np.sum(np.log(deg))

    def grad(w):
        deg = S @ w
        return 2.0 * y + 2.0 * cfg.beta * w - cfg.alpha * (St @ (1.0 / deg))

    # Uniform feasible start at the zero-distance stationary scale.
    w = np.full(m, np.sqrt(cfg.alpha / (cfg.beta * (n - 1))))
    fw = f(w)
    step = 1.0
    for _ in range(max_iters):
        g = grad(w)
        # Halve the step until the local descent-lemma bound holds.
        t = step
        for _ in range(300):
            w_new = np.maximum(0.0, w - t * g)
            delta = w_new - w
            f_new = f(w_new)
            if np.isfinite(f_new) and f_new <= fw + g @ delta + delta @ delta / (2.0 * t):
                break
            t *= 0.5
        else:
            raise OracleFailure("backtracking line search stalled")
        gradient_map = np.linalg.norm(w_new - w) / t
        w, fw = w_new, f_new
        step = t * 2.0
        if gradient_map < grad_tol * (1.0 + np.linalg.norm(g)):
            return w
    raise OracleFailure(f"no convergence within {max_iters} iterations")
