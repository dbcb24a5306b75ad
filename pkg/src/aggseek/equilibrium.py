"""Reference equilibrium computation and verification.

The equilibrium aggregate is found as a fixed point of the averaged
best-response map under relaxed (Krasnoselskij) iteration, entirely
independent of the dynamical-system route, so the two can cross-validate.
Verification goes through the variational inequality: at an equilibrium the
per-agent gradient makes a nonnegative inner product with every feasible
direction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Ball, Box, project, set_center
from .model import GameSpec


class ConvergenceError(RuntimeError):
    """Fixed-point iteration exhausted max_iter without meeting tolerance."""

    def __init__(self, message: str, sigma_last: np.ndarray, update_norm: float, iterations: int):
        super().__init__(message)
        self.sigma_last = sigma_last
        self.update_norm = update_norm
        self.iterations = iterations


@dataclass(frozen=True)
class EquilibriumResult:
    """Computed equilibrium: stacked decisions, their average, and solve diagnostics."""

    xbar: np.ndarray
    sigmabar: np.ndarray
    iterations: int
    final_update_norm: float
    vi_gap_value: float


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of the variational-inequality check, truthy iff it passed."""

    ok: bool
    gap: float
    worst_agent: int
    tol: float

    def __bool__(self) -> bool:
        return self.ok


def best_response(game: GameSpec, i: int, sigma: np.ndarray) -> np.ndarray:
    """Agent i's unique cost minimizer given broadcast sigma.

    The local cost is an isotropic quadratic, so the constrained minimizer is
    the projection of the unconstrained one, xstar - (C sigma + linear) / ell,
    for boxes and balls alike.
    """
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if sigma.shape != (game.n,):
        raise ValueError(f"sigma has shape {sigma.shape}, expected ({game.n},)")
    cost, cset = game.agents[i]
    free = cost.xstar - (game.C @ sigma + cost.linear) / cost.ell
    return project(cset, free)


def _best_responses(game: GameSpec, sigma: np.ndarray) -> np.ndarray:
    csig = game.C @ sigma
    out = np.empty((game.N, game.n))
    for i, (cost, cset) in enumerate(game.agents):
        out[i] = project(cset, cost.xstar - (csig + cost.linear) / cost.ell)
    return out


def aggregation_map(game: GameSpec, sigma: np.ndarray) -> np.ndarray:
    """T(sigma): average of all agents' best responses to sigma."""
    sigma = np.atleast_1d(np.asarray(sigma, dtype=float))
    if sigma.shape != (game.n,):
        raise ValueError(f"sigma has shape {sigma.shape}, expected ({game.n},)")
    return _best_responses(game, sigma).mean(axis=0)


def strictly_monotone(game: GameSpec) -> bool:
    """Whether the stacked pseudo-gradient is strictly monotone, implying uniqueness."""
    sym_min = float(np.linalg.eigvalsh(game.C + game.C.T)[0])
    return game.ell_min + 0.5 * sym_min > 0


def solve_equilibrium(
    game: GameSpec,
    lam: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> EquilibriumResult:
    """Fixed-point solve of sigma = T(sigma) by relaxed iteration.

    Starts from the average of the constraint-set centers and iterates
    sigma <- (1 - lam) sigma + lam T(sigma) until the sup-norm update drops
    to tol. Returns the stacked best responses at the final sigma together
    with their exact average and the VI gap there. The reported iteration
    count is the number of updates that moved sigma by more than tol (the
    terminating no-op pass is not counted).

    Warns when the strict-monotonicity check fails (the fixed point may not
    be unique); raises ConvergenceError when max_iter is exhausted.
    """
    if not 0 < lam <= 1:
        raise ValueError(f"lam must lie in (0, 1], got {lam}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if not strictly_monotone(game):
        warnings.warn(
            "pseudo-gradient is not strictly monotone; the equilibrium may not be unique",
            stacklevel=2,
        )
    sigma = np.stack([set_center(cset) for _, cset in game.agents]).mean(axis=0)
    update = np.inf
    iterations = 0
    for _ in range(max_iter):
        nxt = (1.0 - lam) * sigma + lam * aggregation_map(game, sigma)
        update = float(np.max(np.abs(nxt - sigma)))
        sigma = nxt
        if update <= tol:
            break
        iterations += 1
    else:
        raise ConvergenceError(
            f"no fixed point within {max_iter} iterations (last update {update:.3e})",
            sigma_last=sigma,
            update_norm=update,
            iterations=max_iter,
        )
    xbar = _best_responses(game, sigma)
    sigmabar = xbar.mean(axis=0)
    return EquilibriumResult(
        xbar=xbar,
        sigmabar=sigmabar,
        iterations=iterations,
        final_update_norm=update,
        vi_gap_value=vi_gap(game, xbar),
    )


def _agent_vi_min(cset, x: np.ndarray, g: np.ndarray) -> float:
    """min over z in the set of (z - x)' g, in closed form."""
    if isinstance(cset, Box):
        return float(np.minimum((cset.lo - x) * g, (cset.hi - x) * g).sum())
    assert isinstance(cset, Ball)
    return float((cset.center - x) @ g) - cset.radius * float(np.linalg.norm(g))


def vi_gap(game: GameSpec, x: np.ndarray) -> float:
    """Worst-agent violation of the equilibrium variational inequality.

    For each agent, g_i = grad_f(i, x_i) + C avg(x) and the feasible-direction
    infimum min_{z in X_i} (z - x_i)' g_i is evaluated in closed form. The gap
    is max_i max(0, -min_i): zero exactly when every agent's inequality holds.
    """
    x = np.asarray(x, dtype=float).reshape(game.N, game.n)
    coupling = game.C @ x.mean(axis=0)
    worst = 0.0
    for i, (cost, cset) in enumerate(game.agents):
        if np.linalg.norm(x[i] - project(cset, x[i])) > 1e-9:
            raise ValueError(f"agent {i} decision lies outside its set")
        g = cost.ell * (x[i] - cost.xstar) + cost.linear + coupling
        worst = max(worst, max(0.0, -_agent_vi_min(cset, x[i], g)))
    return worst


def verify_equilibrium(game: GameSpec, x: np.ndarray, tol: float) -> VerificationReport:
    """VI check at tolerance tol, reporting the worst-violating agent."""
    x = np.asarray(x, dtype=float).reshape(game.N, game.n)
    coupling = game.C @ x.mean(axis=0)
    gaps = np.empty(game.N)
    for i, (cost, cset) in enumerate(game.agents):
        g = cost.ell * (x[i] - cost.xstar) + cost.linear + coupling
        gaps[i] = max(0.0, -_agent_vi_min(cset, x[i], g))
    worst = int(np.argmax(gaps))
    gap = float(gaps[worst])
    return VerificationReport(ok=gap <= tol, gap=gap, worst_agent=worst, tol=tol)
