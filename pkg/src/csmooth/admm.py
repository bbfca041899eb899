"""Constrained recovery of a fine-grained field by operator splitting.

The recovery problem asks for the least-rough nonnegative field whose
per-patch volumes match the station observations. Splitting the field into
a smooth copy f and a constrained copy g coupled by a scaled dual variable,
each sweep performs

  1. volume projection (g): per patch, minimize
     (rho/2)||g||^2 + (dual - rho f)' g subject to the patch sum matching
     the observed volume and g >= 0. The patches are disjoint under the
     binary assignment, so each solves independently in closed form by
     water-filling.
  2. smoothing (f): a penalized least-squares fit (see smoother) pulling
     the surface toward g + dual/rho with data weight rho/2, covariates
     included here and nowhere else.
  3. dual ascent: dual += rho * (g - f).

Iterations stop when the primal gap ||g - f||_2 and the dual movement
rho ||g_new - g_old||_2 both drop below their tolerances times sqrt(n).
The returned estimate is the final g: it is nonnegative and satisfies the
volume constraints exactly regardless of where the sweep stopped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import CovariateMatrix, GridDomain, SpatialField, _check_same_domain
from .errors import ConfigError, InfeasibleVolume, NumericalFailure
from .fem import FemSystem, assemble, triangulate
from .partition import AggregateObservations, Partition, patched_estimate
from .smoother import SsrSolver

_CONSTRAINT_TOL = 1e-9


@dataclass(frozen=True)
class AdmmConfig:
    """Knobs for css_recover.

    ``halved_target`` switches the smoothing step to the alternative target
    (dual + rho * g) / 2 with unit data weight; the two coincide at rho = 2.
    """

    lam: float = 1.0
    rho: float = 1.0
    max_iter: int = 500
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    report_every: int = 1
    halved_target: bool = False

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise ConfigError(f"lam must be positive, got {self.lam}")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ConfigError(f"rho must be positive, got {self.rho}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if self.tol_primal < 0 or self.tol_dual < 0:
            raise ConfigError("tolerances must be nonnegative")


@dataclass
class AdmmState:
    """Mutable iterate carried across sweeps."""

    smooth: np.ndarray        # f at cell centers, covariate part included
    constrained: np.ndarray   # g
    dual: np.ndarray
    beta: np.ndarray
    iteration: int = 0


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    estimate: SpatialField          # final g; volume-exact and nonnegative
    smooth_component: np.ndarray    # surface part of f (covariate effect excluded)
    beta: np.ndarray
    iterations: int
    converged: bool
    primal_residuals: np.ndarray
    dual_residuals: np.ndarray
    objectives: np.ndarray          # augmented Lagrangian after each sweep
    constraint_violation: float     # worst relative patch-sum violation seen
    aggregation: str = "binary"
    config: AdmmConfig = AdmmConfig()


def waterfill(costs: np.ndarray, total: float, rho: float) -> np.ndarray:
    """Minimize (rho/2)||g||^2 + costs' g  s.t.  sum(g) = total, g >= 0.

    Closed form: g_j = max(0, (nu - costs_j) / rho) where the water level nu
    makes the sum match. Sorting the costs, nu = (rho * total + S_r) / r for
    the unique prefix size r whose level lies between the r-th and (r+1)-th
    smallest cost.
    """
    if total < 0:
        raise InfeasibleVolume(f"patch volume {total} is negative")
    c = np.asarray(costs, dtype=float).ravel()
    if total == 0:
        return np.zeros_like(c)
    cs = np.sort(c)
    nu = (rho * total + np.cumsum(cs)) / np.arange(1, c.size + 1)
    # largest prefix whose level clears its own largest cost; ties put the
    # boundary element at exactly zero, so >= picks the same solution while
    # keeping the first prefix valid even when rho * total underflows
    r = int(np.flatnonzero(nu >= cs)[-1])
    return np.maximum(0.0, (nu[r] - c) / rho)


def volume_projection(
    partition: Partition,
    field: np.ndarray,
    dual: np.ndarray,
    rho: float,
    volumes: AggregateObservations,
) -> np.ndarray:
    """Exact g-step: per-patch water-filling against costs dual - rho * field."""
    if volumes.m != partition.m:
        raise InfeasibleVolume(f"{volumes.m} volumes for {partition.m} patches")
    costs = dual - rho * field
    area = partition.domain.cell_area
    g = np.zeros(partition.domain.n)
    for i, patch in enumerate(partition.binary_patches):
        if patch.size == 0:
            continue
        g[patch] = waterfill(costs[patch], volumes.values[i] / area, rho)
    return g


def smooth_update(
    fem: FemSystem,
    g: np.ndarray,
    dual: np.ndarray,
    rho: float,
    lam: float,
    covariates: CovariateMatrix | None = None,
    halved_target: bool = False,
):
    """f-step: penalized fit toward the constrained iterate. Returns (f, beta)."""
    weight = 1.0 if halved_target else rho / 2.0
    solver = SsrSolver(fem, lam, weight=weight)
    target = (dual + rho * g) / 2.0 if halved_target else g + dual / rho
    model = solver.solve(target, covariates)
    return model.fitted, model.beta


def dual_update(dual: np.ndarray, f: np.ndarray, g: np.ndarray, rho: float) -> np.ndarray:
    """Ascent step on the gap between the copies: dual + rho * (g - f)."""
    return dual + rho * (g - f)


def _check_constraints(
    partition: Partition, g: np.ndarray, volumes: AggregateObservations
) -> float:
    area = partition.domain.cell_area
    sums = partition.matrix_binary @ g * area
    scale = max(float(np.abs(volumes.values).max(initial=0.0)), 1.0)
    viol = float(np.abs(sums - volumes.values).max(initial=0.0)) / scale
    if (g.size and g.min() < -1e-12) or viol > _CONSTRAINT_TOL:
        raise NumericalFailure(
            f"volume projection violated its constraints (violation {viol:.3e}, "
            f"min {g.min():.3e})"
        )
    return viol


def css_recover(
    domain: GridDomain,
    partition: Partition,
    volumes: AggregateObservations,
    covariates: CovariateMatrix | None = None,
    config: AdmmConfig | None = None,
    fem: FemSystem | None = None,
) -> RecoveryResult:
    """Recover a nonnegative field matching the observed patch volumes.

    Covariates, when given, enter the smoothing step as a parametric offset;
    the volume constraints always apply to the total field.
    """
    cfg = config if config is not None else AdmmConfig()
    _check_same_domain(domain, partition.domain, "partition")
    if covariates is not None:
        _check_same_domain(domain, covariates.domain, "covariates")
    if volumes.m != partition.m:
        raise InfeasibleVolume(f"{volumes.m} volumes for {partition.m} stations")
    if fem is None:
        fem = assemble(triangulate(domain))

    start = patched_estimate(partition, volumes).values
    state = AdmmState(
        smooth=start.copy(),
        constrained=start.copy(),
        dual=np.zeros(domain.n),
        beta=np.zeros(0 if covariates is None else covariates.q),
    )

    weight = 1.0 if cfg.halved_target else cfg.rho / 2.0
    solver = SsrSolver(fem, cfg.lam, weight=weight)
    sqrt_n = float(np.sqrt(domain.n))
    primal_hist: list[float] = []
    dual_hist: list[float] = []
    objective_hist: list[float] = []
    worst_violation = 0.0
    converged = False
    model = None

    for k in range(1, cfg.max_iter + 1):
        g_prev = state.constrained
        g = volume_projection(partition, state.smooth, state.dual, cfg.rho, volumes)
        worst_violation = max(worst_violation, _check_constraints(partition, g, volumes))

        if cfg.halved_target:
            target = (state.dual + cfg.rho * g) / 2.0
        else:
            target = g + state.dual / cfg.rho
        # warm-started backfit: the target drifts slowly between iterations,
        # so the previous beta is a far better start than the OLS estimate
        model = solver.solve(target, covariates, beta0=None if k == 1 else state.beta)

        state.constrained = g
        state.smooth = model.fitted
        state.beta = model.beta
        state.iteration = k

        gap = g - state.smooth
        primal = float(np.linalg.norm(gap))
        dual_res = cfg.rho * float(np.linalg.norm(g - g_prev))
        state.dual = dual_update(state.dual, state.smooth, g, cfg.rho)
        # augmented Lagrangian at the end of the sweep, ascended dual included
        objective = (
            cfg.lam * model.roughness
            + float(state.dual @ gap)
            + 0.5 * cfg.rho * float(gap @ gap)
        )

        primal_hist.append(primal)
        dual_hist.append(dual_res)
        objective_hist.append(objective)
        if primal <= cfg.tol_primal * sqrt_n and dual_res <= cfg.tol_dual * sqrt_n:
            converged = True
            break

    covariate_effect = (
        np.zeros(domain.n) if covariates is None else covariates.values @ state.beta
    )
    return RecoveryResult(
        estimate=SpatialField(domain, state.constrained, nonnegative=True),
        smooth_component=state.smooth - covariate_effect,
        beta=state.beta,
        iterations=state.iteration,
        converged=converged,
        primal_residuals=np.asarray(primal_hist),
        dual_residuals=np.asarray(dual_hist),
        objectives=np.asarray(objective_hist),
        constraint_violation=worst_violation,
        aggregation="binary",
        config=cfg,
    )
