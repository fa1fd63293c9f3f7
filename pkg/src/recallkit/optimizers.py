"""Self-contained numerical minimizers: damped Newton and Nelder-Mead.

Both are written in-repo because their iteration traces are part of the
test surface (monotone-progress invariants, determinism). Both minimize;
maximum-likelihood callers pass the negative log-likelihood.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np


class SingularHessianError(RuntimeError):
    """The Hessian is singular or numerically unusable at an iterate."""


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 100
    tolerance: float = 1e-8
    # Standard simplex coefficients.
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    initial_simplex_scale: float = 0.1
    seed: int = 0
    max_step_halvings: int = 30

    def __post_init__(self) -> None:
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if not (self.reflection > 0 and self.expansion > 1 and 0 < self.contraction < 1 and 0 < self.shrink < 1):
            raise ValueError("simplex coefficients outside their standard ranges")


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    value: float
    x: tuple[float, ...]


def trace_to_jsonl(trace: Sequence[TracePoint], path: str | Path) -> None:
    """Dump an optimizer trace as JSONL (iteration, value, parameter vector)."""
    lines = [
        json.dumps({"iteration": p.iteration, "value": p.value, "x": list(p.x)})
        for p in trace
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    value: float
    covariance: np.ndarray
    trace: tuple[TracePoint, ...]
    converged: bool
    iterations: int


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray
    value: float
    trace: tuple[TracePoint, ...]
    converged: bool
    iterations: int


ObjectiveWithDerivatives = Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]]


def _solve_spd(hessian: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    """Solve H @ step = g, rejecting singular or ill-conditioned H."""
    if not np.all(np.isfinite(hessian)):
        raise SingularHessianError("Hessian contains non-finite entries")
    # cond() is cheap at the dimensions used here and catches exact
    # rank deficiency (duplicated features) as well as near-singularity.
    if np.linalg.cond(hessian) > 1e12:
        raise SingularHessianError(
            "Hessian is singular or near-singular; features may be collinear"
        )
    return np.linalg.solve(hessian, gradient)


def newton_raphson(
    objective: ObjectiveWithDerivatives,
    init: Sequence[float] | np.ndarray,
    config: OptimizerConfig | None = None,
) -> NewtonResult:
    """Minimize with Newton steps, halving the step if the value worsens.

    The objective returns (value, gradient, hessian). Iteration stops when
    the largest coordinate of the accepted step falls below
    config.tolerance, or at the iteration cap (result flagged
    unconverged). The covariance is the inverse Hessian at the optimum,
    which for a negative log-likelihood is the inverse observed
    information.

    Raises:
        ValueError: non-finite objective at init.
        SingularHessianError: unusable Hessian at an iterate.
    """
    cfg = config or OptimizerConfig()
    x = np.asarray(init, dtype=float).copy()
    value, grad, hess = objective(x)
    if not np.isfinite(value):
        raise ValueError(f"objective is not finite at init: {value!r}")

    trace = [TracePoint(0, float(value), tuple(x))]
    converged = False
    iterations = 0
    for iteration in range(1, cfg.max_iterations + 1):
        iterations = iteration
        step = _solve_spd(hess, grad)
        # Backtrack until the step actually improves the objective; a full
        # Newton step can overshoot on near-separable logistic data.
        scale = 1.0
        for _ in range(cfg.max_step_halvings + 1):
            candidate = x - scale * step
            cand_value, cand_grad, cand_hess = objective(candidate)
            if np.isfinite(cand_value) and cand_value <= value:
                break
            scale *= 0.5
        else:
            # No improving step found; treat the current point as optimal.
            converged = True
            break
        x, value, grad, hess = candidate, cand_value, cand_grad, cand_hess
        trace.append(TracePoint(iteration, float(value), tuple(x)))
        if np.max(np.abs(scale * step)) < cfg.tolerance:
            converged = True
            break

    covariance = np.linalg.inv(hess) if np.all(np.isfinite(hess)) else np.full_like(hess, np.nan)
    return NewtonResult(
        x=x,
        value=float(value),
        covariance=covariance,
        trace=tuple(trace),
        converged=converged,
        iterations=iterations,
    )


def initial_simplex(init: np.ndarray, scale: float) -> np.ndarray:
    """init plus per-coordinate perturbations of max(scale, scale*|x_i|)."""
    dim = init.size
    simplex = np.tile(init, (dim + 1, 1))
    for i in range(dim):
        simplex[i + 1, i] += max(scale, scale * abs(init[i]))
    return simplex


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    init: Sequence[float] | np.ndarray,
    config: OptimizerConfig | None = None,
    simplex: np.ndarray | None = None,
) -> NelderMeadResult:
    """Minimize with the standard reflect/expand/contract/shrink simplex.

    Deterministic for a fixed init and config. Stops when the spread of
    vertex values drops below config.tolerance or at the iteration cap.
    The trace records the best vertex after every iteration, so its values
    are non-increasing.

    Raises:
        ValueError: non-finite objective at any initial simplex vertex.
    """
    cfg = config or OptimizerConfig()
    x0 = np.asarray(init, dtype=float)
    points = initial_simplex(x0, cfg.initial_simplex_scale) if simplex is None else np.array(simplex, dtype=float)
    values = np.array([objective(p) for p in points])
    if not np.all(np.isfinite(values)):
        raise ValueError("objective is not finite at an initial simplex vertex")

    order = np.argsort(values, kind="stable")
    points, values = points[order], values[order]
    trace = [TracePoint(0, float(values[0]), tuple(points[0]))]
    converged = False
    iterations = 0

    for iteration in range(1, cfg.max_iterations + 1):
        iterations = iteration
        if values[-1] - values[0] < cfg.tolerance:
            converged = True
            break

        centroid = points[:-1].mean(axis=0)
        worst = points[-1]

        reflected = centroid + cfg.reflection * (centroid - worst)
        f_reflected = objective(reflected)

        if f_reflected < values[0]:
            expanded = centroid + cfg.expansion * (centroid - worst)
            f_expanded = objective(expanded)
            if f_expanded < f_reflected:
                points[-1], values[-1] = expanded, f_expanded
            else:
                points[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-2]:
            points[-1], values[-1] = reflected, f_reflected
        else:
            # Contract toward the better of the worst vertex and its reflection.
            if f_reflected < values[-1]:
                contracted = centroid + cfg.contraction * (reflected - centroid)
            else:
                contracted = centroid + cfg.contraction * (worst - centroid)
            f_contracted = objective(contracted)
            if f_contracted < min(f_reflected, values[-1]):
                points[-1], values[-1] = contracted, f_contracted
            else:
                best = points[0]
                for i in range(1, len(points)):
                    points[i] = best + cfg.shrink * (points[i] - best)
                    values[i] = objective(points[i])

        order = np.argsort(values, kind="stable")
        points, values = points[order], values[order]
        trace.append(TracePoint(iteration, float(values[0]), tuple(points[0])))

    return NelderMeadResult(
        x=points[0].copy(),
        value=float(values[0]),
        trace=tuple(trace),
        converged=converged,
        iterations=iterations,
    )
