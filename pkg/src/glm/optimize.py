"""
Deterministic Full-Batch Minimization

One minimizer shared by every learner. It works on an objective returning
(value, gradient) and stops once the gradient infinity-norm drops to the
tolerance or the iteration budget runs out; running out is reported through
the converged flag, never raised.

Step rules:
    fixed         w <- w - step * g
    backtracking  Armijo line search along -g, halving from the initial step
    newton        the same line search along the Newton direction
    lbfgs         scipy.optimize.minimize with L-BFGS-B
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from src.errors import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]
Hessian = Callable[[np.ndarray], np.ndarray]


class StepRule(Enum):
    FIXED = "fixed"
    BACKTRACKING = "backtracking"
    NEWTON = "newton"
    LBFGS = "lbfgs"


@dataclass(frozen=True)
class TrainConfig:
    """
    Training hyper-parameters.

    Attributes:
        l2 (float): L2 strength on non-bias weights, >= 0
        max_iters (int): Iteration budget
        tol (float): Convergence threshold on the gradient infinity-norm, > 0
        step_rule (StepRule): How steps are chosen
        step_size (float): Step for the fixed rule, initial step for line searches
        armijo (float): Sufficient-decrease constant
        max_halvings (int): Line-search budget per iteration
    """

    l2: float = 1e-2
    max_iters: int = 5000
    tol: float = 1e-8
    step_rule: StepRule = StepRule.BACKTRACKING
    step_size: float = 1.0
    armijo: float = 1e-4
    max_halvings: int = 60

    def __post_init__(self):
        if isinstance(self.step_rule, str):
            object.__setattr__(self, "step_rule", StepRule(self.step_rule))
        self.validate()

    def validate(self) -> None:
        if not np.isfinite(self.l2) or self.l2 < 0:
            raise ConfigurationError(f"l2 must be >= 0, got {self.l2}")
        if not self.tol > 0:
            raise ConfigurationError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.step_size > 0:
            raise ConfigurationError(f"step_size must be > 0, got {self.step_size}")


@dataclass
class OptimizeResult:
    """
    Outcome of a minimization.

    Attributes:
        x (np.ndarray): Final point
        value (float): Objective at x
        grad_norm (float): Gradient infinity-norm at x
        iterations (int): Accepted iterations
        converged (bool): grad_norm <= tol, or for lbfgs a stall at machine precision
        history (List[float]): Objective after each accepted iteration
    """

    x: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)


def _evaluate(objective: Objective, x: np.ndarray, iteration: int) -> Tuple[float, np.ndarray]:
    value, grad = objective(x)
    if not np.isfinite(value) or not np.isfinite(grad).all():
        raise NumericalError("Objective or gradient is not finite", iteration)
    return float(value), grad


def _newton_direction(hessian: Hessian, x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    h = hessian(x)
    try:
        d = -np.linalg.solve(h, grad)
    except np.linalg.LinAlgError:
        d = -np.linalg.lstsq(h, grad, rcond=None)[0]
    if not np.isfinite(d).all() or d @ grad >= 0:
        return -grad
    return d


def _minimize_lbfgs(objective: Objective, x0: np.ndarray, cfg: TrainConfig) -> OptimizeResult:
    calls = {"n": 0}
    history: List[float] = []

    def fun(x):
        value, grad = _evaluate(objective, x, calls["n"])
        calls["n"] += 1
        return value, grad

    # ftol=0 leaves the gradient test as the stopping rule; SciPy only reports
    # success before it when a step can no longer lower the objective at all
    res = scipy_minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=lambda xk: history.append(float(objective(xk)[0])),
        options={"maxiter": cfg.max_iters, "maxfun": 20 * cfg.max_iters, "gtol": cfg.tol, "ftol": 0.0},
    )
    value, grad = _evaluate(objective, res.x, res.nit)
    grad_norm = float(np.abs(grad).max(initial=0.0))
    converged = grad_norm <= cfg.tol or bool(res.success)
    if not converged:
        logger.debug(f"L-BFGS stopped after {res.nit} iterations: {res.message}")
    return OptimizeResult(res.x, value, grad_norm, int(res.nit), converged, history)


def minimize(
    objective: Objective,
    x0: np.ndarray,
    cfg: TrainConfig,
    hessian: Optional[Hessian] = None,
) -> OptimizeResult:
    """
    Minimize an objective.

    Args:
        objective (Objective): Returns (value, gradient) at a point
        x0 (np.ndarray): Starting point
        cfg (TrainConfig): Iteration budget, tolerance and step rule
        hessian (Hessian, optional): Required by the newton rule

    Returns:
        OptimizeResult: Final point and convergence report

    Raises:
        NumericalError: If the objective becomes non-finite
        ConfigurationError: If the newton rule is requested without a Hessian
    """
    x = np.array(x0, dtype=np.float64)
    value, grad = _evaluate(objective, x, 0)
    grad_norm = float(np.abs(grad).max(initial=0.0))
    if grad_norm <= cfg.tol:
        return OptimizeResult(x, value, grad_norm, 0, True, [value])

    if cfg.step_rule is StepRule.LBFGS:
        return _minimize_lbfgs(objective, x, cfg)
    if cfg.step_rule is StepRule.NEWTON and hessian is None:
        raise ConfigurationError("The newton step rule needs a Hessian")

    history = [value]
    iteration = 0
    while iteration < cfg.max_iters and grad_norm > cfg.tol:
        iteration += 1
        if cfg.step_rule is StepRule.FIXED:
            x = x - cfg.step_size * grad
            value, grad = _evaluate(objective, x, iteration)
        else:
            direction = -grad if cfg.step_rule is StepRule.BACKTRACKING else _newton_direction(hessian, x, grad)
            slope = float(direction @ grad)
            step = cfg.step_size
            for _ in range(cfg.max_halvings):
                candidate = x + step * direction
                cand_value, cand_grad = objective(candidate)
                if np.isfinite(cand_value) and cand_value <= value + cfg.armijo * step * slope:
                    break
                step *= 0.5
            else:
                # No sufficient decrease at machine precision: stalled.
                logger.debug(f"Line search stalled at iteration {iteration}, grad norm {grad_norm:.3e}")
                iteration -= 1
                break
            if not np.isfinite(cand_grad).all():
                raise NumericalError("Gradient is not finite", iteration)
            x, value, grad = candidate, float(cand_value), cand_grad
        grad_norm = float(np.abs(grad).max(initial=0.0))
        history.append(value)

    converged = grad_norm <= cfg.tol
    if not converged:
        logger.debug(f"Stopped after {iteration} iterations with grad norm {grad_norm:.3e}")
    return OptimizeResult(x, value, grad_norm, iteration, converged, history)
