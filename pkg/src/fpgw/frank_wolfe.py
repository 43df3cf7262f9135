"""Frank-Wolfe solvers for FPGW and the mass-constrained FMPGW.

Each iteration linearizes the quadratic objective at the current plan,
solves the linear partial-OT problem exactly (fpgw.pot), and moves towards
the minimizer with the exact step of the resulting 1-D quadratic.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import MASS_TOL
from .contraction import contract, contract_transposed, tensor_max
from .errors import ConstraintError, ShapeError, SolverError
from .model import (SolverReport, TraceEntry, TransportPlan, fmpgw_objective,
                    fpgw_objective)
from .pot import MassConstrained, Penalty, PotProblem, linear_objective, solve_exact

logger = logging.getLogger(__name__)


@dataclass
class FwState:
    """One Frank-Wolfe iterate: plan γ, gradient, LMO direction γ', step α and gap g."""

    plan: TransportPlan
    gradient: np.ndarray
    direction: TransportPlan
    step: float
    gap: float


def _entries(plan, source, target):
    gamma = TransportPlan.from_array(plan).entries
    if gamma.shape != (source.size, target.size):
        raise ShapeError(f"plan shape {gamma.shape} != ({source.size}, {target.size})")
    return gamma


def gradient_fpgw(source, target, C, plan, cfg):
    """∇ = ω₁C + ω₂[(M∘γ) + (Mᵀ∘γ) − 4λ|γ|]."""
    gamma = _entries(plan, source, target)
    C = np.asarray(C, dtype=float)
    if C.shape != gamma.shape:
        raise ShapeError(f"feature cost shape {C.shape} != plan shape {gamma.shape}")
    grad = cfg.omega1 * C
    if cfg.omega2 != 0.0:
        forward = contract(cfg.loss, source.structure, target.structure, gamma)
        backward = contract_transposed(cfg.loss, source.structure, target.structure, gamma)
        grad = grad + cfg.omega2 * (forward + backward - 4.0 * cfg.lam * gamma.sum())
    return grad


def gradient_fmpgw(source, target, C, plan, cfg):
    """∇ = ω₁C + ω₂(M + Mᵀ)∘γ."""
    return gradient_fpgw(source, target, C, plan, cfg.replace(lam=0.0))


def line_search(a, b):
    """Minimizer over [0, 1] of a·α² + b·α."""
    if np.isnan(a) or np.isnan(b):
        raise SolverError("line search coefficients are NaN")
    if a <= 0:
        return 1.0 if a + b <= 0 else 0.0
    return float(np.clip(-b / (2.0 * a), 0.0, 1.0))


def line_search_coeffs_fpgw(source, target, C, plan, direction, cfg, gradient=None):
    """(a, b) with a = ω₂⟨(M−2λ)∘δ, δ⟩ and b = ⟨∇, δ⟩, δ = direction − plan."""
    gamma = _entries(plan, source, target)
    delta = _entries(direction, source, target) - gamma
    if gradient is None:
        gradient = gradient_fpgw(source, target, C, gamma, cfg)
    a = 0.0
    if cfg.omega2 != 0.0:
        shifted = np.sum(contract(cfg.loss, source.structure, target.structure, delta) * delta)
        a = cfg.omega2 * (shifted - 2.0 * cfg.lam * delta.sum() ** 2)
    b = float(np.sum(gradient * delta))
    return float(a), b


def line_search_coeffs_fmpgw(source, target, C, plan, direction, cfg, gradient=None):
    return line_search_coeffs_fpgw(source, target, C, plan, direction,
                                   cfg.replace(lam=0.0), gradient)


def fw_gap(gradient, plan, p, q, mode):
    """g = ⟨∇, γ⟩ − min over the feasible set of ⟨∇, γ'⟩ (one exact solve)."""
    prob = PotProblem(gradient, p, q, mode)
    direction = solve_exact(prob)
    return linear_objective(prob, plan) - linear_objective(prob, direction)


def default_init_fpgw(p, q):
    """Product coupling p qᵀ / max(|p|, |q|)."""
    scale = max(float(np.sum(p)), float(np.sum(q)))
    if scale == 0.0:
        return TransportPlan.zeros(len(p), len(q))
    return TransportPlan.product(p, q, 1.0 / scale)


def default_init_fmpgw(p, q, rho):
    """Product coupling p qᵀ ρ / (|p||q|), of mass exactly ρ."""
    denom = float(np.sum(p)) * float(np.sum(q))
    if rho == 0.0 or denom == 0.0:
        return TransportPlan.zeros(len(p), len(q))
    return TransportPlan.product(p, q, rho / denom)


def feature_init(C, p, q, rho=None):
    """Optimal linear partial plan for the feature cost alone, of mass rho."""
    if rho is None:
        rho = min(float(np.sum(p)), float(np.sum(q)))
    return solve_exact(PotProblem(C, p, q, MassConstrained(rho)))


def check_init(init, source, target, rho=None):
    init = TransportPlan.from_array(init)
    if init.shape != (source.size, target.size):
        raise ShapeError(f"init shape {init.shape} != ({source.size}, {target.size})")
    if not init.feasible_for(source.mass, target.mass, tol=MASS_TOL):
        raise ConstraintError("init plan is not dominated by the marginals")
    if rho is not None and abs(init.total_mass - rho) > MASS_TOL:
        raise ConstraintError(f"init mass {init.total_mass} differs from rho={rho}")
    return init


def frank_wolfe_step(source, target, C, cfg, plan, mode):
    """Gradient, linear minimizer, gap and exact step at one plan.

    ``mode`` is Penalty(0) for FPGW (the −4λ|γ| shift already sits in the
    gradient) or MassConstrained(ρ) for FMPGW, whose cfg carries λ = 0.
    """
    gamma = _entries(plan, source, target)
    grad = gradient_fpgw(source, target, C, gamma, cfg)
    direction = solve_exact(PotProblem(grad, source.mass, target.mass, mode))
    gap = float(np.sum(grad * (gamma - direction.entries)))
    a, b = line_search_coeffs_fpgw(source, target, C, gamma, direction, cfg, gradient=grad)
    return FwState(TransportPlan.from_array(plan), grad, direction, line_search(a, b), gap)


def _frank_wolfe(source, target, C, cfg, init, mode, objective, max_iter, tol, gap_tol, name):
    gamma = np.array(init.entries)
    value = objective(source, target, C, TransportPlan(gamma), cfg)
    trace = []
    converged = False
    for k in range(1, max_iter + 1):
        state = frank_wolfe_step(source, target, C, cfg, gamma, mode)
        alpha, gap = state.step, state.gap
        direction = state.direction.entries
        updated = np.maximum(gamma + alpha * (direction - gamma), 0.0)
        value = objective(source, target, C, TransportPlan(updated), cfg)
        trace.append(TraceEntry(k, value, alpha, gap))
        change = float(np.linalg.norm(updated - gamma))
        gamma = updated
        logger.debug("%s iter %d: objective=%.10g step=%.4g gap=%.3e", name, k, value, alpha, gap)
        if change < tol or (gap_tol is not None and gap <= gap_tol):
            converged = True
            break
    logger.info("%s finished after %d iterations (objective=%.10g, converged=%s)",
                name, len(trace), value, converged)
    return SolverReport(TransportPlan(gamma), value, trace, converged, len(trace))


def solve_fw_fpgw(source, target, C, cfg, init=None, max_iter=1000, tol=1e-9,
                  gap_tol: Optional[float] = None):
    """Frank-Wolfe for FPGW over Γ≤(p, q).

    Args:
        source (MmSpace): Source space (C^X, p).
        target (MmSpace): Target space (C^Y, q).
        C (np.ndarray): Feature cost, shape (n, m).
        cfg (FusedConfig): ω₁, ω₂, λ and the loss.
        init (TransportPlan): Starting plan; defaults to p qᵀ / max(|p|, |q|).
        max_iter (int): Iteration cap.
        tol (float): Stop when ‖γ^(k+1) − γ^(k)‖_F < tol.
        gap_tol (float): Optional extra stop when the FW gap falls below it.

    Returns:
        SolverReport: Final plan, FPGW objective (constant included) and trace.
    """
    init = default_init_fpgw(source.mass, target.mass) if init is None else \
        check_init(init, source, target)
    return _frank_wolfe(source, target, C, cfg, init, Penalty(0.0), fpgw_objective,
                        max_iter, tol, gap_tol, 'fw-fpgw')


def solve_fw_fmpgw(source, target, C, cfg, init=None, max_iter=1000, tol=1e-9,
                   gap_tol: Optional[float] = None):
    """Frank-Wolfe for FMPGW over Γ≤^ρ(p, q); every iterate has mass ρ."""
    rho = cfg.checked_rho(source.total_mass, target.total_mass)
    if rho == 0.0:
        zero = TransportPlan.zeros(source.size, target.size)
        return SolverReport(zero, 0.0, [], True, 0)
    init = default_init_fmpgw(source.mass, target.mass, rho) if init is None else \
        check_init(init, source, target, rho)
    fcfg = cfg.replace(lam=0.0, rho=rho)
    return _frank_wolfe(source, target, C, fcfg, init, MassConstrained(rho), fmpgw_objective,
                        max_iter, tol, gap_tol, 'fw-fmpgw')


def _lower_bound(C, cfg, mass_cap, lam):
    linear = cfg.omega1 * min(0.0, float(np.min(C))) * mass_cap if np.size(C) else 0.0
    return linear - 2.0 * lam * cfg.omega2 * mass_cap ** 2


def _curvature(source, target, cfg, mass_cap, lam):
    n, m = source.size, target.size
    if n == 0 or m == 0:
        return 0.0
    spread = 2.0 * np.max(source.structure ** 2) + 2.0 * np.max(target.structure ** 2)
    spread = max(spread, tensor_max(cfg.loss, source.structure, target.structure), 2.0 * lam)
    return 4.0 * cfg.omega2 * mass_cap ** 2 * n * m * spread


def gap_bound_fpgw(source, target, C, cfg, init, iterations):
    """Instance value of max{2L₁, 4ω₂·min(|p|,|q|)²·nm·max(2Cx²+2Cy², 2λ)} / √K."""
    mass_cap = min(source.total_mass, target.total_mass)
    constant = cfg.lam * (source.total_mass ** 2 + target.total_mass ** 2)
    start = fpgw_objective(source, target, C, init, cfg) - constant
    initial_gap = max(start - _lower_bound(C, cfg, mass_cap, cfg.lam), 0.0)
    curvature = _curvature(source, target, cfg, mass_cap, cfg.lam)
    return max(2.0 * initial_gap, curvature) / np.sqrt(max(iterations, 1))


def gap_bound_fmpgw(source, target, C, cfg, init, iterations):
    """As gap_bound_fpgw with ρ in place of min(|p|,|q|) and no λ term."""
    rho = cfg.checked_rho(source.total_mass, target.total_mass)
    fcfg = cfg.replace(lam=0.0, rho=rho)
    start = fmpgw_objective(source, target, C, init, fcfg)
    initial_gap = max(start - _lower_bound(C, fcfg, rho, 0.0), 0.0)
    curvature = _curvature(source, target, fcfg, rho, 0.0)
    return max(2.0 * initial_gap, curvature) / np.sqrt(max(iterations, 1))


__all__ = [
    'FwState', 'gradient_fpgw', 'gradient_fmpgw', 'line_search',
    'line_search_coeffs_fpgw', 'line_search_coeffs_fmpgw', 'fw_gap',
    'default_init_fpgw', 'default_init_fmpgw', 'feature_init',
    'frank_wolfe_step', 'solve_fw_fpgw', 'solve_fw_fmpgw', 'gap_bound_fpgw', 'gap_bound_fmpgw',
]
