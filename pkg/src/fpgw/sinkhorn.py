"""Sinkhorn-based alternating solvers for entropic FPGW and FMPGW.

The quadratic objective is relaxed to a function F(γ, π) of two plans that
is linear in each. Fixing one plan turns the problem into an entropic
partial OT with the conditional cost

    c_π = ½ω₁C + ω₂ M∘π + ε D̄_KL(π ‖ p⊗q),

solved with the scaling kernels in fpgw.pot. The solvers alternate the two
plans until they agree.
"""

import logging

import numpy as np

from .contraction import contract
from .errors import ConstraintError, ShapeError
from .frank_wolfe import check_init, default_init_fmpgw, default_init_fpgw
from .model import (SolverReport, TraceEntry, TransportPlan, fmpgw_objective,
                    fpgw_objective)
from .pot import (MassConstrained, Penalty, PotProblem, sinkhorn_mass_constrained,
                  sinkhorn_penalty)

logger = logging.getLogger(__name__)


def kl_bar(plan, p, q):
    """Σ π log(π / (p_i q_j)) over the cells with π > 0."""
    pi = TransportPlan.from_array(plan).entries
    reference = np.outer(p, q)
    support = pi > 0
    if np.any(reference[support] <= 0):
        raise ConstraintError("plan puts mass where p_i q_j = 0")
    return float(np.sum(pi[support] * np.log(pi[support] / reference[support])))


def _check_epsilon(cfg):
    if cfg.epsilon <= 0:
        raise ConstraintError(f"Sinkhorn solvers need epsilon > 0, got {cfg.epsilon}")


def conditional_cost(source, target, C, pi, cfg):
    """Cost c_π of the γ-subproblem and the uniform scalar ε·D̄_KL(π‖p⊗q)."""
    _check_epsilon(cfg)
    pi = TransportPlan.from_array(pi).entries
    C = np.asarray(C, dtype=float)
    if C.shape != pi.shape or pi.shape != (source.size, target.size):
        raise ShapeError(f"cost {C.shape} / plan {pi.shape} do not match the spaces")
    kl_scalar = cfg.epsilon * kl_bar(pi, source.mass, target.mass)
    cost = 0.5 * cfg.omega1 * C + kl_scalar
    if cfg.omega2 != 0.0:
        cost = cost + cfg.omega2 * contract(cfg.loss, source.structure, target.structure, pi)
    return cost, kl_scalar


def relaxed_objective(source, target, C, gamma, pi, cfg):
    """F(γ, π) + ε(|γ| D̄(π) + |π| D̄(γ)), the two-plan relaxation."""
    g = TransportPlan.from_array(gamma)
    h = TransportPlan.from_array(pi)
    value = cfg.omega1 * float(np.sum(np.asarray(C) * (g.entries + h.entries) / 2.0))
    if cfg.omega2 != 0.0:
        cross = contract(cfg.loss, source.structure, target.structure, h.entries)
        value += cfg.omega2 * float(np.sum(cross * g.entries))
    value += cfg.lam * (source.total_mass ** 2 + target.total_mass ** 2)
    value -= 2.0 * cfg.omega2 * cfg.lam * g.total_mass * h.total_mass
    value += cfg.epsilon * (g.total_mass * kl_bar(h, source.mass, target.mass)
                            + h.total_mass * kl_bar(g, source.mass, target.mass))
    return value


def entropic_objective(source, target, C, gamma, cfg):
    """FPGW objective plus ε D̄_KL(γ⊗γ ‖ (p⊗q)⊗(p⊗q)) = 2ε|γ| D̄(γ)."""
    g = TransportPlan.from_array(gamma)
    entropy = 2.0 * g.total_mass * kl_bar(g, source.mass, target.mass)
    return fpgw_objective(source, target, C, g, cfg) + cfg.epsilon * entropy


def _uniform_clamp(gamma, p, q):
    rows = gamma.sum(axis=1)
    cols = gamma.sum(axis=0)
    factor = 1.0
    if np.any(rows > 0):
        factor = min(factor, np.min(p[rows > 0] / rows[rows > 0]))
    if np.any(cols > 0):
        factor = min(factor, np.min(q[cols > 0] / cols[cols > 0]))
    return gamma * factor


def _penalty_update(source, target, C, fixed, cfg, inner_max_iter, inner_tol):
    cost, _ = conditional_cost(source, target, C, fixed, cfg)
    mass = float(fixed.sum())
    penalty = cfg.omega2 * cfg.lam * mass
    prob = PotProblem(cost, source.mass, target.mass, Penalty(penalty))
    plan = sinkhorn_penalty(prob, lam=penalty, epsilon=cfg.epsilon * mass,
                            max_iter=inner_max_iter, tol=inner_tol)
    return plan.entries


def solve_sink_fpgw(source, target, C, cfg, init=None, max_iter=100, tol=1e-6,
                    inner_max_iter=2000, inner_tol=1e-9):
    """Alternating Sinkhorn solver for entropic FPGW (sink-FPGW).

    Each round sets π ← γ, solves the penalized entropic subproblem for γ
    given π and then for π given γ, rescales γ by √(|π|/|γ|) and shrinks it
    uniformly back into Γ≤. The loop stops when ‖π − γ‖_F < tol. The
    reported objective is the plain FPGW objective of the final γ.
    """
    _check_epsilon(cfg)
    p, q = source.mass, target.mass
    gamma = (default_init_fpgw(p, q) if init is None
             else check_init(init, source, target)).entries
    trace = []
    converged = False
    for k in range(1, max_iter + 1):
        pi = gamma
        if pi.sum() == 0.0:
            logger.info("sink-fpgw: plan mass collapsed to zero")
            converged = True
            break
        gamma = _penalty_update(source, target, C, pi, cfg, inner_max_iter, inner_tol)
        gamma_mass = float(gamma.sum())
        if gamma_mass == 0.0:
            logger.info("sink-fpgw: plan mass collapsed to zero")
            converged = True
            break
        pi = _penalty_update(source, target, C, gamma, cfg, inner_max_iter, inner_tol)
        gamma = _uniform_clamp(gamma * np.sqrt(pi.sum() / gamma_mass), p, q)
        value = fpgw_objective(source, target, C, TransportPlan(gamma), cfg)
        trace.append(TraceEntry(k, value, None, None))
        logger.debug("sink-fpgw iter %d: objective=%.10g mass=%.6g", k, value, gamma.sum())
        if np.linalg.norm(pi - gamma) < tol:
            converged = True
            break
    plan = TransportPlan(gamma)
    value = fpgw_objective(source, target, C, plan, cfg)
    logger.info("sink-fpgw finished after %d rounds (objective=%.10g, converged=%s)",
                len(trace), value, converged)
    return SolverReport(plan, value, trace, converged, len(trace))


def solve_sink_fmpgw(source, target, C, cfg, init=None, max_iter=100, tol=1e-6,
                     inner_max_iter=2000, inner_tol=1e-9):
    """Alternating Sinkhorn solver for entropic FMPGW; plans keep mass ρ."""
    _check_epsilon(cfg)
    p, q = source.mass, target.mass
    rho = cfg.checked_rho(source.total_mass, target.total_mass)
    fcfg = cfg.replace(lam=0.0, rho=rho)
    if rho == 0.0:
        return SolverReport(TransportPlan.zeros(source.size, target.size), 0.0, [], True, 0)
    gamma = (default_init_fmpgw(p, q, rho) if init is None
             else check_init(init, source, target, rho)).entries

    def update(fixed):
        cost, _ = conditional_cost(source, target, C, fixed, fcfg)
        prob = PotProblem(cost, p, q, MassConstrained(rho))
        return sinkhorn_mass_constrained(prob, epsilon=fcfg.epsilon * rho,
                                         max_iter=inner_max_iter, tol=inner_tol).entries

    trace = []
    converged = False
    for k in range(1, max_iter + 1):
        pi = gamma
        gamma = update(pi)
        pi = update(gamma)
        value = fmpgw_objective(source, target, C, TransportPlan(gamma), fcfg)
        trace.append(TraceEntry(k, value, None, None))
        logger.debug("sink-fmpgw iter %d: objective=%.10g", k, value)
        if np.linalg.norm(pi - gamma) < tol:
            converged = True
            break
    plan = TransportPlan(gamma)
    value = fmpgw_objective(source, target, C, plan, fcfg)
    logger.info("sink-fmpgw finished after %d rounds (objective=%.10g, converged=%s)",
                len(trace), value, converged)
    return SolverReport(plan, value, trace, converged, len(trace))
