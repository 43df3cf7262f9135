"""Linear partial-OT subproblems.

Both forms minimize a linear cost over dominated couplings
Γ≤(p, q) = {γ ≥ 0 : γ1 ≤ p, γᵀ1 ≤ q}:

* Penalty(c): min ⟨cost - 2c, γ⟩ over Γ≤, i.e. the total-variation
  penalized problem ⟨cost, γ⟩ + c(|p - γ₁| + |q - γ₂|) up to a constant.
* MassConstrained(ρ): min ⟨cost, γ⟩ over Γ≤ with |γ| = ρ.

The exact solver reduces either form to a balanced (n+1)×(m+1) problem
with one dummy row and column and hands it to POT's network simplex. The
entropic solvers are plain Sinkhorn scalings with capped or projected
updates.
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Union

import numpy as np
import ot

from .config import MASS_TOL, SINKHORN_FEAS_TOL
from .errors import ConstraintError, ShapeError, SolverError
from .model import TransportPlan

logger = logging.getLogger(__name__)

EMD_MAX_ITER = 1_000_000
BIG_FACTOR = 1e3


@dataclass(frozen=True)
class Penalty:
    linear_mass_coeff: float = 0.0


@dataclass(frozen=True)
class MassConstrained:
    rho: float


@dataclass(frozen=True)
class PotProblem:
    cost: np.ndarray
    p: np.ndarray
    q: np.ndarray
    mode: Union[Penalty, MassConstrained] = Penalty()

    def __post_init__(self):
        cost = np.array(self.cost, dtype=float)
        p = np.array(self.p, dtype=float)
        q = np.array(self.q, dtype=float)
        if cost.ndim != 2 or cost.shape != (p.size, q.size):
            raise ShapeError(f"cost shape {cost.shape} does not match ({p.size}, {q.size})")
        if np.any(p < 0) or np.any(q < 0):
            raise ConstraintError("masses must be nonnegative")
        if isinstance(self.mode, MassConstrained):
            limit = min(p.sum(), q.sum())
            if self.mode.rho < 0 or self.mode.rho > limit + MASS_TOL:
                raise ConstraintError(
                    f"rho={self.mode.rho} outside [0, min(|p|, |q|)={limit}]")
        for name, arr in (('cost', cost), ('p', p), ('q', q)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def rho(self):
        return min(self.mode.rho, self.p.sum(), self.q.sum())


def _require_finite(cost):
    if not np.all(np.isfinite(cost)):
        raise SolverError("cost matrix has non-finite entries")


def linear_objective(prob, plan):
    """Objective of the linear subproblem, without the constant λ(|p|+|q|)."""
    gamma = TransportPlan.from_array(plan).entries
    value = float(np.sum(prob.cost * gamma))
    if isinstance(prob.mode, Penalty):
        value -= 2.0 * prob.mode.linear_mass_coeff * float(gamma.sum())
    return value


def solve_exact(prob):
    """Global minimizer of the linear subproblem via an augmented balanced OT.

    Penalty mode pads p with |q| and q with |p| and puts zero cost on every
    dummy cell. MassConstrained pads with |q| - ρ and |p| - ρ and puts a
    large cost on the dummy-dummy cell, which leaves exactly ρ mass on the
    real block.
    """
    _require_finite(prob.cost)
    n, m = prob.cost.shape
    p_mass, q_mass = float(prob.p.sum()), float(prob.q.sum())
    if n == 0 or m == 0 or p_mass == 0.0 or q_mass == 0.0:
        return TransportPlan.zeros(n, m)

    extended = np.zeros((n + 1, m + 1))
    if isinstance(prob.mode, Penalty):
        extended[:n, :m] = prob.cost - 2.0 * prob.mode.linear_mass_coeff
        a = np.append(prob.p, q_mass)
        b = np.append(prob.q, p_mass)
    else:
        rho = prob.rho
        if rho == 0.0:
            return TransportPlan.zeros(n, m)
        extended[:n, :m] = prob.cost
        extended[n, m] = BIG_FACTOR * (1.0 + np.abs(prob.cost).max())
        a = np.append(prob.p, max(q_mass - rho, 0.0))
        b = np.append(prob.q, max(p_mass - rho, 0.0))
    # identical totals up to rounding; emd checks them to 1e-6
    b = b * (a.sum() / b.sum())

    gamma, log = ot.emd(a, b, extended, numItermax=EMD_MAX_ITER, log=True)
    if log.get('result_code') not in (None, 1):
        if log.get('result_code') == 3:
            warnings.warn(f"network simplex stopped early: {log.get('warning')}")
        else:
            raise SolverError(f"exact partial OT failed: {log.get('warning')}")
    real = np.asarray(gamma)[:n, :m]
    return TransportPlan(np.maximum(real, 0.0))


def _capped_ratio(mass, denom, cap):
    out = np.zeros_like(mass)
    positive = denom > 0
    out[positive] = np.minimum(mass[positive] / denom[positive], cap)
    return out


def _kernel(cost, p, q, epsilon):
    return np.exp(-cost / epsilon) * np.outer(p, q)


def sinkhorn_penalty(prob, lam=None, epsilon=0.02, max_iter=1000, tol=1e-9):
    """Entropic partial OT with total-variation mass penalty.

    Iterates u = min(p / Kv, e^{λ/ε}), v = min(q / Kᵀu, e^{λ/ε}) with
    K = e^{-c/ε} p qᵀ, starting from u = v = 1. The minimum of the cost is
    subtracted first and folded into the cap exponent, which changes
    nothing mathematically and keeps the kernel away from underflow.

    Args:
        prob (PotProblem): Cost and masses; the mode is ignored.
        lam (float): Mass penalty λ. Defaults to the Penalty coefficient of prob.
        epsilon (float): Entropic weight ε > 0.
        max_iter (int): Maximum number of (u, v) updates.
        tol (float): Stop when the relative sup-norm change of (u, v) drops below it.

    Returns:
        TransportPlan: diag(u) K diag(v), row-projected so γ₁ ≤ p holds exactly.
    """
    if epsilon <= 0:
        raise ConstraintError(f"epsilon must be positive, got {epsilon}")
    if lam is None:
        lam = prob.mode.linear_mass_coeff if isinstance(prob.mode, Penalty) else 0.0
    _require_finite(prob.cost)
    n, m = prob.cost.shape
    if n == 0 or m == 0 or prob.p.sum() == 0.0 or prob.q.sum() == 0.0:
        return TransportPlan.zeros(n, m)

    shift = float(prob.cost.min())
    K = _kernel(prob.cost - shift, prob.p, prob.q, epsilon)
    cap_exponent = (lam - 0.5 * shift) / epsilon
    cap = np.exp(cap_exponent) if cap_exponent < 700.0 else np.inf

    u = np.ones(n)
    v = np.ones(m)
    converged = False
    with np.errstate(over='ignore', invalid='ignore'):
        for _ in range(max_iter):
            u_next = _capped_ratio(prob.p, K @ v, cap)
            v_next = _capped_ratio(prob.q, K.T @ u_next, cap)
            if not (np.all(np.isfinite(u_next)) and np.all(np.isfinite(v_next))):
                raise SolverError("Sinkhorn scaling overflowed; increase epsilon")
            change = max(
                np.max(np.abs(u_next - u) / (1.0 + np.abs(u_next))),
                np.max(np.abs(v_next - v) / (1.0 + np.abs(v_next))),
            )
            u, v = u_next, v_next
            if change < tol:
                converged = True
                break
    if not converged:
        warnings.warn("sinkhorn_penalty reached max_iter before convergence")

    gamma = u[:, None] * K * v[None, :]
    if not np.all(np.isfinite(gamma)):
        raise SolverError("Sinkhorn plan overflowed; increase epsilon")
    return TransportPlan(_project_rows(gamma, prob.p))


def _project_rows(gamma, p):
    sums = gamma.sum(axis=1)
    scale = np.ones_like(sums)
    over = sums > p
    scale[over] = p[over] / sums[over]
    return gamma * scale[:, None]


def _project_cols(gamma, q):
    sums = gamma.sum(axis=0)
    scale = np.ones_like(sums)
    over = sums > q
    scale[over] = q[over] / sums[over]
    return gamma * scale[None, :]


def _safe_ratio(num, den):
    out = np.ones_like(num)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def sinkhorn_mass_constrained(prob, epsilon=0.02, max_iter=1000, tol=1e-9):
    """Entropic partial OT over Γ≤ with |γ| = ρ by cyclic KL projections.

    Starts from Kρ/|K| and cycles the projections onto {γ₂ ≤ q},
    {γ₁ ≤ p} and {|γ| = ρ}, each with its own Dykstra correction ξ.
    """
    if not isinstance(prob.mode, MassConstrained):
        raise ConstraintError("sinkhorn_mass_constrained needs a MassConstrained problem")
    if epsilon <= 0:
        raise ConstraintError(f"epsilon must be positive, got {epsilon}")
    _require_finite(prob.cost)
    n, m = prob.cost.shape
    rho = prob.rho
    if n == 0 or m == 0 or rho == 0.0:
        return TransportPlan.zeros(n, m)

    K = _kernel(prob.cost - prob.cost.min(), prob.p, prob.q, epsilon)
    total = K.sum()
    if not total > 0:
        raise SolverError("Sinkhorn kernel underflowed; increase epsilon")
    gamma = K * (rho / total)

    def fix_mass(g):
        s = g.sum()
        if not s > 0:
            raise SolverError("mass-constrained Sinkhorn collapsed to zero mass")
        return g * (rho / s)

    projections = (
        lambda g: _project_cols(g, prob.q),
        lambda g: _project_rows(g, prob.p),
        fix_mass,
    )
    xi = [np.ones((n, m)) for _ in projections]
    converged = False
    for _ in range(max_iter):
        start = gamma
        for i, project in enumerate(projections):
            previous = gamma * xi[i]
            gamma = project(previous)
            xi[i] = _safe_ratio(previous, gamma)
        if np.max(np.abs(gamma - start)) < tol:
            converged = True
            break
    if not converged:
        warnings.warn("sinkhorn_mass_constrained reached max_iter before convergence")
    # the cycle ends on the mass projection; clamp back under both marginals
    gamma = _project_rows(_project_cols(gamma, prob.q), prob.p)
    deficit = rho - gamma.sum()
    if deficit > SINKHORN_FEAS_TOL * max(1.0, rho):
        raise SolverError(
            f"mass-constrained Sinkhorn left mass {gamma.sum():.10g} after clamping to the "
            f"marginals (rho={rho}); raise max_iter or epsilon")
    return TransportPlan(gamma)
