"""FMPGW and FPGW barycenters by block-coordinate descent.

Given input spaces (C^k, X^k, p^k) and weights β, the barycenter (C, X, p)
of a fixed support size minimizes Σ_k β_k·d_k((C, X, p), input k). The loop
alternates two blocks:

* Step 1: one Frank-Wolfe solve per input for the plan γ^k, warm-started
  from the previous plan.
* Step 2: closed-form structure and feature updates given the plans
  (squared structure loss, squared Euclidean feature cost).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import networkx as nx
import numpy as np
import ot

from .contraction import Loss, decompose
from .errors import ConstraintError, ShapeError, UnsupportedLossError
from .frank_wolfe import default_init_fmpgw, default_init_fpgw, solve_fw_fmpgw, solve_fw_fpgw
from .model import FusedConfig, MmSpace, TransportPlan, fmpgw_objective, fpgw_objective
from .synthetic import connect_components

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12


@dataclass
class BarycenterProblem:
    """Inputs, weights and per-input parameters of a barycenter problem.

    Exactly one of ``rhos`` (FMPGW) or ``lams`` (FPGW) is normally given;
    ``cfgs`` is one FusedConfig shared by every input or one per input.
    """

    inputs: Sequence[MmSpace]
    weights: np.ndarray
    size: int
    mass: np.ndarray
    rhos: Optional[Sequence[float]] = None
    lams: Optional[Sequence[float]] = None
    cfgs: Union[FusedConfig, Sequence[FusedConfig]] = field(default_factory=FusedConfig)

    def __post_init__(self):
        self.inputs = list(self.inputs)
        self.weights = np.asarray(self.weights, dtype=float)
        self.mass = np.asarray(self.mass, dtype=float)
        k = len(self.inputs)
        if k == 0:
            raise ShapeError("barycenter needs at least one input")
        if self.weights.shape != (k,):
            raise ShapeError(f"weights must have shape ({k},), got {self.weights.shape}")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > WEIGHT_TOL:
            raise ConstraintError("weights must be nonnegative and sum to 1")
        if self.mass.shape != (self.size,) or np.any(self.mass < 0):
            raise ShapeError(f"barycenter mass must be a nonnegative ({self.size},) vector")
        if isinstance(self.cfgs, FusedConfig):
            self.cfgs = [self.cfgs] * k
        self.cfgs = list(self.cfgs)
        if len(self.cfgs) != k:
            raise ShapeError(f"expected {k} configs, got {len(self.cfgs)}")
        if self.rhos is not None:
            self.rhos = [float(r) for r in self.rhos]
            if len(self.rhos) != k:
                raise ShapeError(f"expected {k} rho values, got {len(self.rhos)}")
            for rho, space in zip(self.rhos, self.inputs):
                limit = min(self.mass.sum(), space.total_mass)
                if rho < 0 or rho > limit + 1e-8:
                    raise ConstraintError(f"rho={rho} outside [0, {limit}]")
        if self.lams is not None:
            self.lams = [float(v) for v in self.lams]
            if len(self.lams) != k:
                raise ShapeError(f"expected {k} lambda values, got {len(self.lams)}")

    @property
    def has_features(self):
        return all(s.features is not None and not s.has_labels for s in self.inputs)

    def fmpgw_cfg(self, k):
        if self.rhos is None:
            raise ConstraintError("FMPGW barycenter needs rho values")
        return self.cfgs[k].replace(rho=self.rhos[k], lam=0.0)

    def fpgw_cfg(self, k):
        if self.lams is None:
            return self.cfgs[k]
        return self.cfgs[k].replace(lam=self.lams[k])


@dataclass
class BarycenterResult:
    structure: np.ndarray
    features: Optional[np.ndarray]
    plans: List[TransportPlan]
    trace: List[float]

    @property
    def objective(self):
        return self.trace[-1] if self.trace else None


def barycentric_projection(plan, Xk, fallback):
    """Row i: Σ_j γ[i,j] Xk[j] / γ₁[i], or fallback[i] where γ₁[i] = 0."""
    gamma = TransportPlan.from_array(plan).entries
    Xk = np.asarray(Xk, dtype=float)
    fallback = np.asarray(fallback, dtype=float)
    if gamma.shape[1] != Xk.shape[0] or fallback.shape != (gamma.shape[0], Xk.shape[1]):
        raise ShapeError(
            f"plan {gamma.shape}, features {Xk.shape} and fallback {fallback.shape} disagree")
    rows = gamma.sum(axis=1)
    out = fallback.copy()
    positive = rows > 0
    out[positive] = (gamma[positive] @ Xk) / rows[positive, None]
    return out


def update_features(projections, row_masses, beta, previous=None):
    """x_i = Σ_k β_k γ₁^k[i] x̂_i^k / Σ_k β_k γ₁^k[i].

    Rows with a zero denominator keep ``previous`` (zeros when not given).
    """
    projections = [np.asarray(x, dtype=float) for x in projections]
    row_masses = [np.asarray(r, dtype=float) for r in row_masses]
    beta = np.asarray(beta, dtype=float)
    if not (len(projections) == len(row_masses) == len(beta)):
        raise ShapeError("projections, row masses and weights must have one entry per input")
    n, d = projections[0].shape
    if any(x.shape != (n, d) for x in projections) or any(r.shape != (n,) for r in row_masses):
        raise ShapeError("projections and row masses have inconsistent shapes")
    numer = np.zeros((n, d))
    denom = np.zeros(n)
    for x_hat, rows, b in zip(projections, row_masses, beta):
        numer += b * rows[:, None] * x_hat
        denom += b * rows
    out = np.zeros((n, d)) if previous is None else np.array(previous, dtype=float)
    positive = denom > 0
    out[positive] = numer[positive] / denom[positive, None]
    return out


def update_structure(plans, Ck, beta, loss=Loss.SQUARED_DIFFERENCE):
    """C = Σ_k β_k γ^k C^k (γ^k)ᵀ / Σ_k β_k γ₁^k (γ₁^k)ᵀ with 0/0 = 0, symmetrized."""
    if decompose(loss).loss is not Loss.SQUARED_DIFFERENCE:
        raise UnsupportedLossError("closed-form structure update needs the squared loss")
    gammas = [TransportPlan.from_array(g).entries for g in plans]
    beta = np.asarray(beta, dtype=float)
    if not (len(gammas) == len(Ck) == len(beta)):
        raise ShapeError("plans, structures and weights must have one entry per input")
    n = gammas[0].shape[0]
    numer = np.zeros((n, n))
    denom = np.zeros((n, n))
    for gamma, C, b in zip(gammas, Ck, beta):
        C = np.asarray(C, dtype=float)
        if gamma.shape != (n, C.shape[0]):
            raise ShapeError(f"plan {gamma.shape} does not match structure {C.shape}")
        rows = gamma.sum(axis=1)
        numer += b * (gamma @ C @ gamma.T)
        denom += b * np.outer(rows, rows)
    out = np.zeros((n, n))
    positive = denom > 0
    out[positive] = numer[positive] / denom[positive]
    return 0.5 * (out + out.T)


def random_connected_init(n, d, seed=None):
    """Shortest-path matrix of a seeded random connected graph and N(0, 1) features."""
    rng = np.random.default_rng(seed)
    g = nx.gnp_random_graph(n, min(1.0, 2.0 / max(n, 1)), seed=int(rng.integers(2 ** 31)))
    connect_components(g, rng)
    C = nx.floyd_warshall_numpy(g, nodelist=range(n)) if n else np.zeros((0, 0))
    X = rng.standard_normal((n, d))
    return np.asarray(C, dtype=float), X


def _feature_cost(X, space):
    if X is None or space.features is None or space.has_labels:
        return np.zeros((len(X) if X is not None else 0, space.size))
    return ot.dist(X, space.feature_matrix(), metric='sqeuclidean')


def _support(prob, C, X):
    return MmSpace(C, prob.mass, features=X, metric=False)


def _objective(prob, C, X, plans, variant):
    bary = _support(prob, C, X)
    total = 0.0
    for k, (space, plan) in enumerate(zip(prob.inputs, plans)):
        cost = _feature_cost(X, space)
        if variant == 'fmpgw':
            value = fmpgw_objective(bary, space, cost, plan, prob.fmpgw_cfg(k))
        else:
            value = fpgw_objective(bary, space, cost, plan, prob.fpgw_cfg(k))
        total += prob.weights[k] * value
    return total


def _solve(prob, init, outer_iters, tol, plan_inits, seed, fw_max_iter, fw_tol, variant):
    if any(cfg.loss is not Loss.SQUARED_DIFFERENCE for cfg in prob.cfgs):
        raise UnsupportedLossError("barycenter updates need the squared structure loss")
    d = prob.inputs[0].feature_matrix().shape[1] if prob.has_features else 0
    if init is None:
        C, X = random_connected_init(prob.size, d, seed)
    else:
        C, X = (np.array(a, dtype=float) if a is not None else None for a in init)
    C = 0.5 * (C + C.T)
    if not prob.has_features:
        X = None
    elif X is None or X.shape != (prob.size, d):
        raise ShapeError(f"initial features must have shape ({prob.size}, {d})")

    if plan_inits is None:
        if variant == 'fmpgw':
            plans = [default_init_fmpgw(prob.mass, s.mass, prob.fmpgw_cfg(k).rho)
                     for k, s in enumerate(prob.inputs)]
        else:
            plans = [default_init_fpgw(prob.mass, s.mass) for s in prob.inputs]
    else:
        plans = [TransportPlan.from_array(g) for g in plan_inits]

    trace = []
    for it in range(1, outer_iters + 1):
        bary = _support(prob, C, X)
        # Step 1: plans
        updated = []
        for k, space in enumerate(prob.inputs):
            cost = _feature_cost(X, space)
            if variant == 'fmpgw':
                report = solve_fw_fmpgw(bary, space, cost, prob.fmpgw_cfg(k), init=plans[k],
                                        max_iter=fw_max_iter, tol=fw_tol)
            else:
                report = solve_fw_fpgw(bary, space, cost, prob.fpgw_cfg(k), init=plans[k],
                                       max_iter=fw_max_iter, tol=fw_tol)
            updated.append(report.plan)
        plans = updated

        # Step 2: structure and features
        struct_w = [b * cfg.omega2 for b, cfg in zip(prob.weights, prob.cfgs)]
        C = update_structure(plans, [s.structure for s in prob.inputs], struct_w)
        if X is not None:
            feat_w = [b * cfg.omega1 for b, cfg in zip(prob.weights, prob.cfgs)]
            projections = [barycentric_projection(g, s.feature_matrix(), X)
                           for g, s in zip(plans, prob.inputs)]
            X = update_features(projections, [g.row_sums for g in plans], feat_w, previous=X)

        value = _objective(prob, C, X, plans, variant)
        logger.debug("%s barycenter outer %d: objective=%.10g", variant, it, value)
        if trace and trace[-1] - value < tol:
            trace.append(value)
            break
        trace.append(value)
    logger.info("%s barycenter finished after %d outer iterations (objective=%.10g)",
                variant, len(trace), trace[-1] if trace else float('nan'))
    return BarycenterResult(C, X, plans, trace)


def solve_barycenter_fmpgw(prob, init=None, outer_iters=10, tol=1e-7, plan_inits=None,
                           seed=None, fw_max_iter=1000, fw_tol=1e-9):
    """FMPGW barycenter: Step 1 solves FMPGW at ρ_k for each input.

    Args:
        prob (BarycenterProblem): Inputs, weights, support size, mass and ρ_k.
        init (tuple): (C⁰, X⁰); defaults to random_connected_init(size, d, seed).
        outer_iters (int): Maximum number of Step 1 / Step 2 rounds.
        tol (float): Stop once the objective decreases by less than tol.
        plan_inits (list): Optional starting plans, one per input.

    Returns:
        BarycenterResult: Structure, features, final plans and the objective trace.
    """
    return _solve(prob, init, outer_iters, tol, plan_inits, seed, fw_max_iter, fw_tol, 'fmpgw')


def solve_barycenter_fpgw(prob, init=None, outer_iters=10, tol=1e-7, plan_inits=None,
                          seed=None, fw_max_iter=1000, fw_tol=1e-9):
    """FPGW barycenter: Step 1 solves FPGW with λ_k; Step 2 is shared with FMPGW."""
    return _solve(prob, init, outer_iters, tol, plan_inits, seed, fw_max_iter, fw_tol, 'fpgw')
