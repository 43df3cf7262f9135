"""Brute-force and finite-difference oracles for tiny problems.

grid_global_min enumerates every plan whose entries are multiples of a
grid step δ and that satisfies the domination (and, for FMPGW, mass)
constraints, and returns the best one together with a certified gap: the
continuous optimum can be rounded to a grid plan moving each entry by less
than δ, so the grid minimum exceeds the true minimum by at most
G·δ·n·m, G bounding every partial derivative of the objective.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, NamedTuple

import numpy as np

from .config import load_defaults
from .contraction import Loss, loss_value
from .errors import ConstraintError, OracleBudgetError
from .graphs import pairwise_feature_cost
from .model import FusedConfig, MmSpace, TransportPlan

logger = logging.getLogger(__name__)

MAX_ORACLE_CELLS = 6
UNIT_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    step: float
    max_cells: int = 2_000_000

    def __post_init__(self):
        if not self.step > 0:
            raise ConstraintError(f"grid step must be positive, got {self.step}")
        if self.max_cells < 1:
            raise ConstraintError(f"max_cells must be positive, got {self.max_cells}")

    @classmethod
    def for_masses(cls, p, q, fraction=None, max_cells=None):
        """Step = fraction × the smallest positive mass of p and q.

        ``fraction`` and ``max_cells`` default to the ``oracle`` section of
        the solver defaults.
        """
        settings = load_defaults()['oracle']
        fraction = float(settings['step_fraction']) if fraction is None else fraction
        max_cells = int(settings['max_cells']) if max_cells is None else max_cells
        masses = np.concatenate([np.asarray(p, dtype=float), np.asarray(q, dtype=float)])
        positive = masses[masses > 0]
        base = positive.min() if positive.size else 1.0
        return cls(fraction * base, max_cells)


class GridResult(NamedTuple):
    objective: float
    plan: TransportPlan
    certified_gap: float
    count: int


def _units(values, step, name):
    scaled = np.asarray(values, dtype=float) / step
    units = np.rint(scaled)
    if np.any(np.abs(scaled - units) > UNIT_TOL * np.maximum(1.0, scaled)):
        raise ConstraintError(f"{name} must be multiples of the grid step {step}")
    return units.astype(int)


def _row_options(cap, col_caps):
    """All integer rows r >= 0 with r <= col_caps and sum(r) <= cap, shape (R, m)."""
    rows = np.zeros((1, 0), dtype=int)
    for col_cap in col_caps:
        sums = rows.sum(axis=1)
        parts = []
        for v in range(min(cap, col_cap) + 1):
            keep = rows[sums + v <= cap]
            parts.append(np.hstack([keep, np.full((len(keep), 1), v, dtype=int)]))
        rows = np.vstack(parts)
    return rows


def enumerate_grid_plans(p_units, q_units, rho_units=None, max_cells=2_000_000):
    """Integer matrices K >= 0 with K1 <= p_units, Kᵀ1 <= q_units (and sum = rho_units).

    Rows are added one at a time; partial plans whose column usage already
    exceeds q_units (or whose total exceeds rho_units) are dropped.

    Returns:
        np.ndarray: (count, n, m) integer array.
    """
    p_units = [int(x) for x in p_units]
    q_units = np.asarray(q_units, dtype=int)
    n, m = len(p_units), len(q_units)
    if n * m > MAX_ORACLE_CELLS:
        raise OracleBudgetError(f"oracle limited to n*m <= {MAX_ORACLE_CELLS}, got {n * m}")
    states = np.zeros((1, 0, m), dtype=int)
    used = np.zeros((1, m), dtype=int)
    for i in range(n):
        options = _row_options(p_units[i], q_units)
        if len(states) * len(options) > max_cells:
            raise OracleBudgetError(
                f"grid enumeration needs {len(states) * len(options)} cells, budget {max_cells}")
        total = used[:, None, :] + options[None, :, :]
        ok = np.all(total <= q_units, axis=2)
        if rho_units is not None:
            ok &= total.sum(axis=2) <= rho_units
        s_idx, o_idx = np.nonzero(ok)
        states = np.concatenate([states[s_idx], options[o_idx][:, None, :]], axis=1)
        used = total[s_idx, o_idx]
    if rho_units is not None:
        states = states[used.sum(axis=1) == rho_units]
    return states


def count_grid_plans(p_units, q_units, rho_units=None):
    """Number of grid-feasible integer plans, by memoized cell-by-cell recursion."""
    p_units = tuple(int(x) for x in p_units)
    q_units = tuple(int(x) for x in q_units)
    n, m = len(p_units), len(q_units)

    @lru_cache(maxsize=None)
    def count(cell, rows, cols, left):
        if cell == n * m:
            return 1 if left is None or left == 0 else 0
        i, j = divmod(cell, m)
        cap = min(rows[i], cols[j]) if left is None else min(rows[i], cols[j], left)
        total = 0
        for v in range(cap + 1):
            r = rows[:i] + (rows[i] - v,) + rows[i + 1:]
            c = cols[:j] + (cols[j] - v,) + cols[j + 1:]
            total += count(cell + 1, r, c, None if left is None else left - v)
        return total

    return count(0, p_units, q_units, rho_units)


def _loss_tensor(source, target, loss):
    n, m = source.size, target.size
    M = loss_value(loss, source.structure[:, None, :, None], target.structure[None, :, None, :])
    return M.reshape(n * m, n * m)


def _batch_objective(source, target, C, plans, cfg, mode):
    flat = plans.reshape(len(plans), -1)
    linear = flat @ np.asarray(C, dtype=float).ravel()
    value = cfg.omega1 * linear
    if cfg.omega2 != 0.0:
        M = _loss_tensor(source, target, cfg.loss)
        quad = np.einsum('bk,kl,bl->b', flat, M, flat)
        if mode == 'fpgw':
            mass = flat.sum(axis=1)
            quad = quad - 2.0 * cfg.lam * mass * mass
        value = value + cfg.omega2 * quad
    if mode == 'fpgw':
        value = value + cfg.lam * (source.total_mass ** 2 + target.total_mass ** 2)
    return value


def certified_gap(source, target, C, cfg, step, mode='fpgw'):
    """G·δ·n·m with G = ω₁max|C| + 2ω₂·max|M − 2λ|·mass cap.

    The mass cap is min(|p|, |q|) for FPGW and ρ (with λ = 0) for FMPGW.
    """
    n, m = source.size, target.size
    if n == 0 or m == 0:
        return 0.0
    if mode == 'fmpgw':
        lam, cap = 0.0, cfg.checked_rho(source.total_mass, target.total_mass)
    else:
        lam, cap = cfg.lam, min(source.total_mass, target.total_mass)
    G = cfg.omega1 * float(np.max(np.abs(C)))
    if cfg.omega2 != 0.0:
        spread = float(np.max(np.abs(_loss_tensor(source, target, cfg.loss) - 2.0 * lam)))
        G += 2.0 * cfg.omega2 * spread * cap
    return G * step * n * m


def grid_global_min(source, target, C, cfg, grid=None, mode='fpgw'):
    """Exhaustive grid minimum of the FPGW (or FMPGW) objective.

    Args:
        source (MmSpace): Source space, masses multiples of grid.step.
        target (MmSpace): Target space, masses multiples of grid.step.
        C (np.ndarray): Feature cost (n, m).
        cfg (FusedConfig): Problem parameters; mode 'fmpgw' needs cfg.rho.
        grid (GridSpec): Step and cell budget; defaults to 1/16 of the smallest mass.
        mode (str): 'fpgw' or 'fmpgw'.

    Returns:
        GridResult: Minimum objective, its plan, the certified gap and the plan count.
    """
    if mode not in ('fpgw', 'fmpgw'):
        raise ValueError(f"mode must be 'fpgw' or 'fmpgw', got '{mode}'")
    grid = grid or GridSpec.for_masses(source.mass, target.mass)
    if source.size * target.size > MAX_ORACLE_CELLS:
        raise OracleBudgetError(
            f"oracle limited to n*m <= {MAX_ORACLE_CELLS}, got {source.size * target.size}")
    p_units = _units(source.mass, grid.step, 'source masses')
    q_units = _units(target.mass, grid.step, 'target masses')
    rho_units = None
    if mode == 'fmpgw':
        rho = cfg.checked_rho(source.total_mass, target.total_mass)
        rho_units = int(_units([rho], grid.step, 'rho')[0])
        cfg = cfg.replace(lam=0.0, rho=rho)
    plans = enumerate_grid_plans(p_units, q_units, rho_units, grid.max_cells)
    if len(plans) == 0:
        raise ConstraintError("no grid plan satisfies the constraints")
    values = _batch_objective(source, target, C, plans * grid.step, cfg, mode)
    best = int(np.argmin(values))
    gap = certified_gap(source, target, C, cfg, grid.step, mode)
    logger.debug("grid oracle: %d plans, min=%.10g, gap=%.3g", len(plans), values[best], gap)
    return GridResult(float(values[best]), TransportPlan(plans[best] * grid.step), gap, len(plans))


def finite_diff_gradient(objective, plan, h=1e-6):
    """Central-difference gradient of ``objective`` (a function of an (n, m) array)."""
    if not 1e-8 <= h <= 1e-3:
        raise ConstraintError(f"h must lie in [1e-8, 1e-3], got {h}")
    base = np.array(plan.entries if isinstance(plan, TransportPlan) else plan, dtype=float)
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        up = base.copy()
        down = base.copy()
        up[idx] += h
        down[idx] -= h
        grad[idx] = (objective(up) - objective(down)) / (2.0 * h)
    return grad


def wl_labels_reference(graphs, iterations):
    """WL refinement by explicit relabelling with one dictionary shared by all graphs.

    Returns:
        list: One (n, H) integer array per graph; column h holds round h+1.
    """
    dictionary = {}
    current = []
    for g in graphs:
        if not g.has_labels:
            raise ConstraintError("WL refinement needs label features")
        current.append(list(g.features))
    neighbors = [[[] for _ in range(g.node_count)] for g in graphs]
    for nb, g in zip(neighbors, graphs):
        for a, b in g.edges:
            nb[a].append(b)
            nb[b].append(a)
    rounds = [np.zeros((g.node_count, iterations), dtype=int) for g in graphs]
    for h in range(iterations):
        updated = []
        for k, g in enumerate(graphs):
            labels = []
            for v in range(g.node_count):
                signature = (current[k][v], tuple(sorted(current[k][u] for u in neighbors[k][v])))
                labels.append(dictionary.setdefault(signature, len(dictionary)))
            rounds[k][:, h] = labels
            updated.append(labels)
        current = updated
    return rounds


def wl_hamming_reference(ga, gb, iterations):
    la, lb = wl_labels_reference([ga, gb], iterations)
    return (la[:, None, :] != lb[None, :, :]).sum(axis=2).astype(float)


# --- property suites ---

@dataclass
class SuiteReport:
    trials: int
    checks: int = 0
    violations: List[dict] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def check(self, name, passed, **witness):
        self.checks += 1
        if not passed:
            self.violations.append({'check': name, **witness})


def metric_distance(source, target, C, cfg, grid):
    """Grid minimum of ω₁⟨C,γ⟩ + ω₂⟨M∘γ,γ⟩ + λ(|p|² + |q|² − 2|γ|²).

    This is the FPGW objective with mass penalty λ/ω₂, shifted by the
    constant difference; returns (distance, certified gap).
    """
    if cfg.omega2 <= 0:
        raise ConstraintError("metric form needs omega2 > 0")
    scaled = cfg.replace(lam=cfg.lam / cfg.omega2)
    result = grid_global_min(source, target, C, scaled, grid, mode='fpgw')
    shift = (scaled.lam - cfg.lam) * (source.total_mass ** 2 + target.total_mass ** 2)
    return result.objective - shift, result.certified_gap


MASS_CHOICES = (0.25, 0.5, 0.75, 1.0)


def _random_space(rng, size):
    coords = rng.uniform(0.0, 1.0, size=size)
    structure = np.abs(coords[:, None] - coords[None, :])
    mass = rng.choice(MASS_CHOICES, size=size)
    return MmSpace(structure, mass, features=coords[:, None])


def _permuted(space, rng):
    perm = rng.permutation(space.size)
    return MmSpace(space.structure[np.ix_(perm, perm)], space.mass[perm],
                   features=space.features[perm])


def metric_property_suite(seed=0, trials=100, q=2, step=1.0 / 16.0, omega2=0.5, lam=0.5,
                          max_points=2):
    """Nonnegativity, symmetry, identity and the 2^{q-1}-relaxed triangle inequality.

    Distances are grid optima of the metric form on random real-line spaces
    with C = |x - y|^q and L = |a - b|^q; every check allows for the
    certified gaps of the distances involved.
    """
    if q not in (1, 2):
        raise ConstraintError(f"q must be 1 or 2, got {q}")
    rng = np.random.default_rng(seed)
    loss = Loss.ABSOLUTE_DIFFERENCE if q == 1 else Loss.SQUARED_DIFFERENCE
    cfg = FusedConfig.from_omega2(omega2, lam=lam, loss=loss, q_exponent=q)
    grid = GridSpec(step)
    report = SuiteReport(trials)

    def dist(a, b):
        cost = pairwise_feature_cost(a.features, b.features, q=cfg.q_exponent)
        return metric_distance(a, b, cost, cfg, grid)

    for t in range(trials):
        X, Y, Z = (_random_space(rng, int(rng.integers(1, max_points + 1))) for _ in range(3))
        dxy, gxy = dist(X, Y)
        dyx, gyx = dist(Y, X)
        dxz, gxz = dist(X, Z)
        dzy, gzy = dist(Z, Y)
        gap = max(gxy, gyx, gxz, gzy)
        report.check('nonnegative', dxy >= -gxy, trial=t, value=dxy)
        report.check('symmetric', abs(dxy - dyx) <= 2.0 * gap, trial=t, forward=dxy, backward=dyx)
        bound = 2.0 ** (q - 1) * (dxz + dzy) + 4.0 * gap
        report.check('triangle', dxy <= bound, trial=t, value=dxy, bound=bound)
        dxx, gxx = dist(X, _permuted(X, rng))
        report.check('identity', dxx <= gxx, trial=t, value=dxx, gap=gxx)
    logger.info("metric suite q=%d: %d checks, %d violations", q, report.checks,
                len(report.violations))
    return report


def _random_instance(rng, n, m, masses):
    def space(size, mass):
        coords = rng.uniform(0.0, 1.0, size=size)
        structure = np.abs(coords[:, None] - coords[None, :]) ** 2
        return MmSpace(structure, mass, features=coords[:, None])

    source = space(n, masses[0])
    target = space(m, masses[1])
    C = np.abs(source.features[:, 0][:, None] - target.features[:, 0][None, :])
    return source, target, C


def equivalence_suite(seed=0, trials=20, step=1.0 / 16.0, omega2=0.5, lam=0.3):
    """FPGW/FMPGW agreement at the optimal mass and large-λ mass saturation.

    (a) on random instances, the FPGW grid optimum at its own mass ρ* and
        the FMPGW grid optimum at ρ = ρ* have the same transport cost.
    (b) on balanced instances with λ above the saturation threshold, the
        FPGW optimum transports min(|p|, |q|) and its transport cost equals
        the balanced (FMPGW at full mass) optimum.
    """
    rng = np.random.default_rng(seed)
    grid = GridSpec(step)
    report = SuiteReport(trials)
    shapes = [(1, 2), (2, 1), (2, 2), (1, 3), (2, 3)]
    for t in range(trials):
        n, m = shapes[int(rng.integers(len(shapes)))]
        masses = (rng.choice(MASS_CHOICES, size=n), rng.choice(MASS_CHOICES, size=m))
        source, target, C = _random_instance(rng, n, m, masses)
        cfg = FusedConfig.from_omega2(omega2, lam=lam)
        _check_fixed_mass(report, t, source, target, C, cfg, grid)

        # balanced masses, λ large enough that every grid plan gains from more mass
        total = float(rng.choice(MASS_CHOICES))
        q_mass = np.full(m, total / m)
        p_mass = np.full(n, total / n)
        if np.any(np.abs(np.rint(np.concatenate([p_mass, q_mass]) / step)
                         - np.concatenate([p_mass, q_mass]) / step) > UNIT_TOL):
            p_mass = np.zeros(n)
            p_mass[0] = total
            q_mass = np.zeros(m)
            q_mass[0] = total
        source, target, C = _random_instance(rng, n, m, (p_mass, q_mass))
        base = FusedConfig.from_omega2(omega2)
        big = saturating_lambda(source, target, C, base, step) + 1.0
        _check_saturation(report, t, source, target, C, base.replace(lam=big), grid)
    logger.info("equivalence suite: %d checks, %d violations", report.checks,
                len(report.violations))
    return report


def saturating_lambda(source, target, C, cfg, step):
    """Smallest λ with 2ω₂λ ≥ ω₁·max C / s + ω₂·max L, s = min(δ, min(|p|, |q|)).

    Strictly above it, adding δ mass to any non-full grid plan lowers the FPGW
    objective, so every grid minimizer transports min(|p|, |q|); it also
    satisfies the continuous saturation condition.
    """
    cap = min(source.total_mass, target.total_mass)
    scale = min(step, cap)
    max_l = float(np.max(_loss_tensor(source, target, cfg.loss)))
    return (cfg.omega1 * float(np.max(C)) / scale + cfg.omega2 * max_l) / (2.0 * cfg.omega2)


def _transport_cost(value, source, target, cfg, mass):
    """FPGW objective minus λ(|p|²+|q|²) plus 2ω₂λ|γ|²: ω₁⟨C,γ⟩ + ω₂⟨M∘γ,γ⟩."""
    constant = cfg.lam * (source.total_mass ** 2 + target.total_mass ** 2)
    return value - constant + 2.0 * cfg.omega2 * cfg.lam * mass * mass


def _check_fixed_mass(report, t, source, target, C, cfg, grid):
    free = grid_global_min(source, target, C, cfg, grid, mode='fpgw')
    rho = free.plan.total_mass
    fixed = grid_global_min(source, target, C, cfg.replace(rho=rho), grid, mode='fmpgw')
    cost = _transport_cost(free.objective, source, target, cfg, rho)
    report.check('fixed-mass', abs(cost - fixed.objective) <= 2.0 * free.certified_gap,
                 trial=t, fpgw=cost, fmpgw=fixed.objective, rho=rho)


def _check_saturation(report, t, source, target, C, cfg, grid):
    full = min(source.total_mass, target.total_mass)
    free = grid_global_min(source, target, C, cfg, grid, mode='fpgw')
    report.check('saturation', abs(free.plan.total_mass - full) <= grid.step,
                 trial=t, mass=free.plan.total_mass, full=full)
    balanced = grid_global_min(source, target, C, cfg.replace(rho=full), grid, mode='fmpgw')
    cost = _transport_cost(free.objective, source, target, cfg, free.plan.total_mass)
    report.check('balanced', abs(cost - balanced.objective) <= 2.0 * free.certified_gap,
                 trial=t, fpgw=cost, fgw=balanced.objective)


__all__ = [
    'GridSpec', 'GridResult', 'grid_global_min', 'certified_gap', 'enumerate_grid_plans',
    'count_grid_plans', 'finite_diff_gradient', 'wl_labels_reference', 'wl_hamming_reference',
    'metric_distance', 'metric_property_suite', 'equivalence_suite', 'saturating_lambda',
    'SuiteReport',
]
