"""Domain types shared by every solver, plus objective evaluation.

An mm-space is a finite point set given by a structure matrix (pairwise
distances, already raised to the power r), a nonnegative mass per point and
optional node features. Feature costs between two spaces are computed
elsewhere (fpgw.graphs) and passed in as an (n, m) matrix.
"""

import dataclasses
import json
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .config import FEAS_TOL, MASS_TOL
from .contraction import Loss, contract
from .errors import ConstraintError, InvalidPlanError, ShapeError


def _frozen_array(values, dtype=float):
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MmSpace:
    """Finite metric-measure space with optional node features.

    ``features`` is either a real matrix (n, d) (a 1-D real vector is read
    as d = 1) or a sequence of n label strings. ``metric=False`` skips the
    zero-diagonal check; barycenter supports need it because the closed-form
    structure update does not keep the diagonal at zero.
    """

    structure: np.ndarray
    mass: np.ndarray
    features: Optional[object] = None
    metric: bool = True

    def __post_init__(self):
        structure = _frozen_array(self.structure)
        mass = _frozen_array(self.mass)
        if structure.ndim != 2 or structure.shape[0] != structure.shape[1]:
            raise ShapeError(f"structure must be square, got shape {structure.shape}")
        n = structure.shape[0]
        if mass.shape != (n,):
            raise ShapeError(f"mass must have shape ({n},), got {mass.shape}")
        if not np.all(np.isfinite(structure)):
            raise ShapeError("structure entries must be finite")
        scale = 1.0 + (np.abs(structure).max() if n else 0.0)
        if not np.allclose(structure, structure.T, rtol=0.0, atol=1e-10 * scale):
            raise ShapeError("structure must be symmetric")
        if self.metric and np.any(np.diag(structure) != 0.0):
            raise ShapeError("structure must have a zero diagonal")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0):
            raise ConstraintError("mass entries must be finite and nonnegative")
        object.__setattr__(self, 'structure', structure)
        object.__setattr__(self, 'mass', mass)
        object.__setattr__(self, 'features', normalize_features(self.features, n))

    @property
    def size(self):
        return self.structure.shape[0]

    @property
    def total_mass(self):
        return float(self.mass.sum())

    @property
    def has_labels(self):
        return isinstance(self.features, tuple)

    def feature_matrix(self):
        """Real features as an (n, d) array."""
        if self.features is None or self.has_labels:
            raise ShapeError("space has no real-valued features")
        return self.features

    def with_mass(self, mass):
        return dataclasses.replace(self, mass=mass)


def normalize_features(features, n):
    if features is None:
        return None
    if isinstance(features, np.ndarray) and features.dtype.kind in 'fiub':
        arr = features
    else:
        items = list(features)
        if len(items) != n:
            raise ShapeError(f"features must have {n} rows, got {len(items)}")
        if items and all(isinstance(x, str) for x in items):
            return tuple(str(x) for x in items)
        arr = np.asarray(items)
    arr = np.array(arr, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != n:
        raise ShapeError(f"features must have {n} rows, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TransportPlan:
    """Nonnegative coupling between two spaces.

    Entries in [-FEAS_TOL, 0) are clipped to zero; anything more negative
    raises InvalidPlanError.
    """

    entries: np.ndarray
    total_mass: float = field(init=False)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2:
            raise ShapeError(f"plan must be a matrix, got shape {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise InvalidPlanError("plan entries must be finite")
        if entries.size and entries.min() < -FEAS_TOL:
            raise InvalidPlanError(f"negative plan entry {entries.min():.3e}")
        entries[entries < 0] = 0.0
        entries.setflags(write=False)
        object.__setattr__(self, 'entries', entries)
        object.__setattr__(self, 'total_mass', float(entries.sum()))

    @classmethod
    def from_array(cls, values):
        return values if isinstance(values, cls) else cls(values)

    @classmethod
    def zeros(cls, n, m):
        return cls(np.zeros((n, m)))

    @classmethod
    def product(cls, p, q, scale=1.0):
        return cls(scale * np.outer(p, q))

    @property
    def shape(self):
        return self.entries.shape

    @property
    def row_sums(self):
        return self.entries.sum(axis=1)

    @property
    def col_sums(self):
        return self.entries.sum(axis=0)

    @property
    def T(self):
        return TransportPlan(self.entries.T)

    def feasible_for(self, p, q, tol=FEAS_TOL):
        """True when row sums <= p + tol and column sums <= q + tol."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.shape != (p.size, q.size):
            return False
        return bool(np.all(self.row_sums <= p + tol) and np.all(self.col_sums <= q + tol))


@dataclass(frozen=True)
class FusedConfig:
    """Problem parameters: ω₁, ω₂, λ, ρ, the structure loss, q and ε."""

    omega1: float = 0.5
    omega2: float = 0.5
    lam: float = 1.0
    rho: Optional[float] = None
    loss: Loss = Loss.SQUARED_DIFFERENCE
    q_exponent: float = 1.0
    epsilon: float = 0.02

    def __post_init__(self):
        for name in ('omega1', 'omega2'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConstraintError(f"{name} must lie in [0, 1], got {value}")
        if abs(self.omega1 + self.omega2 - 1.0) > 1e-12:
            raise ConstraintError(
                f"omega1 + omega2 must equal 1, got {self.omega1 + self.omega2}")
        if self.lam < 0:
            raise ConstraintError(f"lambda must be nonnegative, got {self.lam}")
        if self.rho is not None and self.rho < 0:
            raise ConstraintError(f"rho must be nonnegative, got {self.rho}")
        if self.q_exponent < 1:
            raise ConstraintError(f"q_exponent must be >= 1, got {self.q_exponent}")
        if self.epsilon < 0:
            raise ConstraintError(f"epsilon must be nonnegative, got {self.epsilon}")

    @classmethod
    def from_omega2(cls, omega2, **kwargs):
        return cls(omega1=1.0 - omega2, omega2=omega2, **kwargs)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def checked_rho(self, p_mass, q_mass):
        """Return rho after checking 0 <= rho <= min(|p|, |q|)."""
        if self.rho is None:
            raise ConstraintError("this solver needs cfg.rho")
        limit = min(p_mass, q_mass)
        if self.rho > limit + MASS_TOL:
            raise ConstraintError(f"rho={self.rho} exceeds min(|p|, |q|)={limit}")
        return min(self.rho, limit)


class TraceEntry(NamedTuple):
    iteration: int
    objective: float
    step: Optional[float]
    gap: Optional[float]


@dataclass
class SolverReport:
    """Result of one solve: final plan, objective and per-iteration trace."""

    plan: TransportPlan
    objective: float
    trace: List[TraceEntry] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    @property
    def gap(self):
        """Last recorded Frank-Wolfe gap (None for Sinkhorn solvers)."""
        for entry in reversed(self.trace):
            if entry.gap is not None:
                return entry.gap
        return None

    def to_dict(self, include_plan=False):
        data = {
            'objective': self.objective,
            'converged': self.converged,
            'iterations': self.iterations,
            'mass': self.plan.total_mass,
            'gap': self.gap,
            'trace': [entry._asdict() for entry in self.trace],
        }
        if include_plan:
            data['plan'] = self.plan.entries.tolist()
        return data

    def export_json(self, path, include_plan=False):
        with open(path, 'w') as f:
            json.dump(self.to_dict(include_plan), f, indent=2)


def _check_problem(source, target, feature_cost, plan):
    plan = TransportPlan.from_array(plan)
    n, m = source.size, target.size
    feature_cost = np.asarray(feature_cost, dtype=float)
    if feature_cost.shape != (n, m):
        raise ShapeError(f"feature cost shape {feature_cost.shape} != ({n}, {m})")
    if plan.shape != (n, m):
        raise ShapeError(f"plan shape {plan.shape} != ({n}, {m})")
    return feature_cost, plan


def quadratic_term(source, target, plan, cfg):
    """⟨M∘γ, γ⟩ for the configured loss."""
    gamma = TransportPlan.from_array(plan).entries
    if gamma.size == 0:
        return 0.0
    return float(np.sum(contract(cfg.loss, source.structure, target.structure, gamma) * gamma))


def fpgw_objective(source, target, feature_cost, plan, cfg):
    """ω₁⟨C,γ⟩ + ω₂⟨(M−2λ)∘γ,γ⟩ + λ(|p|²+|q|²).

    The zero plan evaluates to λ(|p|²+|q|²).
    """
    feature_cost, plan = _check_problem(source, target, feature_cost, plan)
    mass = plan.total_mass
    linear = float(np.sum(feature_cost * plan.entries))
    quadratic = 0.0
    if cfg.omega2 != 0.0:
        quadratic = quadratic_term(source, target, plan, cfg) - 2.0 * cfg.lam * mass * mass
    constant = cfg.lam * (source.total_mass ** 2 + target.total_mass ** 2)
    return cfg.omega1 * linear + cfg.omega2 * quadratic + constant


def fmpgw_objective(source, target, feature_cost, plan, cfg):
    """ω₁⟨C,γ⟩ + ω₂⟨M∘γ,γ⟩ for a plan of mass cfg.rho."""
    feature_cost, plan = _check_problem(source, target, feature_cost, plan)
    if cfg.rho is None:
        raise ConstraintError("fmpgw_objective needs cfg.rho")
    if abs(plan.total_mass - cfg.rho) > MASS_TOL:
        raise ConstraintError(
            f"plan mass {plan.total_mass:.12g} differs from rho={cfg.rho}")
    linear = float(np.sum(feature_cost * plan.entries))
    quadratic = quadratic_term(source, target, plan, cfg) if cfg.omega2 != 0.0 else 0.0
    return cfg.omega1 * linear + cfg.omega2 * quadratic
