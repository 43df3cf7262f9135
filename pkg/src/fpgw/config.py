"""Solver defaults and shared tolerances.

Defaults live in ``config/solver_defaults.yml`` at the repository root; the
built-in table below is used for any key the file does not set.
"""

import copy
import os

import yaml

from .errors import ConfigError

# --- Tolerances ---
FEAS_TOL = 1e-9  # marginal domination / nonnegativity
MASS_TOL = 1e-8  # |gamma| == rho
REL_OBJ_TOL = 1e-6  # relative objective comparisons
SINKHORN_FEAS_TOL = 1e-6  # domination slack of entropic plans

DEFAULTS_PATH = os.path.join(
    os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
    'config', 'solver_defaults.yml')

BUILTIN_DEFAULTS = {
    'problem': {'omega2': 0.5, 'lambda': 1.0, 'epsilon': 0.02, 'q_exponent': 1.0},
    'frank_wolfe': {'max_iter': 1000, 'tol': 1e-9},
    'sinkhorn': {'max_iter': 2000, 'tol': 1e-9},
    'alternating': {'max_iter': 100, 'tol': 1e-6},
    'barycenter': {'outer_iters': 10, 'tol': 1e-7},
    'kmeans': {'iters': 10, 'rho': 1.0, 'omega2': 0.999},
    'oracle': {'step_fraction': 1.0 / 16.0, 'max_cells': 2_000_000},
    'synth': {'bfs_fraction': 0.5, 'sbm_p_in': 0.5, 'sbm_p_out': 0.05},
}


def _merge(base, override):
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_defaults(path=None):
    """Load solver defaults, merging the YAML file over the built-in table.

    Args:
        path (str): YAML file to read. Defaults to ``config/solver_defaults.yml``.

    Returns:
        dict: Nested parameter dictionary with every section of BUILTIN_DEFAULTS.
    """
    path = path or DEFAULTS_PATH
    if not os.path.exists(path):
        return copy.deepcopy(BUILTIN_DEFAULTS)
    try:
        with open(path, 'r') as f:
            loaded = yaml.safe_load(f) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse config file '{path}': {exc}") from exc
    if not isinstance(loaded, dict):
        raise ConfigError(f"config file '{path}' must contain a mapping at top level")
    return _merge(BUILTIN_DEFAULTS, loaded)


def thread_cap():
    """Worker count for batch solves, capped by the FPGW_THREADS variable."""
    default = os.cpu_count() or 1
    raw = os.environ.get('FPGW_THREADS')
    if raw is None or raw.strip() == '':
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"FPGW_THREADS must be a positive integer, got '{raw}'") from exc
    if value < 1:
        raise ConfigError(f"FPGW_THREADS must be a positive integer, got '{raw}'")
    return value
