"""Tensor contractions M∘γ and Mᵀ∘γ.

M is the 4-way loss tensor M[i, j, i', j'] = L(Cx[i, i'], Cy[j, j']) and
(M∘γ)[i, j] = Σ_{i',j'} M[i, j, i', j'] γ[i', j']. Losses that split as
L(a, b) = f1(a) + f2(b) - h1(a) h2(b) are contracted with three matrix
products; anything else goes through the naive reference sum.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import ShapeError, UnsupportedLossError

NAIVE_MAX_CELLS = 10_000


class Loss(Enum):
    SQUARED_DIFFERENCE = 'squared'
    ABSOLUTE_DIFFERENCE = 'absolute'


@dataclass(frozen=True)
class DecomposableLoss:
    """A loss with its (f1, f2, h1, h2) split, when one exists."""

    loss: Loss
    f1: Optional[Callable] = None
    f2: Optional[Callable] = None
    h1: Optional[Callable] = None
    h2: Optional[Callable] = None

    @property
    def decomposable(self):
        return self.f1 is not None

    def __call__(self, a, b):
        return loss_value(self.loss, a, b)


def decompose(loss):
    """Return the DecomposableLoss for a Loss (or pass one through)."""
    if isinstance(loss, DecomposableLoss):
        return loss
    if loss is Loss.SQUARED_DIFFERENCE:
        return DecomposableLoss(
            loss,
            f1=np.square,
            f2=np.square,
            h1=lambda a: 2.0 * a,
            h2=lambda b: b,
        )
    if loss is Loss.ABSOLUTE_DIFFERENCE:
        return DecomposableLoss(loss)
    raise UnsupportedLossError(f"unknown loss {loss!r}")


def _base_loss(loss):
    return loss.loss if isinstance(loss, DecomposableLoss) else loss


def loss_value(loss, a, b):
    """Elementwise L(a, b)."""
    loss = _base_loss(loss)
    diff = np.subtract(a, b)
    if loss is Loss.SQUARED_DIFFERENCE:
        return diff * diff
    if loss is Loss.ABSOLUTE_DIFFERENCE:
        return np.abs(diff)
    raise UnsupportedLossError(f"unknown loss {loss!r}")


def tensor_max(loss, Cx, Cy):
    """max over all entry pairs of L(Cx[i,i'], Cy[j,j'])."""
    Cx = np.asarray(Cx, dtype=float)
    Cy = np.asarray(Cy, dtype=float)
    if Cx.size == 0 or Cy.size == 0:
        return 0.0
    spread = max(Cx.max() - Cy.min(), Cy.max() - Cx.min(), 0.0)
    return float(loss_value(loss, spread, 0.0))


def _check_shapes(Cx, Cy, plan):
    Cx = np.asarray(Cx, dtype=float)
    Cy = np.asarray(Cy, dtype=float)
    plan = np.asarray(plan, dtype=float)
    if Cx.ndim != 2 or Cx.shape[0] != Cx.shape[1]:
        raise ShapeError(f"Cx must be square, got shape {Cx.shape}")
    if Cy.ndim != 2 or Cy.shape[0] != Cy.shape[1]:
        raise ShapeError(f"Cy must be square, got shape {Cy.shape}")
    if plan.shape != (Cx.shape[0], Cy.shape[0]):
        raise ShapeError(
            f"plan shape {plan.shape} does not match ({Cx.shape[0]}, {Cy.shape[0]})")
    return Cx, Cy, plan


def contract(loss, Cx, Cy, plan):
    """M∘γ in O(n²m + nm²) for decomposable losses.

    Args:
        loss (Loss | DecomposableLoss): Structure loss L.
        Cx (np.ndarray): Source structure matrix, shape (n, n).
        Cy (np.ndarray): Target structure matrix, shape (m, m).
        plan (np.ndarray): Coupling γ, shape (n, m).

    Returns:
        np.ndarray: (n, m) matrix M∘γ.
    """
    Cx, Cy, plan = _check_shapes(Cx, Cy, plan)
    dloss = decompose(loss)
    if not dloss.decomposable:
        return naive_contract(dloss, Cx, Cy, plan)
    row_mass = plan.sum(axis=1)
    col_mass = plan.sum(axis=0)
    source_term = dloss.f1(Cx) @ row_mass
    target_term = dloss.f2(Cy) @ col_mass
    cross = dloss.h1(Cx) @ plan @ dloss.h2(Cy).T
    return source_term[:, None] + target_term[None, :] - cross


def contract_transposed(loss, Cx, Cy, plan):
    """Mᵀ∘γ, where Mᵀ[i, j, i', j'] = M[i', j', i, j]."""
    Cx, Cy, plan = _check_shapes(Cx, Cy, plan)
    if np.array_equal(Cx, Cx.T) and np.array_equal(Cy, Cy.T):
        return contract(loss, Cx, Cy, plan)
    return contract(loss, np.ascontiguousarray(Cx.T), np.ascontiguousarray(Cy.T), plan)


def naive_contract(loss, Cx, Cy, plan, transpose=False):
    """Reference O(n²m²) contraction; ``transpose=True`` gives Mᵀ∘γ."""
    Cx, Cy, plan = _check_shapes(Cx, Cy, plan)
    n, m = plan.shape
    if n * m > NAIVE_MAX_CELLS:
        raise ShapeError(
            f"naive contraction limited to n*m <= {NAIVE_MAX_CELLS}, got {n * m}")
    if transpose:
        Cx, Cy = Cx.T, Cy.T
    out = np.empty((n, m))
    for i in range(n):
        # block[j, i', j'] = L(Cx[i, i'], Cy[j, j'])
        block = loss_value(loss, Cx[i][None, :, None], Cy[:, None, :])
        out[i] = np.einsum('jab,ab->j', block, plan)
    return out
