"""Dense coordinate-tensor algebra at a point.

Tensors are stored as dense row-major arrays with an explicit per-slot
variance flag ('u' upper / 'l' lower).  Operations that need matching
variance fail loudly instead of coercing.  No index mini-language is used;
every contraction is an explicit axis manipulation so the identity checks
remain auditable index by index.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

__all__ = [
    "DenseTensor",
    "symmetrize",
    "antisymmetrize",
    "contract",
    "raise_lower",
    "SingularMetricError",
]

MAX_RANK = 4
METRIC_COND_LIMIT = 1e12


class SingularMetricError(ValueError):
    """Metric is numerically singular (condition number above threshold)."""


@dataclass(frozen=True)
class DenseTensor:
    """A dense tensor of rank 0..4 at a point, with per-slot variance."""

    dim: int
    variance: tuple[str, ...]
    components: np.ndarray

    def __post_init__(self):
        rank = len(self.variance)
        if rank > MAX_RANK:
            raise ValueError(f"rank {rank} exceeds supported maximum {MAX_RANK}")
        if any(v not in ("u", "l") for v in self.variance):
            raise ValueError(f"variance flags must be 'u' or 'l', got {self.variance}")
        arr = np.asarray(self.components, dtype=float)
        if arr.shape != (self.dim,) * rank:
            raise ValueError(
                f"component shape {arr.shape} does not match dim {self.dim}, rank {rank}"
            )
        object.__setattr__(self, "components", arr)

    @property
    def rank(self) -> int:
        return len(self.variance)


def _check_slots(t: DenseTensor, slots) -> tuple[int, ...]:
    slots = tuple(slots)
    for s in slots:
        if not 0 <= s < t.rank:
            raise ValueError(f"slot {s} out of range for rank {t.rank}")
    if len(set(slots)) != len(slots):
        raise ValueError(f"duplicate slots in {slots}")
    return slots


def _permute_slots(t: DenseTensor, slots, signed: bool) -> np.ndarray:
    variances = {t.variance[s] for s in slots}
    if len(variances) > 1:
        raise ValueError(
            f"slots {slots} mix variances {sorted(variances)}; (anti)symmetrization "
            "requires slots of equal variance"
        )
    acc = np.zeros_like(t.components)
    count = 0
    for perm in permutations(slots):
        axes = list(range(t.rank))
        for src, dst in zip(slots, perm):
            axes[dst] = src
        arr = np.transpose(t.components, axes)
        if signed:
            sign = _perm_sign(slots, perm)
            acc = acc + sign * arr
        else:
            acc = acc + arr
        count += 1
    return acc / count


def _perm_sign(base, perm) -> float:
    order = [base.index(p) for p in perm]
    sign = 1.0
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if order[i] > order[j]:
                sign = -sign
    return sign


def symmetrize(t: DenseTensor, slots) -> DenseTensor:
    """Average of ``t`` over all permutations of the named slots."""
    slots = _check_slots(t, slots)
    return DenseTensor(t.dim, t.variance, _permute_slots(t, slots, signed=False))


def antisymmetrize(t: DenseTensor, slots) -> DenseTensor:
    """Signed average of ``t`` over all permutations of the named slots."""
    slots = _check_slots(t, slots)
    return DenseTensor(t.dim, t.variance, _permute_slots(t, slots, signed=True))


def contract(t: DenseTensor, slot_up: int, slot_down: int) -> DenseTensor:
    """Trace over a paired upper/lower slot; rank drops by two."""
    _check_slots(t, (slot_up, slot_down))
    if t.variance[slot_up] != "u" or t.variance[slot_down] != "l":
        raise ValueError(
            f"contract needs an upper/lower pair, got "
            f"{t.variance[slot_up]!r}/{t.variance[slot_down]!r} at slots "
            f"({slot_up}, {slot_down})"
        )
    keep = [ax for ax in range(t.rank) if ax not in (slot_up, slot_down)]
    arr = np.transpose(t.components, keep + [slot_up, slot_down])
    out = np.trace(arr, axis1=-2, axis2=-1)
    variance = tuple(t.variance[ax] for ax in keep)
    return DenseTensor(t.dim, variance, out)


def raise_lower(t: DenseTensor, slot: int, metric: DenseTensor) -> DenseTensor:
    """Flip the variance of one slot using the metric (or its inverse)."""
    _check_slots(t, (slot,))
    if metric.rank != 2 or metric.variance != ("l", "l"):
        raise ValueError("metric must be a rank-2 lower tensor")
    g = metric.components
    if not np.allclose(g, g.T, rtol=1e-12, atol=0.0):
        raise ValueError("metric must be symmetric")
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > METRIC_COND_LIMIT:
        raise SingularMetricError(
            f"metric condition number {cond:.3e} exceeds {METRIC_COND_LIMIT:.0e}"
        )
    if t.variance[slot] == "u":
        mat = g
        new_flag = "l"
    else:
        mat = np.linalg.inv(g)
        new_flag = "u"
    arr = np.tensordot(mat, t.components, axes=(1, slot))
    arr = np.moveaxis(arr, 0, slot)
    variance = tuple(
        new_flag if ax == slot else v for ax, v in enumerate(t.variance)
    )
    return DenseTensor(t.dim, variance, arr)
