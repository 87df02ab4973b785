"""Pointwise metric data, connections, curvature and covariant derivatives.

Conventions (fixed once, calibrated by the identity suite):

* ``gamma[k, i, j]`` holds the connection coefficient with upper index ``k``
  and symmetric lower pair ``(i, j)``; ``dgamma[l, k, i, j]`` its l-th
  coordinate derivative.
* the curvature of a connection is
  ``R^b_ijk = d_j gamma[b,k,i] - d_k gamma[b,j,i] + gamma[b,j,a] gamma[a,k,i]
  - gamma[b,k,a] gamma[a,j,i]``,
  antisymmetric (exactly) in its last two slots,
* ``Ric_ij = R^b_ibj`` and ``Scal = g^{ij} Ric_ij``; with this choice
  ``Scal = -tr(B)`` holds identically for ``B^b_k = g^{ij} R^b_ijk``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .expr import eval_jet
from .jets import Jet3
from .tensor import DenseTensor, SingularMetricError

if TYPE_CHECKING:  # pragma: no cover
    from .structure import SystemDef

__all__ = [
    "MetricPointData",
    "ConnectionPointData",
    "CurvatureBundle",
    "PointField",
    "SingularMetricError",
    "metric_at",
    "christoffel",
    "induced_connection",
    "curvature",
    "contractions",
    "covariant_hessian",
    "laplacian_with_gradient",
    "covariant_d",
    "exterior_d",
]

METRIC_COND_LIMIT = 1e12

# Overall sign of the curvature tensor.  Calibrated against the semi-degenerate
# identity eta = -Ric/(n-1) on the built-in "em1" system; +1 passes.
CURVATURE_SIGN = 1.0
CURVATURE_SIGN_LABEL = "+1"


@dataclass(frozen=True)
class MetricPointData:
    """Metric components and their partials at one point.

    ``dg[k, i, j] = d_k g_ij`` and ``d2g[l, k, i, j] = d^2_{lk} g_ij``.
    """

    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray
    d2g: np.ndarray
    dg_inv: np.ndarray
    condition: float

    @property
    def dim(self) -> int:
        return self.g.shape[0]


@dataclass(frozen=True)
class ConnectionPointData:
    """Torsion-free connection coefficients and their first partials."""

    gamma: np.ndarray    # [k, i, j], symmetric in (i, j)
    dgamma: np.ndarray   # [l, k, i, j]

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]


@dataclass(frozen=True)
class CurvatureBundle:
    """Curvature of a connection and all contractions used by the checks."""

    R: DenseTensor       # R^b_ijk, variance ulll
    Riem: DenseTensor    # g-lowered, llll
    Ric: DenseTensor     # ll
    Scal: float
    B_up: DenseTensor    # B^b_k = g^{ij} R^b_ijk, ul
    B: DenseTensor       # B_ij = g_ia B^a_j, ll
    trB: float
    Proj: DenseTensor    # projective Weyl arrangement, llll


@dataclass(frozen=True)
class PointField:
    """A tensor at a point together with its first coordinate partials."""

    tensor: DenseTensor
    partials: np.ndarray   # shape (n,) + tensor shape; partials[l] = d_l components


def metric_at(system: "SystemDef", point) -> MetricPointData:
    """Evaluate the metric expressions of ``system`` to second order."""
    point = np.asarray(point, dtype=float)
    n = system.n
    g = np.zeros((n, n))
    dg = np.zeros((n, n, n))
    d2g = np.zeros((n, n, n, n))
    for (i, j), e in system.metric_exprs.items():
        jet = eval_jet(e, point)
        for a, b in ((i, j), (j, i)) if i != j else ((i, j),):
            g[a, b] = jet.value
            dg[:, a, b] = jet.grad
            d2g[:, :, a, b] = jet.hess
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > METRIC_COND_LIMIT:
        raise SingularMetricError(
            f"metric of {system.name!r} singular at {tuple(point)}: "
            f"condition {cond:.3e}"
        )
    g_inv = np.linalg.inv(g)
    dg_inv = np.array([-g_inv @ dg[k] @ g_inv for k in range(n)])
    return MetricPointData(point, g, g_inv, dg, d2g, dg_inv, float(cond))


def christoffel(m: MetricPointData) -> ConnectionPointData:
    """Levi-Civita connection of the metric, with first partials."""
    n = m.dim
    # bracket[l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    bracket = (
        np.einsum("ijl->lij", m.dg)
        + np.einsum("jil->lij", m.dg)
        - m.dg
    )
    gamma = 0.5 * np.einsum("kl,lij->kij", m.g_inv, bracket)
    dbracket = (
        np.einsum("mijl->mlij", m.d2g)
        + np.einsum("mjil->mlij", m.d2g)
        - m.d2g
    )
    dgamma = 0.5 * (
        np.einsum("mkl,lij->mkij", m.dg_inv, bracket)
        + np.einsum("kl,mlij->mkij", m.g_inv, dbracket)
    )
    return ConnectionPointData(gamma, dgamma)


def induced_connection(
    lc: ConnectionPointData,
    primary: np.ndarray,
    dprimary: np.ndarray,
    orientation: float = -1.0,
) -> ConnectionPointData:
    """Perturb the Levi-Civita connection by a structure tensor.

    ``primary[i, j, k]`` is the structure tensor with symmetric lower pair
    ``(i, j)`` and upper slot ``k``; ``dprimary[l, i, j, k]`` its partials.
    ``orientation`` fixes the sense of the difference: -1 yields
    ``gamma - P`` (the non-degenerate convention, which reproduces the
    published B matrix of the oscillator family), +1 yields ``gamma + P``
    (the semi-degenerate convention, whose scalar Hessian closes as
    ``hess V = eta V`` and which reproduces the published Ricci curvature of
    the builtin conformal example).
    """
    if orientation not in (-1.0, 1.0):
        raise ValueError(f"orientation must be +-1, got {orientation!r}")
    if not np.allclose(primary, np.swapaxes(primary, 0, 1), atol=0.0, rtol=1e-12):
        raise ValueError("structure tensor must be symmetric in its lower pair")
    gamma = lc.gamma + orientation * np.transpose(primary, (2, 0, 1))
    dgamma = lc.dgamma + orientation * np.transpose(dprimary, (0, 3, 1, 2))
    return ConnectionPointData(gamma, dgamma)


def curvature(c: ConnectionPointData) -> np.ndarray:
    """Curvature array ``R[b, i, j, k]`` of a torsion-free connection."""
    term1 = np.einsum("jbki->bijk", c.dgamma)
    term2 = np.einsum("kbji->bijk", c.dgamma)
    quad1 = np.einsum("bja,aki->bijk", c.gamma, c.gamma)
    quad2 = np.einsum("bka,aji->bijk", c.gamma, c.gamma)
    return CURVATURE_SIGN * ((term1 - term2) + (quad1 - quad2))


def contractions(R: np.ndarray, m: MetricPointData) -> CurvatureBundle:
    """All curvature contractions entering the identity checks."""
    n = m.dim
    if n < 3:
        raise ValueError(f"contractions require dimension >= 3, got {n}")
    ric = np.trace(R, axis1=0, axis2=2)              # Ric_ij = R^b_ibj
    riem = np.einsum("ab,bijk->aijk", m.g, R)
    b_up = np.einsum("ij,bijk->bk", m.g_inv, R)
    b_low = m.g @ b_up
    tr_b = float(np.trace(b_up))
    scal = float(np.einsum("ij,ij->", m.g_inv, ric))
    proj = riem - (
        np.einsum("ik,aj->aijk", ric, m.g) - np.einsum("ij,ak->aijk", ric, m.g)
    ) / (n - 1)
    return CurvatureBundle(
        R=DenseTensor(n, ("u", "l", "l", "l"), R),
        Riem=DenseTensor(n, ("l", "l", "l", "l"), riem),
        Ric=DenseTensor(n, ("l", "l"), ric),
        Scal=scal,
        B_up=DenseTensor(n, ("u", "l"), b_up),
        B=DenseTensor(n, ("l", "l"), b_low),
        trB=tr_b,
        Proj=DenseTensor(n, ("l", "l", "l", "l"), proj),
    )


def covariant_hessian(
    vjet: Jet3, c: ConnectionPointData, m: MetricPointData
) -> tuple[np.ndarray, float]:
    """Covariant Hessian and Laplacian of a scalar under the connection."""
    hess = vjet.hess - np.einsum("aij,a->ij", c.gamma, vjet.grad)
    lap = float(np.einsum("ij,ij->", m.g_inv, hess))
    return hess, lap


def laplacian_with_gradient(
    vjet: Jet3, c: ConnectionPointData, m: MetricPointData
) -> tuple[float, np.ndarray]:
    """Laplacian of a scalar and the coordinate gradient of that Laplacian."""
    hess = vjet.hess - np.einsum("aij,a->ij", c.gamma, vjet.grad)
    lap = float(np.einsum("ij,ij->", m.g_inv, hess))
    dhess = (
        vjet.third
        - np.einsum("laij,a->lij", c.dgamma, vjet.grad)
        - np.einsum("aij,la->lij", c.gamma, vjet.hess)
    )
    dlap = np.einsum("lij,ij->l", m.dg_inv, hess) + np.einsum(
        "ij,lij->l", m.g_inv, dhess
    )
    return lap, dlap


def covariant_d(field: PointField, c: ConnectionPointData) -> DenseTensor:
    """Covariant derivative of a rank <= 2 field; new lower slot comes first."""
    t = field.tensor
    if t.rank > 2:
        raise ValueError(f"covariant_d supports rank <= 2, got rank {t.rank}")
    if field.partials is None:
        raise ValueError("field carries no partials; covariant_d needs them")
    partials = np.asarray(field.partials, dtype=float)
    if partials.shape != (t.dim,) + t.components.shape:
        raise ValueError(
            f"partials shape {partials.shape} does not match field of rank {t.rank}"
        )
    out = partials.copy()
    for slot, flag in enumerate(t.variance):
        axis = slot + 1  # slot position inside `out`, after the derivative axis
        if flag == "l":
            corr = np.tensordot(c.gamma, t.components, axes=(0, slot))
            # corr[k, i_slot, rest...] with the contracted slot's place first
            corr = np.moveaxis(corr, 1, axis)
            out = out - corr
        else:
            corr = np.tensordot(c.gamma, t.components, axes=(2, slot))
            # gamma[i_new, k, a] x_..a.. -> corr[i_new, k, rest...]
            corr = np.moveaxis(corr, 0, axis)
            out = out + corr
    return DenseTensor(t.dim, ("l",) + t.variance, out)


def exterior_d(field: PointField) -> DenseTensor:
    """Exterior derivative of a one-form: ``(d w)_ij = d_i w_j - d_j w_i``."""
    t = field.tensor
    if t.rank != 1 or t.variance != ("l",):
        raise ValueError("exterior_d expects a one-form (rank 1, lower)")
    if field.partials is None:
        raise ValueError("one-form carries no partials; exterior_d needs them")
    p = np.asarray(field.partials, dtype=float)
    return DenseTensor(t.dim, ("l", "l"), p - p.T)
