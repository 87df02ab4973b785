"""Structure tensor extraction by pointwise linear solves.

The compatible-potential family of a system is declared as an explicit basis
of scalar expressions.  At a point, the Hessian-closure equation

    hess^g_ij V = P_ij^k d_k V + S_ij V [+ (1/n) lap(V) g_ij in the
    non-degenerate mode]

is solved for the primary tensor ``P`` and the secondary tensor ``S`` in the
least-squares sense over all basis elements, one small system per unordered
index pair.  Running the same solve over first-order jet entries (implicit
differentiation of the normal equations, pivoting on value parts) yields the
first partials of ``P`` and ``S`` needed by the curvature checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .expr import Expr, eval_jet, eval_value
from .jets import Jet3

__all__ = [
    "NONDEG",
    "SEMIDEG",
    "KillingDef",
    "SystemDef",
    "StructureSolution",
    "DegeneracyClass",
    "ClassificationError",
    "DegeneratePointError",
    "SamplingError",
    "classify_degeneracy",
    "solve_structure_point",
    "structure_jet",
    "build_connection",
    "connection_orientation",
    "sample_points",
    "SplitMix64",
]

NONDEG = "nondeg"
SEMIDEG = "semideg"

RANK_THRESHOLD = 1e-8       # sigma > threshold * sigma_max counts toward rank
VOTE_THRESHOLD = 0.75
MIN_CLASSIFY_POINTS = 8
SOLVE_COND_LIMIT = 1e12
EXCLUDED_EPS = 1e-3


class ClassificationError(RuntimeError):
    """Degeneracy classification was inconclusive."""


class DegeneratePointError(RuntimeError):
    """The pointwise solve is rank deficient; resample the point."""


class SamplingError(RuntimeError):
    """No acceptable sample points could be drawn from the domain."""


@dataclass(frozen=True)
class KillingDef:
    """A declared rank-2 Killing tensor candidate with expression entries."""

    kind: str                      # "proper" | "conformal"
    entries: tuple                 # n x n tuple-of-tuples of validated Expr


@dataclass(frozen=True)
class SystemDef:
    """A declared system: metric, potential basis, domain and extras."""

    name: str
    n: int
    coords: tuple[str, ...]
    metric_exprs: dict             # {(i, j) i <= j: validated Expr}
    basis: tuple[Expr, ...]
    domain: tuple[tuple[float, float], ...]
    excluded: tuple[Expr, ...] = ()
    killing: tuple[KillingDef, ...] = ()
    tolerances: dict = field(default_factory=dict)
    lc_ricci_factor: float | None = None

    def validate_shape(self) -> None:
        if self.n < 3:
            raise ValueError(
                f"system {self.name!r}: dimension must be at least 3, got {self.n}"
            )
        if len(self.coords) != self.n:
            raise ValueError(
                f"system {self.name!r}: {len(self.coords)} coordinates declared "
                f"for dimension {self.n}"
            )
        if self.basis and len(self.basis) < self.n + 1:
            raise ValueError(
                f"system {self.name!r}: potential basis needs at least "
                f"{self.n + 1} elements, got {len(self.basis)}"
            )
        if len(self.domain) != self.n:
            raise ValueError(
                f"system {self.name!r}: domain must give one interval per coordinate"
            )
        for name, (lo, hi) in zip(self.coords, self.domain):
            if not lo < hi:
                raise ValueError(
                    f"system {self.name!r}: empty domain interval for {name}: "
                    f"[{lo}, {hi}]"
                )


@dataclass(frozen=True)
class StructureSolution:
    """Primary/secondary structure tensors at a point, with diagnostics.

    ``primary[i, j, k]`` has a symmetric lower pair ``(i, j)`` and an upper
    slot ``k``; ``secondary[i, j]`` is symmetric.  In semi-degenerate mode
    ``s`` and ``alpha`` hold the Laplacian relation data.  The optional
    ``dprimary``/``dsecondary`` carry first coordinate partials.
    """

    mode: str
    primary: np.ndarray
    secondary: np.ndarray
    residual: float
    condition: float
    s: np.ndarray | None = None
    alpha: float | None = None
    fit_residual: float | None = None
    dprimary: np.ndarray | None = None
    dsecondary: np.ndarray | None = None


@dataclass(frozen=True)
class DegeneracyClass:
    """Outcome of the rank-based degeneracy vote over sample points."""

    kind: str                       # "NonDegenerate" | "SemiDegenerate" | "HigherDegeneracy"
    rank: int
    per_point_ranks: tuple[int, ...]
    s: np.ndarray | None = None     # representative fit at the first point
    alpha: float | None = None

    @property
    def votes(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for r in self.per_point_ranks:
            out[r] = out.get(r, 0) + 1
        return dict(sorted(out.items()))

    @property
    def mode(self) -> str:
        if self.kind == "NonDegenerate":
            return NONDEG
        if self.kind == "SemiDegenerate":
            return SEMIDEG
        raise ClassificationError(
            f"no solve mode for classification {self.kind} (rank {self.rank})"
        )


class SplitMix64:
    """Tiny deterministic 64-bit PRNG; stable across platforms and versions."""

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self._MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & self._MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53


def sample_points(system: SystemDef, npoints: int, seed: int) -> np.ndarray:
    """Draw accepted sample points uniformly from the domain box.

    Points where any excluded expression has magnitude below 1e-3 (or fails
    to evaluate) are rejected.
    """
    rng = SplitMix64(seed)
    out = []
    attempts = 0
    max_attempts = 1000 * max(npoints, 1) + 1000
    while len(out) < npoints:
        attempts += 1
        if attempts > max_attempts:
            raise SamplingError(
                f"system {system.name!r}: could not draw {npoints} accepted "
                f"points after {max_attempts} attempts; domain too small or "
                "excluded expressions reject everything"
            )
        x = np.array([lo + rng.uniform() * (hi - lo) for lo, hi in system.domain])
        if _rejected(system, x):
            continue
        out.append(x)
    return np.array(out)


def _rejected(system: SystemDef, point: np.ndarray) -> bool:
    for e in system.excluded:
        try:
            if abs(eval_value(e, point)) < EXCLUDED_EPS:
                return True
        except ValueError:
            return True
    return False


def _basis_jets(system: SystemDef, point: np.ndarray) -> list[Jet3]:
    return [eval_jet(e, point) for e in system.basis]


def classify_degeneracy(
    system: SystemDef,
    points,
    rank_threshold: float = RANK_THRESHOLD,
    vote_threshold: float = VOTE_THRESHOLD,
) -> DegeneracyClass:
    """Numerical-rank vote on the compatibility matrix of the basis.

    At each point the rows are ``(V_a, dV_a, lap V_a)`` for the basis
    elements; the rank decides between the n+2-dimensional, n+1-dimensional
    and degenerate cases.  The final class is a majority vote; the singular
    value cutoff and the vote threshold default to 1e-8 * sigma_max and 75%.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) < MIN_CLASSIFY_POINTS:
        raise ClassificationError(
            f"classification needs at least {MIN_CLASSIFY_POINTS} points, "
            f"got {len(points)}"
        )
    if not system.basis:
        raise ClassificationError(
            f"system {system.name!r} declares no potential basis"
        )
    n = system.n
    ranks = []
    fits: list[tuple[np.ndarray, float]] = []
    for x in points:
        rows, m = _classification_rows(system, x)
        sigma = np.linalg.svd(rows, compute_uv=False)
        rank = int(np.sum(sigma > rank_threshold * sigma[0]))
        ranks.append(rank)
        if rank == n + 1:
            fits.append(_semideg_fit(rows, m))
    votes: dict[int, int] = {}
    for r in ranks:
        votes[r] = votes.get(r, 0) + 1
    top_rank, top_count = max(votes.items(), key=lambda kv: (kv[1], -kv[0]))
    if top_count < vote_threshold * len(ranks):
        table = ", ".join(f"rank {r}: {c}" for r, c in sorted(votes.items()))
        raise ClassificationError(
            f"inconclusive classification for {system.name!r}: no rank reaches "
            f"{vote_threshold:.0%} of {len(ranks)} points ({table})"
        )
    per_point = tuple(ranks)
    if top_rank == n + 2:
        return DegeneracyClass("NonDegenerate", top_rank, per_point)
    if top_rank == n + 1:
        s, alpha = fits[0]
        return DegeneracyClass("SemiDegenerate", top_rank, per_point, s, alpha)
    return DegeneracyClass("HigherDegeneracy", top_rank, per_point)


def _classification_rows(system: SystemDef, point: np.ndarray):
    m = geometry.metric_at(system, point)
    lc = geometry.christoffel(m)
    jets = _basis_jets(system, point)
    rows = np.zeros((len(jets), system.n + 2))
    for a, jet in enumerate(jets):
        _, lap = geometry.covariant_hessian(jet, lc, m)
        rows[a, 0] = jet.value
        rows[a, 1 : system.n + 1] = jet.grad
        rows[a, system.n + 1] = lap
    return rows, m


def _semideg_fit(rows: np.ndarray, m: geometry.MetricPointData):
    """Fit lap V = c^k d_k V + alpha V over the basis; returns (s, alpha)."""
    design = np.column_stack([rows[:, 1:-1], rows[:, 0]])
    target = rows[:, -1]
    coeff, *_ = np.linalg.lstsq(design, target, rcond=None)
    s = m.g @ coeff[:-1]
    return s, float(coeff[-1])


def _scaled_residual(A: np.ndarray, x: np.ndarray, b: np.ndarray) -> float:
    num = float(np.linalg.norm(A @ x - b))
    den = 1.0 + float(np.linalg.norm(A)) * float(np.linalg.norm(x)) + float(
        np.linalg.norm(b)
    )
    return num / den


def _pairs(n: int):
    return [(i, j) for i in range(n) for j in range(i, n)]


def solve_structure_point(
    system: SystemDef, point, mode: str
) -> StructureSolution:
    """Least-squares extraction of the structure tensors at one point."""
    return _solve(system, np.asarray(point, dtype=float), mode, with_partials=False)


def structure_jet(system: SystemDef, point, mode: str) -> StructureSolution:
    """Structure tensors together with their first coordinate partials.

    The solve is differentiated exactly: the normal equations are solved with
    pivoting on the value parts and the jet (gradient) parts are propagated
    through, so the partials are exact to jet order rather than finite
    differences.
    """
    return _solve(system, np.asarray(point, dtype=float), mode, with_partials=True)


def _solve(
    system: SystemDef, point: np.ndarray, mode: str, with_partials: bool
) -> StructureSolution:
    if mode not in (NONDEG, SEMIDEG):
        raise ValueError(f"unknown mode {mode!r}")
    n = system.n
    m = geometry.metric_at(system, point)
    lc = geometry.christoffel(m)
    jets = _basis_jets(system, point)
    nb = len(jets)
    if nb < n + 1:
        raise ValueError(
            f"system {system.name!r}: {nb} basis elements cannot determine "
            f"{n + 1} unknowns per pair"
        )

    # shared coefficient matrix: rows (d_1 V, ..., d_n V, V)
    A = np.zeros((nb, n + 1))
    hessians = np.zeros((nb, n, n))
    laps = np.zeros(nb)
    dlaps = np.zeros((nb, n))
    for a, jet in enumerate(jets):
        A[a, :n] = jet.grad
        A[a, n] = jet.value
        hessians[a] = jet.hess - np.einsum("kij,k->ij", lc.gamma, jet.grad)
        laps[a], dlaps[a] = geometry.laplacian_with_gradient(jet, lc, m)

    pairs = _pairs(n)
    B = np.zeros((nb, len(pairs)))
    for col, (i, j) in enumerate(pairs):
        B[:, col] = hessians[:, i, j]
        if mode == NONDEG:
            B[:, col] -= laps * m.g[i, j] / n

    X, _, rank, sigma = np.linalg.lstsq(A, B, rcond=None)
    condition = float(sigma[0] / sigma[-1]) if sigma[-1] > 0 else np.inf
    if rank < n + 1 or condition > SOLVE_COND_LIMIT:
        raise DegeneratePointError(
            f"system {system.name!r}: pair system rank {rank}/{n + 1} with "
            f"condition {condition:.3e} at {tuple(point)}; resample the point"
        )
    residual = max(
        _scaled_residual(A, X[:, col], B[:, col]) for col in range(len(pairs))
    )

    primary = np.zeros((n, n, n))
    secondary = np.zeros((n, n))
    for col, (i, j) in enumerate(pairs):
        primary[i, j, :] = X[:n, col]
        primary[j, i, :] = X[:n, col]
        secondary[i, j] = X[n, col]
        secondary[j, i] = X[n, col]

    s_form = alpha = fit_res = None
    if mode == SEMIDEG:
        rows = np.column_stack([A[:, n], A[:, :n], laps])
        s_form, alpha = _semideg_fit(rows, m)
        design = np.column_stack([A[:, :n], A[:, n]])
        coeff = np.concatenate([m.g_inv @ s_form, [alpha]])
        fit_res = _scaled_residual(design, coeff, laps)

    dprimary = dsecondary = None
    if with_partials:
        dX = _solve_partials(system, mode, m, lc, jets, A, B, X, laps, dlaps, pairs)
        dprimary = np.zeros((n, n, n, n))
        dsecondary = np.zeros((n, n, n))
        for l in range(n):
            for col, (i, j) in enumerate(pairs):
                dprimary[l, i, j, :] = dX[l][:n, col]
                dprimary[l, j, i, :] = dX[l][:n, col]
                dsecondary[l, i, j] = dX[l][n, col]
                dsecondary[l, j, i] = dX[l][n, col]

    return StructureSolution(
        mode=mode,
        primary=primary,
        secondary=secondary,
        residual=residual,
        condition=condition,
        s=s_form,
        alpha=alpha,
        fit_residual=fit_res,
        dprimary=dprimary,
        dsecondary=dsecondary,
    )


def _solve_partials(system, mode, m, lc, jets, A, B, X, laps, dlaps, pairs):
    """Exact first partials of the pairwise least-squares solution.

    The minimizer satisfies the normal equations (A^T A) x = A^T b, so the
    gradient entries of A and b propagate through one linear solve per
    coordinate direction, pivoted on the value parts.
    """
    n = system.n
    N = A.T @ A
    R = B - A @ X
    dX = []
    for l in range(n):
        dA = np.zeros_like(A)
        for a, jet in enumerate(jets):
            dA[a, :n] = jet.hess[l]
            dA[a, n] = jet.grad[l]
        dB = _rhs_partial(system, mode, m, lc, jets, laps, dlaps, pairs, l)
        rhs = dA.T @ R + A.T @ (dB - dA @ X)
        try:
            dx = np.linalg.solve(N, rhs)
        except np.linalg.LinAlgError:
            dx, _, rank, _ = np.linalg.lstsq(N, rhs, rcond=None)
            if rank < N.shape[0]:
                raise DegeneratePointError(
                    f"system {system.name!r}: singular normal equations while "
                    f"differentiating the solve at {tuple(m.point)}"
                )
        dX.append(dx)
    return dX


def _rhs_partial(system, mode, m, lc, jets, laps, dlaps, pairs, l):
    """d_l of the right-hand side column for every pair."""
    n = system.n
    dB = np.zeros((len(jets), len(pairs)))
    for a, jet in enumerate(jets):
        dhess_l = (
            jet.third[l]
            - np.einsum("kij,k->ij", lc.dgamma[l], jet.grad)
            - np.einsum("kij,k->ij", lc.gamma, jet.hess[l])
        )
        for col, (i, j) in enumerate(pairs):
            val = dhess_l[i, j]
            if mode == NONDEG:
                val -= (dlaps[a, l] * m.g[i, j] + laps[a] * m.dg[l, i, j]) / n
            dB[a, col] = val
    return dB


def connection_orientation(mode: str) -> float:
    """Sense of the induced-connection difference tensor for each mode.

    Calibrated against the worked examples: the non-degenerate orientation
    (gamma - P) reproduces the published B matrix of the sw family, the
    semi-degenerate orientation (gamma + P) reproduces the published Ricci
    curvature, eta = -Ric/(n-1) and projective flatness of the builtin
    conformal example.
    """
    if mode == NONDEG:
        return -1.0
    if mode == SEMIDEG:
        return 1.0
    raise ValueError(f"unknown mode {mode!r}")


def build_connection(
    system: SystemDef, point, mode: str
) -> geometry.ConnectionPointData:
    """Compose the Levi-Civita connection with the structure-tensor solve."""
    point = np.asarray(point, dtype=float)
    m = geometry.metric_at(system, point)
    lc = geometry.christoffel(m)
    sol = structure_jet(system, point, mode)
    return geometry.induced_connection(
        lc, sol.primary, sol.dprimary, connection_orientation(mode)
    )
