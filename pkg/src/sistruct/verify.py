"""Identity checks for the induced connection of a declared system.

Every check evaluates one tensor identity at sampled points and reports the
worst absolute residual together with the magnitude of the largest term
entering the identity, so that a relative residual ``max_abs / (1 + scale)``
can be compared against a tolerance.  The suite aggregates per-point results
into one :class:`CheckResult` per named identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry, structure
from .expr import eval_jet
from .geometry import CURVATURE_SIGN_LABEL, ConnectionPointData
from .structure import (
    NONDEG,
    SEMIDEG,
    DegeneracyClass,
    KillingDef,
    StructureSolution,
    SystemDef,
    classify_degeneracy,
    connection_orientation,
    sample_points,
    structure_jet,
)

__all__ = [
    "CheckResult",
    "PropernessInfo",
    "SuiteReport",
    "check_nondeg",
    "check_semideg",
    "check_properness",
    "check_killing",
    "check_bertrand_darboux",
    "run_suite",
    "DEFAULT_TOLERANCES",
    "SIGN_CONVENTION",
]

SIGN_CONVENTION = (
    f"curvature sign {CURVATURE_SIGN_LABEL}; connection orientation: "
    "nondeg gamma - P, semideg gamma + P"
)

DEFAULT_TOLERANCES = {
    "wilczynski-residual": 1e-8,
    "tau-from-curvature": 1e-8,
    "tau-form-agreement": 1e-10,
    "riem-identity": 1e-8,
    "cotton-identity": 1e-6,
    "metric-derivative-identity": 1e-8,
    "trace-closed": 1e-8,
    "ricci-symmetric": 1e-9,
    "scal-trB": 1e-10,
    "prolongation": 1e-6,
    "proper-projective": 1e-8,
    "eta-from-ricci": 1e-8,
    "projective-weyl-zero": 1e-8,
    "laplace-eigen": 1e-8,
    "proper-flat": 1e-10,
    "properness": 1e-9,
    "killing": 1e-10,
    "bertrand-darboux": 1e-10,
    "lc-bianchi": 1e-9,
    "lc-metricity": 1e-10,
    "lc-ricci-constant": 1e-8,
}

_PROVENANCE = {
    "wilczynski-residual": "pointwise Hessian-closure equation for every basis element",
    "tau-from-curvature": "S = (B - g tr(B) - (n-1) Ric) / (n (n-2)) for the induced connection",
    "tau-form-agreement": "index-contraction form and B-form of the secondary-tensor formula agree",
    "riem-identity": "Riem expressed through Scal, B and Ric (Weyl-like decomposition)",
    "cotton-identity": "antisymmetrized covariant derivative of S with trace correction (Cotton-like)",
    "metric-derivative-identity": "nabla_k g_ij - nabla_j g_ik = (t_k g_ij - t_j g_ik)/(n-1), "
                                  "t = trace of P; orientation fixed empirically",
    "trace-closed": "the trace one-form of P is closed",
    "ricci-symmetric": "Ricci tensor of the induced connection is symmetric "
                       "(semi-degenerate mode folds in closedness of the trace "
                       "one-form of P)",
    "scal-trB": "Scal = -tr(B)",
    "prolongation": "derived first-order closure for nabla lap V; includes the (1/n) t lap V "
                    "trace term, divergence taken over a symmetric slot",
    "proper-projective": "Riem_aijk = (g_ij B_ak - g_ik B_aj)/(n-1) with B = (n-1) Ric + g tr(B)",
    "eta-from-ricci": "S = -Ric/(n-1) for the induced connection",
    "eta-from-ricci-paper-variant": "sign variant S = +Ric/(n-1); expected to fail, documents "
                                    "the sign resolution",
    "projective-weyl-zero": "projective Weyl tensor of the induced connection vanishes",
    "laplace-eigen": "lap V + Scal/(n-1) V = 0 under the induced connection, per basis element",
    "proper-flat": "curvature of the induced connection vanishes and potentials are harmonic",
    "properness": "max scaled magnitude of the secondary structure tensor",
    "killing": "symmetrized Levi-Civita derivative of K (tracefree part for the conformal kind)",
    "bertrand-darboux": "integrability two-form d(K dV) (conformal kind: - V d rho - dV wedge rho)",
    "lc-bianchi": "first Bianchi identity of the Levi-Civita curvature",
    "lc-metricity": "Levi-Civita derivative of the metric vanishes",
    "lc-ricci-constant": "Levi-Civita Ricci equals the declared constant multiple of g",
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    provenance: str
    max_abs_residual: float
    scale: float
    rel_residual: float
    tolerance: float
    passed: bool
    points_evaluated: int


@dataclass(frozen=True)
class PropernessInfo:
    verdict: str            # "proper" | "conformal"
    max_abs_residual: float
    scale: float
    rel_residual: float
    tolerance: float


@dataclass(frozen=True)
class SuiteReport:
    system: str
    mode: str               # "nondeg" | "semideg" | "smoke"
    seed: int
    npoints: int
    sign_convention: str
    classification: DegeneracyClass | None
    properness: PropernessInfo | None
    checks: list[CheckResult]
    variants: list[CheckResult] = field(default_factory=list)
    condition_stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> int:
        return sum(1 for c in self.checks if c.passed)

    @property
    def failed(self) -> int:
        return sum(1 for c in self.checks if not c.passed)

    @property
    def all_passed(self) -> bool:
        return self.failed == 0


@dataclass(frozen=True)
class _Raw:
    """Point-level residual before aggregation."""

    name: str
    abs_residual: float
    scale: float


def _tolerance_for(name: str, overrides: dict) -> float:
    for table in (overrides, DEFAULT_TOLERANCES):
        if name in table:
            return float(table[name])
    family = name.rsplit("-", 1)[0]
    for table in (overrides, DEFAULT_TOLERANCES):
        if family in table:
            return float(table[family])
    return 1e-8


def _provenance_for(name: str) -> str:
    if name in _PROVENANCE:
        return _PROVENANCE[name]
    family = name.rsplit("-", 1)[0]
    return _PROVENANCE.get(family, "")


def _result(raw: _Raw, overrides: dict, points: int = 1) -> CheckResult:
    tol = _tolerance_for(raw.name, overrides)
    rel = raw.abs_residual / (1.0 + raw.scale)
    return CheckResult(
        name=raw.name,
        provenance=_provenance_for(raw.name),
        max_abs_residual=raw.abs_residual,
        scale=raw.scale,
        rel_residual=rel,
        tolerance=tol,
        passed=rel <= tol,
        points_evaluated=points,
    )


def _amax(arr) -> float:
    arr = np.asarray(arr)
    return float(np.abs(arr).max()) if arr.size else 0.0


# --- per-point context -------------------------------------------------------


@dataclass(frozen=True)
class PointContext:
    point: np.ndarray
    m: geometry.MetricPointData
    lc: ConnectionPointData
    sol: StructureSolution
    conn: ConnectionPointData
    bundle: geometry.CurvatureBundle
    jets: tuple
    laps_g: np.ndarray        # Levi-Civita Laplacian per basis element
    dlaps_g: np.ndarray       # and its coordinate gradient


def _context(system: SystemDef, point, mode: str) -> PointContext:
    point = np.asarray(point, dtype=float)
    m = geometry.metric_at(system, point)
    lc = geometry.christoffel(m)
    sol = structure_jet(system, point, mode)
    conn = geometry.induced_connection(
        lc, sol.primary, sol.dprimary, connection_orientation(mode)
    )
    bundle = geometry.contractions(geometry.curvature(conn), m)
    jets = tuple(eval_jet(e, point) for e in system.basis)
    laps = np.zeros(len(jets))
    dlaps = np.zeros((len(jets), system.n))
    for a, jet in enumerate(jets):
        laps[a], dlaps[a] = geometry.laplacian_with_gradient(jet, lc, m)
    return PointContext(point, m, lc, sol, conn, bundle, jets, laps, dlaps)


def _secondary_rel(ctx: PointContext) -> float:
    return _amax(ctx.sol.secondary) / (1.0 + _amax(ctx.sol.primary))


# --- non-degenerate checks ---------------------------------------------------


def _nabla_secondary(ctx: PointContext) -> np.ndarray:
    """Covariant derivative of S under the induced connection: [k, i, j]."""
    tau, dtau = ctx.sol.secondary, ctx.sol.dsecondary
    return (
        dtau
        - np.einsum("aki,aj->kij", ctx.conn.gamma, tau)
        - np.einsum("akj,ia->kij", ctx.conn.gamma, tau)
    )


def _raw_checks_nondeg(ctx: PointContext, emit_proper: bool) -> list[_Raw]:
    n = ctx.m.dim
    g, g_inv = ctx.m.g, ctx.m.g_inv
    T, tau = ctx.sol.primary, ctx.sol.secondary
    bundle = ctx.bundle
    B, Ric, Riem = bundle.B.components, bundle.Ric.components, bundle.Riem.components
    trB, scal = bundle.trB, bundle.Scal
    out = []

    # hess^g V = P dV + S V + (1/n) lap V g, per basis element
    res = scale = 0.0
    for a, jet in enumerate(ctx.jets):
        hess_g = jet.hess - np.einsum("kij,k->ij", ctx.lc.gamma, jet.grad)
        closure = (
            np.einsum("ijk,k->ij", T, jet.grad)
            + tau * jet.value
            + ctx.laps_g[a] * g / n
        )
        res = max(res, _amax(hess_g - closure))
        scale = max(scale, _amax(hess_g), _amax(closure))
    out.append(_Raw("wilczynski-residual", res, scale))

    # S from the curvature of the induced connection
    tau_curv = (B - g * trB - (n - 1) * Ric) / (n * (n - 2))
    out.append(
        _Raw(
            "tau-from-curvature",
            _amax(tau - tau_curv),
            max(_amax(tau), _amax(B) / (n * (n - 2)),
                abs(trB) * _amax(g) / (n * (n - 2)),
                _amax(Ric) * (n - 1) / (n * (n - 2))),
        )
    )

    # explicit index-contraction form vs the B-form
    R = bundle.R.components
    tau_idx = (
        np.einsum("ib,ac,bcaj->ij", g, g_inv, R)
        - g * np.einsum("ac,bcab->", g_inv, R)
        - (n - 1) * np.trace(R, axis1=0, axis2=2)
    ) / (n * (n - 2))
    out.append(
        _Raw("tau-form-agreement", _amax(tau_idx - tau_curv),
             max(_amax(tau_idx), _amax(tau_curv)))
    )

    # Weyl-like decomposition of Riem
    rhs = scal / ((n - 1) * (n - 2)) * (
        np.einsum("ij,ka->aijk", g, g) - np.einsum("ik,ja->aijk", g, g)
    )
    rhs += (
        np.einsum("ij,ak->aijk", g, (n - 1) * B - Ric)
        - np.einsum("ik,aj->aijk", g, (n - 1) * B - Ric)
        + np.einsum("ij,ak->aijk", B - (n - 1) * Ric, g)
        - np.einsum("ik,aj->aijk", B - (n - 1) * Ric, g)
    ) / (n * (n - 2))
    out.append(
        _Raw("riem-identity", _amax(Riem - rhs), max(_amax(Riem), _amax(rhs)))
    )

    # Cotton-like identity for S under the induced connection
    nab = _nabla_secondary(ctx)
    anti = nab - np.transpose(nab, (2, 1, 0))        # nabla_k S_ij - nabla_j S_ik
    tt = np.einsum("ij,kij->k", g_inv, anti)
    cot = anti + (
        np.einsum("ij,k->kij", g, tt) - np.einsum("ik,j->kij", g, tt)
    ) / (n - 1)
    out.append(
        _Raw("cotton-identity", _amax(cot),
             max(_amax(anti), _amax(tt) / (n - 1)))
    )

    # metric compatibility defect of the induced connection vs trace of P
    t_tr = np.einsum("kaa->k", T)
    nabg = (
        ctx.m.dg
        - np.einsum("aki,aj->kij", ctx.conn.gamma, g)
        - np.einsum("akj,ia->kij", ctx.conn.gamma, g)
    )
    lhs = nabg - np.transpose(nabg, (2, 1, 0))
    rhs_md = (
        np.einsum("k,ij->kij", t_tr, g) - np.einsum("j,ik->kij", t_tr, g)
    ) / (n - 1)
    out.append(
        _Raw("metric-derivative-identity", _amax(lhs - rhs_md),
             max(_amax(lhs), _amax(rhs_md)))
    )

    # closedness of the trace one-form of P
    dt = np.einsum("lkaa->lk", ctx.sol.dprimary)
    out.append(_Raw("trace-closed", _amax(dt - dt.T), _amax(dt)))

    out.append(_Raw("ricci-symmetric", _amax(Ric - Ric.T), _amax(Ric)))
    out.append(_Raw("scal-trB", abs(scal + trB), max(abs(scal), abs(trB))))

    out.append(_prolongation_raw(ctx))

    if emit_proper:
        rhs_pp = (
            np.einsum("ij,ak->aijk", g, B) - np.einsum("ik,aj->aijk", g, B)
        ) / (n - 1)
        res_pp = _amax(Riem - rhs_pp)
        res_b = _amax(B - (n - 1) * Ric - g * trB)
        out.append(
            _Raw("proper-projective", max(res_pp, res_b),
                 max(_amax(Riem), _amax(rhs_pp), _amax(B)))
        )
    return out


def _prolongation_raw(ctx: PointContext) -> _Raw:
    """Closure of the derived system for nabla lap V.

    All derivatives are Levi-Civita.  The identity carries the trace term
    (1/n) t_k lap V and the divergence of P over a symmetric slot; both
    details were calibrated on the builtin systems (residuals ~1e-13).
    """
    n = ctx.m.dim
    g_inv = ctx.m.g_inv
    lc = ctx.lc
    T, dT = ctx.sol.primary, ctx.sol.dprimary
    tau, dtau = ctx.sol.secondary, ctx.sol.dsecondary

    nabT = (
        dT
        + np.einsum("bla,ika->likb", lc.gamma, T)
        - np.einsum("ali,akb->likb", lc.gamma, T)
        - np.einsum("alk,iab->likb", lc.gamma, T)
    )
    divT = np.einsum("il,likb->kb", g_inv, nabT)
    TT = np.einsum("il,ika,lab->kb", g_inv, T, T)
    tau_up = tau @ g_inv
    ric_g = np.trace(geometry.curvature(lc), axis1=0, axis2=2)
    q = divT + TT + tau_up - ric_g @ g_inv

    nabtau = (
        dtau
        - np.einsum("ali,ak->lik", lc.gamma, tau)
        - np.einsum("alk,ia->lik", lc.gamma, tau)
    )
    divtau = np.einsum("il,lik->k", g_inv, nabtau)
    Ttau = np.einsum("il,ika,la->k", g_inv, T, tau)
    t_tr = np.einsum("kaa->k", T)

    res = scale = 0.0
    for a, jet in enumerate(ctx.jets):
        lhs = (n - 1) / n * ctx.dlaps_g[a]
        grad_term = q @ jet.grad
        value_term = (divtau + Ttau) * jet.value
        trace_term = t_tr * ctx.laps_g[a] / n
        res = max(res, _amax(lhs - grad_term - value_term - trace_term))
        scale = max(scale, _amax(lhs), _amax(grad_term), _amax(value_term),
                    _amax(trace_term))
    return _Raw("prolongation", res, scale)


# --- semi-degenerate checks --------------------------------------------------


def _raw_checks_semideg(ctx: PointContext, emit_proper: bool) -> list[_Raw]:
    n = ctx.m.dim
    g_inv = ctx.m.g_inv
    eta = ctx.sol.secondary
    bundle = ctx.bundle
    Ric, Riem = bundle.Ric.components, bundle.Riem.components
    scal = bundle.Scal
    out = []

    # hess V = S V under the induced connection, per basis element
    res = scale = 0.0
    for jet in ctx.jets:
        hess_conn = jet.hess - np.einsum("kij,k->ij", ctx.conn.gamma, jet.grad)
        res = max(res, _amax(hess_conn - eta * jet.value))
        scale = max(scale, _amax(hess_conn), _amax(eta * jet.value))
    out.append(_Raw("wilczynski-residual", res, scale))

    out.append(
        _Raw("eta-from-ricci", _amax(eta + Ric / (n - 1)),
             max(_amax(eta), _amax(Ric) / (n - 1)))
    )

    out.append(
        _Raw("projective-weyl-zero", _amax(bundle.Proj.components), _amax(Riem))
    )

    res = scale = 0.0
    for jet in ctx.jets:
        hess_conn = jet.hess - np.einsum("kij,k->ij", ctx.conn.gamma, jet.grad)
        lap_conn = float(np.einsum("ij,ij->", g_inv, hess_conn))
        res = max(res, abs(lap_conn + scal / (n - 1) * jet.value))
        scale = max(scale, abs(lap_conn), abs(scal / (n - 1) * jet.value))
    out.append(_Raw("laplace-eigen", res, scale))

    dt = np.einsum("lkaa->lk", ctx.sol.dprimary)
    out.append(
        _Raw("ricci-symmetric",
             max(_amax(Ric - Ric.T), _amax(dt - dt.T)),
             max(_amax(Ric), _amax(dt)))
    )

    if emit_proper:
        R = bundle.R.components
        res = _amax(R)
        scale = max(
            _amax(np.einsum("bja,aki->bijk", ctx.conn.gamma, ctx.conn.gamma)),
            _amax(ctx.conn.dgamma),
        )
        for a, jet in enumerate(ctx.jets):
            hess_conn = jet.hess - np.einsum("kij,k->ij", ctx.conn.gamma, jet.grad)
            lap_conn = float(np.einsum("ij,ij->", g_inv, hess_conn))
            res = max(res, abs(lap_conn))
            scale = max(scale, abs(ctx.laps_g[a]))
        out.append(_Raw("proper-flat", res, scale))
    return out


def _raw_variant_semideg(ctx: PointContext) -> _Raw:
    n = ctx.m.dim
    eta = ctx.sol.secondary
    Ric = ctx.bundle.Ric.components
    return _Raw(
        "eta-from-ricci-paper-variant",
        _amax(eta - Ric / (n - 1)),
        max(_amax(eta), _amax(Ric) / (n - 1)),
    )


# --- Killing tensor checks ---------------------------------------------------


def _killing_jets(killing: KillingDef, point: np.ndarray):
    n = len(killing.entries)
    K = np.zeros((n, n))
    dK = np.zeros((n, n, n))
    d2K = np.zeros((n, n, n, n))
    for i in range(n):
        for j in range(n):
            jet = eval_jet(killing.entries[i][j], point)
            K[i, j] = jet.value
            dK[:, i, j] = jet.grad
            d2K[:, :, i, j] = jet.hess
    if not np.allclose(K, K.T, rtol=1e-12, atol=1e-300):
        raise ValueError("Killing tensor candidate must be symmetric")
    return K, dK, d2K


def _raw_killing(
    system: SystemDef, killing: KillingDef, point: np.ndarray, name: str,
    m=None, lc=None,
) -> _Raw:
    if m is None:
        m = geometry.metric_at(system, point)
        lc = geometry.christoffel(m)
    n = system.n
    K, dK, _ = _killing_jets(killing, point)
    nabK = (
        dK
        - np.einsum("aki,aj->kij", lc.gamma, K)
        - np.einsum("akj,ia->kij", lc.gamma, K)
    )
    sym = (
        nabK
        + np.transpose(nabK, (1, 2, 0))
        + np.transpose(nabK, (2, 0, 1))
        + np.transpose(nabK, (0, 2, 1))
        + np.transpose(nabK, (1, 0, 2))
        + np.transpose(nabK, (2, 1, 0))
    ) / 6.0
    if killing.kind == "conformal":
        trace = np.einsum("ab,abk->k", m.g_inv, sym)
        sym = sym - (
            np.einsum("ij,k->ijk", m.g, trace)
            + np.einsum("ik,j->ijk", m.g, trace)
            + np.einsum("jk,i->ijk", m.g, trace)
        ) / (n + 2)
    return _Raw(name, _amax(sym), _amax(nabK))


def _rho_with_gradient(system, killing, point, m, lc):
    """Trace correction one-form rho = 2/(n+2) div(K) and its gradient."""
    n = system.n
    K, dK, d2K = _killing_jets(killing, point)
    nabK = (
        dK
        - np.einsum("aki,aj->kij", lc.gamma, K)
        - np.einsum("akj,ia->kij", lc.gamma, K)
    )
    rho = 2.0 / (n + 2) * np.einsum("ab,abk->k", m.g_inv, nabK)
    dnabK = (
        np.einsum("jaik->jaik", d2K)
        - np.einsum("jcab,ck->jabk", lc.dgamma, K)
        - np.einsum("cab,jck->jabk", lc.gamma, dK)
        - np.einsum("jcak,bc->jabk", lc.dgamma, K)
        - np.einsum("cak,jbc->jabk", lc.gamma, dK)
    )
    drho = 2.0 / (n + 2) * (
        np.einsum("jab,abk->jk", m.dg_inv, nabK)
        + np.einsum("ab,jabk->jk", m.g_inv, dnabK)
    )
    return K, dK, rho, drho


def _raw_bd(
    system: SystemDef, killing: KillingDef, point: np.ndarray, name: str,
    m=None, lc=None, jets=None, basis_index=None,
) -> _Raw:
    if m is None:
        m = geometry.metric_at(system, point)
        lc = geometry.christoffel(m)
    if jets is None:
        jets = tuple(eval_jet(e, point) for e in system.basis)
    if basis_index is not None:
        jets = (jets[basis_index],)
    if killing.kind == "conformal":
        K, dK, rho, drho = _rho_with_gradient(system, killing, point, m, lc)
    else:
        K, dK, _ = _killing_jets(killing, point)
        rho = drho = None
    Kmix = K @ m.g_inv                       # K_k^a
    dKmix = np.einsum("jkb,ba->jka", dK, m.g_inv) + np.einsum(
        "kb,jba->jka", K, m.dg_inv
    )
    res = scale = 0.0
    for jet in jets:
        omega = Kmix @ jet.grad
        domega = np.einsum("jka,a->jk", dKmix, jet.grad) + np.einsum(
            "ka,ja->jk", Kmix, jet.hess
        )
        two_form = domega - domega.T
        if killing.kind == "conformal":
            wedge = np.outer(jet.grad, rho) - np.outer(rho, jet.grad)
            dr = drho - drho.T
            two_form = two_form - jet.value * dr - wedge
            scale = max(scale, _amax(jet.value * dr), _amax(wedge))
        res = max(res, _amax(two_form))
        scale = max(scale, _amax(domega), _amax(omega))
    return _Raw(name, res, scale)


# --- smoke checks (systems without potentials) -------------------------------


def _raw_checks_smoke(system: SystemDef, point: np.ndarray) -> tuple[list[_Raw], float]:
    m = geometry.metric_at(system, point)
    lc = geometry.christoffel(m)
    R = geometry.curvature(lc)
    bundle = geometry.contractions(R, m)
    out = []
    bianchi = R + np.transpose(R, (0, 2, 3, 1)) + np.transpose(R, (0, 3, 1, 2))
    out.append(_Raw("lc-bianchi", _amax(bianchi), _amax(R)))
    nabg = (
        m.dg
        - np.einsum("aki,aj->kij", lc.gamma, m.g)
        - np.einsum("akj,ia->kij", lc.gamma, m.g)
    )
    out.append(
        _Raw("lc-metricity", _amax(nabg),
             max(_amax(m.dg), _amax(lc.gamma) * _amax(m.g)))
    )
    if system.lc_ricci_factor is not None:
        expected = system.lc_ricci_factor * m.g
        out.append(
            _Raw("lc-ricci-constant", _amax(bundle.Ric.components - expected),
                 max(_amax(bundle.Ric.components), _amax(expected)))
        )
    return out, m.condition


# --- public single-point entry points ---------------------------------------


def check_nondeg(system: SystemDef, point, tol_overrides=None) -> list[CheckResult]:
    """All non-degenerate identity checks at one point."""
    overrides = _merged_overrides(system, tol_overrides)
    ctx = _context(system, point, NONDEG)
    emit = _secondary_rel(ctx) <= _tolerance_for("properness", overrides)
    return [_result(r, overrides) for r in _raw_checks_nondeg(ctx, emit)]


def check_semideg(system: SystemDef, point, tol_overrides=None) -> list[CheckResult]:
    """All semi-degenerate identity checks at one point."""
    overrides = _merged_overrides(system, tol_overrides)
    ctx = _context(system, point, SEMIDEG)
    emit = _secondary_rel(ctx) <= _tolerance_for("properness", overrides)
    return [_result(r, overrides) for r in _raw_checks_semideg(ctx, emit)]


def check_properness(
    system: SystemDef, points, mode: str, tol_overrides=None
) -> tuple[CheckResult, PropernessInfo]:
    """Scaled magnitude of the secondary tensor over all points."""
    overrides = _merged_overrides(system, tol_overrides)
    res = scale = 0.0
    for point in np.atleast_2d(np.asarray(points, dtype=float)):
        sol = structure.solve_structure_point(system, point, mode)
        res = max(res, _amax(sol.secondary))
        scale = max(scale, _amax(sol.primary))
    raw = _Raw("properness", res, scale)
    result = _result(raw, overrides, points=len(np.atleast_2d(points)))
    info = PropernessInfo(
        verdict="proper" if result.passed else "conformal",
        max_abs_residual=result.max_abs_residual,
        scale=result.scale,
        rel_residual=result.rel_residual,
        tolerance=result.tolerance,
    )
    return result, info


def check_killing(
    system: SystemDef, killing: KillingDef, point, tol_overrides=None
) -> CheckResult:
    """Residual of the (conformal) Killing equation for one candidate."""
    overrides = _merged_overrides(system, tol_overrides)
    raw = _raw_killing(system, killing, np.asarray(point, dtype=float), "killing")
    return _result(raw, overrides)


def check_bertrand_darboux(
    system: SystemDef, killing: KillingDef, point, basis_index=None,
    tol_overrides=None,
) -> CheckResult:
    """Integrability two-form residual for one Killing candidate.

    ``basis_index`` restricts the check to a single basis element; by default
    the worst residual over the whole basis is reported.  A candidate that
    fails its own Killing equation is warned about, not rejected.
    """
    overrides = _merged_overrides(system, tol_overrides)
    point = np.asarray(point, dtype=float)
    killing_result = _result(
        _raw_killing(system, killing, point, "killing"), overrides
    )
    if not killing_result.passed:
        import warnings

        warnings.warn(
            f"candidate of kind {killing.kind!r} fails its Killing equation at "
            f"{tuple(point)} (rel residual {killing_result.rel_residual:.3e}); "
            "the integrability check is evaluated anyway",
            stacklevel=2,
        )
    raw = _raw_bd(system, killing, point, "bertrand-darboux",
                  basis_index=basis_index)
    return _result(raw, overrides)


def _merged_overrides(system: SystemDef, tol_overrides) -> dict:
    merged = dict(system.tolerances)
    if tol_overrides:
        merged.update(tol_overrides)
    return merged


# --- suite -------------------------------------------------------------------


def run_suite(
    system: SystemDef, npoints: int = 20, seed: int = 42, tol_overrides=None
) -> SuiteReport:
    """Classify the system and evaluate every applicable identity check.

    Deterministic for fixed ``(system, npoints, seed, tolerances)``.
    """
    system.validate_shape()
    overrides = _merged_overrides(system, tol_overrides)
    points = sample_points(system, npoints, seed)

    if not system.basis:
        return _run_smoke(system, points, seed, overrides)

    classification = classify_degeneracy(system, points)
    mode = classification.mode
    contexts = [_context(system, x, mode) for x in points]

    prop_res = max(_amax(c.sol.secondary) for c in contexts)
    prop_scale = max(_amax(c.sol.primary) for c in contexts)
    prop_raw = _Raw("properness", prop_res, prop_scale)
    prop_result = _result(prop_raw, overrides, points=len(points))
    properness = PropernessInfo(
        verdict="proper" if prop_result.passed else "conformal",
        max_abs_residual=prop_result.max_abs_residual,
        scale=prop_result.scale,
        rel_residual=prop_result.rel_residual,
        tolerance=prop_result.tolerance,
    )
    emit_proper = prop_result.passed

    point_checks = _raw_checks_nondeg if mode == NONDEG else _raw_checks_semideg
    acc: dict[str, list[float]] = {}
    order: list[str] = []
    for ctx in contexts:
        for raw in point_checks(ctx, emit_proper):
            if raw.name not in acc:
                acc[raw.name] = [0.0, 0.0]
                order.append(raw.name)
            acc[raw.name][0] = max(acc[raw.name][0], raw.abs_residual)
            acc[raw.name][1] = max(acc[raw.name][1], raw.scale)

    for idx, killing in enumerate(system.killing):
        for ctx in contexts:
            for raw in (
                _raw_killing(system, killing, ctx.point, f"killing-{idx}",
                             ctx.m, ctx.lc),
                _raw_bd(system, killing, ctx.point, f"bertrand-darboux-{idx}",
                        ctx.m, ctx.lc, ctx.jets),
            ):
                if raw.name not in acc:
                    acc[raw.name] = [0.0, 0.0]
                    order.append(raw.name)
                acc[raw.name][0] = max(acc[raw.name][0], raw.abs_residual)
                acc[raw.name][1] = max(acc[raw.name][1], raw.scale)

    checks = [
        _result(_Raw(name, acc[name][0], acc[name][1]), overrides,
                points=len(points))
        for name in order
    ]

    variants = []
    if mode == SEMIDEG:
        v_res = v_scale = 0.0
        for ctx in contexts:
            raw = _raw_variant_semideg(ctx)
            v_res = max(v_res, raw.abs_residual)
            v_scale = max(v_scale, raw.scale)
        variants.append(
            _result(_Raw("eta-from-ricci-paper-variant", v_res, v_scale),
                    overrides, points=len(points))
        )

    solve_conds = [c.sol.condition for c in contexts]
    condition_stats = {
        "solve_condition_max": max(solve_conds),
        "solve_condition_mean": sum(solve_conds) / len(solve_conds),
        "metric_condition_max": max(c.m.condition for c in contexts),
        "solve_residual_max": max(c.sol.residual for c in contexts),
    }
    if mode == SEMIDEG:
        condition_stats["fit_residual_max"] = max(
            c.sol.fit_residual for c in contexts
        )

    return SuiteReport(
        system=system.name,
        mode=mode,
        seed=seed,
        npoints=npoints,
        sign_convention=SIGN_CONVENTION,
        classification=classification,
        properness=properness,
        checks=checks,
        variants=variants,
        condition_stats=condition_stats,
    )


def _run_smoke(system, points, seed, overrides) -> SuiteReport:
    acc: dict[str, list[float]] = {}
    order: list[str] = []
    metric_cond = 0.0
    for point in points:
        raws, cond = _raw_checks_smoke(system, point)
        metric_cond = max(metric_cond, cond)
        for raw in raws:
            if raw.name not in acc:
                acc[raw.name] = [0.0, 0.0]
                order.append(raw.name)
            acc[raw.name][0] = max(acc[raw.name][0], raw.abs_residual)
            acc[raw.name][1] = max(acc[raw.name][1], raw.scale)
    checks = [
        _result(_Raw(name, acc[name][0], acc[name][1]), overrides,
                points=len(points))
        for name in order
    ]
    return SuiteReport(
        system=system.name,
        mode="smoke",
        seed=seed,
        npoints=len(points),
        sign_convention=SIGN_CONVENTION,
        classification=None,
        properness=None,
        checks=checks,
        variants=[],
        condition_stats={"metric_condition_max": metric_cond},
    )
