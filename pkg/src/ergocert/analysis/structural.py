"""Structural framework: exact dependence on arbitrary positive rates.

Stability over all positive rates splits into two finite tests: the
catalysis-free matrix ``A_1 = A(dg=1, cv=1, ct=0)`` is Hurwitz, and the
nonnegative coupling ``-W_ct A_1^{-1} S_ct`` between catalytic reactions is
nilpotent.  The reduction to unit rates requires conversion columns of the
form ``e_j - e_i``; other networks fall back to sampling.
"""

from __future__ import annotations

import math

import numpy as np

from .. import linopt
from ..model import CharacteristicModel, sign_pattern
from .certificate import Certificate, ControlSpec, Framework, Property, Verdict
from .nominal import W_ACT_MIN, graph_path, stability_certificate
from .sign import find_cycle

FALLBACK_SAMPLES = 200
FALLBACK_RANGE = (1e-2, 1e2)
BOUNDARY_TOL = 1e-9


def unit_conversion_columns(model: CharacteristicModel) -> bool:
    """Each conversion column has exactly one -1, one +1 and zeros elsewhere."""
    for col in model.dec.Scv.T:
        if sorted(col.tolist()) != [-1] + [0] * (len(col) - 2) + [1]:
            return False
    return True


def a_one(model: CharacteristicModel, cv_value: float | dict = 1.0,
          dg_value: float | dict = 1.0) -> np.ndarray:
    vals = {s: 0.0 for s in model.ct}
    for group, value in ((model.dg, dg_value), (model.cv, cv_value)):
        for s in group:
            vals[s] = value[s] if isinstance(value, dict) else value
    return model.A.evaluate(vals)


def catalytic_coupling(model: CharacteristicModel, A_rho: np.ndarray) -> np.ndarray:
    """0/1 pattern of ``-W_ct A_rho^{-1} S_ct`` (``A_rho`` Metzler Hurwitz).

    ``(-A^{-1})_{ij} > 0`` exactly when ``j`` reaches ``i`` in the digraph of
    ``A``, so the pattern follows from reachability; a numeric inverse is
    used as a cross-check.
    """
    dec = model.dec
    Wct, Sct = dec.Wct, dec.Sct
    n = Sct.shape[1]
    N = np.zeros((n, n))
    for r in range(n):
        src = int(np.flatnonzero(Wct[r])[0])
        for c in range(n):
            prods = np.flatnonzero(Sct[:, c] > 0)
            if any(graph_path(A_rho, int(i), src) for i in prods):
                N[r, c] = 1.0
    if n:
        numeric = -(Wct @ linopt.gauss_inverse(A_rho) @ Sct)
        scale = max(1.0, float(np.abs(numeric).max()))
        if not np.array_equal(numeric > 1e-12 * scale, N > 0):
            raise ArithmeticError("catalytic coupling pattern disagrees with the numeric inverse")
    return N


def _nilpotent(N: np.ndarray) -> bool:
    n = N.shape[0]
    if n == 0:
        return True
    P = np.linalg.matrix_power(N, n)
    return bool(np.all(P == 0))


def _instability_witness(model: CharacteristicModel, cycle_ct: list[int]) -> dict | None:
    """Rates with unit degradation/conversion, a loud catalytic cycle and
    faint other catalysis that make ``A`` unstable."""
    names = list(model.ct)
    for scale in (1.0, 10.0, 1e2, 1e3, 1e4, 1e6):
        vals = {s: 1.0 for s in model.dg + model.cv}
        for i, s in enumerate(names):
            vals[s] = scale if i in cycle_ct else 1e-6
        lam = linopt.pf_eigenvalue(model.A.evaluate(vals))
        if lam >= 0:
            return {"rates": vals, "lambda_pf": lam}
    return None


def ergodicity_structural(model: CharacteristicModel, seed: int = 0) -> Certificate:
    if not unit_conversion_columns(model):
        return _ergodicity_sampled(model, seed)
    A1 = a_one(model)
    cert = stability_certificate(A1, Framework.STRUCTURAL, "A_one")
    if cert.verdict is not Verdict.HOLDS:
        if cert.verdict is Verdict.FAILS:
            cert.counterexample["reason"] = "unit-rate matrix without catalysis is not Hurwitz"
        return cert
    N = catalytic_coupling(model, A1)
    n = N.shape[0]
    cert.matrices["N_minus_I"] = N - np.eye(n)
    cert.details["catalytic"] = list(model.ct)
    nil = _nilpotent(N)
    cycle = None if np.any(np.diag(N)) else find_cycle(N)
    graph_ok = not np.any(np.diag(N)) and cycle is None
    if nil != graph_ok:
        raise ArithmeticError("nilpotency and acyclicity tests disagree")
    if n:
        res = linopt.is_hurwitz_metzler(N - np.eye(n))
        lp_ok = res.hurwitz
        cert.details["v_d"] = res.v
        cert.details["v_d_on"] = "N_minus_I"
    else:
        lp_ok = True
    cert.details["coupling_nilpotent"] = nil
    cert.details["coupling_lp"] = lp_ok
    if lp_ok != nil:
        cert.verdict = Verdict.UNKNOWN
        cert.caveats.append("spectral-radius and LP tests on the catalytic coupling disagree")
        return cert
    if not nil:
        cert.verdict = Verdict.FAILS
        cert.v = None
        if np.any(np.diag(N)):
            loop = [int(np.flatnonzero(np.diag(N))[0])]
        else:
            loop = cycle
        ce = {"catalytic_cycle": [model.ct[i] for i in loop]}
        wit = _instability_witness(model, loop)
        if wit is not None:
            ce["unstable_rates"] = wit["rates"]
            ce["lambda_pf"] = wit["lambda_pf"]
        cert.counterexample = ce
    return cert


def _ergodicity_sampled(model: CharacteristicModel, seed: int) -> Certificate:
    rng = np.random.default_rng(seed)
    lo, hi = map(math.log, FALLBACK_RANGE)
    cert = Certificate(Framework.STRUCTURAL, Property.ERGODICITY, Verdict.HOLDS,
                       details={"sampled": FALLBACK_SAMPLES})
    cert.caveats.append("conversion columns are not all of the form e_j - e_i; the "
                        f"criterion was checked at {FALLBACK_SAMPLES} sampled degradation and "
                        "conversion rates only")
    near = False
    first = None
    for k in range(FALLBACK_SAMPLES):
        dg = {s: math.exp(rng.uniform(lo, hi)) for s in model.dg}
        cv = {s: math.exp(rng.uniform(lo, hi)) for s in model.cv}
        A_rho = a_one(model, cv, dg)
        lam = linopt.pf_eigenvalue(A_rho)
        if abs(lam) < BOUNDARY_TOL:
            near = True
            continue
        if lam > 0:
            cert.verdict = Verdict.FAILS
            cert.counterexample = {"rates": {**dg, **cv}, "lambda_pf": lam}
            return cert
        N = catalytic_coupling(model, A_rho)
        if not _nilpotent(N):
            cert.verdict = Verdict.FAILS
            cert.counterexample = {"rates": {**dg, **cv}, "reason": "catalytic coupling "
                                   "has a nonzero spectral radius"}
            return cert
        if first is None:
            first = (A_rho, N, dg, cv)
    if near:
        cert.verdict = Verdict.UNKNOWN
        cert.caveats.append("some samples sit on the stability boundary")
    if first is not None:
        A_rho, N, dg, cv = first
        res = linopt.is_hurwitz_metzler(A_rho)
        cert.v = res.v
        cert.matrices["A_one"] = A_rho
        cert.details.update({"v_on": "A_one", "sample_rates": {**dg, **cv}})
    return cert


def structural_sign(model: CharacteristicModel):
    return sign_pattern(model, allow_mixed=True)


def _shift(M: np.ndarray) -> float:
    if linopt.is_hurwitz_metzler(M).hurwitz:
        return 0.0
    return float(linopt.pf_eigenvalue(M)) + 1.0


def output_controllability_structural(model: CharacteristicModel,
                                      spec: ControlSpec) -> Certificate:
    from .nominal import controllability_certificate

    S = structural_sign(model)
    cert = controllability_certificate(S.sgn(), spec.actuated, spec.controlled,
                                       Framework.STRUCTURAL, "sgn_A")
    if S.mixed:
        cert.caveats.append(f"mixed-sign entries {list(S.mixed)} are generically nonzero and "
                            "were kept as edges")
    return cert


def aic_structural(model: CharacteristicModel, spec: ControlSpec,
                   irreducible: bool = False) -> Certificate:
    """One LP over ``(v_c, v_d, w)``: ``v_c^T A_1 < 0``,
    ``v_d^T (N - I) < 0``, ``w >= 0``, ``w_act > 0`` and
    ``w^T (sgn(A) - mu I) = -e_l`` with the shift ``mu`` of ``sgn(A)``."""
    erg = ergodicity_structural(model)
    if "A_one" not in erg.matrices or "N_minus_I" not in erg.matrices:
        oc = output_controllability_structural(model, spec)
        verdict = Verdict.FAILS if Verdict.FAILS in (erg.verdict, oc.verdict) else (
            Verdict.HOLDS if erg.holds and oc.holds else Verdict.UNKNOWN)
        cert = Certificate(Framework.STRUCTURAL, Property.AIC, verdict, v=erg.v, w=oc.w,
                           mu_shift=oc.mu_shift, matrices={**erg.matrices, **oc.matrices},
                           details={"v_on": "A_one", "w_on": "sgn_A",
                                    "actuated": spec.actuated, "controlled": spec.controlled},
                           caveats=erg.caveats + oc.caveats, sub=[erg, oc],
                           irreducible_asserted=irreducible)
        if not erg.matrices:
            cert.details.pop("v_on")
        return cert
    A1 = erg.matrices["A_one"]
    NmI = erg.matrices["N_minus_I"]
    S = structural_sign(model)
    sgn = S.sgn()
    mu = _shift(sgn)
    d, n = A1.shape[0], NmI.shape[0]
    nv = 2 * d + n
    lower = np.concatenate([np.ones(d), np.ones(n), np.zeros(d)])
    lower[d + n + spec.actuated] = W_ACT_MIN
    p = linopt.LinearFeasibilityProblem(nv, lower=lower)
    for j in range(d):
        row = np.zeros(nv)
        row[:d] = A1[:, j]
        p.add_ub(row, -1.0)
    for j in range(n):
        row = np.zeros(nv)
        row[d:d + n] = NmI[:, j]
        p.add_ub(row, -1.0)
    shifted = sgn - mu * np.eye(d)
    for j in range(d):
        row = np.zeros(nv)
        row[d + n:] = shifted[:, j]
        p.add_eq(row, -1.0 if j == spec.controlled else 0.0)
    res = linopt.solve_feasibility(p)
    cert = Certificate(Framework.STRUCTURAL, Property.AIC, Verdict.UNKNOWN, mu_shift=mu,
                       matrices={"A_one": A1, "N_minus_I": NmI, "sgn_A": sgn},
                       details={"v_on": "A_one", "w_on": "sgn_A", "v_d_on": "N_minus_I",
                                "actuated": spec.actuated, "controlled": spec.controlled},
                       irreducible_asserted=irreducible)
    if S.mixed:
        cert.caveats.append(f"mixed-sign entries {list(S.mixed)} kept as nonzero")
    if res.feasible:
        cert.verdict = Verdict.HOLDS
        cert.v = res.x[:d]
        cert.details["v_d"] = res.x[d:d + n]
        cert.w = res.x[d + n:]
    elif res.status is linopt.LPStatus.INFEASIBLE:
        cert.verdict = Verdict.FAILS
        oc = output_controllability_structural(model, spec)
        cert.sub = [erg, oc]
        cert.counterexample = {"failed": [c.property.value for c in (erg, oc)
                                          if c.verdict is not Verdict.HOLDS]}
    else:
        cert.caveats.append(f"AIC LP ended with status {res.status.value}")
    if not irreducible:
        cert.caveats.append("closed-loop irreducibility was not asserted; the tracking "
                            "conclusion is conditional on it")
    return cert
