"""Fixed-parameter certificates: ergodicity, output controllability,
antithetic integral control and the set-point lower bound.

The functions take evaluated matrices so that the uncertain frameworks can
reuse them on their own test matrices (``A+``, ``A-``, ``sgn(A)``, ...).
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .. import linopt
from .certificate import Certificate, ControlSpec, Framework, Property, Verdict

W_ACT_MIN = 1e-6
W_NEG_TOL = 1e-10
ALPHA_FRACTIONS = (0.5, 0.75, 0.9, 0.99, 0.999)


def _pf_safe(M: np.ndarray) -> float | None:
    try:
        return linopt.pf_eigenvalue(M)
    except Exception:  # pragma: no cover - diagnostics only
        return None


def stability_certificate(M: np.ndarray, framework: Framework = Framework.NOMINAL,
                          name: str = "A",
                          prop: Property = Property.ERGODICITY) -> Certificate:
    """Holds iff ``{v >= 1, M^T v <= -1}`` is feasible; ``v`` attached."""
    M = np.asarray(M, dtype=float)
    res = linopt.is_hurwitz_metzler(M)
    cert = Certificate(framework, prop, Verdict.UNKNOWN, matrices={name: M},
                       details={"v_on": name})
    if res.hurwitz:
        cert.verdict = Verdict.HOLDS
        cert.v = res.v
    elif res.status is linopt.LPStatus.INFEASIBLE:
        cert.verdict = Verdict.FAILS
        cert.counterexample = {"matrix": name, "lambda_pf": _pf_safe(M)}
    else:
        cert.caveats.append(f"stability LP ended with status {res.status.value}")
    return cert


def ergodicity_nominal(A: np.ndarray) -> Certificate:
    return stability_certificate(A, Framework.NOMINAL, "A")


def kernel_stability_certificate(M: np.ndarray, Sb: np.ndarray, framework: Framework,
                                 name: str = "A") -> Certificate:
    """Sufficient test ``{v >= 1, Sb^T v = 0, M^T v <= -1}``; infeasible -> Unknown."""
    M = np.asarray(M, dtype=float)
    Sb = np.asarray(Sb, dtype=float)
    d = M.shape[0]
    if Sb.size == 0:
        return stability_certificate(M, framework, name)
    linopt.check_metzler(M)
    p = linopt.LinearFeasibilityProblem(d, lower=np.ones(d))
    for j in range(d):
        p.add_ub(M[:, j], -1.0)
    for k in range(Sb.shape[1]):
        p.add_eq(Sb[:, k], 0.0)
    res = linopt.solve_feasibility(p)
    cert = Certificate(framework, Property.ERGODICITY_BIMOLECULAR, Verdict.UNKNOWN,
                       matrices={name: M, "Sb": Sb}, details={"v_on": name, "kernel": "Sb"})
    if res.feasible:
        cert.verdict = Verdict.HOLDS
        cert.v = res.x
    else:
        cert.caveats.append("no v > 0 with v^T Sb = 0 and v^T A < 0 was found; this test is "
                            "only sufficient, so ergodicity is left undecided")
    return cert


def ergodicity_bimolecular_nominal(A: np.ndarray, Sb: np.ndarray) -> Certificate:
    return kernel_stability_certificate(A, Sb, Framework.NOMINAL)


# ---------------------------------------------------------------------------
# output controllability


def graph_path(M: np.ndarray, i: int, j: int) -> bool:
    """Path ``i -> j`` in the digraph with an edge ``m -> n`` when ``M[n, m] != 0``."""
    if i == j:
        return True
    M = np.asarray(M)
    d = M.shape[0]
    seen = {i}
    queue = deque([i])
    while queue:
        m = queue.popleft()
        for n in np.flatnonzero(M[:, m]):
            n = int(n)
            if n == m or n in seen:
                continue
            if n == j:
                return True
            seen.add(n)
            queue.append(n)
    return False


def rank_row_controllable(M: np.ndarray, i: int, j: int, tol: float = 1e-9) -> bool:
    """Rank of ``[c'b, c'Mb, ..., c'M^(d-1)b]`` is one (``b = e_i``, ``c = e_j``).

    Krylov vectors are renormalised at each step; that leaves the zero
    pattern of the row unchanged.
    """
    M = np.asarray(M, dtype=float)
    d = M.shape[0]
    x = np.zeros(d)
    x[i] = 1.0
    for _ in range(d):
        if abs(x[j]) > tol * max(np.abs(x).max(), 1e-300):
            return True
        x = M @ x
        nrm = np.abs(x).max()
        if nrm == 0:
            return False
        x = x / nrm
    return False


def controllability_certificate(M: np.ndarray, actuated: int, controlled: int,
                                framework: Framework = Framework.NOMINAL,
                                name: str = "A") -> Certificate:
    M = np.asarray(M, dtype=float)
    linopt.check_metzler(M)
    d = M.shape[0]
    if linopt.is_hurwitz_metzler(M).hurwitz:
        mu = 0.0
    else:
        mu = float(linopt.pf_eigenvalue(M)) + 1.0
    e = np.zeros(d)
    e[controlled] = 1.0
    shifted = M - mu * np.eye(d)
    try:
        w = np.linalg.solve(shifted.T, -e)
    except np.linalg.LinAlgError as exc:  # guarded by the choice of mu
        raise linopt.SingularMatrixError(str(exc)) from exc
    lp_ok = bool(np.all(w >= -W_NEG_TOL) and w[actuated] > W_NEG_TOL)
    path = graph_path(M, actuated, controlled)
    rank = rank_row_controllable(M, actuated, controlled)
    cert = Certificate(framework, Property.OUTPUT_CONTROLLABILITY,
                       Verdict.HOLDS if lp_ok else Verdict.FAILS,
                       w=w, mu_shift=mu, matrices={name: M},
                       details={"w_on": name, "actuated": actuated, "controlled": controlled,
                                "graph_path": path, "rank_row": rank})
    if not (lp_ok == path == rank):
        cert.verdict = Verdict.UNKNOWN
        cert.caveats.append(f"controllability criteria disagree (lp={lp_ok}, path={path}, "
                            f"rank={rank}); numerical trouble suspected")
    if cert.verdict is Verdict.FAILS:
        cert.counterexample = {"reason": f"no directed path from species {actuated} "
                                         f"to species {controlled}"}
    return cert


def output_controllability(A: np.ndarray, spec: ControlSpec) -> Certificate:
    return controllability_certificate(A, spec.actuated, spec.controlled)


# ---------------------------------------------------------------------------
# antithetic integral control


def aic_problem(Av: np.ndarray, Aw: np.ndarray, actuated: int,
                controlled: int) -> linopt.LinearFeasibilityProblem:
    """Variables ``(v, w)``: ``v >= 1, Av^T v <= -1, w >= 0, w_act >= 1e-6,
    Aw^T w = -e_controlled``."""
    d = Av.shape[0]
    lower = np.concatenate([np.ones(d), np.zeros(d)])
    lower[d + actuated] = W_ACT_MIN
    p = linopt.LinearFeasibilityProblem(2 * d, lower=lower)
    for j in range(d):
        row = np.zeros(2 * d)
        row[:d] = Av[:, j]
        p.add_ub(row, -1.0)
    for j in range(d):
        row = np.zeros(2 * d)
        row[d:] = Aw[:, j]
        p.add_eq(row, -1.0 if j == controlled else 0.0)
    return p


def setpoint_bound_nominal(A: np.ndarray, b0: np.ndarray, spec: ControlSpec | int,
                           alpha: float | None = None) -> tuple[float, float, np.ndarray]:
    """Sufficient threshold ``v^T b0 / (alpha v_l)`` on ``mu/theta``.

    ``alpha`` defaults to half the stability margin.  Returns
    ``(bound, alpha, v)`` with ``v >= 1`` and ``v^T (A + alpha I) <= 0``.
    """
    controlled = spec.controlled if isinstance(spec, ControlSpec) else int(spec)
    A = np.asarray(A, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    d = A.shape[0]
    lam = linopt.pf_eigenvalue(A)
    if lam >= 0:
        raise ValueError("set-point bound needs a Hurwitz matrix")
    if alpha is None:
        alpha = -lam / 2
    for _ in range(30):
        shifted = A + alpha * np.eye(d)
        p = linopt.LinearFeasibilityProblem(d, lower=np.ones(d))
        for j in range(d):
            p.add_ub(shifted[:, j], 0.0)
        res = linopt.minimize(p, np.ones(d))
        if res.feasible:
            v = res.x
            return float(v @ b0 / (alpha * v[controlled])), float(alpha), v
        alpha /= 2
    raise RuntimeError("set-point LP failed for every tried decay rate")


def tightest_setpoint_bound(A: np.ndarray, b0: np.ndarray, controlled: int,
                            fractions=ALPHA_FRACTIONS) -> tuple[float, float, np.ndarray, dict]:
    """Smallest bound over decay rates ``alpha = f * (-lambda_PF)``."""
    lam = linopt.pf_eigenvalue(np.asarray(A, dtype=float))
    scan = {}
    best = None
    for f in fractions:
        try:
            bound, alpha, v = setpoint_bound_nominal(A, b0, controlled, alpha=-lam * f)
        except RuntimeError:
            continue
        if abs(alpha - (-lam * f)) > 1e-15 * max(1.0, abs(lam)):
            continue  # the LP only succeeded after halving; skip
        scan[f] = bound
        if best is None or bound < best[0]:
            best = (bound, alpha, v)
    if best is None:
        bound, alpha, v = setpoint_bound_nominal(A, b0, controlled)
        best = (bound, alpha, v)
    return best[0], best[1], best[2], scan


def attach_setpoint(cert: Certificate, A: np.ndarray, b0: np.ndarray, controlled: int,
                    name: str) -> None:
    bound, alpha, v_alpha, scan = tightest_setpoint_bound(A, b0, controlled)
    half, _, _ = setpoint_bound_nominal(A, b0, controlled)
    cert.setpoint_bound = bound
    cert.alpha = alpha
    cert.matrices.setdefault(name, np.asarray(A, dtype=float))
    cert.matrices["b0"] = np.asarray(b0, dtype=float)
    cert.details.update({"setpoint_v": v_alpha, "setpoint_on": name,
                         "bound_half_margin": half,
                         "bound_by_alpha_fraction": {str(k): b for k, b in scan.items()}})
    cert.caveats.append("the set-point bound is sufficient, not necessary")


def aic_certificate(Av: np.ndarray, Aw: np.ndarray, b0: np.ndarray | None,
                    spec: ControlSpec, framework: Framework, v_name: str, w_name: str,
                    irreducible: bool = False) -> Certificate:
    Av = np.asarray(Av, dtype=float)
    Aw = np.asarray(Aw, dtype=float)
    linopt.check_metzler(Av)
    linopt.check_metzler(Aw)
    d = Av.shape[0]
    p = aic_problem(Av, Aw, spec.actuated, spec.controlled)
    res = linopt.solve_feasibility(p)
    mats = {v_name: Av, w_name: Aw}
    cert = Certificate(framework, Property.AIC, Verdict.UNKNOWN, matrices=mats,
                       details={"v_on": v_name, "w_on": w_name, "actuated": spec.actuated,
                                "controlled": spec.controlled},
                       irreducible_asserted=irreducible)
    if res.feasible:
        cert.verdict = Verdict.HOLDS
        cert.v, cert.w = res.x[:d], res.x[d:]
        cert.mu_shift = 0.0
        if b0 is not None:
            attach_setpoint(cert, Av, b0, spec.controlled, v_name)
    else:
        erg = stability_certificate(Av, framework, v_name)
        oc = controllability_certificate(Aw, spec.actuated, spec.controlled, framework, w_name)
        cert.sub = [erg, oc]
        if res.status is linopt.LPStatus.INFEASIBLE:
            cert.verdict = Verdict.FAILS
            failed = [c.property.value for c in (erg, oc) if c.verdict is not Verdict.HOLDS]
            cert.counterexample = {"failed": failed or ["joint LP"]}
        else:
            cert.caveats.append(f"AIC LP ended with status {res.status.value}")
    if not irreducible:
        cert.caveats.append("closed-loop irreducibility was not asserted; the tracking "
                            "conclusion is conditional on it")
    return cert


def aic_nominal(A: np.ndarray, spec: ControlSpec, b0: np.ndarray | None = None,
                irreducible: bool = False) -> Certificate:
    return aic_certificate(A, A, b0, spec, Framework.NOMINAL, "A", "A", irreducible)
