"""Independent certificate checking with plain matrix-vector arithmetic."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import ReactionNetwork
from .certificate import Certificate, Property, Verdict
from .driver import recompute_matrices, robust_family_for

RESIDUAL_TOL = 1e-8
MATRIX_TOL = 1e-9
W_NEG_TOL = 1e-10


@dataclass
class CheckResult:
    ok: bool
    residual: float = 0.0
    violations: list[str] = field(default_factory=list)

    def fail(self, msg: str) -> None:
        self.ok = False
        self.violations.append(msg)


def _check_v(res: CheckResult, v: np.ndarray, M: np.ndarray, label: str) -> None:
    if v is None:
        res.fail(f"{label}: witness v missing")
        return
    v = np.asarray(v, dtype=float)
    if v.shape != (M.shape[0],):
        res.fail(f"{label}: v has shape {v.shape}, matrix is {M.shape}")
        return
    if v.size == 0:
        return
    if not np.all(v > 0):
        res.fail(f"{label}: v is not strictly positive (min {v.min():.3e})")
    row = v @ M
    res.residual = max(res.residual, float(max(0.0, row.max())))
    if not np.all(row < 0):
        j = int(np.argmax(row))
        res.fail(f"{label}: (v^T M)_{j} = {row[j]:.3e} is not negative")


def _check_w(res: CheckResult, cert: Certificate, M: np.ndarray) -> None:
    w = cert.w
    if w is None or cert.mu_shift is None:
        res.fail("controllability witness w or shift mu missing")
        return
    w = np.asarray(w, dtype=float)
    if w.shape != (M.shape[0],):
        res.fail(f"w has shape {w.shape}, matrix is {M.shape}")
        return
    act, ctl = int(cert.details["actuated"]), int(cert.details["controlled"])
    e = np.zeros(M.shape[0])
    e[ctl] = 1.0
    r = w @ (M - cert.mu_shift * np.eye(M.shape[0])) + e
    resid = float(np.abs(r).max())
    res.residual = max(res.residual, resid)
    if resid >= RESIDUAL_TOL:
        res.fail(f"w^T (M - mu I) + e_l has residual {resid:.3e}")
    if cert.mu_shift < 0:
        res.fail("negative shift mu")
    if not np.all(w >= -W_NEG_TOL):
        res.fail(f"w has a negative entry {w.min():.3e}")
    if not w[act] > 0:
        res.fail(f"w at the actuated species is {w[act]:.3e}, not positive")


def check_certificate(cert: Certificate, net: ReactionNetwork | None = None) -> CheckResult:
    """Verify the witnesses of a Holds certificate.

    With ``net`` the stored test matrices are first compared with matrices
    rebuilt from the network; otherwise the stored matrices are trusted.
    """
    res = CheckResult(True)
    mats = dict(cert.matrices)
    if net is not None:
        try:
            fresh = recompute_matrices(net, cert)
        except Exception as exc:  # mismatched network and certificate
            res.fail(f"cannot rebuild test matrices: {exc}")
            return res
        for name, M in mats.items():
            if name in fresh:
                F = fresh[name]
                if F.shape != M.shape:
                    res.fail(f"matrix {name}: shape {M.shape} does not match network {F.shape}")
                elif not np.allclose(F, M, rtol=MATRIX_TOL, atol=MATRIX_TOL):
                    res.fail(f"matrix {name} does not match the network")
        if not res.ok:
            return res
    for sub in cert.sub:
        if sub.verdict is Verdict.HOLDS:
            sres = check_certificate(sub, net)
            res.residual = max(res.residual, sres.residual)
            for v in sres.violations:
                res.fail(f"sub-certificate {sub.property.value}: {v}")
    if cert.verdict is not Verdict.HOLDS:
        return res
    d = cert.details
    if cert.property in (Property.ERGODICITY, Property.ERGODICITY_BIMOLECULAR, Property.AIC) \
            and "v_on" in d:
        _check_v(res, cert.v, mats[d["v_on"]], d["v_on"])
        if "v_d_on" in d and d.get("v_d") is not None:
            _check_v(res, np.asarray(d["v_d"], dtype=float), mats[d["v_d_on"]], d["v_d_on"])
        if d.get("kernel") == "Sb" and cert.v is not None and "Sb" in mats:
            k = float(np.abs(np.asarray(cert.v) @ mats["Sb"]).max()) if mats["Sb"].size else 0.0
            res.residual = max(res.residual, k)
            if k >= RESIDUAL_TOL:
                res.fail(f"v^T Sb has residual {k:.3e}")
        if "samples" in d and d["samples"]:
            _check_samples(res, cert, net)
    if cert.property in (Property.OUTPUT_CONTROLLABILITY, Property.AIC) and "w_on" in d:
        _check_w(res, cert, mats[d["w_on"]])
    if cert.setpoint_bound is not None and "setpoint_v" in d:
        _check_setpoint(res, cert, mats)
    return res


def _check_samples(res: CheckResult, cert: Certificate, net: ReactionNetwork | None) -> None:
    if net is None:
        return
    fam = robust_family_for(net)
    Sb = cert.matrices.get("Sb")
    for k, s in enumerate(cert.details["samples"]):
        A = fam.plus.evaluate(s["cv_point"])
        v = np.asarray(s["v"], dtype=float)
        _check_v(res, v, A, f"sample {k}")
        if Sb is not None and Sb.size:
            r = float(np.abs(v @ Sb).max())
            if r >= RESIDUAL_TOL * max(1.0, float(np.abs(v).max())):
                res.fail(f"sample {k}: v^T Sb residual {r:.3e}")


def _check_setpoint(res: CheckResult, cert: Certificate, mats: dict) -> None:
    d = cert.details
    A = mats[d["setpoint_on"]]
    b0 = mats["b0"]
    v = np.asarray(d["setpoint_v"], dtype=float)
    alpha = cert.alpha
    if alpha is None or alpha <= 0:
        res.fail("decay rate alpha missing or nonpositive")
        return
    if not np.all(v > 0):
        res.fail("set-point vector v is not positive")
    row = v @ (A + alpha * np.eye(A.shape[0]))
    slack = float(max(0.0, row.max()))
    res.residual = max(res.residual, slack)
    if slack >= RESIDUAL_TOL:
        res.fail(f"v^T (A + alpha I) exceeds zero by {slack:.3e}")
    ctl = int(d["controlled"])
    bound = float(v @ b0 / (alpha * v[ctl]))
    if abs(bound - cert.setpoint_bound) > RESIDUAL_TOL * max(1.0, abs(bound)):
        res.fail(f"set-point bound {cert.setpoint_bound} does not match {bound}")
