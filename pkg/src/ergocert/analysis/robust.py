"""Robust framework: exact dependence on bounded rates.

Degradation and catalytic rates enter monotonically, so they are pinned at
their worst-case bounds; only the conversion rates remain symbolic and are
handled through the determinant and adjugate polynomials.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .. import linopt
from ..model import (AffineMatrix, CharacteristicModel, ParameterDomain,
                     UnboundedDomainError, left_annihilator)
from ..poly import adjugate_poly, box_positivity, det_poly, evaluate_matrix, pretty
from .certificate import Certificate, ControlSpec, Framework, Property, Verdict, worst
from .nominal import controllability_certificate, stability_certificate, tightest_setpoint_bound

ADJ_SAMPLES = 100
GRID_PER_DIM = 5
MAX_GRID_POINTS = 3125


@dataclass(frozen=True)
class RobustFamily:
    """``A+(rho_cv) = A(dg-, ct+, rho_cv)`` and ``A-(rho_cv) = A(dg+, ct-, rho_cv)``."""

    plus: AffineMatrix
    minus: AffineMatrix
    cv: tuple[str, ...]
    cv_box: Mapping[str, tuple[float, float]]
    b0_upper: np.ndarray | None = None

    @property
    def d(self) -> int:
        return self.plus.shape[0]

    def midpoint(self) -> dict[str, float]:
        return {s: 0.5 * (a + b) for s, (a, b) in self.cv_box.items()}

    def lower_corner(self) -> dict[str, float]:
        return {s: a for s, (a, _) in self.cv_box.items()}

    @property
    def A_minus(self) -> np.ndarray:
        return self.minus.evaluate(self.lower_corner())

    def sample(self, rng: np.random.Generator) -> dict[str, float]:
        return {s: rng.uniform(a, b) for s, (a, b) in self.cv_box.items()}

    def grid(self, per_dim: int = GRID_PER_DIM) -> list[dict[str, float]]:
        m = len(self.cv)
        while per_dim > 2 and per_dim ** m > MAX_GRID_POINTS:
            per_dim -= 1
        axes = [np.linspace(*self.cv_box[s], per_dim) for s in self.cv]
        return [dict(zip(self.cv, pt)) for pt in itertools.product(*axes)]


def _bounds(domains: Mapping[str, ParameterDomain], symbols) -> dict[str, tuple[float, float]]:
    out = {}
    for s in symbols:
        dom = domains[s]
        if not dom.bounded:
            raise UnboundedDomainError(f"robust analysis needs bounded rates; {s!r} is unbounded")
        out[s] = (dom.lo, dom.hi)
    return out


def reduce_to_cv(model: CharacteristicModel,
                 domains: Mapping[str, ParameterDomain]) -> RobustFamily:
    box = _bounds(domains, model.first_order_symbols)
    plus = model.A.substitute({**{s: box[s][0] for s in model.dg},
                               **{s: box[s][1] for s in model.ct}})
    minus = model.A.substitute({**{s: box[s][1] for s in model.dg},
                                **{s: box[s][0] for s in model.ct}})
    b_up = None
    if all(domains[s].bounded for s in model.b0.symbols):
        b_up = model.b0.evaluate({s: domains[s].hi for s in model.b0.symbols})
    return RobustFamily(plus, minus, tuple(model.cv), {s: box[s] for s in model.cv}, b_up)


def _stability_poly(fam: RobustFamily):
    variables = list(fam.cv)
    sign = (-1) ** fam.d
    return det_poly(fam.plus, variables) * sign, variables


def adjugate_witness(fam: RobustFamily):
    """``v(rho)^T = (-1)^(d+1) 1^T Adj(A+(rho))`` as a list of polynomials."""
    variables = list(fam.cv)
    adj = adjugate_poly(fam.plus, variables)
    d = fam.d
    sign = (-1) ** (d + 1)
    return [sum((adj[i][j] for i in range(d)), start=adj[0][j] * 0) * sign for j in range(d)]


def ergodicity_robust(fam: RobustFamily, seed: int = 0) -> Certificate:
    if not fam.cv:
        cert = stability_certificate(fam.plus.constant, Framework.ROBUST, "A_plus")
        cert.details["cv_point"] = {}
        return cert
    mid = fam.midpoint()
    A_mid = fam.plus.evaluate(mid)
    base = stability_certificate(A_mid, Framework.ROBUST, "A_plus")
    base.details["cv_point"] = mid
    if base.verdict is not Verdict.HOLDS:
        if base.verdict is Verdict.FAILS:
            base.counterexample = {"cv_point": mid, "lambda_pf": base.counterexample["lambda_pf"]}
        return base
    p, variables = _stability_poly(fam)
    pos = box_positivity(p, fam.cv_box)
    base.details["det_poly"] = pretty(p)
    base.details["det_status"] = pos.status
    if pos.status == "CounterexampleFound":
        point = dict(zip(variables, map(float, pos.point)))
        base.verdict = Verdict.FAILS
        base.v = None
        base.counterexample = {"cv_point": point, "signed_det": pos.value,
                               "lambda_pf": linopt.pf_eigenvalue(fam.plus.evaluate(point))}
        return base
    if pos.status == "Unknown":
        base.verdict = Verdict.UNKNOWN
        base.caveats += pos.notes
        return base
    base.details["det_lower_bound"] = pos.lower_bound
    vpoly = adjugate_witness(fam)
    base.details["v_poly"] = [pretty(q) for q in vpoly]
    base.details["v_poly_degree"] = max(q.degree() for q in vpoly)
    rng = np.random.default_rng(seed)
    samples = []
    ok = True
    for _ in range(ADJ_SAMPLES):
        pt = fam.sample(rng)
        v = np.array([q(pt) for q in vpoly])
        A = fam.plus.evaluate(pt)
        if not (np.all(v > 0) and np.all(v @ A < 0)):
            ok = False
        samples.append({"cv_point": pt, "v": v})
    base.details["samples"] = samples
    v_mid = np.array([q(mid) for q in vpoly])
    base.v = v_mid
    if not ok:
        base.verdict = Verdict.UNKNOWN
        base.caveats.append("adjugate witness failed the sampled positivity check")
    return base


def ergodicity_robust_bimolecular(fam: RobustFamily, Sb: np.ndarray,
                                  per_dim: int = GRID_PER_DIM) -> Certificate:
    """Per-sample LP ``v~^T Sperp >= 1, v~^T Sperp A+(rho) <= -1`` on a grid of
    conversion rates; sufficient only."""
    Sb = np.asarray(Sb)
    if Sb.size == 0:
        return ergodicity_robust(fam)
    Sperp = left_annihilator(Sb).astype(float)
    r, d = Sperp.shape
    points = fam.grid(per_dim) if fam.cv else [{}]
    cert = Certificate(Framework.ROBUST, Property.ERGODICITY_BIMOLECULAR, Verdict.HOLDS,
                       matrices={"Sb": Sb.astype(float), "Sb_perp": Sperp},
                       details={"v_on": "A_plus", "kernel": "Sb", "grid_points": len(points)})
    cert.caveats.append(f"conversion rates checked on a {len(points)}-point grid only; the "
                        "condition between grid points is not certified")
    samples = []
    for pt in points:
        A = fam.plus.evaluate(pt)
        p = linopt.LinearFeasibilityProblem(r)
        for j in range(d):
            p.add_lb(Sperp[:, j], 1.0)
        M = Sperp @ A
        for j in range(d):
            p.add_ub(M[:, j], -1.0)
        res = linopt.solve_feasibility(p)
        if not res.feasible:
            cert.verdict = Verdict.UNKNOWN
            cert.counterexample = {"cv_point": pt}
            cert.caveats.append("no kernel-compatible witness at the reported grid point; the "
                                "test is only sufficient, so ergodicity is left undecided")
            return cert
        samples.append({"cv_point": pt, "v": Sperp.T @ res.x})
    mid = points[len(points) // 2]
    cert.details["cv_point"] = mid
    cert.details["samples"] = samples
    cert.matrices["A_plus"] = fam.plus.evaluate(mid)
    cert.v = samples[len(points) // 2]["v"]
    return cert


def output_controllability_robust(fam: RobustFamily, spec: ControlSpec) -> Certificate:
    return controllability_certificate(fam.A_minus, spec.actuated, spec.controlled,
                                       Framework.ROBUST, "A_minus")


def aic_robust(fam: RobustFamily, spec: ControlSpec, irreducible: bool = False) -> Certificate:
    erg = ergodicity_robust(fam)
    oc = output_controllability_robust(fam, spec)
    verdict = worst([erg.verdict, oc.verdict])
    cert = Certificate(Framework.ROBUST, Property.AIC, verdict, v=erg.v, w=oc.w,
                       mu_shift=oc.mu_shift,
                       matrices={**erg.matrices, **oc.matrices},
                       details={"v_on": "A_plus", "w_on": "A_minus", "actuated": spec.actuated,
                                "controlled": spec.controlled,
                                "cv_point": erg.details.get("cv_point", {}),
                                "samples": erg.details.get("samples", [])},
                       caveats=erg.caveats + oc.caveats, irreducible_asserted=irreducible,
                       sub=[erg, oc])
    if verdict is Verdict.FAILS:
        cert.counterexample = {"failed": [c.property.value for c in (erg, oc)
                                          if c.verdict is Verdict.FAILS]}
    if verdict is Verdict.HOLDS and fam.b0_upper is not None:
        bounds = []
        points = fam.grid() if fam.cv else [{}]
        for pt in points:
            b, _, _, _ = tightest_setpoint_bound(fam.plus.evaluate(pt), fam.b0_upper,
                                                 spec.controlled)
            bounds.append(b)
        cert.setpoint_bound = float(max(bounds))
        cert.details["setpoint_grid_points"] = len(points)
        cert.caveats.append("set-point bound: fixed-parameter bound evaluated on a grid of "
                            "conversion rates with worst-case zeroth-order rates, maximum "
                            "reported; not certified between grid points")
    if not irreducible:
        cert.caveats.append("closed-loop irreducibility was not asserted; the tracking "
                            "conclusion is conditional on it")
    return cert
