"""Run a framework on a network and collect its certificates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..model import (CharacteristicModel, IndeterminateSignError, NotReducibleError,
                     ReactionNetwork, ReducedSystem, UnboundedDomainError,
                     characteristic_model, decompose, has_conversion, interval_bounds,
                     is_open, reduce_bimolecular, sign_pattern)
from . import interval as _interval
from . import nominal as _nominal
from . import robust as _robust
from . import sign as _sign
from . import structural as _structural
from .certificate import (Certificate, ControlSpec, Framework, PreconditionError, Property,
                          Verdict, worst)

FRAMEWORKS = (Framework.NOMINAL, Framework.INTERVAL, Framework.ROBUST, Framework.SIGN,
              Framework.STRUCTURAL)


def parse_framework(name: str) -> Framework:
    for f in Framework:
        if f.value.lower() == name.lower():
            return f
    raise ValueError(f"unknown framework {name!r}")


@dataclass
class Prepared:
    net: ReactionNetwork
    model: CharacteristicModel
    reduced: ReducedSystem | None = None
    reduce_error: str | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def bimolecular(self) -> bool:
        return not self.model.dec.is_unimolecular

    @property
    def domains(self):
        return self.net.parameter_domains


def prepare(net: ReactionNetwork) -> Prepared:
    """Drop reactions pinned to zero rate, check openness, build the model and,
    for bimolecular networks, try the kernel aggregation."""
    pruned = net.without_null_reactions()
    notes = []
    if pruned is not net:
        gone = sorted(set(net.symbols) - set(pruned.symbols))
        notes.append(f"reactions with rate pinned to zero were removed: {gone}")
    dec = decompose(pruned)
    op = is_open(dec)
    if not op:
        conserved = {s: float(z) for s, z in zip(dec.species, op.witness) if z > 0}
        raise PreconditionError(f"network is not open; conserved combination {conserved}")
    model = characteristic_model(dec)
    prep = Prepared(pruned, model, notes=notes)
    if prep.bimolecular:
        try:
            prep.reduced = reduce_bimolecular(model)
        except NotReducibleError as exc:
            prep.reduce_error = str(exc)
    return prep


def nominal_values(net: ReactionNetwork) -> tuple[dict[str, float], list[str]]:
    vals, mids, ones = {}, [], []
    for s, dom in net.parameter_domains.items():
        vals[s] = dom.nominal()
        if dom.kind == "interval" and dom.lo != dom.hi:
            mids.append(f"{s}={vals[s]:g}")
        elif dom.kind == "positive":
            ones.append(s)
    caveats = []
    if mids:
        caveats.append("uncertain rates evaluated at interval midpoints: " + ", ".join(mids))
    if ones:
        caveats.append("rates only known to be positive evaluated at 1: " + ", ".join(ones))
    return vals, caveats


def _dropped_strictly_negative(red: ReducedSystem, box) -> bool:
    """Columns dropped by the aggregation must stay strictly negative over
    the box for the reduced test to be equivalent."""
    P = red.aggregation.P
    class_of = {i: c for c, mem in enumerate(red.aggregation.classes) for i in mem}
    A = red.parent.A
    for j in red.dropped:
        c = class_of[j]
        hi = float(P[c] @ A.constant[:, j])
        for s, coef in A.terms.items():
            k = float(P[c] @ coef[:, j])
            if k:
                lo_s, hi_s = box[s]
                hi += k * (hi_s if k > 0 else lo_s)
        if not hi < 0:
            return False
    return True


def _mark_reduced(cert: Certificate, red: ReducedSystem) -> Certificate:
    cert.property = Property.ERGODICITY_BIMOLECULAR
    cert.details["reduced"] = True
    cert.details["aggregation"] = red.aggregation.P.tolist()
    cert.details["classes"] = list(red.aggregation.names)
    if cert.verdict is Verdict.FAILS:
        cert.caveats.append("verdict refers to the aggregated system on the kernel of S_b: no "
                            "certificate of this framework exists, which does not by itself "
                            "show that the network is non-ergodic")
    return cert


def _conversion_caveat(prep: Prepared, framework: Framework) -> list[str]:
    if framework in (Framework.INTERVAL, Framework.SIGN) and has_conversion(prep.model.dec):
        return ["conversion reactions present: this framework ignores the coupling between "
                "entries and may be conservative"]
    return []


def _unimolecular_only(framework: Framework, prop: Property) -> Certificate:
    return Certificate(framework, prop, Verdict.UNKNOWN,
                       caveats=["the antithetic control results cover unimolecular networks "
                                "only"])


def _ergodicity(prep: Prepared, framework: Framework) -> Certificate:
    model, net = prep.model, prep.net
    red = prep.reduced
    Sb = model.dec.Sb
    if framework is Framework.NOMINAL:
        vals, cav = nominal_values(net)
        A = model.A.evaluate(vals)
        cert = (_nominal.ergodicity_bimolecular_nominal(A, Sb) if prep.bimolecular
                else _nominal.ergodicity_nominal(A))
        cert.caveats += cav
        return cert
    if framework is Framework.INTERVAL:
        if prep.bimolecular:
            box = {s: (d.lo, d.hi) for s, d in net.parameter_domains.items() if d.bounded}
            if red is not None and _bounded(net, red.model.first_order_symbols) and \
                    _bounded(net, model.first_order_symbols) and _dropped_strictly_negative(red, box):
                iv = interval_bounds(red.model, net.parameter_domains)
                return _mark_reduced(_interval.ergodicity_interval(iv), red)
            iv = interval_bounds(model, net.parameter_domains)
            return _interval.ergodicity_interval_bimolecular(iv, Sb)
        iv = interval_bounds(model, net.parameter_domains)
        return _interval.ergodicity_interval(iv)
    if framework is Framework.ROBUST:
        fam = _robust.reduce_to_cv(model, net.parameter_domains)
        if prep.bimolecular:
            return _robust.ergodicity_robust_bimolecular(fam, Sb)
        return _robust.ergodicity_robust(fam)
    if framework is Framework.SIGN:
        if prep.bimolecular:
            if red is None:
                return _no_reduction(framework, prep)
            S = sign_pattern(red.model, allow_mixed=True)
            return _mark_reduced(_sign.ergodicity_sign(S, red.model.species), red)
        S = sign_pattern(model, allow_mixed=True)
        return _sign.ergodicity_sign(S, model.species)
    if framework is Framework.STRUCTURAL:
        if prep.bimolecular:
            if red is None:
                return _no_reduction(framework, prep)
            return _mark_reduced(_structural.ergodicity_structural(red.model), red)
        return _structural.ergodicity_structural(model)
    raise ValueError(framework)


def _bounded(net: ReactionNetwork, symbols) -> bool:
    return all(net.parameter_domains[s].bounded for s in symbols)


def _no_reduction(framework: Framework, prep: Prepared) -> Certificate:
    return Certificate(framework, Property.ERGODICITY_BIMOLECULAR, Verdict.UNKNOWN,
                       caveats=[f"kernel aggregation of S_b unavailable ({prep.reduce_error}); "
                                "this framework has no test for such bimolecular networks"])


def _controllability(prep: Prepared, framework: Framework, spec: ControlSpec) -> Certificate:
    model, net = prep.model, prep.net
    if framework is Framework.NOMINAL:
        vals, cav = nominal_values(net)
        cert = _nominal.output_controllability(model.A.evaluate(vals), spec)
        cert.caveats += cav
        return cert
    if framework is Framework.INTERVAL:
        return _interval.output_controllability_interval(
            interval_bounds(model, net.parameter_domains), spec)
    if framework is Framework.ROBUST:
        return _robust.output_controllability_robust(
            _robust.reduce_to_cv(model, net.parameter_domains), spec)
    if framework is Framework.SIGN:
        return _sign.output_controllability_sign(sign_pattern(model, allow_mixed=True), spec)
    return _structural.output_controllability_structural(model, spec)


def _aic(prep: Prepared, framework: Framework, spec: ControlSpec,
         irreducible: bool) -> Certificate:
    model, net = prep.model, prep.net
    if prep.bimolecular:
        return _unimolecular_only(framework, Property.AIC)
    if framework is Framework.NOMINAL:
        vals, cav = nominal_values(net)
        A, b0 = model.evaluate(vals)
        cert = _nominal.aic_nominal(A, spec, b0, irreducible)
        cert.caveats += cav
        return cert
    if framework is Framework.INTERVAL:
        return _interval.aic_interval(interval_bounds(model, net.parameter_domains), spec,
                                      irreducible)
    if framework is Framework.ROBUST:
        return _robust.aic_robust(_robust.reduce_to_cv(model, net.parameter_domains), spec,
                                  irreducible)
    if framework is Framework.SIGN:
        return _sign.aic_sign(sign_pattern(model, allow_mixed=True), spec, irreducible)
    return _structural.aic_structural(model, spec, irreducible)


def certify(net: ReactionNetwork, framework: Framework | str,
            spec: ControlSpec | None = None, irreducible: bool = False,
            properties: tuple[Property, ...] | None = None) -> list[Certificate]:
    """Ergodicity certificate, plus output controllability and AIC when a
    controller configuration is given.  ``properties`` restricts the output."""
    if isinstance(framework, str):
        framework = parse_framework(framework)
    if properties is None:
        properties = (Property.ERGODICITY,) if spec is None else \
            (Property.ERGODICITY, Property.OUTPUT_CONTROLLABILITY, Property.AIC)
    if spec is None and set(properties) - {Property.ERGODICITY}:
        raise ValueError("output controllability and AIC need a controller configuration")
    prep = prepare(net)
    if spec is not None:
        spec.validate(prep.model.d)
    extra = prep.notes + _conversion_caveat(prep, framework)
    certs = []
    if Property.ERGODICITY in properties:
        certs.append(_ergodicity(prep, framework))
    if Property.OUTPUT_CONTROLLABILITY in properties:
        certs.append(_controllability(prep, framework, spec))
    if Property.AIC in properties:
        certs.append(_aic(prep, framework, spec, irreducible))
    for c in certs:
        c.caveats = extra + c.caveats
        c.irreducible_asserted = irreducible
    return certs


def overall(certs: list[Certificate]) -> Verdict:
    return worst(c.verdict for c in certs)


def certify_all(net: ReactionNetwork, spec: ControlSpec | None = None,
                irreducible: bool = False) -> dict[Framework, list[Certificate] | Exception]:
    """Every framework; frameworks whose preconditions fail map to the error."""
    out: dict[Framework, list[Certificate] | Exception] = {}
    for f in FRAMEWORKS:
        try:
            out[f] = certify(net, f, spec, irreducible)
        except (UnboundedDomainError, IndeterminateSignError, PreconditionError,
                ArithmeticError, ValueError) as exc:
            out[f] = exc
    return out


def verdict_table(results: dict[Framework, list[Certificate] | Exception]) -> str:
    props = [Property.ERGODICITY, Property.OUTPUT_CONTROLLABILITY, Property.AIC]
    header = f"{'framework':<12}" + "".join(f"{p.value:<24}" for p in props)
    lines = [header, "-" * len(header)]
    for f, res in results.items():
        row = f"{f.value:<12}"
        if isinstance(res, Exception):
            row += f"not applicable: {res}"
        else:
            by = {}
            for c in res:
                key = Property.ERGODICITY if c.property is Property.ERGODICITY_BIMOLECULAR \
                    else c.property
                by[key] = c.verdict.value
            row += "".join(f"{by.get(p, '-'):<24}" for p in props)
        lines.append(row)
    return "\n".join(lines)


def recompute_matrices(net: ReactionNetwork, cert: Certificate) -> dict[str, np.ndarray]:
    """Rebuild a certificate's test matrices from the network without any
    optimisation (used by the independent checker)."""
    prep = prepare(net)
    model = prep.model
    f = cert.framework
    details = cert.details
    if details.get("reduced"):
        if prep.reduced is None:
            raise ValueError("certificate refers to an aggregated system the network lacks")
        model = prep.reduced.model
    out: dict[str, np.ndarray] = {}
    if not model.dec.is_unimolecular or "Sb" in cert.matrices:
        out["Sb"] = prep.model.dec.Sb.astype(float)
    if f is Framework.NOMINAL:
        vals, _ = nominal_values(prep.net)
        A, b0 = model.evaluate(vals)
        out["A"] = A
        out["b0"] = b0
    elif f is Framework.INTERVAL:
        iv = interval_bounds(model, prep.net.parameter_domains)
        out["A_plus"], out["A_minus"] = iv.upper, iv.lower
        if iv.b0_upper is not None:
            out["b0_plus"] = iv.b0_upper
    elif f is Framework.ROBUST:
        fam = _robust.reduce_to_cv(model, prep.net.parameter_domains)
        out["A_plus"] = fam.plus.evaluate(details.get("cv_point", {}) or fam.midpoint())
        out["A_minus"] = fam.A_minus
        if "Sb" in cert.matrices:
            from ..model import left_annihilator
            out["Sb_perp"] = left_annihilator(prep.model.dec.Sb).astype(float)
    elif f is Framework.SIGN:
        out["sgn_A"] = sign_pattern(model, allow_mixed=True).sgn()
    else:
        if "A_one" in cert.matrices and "sample_rates" in details:
            rates = details["sample_rates"]
            out["A_one"] = _structural.a_one(model, {s: rates[s] for s in model.cv},
                                             {s: rates[s] for s in model.dg})
        else:
            A1 = _structural.a_one(model)
            out["A_one"] = A1
            if "N_minus_I" in cert.matrices:
                N = _structural.catalytic_coupling(model, A1)
                out["N_minus_I"] = N - np.eye(N.shape[0])
        out["sgn_A"] = sign_pattern(model, allow_mixed=True).sgn()
    return out


def robust_family_for(net: ReactionNetwork) -> _robust.RobustFamily:
    prep = prepare(net)
    return _robust.reduce_to_cv(prep.model, prep.net.parameter_domains)
