"""Sign framework: every matrix sharing the sign pattern of ``A``."""

from __future__ import annotations

import numpy as np

from ..model import SignMatrix
from .certificate import Certificate, ControlSpec, Framework, Property, Verdict
from .nominal import aic_certificate, controllability_certificate, stability_certificate


def find_cycle(M: np.ndarray) -> list[int] | None:
    """A directed cycle (edge ``m -> n`` iff ``M[n, m] != 0``, ``m != n``)."""
    M = np.asarray(M)
    d = M.shape[0]
    succ = [[int(n) for n in np.flatnonzero(M[:, m]) if n != m] for m in range(d)]
    color = [0] * d  # 0 new, 1 on stack, 2 done
    parent = [-1] * d
    for root in range(d):
        if color[root]:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
                continue
            if color[nxt] == 0:
                color[nxt] = 1
                parent[nxt] = node
                stack.append((nxt, iter(succ[nxt])))
            elif color[nxt] == 1:
                cycle = [node]
                while cycle[-1] != nxt:
                    cycle.append(parent[cycle[-1]])
                return cycle[::-1]
    return None


def is_acyclic(M: np.ndarray) -> bool:
    return find_cycle(M) is None


def _mixed_diagonal(S: SignMatrix) -> list[int]:
    return [i for i, j in S.mixed if i == j]


def ergodicity_sign(S: SignMatrix, species: tuple[str, ...] | None = None) -> Certificate:
    """Two independent tests on ``sgn(S_A)``: the Hurwitz LP, and a negative
    diagonal with an acyclic off-diagonal digraph."""
    sgn = S.sgn()
    mixed = _mixed_diagonal(S)
    if mixed:
        cert = Certificate(Framework.SIGN, Property.ERGODICITY, Verdict.FAILS,
                           matrices={"sgn_A": sgn}, details={"v_on": "sgn_A"})
        cert.counterexample = {"mixed_diagonal": mixed}
        cert.caveats.append("diagonal entries mix production and consumption terms; the "
                            "qualitative class then contains matrices with a nonnegative "
                            "diagonal entry, which are never Hurwitz")
        return cert
    cert = stability_certificate(sgn, Framework.SIGN, "sgn_A")
    diag_ok = bool(np.all(np.diag(S.entries) == -1))
    cycle = find_cycle(S.entries)
    graph_ok = diag_ok and cycle is None
    cert.details["graph_test"] = graph_ok
    if (cert.verdict is Verdict.HOLDS) != graph_ok:
        cert.verdict = Verdict.UNKNOWN
        cert.caveats.append("LP and graph tests disagree on the sign pattern")
        return cert
    if cert.verdict is Verdict.FAILS:
        ce = {"lambda_pf": cert.counterexample.get("lambda_pf")}
        if not diag_ok:
            ce["nonnegative_diagonal"] = [int(i) for i in np.flatnonzero(np.diag(S.entries) != -1)]
        if cycle is not None:
            ce["cycle"] = cycle
            if species is not None:
                ce["cycle_species"] = [species[i] for i in cycle]
        cert.counterexample = ce
    return cert


def output_controllability_sign(S: SignMatrix, spec: ControlSpec) -> Certificate:
    cert = controllability_certificate(S.sgn(), spec.actuated, spec.controlled,
                                       Framework.SIGN, "sgn_A")
    if S.mixed:
        cert.caveats.append(f"mixed-sign entries {list(S.mixed)} treated as nonzero")
    return cert


def aic_sign(S: SignMatrix, spec: ControlSpec, irreducible: bool = False) -> Certificate:
    mixed = _mixed_diagonal(S)
    if mixed:
        erg = ergodicity_sign(S)
        cert = Certificate(Framework.SIGN, Property.AIC, Verdict.FAILS,
                           matrices={"sgn_A": S.sgn()}, sub=[erg],
                           counterexample={"failed": ["Ergodicity"], "mixed_diagonal": mixed},
                           irreducible_asserted=irreducible)
        return cert
    sgn = S.sgn()
    return aic_certificate(sgn, sgn, None, spec, Framework.SIGN, "sgn_A", "sgn_A", irreducible)
