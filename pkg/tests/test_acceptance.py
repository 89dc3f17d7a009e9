"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
in the terminal summary (see conftest)."""

import functools
import hashlib
import json
import re
import time

import numpy as np
import pytest

from ergocert import linopt, parse_network
from ergocert.analysis import (ControlSpec, Property, Verdict, certify, check_certificate,
                               graph_path, output_controllability, rank_row_controllable)
from ergocert.analysis.interval import ergodicity_interval
from ergocert.analysis.robust import reduce_to_cv
from ergocert.analysis.structural import a_one, catalytic_coupling, unit_conversion_columns
from ergocert.cli import main
from ergocert.model import IntervalMatrix, build_model, interval_bounds, reduce_bimolecular
from ergocert.sim import build_closed_loop, ensemble_means, moment_ode

from networks import (BIRTH_DEATH, FIXTURES, FOUR_SPECIES, FOUR_SPECIES_DOMAINS, domain_lines,
                      random_metzler, random_unimolecular)

ERG = (Property.ERGODICITY,)
OC = (Property.OUTPUT_CONTROLLABILITY,)
X4 = ControlSpec(0, 3)


def four_species_text(**domains) -> str:
    return FOUR_SPECIES + domain_lines({**FOUR_SPECIES_DOMAINS, **domains})


def conversion_text(lo, hi) -> str:
    return ("X1 -> 0 @ r1\nX1 -> X2 @ r2\nX2 -> 0 @ r3\nX2 -> X1 @ r4\n"
            f"r1 = 1\nr3 = 1\nr2 in [{lo}, {hi}]\nr4 in [{lo}, {hi}]\n")


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text()


class Suite:
    """Verdict checks of one criterion plus every Holds certificate it produced."""

    def __init__(self):
        self.failures: list[str] = []
        self.holds: list[tuple[str, object]] = []
        self.elapsed = 0.0

    def run(self, text, framework, spec=None, properties=ERG):
        certs = certify(parse_network(text), framework, spec, properties=properties)
        self.holds += [(text, c) for c in certs if c.holds]
        return certs[0]

    def expect(self, label: str, got: bool, want: bool) -> None:
        if got != want:
            self.failures.append(f"{label}: expected {want}, got {got}")


def _timed(fn):
    @functools.cache
    def wrapper():
        t0 = time.perf_counter()
        suite = fn()
        suite.elapsed = time.perf_counter() - t0
        return suite
    return wrapper


# criterion 1 ---------------------------------------------------------------


def _oc_predicate(dom):
    return dom["ct1"][0] * dom["cv1"][0] > 0 or dom["ct2"][0] * dom["cv2"][0] > 0


def _erg_robust_predicate(dom):
    return dom["dg1"][0] * dom["dg4"][0] - dom["ct3"][1] * (dom["ct1"][1] + dom["ct2"][1]) > 0


@_timed
def four_species_suite() -> Suite:
    s = Suite()
    base = dict(FOUR_SPECIES_DOMAINS)

    # interval and robust output controllability of X4
    oc_pair = [base, {**base, "ct1": (0, 1), "cv2": (0, 0.6)}]
    for fw, tag in (("interval", "Obs1"), ("robust", "Obs2")):
        for dom in oc_pair:
            cert = s.run(four_species_text(**dom), fw, X4, OC)
            s.expect(f"{tag} {fw} {dom['ct1']} {dom['cv2']}", cert.holds, _oc_predicate(dom))
    # every combination of vanishing lower bounds
    for mask in range(16):
        dom = dict(base)
        for bit, name in enumerate(("ct1", "cv1", "ct2", "cv2")):
            if mask >> bit & 1:
                dom[name] = (0, dom[name][1])
        cert = s.run(four_species_text(**dom), "interval", X4, OC)
        s.expect(f"Obs1 mask {mask}", cert.holds, _oc_predicate(dom))

    # sign and structural output controllability: needs a path X1 -> X4
    for fw, tag in (("sign", "Obs3"), ("structural", "Obs4")):
        for dom, want in ((base, True), ({**base, "ct1": (0, 0), "ct2": (0, 0)}, False)):
            cert = s.run(four_species_text(**dom), fw, X4, OC)
            s.expect(f"{tag} {fw} ct1={dom['ct1']}", cert.holds, want)

    # interval ergodicity: decided by the spectrum of A+
    for ct3 in ((0, 0.1), (0, 5)):
        text = four_species_text(ct3=ct3)
        cert = s.run(text, "interval")
        net = parse_network(text)
        iv = interval_bounds(build_model(net), net.parameter_domains)
        s.expect(f"Erg1 ct3={ct3}", cert.holds, np.linalg.eigvals(iv.upper).real.max() < 0)
    s.expect("Erg1 pair differs", s.run(four_species_text(ct3=(0, 0.1)), "interval").holds,
             not s.run(four_species_text(ct3=(0, 5)), "interval").holds)

    # robust ergodicity: sign of dg1- dg4- - ct3+ (ct1+ + ct2+)
    erg2 = {**base, "dg2": (0, 1), "dg3": (0, 1), "ct4": (0, 0), "ct1": (0.2, 1),
            "ct2": (0.2, 1)}
    for hi in (0.4, 0.6):
        dom = {**erg2, "ct3": (0, hi)}
        cert = s.run(four_species_text(**dom), "robust")
        s.expect(f"Erg2 ct3+={hi}", cert.holds, _erg_robust_predicate(dom))
    s.expect("Erg2 pair", _erg_robust_predicate({**erg2, "ct3": (0, 0.4)}), True)

    # sign and structural ergodicity over the presence of ct3, ct4, cv2, cv3
    for mask in range(16):
        present = {n: bool(mask >> b & 1) for b, n in enumerate(("ct3", "ct4", "cv2", "cv3"))}
        dom = {**base, **{n: (0, 0) for n, on in present.items() if not on}}
        text = four_species_text(**dom)
        no_feedback = not present["ct3"] and not present["ct4"]
        s.expect(f"Erg3 {present}", s.run(text, "sign").holds,
                 no_feedback and not (present["cv2"] and present["cv3"]))
        s.expect(f"Erg4 {present}", s.run(text, "structural").holds, no_feedback)
    return s


def test_criterion_1_four_species_fixtures():
    s = four_species_suite()
    assert not s.failures, s.failures
    assert s.elapsed < 5.0


# criterion 2 ---------------------------------------------------------------


@_timed
def sir_suite() -> Suite:
    s = Suite()
    sir = fixture_text("sir.net")
    structural = s.run(sir, "structural")
    s.expect("structural holds", structural.holds, True)
    s.expect("structural on reduced system",
             structural.property is Property.ERGODICITY_BIMOLECULAR, True)
    sign = s.run(sir, "sign")
    s.expect("sign fails", sign.verdict is Verdict.FAILS, True)
    s.expect("sign 2-cycle", len(sign.counterexample["cycle"]) == 2, True)
    interval = s.run(fixture_text("sir_interval.net"), "interval")
    s.expect("interval fails", interval.verdict is Verdict.FAILS, True)
    return s


def test_criterion_2_sir():
    s = sir_suite()
    assert not s.failures, s.failures
    assert s.elapsed < 1.0


# criterion 3 ---------------------------------------------------------------


@_timed
def conversion_suite() -> Suite:
    s = Suite()
    # the fixture file has the [1, 3] box; [1, 4] yields the off-diagonal 4
    for text, upper, lam in ((fixture_text("conversion2.net"), [[-2, 3], [3, -2]], 1.0),
                             (conversion_text(1, 4), [[-2, 4], [4, -2]], 2.0)):
        cert = s.run(text, "interval")
        s.expect(f"A+ {upper}", np.array_equal(cert.matrices["A_plus"], upper), True)
        s.expect(f"A+ {upper} fails", cert.verdict is Verdict.FAILS, True)
        s.expect(f"A+ {upper} lambda", abs(cert.counterexample["lambda_pf"] - lam) < 1e-7, True)
        s.expect(f"robust {upper}", s.run(text, "robust").holds, True)
        s.expect(f"structural {upper}", s.run(text, "structural").holds, True)
    half = fixture_text("halfopen.net")
    spec = ControlSpec(0, 1)
    s.expect("half-open structural OC", s.run(half, "structural", spec, OC).holds, True)
    s.expect("half-open interval OC", s.run(half, "interval", spec, OC).holds, False)
    return s


def test_criterion_3_conversion_examples():
    s = conversion_suite()
    assert not s.failures, s.failures
    assert s.elapsed < 1.0


# criterion 4 ---------------------------------------------------------------


STRUCTURAL_FIXTURES = (
    [BIRTH_DEATH, fixture_text("ex82.net"), fixture_text("conversion2.net"),
     fixture_text("halfopen.net"), fixture_text("sir.net"), fixture_text("sir_interval.net")]
    + [four_species_text(**{n: (0, 0) for b, n in enumerate(("ct3", "ct4", "cv2", "cv3"))
                            if mask >> b & 1}) for mask in range(16)]
)


def _structural_model(text):
    model = build_model(parse_network(text).without_null_reactions())
    if model.dec.Sb.shape[1]:
        model = reduce_bimolecular(model).model
    return model


@_timed
def oracle_suite() -> Suite:
    s = Suite()
    rng = np.random.default_rng(20261016)

    # (a) Hurwitz LP against PF bisection
    for i in range(500):
        M = random_metzler(rng, int(rng.integers(1, 7)))
        lam = linopt.pf_eigenvalue(M)
        if abs(lam) > 1e-6:
            s.expect(f"(a) matrix {i}", linopt.is_hurwitz_metzler(M).hurwitz, lam < 0)

    # (b) controllability: LP, rank row and graph path
    for i in range(500):
        d = int(rng.integers(1, 7))
        A = random_metzler(rng, d, density=0.3)
        a, c = int(rng.integers(d)), int(rng.integers(d))
        lp = output_controllability(A, ControlSpec(a, c)).holds
        s.expect(f"(b) system {i} rank", rank_row_controllable(A, a, c), lp)
        s.expect(f"(b) system {i} graph", graph_path(A, a, c), lp)

    # (c) A+ decides the family; A+ and A- are members
    for i in range(50):
        d = int(rng.integers(1, 6))
        upper = random_metzler(rng, d)
        if abs(np.linalg.eigvals(upper).real.max()) < 1e-6:
            upper = upper - 0.1 * np.eye(d)
        lower = upper - rng.uniform(0, 0.5, (d, d))
        off = ~np.eye(d, dtype=bool)
        lower[off] = np.maximum(lower[off], 0)
        members = [upper, lower] + [lower + rng.uniform(size=(d, d)) ** 0.25 * (upper - lower)
                                    for _ in range(198)]
        family = all(np.linalg.eigvals(M).real.max() < 0 for M in members)
        s.expect(f"(c) family {i}", ergodicity_interval(IntervalMatrix(lower, upper)).holds,
                 family)

    # (d) spectral/nilpotency reading against the two LPs
    for i, text in enumerate(STRUCTURAL_FIXTURES):
        model = _structural_model(text)
        if not unit_conversion_columns(model):
            continue
        A1 = a_one(model)
        spectral = np.linalg.eigvals(A1).real.max() < 0
        lp = linopt.is_hurwitz_metzler(A1).hurwitz
        s.expect(f"(d) fixture {i} A_1", spectral, lp)
        if spectral:
            N = catalytic_coupling(model, A1)
            n = N.shape[0]
            spectral = n == 0 or not np.any(np.linalg.matrix_power(N, n))
            lp = n == 0 or linopt.is_hurwitz_metzler(N - np.eye(n)).hurwitz
        s.expect(f"(d) fixture {i}", spectral, lp)
        cert = s.run(text, "structural")
        s.expect(f"(d) fixture {i} verdict", cert.holds, lp)
    return s


def test_criterion_4_oracle_equivalences():
    s = oracle_suite()
    assert not s.failures, s.failures
    assert s.elapsed < 60.0


# criterion 5 ---------------------------------------------------------------


RESIDUAL = re.compile(r"residual (\S+)")


def test_criterion_5_certificate_self_verification(tmp_path, capsys):
    by_network: dict[str, list] = {}
    suites = (four_species_suite(), sir_suite(), conversion_suite(), oracle_suite())
    assert all(suite.holds for suite in suites)
    for suite in suites:
        for text, cert in suite.holds:
            by_network.setdefault(text, []).append(cert)
    capsys.readouterr()
    for i, (text, certs) in enumerate(by_network.items()):
        net_path = tmp_path / f"net{i}.net"
        net_path.write_text(text)
        net = parse_network(text)
        for c in certs:
            res = check_certificate(c, net)
            assert res.ok and res.residual < 1e-8, (text, c.summary(), res.violations)
        report = {"network": {"sha256": hashlib.sha256(net_path.read_bytes()).hexdigest()},
                  "frameworks": {"all": {"certificates": [c.to_dict() for c in certs]}}}
        cert_path = tmp_path / f"cert{i}.json"
        cert_path.write_text(json.dumps(report))
        assert main(["verify", str(cert_path), str(net_path)]) == 0
        out = capsys.readouterr().out
        residuals = [float(r) for r in RESIDUAL.findall(out)]
        assert len(residuals) == len(certs)
        assert max(residuals) < 1e-8


# criterion 6 ---------------------------------------------------------------


def test_criterion_6_robust_adjugate_witness():
    dom = {**FOUR_SPECIES_DOMAINS, "dg2": (0, 1), "dg3": (0, 1), "ct4": (0, 0),
           "ct1": (0.2, 1), "ct2": (0.2, 1), "ct3": (0, 0.4)}
    net = parse_network(four_species_text(**dom))
    cert = certify(net, "robust")[0]
    assert cert.holds
    assert cert.details["v_poly_degree"] <= 3
    fam = reduce_to_cv(build_model(net), net.parameter_domains)
    samples = cert.details["samples"]
    assert len(samples) == 100
    d = fam.d
    for sample in samples:
        pt, v = sample["cv_point"], np.asarray(sample["v"])
        A = fam.plus.evaluate(pt)
        for s, (lo, hi) in fam.cv_box.items():
            assert lo <= pt[s] <= hi
        # (-1)^(d+1) 1^T adj(A) = (-1)^(d+1) det(A) 1^T A^-1
        ref = (-1) ** (d + 1) * np.linalg.det(A) * np.linalg.solve(A.T, np.ones(d))
        np.testing.assert_allclose(v, ref, rtol=1e-9, atol=1e-12)
        assert np.all(v > 0)
        assert np.all(v @ A < 0)


# criterion 7 ---------------------------------------------------------------


@pytest.fixture(scope="module")
def tracking_runs():
    t0 = time.perf_counter()
    net = parse_network(BIRTH_DEATH)
    runs = []
    for eta, k in ((1, 1), (10, 0.5), (0.1, 2)):
        spec = ControlSpec(0, 0, mu=3, theta=1, eta=eta, k=k)
        bound = certify(net, "nominal", spec, properties=(Property.AIC,))[0]
        stats = ensemble_means(build_closed_loop(net, spec), [0, 0, 0], 200.0, 1000, 11,
                               base_seed=7)
        runs.append((eta, k, bound, stats.terminal_mean("X1")))
    return runs, time.perf_counter() - t0


def test_criterion_7_closed_loop_tracking(tracking_runs):
    runs, elapsed = tracking_runs
    for eta, k, bound, (mean, hw) in runs:
        assert bound.holds and bound.setpoint_bound < 3, (eta, k, bound.setpoint_bound)
        assert abs(mean - 3) <= max(0.3, 3 * hw), (eta, k, mean, hw)
    assert elapsed < 120.0


# criterion 8 ---------------------------------------------------------------


def test_criterion_8_moment_consistency():
    rng = np.random.default_rng(8)
    networks = []
    while len(networks) < 10:
        net = random_unimolecular(rng, int(rng.integers(1, 5)))
        A, b0 = build_model(net).evaluate(net.fixed_values())
        lam = float(np.linalg.eigvals(A).real.max())
        if lam < -0.05:
            networks.append((net, A, b0, lam))
    for idx, (net, A, b0, lam) in enumerate(networks):
        t_end = 25.0 / abs(lam)
        steps = 1000
        t, m = moment_ode(net, [0] * net.d, t_end, steps=steps)
        np.testing.assert_allclose(m[-1], -np.linalg.solve(A, b0), atol=1e-6)
        picks = [steps * q // 5 for q in range(1, 6)]
        stats = ensemble_means(net, [0] * net.d, t_end, 500, [t[p] for p in picks],
                               base_seed=100 + idx)
        for row, p in enumerate(picks):
            gap = np.abs(stats.mean[row] - m[p])
            assert np.all(gap <= 3 * stats.half_width[row] + 1e-9), (idx, t[p], gap,
                                                                      stats.half_width[row])
