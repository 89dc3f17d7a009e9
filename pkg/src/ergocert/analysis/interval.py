"""Interval framework: every entry of ``A`` ranges independently in
``[A-, A+]``.  Stability is decided on ``A+``, controllability on ``A-``."""

from __future__ import annotations

import itertools

import numpy as np

from .. import linopt
from ..model import IntervalMatrix
from .certificate import Certificate, ControlSpec, Framework, Property, Verdict
from .nominal import (aic_certificate, controllability_certificate,
                      kernel_stability_certificate, stability_certificate)

MAX_VERTICES = 4096
MAX_GRID = 6561
RANDOM_DELTAS = 2000


def _warnings_for(iv: IntervalMatrix, side: str) -> list[str]:
    return [w for w in iv.warnings if w.startswith(side)]


def ergodicity_interval(iv: IntervalMatrix) -> Certificate:
    cert = stability_certificate(iv.upper, Framework.INTERVAL, "A_plus")
    cert.caveats += _warnings_for(iv, "upper")
    if cert.verdict is Verdict.FAILS:
        cert.counterexample["witness"] = "A_plus itself is a member of the closure and is unstable"
    return cert


def ergodicity_interval_bimolecular(iv: IntervalMatrix, Sb: np.ndarray) -> Certificate:
    cert = kernel_stability_certificate(iv.upper, Sb, Framework.INTERVAL, "A_plus")
    cert.caveats += _warnings_for(iv, "upper")
    return cert


def output_controllability_interval(iv: IntervalMatrix, spec: ControlSpec) -> Certificate:
    cert = controllability_certificate(iv.lower, spec.actuated, spec.controlled,
                                       Framework.INTERVAL, "A_minus")
    cert.caveats += _warnings_for(iv, "lower")
    return cert


def _delta_points(gap: np.ndarray, rng: np.random.Generator) -> tuple[list[np.ndarray], str | None]:
    idx = [tuple(ix) for ix in np.argwhere(gap > 0)]
    m = len(idx)
    note = None
    pts: list[np.ndarray] = []

    def make(coords):
        D = np.zeros_like(gap)
        for (i, j), c in zip(idx, coords):
            D[i, j] = c * gap[i, j]
        return D

    if 2 ** m <= MAX_VERTICES:
        pts += [make(c) for c in itertools.product((0.0, 1.0), repeat=m)]
    else:
        note = f"{2 ** m} vertices of the entry box; {RANDOM_DELTAS} random vertices used"
        pts += [make(rng.integers(0, 2, m).astype(float)) for _ in range(RANDOM_DELTAS)]
        pts += [make(np.zeros(m)), make(np.ones(m))]
    if 3 ** m <= MAX_GRID:
        pts += [make(c) for c in itertools.product((0.0, 0.5, 1.0), repeat=m)
                if 0.5 in c]
    else:
        extra = f"3-level grid too large; {RANDOM_DELTAS} random interior points used"
        note = extra if note is None else note + "; " + extra
        pts += [make(rng.random(m)) for _ in range(RANDOM_DELTAS)]
    return pts, note


def setpoint_bound_interval(iv: IntervalMatrix, b_plus: np.ndarray, controlled: int,
                            seed: int = 0) -> tuple[float, float, dict]:
    """Largest ratio ``q'(A+ - D)^-1 b+ / (alpha q'(A+ - D)^-1 e_l)`` over
    sampled ``D`` in ``[0, A+ - A-]`` with ``q = 1`` and the largest
    ``alpha`` keeping ``q'(alpha (A+ - D)^-1 + I) >= 0`` at every sample."""
    Ap = np.asarray(iv.upper, dtype=float)
    gap = Ap - np.asarray(iv.lower, dtype=float)
    pts, note = _delta_points(gap, np.random.default_rng(seed))
    d = Ap.shape[0]
    q = np.ones(d)
    rows = []
    alpha = np.inf
    for D in pts:
        inv = linopt.gauss_inverse(Ap - D)
        r = q @ inv  # nonpositive
        rows.append(r)
        alpha = min(alpha, 1.0 / np.max(-r))
    bound = -np.inf
    for r in rows:
        num = r @ b_plus
        den = alpha * r[controlled]
        if den == 0:
            return np.inf, alpha, {"deltas": len(pts), "note": note}
        bound = max(bound, num / den)
    return float(bound), float(alpha), {"deltas": len(pts), "note": note}


def aic_interval(iv: IntervalMatrix, spec: ControlSpec, irreducible: bool = False) -> Certificate:
    cert = aic_certificate(iv.upper, iv.lower, None, spec, Framework.INTERVAL,
                           "A_plus", "A_minus", irreducible)
    cert.caveats += iv.warnings
    if cert.verdict is Verdict.HOLDS and iv.b0_upper is not None:
        b_plus = np.asarray(iv.b0_upper, dtype=float)
        if not np.all(np.isfinite(b_plus)):
            cert.setpoint_bound = float("inf")
            cert.caveats.append("a zeroth-order rate is unbounded, so no finite set-point "
                                "bound is available")
        else:
            bound, alpha, info = setpoint_bound_interval(iv, b_plus, spec.controlled)
            cert.setpoint_bound = bound
            cert.alpha = alpha
            cert.matrices["b0_plus"] = b_plus
            cert.details["setpoint_samples"] = info["deltas"]
            cert.caveats.append("set-point bound maximised over vertices and a grid of the "
                                "entry box only; it may be optimistic between samples")
            if info["note"]:
                cert.caveats.append(info["note"])
    return cert


def family_sample(iv: IntervalMatrix, rng: np.random.Generator) -> np.ndarray:
    """A random member of ``[A-, A+]``."""
    return iv.lower + rng.random(iv.lower.shape) * (iv.upper - iv.lower)
