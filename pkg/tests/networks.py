"""Network builders and random matrix generators shared by the test modules."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ergocert import parse_network
from ergocert.model import ReactionNetwork

FIXTURES = Path(__file__).parent / "fixtures"

BIRTH_DEATH = "0 -> X1 @ kb\nX1 -> 0 @ kd\nkb = 2.0\nkd = 1.0\n"

# four-species network: X1 drives X2 and X3 catalytically, both convert
# into X4, and X4 feeds back on X1
FOUR_SPECIES = """\
0 -> X1 @ b1
X1 -> 0 @ dg1
X1 -> X1 + X2 @ ct1
X1 -> X1 + X3 @ ct2
X2 -> 0 @ dg2
X2 -> X4 @ cv1
X3 -> 0 @ dg3
X3 -> X4 @ cv2
X3 -> 2 X3 @ ct4
X4 -> 0 @ dg4
X4 -> X3 @ cv3
X4 -> X4 + X1 @ ct3
"""

FOUR_SPECIES_DOMAINS = dict(b1=(1, 1), dg1=(1, 2), dg2=(1, 2), dg3=(1, 2), dg4=(1, 2),
                            ct1=(0.5, 1), ct2=(0.5, 1), ct3=(0, 0.1), ct4=(0, 0.1),
                            cv1=(0.5, 0.6), cv2=(0.5, 0.6), cv3=(0.5, 0.6))


def domain_lines(domains: dict) -> str:
    lines = []
    for s, (lo, hi) in domains.items():
        if lo == hi and lo > 0:
            lines.append(f"{s} = {lo}")
        else:
            lines.append(f"{s} in [{lo}, {hi}]")
    return "\n".join(lines) + "\n"


def four_species(**domains) -> ReactionNetwork:
    """The four-species network with selected domains overridden; a domain
    of ``(0, 0)`` removes the reaction."""
    return parse_network(FOUR_SPECIES + domain_lines({**FOUR_SPECIES_DOMAINS, **domains}))


def two_species_conversion(lo: float = 1, hi: float = 3) -> ReactionNetwork:
    return parse_network("X1 -> 0 @ r1\nX1 -> X2 @ r2\nX2 -> 0 @ r3\nX2 -> X1 @ r4\n"
                         f"r1 = 1\nr3 = 1\nr2 in [{lo}, {hi}]\nr4 in [{lo}, {hi}]\n")


def load(name: str) -> ReactionNetwork:
    from ergocert import load_network
    return load_network(FIXTURES / name)


def random_metzler(rng: np.random.Generator, d: int, density: float = 0.6,
                   shift: float | None = None) -> np.ndarray:
    M = rng.uniform(0, 1, (d, d)) * (rng.uniform(size=(d, d)) < density)
    np.fill_diagonal(M, 0.0)
    if shift is None:
        shift = rng.uniform(0, 2 * max(M.sum(axis=0).max(), 0.5))
    return M - shift * np.eye(d)


def random_unimolecular(rng: np.random.Generator, d: int) -> ReactionNetwork:
    """Random open network of birth, degradation, catalytic and conversion
    reactions with fixed rates."""
    lines, doms = [], []
    k = 0

    def add(text: str, rate: float) -> None:
        nonlocal k
        k += 1
        lines.append(f"{text} @ r{k}")
        doms.append(f"r{k} = {rate:.4g}")

    sp = [f"X{i + 1}" for i in range(d)]
    add(f"0 -> {sp[0]}", rng.uniform(1, 5))
    for s in sp:
        add(f"{s} -> 0", rng.uniform(0.5, 2.0))
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            u = rng.uniform()
            if u < 0.25:
                add(f"{sp[i]} -> {sp[j]}", rng.uniform(0.1, 1.0))
            elif u < 0.4:
                add(f"{sp[i]} -> {sp[i]} + {sp[j]}", rng.uniform(0.05, 0.3))
    return parse_network("\n".join(lines + doms) + "\n")
