"""Reaction networks: DSL parsing, stoichiometry, characteristic matrices.

A network file is line oriented. Reactions and parameter domains live in the
same file, ``#`` starts a comment::

    0 -> X1 @ kb          # zeroth order production
    X1 -> 0 @ kd
    X1 + X2 -> 2 X2 @ k2  # at most bimolecular
    kb = 2.0
    kd in [0.5, 1]
    k2 > 0

Species are ordered by first appearance. All matrices use that order.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import linopt

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TERM_RE = re.compile(rf"^\s*(\d+)?\s*({_IDENT})\s*$")
_FIXED_RE = re.compile(rf"^\s*({_IDENT})\s*=\s*({_NUMBER})\s*$")
_INTERVAL_RE = re.compile(
    rf"^\s*({_IDENT})\s+in\s*([\[(])\s*({_NUMBER})\s*,\s*({_NUMBER})\s*([\])])\s*$")
_POSITIVE_RE = re.compile(rf"^\s*({_IDENT})\s*>\s*0(?:\.0*)?\s*$")


class NetworkError(ValueError):
    """Invalid network content (not a syntax problem)."""


class ParseError(NetworkError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class IndeterminateSignError(ValueError):
    """Some entry of the characteristic matrix mixes positive and negative
    coefficients, so its sign is not fixed by the network structure."""

    def __init__(self, entries: Sequence[tuple[int, int]]):
        self.entries = list(entries)
        super().__init__(f"mixed-sign characteristic entries at {self.entries}")


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class ParameterDomain:
    kind: str  # "fixed" | "interval" | "positive"
    lo: float = 0.0
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = True

    @classmethod
    def fixed(cls, value: float) -> "ParameterDomain":
        if not value > 0 or not math.isfinite(value):
            raise NetworkError(f"fixed rate must be positive and finite, got {value}")
        return cls("fixed", value, value, True, True)

    @classmethod
    def interval(cls, lo: float, hi: float, lo_closed: bool = True,
                 hi_closed: bool = True) -> "ParameterDomain":
        if not (0 <= lo <= hi < math.inf):
            raise NetworkError(f"interval needs 0 <= lo <= hi < inf, got [{lo}, {hi}]")
        if lo == hi and not (lo_closed and hi_closed):
            raise NetworkError(f"degenerate half-open interval at {lo}")
        return cls("interval", lo, hi, lo_closed, hi_closed)

    @classmethod
    def positive(cls) -> "ParameterDomain":
        return cls("positive", 0.0, math.inf, False, False)

    @property
    def value(self) -> float:
        if self.kind != "fixed":
            raise AttributeError("only fixed domains carry a value")
        return self.lo

    @property
    def bounded(self) -> bool:
        return self.kind != "positive"

    @property
    def is_null(self) -> bool:
        """The rate is pinned to zero, i.e. the reaction is switched off."""
        return self.kind == "interval" and self.hi == 0.0

    @property
    def closed(self) -> bool:
        return self.lo_closed and self.hi_closed

    def nominal(self) -> float:
        if self.kind == "positive":
            return 1.0
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        if self.kind == "positive":
            return x > 0
        lo_ok = x >= self.lo if self.lo_closed else x > self.lo
        hi_ok = x <= self.hi if self.hi_closed else x < self.hi
        return lo_ok and hi_ok

    def __str__(self) -> str:
        if self.kind == "fixed":
            return f"= {self.lo!r}"
        if self.kind == "positive":
            return "> 0"
        return (f"in {'[' if self.lo_closed else '('}{self.lo!r}, "
                f"{self.hi!r}{']' if self.hi_closed else ')'}")


@dataclass(frozen=True)
class Reaction:
    reactants: tuple[tuple[str, int], ...]
    products: tuple[tuple[str, int], ...]
    rate: str

    @property
    def order(self) -> int:
        return sum(c for _, c in self.reactants)

    def __str__(self) -> str:
        def fmt(cx):
            if not cx:
                return "0"
            return " + ".join(f"{c} {s}" if c > 1 else s for s, c in cx)
        return f"{fmt(self.reactants)} -> {fmt(self.products)} @ {self.rate}"


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    parameter_domains: Mapping[str, ParameterDomain]
    source: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        idx = set(self.species)
        if len(idx) != len(self.species):
            raise NetworkError("duplicate species")
        seen: set[str] = set()
        for r in self.reactions:
            for s, c in r.reactants + r.products:
                if s not in idx:
                    raise NetworkError(f"species {s!r} is not declared")
                if c < 0:
                    raise NetworkError("negative stoichiometric count")
            if r.order > 2:
                raise NetworkError(f"reaction {r} is not at most bimolecular")
            if r.rate in seen:
                raise NetworkError(f"rate symbol {r.rate!r} used by more than one reaction")
            seen.add(r.rate)
            if r.rate not in self.parameter_domains:
                raise NetworkError(f"rate symbol {r.rate!r} has no domain")
        extra = set(self.parameter_domains) - seen
        if extra:
            raise NetworkError(f"domains declared for unused symbols {sorted(extra)}")

    @property
    def d(self) -> int:
        return len(self.species)

    @property
    def K(self) -> int:
        return len(self.reactions)

    @property
    def symbols(self) -> list[str]:
        return [r.rate for r in self.reactions]

    def index(self, name: str | int) -> int:
        if isinstance(name, (int, np.integer)):
            if not 0 <= name < self.d:
                raise IndexError(f"species index {name} out of range")
            return int(name)
        try:
            return self.species.index(name)
        except ValueError:
            raise KeyError(f"unknown species {name!r}") from None

    def nominal_values(self) -> dict[str, float]:
        return {s: dom.nominal() for s, dom in self.parameter_domains.items()}

    def fixed_values(self) -> dict[str, float]:
        """Rates for simulation; every domain must pin a single value."""
        out = {}
        for s, dom in self.parameter_domains.items():
            if dom.kind == "positive" or dom.lo != dom.hi:
                raise NetworkError(f"rate {s!r} is not fixed ({dom})")
            out[s] = dom.lo
        return out

    def without_null_reactions(self) -> "ReactionNetwork":
        keep = [r for r in self.reactions if not self.parameter_domains[r.rate].is_null]
        if len(keep) == len(self.reactions):
            return self
        doms = {r.rate: self.parameter_domains[r.rate] for r in keep}
        return ReactionNetwork(self.species, tuple(keep), doms)

    def with_domains(self, updates: Mapping[str, ParameterDomain]) -> "ReactionNetwork":
        doms = dict(self.parameter_domains)
        doms.update(updates)
        return ReactionNetwork(self.species, self.reactions, doms)

    def to_text(self) -> str:
        lines = [str(r) for r in self.reactions]
        lines += [f"{s} {dom}" for s, dom in self.parameter_domains.items()]
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        text = self.source if self.source is not None else self.to_text()
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# parser


def _parse_complex(text: str, line: int, col0: int) -> list[tuple[str, int]]:
    stripped = text.strip()
    if stripped == "0":
        return []
    if not stripped:
        raise ParseError("empty complex (write 0 for the empty complex)", line, col0)
    out: dict[str, int] = {}
    offset = 0
    for part in text.split("+"):
        m = _TERM_RE.match(part)
        if not m:
            col = col0 + offset + (len(part) - len(part.lstrip()))
            raise ParseError(f"cannot read term {part.strip()!r}", line, col)
        count = int(m.group(1)) if m.group(1) else 1
        if count == 0:
            raise ParseError("zero stoichiometric count", line, col0 + offset)
        out[m.group(2)] = out.get(m.group(2), 0) + count
        offset += len(part) + 1
    return list(out.items())


def parse_network(text: str) -> ReactionNetwork:
    """Parse the reaction DSL into a validated :class:`ReactionNetwork`."""
    species: list[str] = []
    reactions: list[Reaction] = []
    domains: dict[str, ParameterDomain] = {}
    rate_lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "->" in line:
            lhs, _, rest = line.partition("->")
            if "@" not in rest:
                raise ParseError("reaction is missing '@ <rate>'", lineno, len(line.rstrip()) + 1)
            rhs, _, rate = rest.partition("@")
            rate_col = len(lhs) + 2 + len(rhs) + 2 + (len(rate) - len(rate.lstrip()))
            rate = rate.strip()
            if not re.fullmatch(_IDENT, rate):
                raise ParseError(f"bad rate symbol {rate!r}", lineno, rate_col)
            reac = _parse_complex(lhs, lineno, 1)
            prod = _parse_complex(rhs, lineno, len(lhs) + 3)
            if sum(c for _, c in reac) > 2:
                raise ParseError("reactant complex is trimolecular or higher; "
                                 "only up to bimolecular reactions are supported", lineno, 1)
            if rate in rate_lines:
                raise ParseError(f"duplicate rate symbol {rate!r} (first used on line "
                                 f"{rate_lines[rate]})", lineno, rate_col)
            net_change: dict[str, int] = {}
            for s, c in reac:
                net_change[s] = net_change.get(s, 0) - c
            for s, c in prod:
                net_change[s] = net_change.get(s, 0) + c
            if all(v == 0 for v in net_change.values()):
                raise ParseError("reaction does not change any species count", lineno, 1)
            for s, _ in reac + prod:
                if s not in species:
                    species.append(s)
            rate_lines[rate] = lineno
            reactions.append(Reaction(tuple(reac), tuple(prod), rate))
            continue
        m = _FIXED_RE.match(line) or _INTERVAL_RE.match(line) or _POSITIVE_RE.match(line)
        if not m:
            col = len(line) - len(line.lstrip()) + 1
            raise ParseError(f"cannot parse {line.strip()!r}", lineno, col)
        sym = m.group(1)
        if sym in domains:
            raise ParseError(f"domain of {sym!r} declared twice", lineno, 1)
        try:
            if m.re is _FIXED_RE:
                domains[sym] = ParameterDomain.fixed(float(m.group(2)))
            elif m.re is _INTERVAL_RE:
                domains[sym] = ParameterDomain.interval(
                    float(m.group(3)), float(m.group(4)),
                    m.group(2) == "[", m.group(5) == "]")
            else:
                domains[sym] = ParameterDomain.positive()
        except NetworkError as exc:
            raise ParseError(str(exc), lineno, 1) from None
    for r in reactions:
        if r.rate not in domains:
            raise ParseError(f"undeclared parameter {r.rate!r}", rate_lines[r.rate], 1)
    unused = [s for s in domains if s not in rate_lines]
    if unused:
        raise NetworkError(f"parameters {unused} are declared but not used by any reaction")
    ordered = {r.rate: domains[r.rate] for r in reactions}
    return ReactionNetwork(tuple(species), tuple(reactions), ordered, source=text)


def load_network(path: str | Path) -> ReactionNetwork:
    return parse_network(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# stoichiometry


@dataclass(frozen=True)
class StoichiometricDecomposition:
    species: tuple[str, ...]
    S: np.ndarray
    symbols: tuple[str, ...]
    reactants: tuple[tuple[int, ...], ...]  # species indices, repeated by multiplicity
    blocks: Mapping[str, tuple[int, ...]]

    @property
    def d(self) -> int:
        return len(self.species)

    def _cols(self, *names: str) -> list[int]:
        return [k for n in names for k in self.blocks[n]]

    @property
    def u_columns(self) -> list[int]:
        return self._cols("dg", "ct", "cv")

    @property
    def S0(self) -> np.ndarray:
        return self.S[:, self._cols("s0")]

    @property
    def Su(self) -> np.ndarray:
        return self.S[:, self.u_columns]

    @property
    def Sb(self) -> np.ndarray:
        return self.S[:, self._cols("sb")]

    @property
    def Sdg(self) -> np.ndarray:
        return self.S[:, self._cols("dg")]

    @property
    def Sct(self) -> np.ndarray:
        return self.S[:, self._cols("ct")]

    @property
    def Scv(self) -> np.ndarray:
        return self.S[:, self._cols("cv")]

    def count(self, block: str) -> int:
        return len(self.blocks[block])

    @property
    def w0_symbols(self) -> list[str]:
        return [self.symbols[k] for k in self.blocks["s0"]]

    @property
    def W_rows(self) -> list[tuple[str, int]]:
        """First-order propensities as ``(symbol, reactant index)`` in ``Su`` order."""
        return [(self.symbols[k], self.reactants[k][0]) for k in self.u_columns]

    @property
    def Wb_terms(self) -> list[tuple[str, tuple[int, int]]]:
        return [(self.symbols[k], tuple(self.reactants[k])) for k in self.blocks["sb"]]

    @property
    def Wct(self) -> np.ndarray:
        out = np.zeros((self.count("ct"), self.d))
        for r, k in enumerate(self.blocks["ct"]):
            out[r, self.reactants[k][0]] = 1.0
        return out

    def symbols_of(self, block: str) -> list[str]:
        return [self.symbols[k] for k in self.blocks[block]]

    def W(self, values: Mapping[str, float]) -> np.ndarray:
        out = np.zeros((len(self.u_columns), self.d))
        for r, (sym, j) in enumerate(self.W_rows):
            out[r, j] = values[sym]
        return out

    @property
    def is_unimolecular(self) -> bool:
        return self.count("sb") == 0


def _classify_first_order(col: np.ndarray) -> str:
    if np.all(col <= 0):
        return "dg"
    if np.all(col >= 0):
        return "ct"
    return "cv"


def _decomposition_from_columns(species, S, symbols, reactants) -> StoichiometricDecomposition:
    blocks: dict[str, list[int]] = {"s0": [], "dg": [], "ct": [], "cv": [], "sb": []}
    for k, reac in enumerate(reactants):
        if len(reac) == 0:
            blocks["s0"].append(k)
        elif len(reac) == 1:
            blocks[_classify_first_order(S[:, k])].append(k)
        else:
            blocks["sb"].append(k)
    return StoichiometricDecomposition(
        tuple(species), S, tuple(symbols), tuple(tuple(r) for r in reactants),
        {k: tuple(v) for k, v in blocks.items()})


def decompose(net: ReactionNetwork) -> StoichiometricDecomposition:
    """Stoichiometric matrix split into zeroth/first/second order blocks,
    with first-order reactions sorted into degradation (nonpositive
    column), catalytic (nonnegative column) and conversion (mixed)."""
    d, K = net.d, net.K
    S = np.zeros((d, K), dtype=int)
    reactants = []
    for k, r in enumerate(net.reactions):
        for s, c in r.reactants:
            S[net.index(s), k] -= c
        for s, c in r.products:
            S[net.index(s), k] += c
        reactants.append(tuple(net.index(s) for s, c in r.reactants for _ in range(c)))
    return _decomposition_from_columns(net.species, S, net.symbols, reactants)


def has_conversion(dec: StoichiometricDecomposition) -> bool:
    return dec.count("cv") > 0


@dataclass
class OpenResult:
    open: bool
    witness: np.ndarray | None = None

    def __bool__(self) -> bool:
        return self.open


def is_open(dec: StoichiometricDecomposition) -> OpenResult:
    """No nonnegative conservation law: max 1'z s.t. z'S = 0, 0 <= z <= 1."""
    d = dec.d
    p = linopt.LinearFeasibilityProblem(d, lower=np.zeros(d), upper=np.ones(d))
    for k in range(dec.S.shape[1]):
        p.add_eq(dec.S[:, k], 0.0)
    res = linopt.maximize(p, np.ones(d))
    if not res.feasible:
        raise RuntimeError(f"openness LP failed: {res.message}")
    if res.objective <= 1e-9:
        return OpenResult(True)
    z = np.where(res.x > 1e-9, res.x, 0.0)
    return OpenResult(False, z)


# ---------------------------------------------------------------------------
# affine symbolic matrices


@dataclass(frozen=True)
class AffineMatrix:
    """``constant + sum_s value[s] * terms[s]`` (arrays of any fixed shape)."""

    constant: np.ndarray
    terms: Mapping[str, np.ndarray]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.constant.shape

    @property
    def symbols(self) -> list[str]:
        return list(self.terms)

    def evaluate(self, values: Mapping[str, float]) -> np.ndarray:
        out = self.constant.astype(float).copy()
        for s, coef in self.terms.items():
            out = out + values[s] * coef
        return out

    def substitute(self, values: Mapping[str, float]) -> "AffineMatrix":
        const = self.constant.astype(float).copy()
        terms = {}
        for s, coef in self.terms.items():
            if s in values:
                const = const + values[s] * coef
            else:
                terms[s] = coef
        return AffineMatrix(const, terms)

    def bounds(self, box: Mapping[str, tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
        lo = self.constant.astype(float).copy()
        hi = lo.copy()
        for s, coef in self.terms.items():
            a, b = box[s]
            lo = lo + np.where(coef > 0, coef * a, coef * b)
            hi = hi + np.where(coef > 0, coef * b, coef * a)
        return lo, hi

    def coefficient_signs(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean arrays: entry has some positive / some negative coefficient."""
        pos = self.constant > 0
        neg = self.constant < 0
        for coef in self.terms.values():
            pos = pos | (coef > 0)
            neg = neg | (coef < 0)
        return pos, neg

    def to_dict(self) -> dict:
        return {"constant": self.constant.tolist(),
                "terms": {s: c.tolist() for s, c in self.terms.items()}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "AffineMatrix":
        return cls(np.asarray(data["constant"], dtype=float),
                   {s: np.asarray(c, dtype=float) for s, c in data["terms"].items()})


@dataclass(frozen=True)
class CharacteristicModel:
    species: tuple[str, ...]
    A: AffineMatrix
    b0: AffineMatrix
    dg: tuple[str, ...]
    ct: tuple[str, ...]
    cv: tuple[str, ...]
    dec: StoichiometricDecomposition = field(repr=False)

    @property
    def d(self) -> int:
        return len(self.species)

    def evaluate(self, values: Mapping[str, float]) -> tuple[np.ndarray, np.ndarray]:
        return self.A.evaluate(values), self.b0.evaluate(values)

    @property
    def first_order_symbols(self) -> list[str]:
        return list(self.dg + self.ct + self.cv)


def characteristic_model(dec: StoichiometricDecomposition) -> CharacteristicModel:
    """``A = S_u W(rho_u)`` with one coefficient matrix per first-order
    rate, and ``b0 = S_0 w0(rho_0)``."""
    d = dec.d
    A_terms: dict[str, np.ndarray] = {}
    for k in dec.u_columns:
        j = dec.reactants[k][0]
        coef = np.zeros((d, d))
        coef[:, j] = dec.S[:, k]
        A_terms[dec.symbols[k]] = coef
    b_terms = {dec.symbols[k]: dec.S[:, k].astype(float) for k in dec.blocks["s0"]}
    return CharacteristicModel(
        dec.species,
        AffineMatrix(np.zeros((d, d)), A_terms),
        AffineMatrix(np.zeros(d), b_terms),
        tuple(dec.symbols_of("dg")), tuple(dec.symbols_of("ct")), tuple(dec.symbols_of("cv")),
        dec)


def build_model(net: ReactionNetwork) -> CharacteristicModel:
    return characteristic_model(decompose(net))


# ---------------------------------------------------------------------------
# sign and interval abstractions

_SIGN_CHARS = {1: "+", -1: "-", 0: "0"}


@dataclass(frozen=True)
class SignMatrix:
    """Entries in {-1, 0, +1}; ``mixed`` lists entries whose sign was forced."""

    entries: np.ndarray
    mixed: tuple[tuple[int, int], ...] = ()

    def sgn(self) -> np.ndarray:
        return self.entries.astype(float)

    def __str__(self) -> str:
        return "\n".join(" ".join(_SIGN_CHARS[int(x)] for x in row) for row in self.entries)

    @classmethod
    def from_strings(cls, rows: Iterable[str]) -> "SignMatrix":
        lookup = {"+": 1, "-": -1, "0": 0, "⊕": 1, "⊖": -1}
        return cls(np.array([[lookup[c] for c in row.split()] for row in rows], dtype=int))


def sign_pattern(model: CharacteristicModel, allow_mixed: bool = False) -> SignMatrix:
    """Sign pattern of ``A`` with every rate set to an arbitrary positive value.

    Entries mixing positive and negative coefficients raise
    :class:`IndeterminateSignError` unless ``allow_mixed``; then they are
    kept as nonzero (``-1``) and listed in ``SignMatrix.mixed``.
    """
    pos, neg = model.A.coefficient_signs()
    mixed = list(zip(*np.nonzero(pos & neg)))
    mixed = [(int(i), int(j)) for i, j in mixed]
    if mixed and not allow_mixed:
        raise IndeterminateSignError(mixed)
    entries = np.where(pos & ~neg, 1, np.where(neg, -1, 0)).astype(int)
    return SignMatrix(entries, tuple(mixed))


@dataclass
class IntervalMatrix:
    lower: np.ndarray
    upper: np.ndarray
    warnings: list[str] = field(default_factory=list)
    b0_lower: np.ndarray | None = None
    b0_upper: np.ndarray | None = None


class UnboundedDomainError(ValueError):
    pass


def _closure_box(domains: Mapping[str, ParameterDomain], symbols: Iterable[str],
                 what: str) -> dict[str, tuple[float, float]]:
    box = {}
    for s in symbols:
        dom = domains[s]
        if not dom.bounded:
            raise UnboundedDomainError(f"{what} symbol {s!r} has an unbounded domain")
        box[s] = (dom.lo, dom.hi)
    return box


def interval_bounds(model: CharacteristicModel,
                    domains: Mapping[str, ParameterDomain]) -> IntervalMatrix:
    """Entrywise bounds ``A- <= A(rho) <= A+`` over the closure of the box."""
    box = _closure_box(domains, model.first_order_symbols, "first-order")
    lower, upper = model.A.bounds(box)
    warnings = []
    d = model.d
    for i in range(d):
        for j in range(d):
            for side, target in (("lower", lower), ("upper", upper)):
                for s, coef in model.A.terms.items():
                    c = coef[i, j]
                    if c == 0:
                        continue
                    dom = domains[s]
                    use_lo = (c > 0) == (side == "lower")
                    if (use_lo and not dom.lo_closed) or (not use_lo and not dom.hi_closed):
                        end = "lower" if use_lo else "upper"
                        warnings.append(
                            f"{side} bound {target[i, j]:g} of entry ({i}, {j}) is not attained: "
                            f"{s} has an open {end} endpoint")
    b_lo = model.b0.constant.astype(float).copy()
    b_hi = b_lo.copy()
    for s, coef in model.b0.terms.items():
        dom = domains[s]
        b_lo = b_lo + coef * dom.lo
        hi = coef * dom.hi if dom.bounded else np.where(coef > 0, np.inf, 0.0)
        b_hi = b_hi + hi
    return IntervalMatrix(lower, upper, warnings, b_lo, b_hi)


# ---------------------------------------------------------------------------
# bimolecular networks: aggregation along the left kernel of S_b


class NotReducibleError(ValueError):
    pass


@dataclass(frozen=True)
class Aggregation:
    """``v = P^T v~`` parametrises every ``v`` with ``v^T S_b = 0``.

    Each species belongs to exactly one class and carries a positive integer
    weight, so ``v > 0`` iff ``v~ > 0``.
    """

    P: np.ndarray
    classes: tuple[tuple[int, ...], ...]
    names: tuple[str, ...]


def aggregate_bimolecular(dec: StoichiometricDecomposition) -> Aggregation:
    """Build the aggregation matrix for ``S_b`` when every column of ``S_b``
    relates exactly two species with opposite signs.

    Raises :class:`NotReducibleError` otherwise, or when the kernel
    constraints force some weight to zero.
    """
    d = dec.d
    parent = list(range(d))
    ratio = [Fraction(1)] * d  # weight(i) = ratio[i] * weight(root)

    def find(i: int) -> tuple[int, Fraction]:
        r = Fraction(1)
        while parent[i] != i:
            r *= ratio[i]
            i = parent[i]
        return i, r

    Sb = dec.Sb
    for col in Sb.T:
        nz = np.flatnonzero(col)
        if len(nz) != 2:
            raise NotReducibleError(f"S_b column {col.tolist()} does not relate two species")
        i, j = (int(x) for x in nz)
        a, b = int(col[i]), int(col[j])
        if a * b > 0:
            raise NotReducibleError(f"S_b column {col.tolist()} forces a zero weight")
        # a w_i + b w_j = 0  ->  w_i = (-b / a) w_j
        ri, fi = find(i)
        rj, fj = find(j)
        want = Fraction(-b, a)  # w_i / w_j
        if ri == rj:
            if fi / fj != want:
                raise NotReducibleError("inconsistent weight ratios force zero weights")
            continue
        # attach ri under rj: w_ri = w_i / fi = want * w_j / fi = want * fj / fi * w_rj
        parent[ri] = rj
        ratio[ri] = want * fj / fi
    roots: dict[int, list[int]] = {}
    weights: dict[int, Fraction] = {}
    for i in range(d):
        r, f = find(i)
        roots.setdefault(r, []).append(i)
        weights[i] = f
    classes = sorted(roots.values(), key=lambda c: c[0])
    P = np.zeros((len(classes), d), dtype=int)
    for c, members in enumerate(classes):
        denom = math.lcm(*(weights[i].denominator for i in members))
        ints = [int(weights[i] * denom) for i in members]
        g = math.gcd(*ints)
        for i, w in zip(members, ints):
            P[c, i] = w // g
    names = tuple("+".join(dec.species[i] for i in members) for members in classes)
    return Aggregation(P, tuple(tuple(c) for c in classes), names)


@dataclass(frozen=True)
class ReducedSystem:
    """Unimolecular surrogate whose Hurwitz stability is equivalent to the
    existence of ``v > 0`` with ``v^T S_b = 0`` and ``v^T A < 0``."""

    aggregation: Aggregation
    representatives: tuple[int, ...]
    dropped: tuple[int, ...]  # species whose columns are negative by structure
    dec: StoichiometricDecomposition
    model: CharacteristicModel
    parent: CharacteristicModel = field(repr=False)


def reduce_bimolecular(model: CharacteristicModel) -> ReducedSystem:
    dec = model.dec
    agg = aggregate_bimolecular(dec)
    P = agg.P
    class_of = {i: c for c, members in enumerate(agg.classes) for i in members}
    PA_terms = {s: P @ coef for s, coef in model.A.terms.items()}
    reps, dropped = [], []
    for c, members in enumerate(agg.classes):
        nontrivial = []
        for j in members:
            own_pos = any(PA_terms[s][c, j] > 0 for s in PA_terms)
            own_neg = any(PA_terms[s][c, j] < 0 for s in PA_terms)
            off = any(np.any(np.delete(PA_terms[s][:, j], c) != 0) for s in PA_terms)
            if own_pos or off or not own_neg:
                nontrivial.append(j)
        if len(nontrivial) > 1:
            names = [dec.species[j] for j in nontrivial]
            raise NotReducibleError(f"class {agg.names[c]} has several coupled columns {names}")
        rep = nontrivial[0] if nontrivial else members[0]
        reps.append(rep)
        dropped.extend(j for j in members if j != rep)
    rep_class = {j: class_of[j] for j in reps}
    cols, syms, reac = [], [], []
    PS = P @ dec.S
    for k in dec.u_columns:
        j = dec.reactants[k][0]
        if j in rep_class and np.any(PS[:, k] != 0):
            cols.append(PS[:, k])
            syms.append(dec.symbols[k])
            reac.append((rep_class[j],))
    for k in dec.blocks["s0"]:
        if np.any(PS[:, k] != 0):
            cols.append(PS[:, k])
            syms.append(dec.symbols[k])
            reac.append(())
    S = np.array(cols, dtype=int).T.reshape(len(agg.classes), len(cols))
    rdec = _decomposition_from_columns(agg.names, S, syms, reac)
    return ReducedSystem(agg, tuple(reps), tuple(sorted(dropped)), rdec,
                         characteristic_model(rdec), model)


def left_annihilator(Sb: np.ndarray) -> np.ndarray:
    """Integer full-row-rank ``S_b^perp`` with ``S_b^perp S_b = 0`` (exact
    row reduction over the rationals)."""
    d = Sb.shape[0]
    if Sb.size == 0:
        return np.eye(d, dtype=int)
    M = [[Fraction(int(x)) for x in row] for row in Sb.T]  # n_b x d, find right kernel
    rows, cols = len(M), d
    pivots = []
    r = 0
    for c in range(cols):
        piv = next((i for i in range(r, rows) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        inv = 1 / M[r][c]
        M[r] = [x * inv for x in M[r]]
        for i in range(rows):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [Fraction(0)] * cols
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -M[i][fc]
        denom = math.lcm(*(x.denominator for x in vec))
        basis.append([int(x * denom) for x in vec])
    return np.array(basis, dtype=int).reshape(len(basis), d)


# ---------------------------------------------------------------------------
# canonical dump


def model_dump(model: CharacteristicModel) -> dict:
    dec = model.dec
    return {
        "species": list(model.species),
        "S": dec.S.astype(int).tolist(),
        "symbols": list(dec.symbols),
        "blocks": {k: list(v) for k, v in dec.blocks.items()},
        "A": model.A.to_dict(),
        "b0": model.b0.to_dict(),
    }


def model_dump_text(model: CharacteristicModel) -> str:
    return json.dumps(model_dump(model), indent=2)
