"""Sparse multivariate polynomials with real coefficients.

Used for determinants and adjugates of affine matrices whose entries depend
on a handful of parameters, and for deciding positivity of such a
polynomial over a box by interval branch and bound.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .model import AffineMatrix

MAX_DIM = 8
MAX_VARS = 8
_PRUNE_REL = 1e-12

Exponent = tuple[int, ...]


class SizeGuardError(ValueError):
    pass


class MultiPoly:
    """Polynomial as a map exponent-vector -> coefficient (no zero terms)."""

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str], terms: Mapping[Exponent, float] | None = None):
        self.variables = tuple(variables)
        n = len(self.variables)
        clean: dict[Exponent, float] = {}
        if terms:
            scale = max((abs(c) for c in terms.values()), default=0.0)
            cut = _PRUNE_REL * scale
            for e, c in terms.items():
                if len(e) != n:
                    raise ValueError(f"exponent {e} does not match {n} variables")
                if abs(c) > cut and c != 0.0:
                    clean[tuple(e)] = float(c)
        self.terms = clean

    # construction -----------------------------------------------------------
    @classmethod
    def constant(cls, variables: Sequence[str], c: float) -> "MultiPoly":
        return cls(variables, {(0,) * len(variables): c})

    @classmethod
    def variable(cls, variables: Sequence[str], name: str) -> "MultiPoly":
        e = [0] * len(variables)
        e[list(variables).index(name)] = 1
        return cls(variables, {tuple(e): 1.0})

    @classmethod
    def affine(cls, variables: Sequence[str], const: float,
               coefs: Mapping[str, float]) -> "MultiPoly":
        zero = (0,) * len(variables)
        terms = {zero: const}
        for name, c in coefs.items():
            e = [0] * len(variables)
            e[variables.index(name)] = 1
            terms[tuple(e)] = terms.get(tuple(e), 0.0) + c
        return cls(variables, terms)

    # arithmetic -------------------------------------------------------------
    def _check(self, other: "MultiPoly") -> None:
        if other.variables != self.variables:
            raise ValueError("polynomials over different variable lists")

    def _lift(self, other) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            self._check(other)
            return other
        return MultiPoly.constant(self.variables, float(other))

    def __add__(self, other) -> "MultiPoly":
        other = self._lift(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return MultiPoly(self.variables, out)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.variables, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "MultiPoly":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "MultiPoly":
        return self._lift(other) - self

    def __mul__(self, other) -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            return MultiPoly(self.variables, {e: c * float(other) for e, c in self.terms.items()})
        self._check(other)
        out: dict[Exponent, float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return MultiPoly(self.variables, out)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self.variables == other.variables and self.terms == other.terms

    def almost_equal(self, other: "MultiPoly", tol: float = 1e-10) -> bool:
        diff = self - other
        scale = max([1.0] + [abs(c) for c in self.terms.values()])
        return all(abs(c) <= tol * scale for c in diff.terms.values())

    # queries ----------------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def derivative(self, name: str) -> "MultiPoly":
        i = self.variables.index(name)
        out = {}
        for e, c in self.terms.items():
            if e[i] > 0:
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = c * e[i]
        return MultiPoly(self.variables, out)

    def _point(self, point) -> np.ndarray:
        if isinstance(point, Mapping):
            return np.array([point[v] for v in self.variables], dtype=float)
        return np.asarray(point, dtype=float)

    def __call__(self, point) -> float:
        x = self._point(point)
        total = 0.0
        for e, c in self.terms.items():
            total += c * math.prod(x[i] ** k for i, k in enumerate(e) if k)
        return total

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        """Vectorised evaluation at the rows of ``X``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for e, c in self.terms.items():
            mono = np.full(X.shape[0], c)
            for i, k in enumerate(e):
                if k:
                    mono = mono * X[:, i] ** k
            out += mono
        return out

    def interval(self, lo: Sequence[float], hi: Sequence[float]) -> tuple[float, float]:
        """Enclosure of the range over the box by monomial interval arithmetic."""
        total_lo = total_hi = 0.0
        for e, c in self.terms.items():
            mlo, mhi = 1.0, 1.0
            for i, k in enumerate(e):
                if k:
                    plo, phi = _ipow(lo[i], hi[i], k)
                    cands = (mlo * plo, mlo * phi, mhi * plo, mhi * phi)
                    mlo, mhi = min(cands), max(cands)
            if c >= 0:
                total_lo += c * mlo
                total_hi += c * mhi
            else:
                total_lo += c * mhi
                total_hi += c * mlo
        return total_lo, total_hi

    def __str__(self) -> str:
        return pretty(self)

    def __repr__(self) -> str:
        return f"MultiPoly({self.variables}, {pretty(self)!r})"


def _ipow(lo: float, hi: float, k: int) -> tuple[float, float]:
    a, b = lo ** k, hi ** k
    if k % 2 == 0 and lo < 0 < hi:
        return 0.0, max(a, b)
    return min(a, b), max(a, b)


def graded_lex_key(e: Exponent) -> tuple:
    return (-sum(e), tuple(-k for k in e))


def pretty(p: MultiPoly) -> str:
    """Terms in graded-lex order, highest degree first."""
    if p.is_zero:
        return "0"
    parts = []
    for e in sorted(p.terms, key=graded_lex_key):
        c = p.terms[e]
        mono = "*".join(f"{v}^{k}" if k > 1 else v for v, k in zip(p.variables, e) if k)
        mag = abs(c)
        if mono:
            body = mono if mag == 1.0 else f"{mag:.12g}*{mono}"
        else:
            body = f"{mag:.12g}"
        sign = "-" if c < 0 else "+"
        parts.append((sign, body))
    first_sign, first = parts[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, body in parts[1:]:
        text += f" {sign} {body}"
    return text


# ---------------------------------------------------------------------------
# determinants


PolyMatrix = list[list[MultiPoly]]


def poly_matrix(M: AffineMatrix, variables: Sequence[str] | None = None) -> PolyMatrix:
    if len(M.shape) != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("square affine matrix required")
    variables = list(variables) if variables is not None else M.symbols
    unknown = set(M.symbols) - set(variables)
    if unknown:
        raise ValueError(f"matrix depends on symbols {sorted(unknown)} outside the variable list")
    d = M.shape[0]
    if d > MAX_DIM or len(variables) > MAX_VARS:
        raise SizeGuardError(f"size guard: d={d}, variables={len(variables)} "
                             f"(limits {MAX_DIM}, {MAX_VARS})")
    return [[MultiPoly.affine(variables, float(M.constant[i, j]),
                              {s: float(c[i, j]) for s, c in M.terms.items() if c[i, j] != 0})
             for j in range(d)] for i in range(d)]


def _det(P: PolyMatrix, variables: Sequence[str]) -> MultiPoly:
    """Laplace expansion memoised over column subsets, row by row."""
    d = len(P)
    if d == 0:
        return MultiPoly.constant(variables, 1.0)
    minors: dict[tuple[int, ...], MultiPoly] = {(): MultiPoly.constant(variables, 1.0)}
    for k in range(d):
        nxt: dict[tuple[int, ...], MultiPoly] = {}
        for cols in itertools.combinations(range(d), k + 1):
            acc = MultiPoly(variables)
            for pos, j in enumerate(cols):
                if P[k][j].is_zero:
                    continue
                rest = cols[:pos] + cols[pos + 1:]
                sub = minors[rest]
                if sub.is_zero:
                    continue
                term = P[k][j] * sub
                acc = acc - term if (k + pos) % 2 else acc + term
            nxt[cols] = acc
        minors = nxt
    return minors[tuple(range(d))]


def det_poly(M: AffineMatrix | PolyMatrix, variables: Sequence[str] | None = None) -> MultiPoly:
    if isinstance(M, AffineMatrix):
        variables = list(variables) if variables is not None else M.symbols
        P = poly_matrix(M, variables)
    else:
        P = M
        if len(P) > MAX_DIM:
            raise SizeGuardError(f"size guard: d={len(P)} > {MAX_DIM}")
        variables = P[0][0].variables if P else tuple(variables or ())
    return _det(P, variables)


def adjugate_poly(M: AffineMatrix | PolyMatrix,
                  variables: Sequence[str] | None = None) -> PolyMatrix:
    """``Adj(M)[j][i] = (-1)^(i+j) det(M with row i and column j removed)``."""
    if isinstance(M, AffineMatrix):
        variables = list(variables) if variables is not None else M.symbols
        P = poly_matrix(M, variables)
    else:
        P = M
        variables = P[0][0].variables
    d = len(P)
    if d == 1:
        return [[MultiPoly.constant(variables, 1.0)]]
    adj = [[MultiPoly(variables) for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(d):
            sub = [[P[r][c] for c in range(d) if c != j] for r in range(d) if r != i]
            m = _det(sub, variables)
            adj[j][i] = -m if (i + j) % 2 else m
    return adj


def evaluate_matrix(P: PolyMatrix, point) -> np.ndarray:
    return np.array([[p(point) for p in row] for row in P])


# ---------------------------------------------------------------------------
# positivity over a box


@dataclass
class PositivityResult:
    status: str  # "Positive" | "CounterexampleFound" | "Unknown"
    point: np.ndarray | None = None
    value: float | None = None
    lower_bound: float = -math.inf
    subdivisions: int = 0
    notes: list[str] = field(default_factory=list)

    @property
    def positive(self) -> bool:
        return self.status == "Positive"


def _grid(lo: np.ndarray, hi: np.ndarray, per_dim: int) -> np.ndarray:
    axes = [np.linspace(a, b, per_dim) if b > a else np.array([a]) for a, b in zip(lo, hi)]
    return np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(lo))


class _BoxBound:
    """Lower bound on a box: the better of the naive monomial enclosure and
    the mean-value form around the box centre."""

    def __init__(self, p: MultiPoly):
        self.p = p
        self.grads = [p.derivative(v) for v in p.variables]

    def __call__(self, lo: np.ndarray, hi: np.ndarray) -> tuple[float, np.ndarray, float]:
        naive, _ = self.p.interval(lo, hi)
        c = 0.5 * (lo + hi)
        pc = self.p(c)
        slack = 0.0
        for i, g in enumerate(self.grads):
            if g.is_zero or hi[i] == lo[i]:
                continue
            glo, ghi = g.interval(lo, hi)
            slack += max(abs(glo), abs(ghi)) * 0.5 * (hi[i] - lo[i])
        return max(naive, pc - slack), c, pc


def box_positivity(p: MultiPoly, box: Sequence[tuple[float, float]] | Mapping[str, tuple[float, float]],
                   max_subdivisions: int = 100_000, grid_per_dim: int | None = None,
                   local_search: bool = True) -> PositivityResult:
    """Decide ``p > 0`` on a closed box: Positive (certified by interval
    bounds), CounterexampleFound (a point with ``p <= 0``), or Unknown."""
    if isinstance(box, Mapping):
        box = [box[v] for v in p.variables]
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    if len(lo) != len(p.variables):
        raise ValueError("box dimension does not match the variable count")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(lo > hi):
        raise ValueError("bounded box with lo <= hi required")
    m = len(lo)
    if m == 0 or p.degree() == 0:
        c = p(np.zeros(m)) if m == 0 else p(lo)
        if c > 0:
            return PositivityResult("Positive", lower_bound=c)
        return PositivityResult("CounterexampleFound", lo.copy(), c, c)

    per_dim = grid_per_dim or (5 if m <= 4 else 3)
    G = _grid(lo, hi, per_dim)
    vals = p.evaluate_many(G)
    k = int(np.argmin(vals))
    if vals[k] <= 0:
        return PositivityResult("CounterexampleFound", G[k], float(vals[k]))
    if local_search:
        res = minimize(lambda x: p(x), G[k], method="L-BFGS-B",
                       bounds=list(zip(lo, hi)),
                       jac=lambda x: np.array([g(x) for g in (p.derivative(v) for v in p.variables)]))
        x = np.clip(res.x, lo, hi)
        fx = p(x)
        if fx <= 0:
            return PositivityResult("CounterexampleFound", x, fx)

    bound = _BoxBound(p)
    lb0, c0, pc0 = bound(lo, hi)
    heap = [(lb0, 0, lo, hi)]
    counter = 1
    subdivisions = 0
    while heap:
        lb, _, blo, bhi = heap[0]
        if lb > 0:
            return PositivityResult("Positive", lower_bound=lb, subdivisions=subdivisions)
        if subdivisions >= max_subdivisions:
            return PositivityResult("Unknown", lower_bound=lb, subdivisions=subdivisions,
                                    notes=[f"branch and bound stopped after {subdivisions} "
                                           f"subdivisions; tightest lower bound {lb:.3e}"])
        heapq.heappop(heap)
        subdivisions += 1
        axis = int(np.argmax(bhi - blo))
        mid = 0.5 * (blo[axis] + bhi[axis])
        for a, b in ((blo[axis], mid), (mid, bhi[axis])):
            clo, chi = blo.copy(), bhi.copy()
            clo[axis], chi[axis] = a, b
            clb, cc, pc = bound(clo, chi)
            if pc <= 0:
                return PositivityResult("CounterexampleFound", cc, pc, subdivisions=subdivisions)
            heapq.heappush(heap, (clb, counter, clo, chi))
            counter += 1
    raise AssertionError("unreachable: heap exhausted")
