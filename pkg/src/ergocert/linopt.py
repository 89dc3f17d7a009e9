"""Dense LP feasibility and Metzler-matrix stability primitives.

The simplex below is a plain two-phase tableau method with Bland's rule. It is
meant for the handful-of-variables problems produced by the certification
routines, where cycling-freedom and predictable pivots matter more than speed.

Stability decisions go through :func:`is_hurwitz_metzler`, which poses the
homogeneous LP ``v >= 1, M^T v <= -1``. Any strict witness ``v > 0`` with
``v^T M < 0`` can be scaled into that form, so no epsilon is needed.
:func:`pf_eigenvalue` bisects on an M-matrix pivot test that never touches the
LP, which keeps it usable as an independent oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

TOL_FEAS = 1e-9
PIVOT_TOL = 1e-12
_RATIO_TOL = 1e-11


class LPStatus(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    NUMERICAL = "Numerical"


class NotMetzlerError(ValueError):
    """Raised when a matrix has a negative off-diagonal entry."""


class SingularMatrixError(ArithmeticError):
    pass


@dataclass
class LinearFeasibilityProblem:
    """``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``lower <= x <= upper``.

    Rows are given as sequences of length ``n``; bounds may be infinite.
    """

    n: int
    eq_rows: list = field(default_factory=list)
    eq_rhs: list = field(default_factory=list)
    ub_rows: list = field(default_factory=list)
    ub_rhs: list = field(default_factory=list)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    names: list[str] | None = None

    def __post_init__(self) -> None:
        if self.lower is None:
            self.lower = np.full(self.n, -np.inf)
        if self.upper is None:
            self.upper = np.full(self.n, np.inf)
        self.lower = np.asarray(self.lower, dtype=float).copy()
        self.upper = np.asarray(self.upper, dtype=float).copy()

    def add_eq(self, row: Sequence[float], rhs: float) -> None:
        self.eq_rows.append(np.asarray(row, dtype=float))
        self.eq_rhs.append(float(rhs))

    def add_ub(self, row: Sequence[float], rhs: float) -> None:
        self.ub_rows.append(np.asarray(row, dtype=float))
        self.ub_rhs.append(float(rhs))

    def add_lb(self, row: Sequence[float], rhs: float) -> None:
        """Add ``row . x >= rhs``."""
        self.add_ub(-np.asarray(row, dtype=float), -rhs)

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        n = self.n
        A_eq = np.array(self.eq_rows, dtype=float).reshape(len(self.eq_rows), n)
        A_ub = np.array(self.ub_rows, dtype=float).reshape(len(self.ub_rows), n)
        return A_eq, np.array(self.eq_rhs, dtype=float), A_ub, np.array(self.ub_rhs, dtype=float)

    def validate(self) -> None:
        A_eq, b_eq, A_ub, b_ub = self.matrices()
        for arr in (A_eq, b_eq, A_ub, b_ub):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP coefficients must be finite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("LP bounds must not be NaN")
        if self.lower.shape != (self.n,) or self.upper.shape != (self.n,):
            raise ValueError("bounds must have one entry per variable")

    def residuals(self, x: np.ndarray) -> tuple[float, float]:
        """Largest equality violation and largest inequality/bound violation."""
        A_eq, b_eq, A_ub, b_ub = self.matrices()
        r_eq = float(np.max(np.abs(A_eq @ x - b_eq))) if len(b_eq) else 0.0
        r_ub = float(np.max(A_ub @ x - b_ub, initial=0.0)) if len(b_ub) else 0.0
        r_bd = float(max(np.max(self.lower - x, initial=0.0), np.max(x - self.upper, initial=0.0)))
        return r_eq, max(r_ub, r_bd, 0.0)

    def within_tolerance(self, x: np.ndarray, tol: float = TOL_FEAS) -> bool:
        A_eq, b_eq, A_ub, b_ub = self.matrices()
        scale_x = max(1.0, float(np.max(np.abs(x), initial=0.0)))
        for A, b, is_eq in ((A_eq, b_eq, True), (A_ub, b_ub, False)):
            for row, rhs in zip(A, b):
                val = float(row @ x) - rhs
                viol = abs(val) if is_eq else max(val, 0.0)
                scale = max(1.0, float(np.max(np.abs(row), initial=0.0)) * scale_x, abs(rhs))
                if viol > tol * scale:
                    return False
        lo_viol = np.maximum(self.lower - x, 0.0)
        hi_viol = np.maximum(x - self.upper, 0.0)
        bound_scale = np.maximum(1.0, np.abs(x))
        return bool(np.all(lo_viol <= tol * bound_scale) and np.all(hi_viol <= tol * bound_scale))


@dataclass
class FeasibilityResult:
    status: LPStatus
    x: np.ndarray | None = None
    residual_eq: float = float("nan")
    residual_ineq: float = float("nan")
    objective: float | None = None
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is LPStatus.FEASIBLE


class _Numerical(Exception):
    pass


def _to_standard_form(p: LinearFeasibilityProblem):
    """Rewrite as ``E y = f, y >= 0`` and return a map back to ``x``.

    Returns ``E, f, recover, obj_map`` where ``recover(y) -> x`` and
    ``obj_map(c) -> (c_y, c0)`` translates a linear objective.
    """
    A_eq, b_eq, A_ub, b_ub = p.matrices()
    n = p.n
    # x = offset + T y_struct
    cols: list[tuple[int, float]] = []  # (x index, sign) per structural column
    offset = np.zeros(n)
    extra_ub: list[tuple[int, float]] = []  # (column index, width) for finite boxes
    for i in range(n):
        lo, hi = p.lower[i], p.upper[i]
        if np.isfinite(lo):
            offset[i] = lo
            cols.append((i, 1.0))
            if np.isfinite(hi):
                extra_ub.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[i] = hi
            cols.append((i, -1.0))
        else:
            cols.append((i, 1.0))
            cols.append((i, -1.0))
    n_struct = len(cols)
    T = np.zeros((n, n_struct))
    for j, (i, s) in enumerate(cols):
        T[i, j] = s

    eq_E = A_eq @ T
    eq_f = b_eq - A_eq @ offset
    ub_E = A_ub @ T
    ub_f = b_ub - A_ub @ offset
    if extra_ub:
        box = np.zeros((len(extra_ub), n_struct))
        for r, (j, width) in enumerate(extra_ub):
            box[r, j] = 1.0
        ub_E = np.vstack([ub_E, box])
        ub_f = np.concatenate([ub_f, [w for _, w in extra_ub]])

    m_eq, m_ub = eq_E.shape[0], ub_E.shape[0]
    E = np.zeros((m_eq + m_ub, n_struct + m_ub))
    E[:m_eq, :n_struct] = eq_E
    E[m_eq:, :n_struct] = ub_E
    E[m_eq:, n_struct:] = np.eye(m_ub)
    f = np.concatenate([eq_f, ub_f])

    def recover(y: np.ndarray) -> np.ndarray:
        return offset + T @ y[:n_struct]

    def obj_map(c: np.ndarray) -> tuple[np.ndarray, float]:
        cy = np.zeros(E.shape[1])
        cy[:n_struct] = c @ T
        return cy, float(c @ offset)

    return E, f, recover, obj_map


def _pivot(tab: np.ndarray, basis: list[int], r: int, c: int) -> None:
    piv = tab[r, c]
    if abs(piv) < PIVOT_TOL:
        raise _Numerical(f"pivot magnitude {abs(piv):.3e} below {PIVOT_TOL}")
    tab[r] /= piv
    col = tab[:, c].copy()
    col[r] = 0.0
    tab -= np.outer(col, tab[r])
    basis[r] = c


def _simplex(tab: np.ndarray, basis: list[int], allowed: np.ndarray, max_iter: int) -> str:
    """Minimise the objective held in the last row. Bland's rule throughout."""
    m = tab.shape[0] - 1
    for _ in range(max_iter):
        reduced = tab[-1, :-1]
        candidates = np.flatnonzero((reduced < -1e-10) & allowed)
        if candidates.size == 0:
            return "optimal"
        c = int(candidates[0])
        column = tab[:m, c]
        rows = np.flatnonzero(column > _RATIO_TOL)
        if rows.size == 0:
            return "unbounded"
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = min(ties, key=lambda k: basis[k])
        _pivot(tab, basis, int(r), c)
    raise _Numerical("iteration limit reached")


def _solve(p: LinearFeasibilityProblem, objective: np.ndarray | None) -> FeasibilityResult:
    p.validate()
    if np.any(p.lower > p.upper):
        return FeasibilityResult(LPStatus.INFEASIBLE, message="empty variable bounds")
    E, f, recover, obj_map = _to_standard_form(p)
    m, ny = E.shape
    neg = f < 0
    E[neg] *= -1.0
    f[neg] *= -1.0

    # tableau: [E | I_art | f], last row = phase-I objective
    tab = np.zeros((m + 1, ny + m + 1))
    tab[:m, :ny] = E
    tab[:m, ny:ny + m] = np.eye(m)
    tab[:m, -1] = f
    tab[-1, :ny] = -E.sum(axis=0)
    tab[-1, -1] = -f.sum()
    basis = list(range(ny, ny + m))
    max_iter = 5000 + 50 * (ny + m)
    allowed = np.ones(ny + m, dtype=bool)
    try:
        _simplex(tab, basis, allowed, max_iter)
        phase1 = -tab[-1, -1]
        scale = max(1.0, float(np.abs(f).max(initial=0.0)))
        if phase1 > 1e-9 * scale:
            return FeasibilityResult(LPStatus.INFEASIBLE, message=f"phase-I optimum {phase1:.3e}")

        # drive artificials out of the basis; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= ny:
                nz = np.flatnonzero(np.abs(tab[r, :ny]) > 1e-9)
                if nz.size:
                    _pivot(tab, basis, r, int(nz[0]))
                else:
                    keep[r] = False
        allowed = np.zeros(ny + m, dtype=bool)
        allowed[:ny] = True
        rows = np.flatnonzero(keep)
        tab = np.vstack([tab[rows], tab[-1:]])
        basis = [basis[r] for r in rows]
        tab[-1, :] = 0.0

        obj_value = None
        if objective is not None:
            cy, c0 = obj_map(np.asarray(objective, dtype=float))
            tab[-1, :ny] = cy
            for r, b in enumerate(basis):
                tab[-1] -= cy[b] * tab[r]
            status = _simplex(tab, basis, allowed, max_iter)
            if status == "unbounded":
                return FeasibilityResult(LPStatus.NUMERICAL, message="objective unbounded")
    except _Numerical as exc:
        return FeasibilityResult(LPStatus.NUMERICAL, message=str(exc))

    # Re-solve the basic system against the original data to shed pivoting error.
    y = np.zeros(ny + m)
    Ek = E[rows]
    B = Ek[:, basis]
    try:
        yb = np.linalg.solve(B, f[rows])
    except np.linalg.LinAlgError:
        yb = tab[:-1, -1]
    if np.any(yb < -1e-9 * max(1.0, np.abs(yb).max(initial=0.0))):
        yb = tab[:-1, -1]
    y[basis] = np.maximum(yb, 0.0)
    x = recover(y[:ny])
    r_eq, r_ub = p.residuals(x)
    if objective is not None:
        obj_value = float(np.asarray(objective, dtype=float) @ x)
    if not p.within_tolerance(x):
        return FeasibilityResult(LPStatus.NUMERICAL, x, r_eq, r_ub, obj_value, "witness outside tolerance")
    return FeasibilityResult(LPStatus.FEASIBLE, x, r_eq, r_ub, obj_value)


def solve_feasibility(p: LinearFeasibilityProblem) -> FeasibilityResult:
    """Phase-I simplex; returns a verified witness when feasible."""
    return _solve(p, None)


def minimize(p: LinearFeasibilityProblem, c: Sequence[float]) -> FeasibilityResult:
    """Two-phase simplex minimising ``c . x``; status refers to feasibility."""
    return _solve(p, np.asarray(c, dtype=float))


def maximize(p: LinearFeasibilityProblem, c: Sequence[float]) -> FeasibilityResult:
    res = _solve(p, -np.asarray(c, dtype=float))
    if res.objective is not None:
        res.objective = -res.objective
    return res


# ---------------------------------------------------------------------------
# Metzler primitives


def is_metzler(M: np.ndarray, tol: float = 0.0) -> bool:
    M = np.asarray(M, dtype=float)
    off = M - np.diag(np.diag(M))
    return bool(np.all(off >= -tol))


def check_metzler(M: np.ndarray) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not is_metzler(M):
        i, j = np.argwhere((M - np.diag(np.diag(M))) < 0)[0]
        raise NotMetzlerError(f"entry ({i}, {j}) = {M[i, j]} is negative off the diagonal")
    return M


@dataclass
class HurwitzResult:
    hurwitz: bool
    v: np.ndarray | None
    status: LPStatus
    residual: float = float("nan")

    def __bool__(self) -> bool:
        return self.hurwitz


def hurwitz_problem(M: np.ndarray) -> LinearFeasibilityProblem:
    d = M.shape[0]
    p = LinearFeasibilityProblem(d, lower=np.ones(d))
    for j in range(d):
        p.add_ub(M[:, j], -1.0)
    return p


def is_hurwitz_metzler(M: np.ndarray) -> HurwitzResult:
    """LP test for Hurwitz stability of a Metzler matrix.

    Returns the witness ``v >= 1`` with ``v^T M <= -1`` when one exists.
    """
    M = check_metzler(M)
    res = solve_feasibility(hurwitz_problem(M))
    if res.status is LPStatus.FEASIBLE:
        v = res.x
        return HurwitzResult(True, v, res.status, float(np.max(v @ M)))
    if res.status is LPStatus.NUMERICAL:
        logger.debug("Hurwitz LP numerical trouble: %s", res.message)
    return HurwitzResult(False, None, res.status)


def is_nonsingular_m_matrix(Z: np.ndarray) -> bool:
    """Pivot test: a Z-matrix is a nonsingular M-matrix iff unpivoted
    Gaussian elimination produces only positive pivots."""
    Z = np.array(Z, dtype=float)
    n = Z.shape[0]
    scale = max(1.0, float(np.abs(Z).max(initial=0.0)))
    for k in range(n):
        piv = Z[k, k]
        if not piv > 1e-14 * scale:
            return False
        if k + 1 < n:
            factors = Z[k + 1:, k] / piv
            Z[k + 1:, k:] -= np.outer(factors, Z[k, k:])
    return True


def pf_eigenvalue(M: np.ndarray, tol: float = 1e-9,
                  hurwitz_test: Callable[[np.ndarray], bool] | None = None) -> float:
    """Dominant (real) eigenvalue of a Metzler matrix by bisection.

    ``M - s I`` is Hurwitz exactly when ``s > lambda_PF``. The default test on
    ``M - s I`` is the M-matrix pivot test on ``s I - M``.
    """
    M = check_metzler(M)
    d = M.shape[0]
    if hurwitz_test is None:
        def hurwitz_test(X: np.ndarray) -> bool:
            return is_nonsingular_m_matrix(-X)
    rowsum = float(np.abs(M).sum(axis=1).max(initial=0.0))
    lo = -float(np.abs(np.diag(M)).max(initial=0.0)) - rowsum - 1.0
    hi = rowsum + 1.0
    eye = np.eye(d)
    # lo is below lambda_PF (M - lo I not Hurwitz), hi is above it
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if hurwitz_test(M - mid * eye):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def gauss_inverse(M: np.ndarray, pivot_tol: float = PIVOT_TOL) -> np.ndarray:
    """Gauss-Jordan inverse with partial pivoting."""
    M = np.array(M, dtype=float)
    n = M.shape[0]
    aug = np.hstack([M, np.eye(n)])
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    for k in range(n):
        r = k + int(np.argmax(np.abs(aug[k:, k])))
        if abs(aug[r, k]) < pivot_tol * scale:
            raise SingularMatrixError(f"pivot {aug[r, k]:.3e} in column {k}")
        if r != k:
            aug[[k, r]] = aug[[r, k]]
        aug[k] /= aug[k, k]
        col = aug[:, k].copy()
        col[k] = 0.0
        aug -= np.outer(col, aug[k])
    return aug[:, n:]


def inverse_nonpositivity_check(M: np.ndarray, tol: float = 1e-10) -> bool:
    """Whether ``M^{-1} <= 0`` entrywise (up to ``tol``)."""
    inv = gauss_inverse(M)
    return bool(np.all(inv <= tol))
