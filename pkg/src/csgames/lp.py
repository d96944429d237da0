"""Dense two-phase simplex and zero-sum matrix game solution.

The simplex is deliberately simple: dense tableau, Bland's rule for
anti-cycling, pivot tolerance 1e-10. The games solved per state during
model checking are tiny, so robustness and determinism matter more than
asymptotics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SolverError
from .games import MixedStrategy

PIVOT_TOL = 1e-10

LESS = "<="
EQUAL = "="
GREATER = ">="


@dataclass
class LinearProgram:
    """max/min c.x subject to row constraints and per-variable bounds.

    Bounds default to x >= 0; a lower bound of -inf makes a variable free.
    """

    objective: np.ndarray
    maximize: bool = True
    constraints: list = field(default_factory=list)  # (coeffs, relation, bound)
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.size
        if self.lower is None:
            self.lower = np.zeros(n)
        if self.upper is None:
            self.upper = np.full(n, np.inf)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.size != n or self.upper.size != n:
            raise InputError("bound vectors must match the variable count")
        if not np.all(np.isfinite(self.objective)):
            raise InputError("objective coefficients must be finite")
        for coeffs, rel, bound in self.constraints:
            if len(coeffs) != n:
                raise InputError(f"constraint row has width {len(coeffs)}, want {n}")
            if rel not in (LESS, EQUAL, GREATER):
                raise InputError(f"unknown relation {rel!r}")
            if not np.isfinite(bound) or not np.all(np.isfinite(coeffs)):
                raise InputError("constraint coefficients must be finite")

    def add(self, coeffs, relation, bound):
        self.constraints.append((np.asarray(coeffs, dtype=float), relation, float(bound)))


@dataclass
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None = None
    objective: float | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int):
    tab[row] /= tab[row, col]
    colvals = tab[:, col].copy()
    colvals[row] = 0.0
    tab -= np.outer(colvals, tab[row])
    basis[row] = col


def _simplex(tab: np.ndarray, basis: np.ndarray, ncols: int, max_pivots: int = 20000) -> str:
    """Minimise the objective in the last tableau row over columns [0, ncols).

    Bland's rule throughout: entering column is the lowest index with a
    negative reduced cost, leaving row breaks ratio ties on the lowest
    basis variable. Returns "optimal" or "unbounded".
    """
    m = len(basis)
    for _ in range(max_pivots):
        red = tab[-1, :ncols]
        enter = -1
        for j in range(ncols):
            if red[j] < -PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal"
        ratios = tab[:m, enter]
        best_row = -1
        best_ratio = np.inf
        for i in range(m):
            if ratios[i] > PIVOT_TOL:
                r = max(tab[i, -1], 0.0) / ratios[i]
                if r < best_ratio - PIVOT_TOL or (
                    abs(r - best_ratio) <= PIVOT_TOL
                    and (best_row < 0 or basis[i] < basis[best_row])
                ):
                    best_ratio = r
                    best_row = i
        if best_row < 0:
            return "unbounded"
        _pivot(tab, basis, best_row, enter)
    raise SolverError("simplex exceeded its pivot budget")


def _exact_tableau(A_ext: np.ndarray, b: np.ndarray, cost: np.ndarray, basis: np.ndarray):
    """Tableau for the given basis rebuilt from the original data.

    Sequential pivoting drifts; recomputing B^-1 A, B^-1 b and the reduced
    costs from scratch resets the error before results are read off.
    """
    B = A_ext[:, basis]
    try:
        rows = np.linalg.solve(B, A_ext)
        xb = np.linalg.solve(B, b)
    except np.linalg.LinAlgError as exc:
        raise SolverError("simplex basis became singular") from exc
    red = cost - cost[basis] @ rows
    obj = cost[basis] @ xb
    tab = np.empty((len(b) + 1, A_ext.shape[1] + 1))
    tab[:-1, :-1] = rows
    tab[:-1, -1] = xb
    tab[-1, :-1] = red
    tab[-1, -1] = -obj
    return tab


def _solve_phase(A_ext, b, cost, basis, ncols_enter, max_refresh=16):
    """Run simplex with periodic exact refactorisation.

    A claimed optimum is only accepted once a freshly rebuilt tableau
    confirms no entering column remains; a claimed unbounded ray must
    survive one rebuild as well.
    """
    status = None
    for round_ in range(max_refresh):
        tab = _exact_tableau(A_ext, b, cost, basis)
        status = _simplex(tab, basis, ncols_enter)
        fresh = _exact_tableau(A_ext, b, cost, basis)
        if status == "optimal":
            if fresh[-1, :ncols_enter].min() >= -1e-9:
                return "optimal", fresh
            continue  # drift stopped us early; resume from the exact tableau
        # Unbounded: trust it only when an exact tableau agrees immediately.
        if round_ > 0:
            return "unbounded", fresh
    if status == "optimal":
        raise SolverError("simplex failed to converge after repeated refactorisation")
    return status, _exact_tableau(A_ext, b, cost, basis)


def lp_solve(lp: LinearProgram) -> LpResult:
    """Solve a general-form LP by two-phase primal simplex.

    Variables are shifted/split to standard form (x >= 0, equality rows),
    phase 1 minimises artificial infeasibility, phase 2 the objective.
    """
    n = lp.objective.size
    cmin = -lp.objective if lp.maximize else lp.objective.copy()

    # Map each original variable to standard-form columns.
    col_of = []          # (positive column, negative column or -1)
    shift = np.zeros(n)  # x = shift + y_pos - y_neg
    ncols = 0
    extra_rows = []      # upper-bound rows, in original variable space
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if hi < lo:
            return LpResult("infeasible")
        if np.isneginf(lo):
            col_of.append((ncols, ncols + 1))
            ncols += 2
        else:
            shift[j] = lo
            col_of.append((ncols, -1))
            ncols += 1
        if np.isfinite(hi):
            row = np.zeros(n)
            row[j] = 1.0
            extra_rows.append((row, LESS, hi))

    rows = [(np.asarray(c, dtype=float), rel, float(b)) for c, rel, b in lp.constraints]
    rows.extend(extra_rows)

    def expand(row: np.ndarray) -> np.ndarray:
        out = np.zeros(ncols)
        for j in range(n):
            pos, neg = col_of[j]
            out[pos] = row[j]
            if neg >= 0:
                out[neg] = -row[j]
        return out

    m = len(rows)
    nslack = sum(1 for _, rel, _ in rows if rel != EQUAL)
    width = ncols + nslack
    A = np.zeros((m, width))
    b = np.zeros(m)
    slack_col = ncols
    slack_of_row = [-1] * m
    for i, (coeffs, rel, bound) in enumerate(rows):
        A[i, :ncols] = expand(coeffs)
        b[i] = bound - coeffs @ shift
        if rel != EQUAL:
            A[i, slack_col] = 1.0 if rel == LESS else -1.0
            slack_of_row[i] = slack_col
            slack_col += 1
    # Nonnegative right-hand sides so slack/artificial columns can start basic.
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0

    # Phase 1: rows without a usable slack basis column get an artificial.
    basis = np.empty(m, dtype=int)
    art_cols = []
    art_rows = []
    for i in range(m):
        sc = slack_of_row[i]
        if sc >= 0 and A[i, sc] > PIVOT_TOL:
            basis[i] = sc
        else:
            col = width + len(art_cols)
            art_cols.append(col)
            art_rows.append(i)
            basis[i] = col
    total = width + len(art_cols)
    A_ext = np.zeros((m, total))
    A_ext[:, :width] = A
    for col, i in zip(art_cols, art_rows):
        A_ext[i, col] = 1.0

    if art_cols:
        cost1 = np.zeros(total)
        cost1[width:] = 1.0
        status, tab = _solve_phase(A_ext, b, cost1, basis, total)
        if status != "optimal":  # a sum of artificials cannot be unbounded
            raise SolverError("phase 1 reported unbounded")
        if -tab[-1, -1] > 1e-8:
            return LpResult("infeasible")
        # Pivot surviving artificials out; a row offering no real pivot
        # column is redundant and stays inert with its artificial at zero.
        for i in range(m):
            if basis[i] >= width:
                for j in range(width):
                    if abs(tab[i, j]) > 1e-9:
                        _pivot(tab, basis, i, j)
                        break

    # Phase 2: original objective, artificial columns barred from entering.
    cost2 = np.zeros(total)
    for j in range(n):
        pos, neg = col_of[j]
        cost2[pos] = cmin[j]
        if neg >= 0:
            cost2[neg] = -cmin[j]
    status, tab = _solve_phase(A_ext, b, cost2, basis, width)
    if status == "unbounded":
        return LpResult("unbounded")

    y = np.zeros(total)
    for i in range(m):
        y[basis[i]] = max(tab[i, -1], 0.0)
    x = shift.copy()
    for j in range(n):
        pos, neg = col_of[j]
        x[j] += y[pos] - (y[neg] if neg >= 0 else 0.0)
    value = float(lp.objective @ x)
    return LpResult("optimal", x, value)


@dataclass(frozen=True)
class MatrixGame:
    """Two-player zero-sum game: entry (i, j) is the row player's utility."""

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=float))
        if self.matrix.ndim != 2 or self.matrix.size == 0:
            raise InputError("matrix game needs a nonempty 2-d matrix")
        if not np.all(np.isfinite(self.matrix)):
            raise InputError("matrix game entries must be finite")


@dataclass
class GameSolution:
    value: float
    row_strategy: MixedStrategy
    col_strategy: MixedStrategy


def solve_matrix(z: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and optimal mixed strategies of a matrix game.

    Degenerate shapes and 2x2 games take closed-form shortcuts (the model
    checking loop solves huge numbers of those); everything else goes
    through the primal/dual LP pair. All paths return the first optimum
    under row/column order, so results are deterministic.
    """
    z = np.asarray(z, dtype=float)
    l, m = z.shape
    if l == 1 and m == 1:
        return float(z[0, 0]), np.array([1.0]), np.array([1.0])
    if l == 1:
        j = int(np.argmin(z[0]))
        y = np.zeros(m)
        y[j] = 1.0
        return float(z[0, j]), np.array([1.0]), y
    if m == 1:
        i = int(np.argmax(z[:, 0]))
        x = np.zeros(l)
        x[i] = 1.0
        return float(z[i, 0]), x, np.array([1.0])
    if l == 2 and m == 2:
        sol = _solve_2x2(z)
        if sol is not None:
            return sol
    return _solve_lp(z)


def _solve_2x2(z: np.ndarray):
    row_mins = z.min(axis=1)
    col_maxs = z.max(axis=0)
    maximin = row_mins.max()
    minimax = col_maxs.min()
    if maximin >= minimax - PIVOT_TOL:
        # Saddle point: first optimal pure pair.
        i = int(np.argmax(row_mins))
        j = int(np.argmin(col_maxs))
        x = np.zeros(2)
        x[i] = 1.0
        y = np.zeros(2)
        y[j] = 1.0
        return float(z[i, j]), x, y
    a, b = z[0]
    c, d = z[1]
    denom = a + d - b - c
    if abs(denom) < PIVOT_TOL:
        return None
    x1 = (d - c) / denom
    y1 = (d - b) / denom
    if not (0.0 <= x1 <= 1.0 and 0.0 <= y1 <= 1.0):
        return None
    value = (a * d - b * c) / denom
    return float(value), np.array([x1, 1.0 - x1]), np.array([y1, 1.0 - y1])


def _solve_lp(z: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    l, m = z.shape
    shift = 1.0 - z.min()
    zs = z + shift

    # Row player: maximise v with sum_i x_i zs_ij >= v, x a distribution.
    lp = LinearProgram(
        objective=np.concatenate([np.zeros(l), [1.0]]),
        maximize=True,
        lower=np.concatenate([np.zeros(l), [-np.inf]]),
    )
    for j in range(m):
        lp.add(np.concatenate([zs[:, j], [-1.0]]), GREATER, 0.0)
    lp.add(np.concatenate([np.ones(l), [0.0]]), EQUAL, 1.0)
    primal = lp_solve(lp)
    if not primal.optimal:
        raise SolverError(f"matrix game primal LP came back {primal.status}")

    # Column player: minimise w with sum_j y_j zs_ij <= w.
    lpd = LinearProgram(
        objective=np.concatenate([np.zeros(m), [1.0]]),
        maximize=False,
        lower=np.concatenate([np.zeros(m), [-np.inf]]),
    )
    for i in range(l):
        lpd.add(np.concatenate([-zs[i, :], [1.0]]), GREATER, 0.0)
    lpd.add(np.concatenate([np.ones(m), [0.0]]), EQUAL, 1.0)
    dual = lp_solve(lpd)
    if not dual.optimal:
        raise SolverError(f"matrix game dual LP came back {dual.status}")
    if abs(primal.objective - dual.objective) > 1e-8:
        raise SolverError(
            f"primal/dual gap {primal.objective - dual.objective:.3e} exceeds tolerance"
        )

    x = np.clip(primal.x[:l], 0.0, None)
    x /= x.sum()
    y = np.clip(dual.x[:m], 0.0, None)
    y /= y.sum()
    return float(primal.objective - shift), x, y


def solve_matrix_game(
    game: MatrixGame,
    row_actions=None,
    col_actions=None,
) -> GameSolution:
    value, x, y = solve_matrix(game.matrix)
    l, m = game.matrix.shape
    rows = list(row_actions) if row_actions is not None else [f"r{i}" for i in range(l)]
    cols = list(col_actions) if col_actions is not None else [f"c{j}" for j in range(m)]
    return GameSolution(
        value=value,
        row_strategy=MixedStrategy({a: float(p) for a, p in zip(rows, x) if p > 0.0}),
        col_strategy=MixedStrategy({a: float(p) for a, p in zip(cols, y) if p > 0.0}),
    )
