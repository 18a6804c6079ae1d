"""Dense two-phase simplex solver for small linear programs.

Solves  min c.x  subject to  A_ub x <= b_ub,  A_eq x = b_eq,  lo <= x <= hi.
Bland's pivot rule throughout: deterministic and cycle-free. Intended for
desk-scale instances (hundreds of rows); larger programs should go through
a production solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

Bounds = tuple[float | None, float | None]


@dataclass
class LinearProgram:
    """Standard-form LP data. Empty constraint blocks may be None."""

    c: np.ndarray
    a_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    bounds: list[Bounds] | None = None
    names: list[str] | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.shape[0]
        self.a_ub, self.b_ub = _check_block(self.a_ub, self.b_ub, n, "ub")
        self.a_eq, self.b_eq = _check_block(self.a_eq, self.b_eq, n, "eq")
        if self.bounds is None:
            self.bounds = [(0.0, None)] * n
        if len(self.bounds) != n:
            raise ValueError(f"expected {n} bound pairs, got {len(self.bounds)}")
        if self.names is not None and len(self.names) != n:
            raise ValueError("names length mismatch")

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]


def _check_block(a, b, n, tag):
    if a is None and b is None:
        return np.zeros((0, n)), np.zeros(0)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if a.shape != (b.shape[0], n):
        raise ValueError(f"{tag} block shape mismatch: {a.shape} vs ({b.shape[0]}, {n})")
    return a, b


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0


def lp_solve(lp: LinearProgram, tol: float = 1e-9) -> LpSolution:
    """Solve the LP; returns an optimal basic solution when one exists."""
    a_std, b_std, c_std, recover, n_struct = _to_standard_form(lp)
    m = a_std.shape[0]

    # rows with negative rhs are negated so the artificial basis is feasible
    neg = b_std < 0
    a_std[neg] *= -1.0
    b_std[neg] *= -1.0

    n_total = n_struct + m
    tableau = np.zeros((m, n_total + 1))
    tableau[:, :n_struct] = a_std
    tableau[:, n_struct:n_total] = np.eye(m)
    tableau[:, -1] = b_std
    basis = list(range(n_struct, n_total))

    # phase 1: minimize the artificial sum
    phase1_cost = np.zeros(n_total)
    phase1_cost[n_struct:] = 1.0
    status, iters1 = _simplex(tableau, basis, phase1_cost, n_total, tol)
    if status != OPTIMAL:
        return LpSolution(status=INFEASIBLE, iterations=iters1)
    if _objective(tableau, basis, phase1_cost) > 1e-7:
        return LpSolution(status=INFEASIBLE, iterations=iters1)

    _drive_out_artificials(tableau, basis, n_struct, tol)
    # an artificial still basic after the drive-out marks a redundant row
    rows = [i for i, bv in enumerate(basis) if bv < n_struct]
    if len(rows) < len(basis):
        tableau = tableau[rows]
        basis = [basis[i] for i in rows]

    # phase 2: original objective, artificial columns barred from entering
    phase2_cost = np.zeros(n_total)
    phase2_cost[:n_struct] = c_std
    status, iters2 = _simplex(tableau, basis, phase2_cost, n_struct, tol)
    if status == UNBOUNDED:
        return LpSolution(status=UNBOUNDED, iterations=iters1 + iters2)

    y = np.zeros(n_total)
    for row, bv in enumerate(basis):
        y[bv] = tableau[row, -1]
    x = recover(y[:n_struct])
    return LpSolution(
        status=OPTIMAL,
        x=x,
        objective=float(lp.c @ x),
        iterations=iters1 + iters2,
    )


def _objective(tableau, basis, cost) -> float:
    return float(sum(cost[bv] * tableau[i, -1] for i, bv in enumerate(basis)))


def _simplex(tableau, basis, cost, n_enterable, tol) -> tuple[str, int]:
    """Bland-rule simplex on the tableau in place; returns (status, iterations)."""
    m = tableau.shape[0]
    iterations = 0
    max_iterations = 50_000
    while iterations < max_iterations:
        iterations += 1
        cb = cost[basis]
        reduced = cost[:n_enterable] - cb @ tableau[:, :n_enterable]
        entering = -1
        for j in range(n_enterable):
            if reduced[j] < -tol and j not in basis:
                entering = j
                break
        if entering < 0:
            return OPTIMAL, iterations

        col = tableau[:, entering]
        best_ratio, leaving = None, -1
        for i in range(m):
            if col[i] > tol:
                ratio = tableau[i, -1] / col[i]
                if (
                    best_ratio is None
                    or ratio < best_ratio - tol
                    or (abs(ratio - best_ratio) <= tol and basis[i] < basis[leaving])
                ):
                    best_ratio, leaving = ratio, i
        if leaving < 0:
            return UNBOUNDED, iterations

        pivot = tableau[leaving, entering]
        tableau[leaving] /= pivot
        for i in range(m):
            if i != leaving and abs(tableau[i, entering]) > 1e-14:
                tableau[i] -= tableau[i, entering] * tableau[leaving]
        basis[leaving] = entering
    raise RuntimeError(f"simplex exceeded {max_iterations} iterations")


def _drive_out_artificials(tableau, basis, n_struct, tol) -> None:
    m = tableau.shape[0]
    for i in range(m):
        if basis[i] >= n_struct:
            for j in range(n_struct):
                if abs(tableau[i, j]) > tol and j not in basis:
                    pivot = tableau[i, j]
                    tableau[i] /= pivot
                    for r in range(m):
                        if r != i and abs(tableau[r, j]) > 1e-14:
                            tableau[r] -= tableau[r, j] * tableau[i]
                    basis[i] = j
                    break


def _to_standard_form(lp: LinearProgram):
    """Rewrite to  min c.y, A y = b, y >= 0  with a map back to original x.

    Shifted, negated, and split variables express finite lower bounds, pure
    upper bounds, and free variables respectively; finite two-sided bounds
    add an extra inequality row; inequality rows gain slack variables.
    """
    n = lp.n_vars
    col_of: list[tuple] = []
    n_y = 0
    extra_rows: list[tuple[int, float]] = []  # (y column, rhs) for y <= rhs
    for j, (lo, hi) in enumerate(lp.bounds):
        if lo is not None:
            col_of.append(("shift", n_y, lo))
            if hi is not None:
                extra_rows.append((n_y, hi - lo))
            n_y += 1
        elif hi is not None:
            col_of.append(("neg", n_y, hi))
            n_y += 1
        else:
            col_of.append(("free", n_y, 0.0))
            n_y += 2

    def expand(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rows = a.shape[0]
        out = np.zeros((rows, n_y))
        rhs = b.copy()
        for j, (kind, k, const) in enumerate(col_of):
            coef = a[:, j]
            if kind == "shift":
                out[:, k] += coef
                rhs -= coef * const
            elif kind == "neg":
                out[:, k] -= coef
                rhs -= coef * const
            else:
                out[:, k] += coef
                out[:, k + 1] -= coef
        return out, rhs

    a_ub_y, b_ub_y = expand(lp.a_ub, lp.b_ub)
    a_eq_y, b_eq_y = expand(lp.a_eq, lp.b_eq)
    if extra_rows:
        box = np.zeros((len(extra_rows), n_y))
        box_rhs = np.zeros(len(extra_rows))
        for i, (k, rhs) in enumerate(extra_rows):
            box[i, k] = 1.0
            box_rhs[i] = rhs
        a_ub_y = np.vstack([a_ub_y, box])
        b_ub_y = np.concatenate([b_ub_y, box_rhs])

    n_ub = a_ub_y.shape[0]
    n_struct = n_y + n_ub
    a = np.zeros((n_ub + a_eq_y.shape[0], n_struct))
    a[:n_ub, :n_y] = a_ub_y
    a[:n_ub, n_y:] = np.eye(n_ub)
    a[n_ub:, :n_y] = a_eq_y
    b = np.concatenate([b_ub_y, b_eq_y])

    c_y = np.zeros(n_struct)
    for j, (kind, k, _) in enumerate(col_of):
        if kind == "shift":
            c_y[k] += lp.c[j]
        elif kind == "neg":
            c_y[k] -= lp.c[j]
        else:
            c_y[k] += lp.c[j]
            c_y[k + 1] -= lp.c[j]

    def recover(y: np.ndarray) -> np.ndarray:
        x = np.zeros(n)
        for j, (kind, k, const) in enumerate(col_of):
            if kind == "shift":
                x[j] = const + y[k]
            elif kind == "neg":
                x[j] = const - y[k]
            else:
                x[j] = y[k] - y[k + 1]
        return x

    return a, b, c_y, recover, n_struct


def format_lp(lp: LinearProgram) -> str:
    """Plain-text standard-form listing, for debugging dumps."""
    names = lp.names or [f"x{j}" for j in range(lp.n_vars)]

    def term_line(coefs) -> str:
        terms = [f"{c:+g}*{names[j]}" for j, c in enumerate(coefs) if c != 0.0]
        return " ".join(terms) if terms else "0"

    lines = ["minimize", f"  {term_line(lp.c)}", "subject to"]
    for row, rhs in zip(lp.a_ub, lp.b_ub):
        lines.append(f"  {term_line(row)} <= {rhs:g}")
    for row, rhs in zip(lp.a_eq, lp.b_eq):
        lines.append(f"  {term_line(row)} == {rhs:g}")
    lines.append("bounds")
    for j, (lo, hi) in enumerate(lp.bounds):
        lo_s = "-inf" if lo is None else f"{lo:g}"
        hi_s = "+inf" if hi is None else f"{hi:g}"
        lines.append(f"  {lo_s} <= {names[j]} <= {hi_s}")
    return "\n".join(lines) + "\n"
