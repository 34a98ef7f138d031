"""Conic solution of the per-block convex subproblems.

Every surrogate system is a second-order-cone program: a linear objective
(sum of rate variables) under affine rows, convex quadratic constraints
||Q x + q0||^2 <= lin.x + const, and square-root product caps
t <= 2 c sqrt(x) - d y. The square-root and quadratic constraints are
rewritten as standard second-order cones; complex quantizer matrices enter
through their real embedding (handled upstream in the manifest layout).

The default backend embeds the cone program directly into Clarabel, which
keeps the per-solve overhead at milliseconds. A cvxpy-based backend solves
the identical system through cvxpy's canonicalization and is used as a
cross-check and as the hook for plugging in other conic solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fp import AffineCon, AnchorViolationError, QuadCone, RateCap, SurrogateSystem, UsageCap

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITERATIONS = "max-iterations"
STATUS_NUMERICAL = "numerical-trouble"


@dataclass
class ConvexSubproblem:
    """Variable manifest, constraint list and linear objective for one block."""

    manifest: object
    records: list
    objective_idx: np.ndarray
    anchor: np.ndarray

    @classmethod
    def from_system(cls, system: SurrogateSystem) -> "ConvexSubproblem":
        return cls(manifest=system.manifest, records=system.records,
                   objective_idx=system.objective_idx, anchor=system.anchor)

    def objective(self, x: np.ndarray) -> float:
        return float(np.sum(x[self.objective_idx]))

    def max_violation(self, x: np.ndarray) -> float:
        worst = 0.0
        for rec in self.records:
            worst = max(worst, -rec.evaluate(x))
        return worst

    def describe(self) -> str:
        lines = [f"variables {self.manifest.size}",
                 f"constraints {len(self.records)}"]
        for rec in self.records:
            lines.append(f"  [{rec.origin}] {rec.tag} {type(rec).__name__}")
        return "\n".join(lines)


@dataclass
class SolveResult:
    x: np.ndarray
    status: str
    objective: float
    used_warm_start: bool = False


class _ConeAssembler:
    """Collects rows of A x + s = b with s in (zero | nonneg | soc) cones."""

    def __init__(self, n_vars: int):
        self.n = n_vars
        self.extra = 0
        self.eq_rows: list = []
        self.ineq_rows: list = []
        self.soc_blocks: list = []

    def new_var(self) -> int:
        idx = self.n + self.extra
        self.extra += 1
        return idx

    @staticmethod
    def _row(idx, coef, rhs):
        return (np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), float(rhs))

    def add_eq(self, idx, coef, rhs):
        self.eq_rows.append(self._row(idx, coef, rhs))

    def add_ineq(self, idx, coef, rhs):
        """coef . x <= rhs."""
        self.ineq_rows.append(self._row(idx, coef, rhs))

    def add_soc(self, rows):
        """rows = [(idx, coef, rhs), ...]; constrains b - A x to the SOC."""
        self.soc_blocks.append([self._row(*r) for r in rows])

    def add_sq_le(self, u_idx: int, lin_idx, lin_coef, const: float):
        """u^2 <= lin . x + const via ||[2u, w-1]|| <= w+1."""
        idx = np.asarray(lin_idx, dtype=int)
        coef = np.asarray(lin_coef, dtype=float)
        self.add_soc([
            (idx, -coef, const + 1.0),
            (np.array([u_idx]), np.array([-2.0]), 0.0),
            (idx, -coef, const - 1.0),
        ])

    def build(self, q_main: np.ndarray):
        n_total = self.n + self.extra
        q = np.zeros(n_total)
        q[: self.n] = q_main
        rows_i, cols_i, vals, b, cones = [], [], [], [], []
        import clarabel

        def push(row):
            idx, coef, rhs = row
            r = len(b)
            rows_i.extend([r] * len(idx))
            cols_i.extend(idx.tolist())
            vals.extend(coef.tolist())
            b.append(rhs)

        for row in self.eq_rows:
            push(row)
        if self.eq_rows:
            cones.append(clarabel.ZeroConeT(len(self.eq_rows)))
        for row in self.ineq_rows:
            push(row)
        if self.ineq_rows:
            cones.append(clarabel.NonnegativeConeT(len(self.ineq_rows)))
        for block in self.soc_blocks:
            for row in block:
                push(row)
            cones.append(clarabel.SecondOrderConeT(len(block)))
        A = sp.csc_matrix(
            (vals, (rows_i, cols_i)), shape=(len(b), n_total))
        P = sp.csc_matrix((n_total, n_total))
        return P, q, A, np.array(b), cones, n_total


def _lower(problem: ConvexSubproblem, assembler: _ConeAssembler) -> None:
    for rec in problem.records:
        if isinstance(rec, AffineCon):
            if rec.equality:
                assembler.add_eq(rec.idx, rec.coef, rec.rhs)
            else:
                assembler.add_ineq(rec.idx, rec.coef, rec.rhs)
        elif isinstance(rec, QuadCone):
            m = rec.Q.shape[0]
            idx = rec.cols
            if m == 0:
                # degenerate: ||q0||^2 <= lin.x + const
                assembler.add_ineq(idx, -rec.lin,
                                   rec.const - float(rec.q0 @ rec.q0))
                continue
            # ||[2(Qx+q0), w-1]|| <= w+1 with w = lin.x + const
            rows = [(idx, -rec.lin, rec.const + 1.0)]
            for j in range(m):
                rows.append((idx, -2.0 * rec.Q[j], 2.0 * rec.q0[j]))
            rows.append((idx, -rec.lin, rec.const - 1.0))
            assembler.add_soc(rows)
        elif isinstance(rec, RateCap):
            s_idx = assembler.new_var()
            # s alpha >= c^2 via SOC ||[2c, s - alpha]|| <= s + alpha
            assembler.add_soc([
                (np.array([s_idx, rec.alpha_idx]), np.array([-1.0, -1.0]), 0.0),
                (np.array([], dtype=int), np.array([]), 2.0 * rec.c),
                (np.array([s_idx, rec.alpha_idx]), np.array([-1.0, 1.0]), 0.0),
            ])
            if rec.w_idx is None:
                # R + s <= 2 c sqrt(w_fixed)
                assembler.add_ineq(
                    np.array([rec.r_idx, s_idx]), np.array([1.0, 1.0]),
                    2.0 * rec.c * np.sqrt(max(rec.w_fixed, 0.0)))
            else:
                u_idx = assembler.new_var()
                assembler.add_ineq(np.array([u_idx]), np.array([-1.0]), 0.0)
                assembler.add_sq_le(u_idx, np.array([rec.w_idx]), np.array([1.0]), 0.0)
                assembler.add_ineq(
                    np.array([rec.r_idx, u_idx, s_idx]),
                    np.array([1.0, -2.0 * rec.c, 1.0]), 0.0)
        elif isinstance(rec, UsageCap):
            u_idx = assembler.new_var()
            assembler.add_ineq(np.array([u_idx]), np.array([-1.0]), 0.0)
            assembler.add_sq_le(u_idx, np.array([rec.rho_idx]), np.array([1.0]), 0.0)
            if rec.w_idx is None:
                assembler.add_ineq(
                    np.array([rec.t_idx, u_idx]), np.array([1.0, -2.0 * rec.c]),
                    -rec.c ** 2 * rec.w_fixed)
            else:
                assembler.add_ineq(
                    np.array([rec.t_idx, u_idx, rec.w_idx]),
                    np.array([1.0, -2.0 * rec.c, rec.c ** 2]), 0.0)
        else:
            raise TypeError(f"unknown record type {type(rec)!r}")


class ClarabelBackend:
    """Direct cone-program embedding solved with Clarabel."""

    name = "clarabel"

    def solve(self, problem: ConvexSubproblem, tol: float) -> SolveResult:
        import clarabel

        assembler = _ConeAssembler(problem.manifest.size)
        _lower(problem, assembler)
        q = np.zeros(problem.manifest.size)
        q[problem.objective_idx] = -1.0
        P, qv, A, b, cones, n_total = assembler.build(q)
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_feas = min(tol * 1e-2, 1e-9)
        settings.tol_gap_abs = min(tol * 1e-2, 1e-9)
        settings.tol_gap_rel = min(tol * 1e-2, 1e-9)
        solver = clarabel.DefaultSolver(P, qv, A, b, cones, settings)
        sol = solver.solve()
        status = str(sol.status)
        x = np.asarray(sol.x)[: problem.manifest.size]
        if status in ("Solved", "SolverStatus.Solved"):
            st = STATUS_OPTIMAL
        elif "AlmostSolved" in status:
            st = STATUS_OPTIMAL
        elif "MaxIter" in status or "MaxTime" in status:
            st = STATUS_MAX_ITERATIONS
        else:
            st = STATUS_NUMERICAL
        return SolveResult(x=x, status=st, objective=problem.objective(x))


class CvxpyBackend:
    """Reference backend through cvxpy; slower, used for cross-checking."""

    name = "cvxpy"

    def __init__(self, solver: str | None = None):
        self.solver = solver

    def solve(self, problem: ConvexSubproblem, tol: float) -> SolveResult:
        import cvxpy as cp

        n = problem.manifest.size
        x = cp.Variable(n)
        cons = []
        for rec in problem.records:
            if isinstance(rec, AffineCon):
                expr = rec.coef @ x[rec.idx]
                cons.append(expr == rec.rhs if rec.equality else expr <= rec.rhs)
            elif isinstance(rec, QuadCone):
                lhs = cp.sum_squares(rec.Q @ x[rec.cols] + rec.q0) if rec.Q.shape[0] else float(rec.q0 @ rec.q0)
                cons.append(lhs <= rec.lin @ x[rec.cols] + rec.const)
            elif isinstance(rec, RateCap):
                s = cp.Variable(nonneg=True)
                cons.append(cp.quad_over_lin(rec.c, x[rec.alpha_idx]) <= s)
                w = x[rec.w_idx] if rec.w_idx is not None else rec.w_fixed
                if rec.w_idx is not None:
                    u = cp.Variable(nonneg=True)
                    cons.append(cp.square(u) <= w)
                    cons.append(x[rec.r_idx] + s <= 2.0 * rec.c * u)
                else:
                    cons.append(x[rec.r_idx] + s <= 2.0 * rec.c * np.sqrt(max(rec.w_fixed, 0.0)))
            elif isinstance(rec, UsageCap):
                u = cp.Variable(nonneg=True)
                cons.append(cp.square(u) <= x[rec.rho_idx])
                w = x[rec.w_idx] if rec.w_idx is not None else rec.w_fixed
                cons.append(x[rec.t_idx] + rec.c ** 2 * w <= 2.0 * rec.c * u)
            else:
                raise TypeError(f"unknown record type {type(rec)!r}")
        objective = cp.Maximize(cp.sum(x[problem.objective_idx]))
        prob = cp.Problem(objective, cons)
        kwargs = {}
        if self.solver:
            kwargs["solver"] = self.solver
        prob.solve(**kwargs)
        if prob.status in ("optimal", "optimal_inaccurate"):
            st = STATUS_OPTIMAL
        else:
            st = STATUS_NUMERICAL
        xv = np.zeros(n) if x.value is None else np.asarray(x.value)
        return SolveResult(x=xv, status=st, objective=problem.objective(xv))


DEFAULT_BACKEND = ClarabelBackend()


def solve(problem: ConvexSubproblem | SurrogateSystem,
          warm_start: np.ndarray | None = None,
          tol: float = 1e-7,
          backend=None) -> SolveResult:
    """Solve one block subproblem; never regresses below the warm start.

    The warm start (the FP anchor by default) must satisfy every emitted
    constraint; a violated anchor indicates an inconsistency in the
    surrogate construction, not bad user input, and raises
    :class:`AnchorViolationError`. If the backend reports trouble or returns
    a worse objective than the warm start, the warm start is returned.
    """
    if isinstance(problem, SurrogateSystem):
        problem = ConvexSubproblem.from_system(problem)
    backend = backend or DEFAULT_BACKEND
    anchor = problem.anchor if warm_start is None else warm_start
    anchor_violation = problem.max_violation(anchor)
    if anchor_violation > 1e2 * tol:
        worst = min(problem.records, key=lambda r: r.evaluate(anchor))
        raise AnchorViolationError(
            f"anchor violation: {worst.tag} [{worst.origin}] slack "
            f"{worst.evaluate(anchor):.3e}")
    anchor_obj = problem.objective(anchor)
    result = backend.solve(problem, tol)
    if result.status == STATUS_NUMERICAL:
        return SolveResult(x=anchor.copy(), status=STATUS_NUMERICAL,
                           objective=anchor_obj, used_warm_start=True)
    violation = problem.max_violation(result.x)
    regressed = result.objective < anchor_obj - 10.0 * max(tol, 1e-9) * max(1.0, abs(anchor_obj))
    if violation > max(10.0 * tol, 1e-6) or regressed:
        return SolveResult(x=anchor.copy(), status=result.status,
                           objective=anchor_obj, used_warm_start=True)
    return result
