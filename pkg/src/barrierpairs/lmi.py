"""Minimal LMI modeling layer with a conic solve interface and certificate checkers.

Decision variables are named symmetric blocks, general matrix blocks, and
scalars.  Constraints are affine matrix expressions required negative or
positive semidefinite with a strictness margin, so that the strict
inequalities of the synthesis conditions become closed-cone constraints the
backend can return solutions on.  Lowering and conic solving are delegated to
cvxpy; the default backend is CLARABEL with SCS as an alternative.
"""

import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

DEFAULT_MARGIN = 1e-6
DEFAULT_TOL = 1e-8
DEFAULT_SOLVER = "CLARABEL"

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class Constraint:
    """One semidefinite requirement on an affine matrix expression.

    ``sense`` is "nsd" (expr + margin*I negative semidefinite) or "psd"
    (expr - margin*I positive semidefinite).
    """

    name: str
    expr: object
    sense: str
    margin: float

    @property
    def size(self):
        return int(self.expr.shape[0])

    def matrix_value(self):
        """Numeric value of the expression at the current variable values."""
        v = self.expr.value
        if v is None:
            raise ValueError(f"constraint {self.name!r}: variables have no values yet")
        v = np.atleast_2d(np.asarray(v, dtype=float))
        return 0.5 * (v + v.T)

    def violation(self):
        """How far the margined inequality is from holding (0 when satisfied)."""
        val = self.matrix_value()
        eigs = np.linalg.eigvalsh(val)
        if self.sense == "nsd":
            return max(0.0, eigs[-1] + self.margin)
        return max(0.0, self.margin - eigs[0])


class LmiProblem:
    """Container for named decision variables, constraints, and one objective."""

    def __init__(self):
        self.variables = {}
        self.constraints = []
        self.objective = ("feasibility", None)

    def sym(self, name, n):
        """Declare an n x n symmetric matrix variable."""
        return self._register(name, cp.Variable((n, n), symmetric=True, name=name))

    def mat(self, name, rows, cols):
        """Declare a general rows x cols matrix variable."""
        return self._register(name, cp.Variable((rows, cols), name=name))

    def scalar(self, name, nonneg=False):
        """Declare a scalar variable."""
        return self._register(name, cp.Variable(nonneg=nonneg, name=name))

    def _register(self, name, var):
        if name in self.variables:
            raise ValueError(f"variable {name!r} already declared")
        self.variables[name] = var
        return var

    def require_nsd(self, expr, name, margin=DEFAULT_MARGIN):
        """Require expr + margin*I to be negative semidefinite."""
        return self._require(expr, name, "nsd", margin)

    def require_psd(self, expr, name, margin=DEFAULT_MARGIN):
        """Require expr - margin*I to be positive semidefinite."""
        return self._require(expr, name, "psd", margin)

    def _require(self, expr, name, sense, margin):
        if not isinstance(expr, cp.Expression):
            expr = cp.Constant(np.atleast_2d(np.asarray(expr, dtype=float)))
        if expr.ndim == 0:
            expr = cp.reshape(expr, (1, 1), order="F")
        elif expr.ndim == 1:
            if expr.shape[0] != 1:
                raise ValueError(f"constraint {name!r}: expression is a vector, not a matrix")
            expr = cp.reshape(expr, (1, 1), order="F")
        if expr.shape[0] != expr.shape[1]:
            raise ValueError(f"constraint {name!r}: expression is not square, shape {expr.shape}")
        con = Constraint(name=name, expr=expr, sense=sense, margin=float(margin))
        self.constraints.append(con)
        return con

    def maximize_logdet(self, name):
        """Maximize the log-determinant of a declared symmetric variable."""
        var = self.variables[name]
        if not var.is_symmetric():
            raise ValueError(f"log-det objective needs a symmetric variable, got {name!r}")
        self.objective = ("maxlogdet", name)

    def minimize_scalar(self, name):
        """Minimize a declared scalar variable."""
        var = self.variables[name]
        if var.shape not in ((), (1,)):
            raise ValueError(f"scalar objective needs a scalar variable, got {name!r}")
        self.objective = ("minimize", name)


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solve: status, variable values, objective, worst violation."""

    status: str
    values: dict = field(default_factory=dict)
    objective: float = float("nan")
    max_violation: float = float("nan")
    solver_status: str = ""

    @property
    def ok(self):
        return self.status == STATUS_OPTIMAL


def _cvxpy_problem(problem):
    cons = []
    for c in problem.constraints:
        m = c.margin * np.eye(c.size)
        sym_expr = 0.5 * (c.expr + c.expr.T)
        if c.sense == "nsd":
            cons.append(sym_expr + m << 0)
        else:
            cons.append(sym_expr - m >> 0)
    kind, name = problem.objective
    if kind == "maxlogdet":
        objective = cp.Maximize(cp.log_det(problem.variables[name]))
    elif kind == "minimize":
        objective = cp.Minimize(problem.variables[name])
    else:
        objective = cp.Minimize(0)
    return cp.Problem(objective, cons)


def _solver_options(solver, tol):
    if solver == "CLARABEL":
        return {"tol_feas": tol, "tol_gap_abs": tol, "tol_gap_rel": tol}
    if solver == "SCS":
        return {"eps": tol}
    return {}


def solve(problem, tol=DEFAULT_TOL, solver=DEFAULT_SOLVER):
    """Solve an LmiProblem and report status, values, and worst constraint violation.

    Infeasibility is reported in the returned status, never raised; backend
    breakdown maps to the numerical-failure status.
    """
    cvx = _cvxpy_problem(problem)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # inaccurate-solution warnings; statuses carry this
            cvx.solve(solver=solver, **_solver_options(solver, tol))
    except (cp.error.SolverError, ValueError, ArithmeticError):
        return SolveReport(status=STATUS_NUMERICAL_FAILURE, solver_status="solver-exception")
    status = cvx.status
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        return SolveReport(status=STATUS_INFEASIBLE, solver_status=status)
    if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        return SolveReport(status=STATUS_NUMERICAL_FAILURE, solver_status=status)
    values = {}
    for name, var in problem.variables.items():
        v = var.value
        if v is None:
            return SolveReport(status=STATUS_NUMERICAL_FAILURE, solver_status=status)
        if var.ndim == 0:
            values[name] = float(v)
        else:
            arr = np.asarray(v, dtype=float)
            values[name] = 0.5 * (arr + arr.T) if var.is_symmetric() else arr
    max_violation = max((c.violation() for c in problem.constraints), default=0.0)
    objective = float(cvx.value) if cvx.value is not None else float("nan")
    return SolveReport(status=STATUS_OPTIMAL, values=values, objective=objective,
                       max_violation=max_violation, solver_status=status)


def check_definite(M, sense, tol=DEFAULT_TOL):
    """Eigenvalue test for definiteness with a tolerance offset.

    ``sense`` is "negative" or "positive".  Returns ``(ok, extreme)`` where
    ``extreme`` is the worst eigenvalue for the requested sense (largest for
    negative, smallest for positive).  The matrix is symmetrized internally;
    asymmetry beyond 1e-10 (relative to its magnitude) is rejected.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    scale = max(1.0, np.abs(M).max())
    if np.abs(M - M.T).max() > 1e-10 * scale:
        raise ValueError("matrix is not symmetric within 1e-10")
    eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
    if sense == "negative":
        extreme = float(eigs[-1])
        return extreme <= -tol, extreme
    if sense == "positive":
        extreme = float(eigs[0])
        return extreme >= tol, extreme
    raise ValueError(f"sense must be 'negative' or 'positive', got {sense!r}")


def dump_problem(problem, stream):
    """Write the assembled problem as labeled row-major numeric blocks.

    For each constraint the constant block and the coefficient block of every
    scalar variable entry are printed, so the assembled affine expressions can
    be cross-checked entry by entry in another tool.
    """

    def write_block(label, mat):
        stream.write(f"block {label} {mat.shape[0]}x{mat.shape[1]}\n")
        for row in np.atleast_2d(mat):
            stream.write("  " + " ".join(repr(float(x)) for x in row) + "\n")

    saved = {name: var.value for name, var in problem.variables.items()}
    try:
        for var in problem.variables.values():
            var.value = np.zeros(var.shape) if var.ndim else 0.0
        kind, name = problem.objective
        stream.write(f"objective {kind}{' ' + name if name else ''}\n")
        stream.write(f"variables {len(problem.variables)}\n")
        for name, var in problem.variables.items():
            shape = var.shape if var.ndim else (1, 1)
            kindstr = "symmetric" if var.ndim and var.is_symmetric() else "general"
            stream.write(f"  var {name} {shape[0]}x{shape[-1] if var.ndim == 2 else 1} {kindstr}\n")
        for con in problem.constraints:
            stream.write(f"constraint {con.name} sense={con.sense} margin={con.margin!r}\n")
            const = np.atleast_2d(np.asarray(con.expr.value, dtype=float))
            write_block("constant", const)
            for name, var in problem.variables.items():
                base = np.zeros(var.shape) if var.ndim else 0.0
                idx_iter = np.ndindex(var.shape) if var.ndim else [()]
                for idx in idx_iter:
                    probe = np.array(base, copy=True) if var.ndim else 1.0
                    if var.ndim:
                        probe[idx] = 1.0
                        if var.is_symmetric():
                            probe[idx[::-1]] = 1.0
                    var.value = probe
                    coef = np.atleast_2d(np.asarray(con.expr.value, dtype=float)) - const
                    if np.any(coef):
                        label = name if not var.ndim else name + "[" + ",".join(map(str, idx)) + "]"
                        write_block(f"coeff {label}", coef)
                var.value = np.zeros(var.shape) if var.ndim else 0.0
    finally:
        for name, var in problem.variables.items():
            var.value = saved[name]
