"""Barrier pair synthesis: invariance/limit LMIs, multiplier search, recovery, verification.

Fixing the scalar multipliers turns the invariance condition into an LMI in
the transformed variables (X, Y, E, F, G); the search is a deterministic grid
over the multipliers, keeping the feasible point with the largest log-det of
Y (the volume proxy for the plant-state projection of the unit sub-level
set).  The controller is recovered from the winning solution through the
lower-triangular Cholesky factor V of X - inv(Y), and every certificate is
re-checked numerically on the assembled matrices before the pair is returned.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import lmi
from .errors import RecoveryError, SynthesisInfeasibleError, VerificationError
from .model import Controller, canonical_realization, closed_loop_matrices

DEFAULT_MU_W_GRID = tuple(np.logspace(-2, 3, 13))
DEFAULT_MU_GRID = tuple(np.logspace(-2, 3, 7))
EXHAUSTIVE_NP_LIMIT = 2
NEAR_SINGULAR_FLOOR = 1e-9


@dataclass(frozen=True)
class MultiplierGrid:
    """Search grid for the disturbance multiplier and the per-direction multipliers.

    Exhaustive over the product grid for n_p <= 2; beyond that the directions
    are refined coordinate-wise from the middle of the grid, two passes.
    """

    mu_w: tuple = DEFAULT_MU_W_GRID
    mu: tuple = DEFAULT_MU_GRID

    def __post_init__(self):
        object.__setattr__(self, "mu_w", tuple(float(v) for v in self.mu_w))
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        if not self.mu_w or any(v < 0 for v in self.mu_w):
            raise ValueError("mu_w grid must be nonempty and nonnegative")
        if not self.mu or any(v < 0 for v in self.mu):
            raise ValueError("mu grid must be nonempty and nonnegative")


@dataclass(frozen=True)
class TransformedVars:
    """Optimization output in the transformed controller parametrization."""

    X: np.ndarray
    Y: np.ndarray
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class BarrierPair:
    """A verified barrier function and safety controller.

    The barrier is the P-weighted norm of the stacked plant/controller state;
    P is assembled from (X, V) with identity lower-right block, so its inverse
    carries (Y, W) in the corresponding blocks.  ``mu_w``/``mu_vec`` are the
    multipliers the invariance certificate was established with.
    """

    X: np.ndarray
    Y: np.ndarray
    V: np.ndarray
    W: np.ndarray
    controller: Controller
    epsilon: float
    P: np.ndarray
    mu_w: float
    mu_vec: np.ndarray

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def logdet_Y(self):
        return float(np.linalg.slogdet(self.Y)[1])

    @property
    def Q(self):
        return np.linalg.inv(self.P)

    def barrier(self, x_cl):
        """Barrier value at one closed-loop state (or a column stack of states)."""
        x = np.asarray(x_cl, dtype=float)
        if x.ndim == 1:
            return float(np.sqrt(x @ self.P @ x))
        return np.sqrt(np.einsum("id,ij,jd->d", x, self.P, x))


def synthesis_variables(problem, n):
    """Declare the transformed decision variables on an LMI problem."""
    return TransformedVars(
        X=problem.sym("X", n),
        Y=problem.sym("Y", n),
        E=problem.mat("E", n, n),
        F=problem.mat("F", n, 1),
        G=problem.mat("G", 1, n),
    )


def coupling_block(tv, n):
    """The [[Y, I], [I, X]] block whose positivity couples the two Lyapunov factors."""
    import cvxpy as cp

    eye = np.eye(n)
    return cp.bmat([[tv.Y, eye], [eye, tv.X]])


def build_invariance_lmi(problem, tv, real, spec, w_bar, mu_w, mu_vec,
                         margin=lmi.DEFAULT_MARGIN):
    """Add the invariance condition at fixed multipliers, plus positivity and coupling.

    Emits the block constraint tying the transformed closed-loop drift, the
    disturbance channel, and the uncertainty channels together; the
    disturbance multiplier scales the coupling block by (w_bar/epsilon)^2.
    Returns the added constraints.
    """
    import cvxpy as cp

    n = real.n
    n_p = real.n_p
    mu_vec = np.asarray(mu_vec, dtype=float).reshape(-1)
    if mu_vec.shape != (n_p,):
        raise ValueError(f"mu_vec must have length {n_p}, got {mu_vec.shape}")
    if mu_w < 0 or np.any(mu_vec < 0):
        raise ValueError("multipliers must be nonnegative")
    eps = spec.epsilon
    c0 = real.c0.reshape(1, n)
    by = real.b_y_bar.reshape(n, 1)
    bu = real.b_u_bar.reshape(n, 1)
    Ahat = real.A_hat_p

    core = cp.bmat([
        [Ahat @ tv.Y + bu @ tv.G, Ahat],
        [tv.E, tv.X @ Ahat + tv.F @ c0],
    ])
    H_A = core + core.T
    if mu_w > 0 and w_bar > 0:
        H_A = H_A + (mu_w * w_bar**2 / eps**2) * coupling_block(tv, n)

    H_B = cp.bmat([
        [by, real.b_tilde_p] if n_p else [by],
        [tv.F + tv.X @ by, tv.X @ real.b_tilde_p] if n_p else [tv.F + tv.X @ by],
    ])

    if n_p:
        Mp = np.diag(mu_vec)
        Mwp = np.diag(np.concatenate([[mu_w], mu_vec]))
        D_wp = np.hstack([real.theta_y.reshape(n_p, 1), np.zeros((n_p, n_p))])
        th_y = real.theta_y.reshape(n_p, 1)
        th_u = real.theta_u.reshape(n_p, 1)
        H_C = cp.bmat([[th_u @ tv.G + th_y @ (c0 @ tv.Y), th_y @ c0]])
        block = cp.bmat([
            [H_A, H_B, H_C.T @ Mp],
            [H_B.T, -Mwp, D_wp.T @ Mp],
            [Mp @ H_C, Mp @ D_wp, -Mp],
        ])
    else:
        block = cp.bmat([
            [H_A, H_B],
            [H_B.T, -mu_w * np.ones((1, 1))],
        ])

    added = [
        problem.require_psd(tv.X, "X_pd", margin),
        problem.require_psd(tv.Y, "Y_pd", margin),
        problem.require_psd(coupling_block(tv, n), "coupling", margin),
        problem.require_nsd(block, "invariance", margin),
    ]
    return added


def build_limit_lmis(problem, tv, real, spec, margin=lmi.DEFAULT_MARGIN):
    """Add the state-limit rows and the input-limit block.

    Each state constraint reduces to a scalar inequality on Y (the plant-state
    block of the inverse barrier matrix); the input limit is a bordered block
    on the coupling condition, which it therefore subsumes.  Returns the added
    constraints.
    """
    import cvxpy as cp

    n = real.n
    added = []
    for i, f in enumerate(spec.f_rows):
        expr = cp.reshape(f @ tv.Y @ f - 1.0, (1, 1), order="F")
        added.append(problem.require_nsd(expr, f"state_limit_{i}", margin))
    eye = np.eye(n)
    zero = np.zeros((n, 1))
    block = cp.bmat([
        [tv.Y, eye, tv.G.T],
        [eye, tv.X, zero],
        [tv.G, zero.T, np.array([[spec.u_bar**2]])],
    ])
    added.append(problem.require_psd(block, "input_limit", margin))
    return added


@dataclass(frozen=True)
class SynthesisOptions:
    """Numerical knobs for the grid search and the backing solver."""

    margin: float = lmi.DEFAULT_MARGIN
    tol: float = lmi.DEFAULT_TOL
    solver: str = lmi.DEFAULT_SOLVER
    verify_tol: float = 1e-7


def _solve_fixed_multipliers(real, spec, w_bar, mu_w, mu_vec, opts):
    problem = lmi.LmiProblem()
    tv = synthesis_variables(problem, real.n)
    build_invariance_lmi(problem, tv, real, spec, w_bar, mu_w, mu_vec, opts.margin)
    build_limit_lmis(problem, tv, real, spec, opts.margin)
    problem.maximize_logdet("Y")
    report = lmi.solve(problem, tol=opts.tol, solver=opts.solver)
    return report


def _values_to_tv(values):
    return TransformedVars(X=values["X"], Y=values["Y"], E=values["E"],
                           F=values["F"], G=values["G"])


def _grid_points(grid, n_p):
    if n_p == 0:
        return [(mw, np.zeros(0)) for mw in grid.mu_w]
    if n_p <= EXHAUSTIVE_NP_LIMIT:
        points = []
        for mw in grid.mu_w:
            mesh = np.meshgrid(*([list(grid.mu)] * n_p), indexing="ij")
            for idx in np.ndindex(mesh[0].shape):
                points.append((mw, np.array([m[idx] for m in mesh])))
        return points
    return None  # coordinate-wise refinement path


def synthesize(plant, spec, grid=None, options=None):
    """Search the multiplier grid, keep the largest-volume solution, recover, verify.

    Returns a verified :class:`BarrierPair`.  Raises
    :class:`SynthesisInfeasibleError` with per-point statuses when no grid
    point is feasible.
    """
    grid = grid if grid is not None else MultiplierGrid()
    opts = options if options is not None else SynthesisOptions()
    real = canonical_realization(plant)
    points = _grid_points(grid, plant.n_p)

    statuses = []
    best = None  # (objective, index, mu_w, mu_vec, values)
    if points is not None:
        for idx, (mu_w, mu_vec) in enumerate(points):
            report = _solve_fixed_multipliers(real, spec, plant.w_bar, mu_w, mu_vec, opts)
            statuses.append((mu_w, tuple(mu_vec), report.status))
            if report.ok and (best is None or report.objective > best[0]):
                best = (report.objective, idx, mu_w, mu_vec, report.values)
    else:
        best = _coordinate_refine(real, spec, plant.w_bar, grid, opts, statuses)

    if best is None:
        raise SynthesisInfeasibleError(
            "no multiplier grid point admitted a feasible barrier pair", statuses)

    _, _, mu_w, mu_vec, values = best
    tv = _values_to_tv(values)
    try:
        V, W, ctrl = recover_controller(tv, real)
    except RecoveryError:
        # Solutions sitting on the coupling boundary: shrink the Y ellipsoid by
        # re-solving once with a raised margin on the coupling-carrying blocks.
        values = _resolve_with_raised_margin(real, spec, plant.w_bar, mu_w, mu_vec, opts)
        tv = _values_to_tv(values)
        V, W, ctrl = recover_controller(tv, real)

    P = assemble_barrier_matrix(tv.X, V)
    bp = BarrierPair(X=tv.X, Y=tv.Y, V=V, W=W, controller=ctrl,
                     epsilon=spec.epsilon, P=P, mu_w=mu_w, mu_vec=np.asarray(mu_vec))
    verify_barrier_pair(plant, spec, bp, tol=opts.verify_tol)
    return bp


def _resolve_with_raised_margin(real, spec, w_bar, mu_w, mu_vec, opts):
    raised = SynthesisOptions(margin=max(1e-4, 10 * opts.margin), tol=opts.tol,
                              solver=opts.solver, verify_tol=opts.verify_tol)
    report = _solve_fixed_multipliers(real, spec, w_bar, mu_w, mu_vec, raised)
    if not report.ok:
        raise RecoveryError(
            "coupling block stayed near-singular after margin-raised re-solve")
    return report.values


def _coordinate_refine(real, spec, w_bar, grid, opts, statuses, passes=2):
    """Coordinate-wise multiplier refinement for n_p beyond the exhaustive limit."""
    n_p = real.n_p
    mid = grid.mu[len(grid.mu) // 2]
    mu_vec = np.full(n_p, mid)
    best = None
    counter = 0
    for _ in range(passes):
        for coord in range(-1, n_p):  # -1 sweeps mu_w
            candidates = grid.mu_w if coord < 0 else grid.mu
            local_best = None
            for cand in candidates:
                mu_w = cand if coord < 0 else (best[2] if best else grid.mu_w[0])
                trial = mu_vec.copy()
                if coord >= 0:
                    trial[coord] = cand
                report = _solve_fixed_multipliers(real, spec, w_bar, mu_w, trial, opts)
                statuses.append((mu_w, tuple(trial), report.status))
                if report.ok and (local_best is None or report.objective > local_best[0]):
                    local_best = (report.objective, counter, mu_w, trial.copy(), report.values)
                counter += 1
            if local_best is not None:
                if best is None or local_best[0] > best[0]:
                    best = local_best
                mu_vec = best[3].copy()
    return best


def recover_controller(tv, real):
    """Recover (V, W, controller) from the transformed variables.

    V is the lower-triangular Cholesky factor of X - inv(Y) and W = -Y V; the
    controller matrices invert the variable transformation.  Raises
    :class:`RecoveryError` when the coupling block is not positive definite
    within tolerance.
    """
    X, Y = tv.X, tv.Y
    n = X.shape[0]
    Yinv = np.linalg.inv(Y)
    gap = 0.5 * ((X - Yinv) + (X - Yinv).T)
    lam_min = float(np.linalg.eigvalsh(gap)[0])
    if lam_min < NEAR_SINGULAR_FLOOR:
        raise RecoveryError(
            f"X - inv(Y) has minimum eigenvalue {lam_min:.3e}; solution unusable for recovery")
    V = np.linalg.cholesky(gap)
    W = -Y @ V
    c0 = real.c0.reshape(1, n)
    F = tv.F.reshape(n, 1)
    G = tv.G.reshape(1, n)
    b_k = np.linalg.solve(V, F).reshape(n)
    c_k = np.linalg.solve(W, G.T).reshape(n)
    core = tv.E - F @ c0 @ Y - X @ real.b_u_bar.reshape(n, 1) @ G - X @ real.A_hat_p @ Y
    A_k = np.linalg.solve(W, np.linalg.solve(V, core).T).T
    return V, W, Controller(A_k=A_k, b_k=b_k, c_k=c_k)


def transformed_from_controller(X, Y, V, W, ctrl, real):
    """Reassemble (E, F, G) from a recovered controller; inverse of the recovery."""
    n = X.shape[0]
    c0 = real.c0.reshape(1, n)
    F = V @ ctrl.b_k.reshape(n, 1)
    G = ctrl.c_k.reshape(1, n) @ W.T
    E = (V @ ctrl.A_k @ W.T + F @ c0 @ Y
         + X @ real.b_u_bar.reshape(n, 1) @ G + X @ real.A_hat_p @ Y)
    return TransformedVars(X=X, Y=Y, E=E, F=F, G=G)


def assemble_barrier_matrix(X, V):
    """Assemble the barrier matrix P from its upper blocks, identity lower-right."""
    n = X.shape[0]
    P = np.block([[X, V], [V.T, np.eye(n)]])
    return 0.5 * (P + P.T)


def invariance_matrix_transformed(tv, real, spec, w_bar, mu_w, mu_vec):
    """Numeric invariance block at given transformed variables (for certificates)."""
    n = real.n
    n_p = real.n_p
    mu_vec = np.asarray(mu_vec, dtype=float).reshape(-1)
    c0 = real.c0.reshape(1, n)
    by = real.b_y_bar.reshape(n, 1)
    bu = real.b_u_bar.reshape(n, 1)
    Ahat = real.A_hat_p
    X, Y, E = tv.X, tv.Y, tv.E
    F = tv.F.reshape(n, 1)
    G = tv.G.reshape(1, n)
    core = np.block([[Ahat @ Y + bu @ G, Ahat], [E, X @ Ahat + F @ c0]])
    H_A = core + core.T + (mu_w * w_bar**2 / spec.epsilon**2) * np.block(
        [[Y, np.eye(n)], [np.eye(n), X]])
    H_B = np.block([[by, real.b_tilde_p], [F + X @ by, X @ real.b_tilde_p]])
    if n_p == 0:
        return np.block([[H_A, H_B], [H_B.T, -np.array([[mu_w]])]])
    Mp = np.diag(mu_vec)
    Mwp = np.diag(np.concatenate([[mu_w], mu_vec]))
    D_wp = np.hstack([real.theta_y.reshape(n_p, 1), np.zeros((n_p, n_p))])
    th_y = real.theta_y.reshape(n_p, 1)
    th_u = real.theta_u.reshape(n_p, 1)
    H_C = np.hstack([th_u @ G + th_y @ (c0 @ Y), th_y @ c0])
    return np.block([
        [H_A, H_B, H_C.T @ Mp],
        [H_B.T, -Mwp, D_wp.T @ Mp],
        [Mp @ H_C, Mp @ D_wp, -Mp],
    ])


def invariance_matrix_closed_loop(P, real, ctrl, spec, w_bar, mu_w, mu_vec):
    """Numeric invariance block in original closed-loop coordinates.

    This is the S-procedure quadratic form for the decay of the squared
    barrier, written against P and the closed-loop matrices with the
    uncertainty channels kept as an explicit third block row (including the
    disturbance-to-channel cross coupling).
    """
    n = real.n
    n_p = real.n_p
    mu_vec = np.asarray(mu_vec, dtype=float).reshape(-1)
    A_CL, B_wp, C_q, D_wp = closed_loop_matrices(real, ctrl)
    mu_cl = mu_w * w_bar**2
    Phi = A_CL.T @ P + P @ A_CL
    head = Phi + (mu_cl / spec.epsilon**2) * P
    if n_p == 0:
        return np.block([[head, P @ B_wp], [B_wp.T @ P, -np.array([[mu_w]])]])
    Mp = np.diag(mu_vec)
    Mwp = np.diag(np.concatenate([[mu_w], mu_vec]))
    return np.block([
        [head, P @ B_wp, C_q.T @ Mp],
        [B_wp.T @ P, -Mwp, D_wp.T @ Mp],
        [Mp @ C_q, Mp @ D_wp, -Mp],
    ])


def congruence_transformer(bp, n_p):
    """The block-diagonal map carrying the closed-loop form onto the transformed form."""
    n = bp.n
    Pi2 = np.block([[bp.Y, np.eye(n)], [bp.W.T, np.zeros((n, n))]])
    return scipy.linalg.block_diag(Pi2, np.eye(1 + 2 * n_p if n_p else 1))


@dataclass(frozen=True)
class CertificateReport:
    """Signed margins of the four certificate checks (negative = satisfied)."""

    margins: dict
    tol: float

    @property
    def ok(self):
        return all(m <= -self.tol for m in self.margins.values())

    def failing(self):
        return sorted(name for name, m in self.margins.items() if m > -self.tol)

    def worst(self):
        return max(self.margins.values())


def verify_barrier_pair(plant, spec, bp, tol=1e-7):
    """Re-check every certificate numerically on the assembled matrices.

    Checks: (i) the coupling block is positive definite; (ii) the transformed
    invariance block at the stored multipliers is negative definite; (iii) the
    closed-loop invariance block at P is negative definite; (iv) the state and
    input containment inequalities hold on the inverse barrier matrix.  Raises
    :class:`VerificationError` listing the failing certificates; returns the
    report when all pass.
    """
    real = canonical_realization(plant)
    n = bp.n
    margins = {}

    coupling = np.block([[bp.Y, np.eye(n)], [np.eye(n), bp.X]])
    _, lam = lmi.check_definite(coupling, "positive", tol)
    margins["coupling"] = -lam

    tv = transformed_from_controller(bp.X, bp.Y, bp.V, bp.W, bp.controller, real)
    block = invariance_matrix_transformed(tv, real, spec, plant.w_bar, bp.mu_w, bp.mu_vec)
    _, lam = lmi.check_definite(block, "negative", tol)
    margins["invariance_transformed"] = lam

    hp = invariance_matrix_closed_loop(bp.P, real, bp.controller, spec,
                                       plant.w_bar, bp.mu_w, bp.mu_vec)
    _, lam = lmi.check_definite(hp, "negative", tol)
    margins["invariance_closed_loop"] = lam

    Q = bp.Q
    Sp, Sk = real.S_p, real.S_k
    worst = -math.inf
    for f in spec.f_rows:
        worst = max(worst, float(f @ Sp @ Q @ Sp.T @ f) - 1.0)
    c_k = bp.controller.c_k
    worst = max(worst, float(c_k @ Sk @ Q @ Sk.T @ c_k) - spec.u_bar**2)
    margins["containment"] = worst

    report = CertificateReport(margins=margins, tol=tol)
    if not report.ok:
        raise VerificationError(
            f"certificate checks failed: {', '.join(report.failing())} "
            f"(margins {report.margins})", report)
    return report
