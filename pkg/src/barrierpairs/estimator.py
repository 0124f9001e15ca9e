"""Identifier-based estimator: filter pair, polytopic state estimates, certified bound.

Two filters driven by the measured output and input reconstruct the plant
state affinely in the unknown coefficient vectors; evaluating the affine map
at every uncertainty-box vertex encloses the true estimate in a polytope.
The barrier upper bound is the largest barrier value over those vertices plus
a certified radius for the estimation error, designed here by an LMI in the
filter gain.
"""

from dataclasses import dataclass

import numpy as np

from . import lmi
from .errors import DesignInfeasibleError, InvalidModelError, VerificationError
from .model import sign_patterns

DEFAULT_MU_E_GRID = tuple(np.logspace(-2, 3, 25))
HURWITZ_TOL = 1e-9
DEFAULT_DT = 1e-3


@dataclass(frozen=True)
class EstimatorDesign:
    """Filter gain with its certified error radius.

    ``A_z`` is the filter matrix (shift matrix minus gain times output row);
    ``r_e`` bounds the X-weighted estimation error for any disturbance within
    the modeled amplitude; ``mu_e`` is the multiplier the certificate was
    established with.
    """

    b_z: np.ndarray
    r_e: float
    mu_e: float
    A_z: np.ndarray

    @property
    def n(self):
        return self.b_z.shape[0]


@dataclass(frozen=True)
class EstimatorState:
    """Filter states and the running coefficient-to-state maps at time t."""

    z_y: np.ndarray
    z_u: np.ndarray
    E_y: np.ndarray
    E_u: np.ndarray
    t: float = 0.0

    @classmethod
    def zero(cls, n):
        return cls(np.zeros(n), np.zeros(n), np.zeros((n, n)), np.zeros((n, n)), 0.0)


def certified_radius_lmi(problem, X, A0, c0, mu_e, margin=lmi.DEFAULT_MARGIN):
    """Add the certified-radius condition for fixed multiplier; returns (b_z, ratio).

    The radius enters through the squared ratio to the disturbance amplitude,
    which keeps the block affine in the gain and exactly homogeneous in the
    (amplitude, radius) pair.
    """
    import cvxpy as cp

    n = X.shape[0]
    b_z = problem.mat("b_z", n, 1)
    ratio_sq = problem.scalar("ratio_sq", nonneg=True)
    c0 = c0.reshape(1, n)
    XA = X @ A0 - X @ b_z @ c0
    block = cp.bmat([
        [XA + XA.T + mu_e * X, -X @ b_z],
        [-(X @ b_z).T, cp.reshape(-mu_e * ratio_sq, (1, 1), order="F")],
    ])
    problem.require_nsd(block, "certified_radius", margin)
    return b_z, ratio_sq


def design_bz(X, w_bar, mu_grid=None, margin=lmi.DEFAULT_MARGIN,
              tol=lmi.DEFAULT_TOL, solver=lmi.DEFAULT_SOLVER):
    """Design the filter gain minimizing the certified error radius.

    Sweeps the multiplier grid, solving the radius LMI at each point, and
    keeps the smallest feasible radius.  The radius scales exactly linearly
    with the disturbance amplitude (including amplitude zero).  The returned
    filter matrix is verified Hurwitz.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if w_bar < 0:
        raise InvalidModelError(f"w_bar must be nonnegative, got {w_bar}")
    mu_grid = tuple(mu_grid) if mu_grid is not None else DEFAULT_MU_E_GRID
    A0 = np.zeros((n, n))
    if n > 1:
        A0[np.arange(1, n), np.arange(0, n - 1)] = 1.0
    c0 = np.zeros(n)
    c0[-1] = 1.0

    statuses = []
    best = None  # (ratio_sq, b_z, mu_e)
    for mu_e in mu_grid:
        problem = lmi.LmiProblem()
        b_z, ratio_sq = certified_radius_lmi(problem, X, A0, c0, mu_e, margin)
        problem.minimize_scalar("ratio_sq")
        report = lmi.solve(problem, tol=tol, solver=solver)
        statuses.append((mu_e, report.status))
        if report.ok and (best is None or report.values["ratio_sq"] < best[0]):
            best = (report.values["ratio_sq"], report.values["b_z"].reshape(n), mu_e)
    if best is None:
        raise DesignInfeasibleError("no multiplier admitted a certified radius", statuses)

    ratio_sq, b_z, mu_e = best
    A_z = A0 - np.outer(b_z, c0)
    lam = np.linalg.eigvals(A_z)
    if np.max(lam.real) > -HURWITZ_TOL:
        raise VerificationError(
            f"designed filter matrix is not Hurwitz: max Re(eig) = {np.max(lam.real):.3e}")
    r_e = float(w_bar * np.sqrt(max(ratio_sq, 0.0)))
    return EstimatorDesign(b_z=b_z, r_e=r_e, mu_e=float(mu_e), A_z=A_z)


def _rk4(f, x, dt):
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def step(state, y, u, design, dt=DEFAULT_DT):
    """Advance filters and coefficient maps one RK4 step with held inputs."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n = design.n
    AzT = design.A_z.T
    c0 = np.zeros(n)
    c0[-1] = 1.0
    eye = np.eye(n)

    z_y = _rk4(lambda z: AzT @ z + c0 * y, state.z_y, dt)
    z_u = _rk4(lambda z: AzT @ z + c0 * u, state.z_u, dt)
    E_y = _rk4(lambda E: AzT @ E + y * eye, state.E_y, dt)
    E_u = _rk4(lambda E: AzT @ E + u * eye, state.E_u, dt)
    return EstimatorState(z_y=z_y, z_u=z_u, E_y=E_y, E_u=E_u, t=state.t + dt)


def controllability_matrix(A, b):
    """Stack the Krylov columns [b, Ab, ..., A^(n-1) b]."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[0]
    cols = np.empty((n, n))
    v = b.copy()
    for k in range(n):
        cols[:, k] = v
        v = A @ v
    return cols


def coefficient_maps_from_filters(state, design):
    """Recover the coefficient-to-state maps from the filter states alone.

    Test oracle for the running maps: the Krylov stack of each filter state
    against the Krylov stack of the output row, valid from zero initial
    conditions.
    """
    AzT = design.A_z.T
    n = design.n
    c0 = np.zeros(n)
    c0[-1] = 1.0
    C0 = controllability_matrix(AzT, c0)
    C0_inv = np.linalg.inv(C0)
    E_y = controllability_matrix(AzT, state.z_y) @ C0_inv
    E_u = controllability_matrix(AzT, state.z_u) @ C0_inv
    return E_y, E_u


def estimate_components(E_y, E_u, plant, design):
    """Nominal estimate and per-direction components from the coefficient maps.

    Returns ``(x_bar, x_tilde)`` with ``x_tilde`` of shape (n, n_p); the
    estimate at box parameter delta is ``x_bar + x_tilde @ delta``.
    """
    x_bar = E_y.T @ (plant.b_y_bar + design.b_z) + E_u.T @ plant.b_u_bar
    cols = []
    for d in plant.uncertainty_dirs:
        cols.append(d.theta_y * (E_y.T @ d.b_tilde) + d.theta_u * (E_u.T @ d.b_tilde))
    x_tilde = np.column_stack(cols) if cols else np.zeros((plant.n, 0))
    return x_bar, x_tilde


def vertex_estimates(state, plant, design):
    """Plant-state estimates at every uncertainty-box vertex.

    Vertex order matches the coefficient-vertex enumeration (lexicographic
    sign patterns, -1 first).
    """
    x_bar, x_tilde = estimate_components(state.E_y, state.E_u, plant, design)
    return [x_bar + x_tilde @ s for s in sign_patterns(plant.n_p)]


def barrier_upper_bound(vertices, x_k, P, r_e):
    """Largest barrier value over the vertex estimates plus the certified radius."""
    if len(vertices) == 0:
        raise ValueError("vertex list is empty")
    x_k = np.asarray(x_k, dtype=float).reshape(-1)
    worst = -np.inf
    for v in vertices:
        x_cl = np.concatenate([np.asarray(v, dtype=float).reshape(-1), x_k])
        worst = max(worst, float(x_cl @ P @ x_cl))
    return float(np.sqrt(worst) + r_e)
