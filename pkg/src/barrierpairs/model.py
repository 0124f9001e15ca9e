"""Uncertain plant data model and structured matrix builders.

The plant is a SISO transfer function with uncertain coefficients, realized in
the feedback canonical form driven by its own output and input:

    xp' = A0 xp + b_y y + b_u u,      y = c0 xp + w,

where A0 carries ones on the subdiagonal and c0 picks the last state.  The
coefficient vectors (b_y, b_u) range over an axis-aligned box described by
direction vectors and per-direction output/input weights, which makes the
closed loop a polytopic linear differential inclusion.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import EnumerationLimitError, InvalidModelError

VERTEX_ENUMERATION_LIMIT = 20


def _as_vector(x, n, what):
    v = np.asarray(x, dtype=float).reshape(-1)
    if v.shape != (n,):
        raise InvalidModelError(f"{what} must have length {n}, got shape {np.shape(x)}")
    return v


@dataclass(frozen=True)
class UncertaintyDirection:
    """One box direction of coefficient uncertainty.

    ``b_tilde`` is the direction in coefficient space (length n); ``theta_y``
    and ``theta_u`` weight how the direction enters the output and input
    coefficient vectors.
    """

    b_tilde: np.ndarray
    theta_y: float
    theta_u: float

    def __post_init__(self):
        object.__setattr__(self, "b_tilde", np.asarray(self.b_tilde, dtype=float).reshape(-1))
        object.__setattr__(self, "theta_y", float(self.theta_y))
        object.__setattr__(self, "theta_u", float(self.theta_u))


@dataclass(frozen=True)
class UncertainPlant:
    """SISO plant with box-uncertain transfer-function coefficients.

    ``alpha_bar`` and ``beta_bar`` list the nominal denominator and numerator
    coefficients in descending powers of s (the transfer-function order); the
    reversal into the state-space coefficient vectors happens internally.
    """

    n: int
    alpha_bar: np.ndarray
    beta_bar: np.ndarray
    uncertainty_dirs: tuple = ()
    w_bar: float = 0.0

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise InvalidModelError(f"plant order must be >= 1, got {n}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "alpha_bar", _as_vector(self.alpha_bar, n, "alpha_bar"))
        object.__setattr__(self, "beta_bar", _as_vector(self.beta_bar, n, "beta_bar"))
        dirs = tuple(
            d if isinstance(d, UncertaintyDirection) else UncertaintyDirection(**d)
            for d in self.uncertainty_dirs
        )
        for k, d in enumerate(dirs):
            if d.b_tilde.shape != (n,):
                raise InvalidModelError(
                    f"uncertainty direction {k}: b_tilde has shape {d.b_tilde.shape}, expected ({n},)"
                )
        object.__setattr__(self, "uncertainty_dirs", dirs)
        w_bar = float(self.w_bar)
        if w_bar < 0:
            raise InvalidModelError(f"w_bar must be nonnegative, got {w_bar}")
        object.__setattr__(self, "w_bar", w_bar)

    @property
    def n_p(self):
        """Number of uncertainty directions."""
        return len(self.uncertainty_dirs)

    @property
    def b_y_bar(self):
        """Nominal output-coefficient vector (reversed, negated denominator)."""
        return -self.alpha_bar[::-1].copy()

    @property
    def b_u_bar(self):
        """Nominal input-coefficient vector (reversed numerator)."""
        return self.beta_bar[::-1].copy()


@dataclass(frozen=True)
class SafetySpec:
    """State and input constraints plus the residual level of the barrier.

    Each row f of ``f_rows`` defines a symmetric state constraint |f . xp| <= 1;
    ``u_bar`` bounds the safety-controller input; ``epsilon`` in (0, 1) is the
    residual level the barrier converges into under the safety controller.
    """

    f_rows: np.ndarray
    u_bar: float
    epsilon: float

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.f_rows, dtype=float))
        if rows.size == 0:
            rows = rows.reshape(0, 0)
        for i, row in enumerate(rows):
            if not np.any(row):
                raise InvalidModelError(f"state-constraint row {i} is zero")
        object.__setattr__(self, "f_rows", rows)
        u_bar = float(self.u_bar)
        if not u_bar > 0:
            raise InvalidModelError(f"u_bar must be positive, got {u_bar}")
        object.__setattr__(self, "u_bar", u_bar)
        eps = float(self.epsilon)
        if not 0 < eps < 1:
            raise InvalidModelError(f"epsilon must lie in (0, 1), got {eps}")
        object.__setattr__(self, "epsilon", eps)

    @property
    def n_f(self):
        return self.f_rows.shape[0]


@dataclass(frozen=True)
class Controller:
    """Full-order dynamic output feedback controller xk' = A_k xk + b_k y, u = c_k xk."""

    A_k: np.ndarray
    b_k: np.ndarray
    c_k: np.ndarray

    def __post_init__(self):
        A_k = np.asarray(self.A_k, dtype=float)
        n = A_k.shape[0]
        if A_k.shape != (n, n):
            raise InvalidModelError(f"A_k must be square, got {A_k.shape}")
        object.__setattr__(self, "A_k", A_k)
        object.__setattr__(self, "b_k", _as_vector(self.b_k, n, "b_k"))
        object.__setattr__(self, "c_k", _as_vector(self.c_k, n, "c_k"))

    @property
    def n(self):
        return self.A_k.shape[0]

    @classmethod
    def zero(cls, n):
        return cls(np.zeros((n, n)), np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class Realization:
    """Structured matrices of the canonical realization and uncertainty channel.

    ``b_tilde_p`` stacks the direction vectors as columns (n x n_p);
    ``theta_y``/``theta_u`` are the per-direction weights (length n_p);
    ``b_y_bar``/``b_u_bar`` are the nominal coefficient vectors the blocks are
    built around.  ``S_p``/``S_k`` select the plant and controller halves of
    the closed-loop state vector.
    """

    A0: np.ndarray
    c0: np.ndarray
    A_hat_p: np.ndarray
    b_tilde_p: np.ndarray
    theta_y: np.ndarray
    theta_u: np.ndarray
    b_y_bar: np.ndarray
    b_u_bar: np.ndarray
    S_p: np.ndarray = field(repr=False, default=None)
    S_k: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        n = self.A0.shape[0]
        if self.S_p is None:
            object.__setattr__(self, "S_p", np.hstack([np.eye(n), np.zeros((n, n))]))
        if self.S_k is None:
            object.__setattr__(self, "S_k", np.hstack([np.zeros((n, n)), np.eye(n)]))

    @property
    def n(self):
        return self.A0.shape[0]

    @property
    def n_p(self):
        return self.b_tilde_p.shape[1]


def canonical_realization(plant):
    """Build the structured realization matrices for an uncertain plant.

    Returns a :class:`Realization` holding the shift matrix A0, output row c0,
    the nominal output-closed matrix A0 + b_y_bar c0, the stacked uncertainty
    directions, and the direction weights.
    """
    n = plant.n
    A0 = np.zeros((n, n))
    if n > 1:
        A0[np.arange(1, n), np.arange(0, n - 1)] = 1.0
    c0 = np.zeros(n)
    c0[-1] = 1.0
    b_y_bar = plant.b_y_bar
    b_u_bar = plant.b_u_bar
    A_hat_p = A0 + np.outer(b_y_bar, c0)
    if plant.n_p:
        b_tilde_p = np.column_stack([d.b_tilde for d in plant.uncertainty_dirs])
    else:
        b_tilde_p = np.zeros((n, 0))
    theta_y = np.array([d.theta_y for d in plant.uncertainty_dirs])
    theta_u = np.array([d.theta_u for d in plant.uncertainty_dirs])
    return Realization(A0=A0, c0=c0, A_hat_p=A_hat_p, b_tilde_p=b_tilde_p,
                       theta_y=theta_y, theta_u=theta_u,
                       b_y_bar=b_y_bar, b_u_bar=b_u_bar)


def closed_loop_matrices(real, ctrl):
    """Assemble the closed-loop block matrices for u fed back from the controller.

    Returns ``(A_CL, B_wp, C_q, D_wp)`` where A_CL couples plant and controller
    states, B_wp maps the disturbance and the n_p uncertainty channels into the
    state, C_q reads the uncertainty-channel outputs, and D_wp is the direct
    disturbance feedthrough into those outputs.
    """
    n = real.n
    n_p = real.n_p
    if ctrl.n != n:
        raise InvalidModelError(f"controller order {ctrl.n} != plant order {n}")
    A_CL = np.block([
        [real.A_hat_p, np.outer(real.b_u_bar, ctrl.c_k)],
        [np.outer(ctrl.b_k, real.c0), ctrl.A_k],
    ])
    B_wp = np.block([
        [real.b_y_bar.reshape(n, 1), real.b_tilde_p],
        [ctrl.b_k.reshape(n, 1), np.zeros((n, n_p))],
    ])
    C_q = np.hstack([
        np.outer(real.theta_y, real.c0),
        np.outer(real.theta_u, ctrl.c_k),
    ])
    D_wp = np.hstack([real.theta_y.reshape(n_p, 1), np.zeros((n_p, n_p))])
    return A_CL, B_wp, C_q, D_wp


def sign_patterns(n_p):
    """All sign vectors in {-1, +1}^n_p, lexicographic with -1 first."""
    return [np.array(s, dtype=float) for s in product((-1.0, 1.0), repeat=n_p)]


def vertex_parameters(plant):
    """Coefficient vectors (b_y, b_u) at every vertex of the uncertainty box.

    The 2^n_p vertices are ordered lexicographically over the sign patterns,
    -1 before +1, first direction most significant.
    """
    n_p = plant.n_p
    if n_p > VERTEX_ENUMERATION_LIMIT:
        raise EnumerationLimitError(
            f"vertex enumeration needs 2^{n_p} points; limit is n_p <= {VERTEX_ENUMERATION_LIMIT}"
        )
    return [coefficients_at(plant, delta) for delta in sign_patterns(n_p)]


def coefficients_at(plant, delta):
    """Coefficient vectors (b_y, b_u) at a specific box parameter delta."""
    delta = np.asarray(delta, dtype=float).reshape(-1)
    if delta.shape != (plant.n_p,):
        raise InvalidModelError(f"delta must have length {plant.n_p}, got {delta.shape}")
    b_y = plant.b_y_bar.copy()
    b_u = plant.b_u_bar.copy()
    for d_i, dirn in zip(delta, plant.uncertainty_dirs):
        b_y += d_i * dirn.theta_y * dirn.b_tilde
        b_u += d_i * dirn.theta_u * dirn.b_tilde
    return b_y, b_u
