"""Deterministic closed-loop simulation, disturbance/reference generators, and
frequency-response analysis of the estimation-error channel.

Between mode decisions the closed loop (true plant, safety controller,
identifier filters, coefficient maps, tracking filter) is one linear system,
so each fixed step applies precomputed classical-RK4 transition maps with the
exogenous signals sampled at the stage times.  Mode decisions are sampled
once per step.  This keeps plant and estimator stage-consistent: the
estimation-error identity then holds along the discrete trajectory to
integration accuracy, and halving the step changes trajectories at the
integrator's order.
"""

import concurrent.futures
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import InvalidModelError, SimulationDivergedError
from .estimator import EstimatorDesign
from .model import coefficients_at, sign_patterns
from .supervisor import Mode, SupervisorConfig

TRACE_FIXED_COLUMNS = ("y", "u", "mode", "B", "B_bar", "e_norm", "ref")


# ---------------------------------------------------------------------------
# scenario ingredients


@dataclass(frozen=True)
class DisturbanceSpec:
    """Bounded exogenous disturbance: sinusoid, square wave, or seeded random steps."""

    kind: str
    amplitude: float
    frequency: float = 0.0
    phase: float = 0.0
    hold: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("sinusoid", "square", "piecewise_constant"):
            raise InvalidModelError(f"unknown disturbance kind {self.kind!r}")
        if self.amplitude < 0:
            raise InvalidModelError("disturbance amplitude must be nonnegative")
        if self.kind in ("sinusoid", "square") and self.frequency <= 0 and self.amplitude > 0:
            raise InvalidModelError(f"{self.kind} disturbance needs a positive frequency")
        if self.kind == "piecewise_constant" and self.hold <= 0:
            raise InvalidModelError("piecewise-constant disturbance needs a positive hold time")

    def sample(self, t, duration):
        """Evaluate the disturbance on an array of times."""
        t = np.asarray(t, dtype=float)
        if self.amplitude == 0.0:
            return np.zeros_like(t)
        if self.kind == "sinusoid":
            return self.amplitude * np.sin(2 * np.pi * self.frequency * t + self.phase)
        if self.kind == "square":
            return self.amplitude * np.sign(
                np.sin(2 * np.pi * self.frequency * t + self.phase))
        rng = np.random.default_rng(self.seed)
        n_levels = int(math.ceil(duration / self.hold)) + 2
        levels = rng.uniform(-self.amplitude, self.amplitude, size=n_levels)
        idx = np.minimum((t / self.hold).astype(int), n_levels - 1)
        return levels[idx]


@dataclass(frozen=True)
class ReferenceSpec:
    """Piecewise-linear profile: dwell at each level, constant-rate ramps between."""

    levels: tuple
    ramp_rate: float
    dwell: tuple

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        dwell = tuple(float(v) for v in self.dwell)
        if len(dwell) != len(levels):
            raise InvalidModelError("need one dwell time per level")
        if self.ramp_rate <= 0:
            raise InvalidModelError("ramp rate must be positive")
        if any(d < 0 for d in dwell):
            raise InvalidModelError("dwell times must be nonnegative")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "dwell", dwell)

    def breakpoints(self):
        ts, vs = [0.0], [self.levels[0]]
        t = 0.0
        for i, level in enumerate(self.levels):
            t += self.dwell[i]
            ts.append(t)
            vs.append(level)
            if i + 1 < len(self.levels):
                t += abs(self.levels[i + 1] - level) / self.ramp_rate
                ts.append(t)
                vs.append(self.levels[i + 1])
        return np.array(ts), np.array(vs)

    def sample(self, t):
        ts, vs = self.breakpoints()
        return np.interp(np.asarray(t, dtype=float), ts, vs)


@dataclass(frozen=True)
class TrackingGains:
    """Proportional/derivative tracking law with a first-order derivative filter."""

    kp: float = 4.0
    kd: float = 1.0
    tau: float = 0.05

    def __post_init__(self):
        if not np.isfinite([self.kp, self.kd, self.tau]).all() or self.tau <= 0:
            raise InvalidModelError("tracking gains must be finite with positive tau")


def original_input(ref_value, y, gains, filt=0.0):
    """Tracking input from the reference, the measured output, and the filter state.

    The derivative term uses the filtered error slope (err - filt) / tau, so the
    law stays proper; the caller owns the filter state's evolution.
    """
    err = ref_value - y
    return gains.kp * err + gains.kd * (err - filt) / gains.tau


@dataclass(frozen=True)
class Scenario:
    """Everything one deterministic closed-loop run needs."""

    plant: object
    barrier_pair: object
    design: EstimatorDesign
    supervisor: SupervisorConfig
    delta_true: np.ndarray
    disturbance: DisturbanceSpec
    reference: ReferenceSpec
    gains: TrackingGains = field(default_factory=TrackingGains)
    duration: float = 60.0
    dt: float = 1e-3

    def __post_init__(self):
        delta = np.asarray(self.delta_true, dtype=float).reshape(-1)
        object.__setattr__(self, "delta_true", delta)
        plant, bp, design = self.plant, self.barrier_pair, self.design
        if delta.shape != (plant.n_p,):
            raise InvalidModelError(
                f"delta_true must have length {plant.n_p}, got {delta.shape}")
        if np.any(np.abs(delta) > 1.0 + 1e-12):
            raise InvalidModelError("delta_true must lie in [-1, 1] per direction")
        if not (plant.n == bp.n == design.n):
            raise InvalidModelError(
                f"inconsistent orders: plant {plant.n}, barrier pair {bp.n}, design {design.n}")
        if self.disturbance.amplitude > plant.w_bar + 1e-12:
            raise InvalidModelError("disturbance amplitude exceeds the modeled bound")
        if self.dt <= 0 or self.duration <= 0:
            raise InvalidModelError("dt and duration must be positive")
        self.supervisor.validate_against(bp.epsilon)


# ---------------------------------------------------------------------------
# trace


@dataclass(frozen=True)
class SimTrace:
    """Uniform-grid record of one run."""

    t: np.ndarray
    x_p: np.ndarray
    x_k: np.ndarray
    y: np.ndarray
    u: np.ndarray
    mode: np.ndarray
    B: np.ndarray
    B_bar: np.ndarray
    e_norm: np.ndarray
    ref: np.ndarray

    @property
    def n(self):
        return self.x_p.shape[1]

    @staticmethod
    def column_names(n):
        return (["t"] + [f"x{i+1}" for i in range(n)] + [f"xk{i+1}" for i in range(n)]
                + list(TRACE_FIXED_COLUMNS))

    def to_csv(self, path):
        n = self.n
        cols = [self.t]
        cols += [self.x_p[:, i] for i in range(n)]
        cols += [self.x_k[:, i] for i in range(n)]
        cols += [self.y, self.u, self.mode, self.B, self.B_bar, self.e_norm, self.ref]
        with open(path, "w") as fh:
            fh.write(",".join(self.column_names(n)) + "\n")
            for row in zip(*cols):
                fh.write(",".join(
                    str(int(v)) if j == 2 * n + 3 else repr(float(v))
                    for j, v in enumerate(row)) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        n = sum(1 for name in header if name.startswith("x") and not name.startswith("xk"))
        i = 1
        x_p = data[:, i:i + n]; i += n
        x_k = data[:, i:i + n]; i += n
        y, u, mode, B, B_bar, e_norm, ref = (data[:, i + j] for j in range(7))
        return cls(t=data[:, 0], x_p=x_p, x_k=x_k, y=y, u=u,
                   mode=mode.astype(int), B=B, B_bar=B_bar, e_norm=e_norm, ref=ref)


def summarize(trace, spec):
    """Violation/engagement statistics of a run against the safety limits."""
    viol_state = int(np.sum(np.abs(trace.x_p @ spec.f_rows.T) > 1.0 + 1e-12))
    viol_input = int(np.sum(np.abs(trace.u) > spec.u_bar + 1e-12))
    switches = np.diff(trace.mode)
    return {
        "state_violations": viol_state,
        "input_violations": viol_input,
        "violations": viol_state + viol_input,
        "engagements": int(np.sum(switches == 1)),
        "releases": int(np.sum(switches == -1)),
        "max_B": float(trace.B.max()),
        "max_B_minus_B_bar": float((trace.B - trace.B_bar).max()),
        "max_e_norm": float(trace.e_norm.max()),
        "bound_violations": int(np.sum(trace.B > trace.B_bar + 1e-12)),
    }


# ---------------------------------------------------------------------------
# joint linear assembly


def _rk4_transition(M, dt):
    """Exact classical-RK4 maps for x' = M x + b(t): state map and stage-input maps."""
    d = M.shape[0]
    eye = np.eye(d)
    M2 = M @ M
    M3 = M2 @ M
    M4 = M3 @ M
    R = eye + dt * M + dt**2 / 2 * M2 + dt**3 / 6 * M3 + dt**4 / 24 * M4
    D1 = dt / 6 * (eye + dt * M + dt**2 / 2 * M2 + dt**3 / 4 * M3)
    D2 = dt / 6 * (4 * eye + 2 * dt * M + dt**2 / 2 * M2)
    D3 = dt / 6 * eye
    return R, D1, D2, D3


class _LoopLayout:
    """Index bookkeeping for the stacked closed-loop state."""

    def __init__(self, n):
        self.n = n
        self.xp = slice(0, n)
        self.xk = slice(n, 2 * n)
        self.zy = slice(2 * n, 3 * n)
        self.zu = slice(3 * n, 4 * n)
        self.Ey = slice(4 * n, 4 * n + n * n)
        self.Eu = slice(4 * n + n * n, 4 * n + 2 * n * n)
        self.xf = 4 * n + 2 * n * n
        self.dim = 4 * n + 2 * n * n + 1


def _loop_matrices(scenario, mode):
    """Joint drift matrix and [w, r] input map for one supervisor mode."""
    plant = scenario.plant
    bp = scenario.barrier_pair
    design = scenario.design
    g = scenario.gains
    n = plant.n
    lay = _LoopLayout(n)
    d = lay.dim

    b_y, b_u = coefficients_at(plant, scenario.delta_true)
    A0 = np.zeros((n, n))
    if n > 1:
        A0[np.arange(1, n), np.arange(0, n - 1)] = 1.0
    c0 = np.zeros(n)
    c0[-1] = 1.0
    AzT = design.A_z.T
    eyeflat = np.eye(n).reshape(-1)

    # output and input as affine functionals of (state, [w, r])
    y_row = np.zeros(d)
    y_row[lay.xp] = c0
    y_in = np.array([1.0, 0.0])

    u_row = np.zeros(d)
    u_in = np.zeros(2)
    if mode is Mode.SAFETY:
        u_row[lay.xk] = bp.controller.c_k
    else:
        gain = g.kp + g.kd / g.tau
        u_row -= gain * y_row
        u_row[lay.xf] = -g.kd / g.tau
        u_in = np.array([-gain, gain])

    M = np.zeros((d, d))
    B = np.zeros((d, 2))

    def add_channel(rows_slice_or_vec, vec, row, rin):
        """target' += vec * (row . state + rin . inputs)"""
        M[rows_slice_or_vec] += np.outer(vec, row)
        B[rows_slice_or_vec] += np.outer(vec, rin)

    # true plant
    M[lay.xp, lay.xp] += A0
    add_channel(lay.xp, b_y, y_row, y_in)
    add_channel(lay.xp, b_u, u_row, u_in)
    # safety controller state (driven by y in both modes)
    M[lay.xk, lay.xk] += bp.controller.A_k
    add_channel(lay.xk, bp.controller.b_k, y_row, y_in)
    # identifier filters
    M[lay.zy, lay.zy] += AzT
    add_channel(lay.zy, c0, y_row, y_in)
    M[lay.zu, lay.zu] += AzT
    add_channel(lay.zu, c0, u_row, u_in)
    # coefficient maps, row-major vectorization
    kron = np.kron(AzT, np.eye(n))
    M[lay.Ey, lay.Ey] += kron
    add_channel(lay.Ey, eyeflat, y_row, y_in)
    M[lay.Eu, lay.Eu] += kron
    add_channel(lay.Eu, eyeflat, u_row, u_in)
    # derivative filter on the tracking error
    M[lay.xf, :] += (-y_row) / g.tau
    M[lay.xf, lay.xf] += -1.0 / g.tau
    B[lay.xf, :] += np.array([-1.0, 1.0]) / g.tau

    return M, B, lay, (y_row, y_in), (u_row, u_in)


def _estimate_rows(lay, plant, design, delta):
    """Row map from the stacked state to the plant-state estimate at one delta."""
    n = lay.n
    a = plant.b_y_bar + design.b_z
    c = plant.b_u_bar
    for d_i, dirn in zip(np.asarray(delta, float).reshape(-1), plant.uncertainty_dirs):
        a = a + d_i * dirn.theta_y * dirn.b_tilde
        c = c + d_i * dirn.theta_u * dirn.b_tilde
    L = np.zeros((n, lay.dim))
    for i in range(n):
        for j in range(n):
            # (E^T a)_i picks E[j, i] with weight a_j; row-major flat index j*n+i
            L[i, lay.Ey.start + j * n + i] = a[j]
            L[i, lay.Eu.start + j * n + i] = c[j]
    return L


def _quadratic_forms(scenario, lay):
    """Stacked quadratic forms: vertex bounds, true barrier, error norm."""
    plant = scenario.plant
    bp = scenario.barrier_pair
    design = scenario.design
    n = lay.n
    d = lay.dim

    sel_cl = np.zeros((2 * n, d))
    sel_cl[0:n, lay.xp] = np.eye(n)
    sel_cl[n:2 * n, lay.xk] = np.eye(n)

    forms = []
    for s in sign_patterns(plant.n_p):
        L = np.zeros((2 * n, d))
        L[0:n] = _estimate_rows(lay, plant, design, s)
        L[n:2 * n, lay.xk] = np.eye(n)
        forms.append(L.T @ bp.P @ L)
    n_vert = len(forms)

    forms.append(sel_cl.T @ bp.P @ sel_cl)  # true barrier

    L_err = np.zeros((n, d))
    L_err[:, lay.xp] = np.eye(n)
    L_err -= _estimate_rows(lay, plant, design, scenario.delta_true)
    forms.append(L_err.T @ bp.X @ L_err)  # estimation-error norm

    return np.stack(forms), n_vert


# ---------------------------------------------------------------------------
# run


def run(scenario):
    """Simulate one scenario and return the full trace.

    The supervisor decides the mode from the barrier upper bound once per
    step; within a step all couplings evolve jointly.  Raises
    :class:`SimulationDivergedError` if any recorded quantity becomes
    non-finite.
    """
    plant = scenario.plant
    bp = scenario.barrier_pair
    design = scenario.design
    n = plant.n
    dt = scenario.dt
    N = int(round(scenario.duration / dt))

    mats = {}
    for mode in (Mode.ORIGINAL, Mode.SAFETY):
        M, B, lay, yrows, urows = _loop_matrices(scenario, mode)
        R, D1, D2, D3 = _rk4_transition(M, dt)
        DD = np.hstack([D1 @ B, D2 @ B, D3 @ B])
        mats[mode] = (R, DD, yrows, urows)
    forms, n_vert = _quadratic_forms(scenario, lay)

    t_samples = np.arange(N + 1) * dt
    w_s = scenario.disturbance.sample(t_samples, scenario.duration)
    r_s = scenario.reference.sample(t_samples)
    t_mid = t_samples[:-1] + dt / 2
    w_m = scenario.disturbance.sample(t_mid, scenario.duration)
    r_m = scenario.reference.sample(t_mid)

    t_arr = t_samples
    x_p = np.empty((N + 1, n))
    x_k = np.empty((N + 1, n))
    y_arr = np.empty(N + 1)
    u_arr = np.empty(N + 1)
    mode_arr = np.empty(N + 1, dtype=int)
    B_arr = np.empty(N + 1)
    Bb_arr = np.empty(N + 1)
    e_arr = np.empty(N + 1)

    s = np.zeros(lay.dim)
    mode = Mode.ORIGINAL
    cfg = scenario.supervisor
    r_e = design.r_e

    for k in range(N + 1):
        vals = np.einsum("vij,i,j->v", forms, s, s)
        vals = np.maximum(vals, 0.0)
        B_bar = float(np.sqrt(vals[:n_vert].max()) + r_e)
        B = float(np.sqrt(vals[n_vert]))
        e_norm = float(np.sqrt(vals[n_vert + 1]))

        if mode is Mode.ORIGINAL and B_bar >= cfg.eps_high:
            mode = Mode.SAFETY
        elif mode is Mode.SAFETY and B_bar < cfg.eps_low:
            mode = Mode.ORIGINAL

        R, DD, (y_row, y_in), (u_row, u_in) = mats[mode]
        inputs_now = np.array([w_s[k], r_s[k]])
        y = float(y_row @ s + y_in @ inputs_now)
        u = float(u_row @ s + u_in @ inputs_now)

        if not (np.isfinite(B) and np.isfinite(B_bar) and np.isfinite(u)):
            raise SimulationDivergedError(
                f"closed-loop state became non-finite at t = {t_arr[k]:.6f}", time=t_arr[k])

        x_p[k] = s[lay.xp]
        x_k[k] = s[lay.xk]
        y_arr[k] = y
        u_arr[k] = u
        mode_arr[k] = mode.value
        B_arr[k] = B
        Bb_arr[k] = B_bar
        e_arr[k] = e_norm

        if k < N:
            stage_in = np.array([w_s[k], r_s[k], w_m[k], r_m[k], w_s[k + 1], r_s[k + 1]])
            s = R @ s + DD @ stage_in

    return SimTrace(t=t_arr, x_p=x_p, x_k=x_k, y=y_arr, u=u_arr, mode=mode_arr,
                    B=B_arr, B_bar=Bb_arr, e_norm=e_arr, ref=r_s)


def run_batch(scenarios, workers=None):
    """Run scenarios independently (optionally in a thread pool); order preserved."""
    if workers and workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, scenarios))
    return [run(s) for s in scenarios]


# ---------------------------------------------------------------------------
# open-loop plant/estimator pair (oracle harness)


def simulate_estimation(plant, delta_true, design, u_fn, w_fn, duration, dt):
    """Integrate the true plant and the identifier jointly under given signals.

    ``u_fn``/``w_fn`` map time arrays to signal values.  Returns
    ``(t, x_p, x_hat, e_norm_fn_input)`` where ``x_hat`` is the estimate
    evaluated at the true box parameter.
    """
    n = plant.n
    delta_true = np.asarray(delta_true, dtype=float).reshape(-1)
    b_y, b_u = coefficients_at(plant, delta_true)
    A0 = np.zeros((n, n))
    if n > 1:
        A0[np.arange(1, n), np.arange(0, n - 1)] = 1.0
    c0 = np.zeros(n)
    c0[-1] = 1.0
    AzT = design.A_z.T
    eyeflat = np.eye(n).reshape(-1)

    # state: [xp, zy, zu, vec(Ey), vec(Eu)]
    d = 3 * n + 2 * n * n
    xp_sl = slice(0, n)
    zy_sl = slice(n, 2 * n)
    zu_sl = slice(2 * n, 3 * n)
    Ey_sl = slice(3 * n, 3 * n + n * n)
    Eu_sl = slice(3 * n + n * n, d)

    y_row = np.zeros(d)
    y_row[xp_sl] = c0
    y_in = np.array([1.0, 0.0])  # inputs [w, u]
    u_in = np.array([0.0, 1.0])

    M = np.zeros((d, d))
    B = np.zeros((d, 2))
    M[xp_sl, xp_sl] += A0
    M[xp_sl] += np.outer(b_y, y_row)
    B[xp_sl] += np.outer(b_y, y_in) + np.outer(b_u, u_in)
    M[zy_sl, zy_sl] += AzT
    M[zy_sl] += np.outer(c0, y_row)
    B[zy_sl] += np.outer(c0, y_in)
    M[zu_sl, zu_sl] += AzT
    B[zu_sl] += np.outer(c0, u_in)
    kron = np.kron(AzT, np.eye(n))
    M[Ey_sl, Ey_sl] += kron
    M[Ey_sl] += np.outer(eyeflat, y_row)
    B[Ey_sl] += np.outer(eyeflat, y_in)
    M[Eu_sl, Eu_sl] += kron
    B[Eu_sl] += np.outer(eyeflat, u_in)

    R, D1, D2, D3 = _rk4_transition(M, dt)
    DD = np.hstack([D1 @ B, D2 @ B, D3 @ B])

    N = int(round(duration / dt))
    t_samples = np.arange(N + 1) * dt
    w_sv = np.asarray(w_fn(t_samples), dtype=float)
    u_sv = np.asarray(u_fn(t_samples), dtype=float)
    t_mid = t_samples[:-1] + dt / 2
    w_mv = np.asarray(w_fn(t_mid), dtype=float)
    u_mv = np.asarray(u_fn(t_mid), dtype=float)

    a = b_y + design.b_z
    L = np.zeros((n, d))
    for i in range(n):
        for j in range(n):
            L[i, Ey_sl.start + j * n + i] = a[j]
            L[i, Eu_sl.start + j * n + i] = b_u[j]

    x_p_out = np.empty((N + 1, n))
    x_hat_out = np.empty((N + 1, n))
    states = np.empty((N + 1, d))
    s = np.zeros(d)
    for k in range(N + 1):
        states[k] = s
        x_p_out[k] = s[xp_sl]
        x_hat_out[k] = L @ s
        if k < N:
            stage_in = np.array([w_sv[k], u_sv[k], w_mv[k], u_mv[k], w_sv[k + 1], u_sv[k + 1]])
            s = R @ s + DD @ stage_in
    return t_samples, x_p_out, x_hat_out, states


# ---------------------------------------------------------------------------
# frequency response of the estimation-error channel


def sqrtm_spd(X):
    """Symmetric square root of a symmetric positive-definite matrix."""
    w, U = np.linalg.eigh(np.asarray(X, dtype=float))
    if w[0] <= 0:
        raise InvalidModelError("matrix is not positive definite")
    return U @ np.diag(np.sqrt(w)) @ U.T


def freq_response_Ge(X, design, freqs):
    """Weighted gain from the disturbance to the estimation error per frequency."""
    Xh = sqrtm_spd(X)
    n = design.n
    eye = np.eye(n)
    out = np.empty(len(freqs))
    for i, f in enumerate(np.asarray(freqs, dtype=float)):
        res = np.linalg.solve(1j * 2 * np.pi * f * eye - design.A_z, design.b_z)
        out[i] = np.linalg.norm(Xh @ res)
    return out


def worst_sine(X, design, w_bar, f_lo=1e-3, f_hi=1e2, points_per_decade=200,
               refine_tol=1e-4):
    """Find the frequency maximizing the error-channel gain; return it with the sinusoid.

    Log grid first, then bounded scalar refinement around the grid peak (the
    grid edge is returned as-is when the peak sits there).
    """
    decades = np.log10(f_hi) - np.log10(f_lo)
    count = max(2, int(round(points_per_decade * decades)) + 1)
    fs = np.logspace(np.log10(f_lo), np.log10(f_hi), count)
    mags = freq_response_Ge(X, design, fs)
    k = int(np.argmax(mags))
    if 0 < k < len(fs) - 1:
        res = scipy.optimize.minimize_scalar(
            lambda f: -freq_response_Ge(X, design, [f])[0],
            bounds=(fs[k - 1], fs[k + 1]), method="bounded",
            options={"xatol": refine_tol})
        f_e = float(res.x)
        if -res.fun < mags[k]:
            f_e = float(fs[k])
    else:
        f_e = float(fs[k])
    spec = DisturbanceSpec(kind="sinusoid", amplitude=float(w_bar), frequency=f_e)
    return f_e, spec
