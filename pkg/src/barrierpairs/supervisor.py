"""Safety-controller stepping and hysteresis mode switching."""

import enum
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidModelError


class Mode(enum.Enum):
    ORIGINAL = 0
    SAFETY = 1


@dataclass(frozen=True)
class SupervisorConfig:
    """Hysteresis band: engage at or above eps_high, release below eps_low."""

    eps_low: float
    eps_high: float

    def __post_init__(self):
        if not self.eps_low < self.eps_high <= 1.0:
            raise InvalidModelError(
                f"need eps_low < eps_high <= 1, got ({self.eps_low}, {self.eps_high})")

    def validate_against(self, epsilon):
        # The band must sit strictly above the residual level of the barrier.
        if not epsilon < self.eps_low:
            raise InvalidModelError(
                f"eps_low ({self.eps_low}) must exceed the residual level ({epsilon})")


@dataclass(frozen=True)
class SupervisorState:
    """Current mode, controller state, and the last bound that drove the mode."""

    mode: Mode
    x_k: np.ndarray
    last_B_bar: float = float("nan")

    @classmethod
    def initial(cls, n):
        return cls(mode=Mode.ORIGINAL, x_k=np.zeros(n))


def controller_step(x_k, y, ctrl, dt):
    """One RK4 step of the controller state under held output; u from the pre-step state."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x_k = np.asarray(x_k, dtype=float).reshape(-1)
    u = float(ctrl.c_k @ x_k)
    drive = ctrl.b_k * y

    def f(x):
        return ctrl.A_k @ x + drive

    k1 = f(x_k)
    k2 = f(x_k + 0.5 * dt * k1)
    k3 = f(x_k + 0.5 * dt * k2)
    k4 = f(x_k + dt * k3)
    return x_k + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), u


def step_mode(state, B_bar, cfg):
    """Hysteresis transition on the barrier upper bound; unchanged inside the band."""
    mode = state.mode
    if mode is Mode.ORIGINAL and B_bar >= cfg.eps_high:
        mode = Mode.SAFETY
    elif mode is Mode.SAFETY and B_bar < cfg.eps_low:
        mode = Mode.ORIGINAL
    return replace(state, mode=mode, last_B_bar=float(B_bar))
