"""Project configuration: YAML schema, validation, and scenario assembly.

One file defines the plant, the safety limits, the synthesis and estimator
search settings, the supervisor band, and named simulation scenarios, so a
full study is reproducible from a single document.
"""

from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .estimator import DEFAULT_MU_E_GRID
from .model import SafetySpec, UncertainPlant
from .sim import DisturbanceSpec, ReferenceSpec, Scenario, TrackingGains, worst_sine
from .supervisor import SupervisorConfig
from .synthesis import MultiplierGrid, SynthesisOptions

WORST_FREQUENCY = "worst"


@dataclass(frozen=True)
class ScenarioConfig:
    """Raw scenario section; the frequency may be the literal 'worst'."""

    name: str
    delta_true: tuple
    disturbance_kind: str
    disturbance_amplitude: float
    disturbance_frequency: object
    disturbance_phase: float
    disturbance_hold: float
    disturbance_seed: int
    reference: ReferenceSpec
    gains: TrackingGains
    duration: float
    dt: float


@dataclass(frozen=True)
class ProjectConfig:
    plant: UncertainPlant
    safety: SafetySpec
    grid: MultiplierGrid
    synthesis_options: SynthesisOptions
    mu_e_grid: tuple
    estimator_margin: float
    supervisor: SupervisorConfig
    scenarios: dict = field(default_factory=dict)

    def scenario(self, name, barrier_pair, design, delta_true=None,
                 disturbance=None):
        """Assemble a runnable scenario from a named section and the artifacts.

        ``delta_true``/``disturbance`` override the configured values (used by
        randomized batches).  A configured frequency of 'worst' is resolved by
        the error-channel peak search against the supplied artifacts.
        """
        if name not in self.scenarios:
            raise ConfigError(f"no scenario named {name!r}; have {sorted(self.scenarios)}")
        sc = self.scenarios[name]
        if disturbance is None:
            freq = sc.disturbance_frequency
            if freq == WORST_FREQUENCY:
                freq, _ = worst_sine(barrier_pair.X, design, self.plant.w_bar)
            disturbance = DisturbanceSpec(
                kind=sc.disturbance_kind, amplitude=sc.disturbance_amplitude,
                frequency=float(freq) if freq is not None else 0.0,
                phase=sc.disturbance_phase, hold=sc.disturbance_hold,
                seed=sc.disturbance_seed)
        return Scenario(
            plant=self.plant, barrier_pair=barrier_pair, design=design,
            supervisor=self.supervisor,
            delta_true=np.array(sc.delta_true if delta_true is None else delta_true),
            disturbance=disturbance, reference=sc.reference, gains=sc.gains,
            duration=sc.duration, dt=sc.dt)


def _need(section, key, cfgpath):
    if key not in section:
        raise ConfigError(f"{cfgpath}: missing required key {key!r}")
    return section[key]


def _grid_values(raw, what):
    """A grid is either an explicit list or {lo, hi, count} meaning log-spaced."""
    if isinstance(raw, dict):
        try:
            lo, hi, count = float(raw["lo"]), float(raw["hi"]), int(raw["count"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{what}: log grid needs lo, hi, count: {exc}") from exc
        if lo <= 0 or hi < lo or count < 1:
            raise ConfigError(f"{what}: need 0 < lo <= hi and count >= 1")
        return tuple(np.logspace(np.log10(lo), np.log10(hi), count))
    try:
        values = tuple(float(v) for v in raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: expected a list or a lo/hi/count mapping: {exc}") from exc
    if not values:
        raise ConfigError(f"{what}: grid is empty")
    return values


def load_config(path):
    """Parse and validate a project configuration file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path}: cannot parse configuration: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(raw, str(path))


def parse_config(raw, cfgpath="<config>"):
    from .errors import InvalidModelError

    psec = _need(raw, "plant", cfgpath)
    try:
        plant = UncertainPlant(
            n=_need(psec, "n", f"{cfgpath}:plant"),
            alpha_bar=_need(psec, "alpha", f"{cfgpath}:plant"),
            beta_bar=_need(psec, "beta", f"{cfgpath}:plant"),
            uncertainty_dirs=tuple(psec.get("uncertainty", ())),
            w_bar=psec.get("w_bar", 0.0),
        )
    except (InvalidModelError, TypeError) as exc:
        raise ConfigError(f"{cfgpath}: invalid plant section: {exc}") from exc

    ssec = _need(raw, "safety", cfgpath)
    try:
        safety = SafetySpec(
            f_rows=_need(ssec, "f_rows", f"{cfgpath}:safety"),
            u_bar=_need(ssec, "u_bar", f"{cfgpath}:safety"),
            epsilon=_need(ssec, "epsilon", f"{cfgpath}:safety"),
        )
    except (InvalidModelError, TypeError) as exc:
        raise ConfigError(f"{cfgpath}: invalid safety section: {exc}") from exc
    if safety.f_rows.shape[1] != plant.n:
        raise ConfigError(
            f"{cfgpath}: state-constraint rows have length {safety.f_rows.shape[1]}, "
            f"plant order is {plant.n}")

    gsec = raw.get("synthesis", {})
    try:
        grid = MultiplierGrid(
            mu_w=_grid_values(gsec["mu_w_grid"], "synthesis.mu_w_grid")
            if "mu_w_grid" in gsec else MultiplierGrid.mu_w,
            mu=_grid_values(gsec["mu_grid"], "synthesis.mu_grid")
            if "mu_grid" in gsec else MultiplierGrid.mu,
        )
    except ValueError as exc:
        raise ConfigError(f"{cfgpath}: invalid synthesis grid: {exc}") from exc
    syn_opts = SynthesisOptions(
        margin=float(gsec.get("margin", SynthesisOptions.margin)),
        tol=float(gsec.get("tol", SynthesisOptions.tol)),
        solver=str(gsec.get("solver", SynthesisOptions.solver)),
    )
    if syn_opts.margin <= 0:
        raise ConfigError(f"{cfgpath}: strictness margin must be positive")

    esec = raw.get("estimator", {})
    mu_e_grid = (_grid_values(esec["mu_e_grid"], "estimator.mu_e_grid")
                 if "mu_e_grid" in esec else DEFAULT_MU_E_GRID)
    estimator_margin = float(esec.get("margin", syn_opts.margin))

    vsec = _need(raw, "supervisor", cfgpath)
    try:
        supervisor = SupervisorConfig(
            eps_low=float(_need(vsec, "eps_low", f"{cfgpath}:supervisor")),
            eps_high=float(_need(vsec, "eps_high", f"{cfgpath}:supervisor")),
        )
        supervisor.validate_against(safety.epsilon)
    except InvalidModelError as exc:
        raise ConfigError(f"{cfgpath}: invalid supervisor section: {exc}") from exc

    scenarios = {}
    for name, sc in (raw.get("scenarios") or {}).items():
        scenarios[name] = _parse_scenario(name, sc, plant, f"{cfgpath}:scenarios.{name}")

    return ProjectConfig(plant=plant, safety=safety, grid=grid,
                         synthesis_options=syn_opts, mu_e_grid=mu_e_grid,
                         estimator_margin=estimator_margin, supervisor=supervisor,
                         scenarios=scenarios)


def _parse_scenario(name, sc, plant, cfgpath):
    from .errors import InvalidModelError

    dsec = _need(sc, "disturbance", cfgpath)
    freq = dsec.get("frequency", 0.0)
    if freq != WORST_FREQUENCY:
        try:
            freq = float(freq)
        except (TypeError, ValueError) as exc:
            raise ConfigError(
                f"{cfgpath}: frequency must be a number or '{WORST_FREQUENCY}'") from exc
    amplitude = float(dsec.get("amplitude", plant.w_bar))
    if amplitude > plant.w_bar + 1e-12:
        raise ConfigError(
            f"{cfgpath}: disturbance amplitude {amplitude} exceeds w_bar {plant.w_bar}")
    kind = str(dsec.get("kind", "sinusoid"))
    # validate kind/shape early with a representative numeric frequency
    try:
        DisturbanceSpec(kind=kind, amplitude=amplitude,
                        frequency=1.0 if freq == WORST_FREQUENCY else freq,
                        phase=float(dsec.get("phase", 0.0)),
                        hold=float(dsec.get("hold", 1.0)),
                        seed=int(dsec.get("seed", 0)))
    except InvalidModelError as exc:
        raise ConfigError(f"{cfgpath}: invalid disturbance: {exc}") from exc

    rsec = _need(sc, "reference", cfgpath)
    try:
        reference = ReferenceSpec(
            levels=tuple(_need(rsec, "levels", cfgpath)),
            ramp_rate=float(_need(rsec, "ramp_rate", cfgpath)),
            dwell=tuple(_need(rsec, "dwell", cfgpath)),
        )
    except InvalidModelError as exc:
        raise ConfigError(f"{cfgpath}: invalid reference: {exc}") from exc

    tsec = sc.get("tracking", {})
    try:
        gains = TrackingGains(kp=float(tsec.get("kp", 4.0)),
                              kd=float(tsec.get("kd", 1.0)),
                              tau=float(tsec.get("tau", 0.05)))
    except InvalidModelError as exc:
        raise ConfigError(f"{cfgpath}: invalid tracking gains: {exc}") from exc

    delta = tuple(float(v) for v in sc.get("delta_true", (0.0,) * plant.n_p))
    if len(delta) != plant.n_p:
        raise ConfigError(f"{cfgpath}: delta_true must have length {plant.n_p}")
    if any(abs(v) > 1.0 for v in delta):
        raise ConfigError(f"{cfgpath}: delta_true entries must lie in [-1, 1]")

    duration = float(sc.get("duration", 60.0))
    dt = float(sc.get("dt", 1e-3))
    if duration <= 0 or dt <= 0:
        raise ConfigError(f"{cfgpath}: duration and dt must be positive")

    return ScenarioConfig(
        name=name, delta_true=delta, disturbance_kind=kind,
        disturbance_amplitude=amplitude, disturbance_frequency=freq,
        disturbance_phase=float(dsec.get("phase", 0.0)),
        disturbance_hold=float(dsec.get("hold", 1.0)),
        disturbance_seed=int(dsec.get("seed", 0)),
        reference=reference, gains=gains, duration=duration, dt=dt)
