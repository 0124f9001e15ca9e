import numpy as np
import pytest

from barrierpairs.errors import InvalidModelError, SimulationDivergedError
from barrierpairs.estimator import EstimatorDesign
from barrierpairs.sim import (DisturbanceSpec, ReferenceSpec, Scenario, SimTrace,
                              TrackingGains, freq_response_Ge, original_input,
                              run, run_batch, summarize, worst_sine)


def quiet_disturbance():
    return DisturbanceSpec(kind="sinusoid", amplitude=0.0, frequency=1.0)


def make_scenario(project, barrier_pair, est_design, **over):
    kw = dict(
        plant=project.plant, barrier_pair=barrier_pair, design=est_design,
        supervisor=project.supervisor, delta_true=[1.0],
        disturbance=quiet_disturbance(),
        reference=ReferenceSpec(levels=(0.0,), ramp_rate=1.0, dwell=(1.0,)),
        gains=TrackingGains(), duration=1.0, dt=1e-3)
    kw.update(over)
    return Scenario(**kw)


@pytest.fixture(scope="module")
def figure_scenario(project, barrier_pair, est_design):
    return project.scenario("figure", barrier_pair, est_design)


@pytest.fixture(scope="module")
def figure_trace(figure_scenario):
    return run(figure_scenario)


class TestGenerators:
    def test_trapezoid_profile(self):
        ref = ReferenceSpec(levels=(0.0, 2.5, 0.0), ramp_rate=0.25,
                            dwell=(5.0, 20.0, 15.0))
        t = np.array([0.0, 5.0, 10.0, 15.0, 35.0, 40.0, 45.0, 60.0])
        expected = [0.0, 0.0, 1.25, 2.5, 2.5, 1.25, 0.0, 0.0]
        assert np.allclose(ref.sample(t), expected)

    def test_piecewise_constant_is_seeded_and_bounded(self):
        spec = DisturbanceSpec(kind="piecewise_constant", amplitude=0.05,
                               hold=0.5, seed=42)
        t = np.linspace(0, 10, 997)
        w1 = spec.sample(t, 10.0)
        w2 = spec.sample(t, 10.0)
        assert np.array_equal(w1, w2)
        assert np.abs(w1).max() <= 0.05
        assert len(np.unique(w1)) > 5

    def test_square_wave_levels(self):
        spec = DisturbanceSpec(kind="square", amplitude=0.05, frequency=0.5)
        w = spec.sample(np.array([0.5, 1.5]), 2.0)
        assert np.allclose(np.abs(w), 0.05)

    def test_original_input_zero_error(self):
        gains = TrackingGains(kp=4.0, kd=1.0, tau=0.05)
        assert original_input(1.0, 1.0, gains, filt=0.0) == 0.0

    def test_original_input_step_sign(self):
        gains = TrackingGains(kp=4.0, kd=1.0, tau=0.05)
        assert original_input(1.0, 0.0, gains, filt=0.0) > 0


class TestRun:
    def test_equilibrium_trace_is_flat(self, project, barrier_pair, est_design):
        trace = run(make_scenario(project, barrier_pair, est_design))
        assert np.all(trace.x_p == 0)
        assert np.all(trace.u == 0)
        assert np.all(trace.B == 0)
        assert np.allclose(trace.B_bar, est_design.r_e, atol=1e-15)
        assert np.all(trace.mode == 0)

    def test_determinism_bit_identical(self, figure_scenario):
        t1 = run(figure_scenario)
        t2 = run(figure_scenario)
        for name in ("t", "x_p", "x_k", "y", "u", "mode", "B", "B_bar", "e_norm", "ref"):
            assert np.array_equal(getattr(t1, name), getattr(t2, name))

    def test_rk4_convergence_order(self, project, barrier_pair, est_design):
        # smooth constant reference, no disturbance, no switching: halving the
        # step must shrink the deviation from a fine-step run at fourth order
        # ramp corners sit on every tested step grid, so each step integrates a
        # polynomial input and the switch-free loop shows the integrator's order
        def trace_at(dt):
            sc = make_scenario(project, barrier_pair, est_design,
                               reference=ReferenceSpec(levels=(0.0, 0.3), ramp_rate=0.6,
                                                       dwell=(0.5, 3.0)),
                               duration=4.0, dt=dt)
            trace = run(sc)
            assert np.all(trace.mode == 0)  # switch-free, pure smooth dynamics
            return trace

        ref = trace_at(1e-5)
        errs = []
        for dt in (4e-3, 2e-3):
            tr = trace_at(dt)
            stride = int(round(dt / 1e-5))
            errs.append(np.abs(tr.x_p - ref.x_p[::stride][:len(tr.x_p)]).max())
        assert errs[0] > 1e-14 and errs[1] > 1e-15
        assert errs[0] / errs[1] > 8.0

    def test_figure_scenario_safety(self, project, figure_trace, est_design):
        stats = summarize(figure_trace, project.safety)
        assert stats["violations"] == 0
        assert stats["engagements"] >= 1
        assert stats["releases"] >= 1
        # every engagement ends in a release within the horizon
        assert stats["engagements"] == stats["releases"]
        assert stats["bound_violations"] == 0
        assert stats["max_e_norm"] <= est_design.r_e * (1 + 1e-9)
        assert stats["max_B"] < 1.0

    def test_mode_replay_matches_supervisor(self, project, figure_trace):
        # the recorded bound history drives the supervisor to the same modes
        from barrierpairs.supervisor import SupervisorState, step_mode
        state = SupervisorState.initial(2)
        modes = []
        for b in figure_trace.B_bar:
            state = step_mode(state, b, project.supervisor)
            modes.append(state.mode.value)
        assert np.array_equal(modes, figure_trace.mode)

    def test_randomized_runs_respect_constraints_inside_unit_set(
            self, project, barrier_pair, est_design):
        rng = np.random.default_rng(51)
        for _ in range(8):
            delta = rng.uniform(-1, 1, size=project.plant.n_p)
            dist = DisturbanceSpec(kind="sinusoid", amplitude=project.plant.w_bar,
                                   frequency=float(10 ** rng.uniform(-1.5, 0.3)),
                                   phase=float(rng.uniform(0, 2 * np.pi)))
            trace = run(project.scenario("batch", barrier_pair, est_design,
                                         delta_true=delta, disturbance=dist))
            inside = trace.B <= 1.0
            assert np.abs(trace.x_p[inside] @ project.safety.f_rows.T).max() <= 1 + 1e-9
            engaged = trace.mode == 1
            if engaged.any():
                first = int(np.argmax(engaged))
                assert trace.B[:first + 1].max() < 1.0
            safety_u = trace.u[engaged & inside]
            if safety_u.size:
                assert np.abs(safety_u).max() <= project.safety.u_bar + 1e-9

    def test_engagement_precedes_risk(self, figure_trace):
        # the supervisor must take over before the barrier reaches one
        first_engaged = int(np.argmax(figure_trace.mode == 1))
        assert figure_trace.mode[first_engaged] == 1
        assert figure_trace.B[:first_engaged + 1].max() < 1.0

    def test_controller_state_consistency(self, figure_trace, barrier_pair):
        # u equals the safety law exactly whenever the safety mode is active
        engaged = figure_trace.mode == 1
        u_law = figure_trace.x_k @ barrier_pair.controller.c_k
        assert np.abs(u_law[engaged] - figure_trace.u[engaged]).max() <= 1e-12

    def test_divergence_detected(self, project, barrier_pair, est_design):
        # a step far beyond the fastest closed-loop mode makes the integrator
        # unstable; the run must stop with the offending time, not return junk
        sc = make_scenario(project, barrier_pair, est_design,
                           reference=ReferenceSpec(levels=(2.5,), ramp_rate=1.0,
                                                   dwell=(50.0,)),
                           duration=50.0, dt=0.1)
        with pytest.raises(SimulationDivergedError) as err:
            run(sc)
        assert err.value.time is not None

    def test_scenario_validation(self, project, barrier_pair, est_design):
        with pytest.raises(InvalidModelError):
            make_scenario(project, barrier_pair, est_design, delta_true=[2.0])
        with pytest.raises(InvalidModelError):
            make_scenario(project, barrier_pair, est_design,
                          disturbance=DisturbanceSpec(kind="sinusoid", amplitude=0.2,
                                                      frequency=1.0))
        with pytest.raises(InvalidModelError):
            make_scenario(project, barrier_pair, est_design, dt=-1.0)

    def test_run_batch_order_and_isolation(self, project, barrier_pair, est_design):
        scs = [make_scenario(project, barrier_pair, est_design,
                             delta_true=[d]) for d in (-1.0, 0.0, 1.0)]
        traces = run_batch(scs)
        traces_thr = run_batch(scs, workers=3)
        for a, b in zip(traces, traces_thr):
            assert np.array_equal(a.x_p, b.x_p)


class TestTraceCsv:
    def test_roundtrip(self, tmp_path, project, barrier_pair, est_design):
        sc = make_scenario(project, barrier_pair, est_design,
                           reference=ReferenceSpec(levels=(0.5,), ramp_rate=1.0,
                                                   dwell=(1.0,)))
        trace = run(sc)
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "t,x1,x2,xk1,xk2,y,u,mode,B,B_bar,e_norm,ref"
        back = SimTrace.from_csv(path)
        for name in ("t", "x_p", "x_k", "y", "u", "B", "B_bar", "e_norm", "ref"):
            assert np.array_equal(getattr(trace, name), getattr(back, name)), name
        assert np.array_equal(trace.mode, back.mode)


class TestFrequencyResponse:
    def test_high_frequency_rolloff(self, barrier_pair, est_design):
        mags = freq_response_Ge(barrier_pair.X, est_design, [1e6])
        assert mags[0] < 1e-4

    def test_scalar_resolvent_formula(self):
        a = 2.0
        design = EstimatorDesign(b_z=np.array([a]), r_e=0.0, mu_e=1.0,
                                 A_z=np.array([[-a]]))
        freqs = np.array([0.0, 0.1, 1.0, 10.0])
        mags = freq_response_Ge(np.array([[1.0]]), design, freqs)
        expected = a / np.sqrt(a**2 + (2 * np.pi * freqs) ** 2)
        assert np.allclose(mags, expected, rtol=1e-12)

    def test_worst_sine_in_paper_band(self, barrier_pair, est_design, plant):
        f_e, spec = worst_sine(barrier_pair.X, est_design, plant.w_bar)
        assert 0.03 <= f_e <= 0.2
        assert spec.kind == "sinusoid"
        assert spec.amplitude == plant.w_bar
        assert spec.frequency == f_e

    def test_monotone_curve_peaks_at_lower_edge(self):
        # scalar channel: the response is strictly decreasing in frequency
        a = 2.0
        design = EstimatorDesign(b_z=np.array([a]), r_e=0.0, mu_e=1.0,
                                 A_z=np.array([[-a]]))
        f_e, _ = worst_sine(np.array([[1.0]]), design, w_bar=1.0,
                            f_lo=1e-2, f_hi=1e1)
        assert f_e == pytest.approx(1e-2)
