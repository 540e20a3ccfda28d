import math

import numpy as np
import pytest

from spikesoc.kernels import DpiParams, DpiState
from spikesoc.params import NOMINAL
from spikesoc.soma import (
    HomeostasisConfig,
    SomaConfig,
    SomaInputs,
    SomaState,
    _membrane_drive,
    advance_membrane,
    homeostasis_rates,
    homeostasis_step,
    membrane_voltage,
    next_spike_time,
    on_spike_feedback,
    soma_input_currents,
    soma_step,
)

T_REFR = 2e-12 * 1.8 * 0.75 / 1.71e-12  # ~1.5789 s

DRIVEN = SomaConfig(
    I_leak=100e-12,
    I_gain=400e-12,
    I_refr=1.71e-12,
    I_dc=1e-9,
    I_spkthr=40e-12,
    dc_enabled=True,
)


class TestInputCurrents:
    def test_no_input_without_dc(self):
        cfg = SomaConfig(dc_enabled=False, I_dc=5e-12)
        i_in, _ = soma_input_currents(0.0, 0.0, 0.0, cfg)
        assert i_in == 0.0

    def test_adaptation_clamps_at_zero(self):
        cfg = SomaConfig()
        i_in, _ = soma_input_currents(10e-12, 0.0, 15e-12, cfg)
        assert i_in == 0.0

    def test_shunting_adds_to_leak(self):
        cfg = SomaConfig(I_leak=50e-12)
        _, lo = soma_input_currents(0.0, 0.0, 0.0, cfg)
        _, hi = soma_input_currents(0.0, 30e-12, 0.0, cfg)
        assert lo == pytest.approx(50e-12)
        assert hi == pytest.approx(80e-12)
        # A bigger effective leak means a shorter time constant.
        assert cfg.C_mem * 0.025 / (0.7 * hi) < cfg.C_mem * 0.025 / (0.7 * lo)


class TestThresholded:
    def test_subthreshold_steady_state_never_fires(self):
        cfg = SomaConfig(
            I_leak=100e-12, I_gain=200e-12, I_dc=10e-12, I_spkthr=40e-12, dc_enabled=True
        )
        # Steady state (I_gain/I_tau)*I_in = 20 pA < 40 pA threshold.
        state, spikes = soma_step(SomaState(), cfg, SomaInputs(), 10.0)
        assert spikes == []
        assert state.membrane.I_out == pytest.approx(20e-12, rel=1e-6)

    def test_ramp_down_slew_rate(self):
        # Minimum leak and the membrane capacitor give the voltage ramp.
        cfg = SomaConfig(I_leak=0.834e-12, I_gain=100e-12, I_spkthr=1.0)
        state = SomaState(membrane=DpiState(I_out=10e-9, last_update=0.0))
        state, _ = soma_step(state, cfg, SomaInputs(), 1.0)
        v0 = membrane_voltage(10e-9)
        v1 = membrane_voltage(state.membrane.I_out)
        slew = v0 - v1
        assert slew == pytest.approx(0.834e-12 / 7.72e-12, rel=1e-9)
        assert slew == pytest.approx(0.108, rel=5e-3)

    def test_saturated_rate_is_refractory_limited(self):
        state, spikes = soma_step(SomaState(), DRIVEN, SomaInputs(), 10.0)
        assert len(spikes) >= 2
        isis = np.diff(spikes)
        rate = 1.0 / isis.mean()
        assert rate == pytest.approx(1.0 / T_REFR, rel=1e-3)

    def test_isi_never_below_refractory(self):
        state, spikes = soma_step(SomaState(), DRIVEN, SomaInputs(), 8.0)
        for isi in np.diff(spikes):
            assert isi >= T_REFR * (1 - 1e-12)

    def test_killed_neuron_never_spikes(self):
        cfg = SomaConfig(
            I_leak=100e-12, I_gain=400e-12, I_dc=1e-9, I_spkthr=40e-12,
            dc_enabled=True, killed=True,
        )
        state, spikes = soma_step(SomaState(), cfg, SomaInputs(), 10.0)
        assert spikes == []
        assert state.membrane.I_out == 0.0

    def test_spike_count_monotone_in_dc(self):
        counts = []
        for dc in (0.2e-9, 0.5e-9, 1e-9, 2e-9):
            cfg = SomaConfig(
                I_leak=100e-12, I_gain=400e-12, I_refr=100e-12, I_dc=dc,
                I_spkthr=400e-12, dc_enabled=True,
            )
            _, spikes = soma_step(SomaState(), cfg, SomaInputs(), 2.0)
            counts.append(len(spikes))
        assert counts == sorted(counts)
        assert counts[-1] > counts[0]

    def test_prediction_matches_step(self):
        state = SomaState()
        d = _membrane_drive(state, DRIVEN, SomaInputs(), NOMINAL)
        t_pred = next_spike_time(0.0, DRIVEN, d)
        _, spikes = soma_step(state, DRIVEN, SomaInputs(), 1.0)
        assert spikes[0] == pytest.approx(t_pred, rel=1e-12)

    def test_crossing_time_formula(self):
        d = _membrane_drive(SomaState(), DRIVEN, SomaInputs(), NOMINAL)
        tau = DRIVEN.C_mem * 0.025 / (0.7 * 100e-12)
        expected = tau * math.log(d.I_ss / (d.I_ss - 40e-12))
        assert next_spike_time(0.0, DRIVEN, d) == pytest.approx(expected, rel=1e-12)


class TestExponential:
    def exp_cfg(self, g=0.6, dc=1e-9):
        return SomaConfig(
            model="exponential",
            I_leak=100e-12,
            I_gain=200e-12,
            I_refr=10e-12,
            I_dc=dc,
            I_spkthr=40e-12,
            dc_enabled=True,
            exp_feedback_gain=g,
        )

    def test_fires_when_feedback_overpowers_leak(self):
        _, spikes = soma_step(SomaState(), self.exp_cfg(), SomaInputs(), 5.0)
        assert len(spikes) >= 1

    def test_silent_when_drive_stays_below_boundary(self):
        # Steady state 2*I_in must stay below I_tau/g for the feedback to
        # never engage.
        cfg = self.exp_cfg(dc=50e-12)  # I_ss = 100 pA < 100p/0.6 = 167 pA
        _, spikes = soma_step(SomaState(), cfg, SomaInputs(), 5.0)
        assert spikes == []

    def test_advance_consistency_across_substeps(self):
        cfg = self.exp_cfg()
        d = _membrane_drive(SomaState(), cfg, SomaInputs(), NOMINAL)
        t_spike = next_spike_time(0.0, cfg, d)
        assert math.isfinite(t_spike)
        t = 0.9 * t_spike
        whole = advance_membrane(0.0, cfg, d, t)
        stepped = 0.0
        for _ in range(7):
            stepped = advance_membrane(stepped, cfg, d, t / 7)
        assert stepped == pytest.approx(whole, rel=1e-9)

    def test_prediction_matches_step(self):
        cfg = self.exp_cfg()
        d = _membrane_drive(SomaState(), cfg, SomaInputs(), NOMINAL)
        t_pred = next_spike_time(0.0, cfg, d)
        _, spikes = soma_step(SomaState(), cfg, SomaInputs(), 2.0)
        assert spikes[0] == pytest.approx(t_pred, rel=1e-9)


class TestFeedbackFilters:
    def adapted_cfg(self, w=50e-12):
        return SomaConfig(
            I_leak=100e-12,
            I_gain=400e-12,
            I_refr=100e-12,
            I_dc=1.2e-9,
            I_spkthr=300e-12,
            dc_enabled=True,
            adaptation_enabled=True,
            adaptation_dpi=DpiParams(I_tau=2e-12, I_gain=4e-12, C=2e-12),
            adaptation_weight=w,
            calcium_dpi=DpiParams(I_tau=1e-12, I_gain=4e-12, C=4e-12),
            calcium_weight=30e-12,
            feedback_pw_current=1.35e-9,  # 2 ms pulse on 2 pF
        )

    def quiet_cfg(self):
        from dataclasses import replace

        return replace(self.adapted_cfg(), dc_enabled=False)

    def test_single_spike_adaptation_jump(self):
        cfg = self.quiet_cfg()
        state = SomaState()
        state = on_spike_feedback(state, cfg, 0.0)
        t_pw = 2e-12 * 1.35 / 1.35e-9
        assert t_pw == pytest.approx(2e-3, rel=1e-9)
        # Advance exactly one pulse width: adaptation jumps toward its
        # pulse-on steady state and calcium likewise.
        state2, _ = soma_step(state, cfg, SomaInputs(), t_pw)
        tau_ad = 2e-12 * 0.025 / (0.7 * 2e-12)
        i_ss = (4e-12 / 2e-12) * 50e-12
        expected = i_ss * (1 - math.exp(-t_pw / tau_ad))
        assert state2.adaptation.I_out == pytest.approx(expected, rel=1e-9)

    def test_adaptation_decays_to_nothing_without_spikes(self):
        cfg = self.quiet_cfg()
        state = SomaState(adaptation=DpiState(I_out=100e-12))
        tau_ad = 2e-12 * 0.025 / (0.7 * 2e-12)
        state, _ = soma_step(state, cfg, SomaInputs(), 5 * tau_ad)
        assert state.adaptation.I_out < 0.01 * 100e-12

    def test_isi_non_decreasing_under_constant_drive(self):
        cfg = self.adapted_cfg(w=200e-12)
        _, spikes = soma_step(SomaState(), cfg, SomaInputs(), 3.0)
        assert len(spikes) > 5
        isis = np.diff(spikes)
        assert all(b >= a * (1 - 1e-9) for a, b in zip(isis, isis[1:]))

    def test_calcium_tracks_firing_rate(self):
        cfg = self.adapted_cfg(w=0.0)
        state, spikes = soma_step(SomaState(), cfg, SomaInputs(), 4.0)
        rate = len(spikes) / 4.0
        t_pw = 2e-3
        q_ca = (4e-12 * 30e-12 / 1e-12) * t_pw
        # Time-averaged calcium current approaches charge-per-spike x rate.
        samples = []
        for _ in range(200):
            state, _ = soma_step(state, cfg, SomaInputs(), 0.01)
            samples.append(state.calcium.I_out)
        assert np.mean(samples) == pytest.approx(q_ca * rate, rel=0.1)


class TestHomeostasis:
    def hcfg(self):
        up, down = homeostasis_rates(0.36, 0.3, 0.24, 60.0)
        return HomeostasisConfig(
            I_ca_ref=50e-12, V_ref_H=0.36, V_ref_M=0.3, V_ref_L=0.24,
            rate_up=up, rate_down=down,
        )

    def test_rates_from_reference_ladder(self):
        up, down = homeostasis_rates(0.36, 0.3, 0.24, 60.0)
        assert up == pytest.approx(0.001)
        assert down == pytest.approx(0.001)

    def test_inactive_resets_to_middle_reference(self):
        h = self.hcfg()
        assert homeostasis_step(0.9, h, 0.0, 1.0, active=False) == 0.3

    def test_deadband_holds(self):
        h = self.hcfg()
        assert homeostasis_step(0.5, h, 50e-12 * 1.005, 1.0, active=True) == 0.5

    def test_ramps_up_when_calcium_low(self):
        h = self.hcfg()
        v = homeostasis_step(0.5, h, 10e-12, 2.0, active=True)
        assert v == pytest.approx(0.5 + 2.0 * h.rate_up)

    def test_ramps_down_when_calcium_high(self):
        h = self.hcfg()
        v = homeostasis_step(0.5, h, 200e-12, 3.0, active=True)
        assert v == pytest.approx(0.5 - 3.0 * h.rate_down)

    def test_clamped_at_rails(self):
        h = self.hcfg()
        assert homeostasis_step(0.0005, h, 200e-12, 10.0, active=True) == 0.0
        assert homeostasis_step(1.7999, h, 1e-12, 10.0, active=True) == 1.8

    def test_gain_regulation_closes_loop(self):
        # Calcium proportional to rate, gain high initially: the loop must
        # pull the firing rate down until calcium straddles the reference.
        up, down = homeostasis_rates(0.36, 0.3, 0.24, 2.0)
        hcfg = HomeostasisConfig(
            I_ca_ref=30e-12, V_ref_H=0.36, V_ref_M=0.3, V_ref_L=0.24,
            rate_up=up, rate_down=down,
        )
        cfg = SomaConfig(
            I_leak=100e-12,
            I_refr=1.35e-9,  # 2 ms refractory, well above the target rate
            I_dc=1e-9,
            I_spkthr=300e-12,
            dc_enabled=True,
            homeostasis_enabled=True,
            homeostasis=hcfg,
            calcium_dpi=DpiParams(I_tau=1e-12, I_gain=4e-12, C=4e-12),
            calcium_weight=30e-12,
            feedback_pw_current=1.35e-9,
            I_gain=0.0,
        )
        v0 = membrane_voltage(10e-9)  # deliberately high initial gain
        state = SomaState(V_gain=v0)
        for _ in range(600):
            state, _ = soma_step(state, cfg, SomaInputs(), 0.05)
        assert abs(state.calcium.I_out - 30e-12) < 0.5 * 30e-12
