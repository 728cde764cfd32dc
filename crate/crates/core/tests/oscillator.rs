use proptest::prelude::*;
use vo2snn::device::{device_params, DeviceState};
use vo2snn::oscillator::{
    classify_response, closed_form_period, extract_spikes, oscillating_band, simulate,
    suggested_run, DriveWaveform, NeuronCircuit, Oscillation, Polarity, Response,
};

fn circuit(level: i64) -> NeuronCircuit {
    NeuronCircuit::matching(device_params(level).unwrap())
}

fn in_band(c: &NeuronCircuit, frac: f64) -> f64 {
    let b = oscillating_band(c).unwrap();
    b.v_on + frac * (b.v_peak - b.v_on)
}

fn simulated_period_error(c: &NeuronCircuit, v: f64, steps_per_period: f64) -> f64 {
    let t = closed_form_period(c, v).period().unwrap();
    let (duration, _) = suggested_run(c, v, 20.0);
    let trace = simulate(
        c,
        &DriveWaveform::constant(v, duration),
        t / steps_per_period,
        None,
    )
    .unwrap();
    let t_sim = trace.mean_period(0.1 * duration).unwrap();
    (t_sim - t).abs() / t
}

#[test]
fn unpowered_circuit_stays_at_rest() {
    let c = circuit(1);
    let trace = simulate(&c, &DriveWaveform::constant(0.0, 50e-6), 5e-9, None).unwrap();
    assert!(trace.v_node.iter().all(|&v| v == 0.0));
    assert!(trace.v_spike.iter().all(|&v| v == 0.0));
    assert!(trace.switch_events.is_empty());
    assert_eq!(classify_response(&trace).unwrap(), Response::UnFiring);
}

#[test]
fn period_matches_closed_form_for_levels_1_to_4() {
    for level in 1..=4 {
        let c = circuit(level);
        for frac in [0.2, 0.5, 0.8] {
            let v = in_band(&c, frac);
            let err = simulated_period_error(&c, v, 1000.0);
            assert!(err < 0.01, "level {level} v {v}: rel err {err}");
        }
    }
}

#[test]
fn fine_step_period_within_1e_3() {
    let c = circuit(1);
    let err = simulated_period_error(&c, in_band(&c, 0.5), 1e4);
    assert!(err <= 1e-3, "{err}");
}

#[test]
fn period_error_shrinks_with_step() {
    let c = circuit(2);
    let v = in_band(&c, 0.4);
    let coarse = simulated_period_error(&c, v, 100.0);
    let fine = simulated_period_error(&c, v, 10_000.0);
    // first order over two decades
    assert!(coarse > 50.0 * fine, "coarse {coarse}, fine {fine}");
}

#[test]
fn spike_count_matches_window() {
    let c = circuit(3);
    let v = in_band(&c, 0.6);
    let t = closed_form_period(&c, v).period().unwrap();
    let (duration, dt) = suggested_run(&c, v, 30.0);
    let trace = simulate(&c, &DriveWaveform::constant(v, duration), dt, None).unwrap();
    let spikes = extract_spikes(&trace, c.default_spike_threshold()).unwrap();
    let expected = (spikes.window / t).floor() as i64;
    assert!(
        (spikes.len() as i64 - expected).abs() <= 1,
        "{} vs {expected}",
        spikes.len()
    );
    assert!(spikes.polarity.iter().all(|&p| p == Polarity::Positive));
}

#[test]
fn level5_pulse_does_not_oscillate() {
    let c = circuit(5);
    let trace = simulate(&c, &DriveWaveform::matching_pulse(), 2e-9, None).unwrap();
    assert_ne!(classify_response(&trace).ok(), Some(Response::Oscillating));
}

#[test]
fn pulse_train_integrates_and_leaks() {
    let c = circuit(1);
    let pulses = 25;

    // a constant 10 V oscillates, but at 50 % duty the charge leaks away
    assert!(closed_form_period(&c, 10.0).period().is_some());
    let drive = DriveWaveform::preset("lif-pulse", Some(10.0)).unwrap();
    assert!(simulate(&c, &drive, 2e-9, None)
        .unwrap()
        .switch_events
        .is_empty());

    // at 12 V several pulses are integrated before each spike
    let drive = DriveWaveform::preset("lif-pulse", Some(12.0)).unwrap();
    let trace = simulate(&c, &drive, 2e-9, None).unwrap();
    let onsets: Vec<f64> = trace.onsets().collect();
    assert!(
        onsets.len() >= 4 && onsets.len() * 2 < pulses,
        "{} spikes",
        onsets.len()
    );
    for t in &onsets {
        let phase = t.rem_euclid(4e-6);
        assert!(phase > 0.5e-6 && phase < 2e-6, "onset at phase {phase:e}");
    }
    let observed = (onsets.len() - 1) as f64 / (onsets[onsets.len() - 1] - onsets[0]);
    assert!(observed < 0.5 * closed_form_period(&c, 12.0).frequency());
}

#[test]
fn sine_drive_gives_both_polarities() {
    let c = circuit(1);
    let drive = DriveWaveform::preset("sine", Some(12.0)).unwrap();
    let trace = simulate(&c, &drive, 10e-9, None).unwrap();
    let spikes = extract_spikes(&trace, c.default_spike_threshold()).unwrap();
    let v_on = oscillating_band(&c).unwrap().v_on;
    assert!(spikes.count(Polarity::Positive) > 10);
    assert!(spikes.count(Polarity::Negative) > 10);
    for (&t, &p) in spikes.spike_times.iter().zip(&spikes.polarity) {
        let u = drive.value(t);
        assert!(u.abs() > v_on * 0.99, "spike at |u| = {}", u.abs());
        assert_eq!(p == Polarity::Positive, u > 0.0);
    }
}

#[test]
fn negated_drive_gives_negated_trace() {
    let c = circuit(2);
    for drive in [
        DriveWaveform::constant(9.0, 40e-6),
        DriveWaveform::preset("lif-pulse", Some(15.0)).unwrap(),
        DriveWaveform::sine(14.0, 20e-6, 0.5, 40e-6),
    ] {
        let a = simulate(&c, &drive, 4e-9, None).unwrap();
        let b = simulate(&c, &drive.inverted(), 4e-9, None).unwrap();
        assert_eq!(a.negated(), b);
    }
}

#[test]
fn seeded_jitter_is_deterministic() {
    let c = NeuronCircuit::matching(device_params(1).unwrap().with_jitter_fraction(0.01));
    let drive = DriveWaveform::constant(10.0, 60e-6);
    assert!(simulate(&c, &drive, 5e-9, None).is_err());
    let a = simulate(&c, &drive, 5e-9, Some(7)).unwrap();
    let b = simulate(&c, &drive, 5e-9, Some(7)).unwrap();
    let other = simulate(&c, &drive, 5e-9, Some(8)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.switch_events, other.switch_events);
}

#[test]
fn spike_voltage_is_the_sampling_divider() {
    let c = circuit(1);
    let trace = simulate(&c, &DriveWaveform::constant(10.0, 40e-6), 5e-9, None).unwrap();
    let mut metallic = 0;
    for i in 0..trace.len() {
        let r_dev = c.device.resistance(trace.state[i]);
        let expect = trace.v_node[i] * c.r_sample / (r_dev + c.r_sample);
        assert!((trace.v_spike[i] - expect).abs() <= 1e-14 * expect.abs().max(1e-12));
        metallic += (trace.state[i] == DeviceState::Metallic) as usize;
    }
    assert!(metallic > 0);
}

#[test]
fn classification_agrees_with_closed_form_on_grid() {
    let device = device_params(1).unwrap();
    let n = 20;
    let mut seen = [0usize; 3];
    for i in 0..n {
        let r = 200.0 * (100f64).powf(i as f64 / (n - 1) as f64);
        let c = NeuronCircuit::matching(device).with_r_series(r);
        for j in 0..n {
            let v = 1.0 + 14.0 * j as f64 / (n - 1) as f64;
            let expected = closed_form_period(&c, v).response();
            let (duration, dt) = suggested_run(&c, v, 10.0);
            let trace = simulate(&c, &DriveWaveform::constant(v, duration), dt, None).unwrap();
            let got = classify_response(&trace).unwrap();
            assert_eq!(got, expected, "r {r:.0} v {v:.2}");
            seen[expected as usize] += 1;
        }
    }
    assert!(seen.iter().all(|&k| k > 0), "{seen:?}");
}

#[test]
fn stuck_outcomes_in_closed_form() {
    let c = circuit(1).with_r_series(300.0);
    assert_eq!(closed_form_period(&c, 3.0), Oscillation::StuckInsulating);
    assert_eq!(closed_form_period(&c, 14.0), Oscillation::StuckMetallic);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sign_symmetry_holds_for_any_pulse(amp in 1.0f64..25.0, width_frac in 0.1f64..0.9, level in 1i64..=4) {
        let c = circuit(level);
        let drive = DriveWaveform::square(amp, 5e-6, 5e-6 * width_frac, 0.0, 20e-6);
        let a = simulate(&c, &drive, 5e-9, None).unwrap();
        let b = simulate(&c, &drive.inverted(), 5e-9, None).unwrap();
        prop_assert_eq!(a.negated(), b);
    }
}
