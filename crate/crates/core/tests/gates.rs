use qlink::analysis::{leakage, repeated_gate_error, shifted_loss};
use qlink::device::{CouplingGauge, DeviceSpec, Expansion};
use qlink::dynamics::{GateModel, ModelOptions};
use qlink::holonomic::{synthesize_drives, GateSchedule, GateTarget, SynthesisOptions};
use qlink::pulse::EnvelopeKind;
use std::f64::consts::{PI, SQRT_2};

fn swap(device: &DeviceSpec, detuning_mhz: [f64; 2]) -> GateSchedule {
    let options = SynthesisOptions { detuning_mhz, ..SynthesisOptions::new(EnvelopeKind::Cosine, 10.10 * SQRT_2) };
    synthesize_drives(device, &GateTarget::swap(), &options).unwrap()
}

fn final_populations(device: &DeviceSpec, schedule: &GateSchedule, options: &ModelOptions) -> Vec<f64> {
    let model = GateModel::new(device, schedule, options, None).unwrap();
    model.evolve(&model.qubit_state(0).unwrap()).unwrap().populations()
}

#[test]
fn halving_the_step_changes_nothing() {
    let device = DeviceSpec::reference();
    let schedule = swap(&device, [0.0; 2]);
    let coarse = final_populations(&device, &schedule, &ModelOptions::default());
    let fine = final_populations(&device, &schedule, &ModelOptions { dt_ns: 0.0025, ..ModelOptions::default() });
    for (a, b) in coarse.iter().zip(&fine) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn flipping_second_qubit_couplings_is_a_gauge() {
    let device = DeviceSpec::reference();
    let schedule = swap(&device, [0.0; 2]);
    let standard = final_populations(&device, &schedule, &ModelOptions::default());
    let flipped =
        final_populations(&device, &schedule, &ModelOptions { gauge: CouplingGauge::FlipSecond, ..ModelOptions::default() });
    for (a, b) in standard.iter().zip(&flipped) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
}

#[test]
fn bright_state_completes_one_cycle() {
    let device = DeviceSpec::reference();
    // A budget every envelope family can reach on both qubits.
    for target in [GateTarget::swap(), GateTarget::sqrt_swap()] {
        let g = 5.0 * SQRT_2;
        for kind in [EnvelopeKind::Square, EnvelopeKind::gaussian(), EnvelopeKind::Cosine] {
            let s = synthesize_drives(&device, &target, &SynthesisOptions::new(kind, g)).unwrap();
            let [a, b] = [0, 1].map(|q| s.drives[q].average_coupling_mhz(&device));
            let area = 2.0 * PI * a.hypot(b) * 1e-3 * s.duration_ns;
            assert!((area - PI).abs() < 1e-3, "area {area}");
        }
    }
}

#[test]
fn populations_add_up_along_the_gate() {
    let device = DeviceSpec::reference();
    let model = GateModel::new(&device, &swap(&device, [0.0; 2]), &ModelOptions::default(), None).unwrap();
    let traj = model.trajectory(&model.qubit_state(0).unwrap(), 40).unwrap();
    let [a, b] = model.computational();
    for pops in &traj.populations {
        let total = pops[a] + pops[b] + leakage(&model, pops);
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }
}

#[test]
fn mode_drift_loss_is_nearly_even() {
    // Centred gate: without calibration the second-order shifts move the
    // optimum about 1 MHz off zero.
    let device = DeviceSpec::reference();
    let schedule = [swap(&device, [-0.26, -0.26])];
    let options = ModelOptions { expansion: Expansion::FirstOrder, dt_ns: 0.02, ..ModelOptions::default() };
    let centre = shifted_loss(&device, &schedule, 0.0, None, &options).unwrap();
    for d in [1.0, 2.0, 3.0] {
        let plus = shifted_loss(&device, &schedule, d, None, &options).unwrap();
        let minus = shifted_loss(&device, &schedule, -d, None, &options).unwrap();
        assert!((plus - minus).abs() < 1e-2, "{d} MHz: {plus} vs {minus}");
        if d == 3.0 {
            assert!(plus.min(minus) > centre, "{plus} {minus} vs {centre}");
        }
    }
}

#[test]
fn calibrated_first_order_swap_has_small_error_rate() {
    let device = DeviceSpec::reference();
    let options = ModelOptions { expansion: Expansion::FirstOrder, dt_ns: 0.02, ..ModelOptions::default() };
    let fit = repeated_gate_error(&device, &swap(&device, [-0.26, -0.26]), 20, None, &options).unwrap();
    assert!(fit.epsilon < 1e-3, "epsilon {}", fit.epsilon);
    assert!(fit.counts.len() >= 3);
}

#[test]
fn uncalibrated_second_order_swap_shows_coherent_error() {
    let device = DeviceSpec::reference();
    let options = ModelOptions { dt_ns: 0.02, ..ModelOptions::default() };
    let fit = repeated_gate_error(&device, &swap(&device, [0.0; 2]), 20, None, &options).unwrap();
    assert!(fit.epsilon > 1e-3 && fit.epsilon < 0.1, "epsilon {}", fit.epsilon);
}
