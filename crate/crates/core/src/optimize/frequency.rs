use super::grid::{grid_minimize, GridConfig};
use crate::analysis::{subspace_leakage, transition_error};
use crate::device::{build_device, DeviceParams, DeviceSpec, ModeLadder};
use crate::dynamics::{GateModel, ModelOptions};
use crate::holonomic::{DrivePlan, GateSchedule, GateTarget, SynthesisOptions};
use crate::pulse::EnvelopeKind;
use crate::{Error, Result};

/// Average coupling each qubit gets during the frequency and waveform sweeps, MHz.
pub const SWEEP_COUPLING_MHZ: f64 = 5.0;

/// End-of-gate population that left `{|10>, |01>}` in a closed model,
/// averaged over the two inputs.
pub fn gate_leakage(device: &DeviceSpec, schedule: &GateSchedule, options: &ModelOptions) -> Result<f64> {
    let model = GateModel::new(device, schedule, options, None)?;
    Ok(subspace_leakage(&model.subspace_propagator()?))
}

/// Quantity minimized over the qubit frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrequencyObjective {
    /// Averaged leakage. Adequate when the drive is resonant by construction.
    #[default]
    Leakage,
    /// [`transition_error`] against the target, which also penalizes a gate
    /// that leaks little because it fails to transfer.
    Transition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySearch {
    pub target: GateTarget,
    pub synthesis: SynthesisOptions,
    pub model: ModelOptions,
    pub grid: GridConfig,
    pub objective: FrequencyObjective,
    /// Modes kept on the uniform ladder around the mediating mode.
    pub mode_count: usize,
}

impl FrequencySearch {
    /// SWAP with each qubit at the sweep coupling.
    pub fn new(envelope: EnvelopeKind) -> Self {
        Self {
            target: GateTarget::swap(),
            synthesis: SynthesisOptions::new(envelope, SWEEP_COUPLING_MHZ * std::f64::consts::SQRT_2),
            model: ModelOptions::default(),
            grid: GridConfig::default(),
            objective: FrequencyObjective::Leakage,
            mode_count: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResult {
    pub device: DeviceSpec,
    pub qubit_ghz: [f64; 2],
    /// Minimized objective at the chosen point.
    pub value: f64,
    /// Averaged leakage at the chosen point.
    pub leakage: f64,
    pub coarse_qubit_ghz: [f64; 2],
    pub coarse_value: f64,
    pub evaluations: usize,
}

/// The template's qubits and couplings on a uniform ladder with the given spacing.
pub fn ladder_device(template: &DeviceParams, fsr_mhz: f64, mode_count: usize) -> Result<DeviceSpec> {
    let center_ghz = match &template.ladder {
        ModeLadder::Explicit { freqs_ghz, center } => freqs_ghz[*center],
        ModeLadder::Fsr { center_ghz, .. } => *center_ghz,
    };
    build_device(&DeviceParams {
        ladder: ModeLadder::Fsr { center_ghz, fsr_mhz, count: mode_count },
        cable: None,
        ..template.clone()
    })
}

/// Open search window of each qubit, as offsets from the mediating mode in
/// MHz: qubit 1 between it and the next mode up, qubit 2 between the next
/// mode down and it.
pub fn search_domain(device: &DeviceSpec) -> Result<[(f64, f64); 2]> {
    let c = device.center_position();
    let center = device.center_ghz();
    let modes = device.modes();
    let gap = |p: Option<&crate::device::Mode>| -> Result<f64> {
        match (p, device.fsr_mhz()) {
            (Some(m), _) => Ok((m.freq_ghz - center).abs() * 1e3),
            (None, Some(fsr)) => Ok(fsr),
            (None, None) => Err(Error::invalid("the mediating mode needs a neighbour on each side")),
        }
    };
    let above = gap(c.checked_sub(1).and_then(|k| modes.get(k)))?;
    let below = gap(modes.get(c + 1))?;
    Ok([(0.0, above), (-below, 0.0)])
}

/// Places qubit 1 in `(M2, M2 + fsr)` and qubit 2 in `(M2 - fsr, M2)` where
/// the synthesized gate scores best on `search.objective`.
pub fn optimize_frequencies(template: &DeviceParams, fsr_mhz: f64, search: &FrequencySearch) -> Result<FrequencyResult> {
    if !(fsr_mhz > 0.0) || !fsr_mhz.is_finite() {
        return Err(Error::invalid(format!("free spectral range must be positive, got {fsr_mhz} MHz")));
    }
    optimize_device_frequencies(&ladder_device(template, fsr_mhz, search.mode_count)?, search)
}

/// Frequency search on a given device over [`search_domain`]. The frame in
/// `search.synthesis` selects the model.
pub fn optimize_device_frequencies(device: &DeviceSpec, search: &FrequencySearch) -> Result<FrequencyResult> {
    let plan = DrivePlan::new(device, &search.target, &search.synthesis)?;
    let center_mhz = device.center_ghz() * 1e3;
    let ghz = |p: [f64; 2]| [(center_mhz + p[0]) * 1e-3, (center_mhz + p[1]) * 1e-3];
    let at = |p: [f64; 2]| {
        let [a, b] = ghz(p);
        device.with_qubit_ghz(a, b)
    };
    let block = |d: &DeviceSpec| -> Result<crate::hilbert::CMatrix> {
        GateModel::new(d, &plan.schedule(d)?, &search.model, None)?.subspace_propagator()
    };
    let objective = |p: [f64; 2]| -> Result<f64> {
        let u = block(&at(p)?)?;
        match search.objective {
            FrequencyObjective::Leakage => Ok(subspace_leakage(&u)),
            FrequencyObjective::Transition => transition_error(&u, search.target.theta),
        }
    };
    let r = grid_minimize(&objective, search_domain(device)?, &search.grid)?;
    let device = at(r.point)?;
    let leakage = subspace_leakage(&block(&device)?);
    Ok(FrequencyResult {
        device,
        qubit_ghz: ghz(r.point),
        value: r.value,
        leakage,
        coarse_qubit_ghz: ghz(r.coarse_point),
        coarse_value: r.coarse_value,
        evaluations: r.evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetuningResult {
    pub detuning_mhz: [f64; 2],
    /// [`transition_error`] at the chosen detunings.
    pub value: f64,
    pub leakage: f64,
    pub evaluations: usize,
}

/// Calibrates the drive detunings of `search.synthesis` within
/// `±window_mhz` of zero so the gate best reproduces the target's transition
/// probabilities. Qubit frequencies stay fixed.
pub fn optimize_detunings(device: &DeviceSpec, search: &FrequencySearch, window_mhz: f64) -> Result<DetuningResult> {
    if !(window_mhz > 0.0) || !window_mhz.is_finite() {
        return Err(Error::invalid(format!("detuning window must be positive, got {window_mhz} MHz")));
    }
    let plan = DrivePlan::new(device, &search.target, &search.synthesis)?;
    let block = |d: [f64; 2]| -> Result<crate::hilbert::CMatrix> {
        let mut plan = plan.clone();
        plan.options.detuning_mhz = d;
        GateModel::new(device, &plan.schedule(device)?, &search.model, None)?.subspace_propagator()
    };
    let objective = |d: [f64; 2]| transition_error(&block(d)?, search.target.theta);
    let grid = GridConfig { edge_margin_mhz: 0.0, ..search.grid.clone() };
    let r = grid_minimize(&objective, [(-window_mhz, window_mhz); 2], &grid)?;
    Ok(DetuningResult {
        detuning_mhz: r.point,
        value: r.value,
        leakage: subspace_leakage(&block(r.point)?),
        evaluations: r.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holonomic::Frame;

    fn quick(kind: EnvelopeKind) -> FrequencySearch {
        let mut s = FrequencySearch::new(kind);
        s.model.dt_ns = 0.04;
        s
    }

    #[test]
    fn ladder_keeps_template_center() {
        let d = ladder_device(&DeviceParams::reference(), 403.0, 5).unwrap();
        assert_eq!(d.num_modes(), 5);
        assert!((d.center_ghz() - 5.83).abs() < 1e-12);
        assert_eq!(d.fsr_mhz(), Some(403.0));
        assert!(d.cable().is_none());
        let f: Vec<f64> = d.modes().iter().map(|m| m.freq_ghz).collect();
        for w in f.windows(2) {
            assert!((w[0] - w[1] - 0.403).abs() < 1e-9);
        }
    }

    #[test]
    fn domain_spans_neighbouring_gaps() {
        let [a, b] = search_domain(&DeviceSpec::reference()).unwrap();
        assert!((a.0 - 0.0).abs() < 1e-12 && (a.1 - 530.0).abs() < 1e-9);
        assert!((b.0 + 450.0).abs() < 1e-9 && (b.1 - 0.0).abs() < 1e-12);
        let [a, b] = search_domain(&ladder_device(&DeviceParams::reference(), 100.0, 5).unwrap()).unwrap();
        assert!((a.1 - 100.0).abs() < 1e-9 && (b.0 + 100.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_spacing() {
        let s = quick(EnvelopeKind::Cosine);
        assert!(optimize_frequencies(&DeviceParams::reference(), 0.0, &s).is_err());
        assert!(optimize_frequencies(&DeviceParams::reference(), f64::NAN, &s).is_err());
    }

    #[test]
    fn coarse_search_stays_in_domain_and_improves() {
        let mut s = quick(EnvelopeKind::Cosine);
        s.grid.coarse_divisions = Some(4);
        s.grid.fine_step_mhz = 10.0;
        let r = optimize_frequencies(&DeviceParams::reference(), 200.0, &s).unwrap();
        assert!(r.value <= r.coarse_value);
        assert_eq!(r.value, r.leakage);
        assert!(r.qubit_ghz[0] > 5.83 && r.qubit_ghz[0] < 6.03);
        assert!(r.qubit_ghz[1] < 5.83 && r.qubit_ghz[1] > 5.63);
        assert!(r.leakage < 1e-2, "leakage {}", r.leakage);
        assert_eq!(r.device.qubit_ghz(0), r.qubit_ghz[0]);
    }

    #[test]
    fn transition_objective_bounds_leakage() {
        let mut s = quick(EnvelopeKind::Cosine);
        s.objective = FrequencyObjective::Transition;
        s.grid.coarse_divisions = Some(3);
        s.grid.fine_step_mhz = 20.0;
        let r = optimize_frequencies(&DeviceParams::reference(), 300.0, &s).unwrap();
        assert!(r.leakage <= r.value + 1e-12);
    }

    #[test]
    fn detuning_calibration_beats_nominal() {
        let mut s = quick(EnvelopeKind::Cosine);
        s.synthesis = SynthesisOptions::new(EnvelopeKind::Cosine, 10.10 * std::f64::consts::SQRT_2);
        s.synthesis.frame = Frame::Rotating;
        s.grid.coarse_step_mhz = 1.0;
        s.grid.fine_step_mhz = 0.1;
        let device = DeviceSpec::reference();
        let r = optimize_detunings(&device, &s, 3.0).unwrap();
        let nominal = crate::holonomic::synthesize_drives(&device, &s.target, &s.synthesis).unwrap();
        let block = GateModel::new(&device, &nominal, &s.model, None).unwrap().subspace_propagator().unwrap();
        assert!(r.value <= transition_error(&block, s.target.theta).unwrap());
        assert!(r.detuning_mhz.iter().all(|d| d.abs() <= 3.0));
        assert!(r.leakage <= r.value + 1e-12);
        assert!(optimize_detunings(&DeviceSpec::reference(), &s, 0.0).is_err());
    }
}
