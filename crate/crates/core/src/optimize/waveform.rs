use super::adam::{adam_minimize_projected, AdamConfig, OptimizationResult};
use super::frequency::SWEEP_COUPLING_MHZ;
use crate::analysis::{gate_loss, population_distribution, subspace_leakage};
use crate::device::DeviceSpec;
use crate::dynamics::{GateModel, ModelOptions};
use crate::holonomic::{synthesize_drives, target_unitary, GateTarget, SynthesisOptions};
use crate::pulse::{gate_duration, EnvelopeKind, KnotShape, DEFAULT_KNOTS};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSearch {
    pub target: GateTarget,
    pub effective_coupling_mhz: f64,
    /// Starting shape; its interior knots are free parameters.
    pub initial: KnotShape,
    /// Also optimize the phase offset of the first drive, in rad.
    pub optimize_phase: bool,
    /// Also optimize the two drive detunings, in MHz.
    pub optimize_detuning: bool,
    /// Also optimize the gate duration, in ns. The peak is re-solved so the
    /// cyclic condition holds at the new duration.
    pub optimize_duration: bool,
    pub initial_detuning_mhz: [f64; 2],
    pub model: ModelOptions,
    pub adam: AdamConfig,
}

impl WaveformSearch {
    /// SWAP at the sweep coupling, starting from cosine-equivalent knots,
    /// with the drive phase free.
    pub fn new() -> Self {
        Self {
            target: GateTarget::swap(),
            effective_coupling_mhz: SWEEP_COUPLING_MHZ * std::f64::consts::SQRT_2,
            initial: KnotShape::cosine(DEFAULT_KNOTS).expect("default knot count is valid"),
            optimize_phase: true,
            optimize_detuning: false,
            optimize_duration: false,
            initial_detuning_mhz: [0.0; 2],
            model: ModelOptions::default(),
            adam: AdamConfig::default(),
        }
    }
}

impl Default for WaveformSearch {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformEvaluation {
    pub loss: f64,
    /// Leakage averaged over the inputs `|10>` and `|01>`.
    pub leakage: f64,
    /// Final population of every sector state, averaged over the same two inputs.
    pub distribution: Vec<(String, f64)>,
}

/// Everything a candidate waveform fixes besides the device and target.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSettings {
    pub shape: KnotShape,
    pub phase_offset_rad: f64,
    pub detuning_mhz: [f64; 2],
    pub duration_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveformResult {
    pub optimization: OptimizationResult,
    pub settings: WaveformSettings,
    pub initial: WaveformEvaluation,
    pub optimized: WaveformEvaluation,
}

/// Maps between the parameter vector and [`WaveformSettings`]:
/// free knots, then the optional phase, detunings and duration.
struct Layout {
    pinned: bool,
    knots: usize,
    phase: bool,
    detuning: bool,
    duration: bool,
    fixed: WaveformSettings,
}

impl Layout {
    fn pack(&self, settings: &WaveformSettings) -> Vec<f64> {
        let v = settings.shape.values();
        let mut x: Vec<f64> = if self.pinned { v[1..v.len() - 1].to_vec() } else { v.to_vec() };
        if self.phase {
            x.push(settings.phase_offset_rad);
        }
        if self.detuning {
            x.extend_from_slice(&settings.detuning_mhz);
        }
        if self.duration {
            x.push(settings.duration_ns);
        }
        x
    }

    fn unpack(&self, x: &[f64]) -> Result<WaveformSettings> {
        let (knots, mut rest) = x.split_at(self.knots);
        let values = if self.pinned {
            std::iter::once(0.0).chain(knots.iter().copied()).chain(std::iter::once(0.0)).collect()
        } else {
            knots.to_vec()
        };
        let mut out = WaveformSettings { shape: KnotShape::new(values, self.pinned)?, ..self.fixed.clone() };
        if self.phase {
            out.phase_offset_rad = rest[0];
            rest = &rest[1..];
        }
        if self.detuning {
            out.detuning_mhz = [rest[0], rest[1]];
            rest = &rest[2..];
        }
        if self.duration {
            out.duration_ns = rest[0];
        }
        Ok(out)
    }

    /// Non-negative knots scaled to a unit maximum. The peak is re-solved for
    /// every candidate, so the overall scale carries no information.
    fn project(&self, x: &mut [f64]) {
        let knots = &mut x[..self.knots];
        for v in knots.iter_mut() {
            *v = v.max(0.0);
        }
        let max = knots.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            knots.iter_mut().for_each(|v| *v /= max);
        }
    }
}

/// Loss, leakage and (optionally) the final population distribution of one
/// candidate.
pub fn evaluate_waveform(
    device: &DeviceSpec,
    target: &GateTarget,
    settings: &WaveformSettings,
    model_options: &ModelOptions,
    with_distribution: bool,
) -> Result<WaveformEvaluation> {
    if !(settings.duration_ns > 0.0) {
        return Err(Error::invalid(format!("gate duration must be positive, got {} ns", settings.duration_ns)));
    }
    let options = SynthesisOptions {
        detuning_mhz: settings.detuning_mhz,
        phase_offset_rad: settings.phase_offset_rad,
        ..SynthesisOptions::new(
            EnvelopeKind::Parameterized(settings.shape.clone()),
            1.0 / (2.0 * settings.duration_ns * 1e-3),
        )
    };
    let schedule = synthesize_drives(device, target, &options)?;
    let model = GateModel::new(device, &schedule, model_options, None)?;
    let ideal = target_unitary(target.theta, target.phi)?;
    let block = model.subspace_propagator()?;
    let loss = gate_loss(ideal.matrix(), &block)?;
    let leakage = subspace_leakage(&block);
    if !with_distribution {
        return Ok(WaveformEvaluation { loss, leakage, distribution: Vec::new() });
    }
    let mut pops = vec![0.0; model.dim()];
    for q in 0..2 {
        for (p, v) in pops.iter_mut().zip(model.evolve(&model.qubit_state(q)?)?.populations()) {
            *p += 0.5 * v;
        }
    }
    Ok(WaveformEvaluation { loss, leakage, distribution: population_distribution(&model, &pops) })
}

/// Adam over the knot amplitudes (plus the optional phase, detunings and
/// duration) against the trace loss of the gate on `{|10>, |01>}`. Every
/// candidate is re-synthesized, so its envelope meets the cyclic condition
/// for its own duration.
pub fn optimize_waveform(device: &DeviceSpec, search: &WaveformSearch) -> Result<WaveformResult> {
    let n = search.initial.values().len();
    let pinned = search.initial.pin_edges();
    let knots = if pinned { n - 2 } else { n };
    if knots == 0 {
        return Err(Error::invalid("the initial shape has no free knots"));
    }
    let start = WaveformSettings {
        shape: search.initial.clone(),
        phase_offset_rad: 0.0,
        detuning_mhz: search.initial_detuning_mhz,
        duration_ns: gate_duration(search.effective_coupling_mhz, 0.0)?,
    };
    let layout = Layout {
        pinned,
        knots,
        phase: search.optimize_phase,
        detuning: search.optimize_detuning,
        duration: search.optimize_duration,
        fixed: start.clone(),
    };
    let loss = |x: &[f64]| -> Result<f64> {
        Ok(evaluate_waveform(device, &search.target, &layout.unpack(x)?, &search.model, false)?.loss)
    };
    let initial = evaluate_waveform(device, &search.target, &start, &search.model, true)?;
    let optimization = adam_minimize_projected(&loss, &layout.pack(&start), &search.adam, |x| layout.project(x))?;
    let settings = layout.unpack(&optimization.params)?;
    let optimized = evaluate_waveform(device, &search.target, &settings, &search.model, true)?;
    Ok(WaveformResult { optimization, settings, initial, optimized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::DeviceParams;
    use crate::optimize::ladder_device;

    fn layout(shape: &KnotShape) -> Layout {
        let fixed = WaveformSettings { shape: shape.clone(), phase_offset_rad: 0.0, detuning_mhz: [0.0; 2], duration_ns: 70.0 };
        Layout { pinned: true, knots: shape.values().len() - 2, phase: true, detuning: true, duration: true, fixed }
    }

    #[test]
    fn layout_round_trips() {
        let shape = KnotShape::cosine(8).unwrap();
        let l = layout(&shape);
        let s = WaveformSettings { shape, phase_offset_rad: 0.3, detuning_mhz: [1.5, -2.0], duration_ns: 64.0 };
        let x = l.pack(&s);
        assert_eq!(x.len(), 6 + 4);
        assert_eq!(l.unpack(&x).unwrap(), s);
    }

    #[test]
    fn projection_clamps_and_normalizes() {
        let l = layout(&KnotShape::cosine(5).unwrap());
        let mut x = vec![-0.2, 2.0, 0.5, 7.0];
        l.project(&mut x);
        assert_eq!(x, vec![0.0, 1.0, 0.25, 7.0]);
    }

    fn fast_device() -> DeviceSpec {
        ladder_device(&DeviceParams::reference(), 403.0, 5).unwrap().with_qubit_ghz(6.0489, 5.6111).unwrap()
    }

    #[test]
    fn cosine_knots_give_a_clean_swap() {
        let search = WaveformSearch { model: ModelOptions { dt_ns: 0.04, ..ModelOptions::default() }, ..WaveformSearch::new() };
        let settings = WaveformSettings {
            shape: search.initial.clone(),
            phase_offset_rad: 0.0,
            detuning_mhz: [0.0; 2],
            duration_ns: gate_duration(search.effective_coupling_mhz, 0.0).unwrap(),
        };
        let e = evaluate_waveform(&fast_device(), &search.target, &settings, &search.model, true).unwrap();
        assert!(e.leakage < 1e-5, "leakage {}", e.leakage);
        assert!(e.loss < 1e-3, "loss {}", e.loss);
        let total: f64 = e.distribution.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        let bad = WaveformSettings { duration_ns: 0.0, ..settings };
        assert!(evaluate_waveform(&fast_device(), &search.target, &bad, &search.model, false).is_err());
    }

    #[test]
    fn short_search_never_worsens() {
        let device = ladder_device(&DeviceParams::reference(), 100.0, 5).unwrap().with_qubit_ghz(5.88, 5.78).unwrap();
        let search = WaveformSearch {
            initial: KnotShape::cosine(6).unwrap(),
            model: ModelOptions { dt_ns: 0.04, ..ModelOptions::default() },
            adam: AdamConfig { max_iterations: 3, ..AdamConfig::default() },
            ..WaveformSearch::new()
        };
        let r = optimize_waveform(&device, &search).unwrap();
        assert!(r.optimization.loss <= r.optimization.history[0]);
        assert!((r.optimized.loss - r.optimization.loss).abs() < 1e-12);
        assert!((r.initial.loss - r.optimization.history[0]).abs() < 1e-12);
    }
}
