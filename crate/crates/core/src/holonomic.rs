//! Target reflections and the drive pairs that realize them.

use crate::device::DeviceSpec;
use crate::hilbert::Operator;
use crate::pulse::{gate_duration, peak_argument_for_average, DriveSignal, Envelope, EnvelopeKind, Shaping};
use crate::special::bessel_j1;
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateLabel {
    Swap,
    SqrtSwap,
    Custom,
}

/// Reflection `[[cos t, e^{ip} sin t], [e^{-ip} sin t, -cos t]]` on `{|10>, |01>}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateTarget {
    pub theta: f64,
    pub phi: f64,
    pub label: GateLabel,
}

impl GateTarget {
    pub fn swap() -> Self {
        Self { theta: FRAC_PI_2, phi: PI, label: GateLabel::Swap }
    }

    pub fn sqrt_swap() -> Self {
        Self { theta: FRAC_PI_4, phi: PI, label: GateLabel::SqrtSwap }
    }

    pub fn new(theta: f64, phi: f64, label: GateLabel) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::invalid(format!("theta = {theta} must lie in [0, pi]")));
        }
        if !(0.0..TAU).contains(&phi) {
            return Err(Error::invalid(format!("phi = {phi} must lie in [0, 2 pi)")));
        }
        let required = match label {
            GateLabel::Swap => Some(FRAC_PI_2),
            GateLabel::SqrtSwap => Some(FRAC_PI_4),
            GateLabel::Custom => None,
        };
        if let Some(t) = required {
            if (theta - t).abs() > 1e-12 {
                return Err(Error::invalid(format!("{label:?} requires theta = {t}")));
            }
        }
        Ok(Self { theta, phi, label })
    }

    pub fn name(&self) -> &'static str {
        match self.label {
            GateLabel::Swap => "swap",
            GateLabel::SqrtSwap => "sqrt_swap",
            GateLabel::Custom => "custom",
        }
    }
}

pub fn target_unitary(theta: f64, phi: f64) -> Result<Operator> {
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::NonFinite("gate angles".into()));
    }
    let (s, c) = theta.sin_cos();
    let e = Complex64::from_polar(1.0, phi);
    Operator::from_row_slice(2, &[Complex64::new(c, 0.0), e * s, e.conj() * s, Complex64::new(-c, 0.0)])
}

/// Required ratio of the first-order couplings `Q1-M2 / Q2-M2`, taken as the
/// coefficients of `|Q_i><M2|`.
pub fn coupling_ratio(target: &GateTarget) -> Result<Complex64> {
    if (target.theta - PI).abs() < 1e-12 {
        return Err(Error::invalid("theta = pi needs a vanishing second coupling"));
    }
    Ok(-Complex64::from_polar((target.theta / 2.0).tan(), target.phi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    #[default]
    Rotating,
    Lab,
}

/// One gate: a simultaneous drive pair on both qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSchedule {
    pub drives: [DriveSignal; 2],
    pub duration_ns: f64,
    pub target: GateTarget,
    pub frame: Frame,
}

impl GateSchedule {
    /// Ratio of the first-order `|Q_i><M2|` coefficients, qubit 1 over
    /// qubit 2, at time `t`.
    pub fn implied_ratio(&self, device: &DeviceSpec, t: f64) -> Complex64 {
        let c = device.center_position();
        let coeff = |d: &DriveSignal| {
            let z = d.amplitude_mhz(t) / d.bessel_detuning_mhz();
            device.coupling_mhz(d.qubit, c) * bessel_j1(z) * Complex64::from_polar(1.0, d.phase_rad)
        };
        coeff(&self.drives[0]) / coeff(&self.drives[1])
    }

    pub fn with_frame(mut self, frame: Frame) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_detunings(mut self, detuning_mhz: [f64; 2]) -> Self {
        for (d, x) in self.drives.iter_mut().zip(detuning_mhz) {
            d.detuning_mhz = x;
        }
        self
    }
}

/// Inputs of [`synthesize_drives`] beyond the target.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub envelope: EnvelopeKind,
    /// `sqrt(ga1^2 + ga2^2)` of the per-qubit average couplings, MHz.
    pub effective_coupling_mhz: f64,
    pub detuning_mhz: [f64; 2],
    /// Added to the phase of the first qubit's drive. Compensates phase
    /// shifts the ideal synthesis does not account for.
    pub phase_offset_rad: f64,
    pub frame: Frame,
}

impl SynthesisOptions {
    pub fn new(envelope: EnvelopeKind, effective_coupling_mhz: f64) -> Self {
        Self { envelope, effective_coupling_mhz, detuning_mhz: [0.0; 2], phase_offset_rad: 0.0, frame: Frame::Rotating }
    }
}

/// Frequency-independent part of a synthesis: duration, the reference
/// qubit, its peak Bessel argument and the matching ratio. Reusable across
/// qubit frequencies as long as the bare couplings stay the same.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivePlan {
    pub target: GateTarget,
    pub options: SynthesisOptions,
    pub duration_ns: f64,
    /// Qubit driven directly by the envelope.
    pub reference: usize,
    pub peak_argument: f64,
    /// Average coupling of each qubit as a fraction of its bare coupling.
    pub fractions: [f64; 2],
    ratio: Complex64,
}

impl DrivePlan {
    pub fn new(device: &DeviceSpec, target: &GateTarget, options: &SynthesisOptions) -> Result<Self> {
        let ratio = coupling_ratio(target)?;
        let g_eff = options.effective_coupling_mhz;
        if !(g_eff > 0.0) || !g_eff.is_finite() {
            return Err(Error::invalid("effective coupling must be positive"));
        }
        let averages = [g_eff * (target.theta / 2.0).sin(), g_eff * (target.theta / 2.0).cos()];
        let duration_ns = gate_duration(averages[0], averages[1])?;
        let fractions = [0, 1].map(|q| averages[q] / device.coupling_magnitude_mhz(q));
        let reference = if fractions[0] > fractions[1] { 0 } else { 1 };
        let peak_argument = peak_argument_for_average(&options.envelope, fractions[reference])?;
        Ok(Self { target: *target, options: options.clone(), duration_ns, reference, peak_argument, fractions, ratio })
    }

    /// Drive pair for the qubit and mode frequencies of `device`.
    pub fn schedule(&self, device: &DeviceSpec) -> Result<GateSchedule> {
        let reference = self.reference;
        let other = 1 - reference;
        let dets = [0, 1].map(|q| device.qubit_detuning_mhz(q));
        if dets.iter().any(|&d| d == 0.0) {
            return Err(Error::invalid("a qubit is resonant with the mediating mode"));
        }
        let env = Envelope::new(self.options.envelope.clone(), self.duration_ns, self.peak_argument * dets[reference].abs())?;

        // Sign of each first-order coupling at phase zero.
        let c = device.center_position();
        let sign = |q: usize| device.coupling_mhz(q, c).signum() * dets[q].signum();
        let phase1 =
            if self.ratio.norm() == 0.0 { 0.0 } else { (self.ratio * sign(0) * sign(1)).arg().rem_euclid(TAU) };
        let phases = [phase1 + self.options.phase_offset_rad, 0.0];

        let mut drives =
            [0, 1].map(|q| DriveSignal::direct(device, q, env.clone(), self.options.detuning_mhz[q], phases[q]));
        drives[other].shaping = Shaping::Matched {
            reference_detuning_mhz: dets[reference].abs(),
            ratio: self.fractions[other] / self.fractions[reference],
        };
        Ok(GateSchedule { drives, duration_ns: self.duration_ns, target: self.target, frame: self.options.frame })
    }
}

/// Builds the drive pair for `target` with the given envelope family and
/// average effective coupling.
///
/// The qubit that needs the larger fraction of its bare coupling is driven
/// with the envelope directly. The other drive is shaped so that its
/// first-order coupling is a fixed multiple of the first at every instant,
/// which keeps the coupling ratio, and hence the gate angles, constant in
/// time. The duration makes the bright state complete one cycle.
pub fn synthesize_drives(device: &DeviceSpec, target: &GateTarget, options: &SynthesisOptions) -> Result<GateSchedule> {
    DrivePlan::new(device, target, options)?.schedule(device)
}

/// Non-geometric comparison gate: a full transfer `Q1 -> M2`, then `M2 -> Q2`,
/// each with the same envelope family and per-qubit average coupling as the
/// drives of `holonomic`.
pub fn dynamic_baseline_schedule(device: &DeviceSpec, holonomic: &GateSchedule) -> Result<Vec<GateSchedule>> {
    let kind = &holonomic.drives[0].envelope.kind;
    let mut steps = Vec::with_capacity(2);
    for q in 0..2 {
        let drive = &holonomic.drives[q];
        let average = drive.average_coupling_mhz(device);
        if !(average > 0.0) {
            return Err(Error::invalid(format!("qubit {} carries no coupling in the holonomic gate", q + 1)));
        }
        let duration = 1.0 / (4.0 * average * 1e-3);
        let det = device.qubit_detuning_mhz(q).abs();
        let z = peak_argument_for_average(kind, average / device.coupling_magnitude_mhz(q))?;
        let env = Envelope::new(kind.clone(), duration, z * det)?;
        let active = DriveSignal::direct(device, q, env, drive.detuning_mhz, 0.0);
        let idle = DriveSignal::idle(device, 1 - q, duration)?;
        let drives = if q == 0 { [active, idle] } else { [idle, active] };
        steps.push(GateSchedule { drives, duration_ns: duration, target: holonomic.target, frame: holonomic.frame });
    }
    Ok(steps)
}
