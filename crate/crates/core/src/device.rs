//! Physical model of two transmons coupled to a multimode cable.

use crate::hilbert::{
    dressed_basis, restrict_to_sector, CMatrix, Channel, Coefficient, ControlHamiltonian, ControlTerm,
    HilbertSpace, Operator, Sector, SectorKind,
};
use crate::pulse::DriveSignal;
use crate::special::{bessel_j1, bessel_j2};
use crate::units::{ghz_to_angular, mhz_to_angular, rate_from_us};
use crate::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Signal velocity in the reference coaxial cable, m/s.
pub const DEFAULT_VELOCITY_M_PER_S: f64 = 1.209e8;

/// Index of the mediating cable mode.
pub const CENTER_MODE: i32 = 2;

/// How the cable-mode frequencies are given.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeLadder {
    /// Measured frequencies in GHz; `center` is the position of the mediating mode.
    Explicit { freqs_ghz: Vec<f64>, center: usize },
    /// Uniform ladder around the mediating mode. Higher mode index means lower
    /// frequency: `f_j = f_2 - (j - 2) * fsr`.
    Fsr { center_ghz: f64, fsr_mhz: f64, count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cable {
    pub length_m: f64,
    pub velocity_m_per_s: f64,
}

/// Unvalidated device description.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    pub qubit_ghz: [f64; 2],
    pub anharmonicity_mhz: [f64; 2],
    pub ladder: ModeLadder,
    /// Coupling magnitudes of each qubit to the cable modes, MHz.
    pub coupling_mhz: [f64; 2],
    pub qubit_levels: usize,
    pub cable: Option<Cable>,
}

impl DeviceParams {
    /// Measured device with the three resolved cable modes.
    pub fn reference() -> Self {
        Self {
            qubit_ghz: [6.127, 5.712],
            anharmonicity_mhz: [-162.0, -162.0],
            ladder: ModeLadder::Explicit { freqs_ghz: vec![6.36, 5.83, 5.38], center: 1 },
            coupling_mhz: [30.26, 26.88],
            qubit_levels: 3,
            cable: None,
        }
    }

    /// Reference couplings on a five-mode uniform ladder.
    pub fn reference_ladder(fsr_mhz: f64) -> Self {
        Self {
            ladder: ModeLadder::Fsr { center_ghz: 5.83, fsr_mhz, count: 5 },
            ..Self::reference()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub index: i32,
    pub freq_ghz: f64,
}

/// Validated device.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceSpec {
    qubit_ghz: [f64; 2],
    anharmonicity_mhz: [f64; 2],
    modes: Vec<Mode>,
    center: usize,
    coupling_mhz: [f64; 2],
    qubit_levels: usize,
    fsr_mhz: Option<f64>,
    cable: Option<Cable>,
}

fn check_freq(name: &str, f_ghz: f64) -> Result<()> {
    if !(1.0..=20.0).contains(&f_ghz) {
        return Err(Error::invalid(format!("{name} = {f_ghz} GHz is outside 1..20 GHz")));
    }
    Ok(())
}

pub fn build_device(params: &DeviceParams) -> Result<DeviceSpec> {
    for (i, &f) in params.qubit_ghz.iter().enumerate() {
        check_freq(&format!("qubit {} frequency", i + 1), f)?;
    }
    for &a in &params.anharmonicity_mhz {
        if !a.is_finite() || a.abs() >= 1000.0 {
            return Err(Error::invalid(format!("anharmonicity {a} MHz must satisfy |a| < 1 GHz")));
        }
    }
    for &g in &params.coupling_mhz {
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::invalid(format!("coupling magnitude {g} MHz must be positive")));
        }
    }
    if params.qubit_levels < 2 {
        return Err(Error::invalid("qubits need at least two levels"));
    }
    let (modes, center, fsr_mhz) = match &params.ladder {
        ModeLadder::Explicit { freqs_ghz, center } => {
            if freqs_ghz.is_empty() || *center >= freqs_ghz.len() {
                return Err(Error::invalid("explicit ladder needs a center position inside the list"));
            }
            for &f in freqs_ghz {
                check_freq("mode frequency", f)?;
            }
            if freqs_ghz.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::invalid("explicit mode frequencies must decrease with mode index"));
            }
            let modes = freqs_ghz
                .iter()
                .enumerate()
                .map(|(p, &f)| Mode { index: CENTER_MODE + p as i32 - *center as i32, freq_ghz: f })
                .collect();
            (modes, *center, None)
        }
        ModeLadder::Fsr { center_ghz, fsr_mhz, count } => {
            if !(*fsr_mhz > 0.0) || !fsr_mhz.is_finite() {
                return Err(Error::invalid(format!("free spectral range must be positive, got {fsr_mhz} MHz")));
            }
            if *count == 0 {
                return Err(Error::invalid("mode count must be at least 1"));
            }
            check_freq("center mode frequency", *center_ghz)?;
            let first = CENTER_MODE - (*count as i32 - 1) / 2;
            let modes: Vec<Mode> = (0..*count as i32)
                .map(|p| {
                    let j = first + p;
                    Mode { index: j, freq_ghz: center_ghz - (j - CENTER_MODE) as f64 * fsr_mhz * 1e-3 }
                })
                .collect();
            for m in &modes {
                check_freq("mode frequency", m.freq_ghz)?;
            }
            (modes, (CENTER_MODE - first) as usize, Some(*fsr_mhz))
        }
    };
    if let Some(cable) = params.cable {
        let implied = fsr_from_length(cable.length_m, cable.velocity_m_per_s)?;
        if let Some(fsr) = fsr_mhz {
            if (implied - fsr).abs() > 0.01 * fsr {
                return Err(Error::invalid(format!(
                    "cable length implies an FSR of {implied:.3} MHz, inconsistent with {fsr} MHz"
                )));
            }
        }
    }
    Ok(DeviceSpec {
        qubit_ghz: params.qubit_ghz,
        anharmonicity_mhz: params.anharmonicity_mhz,
        modes,
        center,
        coupling_mhz: params.coupling_mhz,
        qubit_levels: params.qubit_levels,
        fsr_mhz,
        cable: params.cable,
    })
}

impl DeviceSpec {
    pub fn reference() -> Self {
        build_device(&DeviceParams::reference()).expect("reference parameters are valid")
    }

    pub fn qubit_ghz(&self, qubit: usize) -> f64 {
        self.qubit_ghz[qubit]
    }

    pub fn anharmonicity_mhz(&self, qubit: usize) -> f64 {
        self.anharmonicity_mhz[qubit]
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    /// Position of the mediating mode in [`modes`](Self::modes).
    pub fn center_position(&self) -> usize {
        self.center
    }

    pub fn center_ghz(&self) -> f64 {
        self.modes[self.center].freq_ghz
    }

    pub fn fsr_mhz(&self) -> Option<f64> {
        self.fsr_mhz
    }

    pub fn cable(&self) -> Option<Cable> {
        self.cable
    }

    pub fn qubit_levels(&self) -> usize {
        self.qubit_levels
    }

    /// `f_M2 - f_Qi` in MHz.
    pub fn qubit_detuning_mhz(&self, qubit: usize) -> f64 {
        (self.center_ghz() - self.qubit_ghz[qubit]) * 1e3
    }

    /// Signed coupling of `qubit` to the mode at `position`, MHz. The second
    /// qubit alternates sign with mode index and is positive on the center mode.
    pub fn coupling_mhz(&self, qubit: usize, position: usize) -> f64 {
        let g = self.coupling_mhz[qubit];
        if qubit == 1 && (self.modes[position].index - CENTER_MODE).rem_euclid(2) == 1 {
            -g
        } else {
            g
        }
    }

    pub fn coupling_magnitude_mhz(&self, qubit: usize) -> f64 {
        self.coupling_mhz[qubit]
    }

    /// Subsystem labels: `Q1`, `Q2`, then `M{j}` per mode.
    pub fn labels(&self) -> Vec<String> {
        let mut labels = vec!["Q1".to_string(), "Q2".to_string()];
        labels.extend(self.modes.iter().map(|m| format!("M{}", m.index)));
        labels
    }

    pub fn with_qubit_ghz(&self, q1: f64, q2: f64) -> Result<Self> {
        check_freq("qubit 1 frequency", q1)?;
        check_freq("qubit 2 frequency", q2)?;
        Ok(Self { qubit_ghz: [q1, q2], ..self.clone() })
    }

    /// Copy with the mediating mode moved by `shift_mhz`; other modes stay put.
    pub fn with_center_shift(&self, shift_mhz: f64) -> Self {
        let mut out = self.clone();
        out.modes[self.center].freq_ghz += shift_mhz * 1e-3;
        out
    }

    /// Single-excitation eigenfrequencies under the static couplings, GHz,
    /// each labelled by its largest bare component. Qubits first, then modes
    /// in ladder order.
    pub fn dressed_frequencies_ghz(&self) -> Result<Vec<f64>> {
        let n = 2 + self.modes.len();
        let mut h = CMatrix::zeros(n, n);
        h[(0, 0)] = Complex64::new(self.qubit_ghz[0] * 1e3, 0.0);
        h[(1, 1)] = Complex64::new(self.qubit_ghz[1] * 1e3, 0.0);
        for (p, m) in self.modes.iter().enumerate() {
            h[(2 + p, 2 + p)] = Complex64::new(m.freq_ghz * 1e3, 0.0);
            for q in 0..2 {
                let g = Complex64::new(self.coupling_mhz(q, p), 0.0);
                h[(q, 2 + p)] = g;
                h[(2 + p, q)] = g;
            }
        }
        let w = dressed_basis(&h)?;
        let d = w.adjoint() * &h * &w;
        Ok((0..n).map(|k| d[(k, k)].re * 1e-3).collect())
    }

    /// Drive detunings that put each qubit's first sideband on the dressed
    /// resonance with the mediating mode, MHz. Meant for the lab frame, where
    /// the static couplings stay in the model.
    pub fn dressed_detunings_mhz(&self) -> Result<[f64; 2]> {
        let f = self.dressed_frequencies_ghz()?;
        let m = f[2 + self.center];
        Ok([0, 1].map(|q| (m - f[q]) * 1e3 - self.qubit_detuning_mhz(q)))
    }

    fn space(&self, qubit_levels: usize) -> Result<HilbertSpace> {
        let mut dims = vec![qubit_levels, qubit_levels];
        dims.extend(std::iter::repeat(2).take(self.modes.len()));
        HilbertSpace::new(dims, self.labels())
    }
}

/// Sign pattern applied to couplings when building Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CouplingGauge {
    #[default]
    Standard,
    FlipSecond,
}

/// Truncation of the parametric sideband expansion in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Expansion {
    /// Resonant first-order sideband only.
    FirstOrder,
    /// First- and second-order sidebands.
    #[default]
    SecondOrder,
    /// Full phase factor without truncation.
    Exact,
}

/// Per-subsystem decoherence times in microseconds. `None` means lossless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub qubit_t1_us: [Option<f64>; 2],
    pub qubit_tphi_us: [Option<f64>; 2],
    pub mode_t1_us: Option<f64>,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            qubit_t1_us: [Some(DEFAULT_QUBIT_T1_US); 2],
            qubit_tphi_us: [Some(DEFAULT_QUBIT_TPHI_US); 2],
            mode_t1_us: Some(DEFAULT_MODE_T1_US),
        }
    }
}

/// Defaults are short enough that decoherence, not control error, dominates
/// the 3 MHz robustness comparison.
pub const DEFAULT_QUBIT_T1_US: f64 = 2.5;
pub const DEFAULT_QUBIT_TPHI_US: f64 = 4.0;
pub const DEFAULT_MODE_T1_US: f64 = 1.5;

impl NoiseSpec {
    pub fn lossless() -> Self {
        Self { qubit_t1_us: [None; 2], qubit_tphi_us: [None; 2], mode_t1_us: None }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.qubit_t1_us.iter().chain(&self.qubit_tphi_us).chain(std::iter::once(&self.mode_t1_us));
        for t in all.flatten() {
            if !(*t > 0.0) || !t.is_finite() {
                return Err(Error::invalid(format!("decoherence times must be positive, got {t} us")));
            }
        }
        Ok(())
    }

    pub fn is_lossless(&self) -> bool {
        *self == Self::lossless()
    }

    /// Relaxation `a_k` at `1/T1` and dephasing `n_k` at `2/Tphi`, so that
    /// coherences decay as `exp(-t/Tphi)`. Channels live on the full space.
    pub fn channels(&self, space: &HilbertSpace) -> Result<Vec<Channel>> {
        self.validate()?;
        let mut out = Vec::new();
        for k in 0..space.num_subsystems() {
            let (t1, tphi) = if k < 2 { (self.qubit_t1_us[k], self.qubit_tphi_us[k]) } else { (self.mode_t1_us, None) };
            let relax = rate_from_us(t1);
            if relax > 0.0 {
                out.push(Channel::new(&space.annihilation(k)?, relax));
            }
            let dephase = 2.0 * rate_from_us(tphi);
            if dephase > 0.0 {
                out.push(Channel::new(&space.number(k)?, dephase));
            }
        }
        Ok(out)
    }
}

/// Projects full-space channels onto a sector. Each collapse operator must
/// map the sector into itself.
pub fn restrict_channels(channels: &[Channel], sector: &Sector) -> Result<Vec<Channel>> {
    channels
        .iter()
        .map(|ch| {
            let dense = ch.op.to_dense();
            let mut leaked = 0.0f64;
            for &c in sector.indices() {
                for r in 0..dense.nrows() {
                    if sector.position(r).is_none() {
                        leaked = leaked.max(dense[(r, c)].norm());
                    }
                }
            }
            if leaked > 0.0 {
                return Err(Error::invalid("collapse operator leaves the sector; use an AtMost sector"));
            }
            Ok(Channel::new(&sector.project(&dense)?, ch.rate))
        })
        .collect()
}

fn check_drives(drives: &[DriveSignal; 2]) -> Result<f64> {
    for (i, d) in drives.iter().enumerate() {
        if d.qubit != i {
            return Err(Error::invalid(format!("drive {i} targets qubit {}", d.qubit)));
        }
    }
    if (drives[0].reference_ghz - drives[1].reference_ghz).abs() > 1e-12 {
        return Err(Error::invalid("drives disagree on the reference mode frequency"));
    }
    Ok(drives[0].reference_ghz)
}

fn gauge_sign(gauge: CouplingGauge, qubit: usize) -> f64 {
    match (gauge, qubit) {
        (CouplingGauge::FlipSecond, 1) => -1.0,
        _ => 1.0,
    }
}

/// Lab-frame model on the full space, written in a frame that rotates every
/// excitation at `frame_ghz` (0 gives the plain lab frame). The drive is a
/// diagonal flux modulation `A(t) cos(W t + phi) n_i`.
pub fn lab_frame_model(
    device: &DeviceSpec,
    drives: &[DriveSignal; 2],
    frame_ghz: f64,
    gauge: CouplingGauge,
) -> Result<(HilbertSpace, ControlHamiltonian)> {
    check_drives(drives)?;
    let space = device.space(device.qubit_levels)?;
    let mut drift = CMatrix::zeros(space.dim(), space.dim());
    let frame = ghz_to_angular(frame_ghz);
    for q in 0..2 {
        let w = ghz_to_angular(device.qubit_ghz[q]) - frame;
        let alpha = mhz_to_angular(device.anharmonicity_mhz[q]);
        drift += space.level_function(q, |l| w * l as f64 + alpha / 2.0 * (l * l.saturating_sub(1)) as f64)?;
    }
    for (p, mode) in device.modes.iter().enumerate() {
        let w = ghz_to_angular(mode.freq_ghz) - frame;
        drift += space.number(2 + p)? * Complex64::new(w, 0.0);
        for q in 0..2 {
            let g = mhz_to_angular(device.coupling_mhz(q, p)) * gauge_sign(gauge, q);
            let hop = space.hop(q, 2 + p)?;
            drift += (&hop + hop.adjoint()) * Complex64::new(g, 0.0);
        }
    }
    let controls = drives
        .iter()
        .map(|d| -> Result<ControlTerm> {
            let n = space.number(d.qubit)?;
            let drive = d.clone();
            let carrier = drive.carrier_angular();
            let coeff: Coefficient = Arc::new(move |t: f64| {
                Complex64::new(mhz_to_angular(drive.amplitude_mhz(t)) * (carrier * t + drive.phase_rad).cos(), 0.0)
            });
            Ok(ControlTerm::new(&n, false, coeff))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((space, ControlHamiltonian::new(drift, controls)?))
}

/// Instantaneous lab-frame Hamiltonian (plain lab frame, full space).
pub fn lab_frame_hamiltonian(device: &DeviceSpec, drives: &[DriveSignal; 2], t: f64) -> Result<Operator> {
    let (_, h) = lab_frame_model(device, drives, 0.0, CouplingGauge::Standard)?;
    use crate::hilbert::Hamiltonian;
    Operator::new(h.sample(t))
}

/// Coupling factor multiplying `g_ij |M_j><Q_i|` in the frame rotating at the
/// drives' reference frequency.
pub fn sideband_factor(device: &DeviceSpec, drive: &DriveSignal, expansion: Expansion) -> Coefficient {
    let carrier = drive.carrier_angular();
    let residual = ghz_to_angular(device.qubit_ghz[drive.qubit] - drive.reference_ghz);
    let det = drive.bessel_detuning_mhz();
    let drive = drive.clone();
    Arc::new(move |t: f64| {
        let z = drive.amplitude_mhz(t) / det;
        let theta = carrier * t + drive.phase_rad;
        match expansion {
            Expansion::FirstOrder => bessel_j1(z) * Complex64::from_polar(1.0, -(residual * t + theta)),
            Expansion::SecondOrder => {
                bessel_j1(z) * Complex64::from_polar(1.0, -(residual * t + theta))
                    + bessel_j2(z) * Complex64::from_polar(1.0, -(residual * t + 2.0 * theta))
            }
            Expansion::Exact => Complex64::from_polar(1.0, -(residual * t + z * theta.sin())),
        }
    })
}

/// Rotating-frame model on the full two-level space. Mode energies are
/// measured from the drives' reference frequency.
pub fn rotating_frame_model(
    device: &DeviceSpec,
    drives: &[DriveSignal; 2],
    expansion: Expansion,
    gauge: CouplingGauge,
) -> Result<(HilbertSpace, ControlHamiltonian)> {
    let reference = check_drives(drives)?;
    let space = device.space(2)?;
    let mut drift = CMatrix::zeros(space.dim(), space.dim());
    let mut hops = vec![CMatrix::zeros(space.dim(), space.dim()); 2];
    for (p, mode) in device.modes.iter().enumerate() {
        drift += space.number(2 + p)? * Complex64::new(ghz_to_angular(mode.freq_ghz - reference), 0.0);
        for q in 0..2 {
            let g = mhz_to_angular(device.coupling_mhz(q, p)) * gauge_sign(gauge, q);
            hops[q] += space.hop(2 + p, q)? * Complex64::new(g, 0.0);
        }
    }
    let controls = drives
        .iter()
        .zip(&hops)
        .map(|(d, hop)| ControlTerm::new(hop, true, sideband_factor(device, d, expansion)))
        .collect();
    Ok((space, ControlHamiltonian::new(drift, controls)?))
}

/// Instantaneous single-excitation rotating-frame Hamiltonian, basis
/// `[Q1, Q2, M...]`.
pub fn rotating_frame_hamiltonian(
    device: &DeviceSpec,
    drives: &[DriveSignal; 2],
    expansion: Expansion,
    t: f64,
) -> Result<Operator> {
    use crate::hilbert::Hamiltonian;
    let (space, h) = rotating_frame_model(device, drives, expansion, CouplingGauge::Standard)?;
    let full = h.sample(t);
    let (_, block) = restrict_to_sector(&space, &full, SectorKind::Exactly(1))?;
    Operator::new(block)
}

/// First- and second-order sideband couplings of one qubit-mode pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveCoupling {
    /// `g J1(z)`, MHz, signed.
    pub first_order_mhz: f64,
    /// `g J2(z)`, MHz, signed.
    pub second_order_mhz: f64,
    pub detuning_mhz: f64,
    pub phase_rad: f64,
}

impl EffectiveCoupling {
    /// First-order coupling including its phase at time `t` (ns).
    pub fn at(&self, t: f64) -> Complex64 {
        self.first_order_mhz * Complex64::from_polar(1.0, -(TAU * self.detuning_mhz * 1e-3 * t + self.phase_rad))
    }
}

/// Sideband coupling for bare coupling `g`, modulation amplitude `A` and
/// qubit-mode detuning `f_M - f_Q` (all MHz).
pub fn effective_coupling(
    g_mhz: f64,
    amplitude_mhz: f64,
    qubit_mode_detuning_mhz: f64,
    detuning_mhz: f64,
    phase_rad: f64,
) -> Result<EffectiveCoupling> {
    if qubit_mode_detuning_mhz == 0.0 || !qubit_mode_detuning_mhz.is_finite() {
        return Err(Error::invalid("qubit-mode detuning must be non-zero"));
    }
    let z = amplitude_mhz / qubit_mode_detuning_mhz;
    Ok(EffectiveCoupling {
        first_order_mhz: g_mhz * bessel_j1(z),
        second_order_mhz: g_mhz * bessel_j2(z),
        detuning_mhz,
        phase_rad,
    })
}

/// FSR (MHz) of a cable of length `length_m`.
pub fn fsr_from_length(length_m: f64, velocity_m_per_s: f64) -> Result<f64> {
    if !(length_m > 0.0) || !(velocity_m_per_s > 0.0) {
        return Err(Error::invalid("length and velocity must be positive"));
    }
    Ok(velocity_m_per_s / (2.0 * length_m) * 1e-6)
}

/// Cable length (m) giving an FSR of `fsr_mhz`.
pub fn length_from_fsr(fsr_mhz: f64, velocity_m_per_s: f64) -> Result<f64> {
    if !(fsr_mhz > 0.0) || !(velocity_m_per_s > 0.0) {
        return Err(Error::invalid("FSR and velocity must be positive"));
    }
    Ok(velocity_m_per_s / (2.0 * fsr_mhz * 1e6))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{number_commutator, Hamiltonian};
    use crate::pulse::{Envelope, EnvelopeKind};
    use approx::assert_abs_diff_eq;

    fn drives(device: &DeviceSpec, peak: [f64; 2]) -> [DriveSignal; 2] {
        let env = |a| Envelope::new(EnvelopeKind::Cosine, 40.0, a).unwrap();
        [
            DriveSignal::direct(device, 0, env(peak[0]), 0.0, 0.0),
            DriveSignal::direct(device, 1, env(peak[1]), 0.0, 0.0),
        ]
    }

    #[test]
    fn reference_device_is_valid() {
        let d = DeviceSpec::reference();
        assert_eq!(d.num_modes(), 3);
        assert_eq!(d.center_ghz(), 5.83);
        assert_eq!(d.labels(), ["Q1", "Q2", "M1", "M2", "M3"]);
        assert_eq!(d.coupling_mhz(1, 0), -26.88);
        assert_eq!(d.coupling_mhz(1, 1), 26.88);
        assert_eq!(d.coupling_mhz(0, 0), 30.26);
    }

    #[test]
    fn fsr_ladder() {
        let d = build_device(&DeviceParams::reference_ladder(403.0)).unwrap();
        let f: Vec<f64> = d.modes().iter().map(|m| m.freq_ghz).collect();
        assert_abs_diff_eq!(f[1], 6.233, epsilon = 1e-12);
        assert_abs_diff_eq!(f[3], 5.427, epsilon = 1e-12);
        let idx: Vec<i32> = d.modes().iter().map(|m| m.index).collect();
        assert_eq!(idx, [0, 1, 2, 3, 4]);
        let signs: Vec<f64> = (0..5).map(|p| d.coupling_mhz(1, p).signum()).collect();
        assert_eq!(signs, [1.0, -1.0, 1.0, -1.0, 1.0]);
        let single = DeviceParams {
            ladder: ModeLadder::Fsr { center_ghz: 5.83, fsr_mhz: 403.0, count: 1 },
            ..DeviceParams::reference()
        };
        assert_eq!(build_device(&single).unwrap().num_modes(), 1);
    }

    #[test]
    fn invalid_devices() {
        let mut p = DeviceParams::reference_ladder(0.0);
        assert!(build_device(&p).is_err());
        p = DeviceParams::reference();
        p.qubit_ghz[0] = 25.0;
        assert!(build_device(&p).is_err());
        p = DeviceParams::reference_ladder(403.0);
        p.cable = Some(Cable { length_m: 0.30, velocity_m_per_s: DEFAULT_VELOCITY_M_PER_S });
        assert!(build_device(&p).is_err());
        p.cable = Some(Cable { length_m: 0.15, velocity_m_per_s: DEFAULT_VELOCITY_M_PER_S });
        assert!(build_device(&p).is_ok());
    }

    #[test]
    fn cable_conversion() {
        assert_abs_diff_eq!(fsr_from_length(0.15, DEFAULT_VELOCITY_M_PER_S).unwrap(), 403.0, epsilon = 1e-9);
        assert_abs_diff_eq!(length_from_fsr(100.0, DEFAULT_VELOCITY_M_PER_S).unwrap(), 0.6045, epsilon = 1e-12);
        let a = fsr_from_length(0.4, 1e8).unwrap();
        assert_abs_diff_eq!(fsr_from_length(0.8, 1e8).unwrap(), a / 2.0, epsilon = 1e-12);
        assert!(fsr_from_length(0.0, 1e8).is_err());
    }

    #[test]
    fn effective_coupling_values() {
        assert_eq!(effective_coupling(30.0, 0.0, -233.0, 0.0, 0.0).unwrap().first_order_mhz, 0.0);
        let c = effective_coupling(1.0, 10.0, 100.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(c.first_order_mhz, 0.049_937_526_036_241_9, epsilon = 1e-12);
        assert!(effective_coupling(1.0, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn lab_hamiltonian_is_hermitian_and_conserving() {
        let d = DeviceSpec::reference();
        let dr = drives(&d, [300.0, 200.0]);
        let (space, h) = lab_frame_model(&d, &dr, 0.0, CouplingGauge::Standard).unwrap();
        assert_eq!(space.dim(), 3 * 3 * 8);
        for t in [0.0, 3.3, 17.0, 39.0] {
            let m = h.sample(t);
            assert!(Operator::new(m.clone()).unwrap().hermiticity_deviation() < 1e-12);
            assert!(number_commutator(&space, &m) < 1e-12);
        }
    }

    #[test]
    fn lab_drive_is_diagonal_oscillation() {
        let d = DeviceSpec::reference();
        let env = Envelope::new(EnvelopeKind::Square, 40.0, 100.0).unwrap();
        let dr = [
            DriveSignal::direct(&d, 0, env.clone(), 0.0, 0.0),
            DriveSignal::direct(&d, 1, env.with_peak(0.0), 0.0, 0.0),
        ];
        let (space, h) = lab_frame_model(&d, &dr, 0.0, CouplingGauge::Standard).unwrap();
        let idx = space.excited(0, 1).unwrap();
        let base = ghz_to_angular(6.127);
        let w = dr[0].carrier_angular();
        for t in [1.0, 2.5, 7.0] {
            let m = h.sample(t);
            assert_abs_diff_eq!(m[(idx, idx)].re - base, mhz_to_angular(100.0) * (w * t).cos(), epsilon = 1e-9);
        }
    }

    #[test]
    fn undriven_single_excitation_spectrum() {
        // Oracle: eigenvalues of the bare single-excitation block.
        let d = DeviceSpec::reference();
        let dr = drives(&d, [0.0, 0.0]);
        let (space, h) = lab_frame_model(&d, &dr, 0.0, CouplingGauge::Standard).unwrap();
        let (_, block) = restrict_to_sector(&space, &h.sample(0.0), SectorKind::Exactly(1)).unwrap();
        let mut eig: Vec<f64> = nalgebra::linalg::SymmetricEigen::new(block).eigenvalues.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        let mut bare = vec![6.127, 5.712, 6.36, 5.83, 5.38].into_iter().map(ghz_to_angular).collect::<Vec<_>>();
        bare.sort_by(f64::total_cmp);
        // Dressed levels repel but stay within a few coupling strengths.
        for (e, b) in eig.iter().zip(&bare) {
            assert!((e - b).abs() < mhz_to_angular(60.0));
        }
        let trace: f64 = bare.iter().sum();
        assert_abs_diff_eq!(eig.iter().sum::<f64>(), trace, epsilon = 1e-9);
    }

    #[test]
    fn rotating_hamiltonian_structure() {
        let d = build_device(&DeviceParams::reference_ladder(403.0)).unwrap();
        let zero = drives(&d, [0.0, 0.0]);
        let h = rotating_frame_hamiltonian(&d, &zero, Expansion::SecondOrder, 5.0).unwrap();
        assert_eq!(h.dim(), 7);
        for p in 0..5 {
            let expected = -((p as f64) - 2.0) * mhz_to_angular(403.0);
            assert_abs_diff_eq!(h.matrix()[(2 + p, 2 + p)].re, expected, epsilon = 1e-9);
        }
        assert_eq!(h.matrix()[(2, 0)].norm(), 0.0);
        let exact = rotating_frame_hamiltonian(&d, &zero, Expansion::Exact, 5.0).unwrap();
        let resid = ghz_to_angular(6.127 - 5.83);
        let expected = mhz_to_angular(30.26) * Complex64::from_polar(1.0, -resid * 5.0);
        assert!((exact.matrix()[(4, 0)] - expected).norm() < 1e-12);
        let driven = drives(&d, [300.0, 200.0]);
        for t in [0.0, 11.0, 23.0] {
            let m = rotating_frame_hamiltonian(&d, &driven, Expansion::SecondOrder, t).unwrap();
            assert!(m.hermiticity_deviation() < 1e-12);
        }
    }
}
