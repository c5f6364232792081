//! Envelope families and parametric drive signals.

use crate::device::DeviceSpec;
use crate::special::{bessel_j1, bessel_j1_inverse};
use crate::units::mhz_to_angular;
use crate::{Error, Result};
use std::f64::consts::TAU;

/// Quadrature intervals on the unit interval; a multiple of 2 and of 15 so
/// Simpson panels line up with 16-knot envelopes.
const AVERAGE_INTERVALS: usize = 480;

pub const DEFAULT_KNOTS: usize = 16;

/// Piecewise-cubic shape through non-negative values at uniform knots on
/// `[0, 1]`, with monotonicity-preserving slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotShape {
    values: Vec<f64>,
    slopes: Vec<f64>,
    pin_edges: bool,
}

impl KnotShape {
    /// With `pin_edges` the first and last values are forced to zero.
    pub fn new(mut values: Vec<f64>, pin_edges: bool) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("a knot shape needs at least two knots"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("knot values must be finite and non-negative"));
        }
        if pin_edges {
            let n = values.len();
            values[0] = 0.0;
            values[n - 1] = 0.0;
        }
        if values.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid("knot values are all zero"));
        }
        let slopes = pchip_slopes(&values);
        Ok(Self { values, slopes, pin_edges })
    }

    /// Knots sampled from the raised-cosine shape.
    pub fn cosine(n: usize) -> Result<Self> {
        let values = (0..n).map(|k| cosine_shape(k as f64 / (n - 1).max(1) as f64)).collect();
        Self::new(values, true)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn pin_edges(&self) -> bool {
        self.pin_edges
    }

    pub fn eval(&self, s: f64) -> f64 {
        let n = self.values.len();
        let h = 1.0 / (n - 1) as f64;
        let x = (s / h).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let u = x - k as f64;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let u2 = u * u;
        let u3 = u2 * u;
        let v = (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * m0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * m1;
        v.max(0.0)
    }
}

fn pchip_slopes(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let h = 1.0 / (n - 1) as f64;
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    if n == 2 {
        return vec![d[0]; 2];
    }
    let mut m = vec![0.0; n];
    for k in 1..n - 1 {
        if d[k - 1] * d[k] > 0.0 {
            m[k] = 2.0 / (1.0 / d[k - 1] + 1.0 / d[k]);
        }
    }
    let end = |d0: f64, d1: f64| {
        let m = (3.0 * d0 - d1) / 2.0;
        if m.signum() != d0.signum() || d0 == 0.0 {
            0.0
        } else if d0.signum() != d1.signum() && m.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            m
        }
    };
    m[0] = end(d[0], d[1]);
    m[n - 1] = end(d[n - 2], d[n - 3]);
    m
}

fn cosine_shape(s: f64) -> f64 {
    0.5 * (1.0 - (TAU * s).cos())
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeKind {
    Square,
    Cosine,
    /// Gaussian centered at mid-pulse with width `sigma_fraction * T`, cut at
    /// `truncation_sigmas` widths and shifted so the cut points are zero.
    Gaussian { sigma_fraction: f64, truncation_sigmas: f64 },
    Parameterized(KnotShape),
}

impl EnvelopeKind {
    pub fn gaussian() -> Self {
        EnvelopeKind::Gaussian { sigma_fraction: 1.0 / 6.0, truncation_sigmas: 3.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvelopeKind::Square => "square",
            EnvelopeKind::Cosine => "cosine",
            EnvelopeKind::Gaussian { .. } => "gaussian",
            EnvelopeKind::Parameterized(_) => "parameterized",
        }
    }

    fn validate(&self) -> Result<()> {
        if let EnvelopeKind::Gaussian { sigma_fraction, truncation_sigmas } = self {
            if !(*sigma_fraction > 0.0) || !(*truncation_sigmas > 0.0) {
                return Err(Error::invalid("gaussian width and truncation must be positive"));
            }
        }
        Ok(())
    }

    /// Unit-peak shape on the normalized time `s in [0, 1]`.
    pub fn shape(&self, s: f64) -> f64 {
        match self {
            EnvelopeKind::Square => 1.0,
            EnvelopeKind::Cosine => cosine_shape(s),
            EnvelopeKind::Gaussian { sigma_fraction, truncation_sigmas } => {
                let x = (s - 0.5) / sigma_fraction;
                if x.abs() >= *truncation_sigmas {
                    return 0.0;
                }
                let edge = (-0.5 * truncation_sigmas * truncation_sigmas).exp();
                ((-0.5 * x * x).exp() - edge) / (1.0 - edge)
            }
            EnvelopeKind::Parameterized(k) => k.eval(s),
        }
    }
}

/// Flux-modulation envelope `A(t) = peak * shape(t / T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub duration_ns: f64,
    pub peak_mhz: f64,
}

impl Envelope {
    pub fn new(kind: EnvelopeKind, duration_ns: f64, peak_mhz: f64) -> Result<Self> {
        kind.validate()?;
        if !(duration_ns > 0.0) || !duration_ns.is_finite() {
            return Err(Error::invalid(format!("envelope duration must be positive, got {duration_ns}")));
        }
        if !(peak_mhz >= 0.0) || !peak_mhz.is_finite() {
            return Err(Error::invalid(format!("envelope peak must be non-negative, got {peak_mhz}")));
        }
        Ok(Self { kind, duration_ns, peak_mhz })
    }

    pub fn with_peak(&self, peak_mhz: f64) -> Self {
        Self { peak_mhz, ..self.clone() }
    }

    /// Amplitude at `t`, zero outside the pulse.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.duration_ns {
            0.0
        } else {
            self.peak_mhz * self.kind.shape(t / self.duration_ns)
        }
    }
}

/// Envelope amplitude (MHz) at `t` ns; `t` must lie in `[0, T]`.
pub fn sample_envelope(env: &Envelope, t: f64) -> Result<f64> {
    let slack = 1e-12 * env.duration_ns;
    if !(t >= -slack && t <= env.duration_ns + slack) {
        return Err(Error::invalid(format!("t = {t} ns lies outside [0, {}] ns", env.duration_ns)));
    }
    Ok(env.peak_mhz * env.kind.shape((t / env.duration_ns).clamp(0.0, 1.0)))
}

fn simpson_unit(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = 1.0 / n as f64;
    let mut sum = f(0.0) + f(1.0);
    for k in 1..n {
        sum += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// Time average of `J1(z * shape(s))` over the pulse.
pub fn average_j1(kind: &EnvelopeKind, z_peak: f64) -> f64 {
    average_j1_with(kind, z_peak, AVERAGE_INTERVALS)
}

fn average_j1_with(kind: &EnvelopeKind, z_peak: f64, intervals: usize) -> f64 {
    match kind {
        EnvelopeKind::Square => bessel_j1(z_peak),
        _ => simpson_unit(intervals, |s| bessel_j1(z_peak * kind.shape(s))),
    }
}

/// First local maximum `(z, value)` of the map `z -> average_j1(kind, z)`.
pub fn average_j1_maximum(kind: &EnvelopeKind) -> (f64, f64) {
    let coarse = |z: f64| average_j1_with(kind, z, 120);
    let step = 0.05;
    let mut k = 1;
    let mut prev = coarse(step);
    loop {
        let next = coarse((k + 1) as f64 * step);
        if next < prev || k > 400 {
            break;
        }
        prev = next;
        k += 1;
    }
    // Golden-section refinement around the coarse peak.
    let (mut a, mut b) = ((k as f64 - 1.0) * step, (k as f64 + 1.0) * step);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let f = |z| average_j1(kind, z);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-10 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let z = 0.5 * (a + b);
    (z, f(z))
}

/// Peak argument `z` on the rising branch with `average_j1(kind, z) = target`.
pub fn peak_argument_for_average(kind: &EnvelopeKind, target: f64) -> Result<f64> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::invalid(format!("target average must be non-negative, got {target}")));
    }
    if target == 0.0 {
        return Ok(0.0);
    }
    if let EnvelopeKind::Square = kind {
        return bessel_j1_inverse(target);
    }
    let (z_max, max) = average_j1_maximum(kind);
    if target > max + 1e-12 {
        return Err(Error::Unreachable(format!(
            "{} envelope reaches an average Bessel factor of at most {max:.6}, {target:.6} requested",
            kind.name()
        )));
    }
    let (mut lo, mut hi) = (0.0, z_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if average_j1(kind, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Average effective coupling (MHz) of `qubit` to the mediating mode when
/// modulated with `env` directly.
pub fn envelope_average(env: &Envelope, device: &DeviceSpec, qubit: usize) -> Result<f64> {
    if qubit > 1 {
        return Err(Error::invalid(format!("no qubit {qubit}")));
    }
    let det = device.qubit_detuning_mhz(qubit);
    if det == 0.0 {
        return Err(Error::invalid("qubit is resonant with the mediating mode"));
    }
    let g = device.coupling_magnitude_mhz(qubit);
    Ok(g * average_j1(&env.kind, env.peak_mhz / det.abs()).abs())
}

/// Duration (ns) of a cyclic transfer with average couplings `ga1`, `ga2` (MHz).
pub fn gate_duration(ga1_mhz: f64, ga2_mhz: f64) -> Result<f64> {
    let g = ga1_mhz.hypot(ga2_mhz);
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::invalid("at least one average coupling must be positive"));
    }
    Ok(1.0 / (2.0 * g * 1e-3))
}

/// How a drive turns its envelope into a flux amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shaping {
    /// The envelope is the flux amplitude.
    Direct,
    /// The envelope drives another qubit (at Bessel detuning
    /// `reference_detuning_mhz`); this drive follows it so that its own
    /// first-order coupling stays `ratio` times the other one at every instant.
    Matched { reference_detuning_mhz: f64, ratio: f64 },
}

/// Parametric flux modulation applied to one qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSignal {
    pub qubit: usize,
    pub envelope: Envelope,
    pub shaping: Shaping,
    /// Offset of the modulation from the qubit-mode difference, MHz.
    pub detuning_mhz: f64,
    pub phase_rad: f64,
    /// Qubit frequency the drive was tuned for, GHz.
    pub qubit_ghz: f64,
    /// Mediating-mode frequency the drive was tuned for, GHz.
    pub reference_ghz: f64,
}

impl DriveSignal {
    pub fn direct(device: &DeviceSpec, qubit: usize, envelope: Envelope, detuning_mhz: f64, phase_rad: f64) -> Self {
        Self {
            qubit,
            envelope,
            shaping: Shaping::Direct,
            detuning_mhz,
            phase_rad,
            qubit_ghz: device.qubit_ghz(qubit),
            reference_ghz: device.center_ghz(),
        }
    }

    /// A drive that does nothing for `duration_ns`.
    pub fn idle(device: &DeviceSpec, qubit: usize, duration_ns: f64) -> Result<Self> {
        Ok(Self::direct(device, qubit, Envelope::new(EnvelopeKind::Square, duration_ns, 0.0)?, 0.0, 0.0))
    }

    pub fn duration_ns(&self) -> f64 {
        self.envelope.duration_ns
    }

    /// `f_M - f_Q` for the tuned frequencies, MHz; the Bessel argument is
    /// `A / this`.
    pub fn bessel_detuning_mhz(&self) -> f64 {
        (self.reference_ghz - self.qubit_ghz) * 1e3
    }

    /// Lab-frame modulation frequency `f_Q - f_M - detuning`, MHz. The flux
    /// drive is `A(t) cos(2 pi f t - phase)`.
    pub fn modulation_mhz(&self) -> f64 {
        -self.bessel_detuning_mhz() - self.detuning_mhz
    }

    /// Angular carrier `W` (rad/ns) in the drive term `A(t) cos(W t + phase)`.
    pub fn carrier_angular(&self) -> f64 {
        -mhz_to_angular(self.modulation_mhz())
    }

    /// Flux amplitude (MHz) at `t`; zero outside the pulse.
    pub fn amplitude_mhz(&self, t: f64) -> f64 {
        match self.shaping {
            Shaping::Direct => self.envelope.value(t),
            Shaping::Matched { reference_detuning_mhz, ratio } => {
                let z_ref = self.envelope.value(t) / reference_detuning_mhz;
                let y = (ratio * bessel_j1(z_ref)).clamp(0.0, crate::special::J1_FIRST_MAX);
                // In range by construction.
                let z = bessel_j1_inverse(y).unwrap_or(crate::special::J1_FIRST_MAX_ARG);
                self.bessel_detuning_mhz().abs() * z
            }
        }
    }

    /// Time-averaged first-order coupling magnitude to the mediating mode, MHz.
    pub fn average_coupling_mhz(&self, device: &DeviceSpec) -> f64 {
        let g = device.coupling_magnitude_mhz(self.qubit);
        let det = self.bessel_detuning_mhz();
        let t = self.duration_ns();
        g * simpson_unit(AVERAGE_INTERVALS, |s| bessel_j1(self.amplitude_mhz(s * t) / det).abs())
    }
}
