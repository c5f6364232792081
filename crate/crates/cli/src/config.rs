//! Experiment configuration: a sectioned TOML file with unit-suffixed keys.
//!
//! Every key is optional except the `[gate]` section itself. Missing values
//! fall back to the reference device and the library defaults when the
//! config is resolved into simulation inputs.

use crate::error::CliError;
use qlink::device::{
    build_device, Cable, DeviceParams, DeviceSpec, Expansion, ModeLadder, NoiseSpec, DEFAULT_VELOCITY_M_PER_S,
};
use qlink::dynamics::{LabBasis, ModelOptions};
use qlink::holonomic::{coupling_ratio, Frame, GateLabel, GateTarget, SynthesisOptions};
use qlink::optimize::{AdamConfig, FrequencyObjective, GridConfig};
use qlink::pulse::{EnvelopeKind, KnotShape, DEFAULT_KNOTS};
use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub device: DeviceSection,
    #[serde(default)]
    pub pulse: PulseSection,
    pub gate: GateSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_ghz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anharmonicity_mhz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_mhz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_levels: Option<usize>,
    /// Explicit mode frequencies, highest first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_ghz: Option<Vec<f64>>,
    /// Position of the mediating mode in `mode_ghz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_mode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_mode_ghz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fsr_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_m_per_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeName {
    Square,
    Gaussian,
    Cosine,
    Knots,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<EnvelopeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian_sigma_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian_truncation_sigmas: Option<f64>,
    /// Knot amplitudes for `envelope = "knots"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pin_edges: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetName {
    Swap,
    SqrtSwap,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameName {
    Rotating,
    Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionName {
    FirstOrder,
    SecondOrder,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisName {
    Bare,
    Dressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSection {
    pub target: TargetName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_rad: Option<f64>,
    /// Envelope-averaged first-sideband couplings of the two qubits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_coupling_mhz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_offset_rad: Option<f64>,
    /// Search the drive detunings within `calibration_window_mhz` before running.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate_detuning: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_window_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<ExpansionName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lab_basis: Option<BasisName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// Start from a lossless model instead of the shipped defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lossless: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_t1_us: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit_tphi_us: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode_t1_us: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fsr_mhz: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelopes: Option<Vec<EnvelopeName>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness_max_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness_points_per_side: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_points: Option<usize>,
    /// Run the frequency search before the leakage distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_frequencies: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveName {
    Leakage,
    Transition,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knot_count: Option<usize>,
    /// Uniform jitter added to the initial knots, drawn from the run seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_jitter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize_phase: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize_detuning: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize_duration: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<ObjectiveName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_step_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse_divisions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_step_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_radius: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_margin_mhz: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatName {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<FormatName>>,
}

/// Keys each section accepts, used to spot unit mix-ups before deserializing.
const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("", &["seed", "device", "pulse", "gate", "noise", "sweep", "optimizer", "output"]),
    (
        "device",
        &[
            "qubit_ghz",
            "anharmonicity_mhz",
            "coupling_mhz",
            "qubit_levels",
            "mode_ghz",
            "center_mode",
            "center_mode_ghz",
            "fsr_mhz",
            "mode_count",
            "length_cm",
            "velocity_m_per_s",
        ],
    ),
    ("pulse", &["envelope", "gaussian_sigma_fraction", "gaussian_truncation_sigmas", "knots", "pin_edges"]),
    (
        "gate",
        &[
            "target",
            "theta_rad",
            "phi_rad",
            "average_coupling_mhz",
            "detuning_mhz",
            "phase_offset_rad",
            "calibrate_detuning",
            "calibration_window_mhz",
            "frame",
            "expansion",
            "lab_basis",
            "dt_ns",
        ],
    ),
    ("noise", &["lossless", "qubit_t1_us", "qubit_tphi_us", "mode_t1_us"]),
    (
        "sweep",
        &[
            "fsr_mhz",
            "envelopes",
            "robustness_max_mhz",
            "robustness_points_per_side",
            "repetitions",
            "trajectory_points",
            "search_frequencies",
        ],
    ),
    (
        "optimizer",
        &[
            "learning_rate",
            "beta1",
            "beta2",
            "epsilon",
            "max_iterations",
            "tolerance",
            "fd_step",
            "knot_count",
            "initial_jitter",
            "optimize_phase",
            "optimize_detuning",
            "optimize_duration",
            "objective",
            "coarse_step_mhz",
            "coarse_divisions",
            "fine_step_mhz",
            "refine_factor",
            "refine_radius",
            "edge_margin_mhz",
        ],
    ),
    ("output", &["directory", "formats"]),
];

const UNIT_SUFFIXES: &[&str] = &["ghz", "mhz", "khz", "hz", "ns", "us", "ms", "s", "cm", "mm", "m", "m_per_s", "rad", "deg"];

fn split_unit(key: &str) -> (&str, Option<&str>) {
    for suffix in UNIT_SUFFIXES.iter().copied().filter(|s| s.len() < key.len()) {
        if let Some(stem) = key.strip_suffix(suffix).and_then(|k| k.strip_suffix('_')) {
            return (stem, Some(suffix));
        }
    }
    (key, None)
}

/// 1-based line of `key` inside `[section]` (or the top level for `""`).
pub fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn check_units(text: &str, table: &toml::Table) -> Result<(), CliError> {
    for (section, known) in KNOWN_KEYS {
        let entries: Vec<&String> = if section.is_empty() {
            table.keys().collect()
        } else {
            match table.get(*section) {
                Some(toml::Value::Table(t)) => t.keys().collect(),
                _ => continue,
            }
        };
        for key in entries {
            if known.contains(&key.as_str()) {
                continue;
            }
            let (stem, unit) = split_unit(key);
            let expected = known.iter().find(|k| {
                let (s, u) = split_unit(k);
                s == stem && u.is_some() && unit.is_some() && u != unit
            });
            let full = if section.is_empty() { key.clone() } else { format!("{section}.{key}") };
            let message = match expected {
                Some(e) => format!("unit mismatch: expected `{e}`"),
                None => "unknown key".to_string(),
            };
            return Err(CliError::config(full, key_line(text, section, key), message));
        }
    }
    Ok(())
}

/// Parses and validates a config. Errors name the offending key and line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        CliError::config("", line, e.message().to_string())
    })?;
    check_units(text, &table)?;
    let config: ExperimentConfig = toml::from_str(text).map_err(|e: toml::de::Error| {
        let line = e.span().map(|s| line_of_offset(text, s.start));
        CliError::config("", line, e.message().to_string())
    })?;
    config.validate(text)?;
    Ok(config)
}

/// Serializes a config back to the same TOML layout.
pub fn serialize_config(config: &ExperimentConfig) -> Result<String, CliError> {
    toml::to_string(config).map_err(|e| CliError::config("", None, e.to_string()))
}

fn positive(text: &str, section: &str, key: &str, value: Option<f64>) -> Result<(), CliError> {
    match value {
        Some(v) if !(v > 0.0) || !v.is_finite() => {
            Err(CliError::config(format!("{section}.{key}"), key_line(text, section, key), format!("must be positive, got {v}")))
        }
        _ => Ok(()),
    }
}

fn positive_pair(text: &str, section: &str, key: &str, value: Option<[f64; 2]>) -> Result<(), CliError> {
    for v in value.into_iter().flatten() {
        positive(text, section, key, Some(v))?;
    }
    Ok(())
}

impl ExperimentConfig {
    fn validate(&self, text: &str) -> Result<(), CliError> {
        let d = &self.device;
        positive_pair(text, "device", "qubit_ghz", d.qubit_ghz)?;
        positive_pair(text, "device", "coupling_mhz", d.coupling_mhz)?;
        positive(text, "device", "fsr_mhz", d.fsr_mhz)?;
        positive(text, "device", "length_cm", d.length_cm)?;
        positive(text, "device", "velocity_m_per_s", d.velocity_m_per_s)?;
        positive(text, "device", "center_mode_ghz", d.center_mode_ghz)?;
        if d.mode_ghz.is_some() && (d.fsr_mhz.is_some() || d.center_mode_ghz.is_some() || d.mode_count.is_some()) {
            return Err(CliError::config(
                "device.mode_ghz",
                key_line(text, "device", "mode_ghz"),
                "explicit modes exclude fsr_mhz, center_mode_ghz and mode_count",
            ));
        }
        if let Some(n) = &self.noise {
            positive_pair(text, "noise", "qubit_t1_us", n.qubit_t1_us)?;
            positive_pair(text, "noise", "qubit_tphi_us", n.qubit_tphi_us)?;
            positive(text, "noise", "mode_t1_us", n.mode_t1_us)?;
        }
        let g = &self.gate;
        positive_pair(text, "gate", "average_coupling_mhz", g.average_coupling_mhz)?;
        positive(text, "gate", "dt_ns", g.dt_ns)?;
        positive(text, "gate", "calibration_window_mhz", g.calibration_window_mhz)?;
        if let Some(s) = &self.sweep {
            for f in s.fsr_mhz.iter().flatten() {
                positive(text, "sweep", "fsr_mhz", Some(*f))?;
            }
            positive(text, "sweep", "robustness_max_mhz", s.robustness_max_mhz)?;
        }
        let o = &self.optimizer;
        positive(text, "optimizer", "learning_rate", o.learning_rate)?;
        positive(text, "optimizer", "fd_step", o.fd_step)?;
        positive(text, "optimizer", "coarse_step_mhz", o.coarse_step_mhz)?;
        positive(text, "optimizer", "fine_step_mhz", o.fine_step_mhz)?;
        // Resolving once surfaces every cross-field inconsistency at parse time.
        self.device().map_err(|e| CliError::config("device", None, e.to_string()))?;
        self.target()?;
        self.average_couplings()?;
        self.envelope()?;
        self.adam().validate().map_err(|e| CliError::config("optimizer", None, e.to_string()))?;
        self.grid().validate().map_err(|e| CliError::config("optimizer", None, e.to_string()))?;
        if let Some(n) = self.noise_spec() {
            n.validate().map_err(|e| CliError::config("noise", None, e.to_string()))?;
        }
        Ok(())
    }

    pub fn device_params(&self) -> qlink::Result<DeviceParams> {
        let d = &self.device;
        let reference = DeviceParams::reference();
        let velocity = d.velocity_m_per_s.unwrap_or(DEFAULT_VELOCITY_M_PER_S);
        let cable = d.length_cm.map(|l| Cable { length_m: l * 1e-2, velocity_m_per_s: velocity });
        let fsr = match (d.fsr_mhz, cable) {
            (Some(f), _) => Some(f),
            (None, Some(c)) if d.mode_ghz.is_none() => Some(qlink::device::fsr_from_length(c.length_m, c.velocity_m_per_s)?),
            _ => None,
        };
        let ladder = match (&d.mode_ghz, fsr) {
            (Some(freqs), _) => {
                ModeLadder::Explicit { freqs_ghz: freqs.clone(), center: d.center_mode.unwrap_or(freqs.len() / 2) }
            }
            (None, Some(fsr_mhz)) => ModeLadder::Fsr {
                center_ghz: d.center_mode_ghz.unwrap_or(5.83),
                fsr_mhz,
                count: d.mode_count.unwrap_or(5),
            },
            (None, None) => reference.ladder.clone(),
        };
        Ok(DeviceParams {
            qubit_ghz: d.qubit_ghz.unwrap_or(reference.qubit_ghz),
            anharmonicity_mhz: d.anharmonicity_mhz.unwrap_or(reference.anharmonicity_mhz),
            ladder,
            coupling_mhz: d.coupling_mhz.unwrap_or(reference.coupling_mhz),
            qubit_levels: d.qubit_levels.unwrap_or(reference.qubit_levels),
            cable,
        })
    }

    pub fn device(&self) -> qlink::Result<DeviceSpec> {
        build_device(&self.device_params()?)
    }

    pub fn target(&self) -> Result<GateTarget, CliError> {
        let g = &self.gate;
        let fail = |e: qlink::Error| CliError::config("gate.target", None, e.to_string());
        match g.target {
            TargetName::Swap => Ok(GateTarget::swap()),
            TargetName::SqrtSwap => Ok(GateTarget::sqrt_swap()),
            TargetName::Custom => {
                let (Some(theta), Some(phi)) = (g.theta_rad, g.phi_rad) else {
                    return Err(CliError::config("gate.theta_rad", None, "a custom target needs theta_rad and phi_rad"));
                };
                GateTarget::new(theta, phi, GateLabel::Custom).map_err(fail)
            }
        }
    }

    /// Per-qubit averaged couplings; defaults split 10.10 MHz of SWAP coupling
    /// per qubit according to the target ratio.
    pub fn average_couplings(&self) -> Result<[f64; 2], CliError> {
        let target = self.target()?;
        let ratio = if (target.theta - std::f64::consts::PI).abs() < 1e-12 {
            None
        } else {
            Some(coupling_ratio(&target).map_err(|e| CliError::config("gate.target", None, e.to_string()))?.norm())
        };
        match (self.gate.average_coupling_mhz, ratio) {
            (Some(g), Some(r)) => {
                if (g[0] / g[1] - r).abs() > 0.01 * r.max(1e-3) {
                    return Err(CliError::config(
                        "gate.average_coupling_mhz",
                        None,
                        format!("ratio {:.5} does not match the target's required {r:.5}", g[0] / g[1]),
                    ));
                }
                Ok(g)
            }
            (Some(g), None) => Ok(g),
            (None, r) => {
                let total = 10.10 * SQRT_2;
                let r = r.unwrap_or(f64::INFINITY);
                let g2 = total / (1.0 + r * r).sqrt();
                Ok(if r.is_finite() { [r * g2, g2] } else { [total, 0.0] })
            }
        }
    }

    pub fn effective_coupling_mhz(&self) -> Result<f64, CliError> {
        let [a, b] = self.average_couplings()?;
        Ok(a.hypot(b))
    }

    fn envelope_of(&self, name: EnvelopeName) -> Result<EnvelopeKind, CliError> {
        let p = &self.pulse;
        Ok(match name {
            EnvelopeName::Square => EnvelopeKind::Square,
            EnvelopeName::Cosine => EnvelopeKind::Cosine,
            EnvelopeName::Gaussian => {
                let default = EnvelopeKind::gaussian();
                let EnvelopeKind::Gaussian { sigma_fraction, truncation_sigmas } = default else { unreachable!() };
                EnvelopeKind::Gaussian {
                    sigma_fraction: p.gaussian_sigma_fraction.unwrap_or(sigma_fraction),
                    truncation_sigmas: p.gaussian_truncation_sigmas.unwrap_or(truncation_sigmas),
                }
            }
            EnvelopeName::Knots => {
                let values = p.knots.clone().ok_or_else(|| {
                    CliError::config("pulse.knots", None, "envelope = \"knots\" needs a knots list")
                })?;
                let shape = KnotShape::new(values, p.pin_edges.unwrap_or(true))
                    .map_err(|e| CliError::config("pulse.knots", None, e.to_string()))?;
                EnvelopeKind::Parameterized(shape)
            }
        })
    }

    pub fn envelope_name(&self) -> EnvelopeName {
        self.pulse.envelope.unwrap_or(EnvelopeName::Cosine)
    }

    pub fn envelope(&self) -> Result<EnvelopeKind, CliError> {
        self.envelope_of(self.envelope_name())
    }

    pub fn envelopes(&self) -> Result<Vec<(EnvelopeName, EnvelopeKind)>, CliError> {
        let names = self.sweep.as_ref().and_then(|s| s.envelopes.clone()).unwrap_or_else(|| vec![self.envelope_name()]);
        names.into_iter().map(|n| Ok((n, self.envelope_of(n)?))).collect()
    }

    pub fn frame(&self) -> Frame {
        match self.gate.frame {
            Some(FrameName::Lab) => Frame::Lab,
            _ => Frame::Rotating,
        }
    }

    pub fn synthesis(&self, envelope: EnvelopeKind) -> Result<SynthesisOptions, CliError> {
        Ok(SynthesisOptions {
            detuning_mhz: self.gate.detuning_mhz.unwrap_or([0.0; 2]),
            phase_offset_rad: self.gate.phase_offset_rad.unwrap_or(0.0),
            frame: self.frame(),
            ..SynthesisOptions::new(envelope, self.effective_coupling_mhz()?)
        })
    }

    pub fn model(&self) -> ModelOptions {
        let defaults = ModelOptions::default();
        ModelOptions {
            expansion: match self.gate.expansion {
                Some(ExpansionName::FirstOrder) => Expansion::FirstOrder,
                Some(ExpansionName::SecondOrder) => Expansion::SecondOrder,
                Some(ExpansionName::Exact) => Expansion::Exact,
                None => defaults.expansion,
            },
            dt_ns: self.gate.dt_ns.unwrap_or(defaults.dt_ns),
            lab_basis: match self.gate.lab_basis {
                Some(BasisName::Bare) => LabBasis::Bare,
                Some(BasisName::Dressed) => LabBasis::Dressed,
                None => defaults.lab_basis,
            },
            ..defaults
        }
    }

    /// `None` without a `[noise]` section.
    pub fn noise_spec(&self) -> Option<NoiseSpec> {
        let n = self.noise.as_ref()?;
        let base = if n.lossless.unwrap_or(false) { NoiseSpec::lossless() } else { NoiseSpec::default() };
        Some(NoiseSpec {
            qubit_t1_us: n.qubit_t1_us.map(|v| v.map(Some)).unwrap_or(base.qubit_t1_us),
            qubit_tphi_us: n.qubit_tphi_us.map(|v| v.map(Some)).unwrap_or(base.qubit_tphi_us),
            mode_t1_us: n.mode_t1_us.or(base.mode_t1_us),
        })
    }

    pub fn adam(&self) -> AdamConfig {
        let o = &self.optimizer;
        let d = AdamConfig::default();
        AdamConfig {
            learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
            beta1: o.beta1.unwrap_or(d.beta1),
            beta2: o.beta2.unwrap_or(d.beta2),
            epsilon: o.epsilon.unwrap_or(d.epsilon),
            max_iterations: o.max_iterations.unwrap_or(d.max_iterations),
            tolerance: o.tolerance.unwrap_or(d.tolerance),
            fd_step: o.fd_step.unwrap_or(d.fd_step),
        }
    }

    pub fn grid(&self) -> GridConfig {
        let o = &self.optimizer;
        let d = GridConfig::default();
        GridConfig {
            coarse_step_mhz: o.coarse_step_mhz.unwrap_or(d.coarse_step_mhz),
            coarse_divisions: o.coarse_divisions.or(d.coarse_divisions),
            fine_step_mhz: o.fine_step_mhz.unwrap_or(d.fine_step_mhz),
            refine_factor: o.refine_factor.unwrap_or(d.refine_factor),
            refine_radius: o.refine_radius.unwrap_or(d.refine_radius),
            edge_margin_mhz: o.edge_margin_mhz.unwrap_or(d.edge_margin_mhz),
        }
    }

    pub fn objective(&self) -> FrequencyObjective {
        match self.optimizer.objective {
            Some(ObjectiveName::Transition) => FrequencyObjective::Transition,
            _ => FrequencyObjective::Leakage,
        }
    }

    pub fn knot_count(&self) -> usize {
        self.optimizer.knot_count.unwrap_or(DEFAULT_KNOTS)
    }

    pub fn sweep(&self) -> SweepSection {
        self.sweep.clone().unwrap_or_default()
    }

    pub fn formats(&self) -> Vec<FormatName> {
        self.output.formats.clone().unwrap_or_else(|| vec![FormatName::Csv, FormatName::Json])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[gate]\ntarget = \"swap\"\n";

    #[test]
    fn minimal_config_uses_reference_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.device().unwrap(), DeviceSpec::reference());
        let g = c.average_couplings().unwrap();
        assert!((g[0] - 10.10).abs() < 1e-9 && (g[1] - 10.10).abs() < 1e-9);
        assert!(c.noise_spec().is_none());
        assert_eq!(c.adam(), AdamConfig::default());
    }

    #[test]
    fn sqrt_swap_default_split_matches_ratio() {
        let c = parse_config("[gate]\ntarget = \"sqrt_swap\"\n").unwrap();
        let [a, b] = c.average_couplings().unwrap();
        assert!((a / b - (std::f64::consts::PI / 8.0).tan()).abs() < 1e-12);
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let e = parse_config("[gate]\ntarget = \"swap\"\nspeed = 3\n").unwrap_err();
        let s = e.to_string();
        assert!(s.contains("gate.speed") && s.contains("line 3"), "{s}");
    }

    #[test]
    fn wrong_unit_is_reported() {
        let e = parse_config("[device]\nfsr_ghz = 0.4\n[gate]\ntarget = \"swap\"\n").unwrap_err();
        let s = e.to_string();
        assert!(s.contains("fsr_mhz") && s.contains("line 2"), "{s}");
    }

    #[test]
    fn negative_time_is_named() {
        let text = "[gate]\ntarget = \"swap\"\n[noise]\nqubit_t1_us = [-1.0, 2.0]\n";
        let s = parse_config(text).unwrap_err().to_string();
        assert!(s.contains("noise.qubit_t1_us") && s.contains("line 4"), "{s}");
    }

    #[test]
    fn missing_gate_section() {
        let s = parse_config("[device]\nfsr_mhz = 100.0\n").unwrap_err().to_string();
        assert!(s.contains("gate"), "{s}");
    }

    #[test]
    fn cable_length_consistency() {
        let ok = "[device]\nfsr_mhz = 403.0\nlength_cm = 15.0\n[gate]\ntarget = \"swap\"\n";
        assert!(parse_config(ok).is_ok());
        let bad = "[device]\nfsr_mhz = 403.0\nlength_cm = 16.0\n[gate]\ntarget = \"swap\"\n";
        assert!(parse_config(bad).is_err());
        let derived = parse_config("[device]\nlength_cm = 150.0\n[gate]\ntarget = \"swap\"\n").unwrap();
        assert!((derived.device().unwrap().fsr_mhz().unwrap() - 40.3).abs() < 1e-9);
    }

    #[test]
    fn mismatched_couplings_rejected() {
        let text = "[gate]\ntarget = \"swap\"\naverage_coupling_mhz = [4.0, 10.0]\n";
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn round_trip() {
        let text = r#"
seed = 7

[device]
fsr_mhz = 60.0
mode_count = 5

[pulse]
envelope = "gaussian"
gaussian_sigma_fraction = 0.2

[gate]
target = "sqrt_swap"
average_coupling_mhz = [4.16, 10.04]
frame = "lab"
dt_ns = 0.01

[noise]
qubit_t1_us = [20.0, 25.0]

[sweep]
fsr_mhz = [50.0, 100.0]
envelopes = ["cosine", "square"]

[optimizer]
max_iterations = 10
objective = "transition"

[output]
formats = ["csv"]
"#;
        let c = parse_config(text).unwrap();
        let again = parse_config(&serialize_config(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }
}
