//! The seven runnable scenarios. Each returns its tables and a summary; the
//! caller decides which formats to write.

use crate::config::{EnvelopeName, ExperimentConfig};
use crate::error::CliError;
use crate::output::{Cell, Summary, Table};
use qlink::analysis::{
    decoherence_compensated_error, gate_loss, leakage, robustness_sweep, subspace_leakage, symmetric_grid,
};
use qlink::device::DeviceSpec;
use qlink::dynamics::GateModel;
use qlink::hilbert::{CMatrix, FinalState};
use qlink::holonomic::{dynamic_baseline_schedule, synthesize_drives, target_unitary, GateSchedule, GateTarget};
use qlink::optimize::{
    optimize_detunings, optimize_device_frequencies, optimize_frequencies, optimize_waveform,
    FrequencyResult, FrequencySearch, WaveformSearch, WaveformSettings,
};
use qlink::pulse::{gate_duration, EnvelopeKind, KnotShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Dynamics,
    ErrorRate,
    Robustness,
    FsrSweep,
    LeakageDistribution,
    OptimizeFrequencies,
    OptimizeWaveform,
}

impl Scenario {
    pub const ALL: [Scenario; 7] = [
        Scenario::Dynamics,
        Scenario::ErrorRate,
        Scenario::Robustness,
        Scenario::FsrSweep,
        Scenario::LeakageDistribution,
        Scenario::OptimizeFrequencies,
        Scenario::OptimizeWaveform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Dynamics => "dynamics",
            Scenario::ErrorRate => "error-rate",
            Scenario::Robustness => "robustness",
            Scenario::FsrSweep => "fsr-sweep",
            Scenario::LeakageDistribution => "leakage-distribution",
            Scenario::OptimizeFrequencies => "optimize-frequencies",
            Scenario::OptimizeWaveform => "optimize-waveform",
        }
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown scenario `{s}`")))
    }
}

/// Tables and summary of one run. `runtime_s` is filled in by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Summary,
}

struct GateMetrics {
    loss: f64,
    leakage: f64,
}

fn report(scenario: Scenario, gate: &GateTarget, tables: Vec<Table>) -> Report {
    Report {
        tables,
        summary: Summary {
            scenario: scenario.name().into(),
            gate: gate.name().into(),
            duration_ns: None,
            loss: None,
            leakage: None,
            fidelity: None,
            params: Map::new(),
            runtime_s: 0.0,
        },
    }
}

pub fn run(scenario: Scenario, config: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    match scenario {
        Scenario::Dynamics => dynamics(config),
        Scenario::ErrorRate => error_rate(config),
        Scenario::Robustness => robustness(config),
        Scenario::FsrSweep => fsr_sweep(config),
        Scenario::LeakageDistribution => leakage_distribution(config),
        Scenario::OptimizeFrequencies => frequencies(config),
        Scenario::OptimizeWaveform => waveform(config, seed),
    }
}

fn frequency_search(config: &ExperimentConfig, envelope: EnvelopeKind) -> Result<FrequencySearch, CliError> {
    let mode_count = config.device.mode_count.unwrap_or(5);
    Ok(FrequencySearch {
        target: config.target()?,
        synthesis: config.synthesis(envelope)?,
        model: config.model(),
        grid: config.grid(),
        objective: config.objective(),
        mode_count,
    })
}

/// Synthesizes the configured gate, calibrating the detunings first when asked.
fn gate_schedule(config: &ExperimentConfig, device: &DeviceSpec) -> Result<(GateSchedule, Map<String, Value>), CliError> {
    let mut search = frequency_search(config, config.envelope()?)?;
    let mut params = Map::new();
    if config.gate.calibrate_detuning.unwrap_or(false) {
        let window = config.gate.calibration_window_mhz.unwrap_or(3.0);
        let r = optimize_detunings(device, &search, window)?;
        params.insert("calibrated_detuning_mhz".into(), json!(r.detuning_mhz));
        params.insert("calibration_transition_error".into(), json!(r.value));
        search.synthesis.detuning_mhz = r.detuning_mhz;
    }
    let schedule = synthesize_drives(device, &search.target, &search.synthesis)?;
    params.insert("detuning_mhz".into(), json!(search.synthesis.detuning_mhz));
    params.insert("effective_coupling_mhz".into(), json!(search.synthesis.effective_coupling_mhz));
    params.insert("envelope".into(), json!(search.synthesis.envelope.name()));
    Ok((schedule, params))
}

fn closed_metrics(device: &DeviceSpec, schedule: &GateSchedule, config: &ExperimentConfig) -> Result<GateMetrics, CliError> {
    let model = GateModel::new(device, schedule, &config.model(), None)?;
    let block = model.subspace_propagator()?;
    let ideal = target_unitary(schedule.target.theta, schedule.target.phi)?;
    Ok(GateMetrics { loss: gate_loss(ideal.matrix(), &block)?, leakage: subspace_leakage(&block) })
}

fn column_name(label: &str) -> String {
    format!("pop_{}", label.to_lowercase().replace(':', "_"))
}

/// Population trajectory from `|10>`, open when a `[noise]` section is present.
fn dynamics(config: &ExperimentConfig) -> Result<Report, CliError> {
    let device = config.device()?;
    let (schedule, params) = gate_schedule(config, &device)?;
    let noise = config.noise_spec();
    let model = GateModel::new(&device, &schedule, &config.model(), noise.as_ref())?;
    let intervals = config.sweep().trajectory_points.unwrap_or(200).max(1);
    let psi0 = model.qubit_state(0)?;
    let traj = if model.is_open() {
        model.evolve_density(&psi0.to_density(), intervals)?
    } else {
        model.trajectory(&psi0, intervals)?
    };

    let labels = model.labels();
    let [a, b] = model.computational();
    let others: Vec<usize> = (0..labels.len()).filter(|k| *k != a && *k != b).collect();
    let mut header = vec!["time_ns".to_string(), "pop_q1".into(), "pop_q2".into()];
    header.extend(others.iter().map(|&k| column_name(&labels[k])));
    header.push("leak_total".into());
    let mut table = Table { name: "dynamics".into(), header, rows: Vec::new() };
    for (t, pops) in traj.times.iter().zip(&traj.populations) {
        let mut row: Vec<Cell> = vec![(*t).into(), pops[a].into(), pops[b].into()];
        row.extend(others.iter().map(|&k| Cell::from(pops[k])));
        row.push(leakage(&model, pops).into());
        table.push(row);
    }

    // Overlap of the final state with the ideal output of |10>.
    let ideal = target_unitary(schedule.target.theta, schedule.target.phi)?;
    let out = [ideal.matrix()[(0, 0)], ideal.matrix()[(1, 0)]];
    let rho: CMatrix = match &traj.final_state {
        FinalState::Pure(s) => s.to_density().matrix().clone(),
        FinalState::Mixed(r) => r.matrix().clone(),
    };
    let idx = [a, b];
    let mut fidelity = num_complex::Complex64::new(0.0, 0.0);
    for r in 0..2 {
        for c in 0..2 {
            fidelity += out[r].conj() * rho[(idx[r], idx[c])] * out[c];
        }
    }

    let metrics = closed_metrics(&device, &schedule, config)?;
    let final_pops = traj.final_populations();
    let mut rep = report(Scenario::Dynamics, &schedule.target, vec![table]);
    rep.summary.duration_ns = Some(schedule.duration_ns);
    rep.summary.loss = Some(metrics.loss);
    rep.summary.leakage = Some(metrics.leakage);
    rep.summary.fidelity = Some(fidelity.re.clamp(0.0, 1.0));
    rep.summary.params = params;
    rep.summary.params.insert("final_pop_q1".into(), json!(final_pops[a]));
    rep.summary.params.insert("final_pop_q2".into(), json!(final_pops[b]));
    rep.summary.params.insert("final_leak_total".into(), json!(leakage(&model, final_pops)));
    rep.summary.params.insert("open_system".into(), json!(model.is_open()));
    Ok(rep)
}

fn error_rate(config: &ExperimentConfig) -> Result<Report, CliError> {
    let device = config.device()?;
    let (schedule, params) = gate_schedule(config, &device)?;
    let n_max = config.sweep().repetitions.unwrap_or(20);
    let noise = config.noise_spec();
    let split = decoherence_compensated_error(&device, &schedule, n_max, noise.as_ref(), &config.model())?;
    let mut table = Table::new("error_rate", &["n", "population", "idle_population"]);
    for (k, &n) in split.total.counts.iter().enumerate() {
        table.push(vec![n.into(), split.total.populations[k].into(), split.dissipation.populations[k].into()]);
    }
    let metrics = closed_metrics(&device, &schedule, config)?;
    let mut rep = report(Scenario::ErrorRate, &schedule.target, vec![table]);
    rep.summary.duration_ns = Some(schedule.duration_ns);
    rep.summary.loss = Some(metrics.loss);
    rep.summary.leakage = Some(metrics.leakage);
    rep.summary.fidelity = Some(1.0 - split.total.epsilon);
    rep.summary.params = params;
    let p = &mut rep.summary.params;
    p.insert(
        "epsilon".into(),
        json!({
            "total": split.total.epsilon,
            "dissipation": split.dissipation.epsilon + 0.0,
            "coherent": split.coherent,
        }),
    );
    p.insert("fit_intercept".into(), json!(split.total.intercept));
    p.insert("fit_residual".into(), json!(split.total.residual));
    p.insert("fitted_points".into(), json!(split.total.counts.len()));
    Ok(rep)
}

fn robustness(config: &ExperimentConfig) -> Result<Report, CliError> {
    let device = config.device()?;
    let (schedule, params) = gate_schedule(config, &device)?;
    let dynamic = dynamic_baseline_schedule(&device, &schedule)?;
    let sweep = config.sweep();
    let grid = symmetric_grid(sweep.robustness_max_mhz.unwrap_or(5.0), sweep.robustness_points_per_side.unwrap_or(10));
    let noise = config.noise_spec();
    let curve = robustness_sweep(&device, &schedule, &dynamic, &grid, noise.as_ref(), &config.model())?;
    let mut table = Table::new("robustness", &["delta_mhz", "loss_holonomic", "loss_dynamic"]);
    for k in 0..grid.len() {
        table.push(vec![grid[k].into(), curve.holonomic_loss[k].into(), curve.dynamic_loss[k].into()]);
    }
    let metrics = closed_metrics(&device, &schedule, config)?;
    let mut rep = report(Scenario::Robustness, &schedule.target, vec![table]);
    rep.summary.duration_ns = Some(schedule.duration_ns);
    rep.summary.loss = Some(metrics.loss);
    rep.summary.leakage = Some(metrics.leakage);
    rep.summary.params = params;
    let p = &mut rep.summary.params;
    p.insert("reference_detuning_mhz".into(), json!(curve.reference_detuning_mhz));
    p.insert("r_h".into(), json!(curve.reference_holonomic_loss));
    p.insert("r_d".into(), json!(curve.reference_dynamic_loss));
    p.insert("r_r".into(), json!(curve.relative_improvement));
    p.insert("open_system".into(), json!(noise.is_some()));
    Ok(rep)
}

fn frequency_row(fsr: f64, r: &FrequencyResult) -> Vec<Cell> {
    vec![
        fsr.into(),
        r.qubit_ghz[0].into(),
        r.qubit_ghz[1].into(),
        r.leakage.into(),
        r.value.into(),
        r.coarse_qubit_ghz[0].into(),
        r.coarse_qubit_ghz[1].into(),
        r.coarse_value.into(),
        r.evaluations.into(),
    ]
}

const FREQUENCY_HEADER: [&str; 9] = [
    "fsr_mhz",
    "qubit1_ghz",
    "qubit2_ghz",
    "leakage",
    "objective",
    "coarse_qubit1_ghz",
    "coarse_qubit2_ghz",
    "coarse_objective",
    "evaluations",
];

fn envelope_file_name(name: EnvelopeName) -> &'static str {
    match name {
        EnvelopeName::Square => "square",
        EnvelopeName::Gaussian => "gaussian",
        EnvelopeName::Cosine => "cosine",
        EnvelopeName::Knots => "knots",
    }
}

/// Leakage-optimal qubit placement for every listed spacing and envelope.
fn fsr_sweep(config: &ExperimentConfig) -> Result<Report, CliError> {
    let sweep = config
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("sweep", None, "fsr-sweep needs a [sweep] section"))?;
    let fsrs = sweep
        .fsr_mhz
        .clone()
        .filter(|f| !f.is_empty())
        .ok_or_else(|| CliError::config("sweep.fsr_mhz", None, "fsr-sweep needs a non-empty list of spacings"))?;
    let template = config.device_params()?;
    let mut tables = Vec::new();
    let mut params = Map::new();
    let mut duration = None;
    for (name, kind) in config.envelopes()? {
        let search = frequency_search(config, kind)?;
        duration.get_or_insert(gate_duration(
            search.synthesis.effective_coupling_mhz * (search.target.theta / 2.0).sin(),
            search.synthesis.effective_coupling_mhz * (search.target.theta / 2.0).cos(),
        )?);
        let mut table = Table::new(&format!("fsr_sweep_{}", envelope_file_name(name)), &FREQUENCY_HEADER);
        let mut best = Vec::new();
        for &fsr in &fsrs {
            let r = optimize_frequencies(&template, fsr, &search)?;
            best.push(json!({ "fsr_mhz": fsr, "leakage": r.leakage, "qubit_ghz": r.qubit_ghz }));
            table.push(frequency_row(fsr, &r));
        }
        params.insert(envelope_file_name(name).into(), Value::Array(best));
        tables.push(table);
    }
    let mut rep = report(Scenario::FsrSweep, &config.target()?, tables);
    rep.summary.duration_ns = duration;
    rep.summary.params = params;
    Ok(rep)
}

/// The configured device, moved to its best qubit frequencies first when the
/// sweep section asks for it.
fn searched_device(config: &ExperimentConfig, params: &mut Map<String, Value>) -> Result<DeviceSpec, CliError> {
    let device = config.device()?;
    if !config.sweep().search_frequencies.unwrap_or(false) {
        return Ok(device);
    }
    let r = optimize_device_frequencies(&device, &frequency_search(config, config.envelope()?)?)?;
    params.insert("searched_qubit_ghz".into(), json!(r.qubit_ghz));
    Ok(r.device)
}

fn initial_shape(config: &ExperimentConfig, seed: u64) -> Result<KnotShape, CliError> {
    let base = match (config.envelope_name(), config.envelope()?) {
        (EnvelopeName::Knots, EnvelopeKind::Parameterized(shape)) => shape,
        _ => KnotShape::cosine(config.knot_count())?,
    };
    let jitter = config.optimizer.initial_jitter.unwrap_or(0.0);
    if jitter == 0.0 {
        return Ok(base);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pinned = base.pin_edges();
    let n = base.values().len();
    let values = base
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let edge = pinned && (k == 0 || k + 1 == n);
            if edge { *v } else { (v + rng.random_range(-jitter..=jitter)).max(0.0) }
        })
        .collect();
    Ok(KnotShape::new(values, pinned)?)
}

fn distribution_table(name: &str, columns: &[(&str, &[(String, f64)])]) -> Table {
    let mut header = vec!["state"];
    header.extend(columns.iter().map(|c| c.0));
    let mut table = Table::new(name, &header);
    let labels = columns[0].1;
    for (k, (label, _)) in labels.iter().enumerate() {
        let mut row: Vec<Cell> = vec![label.as_str().into()];
        row.extend(columns.iter().map(|c| Cell::from(c.1[k].1)));
        table.push(row);
    }
    table
}

/// End-of-gate population of every state, averaged over `|10>` and `|01>`.
fn leakage_distribution(config: &ExperimentConfig) -> Result<Report, CliError> {
    let mut params = Map::new();
    let device = searched_device(config, &mut params)?;
    let (schedule, synth) = gate_schedule(config, &device)?;
    params.extend(synth);
    let model = GateModel::new(&device, &schedule, &config.model(), None)?;
    let mut pops = vec![0.0; model.dim()];
    for q in 0..2 {
        for (p, v) in pops.iter_mut().zip(model.evolve(&model.qubit_state(q)?)?.populations()) {
            *p += 0.5 * v;
        }
    }
    let dist: Vec<(String, f64)> = model.labels().iter().cloned().zip(pops.iter().copied()).collect();
    let table = distribution_table("leakage_distribution", &[("population", &dist)]);
    let metrics = closed_metrics(&device, &schedule, config)?;
    let mut rep = report(Scenario::LeakageDistribution, &schedule.target, vec![table]);
    rep.summary.duration_ns = Some(schedule.duration_ns);
    rep.summary.loss = Some(metrics.loss);
    rep.summary.leakage = Some(metrics.leakage);
    rep.summary.params = params;
    Ok(rep)
}

fn frequencies(config: &ExperimentConfig) -> Result<Report, CliError> {
    let device = config.device()?;
    let search = frequency_search(config, config.envelope()?)?;
    let r = optimize_device_frequencies(&device, &search)?;
    let mut table = Table::new("frequencies", &FREQUENCY_HEADER);
    table.push(frequency_row(device.fsr_mhz().unwrap_or(f64::NAN), &r));
    let schedule = synthesize_drives(&r.device, &search.target, &search.synthesis)?;
    let metrics = closed_metrics(&r.device, &schedule, config)?;
    let mut rep = report(Scenario::OptimizeFrequencies, &search.target, vec![table]);
    rep.summary.duration_ns = Some(schedule.duration_ns);
    rep.summary.loss = Some(metrics.loss);
    rep.summary.leakage = Some(r.leakage);
    let p = &mut rep.summary.params;
    p.insert("qubit_ghz".into(), json!(r.qubit_ghz));
    p.insert("objective".into(), json!(r.value));
    p.insert("evaluations".into(), json!(r.evaluations));
    Ok(rep)
}

fn waveform(config: &ExperimentConfig, seed: u64) -> Result<Report, CliError> {
    let mut params = Map::new();
    let device = searched_device(config, &mut params)?;
    let o = &config.optimizer;
    let search = WaveformSearch {
        target: config.target()?,
        effective_coupling_mhz: config.effective_coupling_mhz()?,
        initial: initial_shape(config, seed)?,
        optimize_phase: o.optimize_phase.unwrap_or(true),
        optimize_detuning: o.optimize_detuning.unwrap_or(false),
        optimize_duration: o.optimize_duration.unwrap_or(false),
        initial_detuning_mhz: config.gate.detuning_mhz.unwrap_or([0.0; 2]),
        model: config.model(),
        adam: config.adam(),
    };
    let r = optimize_waveform(&device, &search)?;

    let mut history = Table::new("waveform_history", &["iteration", "loss"]);
    for (k, loss) in r.optimization.history.iter().enumerate() {
        history.push(vec![k.into(), (*loss).into()]);
    }
    let mut knots = Table::new("waveform_knots", &["index", "position", "initial", "optimized"]);
    let n = search.initial.values().len();
    for (k, (a, b)) in search.initial.values().iter().zip(r.settings.shape.values()).enumerate() {
        knots.push(vec![k.into(), (k as f64 / (n - 1).max(1) as f64).into(), (*a).into(), (*b).into()]);
    }
    let dist = distribution_table(
        "waveform_distribution",
        &[("initial", &r.initial.distribution), ("optimized", &r.optimized.distribution)],
    );

    let WaveformSettings { phase_offset_rad, detuning_mhz, duration_ns, .. } = r.settings;
    let mut rep = report(Scenario::OptimizeWaveform, &search.target, vec![history, knots, dist]);
    rep.summary.duration_ns = Some(duration_ns);
    rep.summary.loss = Some(r.optimized.loss);
    rep.summary.leakage = Some(r.optimized.leakage);
    rep.summary.fidelity = Some(1.0 - r.optimized.loss);
    rep.summary.params = params;
    let p = &mut rep.summary.params;
    p.insert("initial_loss".into(), json!(r.initial.loss));
    p.insert("initial_leakage".into(), json!(r.initial.leakage));
    p.insert("improvement".into(), json!(r.initial.loss / r.optimized.loss.max(f64::MIN_POSITIVE)));
    p.insert("iterations".into(), json!(r.optimization.iterations));
    p.insert("phase_offset_rad".into(), json!(phase_offset_rad));
    p.insert("detuning_mhz".into(), json!(detuning_mhz));
    p.insert("seed".into(), json!(seed));
    Ok(rep)
}
