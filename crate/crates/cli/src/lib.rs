//! Command-line front end: config parsing, scenario runners and output writers.

pub mod config;
pub mod error;
pub mod output;
pub mod scenarios;

use config::{parse_config, FormatName};
use error::CliError;
use scenarios::{Report, Scenario};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Run options that come from the command line rather than the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Reads the config, runs the scenario and writes its outputs. Returns the
/// report and the output directory.
pub fn execute(scenario: Scenario, config_path: &Path, options: &RunOptions) -> Result<(Report, PathBuf), CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| CliError::io(config_path, e))?;
    let config = parse_config(&text)?;
    let dir = options
        .out
        .clone()
        .or_else(|| config.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let seed = options.seed.or(config.seed).unwrap_or(0);

    let start = Instant::now();
    let mut report = scenarios::run(scenario, &config, seed)?;
    report.summary.runtime_s = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let formats = config.formats();
    if formats.contains(&FormatName::Csv) {
        for table in &report.tables {
            table.write(&dir)?;
        }
    }
    if formats.contains(&FormatName::Json) {
        output::write_json(&dir.join("summary.json"), &report.summary)?;
    }
    Ok((report, dir))
}
