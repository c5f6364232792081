//! Adam, central-difference gradients, the qubit-frequency grid search and
//! the knot-amplitude waveform search.

mod adam;
mod frequency;
mod grid;
mod waveform;

pub use adam::{
    adam_minimize, adam_minimize_projected, finite_difference_gradient, AdamConfig, OptimizationResult,
};
pub use frequency::{
    gate_leakage, ladder_device, optimize_detunings, DetuningResult, optimize_device_frequencies, optimize_frequencies, search_domain, FrequencyObjective, FrequencyResult,
    FrequencySearch, SWEEP_COUPLING_MHZ,
};
pub use grid::{grid_minimize, GridConfig, GridResult};
pub use waveform::{
    evaluate_waveform, optimize_waveform, WaveformEvaluation, WaveformResult, WaveformSearch, WaveformSettings,
};
