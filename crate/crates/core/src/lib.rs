//! Simulation, synthesis and optimization of remote holonomic two-qubit gates.
//!
//! Two transmons are coupled to the standing-wave modes of a coaxial cable.
//! Parametric flux modulation on each qubit activates a sideband exchange with
//! the cable mode `M2`; driving both qubits at once produces a cyclic
//! evolution on the bright state and leaves the dark state untouched, which
//! realizes a reflection gate on `{|10>, |01>}`.
//!
//! Module map:
//!
//! - [`hilbert`]: spaces, operators, excitation sectors, closed and open propagation.
//! - [`special`]: Bessel functions of the first kind.
//! - [`device`]: the qubit/cable model and its lab- and rotating-frame Hamiltonians.
//! - [`pulse`]: envelopes, drive signals, envelope averages and gate durations.
//! - [`holonomic`]: target unitaries and drive synthesis.
//! - [`dynamics`]: glue that turns a device plus a schedule into a runnable model.
//! - [`analysis`]: fidelities, losses, leakage, error fits and robustness sweeps.
//! - [`optimize`]: Adam, finite differences, frequency grid search, waveform search.
//!
//! Units: user-facing frequencies are ordinary frequencies (GHz or MHz) and
//! times are in ns. Hamiltonians are angular frequencies in rad/ns.

pub mod analysis;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod holonomic;
pub mod optimize;
pub mod pulse;
pub mod special;
pub mod units;

pub use error::{Error, Result};
