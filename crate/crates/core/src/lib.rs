//! Quantum-enhanced optimisation in classical emulation.
//!
//! The crate emulates QAOA on QUBO, Max-Cut and MIS instances, routes the
//! resulting circuits onto constrained hardware graphs, filters the sampled
//! bit-strings and uses them as warm starts for a multistart tabu search.
//! Speedups are measured with the Q-factor: the ratio of the minimal expected
//! runtimes of cold-started and warm-started runs.
//!
//! Module map:
//!
//! * [`problem`]: instances, conversions, energies and brute-force spectra.
//! * [`emulator`]: statevector QAOA, sampling and angle optimisation.
//! * [`params`]: optimisation-free angle prediction and its lookup tables.
//! * [`routing`]: qubit layout and swap-network synthesis.
//! * [`filters`]: readout correction and sample filters.
//! * [`heuristics`]: tabu search and multistart drivers.
//! * [`benchmark`]: F_opt, expected runtime, Q-factor and experiments.
//! * [`partition`]: split-and-recombine for instances over the qubit budget.

pub mod benchmark;
pub mod bits;
pub mod emulator;
mod error;
pub mod filters;
pub mod heuristics;
pub mod params;
pub mod partition;
pub mod problem;
pub mod routing;

pub use error::{Error, Result};

/// Default cap on the number of emulated qubits.
pub const DEFAULT_EMULATION_CAP: usize = 26;
