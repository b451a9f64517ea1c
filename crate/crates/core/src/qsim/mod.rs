//! Statevector and density-matrix simulation of small gate circuits.

mod circuit;
mod measure;
mod noise;
mod state;

pub use circuit::{build_zz_feature_map, circuit_stats, Circuit, CircuitStats, Gate, MAX_QUBITS};
pub use measure::{
    bitstring, measure_distribution, parse_bitstring, sample_shots, Counts, MeasuredState, OutcomeDistribution,
};
pub use noise::NoiseModel;
pub use state::{apply, run, simulate_noisy, DensityMatrix, Statevector};
