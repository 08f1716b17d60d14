//! Shared fixtures for the criterion benches.

use causal_isotonic::nuisance::FittedNuisance;
use causal_isotonic::simulation::{Arm, DgpConfig};
use causal_isotonic::Dataset;

/// A draw from the default simulation design.
pub fn simulated(n: usize, seed: u64) -> Dataset {
    DgpConfig::default().generate(n, seed).expect("n >= 2")
}

/// Correctly specified nuisances fitted on `data`.
pub fn fitted(data: &Dataset) -> FittedNuisance {
    Arm::BothCorrect.nuisance_spec().fit(data).expect("nuisance fit")
}
