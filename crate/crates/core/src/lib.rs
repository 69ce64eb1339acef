//! Recovery of sparse signals from quadratic measurements `y_i = xᵀA_i x + ε_i`
//! with Gaussian measurement matrices.
//!
//! The pipeline is a support-restricted spectral initializer
//! ([`spectral::initialize`]) followed by sparse Gauss-Newton refinement
//! ([`refine::solve`]). Gradient-descent and thresholded-gradient baselines,
//! injectivity probes and a Monte-Carlo sweep harness sit on top.

pub mod baselines;
pub mod bench;
pub mod ensemble;
pub mod error;
pub mod identifiability;
pub mod io;
pub mod metrics;
pub mod refine;
pub mod rng;
pub mod spectral;
pub mod vecops;

pub use ensemble::{
    gen_ensemble, gen_signal, measure, objective, MeasurementEnsemble, NoiseKind, NoiseSpec,
    Observations, SparseSignal, StorageMode,
};
pub use error::{Result, SgnError};
pub use metrics::{dist, rel_error, support_match, TrialOutcome};
pub use refine::{solve, SolveResult, SolveStatus, SolveTrace, SolverConfig, StepMu};
pub use rng::RngSeed;
pub use spectral::{initialize, InitOptions, InitResult, PhiConvention};
