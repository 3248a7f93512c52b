//! Temporal sub-diffusion (t_s, ṫ_s): scheme, path driver, entrance law,
//! constant-H invariant law, comparison coupling and diagnostics.

pub mod comparison;
pub mod diagnostics;
pub mod export;
pub mod invariant;
pub mod path;
pub mod scheme;
pub mod tamed;

pub use comparison::{comparison_triple, comparison_triple_with, ComparisonTriple, CouplingScheme};
pub use diagnostics::{clock_diagnostic, rate_estimate, ClockVerdict, Rates};
pub use invariant::{invariant_density, sample_invariant, InvariantMeasure};
pub use path::{entrance_start, simulate_temporal, TemporalPath, TemporalSample, Termination};
pub use scheme::{step_temporal, StepError, StepParams, TemporalState};
