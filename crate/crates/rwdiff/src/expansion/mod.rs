//! Expansion functions α on (0, T): catalog, growth classes, horizon
//! integrals, admissibility checks and regime prediction.

pub mod growth;
pub mod horizon;
pub mod hypotheses;
pub mod model;
pub mod modelfile;
pub mod predict;
pub mod tabulated;

pub use growth::{classify_growth, GrowthClass};
pub use horizon::{horizon_integrals, Extent, HorizonIntegrals};
pub use hypotheses::{check_hypotheses, energy_conditions};
pub use model::{catalog, ExpansionModel, ModelError, ModelSpec};
pub use predict::{predict_regimes, RegimePrediction};
