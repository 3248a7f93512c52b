//! Spatial sub-diffusion (x_s, Θ_s) on a constant-curvature fiber, driven
//! by the temporal path, together with boundary-limit extraction.

pub mod boundary;
pub mod chart;
pub mod export;
pub mod fiber;
pub mod polar;
pub mod simulate;
pub mod step;

pub use boundary::{boundary_limit, BoundaryPoint, BoundaryReport, LimitStatus};
pub use fiber::{Fiber, FiberKind};
pub use polar::{polar_diagnostics, Polar};
pub use simulate::{simulate_full, Trajectory};
pub use step::{project_to_manifold, step_spatial, SpatialState};
