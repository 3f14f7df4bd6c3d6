//! Ricci flow of multiply warped products `ǧ + Σ vₐ² ĝₐ` over S¹ and T² with round sphere
//! fibers: closed-form curvature, a finite-difference oracle, method-of-lines integrators,
//! along-the-flow monitors, and a shooting method for rotationally symmetric shrinkers.

pub mod error;
pub mod fd_oracle;
pub mod flow_s1;
pub mod flow_surface;
pub mod geometry;
pub mod integrate;
pub mod model;
pub mod monitors;
pub mod soliton;
pub mod stencil;

pub use error::{Error, Result, Snapshot};
pub use flow_s1::{estimate_t, run_s1, FlowStateS1, S1Config, TFit, TFitModel, TrajectoryS1};
pub use flow_surface::{run_surface, FlowStateSurface, SurfaceConfig, SurfaceMonitors, TrajectorySurface};
pub use geometry::{curvature_blocks, CurvatureBlocks, PointBlocks, WarpedState};
pub use model::{BaseKind, FiberSpec, Profile, WarpedProductSpec};
pub use monitors::{MonitorConfig, MonitorRecord};
