use thiserror::Error;

use crate::flow_s1::FlowStateS1;
use crate::flow_surface::FlowStateSurface;

pub type Result<T> = std::result::Result<T, Error>;

/// Last finite state before a run produced non-finite fields.
#[derive(Clone, Debug)]
pub enum Snapshot {
    S1(FlowStateS1),
    Surface(FlowStateSurface),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive warping: fiber {fiber} has v = {value:e} at grid index {index}")]
    NonPositiveWarping { fiber: usize, index: usize, value: f64 },
    #[error("degenerate base metric at grid index {index} (det = {det:e})")]
    DegenerateMetric { index: usize, det: f64 },
    #[error("chart singularity: polar angle {angle} outside [{lo}, {hi}]")]
    ChartSingularity { angle: f64, lo: f64, hi: f64 },
    #[error("finite-difference step {h:e} too small: estimated cancellation {cancellation:e}")]
    StepTooSmall { h: f64, cancellation: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("non-finite fields at t = {t:e}")]
    BlowupDetected { t: f64, last_good: Box<Snapshot> },
    #[error("axis expansion failed: {0}")]
    AxisExpansionFailure(String),
}
