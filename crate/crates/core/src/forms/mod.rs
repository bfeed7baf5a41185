//! Exterior algebra over coordinate charts: sparse graded forms, wedge,
//! exterior derivative, interior product, Lichnerowicz differential, pullback
//! along sections, and slotwise contraction with connection projectors.
//!
//! All values are immutable; every operation is a pure function, so forms are
//! safe to share and evaluate in parallel.

mod chart;
mod form;
mod section;

pub use chart::{BundleCharts, ChartKind, ChartSpec};
pub use form::{DifferentialForm, VectorField};
pub use section::SectionMap;

use crate::symexpr::ExprError;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum FormError {
    #[error("forms live on different charts")]
    ChartMismatch,
    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("interior product of a degree-0 form")]
    InteriorOfScalar,
    #[error("expected a one-form, got degree {degree}")]
    NotAOneForm { degree: usize },
    #[error("coordinate index {index} out of range for this chart")]
    CoordinateIndexOutOfRange { index: u8 },
    #[error("`{name}` is not a coordinate on this chart")]
    UnknownCoordinate { name: String },
    #[error("no image supplied for fibered coordinate `{name}`")]
    MissingImage { name: String },
    #[error("bad image for `{name}`: {reason}")]
    BadImage { name: String, reason: String },
    #[error("chart declares duplicate coordinate names")]
    DuplicateCoordinate,
    #[error("metric must be {expected}×{expected}")]
    MetricShape { expected: usize },
    #[error("metric is not symmetric at ({i},{j})")]
    MetricAsymmetric { i: usize, j: usize },
    #[error(transparent)]
    Expr(#[from] ExprError),
}
