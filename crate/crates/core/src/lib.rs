pub mod elliptic;
pub mod field;
pub mod full2d;
pub mod grid;
pub mod initdata;
pub mod lom2d;
pub mod lom3d;
pub mod norms;
pub mod ops;
pub mod report;

pub use field::{Parity, PrefactoredField, ScalarField};
pub use grid::{Grid, RadialSpacing};
pub use initdata::{DataParams, SizeConstants};
pub use report::{CheckResult, VerificationReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("support of {what} reaches R = {edge:.6} >= R_max/2 = {limit:.6}; tail integral would be truncated")]
    SupportTooWide { what: String, edge: f64, limit: f64 },
    #[error("exponent overflow: {what} = {value:.3e} exceeds {limit} at R = {r:.6}")]
    ExponentOverflow { what: String, value: f64, limit: f64, r: f64 },
    #[error("weighted integrand blows up: value {value:.3e} at node (R, beta) = ({r:.6}, {beta:.6})")]
    WeightBlowup { value: f64, r: f64, beta: f64 },
    #[error("grids do not match: {0}")]
    GridMismatch(String),
}
