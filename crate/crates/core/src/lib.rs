//! Riemannian geometry of spaces of metric fields sampled on a finite chart.
//!
//! Fields live on a [`QuadChart`]: a list of quadrature points with weights.
//! Everything is deterministic for a given input, independent of the number
//! of rayon threads.

// NaN must fail the positivity tests, so `!(x > 0.0)` is kept throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chart;
pub mod distance;
pub mod error;
pub mod field;
pub mod io;
pub mod optimizer;
pub mod pointwise;
pub mod product;
pub mod random;
pub mod reduce;
pub mod report;
pub mod suites;
pub mod tensor;

pub use chart::{
    ChartPoint, DensityTangent, DiscretePath, MetricField, QuadChart, Region, TangentField,
    VolumeDensity,
};
pub use distance::{field_distance, Constraint, FieldGeodesic, Init};
pub use error::{Error, ErrorClass, OptimizerFailure, Result};
pub use field::{theta_y, ThetaBreakdown};
pub use optimizer::{Diagnostics, GeodesicSetting, IterationRecord, OptimizerOptions};
pub use pointwise::{theta_distance, PointPath};
pub use report::CheckReport;
pub use suites::Suite;
pub use tensor::{SpdMatrix, SymMatrix};
