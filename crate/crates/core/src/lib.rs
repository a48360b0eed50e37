//! Geometry of Carnot groups: homogeneous norms, horizontal lines, beta numbers,
//! Carleson sums and nonnegative singular integrals on curves.

pub mod corpus;
pub mod curves;
pub mod error;
pub mod group;
pub mod harness;
pub mod horizontal;
pub mod metric;
pub mod optimize;
pub mod pipeline;
pub mod sampling;
pub mod sio;
pub mod tsp;

pub use error::{Error, Result};
pub use group::{validate_group, CarnotGroup, GroupSpec, Point, ValidationReport};
pub use metric::MetricKind;
