//! Extended-range scalars, dense vector helpers, finite differences and
//! counter-based random streams.

mod extended;
mod finite_diff;
pub mod linalg;
mod random;

pub use extended::ExtendedScalar;
pub use finite_diff::{default_step, directional_derivative, finite_diff_gradient};
pub use linalg::Vector;
pub use random::{RandomStream, StreamCursor};
