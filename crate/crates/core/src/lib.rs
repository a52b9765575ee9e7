//! Testable learning with distribution shift for intersections of halfspaces
//! under Gaussian training marginals.
//!
//! The learners in [`tds`] receive labelled Gaussian training data and an
//! unlabelled test sample. They either reject the test sample or return an
//! intersection of at most `k` halfspaces whose error on the test
//! distribution is small. [`hard_instances`] builds adversarial test
//! distributions and [`harness`] runs seeded experiments over them.

mod bits;
pub mod concepts;
pub mod covers;
pub mod error;
pub mod gaussian;
pub mod hard_instances;
pub mod harness;
pub mod linalg;
pub mod retrieval;
pub mod tds;
pub mod testers;

pub use error::{Result, TdsError};
