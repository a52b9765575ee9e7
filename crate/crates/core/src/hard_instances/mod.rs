//! Adversarial test distributions: the mass-relocated one-dimensional
//! instance, exact moment matching by linear programming, embedding along a
//! hidden direction, and the scenario generators built from them.

mod discrete;
pub mod embed;
pub mod lp;
pub mod quadrature;
pub mod relocated;
pub mod scenario;

pub use discrete::{Discrete1D, MASS_TOL};
pub use embed::{embed_hidden_direction, EmbeddedDistribution};
pub use lp::{exact_moment_match_lp, MomentMatch};
pub use relocated::{build_hard_instance, build_mass_relocated_1d, discretize_1d, HardInstance1D, Sampler1D};
pub use scenario::{make_scenario, Scenario, ScenarioKind, TestDistribution, TruthSpec};
