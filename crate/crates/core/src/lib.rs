//! Numerical special Schubert calculus for flags osculating the rational
//! normal curve.

pub mod combinatorics;
pub mod geometry;
pub mod homotopy;
pub mod linalg;
pub mod poles;
pub mod reality;
pub mod system;

pub use combinatorics::{BoxShape, ConditionKind, Partition, SpecialCondition};
pub use geometry::FlagSite;
pub use linalg::C64;
pub use system::{
    build_system, evaluate_and_jacobian, LocalChart, PolynomialSystem, SchubertProblem,
    SpecialInstance,
};
pub use homotopy::{solve, SolutionSet, TrackerConfig};
pub use reality::{classify, RealityReport, Verdict};
pub use poles::{place_poles, FeedbackLaw, Plant, PoleSpec};
