pub mod dense;
pub mod dressed;
pub mod error;
pub mod master_equation;
pub mod model;
pub mod observables;
pub mod operator;
pub mod scenario;

pub use dressed::{diagonalize, DressedBasis};
pub use error::{Error, Result};
pub use master_equation::{FloquetOptions, FloquetSteadyState, LiouvillianSet, TimeDomainOptions};
pub use model::{LevelCut, SystemParams};
pub use observables::{RadianceClass, RadiancePoint, RadianceSolver, SpectrumSolver};
pub use operator::{CMatrix, QuantumOperator};
pub use scenario::{RunContext, Scenario, SweepResult, SweepSpec};
