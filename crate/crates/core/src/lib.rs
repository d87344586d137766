//! Minimizing-movement and variational BDF2 time stepping for gradient flows
//! in metric spaces.

pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod flow;
pub mod halfline;
pub mod model;
pub mod prox;
pub mod spaces;
pub mod vector;

pub use error::{FlowError, Result};
pub use flow::{bdf2_step, mm_step, run_trajectory, startup_pair, Startup, Trajectory};
pub use model::{EnergyModel, MetricSpace, PenalizedProblem, Scheme, SemiConvexity, WitnessSampler};
