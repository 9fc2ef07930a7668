pub mod error;
pub mod linalg;
pub mod ode;
pub mod quadrature;
pub mod timescale;
pub mod apkit;
pub mod grid;
pub mod lindich;
pub mod problem;
pub mod apsolve;
pub mod ivpsim;
pub mod logistic;
pub mod schema;

pub use apsolve::{picard_solve, SolveReport, SolverConfig};
pub use error::{Error, Result};
pub use grid::GridSolution;
pub use lindich::{DichotomyData, ExpBound, LinearSystem};
pub use problem::{EPCAGProblem, Nonlinearity};
pub use schema::{parse_problem, ProblemFile, Report};
pub use timescale::ThetaSequence;
