pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod hypotheses;
pub mod linalg;
pub mod relent;
pub mod sampling;
pub mod solver;
pub mod systems;
