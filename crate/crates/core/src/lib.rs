//! Planning of heterogeneous multi-worker task routes as mixed-integer programs.

pub mod costmodels;
pub mod encoder;
pub mod error;
pub mod export;
pub mod graph;
pub mod instances;
pub mod model;
pub mod routes;
pub mod solver;

pub use encoder::{encode, EncodeOptions, MilpModel, Objective, SecMode, VarRef};
pub use error::{Error, Result};
pub use graph::{build_graph, MultiGraph};
pub use model::*;
pub use solver::{solve, SolveLimits, SolveReport, SolveStatus};
pub use routes::{extract_plan, validate_plan, Plan};
