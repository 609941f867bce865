//! Instance sources: TSPLIB files, the native JSON format, the guitar
//! assembly line, power grids and seeded random instances.

pub mod grid;
pub mod guitar;
pub mod native;
pub mod random;
pub mod tsplib;

pub use grid::{gen_grid, grid_geojson, grid_to_instance, routes_geojson, toomany, GridParams, PowerGrid, Selection};
pub use guitar::build_guitar;
pub use native::{load_instance, parse_instance, save_instance, serialize_instance};
pub use random::{random_instance, RandomSpec};
pub use tsplib::{parse_tsplib, tsplib_to_instance, EdgeWeightType, Recipe, TsplibProblem};
