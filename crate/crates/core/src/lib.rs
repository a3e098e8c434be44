//! Locates large-footprint LiDAR observations inside a coincident point
//! cloud by matching simulated RH metrics to the observed ones, and
//! corrects their reported coordinates.
//!
//! The pipeline: [`ingest`] clips each observation's focal area into a
//! local frame, [`footprint`] simulates RH metrics at candidate centers,
//! [`model`] scores candidate locations, [`samplers`] draws from the
//! posterior, and [`posterior`] turns draws into maps, distances, angles
//! and fit statistics. [`synthetic`] produces scenes with known truth, and
//! [`cli`] wires it all to the `generate`, `fit`, `summarize` and `check`
//! commands.

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod footprint;
pub mod geom;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod posterior;
pub mod samplers;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use geom::Coord;
