pub mod banksim;
pub mod config;
pub mod batchgraph;
pub mod error;
pub mod params;
pub mod sigcore;
pub mod thash;
pub mod tuner;
pub mod vexec;

pub use error::{Error, Result};
pub use params::{DerivedParams, ParamSetId, ParameterSet};
