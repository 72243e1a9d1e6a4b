mod config;
mod csv;
mod vtu;

pub use self::csv::{read_diagnostics, read_diagnostics_csv, write_diagnostics, write_diagnostics_csv};
pub use config::{ModelSection, OutputConfig, ParamOverrides, RunConfig, SolverConfig, OUTPUT_DIR_ENV};
pub use vtu::{vtu_string, write_vtu};
