//! File formats and run configuration.
//!
//! - CSV matrices: one row per channel, comma-separated decimals printed at
//!   17 significant digits so a write/read round trip is value-exact.
//! - Binary 8-bit PGM (P5) for grayscale images.
//! - JSON-lines run logs, flushed per record.
//! - JSON run configuration with flag overrides.
//! - Network state snapshots as a directory of CSV files.

pub mod config;
pub mod csv;
pub mod pgm;
pub mod runlog;
pub mod snapshot;

pub use config::{parse_config, ConfigOverrides, RunConfig, SourceConfig};
pub use csv::{read_csv_matrix, read_csv_matrix_opts, write_csv_matrix};
pub use pgm::{read_pgm, write_pgm};
pub use runlog::{append_runlog, read_runlog, RunLogRecord};
pub use snapshot::{load_state, save_state};
