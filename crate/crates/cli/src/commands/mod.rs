//! One module per pipeline stage.

pub mod analyze;
pub mod convert;
pub mod gen_disorder;
pub mod sample_pt;
pub mod train;

use std::fs;
use std::path::Path;

use crate::errors::{CliError, Result};

/// Random streams used by the driver itself, far above anything the core
/// library derives internally from the same seed.
pub const STREAM_DECORATE_BASE: u64 = 1 << 20;
pub const STREAM_ANALYZE_BASE: u64 = 1 << 21;

pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io_at(dir, e))
}
