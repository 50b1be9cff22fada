//! Batch front end for `inplane-dirac`: scenario files in, tables out.

pub mod config;
pub mod run;

use config::Format;
use inplane_dirac::table::ResultTable;

pub const SEED_ENV: &str = "INPLANE_DIRAC_SEED";

/// Exit status for usage, parse, validation and I/O errors.
pub const EXIT_USAGE: i32 = 1;
/// Exit status when a run breaks a physics invariant or a numerical routine fails.
pub const EXIT_INVARIANT: i32 = 2;

pub fn emit(table: &ResultTable, format: Format) -> inplane_dirac::Result<String> {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    }
}
