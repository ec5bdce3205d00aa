//! File formats, persistence, reports and the command-line front end for
//! [`mecad_core`].

pub mod config;
mod error;
pub mod mecd;
pub mod report;
pub mod run;
pub mod state;

pub use error::{Error, FormatError, Result};
pub use mecd::{decode_dataset, encode_dataset, read_dataset, write_dataset};

/// Reads and validates an MECD file.
pub fn load_dataset(path: &std::path::Path) -> Result<mecad_core::ClassStream> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}
