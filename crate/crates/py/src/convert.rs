//! Argument parsing shared by the Python entry points.

use lace_core::decoder::DecoderConfig;
use lace_core::surface::CodeLayout;
use lace_core::{LaceError, Result};

/// Site count of a dense vector of length `len = 2ⁿ`.
pub fn sites_of_len(len: usize) -> Result<usize> {
    if len == 0 || !len.is_power_of_two() {
        return Err(LaceError::Size(format!("length {len} is not a power of two")));
    }
    Ok(len.trailing_zeros() as usize)
}

/// `auto`, `table`, `brute-force` or `mps:CHI`.
pub fn parse_decoder(s: &str, layout: &CodeLayout) -> Result<DecoderConfig> {
    match s {
        "auto" => Ok(DecoderConfig::auto(layout, 1 << layout.rows.min(layout.cols))),
        "table" => Ok(DecoderConfig::Table),
        "brute-force" => Ok(DecoderConfig::BruteForce),
        other => other
            .strip_prefix("mps:")
            .and_then(|c| c.parse().ok())
            .map(|chi| DecoderConfig::Mps { chi })
            .ok_or_else(|| LaceError::Config(format!("unknown decoder `{other}`"))),
    }
}
