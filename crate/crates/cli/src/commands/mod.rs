mod analyze;
mod curves;
mod simulate;
mod sweep;

use std::path::{Path, PathBuf};

use herald_core::config::RunConfig;

use crate::error::{at, Result};

pub use analyze::analyze;
pub use curves::curves;
pub use simulate::simulate;
pub use sweep::sweep;

/// Parsed configuration with the text it was parsed from, which is what the
/// outputs' hash covers.
struct Loaded {
    text: String,
    cfg: RunConfig,
}

fn load(path: &Path, seed: Option<u64>) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).map_err(at(path))?;
    let mut cfg = RunConfig::from_toml_str(&text)?;
    if let Some(s) = seed {
        cfg.montecarlo.seed = s;
    }
    Ok(Loaded { text, cfg })
}

fn output_root(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.io.output_dir.clone())
}
