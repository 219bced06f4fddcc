//! The four subcommands. Each resolves its configuration (flags over config
//! file over defaults), writes `manifest.txt` with the full resolved state,
//! produces its CSV outputs, and renders any chart strictly from the CSV it
//! just wrote.

pub mod ci;
pub mod conformal;
pub mod monitor;
pub mod validate;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;

/// Placeholder for combinations where the requested mechanism has no valid
/// calibration (for example a Laplace scale that would reach one).
pub const NOT_AVAILABLE: &str = "N/A";

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Root seed; every random draw derives from it through fixed substreams.
    #[arg(long, default_value_t = 17)]
    pub seed: u64,

    /// Flat `key = value` config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl CommonArgs {
    pub fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("cannot create output directory {}", self.out.display()))?;
        Ok(&self.out)
    }
}

/// Writes the resolved run manifest: subcommand, seed, and every resolved
/// configuration key in sorted order. Reruns with an identical manifest
/// produce byte-identical CSV outputs.
pub fn write_manifest(
    out_dir: &Path,
    subcommand: &str,
    seed: u64,
    resolved: &BTreeMap<String, String>,
) -> Result<PathBuf> {
    let path = out_dir.join("manifest.txt");
    let file = std::fs::File::create(&path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "subcommand = {subcommand}")?;
    writeln!(w, "seed = {seed}")?;
    for (key, value) in resolved {
        writeln!(w, "{key} = {value}")?;
    }
    w.flush()?;
    Ok(path)
}
