//! `evdp ci`: private confidence sets for a bounded mean across a grid of
//! sample sizes and mechanisms.
//!
//! Data comes from a Bernoulli generator at the configured prevalence, or
//! from a CSV with a `value` column (one bounded observation per row; the
//! sample-size grid is then ignored). For each (n, mechanism) pair the
//! command runs the partition-based private confidence procedure and emits
//! the confidence hull endpoints and total width; mechanisms that cannot be
//! calibrated at the per-cell budget are reported as `N/A`. The chart plots
//! width against sample size per mechanism, rendered from the emitted CSV.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr as _;

use anyhow::{Context, Result};
use clap::Args;

use evdp_core::confidence::{private_ci, CiConfig, Partition};
use evdp_core::mean::{BoundedSample, PriorConfig};
use evdp_core::mechanisms::MechanismKind;
use evdp_core::privacy::RenyiBudget;
use evdp_core::Error;

use crate::commands::{write_manifest, CommonArgs, NOT_AVAILABLE};
use crate::config::{Resolver, SizeList};
use crate::csvio::{fmt_f64, read_column, CsvOut};
use crate::plot::{line_chart, Series};
use crate::streams::{substream, COMMAND_CI, UNIT_DATA, UNIT_NOISE};

/// The betting prior used for every cell: uniform atoms on [-1, 1].
const PRIOR_ATOMS: usize = 51;

#[derive(Args, Debug, Clone)]
pub struct CiArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Confidence miss probability.
    #[arg(long)]
    pub alpha: Option<String>,

    /// Total Renyi privacy budget epsilon (split across cells).
    #[arg(long)]
    pub epsilon: Option<String>,

    /// Renyi order of the privacy budget.
    #[arg(long = "renyi-alpha")]
    pub renyi_alpha: Option<String>,

    /// Single mechanism (gaussian|laplace|identity); default sweeps all three.
    #[arg(long)]
    pub mechanism: Option<String>,

    /// Comma-separated sample sizes.
    #[arg(long)]
    pub n: Option<String>,

    /// Number of partition cells (candidate means tested).
    #[arg(long)]
    pub cells: Option<String>,

    /// Bernoulli prevalence of the synthetic data.
    #[arg(long)]
    pub prevalence: Option<String>,

    /// CSV with a `value` column of observations in [0, 1]; replaces the
    /// generator and the sample-size grid.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

pub fn run(args: &CiArgs) -> Result<ExitCode> {
    let out_dir = args.common.out_dir()?.to_path_buf();
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let alpha: f64 = resolver.value("alpha", &args.alpha, "0.05")?;
    let epsilon: f64 = resolver.value("epsilon", &args.epsilon, "1.0")?;
    let renyi_alpha: f64 = resolver.value("renyi-alpha", &args.renyi_alpha, "2.0")?;
    let cells: usize = resolver.value("cells", &args.cells, "20")?;
    let prevalence: f64 = resolver.value("prevalence", &args.prevalence, "0.3")?;
    let ns: SizeList = resolver.value("n", &args.n, "100,316,1000,3162,10000")?;
    let mechanism: Option<String> = resolver.optional("mechanism", &args.mechanism)?;
    let data_path = resolver.path("data", &args.data);
    let resolved = resolver.finish()?;

    let explicit = mechanism.is_some();
    let mechanisms: Vec<MechanismKind> = match &mechanism {
        Some(name) => vec![MechanismKind::from_str(name).map_err(anyhow::Error::msg)?],
        None => vec![
            MechanismKind::Identity,
            MechanismKind::Gaussian,
            MechanismKind::Laplace,
        ],
    };

    let ingested: Option<Vec<BoundedSample>> = match &data_path {
        Some(path) => {
            let raw = read_column(path, "value")?;
            Some(BoundedSample::many(&raw).context("data column `value`")?)
        }
        None => None,
    };
    let sizes: Vec<usize> = match &ingested {
        Some(rows) => vec![rows.len()],
        None => ns.0.clone(),
    };

    let partition = Partition::uniform(cells)?;
    let budget = RenyiBudget::new(renyi_alpha, epsilon)?;
    let seed = args.common.seed;

    write_manifest(&out_dir, "ci", seed, &resolved)?;
    let csv_path = out_dir.join("ci.csv");
    let mut csv = CsvOut::create(
        &csv_path,
        &[
            ("n", "sample size"),
            ("mechanism", "noise mechanism (identity is the non-private reference)"),
            ("alpha", "confidence miss probability"),
            ("epsilon", "total Renyi budget, split evenly across cells"),
            ("renyi_alpha", "Renyi order of the budget"),
            ("lower", "lower endpoint of the confidence hull, or N/A if the mechanism is undefined"),
            ("upper", "upper endpoint of the confidence hull, or N/A"),
            ("width", "total kept length of the confidence set, or N/A"),
        ],
    )?;

    let mut defined_rows = 0_usize;
    let mut undefined_error: Option<Error> = None;
    for (n_index, &n) in sizes.iter().enumerate() {
        let samples: Vec<BoundedSample> = match &ingested {
            Some(rows) => rows.clone(),
            None => {
                let mut rng = substream(seed, COMMAND_CI, n_index as u64, 0, UNIT_DATA);
                BoundedSample::many(&crate::data::bernoulli(prevalence, n, &mut rng))
                    .expect("generator stays in [0, 1]")
            }
        };
        for (m_index, &mech) in mechanisms.iter().enumerate() {
            let config = CiConfig {
                prior: PriorConfig::Uniform {
                    lambda_inf: -1.0,
                    lambda_sup: 1.0,
                    atoms: PRIOR_ATOMS,
                },
                alpha,
                budget,
                mechanism: mech,
            };
            let mut rng = substream(
                seed,
                COMMAND_CI,
                n_index as u64,
                m_index as u64 + 1,
                UNIT_NOISE,
            );
            let (lower, upper, width) = match private_ci(&samples, &partition, &config, &mut rng) {
                Ok((set, _ledger)) => {
                    defined_rows += 1;
                    match set.hull() {
                        Some((lo, hi)) => (fmt_f64(lo), fmt_f64(hi), fmt_f64(set.total_width())),
                        None => ("empty".into(), "empty".into(), fmt_f64(0.0)),
                    }
                }
                Err(err @ Error::LaplaceUndefined { .. }) => {
                    undefined_error.get_or_insert(err);
                    (
                        NOT_AVAILABLE.into(),
                        NOT_AVAILABLE.into(),
                        NOT_AVAILABLE.into(),
                    )
                }
                Err(err) => return Err(err.into()),
            };
            csv.row(&[
                n.to_string(),
                mech.to_string(),
                fmt_f64(alpha),
                fmt_f64(epsilon),
                fmt_f64(renyi_alpha),
                lower,
                upper,
                width,
            ])?;
        }
    }
    let csv_path = csv.finish()?;

    // A mechanism the user asked for by name that is undefined everywhere is
    // exit code 3; in a sweep, undefined combinations are just N/A rows.
    if defined_rows == 0 {
        if let (true, Some(err)) = (explicit, undefined_error) {
            return Err(err.into());
        }
    }

    render_chart(&csv_path, &out_dir.join("ci.svg"))?;
    Ok(ExitCode::SUCCESS)
}

/// Width versus sample size, one series per mechanism, parsed back from the
/// emitted CSV so the chart is a pure function of the data file.
pub(crate) fn render_chart(csv_path: &std::path::Path, svg_path: &std::path::Path) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(csv_path)
        .with_context(|| format!("cannot read {}", csv_path.display()))?;
    let headers = reader.headers()?.clone();
    let at = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (n_at, mech_at, width_at) = (at("n"), at("mechanism"), at("width"));
    let mut series: Vec<Series> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let width = record.get(width_at).unwrap_or("");
        if width == NOT_AVAILABLE {
            continue;
        }
        let n: f64 = record.get(n_at).unwrap_or("").parse()?;
        let width: f64 = width.parse()?;
        let label = record.get(mech_at).unwrap_or("").to_string();
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((n, width)),
            None => series.push(Series {
                label,
                points: vec![(n, width)],
            }),
        }
    }
    line_chart(
        "confidence-set width vs sample size",
        "n",
        "width",
        &series,
        svg_path,
    )
}
