//! `evdp monitor`: anytime-valid private risk monitoring over a loss stream.
//!
//! Losses come from a CSV with a `loss` column or from a synthetic
//! change-point generator (Bernoulli losses whose mean jumps at a configured
//! batch). The monitor privatizes one e-value per full batch and latches its
//! alarm when the cumulative private e-value crosses `1/alpha`. Output is
//! one row per batch plus a trajectory chart; an empty stream yields an
//! empty (header-only) CSV and success.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr as _;

use anyhow::{Context, Result};
use clap::Args;

use evdp_core::mechanisms::MechanismKind;
use evdp_core::monitor::{Monitor, MonitorConfig};
use evdp_core::privacy::RenyiBudget;

use crate::commands::{write_manifest, CommonArgs};
use crate::config::Resolver;
use crate::csvio::{fmt_f64, CsvOut};
use crate::plot::{line_chart, Series};
use crate::streams::{substream, COMMAND_MONITOR, UNIT_DATA, UNIT_NOISE};

#[derive(Args, Debug, Clone)]
pub struct MonitorArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Ville-type false-alarm probability; the alarm trips at e-value 1/alpha.
    #[arg(long)]
    pub alpha: Option<String>,

    /// Per-batch Renyi privacy budget epsilon.
    #[arg(long)]
    pub epsilon: Option<String>,

    /// Renyi order of the per-batch budget.
    #[arg(long = "renyi-alpha")]
    pub renyi_alpha: Option<String>,

    /// Mechanism privatizing each batch e-value (gaussian|laplace|identity).
    #[arg(long)]
    pub mechanism: Option<String>,

    /// Losses per batch; a trailing partial batch is held, not scored.
    #[arg(long = "batch-size")]
    pub batch_size: Option<String>,

    /// Number of synthetic batches to generate.
    #[arg(long)]
    pub batches: Option<String>,

    /// Safety threshold on the mean loss (the null hypothesis bound).
    #[arg(long)]
    pub threshold: Option<String>,

    /// Span of the one-sided betting prior, inside (0, 1).
    #[arg(long = "betting-c")]
    pub betting_c: Option<String>,

    /// Synthetic mean loss before the change point.
    #[arg(long = "mean-before")]
    pub mean_before: Option<String>,

    /// Synthetic mean loss from the change batch onward.
    #[arg(long = "mean-after")]
    pub mean_after: Option<String>,

    /// 1-based batch index where the synthetic mean jumps.
    #[arg(long = "change-batch")]
    pub change_batch: Option<String>,

    /// CSV with a `loss` column of values in [0, 1]; replaces the generator.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

pub fn run(args: &MonitorArgs) -> Result<ExitCode> {
    let out_dir = args.common.out_dir()?.to_path_buf();
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let alpha: f64 = resolver.value("alpha", &args.alpha, "0.05")?;
    let epsilon: f64 = resolver.value("epsilon", &args.epsilon, "0.05")?;
    let renyi_alpha: f64 = resolver.value("renyi-alpha", &args.renyi_alpha, "2.0")?;
    let mechanism_name: String = resolver.value("mechanism", &args.mechanism, "gaussian")?;
    let batch_size: usize = resolver.value("batch-size", &args.batch_size, "128")?;
    let batches: usize = resolver.value("batches", &args.batches, "50")?;
    let threshold: f64 = resolver.value("threshold", &args.threshold, "0.5")?;
    let betting_c: f64 = resolver.value("betting-c", &args.betting_c, "0.2")?;
    let mean_before: f64 = resolver.value("mean-before", &args.mean_before, "0.5")?;
    let mean_after: f64 = resolver.value("mean-after", &args.mean_after, "0.6")?;
    let change_batch: usize = resolver.value("change-batch", &args.change_batch, "20")?;
    let data_path = resolver.path("data", &args.data);
    let resolved = resolver.finish()?;

    let mechanism = MechanismKind::from_str(&mechanism_name).map_err(anyhow::Error::msg)?;
    let seed = args.common.seed;

    let losses: Vec<f64> = match &data_path {
        Some(path) => crate::csvio::read_column(path, "loss")?,
        None => {
            let mut rng = substream(seed, COMMAND_MONITOR, 0, 0, UNIT_DATA);
            crate::data::changepoint(
                mean_before,
                mean_after,
                change_batch,
                batch_size,
                batches,
                &mut rng,
            )
        }
    };

    let config = MonitorConfig::new(
        threshold,
        alpha,
        batch_size,
        betting_c,
        RenyiBudget::new(renyi_alpha, epsilon)?,
        mechanism,
    )?;
    // Calibration happens at construction, so an undefined Laplace budget
    // surfaces here as exit code 3.
    let mut monitor = Monitor::new(config)?;
    let mut noise_rng = substream(seed, COMMAND_MONITOR, 0, 0, UNIT_NOISE);
    monitor.ingest(&losses, &mut noise_rng)?;

    write_manifest(&out_dir, "monitor", seed, &resolved)?;
    let csv_path = out_dir.join("monitor.csv");
    let mut csv = CsvOut::create(
        &csv_path,
        &[
            ("batch", "1-based batch index"),
            ("private_log_e", "log of this batch's private e-value"),
            ("cumulative_log_e", "log of the running product of private e-values"),
            ("alarm_threshold", "log(1/alpha), latching the alarm once the cumulative log crosses it"),
            ("alarmed", "true once the alarm has latched"),
        ],
    )?;
    let log_threshold = -(alpha.ln());
    for record in monitor.history() {
        csv.row(&[
            (record.index + 1).to_string(),
            fmt_f64(record.log_evalue),
            fmt_f64(record.cumulative_log_evalue),
            fmt_f64(log_threshold),
            record.alarmed.to_string(),
        ])?;
    }
    let csv_path = csv.finish()?;

    render_chart(&csv_path, &out_dir.join("monitor.svg"))?;
    Ok(ExitCode::SUCCESS)
}

/// Cumulative private log e-value and the alarm threshold against batch
/// index, parsed back from the emitted CSV.
fn render_chart(csv_path: &std::path::Path, svg_path: &std::path::Path) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(csv_path)
        .with_context(|| format!("cannot read {}", csv_path.display()))?;
    let headers = reader.headers()?.clone();
    let at = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (batch_at, cum_at, thr_at) = (at("batch"), at("cumulative_log_e"), at("alarm_threshold"));
    let mut cumulative = Series {
        label: "cumulative log e".into(),
        points: Vec::new(),
    };
    let mut threshold = Series {
        label: "alarm threshold".into(),
        points: Vec::new(),
    };
    for record in reader.records() {
        let record = record?;
        let batch: f64 = record.get(batch_at).unwrap_or("").parse()?;
        cumulative
            .points
            .push((batch, record.get(cum_at).unwrap_or("").parse()?));
        threshold
            .points
            .push((batch, record.get(thr_at).unwrap_or("").parse()?));
    }
    line_chart(
        "private e-value trajectory",
        "batch",
        "log e-value",
        &[cumulative, threshold],
        svg_path,
    )
}
