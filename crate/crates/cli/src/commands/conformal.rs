//! `evdp conformal`: private conformal prediction across an epsilon grid.
//!
//! Calibration scores come from a CSV with a `score` column or from a
//! score-mixture generator over the quantizer bins. For every
//! (epsilon, mechanism) combination the command averages prediction-set
//! size over repetitions (and, for synthetic data, empirical coverage of a
//! fresh test score); combinations whose per-level budget has no valid
//! calibration are reported as `N/A`. With a candidate file
//! (`id,label,score`) it additionally writes per-candidate membership for
//! the first epsilon under a single mechanism. The chart plots average set
//! size against epsilon per mechanism, rendered from the emitted CSV.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr as _;

use anyhow::{Context, Result};
use clap::Args;

use evdp_core::conformal::{predict_set, privatize_levels, CalibrationScores, ScoreQuantizer};
use evdp_core::mechanisms::MechanismKind;
use evdp_core::privacy::RenyiBudget;
use evdp_core::Error;

use crate::commands::{write_manifest, CommonArgs, NOT_AVAILABLE};
use crate::config::{FloatList, Resolver};
use crate::csvio::{fmt_f64, read_candidates, read_column, CsvOut};
use crate::plot::{line_chart, Series};
use crate::streams::{substream, COMMAND_CONFORMAL, UNIT_DATA, UNIT_NOISE, UNIT_TEST};

/// Stream lane reserved for the candidate-file release, clear of sweep lanes.
const CANDIDATE_LANE: u64 = 4095;

#[derive(Args, Debug, Clone)]
pub struct ConformalArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Marginal miss probability of the prediction sets.
    #[arg(long)]
    pub alpha: Option<String>,

    /// Comma-separated total Renyi budgets epsilon (split across levels).
    #[arg(long)]
    pub epsilon: Option<String>,

    /// Renyi order of the privacy budgets.
    #[arg(long = "renyi-alpha")]
    pub renyi_alpha: Option<String>,

    /// Single mechanism (gaussian|laplace|identity); default sweeps all three.
    #[arg(long)]
    pub mechanism: Option<String>,

    /// Number of quantizer bins (candidate score levels).
    #[arg(long)]
    pub bins: Option<String>,

    /// Synthetic calibration sample size.
    #[arg(long)]
    pub n: Option<String>,

    /// Repetitions averaged per combination.
    #[arg(long)]
    pub reps: Option<String>,

    /// Lower edge of the score range.
    #[arg(long = "score-lo")]
    pub score_lo: Option<String>,

    /// Upper edge of the score range.
    #[arg(long = "score-hi")]
    pub score_hi: Option<String>,

    /// Decay of the synthetic score mixture across bins (larger = more
    /// mass at low scores).
    #[arg(long = "score-decay")]
    pub score_decay: Option<String>,

    /// CSV with a `score` column of calibration scores; replaces the
    /// generator (coverage is then reported as N/A).
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// CSV with columns `id,label,score`; adds per-candidate membership
    /// output at the first epsilon.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
}

pub fn run(args: &ConformalArgs) -> Result<ExitCode> {
    let out_dir = args.common.out_dir()?.to_path_buf();
    let mut resolver = Resolver::new(args.common.config.as_deref())?;
    let alpha: f64 = resolver.value("alpha", &args.alpha, "0.1")?;
    let epsilons: FloatList = resolver.value("epsilon", &args.epsilon, "0.1,0.25,0.5,1,2")?;
    let renyi_alpha: f64 = resolver.value("renyi-alpha", &args.renyi_alpha, "2.0")?;
    let bins: usize = resolver.value("bins", &args.bins, "50")?;
    let n: usize = resolver.value("n", &args.n, "1000")?;
    let reps: u64 = resolver.value("reps", &args.reps, "20")?;
    let score_lo: f64 = resolver.value("score-lo", &args.score_lo, "1.0")?;
    let score_hi: f64 = resolver.value("score-hi", &args.score_hi, "100.0")?;
    let score_decay: f64 = resolver.value("score-decay", &args.score_decay, "25.0")?;
    let mechanism: Option<String> = resolver.optional("mechanism", &args.mechanism)?;
    let data_path = resolver.path("data", &args.data);
    let candidates_path = resolver.path("candidates", &args.candidates);
    let resolved = resolver.finish()?;

    let mechanisms: Vec<MechanismKind> = match &mechanism {
        Some(name) => vec![MechanismKind::from_str(name).map_err(anyhow::Error::msg)?],
        None => vec![
            MechanismKind::Identity,
            MechanismKind::Gaussian,
            MechanismKind::Laplace,
        ],
    };

    let quantizer = ScoreQuantizer::new(bins, score_lo, score_hi)?;
    let centers = quantizer.centers();
    let weights = crate::data::decayed_weights(bins, score_decay);
    let ingested: Option<Vec<f64>> = match &data_path {
        Some(path) => Some(read_column(path, "score")?),
        None => None,
    };
    let seed = args.common.seed;

    write_manifest(&out_dir, "conformal", seed, &resolved)?;
    let csv_path = out_dir.join("conformal.csv");
    let mut csv = CsvOut::create(
        &csv_path,
        &[
            ("epsilon", "total Renyi budget, split evenly across levels"),
            ("mechanism", "noise mechanism (identity is the non-private reference)"),
            ("renyi_alpha", "Renyi order of the budget"),
            ("alpha", "marginal miss probability"),
            ("defined", "whether the mechanism calibrates at the per-level budget"),
            ("avg_set_size", "mean prediction-set size over repetitions, or N/A"),
            ("coverage", "fraction of repetitions covering a fresh test score (N/A for ingested data)"),
        ],
    )?;

    for (e_index, &epsilon) in epsilons.0.iter().enumerate() {
        let budget = RenyiBudget::new(renyi_alpha, epsilon)?;
        for (m_index, &mech) in mechanisms.iter().enumerate() {
            let lane = (e_index * 4 + m_index) as u64;
            let mut defined = true;
            let mut sizes = 0.0;
            let mut covered = 0_u64;
            let mut coverage_known = ingested.is_none();
            for rep in 0..reps {
                let scores: Vec<f64> = match &ingested {
                    Some(rows) => rows.clone(),
                    None => {
                        let mut rng = substream(seed, COMMAND_CONFORMAL, lane, rep, UNIT_DATA);
                        crate::data::score_mixture(score_lo, score_hi, &weights, n, &mut rng)
                    }
                };
                let calib = CalibrationScores::from_raw(&quantizer, &scores)?;
                let mut noise_rng = substream(seed, COMMAND_CONFORMAL, lane, rep, UNIT_NOISE);
                let levels = match privatize_levels(&calib, &quantizer, budget, mech, &mut noise_rng)
                {
                    Ok(levels) => levels,
                    Err(Error::LaplaceUndefined { .. }) => {
                        // Definedness depends only on the configuration, not
                        // the repetition, so the whole combination is N/A.
                        defined = false;
                        break;
                    }
                    Err(err) => return Err(err.into()),
                };
                sizes += predict_set(&levels, &centers, alpha, false)?.len() as f64;
                if coverage_known {
                    let mut test_rng = substream(seed, COMMAND_CONFORMAL, lane, rep, UNIT_TEST);
                    let test =
                        crate::data::score_mixture(score_lo, score_hi, &weights, 1, &mut test_rng)[0];
                    if !predict_set(&levels, &[test], alpha, false)?.is_empty() {
                        covered += 1;
                    }
                }
            }
            if !defined {
                coverage_known = false;
            }
            let avg_size = if defined {
                fmt_f64(sizes / reps as f64)
            } else {
                NOT_AVAILABLE.into()
            };
            let coverage = if coverage_known {
                fmt_f64(covered as f64 / reps as f64)
            } else {
                NOT_AVAILABLE.into()
            };
            csv.row(&[
                fmt_f64(epsilon),
                mech.to_string(),
                fmt_f64(renyi_alpha),
                fmt_f64(alpha),
                defined.to_string(),
                avg_size,
                coverage,
            ])?;
        }
    }
    let csv_path = csv.finish()?;

    if let Some(path) = &candidates_path {
        let single = match &mechanism {
            Some(name) => MechanismKind::from_str(name).map_err(anyhow::Error::msg)?,
            None => MechanismKind::Gaussian,
        };
        // The candidate release is an explicit request for this mechanism at
        // the first epsilon; an undefined calibration here is exit code 3.
        release_candidates(
            path,
            &out_dir,
            seed,
            &quantizer,
            &weights,
            ingested.as_deref(),
            n,
            RenyiBudget::new(renyi_alpha, epsilons.0[0])?,
            single,
            alpha,
        )?;
    }

    render_chart(&csv_path, &out_dir.join("conformal.svg"))?;
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn release_candidates(
    candidates_path: &std::path::Path,
    out_dir: &std::path::Path,
    seed: u64,
    quantizer: &ScoreQuantizer,
    weights: &[f64],
    ingested: Option<&[f64]>,
    n: usize,
    budget: RenyiBudget,
    mechanism: MechanismKind,
    alpha: f64,
) -> Result<()> {
    let candidates = read_candidates(candidates_path)?;
    let scores: Vec<f64> = match ingested {
        Some(rows) => rows.to_vec(),
        None => {
            let (lo, hi) = quantizer.range();
            let mut rng = substream(seed, COMMAND_CONFORMAL, CANDIDATE_LANE, 0, UNIT_DATA);
            crate::data::score_mixture(lo, hi, weights, n, &mut rng)
        }
    };
    let calib = CalibrationScores::from_raw(quantizer, &scores)?;
    let mut noise_rng = substream(seed, COMMAND_CONFORMAL, CANDIDATE_LANE, 0, UNIT_NOISE);
    let levels = privatize_levels(&calib, quantizer, budget, mechanism, &mut noise_rng)?;
    let candidate_scores: Vec<f64> = candidates.iter().map(|c| c.score).collect();
    let set = predict_set(&levels, &candidate_scores, alpha, false)?;
    let included: std::collections::BTreeSet<usize> = set.included().iter().copied().collect();

    let mut csv = CsvOut::create(
        &out_dir.join("predictions.csv"),
        &[
            ("id", "candidate identifier, copied from the input"),
            ("label", "candidate label, copied from the input"),
            ("included", "true when the candidate is in the private prediction set"),
        ],
    )?;
    for (index, candidate) in candidates.iter().enumerate() {
        csv.row(&[
            candidate.id.clone(),
            candidate.label.clone(),
            included.contains(&index).to_string(),
        ])?;
    }
    csv.finish()?;
    Ok(())
}

/// Average set size versus epsilon, one series per mechanism, parsed back
/// from the emitted CSV.
fn render_chart(csv_path: &std::path::Path, svg_path: &std::path::Path) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(csv_path)
        .with_context(|| format!("cannot read {}", csv_path.display()))?;
    let headers = reader.headers()?.clone();
    let at = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (eps_at, mech_at, size_at) = (at("epsilon"), at("mechanism"), at("avg_set_size"));
    let mut series: Vec<Series> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let size = record.get(size_at).unwrap_or("");
        if size == NOT_AVAILABLE {
            continue;
        }
        let epsilon: f64 = record.get(eps_at).unwrap_or("").parse()?;
        let size: f64 = size.parse()?;
        let label = record.get(mech_at).unwrap_or("").to_string();
        match series.iter_mut().find(|s| s.label == label) {
            Some(s) => s.points.push((epsilon, size)),
            None => series.push(Series {
                label,
                points: vec![(epsilon, size)],
            }),
        }
    }
    line_chart(
        "prediction-set size vs epsilon",
        "epsilon",
        "average set size",
        &series,
        svg_path,
    )
}
