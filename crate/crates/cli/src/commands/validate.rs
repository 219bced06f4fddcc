//! `evdp validate`: the full property-check suite as a machine-readable
//! report.
//!
//! Runs every registered library check (privacy accounting, mechanism
//! calibration, e-value algebra, betting statistics, confidence sets,
//! monitoring, conformal prediction) plus three harness-level checks:
//! byte-determinism of a replayed run, CSV/SVG self-description (documented
//! columns, chart reproducible from the CSV alone), and completeness of the
//! check registry itself. Results land in `validation.csv`; any failure is
//! printed and the command exits 1.

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Args;

use evdp_core::validation::{module_check_counts, run_all, CheckConfig, CheckReport, CORE_CHECK_COUNT};

use crate::commands::ci::CiArgs;
use crate::commands::{write_manifest, CommonArgs};
use crate::config::Resolver;
use crate::csvio::CsvOut;

/// Total report rows: every registered library check plus the harness checks.
pub const TOTAL_CHECKS: usize = CORE_CHECK_COUNT + 3;

#[derive(Args, Debug, Clone)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Negative control: run the validity checks against deliberately
    /// unbiased noise, which must make them fail.
    #[arg(long = "inject-zero-bias", hide = true, default_value_t = false)]
    pub inject_zero_bias: bool,
}

pub fn run(args: &ValidateArgs) -> Result<ExitCode> {
    let out_dir = args.common.out_dir()?.to_path_buf();
    let resolver = Resolver::new(args.common.config.as_deref())?;
    let resolved = resolver.finish()?;
    let seed = args.common.seed;

    let config = CheckConfig {
        seed,
        inject_zero_bias: args.inject_zero_bias,
    };
    let mut reports = run_all(&config);
    reports.push(replay_determinism_check(seed));
    reports.push(output_self_description_check(seed));
    reports.push(registry_completeness_check(&reports));
    assert_eq!(reports.len(), TOTAL_CHECKS, "harness check list drifted");

    write_manifest(&out_dir, "validate", seed, &resolved)?;
    let mut csv = CsvOut::create(
        &out_dir.join("validation.csv"),
        &[
            ("module", "library or harness module owning the check"),
            ("check", "property-check name"),
            ("passed", "true when the property held"),
            ("observed", "measured values backing the verdict"),
        ],
    )?;
    let mut failures = 0_usize;
    for report in &reports {
        csv.row(&[
            report.module.to_string(),
            report.name.to_string(),
            report.passed.to_string(),
            report.observed.clone(),
        ])?;
        if !report.passed {
            failures += 1;
            println!(
                "FAIL {}/{}: {}",
                report.module, report.name, report.observed
            );
        }
    }
    csv.finish()?;
    println!(
        "{} checks, {} passed, {} failed",
        reports.len(),
        reports.len() - failures,
        failures
    );
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn harness_report(name: &'static str, outcome: Result<(bool, String)>) -> CheckReport {
    let (passed, observed) = match outcome {
        Ok(pair) => pair,
        Err(err) => (false, format!("errored: {err:#}")),
    };
    CheckReport {
        module: "harness",
        name,
        passed,
        observed,
    }
}

/// Runs the same small confidence-set experiment twice at one seed and
/// demands byte-identical manifest, CSV, and chart.
fn replay_determinism_check(seed: u64) -> CheckReport {
    harness_report("byte-determinism", (|| {
        let mut outputs = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().context("cannot create temp dir")?;
            let args = small_ci_args(seed, dir.path());
            crate::commands::ci::run(&args)?;
            let bundle: Vec<Vec<u8>> = ["manifest.txt", "ci.csv", "ci.svg"]
                .iter()
                .map(|name| std::fs::read(dir.path().join(name)).map_err(anyhow::Error::from))
                .collect::<Result<_>>()?;
            outputs.push(bundle);
        }
        let equal = outputs[0] == outputs[1];
        Ok((
            equal,
            if equal {
                "manifest.txt, ci.csv, ci.svg byte-identical across replay".to_string()
            } else {
                "replay produced different bytes".to_string()
            },
        ))
    })())
}

/// Checks that the emitted CSV documents every column in its `# columns:`
/// comment and that the chart is reproducible from the CSV alone.
fn output_self_description_check(seed: u64) -> CheckReport {
    harness_report("csv-and-svg-self-description", (|| {
        let dir = tempfile::tempdir().context("cannot create temp dir")?;
        let args = small_ci_args(seed, dir.path());
        crate::commands::ci::run(&args)?;
        let csv_path = dir.path().join("ci.csv");
        let text = std::fs::read_to_string(&csv_path)?;
        let mut lines = text.lines();
        let comment = lines.next().unwrap_or("");
        let header = lines.next().unwrap_or("");
        if !comment.starts_with("# columns: ") {
            return Ok((false, format!("first line is not a column comment: {comment:?}")));
        }
        let undocumented: Vec<&str> = header
            .split(',')
            .filter(|name| !comment.contains(&format!("{name}=")))
            .collect();
        if !undocumented.is_empty() {
            return Ok((false, format!("undocumented columns: {undocumented:?}")));
        }

        let command_svg = std::fs::read(dir.path().join("ci.svg"))?;
        let rerendered_path = dir.path().join("rerendered.svg");
        crate::commands::ci::render_chart(&csv_path, &rerendered_path)?;
        let rerendered = std::fs::read(&rerendered_path)?;
        let equal = command_svg == rerendered;
        Ok((
            equal,
            if equal {
                "all columns documented; chart re-rendered from CSV matches byte for byte"
                    .to_string()
            } else {
                "chart re-rendered from CSV differs from the command's chart".to_string()
            },
        ))
    })())
}

/// The registry must expose exactly the advertised number of uniquely named
/// checks, with the advertised per-module breakdown.
fn registry_completeness_check(reports_so_far: &[CheckReport]) -> CheckReport {
    harness_report("registry-completeness", (|| {
        let core: Vec<&CheckReport> = reports_so_far
            .iter()
            .filter(|r| r.module != "harness")
            .collect();
        if core.len() != CORE_CHECK_COUNT {
            return Ok((
                false,
                format!("{} core checks reported, registry advertises {CORE_CHECK_COUNT}", core.len()),
            ));
        }
        for (module, expected) in module_check_counts() {
            let seen = core.iter().filter(|r| r.module == module).count();
            if seen != expected {
                return Ok((
                    false,
                    format!("module {module}: {seen} checks reported, expected {expected}"),
                ));
            }
        }
        let mut names: Vec<(&str, &str)> = core.iter().map(|r| (r.module, r.name)).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != CORE_CHECK_COUNT {
            return Ok((false, "duplicate module/check names in the registry".to_string()));
        }
        Ok((
            true,
            format!(
                "{CORE_CHECK_COUNT} uniquely named library checks across {} modules, plus harness checks",
                module_check_counts().len()
            ),
        ))
    })())
}

fn small_ci_args(seed: u64, out: &std::path::Path) -> CiArgs {
    CiArgs {
        common: CommonArgs {
            seed,
            config: None,
            out: out.to_path_buf(),
        },
        alpha: None,
        epsilon: None,
        renyi_alpha: None,
        mechanism: None,
        n: Some("120,360".to_string()),
        cells: Some("10".to_string()),
        prevalence: None,
        data: None,
    }
}
