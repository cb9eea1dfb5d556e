//! Study orchestration: slicing, chains, interpolation, coverage and the
//! output bundle.
//!
//! Layout of the output directory:
//!
//! ```text
//! manifest.json            seed, config hash, effective gamma, per-run bookkeeping
//! timing.json              wall time per run and per iteration (not reproducible)
//! config.toml              the effective configuration
//! coverage.csv             site, block, level, covered, evaluated, coverage
//! coverage_weekly.csv      site, week, level, ... (all studies but `single`)
//! predictive_<site>.csv    time, median and interval bounds per level
//! runs/b<k>-c<j>/          draws.jsonl, trace.csv, acf.csv, pacf.csv,
//!                          posterior_summary.csv, diagnostics.json
//! PARTIAL                  written instead of a complete bundle on failure
//! ```

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stdlm_core::gibbs::{run_chain_with, ChainMode, PosteriorDraws};
use stdlm_core::interpolate::{
    coverage, Interpolator, PredictiveSeries, SeriesSummary, UngaugedSite,
};
use stdlm_core::model::{
    scale_gamma_for_span, Gamma, ModelConfig, ObservationPanel, RangeSchedule, StationSet,
    HOURS_PER_WEEK,
};
use stdlm_core::DlmError;

use crate::config::{ConfigError, RunConfig, Study};
use crate::diagnostics::{diagnostics, traces, Diagnostics, PARAMETERS, QUANTILE_PROBS};
use crate::ingest::{ingest, IngestError};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] DlmError),
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl StudyError {
    /// 2 configuration, 3 ingestion, 4 numerical breakdown, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            StudyError::Config(_) => 2,
            StudyError::Ingest(_) => 3,
            StudyError::Model(e) => match e.root() {
                DlmError::NumericalBreakdown { .. } | DlmError::Contract(_) => 4,
                DlmError::ParameterDomain { .. }
                | DlmError::Configuration(_)
                | DlmError::EmptyReport(_) => 2,
                DlmError::AtIteration { .. } => 1,
            },
            StudyError::Io(_) => 1,
        }
    }
}

/// Which files a study writes besides the manifest, coverage and
/// predictive summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outputs {
    pub chains: bool,
}

impl Outputs {
    pub const ALL: Outputs = Outputs { chains: true };
    pub const PREDICTION: Outputs = Outputs { chains: false };
}

/// Consecutive blocks of `weeks` weeks covering `0..n_times` exactly.
pub fn week_blocks(n_times: usize, weeks: usize) -> Vec<Range<usize>> {
    let len = HOURS_PER_WEEK * weeks.max(1);
    (0..n_times.div_ceil(len))
        .map(|k| k * len..((k + 1) * len).min(n_times))
        .collect()
}

/// A prediction site and, for held-out stations, its row in the ingested
/// panel.
#[derive(Debug, Clone)]
pub struct Target {
    pub site: UngaugedSite,
    pub truth_row: Option<usize>,
}

/// Everything a study needs after ingestion.
#[derive(Debug, Clone)]
pub struct Plan {
    pub stations: StationSet,
    pub panel: ObservationPanel,
    /// Panel with the held-out rows, for truth.
    pub full_panel: ObservationPanel,
    pub targets: Vec<Target>,
    pub gamma: Gamma,
    pub blocks: Vec<Range<usize>>,
    pub mode: ChainMode,
    pub n_weeks: usize,
    pub model: ModelConfig,
}

fn invalid(msg: String) -> StudyError {
    StudyError::Config(ConfigError::Invalid(msg))
}

pub fn plan(cfg: &RunConfig) -> Result<Plan, StudyError> {
    cfg.validate()?;
    let data = ingest(&cfg.stations, &cfg.observations)?;
    let all = &data.stations;
    let mut held: Vec<usize> = Vec::new();
    for u in &cfg.ungauged {
        match (u.coord, all.index_of(&u.id)) {
            (None, Some(i)) => held.push(i),
            (None, None) => {
                return Err(invalid(format!(
                    "ungauged site `{}` has no coordinate and is not a station",
                    u.id
                )))
            }
            (Some(_), Some(_)) => {
                return Err(invalid(format!(
                    "ungauged site `{}` reuses a station id; drop its coordinate to hold the station out",
                    u.id
                )))
            }
            (Some(_), None) => {}
        }
    }
    let fit: Vec<usize> = (0..all.len()).filter(|i| !held.contains(i)).collect();
    if fit.is_empty() {
        return Err(invalid(
            "every station is held out; nothing left to fit".into(),
        ));
    }
    let stations = all.subset(&fit)?;
    let panel = data.panel.select_sites(&fit)?;
    let targets = cfg
        .ungauged
        .iter()
        .map(|u| {
            let (coord, truth_row) = match u.coord {
                Some(c) => (c, None),
                None => {
                    let i = all.index_of(&u.id).expect("checked above");
                    (all.sites()[i].coord, Some(i))
                }
            };
            Ok(Target {
                site: UngaugedSite::new(u.id.clone(), coord, &stations)?,
                truth_row,
            })
        })
        .collect::<Result<Vec<_>, DlmError>>()?;

    let n_times = panel.n_times();
    let n_weeks = n_times.div_ceil(HOURS_PER_WEEK);
    let fixed = |lambdas: &Vec<f64>| -> Result<ChainMode, StudyError> {
        if lambdas.len() != n_weeks {
            return Err(invalid(format!(
                "{} fixed lambdas for a panel of {n_weeks} weeks",
                lambdas.len()
            )));
        }
        Ok(ChainMode::FixedLambda(RangeSchedule::Weekly(
            lambdas.clone(),
        )))
    };
    let whole = vec![0..n_times];
    let (gamma, blocks, mode) = match &cfg.study {
        Study::Single | Study::FullSpan => (cfg.model.gamma, whole, ChainMode::FullMh),
        Study::Weekly { weeks } => (
            cfg.model.gamma,
            week_blocks(n_times, *weeks),
            ChainMode::FullMh,
        ),
        Study::FixedLambda { lambdas } => (cfg.model.gamma, whole, fixed(lambdas)?),
        Study::TauScaled { t_weeks, lambdas } => {
            let span = t_weeks.unwrap_or(n_weeks as u32);
            let mode = match lambdas {
                Some(ls) => fixed(ls)?,
                None => ChainMode::FullMh,
            };
            (scale_gamma_for_span(cfg.model.gamma, span), whole, mode)
        }
    };
    let model = cfg.model.to_model_config(&stations, gamma, cfg.thinning)?;
    model.validate(stations.len())?;
    Ok(Plan {
        model,
        stations,
        panel,
        full_panel: data.panel,
        targets,
        gamma,
        blocks,
        mode,
        n_weeks,
    })
}

/// Output of one chain on one block.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub block: usize,
    pub chain: usize,
    pub draws: PosteriorDraws,
    pub series: Vec<PredictiveSeries>,
    pub seconds: f64,
}

/// Interpolator streams sit above every chain stream.
const INTERPOLATOR_STREAM_BASE: u64 = 1 << 32;

pub fn run_plan(cfg: &RunConfig, plan: &Plan) -> Vec<Result<RunResult, DlmError>> {
    let model = &plan.model;
    let jobs: Vec<(usize, usize)> = (0..plan.blocks.len())
        .flat_map(|b| (0..cfg.chains).map(move |c| (b, c)))
        .collect();
    jobs.par_iter()
        .map(|&(b, c)| {
            let range = plan.blocks[b].clone();
            let panel = plan.panel.slice_columns(range)?;
            let mut interp = Interpolator::new(
                plan.targets.iter().map(|t| t.site.clone()).collect(),
                model.gamma,
                model.init.clone(),
                panel.t_index().to_vec(),
                model.seed,
                INTERPOLATOR_STREAM_BASE + c as u64,
                cfg.thinning,
            )?;
            let start = Instant::now();
            let draws = run_chain_with(
                &panel,
                &plan.stations,
                model,
                &plan.mode,
                c as u64,
                &mut interp,
            )?;
            log::info!("block {} chain {} done", b + 1, c + 1);
            Ok(RunResult {
                block: b,
                chain: c,
                draws,
                series: interp.into_series(),
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub block: usize,
    pub chain: usize,
    /// First and last hour stamp of the block.
    pub hours: [i64; 2],
    pub iterations: usize,
    pub burn_in: usize,
    pub retained: usize,
    pub accept_count: usize,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub study: String,
    pub seed: u64,
    pub config_hash: String,
    pub gamma: Gamma,
    pub gauged_sites: Vec<String>,
    pub ungauged_sites: Vec<String>,
    pub n_hours: usize,
    pub n_weeks: usize,
    pub levels: Vec<f64>,
    pub runs: Vec<RunEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub block: usize,
    pub chain: usize,
    pub seconds: f64,
    pub seconds_per_iteration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub site: String,
    pub block: usize,
    pub level: f64,
    pub covered: usize,
    pub evaluated: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekRow {
    pub site: String,
    /// Week of the whole panel, from 1.
    pub week: usize,
    pub level: f64,
    pub covered: usize,
    pub evaluated: usize,
    pub coverage: f64,
}

/// In-memory view of a finished study.
#[derive(Debug, Clone)]
pub struct StudyReport {
    pub manifest: Manifest,
    pub coverage: Vec<CoverageRow>,
    pub weekly: Vec<WeekRow>,
    /// Per site, draws pooled over chains and concatenated over blocks.
    pub series: Vec<PredictiveSeries>,
    pub diagnostics: Vec<Diagnostics>,
    pub runs: Vec<RunResult>,
}

fn write_csv<S: Serialize>(path: &Path, rows: &[S]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r).map_err(std::io::Error::other)?;
    }
    w.flush()
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

fn level_tag(level: f64) -> String {
    format!("{}", level * 100.0)
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Pools chains within each block, then joins blocks along time.
fn pooled_series(plan: &Plan, runs: &[RunResult]) -> Vec<PredictiveSeries> {
    plan.targets
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mut t_index = Vec::new();
            let mut blocks: Vec<Vec<Vec<f64>>> = Vec::new();
            for b in 0..plan.blocks.len() {
                let block_runs: Vec<&RunResult> = runs.iter().filter(|r| r.block == b).collect();
                t_index.extend_from_slice(&block_runs[0].series[k].t_index);
                blocks.push(
                    block_runs
                        .iter()
                        .flat_map(|r| r.series[k].draws.clone())
                        .collect(),
                );
            }
            // blocks may keep different draw counts; keep the common number
            let keep = blocks.iter().map(Vec::len).min().unwrap_or(0);
            let draws = (0..keep)
                .map(|d| blocks.iter().flat_map(|b| b[d].iter().copied()).collect())
                .collect();
            PredictiveSeries {
                site: t.site.id.clone(),
                t_index,
                draws,
            }
        })
        .collect()
}

fn write_run(dir: &Path, run: &RunResult, diag: &Diagnostics) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut f = std::io::BufWriter::new(fs::File::create(dir.join("draws.jsonl"))?);
    for r in &run.draws.records {
        serde_json::to_writer(&mut f, r).map_err(std::io::Error::other)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;

    let tr = traces(&run.draws.records);
    let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
    w.write_record(["iteration", "lambda", "sigma2", "a1", "a2", "accepted"])?;
    for (k, r) in run.draws.records.iter().enumerate() {
        w.write_record([
            r.iteration.to_string(),
            tr[0][k].to_string(),
            tr[1][k].to_string(),
            tr[2][k].to_string(),
            tr[3][k].to_string(),
            (r.accepted as u8).to_string(),
        ])?;
    }
    w.flush()?;

    for (file, first, get) in [
        (
            "acf.csv",
            0usize,
            (|p: &crate::diagnostics::ParameterDiagnostics| p.acf.clone()) as fn(&_) -> Vec<f64>,
        ),
        ("pacf.csv", 1, |p| p.pacf.clone()),
    ] {
        let mut w = csv::Writer::from_path(dir.join(file))?;
        let mut header = vec!["lag".to_string()];
        header.extend(PARAMETERS.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        let cols: Vec<Vec<f64>> = diag.parameters.iter().map(get).collect();
        for (h, _) in cols[0].iter().enumerate() {
            let mut row = vec![(h + first).to_string()];
            row.extend(cols.iter().map(|c| c[h].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
    }

    let mut w = csv::Writer::from_path(dir.join("posterior_summary.csv"))?;
    w.write_record(["parameter", "mean", "q2.5", "q50", "q97.5"])?;
    for p in &diag.parameters {
        w.write_record([
            p.name.clone(),
            p.mean.to_string(),
            p.quantiles[0].to_string(),
            p.quantiles[1].to_string(),
            p.quantiles[2].to_string(),
        ])?;
    }
    w.flush()?;
    debug_assert_eq!(QUANTILE_PROBS, [0.025, 0.5, 0.975]);
    write_json(&dir.join("diagnostics.json"), diag)
}

fn write_predictive(
    path: &Path,
    s: &PredictiveSeries,
    summary: &SeriesSummary,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string(), "median".to_string()];
    for b in &summary.bands {
        header.push(format!("lower_{}", level_tag(b.level)));
        header.push(format!("upper_{}", level_tag(b.level)));
    }
    w.write_record(&header)?;
    for (c, t) in s.t_index.iter().enumerate() {
        let mut row = vec![t.to_string(), summary.median[c].to_string()];
        for b in &summary.bands {
            row.push(b.lower[c].to_string());
            row.push(b.upper[c].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()
}

fn write_partial(out: &Path, err: &dyn std::fmt::Display) {
    let _ = fs::create_dir_all(out);
    let _ = fs::write(out.join("PARTIAL"), format!("study aborted: {err}\n"));
}

/// Runs the configured study and writes its bundle to `cfg.output_dir`.
pub fn run_study(cfg: &RunConfig, outputs: Outputs) -> Result<StudyReport, StudyError> {
    let out = cfg.output_dir.clone();
    let result = run_study_inner(cfg, outputs, &out);
    if let Err(e) = &result {
        write_partial(&out, e);
    }
    result
}

fn run_study_inner(
    cfg: &RunConfig,
    outputs: Outputs,
    out: &Path,
) -> Result<StudyReport, StudyError> {
    let plan = plan(cfg)?;
    fs::create_dir_all(out)?;
    let _ = fs::remove_file(out.join("PARTIAL"));
    let results = run_plan(cfg, &plan);

    let mut runs = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(r) => runs.push(r),
            Err(e) if first_err.is_none() => first_err = Some(e),
            Err(_) => {}
        }
    }
    let mut diags = Vec::with_capacity(runs.len());
    for r in &runs {
        let d = diagnostics(&r.draws, cfg.max_lag)?;
        if outputs.chains {
            write_run(&run_dir(out, r.block, r.chain), r, &d)?;
        }
        diags.push(d);
    }
    if let Some(e) = first_err {
        return Err(e.into());
    }

    let manifest = Manifest {
        status: "complete".into(),
        study: cfg.study.name().into(),
        seed: cfg.model.seed,
        config_hash: cfg.semantic_hash(),
        gamma: plan.gamma,
        gauged_sites: plan.stations.sites().iter().map(|s| s.id.clone()).collect(),
        ungauged_sites: plan.targets.iter().map(|t| t.site.id.clone()).collect(),
        n_hours: plan.panel.n_times(),
        n_weeks: plan.n_weeks,
        levels: cfg.levels.clone(),
        runs: runs
            .iter()
            .map(|r| {
                let range = &plan.blocks[r.block];
                let t = plan.panel.t_index();
                RunEntry {
                    block: r.block + 1,
                    chain: r.chain + 1,
                    hours: [t[range.start], t[range.end - 1]],
                    iterations: r.draws.iterations,
                    burn_in: r.draws.burn_in,
                    retained: r.draws.records.len(),
                    accept_count: r.draws.accept_count,
                    acceptance_rate: r.draws.acceptance_rate,
                }
            })
            .collect(),
    };
    let timing: Vec<TimingEntry> = runs
        .iter()
        .map(|r| TimingEntry {
            block: r.block + 1,
            chain: r.chain + 1,
            seconds: r.seconds,
            seconds_per_iteration: r.seconds / r.draws.iterations as f64,
        })
        .collect();

    // coverage per block, pooled over chains
    let mut cov_rows = Vec::new();
    let mut week_rows = Vec::new();
    for (k, target) in plan.targets.iter().enumerate() {
        let Some(row) = target.truth_row else {
            continue;
        };
        for (b, range) in plan.blocks.iter().enumerate() {
            let draws: Vec<Vec<f64>> = runs
                .iter()
                .filter(|r| r.block == b)
                .flat_map(|r| r.series[k].draws.clone())
                .collect();
            let series = PredictiveSeries {
                site: target.site.id.clone(),
                t_index: plan.panel.t_index()[range.clone()].to_vec(),
                draws,
            };
            let truth: Vec<f64> = range
                .clone()
                .map(|c| plan.full_panel.values()[(row, c)])
                .collect();
            let observed: Vec<bool> = range
                .clone()
                .map(|c| plan.full_panel.is_observed(row, c))
                .collect();
            let report = coverage(&series, &truth, &observed, &cfg.levels)?;
            for l in report.levels {
                cov_rows.push(CoverageRow {
                    site: series.site.clone(),
                    block: b + 1,
                    level: l.level,
                    covered: l.covered,
                    evaluated: l.evaluated,
                    coverage: l.coverage,
                });
            }
            let week_offset = range.start / HOURS_PER_WEEK;
            for w in report.weekly {
                week_rows.push(WeekRow {
                    site: series.site.clone(),
                    week: week_offset + w.week,
                    level: w.level,
                    covered: w.covered,
                    evaluated: w.evaluated,
                    coverage: w.coverage,
                });
            }
        }
    }

    let series = pooled_series(&plan, &runs);
    for s in &series {
        if s.draws.is_empty() {
            continue;
        }
        let summary = s.summarize(&cfg.levels)?;
        write_predictive(
            &out.join(format!("predictive_{}.csv", file_safe(&s.site))),
            s,
            &summary,
        )?;
    }

    write_csv(&out.join("coverage.csv"), &cov_rows)?;
    if !matches!(cfg.study, Study::Single) {
        write_csv(&out.join("coverage_weekly.csv"), &week_rows)?;
    }
    let mut shown = cfg.clone();
    shown.output_dir = PathBuf::from(".");
    fs::write(out.join("config.toml"), shown.to_toml())?;
    write_json(&out.join("timing.json"), &timing)?;
    write_json(&out.join("manifest.json"), &manifest)?;

    Ok(StudyReport {
        manifest,
        coverage: cov_rows,
        weekly: week_rows,
        series,
        diagnostics: diags,
        runs,
    })
}

pub fn run_dir(out: &Path, block: usize, chain: usize) -> PathBuf {
    out.join("runs")
        .join(format!("b{:02}-c{}", block + 1, chain + 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn week_blocks_tile_the_panel() {
        for (t, k) in [(336, 1), (400, 1), (400, 2), (100, 1), (168 * 17, 3)] {
            let b = week_blocks(t, k);
            assert_eq!(b.first().unwrap().start, 0);
            assert_eq!(b.last().unwrap().end, t);
            assert!(b.windows(2).all(|w| w[0].end == w[1].start));
            assert_eq!(b.iter().map(|r| r.len()).sum::<usize>(), t);
        }
        assert_eq!(week_blocks(336, 1).len(), 2);
    }

    #[test]
    fn exit_codes_follow_error_kinds() {
        assert_eq!(
            StudyError::Config(ConfigError::Invalid("x".into())).exit_code(),
            2
        );
        let ing = IngestError::File {
            file: "o".into(),
            message: "no data rows".into(),
        };
        assert_eq!(StudyError::Ingest(ing).exit_code(), 3);
        let num = DlmError::NumericalBreakdown {
            step: 3,
            context: "Q".into(),
        };
        let wrapped = DlmError::AtIteration {
            iteration: 7,
            source: Box::new(num),
        };
        assert_eq!(StudyError::Model(wrapped).exit_code(), 4);
    }
}
