//! The two reproduction experiments: average total power versus the number
//! of users, and outage probability versus the per-user power cap.
//!
//! Comparisons are paired: one trial index maps to one channel realization,
//! reused by every algorithm (and, in the outage sweep, by every cap
//! value). Trials run in parallel but results are collected in trial-index
//! order, so output is identical to a serial run.

use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;

use ramp_core::baselines::{brcg_allocate, fixed_format_assign, BaselineResult};
use ramp_core::channel::generate_instance;
use ramp_core::format::FormatSet;
use ramp_core::mp::{run_mp, MpConfig, MpResult, UserStatus};
use ramp_core::problem::ProblemInstance;

use crate::config::{Algorithm, ExperimentConfig};
use crate::output::ResultRow;

/// Quantiles of the calibration power distribution used when no explicit
/// cap sweep is configured.
const AUTO_SWEEP_QUANTILES: [f64; 6] = [0.01, 0.2, 0.4, 0.6, 0.8, 0.99];

/// One algorithm's outcome on one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    /// Derived seed the realization was drawn from.
    pub seed: u64,
    pub n: usize,
    pub algorithm: Algorithm,
    /// Total transmitted power of the returned allocation.
    pub total_power: f64,
    /// Per-user outage flags; an empty-outage record is a complete run.
    pub outage: Vec<bool>,
    pub wall_time_s: f64,
}

impl TrialRecord {
    pub fn complete(&self) -> bool {
        !self.outage.iter().any(|&o| o)
    }
}

/// Per-trial records of every algorithm for one (N, P) sweep point.
#[derive(Debug, Clone)]
pub struct PowerCell {
    pub n: usize,
    pub p: usize,
    pub records: BTreeMap<Algorithm, Vec<TrialRecord>>,
}

impl PowerCell {
    /// Total power per trial, `None` where the algorithm left a user
    /// unserved.
    pub fn totals(&self, algorithm: Algorithm) -> Vec<Option<f64>> {
        self.records[&algorithm]
            .iter()
            .map(|r| r.complete().then_some(r.total_power))
            .collect()
    }
}

/// Per-trial outage flags for one (N, P_max) sweep point.
#[derive(Debug, Clone)]
pub struct OutageCell {
    pub n: usize,
    pub p: usize,
    pub p_max: f64,
    /// Per algorithm: whether each trial had at least one user in outage.
    pub flags: BTreeMap<Algorithm, Vec<bool>>,
}

impl OutageCell {
    pub fn probability(&self, algorithm: Algorithm) -> f64 {
        let flags = &self.flags[&algorithm];
        flags.iter().filter(|&&o| o).count() as f64 / flags.len() as f64
    }
}

/// splitmix64; the standard 64-bit mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one (N, trial) cell: every algorithm and every cap value see
/// the same realization.
fn trial_seed(base: u64, n: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(base ^ ((n as u64) << 32)) ^ trial as u64)
}

fn formats(cfg: &ExperimentConfig) -> Result<FormatSet> {
    FormatSet::new(cfg.num_formats, cfg.eta_step).map_err(|e| anyhow::anyhow!("{e}"))
}

fn mp_config(cfg: &ExperimentConfig, p: usize) -> MpConfig {
    MpConfig {
        inner_iterations: cfg.inner_iterations,
        max_outer_cycles: cfg.max_outer_cycles,
        candidate_size: p,
        normalization: cfg.normalization,
        damping: cfg.damping,
    }
}

/// Uncapped instance of one trial; demands are the equal split
/// `b_0 = W·η_avg / N`. Public so tools and tests can rebuild the exact
/// realization behind any (N, trial) pair.
pub fn trial_instance(cfg: &ExperimentConfig, n: usize, trial: usize) -> Result<ProblemInstance> {
    let demand = cfg.channel.bandwidth_hz * cfg.eta_avg / n as f64;
    generate_instance(
        &cfg.channel,
        n,
        formats(cfg)?,
        vec![demand; n],
        vec![f64::INFINITY; n],
        trial_seed(cfg.seed, n, trial),
    )
    .map_err(|e| anyhow::anyhow!("{e}"))
}

fn mp_record(cfg: &ExperimentConfig, instance: &ProblemInstance, p: usize, seed: u64) -> TrialRecord {
    let start = Instant::now();
    let result = run_mp(instance, &mp_config(cfg, p));
    TrialRecord {
        seed,
        n: instance.num_users(),
        algorithm: Algorithm::Mp,
        total_power: result.total_power,
        outage: result.status.iter().map(|&s| s == UserStatus::Outage).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

fn baseline_record(
    algorithm: Algorithm,
    result: &BaselineResult,
    n: usize,
    seed: u64,
    wall_time_s: f64,
) -> TrialRecord {
    TrialRecord {
        seed,
        n,
        algorithm,
        total_power: result.total_power(),
        outage: result.outage.clone(),
        wall_time_s,
    }
}

fn run_baseline(cfg: &ExperimentConfig, algorithm: Algorithm, instance: &ProblemInstance, seed: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let result = match algorithm {
        Algorithm::Brcg => brcg_allocate(instance),
        Algorithm::Lp => fixed_format_assign(instance, cfg.eta_avg)
            .map_err(|e| anyhow::anyhow!("{e}"))?,
        Algorithm::Mp => unreachable!("mp handled separately"),
    };
    Ok(baseline_record(algorithm, &result, instance.num_users(), seed, start.elapsed().as_secs_f64()))
}

/// Average-power experiment: uncapped runs of every selected algorithm on
/// paired realizations, one cell per (N, P) sweep entry.
pub fn run_power_cells(cfg: &ExperimentConfig) -> Result<Vec<PowerCell>> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for (&n, &p) in cfg.users.iter().zip(&cfg.candidates) {
        let per_trial: Vec<Vec<TrialRecord>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<Vec<TrialRecord>> {
                let seed = trial_seed(cfg.seed, n, trial);
                let instance = trial_instance(cfg, n, trial)?;
                let mut records = Vec::new();
                for &algorithm in &cfg.algorithms {
                    let record = match algorithm {
                        Algorithm::Mp => mp_record(cfg, &instance, p, seed),
                        other => run_baseline(cfg, other, &instance, seed)?,
                    };
                    records.push(record);
                }
                Ok(records)
            })
            .collect::<Result<_>>()?;

        let mut records: BTreeMap<Algorithm, Vec<TrialRecord>> = BTreeMap::new();
        for trial_records in per_trial {
            for record in trial_records {
                records.entry(record.algorithm).or_default().push(record);
            }
        }
        cells.push(PowerCell { n, p, records });
    }
    Ok(cells)
}

/// Mean and standard error over the completed trials of each algorithm.
pub fn power_rows(cfg: &ExperimentConfig, cells: &[PowerCell]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for cell in cells {
        for (&algorithm, records) in &cell.records {
            let totals: Vec<f64> = records
                .iter()
                .filter(|r| r.complete())
                .map(|r| r.total_power)
                .collect();
            let count = totals.len();
            let (mean, stderr) = mean_and_stderr(&totals);
            rows.push(ResultRow {
                experiment: "power".into(),
                n: cell.n,
                algorithm: algorithm.name().into(),
                param: cell.p as f64,
                value: mean,
                stderr,
                trials: count,
                seed: cfg.seed,
            });
        }
    }
    rows
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Per-user powers of an allocation, for calibration pooling.
fn per_user_powers(instance: &ProblemInstance, result: &MpResult) -> Vec<f64> {
    (0..instance.num_users())
        .map(|u| {
            (0..instance.num_subchannels())
                .map(|f| instance.power_required(u, f, result.allocation.get(u, f) as usize))
                .sum()
        })
        .collect()
}

/// The cap grid actually swept for each user count.
pub type SweepsByUsers = BTreeMap<usize, Vec<f64>>;

/// Outage experiment: for each (N, P) cell, baselines run once uncapped and
/// are flagged post hoc per swept cap, while message passing reruns with
/// the cap inside its user-node problems. Returns the cells and the sweep
/// used per N.
pub fn run_outage_cells(cfg: &ExperimentConfig) -> Result<(Vec<OutageCell>, SweepsByUsers)> {
    cfg.validate()?;
    let mut cells = Vec::new();
    let mut sweeps = BTreeMap::new();
    for (&n, &p) in cfg.users.iter().zip(&cfg.candidates) {
        // Calibration pass: uncapped runs give the baseline results (cap
        // independent) and the per-user power pool for the auto sweep.
        struct Calibration {
            instance: ProblemInstance,
            baseline: BTreeMap<Algorithm, (Vec<bool>, Vec<f64>)>,
            mp_powers: Vec<f64>,
        }
        let calibrations: Vec<Calibration> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| -> Result<Calibration> {
                let instance = trial_instance(cfg, n, trial)?;
                let mut baseline = BTreeMap::new();
                for &algorithm in &cfg.algorithms {
                    match algorithm {
                        Algorithm::Mp => {}
                        Algorithm::Brcg => {
                            let r = brcg_allocate(&instance);
                            baseline.insert(algorithm, (r.outage.clone(), r.per_user_power.clone()));
                        }
                        Algorithm::Lp => {
                            let r = fixed_format_assign(&instance, cfg.eta_avg)
                                .map_err(|e| anyhow::anyhow!("{e}"))?;
                            baseline.insert(algorithm, (r.outage.clone(), r.per_user_power.clone()));
                        }
                    }
                }
                let mp_powers = if cfg.algorithms.contains(&Algorithm::Mp) {
                    let result = run_mp(&instance, &mp_config(cfg, p));
                    per_user_powers(&instance, &result)
                } else {
                    Vec::new()
                };
                Ok(Calibration { instance, baseline, mp_powers })
            })
            .collect::<Result<_>>()?;

        let sweep = if cfg.pmax_sweep.is_empty() {
            // Outage binds on the worst user of a trial, so the grid spans
            // quantiles of the per-trial maximum per-user power (pooled
            // over algorithms): the outage curves transition across it.
            let mut pool: Vec<f64> = calibrations
                .iter()
                .flat_map(|c| {
                    let mp_max = c.mp_powers.iter().copied().fold(0.0f64, f64::max);
                    c.baseline
                        .values()
                        .map(|(_, powers)| powers.iter().copied().fold(0.0f64, f64::max))
                        .chain((mp_max > 0.0).then_some(mp_max))
                        .collect::<Vec<f64>>()
                })
                .filter(|p| p.is_finite() && *p > 0.0)
                .collect();
            pool.sort_by(|a, b| a.partial_cmp(b).expect("powers are finite"));
            anyhow::ensure!(!pool.is_empty(), "calibration produced no positive powers");
            let mut sweep: Vec<f64> = AUTO_SWEEP_QUANTILES
                .iter()
                .map(|&q| percentile(&pool, q))
                .collect();
            sweep.dedup();
            sweep
        } else {
            let mut sweep = cfg.pmax_sweep.clone();
            sweep.sort_by(|a, b| a.partial_cmp(b).expect("caps are finite"));
            sweep
        };
        sweeps.insert(n, sweep.clone());

        for &p_max in &sweep {
            let mp_flags: Vec<bool> = if cfg.algorithms.contains(&Algorithm::Mp) {
                calibrations
                    .par_iter()
                    .map(|c| {
                        let capped = c
                            .instance
                            .with_power_caps(vec![p_max; n])
                            .expect("cap replacement preserves validity");
                        run_mp(&capped, &mp_config(cfg, p)).any_outage()
                    })
                    .collect()
            } else {
                Vec::new()
            };

            let mut flags: BTreeMap<Algorithm, Vec<bool>> = BTreeMap::new();
            for &algorithm in &cfg.algorithms {
                let per_trial = match algorithm {
                    Algorithm::Mp => mp_flags.clone(),
                    other => calibrations
                        .iter()
                        .map(|c| {
                            let (rate_outage, powers) = &c.baseline[&other];
                            rate_outage.iter().any(|&o| o)
                                || powers.iter().any(|&pw| pw > p_max)
                        })
                        .collect(),
                };
                flags.insert(algorithm, per_trial);
            }
            cells.push(OutageCell { n, p, p_max, flags });
        }
    }
    Ok((cells, sweeps))
}

/// Outage probability rows with binomial standard errors.
pub fn outage_rows(cfg: &ExperimentConfig, cells: &[OutageCell]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for cell in cells {
        for (&algorithm, flags) in &cell.flags {
            let trials = flags.len();
            let p = cell.probability(algorithm);
            let stderr = if trials > 0 { (p * (1.0 - p) / trials as f64).sqrt() } else { 0.0 };
            rows.push(ResultRow {
                experiment: "outage".into(),
                n: cell.n,
                algorithm: algorithm.name().into(),
                param: cell.p_max,
                value: p,
                stderr,
                trials,
                seed: cfg.seed,
            });
        }
    }
    rows
}

/// Full power experiment: cells plus aggregate rows.
pub fn run_power_experiment(cfg: &ExperimentConfig) -> Result<(Vec<PowerCell>, Vec<ResultRow>)> {
    let cells = run_power_cells(cfg)?;
    let rows = power_rows(cfg, &cells);
    Ok((cells, rows))
}

/// Full outage experiment: cells plus aggregate rows.
pub fn run_outage_experiment(cfg: &ExperimentConfig) -> Result<(Vec<OutageCell>, Vec<ResultRow>)> {
    let (cells, _) = run_outage_cells(cfg)?;
    let rows = outage_rows(cfg, &cells);
    Ok((cells, rows))
}

/// Runs one traced MP trial (trial 0 of the first configured N), writing
/// newline-delimited JSON events to `path`. `p_max` caps every user when
/// finite.
pub fn trace_one_trial(cfg: &ExperimentConfig, p_max: f64, path: &std::path::Path) -> Result<()> {
    use std::io::Write;

    let (&n, &p) = cfg
        .users
        .iter()
        .zip(&cfg.candidates)
        .next()
        .context("empty user sweep")?;
    let mut instance = trial_instance(cfg, n, 0)?;
    if p_max.is_finite() {
        instance = instance
            .with_power_caps(vec![p_max; n])
            .map_err(|e| anyhow::anyhow!("{e}"))?;
    }

    struct JsonlSink<W: Write> {
        writer: W,
        error: Option<std::io::Error>,
    }
    impl<W: Write> ramp_core::mp::TraceSink for JsonlSink<W> {
        fn on_message(&mut self, event: &ramp_core::mp::TraceEvent<'_>) {
            if self.error.is_some() {
                return;
            }
            let values: Vec<Option<f64>> = event
                .values
                .iter()
                .map(|c| c.is_finite().then(|| c.raw()))
                .collect();
            let record = serde_json::json!({
                "cycle": event.outer_cycle,
                "round": event.inner_round,
                "user": event.user,
                "subchannel": event.subchannel,
                "direction": match event.direction {
                    ramp_core::mp::MessageDirection::WNodeToVariable => "w_to_v",
                    ramp_core::mp::MessageDirection::CNodeToVariable => "c_to_v",
                },
                "values": values,
            });
            if let Err(e) = writeln!(self.writer, "{record}") {
                self.error = Some(e);
            }
        }
    }

    let file = std::fs::File::create(path)
        .with_context(|| format!("creating trace file {}", path.display()))?;
    let mut sink = JsonlSink { writer: std::io::BufWriter::new(file), error: None };
    ramp_core::mp::run_mp_traced(&instance, &mp_config(cfg, p), &mut sink);
    if let Some(e) = sink.error {
        return Err(e).with_context(|| format!("writing trace {}", path.display()));
    }
    sink.writer.flush().context("flushing trace")?;
    Ok(())
}
