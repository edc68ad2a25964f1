//! Paired multi-network studies and their CSV output.
//!
//! Network `i` of a sweep is generated from `derive_seed(master_seed, i)` and
//! the base config with only the swept field replaced, so every objective and
//! every sweep value sees the same placements.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{solve, SolverSettings};
use crate::metrics::{
    error_entropy, mean_var, position_error_points, tail_fraction, DEFAULT_BIN_WIDTH,
    DEFAULT_SIGMA_REF, DEFAULT_TAIL_THRESHOLD,
};
use crate::models::{build_model, extract_errors, extract_positions, ModelOptions, ObjectiveKind};
use crate::netgen::{derive_seed, generate_instance, GenConfig, NetgenError, Point2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    /// Shaping model with a constant shift, one row per gamma.
    Gamma {
        gammas: Vec<f64>,
    },
    Noise {
        sigmas: Vec<f64>,
    },
    Range {
        ranges: Vec<f64>,
    },
    Scale {
        sizes: Vec<usize>,
        #[serde(default)]
        max_degree: Option<usize>,
    },
    /// Single point; the row's sweep value is the bin width.
    Entropy {
        bin_width: f64,
        sigma_ref: f64,
        threshold: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Gamma,
    Noise,
    Range,
    Scale,
    Entropy,
}

impl SweepKind {
    pub fn name(&self) -> &'static str {
        match self {
            SweepKind::Gamma => "gamma",
            SweepKind::Noise => "noise",
            SweepKind::Range => "range",
            SweepKind::Scale => "scale",
            SweepKind::Entropy => "entropy",
        }
    }
}

impl Sweep {
    pub fn kind(&self) -> SweepKind {
        match self {
            Sweep::Gamma { .. } => SweepKind::Gamma,
            Sweep::Noise { .. } => SweepKind::Noise,
            Sweep::Range { .. } => SweepKind::Range,
            Sweep::Scale { .. } => SweepKind::Scale,
            Sweep::Entropy { .. } => SweepKind::Entropy,
        }
    }

    /// Swept values as reals, in config order.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::Gamma { gammas } => gammas.clone(),
            Sweep::Noise { sigmas } => sigmas.clone(),
            Sweep::Range { ranges } => ranges.clone(),
            Sweep::Scale { sizes, .. } => sizes.iter().map(|&n| n as f64).collect(),
            Sweep::Entropy { bin_width, .. } => vec![*bin_width],
        }
    }
}

/// Histogram and tail parameters applied to every solved network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricParams {
    pub bin_width: f64,
    pub sigma_ref: f64,
    pub tail_threshold: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self {
            bin_width: DEFAULT_BIN_WIDTH,
            sigma_ref: DEFAULT_SIGMA_REF,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub num_networks: usize,
    pub base: GenConfig,
    /// Ignored by the gamma sweep, which always runs the gamma variant.
    #[serde(default)]
    pub objectives: Vec<ObjectiveKind>,
    pub sweep: Sweep,
    pub master_seed: u64,
    /// Solve networks on the rayon pool. Scale sweeps always run serially
    /// because their output is wall time.
    #[serde(default = "yes")]
    pub parallel: bool,
    /// When false, solve times are left out of logs and rows so that output
    /// is byte-for-byte reproducible.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("expected a {expected} sweep, got {got}")]
    WrongSweep {
        expected: &'static str,
        got: &'static str,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config format error: {0}")]
    Format(String),
}

impl ExperimentConfig {
    /// Full-scale settings for each study: 50 networks of 80 sensors and 5
    /// anchors, sigma 0.05, r 0.25 (0.3 for the scale sweep).
    pub fn preset(kind: SweepKind) -> Self {
        let base = GenConfig::default();
        let (sweep, radio_range) = match kind {
            SweepKind::Gamma => (
                Sweep::Gamma {
                    gammas: vec![1.0, 10.0, 100.0, 1000.0, 10000.0],
                },
                0.25,
            ),
            SweepKind::Noise => (
                Sweep::Noise {
                    sigmas: vec![0.01, 0.02, 0.05, 0.1, 0.15, 0.2],
                },
                0.25,
            ),
            SweepKind::Range => (
                Sweep::Range {
                    ranges: vec![0.2, 0.25, 0.3, 0.35, 0.4],
                },
                0.25,
            ),
            SweepKind::Scale => (
                Sweep::Scale {
                    sizes: vec![30, 50, 70, 90, 110],
                    max_degree: None,
                },
                0.3,
            ),
            SweepKind::Entropy => (
                Sweep::Entropy {
                    bin_width: DEFAULT_BIN_WIDTH,
                    sigma_ref: DEFAULT_SIGMA_REF,
                    threshold: DEFAULT_TAIL_THRESHOLD,
                },
                0.25,
            ),
        };
        Self {
            num_networks: 50,
            base: GenConfig {
                radio_range,
                ..base
            },
            objectives: ObjectiveKind::STANDARD.to_vec(),
            sweep,
            master_seed: 1,
            parallel: true,
            record_timing: true,
        }
    }

    /// Desk-scale variant: at most 20 networks of 60 sensors.
    pub fn quick(mut self) -> Self {
        self.num_networks = self.num_networks.min(20);
        self.base.n = 60;
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |s: String| Err(ExperimentError::InvalidConfig(s));
        if self.num_networks < 1 {
            return bad("num_networks must be at least 1".into());
        }
        let values = self.sweep.values();
        if values.is_empty() {
            return bad(format!("{} sweep has no values", self.sweep.kind().name()));
        }
        if self.sweep.kind() != SweepKind::Gamma && self.objectives.is_empty() {
            return bad("objectives must not be empty".into());
        }
        for k in &self.objectives {
            k.validate()
                .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        }
        match &self.sweep {
            Sweep::Gamma { gammas } => {
                if let Some(g) = gammas.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
                    return bad(format!("gamma must be positive and finite, got {g}"));
                }
            }
            Sweep::Entropy {
                bin_width,
                sigma_ref,
                threshold,
            } if !(*bin_width > 0.0 && *sigma_ref > 0.0 && *threshold >= 0.0) => {
                return bad("entropy parameters must be positive".into());
            }
            _ => {}
        }
        for v in values {
            self.point_config(v, 0)
                .validate()
                .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    /// Generator config of network `index` at sweep value `value`.
    pub fn point_config(&self, value: f64, index: usize) -> GenConfig {
        let mut g = self.base.clone();
        g.seed = derive_seed(self.master_seed, index as u64);
        match &self.sweep {
            Sweep::Noise { .. } => g.noise_std = value,
            Sweep::Range { .. } => g.radio_range = value,
            Sweep::Scale { max_degree, .. } => {
                g.n = value as usize;
                if max_degree.is_some() {
                    g.max_degree = *max_degree;
                }
            }
            Sweep::Gamma { .. } | Sweep::Entropy { .. } => {}
        }
        g
    }

    fn objectives_at(&self, value: f64) -> Vec<ObjectiveKind> {
        match self.sweep {
            Sweep::Gamma { .. } => vec![ObjectiveKind::ProposedQpGamma(value)],
            _ => self.objectives.clone(),
        }
    }

    fn metric_params(&self) -> MetricParams {
        match self.sweep {
            Sweep::Entropy {
                bin_width,
                sigma_ref,
                threshold,
            } => MetricParams {
                bin_width,
                sigma_ref,
                tail_threshold: threshold,
            },
            _ => MetricParams::default(),
        }
    }
}

pub fn config_from_str(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    let cfg: ExperimentConfig =
        serde_json::from_str(text).map_err(|e| ExperimentError::Format(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_string(cfg: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ExperimentError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    config_from_str(&text)
}

/// One (sweep value, objective, network) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLog {
    pub sweep_value: f64,
    pub objective: String,
    pub network_index: usize,
    pub pe: Option<f64>,
    pub solve_time: Option<f64>,
    pub iterations: Option<usize>,
    /// Solver status, or `empty_graph` / `generation_failed` / `model_error`
    /// / `extraction_failed` when no solution was scored.
    pub status: String,
    pub relative_entropy: Option<f64>,
    pub tail_fraction: Option<f64>,
}

impl NetworkLog {
    pub fn succeeded(&self) -> bool {
        self.pe.is_some()
    }
}

/// Aggregate over the networks that produced a scored solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub objective: String,
    pub mean_pe: Option<f64>,
    /// Population standard deviation.
    pub std_pe: Option<f64>,
    pub mean_solve_time: Option<f64>,
    pub mean_iterations: Option<f64>,
    pub mean_relative_entropy: Option<f64>,
    pub mean_tail_fraction: Option<f64>,
    pub networks_succeeded: usize,
    pub num_networks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    pub logs: Vec<NetworkLog>,
}

impl SweepOutput {
    pub fn row(&self, sweep_value: f64, objective: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.objective == objective)
    }

    pub fn all_failed(&self) -> bool {
        self.rows.iter().all(|r| r.networks_succeeded == 0)
    }
}

fn failed_log(value: f64, kind: ObjectiveKind, index: usize, status: &str) -> NetworkLog {
    NetworkLog {
        sweep_value: value,
        objective: kind.label(),
        network_index: index,
        pe: None,
        solve_time: None,
        iterations: None,
        status: status.to_string(),
        relative_entropy: None,
        tail_fraction: None,
    }
}

/// Generates network `index` at `value` and runs every objective on it.
fn run_network(
    cfg: &ExperimentConfig,
    value: f64,
    index: usize,
    objectives: &[ObjectiveKind],
    params: &MetricParams,
) -> Vec<NetworkLog> {
    let gen = cfg.point_config(value, index);
    let (truth, graph) = match generate_instance(&gen) {
        Ok(x) => x,
        Err(e) => {
            let status = match e {
                NetgenError::EmptyGraph(_) => "empty_graph",
                _ => "generation_failed",
            };
            return objectives
                .iter()
                .map(|&k| failed_log(value, k, index, status))
                .collect();
        }
    };
    let settings = SolverSettings::default();
    objectives
        .iter()
        .map(|&kind| {
            let Ok(model) = build_model(kind, &graph, &truth.anchors, &ModelOptions::default())
            else {
                return failed_log(value, kind, index, "model_error");
            };
            let Ok(result) = solve(&model.program, &settings) else {
                return failed_log(value, kind, index, "model_error");
            };
            let mut log = failed_log(value, kind, index, result.status.as_str());
            log.iterations = Some(result.iterations);
            if cfg.record_timing {
                log.solve_time = Some(result.wall_time);
            }
            let scored = extract_positions(&model, &result).ok().and_then(|est| {
                let errors = extract_errors(&model, &result).ok()?.errors;
                let (pe, _) = position_error_points(&truth.sensors, &est.x_hat).ok()?;
                let kl = error_entropy(&errors, params.bin_width, params.sigma_ref).ok()?;
                let tail = tail_fraction(&errors, params.tail_threshold).ok()?;
                Some((pe, kl.d_bits, tail))
            });
            match scored {
                Some((pe, kl, tail)) => {
                    log.pe = Some(pe);
                    log.relative_entropy = Some(kl);
                    log.tail_fraction = Some(tail);
                }
                None if result.status.has_solution() => log.status = "extraction_failed".into(),
                None => {}
            }
            log
        })
        .collect()
}

fn mean_of(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().collect();
    (!v.is_empty()).then(|| mean_var(&v).0)
}

/// Aggregates logs into one row per (sweep value, objective), in config order.
pub fn aggregate(
    logs: &[NetworkLog],
    values: &[f64],
    objectives_at: impl Fn(f64) -> Vec<ObjectiveKind>,
    num_networks: usize,
) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &value in values {
        for kind in objectives_at(value) {
            let label = kind.label();
            let ok: Vec<&NetworkLog> = logs
                .iter()
                .filter(|l| l.sweep_value == value && l.objective == label && l.succeeded())
                .collect();
            let pes: Vec<f64> = ok.iter().filter_map(|l| l.pe).collect();
            let (mean_pe, std_pe) = if pes.is_empty() {
                (None, None)
            } else {
                let (m, v) = mean_var(&pes);
                (Some(m), Some(v.sqrt()))
            };
            rows.push(SweepRow {
                sweep_value: value,
                objective: label,
                mean_pe,
                std_pe,
                mean_solve_time: mean_of(ok.iter().map(|l| l.solve_time)),
                mean_iterations: mean_of(ok.iter().map(|l| l.iterations.map(|i| i as f64))),
                mean_relative_entropy: mean_of(ok.iter().map(|l| l.relative_entropy)),
                mean_tail_fraction: mean_of(ok.iter().map(|l| l.tail_fraction)),
                networks_succeeded: ok.len(),
                num_networks,
            });
        }
    }
    rows
}

/// Runs any sweep. `progress` is called once per finished network.
pub fn run_sweep_with(
    cfg: &ExperimentConfig,
    progress: &(dyn Fn(f64, usize) + Sync),
) -> Result<SweepOutput, ExperimentError> {
    cfg.validate()?;
    let values = cfg.sweep.values();
    let params = cfg.metric_params();
    let tasks: Vec<(f64, usize)> = values
        .iter()
        .flat_map(|&v| (0..cfg.num_networks).map(move |i| (v, i)))
        .collect();
    let work = |&(v, i): &(f64, usize)| {
        let logs = run_network(cfg, v, i, &cfg.objectives_at(v), &params);
        progress(v, i);
        logs
    };
    let serial = !cfg.parallel || cfg.sweep.kind() == SweepKind::Scale;
    let nested: Vec<Vec<NetworkLog>> = if serial {
        tasks.iter().map(work).collect()
    } else {
        tasks.par_iter().map(work).collect()
    };
    // tasks are ordered by (value, network); regroup by objective within a value
    let mut logs = Vec::with_capacity(nested.iter().map(Vec::len).sum());
    for &v in &values {
        for kind in cfg.objectives_at(v) {
            let label = kind.label();
            for (&(tv, _), group) in tasks.iter().zip(&nested) {
                if tv == v {
                    logs.extend(group.iter().filter(|l| l.objective == label).cloned());
                }
            }
        }
    }
    let rows = aggregate(&logs, &values, |v| cfg.objectives_at(v), cfg.num_networks);
    Ok(SweepOutput {
        kind: cfg.sweep.kind(),
        rows,
        logs,
    })
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput, ExperimentError> {
    run_sweep_with(cfg, &|_, _| {})
}

fn run_expecting(cfg: &ExperimentConfig, kind: SweepKind) -> Result<SweepOutput, ExperimentError> {
    if cfg.sweep.kind() != kind {
        return Err(ExperimentError::WrongSweep {
            expected: kind.name(),
            got: cfg.sweep.kind().name(),
        });
    }
    run_sweep(cfg)
}

pub fn run_gamma_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    run_expecting(cfg, SweepKind::Gamma).map(|o| o.rows)
}

pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    run_expecting(cfg, SweepKind::Noise).map(|o| o.rows)
}

pub fn run_range_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    run_expecting(cfg, SweepKind::Range).map(|o| o.rows)
}

pub fn run_scale_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    run_expecting(cfg, SweepKind::Scale).map(|o| o.rows)
}

pub fn run_entropy_comparison(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, ExperimentError> {
    run_expecting(cfg, SweepKind::Entropy).map(|o| o.rows)
}

/// Least-squares slope of `ln y` against `ln x` over positive pairs.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Log-log slope of mean solve time against sweep value for one objective.
pub fn timing_slope(rows: &[SweepRow], objective: &str) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.objective == objective)
        .filter_map(|r| r.mean_solve_time.map(|t| (r.sweep_value, t)))
        .collect();
    loglog_slope(&pts)
}

/// Reals with 10 significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.9e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(fmt_real).unwrap_or_default()
}

pub const ROW_HEADER: [&str; 10] = [
    "sweep_value",
    "objective",
    "mean_pe",
    "std_pe",
    "mean_solve_time",
    "mean_iterations",
    "mean_relative_entropy",
    "mean_tail_fraction",
    "networks_succeeded",
    "num_networks",
];

pub const LOG_HEADER: [&str; 9] = [
    "sweep_value",
    "objective",
    "network_index",
    "pe",
    "solve_time",
    "iterations",
    "status",
    "relative_entropy",
    "tail_fraction",
];

pub fn write_rows_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            fmt_real(r.sweep_value),
            r.objective.clone(),
            opt_real(r.mean_pe),
            opt_real(r.std_pe),
            opt_real(r.mean_solve_time),
            opt_real(r.mean_iterations),
            opt_real(r.mean_relative_entropy),
            opt_real(r.mean_tail_fraction),
            r.networks_succeeded.to_string(),
            r.num_networks.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_logs_csv<W: Write>(out: W, logs: &[NetworkLog]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER)?;
    for l in logs {
        w.write_record([
            fmt_real(l.sweep_value),
            l.objective.clone(),
            l.network_index.to_string(),
            opt_real(l.pe),
            opt_real(l.solve_time),
            l.iterations.map(|i| i.to_string()).unwrap_or_default(),
            l.status.clone(),
            opt_real(l.relative_entropy),
            opt_real(l.tail_fraction),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn create(path: &Path) -> Result<std::fs::File, ExperimentError> {
    std::fs::File::create(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes `<kind>_summary.csv` and `<kind>_networks.csv` into `dir` and
/// returns their paths.
pub fn write_sweep_output(
    dir: impl AsRef<Path>,
    out: &SweepOutput,
) -> Result<(std::path::PathBuf, std::path::PathBuf), ExperimentError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let summary = dir.join(format!("{}_summary.csv", out.kind.name()));
    let networks = dir.join(format!("{}_networks.csv", out.kind.name()));
    write_rows_csv(create(&summary)?, &out.rows)?;
    write_logs_csv(create(&networks)?, &out.logs)?;
    Ok((summary, networks))
}

/// True and estimated coordinates of one sensor under one objective.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterRow {
    pub objective: String,
    pub index: usize,
    pub truth: Point2,
    pub estimate: Point2,
}

/// Generator settings of the qualitative scatter comparison: 20 sensors,
/// 5 anchors, r = 0.4, sigma = 0.01.
pub fn scatter_config(seed: u64) -> GenConfig {
    GenConfig {
        n: 20,
        m: 5,
        radio_range: 0.4,
        noise_std: 0.01,
        seed,
        ..GenConfig::default()
    }
}

/// Solves one scatter network under each objective. Objectives whose solve
/// yields no usable solution are skipped.
pub fn scatter_dump(
    gen: &GenConfig,
    objectives: &[ObjectiveKind],
) -> Result<Vec<ScatterRow>, ExperimentError> {
    let (truth, graph) =
        generate_instance(gen).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let mut rows = Vec::new();
    for &kind in objectives {
        let model = build_model(kind, &graph, &truth.anchors, &ModelOptions::default())
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        let Ok(result) = solve(&model.program, &SolverSettings::default()) else {
            continue;
        };
        let Ok(est) = extract_positions(&model, &result) else {
            continue;
        };
        for (i, (t, e)) in truth.sensors.iter().zip(&est.x_hat).enumerate() {
            rows.push(ScatterRow {
                objective: kind.label(),
                index: i,
                truth: *t,
                estimate: *e,
            });
        }
    }
    Ok(rows)
}

pub fn write_scatter_csv<W: Write>(out: W, rows: &[ScatterRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["objective", "index", "true_x", "true_y", "est_x", "est_y"])?;
    for r in rows {
        w.write_record([
            r.objective.clone(),
            r.index.to_string(),
            fmt_real(r.truth.x),
            fmt_real(r.truth.y),
            fmt_real(r.estimate.x),
            fmt_real(r.estimate.y),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
