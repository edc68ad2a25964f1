//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad flags, config or input files, 3 no
//! measurements within range, 4 solver numerical failure, 5 suspected
//! infeasibility, 6 every network of a sweep failed.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::conic::{solve, SolveStatus, SolverSettings};
use crate::experiments::{
    fmt_real, load_config, run_sweep_with, scatter_config, scatter_dump, timing_slope,
    write_scatter_csv, write_sweep_output, ExperimentConfig, SweepKind,
};
use crate::metrics::{
    error_entropy, position_error_points, tail_fraction, write_histogram_csv, DEFAULT_BIN_WIDTH,
    DEFAULT_SIGMA_REF, DEFAULT_TAIL_THRESHOLD,
};
use crate::models::{
    build_model, extract_errors, extract_positions, EdgeRef, ModelOptions, ObjectiveKind,
};
use crate::netgen::{
    generate_instance, load_instance, save_instance, GenConfig, MeasurementGraph, NetgenError,
    NoiseModel, Point2,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_EMPTY_GRAPH: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;
pub const EXIT_ALL_FAILED: i32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "wsnloc",
    version,
    about = "SDP-relaxation sensor network localization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random network and its noisy measurements.
    Gen(GenArgs),
    /// Solve one instance file under one objective.
    Solve(SolveArgs),
    /// Score an estimate against an instance's true positions.
    Eval(EvalArgs),
    /// Run a multi-network study and write summary and per-network CSVs.
    Sweep(SweepArgs),
    /// Dump true and estimated coordinates of a 20-sensor network.
    #[command(name = "dump-fig9")]
    DumpFig9(DumpArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    Additive,
    Multiplicative,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 80)]
    pub sensors: usize,
    #[arg(long, default_value_t = 5)]
    pub anchors: usize,
    #[arg(long, default_value_t = 0.25)]
    pub radio_range: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_std: f64,
    #[arg(long, value_enum, default_value = "additive")]
    pub noise_model: NoiseArg,
    /// Cap on retained sensor-to-sensor edges per sensor [default: none]
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    BiswasYe,
    Ls,
    Qp,
    QpGamma,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "qp")]
    pub objective: ObjectiveArg,
    /// Required with qp-gamma and rejected otherwise [default: none]
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-7)]
    pub tol_gap: f64,
    #[arg(long, default_value_t = 1e-7)]
    pub tol_feas: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Positions CSV (index,x,y) [default: not written]
    #[arg(long)]
    pub out_positions: Option<PathBuf>,
    /// Signed errors CSV (edge_kind,i,j_or_k,error) [default: not written]
    #[arg(long)]
    pub out_errors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Instance file holding true positions and measurements.
    #[arg(long)]
    pub truth: PathBuf,
    /// Positions CSV (index,x,y).
    #[arg(long)]
    pub estimate: PathBuf,
    /// Errors CSV from `solve`; without it errors are recomputed from the
    /// estimated positions [default: recompute]
    #[arg(long)]
    pub errors: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA_REF)]
    pub sigma_ref: f64,
    #[arg(long, default_value_t = DEFAULT_TAIL_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value = "histogram.csv")]
    pub out_histogram: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    Gamma,
    Noise,
    Range,
    Scale,
    Entropy,
}

impl From<SweepArg> for SweepKind {
    fn from(a: SweepArg) -> Self {
        match a {
            SweepArg::Gamma => SweepKind::Gamma,
            SweepArg::Noise => SweepKind::Noise,
            SweepArg::Range => SweepKind::Range,
            SweepArg::Scale => SweepKind::Scale,
            SweepArg::Entropy => SweepKind::Entropy,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepArg,
    /// Experiment config (JSON); its sweep must match --kind
    /// [default: built-in preset for --kind]
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    pub out_dir: PathBuf,
    /// At most 20 networks of 60 sensors.
    #[arg(long, default_value_t = false)]
    pub quick: bool,
    /// Overrides the config's master seed [default: from config]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's network count [default: from config]
    #[arg(long)]
    pub networks: Option<usize>,
    /// Leave solve times out so that output is reproducible byte for byte.
    #[arg(long, default_value_t = false)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated objectives (biswas-ye, ls, qp, qp-gamma:<g>)
    #[arg(long, value_delimiter = ',', default_value = "biswas-ye,ls,qp")]
    pub objectives: Vec<String>,
    #[arg(long, default_value = "scatter.csv")]
    pub out: PathBuf,
}

/// A failure carrying its exit code; the message goes to standard error.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn usage(message: impl Into<String>) -> Failure {
    fail(EXIT_USAGE, message)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Gen(a) => cmd_gen(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::DumpFig9(a) => cmd_dump(&a),
    }
}

fn netgen_failure(e: NetgenError) -> Failure {
    match e {
        NetgenError::EmptyGraph(_) => fail(EXIT_EMPTY_GRAPH, e.to_string()),
        other => usage(other.to_string()),
    }
}

fn cmd_gen(a: &GenArgs) -> Result<(), Failure> {
    let cfg = GenConfig {
        n: a.sensors,
        m: a.anchors,
        radio_range: a.radio_range,
        noise_std: a.noise_std,
        noise_model: match a.noise_model {
            NoiseArg::Additive => NoiseModel::Additive,
            NoiseArg::Multiplicative => NoiseModel::Multiplicative,
        },
        max_degree: a.max_degree,
        seed: a.seed,
        ..GenConfig::default()
    };
    cfg.validate().map_err(netgen_failure)?;
    let (truth, graph) = generate_instance(&cfg).map_err(netgen_failure)?;
    save_instance(&truth, &graph, &a.out).map_err(netgen_failure)?;
    println!(
        "wrote {} ({} sensors, {} anchors, v = {} edges)",
        a.out.display(),
        graph.n,
        graph.m,
        graph.num_edges()
    );
    Ok(())
}

fn objective_from(a: &SolveArgs) -> Result<ObjectiveKind, Failure> {
    let kind = match (a.objective, a.gamma) {
        (ObjectiveArg::QpGamma, Some(g)) => ObjectiveKind::ProposedQpGamma(g),
        (ObjectiveArg::QpGamma, None) => {
            return Err(usage("--objective qp-gamma requires --gamma"))
        }
        (_, Some(_)) => return Err(usage("--gamma is only valid with --objective qp-gamma")),
        (ObjectiveArg::BiswasYe, None) => ObjectiveKind::BiswasYeL1,
        (ObjectiveArg::Ls, None) => ObjectiveKind::LeastSquares,
        (ObjectiveArg::Qp, None) => ObjectiveKind::ProposedQp,
    };
    kind.validate().map_err(|e| usage(e.to_string()))?;
    Ok(kind)
}

fn create_csv(path: &Path) -> Result<csv::Writer<std::fs::File>, Failure> {
    csv::Writer::from_path(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn csv_failure(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| usage(format!("{}: {e}", path.display()))
}

fn write_positions(path: &Path, pts: &[Point2]) -> Result<(), Failure> {
    let mut w = create_csv(path)?;
    let err = csv_failure(path);
    w.write_record(["index", "x", "y"]).map_err(&err)?;
    for (i, p) in pts.iter().enumerate() {
        w.write_record([i.to_string(), fmt_real(p.x), fmt_real(p.y)])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}

fn edge_fields(e: EdgeRef) -> (&'static str, usize, usize) {
    match e {
        EdgeRef::Sensor { i, j } => ("sensor", i, j),
        EdgeRef::Anchor { j, k } => ("anchor", j, k),
    }
}

fn write_errors(path: &Path, edges: &[EdgeRef], errors: &[f64]) -> Result<(), Failure> {
    let mut w = create_csv(path)?;
    let err = csv_failure(path);
    w.write_record(["edge_kind", "i", "j_or_k", "error"])
        .map_err(&err)?;
    for (&e, v) in edges.iter().zip(errors) {
        let (kind, i, j) = edge_fields(e);
        w.write_record([kind.to_string(), i.to_string(), j.to_string(), fmt_real(*v)])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| err(e.into()))
}

fn cmd_solve(a: &SolveArgs) -> Result<(), Failure> {
    let kind = objective_from(a)?;
    let settings = SolverSettings {
        tol_gap: a.tol_gap,
        tol_feas: a.tol_feas,
        max_iters: a.max_iters,
        ..SolverSettings::default()
    };
    let (truth, graph) = load_instance(&a.input).map_err(netgen_failure)?;
    let model = build_model(kind, &graph, &truth.anchors, &ModelOptions::default())
        .map_err(|e| usage(e.to_string()))?;
    let result = solve(&model.program, &settings).map_err(|e| usage(e.to_string()))?;
    println!("objective   {}", kind.label());
    println!("status      {}", result.status);
    println!("gap         {:.3e}", result.gap);
    println!("iterations  {}", result.iterations);
    println!("wall time   {:.3} s", result.wall_time);
    match result.status {
        SolveStatus::NumericalFailure => {
            return Err(fail(
                EXIT_NUMERICAL,
                result.message.unwrap_or_else(|| "numerical failure".into()),
            ))
        }
        SolveStatus::SuspectedInfeasible => {
            return Err(fail(EXIT_INFEASIBLE, "problem appears infeasible"))
        }
        SolveStatus::Optimal | SolveStatus::MaxIterations => {}
    }
    let est =
        extract_positions(&model, &result).map_err(|e| fail(EXIT_NUMERICAL, e.to_string()))?;
    let errors =
        extract_errors(&model, &result).map_err(|e| fail(EXIT_NUMERICAL, e.to_string()))?;
    let (pe, _) =
        position_error_points(&truth.sensors, &est.x_hat).map_err(|e| usage(e.to_string()))?;
    println!("pe          {pe:.6e}");
    if let Some(p) = &a.out_positions {
        write_positions(p, &est.x_hat)?;
    }
    if let Some(p) = &a.out_errors {
        write_errors(p, &model.edge_order, &errors.errors)?;
    }
    Ok(())
}

fn read_positions(path: &Path) -> Result<Vec<Point2>, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(csv_failure(path))?;
    let mut pts: Vec<(usize, Point2)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_failure(path))?;
        let field = |k: usize| -> Result<&str, Failure> {
            rec.get(k)
                .ok_or_else(|| usage(format!("{}: expected index,x,y", path.display())))
        };
        let parse = |s: &str| -> Result<f64, Failure> {
            s.trim()
                .parse()
                .map_err(|_| usage(format!("{}: bad number '{s}'", path.display())))
        };
        let i: usize = field(0)?
            .trim()
            .parse()
            .map_err(|_| usage(format!("{}: bad index", path.display())))?;
        pts.push((i, Point2::new(parse(field(1)?)?, parse(field(2)?)?)));
    }
    pts.sort_by_key(|p| p.0);
    if pts.iter().enumerate().any(|(k, p)| p.0 != k) {
        return Err(usage(format!("{}: indices must be 0..n", path.display())));
    }
    Ok(pts.into_iter().map(|p| p.1).collect())
}

fn read_errors(path: &Path) -> Result<Vec<f64>, Failure> {
    let mut r = csv::Reader::from_path(path).map_err(csv_failure(path))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_failure(path))?;
        let v = rec
            .get(3)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .ok_or_else(|| {
                usage(format!(
                    "{}: expected edge_kind,i,j_or_k,error",
                    path.display()
                ))
            })?;
        out.push(v);
    }
    Ok(out)
}

/// Squared-distance errors of point estimates: model minus measured.
pub fn errors_from_positions(g: &MeasurementGraph, anchors: &[Point2], est: &[Point2]) -> Vec<f64> {
    let sq = |a: &Point2, b: &Point2| (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
    g.sensor_edges
        .iter()
        .map(|e| sq(&est[e.i], &est[e.j]) - e.d_hat * e.d_hat)
        .chain(
            g.anchor_edges
                .iter()
                .map(|e| sq(&est[e.j], &anchors[e.k]) - e.d_hat * e.d_hat),
        )
        .collect()
}

fn cmd_eval(a: &EvalArgs) -> Result<(), Failure> {
    let (truth, graph) = load_instance(&a.truth).map_err(netgen_failure)?;
    let est = read_positions(&a.estimate)?;
    if est.len() != truth.sensors.len() {
        return Err(usage(format!(
            "estimate has {} positions, instance has {} sensors",
            est.len(),
            truth.sensors.len()
        )));
    }
    let errors = match &a.errors {
        Some(p) => {
            let e = read_errors(p)?;
            if e.len() != graph.num_edges() {
                return Err(usage(format!(
                    "errors file has {} rows, instance has {} edges",
                    e.len(),
                    graph.num_edges()
                )));
            }
            e
        }
        None => errors_from_positions(&graph, &truth.anchors, &est),
    };
    let (pe, _) = position_error_points(&truth.sensors, &est).map_err(|e| usage(e.to_string()))?;
    let report =
        error_entropy(&errors, a.bin_width, a.sigma_ref).map_err(|e| usage(e.to_string()))?;
    let tail = tail_fraction(&errors, a.threshold).map_err(|e| usage(e.to_string()))?;
    println!("pe                {pe:.6e}");
    println!("relative entropy  {:.6} bits", report.d_bits);
    println!("tail fraction     {tail:.6} (|error| > {})", a.threshold);
    let file = std::fs::File::create(&a.out_histogram)
        .map_err(|e| usage(format!("{}: {e}", a.out_histogram.display())))?;
    write_histogram_csv(file, &report).map_err(csv_failure(&a.out_histogram))?;
    Ok(())
}

fn sweep_config(a: &SweepArgs) -> Result<ExperimentConfig, Failure> {
    let kind = SweepKind::from(a.kind);
    let mut cfg = match &a.config {
        Some(p) => {
            let cfg = load_config(p).map_err(|e| usage(e.to_string()))?;
            if cfg.sweep.kind() != kind {
                return Err(usage(format!(
                    "config holds a {} sweep but --kind is {}",
                    cfg.sweep.kind().name(),
                    kind.name()
                )));
            }
            cfg
        }
        None => ExperimentConfig::preset(kind),
    };
    if a.quick {
        cfg = cfg.quick();
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = a.networks {
        cfg.num_networks = n;
    }
    if a.no_timing {
        cfg.record_timing = false;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn opt(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.4}"))
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let cfg = sweep_config(a)?;
    let total = cfg.sweep.values().len() * cfg.num_networks;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let progress = |v: f64, i: usize| {
        let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
        eprintln!("[{k}/{total}] value {v} network {i} done");
    };
    let out = run_sweep_with(&cfg, &progress).map_err(|e| usage(e.to_string()))?;
    let (summary, networks) =
        write_sweep_output(&a.out_dir, &out).map_err(|e| usage(e.to_string()))?;
    println!(
        "{:>12} {:<16} {:>8} {:>8} {:>9} {:>8} {:>8} {:>6}",
        "value", "objective", "pe", "std", "time_s", "kl_bits", "tail", "ok"
    );
    for r in &out.rows {
        println!(
            "{:>12} {:<16} {:>8} {:>8} {:>9} {:>8} {:>8} {:>3}/{}",
            r.sweep_value,
            r.objective,
            opt(r.mean_pe),
            opt(r.std_pe),
            opt(r.mean_solve_time),
            opt(r.mean_relative_entropy),
            opt(r.mean_tail_fraction),
            r.networks_succeeded,
            r.num_networks
        );
    }
    if out.kind == SweepKind::Scale {
        for k in &cfg.objectives {
            if let Some(s) = timing_slope(&out.rows, &k.label()) {
                println!("log-log slope of solve time vs n ({}): {s:.2}", k.label());
            }
        }
    }
    println!("wrote {} and {}", summary.display(), networks.display());
    if out.all_failed() {
        return Err(fail(EXIT_ALL_FAILED, "every network failed"));
    }
    Ok(())
}

fn cmd_dump(a: &DumpArgs) -> Result<(), Failure> {
    let objectives: Vec<ObjectiveKind> = a
        .objectives
        .iter()
        .map(|s| s.parse::<ObjectiveKind>().map_err(usage))
        .collect::<Result<_, _>>()?;
    let rows =
        scatter_dump(&scatter_config(a.seed), &objectives).map_err(|e| usage(e.to_string()))?;
    let file =
        std::fs::File::create(&a.out).map_err(|e| usage(format!("{}: {e}", a.out.display())))?;
    write_scatter_csv(file, &rows).map_err(|e| usage(e.to_string()))?;
    println!("wrote {} ({} rows)", a.out.display(), rows.len());
    Ok(())
}
