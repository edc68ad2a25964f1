//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line;
//! the process exits non-zero if any fails.

mod common;

use std::time::Instant;

use common::RandomLp;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsnloc::conic::{
    smat, solve, svec, svec_index, ConeBlock, ConeProgram, SolveStatus, SolverSettings,
};
use wsnloc::experiments::{
    run_sweep, timing_slope, write_logs_csv, write_rows_csv, ExperimentConfig, Sweep, SweepKind,
    SweepOutput,
};
use wsnloc::metrics::{histogram, position_error_points, relative_entropy};
use wsnloc::models::{build_model, extract_errors, extract_positions, ModelOptions, ObjectiveKind};
use wsnloc::netgen::{
    derive_seed, generate_instance, AnchorEdge, GenConfig, MeasurementGraph, NoiseModel, Point2,
};

type Outcome = Result<String, String>;

const KINDS: [ObjectiveKind; 4] = [
    ObjectiveKind::BiswasYeL1,
    ObjectiveKind::LeastSquares,
    ObjectiveKind::ProposedQp,
    ObjectiveKind::ProposedQpGamma(1000.0),
];

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn mean_of(
    out: &SweepOutput,
    value: f64,
    objective: &str,
    f: fn(&wsnloc::experiments::SweepRow) -> Option<f64>,
) -> Result<f64, String> {
    let row = out
        .row(value, objective)
        .ok_or_else(|| format!("no row for {objective} at {value}"))?;
    if row.networks_succeeded != row.num_networks {
        return Err(format!(
            "{objective} at {value}: only {}/{} networks solved",
            row.networks_succeeded, row.num_networks
        ));
    }
    f(row).ok_or_else(|| format!("{objective} at {value}: no mean"))
}

fn pe(r: &wsnloc::experiments::SweepRow) -> Option<f64> {
    r.mean_pe
}

fn kl(r: &wsnloc::experiments::SweepRow) -> Option<f64> {
    r.mean_relative_entropy
}

fn tail(r: &wsnloc::experiments::SweepRow) -> Option<f64> {
    r.mean_tail_fraction
}

fn solver_correctness() -> Outcome {
    let start = Instant::now();
    let s = SolverSettings::default();
    let optimum = |p: &ConeProgram| -> Result<f64, String> {
        let r = solve(p, &s).map_err(|e| e.to_string())?;
        check(
            r.status == SolveStatus::Optimal,
            format!("status {}", r.status),
        )?;
        Ok(r.primal_objective)
    };

    // min x0 over the simplex x0 + x1 = 1: optimum 0
    let mut lp = ConeProgram::new();
    lp.add_block(ConeBlock::NonNeg(2));
    lp.objective[0] = 1.0;
    lp.add_row(vec![(0, 1.0), (1, 1.0)], 1.0);
    let v = optimum(&lp)?;
    check(v.abs() < 1e-6, format!("LP optimum {v}"))?;

    // min t with (t, 3, 4) in the second-order cone: optimum 5
    let mut soc = ConeProgram::new();
    soc.add_block(ConeBlock::SecondOrder(3));
    soc.objective[0] = 1.0;
    soc.add_row(vec![(1, 1.0)], 3.0);
    soc.add_row(vec![(2, 1.0)], 4.0);
    let v = optimum(&soc)?;
    check((v - 5.0).abs() < 1e-6, format!("SOC optimum {v}"))?;

    // min trace X with X12 = 1, X PSD: optimum 2
    let mut psd = ConeProgram::new();
    psd.add_block(ConeBlock::Psd(2));
    psd.objective[svec_index(2, 0, 0)] = 1.0;
    psd.objective[svec_index(2, 1, 1)] = 1.0;
    psd.add_row(
        vec![(svec_index(2, 1, 0), std::f64::consts::FRAC_1_SQRT_2)],
        1.0,
    );
    let v = optimum(&psd)?;
    check((v - 2.0).abs() < 1e-6, format!("PSD optimum {v}"))?;

    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let rows = 1 + k % 4;
        let lp = RandomLp::generate(derive_seed(11, k as u64), rows, rows + 4 + k % 5);
        let want = lp.vertex_optimum().ok_or("vertex oracle found no vertex")?;
        let got = optimum(&lp.program())?;
        worst = worst.max((got - want).abs());
    }
    check(worst < 1e-6, format!("random LP deviation {worst:.2e}"))?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 1.0, format!("took {secs:.2} s"))?;
    Ok(format!(
        "3 analytic + 20 random LPs, worst LP deviation {worst:.1e}, {secs:.2} s"
    ))
}

fn zero_noise_recovery() -> Outcome {
    let anchors = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.0, 1.0),
    ];
    let sensor = Point2::new(0.3, 0.4);
    let tri = MeasurementGraph {
        n: 1,
        m: 3,
        sensor_edges: Vec::new(),
        anchor_edges: (0..3)
            .map(|k| AnchorEdge {
                j: 0,
                k,
                d_hat: sensor.dist(&anchors[k]),
            })
            .collect(),
        radio_range: 2.0,
        noise_std: 0.0,
        noise_model: NoiseModel::Additive,
    };
    let cfg = GenConfig {
        n: 10,
        m: 4,
        radio_range: 0.8,
        noise_std: 0.0,
        seed: derive_seed(3, 0),
        ..GenConfig::default()
    };
    let (truth, g) = generate_instance(&cfg).map_err(|e| e.to_string())?;
    let mut worst_tri: f64 = 0.0;
    let mut worst_pe: f64 = 0.0;
    for kind in KINDS {
        for (graph, anchors, sensors) in [
            (&tri, &anchors, &vec![sensor]),
            (&g, &truth.anchors, &truth.sensors),
        ] {
            let m = build_model(kind, graph, anchors, &ModelOptions::default())
                .map_err(|e| e.to_string())?;
            let r = solve(&m.program, &SolverSettings::default()).map_err(|e| e.to_string())?;
            check(
                r.status == SolveStatus::Optimal,
                format!("{kind}: {}", r.status),
            )?;
            let est = extract_positions(&m, &r).map_err(|e| e.to_string())?;
            let (pe, _) = position_error_points(sensors, &est.x_hat).map_err(|e| e.to_string())?;
            if graph.n == 1 {
                worst_tri = worst_tri.max(pe);
            } else {
                worst_pe = worst_pe.max(pe);
            }
        }
    }
    check(
        worst_tri < 1e-3,
        format!("trilateration error {worst_tri:.2e}"),
    )?;
    check(worst_pe < 1e-3, format!("10-sensor PE {worst_pe:.2e}"))?;
    Ok(format!(
        "all four objectives: trilateration error {worst_tri:.1e}, 10-sensor PE {worst_pe:.1e}"
    ))
}

fn entropy_study() -> Result<SweepOutput, String> {
    let cfg = ExperimentConfig::preset(SweepKind::Entropy).quick();
    run_sweep(&cfg).map_err(|e| e.to_string())
}

fn entropy_ordering(out: &SweepOutput) -> Outcome {
    let w = out.rows[0].sweep_value;
    let qp = mean_of(out, w, "qp", kl)?;
    let ls = mean_of(out, w, "ls", kl)?;
    let by = mean_of(out, w, "biswas-ye", kl)?;
    let summary = format!("mean KL bits QP {qp:.4}, LS {ls:.4}, Biswas-Ye {by:.4}");
    check(qp <= ls && ls < by && by >= 2.0 * qp, summary.clone())?;
    Ok(summary)
}

fn accuracy_ordering(entropy: &SweepOutput) -> Outcome {
    let mut cfg = ExperimentConfig::preset(SweepKind::Noise).quick();
    cfg.num_networks = 10;
    cfg.sweep = Sweep::Noise {
        sigmas: vec![0.02, 0.1],
    };
    let out = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for sigma in [0.02, 0.1] {
        let qp = mean_of(&out, sigma, "qp", pe)?;
        let by = mean_of(&out, sigma, "biswas-ye", pe)?;
        ok &= qp < by;
        parts.push(format!("sigma {sigma}: QP {qp:.4} vs BY {by:.4}"));
    }
    // the entropy study is the sigma = 0.05 point, with 20 paired networks
    let w = entropy.rows[0].sweep_value;
    let qp = mean_of(entropy, w, "qp", pe)?;
    let ls = mean_of(entropy, w, "ls", pe)?;
    let by = mean_of(entropy, w, "biswas-ye", pe)?;
    ok &= qp < by && qp <= 1.05 * ls;
    parts.push(format!("sigma 0.05: QP {qp:.4} vs BY {by:.4}, LS {ls:.4}"));
    let summary = parts.join("; ");
    check(ok, summary.clone())?;
    Ok(summary)
}

fn gamma_plateau() -> Outcome {
    let mut cfg = ExperimentConfig::preset(SweepKind::Gamma).quick();
    cfg.num_networks = 10;
    cfg.sweep = Sweep::Gamma {
        gammas: vec![100.0, 1000.0],
    };
    let out = run_sweep(&cfg).map_err(|e| e.to_string())?;
    let a = mean_of(
        &out,
        100.0,
        &ObjectiveKind::ProposedQpGamma(100.0).label(),
        pe,
    )?;
    let b = mean_of(
        &out,
        1000.0,
        &ObjectiveKind::ProposedQpGamma(1000.0).label(),
        pe,
    )?;
    let rel = (a - b).abs() / a.max(b);
    let summary = format!("PE at gamma 100 {a:.4}, at 1000 {b:.4}, relative change {rel:.2e}");
    check(rel < 0.05, summary.clone())?;
    Ok(summary)
}

fn tail_suppression(out: &SweepOutput) -> Outcome {
    let w = out.rows[0].sweep_value;
    let qp = mean_of(out, w, "qp", tail)?;
    let by = mean_of(out, w, "biswas-ye", tail)?;
    let summary = format!("tail fraction above 0.022: QP {qp:.4}, Biswas-Ye {by:.4}");
    check(qp < by, summary.clone())?;
    Ok(summary)
}

fn timing_shape() -> Outcome {
    let scale = |sizes: Vec<usize>, max_degree: Option<usize>| {
        let mut cfg = ExperimentConfig::preset(SweepKind::Scale);
        cfg.num_networks = 3;
        cfg.objectives = vec![ObjectiveKind::ProposedQp];
        cfg.sweep = Sweep::Scale { sizes, max_degree };
        run_sweep(&cfg).map_err(|e| e.to_string())
    };
    let full = scale(vec![30, 50, 70], None)?;
    let capped = scale(vec![70], Some(7))?;
    let t = |out: &SweepOutput, n: f64| mean_of(out, n, "qp", |r| r.mean_solve_time);
    let times = [t(&full, 30.0)?, t(&full, 50.0)?, t(&full, 70.0)?];
    let cap = t(&capped, 70.0)?;
    let slope = timing_slope(&full.rows, "qp").unwrap_or(f64::NAN);
    let summary = format!(
        "QP mean time n=30 {:.3} s, n=50 {:.3} s, n=70 {:.3} s, n=70 capped at 7 {cap:.3} s, log-log slope {slope:.2}",
        times[0], times[1], times[2]
    );
    check(
        times[0] < times[1] && times[1] < times[2] && cap < times[2],
        summary.clone(),
    )?;
    Ok(summary)
}

fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

fn csv_bytes(out: &SweepOutput) -> Result<Vec<u8>, String> {
    let mut buf = Vec::new();
    write_rows_csv(&mut buf, &out.rows).map_err(|e| e.to_string())?;
    write_logs_csv(&mut buf, &out.logs).map_err(|e| e.to_string())?;
    Ok(buf)
}

fn invariant_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);

    let mut min_kl = f64::INFINITY;
    for _ in 0..1000 {
        let k = rng.random_range(2..12);
        let p = random_simplex(&mut rng, k);
        let q = random_simplex(&mut rng, k);
        min_kl = min_kl.min(relative_entropy(&p, &q).map_err(|e| e.to_string())?);
    }
    check(min_kl >= 0.0, format!("negative KL {min_kl}"))?;

    for _ in 0..200 {
        let n = rng.random_range(1..300);
        let errs: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        let h = histogram(&errs, 0.0049).map_err(|e| e.to_string())?;
        let mass: f64 = h.probabilities.iter().sum();
        check(
            h.total() == n && (mass - 1.0).abs() < 1e-12,
            format!("histogram mass {mass}"),
        )?;
    }

    for _ in 0..200 {
        let s = rng.random_range(1..8);
        let a = DMatrix::from_fn(s, s, |_, _| rng.random_range(-1.0..1.0));
        let m = &a + a.transpose();
        let back = smat(&svec(&m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let diff = (&back - &m).abs().max();
        check(
            diff <= 1e-14 * m.abs().max().max(1.0),
            format!("svec round trip moved an entry by {diff:.1e}"),
        )?;
    }

    let mut worst_epi: f64 = 0.0;
    let mut worst_alpha: f64 = 0.0;
    for i in 0..3 {
        let cfg = GenConfig {
            n: 20,
            radio_range: 0.4,
            seed: derive_seed(21, i),
            ..GenConfig::default()
        };
        let (truth, g) = generate_instance(&cfg).map_err(|e| e.to_string())?;
        let m = build_model(
            ObjectiveKind::ProposedQp,
            &g,
            &truth.anchors,
            &ModelOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let r = solve(&m.program, &SolverSettings::default()).map_err(|e| e.to_string())?;
        check(
            r.status == SolveStatus::Optimal,
            format!("status {}", r.status),
        )?;
        let aux = m.aux.ok_or("QP model without epigraph slots")?;
        for (s, t) in [(aux.s1, aux.t1), (aux.s2, aux.t2)] {
            let (s, t) = (r.x[s], r.x[t]);
            worst_epi = worst_epi.max((t - s * s).abs() / (r.settings.tol_gap * t.max(1.0)));
        }
        let e = extract_errors(&m, &r).map_err(|e| e.to_string())?;
        worst_alpha = worst_alpha.max(e.max_discrepancy / r.settings.tol_feas);
    }
    check(
        worst_epi <= 10.0,
        format!("epigraph gap {worst_epi:.2} x tol_gap"),
    )?;
    check(
        worst_alpha <= 10.0,
        format!("error disagreement {worst_alpha:.2} x tol_feas"),
    )?;

    let mut cfg = ExperimentConfig::preset(SweepKind::Range);
    cfg.num_networks = 2;
    cfg.base.n = 15;
    cfg.record_timing = false;
    cfg.sweep = Sweep::Range {
        ranges: vec![0.4, 0.5],
    };
    let a = csv_bytes(&run_sweep(&cfg).map_err(|e| e.to_string())?)?;
    let b = csv_bytes(&run_sweep(&cfg).map_err(|e| e.to_string())?)?;
    check(a == b, "repeated sweep produced different CSV bytes")?;

    Ok(format!(
        "min KL {min_kl:.1e}, epigraph gap <= {worst_epi:.2} tol_gap, error agreement <= {worst_alpha:.2} tol_feas, CSV bytes identical"
    ))
}

fn report(index: usize, name: &str, outcome: Outcome) -> bool {
    match outcome {
        Ok(detail) => {
            println!("PASS criterion {index} ({name}): {detail}");
            true
        }
        Err(detail) => {
            println!("FAIL criterion {index} ({name}): {detail}");
            false
        }
    }
}

fn main() {
    let mut ok = true;
    ok &= report(1, "solver correctness", solver_correctness());
    ok &= report(2, "zero-noise recovery", zero_noise_recovery());
    match entropy_study() {
        Ok(entropy) => {
            ok &= report(3, "relative entropy ordering", entropy_ordering(&entropy));
            ok &= report(4, "accuracy ordering", accuracy_ordering(&entropy));
            ok &= report(5, "gamma plateau", gamma_plateau());
            ok &= report(6, "tail suppression", tail_suppression(&entropy));
        }
        Err(e) => {
            for (i, name) in [
                (3, "relative entropy ordering"),
                (4, "accuracy ordering"),
                (6, "tail suppression"),
            ] {
                ok &= report(i, name, Err(e.clone()));
            }
            ok &= report(5, "gamma plateau", gamma_plateau());
        }
    }
    ok &= report(7, "timing shape", timing_shape());
    ok &= report(8, "invariant suites", invariant_suites());
    if !ok {
        std::process::exit(1);
    }
}
