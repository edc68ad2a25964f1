mod common;

use common::{combinations, RandomLp};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use wsnloc::conic::{
    smat, solve, svec, svec_index, tri_len, ConeBlock, ConeProgram, SolveResult, SolveStatus,
    SolverSettings,
};

fn run(p: &ConeProgram) -> SolveResult {
    solve(p, &SolverSettings::default()).unwrap()
}

fn residual_slack(p: &ConeProgram, r: &SolveResult) -> f64 {
    let b_norm = p
        .eq_rows
        .iter()
        .map(|row| row.rhs * row.rhs)
        .sum::<f64>()
        .sqrt();
    let c_norm = p.objective.iter().map(|c| c * c).sum::<f64>().sqrt();
    let x_norm = r.x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let y_norm = r.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    r.res_primal * (1.0 + b_norm) * y_norm + r.res_dual * (1.0 + c_norm) * x_norm
}

fn check_trajectory(r: &SolveResult) {
    for h in &r.history {
        assert!(
            h.x_margin > 0.0 && h.z_margin > 0.0,
            "iterate {} left the cone",
            h.iter
        );
    }
    for w in r.history.windows(2) {
        assert!(
            w[1].mu <= 10.0 * w[0].mu,
            "mu jumped at iteration {}",
            w[1].iter
        );
    }
}

#[test]
fn combinations_count() {
    assert_eq!(combinations(5, 2).len(), 10);
    assert_eq!(combinations(20, 3).len(), 1140);
    assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
}

#[test]
fn vertex_oracle_on_known_lp() {
    // min x0 + 2 x1 s.t. x0 + x1 + x2 = 1 has its optimum 0 at x2 = 1
    let lp = RandomLp {
        a: DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
        b: nalgebra::DVector::from_vec(vec![1.0]),
        c: nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.0]),
    };
    assert_eq!(lp.vertex_optimum(), Some(0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_lp_matches_vertex_enumeration(seed in any::<u64>(), rows in 1usize..5, extra in 1usize..16) {
        let vars = (rows + extra).min(20);
        let lp = RandomLp::generate(seed, rows, vars);
        let oracle = lp.vertex_optimum().unwrap();
        let r = run(&lp.program());
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert!((r.primal_objective - oracle).abs() < 1e-6, "{} vs {}", r.primal_objective, oracle);
        check_trajectory(&r);
    }

    #[test]
    fn smallest_eigenvalue_by_trace_constraint(entries in proptest::collection::vec(-2.0f64..2.0, 10)) {
        // min <C, X> with trace X = 1 equals lambda_min(C)
        let c = smat(&entries).unwrap();
        let c = (&c + c.transpose()) * 0.5;
        let want = SymmetricEigen::new(c.clone()).eigenvalues.min();
        let mut p = ConeProgram::new();
        p.add_block(ConeBlock::Psd(4));
        p.objective = svec(&c).unwrap();
        p.add_row((0..4).map(|i| (svec_index(4, i, i), 1.0)).collect(), 1.0);
        let r = run(&p);
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert!((r.primal_objective - want).abs() < 1e-6);
        check_trajectory(&r);
    }

    #[test]
    fn linear_over_unit_ball(a in proptest::collection::vec(-3.0f64..3.0, 4)) {
        // min a'u with ||u|| <= 1 equals -||a||
        let mut p = ConeProgram::new();
        p.add_block(ConeBlock::SecondOrder(5));
        p.objective[1..].copy_from_slice(&a);
        p.add_row(vec![(0, 1.0)], 1.0);
        let r = run(&p);
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert!((r.primal_objective + norm).abs() < 1e-6);
    }

    #[test]
    fn weak_duality_along_the_path(seed in any::<u64>(), cap in 1usize..12) {
        // the best iterate returned after `cap` iterations is a valid
        // primal-dual pair whose gap is bounded below by the residuals
        let lp = RandomLp::generate(seed, 3, 8);
        let p = lp.program();
        let s = SolverSettings { max_iters: cap, ..Default::default() };
        let r = solve(&p, &s).unwrap();
        let gap = r.primal_objective - r.dual_objective;
        prop_assert!(gap >= -residual_slack(&p, &r) - 1e-9, "gap {gap}");
    }
}

#[test]
fn mixed_cone_program() {
    // X00 + X11 = 2, u = (X00 - 1, 1), s = t - 0.5 >= 0: the norm bound
    // t >= sqrt((X00 - 1)^2 + 1) is tightest at X00 = 1, so t* = 1.
    let mut p = ConeProgram::new();
    let x = p.add_block(ConeBlock::Psd(2));
    let soc = p.add_block(ConeBlock::SecondOrder(3));
    let s = p.add_block(ConeBlock::NonNeg(1));
    p.objective[soc.start] = 1.0;
    p.add_row(vec![(x.start, 1.0), (x.start + 2, 1.0)], 2.0);
    p.add_row(vec![(soc.start + 1, 1.0), (x.start, -1.0)], -1.0);
    p.add_row(vec![(soc.start + 2, 1.0)], 1.0);
    p.add_row(vec![(s.start, 1.0), (soc.start, -1.0)], -0.5);
    let r = run(&p);
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(
        (r.primal_objective - 1.0).abs() < 1e-6,
        "{}",
        r.primal_objective
    );
    check_trajectory(&r);
}

#[test]
fn deterministic_iterates() {
    let lp = RandomLp::generate(7, 4, 12);
    let p = lp.program();
    let a = run(&p);
    let b = run(&p);
    assert_eq!(a.x, b.x);
    assert_eq!(a.y, b.y);
    assert_eq!(a.z, b.z);
    assert_eq!(a.history, b.history);
}

#[test]
fn optimal_result_meets_tolerances() {
    let lp = RandomLp::generate(11, 3, 10);
    let r = run(&lp.program());
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.gap <= r.settings.tol_gap);
    assert!(r.res_primal <= r.settings.tol_feas && r.res_dual <= r.settings.tol_feas);
    assert!(r.x.iter().all(|v| *v > 0.0) && r.z.iter().all(|v| *v > 0.0));
}

#[test]
fn svec_side_lengths() {
    for s in 1..8 {
        let m = DMatrix::<f64>::identity(s, s);
        assert_eq!(svec(&m).unwrap().len(), tri_len(s));
    }
}
