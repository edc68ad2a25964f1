#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wsnloc::conic::{ConeBlock, ConeProgram};

/// Standard-form LP `min c'x, A x = b, x >= 0` kept alongside its dense data.
pub struct RandomLp {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl RandomLp {
    /// Strictly feasible on both sides: `b = A x0` and `c = A'y0 + z0` with
    /// `x0, z0 > 0`, so the optimum exists and is attained at a vertex.
    pub fn generate(seed: u64, rows: usize, vars: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(rows, vars, |_, _| rng.random_range(-1.0..1.0));
        let x0 = DVector::from_fn(vars, |_, _| rng.random_range(0.2..1.5));
        let y0 = DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0));
        let z0 = DVector::from_fn(vars, |_, _| rng.random_range(0.1..1.0));
        let b = &a * x0;
        let c = a.transpose() * y0 + z0;
        Self { a, b, c }
    }

    pub fn program(&self) -> ConeProgram {
        let (m, n) = self.a.shape();
        let mut p = ConeProgram::new();
        p.add_block(ConeBlock::NonNeg(n));
        p.objective = self.c.iter().copied().collect();
        for i in 0..m {
            p.add_row((0..n).map(|j| (j, self.a[(i, j)])).collect(), self.b[i]);
        }
        p
    }

    /// Minimum of `c'x` over all basic feasible solutions.
    pub fn vertex_optimum(&self) -> Option<f64> {
        let (m, n) = self.a.shape();
        let mut best: Option<f64> = None;
        for basis in combinations(n, m) {
            let sub = DMatrix::from_fn(m, m, |i, k| self.a[(i, basis[k])]);
            let Some(xb) = sub.lu().solve(&self.b) else {
                continue;
            };
            if xb.iter().any(|v| *v < -1e-9 || !v.is_finite()) {
                continue;
            }
            let obj: f64 = basis
                .iter()
                .zip(xb.iter())
                .map(|(&j, x)| self.c[j] * x)
                .sum();
            best = Some(best.map_or(obj, |b: f64| b.min(obj)));
        }
        best
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + n - k) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}
