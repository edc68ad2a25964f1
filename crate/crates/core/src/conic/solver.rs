//! Infeasible-start primal-dual path-following interior-point method.
//!
//! Each iteration scales every block with its Nesterov-Todd scaling, forms
//! the Schur complement `M = A H A'` densely, factors it once and solves an
//! affine predictor and a Mehrotra corrector with the same factor.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, LU};
use thiserror::Error;

use super::cones::{identity, is_interior, jordan_prod, min_eig, Scaling};
use super::program::{ConeBlock, ConeProgram, Diagnostic};
use super::svec::{side_from_len, tri_len};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Relative duality-gap tolerance.
    pub tol_gap: f64,
    /// Relative primal and dual residual tolerance.
    pub tol_feas: f64,
    pub max_iters: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    pub predictor_corrector: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_gap: 1e-7,
            tol_feas: 1e-7,
            max_iters: 100,
            step_fraction: 0.98,
            predictor_corrector: true,
        }
    }
}

impl SolverSettings {
    fn check(&self) -> Result<(), SolverError> {
        let ok = self.tol_gap > 0.0
            && self.tol_feas > 0.0
            && self.step_fraction > 0.0
            && self.step_fraction < 1.0
            && self.max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(SolverError::BadSettings(*self))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
    SuspectedInfeasible,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::SuspectedInfeasible => "suspected_infeasible",
        }
    }

    /// Whether the returned iterate is usable for extraction.
    pub fn has_solution(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::MaxIterations)
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-iteration log entry, recorded before the step is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub iter: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `<x, z>` divided by the barrier degree.
    pub mu: f64,
    pub gap: f64,
    pub res_primal: f64,
    pub res_dual: f64,
    /// Smallest cone eigenvalue over all blocks of `x` and of `z`.
    pub x_margin: f64,
    pub z_margin: f64,
    /// Step length taken from this iterate (0 for the last entry).
    pub step: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// Relative duality gap of the returned iterate.
    pub gap: f64,
    pub res_primal: f64,
    pub res_dual: f64,
    pub iterations: usize,
    /// Seconds spent inside [`solve`].
    pub wall_time: f64,
    pub message: Option<String>,
    pub settings: SolverSettings,
    pub history: Vec<IterationStats>,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid cone program: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidProgram(Vec<Diagnostic>),
    #[error("invalid solver settings: {0:?}")]
    BadSettings(SolverSettings),
}

/// Rows of `A` restricted to one block.
struct BlockRows {
    block: ConeBlock,
    offset: usize,
    len: usize,
    rows: Vec<usize>,
    /// Local (in-block) sparse entries per touching row.
    entries: Vec<Vec<(usize, f64)>>,
    /// Full-matrix triplets `(i, j, a)` per touching row; PSD blocks only.
    triplets: Vec<Vec<(usize, usize, f64)>>,
    /// `(row, coef)` per local variable; nonnegative and second-order blocks.
    columns: Vec<Vec<(usize, f64)>>,
}

struct Workspace<'a> {
    p: &'a ConeProgram,
    m: usize,
    n: usize,
    b: Vec<f64>,
    blocks: Vec<BlockRows>,
    degree: f64,
    norm_b: f64,
    norm_c: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn slot_pairs(side: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(tri_len(side));
    for j in 0..side {
        for i in j..side {
            out.push((i, j));
        }
    }
    out
}

impl<'a> Workspace<'a> {
    fn new(p: &'a ConeProgram) -> Self {
        let offsets = p.block_offsets();
        let mut blocks: Vec<BlockRows> = p
            .blocks
            .iter()
            .zip(&offsets)
            .map(|(b, &off)| BlockRows {
                block: *b,
                offset: off,
                len: b.len(),
                rows: Vec::new(),
                entries: Vec::new(),
                triplets: Vec::new(),
                columns: match b {
                    ConeBlock::NonNeg(k) => vec![Vec::new(); *k],
                    _ => Vec::new(),
                },
            })
            .collect();
        let block_of = |j: usize| offsets.partition_point(|&o| o <= j) - 1;
        for (ri, row) in p.eq_rows.iter().enumerate() {
            let mut per_block: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
            for &(j, a) in &row.entries {
                if a == 0.0 {
                    continue;
                }
                let bi = block_of(j);
                let local = j - offsets[bi];
                match per_block.iter_mut().find(|(b, _)| *b == bi) {
                    Some((_, e)) => e.push((local, a)),
                    None => per_block.push((bi, vec![(local, a)])),
                }
            }
            for (bi, e) in per_block {
                let br = &mut blocks[bi];
                if matches!(br.block, ConeBlock::NonNeg(_)) {
                    for &(l, a) in &e {
                        br.columns[l].push((ri, a));
                    }
                }
                br.rows.push(ri);
                br.entries.push(e);
            }
        }
        for br in &mut blocks {
            if let ConeBlock::Psd(side) = br.block {
                let pairs = slot_pairs(side);
                br.triplets = br
                    .entries
                    .iter()
                    .map(|e| {
                        let mut t = Vec::with_capacity(2 * e.len());
                        for &(k, a) in e {
                            let (i, j) = pairs[k];
                            if i == j {
                                t.push((i, i, a));
                            } else {
                                let h = a * std::f64::consts::FRAC_1_SQRT_2;
                                t.push((i, j, h));
                                t.push((j, i, h));
                            }
                        }
                        t
                    })
                    .collect();
            }
        }
        let b: Vec<f64> = p.eq_rows.iter().map(|r| r.rhs).collect();
        Self {
            p,
            m: p.eq_rows.len(),
            n: p.num_vars,
            norm_b: norm(&b),
            norm_c: norm(&p.objective),
            b,
            blocks,
            degree: p.barrier_degree() as f64,
        }
    }

    fn a_mul(&self, x: &[f64], out: &mut [f64]) {
        for (o, r) in out.iter_mut().zip(&self.p.eq_rows) {
            *o = r.dot(x);
        }
    }

    fn at_mul(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (yi, r) in y.iter().zip(&self.p.eq_rows) {
            for &(j, a) in &r.entries {
                out[j] += a * yi;
            }
        }
    }

    /// SDPT3-style starting point: scaled block identities.
    fn initial_point(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut x = vec![0.0; self.n];
        let mut z = vec![0.0; self.n];
        for br in &self.blocks {
            let nb = match br.block {
                ConeBlock::Psd(s) => s as f64,
                ConeBlock::SecondOrder(_) => 1.0,
                ConeBlock::NonNeg(_) => 1.0,
            };
            let mut ratio: f64 = 0.0;
            let mut a_max: f64 = 0.0;
            for (ri, e) in br.rows.iter().zip(&br.entries) {
                let an = e.iter().map(|(_, a)| a * a).sum::<f64>().sqrt();
                ratio = ratio.max((1.0 + self.b[*ri].abs()) / (1.0 + an));
                a_max = a_max.max(an);
            }
            let c_b = norm(&self.p.objective[br.offset..br.offset + br.len]);
            let xi = 10f64.max(nb.sqrt()).max(nb * ratio);
            let eta = 10f64.max(nb.sqrt()).max(a_max).max(c_b);
            let xs = &mut x[br.offset..br.offset + br.len];
            identity(br.block, xs);
            xs.iter_mut().for_each(|v| *v *= xi);
            let zs = &mut z[br.offset..br.offset + br.len];
            identity(br.block, zs);
            zs.iter_mut().for_each(|v| *v *= eta);
        }
        (x, vec![0.0; self.m], z)
    }

    fn scalings(&self, x: &[f64], z: &[f64]) -> Option<Vec<Scaling>> {
        self.blocks
            .iter()
            .map(|br| {
                let r = br.offset..br.offset + br.len;
                Scaling::new(br.block, &x[r.clone()], &z[r]).ok()
            })
            .collect()
    }

    /// Schur complement `A H A'` split as `M_s + sum_k sign_k u_k u_k'`.
    ///
    /// Second-order blocks have `H = beta^2 (I + 2 w w' - 2 e0 e0')`; only the
    /// diagonal part enters `M_s`. Forming the rank-two rest densely would
    /// swamp the diagonal information once `w` grows near the boundary.
    fn schur(&self, sc: &[Scaling]) -> (DMatrix<f64>, Vec<(Vec<f64>, f64)>) {
        let m = self.m;
        let mut mm = DMatrix::<f64>::zeros(m, m);
        let mut low_rank = Vec::new();
        for (br, s) in self.blocks.iter().zip(sc) {
            if br.rows.is_empty() {
                continue;
            }
            match (br.block, s) {
                (ConeBlock::NonNeg(_), Scaling::NonNeg { w, .. }) => {
                    for (l, col) in br.columns.iter().enumerate() {
                        let hl = w[l] * w[l];
                        for &(i, ai) in col {
                            for &(j, aj) in col {
                                mm[(i, j)] += hl * ai * aj;
                            }
                        }
                    }
                }
                (ConeBlock::SecondOrder(_), Scaling::Soc { beta, wbar, .. }) => {
                    // beta^2 A_b A_b', dense since shaping rows share a
                    // full sum over the block
                    let k = br.rows.len();
                    let mut ab = DMatrix::<f64>::zeros(k, br.len);
                    for (a, e) in br.entries.iter().enumerate() {
                        for &(l, v) in e {
                            ab[(a, l)] += beta * v;
                        }
                    }
                    let g = &ab * ab.transpose();
                    for a in 0..k {
                        for b in 0..k {
                            mm[(br.rows[a], br.rows[b])] += g[(a, b)];
                        }
                    }
                    let scale = std::f64::consts::SQRT_2 * beta;
                    let mut u = vec![0.0; m];
                    let mut e0 = vec![0.0; m];
                    for (&ri, e) in br.rows.iter().zip(&br.entries) {
                        u[ri] = scale * e.iter().map(|&(l, a)| a * wbar[l]).sum::<f64>();
                        e0[ri] = scale
                            * e.iter()
                                .filter(|(l, _)| *l == 0)
                                .map(|(_, a)| a)
                                .sum::<f64>();
                    }
                    low_rank.push((u, 1.0));
                    if e0.iter().any(|v| *v != 0.0) {
                        low_rank.push((e0, -1.0));
                    }
                }
                (ConeBlock::Psd(_), Scaling::Psd { g, .. }) => {
                    let k = br.rows.len();
                    for a in 0..k {
                        let ta = &br.triplets[a];
                        for bidx in a..k {
                            let tb = &br.triplets[bidx];
                            let mut acc = 0.0;
                            // trace(A_a G A_b G)
                            for &(p, q, u) in ta {
                                for &(r, s2, v) in tb {
                                    acc += u * v * g[(q, r)] * g[(s2, p)];
                                }
                            }
                            let (ri, rj) = (br.rows[a], br.rows[bidx]);
                            mm[(ri, rj)] += acc;
                            if ri != rj {
                                mm[(rj, ri)] += acc;
                            }
                        }
                    }
                }
                _ => unreachable!("scaling kind matches block kind"),
            }
        }
        (mm, low_rank)
    }

    fn block_apply<F>(&self, sc: &[Scaling], v: &[f64], f: F) -> Vec<f64>
    where
        F: Fn(&Scaling, &[f64], &mut [f64]),
    {
        let mut out = vec![0.0; self.n];
        for (br, s) in self.blocks.iter().zip(sc) {
            let r = br.offset..br.offset + br.len;
            f(s, &v[r.clone()], &mut out[r]);
        }
        out
    }
}

struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    dx_s: Vec<f64>,
    dz_s: Vec<f64>,
}

/// `U`, `M_s^{-1} U` and the LU factor of `S + U' M_s^{-1} U`.
type LowRankCorrection = (DMatrix<f64>, DMatrix<f64>, LU<f64, Dyn, Dyn>);

/// Solves `(M_s + U S U') v = r` by Sherman-Morrison-Woodbury on top of a
/// Cholesky factor of `M_s`.
struct SchurSolver {
    chol: Cholesky<f64, Dyn>,
    correction: Option<LowRankCorrection>,
}

impl SchurSolver {
    fn new(chol: Cholesky<f64, Dyn>, low_rank: Vec<(Vec<f64>, f64)>) -> Option<Self> {
        if low_rank.is_empty() {
            return Some(Self {
                chol,
                correction: None,
            });
        }
        let m = low_rank[0].0.len();
        let k = low_rank.len();
        let u = DMatrix::from_fn(m, k, |i, j| low_rank[j].0[i]);
        let y = chol.solve(&u);
        let mut small = u.transpose() * &y;
        for (j, (_, sign)) in low_rank.iter().enumerate() {
            small[(j, j)] += sign;
        }
        let lu = small.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Self {
            chol,
            correction: Some((u, y, lu)),
        })
    }

    fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut t = self.chol.solve(r);
        if let Some((u, y, lu)) = &self.correction {
            if let Some(c) = lu.solve(&(u.transpose() * &t)) {
                t -= y * c;
            }
        }
        t
    }
}

struct NewtonSystem<'w, 'a> {
    ws: &'w Workspace<'a>,
    sc: Vec<Scaling>,
    schur: SchurSolver,
}

impl NewtonSystem<'_, '_> {
    /// Solves the linearized KKT system with scaled complementarity rhs `q`:
    /// `A dx = rp`, `A' dy + dz = rd`, `W^{-T} dx + W dz = q`.
    fn solve(&self, rp: &[f64], rd: &[f64], q: &[f64]) -> Direction {
        let ws = self.ws;
        let wtq = ws.block_apply(&self.sc, q, |s, v, o| s.apply_wt(v, o));
        let hrd = ws.block_apply(&self.sc, rd, |s, v, o| s.apply_h(v, o));
        let t: Vec<f64> = wtq.iter().zip(&hrd).map(|(a, b)| a - b).collect();
        let mut at = vec![0.0; ws.m];
        ws.a_mul(&t, &mut at);
        let rhs: Vec<f64> = rp.iter().zip(&at).map(|(a, b)| a - b).collect();
        let mut dy = self.schur.solve(&DVector::from_vec(rhs.clone()));
        // Iterative refinement against the unfactored operator. The Schur
        // residual equals the error in A dx = rp, so it is driven down while
        // it keeps shrinking.
        let mut aty = vec![0.0; ws.n];
        let mut m_dy = vec![0.0; ws.m];
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            ws.at_mul(dy.as_slice(), &mut aty);
            let h_aty = ws.block_apply(&self.sc, &aty, |s, v, o| s.apply_h(v, o));
            ws.a_mul(&h_aty, &mut m_dy);
            let res: Vec<f64> = rhs.iter().zip(&m_dy).map(|(a, b)| a - b).collect();
            let rn = norm(&res);
            if rn > 0.5 * last {
                break;
            }
            last = rn;
            dy += self.schur.solve(&DVector::from_vec(res));
        }
        let mut dy = dy.as_slice().to_vec();
        ws.at_mul(&dy, &mut aty);
        let mut dz: Vec<f64> = rd.iter().zip(&aty).map(|(a, b)| a - b).collect();
        let hdz = ws.block_apply(&self.sc, &dz, |s, v, o| s.apply_h(v, o));
        let mut dx: Vec<f64> = wtq.iter().zip(&hdz).map(|(a, b)| a - b).collect();
        // Near the boundary H amplifies the rounding in rd - A'dy, which shows
        // up as an error in A dx = rp. Correcting by (H A' dy', -A' dy', dy')
        // with M dy' = rp - A dx leaves the other two equations untouched.
        let mut adx = vec![0.0; ws.m];
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            ws.a_mul(&dx, &mut adx);
            let res: Vec<f64> = rp.iter().zip(&adx).map(|(a, b)| a - b).collect();
            let rn = norm(&res);
            if rn > 0.5 * last || rn == 0.0 {
                break;
            }
            last = rn;
            let corr = self.schur.solve(&DVector::from_vec(res));
            ws.at_mul(corr.as_slice(), &mut aty);
            let h_aty = ws.block_apply(&self.sc, &aty, |s, v, o| s.apply_h(v, o));
            for k in 0..ws.n {
                dx[k] += h_aty[k];
                dz[k] -= aty[k];
            }
            for (d, c) in dy.iter_mut().zip(corr.iter()) {
                *d += c;
            }
        }
        let dz_s = ws.block_apply(&self.sc, &dz, |s, v, o| s.apply_w(v, o));
        let dx_s = ws.block_apply(&self.sc, &dx, |s, v, o| s.apply_w_inv_t(v, o));
        Direction {
            dx,
            dy,
            dz,
            dx_s,
            dz_s,
        }
    }

    fn max_step(&self, d: &Direction) -> f64 {
        let mut a = f64::INFINITY;
        for (br, s) in self.ws.blocks.iter().zip(&self.sc) {
            let r = br.offset..br.offset + br.len;
            a = a.min(s.max_step(&d.dx_s[r.clone()]));
            a = a.min(s.max_step(&d.dz_s[r]));
        }
        a
    }

    fn lambda_sq_plus(&self, extra: Option<(&[f64], &[f64])>, target: f64) -> Vec<f64> {
        // r = target * e - lambda o lambda - extra_x o extra_z
        let ws = self.ws;
        let mut r = vec![0.0; ws.n];
        let mut tmp = vec![0.0; ws.n];
        for (br, s) in ws.blocks.iter().zip(&self.sc) {
            let rg = br.offset..br.offset + br.len;
            let lam = s.lambda();
            identity(br.block, &mut r[rg.clone()]);
            r[rg.clone()].iter_mut().for_each(|v| *v *= target);
            jordan_prod(br.block, lam, lam, &mut tmp[rg.clone()]);
            for (a, b) in r[rg.clone()].iter_mut().zip(&tmp[rg.clone()]) {
                *a -= b;
            }
            if let Some((ex, ez)) = extra {
                jordan_prod(
                    br.block,
                    &ex[rg.clone()],
                    &ez[rg.clone()],
                    &mut tmp[rg.clone()],
                );
                for (a, b) in r[rg.clone()].iter_mut().zip(&tmp[rg.clone()]) {
                    *a -= b;
                }
            }
        }
        r
    }

    fn lambda_div(&self, r: &[f64]) -> Vec<f64> {
        self.ws
            .block_apply(&self.sc, r, |s, v, o| s.jordan_div(v, o))
    }
}

/// Factors `M`, returning the factor and the smallest pivot ratio `L_ii^2 / M_ii`.
fn factor(mut mm: DMatrix<f64>, reg: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let diag: Vec<f64> = mm.diagonal().iter().copied().collect();
    if reg > 0.0 {
        let dmax = diag.iter().copied().fold(0.0, f64::max);
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg * dmax;
        }
    }
    let chol = Cholesky::new(mm)?;
    let l = chol.l_dirty();
    let mut ratio = f64::INFINITY;
    for (i, d) in diag.iter().enumerate() {
        let piv = l[(i, i)] * l[(i, i)];
        ratio = ratio.min(if *d > 0.0 { piv / d } else { 0.0 });
    }
    Some((chol, ratio))
}

#[derive(Clone)]
struct Snapshot {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    stats: IterationStats,
    merit: f64,
}

/// Solves a cone program.
///
/// Structural problems are reported as [`SolverError::InvalidProgram`];
/// numerical trouble is reported through [`SolveResult::status`].
pub fn solve(p: &ConeProgram, settings: &SolverSettings) -> Result<SolveResult, SolverError> {
    settings.check()?;
    let diags = p.validate();
    if !diags.is_empty() {
        return Err(SolverError::InvalidProgram(diags));
    }
    for b in &p.blocks {
        if let ConeBlock::Psd(s) = b {
            debug_assert_eq!(side_from_len(tri_len(*s)), Some(*s));
        }
    }
    let start = Instant::now();
    let ws = Workspace::new(p);
    let (mut x, mut y, mut z) = ws.initial_point();

    let mut history: Vec<IterationStats> = Vec::new();
    let mut best: Option<Snapshot> = None;
    let status;
    let mut message = None;
    let mut small_steps = 0usize;

    let mut ax = vec![0.0; ws.m];
    let mut aty = vec![0.0; ws.n];
    let mut iter = 0usize;
    loop {
        ws.a_mul(&x, &mut ax);
        ws.at_mul(&y, &mut aty);
        let rp: Vec<f64> = ws.b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let rd: Vec<f64> = p
            .objective
            .iter()
            .zip(&aty)
            .zip(&z)
            .map(|((c, a), z)| c - a - z)
            .collect();
        let pobj = p.primal_objective(&x);
        let dobj = dot(&ws.b, &y);
        let xz = dot(&x, &z);
        let mu = xz / ws.degree;
        let denom = 1.0 + pobj.abs() + dobj.abs();
        let gap = xz.max((pobj - dobj).abs()) / denom;
        let res_primal = norm(&rp) / (1.0 + ws.norm_b);
        let res_dual = norm(&rd) / (1.0 + ws.norm_c);
        let (x_margin, z_margin) = cone_margins(&ws, &x, &z);
        let stats = IterationStats {
            iter,
            primal_objective: pobj,
            dual_objective: dobj,
            mu,
            gap,
            res_primal,
            res_dual,
            x_margin,
            z_margin,
            step: 0.0,
            sigma: 0.0,
        };
        let merit = (gap / settings.tol_gap)
            .max(res_primal / settings.tol_feas)
            .max(res_dual / settings.tol_feas);
        if best.as_ref().is_none_or(|b| merit <= b.merit) {
            best = Some(Snapshot {
                x: x.clone(),
                y: y.clone(),
                z: z.clone(),
                stats: stats.clone(),
                merit,
            });
        }
        history.push(stats);

        if gap <= settings.tol_gap
            && res_primal <= settings.tol_feas
            && res_dual <= settings.tol_feas
        {
            status = SolveStatus::Optimal;
            break;
        }
        if iter >= settings.max_iters {
            status = SolveStatus::MaxIterations;
            break;
        }
        if stagnating_infeasible(&history) {
            status = SolveStatus::SuspectedInfeasible;
            message = Some("feasibility residuals stagnate while the gap does not close".into());
            break;
        }

        let Some(sc) = ws.scalings(&x, &z) else {
            status = SolveStatus::NumericalFailure;
            message = Some("iterate left the interior of the cone".into());
            break;
        };
        let (mm, low_rank) = ws.schur(&sc);
        let chol = if iter == 0 {
            match factor(mm, 0.0) {
                Some((c, ratio)) if ratio > 1e-12 => c,
                _ => {
                    status = SolveStatus::NumericalFailure;
                    message = Some("equality rows appear linearly dependent".into());
                    break;
                }
            }
        } else {
            match factor(mm.clone(), 0.0).filter(|(_, r)| *r > 1e-24) {
                Some((c, _)) => c,
                None => match factor(mm, 1e-13) {
                    Some((c, _)) => c,
                    None => {
                        status = SolveStatus::NumericalFailure;
                        message = Some("Schur complement factorization broke down".into());
                        break;
                    }
                },
            }
        };
        let Some(schur) = SchurSolver::new(chol, low_rank) else {
            status = SolveStatus::NumericalFailure;
            message = Some("low-rank Schur correction is singular".into());
            break;
        };
        let sys = NewtonSystem { ws: &ws, sc, schur };

        let (dir, sigma) = if settings.predictor_corrector {
            let r_aff = sys.lambda_sq_plus(None, 0.0);
            let q_aff = sys.lambda_div(&r_aff);
            let aff = sys.solve(&rp, &rd, &q_aff);
            let a_aff = sys.max_step(&aff).min(1.0);
            let sigma = (1.0 - a_aff).clamp(0.0, 1.0).powi(3);
            let r = sys.lambda_sq_plus(Some((&aff.dx_s, &aff.dz_s)), sigma * mu);
            let q = sys.lambda_div(&r);
            (sys.solve(&rp, &rd, &q), sigma)
        } else {
            let sigma = 0.3;
            let r = sys.lambda_sq_plus(None, sigma * mu);
            let q = sys.lambda_div(&r);
            (sys.solve(&rp, &rd, &q), sigma)
        };
        let amax = sys.max_step(&dir);
        let mut alpha = (settings.step_fraction * amax).min(1.0);
        if !alpha.is_finite()
            || dir
                .dx
                .iter()
                .chain(&dir.dz)
                .chain(&dir.dy)
                .any(|v| !v.is_finite())
        {
            status = SolveStatus::NumericalFailure;
            message = Some("non-finite search direction".into());
            break;
        }
        // Near a low-rank optimum the scaled step bound can be off by
        // rounding; shrink until both iterates are strictly interior.
        let mut x_new = vec![0.0; ws.n];
        let mut z_new = vec![0.0; ws.n];
        let mut interior = false;
        for _ in 0..BACKTRACK_LIMIT {
            for k in 0..ws.n {
                x_new[k] = x[k] + alpha * dir.dx[k];
                z_new[k] = z[k] + alpha * dir.dz[k];
            }
            interior = ws.blocks.iter().all(|br| {
                let r = br.offset..br.offset + br.len;
                is_interior(br.block, &x_new[r.clone()]) && is_interior(br.block, &z_new[r])
            });
            if interior {
                break;
            }
            alpha *= BACKTRACK_FACTOR;
        }
        if !interior {
            status = SolveStatus::NumericalFailure;
            message = Some("no step keeps the iterate inside the cone".into());
            break;
        }
        if let Some(last) = history.last_mut() {
            last.step = alpha;
            last.sigma = sigma;
        }
        x = x_new;
        z = z_new;
        for (a, d) in y.iter_mut().zip(&dir.dy) {
            *a += alpha * d;
        }
        iter += 1;
        if alpha < 1e-8 {
            small_steps += 1;
            if small_steps >= 3 {
                let s = history.last().expect("history is nonempty");
                if s.res_primal.max(s.res_dual) > 1e-3 {
                    status = SolveStatus::SuspectedInfeasible;
                    message = Some("step length collapsed before reaching feasibility".into());
                } else {
                    status = SolveStatus::NumericalFailure;
                    message = Some("step length collapsed".into());
                }
                break;
            }
        } else {
            small_steps = 0;
        }
    }

    let (x, y, z, stats) = if status == SolveStatus::Optimal {
        let s = history.last().cloned().expect("history is nonempty");
        (x, y, z, s)
    } else {
        let b = best.expect("at least one iterate was recorded");
        (b.x, b.y, b.z, b.stats)
    };
    Ok(SolveResult {
        status,
        primal_objective: stats.primal_objective,
        dual_objective: stats.dual_objective,
        gap: stats.gap,
        res_primal: stats.res_primal,
        res_dual: stats.res_dual,
        x,
        y,
        z,
        iterations: iter,
        wall_time: start.elapsed().as_secs_f64(),
        message,
        settings: *settings,
        history,
    })
}

const REFINE_STEPS: usize = 5;
const BACKTRACK_LIMIT: usize = 30;
const BACKTRACK_FACTOR: f64 = 0.8;

fn cone_margins(ws: &Workspace<'_>, x: &[f64], z: &[f64]) -> (f64, f64) {
    let mut mx = f64::INFINITY;
    let mut mz = f64::INFINITY;
    for br in &ws.blocks {
        let r = br.offset..br.offset + br.len;
        mx = mx.min(min_eig(br.block, &x[r.clone()]));
        mz = mz.min(min_eig(br.block, &z[r]));
    }
    (mx, mz)
}

fn stagnating_infeasible(history: &[IterationStats]) -> bool {
    const WINDOW: usize = 10;
    let k = history.len();
    if k < 2 * WINDOW {
        return false;
    }
    let now = &history[k - 1];
    let then = &history[k - 1 - WINDOW];
    let feas_now = now.res_primal.max(now.res_dual);
    let feas_then = then.res_primal.max(then.res_dual);
    feas_now > 1e-3 && feas_now > 0.5 * feas_then
}
