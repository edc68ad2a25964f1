//! Localization cone programs and solution extraction.
//!
//! Every model shares the relaxed Gram matrix
//! `Z = [[I2, X], [X', Y]]` of side `n + 2`, stored as one PSD block. Sensor
//! `i` sits at row/column `2 + i`. Each measured edge gets one equality row
//! `q_e(Z) - err_e = d_hat_e^2`, so `err_e` is the model squared distance
//! minus the measured one.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::svec::smat_side;
use crate::conic::{svec_index, ConeBlock, ConeProgram, SolveResult, SolveStatus};
use crate::netgen::{MeasurementGraph, NetgenError, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ObjectiveKind {
    /// Sum of absolute slacks.
    BiswasYeL1,
    /// Euclidean norm of the error vector.
    LeastSquares,
    /// Mean/variance shaping model with the shift tied to the mean error.
    ProposedQp,
    /// Shaping model with the constant shift `1 / (2 gamma)`.
    ProposedQpGamma(f64),
}

impl ObjectiveKind {
    /// The three gamma-free objectives.
    pub const STANDARD: [ObjectiveKind; 3] = [
        ObjectiveKind::BiswasYeL1,
        ObjectiveKind::LeastSquares,
        ObjectiveKind::ProposedQp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::BiswasYeL1 => "biswas-ye",
            ObjectiveKind::LeastSquares => "ls",
            ObjectiveKind::ProposedQp => "qp",
            ObjectiveKind::ProposedQpGamma(_) => "qp-gamma",
        }
    }

    /// Round-trips through [`FromStr`]: `qp-gamma:<gamma>` for the gamma variant.
    pub fn label(&self) -> String {
        match self {
            ObjectiveKind::ProposedQpGamma(g) => format!("qp-gamma:{g}"),
            other => other.name().to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            ObjectiveKind::ProposedQpGamma(g) if !(g > 0.0 && g.is_finite()) => {
                Err(ModelError::InvalidGamma(g))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveKind::ProposedQpGamma(g) => write!(f, "qp-gamma({g})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for ObjectiveKind {
    type Err = String;

    /// Parses `biswas-ye`, `ls`, `qp` or `qp-gamma:<gamma>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "biswas-ye" => Ok(ObjectiveKind::BiswasYeL1),
            "ls" => Ok(ObjectiveKind::LeastSquares),
            "qp" => Ok(ObjectiveKind::ProposedQp),
            _ => {
                let g = s
                    .strip_prefix("qp-gamma:")
                    .ok_or_else(|| format!("unknown objective '{s}'"))?;
                let g: f64 = g.parse().map_err(|_| format!("bad gamma in '{s}'"))?;
                let k = ObjectiveKind::ProposedQpGamma(g);
                k.validate().map_err(|e| e.to_string())?;
                Ok(k)
            }
        }
    }
}

impl From<ObjectiveKind> for String {
    fn from(k: ObjectiveKind) -> String {
        k.label()
    }
}

impl TryFrom<String> for ObjectiveKind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelOptions {
    /// Adds `q(Z) >= r^2` rows (with slacks) for every unmeasured pair.
    pub include_range_lower_bounds: bool,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] NetgenError),
    #[error("graph has {graph} anchors but {given} anchor positions were given")]
    AnchorCount { graph: usize, given: usize },
    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("no solution to extract (solver status {0})")]
    BadStatus(SolveStatus),
    #[error("solution length {got} does not match program size {expected}")]
    SolutionLength { got: usize, expected: usize },
    #[error("edge {edge}: slack error and Z error differ by {diff:e}")]
    ErrorMismatch { edge: usize, diff: f64 },
}

/// A measured edge in canonical order: all sensor edges, then all anchor edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRef {
    Sensor { i: usize, j: usize },
    Anchor { j: usize, k: usize },
}

/// How the per-edge error is read from the variable vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorEncoding {
    /// `err_e = x[plus.start + e] - x[minus.start + e]`
    Split {
        plus: Range<usize>,
        minus: Range<usize>,
    },
    /// `err_e = u_e - mean_coef * sum(u) - shift_const` with `u = x[slots]`
    Slot {
        slots: Range<usize>,
        mean_coef: f64,
        shift_const: f64,
    },
}

/// Auxiliary scalars of the shaping models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QpAux {
    pub s1: usize,
    pub s2: usize,
    pub t1: usize,
    pub t2: usize,
}

#[derive(Debug, Clone)]
pub struct LocalizationModel {
    pub kind: ObjectiveKind,
    pub program: ConeProgram,
    pub n: usize,
    pub anchors: Vec<Point2>,
    pub z_block: Range<usize>,
    pub edge_order: Vec<EdgeRef>,
    pub d_hat: Vec<f64>,
    /// Equality row of every edge, in edge order.
    pub edge_rows: Range<usize>,
    pub errors: ErrorEncoding,
    pub aux: Option<QpAux>,
}

impl LocalizationModel {
    pub fn v(&self) -> usize {
        self.edge_order.len()
    }

    pub fn z_side(&self) -> usize {
        self.n + 2
    }

    /// Relaxed Gram matrix from a solution vector.
    pub fn z_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        smat_side(&x[self.z_block.clone()], self.z_side())
    }

    /// Vector `u` with `q_e(Z) = u' Z u`.
    pub fn edge_vector(&self, e: EdgeRef) -> Vec<f64> {
        let mut u = vec![0.0; self.z_side()];
        match e {
            EdgeRef::Sensor { i, j } => {
                u[2 + i] = 1.0;
                u[2 + j] = -1.0;
            }
            EdgeRef::Anchor { j, k } => {
                u[0] = self.anchors[k].x;
                u[1] = self.anchors[k].y;
                u[2 + j] = -1.0;
            }
        }
        u
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedPositions {
    pub x_hat: Vec<Point2>,
    /// Trailing `n x n` block of `Z`.
    pub y_block: DMatrix<f64>,
}

/// Per-edge errors read two ways from one solution.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeErrors {
    /// From the error variables.
    pub errors: Vec<f64>,
    /// `q_e(Z) - d_hat_e^2`.
    pub from_z: Vec<f64>,
    pub max_discrepancy: f64,
}

/// Sparse coefficients of `u' Z u` on the svec slots of `Z`.
fn quad_form_row(side: usize, offset: usize, u: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for (a, &(p, up)) in u.iter().enumerate() {
        for &(q, uq) in &u[..=a] {
            let c = if p == q { up * up } else { SQRT_2 * up * uq };
            if c != 0.0 {
                out.push((offset + svec_index(side, p, q), c));
            }
        }
    }
    out
}

fn sparse_edge_vector(e: EdgeRef, anchors: &[Point2]) -> Vec<(usize, f64)> {
    match e {
        EdgeRef::Sensor { i, j } => vec![(2 + i, 1.0), (2 + j, -1.0)],
        EdgeRef::Anchor { j, k } => vec![(0, anchors[k].x), (1, anchors[k].y), (2 + j, -1.0)],
    }
}

struct Skeleton {
    program: ConeProgram,
    z_block: Range<usize>,
    edge_order: Vec<EdgeRef>,
    d_hat: Vec<f64>,
    /// `q_e(Z)` coefficients per edge; callers append their error terms.
    edge_quads: Vec<Vec<(usize, f64)>>,
    lower_bounds: Vec<(Vec<(usize, f64)>, f64)>,
}

fn skeleton(
    g: &MeasurementGraph,
    anchors: &[Point2],
    opts: &ModelOptions,
) -> Result<Skeleton, ModelError> {
    g.validate()?;
    if anchors.len() != g.m {
        return Err(ModelError::AnchorCount {
            graph: g.m,
            given: anchors.len(),
        });
    }
    let side = g.n + 2;
    let mut program = ConeProgram::new();
    let z_block = program.add_named_block("Z", ConeBlock::Psd(side));
    let z0 = z_block.start;
    program.add_row(vec![(z0 + svec_index(side, 0, 0), 1.0)], 1.0);
    program.add_row(vec![(z0 + svec_index(side, 1, 1), 1.0)], 1.0);
    program.add_row(vec![(z0 + svec_index(side, 1, 0), 1.0)], 0.0);

    let mut edge_order = Vec::with_capacity(g.num_edges());
    let mut d_hat = Vec::with_capacity(g.num_edges());
    for e in &g.sensor_edges {
        edge_order.push(EdgeRef::Sensor { i: e.i, j: e.j });
        d_hat.push(e.d_hat);
    }
    for e in &g.anchor_edges {
        edge_order.push(EdgeRef::Anchor { j: e.j, k: e.k });
        d_hat.push(e.d_hat);
    }
    let edge_quads = edge_order
        .iter()
        .map(|&e| quad_form_row(side, z0, &sparse_edge_vector(e, anchors)))
        .collect();

    let mut lower_bounds = Vec::new();
    if opts.include_range_lower_bounds {
        let r2 = g.radio_range * g.radio_range;
        let measured: std::collections::BTreeSet<EdgeRef> = edge_order.iter().copied().collect();
        let mut push = |e: EdgeRef| {
            if !measured.contains(&e) {
                lower_bounds.push((quad_form_row(side, z0, &sparse_edge_vector(e, anchors)), r2));
            }
        };
        for i in 0..g.n {
            for j in (i + 1)..g.n {
                push(EdgeRef::Sensor { i, j });
            }
        }
        for j in 0..g.n {
            for k in 0..g.m {
                push(EdgeRef::Anchor { j, k });
            }
        }
    }
    Ok(Skeleton {
        program,
        z_block,
        edge_order,
        d_hat,
        edge_quads,
        lower_bounds,
    })
}

impl PartialOrd for EdgeRef {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EdgeRef {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let key = |e: &EdgeRef| match *e {
            EdgeRef::Sensor { i, j } => (0, i, j),
            EdgeRef::Anchor { j, k } => (1, j, k),
        };
        key(self).cmp(&key(other))
    }
}

impl Skeleton {
    /// Emits the edge rows (with the given error terms) and the optional
    /// lower-bound rows, then assembles the model.
    fn finish(
        mut self,
        kind: ObjectiveKind,
        n: usize,
        anchors: &[Point2],
        err_terms: impl Fn(usize) -> (Vec<(usize, f64)>, f64),
        errors: ErrorEncoding,
        aux: Option<QpAux>,
    ) -> LocalizationModel {
        let first = self.program.eq_rows.len();
        for (e, quad) in std::mem::take(&mut self.edge_quads).into_iter().enumerate() {
            let (terms, rhs_shift) = err_terms(e);
            let mut row = quad;
            row.extend(terms);
            let d = self.d_hat[e];
            self.program.add_row(row, d * d + rhs_shift);
        }
        let edge_rows = first..self.program.eq_rows.len();
        if !self.lower_bounds.is_empty() {
            let slack = self
                .program
                .add_named_block("range_slack", ConeBlock::NonNeg(self.lower_bounds.len()));
            for (idx, (mut row, rhs)) in std::mem::take(&mut self.lower_bounds)
                .into_iter()
                .enumerate()
            {
                row.push((slack.start + idx, -1.0));
                self.program.add_row(row, rhs);
            }
        }
        LocalizationModel {
            kind,
            program: self.program,
            n,
            anchors: anchors.to_vec(),
            z_block: self.z_block,
            edge_order: self.edge_order,
            d_hat: self.d_hat,
            edge_rows,
            errors,
            aux,
        }
    }
}

/// l1 model: minimize the sum of the slack pairs.
pub fn build_biswas_ye(
    g: &MeasurementGraph,
    anchors: &[Point2],
    opts: &ModelOptions,
) -> Result<LocalizationModel, ModelError> {
    let mut sk = skeleton(g, anchors, opts)?;
    let v = sk.edge_order.len();
    let alpha = sk
        .program
        .add_named_block("alpha", ConeBlock::NonNeg(2 * v));
    for c in &mut sk.program.objective[alpha.clone()] {
        *c = 1.0;
    }
    let plus = alpha.start..alpha.start + v;
    let minus = alpha.start + v..alpha.end;
    let (p0, m0) = (plus.start, minus.start);
    Ok(sk.finish(
        ObjectiveKind::BiswasYeL1,
        g.n,
        anchors,
        |e| (vec![(p0 + e, -1.0), (m0 + e, 1.0)], 0.0),
        ErrorEncoding::Split { plus, minus },
        None,
    ))
}

/// Least-squares model: minimize `s` with `||err|| <= s`.
pub fn build_least_squares(
    g: &MeasurementGraph,
    anchors: &[Point2],
    opts: &ModelOptions,
) -> Result<LocalizationModel, ModelError> {
    let mut sk = skeleton(g, anchors, opts)?;
    let v = sk.edge_order.len();
    let soc = sk
        .program
        .add_named_block("ls_soc", ConeBlock::SecondOrder(v + 1));
    sk.program.objective[soc.start] = 1.0;
    let u0 = soc.start + 1;
    Ok(sk.finish(
        ObjectiveKind::LeastSquares,
        g.n,
        anchors,
        |e| (vec![(u0 + e, -1.0)], 0.0),
        ErrorEncoding::Slot {
            slots: u0..soc.end,
            mean_coef: 0.0,
            shift_const: 0.0,
        },
        None,
    ))
}

/// Shaping model with `w` the mean error.
pub fn build_proposed_qp(
    g: &MeasurementGraph,
    anchors: &[Point2],
    opts: &ModelOptions,
) -> Result<LocalizationModel, ModelError> {
    build_shaping(g, anchors, opts, None)
}

/// Shaping model with the constant shift `1 / (2 gamma)`.
pub fn build_proposed_qp_gamma(
    g: &MeasurementGraph,
    anchors: &[Point2],
    gamma: f64,
    opts: &ModelOptions,
) -> Result<LocalizationModel, ModelError> {
    ObjectiveKind::ProposedQpGamma(gamma).validate()?;
    build_shaping(g, anchors, opts, Some(gamma))
}

/// Objective `v ||a + c 1||^2 + ||a - (sum a) 1||^2`, with `c` the mean of
/// `a` when `shift` is `None`.
pub fn shaping_objective(errors: &[f64], shift: Option<f64>) -> f64 {
    let v = errors.len() as f64;
    let sum: f64 = errors.iter().sum();
    let c = shift.unwrap_or(sum / v);
    let first: f64 = errors.iter().map(|a| (a + c).powi(2)).sum();
    let second: f64 = errors.iter().map(|a| (a - sum).powi(2)).sum();
    v * first + second
}

/// Variables: `Z`, `(s1, u1)` with `u1 = err + shift`, `(s2, u2)` with
/// `u2 = err - sum(err)`, and the epigraphs `[[1, s1], [s1, t1]]`,
/// `[[1, s2], [s2, t2]]`. For the mean-shift model `sum(u1) = 2 v w`, so `w`
/// is eliminated and every edge and link row carries a dense `sum(u1)` term.
fn build_shaping(
    g: &MeasurementGraph,
    anchors: &[Point2],
    opts: &ModelOptions,
    gamma: Option<f64>,
) -> Result<LocalizationModel, ModelError> {
    let mut sk = skeleton(g, anchors, opts)?;
    let v = sk.edge_order.len();
    let vf = v as f64;
    let c = gamma.map_or(0.0, |g| 1.0 / (2.0 * g));
    // err = u1 - kappa sum(u1) - c
    let kappa = if gamma.is_none() {
        1.0 / (2.0 * vf)
    } else {
        0.0
    };

    let p = &mut sk.program;
    let soc1 = p.add_named_block("soc1", ConeBlock::SecondOrder(v + 1));
    let soc2 = p.add_named_block("soc2", ConeBlock::SecondOrder(v + 1));
    let epi1 = p.add_named_block("epi1", ConeBlock::Psd(2));
    let epi2 = p.add_named_block("epi2", ConeBlock::Psd(2));
    let (s1, u1) = (soc1.start, soc1.start + 1);
    let (s2, u2) = (soc2.start, soc2.start + 1);
    let slot = |b: &Range<usize>, i, j| b.start + svec_index(2, i, j);
    let (t1, t2) = (slot(&epi1, 1, 1), slot(&epi2, 1, 1));

    p.objective[t1] = vf;
    p.objective[t2] = 1.0;
    for (b, s) in [(&epi1, s1), (&epi2, s2)] {
        p.add_row(vec![(slot(b, 0, 0), 1.0)], 1.0);
        p.add_row(vec![(slot(b, 1, 0), FRAC_1_SQRT_2), (s, -1.0)], 0.0);
    }
    // u2 = err - sum(err), written in terms of u1
    let sum_coef = if gamma.is_none() {
        (vf + 1.0) / (2.0 * vf)
    } else {
        1.0
    };
    let link_rhs = if gamma.is_none() { 0.0 } else { (vf - 1.0) * c };
    for e in 0..v {
        let mut row: Vec<(usize, f64)> = (0..v)
            .map(|f| (u1 + f, if f == e { sum_coef - 1.0 } else { sum_coef }))
            .collect();
        row.push((u2 + e, 1.0));
        p.add_row(row, link_rhs);
    }

    let kind = match gamma {
        None => ObjectiveKind::ProposedQp,
        Some(g) => ObjectiveKind::ProposedQpGamma(g),
    };
    let aux = QpAux { s1, s2, t1, t2 };
    Ok(sk.finish(
        kind,
        g.n,
        anchors,
        |e| {
            let terms = if kappa == 0.0 {
                vec![(u1 + e, -1.0)]
            } else {
                (0..v)
                    .map(|f| (u1 + f, if f == e { kappa - 1.0 } else { kappa }))
                    .collect()
            };
            (terms, -c)
        },
        ErrorEncoding::Slot {
            slots: u1..soc1.end,
            mean_coef: kappa,
            shift_const: c,
        },
        Some(aux),
    ))
}

pub fn build_model(
    kind: ObjectiveKind,
    g: &MeasurementGraph,
    anchors: &[Point2],
    opts: &ModelOptions,
) -> Result<LocalizationModel, ModelError> {
    match kind {
        ObjectiveKind::BiswasYeL1 => build_biswas_ye(g, anchors, opts),
        ObjectiveKind::LeastSquares => build_least_squares(g, anchors, opts),
        ObjectiveKind::ProposedQp => build_proposed_qp(g, anchors, opts),
        ObjectiveKind::ProposedQpGamma(gamma) => build_proposed_qp_gamma(g, anchors, gamma, opts),
    }
}

fn usable(model: &LocalizationModel, result: &SolveResult) -> Result<(), ModelError> {
    if !result.status.has_solution() {
        return Err(ModelError::BadStatus(result.status));
    }
    if result.x.len() != model.program.num_vars {
        return Err(ModelError::SolutionLength {
            got: result.x.len(),
            expected: model.program.num_vars,
        });
    }
    Ok(())
}

pub fn extract_positions(
    model: &LocalizationModel,
    result: &SolveResult,
) -> Result<EstimatedPositions, ModelError> {
    usable(model, result)?;
    let z = model.z_matrix(&result.x);
    let n = model.n;
    let x_hat = (0..n)
        .map(|i| Point2::new(z[(0, 2 + i)], z[(1, 2 + i)]))
        .collect();
    let y_block = z.view((2, 2), (n, n)).into_owned();
    Ok(EstimatedPositions { x_hat, y_block })
}

/// Reads errors from the error variables and recomputes them from `Z`.
///
/// On an `Optimal` result the two must agree within `10 * tol_feas`.
pub fn extract_errors(
    model: &LocalizationModel,
    result: &SolveResult,
) -> Result<EdgeErrors, ModelError> {
    usable(model, result)?;
    let x = &result.x;
    let errors: Vec<f64> = match &model.errors {
        ErrorEncoding::Split { plus, minus } => (0..model.v())
            .map(|e| x[plus.start + e] - x[minus.start + e])
            .collect(),
        ErrorEncoding::Slot {
            slots,
            mean_coef,
            shift_const,
        } => {
            let u = &x[slots.clone()];
            let shift = mean_coef * u.iter().sum::<f64>() + shift_const;
            u.iter().map(|u| u - shift).collect()
        }
    };
    let z = model.z_matrix(x);
    let from_z: Vec<f64> = model
        .edge_order
        .iter()
        .zip(&model.d_hat)
        .map(|(&e, d)| {
            let u = nalgebra::DVector::from_vec(model.edge_vector(e));
            (u.transpose() * &z * &u)[(0, 0)] - d * d
        })
        .collect();
    let mut max_discrepancy = 0.0f64;
    let mut worst = 0;
    for (e, (a, b)) in errors.iter().zip(&from_z).enumerate() {
        let diff = (a - b).abs();
        if diff > max_discrepancy {
            max_discrepancy = diff;
            worst = e;
        }
    }
    if result.status == SolveStatus::Optimal && max_discrepancy > 10.0 * result.settings.tol_feas {
        return Err(ModelError::ErrorMismatch {
            edge: worst,
            diff: max_discrepancy,
        });
    }
    Ok(EdgeErrors {
        errors,
        from_z,
        max_discrepancy,
    })
}
