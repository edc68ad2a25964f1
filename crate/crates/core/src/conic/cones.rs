//! Nesterov-Todd scalings and Jordan-algebra helpers for each cone kind.
//!
//! For a primal point `x` and dual point `z` in the interior of a cone the
//! scaling `W` satisfies `W^{-T} x = W z = lambda`. Newton directions are
//! formed in the scaled space where both iterates coincide with `lambda`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::program::ConeBlock;
use super::svec::{smat_side, svec_index, svec_into, tri_len};

pub(crate) enum Scaling {
    NonNeg {
        /// Diagonal of `W`, `sqrt(x / z)`.
        w: Vec<f64>,
        lambda: Vec<f64>,
    },
    Soc {
        beta: f64,
        wbar: Vec<f64>,
        lambda: Vec<f64>,
    },
    Psd {
        side: usize,
        r: DMatrix<f64>,
        r_inv: DMatrix<f64>,
        g: DMatrix<f64>,
        /// Eigenvalues of the scaled point, which is diagonal.
        lambda_diag: Vec<f64>,
        lambda: Vec<f64>,
    },
}

#[derive(Debug)]
pub(crate) struct NotInterior;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn soc_det(v: &[f64]) -> f64 {
    let n1 = dot(&v[1..], &v[1..]);
    (v[0] - n1.sqrt()) * (v[0] + n1.sqrt())
}

/// Lorentz quadratic representation square root `Q(w)` with `w' J w = 1`.
fn soc_q_apply(w: &[f64], u: &[f64], out: &mut [f64]) {
    let w0 = w[0];
    let wu = dot(&w[1..], &u[1..]);
    out[0] = w0 * u[0] + wu;
    let k = u[0] + wu / (1.0 + w0);
    for i in 1..u.len() {
        out[i] = u[i] + k * w[i];
    }
}

fn soc_q_inv_apply(w: &[f64], u: &[f64], out: &mut [f64]) {
    let w0 = w[0];
    let wu = dot(&w[1..], &u[1..]);
    out[0] = w0 * u[0] - wu;
    let k = -u[0] + wu / (1.0 + w0);
    for i in 1..u.len() {
        out[i] = u[i] + k * w[i];
    }
}

impl Scaling {
    pub(crate) fn new(block: ConeBlock, x: &[f64], z: &[f64]) -> Result<Self, NotInterior> {
        match block {
            ConeBlock::NonNeg(_) => {
                if x.iter().chain(z).any(|v| !(*v > 0.0)) {
                    return Err(NotInterior);
                }
                let w = x.iter().zip(z).map(|(a, b)| (a / b).sqrt()).collect();
                let lambda = x.iter().zip(z).map(|(a, b)| (a * b).sqrt()).collect();
                Ok(Scaling::NonNeg { w, lambda })
            }
            ConeBlock::SecondOrder(d) => {
                let xd = soc_det(x);
                let zd = soc_det(z);
                if !(xd > 0.0 && zd > 0.0 && x[0] > 0.0 && z[0] > 0.0) {
                    return Err(NotInterior);
                }
                let xs = xd.sqrt();
                let zs = zd.sqrt();
                let xb: Vec<f64> = x.iter().map(|v| v / xs).collect();
                let zb: Vec<f64> = z.iter().map(|v| v / zs).collect();
                let gamma = ((1.0 + dot(&xb, &zb)) / 2.0).sqrt();
                let mut wbar = vec![0.0; d];
                wbar[0] = (xb[0] + zb[0]) / (2.0 * gamma);
                for i in 1..d {
                    wbar[i] = (xb[i] - zb[i]) / (2.0 * gamma);
                }
                let beta = (xs / zs).sqrt();
                let mut lambda = vec![0.0; d];
                soc_q_apply(&wbar, z, &mut lambda);
                lambda.iter_mut().for_each(|v| *v *= beta);
                Ok(Scaling::Soc { beta, wbar, lambda })
            }
            ConeBlock::Psd(side) => {
                let xm = smat_side(x, side);
                let zm = smat_side(z, side);
                let lx = xm.cholesky().ok_or(NotInterior)?.unpack();
                let lz = zm.cholesky().ok_or(NotInterior)?.unpack();
                let prod = lz.transpose() * &lx;
                let svd = prod.svd(true, true);
                let u = svd.u.ok_or(NotInterior)?;
                let vt = svd.v_t.ok_or(NotInterior)?;
                let sv = svd.singular_values;
                if sv.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
                    return Err(NotInterior);
                }
                let inv_sqrt: Vec<f64> = sv.iter().map(|s| 1.0 / s.sqrt()).collect();
                // R = Lx V diag(s)^{-1/2}
                let mut r = lx * vt.transpose();
                for (j, f) in inv_sqrt.iter().enumerate() {
                    r.column_mut(j).scale_mut(*f);
                }
                // R^{-1} = diag(s)^{-1/2} U' Lz'
                let mut r_inv = u.transpose() * lz.transpose();
                for (i, f) in inv_sqrt.iter().enumerate() {
                    r_inv.row_mut(i).scale_mut(*f);
                }
                let g = &r * r.transpose();
                let lambda_diag: Vec<f64> = sv.iter().copied().collect();
                let mut lambda = vec![0.0; tri_len(side)];
                for (i, l) in lambda_diag.iter().enumerate() {
                    lambda[svec_index(side, i, i)] = *l;
                }
                Ok(Scaling::Psd {
                    side,
                    r,
                    r_inv,
                    g,
                    lambda_diag,
                    lambda,
                })
            }
        }
    }

    pub(crate) fn lambda(&self) -> &[f64] {
        match self {
            Scaling::NonNeg { lambda, .. } => lambda,
            Scaling::Soc { lambda, .. } => lambda,
            Scaling::Psd { lambda, .. } => lambda,
        }
    }

    /// `W v` (applied to dual-side quantities).
    pub(crate) fn apply_w(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..v.len() {
                    out[i] = v[i] * w[i];
                }
            }
            Scaling::Soc { beta, wbar, .. } => {
                soc_q_apply(wbar, v, out);
                out.iter_mut().for_each(|o| *o *= beta);
            }
            Scaling::Psd { side, r, .. } => {
                let m = smat_side(v, *side);
                let res = r.transpose() * m * r;
                svec_into(&res, out);
            }
        }
    }

    /// `W^T v`.
    pub(crate) fn apply_wt(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { .. } | Scaling::Soc { .. } => self.apply_w(v, out),
            Scaling::Psd { side, r, .. } => {
                let m = smat_side(v, *side);
                let res = r * m * r.transpose();
                svec_into(&res, out);
            }
        }
    }

    /// `W^{-T} v` (applied to primal-side quantities).
    pub(crate) fn apply_w_inv_t(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..v.len() {
                    out[i] = v[i] / w[i];
                }
            }
            Scaling::Soc { beta, wbar, .. } => {
                soc_q_inv_apply(wbar, v, out);
                out.iter_mut().for_each(|o| *o /= beta);
            }
            Scaling::Psd { side, r_inv, .. } => {
                let m = smat_side(v, *side);
                let res = r_inv * m * r_inv.transpose();
                svec_into(&res, out);
            }
        }
    }

    /// `W^T W v`.
    pub(crate) fn apply_h(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..v.len() {
                    out[i] = v[i] * w[i] * w[i];
                }
            }
            Scaling::Soc { beta, wbar, .. } => {
                // beta^2 (2 w w' - J) v
                let b2 = beta * beta;
                let wv = dot(wbar, v);
                out[0] = b2 * (2.0 * wbar[0] * wv - v[0]);
                for i in 1..v.len() {
                    out[i] = b2 * (2.0 * wbar[i] * wv + v[i]);
                }
            }
            Scaling::Psd { side, g, .. } => {
                let m = smat_side(v, *side);
                let res = g * m * g;
                svec_into(&res, out);
            }
        }
    }

    /// Solves `lambda o u = r` for `u`.
    pub(crate) fn jordan_div(&self, r: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { lambda, .. } => {
                for i in 0..r.len() {
                    out[i] = r[i] / lambda[i];
                }
            }
            Scaling::Soc { lambda, .. } => {
                let l0 = lambda[0];
                let det = soc_det(lambda);
                let u0 = (l0 * r[0] - dot(&lambda[1..], &r[1..])) / det;
                out[0] = u0;
                for i in 1..r.len() {
                    out[i] = (r[i] - u0 * lambda[i]) / l0;
                }
            }
            Scaling::Psd {
                side, lambda_diag, ..
            } => {
                let mut k = 0;
                for j in 0..*side {
                    for i in j..*side {
                        out[k] = 2.0 * r[k] / (lambda_diag[i] + lambda_diag[j]);
                        k += 1;
                    }
                }
            }
        }
    }

    /// Largest `alpha` with `lambda + alpha d` in the cone (infinite if unbounded).
    pub(crate) fn max_step(&self, d: &[f64]) -> f64 {
        match self {
            Scaling::NonNeg { lambda, .. } => lambda
                .iter()
                .zip(d)
                .filter(|(_, di)| **di < 0.0)
                .map(|(l, di)| -l / di)
                .fold(f64::INFINITY, f64::min),
            Scaling::Soc { lambda, .. } => soc_max_step(lambda, d),
            Scaling::Psd {
                side, lambda_diag, ..
            } => {
                let mut m = smat_side(d, *side);
                let s: Vec<f64> = lambda_diag.iter().map(|l| 1.0 / l.sqrt()).collect();
                for j in 0..*side {
                    for i in 0..*side {
                        m[(i, j)] *= s[i] * s[j];
                    }
                }
                let min_eig = SymmetricEigen::new(m)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                if min_eig >= 0.0 {
                    f64::INFINITY
                } else {
                    -1.0 / min_eig
                }
            }
        }
    }
}

/// Jordan product `u o v` for a block.
pub(crate) fn jordan_prod(block: ConeBlock, u: &[f64], v: &[f64], out: &mut [f64]) {
    match block {
        ConeBlock::NonNeg(_) => {
            for i in 0..u.len() {
                out[i] = u[i] * v[i];
            }
        }
        ConeBlock::SecondOrder(_) => {
            out[0] = dot(u, v);
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
        ConeBlock::Psd(side) => {
            let a = smat_side(u, side);
            let b = smat_side(v, side);
            let mut p = &a * &b;
            let pt = p.transpose();
            p += pt;
            p *= 0.5;
            svec_into(&p, out);
        }
    }
}

/// Writes the block identity into `out`.
pub(crate) fn identity(block: ConeBlock, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    match block {
        ConeBlock::NonNeg(_) => out.iter_mut().for_each(|o| *o = 1.0),
        ConeBlock::SecondOrder(_) => out[0] = 1.0,
        ConeBlock::Psd(side) => {
            for i in 0..side {
                out[svec_index(side, i, i)] = 1.0;
            }
        }
    }
}

/// Strict interiority test, cheaper than [`min_eig`] for PSD blocks.
pub(crate) fn is_interior(block: ConeBlock, x: &[f64]) -> bool {
    match block {
        ConeBlock::NonNeg(_) => x.iter().all(|v| *v > 0.0),
        ConeBlock::SecondOrder(_) => x[0] > 0.0 && x[0] - dot(&x[1..], &x[1..]).sqrt() > 0.0,
        ConeBlock::Psd(side) => smat_side(x, side).cholesky().is_some(),
    }
}

/// Smallest "eigenvalue" of `x` in the block's Jordan algebra.
pub(crate) fn min_eig(block: ConeBlock, x: &[f64]) -> f64 {
    match block {
        ConeBlock::NonNeg(_) => x.iter().copied().fold(f64::INFINITY, f64::min),
        ConeBlock::SecondOrder(_) => x[0] - dot(&x[1..], &x[1..]).sqrt(),
        ConeBlock::Psd(side) => SymmetricEigen::new(smat_side(x, side))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min),
    }
}

fn soc_max_step(lambda: &[f64], d: &[f64]) -> f64 {
    // f(a) = (l0 + a d0)^2 - ||l1 + a d1||^2 = qa a^2 + 2 qb a + qc, qc > 0
    let qa = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let qb = lambda[0] * d[0] - dot(&lambda[1..], &d[1..]);
    let qc = soc_det(lambda);
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    let mut best = f64::INFINITY;
    if qa.abs() <= 1e-15 * scale {
        if qb < 0.0 {
            best = -qc / (2.0 * qb);
        }
    } else {
        let disc = qb * qb - qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            let q = -(qb + qb.signum() * sq);
            let roots = [q / qa, if q != 0.0 { qc / q } else { f64::INFINITY }];
            for r in roots {
                if r > 0.0 && r < best {
                    best = r;
                }
            }
        }
    }
    // the linear term t-component must also stay positive
    if d[0] < 0.0 {
        best = best.min(-lambda[0] / d[0]);
    }
    best
}
