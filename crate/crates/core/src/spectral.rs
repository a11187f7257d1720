//! Hessian spectra and the landscape metrics derived from them.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// |h| below this counts as a flat direction.
pub const THETA_SMALL: f64 = 0.2;
/// Large-eigenvalue cut at random initial points.
pub const THETA_LARGE_INIT: f64 = 5.0;
/// Large-eigenvalue cut along trajectories and at endpoints.
pub const THETA_LARGE_TRAJECTORY: f64 = 25.0;

const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

pub fn eigendecompose(h: &DMatrix<f64>) -> Result<Eigen> {
    if !h.is_square() {
        return Err(Error::arg(format!("matrix is {}x{}, not square", h.nrows(), h.ncols())));
    }
    let scale = h.amax().max(1.0);
    let asym = (h - h.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::arg(format!("matrix is not symmetric (max |H - Hᵀ| = {asym:.3e})")));
    }
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), h.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigen { values, vectors })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianReport {
    pub eigenvalues: Vec<f64>,
    pub h_top: f64,
    pub h_bottom: f64,
    pub frac_small: f64,
    pub frac_large: f64,
    /// Norm of the unit gradient projected on span{v : |h| < theta_small};
    /// `None` when the gradient vanishes.
    pub overlap_small: Option<f64>,
    pub overlap_large: Option<f64>,
    pub theta_small: f64,
    pub theta_large: f64,
}

impl HessianReport {
    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.h_top.abs().max(self.h_bottom.abs())
    }
}

pub fn landscape_metrics(h: &DMatrix<f64>, grad: &[f64], theta_small: f64, theta_large: f64) -> Result<HessianReport> {
    let eig = eigendecompose(h)?;
    report_from_eigen(&eig, grad, theta_small, theta_large)
}

pub fn report_from_eigen(eig: &Eigen, grad: &[f64], theta_small: f64, theta_large: f64) -> Result<HessianReport> {
    let dim = eig.values.len();
    if grad.len() != dim {
        return Err(Error::Length { expected: dim, actual: grad.len() });
    }
    if dim == 0 {
        return Err(Error::arg("empty Hessian"));
    }
    let small: Vec<usize> = (0..dim).filter(|&i| eig.values[i].abs() < theta_small).collect();
    let large: Vec<usize> = (0..dim).filter(|&i| eig.values[i].abs() > theta_large).collect();

    let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let overlap = |idx: &[usize]| -> Option<f64> {
        if gnorm == 0.0 || !gnorm.is_finite() {
            return None;
        }
        let sq: f64 = idx
            .iter()
            .map(|&i| {
                let v = eig.vectors.column(i);
                let c: f64 = v.iter().zip(grad).map(|(a, b)| a * b).sum();
                c * c
            })
            .sum();
        Some((sq.sqrt() / gnorm).min(1.0))
    };

    Ok(HessianReport {
        h_top: eig.values[dim - 1],
        h_bottom: eig.values[0],
        frac_small: small.len() as f64 / dim as f64,
        frac_large: large.len() as f64 / dim as f64,
        overlap_small: overlap(&small),
        overlap_large: overlap(&large),
        eigenvalues: eig.values.clone(),
        theta_small,
        theta_large,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub c: f64,
    /// Fraction of sampled Hessians with |h_max| >= c.
    pub empirical: f64,
    /// 2 n² L² Var(∂𝓛) / c².
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub samples: usize,
    pub variance: f64,
    pub max_abs_eigenvalues: Vec<f64>,
    /// |h_max| <= ||H||_F <= nL max|H_ab| held for every sample.
    pub chain_holds: bool,
    pub tails: Vec<TailCheck>,
}

/// Compare the empirical tail of |h_max| over sampled Hessians with the
/// Chebyshev-type bound, and check the norm chain behind it.
pub fn eigenvalue_bound_check(
    hessians: &[DMatrix<f64>],
    variance: f64,
    n: usize,
    layers: usize,
    cs: &[f64],
) -> Result<BoundReport> {
    let mut maxes = Vec::with_capacity(hessians.len());
    let mut chain_holds = true;
    for h in hessians {
        let eig = eigendecompose(h)?;
        let hmax = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let frob = h.norm();
        let entry = h.amax();
        let np = h.nrows() as f64;
        // slack for rounding in the eigensolver
        chain_holds &= hmax <= frob * (1.0 + 1e-12) + 1e-12 && frob <= np * entry * (1.0 + 1e-12);
        maxes.push(hmax);
    }
    let total = maxes.len().max(1) as f64;
    let nl = (n * layers) as f64;
    let tails = cs
        .iter()
        .map(|&c| {
            let empirical = maxes.iter().filter(|&&m| m >= c).count() as f64 / total;
            let bound = 2.0 * nl * nl * variance / (c * c);
            TailCheck { c, empirical, bound, holds: empirical <= bound }
        })
        .collect();
    Ok(BoundReport { samples: hessians.len(), variance, max_abs_eigenvalues: maxes, chain_holds, tails })
}
