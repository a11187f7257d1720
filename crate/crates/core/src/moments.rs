//! Monte-Carlo moments of the circuit density matrix ρ = |ψ><ψ| and of the
//! energy gradient, with the two closed-form limits they interpolate
//! between.
//!
//! Averaged over uniform angles, E[ρ_αβ] = δ_αβ / 2^n, and the two-point
//! function is modelled by a symmetric coefficient table A:
//!
//! ```text
//! E[ρ_αβ ρ_ρσ] ≈ A_αβ (δ_αρ δ_βσ + δ_ασ δ_βρ) + A_αρ δ_αβ δ_ρσ
//! ```
//!
//! with the purity constraint `3 A_αα + Σ_{β≠α} A_αβ = 2^{-n}`. Without
//! entanglers the table is `3^{c0(α∨β) + c1(α∧β)} / 8^n` off the diagonal
//! and `3^{n-1} / 8^n` on it; for Haar-random orthogonal circuits it is the
//! constant `1 / (2^n (2^n + 2))`.
//!
//! The table does not capture every entry. The product ensemble has
//! E[ψ_α ψ_β ψ_ρ ψ_σ] ≠ 0 for some quadruples of four distinct indices
//! (e.g. (0,1,2,3) at n = 2, where it equals 1/64), which the form above
//! sets to zero. [`product_state_fourth_moment`] gives the exact value of
//! every entry for that ensemble.
//!
//! Each Monte-Carlo sample draws a fresh circuit instance (dropout mask
//! and padding) and fresh angles from `derive_seed(seed, [q])`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitFamily, CircuitSpec, ParameterVector};
use crate::deriv::Workspace;
use crate::error::{Error, Result};
use crate::hamiltonian::IsingModel;
use crate::rng::derive_seed;
use crate::stats::{mean, MomentEstimate, VarianceEstimate};

/// Full d x d moment tables are estimated only up to this many qubits.
pub const MAX_TABLE_QUBITS: usize = 6;
/// The d^4 two-point tensor is estimated only up to this many qubits.
pub const MAX_TENSOR_QUBITS: usize = 4;

const CHUNK: usize = 64;

/// Circuit instance and angles of Monte-Carlo sample `q`.
pub fn sample_instance(family: &CircuitFamily, seed: u64, q: usize) -> Result<(CircuitSpec, ParameterVector)> {
    let s = derive_seed(seed, &[q as u64]);
    let spec = family.sample(s)?;
    let theta = ParameterVector::uniform(spec.n_params(), s);
    Ok((spec, theta))
}

/// Entry-wise sample means and standard errors of a family of tables.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: usize,
    pub shape: Vec<usize>,
}

impl MomentTable {
    fn from_sums(sum: Vec<f64>, sum_sq: Vec<f64>, samples: usize, shape: Vec<usize>) -> Self {
        let m = samples as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / m).collect();
        let std_error =
            sum.iter().zip(&sum_sq).map(|(s, s2)| (((s2 - s * s / m) / (m - 1.0)).max(0.0) / m).sqrt()).collect();
        MomentTable { mean, std_error, samples, shape }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.shape).fold(0, |acc, (i, d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> MomentEstimate {
        let o = self.offset(idx);
        MomentEstimate { value: self.mean[o], std_error: self.std_error[o], samples: self.samples }
    }
}

/// Accumulate per-sample tables in fixed-size chunks; chunk sums are
/// combined in chunk order so the result does not depend on scheduling.
fn accumulate<F>(samples: usize, len: usize, f: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync,
{
    let chunks: Vec<(Vec<f64>, Vec<f64>)> = (0..samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut sum = vec![0.0; len];
            let mut sum_sq = vec![0.0; len];
            let mut buf = vec![0.0; len];
            for q in c * CHUNK..((c + 1) * CHUNK).min(samples) {
                f(q, &mut buf)?;
                for ((s, s2), x) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(&buf) {
                    *s += x;
                    *s2 += x * x;
                }
            }
            Ok((sum, sum_sq))
        })
        .collect::<Result<_>>()?;
    let mut sum = vec![0.0; len];
    let mut sum_sq = vec![0.0; len];
    for (s, s2) in chunks {
        sum.iter_mut().zip(&s).for_each(|(a, b)| *a += b);
        sum_sq.iter_mut().zip(&s2).for_each(|(a, b)| *a += b);
    }
    Ok((sum, sum_sq))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMoments {
    /// E[ρ_αβ].
    pub one_point: MomentTable,
    /// E[ρ_αβ²].
    pub second: MomentTable,
}

pub fn estimate_density_moments(family: &CircuitFamily, samples: usize, seed: u64) -> Result<DensityMoments> {
    if family.n > MAX_TABLE_QUBITS {
        return Err(Error::arg(format!("moment tables limited to n <= {MAX_TABLE_QUBITS}")));
    }
    if samples < 100 {
        return Err(Error::arg("moment estimation needs at least 100 samples"));
    }
    let d = 1usize << family.n;
    let (sum, sum_sq) = accumulate(samples, 2 * d * d, |q, buf| {
        let (spec, theta) = sample_instance(family, seed, q)?;
        let s = spec.apply(&theta)?;
        let psi = s.amplitudes();
        let (rho, rho2) = buf.split_at_mut(d * d);
        for a in 0..d {
            for b in 0..d {
                let v = psi[a] * psi[b];
                rho[a * d + b] = v;
                rho2[a * d + b] = v * v;
            }
        }
        Ok(())
    })?;
    // split the two halves, keeping each entry's own sum of squares
    let (s1, s2) = sum.split_at(d * d);
    let (q1, q2) = sum_sq.split_at(d * d);
    Ok(DensityMoments {
        one_point: MomentTable::from_sums(s1.to_vec(), q1.to_vec(), samples, vec![d, d]),
        second: MomentTable::from_sums(s2.to_vec(), q2.to_vec(), samples, vec![d, d]),
    })
}

/// E[ρ_αβ ρ_ρσ] for every index quadruple, indexed `[α, β, ρ, σ]`.
pub fn estimate_two_point_tensor(family: &CircuitFamily, samples: usize, seed: u64) -> Result<MomentTable> {
    if family.n > MAX_TENSOR_QUBITS {
        return Err(Error::arg(format!("two-point tensor limited to n <= {MAX_TENSOR_QUBITS}")));
    }
    if samples < 2 {
        return Err(Error::arg("need at least two samples"));
    }
    let d = 1usize << family.n;
    let (sum, sum_sq) = accumulate(samples, d * d * d * d, |q, buf| {
        let (spec, theta) = sample_instance(family, seed, q)?;
        let s = spec.apply(&theta)?;
        let psi = s.amplitudes();
        let mut o = 0;
        for a in 0..d {
            for b in 0..d {
                for r in 0..d {
                    for t in 0..d {
                        buf[o] = psi[a] * psi[b] * psi[r] * psi[t];
                        o += 1;
                    }
                }
            }
        }
        Ok(())
    })?;
    Ok(MomentTable::from_sums(sum, sum_sq, samples, vec![d; 4]))
}

/// Exact E[ψ_α ψ_β ψ_ρ ψ_σ] for the entangler-free circuit, factorized over
/// qubits. Each qubit carries (cos φ, sin φ) with φ uniform, so a factor is
/// E[cos^{4-k} sin^k] where k counts the four indices with that bit set:
/// 3/8, 0, 1/8, 0, 3/8 for k = 0..4.
pub fn product_state_fourth_moment(n: usize, idx: [usize; 4]) -> f64 {
    const FACTOR: [f64; 5] = [0.375, 0.0, 0.125, 0.0, 0.375];
    (0..n).map(|q| FACTOR[idx.iter().filter(|&&x| (x >> q) & 1 == 1).count()]).product()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointCoefficients {
    pub n: usize,
    /// Row-major 2^n x 2^n table.
    pub table: Vec<f64>,
}

impl TwoPointCoefficients {
    fn dim(&self) -> usize {
        1 << self.n
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.table[a * self.dim() + b]
    }

    /// Closed form for circuits without entanglers.
    pub fn product(n: usize) -> Result<Self> {
        if n > 10 {
            return Err(Error::arg("product coefficients limited to n <= 10"));
        }
        let d = 1usize << n;
        let denom = 8f64.powi(n as i32);
        let mask = d - 1;
        let table = (0..d * d)
            .map(|k| {
                let (a, b) = (k / d, k % d);
                let exponent = if a == b {
                    n as i32 - 1
                } else {
                    let zeros_of_or = (!(a | b) & mask).count_ones();
                    let ones_of_and = (a & b).count_ones();
                    (zeros_of_or + ones_of_and) as i32
                };
                3f64.powi(exponent) / denom
            })
            .collect();
        Ok(TwoPointCoefficients { n, table })
    }

    /// Haar-random orthogonal circuits: 1 / (2^n (2^n + 2)) everywhere.
    pub fn haar_orthogonal(n: usize) -> Result<Self> {
        if n > 10 {
            return Err(Error::arg("Haar coefficients limited to n <= 10"));
        }
        let d = 1usize << n;
        let v = 1.0 / (d as f64 * (d as f64 + 2.0));
        Ok(TwoPointCoefficients { n, table: vec![v; d * d] })
    }

    /// `3 A_αα + Σ_{β≠α} A_αβ - 2^{-n}` for each α.
    pub fn constraint_residuals(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d)
            .map(|a| {
                let off: f64 = (0..d).filter(|&b| b != a).map(|b| self.get(a, b)).sum();
                3.0 * self.get(a, a) + off - 1.0 / d as f64
            })
            .collect()
    }

    /// Model value of E[ρ_αβ ρ_ρσ].
    pub fn tensor_entry(&self, [a, b, r, s]: [usize; 4]) -> f64 {
        let d = |x: usize, y: usize| if x == y { 1.0 } else { 0.0 };
        self.get(a, b) * (d(a, r) * d(b, s) + d(a, s) * d(b, r)) + self.get(a, r) * d(a, b) * d(r, s)
    }

    /// Read A off an estimated second-moment table: A_αβ = E[ρ_αβ²] off the
    /// diagonal and E[ρ_αα²] / 3 on it.
    pub fn from_second_moments(n: usize, second: &MomentTable) -> Self {
        let d = 1usize << n;
        let table = (0..d * d)
            .map(|k| {
                let (a, b) = (k / d, k % d);
                let v = second.get(&[a, b]).value;
                if a == b {
                    v / 3.0
                } else {
                    v
                }
            })
            .collect();
        TwoPointCoefficients { n, table }
    }
}

/// Indices of a quadruple where every value appears an even number of
/// times, i.e. the entries the coefficient form can be nonzero on or is
/// forced to zero by a delta.
pub fn is_paired(idx: [usize; 4]) -> bool {
    idx.iter().all(|x| idx.iter().filter(|y| *y == x).count() % 2 == 0)
}

/// Gradients at i.i.d. samples; each row from `sample_instance(family, seed, q)`.
pub fn sample_gradients(
    family: &CircuitFamily,
    model: &IsingModel,
    samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    (0..samples)
        .into_par_iter()
        .map_init(
            || (Workspace::new(family.n), vec![0.0; family.n_params()]),
            |(ws, g), q| {
                let (spec, theta) = sample_instance(family, seed, q)?;
                ws.energy_and_gradient(&spec, model, &theta, g)?;
                Ok(g.clone())
            },
        )
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub n: usize,
    pub p: f64,
    pub l_ent: usize,
    pub samples: usize,
    /// Parameter whose variance is reported in `fixed`.
    pub param: usize,
    pub fixed: VarianceEstimate,
    /// Mean over all parameters of Var(∂_a 𝓛).
    pub averaged: MomentEstimate,
    /// E[∂_a 𝓛] for the fixed parameter.
    pub mean_fixed: MomentEstimate,
}

/// Var(∂_a 𝓛) for each (n, p). The fixed parameter is qubit 0 in the
/// middle layer; `depth(n)` gives the entangling-layer count.
pub fn grad_variance_profile(
    ns: &[usize],
    ps: &[f64],
    depth: impl Fn(usize) -> usize,
    samples: usize,
    seed: u64,
) -> Result<Vec<VarianceRow>> {
    if samples < 200 {
        return Err(Error::arg("variance profiles need at least 200 samples"));
    }
    let mut rows = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let model = IsingModel::ring(n)?;
        for (j, &p) in ps.iter().enumerate() {
            let l_ent = depth(n);
            let family = CircuitFamily::new(n, l_ent, 0, p);
            let cell_seed = derive_seed(seed, &[i as u64, j as u64]);
            let grads = sample_gradients(&family, &model, samples, cell_seed)?;
            rows.push(variance_row(&family, &grads, samples));
        }
    }
    Ok(rows)
}

pub(crate) fn variance_row(family: &CircuitFamily, grads: &[Vec<f64>], samples: usize) -> VarianceRow {
    let np = family.n_params();
    let param = (family.l_ent / 2) * family.n;
    let fixed: Vec<f64> = grads.iter().map(|g| g[param]).collect();
    let means: Vec<f64> = (0..np).map(|a| mean(&grads.iter().map(|g| g[a]).collect::<Vec<_>>())).collect();
    let m = samples as f64;
    let per_sample: Vec<f64> = grads
        .iter()
        .map(|g| g.iter().zip(&means).map(|(x, mu)| (x - mu).powi(2)).sum::<f64>() / np as f64 * m / (m - 1.0))
        .collect();
    VarianceRow {
        n: family.n,
        p: family.p,
        l_ent: family.l_ent,
        samples,
        param,
        fixed: VarianceEstimate::from_samples(&fixed),
        averaged: MomentEstimate::from_samples(&per_sample),
        mean_fixed: MomentEstimate::from_samples(&fixed),
    }
}

/// Convenience: the density-matrix second-moment table as a matrix.
pub fn as_matrix(table: &MomentTable) -> DMatrix<f64> {
    let d = table.shape[0];
    DMatrix::from_row_slice(d, d, &table.mean)
}
