//! Reduced density matrices and Rényi entanglement entropies for the
//! bipartition (qubits 0..n_A | n_A..n).
//!
//! With qubit 0 as the least significant bit, basis index x splits as
//! `x = a + 2^{n_A} b`, so the amplitudes reshape into a column-major
//! 2^{n_A} x 2^{n-n_A} matrix M with ρ_A = M Mᵀ. Entropies are in bits.

use nalgebra::{DMatrix, DMatrixView, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitSpec, ParameterVector};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream, Stream};
use crate::state::StateVector;
use crate::stats::MomentEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bipartition {
    pub n: usize,
    pub n_a: usize,
}

impl Bipartition {
    pub fn new(n: usize, n_a: usize) -> Result<Self> {
        if n_a == 0 || n_a >= n {
            return Err(Error::arg(format!("subsystem size {n_a} must lie in [1, {n})")));
        }
        Ok(Bipartition { n, n_a })
    }

    /// First ⌊n/2⌋ qubits.
    pub fn half(n: usize) -> Result<Self> {
        Self::new(n, n / 2)
    }

    fn check(&self, s: &StateVector) -> Result<()> {
        if s.n_qubits() != self.n {
            return Err(Error::Length { expected: 1 << self.n, actual: s.dim() });
        }
        Ok(())
    }
}

fn amplitude_matrix<'a>(s: &'a StateVector, part: &Bipartition) -> DMatrixView<'a, f64> {
    let rows = 1usize << part.n_a;
    DMatrixView::from_slice(s.amplitudes(), rows, s.dim() / rows)
}

/// ρ_A = Tr_B |ψ><ψ|.
pub fn reduced_density(s: &StateVector, part: &Bipartition) -> Result<DMatrix<f64>> {
    part.check(s)?;
    let m = amplitude_matrix(s, part);
    Ok(&m * m.transpose())
}

/// Tr(ρ_A^2) as the squared Frobenius norm of the smaller Gram matrix of M.
pub fn purity(s: &StateVector, part: &Bipartition) -> Result<f64> {
    part.check(s)?;
    let m = amplitude_matrix(s, part);
    let gram = if m.nrows() <= m.ncols() { &m * m.transpose() } else { m.transpose() * &m };
    Ok(gram.norm_squared())
}

/// `(1/(1-k)) log2 Tr(ρ_A^k)`, clamped into [0, n_A] against rounding.
pub fn renyi_entropy(s: &StateVector, part: &Bipartition, k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::arg(format!("Rényi order must be at least 2, got {k}")));
    }
    let trace = if k == 2 {
        purity(s, part)?
    } else {
        part.check(s)?;
        let m = amplitude_matrix(s, part);
        let gram = if m.nrows() <= m.ncols() { &m * m.transpose() } else { m.transpose() * &m };
        SymmetricEigen::new(gram).eigenvalues.iter().map(|&l| l.max(0.0).powi(k as i32)).sum()
    };
    let r = trace.log2() / (1.0 - k as f64);
    Ok(r.clamp(0.0, part.n_a as f64))
}

/// Mean Rényi-k entropy of circuit states over θ ~ Uniform[0, 2π)^{nL}.
/// Sample q uses its own substream `derive_seed(seed, [q])`.
pub fn entangling_capability(
    spec: &CircuitSpec,
    part: &Bipartition,
    samples: usize,
    k: u32,
    seed: u64,
) -> Result<MomentEstimate> {
    if samples < 2 {
        return Err(Error::arg("entangling capability needs at least two samples"));
    }
    let values = (0..samples)
        .into_par_iter()
        .map(|q| {
            let mut rng = stream(derive_seed(seed, &[q as u64]), Stream::Sampling);
            let theta = ParameterVector::uniform_from(spec.n_params(), &mut rng);
            renyi_entropy(&spec.apply(&theta)?, part, k)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MomentEstimate::from_samples(&values))
}
