//! Transverse-field Ising chain `H = J Σ Z_i Z_j + g Σ X_i` and its ground
//! energy.
//!
//! The ZZ part is diagonal in the computational basis and is cached as a
//! vector of length 2^n. The X part pairs each amplitude with its bit-flip
//! partner. No 2^n x 2^n matrix is ever formed.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::state::{check_qubits, dot, StateVector};

/// Largest chain handled by [`IsingModel::ground_state`].
pub const MAX_GROUND_QUBITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub n: usize,
    #[serde(default = "one")]
    pub j: f64,
    #[serde(default = "one")]
    pub g: f64,
    #[serde(default = "yes")]
    pub periodic: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone)]
pub struct IsingModel {
    params: IsingParams,
    diag: Vec<f64>,
}

impl IsingModel {
    pub fn new(n: usize, j: f64, g: f64, periodic: bool) -> Result<Self> {
        Self::from_params(IsingParams { n, j, g, periodic })
    }

    /// J = g = 1 on a ring.
    pub fn ring(n: usize) -> Result<Self> {
        Self::new(n, 1.0, 1.0, true)
    }

    pub fn from_params(params: IsingParams) -> Result<Self> {
        check_qubits(params.n)?;
        if !params.j.is_finite() || !params.g.is_finite() {
            return Err(Error::arg("couplings must be finite"));
        }
        let n = params.n;
        let bonds = bonds(n, params.periodic);
        let diag = (0..1usize << n)
            .map(|x| {
                bonds.iter().map(|&(a, b)| if ((x >> a) ^ (x >> b)) & 1 == 0 { params.j } else { -params.j }).sum()
            })
            .collect();
        Ok(IsingModel { params, diag })
    }

    pub fn params(&self) -> IsingParams {
        self.params
    }

    pub fn n_qubits(&self) -> usize {
        self.params.n
    }

    /// Nearest-neighbour bonds; the ring on n = 2 counts (0,1) twice.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        bonds(self.params.n, self.params.periodic)
    }

    /// ZZ energies of the computational basis states.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.diag.len() {
            return Err(Error::Length { expected: self.diag.len(), actual: len });
        }
        Ok(())
    }

    pub fn energy(&self, s: &StateVector) -> Result<f64> {
        self.check_len(s.dim())?;
        Ok(self.energy_of(s.amplitudes()))
    }

    pub(crate) fn energy_of(&self, amps: &[f64]) -> f64 {
        let zz: f64 = self.diag.iter().zip(amps).map(|(d, a)| d * a * a).sum();
        if self.params.g == 0.0 {
            return zz;
        }
        let mut x = 0.0;
        for q in 0..self.params.n {
            let stride = 1usize << q;
            for block in amps.chunks_exact(2 * stride) {
                let (lo, hi) = block.split_at(stride);
                x += dot(lo, hi);
            }
        }
        zz + 2.0 * self.params.g * x
    }

    /// `out = H v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(v.len())?;
        self.check_len(out.len())?;
        self.apply_unchecked(v, out);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&self, v: &[f64], out: &mut [f64]) {
        for ((o, d), x) in out.iter_mut().zip(&self.diag).zip(v) {
            *o = d * x;
        }
        let g = self.params.g;
        if g == 0.0 {
            return;
        }
        for q in 0..self.params.n {
            let stride = 1usize << q;
            for (ob, vb) in out.chunks_exact_mut(2 * stride).zip(v.chunks_exact(2 * stride)) {
                let (o0, o1) = ob.split_at_mut(stride);
                let (v0, v1) = vb.split_at(stride);
                for k in 0..stride {
                    o0[k] += g * v1[k];
                    o1[k] += g * v0[k];
                }
            }
        }
    }

    /// Dense matrix, for small-n cross-checks only.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        if self.params.n > 12 {
            return Err(Error::arg("dense Hamiltonian limited to n <= 12"));
        }
        let dim = self.diag.len();
        let mut m = DMatrix::zeros(dim, dim);
        for x in 0..dim {
            m[(x, x)] = self.diag[x];
            for q in 0..self.params.n {
                m[(x ^ (1 << q), x)] += self.params.g;
            }
        }
        Ok(m)
    }

    /// Smallest eigenpair by Lanczos iteration on the matrix-free operator.
    pub fn ground_state(&self) -> Result<GroundState> {
        if self.params.n > MAX_GROUND_QUBITS {
            return Err(Error::Size { n: self.params.n, min: 1, max: MAX_GROUND_QUBITS });
        }
        let dim = self.diag.len();
        let mut rng = stream(0x1517_1A4C, Stream::Lanczos);
        let start: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (energy, vector, residual, iterations) =
            lanczos_lowest(|v, out| self.apply_unchecked(v, out), start, LANCZOS_TOL, LANCZOS_MAX_ITER)?;
        Ok(GroundState { energy, state: StateVector::from_amplitudes(self.params.n, vector)?, residual, iterations })
    }

    pub fn ground_energy(&self) -> Result<f64> {
        Ok(self.ground_state()?.energy)
    }

    /// `energy(s) - e_ground`, with the ground energy supplied by the caller
    /// so it is computed once per model.
    pub fn delta_e(&self, s: &StateVector, e_ground: f64) -> Result<f64> {
        Ok(self.energy(s)? - e_ground)
    }

    /// Tr(H^2). Equals (J^2 n_bonds + g^2 n) 2^n whenever the bonds are
    /// distinct, i.e. for every chain except the two-site ring.
    pub fn trace_sq(&self) -> f64 {
        let zz: f64 = self.diag.iter().map(|d| d * d).sum();
        zz + self.params.g * self.params.g * (self.params.n as f64) * self.diag.len() as f64
    }

    /// Upper bound on the operator norm, |J| n_bonds + |g| n.
    pub fn norm_bound(&self) -> f64 {
        let IsingParams { n, j, g, periodic } = self.params;
        j.abs() * bonds(n, periodic).len() as f64 + g.abs() * n as f64
    }
}

fn bonds(n: usize, periodic: bool) -> Vec<(usize, usize)> {
    let mut b: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    if periodic && n >= 2 {
        b.push((n - 1, 0));
    }
    b
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: StateVector,
    pub residual: f64,
    pub iterations: usize,
}

pub const LANCZOS_TOL: f64 = 1e-10;
pub const LANCZOS_MAX_ITER: usize = 2000;

/// Lanczos with full reorthogonalization for the lowest eigenpair of a
/// symmetric operator. Returns (eigenvalue, normalized Ritz vector,
/// residual norm ||A y - λ y||, iterations).
pub fn lanczos_lowest<F>(apply: F, start: Vec<f64>, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>, f64, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let dim = start.len();
    let norm = dot(&start, &start).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Numeric("degenerate Lanczos start vector".into()));
    }
    let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|x| x / norm).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let limit = max_iter.min(dim);
    let mut last = (f64::NAN, f64::INFINITY);

    for k in 0..limit {
        apply(&basis[k], &mut w);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        // two passes of Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();

        let m = alpha.len();
        if m % 8 != 0 && b >= 1e-14 && k + 1 < limit {
            beta.push(b);
            basis.push(w.iter().map(|x| x / b).collect());
            continue;
        }
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (idx, &theta) =
            eig.eigenvalues.iter().enumerate().min_by(|x, y| x.1.total_cmp(y.1)).expect("non-empty tridiagonal");
        let y_last = eig.eigenvectors[(m - 1, idx)];
        let residual = (b * y_last).abs();
        last = (theta, residual);

        if residual < tol || b < 1e-14 || k + 1 == limit {
            let mut v = vec![0.0; dim];
            for (j, q) in basis.iter().enumerate() {
                let c = eig.eigenvectors[(j, idx)];
                v.iter_mut().zip(q).for_each(|(x, y)| *x += c * y);
            }
            let vn = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= vn);
            // true residual of the returned pair
            apply(&v, &mut w);
            let r = w.iter().zip(&v).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
            if r < tol.max(1e-8) || b < 1e-14 || m == dim {
                return Ok((theta, v, r, k + 1));
            }
            if k + 1 == limit {
                return Err(Error::NoConvergence { iterations: k + 1, residual: r });
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Err(Error::NoConvergence { iterations: limit, residual: last.1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use approx::assert_abs_diff_eq;

    fn random_state(n: usize, seed: u64) -> StateVector {
        let mut rng = stream(seed, Stream::Sampling);
        let mut v: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(n, v).unwrap()
    }

    fn dense_lowest(m: DMatrix<f64>) -> f64 {
        SymmetricEigen::new(m).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn zero_state_energy_is_bond_count() {
        let m = IsingModel::ring(12).unwrap();
        assert_abs_diff_eq!(m.energy(&StateVector::zero(12).unwrap()).unwrap(), 12.0, epsilon = 1e-12);
    }

    #[test]
    fn uniform_superposition_energy() {
        let m = IsingModel::ring(4).unwrap();
        let s = StateVector::from_amplitudes(4, vec![0.25; 16]).unwrap();
        assert_abs_diff_eq!(m.energy(&s).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn energy_matches_dense_matrix() {
        for (periodic, g) in [(true, 1.0), (false, 0.7)] {
            let m = IsingModel::new(6, 1.3, g, periodic).unwrap();
            let h = m.dense().unwrap();
            let s = random_state(6, 4);
            let v = nalgebra::DVector::from_column_slice(s.amplitudes());
            let dense = (v.transpose() * &h * &v)[(0, 0)];
            assert_abs_diff_eq!(m.energy(&s).unwrap(), dense, epsilon = 1e-10);

            let mut out = vec![0.0; 64];
            m.apply(s.amplitudes(), &mut out).unwrap();
            let hv = &h * &v;
            for (a, b) in out.iter().zip(hv.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn size_mismatch() {
        let m = IsingModel::ring(3).unwrap();
        assert!(matches!(m.energy(&StateVector::zero(4).unwrap()), Err(Error::Length { .. })));
    }

    #[test]
    fn two_site_ring_without_field() {
        let m = IsingModel::new(2, 1.0, 0.0, true).unwrap();
        assert_eq!(m.bonds().len(), 2);
        assert_abs_diff_eq!(dense_lowest(m.dense().unwrap()), -2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.ground_energy().unwrap(), -2.0, epsilon = 1e-10);
    }

    #[test]
    fn lanczos_matches_dense() {
        for n in [3, 4, 5, 6] {
            for periodic in [true, false] {
                let m = IsingModel::new(n, 1.0, 1.0, periodic).unwrap();
                let dense = dense_lowest(m.dense().unwrap());
                assert_abs_diff_eq!(m.ground_energy().unwrap(), dense, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn ground_vector_has_zero_gap() {
        let m = IsingModel::ring(8).unwrap();
        let gs = m.ground_state().unwrap();
        assert!(gs.residual < 1e-8);
        let de = m.delta_e(&gs.state, gs.energy).unwrap();
        assert!(de.abs() < 1e-8, "{de}");
    }

    #[test]
    fn twelve_site_ring() {
        let m = IsingModel::ring(12).unwrap();
        let e = m.ground_energy().unwrap();
        // critical ring: E/n close to -4/π, the zero state sits far above
        assert!((e / 12.0 + 4.0 / std::f64::consts::PI).abs() < 0.01, "{e}");
        assert!(12.0 - e > 0.0);
    }

    #[test]
    fn trace_identities_match_dense() {
        for (n, periodic) in [(2, true), (4, true), (5, false), (6, true)] {
            let m = IsingModel::new(n, 0.8, 1.1, periodic).unwrap();
            let h = m.dense().unwrap();
            assert_abs_diff_eq!(h.trace(), 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!((&h * &h).trace(), m.trace_sq(), epsilon = 1e-9);
            if n >= 3 {
                let nb = m.bonds().len() as f64;
                let formula = (0.64 * nb + 1.21 * n as f64) * (1u64 << n) as f64;
                assert_abs_diff_eq!(m.trace_sq(), formula, epsilon = 1e-9);
            }
        }
    }
}
