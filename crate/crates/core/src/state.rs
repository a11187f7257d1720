//! Real-amplitude state vectors.
//!
//! The gate set {RY, CZ} is real-orthogonal, so amplitudes are stored as
//! `f64`. Qubit 0 is the least significant bit of the basis-state index;
//! the reduced-density code in [`crate::entropy`] relies on this.
//!
//! `apply_ry(φ)` acts on each (bit=0, bit=1) amplitude pair as
//! `(a, b) -> (a cos φ - b sin φ, a sin φ + b cos φ)`, the matrix
//! exponential of φ times the real antisymmetric generator
//! `[[0, -1], [1, 0]]`. Rotating |0> by π/2 gives |1>.

use crate::error::{Error, Result};

pub const MIN_QUBITS: usize = 1;
pub const MAX_QUBITS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<f64>,
}

pub(crate) fn check_qubits(n: usize) -> Result<()> {
    if (MIN_QUBITS..=MAX_QUBITS).contains(&n) {
        Ok(())
    } else {
        Err(Error::Size { n, min: MIN_QUBITS, max: MAX_QUBITS })
    }
}

impl StateVector {
    /// |0...0> on `n` qubits.
    pub fn zero(n: usize) -> Result<Self> {
        check_qubits(n)?;
        let mut amps = vec![0.0; 1 << n];
        amps[0] = 1.0;
        Ok(StateVector { n, amps })
    }

    /// Computational basis state |index>.
    pub fn basis(n: usize, index: usize) -> Result<Self> {
        check_qubits(n)?;
        if index >= 1 << n {
            return Err(Error::arg(format!("basis index {index} out of range for {n} qubits")));
        }
        let mut amps = vec![0.0; 1 << n];
        amps[index] = 1.0;
        Ok(StateVector { n, amps })
    }

    /// Wrap raw amplitudes. The vector is not renormalized.
    pub fn from_amplitudes(n: usize, amps: Vec<f64>) -> Result<Self> {
        check_qubits(n)?;
        if amps.len() != 1 << n {
            return Err(Error::Length { expected: 1 << n, actual: amps.len() });
        }
        Ok(StateVector { n, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [f64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<f64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a * a).sum()
    }

    /// Reset to |0...0> without reallocating.
    pub fn reset(&mut self) {
        self.amps.fill(0.0);
        self.amps[0] = 1.0;
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q < self.n {
            Ok(())
        } else {
            Err(Error::arg(format!("qubit {q} out of range for {} qubits", self.n)))
        }
    }

    pub fn apply_ry(&mut self, q: usize, angle: f64) -> Result<()> {
        self.check_qubit(q)?;
        let (s, c) = angle.sin_cos();
        rotate(&mut self.amps, q, c, s);
        Ok(())
    }

    pub fn apply_cz(&mut self, i: usize, j: usize) -> Result<()> {
        self.check_qubit(i)?;
        self.check_qubit(j)?;
        if i == j {
            return Err(Error::arg(format!("CZ needs two distinct qubits, got ({i}, {j})")));
        }
        let mask = (1usize << i) | (1usize << j);
        for (x, a) in self.amps.iter_mut().enumerate() {
            if x & mask == mask {
                *a = -*a;
            }
        }
        Ok(())
    }

    pub fn inner(&self, other: &StateVector) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::Length { expected: self.dim(), actual: other.dim() });
        }
        Ok(dot(&self.amps, &other.amps))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four accumulators: fixed association order, better pipelining
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * k + l] * b[4 * k + l];
        }
    }
    let mut tail = 0.0;
    for k in 4 * chunks..a.len() {
        tail += a[k] * b[k];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// In-place rotation of every (bit q = 0, bit q = 1) amplitude pair.
#[inline]
pub(crate) fn rotate(amps: &mut [f64], q: usize, c: f64, s: f64) {
    let stride = 1usize << q;
    for block in amps.chunks_exact_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let x = *a;
            let y = *b;
            *a = c * x - s * y;
            *b = s * x + c * y;
        }
    }
}

/// `<lam| K_q |psi>` where `K_q = [[0, -1], [1, 0]]` acts on qubit q. This
/// is the derivative of a rotation applied to `psi`, since K commutes with
/// every RY on the same qubit.
#[inline]
pub(crate) fn generator_overlap(lam: &[f64], psi: &[f64], q: usize) -> f64 {
    let stride = 1usize << q;
    let mut acc = 0.0;
    for (lb, pb) in lam.chunks_exact(2 * stride).zip(psi.chunks_exact(2 * stride)) {
        let (l0, l1) = lb.split_at(stride);
        let (p0, p1) = pb.split_at(stride);
        let mut part = 0.0;
        for k in 0..stride {
            part += l1[k] * p0[k] - l0[k] * p1[k];
        }
        acc += part;
    }
    acc
}

/// Diagonal ±1 layer of CZ gates on ring-adjacent pairs. `low_mask` has bit
/// i set for each retained pair (i, i+1) with i + 1 < n; `wrap` marks the
/// pair (n-1, 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct CzLayer {
    pub low_mask: usize,
    pub wrap: bool,
    pub n: usize,
}

impl CzLayer {
    pub fn is_empty(&self) -> bool {
        self.low_mask == 0 && !self.wrap
    }

    pub fn touches(&self, q: usize) -> bool {
        let low = |i: usize| self.low_mask >> i & 1 == 1;
        low(q) || (q > 0 && low(q - 1)) || (self.wrap && (q == 0 || q + 1 == self.n))
    }

    #[inline]
    pub fn apply(&self, amps: &mut [f64]) {
        if self.is_empty() {
            return;
        }
        let top = self.n - 1;
        for (x, a) in amps.iter_mut().enumerate() {
            let mut parity = (x & (x >> 1) & self.low_mask).count_ones();
            if self.wrap {
                parity += ((x >> top) & x & 1) as u32;
            }
            if parity & 1 == 1 {
                *a = -*a;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn zero_state_examples() {
        assert_eq!(StateVector::zero(2).unwrap().amplitudes(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(StateVector::zero(1).unwrap().amplitudes(), &[1.0, 0.0]);
        let s = StateVector::zero(12).unwrap();
        assert_eq!(s.dim(), 4096);
        assert_eq!(s.amplitudes()[0], 1.0);
        assert_eq!(s.norm_sqr(), 1.0);
    }

    #[test]
    fn qubit_count_out_of_range() {
        assert!(matches!(StateVector::zero(0), Err(Error::Size { .. })));
        assert!(matches!(StateVector::zero(21), Err(Error::Size { .. })));
    }

    #[test]
    fn ry_examples() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, 0.0).unwrap();
        assert_eq!(s.amplitudes(), &[1.0, 0.0]);

        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, FRAC_PI_2).unwrap();
        let one = StateVector::basis(1, 1).unwrap();
        assert_abs_diff_eq!(s.inner(&one).unwrap().abs(), 1.0, epsilon = 1e-15);

        // exp(φ [[0,-1],[1,0]]) |0> = (cos φ, sin φ)
        let mut s = StateVector::zero(1).unwrap();
        s.apply_ry(0, FRAC_PI_4).unwrap();
        assert_abs_diff_eq!(s.amplitudes()[0], FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.amplitudes()[1], FRAC_1_SQRT_2, epsilon = 1e-15);
        let zero = StateVector::zero(1).unwrap();
        assert_abs_diff_eq!(s.inner(&zero).unwrap(), FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn ry_index_out_of_range() {
        let mut s = StateVector::zero(2).unwrap();
        assert!(s.apply_ry(2, 0.1).is_err());
    }

    #[test]
    fn cz_examples() {
        let mut s = StateVector::zero(2).unwrap();
        s.apply_cz(0, 1).unwrap();
        assert_eq!(s.amplitudes(), &[1.0, 0.0, 0.0, 0.0]);

        let mut s = StateVector::basis(2, 3).unwrap();
        s.apply_cz(0, 1).unwrap();
        assert_eq!(s.amplitudes(), &[0.0, 0.0, 0.0, -1.0]);

        let mut s = StateVector::from_amplitudes(2, vec![0.5; 4]).unwrap();
        s.apply_cz(0, 1).unwrap();
        assert_eq!(s.amplitudes(), &[0.5, 0.5, 0.5, -0.5]);

        assert!(matches!(s.apply_cz(1, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn inner_examples() {
        let a = StateVector::zero(2).unwrap();
        let b = StateVector::basis(2, 3).unwrap();
        assert_eq!(a.inner(&a).unwrap(), 1.0);
        assert_eq!(a.inner(&b).unwrap(), 0.0);
        assert!(a.inner(&StateVector::zero(3).unwrap()).is_err());
    }

    #[test]
    fn cz_layer_matches_individual_gates() {
        let n = 5;
        let amps: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
        let layer = CzLayer { low_mask: 0b0101, wrap: true, n };
        let mut fused = amps.clone();
        layer.apply(&mut fused);
        let mut s = StateVector::from_amplitudes(n, amps).unwrap();
        s.apply_cz(0, 1).unwrap();
        s.apply_cz(2, 3).unwrap();
        s.apply_cz(4, 0).unwrap();
        assert_eq!(s.amplitudes(), &fused[..]);
    }

    fn random_state(n: usize, seed: u64) -> StateVector {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, crate::rng::Stream::Sampling);
        let mut v: Vec<f64> = (0..1 << n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        StateVector::from_amplitudes(n, v).unwrap()
    }

    proptest! {
        #[test]
        fn gates_preserve_norm(seed in any::<u64>(), q in 0usize..6, angle in -10.0f64..10.0) {
            let mut s = random_state(6, seed);
            s.apply_ry(q, angle).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            s.apply_cz(q, (q + 1) % 6).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn cz_is_an_involution(seed in any::<u64>(), i in 0usize..5, j in 0usize..5) {
            prop_assume!(i != j);
            let s0 = random_state(5, seed);
            let mut s = s0.clone();
            s.apply_cz(i, j).unwrap();
            s.apply_cz(i, j).unwrap();
            prop_assert_eq!(s, s0);
        }

        #[test]
        fn ry_angles_add(seed in any::<u64>(), q in 0usize..4, a in -4.0f64..4.0, b in -4.0f64..4.0) {
            let s0 = random_state(4, seed);
            let mut two = s0.clone();
            two.apply_ry(q, a).unwrap();
            two.apply_ry(q, b).unwrap();
            let mut one = s0;
            one.apply_ry(q, a + b).unwrap();
            for (x, y) in two.amplitudes().iter().zip(one.amplitudes()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn generator_overlap_is_the_rotation_derivative(seed in any::<u64>(), q in 0usize..4, angle in -3.0f64..3.0) {
            let lam = random_state(4, seed ^ 1);
            let psi = random_state(4, seed);
            let h = 1e-6;
            let f = |phi: f64| {
                let mut p = psi.clone();
                p.apply_ry(q, phi).unwrap();
                lam.inner(&p).unwrap()
            };
            let fd = (f(angle + h) - f(angle - h)) / (2.0 * h);
            let mut rotated = psi.clone();
            rotated.apply_ry(q, angle).unwrap();
            let exact = generator_overlap(lam.amplitudes(), rotated.amplitudes(), q);
            prop_assert!((fd - exact).abs() < 1e-8);
        }
    }
}
