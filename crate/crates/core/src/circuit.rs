//! The layered RY/CZ ansatz on a qubit ring.
//!
//! Each layer rotates every qubit, then applies its CZ gates. Entangling
//! layers alternate between the pairings (0,1),(2,3),... and
//! (1,2),(3,4),...,(n-1,0). Each CZ survives independently with probability
//! 1 - p, drawn once when the circuit is built. Padding layers carry
//! rotations only and sit in the gaps between entangling layers; the
//! alternation of pairings follows the entangling-layer count, so padding
//! never changes which CZ pattern a given entangling layer has.
//!
//! Parameters are indexed in circuit order: `layer * n + qubit`.

use std::f64::consts::TAU;
use std::ops::{Deref, DerefMut};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::state::{check_qubits, rotate, CzLayer, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    /// Entangling layer, numbered among entangling layers only.
    Entangling(usize),
    Padding,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub kind: LayerKind,
    pub cz: CzLayer,
}

/// Serialized form of a circuit. The layer list is rebuilt from these fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub n: usize,
    pub l_ent: usize,
    pub l_pad: usize,
    pub p: f64,
    pub seed: u64,
    pub pad_positions: Vec<usize>,
    pub cz_mask: Vec<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "CircuitRecord", try_from = "CircuitRecord")]
pub struct CircuitSpec {
    record: CircuitRecord,
    layers: Vec<Layer>,
}

/// Qubit pairs of entangling layer `e` (0-based), as `(i, (i + 1) % n)`.
pub fn layer_pairs(n: usize, e: usize) -> Vec<(usize, usize)> {
    let start = e % 2;
    (0..n / 2)
        .map(|m| {
            let i = (2 * m + start) % n;
            (i, (i + 1) % n)
        })
        .collect()
}

impl CircuitSpec {
    /// Sample a circuit instance. The CZ mask and padding positions come
    /// from separate seeded streams.
    pub fn build(n: usize, l_ent: usize, l_pad: usize, p: f64, seed: u64) -> Result<Self> {
        check_qubits(n)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::arg(format!("dropout probability {p} not in [0, 1]")));
        }
        if l_ent == 0 {
            return Err(Error::arg("at least one entangling layer is required"));
        }
        let mut mask_rng = stream(seed, Stream::CzMask);
        let cz_mask = (0..l_ent).map(|_| (0..n / 2).map(|_| mask_rng.gen::<f64>() >= p).collect()).collect();
        let mut pad_rng = stream(seed, Stream::Padding);
        let mut pad_positions: Vec<usize> = (0..l_pad).map(|_| pad_rng.gen_range(0..=l_ent)).collect();
        pad_positions.sort_unstable();
        Self::from_record(CircuitRecord { n, l_ent, l_pad, p, seed, pad_positions, cz_mask })
    }

    /// Rebuild from explicit fields, validating the mask shape and gap indices.
    pub fn from_record(record: CircuitRecord) -> Result<Self> {
        let CircuitRecord { n, l_ent, l_pad, ref pad_positions, ref cz_mask, .. } = record;
        check_qubits(n)?;
        if l_ent == 0 {
            return Err(Error::arg("at least one entangling layer is required"));
        }
        if cz_mask.len() != l_ent || cz_mask.iter().any(|m| m.len() != n / 2) {
            return Err(Error::arg(format!("cz_mask must have {l_ent} rows of {} entries", n / 2)));
        }
        if pad_positions.len() != l_pad || pad_positions.iter().any(|&g| g > l_ent) {
            return Err(Error::arg(format!("pad_positions must hold {l_pad} gap indices in [0, {l_ent}]")));
        }
        if pad_positions.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::arg("pad_positions must be sorted"));
        }

        let mut layers = Vec::with_capacity(l_ent + l_pad);
        let mut pads = pad_positions.iter().peekable();
        for gap in 0..=l_ent {
            while pads.next_if(|&&g| g == gap).is_some() {
                layers.push(Layer { kind: LayerKind::Padding, cz: CzLayer { n, ..Default::default() } });
            }
            if gap < l_ent {
                let mut cz = CzLayer { n, ..Default::default() };
                for (&(i, j), &keep) in layer_pairs(n, gap).iter().zip(&cz_mask[gap]) {
                    if !keep {
                        continue;
                    }
                    if j == 0 && i == n - 1 {
                        cz.wrap = true;
                    } else {
                        cz.low_mask |= 1 << i;
                    }
                }
                layers.push(Layer { kind: LayerKind::Entangling(gap), cz });
            }
        }
        Ok(CircuitSpec { record, layers })
    }

    pub fn n_qubits(&self) -> usize {
        self.record.n
    }

    pub fn entangling_layers(&self) -> usize {
        self.record.l_ent
    }

    pub fn padding_layers(&self) -> usize {
        self.record.l_pad
    }

    /// Total layer count L.
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// nL.
    pub fn n_params(&self) -> usize {
        self.record.n * self.layers.len()
    }

    pub fn dropout(&self) -> f64 {
        self.record.p
    }

    pub fn seed(&self) -> u64 {
        self.record.seed
    }

    pub fn record(&self) -> &CircuitRecord {
        &self.record
    }

    pub fn layer_kinds(&self) -> impl Iterator<Item = LayerKind> + '_ {
        self.layers.iter().map(|l| l.kind)
    }

    pub(crate) fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of CZ gates kept after dropout.
    pub fn retained_cz(&self) -> usize {
        self.record.cz_mask.iter().flatten().filter(|&&b| b).count()
    }

    pub fn parameter_index(&self, layer: usize, qubit: usize) -> Result<usize> {
        if layer >= self.n_layers() || qubit >= self.n_qubits() {
            return Err(Error::arg(format!(
                "(layer {layer}, qubit {qubit}) outside {} layers x {} qubits",
                self.n_layers(),
                self.n_qubits()
            )));
        }
        Ok(layer * self.n_qubits() + qubit)
    }

    /// Inverse of [`parameter_index`](Self::parameter_index).
    pub fn parameter_position(&self, index: usize) -> Result<(usize, usize)> {
        if index >= self.n_params() {
            return Err(Error::arg(format!("parameter {index} outside [0, {})", self.n_params())));
        }
        Ok((index / self.n_qubits(), index % self.n_qubits()))
    }

    pub(crate) fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::Length { expected: self.n_params(), actual: theta.len() });
        }
        Ok(())
    }

    /// Parameter pairs `(a, b)` whose rotations act back to back on one
    /// qubit, with no CZ on that qubit between them. Such rotations merge,
    /// so the state depends on `θ_a + θ_b` only.
    pub fn redundant_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_qubits();
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().take(self.layers.len().saturating_sub(1)) {
            for q in 0..n {
                if !layer.cz.touches(q) {
                    out.push((l * n + q, (l + 1) * n + q));
                }
            }
        }
        out
    }

    /// U(θ)|0...0>.
    pub fn apply(&self, theta: &[f64]) -> Result<StateVector> {
        let mut s = StateVector::zero(self.n_qubits())?;
        self.apply_into(theta, &mut s)?;
        Ok(s)
    }

    /// Overwrite `out` with U(θ)|0...0>.
    pub fn apply_into(&self, theta: &[f64], out: &mut StateVector) -> Result<()> {
        self.check_params(theta)?;
        if out.n_qubits() != self.n_qubits() {
            return Err(Error::Length { expected: 1 << self.n_qubits(), actual: out.dim() });
        }
        out.reset();
        self.evolve(theta, out.amplitudes_mut());
        Ok(())
    }

    pub(crate) fn evolve(&self, theta: &[f64], amps: &mut [f64]) {
        let n = self.n_qubits();
        for (layer, angles) in self.layers.iter().zip(theta.chunks_exact(n)) {
            for (q, &phi) in angles.iter().enumerate() {
                let (s, c) = phi.sin_cos();
                rotate(amps, q, c, s);
            }
            layer.cz.apply(amps);
        }
    }
}

impl From<CircuitSpec> for CircuitRecord {
    fn from(spec: CircuitSpec) -> Self {
        spec.record
    }
}

impl TryFrom<CircuitRecord> for CircuitSpec {
    type Error = Error;
    fn try_from(record: CircuitRecord) -> Result<Self> {
        CircuitSpec::from_record(record)
    }
}

/// Circuit angles θ, one per (layer, qubit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn zeros(len: usize) -> Self {
        ParameterVector(vec![0.0; len])
    }

    /// i.i.d. Uniform[0, 2π) angles from the `InitialParams` stream of `seed`.
    pub fn uniform(len: usize, seed: u64) -> Self {
        let mut rng = stream(seed, Stream::InitialParams);
        Self::uniform_from(len, &mut rng)
    }

    pub fn uniform_from<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        ParameterVector((0..len).map(|_| rng.gen_range(0.0..TAU)).collect())
    }
}

impl Deref for ParameterVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParameterVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// The distribution a circuit instance is drawn from: fixed shape and
/// dropout probability, random mask and padding placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitFamily {
    pub n: usize,
    pub l_ent: usize,
    pub l_pad: usize,
    pub p: f64,
}

impl CircuitFamily {
    pub fn new(n: usize, l_ent: usize, l_pad: usize, p: f64) -> Self {
        CircuitFamily { n, l_ent, l_pad, p }
    }

    pub fn sample(&self, seed: u64) -> Result<CircuitSpec> {
        CircuitSpec::build(self.n, self.l_ent, self.l_pad, self.p, seed)
    }

    pub fn n_params(&self) -> usize {
        self.n * (self.l_ent + self.l_pad)
    }
}
