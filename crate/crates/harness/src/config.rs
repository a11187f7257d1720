//! Experiment configuration files.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use vqa_core::hamiltonian::IsingParams;
use vqa_core::optimizer::OptimizerConfig;
use vqa_core::rng::derive_seed;
use vqa_core::state::MAX_QUBITS;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Random-point samples of gradients, purity and entropy.
    MomentSweep,
    /// Optimizer runs over a dropout sweep.
    VqaSweep,
    /// Hessian spectra at random initial points.
    HessianInit,
    /// Optimizer runs with Hessians along the trajectory.
    HessianTrajectory,
    /// Optimizer runs over a padding-depth sweep.
    PaddingSweep,
}

/// The single sweep axis of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    /// Dropout probabilities.
    P(Vec<f64>),
    /// Padding-layer counts.
    LPad(Vec<usize>),
    /// Total depths; padding is `l - l_ent`.
    L(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySettings {
    #[serde(default = "two")]
    pub order: u32,
    /// Qubits in subsystem A; defaults to ⌊n/2⌋.
    #[serde(default)]
    pub subsystem: Option<usize>,
}

fn two() -> u32 {
    2
}

impl Default for EntropySettings {
    fn default() -> Self {
        EntropySettings { order: 2, subsystem: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
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

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings { j: 1.0, g: 1.0, periodic: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub l_ent: usize,
    pub sweep: Sweep,
    /// Dropout used when the sweep axis is depth.
    #[serde(default)]
    pub p: f64,
    /// Padding used when the sweep axis is dropout.
    #[serde(default)]
    pub l_pad: usize,
    pub instances: usize,
    /// Only the first this-many instances of each cell get Hessians;
    /// defaults to all.
    #[serde(default)]
    pub hessian_instances: Option<usize>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub entropy: EntropySettings,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

/// One point on the sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub p: f64,
    pub l_pad: usize,
    /// Total depth.
    pub l: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub index: usize,
    pub cell: usize,
    pub instance: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.n < 2 || self.n > MAX_QUBITS {
            return bad(format!("n = {} is out of range; use 2..={MAX_QUBITS}", self.n));
        }
        if self.l_ent == 0 {
            return bad("l_ent must be at least 1".into());
        }
        if self.instances == 0 {
            return bad("instances must be at least 1".into());
        }
        if let Some(h) = self.hessian_instances {
            if h > self.instances {
                return bad(format!("hessian_instances ({h}) exceeds instances ({})", self.instances));
            }
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} must lie in [0, 1]", self.p));
        }
        self.optimizer.validate().map_err(|e| HarnessError::Config(format!("optimizer: {e}")))?;
        if self.entropy.order < 2 {
            return bad("entropy.order must be at least 2".into());
        }
        if let Some(a) = self.entropy.subsystem {
            if a == 0 || a >= self.n {
                return bad(format!("entropy.subsystem must lie in 1..{}", self.n));
            }
        }
        let depth_axis = match &self.sweep {
            Sweep::P(ps) => {
                if ps.is_empty() {
                    return bad("sweep.p is empty".into());
                }
                if let Some(p) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return bad(format!("sweep.p contains {p}, outside [0, 1]"));
                }
                false
            }
            Sweep::LPad(ls) | Sweep::L(ls) => {
                if ls.is_empty() {
                    return bad("depth sweep is empty".into());
                }
                if let Sweep::L(ls) = &self.sweep {
                    if let Some(l) = ls.iter().find(|&&l| l < self.l_ent) {
                        return bad(format!("sweep.l contains {l}, below l_ent = {}", self.l_ent));
                    }
                }
                true
            }
        };
        match (self.kind, depth_axis) {
            (ExperimentKind::PaddingSweep, false) => {
                bad("padding_sweep needs a depth axis: sweep.l or sweep.l_pad".into())
            }
            (ExperimentKind::PaddingSweep, true) | (_, false) => Ok(()),
            (_, true) => bad("only padding_sweep sweeps depth; use sweep.p".into()),
        }?;
        if matches!(self.kind, ExperimentKind::HessianInit | ExperimentKind::HessianTrajectory) {
            let np = self.n * self.cells().iter().map(|c| c.l).max().unwrap_or(0);
            if np > vqa_core::deriv::MAX_HESSIAN_PARAMS {
                return bad(format!("{np} parameters exceed the Hessian limit"));
            }
        }
        if self.model_params().n > vqa_core::hamiltonian::MAX_GROUND_QUBITS && self.needs_ground_energy() {
            return bad("ground energy unavailable beyond 16 qubits".into());
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        match &self.sweep {
            Sweep::P(ps) => ps
                .iter()
                .enumerate()
                .map(|(index, &p)| Cell { index, p, l_pad: self.l_pad, l: self.l_ent + self.l_pad })
                .collect(),
            Sweep::LPad(ls) => ls
                .iter()
                .enumerate()
                .map(|(index, &l_pad)| Cell { index, p: self.p, l_pad, l: self.l_ent + l_pad })
                .collect(),
            Sweep::L(ls) => {
                ls.iter().enumerate().map(|(index, &l)| Cell { index, p: self.p, l_pad: l - self.l_ent, l }).collect()
            }
        }
    }

    /// Tasks in canonical order: cell-major, then instance.
    pub fn tasks(&self) -> Vec<Task> {
        let cells = self.cells();
        let mut out = Vec::with_capacity(cells.len() * self.instances);
        for c in &cells {
            for i in 0..self.instances {
                out.push(Task {
                    index: out.len(),
                    cell: c.index,
                    instance: i,
                    seed: derive_seed(self.seed, &[c.index as u64, i as u64]),
                });
            }
        }
        out
    }

    pub fn model_params(&self) -> IsingParams {
        IsingParams { n: self.n, j: self.model.j, g: self.model.g, periodic: self.model.periodic }
    }

    pub fn needs_ground_energy(&self) -> bool {
        !matches!(self.kind, ExperimentKind::MomentSweep | ExperimentKind::HessianInit)
    }

    pub fn wants_hessian(&self, instance: usize) -> bool {
        instance < self.hessian_instances.unwrap_or(self.instances)
    }

    /// The config with the output directory blanked, for resume checks.
    pub fn fingerprint(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        serde_json::to_value(c).expect("config serializes")
    }
}
