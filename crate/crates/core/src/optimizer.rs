//! Momentum gradient descent and the flow-rate statistics of its
//! continuum limit.
//!
//! Update: `v ← β v − η ∇𝓛(θ)`, `θ ← θ + v`, starting from `v = 0`. For
//! small η the iteration follows `(1 − β) dθ/dτ = −∇𝓛`, which gives, at
//! uniformly random θ,
//!
//! ```text
//! E[d𝓛/dτ]     = −Σ_a Var(∂_a 𝓛) / (1 − β)
//! E[d∂_a𝓛/dτ]  = 0
//! E[dH_ab/dτ]  = E[(H²)_ab] / (1 − β)
//! ```
//!
//! The last one follows from `dH_ab/dτ = −Σ_c T_abc ∂_c𝓛 / (1 − β)` and
//! integration by parts on the torus.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitSpec, ParameterVector};
use crate::deriv::{self, Workspace};
use crate::entropy::{renyi_entropy, Bipartition};
use crate::error::{Error, Result};
use crate::hamiltonian::IsingModel;
use crate::rng::{derive_seed, stream, Stream};
use crate::spectral::{landscape_metrics, HessianReport, THETA_LARGE_INIT, THETA_LARGE_TRAJECTORY, THETA_SMALL};
use crate::state::StateVector;
use crate::stats::{MomentEstimate, VarianceEstimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub eta: f64,
    pub beta: f64,
    pub steps: usize,
    pub success_threshold: f64,
    /// Snapshot steps; `None` means [`default_schedule`].
    pub snapshot_schedule: Option<Vec<usize>>,
    pub hessian_snapshots: bool,
    /// Snapshot steps that get a Hessian when `hessian_snapshots` is set;
    /// `None` means all of them.
    pub hessian_schedule: Option<Vec<usize>>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            eta: 0.9,
            beta: 0.01,
            steps: 5000,
            success_threshold: 0.1,
            snapshot_schedule: None,
            hessian_snapshots: false,
            hessian_schedule: None,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::arg(format!("eta must be positive, got {}", self.eta)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::arg(format!("beta must lie in [0, 1), got {}", self.beta)));
        }
        if !(self.success_threshold > 0.0) {
            return Err(Error::arg("success_threshold must be positive"));
        }
        Ok(())
    }

    /// Sorted, deduplicated snapshot steps not exceeding `steps`.
    pub fn schedule(&self) -> Vec<usize> {
        let mut s = match &self.snapshot_schedule {
            Some(v) => v.iter().copied().filter(|&t| t <= self.steps).collect(),
            None => default_schedule(self.steps),
        };
        s.sort_unstable();
        s.dedup();
        s
    }

    /// The default with η and β exchanged: η = 0.01, β = 0.9.
    pub fn swapped() -> Self {
        OptimizerConfig { eta: 0.01, beta: 0.9, ..Default::default() }
    }

    fn wants_hessian(&self, tau: usize) -> bool {
        self.hessian_snapshots && self.hessian_schedule.as_ref().map_or(true, |h| h.contains(&tau))
    }
}

/// {a · 10^b ≤ steps : 0 ≤ a, b ≤ 9}, including 0.
pub fn default_schedule(steps: usize) -> Vec<usize> {
    let mut s: Vec<usize> = (0..=9u32)
        .flat_map(|b| (0..=9u64).filter_map(move |a| a.checked_mul(10u64.checked_pow(b)?)))
        .filter(|&t| t <= steps as u64)
        .map(|t| t as usize)
        .collect();
    s.sort_unstable();
    s.dedup();
    s
}

/// One momentum update in place.
pub fn momentum_update(eta: f64, beta: f64, grad: &[f64], theta: &mut [f64], v: &mut [f64]) -> Result<()> {
    if let Some(a) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient component {a}")));
    }
    for ((t, v), g) in theta.iter_mut().zip(v.iter_mut()).zip(grad) {
        *v = beta * *v - eta * g;
        *t += *v;
    }
    Ok(())
}

/// Evaluates gradients with the adjoint method and applies momentum steps.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    ws: Workspace,
    grad: Vec<f64>,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, spec: &CircuitSpec) -> Result<Self> {
        config.validate()?;
        Ok(Optimizer { config, ws: Workspace::new(spec.n_qubits()), grad: vec![0.0; spec.n_params()] })
    }

    /// Energy and gradient at θ; the gradient is kept for the next step.
    fn evaluate(&mut self, spec: &CircuitSpec, model: &IsingModel, theta: &[f64]) -> Result<f64> {
        if self.grad.len() != theta.len() {
            self.grad = vec![0.0; theta.len()];
        }
        self.ws.energy_and_gradient(spec, model, theta, &mut self.grad)
    }

    /// Take one step from θ; returns 𝓛(θ) before the step.
    pub fn step(&mut self, spec: &CircuitSpec, model: &IsingModel, theta: &mut [f64], v: &mut [f64]) -> Result<f64> {
        let e = self.evaluate(spec, model, theta)?;
        momentum_update(self.config.eta, self.config.beta, &self.grad, theta, v)?;
        Ok(e)
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tau: usize,
    pub theta: Vec<f64>,
    pub energy: f64,
    pub delta_e: f64,
    /// Rényi-2 entropy of the first ⌊n/2⌋ qubits.
    pub renyi2: f64,
    pub hessian: Option<HessianReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub ground_energy: f64,
    /// 𝓛(θ_τ) for τ = 0..=steps.
    pub energy: Vec<f64>,
    pub delta_e: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub final_theta: Vec<f64>,
    pub final_velocity: Vec<f64>,
    pub success: bool,
    pub steps_to_success: Option<usize>,
}

impl TrajectoryRecord {
    pub fn final_delta_e(&self) -> f64 {
        *self.delta_e.last().expect("trajectory has at least one point")
    }

    pub fn snapshot(&self, tau: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.tau == tau)
    }

    /// Fraction of steps whose energy exceeds the previous one.
    pub fn uphill_fraction(&self) -> f64 {
        let steps = self.energy.len().saturating_sub(1);
        if steps == 0 {
            return 0.0;
        }
        self.energy.windows(2).filter(|w| w[1] > w[0]).count() as f64 / steps as f64
    }
}

/// Run `config.steps` updates from θ₀ with v₀ = 0.
pub fn run(
    spec: &CircuitSpec,
    model: &IsingModel,
    theta0: &[f64],
    config: &OptimizerConfig,
    ground_energy: f64,
) -> Result<TrajectoryRecord> {
    let mut opt = Optimizer::new(config.clone(), spec)?;
    spec.check_params(theta0)?;
    let schedule = config.schedule();
    let part = Bipartition::half(spec.n_qubits()).ok();
    let mut theta = theta0.to_vec();
    let mut v = vec![0.0; theta.len()];
    let mut rec = TrajectoryRecord {
        ground_energy,
        energy: Vec::with_capacity(config.steps + 1),
        delta_e: Vec::with_capacity(config.steps + 1),
        grad_norm: Vec::with_capacity(config.steps + 1),
        snapshots: Vec::with_capacity(schedule.len()),
        final_theta: Vec::new(),
        final_velocity: Vec::new(),
        success: false,
        steps_to_success: None,
    };
    let mut next = schedule.iter().peekable();
    for tau in 0..=config.steps {
        let e = opt.evaluate(spec, model, &theta)?;
        if !e.is_finite() {
            return Err(Error::Numeric(format!("non-finite energy at step {tau}")));
        }
        let de = e - ground_energy;
        rec.energy.push(e);
        rec.delta_e.push(de);
        rec.grad_norm.push(opt.grad.iter().map(|g| g * g).sum::<f64>().sqrt());
        if rec.steps_to_success.is_none() && de < config.success_threshold {
            rec.steps_to_success = Some(tau);
        }
        if next.peek() == Some(&&tau) {
            next.next();
            let renyi2 = match &part {
                Some(part) => {
                    let s = StateVector::from_amplitudes(spec.n_qubits(), opt.ws.state().to_vec())?;
                    renyi_entropy(&s, part, 2)?
                }
                None => 0.0,
            };
            let hessian = if config.wants_hessian(tau) {
                let h = deriv::hessian_adjoint(spec, model, &theta)?;
                let large = if tau == 0 { THETA_LARGE_INIT } else { THETA_LARGE_TRAJECTORY };
                Some(landscape_metrics(&h, &opt.grad, THETA_SMALL, large)?)
            } else {
                None
            };
            rec.snapshots.push(Snapshot { tau, theta: theta.clone(), energy: e, delta_e: de, renyi2, hessian });
        }
        if tau < config.steps {
            momentum_update(config.eta, config.beta, &opt.grad, &mut theta, &mut v)?;
        }
    }
    rec.success = rec.steps_to_success.is_some();
    rec.final_theta = theta;
    rec.final_velocity = v;
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSettings {
    /// Samples for the energy and gradient rates.
    pub samples: usize,
    /// Samples for the Hessian rate; 0 skips it.
    pub hessian_samples: usize,
    /// Flow-time increment for the central-difference rates.
    pub dtau: f64,
    /// Multiples of the gradient standard deviation at which the
    /// Chebyshev tail is checked.
    pub chebyshev_multiples: Vec<f64>,
    pub sigmas: f64,
}

impl Default for RateSettings {
    fn default() -> Self {
        RateSettings {
            samples: 2000,
            hessian_samples: 1000,
            dtau: 1e-4,
            chebyshev_multiples: vec![1.0, 2.0, 3.0],
            sigmas: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub measured: MomentEstimate,
    pub predicted: MomentEstimate,
    pub z: f64,
    pub pass: bool,
}

impl Comparison {
    fn new(measured: MomentEstimate, predicted: MomentEstimate, sigmas: f64) -> Self {
        let se = (measured.std_error.powi(2) + predicted.std_error.powi(2)).sqrt();
        let diff = measured.value - predicted.value;
        let z = if se > 0.0 {
            diff / se
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        };
        Comparison { measured, predicted, z, pass: z.abs() < sigmas }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevCheck {
    pub param: usize,
    /// Threshold on |dθ_a/dτ|.
    pub c: f64,
    pub empirical: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub n: usize,
    pub n_params: usize,
    pub beta: f64,
    pub samples: usize,
    pub sigmas: f64,
    /// Mean d𝓛/dτ against −Σ_a Var(∂_a𝓛)/(1−β) from an independent sample.
    pub energy_rate: Comparison,
    /// Mean d∂_a𝓛/dτ for each a.
    pub gradient_rate: Vec<MomentEstimate>,
    pub gradient_rate_max_z: f64,
    pub gradient_rate_pass: bool,
    pub chebyshev: Vec<ChebyshevCheck>,
    /// Mean −(T·∇𝓛)_ab/(1−β) against E[(H²)_ab]/(1−β), upper triangle
    /// row by row.
    pub hessian_rate: Option<Vec<Comparison>>,
    pub hessian_samples: usize,
    pub hessian_rate_pass: Option<bool>,
}

const GRADIENT_STREAM: u64 = 0;
const VARIANCE_STREAM: u64 = 1;
const TENSOR_STREAM: u64 = 2;
const SQUARE_STREAM: u64 = 3;

fn random_theta(np: usize, seed: u64, purpose: u64, q: usize) -> ParameterVector {
    let mut rng = stream(derive_seed(seed, &[purpose, q as u64]), Stream::Sampling);
    ParameterVector::uniform_from(np, &mut rng)
}

/// Monte-Carlo checks of the continuum-limit rate identities at uniformly
/// random θ for a fixed circuit.
pub fn rate_statistics(
    spec: &CircuitSpec,
    model: &IsingModel,
    settings: &RateSettings,
    seed: u64,
    config: &OptimizerConfig,
) -> Result<RateReport> {
    config.validate()?;
    if settings.samples < 2 {
        return Err(Error::arg("rate statistics need at least two samples"));
    }
    let np = spec.n_params();
    let k = 1.0 / (1.0 - config.beta);
    let h = settings.dtau;

    // energy and gradient rates by central differences along the flow
    struct Sample {
        rate: f64,
        grad_rate: Vec<f64>,
    }
    let flow: Vec<Sample> = (0..settings.samples)
        .into_par_iter()
        .map_init(
            || (Workspace::new(spec.n_qubits()), vec![0.0; np], vec![0.0; np], vec![0.0; np]),
            |(ws, g, gp, gm), q| {
                let theta = random_theta(np, seed, GRADIENT_STREAM, q);
                ws.energy_and_gradient(spec, model, &theta, g)?;
                let shifted =
                    |sign: f64| -> Vec<f64> { theta.iter().zip(g.iter()).map(|(t, d)| t - sign * h * k * d).collect() };
                let (tp, tm) = (shifted(1.0), shifted(-1.0));
                let ep = ws.energy_and_gradient(spec, model, &tp, gp)?;
                let em = ws.energy_and_gradient(spec, model, &tm, gm)?;
                Ok(Sample {
                    rate: (ep - em) / (2.0 * h),
                    grad_rate: gp.iter().zip(gm.iter()).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
                })
            },
        )
        .collect::<Result<_>>()?;

    let grads: Vec<Vec<f64>> = (0..settings.samples)
        .into_par_iter()
        .map_init(
            || Workspace::new(spec.n_qubits()),
            |ws, q| {
                let theta = random_theta(np, seed, VARIANCE_STREAM, q);
                let mut g = vec![0.0; np];
                ws.energy_and_gradient(spec, model, &theta, &mut g)?;
                Ok(g)
            },
        )
        .collect::<Result<_>>()?;

    let m = settings.samples as f64;
    let means: Vec<f64> = (0..np).map(|a| grads.iter().map(|g| g[a]).sum::<f64>() / m).collect();
    let var_sum: Vec<f64> = grads
        .iter()
        .map(|g| -k * g.iter().zip(&means).map(|(x, mu)| (x - mu).powi(2)).sum::<f64>() * m / (m - 1.0))
        .collect();
    let rates: Vec<f64> = flow.iter().map(|s| s.rate).collect();
    let energy_rate =
        Comparison::new(MomentEstimate::from_samples(&rates), MomentEstimate::from_samples(&var_sum), settings.sigmas);

    let gradient_rate: Vec<MomentEstimate> = (0..np)
        .map(|a| MomentEstimate::from_samples(&flow.iter().map(|s| s.grad_rate[a]).collect::<Vec<_>>()))
        .collect();
    let gradient_rate_max_z = gradient_rate.iter().map(|e| e.z_score(0.0).abs()).fold(0.0, f64::max);

    // Chebyshev tail for the middle parameter's flow rate
    let param = np / 2;
    let col: Vec<f64> = grads.iter().map(|g| g[param]).collect();
    let var = VarianceEstimate::from_samples(&col).variance;
    let sd = var.sqrt() * k;
    let chebyshev = settings
        .chebyshev_multiples
        .iter()
        .map(|&mult| {
            let c = mult * sd;
            let empirical = col.iter().filter(|g| (k * g.abs()) >= c).count() as f64 / m;
            let bound = var * k * k / (c * c);
            ChebyshevCheck { param, c, empirical, bound, holds: empirical <= bound }
        })
        .collect();

    let hessian_rate =
        if settings.hessian_samples >= 2 { Some(hessian_rate(spec, model, settings, seed, k)?) } else { None };
    let hessian_rate_pass = hessian_rate.as_ref().map(|v| v.iter().all(|c| c.pass));

    Ok(RateReport {
        n: spec.n_qubits(),
        n_params: np,
        beta: config.beta,
        samples: settings.samples,
        sigmas: settings.sigmas,
        energy_rate,
        gradient_rate_pass: gradient_rate_max_z < settings.sigmas,
        gradient_rate,
        gradient_rate_max_z,
        chebyshev,
        hessian_rate,
        hessian_samples: settings.hessian_samples,
        hessian_rate_pass,
    })
}

fn upper(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    (0..d).flat_map(|a| (a..d).map(move |b| (a, b))).map(|(a, b)| m[(a, b)]).collect()
}

fn hessian_rate(
    spec: &CircuitSpec,
    model: &IsingModel,
    settings: &RateSettings,
    seed: u64,
    k: f64,
) -> Result<Vec<Comparison>> {
    let np = spec.n_params();
    let samples = settings.hessian_samples;
    let tensor: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|q| {
            let theta = random_theta(np, seed, TENSOR_STREAM, q);
            let g = deriv::grad_adjoint(spec, model, &theta)?;
            let t = deriv::hessian_directional_derivative(spec, model, &theta, &g)?;
            Ok(upper(&(t * -k)))
        })
        .collect::<Result<_>>()?;
    let square: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|q| {
            let theta = random_theta(np, seed, SQUARE_STREAM, q);
            let h = deriv::hessian_adjoint(spec, model, &theta)?;
            Ok(upper(&(&h * &h * k)))
        })
        .collect::<Result<_>>()?;
    let entries = tensor[0].len();
    Ok((0..entries)
        .map(|e| {
            let a = MomentEstimate::from_samples(&tensor.iter().map(|r| r[e]).collect::<Vec<_>>());
            let b = MomentEstimate::from_samples(&square.iter().map(|r| r[e]).collect::<Vec<_>>());
            Comparison::new(a, b, settings.sigmas)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn schedule_contents() {
        let s = default_schedule(5000);
        assert_eq!(&s[..12], &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20]);
        assert!(s.contains(&900) && s.contains(&5000) && !s.contains(&6000));
        assert_eq!(s.len(), 1 + 9 + 9 + 9 + 5);
        assert_eq!(default_schedule(0), vec![0]);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        assert!(OptimizerConfig { beta: 1.0, ..Default::default() }.validate().is_err());
        assert!(OptimizerConfig { eta: 0.0, ..Default::default() }.validate().is_err());
        let cfg: OptimizerConfig = serde_json::from_str(r#"{"eta": 0.01, "beta": 0.9}"#).unwrap();
        assert_eq!(cfg.steps, 5000);
        assert!(serde_json::from_str::<OptimizerConfig>(r#"{"etta": 1}"#).is_err());
    }

    #[test]
    fn fixed_point() {
        let mut t = vec![0.3, 1.2];
        let mut v = vec![0.0; 2];
        momentum_update(0.5, 0.9, &[0.0, 0.0], &mut t, &mut v).unwrap();
        assert_eq!(t, vec![0.3, 1.2]);
    }

    #[test]
    fn single_parameter_descends() {
        // 𝓛 = cos 2θ, ∂𝓛 = −2 sin 2θ
        let theta0 = PI / 8.0;
        let eta = 0.01;
        let mut t = vec![theta0];
        let mut v = vec![0.0];
        momentum_update(eta, 0.0, &[-2.0 * (2.0 * theta0).sin()], &mut t, &mut v).unwrap();
        assert_abs_diff_eq!(t[0], theta0 + eta * 2.0 * (PI / 4.0).sin(), epsilon = 1e-15);
        assert!((2.0 * t[0]).cos() < (2.0 * theta0).cos());
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut t = vec![0.0];
        let mut v = vec![0.0];
        assert!(matches!(momentum_update(0.1, 0.0, &[f64::NAN], &mut t, &mut v), Err(Error::Numeric(_))));
    }

    #[test]
    fn quadratic_bowl_converges() {
        let curv = [1.0, 4.0, 10.0];
        let mut t: Vec<f64> = vec![1.0, -2.0, 0.5];
        let mut v = vec![0.0; 3];
        let mut steps = 0;
        while t.iter().any(|x| x.abs() > 1e-6) {
            let g: Vec<f64> = t.iter().zip(&curv).map(|(x, c)| c * x).collect();
            momentum_update(0.01, 0.9, &g, &mut t, &mut v).unwrap();
            steps += 1;
            assert!(steps <= 5000);
        }
    }

    #[test]
    fn run_records_every_step_and_the_schedule() {
        let spec = CircuitSpec::build(4, 4, 0, 0.3, 1).unwrap();
        let model = IsingModel::ring(4).unwrap();
        let eg = model.ground_energy().unwrap();
        let theta = ParameterVector::uniform(spec.n_params(), 2);
        let cfg = OptimizerConfig { eta: 0.01, beta: 0.9, steps: 200, hessian_snapshots: true, ..Default::default() };
        let rec = run(&spec, &model, &theta, &cfg, eg).unwrap();
        assert_eq!(rec.energy.len(), 201);
        let taus: Vec<usize> = rec.snapshots.iter().map(|s| s.tau).collect();
        assert_eq!(taus, default_schedule(200));
        assert_eq!(rec.snapshots[0].theta, theta.0);
        let h0 = rec.snapshots[0].hessian.as_ref().unwrap();
        assert_eq!(h0.theta_large, THETA_LARGE_INIT);
        assert_eq!(rec.snapshots[1].hessian.as_ref().unwrap().theta_large, THETA_LARGE_TRAJECTORY);
        assert!(rec.energy[200] < rec.energy[0]);
        assert!(rec.delta_e.iter().all(|d| *d > -1e-9));
        let again = run(&spec, &model, &theta, &cfg, eg).unwrap();
        assert_eq!(rec, again);
    }

    #[test]
    fn small_circuit_reaches_ground_state() {
        let n = 4;
        let spec = CircuitSpec::build(n, 8, 0, 0.0, 3).unwrap();
        let model = IsingModel::ring(n).unwrap();
        let eg = model.ground_energy().unwrap();
        let theta = ParameterVector::uniform(spec.n_params(), 4);
        let cfg = OptimizerConfig { eta: 0.01, beta: 0.9, steps: 3000, ..Default::default() };
        let rec = run(&spec, &model, &theta, &cfg, eg).unwrap();
        assert!(rec.success, "final ΔE {}", rec.final_delta_e());
        let first = rec.steps_to_success.unwrap();
        assert!(rec.delta_e[first] < 0.1 && rec.delta_e[..first].iter().all(|d| *d >= 0.1));
    }

    #[test]
    fn energy_rate_identity() {
        let spec = CircuitSpec::build(4, 6, 0, 0.5, 5).unwrap();
        let model = IsingModel::ring(4).unwrap();
        let settings = RateSettings { samples: 1000, hessian_samples: 0, ..Default::default() };
        let cfg = OptimizerConfig { beta: 0.5, ..Default::default() };
        let r = rate_statistics(&spec, &model, &settings, 7, &cfg).unwrap();
        assert!(r.energy_rate.pass, "{:?}", r.energy_rate);
        assert!(r.energy_rate.measured.value < 0.0);
        assert!(r.gradient_rate_pass, "max z {}", r.gradient_rate_max_z);
        assert!(r.chebyshev.iter().all(|c| c.holds));
        assert!(r.hessian_rate.is_none());
    }

    #[test]
    fn hessian_rate_identity_small() {
        let spec = CircuitSpec::build(2, 2, 0, 0.0, 5).unwrap();
        let model = IsingModel::ring(2).unwrap();
        let settings = RateSettings { samples: 100, hessian_samples: 400, ..Default::default() };
        let r = rate_statistics(&spec, &model, &settings, 8, &OptimizerConfig::default()).unwrap();
        assert_eq!(r.hessian_rate.as_ref().unwrap().len(), 4 * 5 / 2);
        assert_eq!(r.hessian_rate_pass, Some(true), "{:?}", r.hessian_rate);
    }
}
