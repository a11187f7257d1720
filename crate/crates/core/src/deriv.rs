//! Exact derivatives of the energy 𝓛(θ) = <ψ(θ)|H|ψ(θ)>.
//!
//! Each angle enters through a rotation `exp(φ K)` with `K² = -1`, so the
//! state is linear in (cos φ, sin φ) and the energy restricted to one angle
//! is `A + B cos 2φ + C sin 2φ`. For any such function
//!
//! ```text
//! f'(φ)  = f(φ + π/4) - f(φ - π/4)
//! f''(φ) = f(φ + π/2) - 2 f(φ) + f(φ - π/2)
//! ```
//!
//! exactly. The shift is π/4 rather than the familiar π/2 because the
//! frequency is 2, not 1. Derivatives of 𝓛 are again trigonometric
//! polynomials of the same kind in every angle, so the rule nests: mixed
//! second derivatives use shifts on both angles, and the Hessian column for
//! angle a is the shift difference of two gradients.
//!
//! [`grad_adjoint`] gets the whole gradient from one forward and one
//! backward sweep. It is what the optimizer uses; [`grad_shift`] is the
//! independent reference.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::circuit::CircuitSpec;
use crate::error::{Error, Result};
use crate::hamiltonian::IsingModel;
use crate::state::{generator_overlap, rotate};

/// Hessians are only assembled up to this many parameters.
pub const MAX_HESSIAN_PARAMS: usize = 4096;

fn check_model(spec: &CircuitSpec, model: &IsingModel) -> Result<()> {
    if spec.n_qubits() != model.n_qubits() {
        return Err(Error::arg(format!(
            "circuit has {} qubits but the model has {}",
            spec.n_qubits(),
            model.n_qubits()
        )));
    }
    Ok(())
}

/// Scratch buffers for repeated energy and gradient evaluations.
#[derive(Debug, Clone)]
pub struct Workspace {
    psi: Vec<f64>,
    lam: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Workspace { psi: vec![0.0; 1 << n], lam: vec![0.0; 1 << n] }
    }

    /// Amplitudes of the last forward pass.
    pub fn state(&self) -> &[f64] {
        &self.psi
    }

    fn prepare(&mut self, spec: &CircuitSpec, theta: &[f64]) {
        if self.psi.len() != 1 << spec.n_qubits() {
            *self = Workspace::new(spec.n_qubits());
        }
        self.psi.fill(0.0);
        self.psi[0] = 1.0;
        spec.evolve(theta, &mut self.psi);
    }

    pub fn energy(&mut self, spec: &CircuitSpec, model: &IsingModel, theta: &[f64]) -> Result<f64> {
        check_model(spec, model)?;
        spec.check_params(theta)?;
        self.prepare(spec, theta);
        Ok(model.energy_of(&self.psi))
    }

    /// Energy and full gradient by reverse-mode sweep. After the call,
    /// [`state`](Self::state) still holds ψ(θ).
    pub fn energy_and_gradient(
        &mut self,
        spec: &CircuitSpec,
        model: &IsingModel,
        theta: &[f64],
        grad: &mut [f64],
    ) -> Result<f64> {
        check_model(spec, model)?;
        spec.check_params(theta)?;
        if grad.len() != theta.len() {
            return Err(Error::Length { expected: theta.len(), actual: grad.len() });
        }
        self.prepare(spec, theta);
        model.apply_unchecked(&self.psi, &mut self.lam);
        let energy = crate::state::dot(&self.psi, &self.lam);

        let n = spec.n_qubits();
        // walk backwards, un-applying each gate on a copy of ψ
        let mut psi = self.psi.clone();
        let lam = &mut self.lam;
        for (l, layer) in spec.layers().iter().enumerate().rev() {
            layer.cz.apply(&mut psi);
            layer.cz.apply(lam);
            for q in (0..n).rev() {
                let a = l * n + q;
                grad[a] = 2.0 * generator_overlap(lam, &psi, q);
                let (s, c) = theta[a].sin_cos();
                rotate(&mut psi, q, c, -s);
                rotate(lam, q, c, -s);
            }
        }
        Ok(energy)
    }
}

pub fn energy(spec: &CircuitSpec, model: &IsingModel, theta: &[f64]) -> Result<f64> {
    Workspace::new(spec.n_qubits()).energy(spec, model, theta)
}

/// Gradient by the two-point shift rule; 2nL energy evaluations.
pub fn grad_shift(spec: &CircuitSpec, model: &IsingModel, theta: &[f64]) -> Result<Vec<f64>> {
    check_model(spec, model)?;
    spec.check_params(theta)?;
    (0..theta.len())
        .into_par_iter()
        .map_init(
            || (theta.to_vec(), Workspace::new(spec.n_qubits())),
            |(t, ws), a| shift_derivative(spec, model, t, ws, a),
        )
        .collect()
}

fn shift_derivative(
    spec: &CircuitSpec,
    model: &IsingModel,
    t: &mut [f64],
    ws: &mut Workspace,
    a: usize,
) -> Result<f64> {
    let base = t[a];
    t[a] = base + FRAC_PI_4;
    let plus = ws.energy(spec, model, t)?;
    t[a] = base - FRAC_PI_4;
    let minus = ws.energy(spec, model, t)?;
    t[a] = base;
    Ok(plus - minus)
}

/// Gradient by reverse-mode sweep; O(L) state-vector passes.
pub fn grad_adjoint(spec: &CircuitSpec, model: &IsingModel, theta: &[f64]) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; theta.len()];
    Workspace::new(spec.n_qubits()).energy_and_gradient(spec, model, theta, &mut grad)?;
    Ok(grad)
}

fn check_hessian_size(n_params: usize) -> Result<()> {
    if n_params > MAX_HESSIAN_PARAMS {
        return Err(Error::arg(format!("Hessian of {n_params} parameters exceeds the limit of {MAX_HESSIAN_PARAMS}")));
    }
    Ok(())
}

/// Hessian from energy evaluations only: four shifted energies per
/// off-diagonal entry, three per diagonal entry.
pub fn hessian_shift(spec: &CircuitSpec, model: &IsingModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_model(spec, model)?;
    spec.check_params(theta)?;
    let np = theta.len();
    check_hessian_size(np)?;
    let pairs: Vec<(usize, usize)> = (0..np).flat_map(|a| (a..np).map(move |b| (a, b))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map_init(
            || (theta.to_vec(), Workspace::new(spec.n_qubits())),
            |(t, ws), &(a, b)| -> Result<f64> {
                if a == b {
                    let base = t[a];
                    let centre = ws.energy(spec, model, t)?;
                    t[a] = base + FRAC_PI_2;
                    let plus = ws.energy(spec, model, t)?;
                    t[a] = base - FRAC_PI_2;
                    let minus = ws.energy(spec, model, t)?;
                    t[a] = base;
                    Ok(plus - 2.0 * centre + minus)
                } else {
                    let (ta, tb) = (t[a], t[b]);
                    let mut corner = |sa: f64, sb: f64| -> Result<f64> {
                        t[a] = ta + sa * FRAC_PI_4;
                        t[b] = tb + sb * FRAC_PI_4;
                        ws.energy(spec, model, t)
                    };
                    let v = corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?;
                    t[a] = ta;
                    t[b] = tb;
                    Ok(v)
                }
            },
        )
        .collect::<Result<_>>()?;
    let mut h = DMatrix::zeros(np, np);
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        h[(a, b)] = v;
        h[(b, a)] = v;
    }
    Ok(h)
}

/// Hessian as shift differences of adjoint gradients: column a is
/// `∇𝓛(θ + π/4 e_a) - ∇𝓛(θ - π/4 e_a)`. 2nL gradient sweeps, then
/// symmetrized as (H + Hᵀ)/2, which is exact up to rounding.
pub fn hessian_adjoint(spec: &CircuitSpec, model: &IsingModel, theta: &[f64]) -> Result<DMatrix<f64>> {
    check_model(spec, model)?;
    spec.check_params(theta)?;
    let np = theta.len();
    check_hessian_size(np)?;
    let columns: Vec<Vec<f64>> = (0..np)
        .into_par_iter()
        .map_init(
            || (theta.to_vec(), Workspace::new(spec.n_qubits()), vec![0.0; np], vec![0.0; np]),
            |(t, ws, gp, gm), a| -> Result<Vec<f64>> {
                let base = t[a];
                t[a] = base + FRAC_PI_4;
                ws.energy_and_gradient(spec, model, t, gp)?;
                t[a] = base - FRAC_PI_4;
                ws.energy_and_gradient(spec, model, t, gm)?;
                t[a] = base;
                Ok(gp.iter().zip(gm.iter()).map(|(p, m)| p - m).collect())
            },
        )
        .collect::<Result<_>>()?;
    let mut h = DMatrix::zeros(np, np);
    for a in 0..np {
        for b in a..np {
            let v = 0.5 * (columns[a][b] + columns[b][a]);
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    Ok(h)
}

/// Σ_c T_abc d_c, the derivative of the Hessian along `direction`, by
/// nesting the shift rule once more on top of [`hessian_shift`].
pub fn hessian_directional_derivative(
    spec: &CircuitSpec,
    model: &IsingModel,
    theta: &[f64],
    direction: &[f64],
) -> Result<DMatrix<f64>> {
    if direction.len() != theta.len() {
        return Err(Error::Length { expected: theta.len(), actual: direction.len() });
    }
    let np = theta.len();
    let mut out = DMatrix::zeros(np, np);
    let mut t = theta.to_vec();
    for c in 0..np {
        if direction[c] == 0.0 {
            continue;
        }
        t[c] = theta[c] + FRAC_PI_4;
        let plus = hessian_shift(spec, model, &t)?;
        t[c] = theta[c] - FRAC_PI_4;
        let minus = hessian_shift(spec, model, &t)?;
        t[c] = theta[c];
        out += (plus - minus) * direction[c];
    }
    Ok(out)
}

/// Central finite differences of the energy. Reference only.
pub fn finite_difference_gradient(
    spec: &CircuitSpec,
    model: &IsingModel,
    theta: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let mut ws = Workspace::new(spec.n_qubits());
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|a| {
            t[a] = theta[a] + step;
            let plus = ws.energy(spec, model, &t)?;
            t[a] = theta[a] - step;
            let minus = ws.energy(spec, model, &t)?;
            t[a] = theta[a];
            Ok((plus - minus) / (2.0 * step))
        })
        .collect()
}

/// Central finite-difference Hessian of the energy. Reference only.
pub fn finite_difference_hessian(
    spec: &CircuitSpec,
    model: &IsingModel,
    theta: &[f64],
    step: f64,
) -> Result<DMatrix<f64>> {
    let np = theta.len();
    let mut ws = Workspace::new(spec.n_qubits());
    let mut t = theta.to_vec();
    let centre = ws.energy(spec, model, theta)?;
    let mut h = DMatrix::zeros(np, np);
    for a in 0..np {
        t[a] = theta[a] + step;
        let plus = ws.energy(spec, model, &t)?;
        t[a] = theta[a] - step;
        let minus = ws.energy(spec, model, &t)?;
        t[a] = theta[a];
        h[(a, a)] = (plus - 2.0 * centre + minus) / (step * step);
        for b in a + 1..np {
            let mut corner = |sa: f64, sb: f64| {
                t[a] = theta[a] + sa * step;
                t[b] = theta[b] + sb * step;
                ws.energy(spec, model, &t)
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)? + corner(-1.0, -1.0)?)
                / (4.0 * step * step);
            t[a] = theta[a];
            t[b] = theta[b];
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    Ok(h)
}
