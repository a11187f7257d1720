//! Backend of `vqa-lab verify`: derivative cross-checks and the theorem
//! suites at small sizes.

use serde::Serialize;
use vqa_core::circuit::{CircuitSpec, ParameterVector};
use vqa_core::deriv;
use vqa_core::hamiltonian::IsingModel;
use vqa_core::rng::derive_seed;
use vqa_core::theorems::{
    verify_theorem1, verify_theorem2, verify_theorem3, Claim, ClaimKind, Theorem1Settings, Theorem2Settings,
    Theorem3Settings, TheoremReport,
};

use crate::error::HarnessError;

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub derivatives: Vec<Claim>,
    pub theorems: Vec<TheoremReport>,
    pub pass: bool,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn claim(id: &str, statistic: f64, tolerance: f64, samples: usize) -> Claim {
    Claim {
        id: id.to_string(),
        kind: ClaimKind::Threshold,
        statistic,
        target: 0.0,
        tolerance,
        samples,
        modules: vec!["circuit".into(), "hamiltonian".into(), "deriv".into()],
        pass: statistic < tolerance,
        note: None,
    }
}

/// Adjoint vs shift gradients, shift vs finite-difference gradients and
/// Hessians, on random small circuits.
pub fn derivative_checks(cases: usize, seed: u64) -> Result<Vec<Claim>, HarnessError> {
    let (mut adj, mut fd, mut hfd) = (0.0f64, 0.0f64, 0.0f64);
    let mut hess_cases = 0;
    for k in 0..cases {
        let s = derive_seed(seed, &[k as u64]);
        let n = 2 + (s % 5) as usize;
        let l = 1 + ((s >> 8) % 4) as usize;
        let p = ((s >> 16) % 10) as f64 / 10.0;
        let spec = CircuitSpec::build(n, l, ((s >> 24) % 2) as usize, p, s)?;
        let model = IsingModel::new(n, 1.0, 0.5 + ((s >> 32) % 3) as f64 * 0.5, true)?;
        let theta = ParameterVector::uniform(spec.n_params(), s);
        let gs = deriv::grad_shift(&spec, &model, &theta)?;
        adj = adj.max(max_abs_diff(&gs, &deriv::grad_adjoint(&spec, &model, &theta)?));
        fd = fd.max(max_abs_diff(&gs, &deriv::finite_difference_gradient(&spec, &model, &theta, 1e-5)?));
        if k % 10 == 0 {
            let hs = deriv::hessian_shift(&spec, &model, &theta)?;
            let hf = deriv::finite_difference_hessian(&spec, &model, &theta, 1e-4)?;
            hfd = hfd.max((hs - hf).amax());
            hess_cases += 1;
        }
    }
    Ok(vec![
        claim("grad_adjoint_vs_shift", adj, 1e-10, cases),
        claim("grad_shift_vs_finite_difference", fd, 1e-5, cases),
        claim("hessian_shift_vs_finite_difference", hfd, 1e-4, hess_cases),
    ])
}

/// Settings used by the CLI: every circuit has at most six qubits.
pub fn small_settings() -> (Theorem1Settings, Theorem2Settings, Theorem3Settings) {
    (
        Theorem1Settings::default(),
        Theorem2Settings { n: 6, l_ent: 6, ..Default::default() },
        Theorem3Settings::default(),
    )
}

pub fn verify(theorem: Option<u8>, seed: u64) -> Result<VerifyReport, HarnessError> {
    let (t1, t2, t3) = small_settings();
    let want = |k: u8| theorem.map_or(true, |t| t == k);
    let derivatives = if theorem.is_none() { derivative_checks(100, derive_seed(seed, &[0]))? } else { Vec::new() };
    let mut theorems = Vec::new();
    if want(1) {
        theorems.push(verify_theorem1(&t1, derive_seed(seed, &[1]))?);
    }
    if want(2) {
        theorems.push(verify_theorem2(&t2, derive_seed(seed, &[2]))?);
    }
    if want(3) {
        theorems.push(verify_theorem3(&t3, derive_seed(seed, &[3]))?);
    }
    let pass = derivatives.iter().all(|c| c.pass) && theorems.iter().all(|t| t.pass());
    Ok(VerifyReport { derivatives, theorems, pass })
}
