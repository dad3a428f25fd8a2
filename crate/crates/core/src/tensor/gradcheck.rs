//! Central finite-difference gradient checks in double precision.

use super::{Graph, Tensor, Var};
use crate::error::Result;

/// Denominator floor for the relative error.
pub const FD_FLOOR: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub op: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_FLOOR)
}

/// Compares the reverse-mode gradient of the scalar `f(inputs)` against
/// central differences with step [`FD_STEP`], for every element of every input.
pub fn check<F>(op: &str, inputs: &[Tensor<f64>], f: F) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let root = f(&mut g, &vars)?;
    let mut grads = g.backward(root)?;
    let analytic: Vec<Tensor<f64>> = vars
        .iter()
        .map(|&v| grads.take(v).expect("every param leaf has a gradient"))
        .collect();

    let eval = |perturbed: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| g.constant(t.clone())).collect();
        let root = f(&mut g, &vars)?;
        Ok(g.value(root).item())
    };

    let mut worst: f64 = 0.0;
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.numel() {
            let orig = input.data()[j];
            work[i].data_mut()[j] = orig + FD_STEP;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - FD_STEP;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max(relative_error(analytic[i].data()[j], numeric));
        }
    }
    Ok(GradCheckReport {
        op: op.to_string(),
        max_rel_error: worst,
        tolerance: FD_TOLERANCE,
    })
}
