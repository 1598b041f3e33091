//! The quadratic error `E(Θ)` and its analytic gradient.
//!
//! For a sample `(x, y)` with output `ŷ` (after the optional support
//! projection) and reconstruction `x̂` obtained by running `ŷ` back through
//! the transposed layers:
//!
//! ```text
//! E = ||y − ŷ||² + λ ||x − x̂||²
//! ```
//!
//! The supervised term is dropped for unlabeled samples. The gradient flows
//! through both passes, including the tied weights of the reconstruction.

use serde::{Deserialize, Serialize};

use super::pass::{forward_unchecked, reverse_unchecked};
use super::support::support;
use super::{ActivationSpec, NetworkParams, NnError};

/// One training pair. `target` is `None` for unlabeled traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Option<Vec<f64>>,
}

impl Sample {
    pub fn labeled(input: Vec<f64>, target: Vec<f64>) -> Self {
        Sample { input, target: Some(target) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErrorConfig {
    /// Reconstruction coefficients; a single entry broadcasts.
    pub lambda: Vec<f64>,
    /// Base output support size `k`.
    pub support_k: usize,
    pub beta_a: f64,
    pub beta_r: f64,
    pub beta_g: f64,
}

impl Default for ErrorConfig {
    fn default() -> Self {
        ErrorConfig { lambda: vec![0.1], support_k: 2, beta_a: 1.0, beta_r: 1.0, beta_g: 1.0 }
    }
}

impl ErrorConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.lambda.is_empty() || self.lambda.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(NnError::InvalidConfig("lambda must be nonempty and nonnegative".into()));
        }
        if self.support_k == 0 {
            return Err(NnError::NonpositiveK);
        }
        for (name, beta) in [("beta_a", self.beta_a), ("beta_r", self.beta_r), ("beta_g", self.beta_g)] {
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(NnError::InvalidConfig(format!("{name} = {beta} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Effective support `⌈β·k⌉`.
    pub fn scaled_support(&self, beta: f64) -> usize {
        ((beta * self.support_k as f64).ceil() as usize).max(1)
    }

    pub fn objective(&self, beta: f64) -> Objective {
        Objective { lambda: self.lambda.clone(), output_support: Some(self.scaled_support(beta)) }
    }

    /// The deployed model's objective: the final phase's support.
    pub fn global_objective(&self) -> Objective {
        self.objective(self.beta_g)
    }
}

/// What a training step minimizes: `λ` plus the output support size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub lambda: Vec<f64>,
    pub output_support: Option<usize>,
}

impl Objective {
    pub fn unconstrained(lambda: f64) -> Self {
        Objective { lambda: vec![lambda], output_support: None }
    }

    fn lambda_for(&self, j: usize, batch: usize) -> Result<f64, NnError> {
        match self.lambda.len() {
            1 => Ok(self.lambda[0]),
            n if n == batch => Ok(self.lambda[j]),
            n => Err(NnError::DimensionMismatch { expected: batch, got: n, context: "lambda vector" }),
        }
    }
}

fn check_sample(params: &NetworkParams, s: &Sample) -> Result<(), NnError> {
    if s.input.len() != params.input_width() {
        return Err(NnError::DimensionMismatch {
            expected: params.input_width(),
            got: s.input.len(),
            context: "sample input",
        });
    }
    if let Some(i) = s.input.iter().position(|v| !v.is_finite()) {
        return Err(NnError::NonFiniteInput(i));
    }
    if let Some(t) = &s.target {
        if t.len() != params.output_width() {
            return Err(NnError::DimensionMismatch {
                expected: params.output_width(),
                got: t.len(),
                context: "sample target",
            });
        }
    }
    Ok(())
}

/// Output after projection onto the support, plus the retention mask.
fn projected_output(raw: &[f64], k: Option<usize>) -> (Vec<f64>, Vec<bool>) {
    match k {
        Some(k) if k < raw.len() => {
            let mut mask = vec![false; raw.len()];
            for i in support(raw, k).expect("k >= 1 checked by caller") {
                mask[i] = true;
            }
            let out = raw.iter().zip(&mask).map(|(v, m)| if *m { *v } else { 0.0 }).collect();
            (out, mask)
        }
        _ => (raw.to_vec(), vec![true; raw.len()]),
    }
}

fn check_objective(obj: &Objective) -> Result<(), NnError> {
    if obj.output_support == Some(0) {
        return Err(NnError::NonpositiveK);
    }
    Ok(())
}

fn sample_error(params: &NetworkParams, act: ActivationSpec, obj: &Objective, s: &Sample, lambda: f64) -> f64 {
    let trace = forward_unchecked(params, act, &s.input);
    let (y_hat, _) = projected_output(trace.output(), obj.output_support);
    let mut e = 0.0;
    if let Some(y) = &s.target {
        e += y.iter().zip(&y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    if lambda != 0.0 {
        let rev = reverse_unchecked(params, act, &y_hat);
        e += lambda * s.input.iter().zip(&rev.post[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    e
}

/// `E(Θ)` summed over the batch.
pub fn error(params: &NetworkParams, act: ActivationSpec, obj: &Objective, batch: &[Sample]) -> Result<f64, NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    check_objective(obj)?;
    let mut total = 0.0;
    for (j, s) in batch.iter().enumerate() {
        check_sample(params, s)?;
        total += sample_error(params, act, obj, s, obj.lambda_for(j, batch.len())?);
    }
    Ok(total)
}

/// `E(Θ)` divided by the number of samples.
pub fn mean_error(params: &NetworkParams, act: ActivationSpec, obj: &Objective, samples: &[Sample]) -> Result<f64, NnError> {
    Ok(error(params, act, obj, samples)? / samples.len() as f64)
}

/// `∂E/∂θ` for every weight and bias.
pub fn gradient(params: &NetworkParams, act: ActivationSpec, obj: &Objective, batch: &[Sample]) -> Result<NetworkParams, NnError> {
    let mut grad = params.zeros_like();
    let all = vec![true; params.layers.len()];
    accumulate(params, act, obj, batch, &all, &mut grad)?;
    Ok(grad)
}

/// Adds the batch gradient of the layers flagged in `trainable` into
/// `grad` and returns the batch error.
pub(crate) fn accumulate<S: std::borrow::Borrow<Sample>>(
    params: &NetworkParams,
    act: ActivationSpec,
    obj: &Objective,
    batch: &[S],
    trainable: &[bool],
    grad: &mut NetworkParams,
) -> Result<f64, NnError> {
    if batch.is_empty() {
        return Err(NnError::EmptyBatch);
    }
    check_objective(obj)?;
    let mut total = 0.0;
    for (j, s) in batch.iter().enumerate() {
        let s = s.borrow();
        check_sample(params, s)?;
        let lambda = obj.lambda_for(j, batch.len())?;
        total += sample_gradient(params, act, obj.output_support, s, lambda, trainable, grad);
    }
    Ok(total)
}

fn sample_gradient(
    params: &NetworkParams,
    act: ActivationSpec,
    output_support: Option<usize>,
    s: &Sample,
    lambda: f64,
    trainable: &[bool],
    grad: &mut NetworkParams,
) -> f64 {
    let n = params.layers.len();
    let fwd = forward_unchecked(params, act, &s.input);
    let (y_hat, mask) = projected_output(fwd.output(), output_support);

    let mut err = 0.0;
    let mut d_yhat = vec![0.0; y_hat.len()];
    if let Some(y) = &s.target {
        for ((d, p), t) in d_yhat.iter_mut().zip(&y_hat).zip(y) {
            let r = p - t;
            err += r * r;
            *d += 2.0 * r;
        }
    }

    if lambda != 0.0 {
        let rev = reverse_unchecked(params, act, &y_hat);
        // δ at v_0 = x̂
        let mut dv: Vec<f64> = s
            .input
            .iter()
            .zip(&rev.post[0])
            .map(|(x, xh)| {
                let r = xh - x;
                err += lambda * r * r;
                2.0 * lambda * r
            })
            .collect();
        for h in 0..n {
            let layer = &params.layers[h];
            let du: Vec<f64> = dv
                .iter()
                .zip(&rev.pre[h])
                .zip(&rev.post[h])
                .map(|((d, u), v)| d * act.backward_dir.derivative(*u, *v))
                .collect();
            let upper: &[f64] = if h + 1 < n { &rev.post[h + 1] } else { &y_hat };
            let mut next = vec![0.0; layer.units_out];
            let g = &mut grad.layers[h];
            for j in 0..layer.units_out {
                let row = layer.row(j);
                next[j] = row.iter().zip(&du).map(|(w, d)| w * d).sum();
                if trainable[h] {
                    let shifted = upper[j] + layer.biases[j];
                    if shifted != 0.0 {
                        let grow = &mut g.weights[j * layer.units_in..(j + 1) * layer.units_in];
                        for (gw, d) in grow.iter_mut().zip(&du) {
                            *gw += shifted * d;
                        }
                    }
                    g.biases[j] += next[j];
                }
            }
            dv = next;
        }
        for (d, v) in d_yhat.iter_mut().zip(&dv) {
            *d += v;
        }
    }

    let lowest = match trainable.iter().position(|t| *t) {
        Some(l) => l,
        None => return err,
    };
    let mut da: Vec<f64> = d_yhat.iter().zip(&mask).map(|(d, m)| if *m { *d } else { 0.0 }).collect();
    for h in (lowest..n).rev() {
        let layer = &params.layers[h];
        let dz: Vec<f64> = da
            .iter()
            .zip(&fwd.pre[h])
            .zip(&fwd.post[h])
            .map(|((d, z), a)| d * act.forward.derivative(*z, *a))
            .collect();
        let input: &[f64] = if h == 0 { &s.input } else { &fwd.post[h - 1] };
        if trainable[h] {
            let g = &mut grad.layers[h];
            let nonzero: Vec<usize> = (0..input.len()).filter(|&i| input[i] != 0.0).collect();
            for (j, d) in dz.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let grow = &mut g.weights[j * layer.units_in..(j + 1) * layer.units_in];
                for &i in &nonzero {
                    grow[i] += d * input[i];
                }
                g.biases[j] += d;
            }
        }
        if h > lowest {
            let mut below = vec![0.0; layer.units_in];
            for (j, d) in dz.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (b, w) in below.iter_mut().zip(layer.row(j)) {
                    *b += w * d;
                }
            }
            da = below;
        }
    }
    err
}
