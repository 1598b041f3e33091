use super::support::project_support_in_place;
use super::{ActivationSpec, NetworkParams, NnError};

/// Per-layer pre-activations and outputs of a forward pass. The input itself
/// is not copied.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `z_h = C X + b` for every layer.
    pub pre: Vec<Vec<f64>>,
    /// `f(z_h)` for every layer; the last entry is the network output.
    pub post: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("at least one layer")
    }
}

fn check_input(x: &[f64], width: usize, context: &'static str) -> Result<(), NnError> {
    if x.len() != width {
        return Err(NnError::DimensionMismatch { expected: width, got: x.len(), context });
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(NnError::NonFiniteInput(i));
    }
    Ok(())
}

/// Layer-by-layer `f(C X + b)`. Zero inputs are skipped, which keeps the
/// sparse traffic vectors cheap.
pub fn forward(params: &NetworkParams, act: ActivationSpec, x: &[f64]) -> Result<ForwardTrace, NnError> {
    check_input(x, params.input_width(), "forward input")?;
    Ok(forward_unchecked(params, act, x))
}

pub(crate) fn forward_unchecked(params: &NetworkParams, act: ActivationSpec, x: &[f64]) -> ForwardTrace {
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut post: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    let mut nonzero: Vec<usize> = Vec::new();
    for layer in &params.layers {
        let input: &[f64] = post.last().map_or(x, |v| v.as_slice());
        nonzero.clear();
        nonzero.extend(input.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i));
        let z: Vec<f64> = (0..layer.units_out)
            .map(|j| {
                let row = layer.row(j);
                layer.biases[j] + nonzero.iter().map(|&i| row[i] * input[i]).sum::<f64>()
            })
            .collect();
        let a = z.iter().map(|&v| act.forward.apply(v)).collect();
        pre.push(z);
        post.push(a);
    }
    ForwardTrace { pre, post }
}

/// Network output with the top-`k` support projection applied when a
/// support size is given.
pub fn predict(
    params: &NetworkParams,
    act: ActivationSpec,
    x: &[f64],
    output_support: Option<usize>,
) -> Result<Vec<f64>, NnError> {
    let trace = forward(params, act, x)?;
    let mut y = trace.post.last().cloned().expect("nonempty");
    if let Some(k) = output_support {
        project_support_in_place(&mut y, k)?;
    }
    Ok(y)
}

/// Negative-direction trace: `u_h = C_hᵀ (v_{h+1} + b_h)` and `v_h = g(u_h)`,
/// indexed by layer, with `v_0` the reconstructed input.
#[derive(Debug, Clone)]
pub(crate) struct ReverseTrace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

pub(crate) fn reverse_unchecked(params: &NetworkParams, act: ActivationSpec, y: &[f64]) -> ReverseTrace {
    let n = params.layers.len();
    let mut pre = vec![Vec::new(); n];
    let mut post = vec![Vec::new(); n];
    let mut upper: Vec<f64> = y.to_vec();
    for h in (0..n).rev() {
        let layer = &params.layers[h];
        let shifted: Vec<f64> = upper.iter().zip(&layer.biases).map(|(v, b)| v + b).collect();
        let mut u = vec![0.0; layer.units_in];
        for (j, s) in shifted.iter().enumerate() {
            if *s == 0.0 {
                continue;
            }
            for (ui, w) in u.iter_mut().zip(layer.row(j)) {
                *ui += w * s;
            }
        }
        let v: Vec<f64> = u.iter().map(|&t| act.backward_dir.apply(t)).collect();
        upper = v.clone();
        pre[h] = u;
        post[h] = v;
    }
    ReverseTrace { pre, post }
}

/// Runs the layers in reverse through their transposed connections and `g`,
/// returning a vector of the input width.
pub fn backward_reconstruct(params: &NetworkParams, act: ActivationSpec, y: &[f64]) -> Result<Vec<f64>, NnError> {
    check_input(y, params.output_width(), "reconstruction input")?;
    let mut trace = reverse_unchecked(params, act, y);
    Ok(std::mem::take(&mut trace.post[0]))
}
