use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NnError;

/// One affine layer. `weights` is row-major `units_out × units_in`; row `j`
/// is the connection vector `C_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub units_in: usize,
    pub units_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(units_in: usize, units_out: usize) -> Self {
        LayerParams {
            units_in,
            units_out,
            weights: vec![0.0; units_in * units_out],
            biases: vec![0.0; units_out],
        }
    }

    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn random<R: Rng + ?Sized>(units_in: usize, units_out: usize, scale: f64, rng: &mut R) -> Self {
        let weights = (0..units_in * units_out).map(|_| rng.random_range(-scale..=scale)).collect();
        LayerParams { units_in, units_out, weights, biases: vec![0.0; units_out] }
    }

    pub fn from_rows(rows: &[&[f64]], biases: &[f64]) -> Self {
        let units_out = rows.len();
        let units_in = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == units_in), "ragged weight rows");
        assert_eq!(biases.len(), units_out, "bias length");
        LayerParams {
            units_in,
            units_out,
            weights: rows.iter().flat_map(|r| r.iter().copied()).collect(),
            biases: biases.to_vec(),
        }
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.weights[j * self.units_in..(j + 1) * self.units_in]
    }

    #[inline]
    pub fn weight(&self, j: usize, i: usize) -> f64 {
        self.weights[j * self.units_in + i]
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).all(|v| v.is_finite())
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.biases.iter())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }

    pub fn same_shape(&self, other: &LayerParams) -> bool {
        self.units_in == other.units_in && self.units_out == other.units_out
    }
}

/// Distinguishes the broker's congruity net (`Θ_l`) from a client's
/// federated net (`Θ_s`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Congruity,
    Federated,
}

/// Layers `h = 0 ..= H_max + 1`: `h = 0` reads the input, `h = H_max + 1`
/// produces the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub role: Role,
    pub layers: Vec<LayerParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub input_width: usize,
    pub hidden_width: usize,
    pub output_width: usize,
    /// Initial number of hidden layers.
    pub hidden_layers: usize,
    pub scale: f64,
}

impl NetworkParams {
    /// Checks widths chain and all entries are finite.
    pub fn from_layers(role: Role, layers: Vec<LayerParams>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::NoLayers);
        }
        for (h, layer) in layers.iter().enumerate() {
            if layer.weights.len() != layer.units_in * layer.units_out {
                return Err(NnError::DimensionMismatch {
                    expected: layer.units_in * layer.units_out,
                    got: layer.weights.len(),
                    context: "layer weights",
                });
            }
            if layer.biases.len() != layer.units_out {
                return Err(NnError::DimensionMismatch {
                    expected: layer.units_out,
                    got: layer.biases.len(),
                    context: "layer biases",
                });
            }
            if h > 0 && layers[h - 1].units_out != layer.units_in {
                return Err(NnError::DimensionMismatch {
                    expected: layers[h - 1].units_out,
                    got: layer.units_in,
                    context: "adjacent layer widths",
                });
            }
            if !layer.is_finite() {
                return Err(NnError::NonFiniteParams { layer: h });
            }
        }
        Ok(NetworkParams { role, layers })
    }

    /// Seeded initialization: `hidden_layers + 2` layers.
    pub fn init<R: Rng + ?Sized>(role: Role, cfg: &InitConfig, rng: &mut R) -> Self {
        let mut widths = vec![cfg.input_width];
        widths.extend(std::iter::repeat_n(cfg.hidden_width, cfg.hidden_layers + 1));
        widths.push(cfg.output_width);
        let layers = widths
            .windows(2)
            .map(|w| LayerParams::random(w[0], w[1], cfg.scale, rng))
            .collect();
        NetworkParams { role, layers }
    }

    /// `H_max`: the number of hidden layers between the input and output
    /// layers.
    pub fn h_max(&self) -> usize {
        self.layers.len().saturating_sub(2)
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].units_in
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("nonempty").units_out
    }

    /// `[input, widths after each layer...]`.
    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width()).chain(self.layers.iter().map(|l| l.units_out)).collect()
    }

    pub fn same_shape(&self, other: &NetworkParams) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| a.same_shape(b))
    }

    pub fn num_values(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.values())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.values_mut())
    }

    /// A zero-valued structure of the same shape.
    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            role: self.role,
            layers: self.layers.iter().map(|l| LayerParams::zeros(l.units_in, l.units_out)).collect(),
        }
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    /// `θ ← θ − rate · grad` on the layers flagged trainable.
    pub fn descend(&mut self, grad: &NetworkParams, rate: f64, trainable: &[bool]) {
        for ((layer, g), &on) in self.layers.iter_mut().zip(&grad.layers).zip(trainable) {
            if !on {
                continue;
            }
            for (v, d) in layer.values_mut().zip(g.values()) {
                *v -= rate * d;
            }
        }
    }
}

/// Inserts a freshly initialized hidden layer before the output layer.
/// Existing layers keep their values; the output layer is re-initialized
/// only when its input width has to change.
pub fn grow_depth<R: Rng + ?Sized>(
    params: &NetworkParams,
    hidden_width: usize,
    scale: f64,
    rng: &mut R,
) -> NetworkParams {
    let mut layers = params.layers.clone();
    let output = layers.pop().expect("nonempty");
    let prev_width = layers.last().map_or(output.units_in, |l| l.units_out);
    layers.push(LayerParams::random(prev_width, hidden_width, scale, rng));
    if output.units_in == hidden_width {
        layers.push(output);
    } else {
        layers.push(LayerParams::random(hidden_width, output.units_out, scale, rng));
    }
    NetworkParams { role: params.role, layers }
}
