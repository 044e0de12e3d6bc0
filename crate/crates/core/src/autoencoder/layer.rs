use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower/upper clamp applied to decoder outputs inside the cross-entropy.
pub const CROSS_ENTROPY_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation's own output `y`.
    #[inline]
    fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

pub fn activate(x: &[f64], kind: Activation) -> Vec<f64> {
    x.iter().map(|&v| kind.apply(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Square,
    CrossEntropy,
}

/// Reconstruction loss of `v` against the target `u`.
///
/// Cross-entropy is `-sum(u ln v + (1 - u) ln(1 - v))` with `v` clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn loss(u: &[f64], v: &[f64], kind: LossKind) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(loss_unchecked(u, v, kind))
}

fn loss_unchecked(u: &[f64], v: &[f64], kind: LossKind) -> f64 {
    match kind {
        LossKind::Square => u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum(),
        LossKind::CrossEntropy => u
            .iter()
            .zip(v)
            .map(|(&a, &b)| {
                let b = b.clamp(CROSS_ENTROPY_EPS, 1.0 - CROSS_ENTROPY_EPS);
                -(a * b.ln() + (1.0 - a) * (1.0 - b).ln())
            })
            .sum(),
    }
}

fn loss_derivative(u: f64, v: f64, kind: LossKind) -> f64 {
    match kind {
        LossKind::Square => 2.0 * (v - u),
        LossKind::CrossEntropy => {
            if !(CROSS_ENTROPY_EPS..=1.0 - CROSS_ENTROPY_EPS).contains(&v) {
                0.0
            } else {
                -u / v + (1.0 - u) / (1.0 - v)
            }
        }
    }
}

/// One tied-weight autoencoder layer.
///
/// Only the encoder matrix `W` (`feature_dim x input_dim`, row-major) is
/// stored; decoding always multiplies by its transpose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub input_dim: usize,
    pub feature_dim: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub encoder_bias: Vec<f64>,
    pub decoder_bias: Vec<f64>,
}

impl LayerParams {
    pub fn zeros(input_dim: usize, feature_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            feature_dim,
            activation,
            weights: vec![0.0; input_dim * feature_dim],
            encoder_bias: vec![0.0; feature_dim],
            decoder_bias: vec![0.0; input_dim],
        }
    }

    #[inline]
    pub fn weight(&self, feature: usize, input: usize) -> f64 {
        self.weights[feature * self.input_dim + input]
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.encoder_bias)
            .chain(&self.decoder_bias)
            .all(|v| v.is_finite())
    }

    pub(crate) fn check_shape(&self) -> Result<()> {
        let ok = self.weights.len() == self.input_dim * self.feature_dim
            && self.encoder_bias.len() == self.feature_dim
            && self.decoder_bias.len() == self.input_dim
            && self.input_dim > 0
            && self.feature_dim > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "layer parameter shapes inconsistent with {}x{}",
                self.feature_dim, self.input_dim
            )))
        }
    }

    /// `g(W s + b_e)`
    pub fn encode(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: s.len(),
            });
        }
        Ok(self.encode_unchecked(s))
    }

    /// `g(W^T f + b_d)`
    pub fn decode(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                actual: f.len(),
            });
        }
        Ok(self.decode_unchecked(f))
    }

    pub fn reconstruct(&self, s: &[f64]) -> Result<Vec<f64>> {
        let f = self.encode(s)?;
        Ok(self.decode_unchecked(&f))
    }

    pub(crate) fn encode_unchecked(&self, s: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.input_dim)
            .zip(&self.encoder_bias)
            .map(|(row, b)| {
                let z: f64 = row.iter().zip(s).map(|(w, x)| w * x).sum::<f64>() + b;
                self.activation.apply(z)
            })
            .collect()
    }

    pub(crate) fn decode_unchecked(&self, f: &[f64]) -> Vec<f64> {
        let mut r = self.decoder_bias.clone();
        for (row, fi) in self.weights.chunks_exact(self.input_dim).zip(f) {
            for (rj, w) in r.iter_mut().zip(row) {
                *rj += w * fi;
            }
        }
        r.into_iter().map(|x| self.activation.apply(x)).collect()
    }

    fn weight_penalty(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }
}

/// Partial derivatives of the objective, shaped like [`LayerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub encoder_bias: Vec<f64>,
    pub decoder_bias: Vec<f64>,
}

impl Gradients {
    fn zeros_like(layer: &LayerParams) -> Self {
        Self {
            weights: vec![0.0; layer.weights.len()],
            encoder_bias: vec![0.0; layer.feature_dim],
            decoder_bias: vec![0.0; layer.input_dim],
        }
    }
}

fn check_batch(layer: &LayerParams, batch: &[Vec<f64>]) -> Result<()> {
    match batch.iter().find(|s| s.len() != layer.input_dim) {
        Some(s) => Err(Error::DimensionMismatch {
            expected: layer.input_dim,
            actual: s.len(),
        }),
        None => Ok(()),
    }
}

/// `sum_t L(s_t, decode(encode(s_t))) + weight_decay * sum W^2`
pub fn objective(
    layer: &LayerParams,
    data: &[Vec<f64>],
    loss_kind: LossKind,
    weight_decay: f64,
) -> Result<f64> {
    check_batch(layer, data)?;
    let data_term: f64 = data
        .iter()
        .map(|s| {
            let f = layer.encode_unchecked(s);
            let y = layer.decode_unchecked(&f);
            loss_unchecked(s, &y, loss_kind)
        })
        .sum();
    Ok(data_term + weight_decay * layer.weight_penalty())
}

/// Exact gradient of [`objective`] over `batch`.
///
/// `W` appears twice, in the encoder and (transposed) in the decoder; the
/// decoder-path gradient is transposed and added into the encoder-path one.
pub fn gradients(
    layer: &LayerParams,
    batch: &[Vec<f64>],
    loss_kind: LossKind,
    weight_decay: f64,
) -> Result<Gradients> {
    check_batch(layer, batch)?;
    let mut g = Gradients::zeros_like(layer);
    for s in batch {
        accumulate(layer, s, loss_kind, &mut g);
    }
    for (gw, w) in g.weights.iter_mut().zip(&layer.weights) {
        *gw += 2.0 * weight_decay * w;
    }
    Ok(g)
}

pub(crate) fn accumulate(layer: &LayerParams, s: &[f64], loss_kind: LossKind, g: &mut Gradients) {
    let act = layer.activation;
    let d_s = layer.input_dim;
    let f = layer.encode_unchecked(s);
    let y = layer.decode_unchecked(&f);

    // Output pre-activation error.
    let delta_out: Vec<f64> = s
        .iter()
        .zip(&y)
        .map(|(&u, &v)| loss_derivative(u, v, loss_kind) * act.derivative_at_output(v))
        .collect();

    for (gb, d) in g.decoder_bias.iter_mut().zip(&delta_out) {
        *gb += d;
    }

    for (i, &f_i) in f.iter().enumerate() {
        let row = &layer.weights[i * d_s..(i + 1) * d_s];
        // Back through the decoder: dL/df_i = sum_j W_ij delta_out_j.
        let back: f64 = row.iter().zip(&delta_out).map(|(w, d)| w * d).sum();
        let delta_hidden = back * act.derivative_at_output(f_i);
        g.encoder_bias[i] += delta_hidden;
        let grow = &mut g.weights[i * d_s..(i + 1) * d_s];
        for ((gw, &d), &s_j) in grow.iter_mut().zip(&delta_out).zip(s) {
            // decoder path (transposed) + encoder path
            *gw += f_i * d + delta_hidden * s_j;
        }
    }
}
