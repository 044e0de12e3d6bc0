use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layer::{accumulate, objective, Activation, Gradients, LayerParams, LossKind};
use crate::error::{Error, Result};

/// Per-sample stochastic gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub init_scale: f64,
    pub activation: Activation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            weight_decay: 1e-4,
            epochs: 50,
            seed: 0,
            loss: LossKind::Square,
            init_scale: 0.05,
            activation: Activation::Sigmoid,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".into()));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidConfig("weight_decay must be >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig("init_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// A trained layer and its objective after each epoch; entry 0 is the
/// objective at initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedLayer {
    pub params: LayerParams,
    pub loss_history: Vec<f64>,
}

pub fn train_layer(data: &[Vec<f64>], feature_dim: usize, cfg: &TrainConfig) -> Result<TrainedLayer> {
    train_layer_at(data, feature_dim, cfg, 0)
}

/// Layer `index` draws from its own ChaCha stream so stacked layers are
/// seeded independently from one `seed`.
pub(crate) fn train_layer_at(
    data: &[Vec<f64>],
    feature_dim: usize,
    cfg: &TrainConfig,
    index: usize,
) -> Result<TrainedLayer> {
    cfg.validate()?;
    if feature_dim == 0 {
        return Err(Error::InvalidConfig("feature dimension must be >= 1".into()));
    }
    let input_dim = match data.first() {
        Some(s) if !s.is_empty() => s.len(),
        _ => return Err(Error::InvalidInput("no training vectors".into())),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);

    let mut layer = LayerParams::zeros(input_dim, feature_dim, cfg.activation);
    let s = cfg.init_scale;
    for w in layer
        .weights
        .iter_mut()
        .chain(&mut layer.encoder_bias)
        .chain(&mut layer.decoder_bias)
    {
        *w = rng.random_range(-s..s);
    }

    let diverged = |epoch: usize, reason: String| Error::TrainingDiverged {
        layer: index,
        epoch,
        reason,
    };

    let initial = objective(&layer, data, cfg.loss, cfg.weight_decay)?;
    if !initial.is_finite() {
        return Err(diverged(0, format!("initial objective {initial}")));
    }
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    history.push(initial);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = Gradients {
        weights: vec![0.0; layer.weights.len()],
        encoder_bias: vec![0.0; feature_dim],
        decoder_bias: vec![0.0; input_dim],
    };
    let alpha = cfg.learning_rate;
    let decay = 2.0 * cfg.weight_decay;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            grad.weights.fill(0.0);
            grad.encoder_bias.fill(0.0);
            grad.decoder_bias.fill(0.0);
            accumulate(&layer, &data[i], cfg.loss, &mut grad);
            for (w, g) in layer.weights.iter_mut().zip(&grad.weights) {
                *w -= alpha * (g + decay * *w);
            }
            for (b, g) in layer.encoder_bias.iter_mut().zip(&grad.encoder_bias) {
                *b -= alpha * g;
            }
            for (b, g) in layer.decoder_bias.iter_mut().zip(&grad.decoder_bias) {
                *b -= alpha * g;
            }
        }
        let j = objective(&layer, data, cfg.loss, cfg.weight_decay)?;
        if !j.is_finite() || !layer.is_finite() {
            return Err(diverged(epoch, format!("objective became {j}")));
        }
        history.push(j);
    }

    let last = *history.last().expect("non-empty history");
    if last > initial {
        return Err(diverged(
            cfg.epochs,
            format!("final objective {last} exceeds initial {initial}"),
        ));
    }
    Ok(TrainedLayer {
        params: layer,
        loss_history: history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub layer_feature_dims: Vec<usize>,
    pub train: TrainConfig,
}

impl StackConfig {
    pub fn new(layer_feature_dims: Vec<usize>, train: TrainConfig) -> Result<Self> {
        let cfg = Self {
            layer_feature_dims,
            train,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Each layer keeps `max(1, round(ratio * d_in))` features of its input.
    pub fn from_ratio(input_dim: usize, depth: usize, ratio: f64, train: TrainConfig) -> Result<Self> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(Error::InvalidConfig("codebook ratio must be > 0".into()));
        }
        let mut dims = Vec::with_capacity(depth);
        let mut d = input_dim;
        for _ in 0..depth {
            d = ((ratio * d as f64).round() as usize).max(1);
            dims.push(d);
        }
        Self::new(dims, train)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_feature_dims.is_empty() {
            return Err(Error::InvalidConfig("stack depth must be >= 1".into()));
        }
        if self.layer_feature_dims.contains(&0) {
            return Err(Error::InvalidConfig("layer dimensions must be >= 1".into()));
        }
        self.train.validate()
    }

    pub fn depth(&self) -> usize {
        self.layer_feature_dims.len()
    }
}

/// Greedily trained stack of tied-weight layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderStack {
    pub layers: Vec<LayerParams>,
    pub loss_history: Vec<Vec<f64>>,
    pub config: StackConfig,
}

impl AutoencoderStack {
    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.feature_dim)
    }

    /// Top-layer features of `s`.
    pub fn encode(&self, s: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.layers[0].encode(s)?;
        for layer in &self.layers[1..] {
            x = layer.encode(&x)?;
        }
        Ok(x)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidInput("stack has no layers".into()));
        }
        for (k, l) in self.layers.iter().enumerate() {
            l.check_shape()?;
            if !l.is_finite() {
                return Err(Error::InvalidInput(format!("layer {k} has non-finite parameters")));
            }
            if k > 0 && self.layers[k - 1].feature_dim != l.input_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.layers[k - 1].feature_dim,
                    actual: l.input_dim,
                });
            }
        }
        Ok(())
    }
}

pub fn encode_stack(stack: &AutoencoderStack, s: &[f64]) -> Result<Vec<f64>> {
    stack.encode(s)
}

/// Layer `k` trains on the codes produced by layers `0..k`.
pub fn train_stack(data: &[Vec<f64>], cfg: &StackConfig) -> Result<AutoencoderStack> {
    cfg.validate()?;
    let mut layers = Vec::with_capacity(cfg.depth());
    let mut history = Vec::with_capacity(cfg.depth());
    let mut input: Vec<Vec<f64>> = data.to_vec();
    for (k, &d_f) in cfg.layer_feature_dims.iter().enumerate() {
        let trained = train_layer_at(&input, d_f, &cfg.train, k)?;
        if k + 1 < cfg.depth() {
            input = input
                .iter()
                .map(|s| trained.params.encode_unchecked(s))
                .collect();
        }
        layers.push(trained.params);
        history.push(trained.loss_history);
    }
    Ok(AutoencoderStack {
        layers,
        loss_history: history,
        config: cfg.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_data(seed: u64, n: usize, dim: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..dim).map(|_| rng.random()).collect()).collect()
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let data = random_data(1, 12, 6);
        let cfg = TrainConfig {
            seed: 42,
            epochs: 10,
            ..Default::default()
        };
        let a = train_layer(&data, 3, &cfg).unwrap();
        let b = train_layer(&data, 3, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train_layer(&data, 3, &TrainConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn objective_decreases() {
        let data = random_data(2, 20, 8);
        let cfg = TrainConfig {
            seed: 9,
            ..Default::default()
        };
        let t = train_layer(&data, 4, &cfg).unwrap();
        assert_eq!(t.loss_history.len(), cfg.epochs + 1);
        assert!(t.loss_history.last().unwrap() < &t.loss_history[0]);
    }

    #[test]
    fn full_width_layer_reconstructs() {
        let data = random_data(3, 5, 6);
        let cfg = TrainConfig {
            seed: 5,
            epochs: 2000,
            learning_rate: 0.5,
            weight_decay: 0.0,
            ..Default::default()
        };
        let t = train_layer(&data, 6, &cfg).unwrap();
        let first = t.loss_history[0];
        let last = *t.loss_history.last().unwrap();
        assert!(last < 0.1 * first, "{last} vs {first}");
    }

    #[test]
    fn divergence_is_reported() {
        let data = random_data(4, 10, 4);
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 3,
            ..Default::default()
        };
        match train_layer(&data, 2, &cfg) {
            Err(Error::TrainingDiverged { layer: 0, epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let data = random_data(4, 3, 4);
        assert!(train_layer(&data, 0, &TrainConfig::default()).is_err());
        let bad = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train_layer(&data, 2, &bad).is_err());
        assert!(train_layer(&[], 2, &TrainConfig::default()).is_err());
        assert!(StackConfig::new(vec![], TrainConfig::default()).is_err());
        assert!(StackConfig::new(vec![3, 0], TrainConfig::default()).is_err());
    }

    #[test]
    fn stack_chaining() {
        let data = random_data(5, 16, 8);
        let train = TrainConfig {
            epochs: 5,
            ..Default::default()
        };
        let cfg = StackConfig::new(vec![4, 2], train).unwrap();
        let stack = train_stack(&data, &cfg).unwrap();
        assert_eq!(stack.layers[0].weights.len(), 4 * 8);
        assert_eq!((stack.layers[1].feature_dim, stack.layers[1].input_dim), (2, 4));
        assert_eq!(stack.loss_history.len(), 2);

        let by_hand = stack.layers[1]
            .encode(&stack.layers[0].encode(&data[0]).unwrap())
            .unwrap();
        assert_eq!(encode_stack(&stack, &data[0]).unwrap(), by_hand);
    }

    #[test]
    fn depth_one_matches_single_layer() {
        let data = random_data(6, 10, 5);
        let train = TrainConfig {
            epochs: 7,
            seed: 3,
            ..Default::default()
        };
        let stack = train_stack(&data, &StackConfig::new(vec![2], train).unwrap()).unwrap();
        let single = train_layer(&data, 2, &train).unwrap();
        assert_eq!(stack.layers[0], single.params);
        assert_eq!(
            encode_stack(&stack, &data[1]).unwrap(),
            single.params.encode(&data[1]).unwrap()
        );
    }

    #[test]
    fn zero_stack_outputs_half() {
        let cfg = StackConfig::new(vec![3, 2], TrainConfig::default()).unwrap();
        let stack = AutoencoderStack {
            layers: vec![
                LayerParams::zeros(6, 3, Activation::Sigmoid),
                LayerParams::zeros(3, 2, Activation::Sigmoid),
            ],
            loss_history: vec![vec![], vec![]],
            config: cfg,
        };
        assert_eq!(stack.encode(&[1.0; 6]).unwrap(), vec![0.5, 0.5]);
        assert!(stack.encode(&[1.0; 5]).is_err());
    }

    #[test]
    fn ratio_dims() {
        let cfg = StackConfig::from_ratio(50, 2, 0.1, TrainConfig::default()).unwrap();
        assert_eq!(cfg.layer_feature_dims, vec![5, 1]);
        let cfg = StackConfig::from_ratio(200, 2, 0.1, TrainConfig::default()).unwrap();
        assert_eq!(cfg.layer_feature_dims, vec![20, 2]);
    }
}
