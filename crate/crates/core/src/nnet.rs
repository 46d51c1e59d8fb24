//! Minimal deterministic feedforward network with masked-MSE training.
//!
//! Both indicator models are small dense networks; nothing here is tuned for
//! scale. Determinism is the load-bearing property: a fixed seed fixes the
//! initial weights and the per-epoch sample order, so training twice yields
//! bit-identical networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the activation output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// A dense feedforward network. Weight matrix `l` has shape
/// `layer_sizes[l+1] x layer_sizes[l]`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub seed: u64,
}

/// One training sample. The mask flags which target components contribute to
/// the loss, so services without ratings from some indicator block can still
/// train the remaining outputs.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub mask: Vec<bool>,
}

impl TrainSample {
    pub fn new(input: Vec<f64>, target: Vec<f64>, mask: Vec<bool>) -> Self {
        TrainSample { input, target, mask }
    }

    pub fn fully_labeled(input: Vec<f64>, target: Vec<f64>) -> Self {
        let mask = vec![true; target.len()];
        TrainSample { input, target, mask }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "learning_rate {} must be nonnegative",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::ConfigInvalid("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::ConfigInvalid("batch_size must be positive".into()));
        }
        Ok(())
    }
}

impl Network {
    /// Builds a network with seeded uniform weights scaled by layer fan-in.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Network> {
        if layer_sizes.len() < 2 {
            return Err(Error::BadArchitecture(format!(
                "need at least input and output layers, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::BadArchitecture("zero-width layer".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-scale..scale))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Network {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            hidden_activation: Activation::Tanh,
            output_activation: Activation::Sigmoid,
            seed,
        })
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    fn activation_for_layer(&self, layer: usize) -> Activation {
        if layer + 2 == self.layer_sizes.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    /// Forward pass returning every layer's activations (input included).
    fn forward_trace(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        if input.len() != self.input_size() {
            return Err(Error::DimensionMismatch(format!(
                "input length {} does not match input layer {}",
                input.len(),
                self.input_size()
            )));
        }
        let mut activations = vec![input.to_vec()];
        for l in 0..self.weights.len() {
            let (rows, cols) = (self.layer_sizes[l + 1], self.layer_sizes[l]);
            let prev = activations.last().unwrap();
            let act = self.activation_for_layer(l);
            let mut next = Vec::with_capacity(rows);
            for r in 0..rows {
                let row = &self.weights[l][r * cols..(r + 1) * cols];
                let z: f64 = self.biases[l][r]
                    + row.iter().zip(prev.iter()).map(|(w, a)| w * a).sum::<f64>();
                next.push(act.apply(z));
            }
            activations.push(next);
        }
        Ok(activations)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.pop().unwrap())
    }

    /// Masked squared-error loss of one sample.
    fn sample_loss(output: &[f64], target: &[f64], mask: &[bool]) -> f64 {
        output
            .iter()
            .zip(target)
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|((o, t), _)| (o - t) * (o - t))
            .sum()
    }

    /// Accumulates one sample's gradient into `grad_w`/`grad_b`. Returns the
    /// sample loss.
    fn accumulate_gradient(
        &self,
        sample: &TrainSample,
        grad_w: &mut [Vec<f64>],
        grad_b: &mut [Vec<f64>],
    ) -> Result<f64> {
        let activations = self.forward_trace(&sample.input)?;
        let output = activations.last().unwrap();
        if sample.target.len() != output.len() || sample.mask.len() != output.len() {
            return Err(Error::DimensionMismatch(format!(
                "target/mask length {} vs output layer {}",
                sample.target.len(),
                output.len()
            )));
        }
        let loss = Self::sample_loss(output, &sample.target, &sample.mask);

        let last = self.weights.len() - 1;
        let out_act = self.activation_for_layer(last);
        let mut delta: Vec<f64> = output
            .iter()
            .zip(&sample.target)
            .zip(&sample.mask)
            .map(|((o, t), m)| {
                if *m {
                    2.0 * (o - t) * out_act.derivative_from_output(*o)
                } else {
                    0.0
                }
            })
            .collect();

        for l in (0..self.weights.len()).rev() {
            let cols = self.layer_sizes[l];
            let prev = &activations[l];
            for (r, d) in delta.iter().enumerate() {
                grad_b[l][r] += d;
                let row = &mut grad_w[l][r * cols..(r + 1) * cols];
                for (c, g) in row.iter_mut().enumerate() {
                    *g += d * prev[c];
                }
            }
            if l > 0 {
                let act = self.activation_for_layer(l - 1);
                let mut prev_delta = vec![0.0; cols];
                for (r, d) in delta.iter().enumerate() {
                    let row = &self.weights[l][r * cols..(r + 1) * cols];
                    for (c, w) in row.iter().enumerate() {
                        prev_delta[c] += d * w;
                    }
                }
                for (c, pd) in prev_delta.iter_mut().enumerate() {
                    *pd *= act.derivative_from_output(prev[c]);
                }
                delta = prev_delta;
            }
        }
        Ok(loss)
    }

    /// Mini-batch gradient descent on the masked mean squared error.
    /// Returns one mean-loss entry per epoch.
    pub fn train(&mut self, samples: &[TrainSample], config: &TrainConfig) -> Result<Vec<f64>> {
        config.validate()?;
        if samples.is_empty() {
            return Err(Error::NoSamples);
        }
        for s in samples {
            if s.input.len() != self.input_size()
                || s.target.len() != self.output_size()
                || s.mask.len() != self.output_size()
            {
                return Err(Error::DimensionMismatch(
                    "sample dimensions do not match network".into(),
                ));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let mut history = Vec::with_capacity(config.epochs);

        for _ in 0..config.epochs {
            // Fisher-Yates with the epoch-persistent rng: the order sequence
            // is a pure function of the seed.
            for i in (1..order.len()).rev() {
                let j = rng.gen_range(0..=i);
                order.swap(i, j);
            }
            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                for g in grad_w.iter_mut().chain(grad_b.iter_mut()) {
                    g.iter_mut().for_each(|x| *x = 0.0);
                }
                for &i in batch {
                    epoch_loss += self.accumulate_gradient(&samples[i], &mut grad_w, &mut grad_b)?;
                }
                let step = config.learning_rate / batch.len() as f64;
                for l in 0..self.weights.len() {
                    for (w, g) in self.weights[l].iter_mut().zip(&grad_w[l]) {
                        *w -= step * g;
                    }
                    for (b, g) in self.biases[l].iter_mut().zip(&grad_b[l]) {
                        *b -= step * g;
                    }
                }
            }
            history.push(epoch_loss / samples.len() as f64);
        }
        Ok(history)
    }
}

/// Compares the analytic gradient against central finite differences over
/// every weight and bias. Returns the maximum relative error.
pub fn gradient_check(net: &Network, sample: &TrainSample, delta: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(Error::OutOfRange(format!("delta {delta} must be > 0")));
    }
    let mut grad_w: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = net.biases.iter().map(|b| vec![0.0; b.len()]).collect();
    net.accumulate_gradient(sample, &mut grad_w, &mut grad_b)?;

    let loss_at = |net: &Network| -> f64 {
        let out = net.forward(&sample.input).unwrap();
        Network::sample_loss(&out, &sample.target, &sample.mask)
    };

    let mut max_rel = 0.0f64;
    let mut probe = net.clone();
    for l in 0..net.weights.len() {
        for i in 0..net.weights[l].len() {
            let orig = probe.weights[l][i];
            probe.weights[l][i] = orig + delta;
            let plus = loss_at(&probe);
            probe.weights[l][i] = orig - delta;
            let minus = loss_at(&probe);
            probe.weights[l][i] = orig;
            let numeric = (plus - minus) / (2.0 * delta);
            let analytic = grad_w[l][i];
            let rel = (analytic - numeric).abs()
                / analytic.abs().max(numeric.abs()).max(1e-12);
            max_rel = max_rel.max(rel);
        }
        for i in 0..net.biases[l].len() {
            let orig = probe.biases[l][i];
            probe.biases[l][i] = orig + delta;
            let plus = loss_at(&probe);
            probe.biases[l][i] = orig - delta;
            let minus = loss_at(&probe);
            probe.biases[l][i] = orig;
            let numeric = (plus - minus) / (2.0 * delta);
            let analytic = grad_b[l][i];
            let rel = (analytic - numeric).abs()
                / analytic.abs().max(numeric.abs()).max(1e-12);
            max_rel = max_rel.max(rel);
        }
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config(epochs: usize, lr: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            epochs,
            batch_size: 64,
            seed: 7,
        }
    }

    #[test]
    fn construction_is_deterministic_per_seed() {
        let a = Network::new(&[4, 8, 2], 42).unwrap();
        let b = Network::new(&[4, 8, 2], 42).unwrap();
        assert_eq!(a, b);
        let c = Network::new(&[4, 8, 2], 43).unwrap();
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn single_layer_architecture_is_rejected() {
        assert!(matches!(
            Network::new(&[1], 0),
            Err(Error::BadArchitecture(_))
        ));
    }

    #[test]
    fn weight_shapes_follow_layer_sizes() {
        let net = Network::new(&[3, 5, 5, 2], 7).unwrap();
        assert_eq!(net.weights[0].len(), 5 * 3);
        assert_eq!(net.weights[1].len(), 5 * 5);
        assert_eq!(net.weights[2].len(), 2 * 5);
    }

    #[test]
    fn zero_network_outputs_one_half() {
        let mut net = Network::new(&[3, 4, 2], 1).unwrap();
        for w in &mut net.weights {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
        let out = net.forward(&[0.3, -0.2, 0.9]).unwrap();
        assert_eq!(out, vec![0.5, 0.5]);
    }

    #[test]
    fn mismatched_input_is_rejected() {
        let net = Network::new(&[3, 4, 2], 1).unwrap();
        assert!(matches!(
            net.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn forward_output_stays_in_unit_interval() {
        let net = Network::new(&[2, 6, 3], 42).unwrap();
        for input in [[-5.0, 9.0], [0.0, 0.0], [1.0, 0.0], [100.0, -100.0]] {
            for v in net.forward(&input).unwrap() {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn seed42_forward_is_reproducible() {
        let net = Network::new(&[2, 2, 1], 42).unwrap();
        let a = net.forward(&[1.0, 0.0]).unwrap()[0];
        let b = Network::new(&[2, 2, 1], 42)
            .unwrap()
            .forward(&[1.0, 0.0])
            .unwrap()[0];
        assert!(a > 0.0 && a < 1.0);
        assert_eq!(a.to_bits(), b.to_bits());
    }

    fn separable_samples() -> Vec<TrainSample> {
        // Class = whether x0 + x1 > 1.
        let mut samples = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let (x0, x1) = (i as f64 / 10.0, j as f64 / 10.0);
                let y = if x0 + x1 > 1.0 { 1.0 } else { 0.0 };
                samples.push(TrainSample::fully_labeled(vec![x0, x1], vec![y]));
            }
        }
        samples
    }

    #[test]
    fn training_fits_separable_toy_set() {
        let mut net = Network::new(&[2, 8, 1], 3).unwrap();
        let history = net.train(&separable_samples(), &toy_config(500, 2.0)).unwrap();
        assert_eq!(history.len(), 500);
        assert!(
            *history.last().unwrap() < 0.05,
            "final loss {}",
            history.last().unwrap()
        );
    }

    #[test]
    fn zero_epochs_config_is_rejected() {
        let mut net = Network::new(&[2, 2, 1], 3).unwrap();
        let cfg = toy_config(0, 1.0);
        assert!(matches!(
            net.train(&separable_samples(), &cfg),
            Err(Error::ConfigInvalid(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let samples = separable_samples();
        let mut a = Network::new(&[2, 8, 1], 3).unwrap();
        let mut b = Network::new(&[2, 8, 1], 3).unwrap();
        let ha = a.train(&samples, &toy_config(50, 1.0)).unwrap();
        let hb = b.train(&samples, &toy_config(50, 1.0)).unwrap();
        assert_eq!(ha, hb);
        assert_eq!(a, b);
    }

    #[test]
    fn zero_learning_rate_leaves_weights_untouched() {
        let samples = separable_samples();
        let mut net = Network::new(&[2, 8, 1], 3).unwrap();
        let before = net.clone();
        net.train(&samples, &toy_config(5, 0.0)).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn no_samples_is_rejected() {
        let mut net = Network::new(&[2, 2, 1], 3).unwrap();
        assert!(matches!(
            net.train(&[], &toy_config(1, 1.0)),
            Err(Error::NoSamples)
        ));
    }

    #[test]
    fn masked_components_do_not_train() {
        // Output 1 is fully masked out; its weights should barely move from
        // the shared hidden layer only.
        let samples = vec![
            TrainSample::new(vec![0.0], vec![1.0, 0.0], vec![true, false]),
            TrainSample::new(vec![1.0], vec![0.0, 1.0], vec![true, false]),
        ];
        let mut net = Network::new(&[1, 4, 2], 9).unwrap();
        let before = net.clone();
        net.train(&samples, &toy_config(20, 1.0)).unwrap();
        // Output row 1 of the last layer receives zero delta, so its weights
        // and bias are bit-identical.
        let cols = 4;
        assert_eq!(
            net.weights[1][cols..2 * cols],
            before.weights[1][cols..2 * cols]
        );
        assert_eq!(net.biases[1][1], before.biases[1][1]);
        assert_ne!(net.weights[1][..cols], before.weights[1][..cols]);
    }

    #[test]
    fn gradient_check_on_random_small_net() {
        let net = Network::new(&[3, 5, 2], 11).unwrap();
        let sample = TrainSample::fully_labeled(vec![0.2, -0.4, 0.8], vec![0.3, 0.9]);
        let err = gradient_check(&net, &sample, 1e-4).unwrap();
        assert!(err < 1e-4, "max relative error {err}");
    }

    #[test]
    fn gradient_check_handles_zero_weights() {
        let mut net = Network::new(&[2, 3, 1], 0).unwrap();
        for w in &mut net.weights {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
        let sample = TrainSample::fully_labeled(vec![0.5, 0.5], vec![0.5]);
        let err = gradient_check(&net, &sample, 1e-4).unwrap();
        assert!(err.is_finite());
    }

    #[test]
    fn gradient_check_rejects_zero_delta() {
        let net = Network::new(&[2, 3, 1], 0).unwrap();
        let sample = TrainSample::fully_labeled(vec![0.5, 0.5], vec![0.5]);
        assert!(gradient_check(&net, &sample, 0.0).is_err());
    }

    #[test]
    fn loss_non_increasing_on_convex_single_layer_case() {
        // Single linear-ish layer (sigmoid output) on one batch with a small
        // learning rate behaves like convex descent.
        let samples = vec![
            TrainSample::fully_labeled(vec![0.0, 1.0], vec![0.2]),
            TrainSample::fully_labeled(vec![1.0, 0.0], vec![0.8]),
            TrainSample::fully_labeled(vec![1.0, 1.0], vec![0.5]),
        ];
        let mut net = Network::new(&[2, 1], 5).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 3,
            seed: 1,
        };
        let history = net.train(&samples, &cfg).unwrap();
        for pair in history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }
}
