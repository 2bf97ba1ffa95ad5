use serde::{Deserialize, Serialize};

use super::{Gradients, Network};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Adam moments for one network, stored flat in [`Network::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub(crate) config: AdamConfig,
    pub(crate) step: u64,
    pub(crate) first: Vec<f64>,
    pub(crate) second: Vec<f64>,
}

impl Adam {
    pub fn new(net: &Network, config: AdamConfig) -> Self {
        let n = net.param_count();
        Self {
            config,
            step: 0,
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Descends along `grads` (gradient of a loss to minimize). Nothing is
    /// mutated when a gradient entry is not finite.
    pub fn apply(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        check_len("optimizer state", self.first.len(), net.param_count())?;
        check_len("gradient buffer", self.first.len(), grads.len())?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradient entry in optimizer step".into()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        let mut i = 0;
        for (layer, lg) in net.layers.iter_mut().zip(&grads.layers) {
            for (p, &g) in layer
                .weights
                .iter_mut()
                .chain(layer.bias.iter_mut())
                .zip(lg.weights.iter().chain(&lg.bias))
            {
                let m = &mut self.first[i];
                let v = &mut self.second[i];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                i += 1;
            }
        }
        if !net.is_finite() {
            return Err(Error::NonFinite("parameter after optimizer step".into()));
        }
        Ok(())
    }
}

/// `target <- tau * online + (1 - tau) * target`, parameter by parameter.
pub fn polyak_update(target: &mut Network, online: &Network, tau: f64) -> Result<()> {
    if !target.same_architecture(online) {
        return Err(Error::Usage(
            "polyak update between different architectures".into(),
        ));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Usage(format!("polyak rate {tau} outside [0, 1]")));
    }
    for (t, o) in target.layers.iter_mut().zip(&online.layers) {
        for (tp, &op) in t
            .weights
            .iter_mut()
            .chain(t.bias.iter_mut())
            .zip(o.weights.iter().chain(&o.bias))
        {
            *tp = tau * op + (1.0 - tau) * *tp;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::nn::{Activation, Layer};

    fn scalar(w: f64) -> Network {
        Network::from_layers(vec![Layer::new(
            1,
            1,
            vec![w],
            vec![0.0],
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Network::mlp(3, &[5], 2, Activation::Tanh, &mut rng);
        let before = net.clone();
        let mut adam = Adam::new(&net, AdamConfig::default());
        adam.apply(&mut net, &Gradients::zeros_like(&before))
            .unwrap();
        assert_eq!(net, before);
        assert_eq!(adam.step(), 1);
    }

    #[test]
    fn descends_on_square() {
        let mut net = scalar(1.0);
        let mut adam = Adam::new(&net, AdamConfig::with_learning_rate(0.1));
        for _ in 0..5 {
            let w = net.layers()[0].weights()[0];
            let mut g = Gradients::zeros_like(&net);
            g.layers[0].weights[0] = 2.0 * w;
            let prev = w;
            adam.apply(&mut net, &g).unwrap();
            assert!(net.layers()[0].weights()[0] < prev);
        }
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // m_hat = g, v_hat = g^2, so |step| = lr * |g| / (|g| + eps).
        for g0 in [1e-3, 0.5, -7.0, 250.0] {
            let mut net = scalar(0.0);
            let mut adam = Adam::new(&net, AdamConfig::with_learning_rate(0.01));
            let mut g = Gradients::zeros_like(&net);
            g.layers[0].weights[0] = g0;
            adam.apply(&mut net, &g).unwrap();
            let moved = net.layers()[0].weights()[0].abs();
            let expected = 0.01 * g0.abs() / (g0.abs() + 1e-8);
            assert!((moved - expected).abs() < 1e-15, "{g0}: {moved}");
            assert!((moved - 0.01).abs() < 1e-7);
        }
    }

    #[test]
    fn non_finite_gradient_rejected_without_mutation() {
        let mut net = scalar(1.0);
        let before = net.clone();
        let mut adam = Adam::new(&net, AdamConfig::default());
        let mut g = Gradients::zeros_like(&net);
        g.layers[0].bias[0] = f64::NAN;
        assert!(matches!(adam.apply(&mut net, &g), Err(Error::NonFinite(_))));
        assert_eq!(net, before);
        assert_eq!(adam.step(), 0);
    }

    #[test]
    fn polyak_extremes_and_midpoint() {
        let online = scalar(2.0);
        let mut t = scalar(0.0);
        polyak_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, scalar(0.0));
        polyak_update(&mut t, &online, 0.5).unwrap();
        assert_eq!(t.layers()[0].weights()[0], 1.0);
        polyak_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);
    }

    #[test]
    fn polyak_rejects_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Network::mlp(2, &[3], 1, Activation::Tanh, &mut rng);
        let mut b = Network::mlp(2, &[4], 1, Activation::Tanh, &mut rng);
        assert!(polyak_update(&mut b, &a, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn polyak_is_convex_combination(seed in 0u64..1000, tau in 0.0f64..=1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let online = Network::mlp(3, &[6], 2, Activation::Tanh, &mut rng);
            let target0 = Network::mlp(3, &[6], 2, Activation::Tanh, &mut rng);
            let mut target = target0.clone();
            polyak_update(&mut target, &online, tau).unwrap();
            for ((n, o), t) in target.params().iter().zip(online.params()).zip(target0.params()) {
                let (lo, hi) = if o < t { (o, t) } else { (t, o) };
                prop_assert!(*n >= lo - 1e-15 && *n <= hi + 1e-15);
            }
        }
    }
}
