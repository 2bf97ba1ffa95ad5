use super::{Gradients, Network};

/// Central-difference estimate of `d loss / d theta` for every parameter of
/// `net`. Used as an independent check on [`Network::backward_pass`].
pub fn finite_difference_gradient<F>(net: &Network, loss: F, perturbation: f64) -> Gradients
where
    F: Fn(&Network) -> f64,
{
    let base = net.params();
    let mut probe = net.clone();
    let mut flat = vec![0.0; base.len()];
    let mut params = base.clone();
    for i in 0..base.len() {
        params[i] = base[i] + perturbation;
        probe.set_params(&params).expect("same shape");
        let plus = loss(&probe);
        params[i] = base[i] - perturbation;
        probe.set_params(&params).expect("same shape");
        let minus = loss(&probe);
        params[i] = base[i];
        flat[i] = (plus - minus) / (2.0 * perturbation);
    }
    Gradients::from_flat(net, &flat).expect("same shape")
}

/// Symmetric relative error with an absolute floor so that pairs of tiny
/// values compare as equal.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
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
    fn quadratic_loss() {
        let net = scalar(3.0);
        let g =
            finite_difference_gradient(&net, |n| 0.5 * n.layers()[0].weights()[0].powi(2), 1e-6);
        assert!((g.layers()[0].weights[0] - 3.0).abs() < 1e-6);
        assert!(g.layers()[0].bias[0].abs() < 1e-12);
    }

    #[test]
    fn constant_loss() {
        let net = scalar(-1.5);
        let g = finite_difference_gradient(&net, |_| 4.2, 1e-6);
        assert!(g.values().all(|v| v == 0.0));
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1e-12, 0.0, 1e-6), 1e-6);
        assert!((relative_error(2.0, 1.0, 1e-6) - 0.5).abs() < 1e-15);
    }
}
