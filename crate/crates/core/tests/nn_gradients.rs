use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rulebound::nn::{Activation, Gradients, Layer, Matrix, Network};

// Central differences written against the public parameter interface only.
fn numeric_param_grad(net: &Network, x: &Matrix, cot: &[f64], h: f64) -> Vec<f64> {
    let base = net.params();
    let mut probe = net.clone();
    let eval = |n: &Network| -> f64 {
        let y = n.forward_batch(x).unwrap();
        y.data().iter().zip(cot).map(|(a, b)| a * b).sum()
    };
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] += h;
            probe.set_params(&p).unwrap();
            let up = eval(&probe);
            p[i] = base[i] - h;
            probe.set_params(&p).unwrap();
            let down = eval(&probe);
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Distance of the closest rectifier pre-activation from its kink, where
/// central differences stop being meaningful.
fn kink_distance(net: &Network, x: &[f64]) -> f64 {
    let mut d = f64::INFINITY;
    let mut a = x.to_vec();
    for l in net.layers() {
        let outs = l.outputs();
        let z: Vec<f64> = (0..outs)
            .map(|o| l.bias()[o] + a.iter().enumerate().map(|(j, v)| v * l.weights()[j * outs + o]).sum::<f64>())
            .collect();
        a = match l.activation() {
            Activation::Relu => {
                d = z.iter().fold(d, |m, v| m.min(v.abs()));
                z.iter().map(|v| v.max(0.0)).collect()
            }
            Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
            Activation::Identity => z,
        };
    }
    d
}

fn smooth_near(net: &Network, x: &Matrix) -> bool {
    (0..x.rows()).all(|r| kink_distance(net, x.row(r)) > 1e-3)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn act(tag: u8) -> Activation {
    match tag % 3 {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        _ => Activation::Identity,
    }
}

prop_compose! {
    fn net_and_batch()(
        widths in prop::collection::vec(1usize..=16, 2..=4),
        acts in prop::collection::vec(any::<u8>(), 3),
        seed in any::<u64>(),
        rows in 1usize..=4,
    ) -> (Network, Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Layer::init(w[0], w[1], act(acts[i]), &mut rng))
            .collect();
        let net = Network::from_layers(layers).unwrap();
        let input = widths[0];
        let output = *widths.last().unwrap();
        let mut vals = |n: usize| -> Vec<f64> {
            use rand::Rng;
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let x = Matrix::from_vec(rows, input, vals(rows * input)).unwrap();
        let cot = vals(rows * output);
        (net, x, cot)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn backward_matches_central_differences((net, x, cot) in net_and_batch()) {
        prop_assume!(smooth_near(&net, &x));
        let pass = net.forward_pass(&x).unwrap();
        let cm = Matrix::from_vec(x.rows(), net.output_width(), cot.clone()).unwrap();
        let mut g = Gradients::zeros_like(&net);
        net.backward_pass(&pass, &cm, Some(&mut g), false).unwrap();
        let numeric = numeric_param_grad(&net, &x, &cot, 1e-5);
        for (i, (a, b)) in g.flatten().iter().zip(&numeric).enumerate() {
            prop_assert!(rel(*a, *b) < 1e-4, "param {i}: analytic {a} numeric {b}");
        }
    }

    #[test]
    fn input_gradient_matches_central_differences((net, x, cot) in net_and_batch()) {
        prop_assume!(smooth_near(&net, &x));
        let row = x.row(0).to_vec();
        let c = &cot[..net.output_width()];
        let (_, dx) = net.backward(&row, c).unwrap();
        let f = |v: &[f64]| -> f64 { net.forward(v).unwrap().iter().zip(c).map(|(a, b)| a * b).sum() };
        for k in 0..row.len() {
            let mut up = row.clone();
            let mut down = row.clone();
            up[k] += 1e-5;
            down[k] -= 1e-5;
            let numeric = (f(&up) - f(&down)) / 2e-5;
            prop_assert!(rel(dx[k], numeric) < 1e-4, "input {k}: {} vs {numeric}", dx[k]);
        }
    }

    #[test]
    fn batched_forward_is_rowwise_forward((net, x, _cot) in net_and_batch()) {
        let y = net.forward_batch(&x).unwrap();
        for r in 0..x.rows() {
            prop_assert_eq!(net.forward(x.row(r)).unwrap(), y.row(r).to_vec());
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact((net, _x, _cot) in net_and_batch()) {
        let back = Network::from_bytes(&net.to_bytes()).unwrap();
        prop_assert_eq!(back, net);
    }
}
