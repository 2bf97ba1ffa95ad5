//! Finite-difference checks of every analytic gradient in the crate.
//!
//! Each check draws random small networks and batches from a seeded stream,
//! computes the hand-written gradient, and compares it elementwise with a
//! central difference of an independently written loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentConfig, Transition, Variant};
use crate::error::Result;
use crate::nn::{
    finite_difference_gradient, relative_error, Activation, Gradients, Layer, Matrix, Network,
};
use crate::rules::{clip_scalar, ActionBounds, ActionSpace};

/// Knobs of the suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Random networks per check.
    pub cases: usize,
    pub perturbation: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error.
    pub floor: f64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cases: 20,
            perturbation: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub compared: usize,
    /// Draws rejected because a rectifier sat too close to its kink.
    pub redrawn: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub config: GradcheckConfig,
    pub checks: Vec<CheckResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s += &format!(
                "{:<5} {:<22} cases={:<3} values={:<6} redrawn={:<3} max_rel_err={:.3e}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.cases,
                c.compared,
                c.redrawn,
                c.max_relative_error
            );
        }
        s
    }
}

struct Tally {
    drawn: usize,
    compared: usize,
    redrawn: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self {
            drawn: 0,
            compared: 0,
            redrawn: 0,
            worst: 0.0,
        }
    }

    fn accepted(&self) -> usize {
        self.drawn - self.redrawn
    }

    /// Starts another draw until `cases` have been accepted.
    fn next_case(&mut self, cfg: &GradcheckConfig) -> bool {
        let more = self.accepted() < cfg.cases && self.redrawn < 50 * cfg.cases.max(1);
        self.drawn += more as usize;
        more
    }

    fn add(
        &mut self,
        a: impl IntoIterator<Item = f64>,
        b: impl IntoIterator<Item = f64>,
        floor: f64,
    ) {
        for (x, y) in a.into_iter().zip(b) {
            self.compared += 1;
            let e = relative_error(x, y, floor);
            // NaN must fail, so compare with `!(e <= worst)`.
            if !(e <= self.worst) {
                self.worst = e;
            }
        }
    }

    fn finish(self, name: &str, cases: usize, tol: f64) -> CheckResult {
        CheckResult {
            name: name.into(),
            cases: self.accepted(),
            compared: self.compared,
            redrawn: self.redrawn,
            max_relative_error: self.worst,
            passed: self.accepted() == cases && self.compared > 0 && self.worst < tol,
        }
    }
}

fn uniform_vec<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}

fn random_activation<R: Rng>(rng: &mut R) -> Activation {
    match rng.random_range(0..3) {
        0 => Activation::Relu,
        1 => Activation::Tanh,
        _ => Activation::Identity,
    }
}

/// Random depth, widths and activations.
pub fn random_network<R: Rng>(rng: &mut R, input: usize, output: usize) -> Network {
    let depth = rng.random_range(1..=3);
    let mut layers = Vec::new();
    let mut width = input;
    for d in 0..depth {
        let out = if d + 1 == depth {
            output
        } else {
            rng.random_range(2..=6)
        };
        layers.push(Layer::init(width, out, random_activation(rng), rng));
        width = out;
    }
    Network::from_layers(layers).expect("widths chain")
}

/// Smallest distance of any rectifier pre-activation from zero when `net`
/// reads `x`. Central differences are meaningless across the kink, so draws
/// closer than [`kink_margin`] are redrawn.
fn rectifier_margin(net: &Network, x: &[f64]) -> f64 {
    let mut margin = f64::INFINITY;
    let mut a = x.to_vec();
    for layer in net.layers() {
        let (ins, outs) = (layer.inputs(), layer.outputs());
        let z: Vec<f64> = (0..outs)
            .map(|o| {
                layer.bias()[o]
                    + (0..ins)
                        .map(|j| a[j] * layer.weights()[j * outs + o])
                        .sum::<f64>()
            })
            .collect();
        a = match layer.activation() {
            Activation::Relu => {
                margin = z.iter().fold(margin, |m, v| m.min(v.abs()));
                z.iter().map(|v| v.max(0.0)).collect()
            }
            Activation::Tanh => z.iter().map(|v| v.tanh()).collect(),
            Activation::Identity => z,
        };
    }
    margin
}

fn kink_margin(cfg: &GradcheckConfig) -> f64 {
    100.0 * cfg.perturbation
}

fn near_kink<'a>(
    cfg: &GradcheckConfig,
    net: &Network,
    rows: impl IntoIterator<Item = &'a [f64]>,
) -> bool {
    rows.into_iter()
        .any(|x| rectifier_margin(net, x) < kink_margin(cfg))
}

fn matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_vec(rows, cols, uniform_vec(rng, rows * cols, scale)).expect("shape")
}

/// `sum(cot * net(x))`, written without any crate helper beyond forward.
fn weighted_output(net: &Network, x: &Matrix, cot: &Matrix) -> f64 {
    let y = net.forward_batch(x).expect("shape");
    y.data().iter().zip(cot.data()).map(|(a, b)| a * b).sum()
}

fn check_network_params(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut t = Tally::new();
    while t.next_case(cfg) {
        let (i, o) = (rng.random_range(1..=5), rng.random_range(1..=3));
        let net = random_network(rng, i, o);
        let b = rng.random_range(1..=4);
        let x = matrix(rng, b, i, 1.0);
        let cot = matrix(rng, b, o, 1.0);
        if near_kink(cfg, &net, (0..b).map(|r| x.row(r))) {
            t.redrawn += 1;
            continue;
        }
        let pass = net.forward_pass(&x)?;
        let mut g = Gradients::zeros_like(&net);
        net.backward_pass(&pass, &cot, Some(&mut g), false)?;
        let fd =
            finite_difference_gradient(&net, |n| weighted_output(n, &x, &cot), cfg.perturbation);
        t.add(g.flatten(), fd.flatten(), cfg.floor);
    }
    Ok(t.finish("network_parameters", cfg.cases, cfg.tolerance))
}

fn check_network_input(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut t = Tally::new();
    while t.next_case(cfg) {
        let (i, o) = (rng.random_range(1..=5), rng.random_range(1..=3));
        let net = random_network(rng, i, o);
        let x = uniform_vec(rng, i, 1.0);
        let cot = uniform_vec(rng, o, 1.0);
        if near_kink(cfg, &net, [x.as_slice()]) {
            t.redrawn += 1;
            continue;
        }
        let (_, dx) = net.backward(&x, &cot)?;
        let f = |v: &[f64]| -> f64 {
            net.forward(v)
                .expect("shape")
                .iter()
                .zip(&cot)
                .map(|(a, b)| a * b)
                .sum()
        };
        let h = cfg.perturbation;
        let fd: Vec<f64> = (0..i)
            .map(|k| {
                let mut p = x.clone();
                let mut m = x.clone();
                p[k] += h;
                m[k] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect();
        t.add(dx, fd, cfg.floor);
    }
    Ok(t.finish("network_input", cfg.cases, cfg.tolerance))
}

fn small_agent(rng: &mut ChaCha8Rng, variant: Variant, obs: usize, act: usize) -> Result<Agent> {
    let w = rng.random_range(3..=6);
    let cfg = AgentConfig {
        hidden: vec![w, w],
        lambda: Some(rng.random_range(1.0..=100.0)),
        ..AgentConfig::for_variant(variant)
    };
    Agent::new(obs, ActionSpace::symmetric(act), cfg, rng)
}

fn random_batch(
    rng: &mut ChaCha8Rng,
    n: usize,
    obs: usize,
    act: usize,
    width: f64,
) -> Vec<Transition> {
    (0..n)
        .map(|_| {
            let centre = uniform_vec(rng, act, 1.0 - width);
            let min: Vec<f64> = centre.iter().map(|c| c - width).collect();
            let max: Vec<f64> = centre.iter().map(|c| c + width).collect();
            let action = uniform_vec(rng, act, 1.0);
            Transition {
                obs: uniform_vec(rng, obs, 1.0),
                raw_action: action.clone(),
                action,
                reward: rng.random_range(-2.0..=0.0),
                env_reward: 0.0,
                next_obs: uniform_vec(rng, obs, 1.0),
                done: false,
                bounds: ActionBounds { min, max },
            }
        })
        .collect()
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().chain(b).copied().collect()
}

fn check_critic(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng) -> Result<CheckResult> {
    let mut t = Tally::new();
    while t.next_case(cfg) {
        let (obs, act) = (rng.random_range(2..=5), rng.random_range(1..=2));
        let agent = small_agent(rng, Variant::Classical, obs, act)?;
        let n = rng.random_range(2..=8);
        let data = random_batch(rng, n, obs, act, 0.5);
        let batch: Vec<&Transition> = data.iter().collect();
        let targets = uniform_vec(rng, batch.len(), 3.0);
        let inputs: Vec<Vec<f64>> = batch.iter().map(|tr| concat(&tr.obs, &tr.action)).collect();
        if agent
            .critics()
            .iter()
            .any(|c| near_kink(cfg, c, inputs.iter().map(Vec::as_slice)))
        {
            t.redrawn += 1;
            continue;
        }
        for k in 0..2 {
            let (_, g) = agent.critic_gradient(k, &batch, &targets)?;
            let loss = |net: &Network| -> f64 {
                let mut sum = 0.0;
                for (tr, y) in batch.iter().zip(&targets) {
                    let q = net.forward(&concat(&tr.obs, &tr.action)).expect("shape")[0];
                    sum += (q - y) * (q - y);
                }
                sum / batch.len() as f64
            };
            let fd = finite_difference_gradient(&agent.critics()[k], loss, cfg.perturbation);
            t.add(g.flatten(), fd.flatten(), cfg.floor);
        }
    }
    Ok(t.finish("critic_td_loss", cfg.cases, cfg.tolerance))
}

/// `-mean Q1(s, pi(s)) + lambda/2 * mean |pi(s) - anchor(s)|^2` with the
/// anchors frozen.
fn actor_objective(
    agent: &Agent,
    actor: &Network,
    batch: &[&Transition],
    anchors: &[Vec<f64>],
    lambda: f64,
) -> f64 {
    let mut total = 0.0;
    for (tr, anchor) in batch.iter().zip(anchors) {
        let pi = actor.forward(&tr.obs).expect("shape");
        let q = agent.critics()[0]
            .forward(&concat(&tr.obs, &pi))
            .expect("shape")[0];
        let pen: f64 = pi.iter().zip(anchor).map(|(p, a)| (p - a) * (p - a)).sum();
        total += -q + 0.5 * lambda * pen;
    }
    total / batch.len() as f64
}

fn check_actor(
    cfg: &GradcheckConfig,
    rng: &mut ChaCha8Rng,
    penalized: bool,
) -> Result<CheckResult> {
    let mut t = Tally::new();
    while t.next_case(cfg) {
        let (obs, act) = (rng.random_range(2..=5), rng.random_range(1..=2));
        let agent = small_agent(rng, Variant::Efficient, obs, act)?;
        // Narrow boxes so that a good share of components saturate.
        let n = rng.random_range(2..=8);
        let data = random_batch(rng, n, obs, act, 0.05);
        let batch: Vec<&Transition> = data.iter().collect();
        let actor_in: Vec<&[f64]> = batch.iter().map(|tr| tr.obs.as_slice()).collect();
        let critic_in: Vec<Vec<f64>> = batch
            .iter()
            .map(|tr| concat(&tr.obs, &agent.actor().forward(&tr.obs).expect("shape")))
            .collect();
        if near_kink(cfg, agent.actor(), actor_in)
            || near_kink(
                cfg,
                &agent.critics()[0],
                critic_in.iter().map(Vec::as_slice),
            )
        {
            t.redrawn += 1;
            continue;
        }
        let lambda = agent.config().lambda();
        let anchors: Vec<Vec<f64>> = batch
            .iter()
            .map(|tr| {
                let pi = agent.actor().forward(&tr.obs).expect("shape");
                pi.iter()
                    .enumerate()
                    .map(|(j, &p)| clip_scalar(p, tr.bounds.min[j], tr.bounds.max[j]))
                    .collect()
            })
            .collect();
        let (g, weight) = if penalized {
            (agent.actor_gradient(&batch, Some(lambda))?, lambda)
        } else {
            (agent.actor_gradient(&batch, None)?, 0.0)
        };
        let fd = finite_difference_gradient(
            agent.actor(),
            |a| actor_objective(&agent, a, &batch, &anchors, weight),
            cfg.perturbation,
        );
        t.add(g.grads.flatten(), fd.flatten(), cfg.floor);
    }
    let name = if penalized {
        "actor_penalized"
    } else {
        "actor_classical"
    };
    Ok(t.finish(name, cfg.cases, cfg.tolerance))
}

/// Runs all checks.
pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let checks = vec![
        check_network_params(cfg, &mut rng)?,
        check_network_input(cfg, &mut rng)?,
        check_critic(cfg, &mut rng)?,
        check_actor(cfg, &mut rng, false)?,
        check_actor(cfg, &mut rng, true)?,
    ];
    Ok(GradcheckReport {
        config: *cfg,
        checks,
    })
}
