//! State-action Q-network: the network scores a concatenated
//! `(observation, one-hot action)` vector and the policy acts by argmax over
//! all 56 actions.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arena::{ActionId, Observation, NUM_ACTIONS, OBS_LEN};
use crate::error::{Error, Result};
use crate::nn::{activate, dot, mse_loss, Activation, AdamState, DenseNet, Gradients};

pub const Q_INPUT: usize = OBS_LEN + NUM_ACTIONS;
pub const Q_DIMS: [usize; 5] = [Q_INPUT, 128, 64, 32, 1];
pub const Q_ACTIVATIONS: [Activation; 4] = [Activation::Relu, Activation::Relu, Activation::Relu, Activation::Tanh];

/// Environment rewards are divided by this before they become regression targets.
pub const REWARD_SCALE: f64 = 1000.0;
/// Targets stay strictly inside the tanh range.
pub const TARGET_CLAMP: f64 = 0.99;

/// Anything that picks an action from an observation without randomness.
pub trait Agent: Sync {
    fn act(&self, obs: &Observation) -> ActionId;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// One-step Q-learning target `r + gamma * max_a Q(s', a)`.
    #[default]
    Bootstrap,
    /// Regress the immediate reward only.
    Immediate,
}

/// Linear decay from `start` to `end` over `anneal_episodes`, then held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_episodes: usize,
}

impl EpsilonSchedule {
    pub fn fixed(eps: f64) -> EpsilonSchedule {
        EpsilonSchedule { start: eps, end: eps, anneal_episodes: 0 }
    }

    pub fn at(&self, episode: usize) -> f64 {
        if self.anneal_episodes == 0 {
            return self.end;
        }
        let progress = episode as f64 / self.anneal_episodes as f64;
        self.end.max(self.start - (self.start - self.end) * progress)
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |e: f64| (0.0..=1.0).contains(&e);
        if !in_range(self.start) || !in_range(self.end) || self.start < self.end {
            return Err(Error::Config(format!(
                "epsilon schedule needs 1 >= start >= end >= 0, got {} -> {}",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QPolicy {
    pub id: String,
    net: DenseNet,
}

impl QPolicy {
    pub fn new(id: impl Into<String>, seed: u64) -> QPolicy {
        let net = DenseNet::init(&Q_DIMS, &Q_ACTIVATIONS, seed).expect("Q architecture is valid");
        QPolicy { id: id.into(), net }
    }

    /// Any net mapping 199 inputs to a single output can serve as a Q function.
    pub fn from_net(id: impl Into<String>, net: DenseNet) -> Result<QPolicy> {
        if net.input_dim() != Q_INPUT || net.output_dim() != 1 {
            return Err(Error::Validation(format!(
                "Q network must map {Q_INPUT} inputs to 1 output, got {} -> {}",
                net.input_dim(),
                net.output_dim()
            )));
        }
        if net.layers()[0].activation() == Activation::Softmax || net.activations().last() == Some(&Activation::Softmax) {
            return Err(Error::Validation("Q network cannot use a softmax output".into()));
        }
        Ok(QPolicy { id: id.into(), net })
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNet {
        &mut self.net
    }

    pub fn input(obs: &Observation, action: ActionId) -> Vec<f64> {
        let mut x = Vec::with_capacity(Q_INPUT);
        x.extend_from_slice(obs);
        x.extend((0..NUM_ACTIONS).map(|a| if a == action { 1.0 } else { 0.0 }));
        x
    }

    /// Scores every action. The observation half of the first layer is
    /// computed once and each action's one-hot column is added to it, which
    /// is the same affine map as a forward pass on the concatenated input.
    pub fn q_values(&self, obs: &Observation) -> [f64; NUM_ACTIONS] {
        let base = self.first_layer_base(obs);
        let mut out = [0.0; NUM_ACTIONS];
        let mut scratch = (Vec::new(), Vec::new());
        for (a, q) in out.iter_mut().enumerate() {
            *q = self.head(&base, a, &mut scratch);
        }
        out
    }

    pub fn q_value(&self, obs: &Observation, action: ActionId) -> f64 {
        assert!(action < NUM_ACTIONS, "action {action} out of range");
        let base = self.first_layer_base(obs);
        self.head(&base, action, &mut (Vec::new(), Vec::new()))
    }

    pub fn max_q(&self, obs: &Observation) -> f64 {
        self.q_values(obs).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax over all actions; ties go to the lowest id.
    pub fn greedy_action(&self, obs: &Observation) -> ActionId {
        argmax(&self.q_values(obs))
    }

    /// Always draws the exploration coin first, then the uniform action if exploring.
    pub fn epsilon_greedy<R: Rng>(&self, obs: &Observation, eps: f64, rng: &mut R) -> ActionId {
        if rng.random::<f64>() < eps {
            rng.random_range(0..NUM_ACTIONS)
        } else {
            self.greedy_action(obs)
        }
    }

    fn first_layer_base(&self, obs: &Observation) -> Vec<f64> {
        let l1 = &self.net.layers()[0];
        (0..l1.outputs()).map(|o| dot(&l1.row(o)[..OBS_LEN], obs) + l1.biases()[o]).collect()
    }

    fn head(&self, base: &[f64], action: ActionId, (h, next): &mut (Vec<f64>, Vec<f64>)) -> f64 {
        let layers = self.net.layers();
        let l1 = &layers[0];
        h.clear();
        h.extend(base.iter().enumerate().map(|(o, b)| b + l1.row(o)[OBS_LEN + action]));
        activate(l1.activation(), h);
        for layer in &layers[1..] {
            layer.pre_activation(h, next);
            activate(layer.activation(), next);
            std::mem::swap(h, next);
        }
        h[0]
    }
}

impl Agent for QPolicy {
    fn act(&self, obs: &Observation) -> ActionId {
        self.greedy_action(obs)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// One decision of one round, with rewards already normalized. `rewards`
/// holds one value per policy being trained (a single value outside
/// diversity training).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub obs: Observation,
    pub action: ActionId,
    pub next_obs: Observation,
    pub terminal: bool,
    pub pilot: usize,
    pub rewards: Vec<f64>,
}

/// Regression target for one transition.
pub fn make_target(
    policy: &QPolicy,
    reward_norm: f64,
    next_obs: &Observation,
    terminal: bool,
    gamma: f64,
    mode: TargetMode,
) -> f64 {
    let value = if terminal || mode == TargetMode::Immediate || gamma == 0.0 {
        reward_norm
    } else {
        reward_norm + gamma * policy.max_q(next_obs)
    };
    value.clamp(-TARGET_CLAMP, TARGET_CLAMP)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Observation,
    pub action: ActionId,
    pub target: f64,
}

/// `epochs` passes over `samples` in a seeded shuffled order, MSE loss, one
/// Adam step per mini-batch. Returns the mean loss of the last epoch.
pub fn update_policy(
    policy: &mut QPolicy,
    samples: &[Sample],
    adam: &mut AdamState,
    epochs: usize,
    batch: usize,
    seed: u64,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if batch == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = crate::seed::rng(seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut last_epoch_loss = 0.0;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        last_epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut total: Option<Gradients> = None;
            for &i in chunk {
                let s = &samples[i];
                let x = QPolicy::input(&s.obs, s.action);
                let pred = policy.net.forward(&x)?;
                let (loss, up) = mse_loss(&pred, &[s.target])?;
                last_epoch_loss += loss;
                let g = policy.net.backward(&x, &up)?;
                total = Some(match total {
                    None => g,
                    Some(mut acc) => {
                        for (a, b) in acc.layers.iter_mut().zip(&g.layers) {
                            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
                            a.biases.iter_mut().zip(&b.biases).for_each(|(x, y)| *x += y);
                        }
                        acc
                    }
                });
            }
            let mut grads = total.expect("chunks are non-empty");
            if chunk.len() > 1 {
                let scale = 1.0 / chunk.len() as f64;
                for l in &mut grads.layers {
                    l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|g| *g *= scale);
                }
            }
            adam.step(&mut policy.net, &grads)?;
        }
        last_epoch_loss /= samples.len() as f64;
    }
    Ok(last_epoch_loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::WeightFile;

    fn zero_policy() -> QPolicy {
        let net = DenseNet::init(&Q_DIMS, &Q_ACTIVATIONS, 0).unwrap();
        let mut file = WeightFile::from(&net);
        for l in &mut file.layers {
            l.weights.iter_mut().for_each(|r| r.iter_mut().for_each(|w| *w = 0.0));
        }
        QPolicy::from_net("zero", file.into_net().unwrap()).unwrap()
    }

    fn obs(v: f64) -> Observation {
        let mut o = [0.0; OBS_LEN];
        o.iter_mut().enumerate().for_each(|(i, x)| *x = ((i as f64 * 0.37 + v) % 1.0).abs());
        o
    }

    /// One linear layer 199 -> 1 with tanh: q = tanh(w . x + b).
    fn single_layer(weights: Vec<f64>, bias: f64) -> QPolicy {
        let net = DenseNet::from_parameters(&[Q_INPUT, 1], &[Activation::Tanh], vec![weights], vec![vec![bias]]).unwrap();
        QPolicy::from_net("surrogate", net).unwrap()
    }

    #[test]
    fn zero_policy_scores_zero_and_picks_action_zero() {
        let p = zero_policy();
        let o = obs(0.3);
        assert!(p.q_values(&o).iter().all(|q| *q == 0.0));
        assert_eq!(p.greedy_action(&o), 0);
    }

    #[test]
    fn fast_path_matches_concatenated_forward() {
        let p = QPolicy::new("p", 42);
        let o = obs(0.11);
        let q = p.q_values(&o);
        for a in 0..NUM_ACTIONS {
            let full = p.net().forward(&QPolicy::input(&o, a)).unwrap()[0];
            assert!((q[a] - full).abs() < 1e-12);
            assert_eq!(q[a].to_bits(), p.q_value(&o, a).to_bits());
            assert!(q[a] > -1.0 && q[a] < 1.0);
        }
    }

    #[test]
    fn hand_set_surrogate() {
        // obs weight 0.1 on slot 0, action weight 0.5 on action 3, bias -0.2.
        let mut w = vec![0.0; Q_INPUT];
        w[0] = 0.1;
        w[OBS_LEN + 3] = 0.5;
        let p = single_layer(w, -0.2);
        let mut o = [0.0; OBS_LEN];
        o[0] = 0.8;
        assert!((p.q_value(&o, 3) - (0.08f64 + 0.5 - 0.2).tanh()).abs() < 1e-15);
        assert!((p.q_value(&o, 4) - (0.08f64 - 0.2).tanh()).abs() < 1e-15);
    }

    #[test]
    fn greedy_finds_constructed_best_action() {
        let mut w = vec![0.0; Q_INPUT];
        w[OBS_LEN + 17] = 0.4;
        w[OBS_LEN + 30] = 0.3;
        let p = single_layer(w.clone(), 0.0);
        assert_eq!(p.greedy_action(&obs(0.5)), 17);
        // shifting the final bias preserves the argmax
        let shifted = single_layer(w, 0.35);
        assert_eq!(shifted.greedy_action(&obs(0.5)), 17);
    }

    #[test]
    fn greedy_ties_break_to_lowest_id() {
        let mut w = vec![0.0; Q_INPUT];
        w[OBS_LEN + 9] = 0.2;
        w[OBS_LEN + 5] = 0.2;
        assert_eq!(single_layer(w, 0.0).greedy_action(&obs(0.1)), 5);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }

    #[test]
    fn epsilon_zero_is_greedy() {
        let p = QPolicy::new("p", 3);
        let mut rng = crate::seed::rng(1);
        for i in 0..20 {
            let o = obs(i as f64 * 0.05);
            assert_eq!(p.epsilon_greedy(&o, 0.0, &mut rng), p.greedy_action(&o));
        }
    }

    #[test]
    fn epsilon_one_is_uniform() {
        let p = zero_policy();
        let o = obs(0.0);
        let mut rng = crate::seed::rng(77);
        let n = 100_000;
        let mut counts = [0usize; NUM_ACTIONS];
        for _ in 0..n {
            counts[p.epsilon_greedy(&o, 1.0, &mut rng)] += 1;
        }
        let pr = 1.0 / NUM_ACTIONS as f64;
        let mean = n as f64 * pr;
        let sigma = (n as f64 * pr * (1.0 - pr)).sqrt();
        for c in counts {
            assert!((c as f64 - mean).abs() < 3.0 * sigma + 1.0, "count {c} vs {mean}");
        }
    }

    #[test]
    fn epsilon_greedy_is_reproducible() {
        let p = QPolicy::new("p", 3);
        let o = obs(0.2);
        let draw = |seed| {
            let mut rng = crate::seed::rng(seed);
            (0..50).map(|_| p.epsilon_greedy(&o, 0.5, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn epsilon_schedule() {
        let s = EpsilonSchedule { start: 0.95, end: 0.05, anneal_episodes: 50 };
        assert_eq!(s.at(0), 0.95);
        assert!((s.at(25) - 0.5).abs() < 1e-12);
        assert!((s.at(50) - 0.05).abs() < 1e-12);
        assert_eq!(s.at(80), 0.05);
        assert_eq!(EpsilonSchedule::fixed(0.05).at(3), 0.05);
        assert!(EpsilonSchedule { start: 0.1, end: 0.5, anneal_episodes: 3 }.validate().is_err());
    }

    #[test]
    fn target_rules() {
        let zero = zero_policy();
        let o = obs(0.0);
        assert_eq!(make_target(&zero, 1.0, &o, true, 0.95, TargetMode::Bootstrap), 0.99);
        assert_eq!(make_target(&zero, -1.0, &o, true, 0.95, TargetMode::Bootstrap), -0.99);
        assert_eq!(make_target(&zero, 0.3, &o, false, 0.0, TargetMode::Bootstrap), 0.3);

        // max_a Q(next) = tanh(atanh(0.5)) = 0.5 via a bias-only surrogate
        let half = single_layer(vec![0.0; Q_INPUT], 0.5f64.atanh());
        let t = make_target(&half, 0.1, &o, false, 0.95, TargetMode::Bootstrap);
        assert!((t - 0.575).abs() < 1e-12);
        assert_eq!(make_target(&half, 0.1, &o, false, 0.95, TargetMode::Immediate), 0.1);
        assert!((make_target(&half, 0.6, &o, false, 0.95, TargetMode::Bootstrap) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn update_moves_prediction_monotonically_toward_target() {
        let mut p = QPolicy::new("p", 5);
        let o = obs(0.4);
        let target = 0.7;
        let samples = vec![Sample { obs: o, action: 12, target }];
        let mut adam = AdamState::new(p.net(), 1e-4);
        let mut err = (p.q_value(&o, 12) - target).abs();
        for epoch in 0..10 {
            update_policy(&mut p, &samples, &mut adam, 1, 1, epoch).unwrap();
            let e = (p.q_value(&o, 12) - target).abs();
            assert!(e < err, "epoch {epoch}: {e} >= {err}");
            err = e;
        }
    }

    #[test]
    fn update_on_exact_targets_barely_moves() {
        let mut p = QPolicy::new("p", 6);
        let samples: Vec<Sample> = (0..4)
            .map(|i| {
                let o = obs(i as f64 * 0.2);
                Sample { obs: o, action: i, target: p.net().forward(&QPolicy::input(&o, i)).unwrap()[0] }
            })
            .collect();
        let before: Vec<f64> = p.net().parameters().collect();
        let lr = 1e-5;
        let mut adam = AdamState::new(p.net(), lr);
        update_policy(&mut p, &samples, &mut adam, 1, 1, 0).unwrap();
        let moved: f64 = p.net().parameters().zip(&before).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(moved < lr, "moved {moved}");
    }

    #[test]
    fn update_is_deterministic() {
        let samples: Vec<Sample> =
            (0..6).map(|i| Sample { obs: obs(i as f64 * 0.1), action: i * 7, target: 0.1 * i as f64 - 0.2 }).collect();
        let run = || {
            let mut p = QPolicy::new("p", 8);
            let mut adam = AdamState::new(p.net(), 1e-3);
            update_policy(&mut p, &samples, &mut adam, 5, 1, 99).unwrap();
            p
        };
        assert_eq!(run(), run());
        let mut p = QPolicy::new("p", 8);
        let mut adam = AdamState::new(p.net(), 1e-3);
        assert!(update_policy(&mut p, &[], &mut adam, 5, 1, 0).is_err());
    }

    #[test]
    fn terminal_positive_targets_make_action_best() {
        // small-net sanity: terminal targets only, +0.99 for action 40 and 0 for every other action
        let net = DenseNet::init(&[Q_INPUT, 16, 1], &[Activation::Relu, Activation::Tanh], 4).unwrap();
        let mut p = QPolicy::from_net("small", net).unwrap();
        let o = obs(0.6);
        let samples: Vec<Sample> = (0..NUM_ACTIONS)
            .map(|a| Sample { obs: o, action: a, target: if a == 40 { 0.99 } else { 0.0 } })
            .collect();
        let mut adam = AdamState::new(p.net(), 1e-3);
        for pass in 0..500 / NUM_ACTIONS {
            update_policy(&mut p, &samples, &mut adam, 1, 1, pass as u64).unwrap();
        }
        assert!(adam.t <= 500);
        assert_eq!(p.greedy_action(&o), 40);
    }

    #[test]
    fn from_net_rejects_wrong_shapes() {
        let net = DenseNet::init(&[10, 1], &[Activation::Tanh], 0).unwrap();
        assert!(QPolicy::from_net("x", net).is_err());
        let net = DenseNet::init(&[Q_INPUT, 2], &[Activation::Tanh], 0).unwrap();
        assert!(QPolicy::from_net("x", net).is_err());
    }
}
