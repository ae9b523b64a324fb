//! Concurrent training of K policies rewarded by how well a discriminator can
//! tell which of them produced a `(state, action)` pair.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arena::{ActionId, Arena, Observation};
use crate::dqn::{argmax, make_target, update_policy, EpsilonSchedule, QPolicy, Sample, TargetMode, TransitionRecord};
use crate::dqn::{Q_DIMS, Q_INPUT};
use crate::error::{Error, Result};
use crate::nn::{cce_loss, Activation, AdamState, DenseNet};
use crate::rollout::{play_round, Controller};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiversityConfig {
    pub k: usize,
    pub episodes: usize,
    pub rounds_per_episode: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub anneal_episodes: usize,
    pub lr: f64,
    /// Discriminator learning rate; the policy rate when absent.
    pub discriminator_lr: Option<f64>,
    pub epochs: usize,
    pub batch: usize,
    pub prob_floor: f64,
    pub gamma: f64,
    pub target_mode: TargetMode,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        DiversityConfig {
            k: 3,
            episodes: 50,
            rounds_per_episode: 100,
            eps_start: 0.95,
            eps_end: 0.05,
            anneal_episodes: 50,
            lr: 1e-5,
            discriminator_lr: None,
            epochs: 5,
            batch: 1,
            prob_floor: 1e-3,
            gamma: 0.95,
            target_mode: TargetMode::Bootstrap,
        }
    }
}

impl DiversityConfig {
    pub fn epsilon(&self) -> EpsilonSchedule {
        EpsilonSchedule { start: self.eps_start, end: self.eps_end, anneal_episodes: self.anneal_episodes }
    }

    pub fn discriminator_lr(&self) -> f64 {
        self.discriminator_lr.unwrap_or(self.lr)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("diversity: {msg}")));
        if self.k < 2 {
            return bad("k must be at least 2");
        }
        if self.episodes == 0 || self.rounds_per_episode == 0 || self.epochs == 0 || self.batch == 0 {
            return bad("episodes, rounds_per_episode, epochs and batch must be positive");
        }
        if !(self.lr > 0.0 && self.discriminator_lr() > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 1.0 / self.k as f64) {
            return bad("prob_floor must lie in (0, 1/k)");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        self.epsilon().validate()
    }
}

pub fn anneal_epsilon(episode: usize, cfg: &DiversityConfig) -> f64 {
    cfg.epsilon().at(episode)
}

/// Classifier over which policy produced a `(state, action)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    net: DenseNet,
}

impl Discriminator {
    pub fn new(k: usize, seed: u64) -> Result<Discriminator> {
        if k < 2 {
            return Err(Error::Config("a discriminator needs at least 2 classes".into()));
        }
        let dims = [Q_DIMS[0], Q_DIMS[1], Q_DIMS[2], Q_DIMS[3], k];
        let acts = [Activation::Relu, Activation::Relu, Activation::Relu, Activation::Softmax];
        Ok(Discriminator { net: DenseNet::init(&dims, &acts, seed)? })
    }

    pub fn from_net(net: DenseNet) -> Result<Discriminator> {
        if net.input_dim() != Q_INPUT || net.output_dim() < 2 || net.activations().last() != Some(&Activation::Softmax) {
            return Err(Error::Validation(format!(
                "discriminator must map {Q_INPUT} inputs to a softmax over at least 2 classes"
            )));
        }
        Ok(Discriminator { net })
    }

    pub fn k(&self) -> usize {
        self.net.output_dim()
    }

    pub fn net(&self) -> &DenseNet {
        &self.net
    }

    pub fn predict(&self, obs: &Observation, action: ActionId) -> Vec<f64> {
        self.net.forward(&QPolicy::input(obs, action)).expect("discriminator input has the Q input width")
    }
}

/// Unscaled diversity reward `ln D[policy] - ln(1/K)`, no floor.
pub fn raw_r_d(probs: &[f64], policy: usize) -> f64 {
    let k = probs.len() as f64;
    probs[policy].ln() + k.ln()
}

/// Diversity reward scaled into `[-1, 1]`: the floored log-probability margin
/// over chance divided by its maximum `ln K`.
pub fn r_d(probs: &[f64], policy: usize, prob_floor: f64) -> f64 {
    let k = probs.len() as f64;
    let raw = probs[policy].max(prob_floor).ln() + k.ln();
    (raw / k.ln()).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub obs: Observation,
    pub action: ActionId,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorReport {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub val_acc: f64,
    pub test_acc: f64,
    pub train_loss: f64,
}

/// Sizes of the train/validation/test slices for `n` samples.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 8 / 10;
    let val = n / 10;
    (train, val, n - train - val)
}

/// Shuffles with `seed`, splits 80/10/10, trains on the first slice only and
/// reports accuracy on the two held-out slices.
pub fn update_discriminator(
    disc: &mut Discriminator,
    samples: &[LabeledSample],
    adam: &mut AdamState,
    epochs: usize,
    seed: u64,
) -> Result<DiscriminatorReport> {
    const MIN_SAMPLES: usize = 10;
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_SAMPLES, got: samples.len() });
    }
    if let Some(s) = samples.iter().find(|s| s.label >= disc.k()) {
        return Err(Error::ClassOutOfRange { index: s.label, classes: disc.k() });
    }
    let mut rng = seed::rng(seed::derive(seed, "split"));
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng);
    let (n_train, n_val, _) = split_sizes(samples.len());
    let (train, rest) = order.split_at(n_train);
    let (val, test) = rest.split_at(n_val);

    let mut train_order = train.to_vec();
    let mut train_loss = 0.0;
    for _ in 0..epochs {
        train_order.shuffle(&mut rng);
        train_loss = 0.0;
        for &i in &train_order {
            let s = &samples[i];
            let x = QPolicy::input(&s.obs, s.action);
            let probs = disc.net.forward(&x)?;
            let (loss, up) = cce_loss(&probs, s.label)?;
            train_loss += loss;
            let grads = disc.net.backward(&x, &up)?;
            adam.step(&mut disc.net, &grads)?;
        }
        train_loss /= train_order.len().max(1) as f64;
    }
    let accuracy = |idx: &[usize]| -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let correct = idx.iter().filter(|&&i| argmax(&disc.predict(&samples[i].obs, samples[i].action)) == samples[i].label).count();
        correct as f64 / idx.len() as f64
    };
    Ok(DiscriminatorReport {
        train: train.len(),
        val: val.len(),
        test: test.len(),
        val_acc: accuracy(val),
        test_acc: accuracy(test),
        train_loss,
    })
}

/// Pilot for one round: uniform over the K policies.
pub fn sample_pilot(round_seed: u64, k: usize) -> usize {
    seed::rng(seed::derive(round_seed, "pilot")).random_range(0..k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub epsilon: f64,
    pub transitions: usize,
    pub pilot_rounds: Vec<usize>,
    pub mean_r_d: Vec<f64>,
    pub policy_loss: Vec<f64>,
    pub val_acc: f64,
    pub test_acc: f64,
    pub discriminator_loss: f64,
}

impl EpisodeMetrics {
    fn is_finite(&self) -> bool {
        [self.epsilon, self.val_acc, self.test_acc, self.discriminator_loss]
            .iter()
            .chain(&self.mean_r_d)
            .chain(&self.policy_loss)
            .all(|v| v.is_finite())
    }
}

/// Everything a caller may want to persist after an episode.
pub struct EpisodeEnd<'a> {
    pub metrics: &'a EpisodeMetrics,
    pub policies: &'a [QPolicy],
    pub discriminator: &'a Discriminator,
}

pub struct DiversityRun {
    pub policies: Vec<QPolicy>,
    pub discriminator: Discriminator,
    pub metrics: Vec<EpisodeMetrics>,
}

/// Policy ids used for the K diversity policies.
pub fn policy_id(index: usize) -> String {
    format!("policy-{index}")
}

/// Runs the full diversity schedule. Seeds descend from `seed` as
/// `init/policy/{i}`, `init/discriminator`, `episode/{e}/round/{r}`,
/// `episode/{e}/update/policy/{i}` and `episode/{e}/update/discriminator`.
pub fn run_diversity(
    arena: &Arena,
    cfg: &DiversityConfig,
    seed: u64,
    mut on_episode: impl FnMut(EpisodeEnd<'_>) -> Result<()>,
) -> Result<DiversityRun> {
    cfg.validate()?;
    let k = cfg.k;
    let mut policies: Vec<QPolicy> = (0..k)
        .map(|i| QPolicy::new(policy_id(i), seed::derive_path(seed, &["init", "policy", &i.to_string()])))
        .collect();
    let mut discriminator = Discriminator::new(k, seed::derive_path(seed, &["init", "discriminator"]))?;
    let mut adams: Vec<AdamState> = policies.iter().map(|p| AdamState::new(p.net(), cfg.lr)).collect();
    let mut disc_adam = AdamState::new(discriminator.net(), cfg.discriminator_lr());
    let mut metrics = Vec::with_capacity(cfg.episodes);

    for episode in 0..cfg.episodes {
        let ep_seed = seed::derive_path(seed, &["episode", &episode.to_string()]);
        let epsilon = anneal_epsilon(episode, cfg);

        let rounds: Vec<(usize, crate::rollout::RoundLog)> = (0..cfg.rounds_per_episode)
            .into_par_iter()
            .map(|r| {
                let round_seed = seed::derive_path(ep_seed, &["round", &r.to_string()]);
                let pilot = sample_pilot(round_seed, k);
                let mut rng = seed::rng(round_seed);
                let controllers =
                    [Controller::EpsilonGreedy { policy: &policies[pilot], eps: epsilon }, Controller::Random];
                play_round(arena, controllers, &mut rng, [true, false]).map(|log| (pilot, log))
            })
            .collect::<Result<_>>()?;

        let mut pilot_rounds = vec![0; k];
        let mut transitions: Vec<TransitionRecord> = Vec::new();
        for (pilot, log) in &rounds {
            pilot_rounds[*pilot] += 1;
            for (obs, action, next_obs, terminal) in log.steps(0) {
                let probs = discriminator.predict(obs, action);
                let rewards = (0..k).map(|p| r_d(&probs, p, cfg.prob_floor)).collect();
                transitions.push(TransitionRecord {
                    obs: *obs,
                    action,
                    next_obs: *next_obs,
                    terminal,
                    pilot: *pilot,
                    rewards,
                });
            }
        }
        drop(rounds);

        let mean_r_d: Vec<f64> = (0..k)
            .map(|p| transitions.iter().map(|t| t.rewards[p]).sum::<f64>() / transitions.len().max(1) as f64)
            .collect();

        let policy_loss: Vec<f64> = policies
            .par_iter_mut()
            .zip(adams.par_iter_mut())
            .enumerate()
            .map(|(i, (policy, adam))| {
                let samples: Vec<Sample> = transitions
                    .iter()
                    .map(|t| Sample {
                        obs: t.obs,
                        action: t.action,
                        target: make_target(policy, t.rewards[i], &t.next_obs, t.terminal, cfg.gamma, cfg.target_mode),
                    })
                    .collect();
                let update_seed = seed::derive_path(ep_seed, &["update", "policy", &i.to_string()]);
                update_policy(policy, &samples, adam, cfg.epochs, cfg.batch, update_seed)
            })
            .collect::<Result<_>>()?;

        let labeled: Vec<LabeledSample> =
            transitions.iter().map(|t| LabeledSample { obs: t.obs, action: t.action, label: t.pilot }).collect();
        let report = update_discriminator(
            &mut discriminator,
            &labeled,
            &mut disc_adam,
            cfg.epochs,
            seed::derive_path(ep_seed, &["update", "discriminator"]),
        )?;

        let m = EpisodeMetrics {
            episode,
            epsilon,
            transitions: transitions.len(),
            pilot_rounds,
            mean_r_d,
            policy_loss,
            val_acc: report.val_acc,
            test_acc: report.test_acc,
            discriminator_loss: report.train_loss,
        };
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("diversity metrics at episode {episode}")));
        }
        on_episode(EpisodeEnd { metrics: &m, policies: &policies, discriminator: &discriminator })?;
        metrics.push(m);
    }
    Ok(DiversityRun { policies, discriminator, metrics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{EnvConfig, OBS_LEN};

    #[test]
    fn epsilon_endpoints() {
        let cfg = DiversityConfig::default();
        assert_eq!(anneal_epsilon(0, &cfg), 0.95);
        assert!((anneal_epsilon(25, &cfg) - 0.50).abs() < 1e-12);
        assert!((anneal_epsilon(50, &cfg) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn r_d_examples() {
        let third = 1.0 / 3.0;
        assert!(r_d(&[third, third, third], 0, 1e-3).abs() < 1e-12);
        assert!((r_d(&[1.0 - 2e-12, 1e-12, 1e-12], 0, 1e-3) - 1.0).abs() < 1e-9);
        let raw: f64 = 0.05f64.ln() + 3f64.ln();
        assert!((raw - -1.897_119_984_885_881_5).abs() < 1e-12);
        assert_eq!(r_d(&[0.05, 0.9, 0.05], 0, 1e-3), -1.0);
        // the floor bounds the reward from below before scaling
        assert_eq!(r_d(&[0.0, 0.5, 0.5], 0, 1e-3), -1.0);
    }

    #[test]
    fn raw_r_d_sums_to_k() {
        let mut rng = seed::rng(5);
        for _ in 0..200 {
            let k = rng.random_range(2..6);
            let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
            let s: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / s).collect();
            let total: f64 = (0..k).map(|i| raw_r_d(&p, i).exp()).sum();
            assert!((total - k as f64).abs() < 1e-6);
        }
    }

    #[test]
    fn split_sizes_follow_ratios() {
        assert_eq!(split_sizes(100), (80, 10, 10));
        assert_eq!(split_sizes(10), (8, 1, 1));
        assert_eq!(split_sizes(37), (29, 3, 5));
    }

    fn sample(i: usize, label: usize) -> LabeledSample {
        let mut obs = [0.0; OBS_LEN];
        obs[i % OBS_LEN] = 1.0;
        LabeledSample { obs, action: i % 56, label }
    }

    #[test]
    fn single_class_reaches_full_accuracy() {
        let mut disc = Discriminator::new(3, 1).unwrap();
        let samples: Vec<LabeledSample> = (0..60).map(|i| sample(i, 2)).collect();
        let mut adam = AdamState::new(disc.net(), 1e-3);
        let report = update_discriminator(&mut disc, &samples, &mut adam, 5, 9).unwrap();
        assert_eq!((report.train, report.val, report.test), (48, 6, 6));
        assert_eq!(report.val_acc, 1.0);
    }

    #[test]
    fn discriminator_never_trains_on_held_out_samples() {
        // Samples 0..n; the held-out ones carry a label the training slice never sees.
        let n = 50;
        let (n_train, _, _) = split_sizes(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(seed::derive(4, "split")));
        let held_out: std::collections::HashSet<usize> = order[n_train..].iter().copied().collect();
        let samples: Vec<LabeledSample> = (0..n).map(|i| sample(i, if held_out.contains(&i) { 1 } else { 0 })).collect();
        let mut disc = Discriminator::new(2, 2).unwrap();
        let mut adam = AdamState::new(disc.net(), 1e-3);
        let report = update_discriminator(&mut disc, &samples, &mut adam, 5, 4).unwrap();
        // trained only on label 0, so every held-out prediction of label 1 is wrong
        assert_eq!(report.val_acc, 0.0);
        assert_eq!(report.test_acc, 0.0);
    }

    #[test]
    fn update_discriminator_rejects_tiny_batches() {
        let mut disc = Discriminator::new(2, 2).unwrap();
        let mut adam = AdamState::new(disc.net(), 1e-3);
        let samples: Vec<LabeledSample> = (0..9).map(|i| sample(i, 0)).collect();
        assert!(matches!(
            update_discriminator(&mut disc, &samples, &mut adam, 1, 0),
            Err(Error::TooFewSamples { needed: 10, got: 9 })
        ));
    }

    #[test]
    fn pilots_are_uniform() {
        let n = 10_000;
        let mut counts = [0usize; 3];
        for r in 0..n {
            counts[sample_pilot(seed::derive_path(7, &["round", &r.to_string()]), 3)] += 1;
        }
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(DiversityConfig::default().validate().is_ok());
        assert!(DiversityConfig { k: 1, ..Default::default() }.validate().is_err());
        assert!(DiversityConfig { eps_start: 0.01, ..Default::default() }.validate().is_err());
        assert!(DiversityConfig { prob_floor: 0.5, ..Default::default() }.validate().is_err());
        assert!(DiversityConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn tiny_run_is_deterministic_and_gives_k_rewards_per_transition() {
        let arena = Arena::with_config(EnvConfig { round_frames: 120, ..EnvConfig::default() }).unwrap();
        let cfg = DiversityConfig { episodes: 2, rounds_per_episode: 3, anneal_episodes: 2, lr: 1e-4, ..Default::default() };
        let run = |s| {
            let mut seen = 0;
            let out = run_diversity(&arena, &cfg, s, |end| {
                assert_eq!(end.policies.len(), 3);
                seen += 1;
                Ok(())
            })
            .unwrap();
            assert_eq!(seen, 2);
            out
        };
        let a = run(11);
        let b = run(11);
        assert_eq!(a.policies, b.policies);
        assert_eq!(a.discriminator, b.discriminator);
        assert_eq!(a.metrics, b.metrics);
        for m in &a.metrics {
            assert_eq!(m.mean_r_d.len(), 3);
            assert_eq!(m.pilot_rounds.iter().sum::<usize>(), 3);
        }
        assert_ne!(a.policies[0], QPolicy::new(policy_id(0), seed::derive_path(11, &["init", "policy", "0"])));
    }
}
