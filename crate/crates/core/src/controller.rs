//! Per-task controllers: each task owns a real-valued logit `beta` and a
//! categorical policy over three discrete steps of it. Task weights are the
//! softmax of the five logits. Controllers propose K joint step
//! configurations per outer iteration, observe one reward per trained
//! replica, and update their policies with the score-function gradient
//! estimator; the logits of the best replica are committed as the new
//! state.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{WeightVector, NUM_TASKS};
use crate::optim::Optimizer;
use crate::tensor::Tensor;

/// The discrete logit steps available to every controller.
pub const ACTION_DELTAS: [f64; 3] = [-0.2, 0.0, 0.2];
pub const NUM_ACTIONS: usize = 3;

/// Action index for "leave the logit unchanged".
pub const ACTION_STAY: usize = 1;

/// Softmax over the five task logits, stabilized by max subtraction.
pub fn weights_from_logits(betas: &[f64; NUM_TASKS]) -> Result<WeightVector> {
    if betas.iter().any(|b| !b.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "task logits must be finite: {betas:?}"
        )));
    }
    let max = betas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = betas.map(|b| (b - max).exp());
    let sum: f64 = exp.iter().sum();
    WeightVector::new(exp.map(|e| e / sum))
}

fn policy_probs(theta: &Tensor) -> [f64; NUM_ACTIONS] {
    debug_assert_eq!(theta.len(), NUM_ACTIONS);
    let d = theta.data();
    let max = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exp = [
        (d[0] - max).exp(),
        (d[1] - max).exp(),
        (d[2] - max).exp(),
    ];
    let sum: f64 = exp.iter().sum();
    exp.map(|e| e / sum)
}

/// Exact gradient of `log p(action)` for a categorical policy with logits
/// `theta`: `onehot(action) − softmax(theta)`.
pub fn log_prob_grad(theta: &Tensor, action: usize) -> Result<Tensor> {
    if action >= NUM_ACTIONS {
        return Err(Error::InvalidArgument(format!(
            "action index {action} out of range"
        )));
    }
    let probs = policy_probs(theta);
    let mut g = probs.map(|p| -p);
    g[action] += 1.0;
    Tensor::new(vec![NUM_ACTIONS], g.to_vec())
}

/// One controller: current logit, policy parameters, and the policy's own
/// optimizer state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControllerState {
    pub beta: f64,
    pub theta: Tensor,
    optimizer: Optimizer,
}

impl ControllerState {
    fn new(beta_init: f64, learning_rate: f64) -> Result<Self> {
        Ok(Self {
            beta: beta_init,
            theta: Tensor::zeros(vec![NUM_ACTIONS]),
            optimizer: Optimizer::adam(learning_rate, &[vec![NUM_ACTIONS]])?,
        })
    }

    pub fn action_probs(&self) -> [f64; NUM_ACTIONS] {
        policy_probs(&self.theta)
    }
}

/// One sampled action with its log-probability at sampling time.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ActionSample {
    pub action: usize,
    pub log_prob: f64,
}

/// One candidate configuration for one replica: a joint action, the
/// stepped logits, and the joint log-probability (controllers are
/// independent, so it is the sum over controllers).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Proposal {
    pub actions: Vec<usize>,
    pub betas: Vec<f64>,
    pub joint_log_prob: f64,
}

impl Proposal {
    /// The task weights this proposal induces (five-controller banks only).
    pub fn alpha(&self) -> Result<WeightVector> {
        let betas: [f64; NUM_TASKS] = self
            .betas
            .as_slice()
            .try_into()
            .map_err(|_| Error::InvalidArgument("proposal is not five-task".into()))?;
        weights_from_logits(&betas)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineMode {
    None,
    /// Centers each reward on the mean of the *other* replicas' rewards,
    /// which leaves the estimator's expectation untouched (a baseline
    /// independent of the sample it centers).
    #[default]
    MeanCenter,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommitRule {
    /// Carry forward the logits of the max-reward replica.
    #[default]
    BestReplica,
    /// Step each logit by its policy's expected delta.
    ExpectedDelta,
}

/// Per-replica slice of an episode: what was proposed, what reward came
/// back, and whether the replica diverged.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplicaRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    pub alpha: WeightVector,
    pub reward: f64,
    pub failed: bool,
}

/// One outer-loop iteration, as logged: all replica proposals and rewards,
/// the selected replica, and the committed state.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub iteration: usize,
    pub replicas: Vec<ReplicaRecord>,
    pub selected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub committed_betas: Option<Vec<f64>>,
    pub committed_alpha: WeightVector,
}

/// A bank of independent controllers, one per task. The canonical
/// five-task bank drives the search; smaller banks exist so the gradient
/// estimator can be checked against exhaustive enumeration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ControllerBank {
    controllers: Vec<ControllerState>,
}

impl ControllerBank {
    pub fn new(n_controllers: usize, beta_init: f64, learning_rate: f64) -> Result<Self> {
        if n_controllers == 0 {
            return Err(Error::InvalidArgument("need at least one controller".into()));
        }
        if !beta_init.is_finite() {
            return Err(Error::InvalidArgument("beta_init must be finite".into()));
        }
        let controllers = (0..n_controllers)
            .map(|_| ControllerState::new(beta_init, learning_rate))
            .collect::<Result<_>>()?;
        Ok(Self { controllers })
    }

    /// The canonical bank: one controller per task (five in total).
    pub fn for_tasks(beta_init: f64, learning_rate: f64) -> Result<Self> {
        Self::new(NUM_TASKS, beta_init, learning_rate)
    }

    pub fn len(&self) -> usize {
        self.controllers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controllers.is_empty()
    }

    pub fn controller(&self, i: usize) -> &ControllerState {
        &self.controllers[i]
    }

    pub fn betas(&self) -> Vec<f64> {
        self.controllers.iter().map(|c| c.beta).collect()
    }

    /// Draws K joint actions, one categorical sample per controller per
    /// replica, and steps each controller's logit accordingly.
    pub fn sample_actions(&self, k: usize, rng: &mut impl Rng) -> Result<Vec<Proposal>> {
        if k < 1 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        let mut proposals = Vec::with_capacity(k);
        for _ in 0..k {
            let mut actions = Vec::with_capacity(self.len());
            let mut betas = Vec::with_capacity(self.len());
            let mut joint_log_prob = 0.0;
            for c in &self.controllers {
                let sample = sample_categorical(&c.action_probs(), rng);
                joint_log_prob += sample.log_prob;
                betas.push(c.beta + ACTION_DELTAS[sample.action]);
                actions.push(sample.action);
            }
            proposals.push(Proposal {
                actions,
                betas,
                joint_log_prob,
            });
        }
        Ok(proposals)
    }

    /// A degenerate proposal set: every controller holds its logit. Used
    /// when the policy is frozen; consumes no randomness.
    pub fn hold_proposals(&self, k: usize) -> Result<Vec<Proposal>> {
        if k < 1 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        let stay_log_prob: f64 = self
            .controllers
            .iter()
            .map(|c| c.action_probs()[ACTION_STAY].ln())
            .sum();
        Ok((0..k)
            .map(|_| Proposal {
                actions: vec![ACTION_STAY; self.len()],
                betas: self.betas(),
                joint_log_prob: stay_log_prob,
            })
            .collect())
    }

    /// Policy-gradient ascent from a completed episode, then the logit
    /// commitment. For each controller i the gradient estimate is
    /// `(1/K) Σ_j R̃_j · ∇ log p(a_{i,j})`, with `R̃` per the baseline mode.
    pub fn reinforce_update(
        &mut self,
        episode: &EpisodeRecord,
        baseline: BaselineMode,
        commit: CommitRule,
    ) -> Result<()> {
        let k = episode.replicas.len();
        if k == 0 {
            return Err(Error::State("episode has no replicas".into()));
        }
        if episode.selected >= k {
            return Err(Error::State(format!(
                "selected replica {} out of range {k}",
                episode.selected
            )));
        }
        let mut rewards = Vec::with_capacity(k);
        let mut actions: Vec<&[usize]> = Vec::with_capacity(k);
        for (j, r) in episode.replicas.iter().enumerate() {
            if !r.reward.is_finite() || !(0.0..=1.0).contains(&r.reward) {
                return Err(Error::State(format!(
                    "replica {j} reward {} outside [0, 1]",
                    r.reward
                )));
            }
            let a = r
                .actions
                .as_deref()
                .ok_or_else(|| Error::State(format!("replica {j} is missing its actions")))?;
            if a.len() != self.len() || a.iter().any(|&ai| ai >= NUM_ACTIONS) {
                return Err(Error::State(format!("replica {j} has malformed actions")));
            }
            rewards.push(r.reward);
            actions.push(a);
        }

        let shaped = shape_rewards(&rewards, baseline);
        for (i, c) in self.controllers.iter_mut().enumerate() {
            let mut grad = Tensor::zeros(vec![NUM_ACTIONS]);
            for (j, a) in actions.iter().enumerate() {
                let g = log_prob_grad(&c.theta, a[i])?;
                grad.add_scaled(&g, shaped[j])?;
            }
            let grad = grad.scale(1.0 / k as f64);
            // Ascent on the reward: descend the negated gradient.
            let descent = grad.scale(-1.0);
            c.optimizer
                .step(&mut [("theta", &mut c.theta)], &[descent])?;
        }

        match commit {
            CommitRule::BestReplica => {
                let best = &episode.replicas[episode.selected];
                let betas = best.betas.as_deref().ok_or_else(|| {
                    Error::State("selected replica is missing its logits".into())
                })?;
                if betas.len() != self.len() {
                    return Err(Error::State("selected replica has malformed logits".into()));
                }
                for (c, b) in self.controllers.iter_mut().zip(betas) {
                    c.beta = *b;
                }
            }
            CommitRule::ExpectedDelta => {
                for c in &mut self.controllers {
                    let probs = c.action_probs();
                    let expected: f64 = probs
                        .iter()
                        .zip(ACTION_DELTAS)
                        .map(|(p, d)| p * d)
                        .sum();
                    c.beta += expected;
                }
            }
        }
        Ok(())
    }
}

/// Centered (or raw) rewards. Centering uses the leave-one-out mean so the
/// baseline is independent of the reward it centers; with a single replica
/// there is nothing to center against and the reward passes through.
fn shape_rewards(rewards: &[f64], baseline: BaselineMode) -> Vec<f64> {
    match baseline {
        BaselineMode::None => rewards.to_vec(),
        BaselineMode::MeanCenter => {
            let k = rewards.len();
            if k < 2 {
                return rewards.to_vec();
            }
            let sum: f64 = rewards.iter().sum();
            rewards
                .iter()
                .map(|&r| r - (sum - r) / (k - 1) as f64)
                .collect()
        }
    }
}

fn sample_categorical(probs: &[f64; NUM_ACTIONS], rng: &mut impl Rng) -> ActionSample {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return ActionSample {
                action: a,
                log_prob: p.ln(),
            };
        }
    }
    // r landed in the rounding slack at the top of the cumulative sum.
    ActionSample {
        action: NUM_ACTIONS - 1,
        log_prob: probs[NUM_ACTIONS - 1].ln(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskId;
    use crate::seeding::derive_rng;
    use proptest::prelude::*;

    fn episode_from(
        actions: Vec<Vec<usize>>,
        betas: Vec<Vec<f64>>,
        rewards: Vec<f64>,
        selected: usize,
    ) -> EpisodeRecord {
        let replicas = actions
            .into_iter()
            .zip(betas)
            .zip(rewards)
            .map(|((a, b), reward)| ReplicaRecord {
                actions: Some(a),
                betas: Some(b),
                alpha: WeightVector::uniform(),
                reward,
                failed: false,
            })
            .collect();
        EpisodeRecord {
            iteration: 0,
            replicas,
            selected,
            committed_betas: None,
            committed_alpha: WeightVector::uniform(),
        }
    }

    #[test]
    fn equal_logits_give_exactly_uniform_weights() {
        let w = weights_from_logits(&[1.0; 5]).unwrap();
        for task in TaskId::ALL {
            assert!((w.get(task) - 0.2).abs() <= 1e-12);
        }
    }

    #[test]
    fn ln2_logit_doubles_its_weight() {
        let w = weights_from_logits(&[std::f64::consts::LN_2, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((w.get(TaskId::B) - 2.0 / 6.0).abs() < 1e-12);
        for task in [TaskId::Doppler, TaskId::Swe, TaskId::Se, TaskId::Fusion] {
            assert!((w.get(task) - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_logits_are_rejected() {
        assert!(weights_from_logits(&[f64::INFINITY, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(weights_from_logits(&[f64::NAN, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn stepping_only_fusion_matches_direct_softmax() {
        // From β = 1⁵, a +0.2 step on the fusion logit alone.
        let betas = [1.0, 1.0, 1.0, 1.0, 1.2];
        let w = weights_from_logits(&betas).unwrap();
        let expect = (1.2f64).exp() / (4.0 * (1.0f64).exp() + (1.2f64).exp());
        assert!((w.get(TaskId::Fusion) - expect).abs() < 1e-15);
        assert!((expect - 0.2339).abs() < 1e-4);
    }

    #[test]
    fn log_prob_grad_uniform_case() {
        let theta = Tensor::zeros(vec![3]);
        let g = log_prob_grad(&theta, 0).unwrap();
        assert!((g.data()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.data()[1] + 1.0 / 3.0).abs() < 1e-15);
        assert!((g.data()[2] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn log_prob_grad_matches_finite_differences() {
        let mut rng = derive_rng(0, "test-lpg", &[]);
        for _ in 0..20 {
            let theta = Tensor::new(
                vec![3],
                (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let action = rng.random_range(0..3);
            let g = log_prob_grad(&theta, action).unwrap();
            let h = 1e-6;
            for i in 0..3 {
                let mut up = theta.clone();
                up.data_mut()[i] += h;
                let mut down = theta.clone();
                down.data_mut()[i] -= h;
                let fd = (policy_probs(&up)[action].ln() - policy_probs(&down)[action].ln())
                    / (2.0 * h);
                let an = g.data()[i];
                let denom = an.abs().max(fd.abs()).max(1e-12);
                assert!(
                    ((an - fd) / denom).abs() < 1e-8,
                    "component {i}: {an} vs {fd}"
                );
            }
        }
    }

    #[test]
    fn degenerate_policy_always_steps_down() {
        let mut bank = ControllerBank::new(5, 1.0, 1e-3).unwrap();
        for c in &mut bank.controllers {
            c.theta = Tensor::new(vec![3], vec![50.0, -50.0, -50.0]).unwrap();
        }
        let mut rng = derive_rng(1, "test-degenerate", &[]);
        for p in bank.sample_actions(8, &mut rng).unwrap() {
            assert!(p.actions.iter().all(|&a| a == 0));
            assert!(p.betas.iter().all(|&b| (b - 0.8).abs() < 1e-12));
        }
    }

    #[test]
    fn uniform_policy_action_frequencies_are_near_one_third() {
        let bank = ControllerBank::new(1, 1.0, 1e-3).unwrap();
        let mut rng = derive_rng(2, "test-freq", &[]);
        let mut counts = [0usize; 3];
        let draws = 30_000;
        for p in bank.sample_actions(draws, &mut rng).unwrap() {
            counts[p.actions[0]] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!(
                (freq - 1.0 / 3.0).abs() < 0.02,
                "frequencies {counts:?}"
            );
        }
    }

    #[test]
    fn sample_actions_rejects_zero_k() {
        let bank = ControllerBank::new(2, 1.0, 1e-3).unwrap();
        let mut rng = derive_rng(3, "test-k0", &[]);
        assert!(bank.sample_actions(0, &mut rng).is_err());
    }

    #[test]
    fn equal_rewards_with_centering_leave_theta_unchanged() {
        let mut bank = ControllerBank::new(3, 1.0, 0.05).unwrap();
        let before: Vec<Tensor> = bank.controllers.iter().map(|c| c.theta.clone()).collect();
        let episode = episode_from(
            vec![vec![0, 1, 2], vec![2, 0, 1], vec![1, 1, 1], vec![0, 2, 0]],
            vec![vec![1.0; 3]; 4],
            vec![0.7; 4],
            0,
        );
        bank.reinforce_update(&episode, BaselineMode::MeanCenter, CommitRule::BestReplica)
            .unwrap();
        for (c, b) in bank.controllers.iter().zip(&before) {
            assert_eq!(&c.theta, b);
        }
    }

    #[test]
    fn single_sample_update_moves_along_log_prob_grad() {
        let mut bank = ControllerBank::new(1, 1.0, 0.05).unwrap();
        let episode = episode_from(vec![vec![2]], vec![vec![1.2]], vec![1.0], 0);
        bank.reinforce_update(&episode, BaselineMode::None, CommitRule::BestReplica)
            .unwrap();
        let g = log_prob_grad(&Tensor::zeros(vec![3]), 2).unwrap();
        for (t, gv) in bank.controllers[0].theta.data().iter().zip(g.data()) {
            assert_eq!(t.signum(), gv.signum());
            // First-step magnitude is the learning rate (bias-corrected).
            assert!((t.abs() - 0.05).abs() < 1e-6);
        }
        // Logit committed from the selected replica.
        assert!((bank.controllers[0].beta - 1.2).abs() < 1e-15);
    }

    #[test]
    fn committed_logits_move_by_one_action_step() {
        let mut bank = ControllerBank::new(5, 1.0, 0.05).unwrap();
        let mut rng = derive_rng(4, "test-drift", &[]);
        for it in 0..20 {
            let before = bank.betas();
            let proposals = bank.sample_actions(4, &mut rng).unwrap();
            let rewards: Vec<f64> = (0..4).map(|j| 0.1 * j as f64).collect();
            let episode = episode_from(
                proposals.iter().map(|p| p.actions.clone()).collect(),
                proposals.iter().map(|p| p.betas.clone()).collect(),
                rewards,
                3,
            );
            bank.reinforce_update(&episode, BaselineMode::MeanCenter, CommitRule::BestReplica)
                .unwrap();
            for (b, a) in before.iter().zip(bank.betas()) {
                let step = a - b;
                assert!(
                    ACTION_DELTAS.iter().any(|d| (step - d).abs() < 1e-12),
                    "iteration {it}: step {step}"
                );
            }
        }
    }

    #[test]
    fn missing_actions_are_a_state_error() {
        let mut bank = ControllerBank::new(2, 1.0, 0.05).unwrap();
        let episode = EpisodeRecord {
            iteration: 0,
            replicas: vec![ReplicaRecord {
                actions: None,
                betas: None,
                alpha: WeightVector::uniform(),
                reward: 0.5,
                failed: false,
            }],
            selected: 0,
            committed_betas: None,
            committed_alpha: WeightVector::uniform(),
        };
        assert!(matches!(
            bank.reinforce_update(&episode, BaselineMode::None, CommitRule::BestReplica),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn out_of_range_reward_is_a_state_error() {
        let mut bank = ControllerBank::new(1, 1.0, 0.05).unwrap();
        let episode = episode_from(vec![vec![0]], vec![vec![0.8]], vec![1.5], 0);
        assert!(matches!(
            bank.reinforce_update(&episode, BaselineMode::None, CommitRule::BestReplica),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn rigged_reward_concentrates_policy_within_200_updates() {
        // Reward 1 iff controller 0 plays the +0.2 action; p(+0.2) must
        // exceed 0.9 within 200 updates at learning rate 0.05.
        let mut bank = ControllerBank::new(5, 1.0, 0.05).unwrap();
        let mut rng = derive_rng(7, "test-rigged", &[]);
        let k = 10;
        let mut hit = None;
        for it in 0..200 {
            let proposals = bank.sample_actions(k, &mut rng).unwrap();
            let rewards: Vec<f64> = proposals
                .iter()
                .map(|p| f64::from(u8::from(p.actions[0] == 2)))
                .collect();
            let selected = rewards
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let episode = episode_from(
                proposals.iter().map(|p| p.actions.clone()).collect(),
                proposals.iter().map(|p| p.betas.clone()).collect(),
                rewards,
                selected,
            );
            bank.reinforce_update(&episode, BaselineMode::MeanCenter, CommitRule::BestReplica)
                .unwrap();
            if bank.controllers[0].action_probs()[2] > 0.9 {
                hit = Some(it);
                break;
            }
        }
        assert!(hit.is_some(), "policy never concentrated");
    }

    #[test]
    fn expected_delta_commit_steps_by_policy_mean() {
        let mut bank = ControllerBank::new(1, 1.0, 0.05).unwrap();
        bank.controllers[0].theta = Tensor::new(vec![3], vec![0.0, 0.0, 10.0]).unwrap();
        let probs = bank.controllers[0].action_probs();
        let expected: f64 = probs.iter().zip(ACTION_DELTAS).map(|(p, d)| p * d).sum();
        let episode = episode_from(vec![vec![1]], vec![vec![1.0]], vec![0.5], 0);
        // Theta will move, but beta must move by the *pre-update* policy's
        // expectation? No: commitment reads the post-update policy; just
        // check the committed beta equals 1 + expectation of some valid
        // distribution, i.e. lies within one action step.
        bank.reinforce_update(&episode, BaselineMode::None, CommitRule::ExpectedDelta)
            .unwrap();
        let moved = bank.controllers[0].beta - 1.0;
        assert!(moved.abs() <= 0.2 + 1e-12);
        assert!((moved - expected).abs() < 0.05, "moved {moved} vs {expected}");
    }

    proptest! {
        #[test]
        fn weights_always_lie_on_the_simplex(
            betas in proptest::array::uniform5(-30.0f64..30.0)
        ) {
            let w = weights_from_logits(&betas).unwrap();
            let sum: f64 = w.as_array().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(w.as_array().iter().all(|&a| a > 0.0));
        }

        #[test]
        fn weights_are_shift_invariant(
            betas in proptest::array::uniform5(-10.0f64..10.0),
            shift in -50.0f64..50.0
        ) {
            let w1 = weights_from_logits(&betas).unwrap();
            let shifted = betas.map(|b| b + shift);
            let w2 = weights_from_logits(&shifted).unwrap();
            for (a, b) in w1.as_array().iter().zip(w2.as_array()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn log_prob_grad_components_sum_to_zero(
            theta in proptest::array::uniform3(-8.0f64..8.0),
            action in 0usize..3
        ) {
            let t = Tensor::new(vec![3], theta.to_vec()).unwrap();
            let g = log_prob_grad(&t, action).unwrap();
            prop_assert!(g.data().iter().sum::<f64>().abs() < 1e-12);
        }
    }
}
