//! The outer optimization loop: per iteration, sample K task-weight
//! configurations, warm-start K replicas from the incumbent parameters,
//! train each for one epoch under its weights, reward each with validation
//! accuracy, adopt the best replica, and update the controllers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::{
    weights_from_logits, BaselineMode, CommitRule, ControllerBank, EpisodeRecord, Proposal,
    ReplicaRecord,
};
use crate::data::{Dataset, Splits};
use crate::error::{Error, Result};
use crate::metrics::accuracy;
use crate::model::{
    train_epoch, ModelConfig, MultimodalModel, PredictMode, SharingMode, WeightVector, NUM_TASKS,
};
use crate::optim::Optimizer;
use crate::seeding::derive_rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingMode {
    /// Controller-driven weights.
    Auto,
    /// Fixed uniform weights (0.2 per task); controllers never run.
    ManualUniform,
    /// Fixed caller-chosen weights; controllers never run.
    ManualFixed(WeightVector),
}

impl WeightingMode {
    pub fn label(&self) -> &'static str {
        match self {
            WeightingMode::Auto => "auto",
            WeightingMode::ManualUniform => "manual-uniform",
            WeightingMode::ManualFixed(_) => "manual-fixed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Replicas per outer iteration.
    pub k: usize,
    pub outer_iterations: usize,
    /// Initial value of every controller logit.
    pub beta_init: f64,
    pub model_lr: f64,
    pub controller_lr: f64,
    pub baseline: BaselineMode,
    pub commit_rule: CommitRule,
    pub seed: u64,
    pub sharing: SharingMode,
    pub weighting: WeightingMode,
    /// Lock every controller to the "hold" action; no controller updates.
    pub freeze_policy: bool,
    pub batch_size: usize,
    pub trunk_hidden: Vec<usize>,
    /// Prediction mode used for rewards and reported accuracy.
    pub reward_mode: PredictMode,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            k: 10,
            outer_iterations: 50,
            beta_init: 1.0,
            model_lr: 1e-4,
            controller_lr: 1e-3,
            baseline: BaselineMode::MeanCenter,
            commit_rule: CommitRule::BestReplica,
            seed: 0,
            sharing: SharingMode::Shared,
            weighting: WeightingMode::Auto,
            freeze_policy: false,
            batch_size: 32,
            trunk_hidden: vec![64, 32],
            reward_mode: PredictMode::FusionHead,
        }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        if self.outer_iterations < 1 {
            return Err(Error::InvalidArgument("outer_iterations must be >= 1".into()));
        }
        if !(self.model_lr > 0.0) || !(self.controller_lr > 0.0) {
            return Err(Error::InvalidArgument("learning rates must be positive".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !self.beta_init.is_finite() {
            return Err(Error::InvalidArgument("beta_init must be finite".into()));
        }
        Ok(())
    }
}

/// Per-iteration record of where the incumbent stands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    /// Validation accuracy of the selected replica (the reward it earned).
    pub val_acc: f64,
    /// Test accuracy of the incumbent after adoption.
    pub test_acc: f64,
    pub committed_alpha: WeightVector,
}

pub struct SearchResult {
    pub model: MultimodalModel,
    pub final_weights: WeightVector,
    /// Final controller logits (auto mode only).
    pub final_betas: Option<Vec<f64>>,
    pub episodes: Vec<EpisodeRecord>,
    pub history: Vec<IterationStats>,
}

/// Max-reward index; ties break toward the lowest replica index.
pub fn tie_break(rewards: &[f64]) -> Result<usize> {
    if rewards.is_empty() {
        return Err(Error::InvalidArgument("no rewards to select from".into()));
    }
    let mut best = 0;
    for (j, &r) in rewards.iter().enumerate().skip(1) {
        if r > rewards[best] {
            best = j;
        }
    }
    Ok(best)
}

struct ReplicaOutcome {
    model: MultimodalModel,
    optimizer: Optimizer,
    reward: f64,
    failed: bool,
}

fn train_replica(
    incumbent: &MultimodalModel,
    opt: &Optimizer,
    data: &Dataset,
    splits: &Splits,
    alpha: &WeightVector,
    cfg: &SearchConfig,
    t: usize,
    j: usize,
) -> Result<ReplicaOutcome> {
    let mut model = incumbent.clone();
    let mut optimizer = opt.clone();
    let mut rng = derive_rng(cfg.seed, "replica", &[t as u64, j as u64]);
    let trained = train_epoch(
        &mut model,
        &mut optimizer,
        data,
        &splits.train,
        alpha,
        cfg.batch_size,
        &mut rng,
    );
    let diverged = match trained {
        Ok(_) => !model.params().iter().all(|p| p.is_finite()),
        Err(Error::Numeric { .. }) => true,
        Err(other) => return Err(other),
    };
    if diverged {
        return Ok(ReplicaOutcome {
            model: incumbent.clone(),
            optimizer: opt.clone(),
            reward: 0.0,
            failed: true,
        });
    }
    let reward = accuracy(&model, data, &splits.validation, cfg.reward_mode)?;
    Ok(ReplicaOutcome {
        model,
        optimizer,
        reward,
        failed: false,
    })
}

/// Runs the full bi-level loop. Deterministic: every random stream is
/// derived from the config seed, independent of replica scheduling.
pub fn run_search(cfg: &SearchConfig, data: &Dataset, splits: &Splits) -> Result<SearchResult> {
    cfg.validate()?;
    if splits.train.is_empty() || splits.validation.is_empty() {
        return Err(Error::InvalidArgument(
            "search needs non-empty train and validation splits".into(),
        ));
    }
    for idx in [&splits.train, &splits.validation] {
        if !data.all_present(idx) {
            return Err(Error::InvalidArgument(
                "training requires every modality present on train/validation samples".into(),
            ));
        }
    }

    let model_cfg = ModelConfig {
        input_dims: data.dims(),
        trunk_hidden: cfg.trunk_hidden.clone(),
        sharing: cfg.sharing,
    };
    let mut init_rng = derive_rng(cfg.seed, "init", &[]);
    let mut model = MultimodalModel::init(model_cfg, &mut init_rng)?;
    let mut optimizer = Optimizer::adam(cfg.model_lr, &model.param_shapes())?;

    let auto = matches!(cfg.weighting, WeightingMode::Auto);
    let mut bank = auto
        .then(|| ControllerBank::for_tasks(cfg.beta_init, cfg.controller_lr))
        .transpose()?;
    let manual_alpha = match &cfg.weighting {
        WeightingMode::Auto => None,
        WeightingMode::ManualUniform => Some(WeightVector::uniform()),
        WeightingMode::ManualFixed(w) => Some(*w),
    };
    let mut ctrl_rng = derive_rng(cfg.seed, "controller", &[]);

    let mut episodes = Vec::with_capacity(cfg.outer_iterations);
    let mut history = Vec::with_capacity(cfg.outer_iterations);
    for t in 0..cfg.outer_iterations {
        // Candidate weights, one per replica.
        let proposals: Vec<(Option<Proposal>, WeightVector)> = match (&bank, &manual_alpha) {
            (Some(bank), _) => {
                let props = if cfg.freeze_policy {
                    bank.hold_proposals(cfg.k)?
                } else {
                    bank.sample_actions(cfg.k, &mut ctrl_rng)?
                };
                props
                    .into_iter()
                    .map(|p| {
                        let alpha = p.alpha()?;
                        Ok((Some(p), alpha))
                    })
                    .collect::<Result<_>>()?
            }
            (None, Some(alpha)) => (0..cfg.k).map(|_| (None, *alpha)).collect(),
            (None, None) => unreachable!("either controllers or fixed weights"),
        };

        let outcomes: Vec<ReplicaOutcome> = proposals
            .par_iter()
            .enumerate()
            .map(|(j, (_, alpha))| {
                train_replica(&model, &optimizer, data, splits, alpha, cfg, t, j)
            })
            .collect::<Result<_>>()?;

        let rewards: Vec<f64> = outcomes.iter().map(|o| o.reward).collect();
        let selected = tie_break(&rewards)?;

        let mut episode = EpisodeRecord {
            iteration: t,
            replicas: proposals
                .iter()
                .zip(&outcomes)
                .map(|((p, alpha), o)| ReplicaRecord {
                    actions: p.as_ref().map(|p| p.actions.clone()),
                    betas: p.as_ref().map(|p| p.betas.clone()),
                    alpha: *alpha,
                    reward: o.reward,
                    failed: o.failed,
                })
                .collect(),
            selected,
            committed_betas: None,
            committed_alpha: manual_alpha.unwrap_or(proposals[selected].1),
        };

        if !outcomes[selected].failed {
            let chosen = outcomes.into_iter().nth(selected).expect("in range");
            model = chosen.model;
            optimizer = chosen.optimizer;
        }

        if let Some(bank) = bank.as_mut() {
            if !cfg.freeze_policy {
                bank.reinforce_update(&episode, cfg.baseline, cfg.commit_rule)?;
            }
            let betas = bank.betas();
            let arr: [f64; NUM_TASKS] = betas.as_slice().try_into().expect("five tasks");
            episode.committed_alpha = weights_from_logits(&arr)?;
            episode.committed_betas = Some(betas);
        }

        let test_acc = if splits.test.is_empty() {
            0.0
        } else {
            accuracy(&model, data, &splits.test, cfg.reward_mode)?
        };
        history.push(IterationStats {
            iteration: t,
            val_acc: rewards[selected],
            test_acc,
            committed_alpha: episode.committed_alpha,
        });
        episodes.push(episode);
    }

    let (final_weights, final_betas) = match &bank {
        Some(bank) => {
            let betas = bank.betas();
            let arr: [f64; NUM_TASKS] = betas.as_slice().try_into().expect("five tasks");
            (weights_from_logits(&arr)?, Some(betas))
        }
        None => (manual_alpha.expect("manual mode"), None),
    };
    Ok(SearchResult {
        model,
        final_weights,
        final_betas,
        episodes,
        history,
    })
}
