//! The four-stream multimodal classifier: one trunk per stream (or one
//! shared trunk), a 2-class head per stream, and a fusion head over the
//! concatenated stream features. Five weighted cross-entropy losses — four
//! per-modality plus fusion — sum to the global training loss.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{softmax_cross_entropy, softmax_rows};
use crate::nn::{accumulate_stack_grads, Activation, DenseLayer, LayerStack, StackCache, StackGrads};
use crate::optim::Optimizer;
use crate::tensor::Tensor;

pub const NUM_MODALITIES: usize = 4;
pub const NUM_TASKS: usize = 5;

/// One imaging stream; here, one feature-vector channel per sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityId {
    B,
    Doppler,
    Swe,
    Se,
}

impl ModalityId {
    pub const ALL: [ModalityId; NUM_MODALITIES] =
        [ModalityId::B, ModalityId::Doppler, ModalityId::Swe, ModalityId::Se];

    pub fn index(self) -> usize {
        match self {
            ModalityId::B => 0,
            ModalityId::Doppler => 1,
            ModalityId::Swe => 2,
            ModalityId::Se => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModalityId::B => "b",
            ModalityId::Doppler => "doppler",
            ModalityId::Swe => "swe",
            ModalityId::Se => "se",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b" | "b-mode" => Ok(ModalityId::B),
            "doppler" | "d" => Ok(ModalityId::Doppler),
            "swe" => Ok(ModalityId::Swe),
            "se" => Ok(ModalityId::Se),
            other => Err(Error::InvalidArgument(format!("unknown modality `{other}`"))),
        }
    }
}

/// One loss head: a modality classifier or the fusion classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskId {
    B,
    Doppler,
    Swe,
    Se,
    Fusion,
}

impl TaskId {
    pub const ALL: [TaskId; NUM_TASKS] = [
        TaskId::B,
        TaskId::Doppler,
        TaskId::Swe,
        TaskId::Se,
        TaskId::Fusion,
    ];

    pub fn index(self) -> usize {
        match self {
            TaskId::B => 0,
            TaskId::Doppler => 1,
            TaskId::Swe => 2,
            TaskId::Se => 3,
            TaskId::Fusion => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskId::B => "b",
            TaskId::Doppler => "doppler",
            TaskId::Swe => "swe",
            TaskId::Se => "se",
            TaskId::Fusion => "fusion",
        }
    }

    pub fn modality(self) -> Option<ModalityId> {
        match self {
            TaskId::B => Some(ModalityId::B),
            TaskId::Doppler => Some(ModalityId::Doppler),
            TaskId::Swe => Some(ModalityId::Swe),
            TaskId::Se => Some(ModalityId::Se),
            TaskId::Fusion => None,
        }
    }
}

impl From<ModalityId> for TaskId {
    fn from(m: ModalityId) -> Self {
        TaskId::ALL[m.index()]
    }
}

const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct WeightsByTask {
    b: f64,
    doppler: f64,
    swe: f64,
    se: f64,
    fusion: f64,
}

/// A point on the 5-simplex: one nonnegative weight per task, summing to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightsByTask", into = "WeightsByTask")]
pub struct WeightVector {
    alpha: [f64; NUM_TASKS],
}

impl WeightVector {
    pub fn new(alpha: [f64; NUM_TASKS]) -> Result<Self> {
        if alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::Invariant(format!(
                "task weights must be finite and nonnegative: {alpha:?}"
            )));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Invariant(format!(
                "task weights must sum to 1 (got {sum})"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn uniform() -> Self {
        Self { alpha: [0.2; 5] }
    }

    pub fn one_hot(task: TaskId) -> Self {
        let mut alpha = [0.0; 5];
        alpha[task.index()] = 1.0;
        Self { alpha }
    }

    pub fn get(&self, task: TaskId) -> f64 {
        self.alpha[task.index()]
    }

    pub fn as_array(&self) -> &[f64; NUM_TASKS] {
        &self.alpha
    }
}

impl TryFrom<WeightsByTask> for WeightVector {
    type Error = Error;
    fn try_from(w: WeightsByTask) -> Result<Self> {
        WeightVector::new([w.b, w.doppler, w.swe, w.se, w.fusion])
    }
}

impl From<WeightVector> for WeightsByTask {
    fn from(w: WeightVector) -> Self {
        WeightsByTask {
            b: w.alpha[0],
            doppler: w.alpha[1],
            swe: w.alpha[2],
            se: w.alpha[3],
            fusion: w.alpha[4],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharingMode {
    /// All four branches read one trunk parameter store.
    Shared,
    /// Four independent trunks.
    Unshared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dims: [usize; NUM_MODALITIES],
    /// Hidden layer widths of the trunk; the last entry is the feature dim.
    pub trunk_hidden: Vec<usize>,
    pub sharing: SharingMode,
}

impl ModelConfig {
    pub fn new(input_dims: [usize; NUM_MODALITIES], sharing: SharingMode) -> Self {
        Self {
            input_dims,
            trunk_hidden: vec![64, 32],
            sharing,
        }
    }

    pub fn feature_dim(&self) -> usize {
        *self.trunk_hidden.last().expect("non-empty trunk")
    }

    fn validate(&self) -> Result<()> {
        if self.trunk_hidden.is_empty() {
            return Err(Error::InvalidArgument("trunk needs at least one layer".into()));
        }
        if self.input_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("modality dims must be >= 1".into()));
        }
        if self.sharing == SharingMode::Shared
            && self.input_dims.iter().any(|&d| d != self.input_dims[0])
        {
            return Err(Error::InvalidArgument(format!(
                "a shared trunk requires equal modality dims, got {:?}",
                self.input_dims
            )));
        }
        Ok(())
    }
}

/// A minibatch view: per-modality feature matrices, labels, and which
/// modalities are present (batch-wide).
#[derive(Clone, Debug)]
pub struct SampleBatch {
    pub features: [Tensor; NUM_MODALITIES],
    pub labels: Vec<u8>,
    pub presence: [bool; NUM_MODALITIES],
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.presence.iter().any(|&p| p) {
            return Err(Error::InvalidArgument("no modality present".into()));
        }
        for (m, feat) in self.features.iter().enumerate() {
            if self.presence[m] && feat.rows() != self.labels.len() {
                return Err(Error::Dimension(format!(
                    "modality {m}: {} rows vs {} labels",
                    feat.rows(),
                    self.labels.len()
                )));
            }
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictMode {
    /// Fusion head over all four streams (requires all modalities).
    FusionHead,
    /// The named branch alone.
    BranchHead(ModalityId),
    /// Mean of the present branches' logits.
    MeanBranchLogits,
}

/// Class probabilities and hard labels under the 0.5 cut-off
/// (probability ≥ 0.5 classifies as malignant).
#[derive(Clone, Debug)]
pub struct Prediction {
    pub prob_malignant: Vec<f64>,
    pub classes: Vec<u8>,
}

fn prediction_from_logits(logits: &Tensor) -> Prediction {
    let probs = softmax_rows(logits);
    let prob_malignant: Vec<f64> = (0..probs.rows()).map(|r| probs.row(r)[1]).collect();
    let classes = prob_malignant.iter().map(|&p| u8::from(p >= 0.5)).collect();
    Prediction {
        prob_malignant,
        classes,
    }
}

/// Forward-pass record: per-branch trunk caches and features, per-task
/// logits, and the caches needed to backpropagate.
pub struct ModelPass {
    trunk_caches: [StackCache; NUM_MODALITIES],
    branch_caches: [crate::nn::DenseCache; NUM_MODALITIES],
    fusion_cache: crate::nn::DenseCache,
    pub features: [Tensor; NUM_MODALITIES],
    pub branch_logits: [Tensor; NUM_MODALITIES],
    pub fusion_logits: Tensor,
}

impl ModelPass {
    pub fn task_logits(&self, task: TaskId) -> &Tensor {
        match task.modality() {
            Some(m) => &self.branch_logits[m.index()],
            None => &self.fusion_logits,
        }
    }
}

/// Per-task scalar losses and logit gradients for one batch.
pub struct TaskLosses {
    pub loss: [f64; NUM_TASKS],
    pub grad_logits: [Tensor; NUM_TASKS],
}

/// Σ_task α_task · loss_task. Gradient flows to each task scaled by its α.
pub fn global_loss(per_task: &[f64; NUM_TASKS], weights: &WeightVector) -> Result<f64> {
    // Revalidate: callers may have deserialized the vector from disk.
    WeightVector::new(*weights.as_array())?;
    let mut total = 0.0;
    for task in TaskId::ALL {
        total += weights.get(task) * per_task[task.index()];
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultimodalModel {
    config: ModelConfig,
    trunks: Vec<LayerStack>,
    branch_heads: Vec<DenseLayer>,
    fusion_head: DenseLayer,
}

impl MultimodalModel {
    pub fn init(config: ModelConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let feature_dim = config.feature_dim();
        let trunk_count = match config.sharing {
            SharingMode::Shared => 1,
            SharingMode::Unshared => NUM_MODALITIES,
        };
        let mut trunks = Vec::with_capacity(trunk_count);
        for t in 0..trunk_count {
            let in_dim = config.input_dims[if trunk_count == 1 { 0 } else { t }];
            let mut dims = vec![in_dim];
            dims.extend_from_slice(&config.trunk_hidden);
            trunks.push(LayerStack::init(&dims, Activation::ReLU, rng)?);
        }
        let branch_heads = (0..NUM_MODALITIES)
            .map(|_| DenseLayer::init(feature_dim, 2, Activation::Identity, rng))
            .collect();
        let fusion_head = DenseLayer::init(
            NUM_MODALITIES * feature_dim,
            2,
            Activation::Identity,
            rng,
        );
        Ok(Self {
            config,
            trunks,
            branch_heads,
            fusion_head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn sharing(&self) -> SharingMode {
        self.config.sharing
    }

    fn trunk_index(&self, m: ModalityId) -> usize {
        match self.config.sharing {
            SharingMode::Shared => 0,
            SharingMode::Unshared => m.index(),
        }
    }

    pub fn trunk(&self, m: ModalityId) -> &LayerStack {
        &self.trunks[self.trunk_index(m)]
    }

    /// Total parameters in the trunk portion (1 store when shared, 4 when
    /// not).
    pub fn trunk_param_count(&self) -> usize {
        self.trunks.iter().map(LayerStack::param_count).sum()
    }

    pub fn param_count(&self) -> usize {
        self.trunk_param_count()
            + self
                .branch_heads
                .iter()
                .map(DenseLayer::param_count)
                .sum::<usize>()
            + self.fusion_head.param_count()
    }

    /// Canonical parameter traversal order; gradients and optimizer state
    /// are aligned with it.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (t, trunk) in self.trunks.iter().enumerate() {
            for l in 0..trunk.layers.len() {
                names.push(format!("trunk{t}.layer{l}.weight"));
                names.push(format!("trunk{t}.layer{l}.bias"));
            }
        }
        for m in ModalityId::ALL {
            names.push(format!("head.{}.weight", m.name()));
            names.push(format!("head.{}.bias", m.name()));
        }
        names.push("fusion.weight".into());
        names.push("fusion.bias".into());
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for trunk in &self.trunks {
            for layer in &trunk.layers {
                out.push(&layer.weights);
                out.push(&layer.bias);
            }
        }
        for head in &self.branch_heads {
            out.push(&head.weights);
            out.push(&head.bias);
        }
        out.push(&self.fusion_head.weights);
        out.push(&self.fusion_head.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for trunk in &mut self.trunks {
            for layer in &mut trunk.layers {
                out.push(&mut layer.weights);
                out.push(&mut layer.bias);
            }
        }
        for head in &mut self.branch_heads {
            out.push(&mut head.weights);
            out.push(&mut head.bias);
        }
        out.push(&mut self.fusion_head.weights);
        out.push(&mut self.fusion_head.bias);
        out
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.params().iter().map(|p| p.shape().to_vec()).collect()
    }

    fn require_presence(&self, batch: &SampleBatch, needed: &[ModalityId]) -> Result<()> {
        for &m in needed {
            if !batch.presence[m.index()] {
                return Err(Error::InvalidArgument(format!(
                    "modality `{}` is required but missing",
                    m.name()
                )));
            }
        }
        Ok(())
    }

    /// Runs every branch and the fusion head. Training path: all four
    /// modalities must be present.
    pub fn forward_all(&self, batch: &SampleBatch) -> Result<ModelPass> {
        batch.validate()?;
        self.require_presence(batch, &ModalityId::ALL)?;
        let mut trunk_caches = Vec::with_capacity(NUM_MODALITIES);
        let mut branch_caches = Vec::with_capacity(NUM_MODALITIES);
        let mut features = Vec::with_capacity(NUM_MODALITIES);
        let mut branch_logits = Vec::with_capacity(NUM_MODALITIES);
        for m in ModalityId::ALL {
            let trunk = self.trunk(m);
            let (feat, tcache) = trunk.forward(&batch.features[m.index()])?;
            let (logits, hcache) = self.branch_heads[m.index()].forward(&feat)?;
            trunk_caches.push(tcache);
            branch_caches.push(hcache);
            features.push(feat);
            branch_logits.push(logits);
        }
        let refs: Vec<&Tensor> = features.iter().collect();
        let fusion_input = Tensor::concat_cols(&refs)?;
        let (fusion_logits, fusion_cache) = self.fusion_head.forward(&fusion_input)?;
        let into_array = |v: Vec<Tensor>| -> [Tensor; NUM_MODALITIES] {
            v.try_into().expect("exactly four modalities")
        };
        Ok(ModelPass {
            trunk_caches: trunk_caches.try_into().map_err(|_| ()).expect("four"),
            branch_caches: branch_caches.try_into().map_err(|_| ()).expect("four"),
            fusion_cache,
            features: into_array(features),
            branch_logits: into_array(branch_logits),
            fusion_logits,
        })
    }

    /// Cross-entropy per task plus logit gradients, from one forward pass.
    pub fn task_losses(&self, pass: &ModelPass, labels: &[u8]) -> Result<TaskLosses> {
        let mut loss = [0.0; NUM_TASKS];
        let mut grads: Vec<Tensor> = Vec::with_capacity(NUM_TASKS);
        for task in TaskId::ALL {
            let (l, g) = softmax_cross_entropy(pass.task_logits(task), labels)?;
            loss[task.index()] = l;
            grads.push(g);
        }
        Ok(TaskLosses {
            loss,
            grad_logits: grads.try_into().expect("five tasks"),
        })
    }

    /// Backpropagates the α-weighted sum of task losses; returns gradients
    /// in canonical parameter order. Each task's contribution is scaled by
    /// its own weight, so a zero-weighted task contributes exactly zero.
    pub fn backward_weighted(
        &self,
        pass: &ModelPass,
        losses: &TaskLosses,
        weights: &WeightVector,
    ) -> Result<Vec<Tensor>> {
        let feature_dim = self.config.feature_dim();

        // Fusion path first: its input gradient splits into one block per
        // branch feature.
        let alpha_fusion = weights.get(TaskId::Fusion);
        let fusion_upstream = losses.grad_logits[TaskId::Fusion.index()].scale(alpha_fusion);
        let (fusion_grads, fusion_input_grad) =
            self.fusion_head.backward(&pass.fusion_cache, &fusion_upstream)?;
        let fusion_feat_grads = fusion_input_grad.split_cols(&[feature_dim; NUM_MODALITIES])?;

        let mut trunk_grads: Vec<StackGrads> =
            self.trunks.iter().map(LayerStack::zero_grads).collect();
        let mut head_grads = Vec::with_capacity(NUM_MODALITIES);
        for m in ModalityId::ALL {
            let mi = m.index();
            let alpha = weights.get(TaskId::from(m));
            let upstream = losses.grad_logits[mi].scale(alpha);
            let (hg, mut feat_grad) =
                self.branch_heads[mi].backward(&pass.branch_caches[mi], &upstream)?;
            head_grads.push(hg);
            feat_grad.add_assign(&fusion_feat_grads[mi])?;
            let (tg, _) = self.trunk(m).backward(&pass.trunk_caches[mi], &feat_grad)?;
            accumulate_stack_grads(&mut trunk_grads[self.trunk_index(m)], &tg)?;
        }

        let mut flat = Vec::new();
        for tg in trunk_grads {
            for lg in tg {
                flat.push(lg.weights);
                flat.push(lg.bias);
            }
        }
        for hg in head_grads {
            flat.push(hg.weights);
            flat.push(hg.bias);
        }
        flat.push(fusion_grads.weights);
        flat.push(fusion_grads.bias);
        debug_assert_eq!(flat.len(), self.param_names().len());
        Ok(flat)
    }

    /// Class probabilities for a batch under the given prediction mode.
    pub fn predict(&self, batch: &SampleBatch, mode: PredictMode) -> Result<Prediction> {
        batch.validate()?;
        match mode {
            PredictMode::FusionHead => {
                self.require_presence(batch, &ModalityId::ALL)?;
                let mut features = Vec::with_capacity(NUM_MODALITIES);
                for m in ModalityId::ALL {
                    let (feat, _) = self.trunk(m).forward(&batch.features[m.index()])?;
                    features.push(feat);
                }
                let refs: Vec<&Tensor> = features.iter().collect();
                let (logits, _) = self.fusion_head.forward(&Tensor::concat_cols(&refs)?)?;
                Ok(prediction_from_logits(&logits))
            }
            PredictMode::BranchHead(m) => {
                self.require_presence(batch, &[m])?;
                let (feat, _) = self.trunk(m).forward(&batch.features[m.index()])?;
                let (logits, _) = self.branch_heads[m.index()].forward(&feat)?;
                Ok(prediction_from_logits(&logits))
            }
            PredictMode::MeanBranchLogits => {
                let present: Vec<ModalityId> = ModalityId::ALL
                    .into_iter()
                    .filter(|m| batch.presence[m.index()])
                    .collect();
                let mut mean = Tensor::zeros(vec![batch.len(), 2]);
                for &m in &present {
                    let (feat, _) = self.trunk(m).forward(&batch.features[m.index()])?;
                    let (logits, _) = self.branch_heads[m.index()].forward(&feat)?;
                    mean.add_scaled(&logits, 1.0 / present.len() as f64)?;
                }
                Ok(prediction_from_logits(&mean))
            }
        }
    }
}

/// One pass over shuffled minibatches of the training split; parameters
/// updated on the gradient of the weighted global loss. Returns the mean
/// global loss over samples.
pub fn train_epoch(
    model: &mut MultimodalModel,
    optimizer: &mut Optimizer,
    data: &Dataset,
    train_idx: &[usize],
    weights: &WeightVector,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
    }
    if train_idx.is_empty() {
        return Err(Error::InvalidArgument("empty training split".into()));
    }
    let mut order = train_idx.to_vec();
    order.shuffle(rng);
    let names = model.param_names();
    let mut total = 0.0;
    for chunk in order.chunks(batch_size) {
        let batch = data.batch(chunk)?;
        let pass = model.forward_all(&batch)?;
        let losses = model.task_losses(&pass, &batch.labels)?;
        let loss = global_loss(&losses.loss, weights)?;
        if !loss.is_finite() {
            return Err(Error::numeric("global_loss", format!("loss = {loss}")));
        }
        total += loss * chunk.len() as f64;
        let grads = model.backward_weighted(&pass, &losses, weights)?;
        let mut params = model.params_mut();
        let mut named: Vec<(&str, &mut Tensor)> = names
            .iter()
            .map(String::as_str)
            .zip(params.drain(..))
            .collect();
        optimizer.step(&mut named, &grads)?;
    }
    Ok(total / order.len() as f64)
}
