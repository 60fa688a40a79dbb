//! Parameter checkpoints: a structured-text (JSON) dump of named tensors.
//! Floats are written in shortest round-trip form, so save → load is
//! bit-exact. A manifest describes how to rebuild the model the tensors
//! belong to.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, MultimodalModel, SharingMode};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &MultimodalModel) -> Self {
        let tensors = model
            .param_names()
            .into_iter()
            .zip(model.params())
            .map(|(name, t)| NamedTensor {
                name,
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect();
        Self { tensors }
    }

    /// Writes every named tensor into a model with the same architecture.
    /// Every checkpoint tensor must land somewhere and every parameter must
    /// be covered.
    pub fn apply_to(&self, model: &mut MultimodalModel) -> Result<()> {
        let names = model.param_names();
        let mut by_name: BTreeMap<&str, &NamedTensor> = BTreeMap::new();
        for t in &self.tensors {
            if by_name.insert(t.name.as_str(), t).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate tensor `{}` in checkpoint",
                    t.name
                )));
            }
        }
        if by_name.len() != names.len() {
            return Err(Error::InvalidArgument(format!(
                "checkpoint has {} tensors, model expects {}",
                by_name.len(),
                names.len()
            )));
        }
        for (name, param) in names.iter().zip(model.params_mut()) {
            let stored = by_name.get(name.as_str()).ok_or_else(|| {
                Error::InvalidArgument(format!("checkpoint is missing tensor `{name}`"))
            })?;
            let tensor = Tensor::new(stored.shape.clone(), stored.data.clone())?;
            if tensor.shape() != param.shape() {
                return Err(Error::Dimension(format!(
                    "tensor `{name}`: checkpoint {:?} vs model {:?}",
                    tensor.shape(),
                    param.shape()
                )));
            }
            *param = tensor;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

/// Enough to rebuild the model shell a checkpoint fills: architecture,
/// sharing mode, and the run parameters that shaped it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub sharing: SharingMode,
    pub input_dims: [usize; 4],
    pub trunk_hidden: Vec<usize>,
    pub feature_dim: usize,
    pub seed: u64,
    /// Weighting scheme the model was trained under, e.g. "auto" or
    /// "manual-uniform".
    pub weighting: String,
    pub k: usize,
    pub outer_iterations: usize,
}

impl ModelManifest {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            input_dims: self.input_dims,
            trunk_hidden: self.trunk_hidden.clone(),
            sharing: self.sharing,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, SharingMode};
    use crate::seeding::derive_rng;

    fn model(seed: u64) -> MultimodalModel {
        let mut rng = derive_rng(seed, "ckpt-test", &[]);
        MultimodalModel::init(
            ModelConfig {
                input_dims: [3; 4],
                trunk_hidden: vec![5, 4],
                sharing: SharingMode::Shared,
            },
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let src = model(1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        Checkpoint::from_model(&src).save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let mut dst = model(2);
        assert_ne!(src, dst);
        loaded.apply_to(&mut dst).unwrap();
        assert_eq!(src, dst);
        // Same bytes when re-saved.
        let path2 = dir.path().join("ckpt2.json");
        Checkpoint::from_model(&dst).save(&path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn incomplete_checkpoint_is_rejected() {
        let src = model(3);
        let mut ckpt = Checkpoint::from_model(&src);
        ckpt.tensors.pop();
        let mut dst = model(4);
        assert!(ckpt.apply_to(&mut dst).is_err());
    }

    #[test]
    fn wrong_architecture_is_rejected() {
        let src = model(5);
        let ckpt = Checkpoint::from_model(&src);
        let mut rng = derive_rng(6, "ckpt-test", &[]);
        let mut other = MultimodalModel::init(
            ModelConfig {
                input_dims: [3; 4],
                trunk_hidden: vec![6, 4],
                sharing: SharingMode::Shared,
            },
            &mut rng,
        )
        .unwrap();
        assert!(ckpt.apply_to(&mut other).is_err());
    }
}
