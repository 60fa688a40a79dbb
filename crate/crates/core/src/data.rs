//! Synthetic multimodal datasets with controllable per-modality
//! informativeness, patient-level splits, and CSV ingestion.
//!
//! Per sample, each modality's feature vector is Gaussian noise plus a
//! class-dependent shift of size `s_mod` along a fixed unit direction. With
//! no cross-modality correlation and an even label prior, the optimal
//! single-modality accuracy has the closed form `Φ(s_mod)` — the oracle the
//! synthetic experiments are checked against. A correlation knob mixes a
//! shared latent into every modality's signal component so redundancy
//! between streams can be dialed in.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{ModalityId, SampleBatch, NUM_MODALITIES};
use crate::seeding::derive_rng;
use crate::tensor::Tensor;

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.6, 0.2, 0.2];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    /// Feature dimension per modality, order (b, doppler, swe, se).
    pub dims: [usize; NUM_MODALITIES],
    /// Class-mean separation in noise units per modality.
    pub informativeness: [f64; NUM_MODALITIES],
    /// P(label = 1).
    pub label_prior: f64,
    /// Correlation of the shared latent across modality signal components.
    pub correlation: f64,
    /// Samples drawn per synthetic patient.
    pub sets_per_patient: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Profile whose single-modality optima rank swe > se > {b, doppler}.
    fn default() -> Self {
        Self {
            n_samples: 2000,
            dims: [16; NUM_MODALITIES],
            informativeness: [0.9, 0.9, 1.4, 1.2],
            label_prior: 0.5,
            correlation: 0.0,
            sets_per_patient: 2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidArgument("n_samples must be >= 1".into()));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument("modality dims must be >= 1".into()));
        }
        if self.informativeness.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::InvalidArgument(
                "informativeness must be nonnegative".into(),
            ));
        }
        if !(self.label_prior > 0.0 && self.label_prior < 1.0) {
            return Err(Error::InvalidArgument(
                "label prior must lie strictly inside (0, 1)".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.correlation) {
            return Err(Error::InvalidArgument(
                "correlation must lie in [0, 1]".into(),
            ));
        }
        if self.sets_per_patient == 0 {
            return Err(Error::InvalidArgument("sets_per_patient must be >= 1".into()));
        }
        Ok(())
    }
}

/// Optimal accuracy of a single modality with separation `s`, even prior,
/// and no cross-modality correlation: `Φ(s)`.
pub fn single_modality_bayes_accuracy(s: f64) -> f64 {
    Normal::standard().cdf(s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dims: [usize; NUM_MODALITIES],
    features: [Tensor; NUM_MODALITIES], // [n × d_m]; zero rows where missing
    labels: Vec<u8>,
    presence: Vec<[bool; NUM_MODALITIES]>,
    patients: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> [usize; NUM_MODALITIES] {
        self.dims
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn patients(&self) -> &[String] {
        &self.patients
    }

    pub fn presence(&self) -> &[[bool; NUM_MODALITIES]] {
        &self.presence
    }

    /// True iff every selected sample has every modality.
    pub fn all_present(&self, idx: &[usize]) -> bool {
        idx.iter().all(|&i| self.presence[i].iter().all(|&p| p))
    }

    /// Gathers samples into a batch. A modality counts as present only if
    /// it is present for every selected sample.
    pub fn batch(&self, idx: &[usize]) -> Result<SampleBatch> {
        if idx.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidArgument(format!(
                "sample index {bad} out of range {}",
                self.len()
            )));
        }
        let mut presence = [true; NUM_MODALITIES];
        for &i in idx {
            for (m, p) in presence.iter_mut().enumerate() {
                *p &= self.presence[i][m];
            }
        }
        let mut features = Vec::with_capacity(NUM_MODALITIES);
        for m in 0..NUM_MODALITIES {
            features.push(self.features[m].gather_rows(idx)?);
        }
        let batch = SampleBatch {
            features: features.try_into().map_err(|_| ()).expect("four"),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            presence,
        };
        batch.validate()?;
        Ok(batch)
    }

    /// Patient ids in first-appearance order.
    pub fn unique_patients(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for p in &self.patients {
            if seen.insert(p.clone()) {
                out.push(p.clone());
            }
        }
        out
    }
}

/// Draws a dataset from the generator config. Same config, same bytes.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = derive_rng(config.seed, "synth", &[]);
    // Fixed unit direction per modality.
    let mut directions: Vec<Vec<f64>> = Vec::with_capacity(NUM_MODALITIES);
    for &d in &config.dims {
        let mut u: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        u.iter_mut().for_each(|v| *v /= norm);
        directions.push(u);
    }

    let n = config.n_samples;
    let mut features: Vec<Tensor> = config
        .dims
        .iter()
        .map(|&d| Tensor::zeros(vec![n, d]))
        .collect();
    let mut labels = Vec::with_capacity(n);
    let mut patients = Vec::with_capacity(n);
    let rho = config.correlation;
    let (ind_scale, shared_scale) = ((1.0 - rho).sqrt(), rho.sqrt());
    let mut patient_label = 0u8;
    for i in 0..n {
        let patient = i / config.sets_per_patient;
        if i % config.sets_per_patient == 0 {
            patient_label = u8::from(rng.random::<f64>() < config.label_prior);
        }
        labels.push(patient_label);
        patients.push(format!("p{patient:05}"));
        let sign = 2.0 * f64::from(patient_label) - 1.0;
        let shared: f64 = rng.sample(StandardNormal);
        for m in 0..NUM_MODALITIES {
            let d = config.dims[m];
            let u = &directions[m];
            let mut z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let along: f64 = z.iter().zip(u).map(|(zi, ui)| zi * ui).sum();
            // Replace the independent noise along the signal direction with
            // a (1−ρ, ρ) mix of itself and the shared latent; orthogonal
            // noise is untouched.
            let signal = sign * config.informativeness[m];
            let adjust = signal + ind_scale * along + shared_scale * shared - along;
            for (zi, ui) in z.iter_mut().zip(u) {
                *zi += adjust * ui;
            }
            let row = &mut features[m].data_mut()[i * d..(i + 1) * d];
            row.copy_from_slice(&z);
        }
    }
    Ok(Dataset {
        dims: config.dims,
        features: features.try_into().map_err(|_| ()).expect("four"),
        labels,
        presence: vec![[true; NUM_MODALITIES]; n],
        patients,
    })
}

fn validate_fractions(fractions: &[f64; 3]) -> Result<()> {
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return Err(Error::InvalidArgument(format!(
            "split fractions must lie in [0, 1]: {fractions:?}"
        )));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must sum to 1 (got {sum})"
        )));
    }
    Ok(())
}

/// Shuffles patient ids and assigns contiguous blocks to train/validation/
/// test, so no patient ever straddles two splits. Counts are rounded to
/// within one patient of the requested fractions.
pub fn split_by_patient(dataset: &Dataset, fractions: &[f64; 3], seed: u64) -> Result<Splits> {
    validate_fractions(fractions)?;
    let mut patients = dataset.unique_patients();
    let wanted = fractions.iter().filter(|&&f| f > 0.0).count();
    if patients.len() < wanted {
        return Err(Error::InvalidArgument(format!(
            "{} patients cannot fill {} splits",
            patients.len(),
            wanted
        )));
    }
    let mut rng = derive_rng(seed, "split", &[]);
    patients.shuffle(&mut rng);
    let p = patients.len();
    let n_train = (fractions[0] * p as f64).round() as usize;
    let mut n_val = (fractions[1] * p as f64).round() as usize;
    if n_train + n_val > p {
        n_val = p - n_train;
    }
    let train_set: BTreeSet<&String> = patients[..n_train].iter().collect();
    let val_set: BTreeSet<&String> = patients[n_train..n_train + n_val].iter().collect();
    let mut splits = Splits {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
    };
    for (i, pid) in dataset.patients.iter().enumerate() {
        if train_set.contains(pid) {
            splits.train.push(i);
        } else if val_set.contains(pid) {
            splits.validation.push(i);
        } else {
            splits.test.push(i);
        }
    }
    Ok(splits)
}

/// Column layout of the dataset CSV: `patient_id,label`, then one block of
/// feature columns per modality in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub dims: [usize; NUM_MODALITIES],
}

impl CsvSchema {
    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["patient_id".to_string(), "label".to_string()];
        for m in ModalityId::ALL {
            for j in 0..self.dims[m.index()] {
                cols.push(format!("{}_{j}", m.name()));
            }
        }
        cols
    }

    /// Reads just the header row of a dataset CSV and reconstructs the
    /// schema from it.
    pub fn sniff(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)
            .map_err(|e| Error::Data { line: 1, msg: e.to_string() })?;
        let headers = reader
            .headers()
            .map_err(|e| Error::Data { line: 1, msg: e.to_string() })?;
        let cols: Vec<&str> = headers.iter().collect();
        if cols.len() < 2 || cols[0] != "patient_id" || cols[1] != "label" {
            return Err(Error::Data {
                line: 1,
                msg: "header must start with patient_id,label".into(),
            });
        }
        let mut dims = [0usize; NUM_MODALITIES];
        let mut at = 2;
        for m in ModalityId::ALL {
            let prefix = format!("{}_", m.name());
            while at < cols.len() && cols[at] == format!("{prefix}{}", dims[m.index()]) {
                dims[m.index()] += 1;
                at += 1;
            }
            if dims[m.index()] == 0 {
                return Err(Error::Data {
                    line: 1,
                    msg: format!("no feature columns for modality `{}`", m.name()),
                });
            }
        }
        if at != cols.len() {
            return Err(Error::Data {
                line: 1,
                msg: format!("unexpected column `{}`", cols[at]),
            });
        }
        Ok(Self { dims })
    }
}

/// Writes the dataset in the schema above. Floats use the shortest
/// round-trip decimal form, so load-after-save is exact. A modality absent
/// from a sample is written as empty cells.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let schema = CsvSchema { dims: dataset.dims };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", schema.header().join(","))?;
    for i in 0..dataset.len() {
        let mut row = vec![dataset.patients[i].clone(), dataset.labels[i].to_string()];
        for m in 0..NUM_MODALITIES {
            let d = dataset.dims[m];
            if dataset.presence[i][m] {
                row.extend(dataset.features[m].row(i).iter().map(|v| v.to_string()));
            } else {
                row.extend(std::iter::repeat_n(String::new(), d));
            }
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Loads a dataset CSV against an expected schema. Malformed rows are
/// reported with their line number; a modality's cells must be all filled
/// or all empty per row.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Dataset> {
    let found = CsvSchema::sniff(path)?;
    if &found != schema {
        return Err(Error::Data {
            line: 1,
            msg: format!(
                "header dims {:?} do not match expected {:?}",
                found.dims, schema.dims
            ),
        });
    }
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data { line: 1, msg: e.to_string() })?;
    let mut rows: Vec<(String, u8, Vec<Option<Vec<f64>>>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data {
            line: e.position().map_or(0, csv::Position::line),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        let expect_cols = 2 + schema.dims.iter().sum::<usize>();
        if record.len() != expect_cols {
            return Err(Error::Data {
                line,
                msg: format!("expected {expect_cols} cells, got {}", record.len()),
            });
        }
        let patient = record[0].to_string();
        if patient.is_empty() {
            return Err(Error::Data {
                line,
                msg: "empty patient_id".into(),
            });
        }
        let label: u8 = match &record[1] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Data {
                    line,
                    msg: format!("label must be 0 or 1, got `{other}`"),
                })
            }
        };
        let mut at = 2;
        let mut feats: Vec<Option<Vec<f64>>> = Vec::with_capacity(NUM_MODALITIES);
        for m in ModalityId::ALL {
            let d = schema.dims[m.index()];
            let cells: Vec<&str> = (0..d).map(|j| &record[at + j]).collect();
            at += d;
            if cells.iter().all(|c| c.is_empty()) {
                feats.push(None);
                continue;
            }
            let mut values = Vec::with_capacity(d);
            for (j, cell) in cells.iter().enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Data {
                    line,
                    msg: format!(
                        "non-numeric value `{cell}` in column {}_{j}",
                        m.name()
                    ),
                })?;
                values.push(v);
            }
            feats.push(Some(values));
        }
        if feats.iter().all(Option::is_none) {
            return Err(Error::Data {
                line,
                msg: "all modalities missing".into(),
            });
        }
        rows.push((patient, label, feats));
    }
    if rows.is_empty() {
        return Err(Error::Data {
            line: 1,
            msg: "dataset has no rows".into(),
        });
    }
    let n = rows.len();
    let mut features: Vec<Tensor> = schema
        .dims
        .iter()
        .map(|&d| Tensor::zeros(vec![n, d]))
        .collect();
    let mut labels = Vec::with_capacity(n);
    let mut presence = Vec::with_capacity(n);
    let mut patients = Vec::with_capacity(n);
    for (i, (patient, label, feats)) in rows.into_iter().enumerate() {
        labels.push(label);
        patients.push(patient);
        let mut pres = [false; NUM_MODALITIES];
        for (m, feat) in feats.into_iter().enumerate() {
            if let Some(values) = feat {
                pres[m] = true;
                let d = schema.dims[m];
                features[m].data_mut()[i * d..(i + 1) * d].copy_from_slice(&values);
            }
        }
        presence.push(pres);
    }
    Ok(Dataset {
        dims: schema.dims,
        features: features.try_into().map_err(|_| ()).expect("four"),
        labels,
        presence,
        patients,
    })
}

/// Self-describing record written next to a generated dataset: the exact
/// generator config, the per-modality single-stream optima, and a checksum
/// of the CSV bytes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub config: SynthConfig,
    pub n_samples: usize,
    pub n_patients: usize,
    /// Φ(s_mod) per modality (b, doppler, swe, se); exact for ρ = 0.
    pub single_modality_bayes_acc: [f64; NUM_MODALITIES],
    pub csv_sha256: String,
}

pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

impl DatasetManifest {
    pub fn build(config: &SynthConfig, dataset: &Dataset, csv_path: &Path) -> Result<Self> {
        Ok(Self {
            config: config.clone(),
            n_samples: dataset.len(),
            n_patients: dataset.unique_patients().len(),
            single_modality_bayes_acc: config
                .informativeness
                .map(single_modality_bayes_accuracy),
            csv_sha256: sha256_hex(csv_path)?,
        })
    }
}
