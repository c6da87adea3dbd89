//! Membrane records, train/test splitting and augmentation.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemio::{ChemError, Molecule, ModeSet};
use crate::featurize::{encode_with, AtomScalar, Conditions, FeatureError, FEATURE_DIMS};
use crate::rng::{pair_stream, RngStream};
use crate::vibration::{perturb, perturb_isotropic, VibrationConfig, VibrationError};

mod csvio;
pub mod synth;

pub use csvio::{load_csv, save_csv};
pub use synth::{ground_truth, synth_generate, GroundTruth};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least {need} records, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("augmentation factor must be at least 1")]
    ZeroFactor,
    #[error("duplicate record id '{0}'")]
    DuplicateId(String),
    #[error("record '{id}': {message}")]
    InvalidRecord { id: String, message: String },
    #[error("{0} datasets cannot be augmented")]
    NotAugmentable(Provenance),
    #[error("record '{id}' has no mode set and isotropic fallback is disabled")]
    MissingModes { id: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}, row {row}: {message}")]
    Row { path: PathBuf, row: usize, message: String },
    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },
    #[error(transparent)]
    Vibration(#[from] VibrationError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Chem(#[from] ChemError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Raw,
    Augmented,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Raw => "raw",
            Provenance::Augmented => "augmented",
            Provenance::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "raw" => Some(Provenance::Raw),
            "augmented" => Some(Provenance::Augmented),
            "synthetic" => Some(Provenance::Synthetic),
            _ => None,
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Rejection,
    Flux,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Rejection, Target::Flux];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Rejection => "rejection",
            Target::Flux => "flux",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "rejection" => Some(Target::Rejection),
            "flux" => Some(Target::Flux),
            _ => None,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mode sets are shared between a record and its augmented copies.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneRecord {
    pub id: String,
    pub conditions: Conditions,
    pub monomer_a: Molecule,
    pub monomer_b: Molecule,
    pub modes_a: Option<Arc<ModeSet>>,
    pub modes_b: Option<Arc<ModeSet>>,
    pub rejection: f64,
    /// L·m⁻²·h⁻¹, normalized in the synthetic benchmark
    pub flux: f64,
}

impl MembraneRecord {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |message: String| DatasetError::InvalidRecord {
            id: self.id.clone(),
            message,
        };
        if !(0.0..=1.0).contains(&self.rejection) {
            return Err(bad(format!("rejection out of [0,1]: {}", self.rejection)));
        }
        if !(self.flux >= 0.0 && self.flux.is_finite()) {
            return Err(bad(format!("flux must be nonnegative, got {}", self.flux)));
        }
        self.conditions.validate().map_err(|e| bad(e.to_string()))?;
        for (m, s) in [(&self.monomer_a, &self.modes_a), (&self.monomer_b, &self.modes_b)] {
            if let Some(s) = s {
                if let Some(n) = s.atom_count() {
                    if n != m.len() {
                        return Err(bad(format!(
                            "mode set for '{}' covers {n} atoms but the molecule has {}",
                            m.name,
                            m.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn label(&self, target: Target) -> f64 {
        match target {
            Target::Rejection => self.rejection,
            Target::Flux => self.flux,
        }
    }

    pub fn has_modes(&self) -> bool {
        self.modes_a.is_some() && self.modes_b.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<MembraneRecord>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(records: Vec<MembraneRecord>, provenance: Provenance) -> Result<Self, DatasetError> {
        let ds = Dataset { records, provenance };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateId(r.id.clone()));
            }
            r.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self, target: Target) -> Vec<f64> {
        self.records.iter().map(|r| r.label(target)).collect()
    }

    /// Row-major `len × 444` descriptor matrix.
    pub fn features(&self, scalar: AtomScalar) -> Result<ndarray::Array2<f64>, DatasetError> {
        let mut out = ndarray::Array2::zeros((self.len(), FEATURE_DIMS));
        for (mut row, r) in out.rows_mut().into_iter().zip(&self.records) {
            let v = encode_with(&r.conditions, &r.monomer_a, &r.monomer_b, scalar)?;
            row.assign(&ndarray::ArrayView1::from(v.as_slice()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

impl SplitSpec {
    /// Training-set size for `n` records: `round(n·f)` kept within `[1, n−1]`.
    pub fn train_size(&self, n: usize) -> usize {
        let k = (n as f64 * self.train_fraction).round() as usize;
        k.clamp(1, n.saturating_sub(1).max(1))
    }
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DatasetError> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(DatasetError::InvalidRecord {
            id: "<split>".into(),
            message: format!("train_fraction must lie in (0, 1), got {}", spec.train_fraction),
        });
    }
    if ds.len() < 2 {
        return Err(DatasetError::TooFew { need: 2, got: ds.len() });
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    RngStream::for_purpose(spec.seed, "split", 0).shuffle(&mut order);
    let k = spec.train_size(ds.len());
    let pick = |idx: &[usize]| Dataset {
        records: idx.iter().map(|&i| ds.records[i].clone()).collect(),
        provenance: ds.provenance,
    };
    Ok((pick(&order[..k]), pick(&order[k..])))
}

/// Perturbed geometries for copy `copy` (≥ 1) of record `index`.
pub fn perturbed_pair(
    record: &MembraneRecord,
    index: usize,
    copy: usize,
    cfg: &VibrationConfig,
    seed: u64,
) -> Result<(Molecule, Molecule), VibrationError> {
    let mut rng = RngStream::for_purpose(seed, "augment", pair_stream(index, copy));
    let mut one = |m: &Molecule, s: &Option<Arc<ModeSet>>| match s {
        Some(s) => perturb(m, s, cfg, &mut rng),
        None => perturb_isotropic(m, cfg, &mut rng),
    };
    let a = one(&record.monomer_a, &record.modes_a)?;
    let b = one(&record.monomer_b, &record.modes_b)?;
    Ok((a, b))
}

/// Keeps every record and appends `factor − 1` perturbed copies right after it.
/// Records without mode sets get isotropic jitter.
pub fn augment(train: &Dataset, factor: usize, cfg: &VibrationConfig, seed: u64) -> Result<Dataset, DatasetError> {
    if factor == 0 {
        return Err(DatasetError::ZeroFactor);
    }
    if train.provenance == Provenance::Augmented {
        return Err(DatasetError::NotAugmentable(train.provenance));
    }
    cfg.validate()?;
    let blocks: Vec<Vec<MembraneRecord>> = train
        .records
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let mut out = Vec::with_capacity(factor);
            out.push(r.clone());
            for c in 1..factor {
                let (a, b) = perturbed_pair(r, i, c, cfg, seed)?;
                out.push(MembraneRecord {
                    id: format!("{}.v{c}", r.id),
                    monomer_a: a,
                    monomer_b: b,
                    ..r.clone()
                });
            }
            Ok(out)
        })
        .collect::<Result<_, VibrationError>>()?;
    Ok(Dataset {
        records: blocks.into_iter().flatten().collect(),
        provenance: Provenance::Augmented,
    })
}

/// Descriptor matrix and labels of `augment(train, factor, cfg, seed)` built
/// without materializing the intermediate records.
pub fn augmented_features(
    train: &Dataset,
    factor: usize,
    cfg: &VibrationConfig,
    seed: u64,
    scalar: AtomScalar,
) -> Result<(ndarray::Array2<f64>, Vec<usize>), DatasetError> {
    if factor == 0 {
        return Err(DatasetError::ZeroFactor);
    }
    if train.provenance == Provenance::Augmented {
        return Err(DatasetError::NotAugmentable(train.provenance));
    }
    cfg.validate()?;
    let n = train.len() * factor;
    let mut x = ndarray::Array2::zeros((n, FEATURE_DIMS));
    x.axis_chunks_iter_mut(ndarray::Axis(0), factor)
        .into_par_iter()
        .zip(train.records.par_iter().enumerate())
        .try_for_each(|(mut block, (i, r))| -> Result<(), DatasetError> {
            for c in 0..factor {
                let v = if c == 0 {
                    encode_with(&r.conditions, &r.monomer_a, &r.monomer_b, scalar)?
                } else {
                    let (a, b) = perturbed_pair(r, i, c, cfg, seed)?;
                    encode_with(&r.conditions, &a, &b, scalar)?
                };
                block.row_mut(c).assign(&ndarray::ArrayView1::from(v.as_slice()));
            }
            Ok(())
        })?;
    let parent = (0..n).map(|k| k / factor).collect();
    Ok((x, parent))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> Dataset {
        synth_generate(n.max(10), 7).unwrap()
    }

    #[test]
    fn split_seventy_thirty() {
        let ds = synth_generate(100, 1).unwrap();
        let (tr, te) = split(&ds, &SplitSpec { train_fraction: 0.7, seed: 3 }).unwrap();
        assert_eq!((tr.len(), te.len()), (70, 30));
        let mut ids: Vec<_> = tr.records.iter().chain(&te.records).map(|r| r.id.clone()).collect();
        ids.sort();
        let mut orig: Vec<_> = ds.records.iter().map(|r| r.id.clone()).collect();
        orig.sort();
        assert_eq!(ids, orig);
        let (tr2, _) = split(&ds, &SplitSpec { train_fraction: 0.7, seed: 3 }).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn split_rejects_tiny_sets() {
        let mut ds = small(10);
        ds.records.truncate(1);
        assert!(matches!(split(&ds, &SplitSpec::default()), Err(DatasetError::TooFew { .. })));
    }

    #[test]
    fn factor_one_is_identity() {
        let ds = small(12);
        let out = augment(&ds, 1, &VibrationConfig::default(), 5).unwrap();
        assert_eq!(out.records, ds.records);
        assert_eq!(out.provenance, Provenance::Augmented);
    }

    #[test]
    fn augment_size_labels_and_originals() {
        let ds = small(10);
        let out = augment(&ds, 4, &VibrationConfig::default(), 5).unwrap();
        assert_eq!(out.len(), 40);
        for (i, r) in ds.records.iter().enumerate() {
            assert_eq!(&out.records[4 * i], r);
            for c in 1..4 {
                let copy = &out.records[4 * i + c];
                assert_eq!(copy.rejection.to_bits(), r.rejection.to_bits());
                assert_eq!(copy.flux.to_bits(), r.flux.to_bits());
                assert_eq!(copy.conditions, r.conditions);
                assert_ne!(copy.monomer_a, r.monomer_a);
            }
        }
        out.validate().unwrap();
    }

    #[test]
    fn augment_refuses_augmented_input_and_zero_factor() {
        let ds = small(10);
        let cfg = VibrationConfig::default();
        let aug = augment(&ds, 2, &cfg, 1).unwrap();
        assert!(matches!(augment(&aug, 2, &cfg, 1), Err(DatasetError::NotAugmentable(_))));
        assert!(matches!(augment(&ds, 0, &cfg, 1), Err(DatasetError::ZeroFactor)));
    }

    #[test]
    fn streamed_features_match_materialized() {
        let ds = small(10);
        let cfg = VibrationConfig::default();
        let aug = augment(&ds, 3, &cfg, 9).unwrap();
        let a = aug.features(AtomScalar::AtomicMass).unwrap();
        let (b, parent) = augmented_features(&ds, 3, &cfg, 9, AtomScalar::AtomicMass).unwrap();
        assert_eq!(a, b);
        assert_eq!(parent[5], 1);
    }

    #[test]
    fn isotropic_fallback_without_modes() {
        let mut ds = small(10);
        for r in &mut ds.records {
            r.modes_a = None;
        }
        let out = augment(&ds, 2, &VibrationConfig::default(), 2).unwrap();
        assert_ne!(out.records[1].monomer_a, out.records[0].monomer_a);
    }

    #[test]
    fn rejection_range_is_validated() {
        let mut ds = small(10);
        ds.records[0].rejection = 1.2;
        let err = ds.validate().unwrap_err().to_string();
        assert!(err.contains("rejection out of [0,1]"), "{err}");
    }
}
