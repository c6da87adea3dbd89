//! Versioned JSON container for trained models.
//!
//! A model file holds the fitted parameters, the target scaling, and a
//! relative reference to a sibling scaler file (`<stem>.scaler.json`).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{Forest, GbrModel, SvrModel};
use crate::dataset::Target;
use crate::experiment::{FittedModel, ModelKind, Pipeline, TargetScale};
use crate::featurize::{AtomScalar, Scaler};
use crate::fsutil::atomic_write;
use crate::neuralnet::{MlpModel, MlpParams, NetError};

pub const FORMAT: &str = "vibaug-model";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: unsupported model format {format:?} version {version}")]
    Version { path: PathBuf, format: String, version: u32 },
    #[error("{path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: NetError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Dnn(MlpParams),
    Rf(Forest),
    Gbr(GbrModel),
    Svr(SvrModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub target: Target,
    pub atom_scalar: AtomScalar,
    pub scaler_file: String,
    pub target_scale: TargetScale,
    pub train_size: usize,
    pub model: SavedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScalerFile {
    format: String,
    version: u32,
    scaler: Scaler,
}

fn scaler_path(model_path: &Path) -> (String, PathBuf) {
    let stem = model_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let rel = format!("{stem}.scaler.json");
    let full = model_path.with_file_name(&rel);
    (rel, full)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PersistError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| PersistError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    atomic_write(path, text.as_bytes()).map_err(|source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PersistError> {
    let text = fs::read_to_string(path).map_err(|source| PersistError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| PersistError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_pipeline(p: &Pipeline, path: &Path) -> Result<(), PersistError> {
    let (rel, full) = scaler_path(path);
    write_json(
        &full,
        &ScalerFile {
            format: "vibaug-scaler".into(),
            version: VERSION,
            scaler: p.scaler.clone(),
        },
    )?;
    let model = match &p.model {
        FittedModel::Dnn(m) => SavedModel::Dnn(m.to_params()),
        FittedModel::Rf(f) => SavedModel::Rf(f.clone()),
        FittedModel::Gbr(g) => SavedModel::Gbr(g.clone()),
        FittedModel::Svr(s) => SavedModel::Svr(s.clone()),
    };
    write_json(
        path,
        &ModelFile {
            format: FORMAT.into(),
            version: VERSION,
            target: p.target,
            atom_scalar: p.atom_scalar,
            scaler_file: rel,
            target_scale: p.target_scale,
            train_size: p.train_size,
            model,
        },
    )
}

pub fn load_pipeline(path: &Path) -> Result<Pipeline, PersistError> {
    let file: ModelFile = read_json(path)?;
    if file.format != FORMAT || file.version != VERSION {
        return Err(PersistError::Version {
            path: path.to_path_buf(),
            format: file.format,
            version: file.version,
        });
    }
    let scaler_full = path.with_file_name(&file.scaler_file);
    let scaler: ScalerFile = read_json(&scaler_full)?;
    let (kind, model) = match file.model {
        SavedModel::Dnn(p) => (
            ModelKind::Dnn,
            FittedModel::Dnn(MlpModel::from_params(&p).map_err(|source| PersistError::Model {
                path: path.to_path_buf(),
                source,
            })?),
        ),
        SavedModel::Rf(f) => (ModelKind::Rf, FittedModel::Rf(f)),
        SavedModel::Gbr(g) => (ModelKind::Gbr, FittedModel::Gbr(g)),
        SavedModel::Svr(s) => (ModelKind::Svr, FittedModel::Svr(s)),
    };
    Ok(Pipeline {
        kind,
        target: file.target,
        atom_scalar: file.atom_scalar,
        scaler: scaler.scaler,
        target_scale: file.target_scale,
        model,
        train_size: file.train_size,
        history: Vec::new(),
    })
}
