//! Model pipelines (scaling + regressor) and the comparison matrix runner.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{
    fit_forest, fit_gbr, predict_forest, predict_gbr, predict_svr, svr::fit_svr_traced, BaselineError,
    Forest, ForestConfig, GbrConfig, GbrModel, SvrConfig, SvrModel,
};
use crate::dataset::{
    augmented_features, load_csv, split, synth_generate, Dataset, DatasetError, Provenance, SplitSpec, Target,
};
use crate::featurize::{AtomScalar, FeatureError, Scaler};
use crate::fsutil::atomic_write;
use crate::metrics::{evaluate, fmt_opt, MetricReport, MetricsError};
use crate::neuralnet::{init, predict, train, MlpModel, NetError, TrainConfig, DEFAULT_DIMS};
use crate::rng::derive_seed;
use crate::vibration::VibrationConfig;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("leakage guard: {0}")]
    Leakage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Dnn,
    Rf,
    Gbr,
    Svr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Dnn, ModelKind::Rf, ModelKind::Gbr, ModelKind::Svr];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dnn => "dnn",
            ModelKind::Rf => "rf",
            ModelKind::Gbr => "gbr",
            ModelKind::Svr => "svr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s.trim())
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfigs {
    pub train: TrainConfig,
    pub forest: ForestConfig,
    pub gbr: GbrConfig,
    pub svr: SvrConfig,
}

impl Default for ModelConfigs {
    fn default() -> Self {
        ModelConfigs {
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
            gbr: GbrConfig::default(),
            svr: SvrConfig::default(),
        }
    }
}

impl ModelConfigs {
    /// Points every model seed at `seed`, one derived stream per model kind.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.train.seed = derive_seed(seed, "dnn");
        self.forest.seed = derive_seed(seed, "rf");
        self.gbr.seed = derive_seed(seed, "gbr");
        self
    }
}

/// Min-max range of the training labels; models fit the scaled target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub min: f64,
    pub max: f64,
}

impl TargetScale {
    pub fn fit(y: &[f64]) -> Self {
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        TargetScale { min, max }
    }

    pub fn forward(&self, v: f64) -> f64 {
        if self.max > self.min {
            (v - self.min) / (self.max - self.min)
        } else {
            0.0
        }
    }

    pub fn inverse(&self, v: f64) -> f64 {
        if self.max > self.min {
            self.min + v * (self.max - self.min)
        } else {
            self.min
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Dnn(MlpModel),
    Rf(Forest),
    Gbr(GbrModel),
    Svr(SvrModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub kind: ModelKind,
    pub target: Target,
    pub atom_scalar: AtomScalar,
    pub scaler: Scaler,
    pub target_scale: TargetScale,
    pub model: FittedModel,
    pub train_size: usize,
    /// Per-epoch MSE (dnn), per-stage MSE (gbr) or dual objective (svr).
    pub history: Vec<f64>,
}

impl Pipeline {
    pub fn predict(&self, x_raw: ArrayView2<f64>) -> Result<Vec<f64>, ExperimentError> {
        let xs = scale_rows(&self.scaler, x_raw)?;
        let raw = predict_scaled(&self.model, xs.view())?;
        Ok(raw.into_iter().map(|v| self.target_scale.inverse(v)).collect())
    }
}

pub fn scale_rows(scaler: &Scaler, x: ArrayView2<f64>) -> Result<Array2<f64>, ExperimentError> {
    let mut out = x.to_owned();
    scale_in_place(scaler, &mut out)?;
    Ok(out)
}

pub fn scale_in_place(scaler: &Scaler, x: &mut Array2<f64>) -> Result<(), ExperimentError> {
    if x.ncols() != scaler.dims() {
        return Err(FeatureError::Length {
            expected: scaler.dims(),
            found: x.ncols(),
        }
        .into());
    }
    x.axis_iter_mut(Axis(0)).into_par_iter().for_each(|mut row| {
        for (d, v) in row.iter_mut().enumerate() {
            *v = scaler.transform_value(d, *v);
        }
    });
    Ok(())
}

pub fn fit_scaler_rows(x: ArrayView2<f64>) -> Result<Scaler, ExperimentError> {
    let rows: Vec<&[f64]> = x
        .rows()
        .into_iter()
        .map(|r| r.to_slice().ok_or_else(|| ExperimentError::Config("feature matrix must be row-major".into())))
        .collect::<Result<_, _>>()?;
    Ok(Scaler::fit(rows)?)
}

fn predict_scaled(model: &FittedModel, xs: ArrayView2<f64>) -> Result<Vec<f64>, ExperimentError> {
    let rows = || xs.rows().into_iter().map(|r| r.to_vec());
    Ok(match model {
        FittedModel::Dnn(m) => predict(m, xs)?,
        FittedModel::Rf(f) => rows().map(|r| predict_forest(f, &r)).collect(),
        FittedModel::Gbr(g) => rows().map(|r| predict_gbr(g, &r)).collect(),
        FittedModel::Svr(s) => rows().map(|r| predict_svr(s, &r)).collect(),
    })
}

/// Fits one model on already-scaled features and targets.
pub fn fit_scaled(
    kind: ModelKind,
    xs: ArrayView2<f64>,
    ys: &[f64],
    cfg: &ModelConfigs,
) -> Result<(FittedModel, Vec<f64>), ExperimentError> {
    Ok(match kind {
        ModelKind::Dnn => {
            let mut dims = DEFAULT_DIMS.to_vec();
            dims[0] = xs.ncols();
            let model = init(&dims, cfg.train.seed)?;
            let (m, h) = train(model, xs, ys, &cfg.train)?;
            (FittedModel::Dnn(m), h)
        }
        ModelKind::Rf => (FittedModel::Rf(fit_forest(xs, ys, &cfg.forest)?), Vec::new()),
        ModelKind::Gbr => {
            let g = fit_gbr(xs, ys, &cfg.gbr)?;
            let h = g.train_mse.clone();
            (FittedModel::Gbr(g), h)
        }
        ModelKind::Svr => {
            let (s, trace) = fit_svr_traced(xs, ys, &cfg.svr)?;
            if !s.converged {
                log::warn!("svr stopped after {} iterations without meeting tolerance", s.iterations);
            }
            (FittedModel::Svr(s), trace.dual_objective)
        }
    })
}

/// Fits scaler, target scale and model on raw training features.
pub fn fit_pipeline(
    kind: ModelKind,
    target: Target,
    atom_scalar: AtomScalar,
    x_raw: ArrayView2<f64>,
    y: &[f64],
    cfg: &ModelConfigs,
) -> Result<Pipeline, ExperimentError> {
    let scaler = fit_scaler_rows(x_raw)?;
    let xs = scale_rows(&scaler, x_raw)?;
    let target_scale = TargetScale::fit(y);
    let ys: Vec<f64> = y.iter().map(|&v| target_scale.forward(v)).collect();
    let (model, history) = fit_scaled(kind, xs.view(), &ys, cfg)?;
    Ok(Pipeline {
        kind,
        target,
        atom_scalar,
        scaler,
        target_scale,
        model,
        train_size: y.len(),
        history,
    })
}

/// Refuses anything but raw records for evaluation.
pub fn guard_test_set(test: &Dataset) -> Result<(), ExperimentError> {
    if test.provenance == Provenance::Augmented {
        return Err(ExperimentError::Leakage(
            "evaluation data is augmented; only raw or synthetic held-out records may be scored".into(),
        ));
    }
    Ok(())
}

pub fn evaluate_pipeline(p: &Pipeline, test: &Dataset) -> Result<MetricReport, ExperimentError> {
    guard_test_set(test)?;
    let x = test.features(p.atom_scalar)?;
    let pred = p.predict(x.view())?;
    Ok(evaluate(&test.labels(p.target), &pred)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    /// Raw dataset CSV; when absent a synthetic benchmark of `synth_n` records is generated.
    pub path: Option<PathBuf>,
    pub synth_n: usize,
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource { path: None, synth_n: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub factors: Vec<usize>,
    pub targets: Vec<Target>,
    pub models: Vec<ModelKind>,
    pub atom_scalar: AtomScalar,
    /// Write two-column `.dat` files for plotting.
    pub gnuplot: bool,
    pub data: DataSource,
    pub split: SplitSpec,
    pub vibration: VibrationConfig,
    pub train: TrainConfig,
    pub forest: ForestConfig,
    pub gbr: GbrConfig,
    pub svr: SvrConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            output_dir: PathBuf::from("results"),
            factors: vec![1, 10, 100, 1000],
            targets: Target::ALL.to_vec(),
            models: ModelKind::ALL.to_vec(),
            atom_scalar: AtomScalar::AtomicMass,
            gnuplot: false,
            data: DataSource::default(),
            split: SplitSpec::default(),
            vibration: VibrationConfig::default(),
            train: TrainConfig::default(),
            forest: ForestConfig::default(),
            gbr: GbrConfig::default(),
            svr: SvrConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.factors.is_empty() || self.factors.contains(&0) {
            return bad("factors must be a nonempty list of positive integers");
        }
        if self.factors.windows(2).any(|w| w[0] >= w[1]) {
            return bad("factors must be strictly ascending");
        }
        if self.targets.is_empty() || self.models.is_empty() {
            return bad("targets and models must be nonempty");
        }
        if let Some(p) = &self.data.path {
            if !p.is_file() {
                return Err(ExperimentError::Config(format!("dataset {} does not exist", p.display())));
            }
        }
        self.vibration.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        self.train.validate()?;
        Ok(())
    }

    /// Model configs with seeds derived from the global seed.
    pub fn seeded_models(&self) -> ModelConfigs {
        ModelConfigs {
            train: self.train,
            forest: self.forest,
            gbr: self.gbr,
            svr: self.svr,
        }
        .with_seed(self.seed)
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: derive_seed(self.seed, "split"),
            ..self.split
        }
    }

    pub fn augment_seed(&self) -> u64 {
        derive_seed(self.seed, "augment")
    }

    pub fn load_raw(&self) -> Result<Dataset, ExperimentError> {
        Ok(match &self.data.path {
            Some(p) => load_csv(p)?,
            None => synth_generate(self.data.synth_n, self.seed)?,
        })
    }
}

pub const RESULTS_HEADER: &str = "target,model,factor,train_size,pcc,r2,mre_percent,rmse,mse,n,status";

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub target: Target,
    pub model: ModelKind,
    pub factor: usize,
    pub train_size: usize,
    pub outcome: Result<MetricReport, String>,
    pub history: Vec<f64>,
    pub seconds: f64,
}

impl CellResult {
    pub fn csv_row(&self) -> String {
        let head = format!("{},{},{},{}", self.target, self.model, self.factor, self.train_size);
        match &self.outcome {
            Ok(r) => format!(
                "{head},{},{},{},{},{},{},ok",
                fmt_opt(r.pcc),
                fmt_opt(r.r2),
                fmt_opt(r.mre_percent),
                r.rmse,
                r.mse,
                r.n
            ),
            Err(e) => format!("{head},,,,,,,error: {}", e.replace([',', '\n'], ";")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub cells: Vec<CellResult>,
    pub train_raw: usize,
    pub test_size: usize,
}

impl CompareOutcome {
    pub fn succeeded(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_ok()).count()
    }

    pub fn cell(&self, target: Target, model: ModelKind, factor: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.target == target && c.model == model && c.factor == factor)
    }

    pub fn results_csv(&self) -> String {
        let mut s = String::from(RESULTS_HEADER);
        s.push('\n');
        for c in &self.cells {
            s.push_str(&c.csv_row());
            s.push('\n');
        }
        s
    }
}

/// Runs every (factor, target, model) cell on a single split. Cell failures
/// are recorded, not propagated.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<CompareOutcome, ExperimentError> {
    cfg.validate()?;
    let raw = cfg.load_raw()?;
    let (train_ds, test_ds) = split(&raw, &cfg.split_spec())?;
    guard_test_set(&test_ds)?;
    let x_test = test_ds.features(cfg.atom_scalar)?;
    let models = cfg.seeded_models();

    let mut cells = Vec::new();
    for &factor in &cfg.factors {
        let started = Instant::now();
        let (mut x, parent) = augmented_features(&train_ds, factor, &cfg.vibration, cfg.augment_seed(), cfg.atom_scalar)?;
        let scaler = fit_scaler_rows(x.view())?;
        scale_in_place(&scaler, &mut x)?;
        let xt = scale_rows(&scaler, x_test.view())?;
        log::info!("factor {factor}: {} training rows prepared in {:.1}s", x.nrows(), started.elapsed().as_secs_f64());

        let jobs: Vec<(Target, ModelKind)> = cfg
            .targets
            .iter()
            .flat_map(|&t| cfg.models.iter().map(move |&m| (t, m)))
            .collect();
        let done: Vec<CellResult> = jobs
            .par_iter()
            .map(|&(target, kind)| {
                let t0 = Instant::now();
                let labels = train_ds.labels(target);
                let y: Vec<f64> = parent.iter().map(|&p| labels[p]).collect();
                let ts = TargetScale::fit(&y);
                let ys: Vec<f64> = y.iter().map(|&v| ts.forward(v)).collect();
                let mut history = Vec::new();
                let outcome = fit_scaled(kind, x.view(), &ys, &models)
                    .and_then(|(model, h)| {
                        history = h;
                        let pred: Vec<f64> = predict_scaled(&model, xt.view())?
                            .into_iter()
                            .map(|v| ts.inverse(v))
                            .collect();
                        Ok(evaluate(&test_ds.labels(target), &pred)?)
                    })
                    .map_err(|e| e.to_string());
                if let Err(e) = &outcome {
                    log::error!("{target}/{kind}/x{factor}: {e}");
                }
                let seconds = t0.elapsed().as_secs_f64();
                log::info!("{target}/{kind}/x{factor}: {seconds:.1}s");
                CellResult {
                    target,
                    model: kind,
                    factor,
                    train_size: x.nrows(),
                    outcome,
                    history,
                    seconds,
                }
            })
            .collect();
        cells.extend(done);
    }
    cells.sort_by_key(|c| {
        (
            cfg.targets.iter().position(|&t| t == c.target),
            cfg.models.iter().position(|&m| m == c.model),
            c.factor,
        )
    });
    Ok(CompareOutcome {
        cells,
        train_raw: train_ds.len(),
        test_size: test_ds.len(),
    })
}

fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    atomic_write(path, text.as_bytes()).map_err(|source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn summary_markdown(out: &CompareOutcome, cfg: &ExperimentConfig, target: Target) -> String {
    let mut s = format!(
        "# {target}\n\nRaw training records: {}; held-out raw test records: {}.\n\n",
        out.train_raw, out.test_size
    );
    s.push_str("| model | factor | train size | PCC | R² | MRE (%) | RMSE |\n|---|---:|---:|---:|---:|---:|---:|\n");
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "undefined".into());
    for c in out.cells.iter().filter(|c| c.target == target) {
        match &c.outcome {
            Ok(r) => s.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {:.4} |\n",
                c.model,
                c.factor,
                c.train_size,
                f(r.pcc),
                f(r.r2),
                f(r.mre_percent),
                r.rmse
            )),
            Err(e) => s.push_str(&format!("| {} | {} | {} | failed: {e} | | | |\n", c.model, c.factor, c.train_size)),
        }
    }
    let _ = cfg;
    s
}

/// Writes results.csv, per-target summaries, loss histories, run_info.json
/// and timings.csv into `dir`. All but timings.csv are deterministic.
pub fn write_compare_outputs(out: &CompareOutcome, cfg: &ExperimentConfig, dir: &Path) -> Result<(), ExperimentError> {
    write(&dir.join("results.csv"), &out.results_csv())?;
    for &t in &cfg.targets {
        write(&dir.join(format!("summary_{t}.md")), &summary_markdown(out, cfg, t))?;
    }
    for c in &out.cells {
        if c.history.is_empty() {
            continue;
        }
        let mut s = String::from("step,value\n");
        for (i, v) in c.history.iter().enumerate() {
            s.push_str(&format!("{},{v}\n", i + 1));
        }
        write(&dir.join("histories").join(format!("{}_{}_x{}.csv", c.target, c.model, c.factor)), &s)?;
    }
    let info = serde_json::json!({
        "seed": cfg.seed,
        "factors": cfg.factors,
        "targets": cfg.targets,
        "models": cfg.models,
        "atom_scalar": cfg.atom_scalar,
        "data": cfg.data,
        "split": cfg.split_spec(),
        "augment_seed": cfg.augment_seed(),
        "vibration": cfg.vibration,
        "hyperparameters": cfg.seeded_models(),
        "train_raw": out.train_raw,
        "test_size": out.test_size,
    });
    write(&dir.join("run_info.json"), &(serde_json::to_string_pretty(&info).unwrap_or_default() + "\n"))?;
    let mut timings = String::from("target,model,factor,seconds\n");
    for c in &out.cells {
        timings.push_str(&format!("{},{},{},{:.3}\n", c.target, c.model, c.factor, c.seconds));
    }
    write(&dir.join("timings.csv"), &timings)?;
    if cfg.gnuplot {
        for &t in &cfg.targets {
            for &m in &cfg.models {
                let mut s = format!("# {t} {m}: train_size r2\n");
                for c in out.cells.iter().filter(|c| c.target == t && c.model == m) {
                    if let Ok(r) = &c.outcome {
                        s.push_str(&format!("{} {}\n", c.train_size, fmt_opt(r.r2)));
                    }
                }
                write(&dir.join("plots").join(format!("{t}_{m}_r2.dat")), &s)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_toml_overrides() {
        let c = ExperimentConfig::from_toml("seed = 7\nfactors = [1, 5]\n[train]\nepochs = 3\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.factors, vec![1, 5]);
        assert_eq!(c.train.epochs, 3);
        assert_eq!(c.forest.n_trees, 100);
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn factor_order_is_validated() {
        let c = ExperimentConfig {
            factors: vec![10, 1],
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn target_scale_round_trip() {
        let s = TargetScale::fit(&[2.0, 4.0]);
        assert_eq!(s.forward(3.0), 0.5);
        assert_eq!(s.inverse(0.5), 3.0);
        let flat = TargetScale::fit(&[1.0, 1.0]);
        assert_eq!(flat.inverse(flat.forward(1.0)), 1.0);
    }

    #[test]
    fn guard_rejects_augmented() {
        let mut ds = synth_generate(10, 1).unwrap();
        ds.provenance = Provenance::Augmented;
        assert!(matches!(guard_test_set(&ds), Err(ExperimentError::Leakage(_))));
    }
}
