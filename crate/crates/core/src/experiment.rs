//! Experiment configuration and the load, split, fit, score pipeline behind
//! the command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{self, Amount, Dataset2D, LabeledDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::eval::{self, DimPoint, EvalReport};
use crate::mmc_2d::{self, BilinearModel, L2d2Params, Mmc2dParams};
use crate::mmc_core::{self, Branch, LinearModel, MmcParams, DEFAULT_GAMMA, DEFAULT_THETA};
use crate::mmc_net::{self, MmcNetModel, NetParams};
use crate::mmc_variants::{self, LayeredModel, LmmcParams, RmmcParams};
use crate::{seed, synthetic};

const SPLIT_STREAM: u64 = 0x5350_4c54;
const POINT_STREAM: u64 = 0x5357_4550;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mmc")]
    Mmc,
    #[serde(rename = "rmmc")]
    Rmmc,
    #[serde(rename = "lmmc")]
    Lmmc,
    #[serde(rename = "2d2mmc")]
    Mmc2d,
    #[serde(rename = "l2d2mmc")]
    L2d2mmc,
    #[serde(rename = "mmcnet")]
    MmcNet,
    #[serde(rename = "pca")]
    Pca,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mmc => "mmc",
            Method::Rmmc => "rmmc",
            Method::Lmmc => "lmmc",
            Method::Mmc2d => "2d2mmc",
            Method::L2d2mmc => "l2d2mmc",
            Method::MmcNet => "mmcnet",
            Method::Pca => "pca",
        }
    }

    fn is_2d(self) -> bool {
        matches!(self, Method::Mmc2d | Method::L2d2mmc | Method::MmcNet)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    /// Two Gaussian classes at `+-2 e_1`.
    Gaussian2,
    /// Three classes of striped or boxed images.
    Stripes3,
    /// Ten classes of stroke glyphs.
    Glyphs10,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Csv {
        path: PathBuf,
        #[serde(default = "yes")]
        has_header: bool,
        #[serde(default)]
        label_column: usize,
        /// Reshape each row into a `d1 x d2` image (column-major).
        #[serde(default)]
        image_shape: Option<[usize; 2]>,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Synthetic {
        generator: Generator,
        per_class: usize,
        /// Feature dimension (gaussian2) or image side (image generators).
        size: usize,
        seed: u64,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    pub train_per_class: Amount,
    pub test_per_class: Amount,
    /// Defaults to a seed derived from the experiment seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub method: Method,
    pub dataset: DatasetSpec,
    pub split: SplitConfig,
    /// Target dimensions to sweep (right dimension for 2D methods).
    #[serde(default = "one")]
    pub r: Vec<usize>,
    /// Left dimensions for 2D methods, paired with `r`; defaults to `r`.
    #[serde(default)]
    pub l: Option<Vec<usize>>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_theta")]
    pub theta: usize,
    #[serde(default)]
    pub branch: Option<Branch>,
    /// Anchor count; `2 r` when omitted.
    #[serde(default)]
    pub t: Option<usize>,
    #[serde(default)]
    pub g: Option<usize>,
    #[serde(default = "one_layer")]
    pub layers: usize,
    #[serde(default)]
    pub h1: Option<usize>,
    #[serde(default)]
    pub h2: Option<usize>,
    /// Network parameters; `gamma` and `seed` are taken from the top level.
    #[serde(default)]
    pub net: NetParams,
    #[serde(default = "one_neighbour")]
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn one() -> Vec<usize> {
    vec![1]
}
fn one_layer() -> usize {
    1
}
fn one_neighbour() -> usize {
    1
}
fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_theta() -> usize {
    DEFAULT_THETA
}

/// Sets `value` at a dotted `path` inside a JSON object, creating objects on
/// the way. The value is parsed as JSON, falling back to a plain string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must have the form key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(Error::config(path, "empty key segment"));
        }
        let obj = match node {
            Value::Object(map) => map,
            other if other.is_null() => {
                *other = Value::Object(Default::default());
                other.as_object_mut().expect("just created")
            }
            _ => return Err(Error::config(path, format!("`{key}` is not inside an object"))),
        };
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        node = obj.entry(key.to_string()).or_insert(Value::Null);
    }
    unreachable!("split always yields at least one segment")
}

impl ExperimentConfig {
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: Self = serde_json::from_value(doc).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.is_empty() {
            return Err(Error::config("r", "sweep list is empty"));
        }
        if self.r.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("r", "sweep list must be strictly increasing"));
        }
        if let Some(l) = &self.l {
            if l.len() != self.r.len() {
                return Err(Error::config("l", "must have the same length as r"));
            }
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if self.layers == 0 {
            return Err(Error::config("layers", "must be at least 1"));
        }
        match self.method {
            Method::Lmmc if self.g.is_none() => return Err(Error::config("g", "required for lmmc")),
            Method::L2d2mmc if self.h1.is_none() => return Err(Error::config("h1", "required for l2d2mmc")),
            Method::L2d2mmc if self.h2.is_none() => return Err(Error::config("h2", "required for l2d2mmc")),
            _ => {}
        }
        if self.method.is_2d() && matches!(self.dataset, DatasetSpec::Csv { image_shape: None, .. }) {
            return Err(Error::config("dataset.image_shape", "required for image methods on CSV input"));
        }
        Ok(())
    }

    fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: self.split.seed.unwrap_or_else(|| seed::derive_seed(self.seed, SPLIT_STREAM)),
            train_per_class: self.split.train_per_class,
            test_per_class: self.split.test_per_class,
        }
    }

    fn point_seed(&self, r: usize) -> u64 {
        seed::derive_seed(seed::derive_seed(self.seed, POINT_STREAM), r as u64)
    }

    fn left_dims(&self) -> Vec<usize> {
        self.l.clone().unwrap_or_else(|| self.r.clone())
    }

    fn net_params(&self) -> NetParams {
        NetParams {
            gamma: self.gamma,
            seed: self.seed,
            ..self.net.clone()
        }
    }

    /// The configuration with every default filled in, plus derived values.
    fn echo(&self) -> Result<Value> {
        let mut v = serde_json::to_value(self)?;
        if matches!(self.method, Method::Rmmc | Method::Lmmc) {
            let t: Vec<usize> = self.r.iter().map(|&r| self.t.unwrap_or(2 * r)).collect();
            v["resolved_t"] = serde_json::to_value(t)?;
        }
        v["resolved_split_seed"] = serde_json::to_value(self.split_spec().seed)?;
        Ok(v)
    }
}

/// A loaded dataset: plain vectors, or images.
#[derive(Debug, Clone)]
pub enum Data {
    Vectors(LabeledDataset),
    Images(Dataset2D),
}

impl Data {
    pub fn vectors(&self) -> LabeledDataset {
        match self {
            Data::Vectors(ds) => ds.clone(),
            Data::Images(ds) => data::flatten(ds),
        }
    }

    pub fn images(&self) -> Result<Dataset2D> {
        match self {
            Data::Images(ds) => Ok(ds.clone()),
            Data::Vectors(_) => Err(Error::config("dataset", "image methods need image data")),
        }
    }

    fn split(&self, spec: &SplitSpec) -> Result<(Data, Data)> {
        Ok(match self {
            Data::Vectors(ds) => {
                let (a, b) = data::split(ds, spec)?;
                (Data::Vectors(a), Data::Vectors(b))
            }
            Data::Images(ds) => {
                let (a, b) = data::split(ds, spec)?;
                (Data::Images(a), Data::Images(b))
            }
        })
    }
}

pub fn load_data(spec: &DatasetSpec) -> Result<Data> {
    match spec {
        DatasetSpec::Csv {
            path,
            has_header,
            label_column,
            image_shape,
        } => {
            let ds = data::load_csv(path, *has_header, *label_column)?;
            match image_shape {
                None => Ok(Data::Vectors(ds)),
                Some([d1, d2]) => {
                    let samples = ds
                        .x()
                        .column_iter()
                        .map(|c| data::unflatten(&c.into_owned(), *d1, *d2))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Data::Images(Dataset2D::with_class_names(
                        samples,
                        ds.labels().to_vec(),
                        ds.class_names().to_vec(),
                    )?))
                }
            }
        }
        DatasetSpec::Idx { images, labels } => Ok(Data::Images(data::load_idx(images, labels)?)),
        DatasetSpec::Synthetic {
            generator,
            per_class,
            size,
            seed,
        } => Ok(match generator {
            Generator::Gaussian2 => Data::Vectors(synthetic::gaussian_two_class(*size, *per_class, *seed)),
            Generator::Stripes3 => Data::Images(synthetic::stripes_three_class(*size, *per_class, *seed)),
            Generator::Glyphs10 => {
                if *size < 8 {
                    return Err(Error::config("dataset.size", "glyph images must be at least 8x8"));
                }
                Data::Images(synthetic::glyphs_ten_class(*size, *per_class, *seed))
            }
        }),
    }
}

/// Any fitted model, tagged by kind in its JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "lowercase")]
pub enum SavedModel {
    Linear(LinearModel),
    Layered(LayeredModel),
    Bilinear(BilinearModel),
    Net(MmcNetModel),
}

impl SavedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn branch(&self) -> Option<String> {
        match self {
            SavedModel::Linear(m) => Some(m.branch.to_string()),
            SavedModel::Layered(m) => m.layers.last().map(|l| l.model.branch.to_string()),
            SavedModel::Bilinear(_) | SavedModel::Net(_) => None,
        }
    }

    /// Features with one column per sample.
    pub fn features(&self, data: &Data) -> Result<DMatrix<f64>> {
        match self {
            SavedModel::Linear(m) => m.transform(data.vectors().x()),
            SavedModel::Layered(m) => mmc_variants::transform_layered(m, data.vectors().x()),
            SavedModel::Bilinear(m) => {
                let ds = data.images()?;
                let cols = ds
                    .samples()
                    .iter()
                    .map(|x| mmc_2d::transform_2d(m, x))
                    .collect::<Result<Vec<_>>>()?;
                let mut out = DMatrix::zeros(m.l * m.r, cols.len());
                for (j, y) in cols.iter().enumerate() {
                    out.column_mut(j).copy_from_slice(y.as_slice());
                }
                Ok(out)
            }
            SavedModel::Net(m) => mmc_net::transform_net(m, data.images()?.samples()),
        }
    }
}

fn bilinear_branch(cfg: &ExperimentConfig, d1: usize, d2: usize) -> String {
    if d1 < cfg.theta && d2 < cfg.theta {
        Branch::Direct.to_string()
    } else {
        Branch::Sampled.to_string()
    }
}

/// Fits the configured method at sweep position `point` on `train`.
pub fn fit_point(cfg: &ExperimentConfig, train: &Data, point: usize) -> Result<(SavedModel, Option<String>)> {
    let r = cfg.r[point];
    let seed = cfg.point_seed(r);
    let base = MmcParams {
        r,
        gamma: cfg.gamma,
        theta: cfg.theta,
        branch_override: cfg.branch,
    };
    let model = match cfg.method {
        Method::Mmc => SavedModel::Linear(mmc_core::fit(&train.vectors(), &base)?),
        Method::Pca => SavedModel::Linear(eval::fit_pca_baseline(&train.vectors(), r)?),
        Method::Rmmc => {
            let params = RmmcParams { base, t: cfg.t, seed };
            SavedModel::Linear(mmc_variants::fit_rmmc(&train.vectors(), &params)?)
        }
        Method::Lmmc => {
            let params = LmmcParams {
                rmmc: RmmcParams { base, t: cfg.t, seed },
                g: cfg.g.ok_or_else(|| Error::config("g", "required for lmmc"))?,
                layers: cfg.layers,
            };
            SavedModel::Layered(mmc_variants::fit_lmmc(&train.vectors(), &params)?)
        }
        Method::Mmc2d | Method::L2d2mmc => {
            let ds = train.images()?;
            let params = Mmc2dParams {
                l: cfg.left_dims()[point],
                r,
                gamma: cfg.gamma,
                theta: cfg.theta,
                seed,
            };
            let model = if cfg.method == Method::Mmc2d {
                mmc_2d::fit_2d2(&ds, &params)?
            } else {
                let h1 = cfg.h1.ok_or_else(|| Error::config("h1", "required for l2d2mmc"))?;
                let h2 = cfg.h2.ok_or_else(|| Error::config("h2", "required for l2d2mmc"))?;
                mmc_2d::fit_l2d2(&ds, &L2d2Params { base: params, h1, h2 })?
            };
            let (d1, d2) = match cfg.method {
                Method::Mmc2d => (ds.d1(), ds.d2()),
                _ => (cfg.h1.unwrap_or(0), cfg.h2.unwrap_or(0)),
            };
            let branch = bilinear_branch(cfg, d1, d2);
            return Ok((SavedModel::Bilinear(model), Some(branch)));
        }
        Method::MmcNet => SavedModel::Net(mmc_net::fit_net(&train.images()?, &cfg.net_params())?),
    };
    let branch = model.branch();
    Ok((model, branch))
}

fn labels_of(data: &Data) -> Vec<usize> {
    match data {
        Data::Vectors(ds) => ds.labels().to_vec(),
        Data::Images(ds) => ds.labels().to_vec(),
    }
}

/// Loads the data and returns the configured train/test split.
pub fn load_split(cfg: &ExperimentConfig) -> Result<(Data, Data)> {
    load_data(&cfg.dataset)?.split(&cfg.split_spec())
}

/// Fits on the training split at the last sweep point.
pub fn fit_model(cfg: &ExperimentConfig) -> Result<SavedModel> {
    let (train, _) = load_split(cfg)?;
    Ok(fit_point(cfg, &train, cfg.r.len() - 1)?.0)
}

/// Runs the whole pipeline and writes the report to `cfg.output` when set.
pub fn run(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let mut timing = BTreeMap::new();
    let clock = Instant::now();
    let (train, test) = load_split(cfg)?;
    timing.insert("load".to_string(), clock.elapsed().as_secs_f64());

    let clock = Instant::now();
    let train_labels = labels_of(&train);
    let test_labels = labels_of(&test);
    let points: Vec<(DimPoint, Option<String>)> = (0..cfg.r.len())
        .into_par_iter()
        .map(|i| {
            let (model, branch) = fit_point(cfg, &train, i)?;
            let train_feats = model.features(&train)?;
            let test_feats = model.features(&test)?;
            let pred = eval::knn_predict(&train_feats, &train_labels, &test_feats, cfg.k)?;
            let r = match &model {
                SavedModel::Net(m) => m.output_length,
                _ => cfg.r[i],
            };
            Ok((
                DimPoint {
                    r,
                    accuracy: eval::accuracy(&pred, &test_labels)?,
                },
                branch,
            ))
        })
        .collect::<Result<_>>()?;
    timing.insert("fit_eval".to_string(), clock.elapsed().as_secs_f64());

    let (last, branch) = points.last().cloned().expect("validated nonempty sweep");
    let report = EvalReport {
        method: cfg.method.name().to_string(),
        params: cfg.echo()?,
        seed: cfg.seed,
        accuracy: last.accuracy,
        branch,
        per_dim: points.into_iter().map(|(p, _)| p).collect(),
        timing,
    };
    if let Some(path) = &cfg.output {
        fs::write(path, report.to_json()?).map_err(|e| Error::io(path, e))?;
    }
    Ok(report)
}

pub const SWEEP_HEADER: &str = "method,seed,r,accuracy";

pub fn sweep_csv(report: &EvalReport) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for p in &report.per_dim {
        out.push_str(&format!("{},{},{},{}\n", report.method, report.seed, p.r, p.accuracy));
    }
    out
}

pub fn emit_sweep_csv(report: &EvalReport, path: &Path) -> Result<()> {
    if report.per_dim.is_empty() {
        return Err(Error::config("per_dim", "report has no sweep points"));
    }
    fs::write(path, sweep_csv(report)).map_err(|e| Error::io(path, e))
}

/// Report JSON with the timing block emptied, for comparing runs.
pub fn without_timing(report: &EvalReport) -> EvalReport {
    EvalReport {
        timing: BTreeMap::new(),
        ..report.clone()
    }
}

/// The fixed synthetic benchmarks written by `gen-synthetic`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    Gaussian,
    Stripes,
    Glyphs,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Gaussian, Benchmark::Stripes, Benchmark::Glyphs];

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Gaussian => "gaussian2",
            Benchmark::Stripes => "stripes3",
            Benchmark::Glyphs => "glyphs10",
        }
    }

    /// Generator settings: d = 50 with 100 samples per class; 16x16 images with
    /// 40 per class; 12x12 glyphs with 20 per class.
    pub fn dataset(self) -> DatasetSpec {
        let (generator, per_class, size, seed) = match self {
            Benchmark::Gaussian => (Generator::Gaussian2, 100, 50, 20),
            Benchmark::Stripes => (Generator::Stripes3, 40, 16, 30),
            Benchmark::Glyphs => (Generator::Glyphs10, 20, 12, 40),
        };
        DatasetSpec::Synthetic {
            generator,
            per_class,
            size,
            seed,
        }
    }

    /// Evaluation config for this benchmark reading `dataset`. The Gaussian
    /// set uses a 1000-column expansion: `P P^T` distorts distances by roughly
    /// `sqrt(d / g)`, and narrow expansions visibly cost 1-NN accuracy.
    pub fn config(self, dataset: DatasetSpec) -> ExperimentConfig {
        let half = |n| Amount::Count(n);
        let base = ExperimentConfig {
            method: Method::Lmmc,
            dataset,
            split: SplitConfig {
                train_per_class: half(50),
                test_per_class: half(50),
                seed: None,
            },
            r: vec![1],
            l: None,
            gamma: DEFAULT_GAMMA,
            theta: DEFAULT_THETA,
            branch: None,
            t: None,
            g: Some(1000),
            layers: 1,
            h1: None,
            h2: None,
            net: NetParams::default(),
            k: 1,
            seed: 1,
            output: None,
        };
        match self {
            Benchmark::Gaussian => base,
            Benchmark::Stripes => ExperimentConfig {
                method: Method::Mmc2d,
                split: SplitConfig {
                    train_per_class: half(20),
                    test_per_class: half(20),
                    seed: None,
                },
                r: vec![4],
                l: Some(vec![4]),
                g: None,
                ..base
            },
            Benchmark::Glyphs => ExperimentConfig {
                method: Method::MmcNet,
                split: SplitConfig {
                    train_per_class: half(10),
                    test_per_class: half(10),
                    seed: None,
                },
                g: None,
                net: NetParams {
                    filters: vec![4, 4],
                    ..NetParams::default()
                },
                ..base
            },
        }
    }
}

/// Writes every benchmark into `dir` (CSV for vectors, IDX for images) along
/// with a config that evaluates it. Returns the config paths.
pub fn write_benchmarks(dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for bench in Benchmark::ALL {
        let name = bench.name();
        let spec = match load_data(&bench.dataset())? {
            Data::Vectors(ds) => {
                let path = dir.join(format!("{name}.csv"));
                data::write_csv(&ds, &path)?;
                DatasetSpec::Csv {
                    path: PathBuf::from(format!("{name}.csv")),
                    has_header: true,
                    label_column: 0,
                    image_shape: None,
                }
            }
            Data::Images(ds) => {
                let images = format!("{name}-images.idx");
                let labels = format!("{name}-labels.idx");
                data::write_idx(&ds, &dir.join(&images), &dir.join(&labels))?;
                DatasetSpec::Idx {
                    images: images.into(),
                    labels: labels.into(),
                }
            }
        };
        let cfg_path = dir.join(format!("{name}.json"));
        let text = serde_json::to_string_pretty(&bench.config(spec))?;
        fs::write(&cfg_path, text).map_err(|e| Error::io(&cfg_path, e))?;
        written.push(cfg_path);
    }
    Ok(written)
}

/// Resolves relative dataset paths against `base` (the config's directory).
pub fn resolve_paths(cfg: &mut ExperimentConfig, base: &Path) {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    match &mut cfg.dataset {
        DatasetSpec::Csv { path, .. } => fix(path),
        DatasetSpec::Idx { images, labels } => {
            fix(images);
            fix(labels);
        }
        DatasetSpec::Synthetic { .. } => {}
    }
}
