//! Labeled vector and image datasets, CSV and IDX ingestion, and seeded
//! per-class train/test splitting.
//!
//! Samples are stored as columns: a dataset with `n` samples of dimension `d`
//! holds a `d x n` matrix.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn count_classes(labels: &[usize]) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let c = labels.iter().max().map_or(0, |&m| m + 1);
    let mut counts = vec![0usize; c];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&k| k == 0) {
        return Err(Error::InvalidParam(format!(
            "labels must cover 0..{c}; class {missing} has no samples"
        )));
    }
    Ok(counts)
}

fn default_names(c: usize) -> Vec<String> {
    (0..c).map(|i| i.to_string()).collect()
}

/// Re-encodes raw labels to dense ids in first-appearance order.
fn encode_labels<I: IntoIterator<Item = String>>(raw: I) -> (Vec<usize>, Vec<String>) {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut names = Vec::new();
    let labels = raw
        .into_iter()
        .map(|name| {
            *ids.entry(name.clone()).or_insert_with(|| {
                names.push(name);
                names.len() - 1
            })
        })
        .collect();
    (labels, names)
}

/// A `d x n` feature matrix with one integer class label per column.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: DMatrix<f64>,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
    class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(x: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        let c = labels.iter().max().map_or(0, |&m| m + 1);
        Self::with_class_names(x, labels, default_names(c))
    }

    pub fn with_class_names(
        x: DMatrix<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if x.ncols() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples but {} labels",
                x.ncols(),
                labels.len()
            )));
        }
        let class_counts = count_classes(&labels)?;
        if x.nrows() == 0 {
            return Err(Error::InvalidParam("samples have zero features".into()));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if class_names.len() != class_counts.len() {
            return Err(Error::InvalidParam(format!(
                "{} class names for {} classes",
                class_names.len(),
                class_counts.len()
            )));
        }
        Ok(Self {
            x,
            labels,
            class_counts,
            class_names,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Feature dimension `d`.
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    /// Sample count `n`.
    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Class count `c`.
    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    /// Same labels, new features (one column per sample).
    pub fn with_features(&self, x: DMatrix<f64>) -> Result<Self> {
        Self::with_class_names(x, self.labels.clone(), self.class_names.clone())
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let x = self.x.select_columns(idx);
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::with_class_names(x, labels, self.class_names.clone())
    }
}

/// A set of equally-shaped `d1 x d2` samples with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset2D {
    samples: Vec<DMatrix<f64>>,
    labels: Vec<usize>,
    class_counts: Vec<usize>,
    class_names: Vec<String>,
    d1: usize,
    d2: usize,
}

impl Dataset2D {
    pub fn new(samples: Vec<DMatrix<f64>>, labels: Vec<usize>) -> Result<Self> {
        let c = labels.iter().max().map_or(0, |&m| m + 1);
        Self::with_class_names(samples, labels, default_names(c))
    }

    pub fn with_class_names(
        samples: Vec<DMatrix<f64>>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        let class_counts = count_classes(&labels)?;
        let (d1, d2) = samples[0].shape();
        if d1 == 0 || d2 == 0 {
            return Err(Error::InvalidParam("samples have an empty dimension".into()));
        }
        if let Some(bad) = samples.iter().position(|s| s.shape() != (d1, d2)) {
            return Err(Error::ShapeMismatch(format!(
                "sample {bad} is {:?}, expected {:?}",
                samples[bad].shape(),
                (d1, d2)
            )));
        }
        if !samples.iter().all(|s| s.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite);
        }
        if class_names.len() != class_counts.len() {
            return Err(Error::InvalidParam(format!(
                "{} class names for {} classes",
                class_names.len(),
                class_counts.len()
            )));
        }
        Ok(Self {
            samples,
            labels,
            class_counts,
            class_names,
            d1,
            d2,
        })
    }

    pub fn samples(&self) -> &[DMatrix<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Sample height.
    pub fn d1(&self) -> usize {
        self.d1
    }

    /// Sample width.
    pub fn d2(&self) -> usize {
        self.d2
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let samples = idx.iter().map(|&i| self.samples[i].clone()).collect();
        let labels = idx.iter().map(|&i| self.labels[i]).collect();
        Self::with_class_names(samples, labels, self.class_names.clone())
    }
}

/// Column-major vectorization: entry `(i, j)` lands at `j * d1 + i`.
pub fn flatten(ds: &Dataset2D) -> LabeledDataset {
    let mut x = DMatrix::zeros(ds.d1 * ds.d2, ds.len());
    for (j, s) in ds.samples.iter().enumerate() {
        x.column_mut(j).copy_from_slice(s.as_slice());
    }
    LabeledDataset::with_class_names(x, ds.labels.clone(), ds.class_names.clone())
        .expect("flattening preserves dataset invariants")
}

/// Inverse of the per-sample vectorization used by [`flatten`].
pub fn unflatten(v: &DVector<f64>, d1: usize, d2: usize) -> Result<DMatrix<f64>> {
    if v.len() != d1 * d2 {
        return Err(Error::ShapeMismatch(format!(
            "vector of length {} cannot be reshaped to {d1}x{d2}",
            v.len()
        )));
    }
    Ok(DMatrix::from_column_slice(d1, d2, v.as_slice()))
}

/// Reads a comma-separated file. `label_column` is a zero-based column index;
/// every other column must hold a finite real.
pub fn load_csv(path: &Path, has_header: bool, label_column: usize) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut width = None;
    let mut features: Vec<f64> = Vec::new();
    let mut raw_labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected || label_column >= expected {
            return Err(Error::Parse {
                line,
                column: expected.min(record.len()) + 1,
                value: format!("<{} fields, expected {expected}>", record.len()),
            });
        }
        for (col, cell) in record.iter().enumerate() {
            if col == label_column {
                raw_labels.push(cell.to_string());
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => features.push(v),
                _ => {
                    return Err(Error::Parse {
                        line,
                        column: col + 1,
                        value: cell.to_string(),
                    })
                }
            }
        }
    }

    let n = raw_labels.len();
    let d = width.map_or(0, |w| w - 1);
    if n == 0 || d == 0 {
        return Err(Error::EmptyDataset);
    }
    let (labels, names) = encode_labels(raw_labels);
    if names.len() < 2 {
        return Err(Error::SingleClass);
    }
    let x = DMatrix::from_column_slice(d, n, &features);
    LabeledDataset::with_class_names(x, labels, names)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            line,
            column: 0,
            value: format!("{other:?}"),
        },
    }
}

/// CSV text with the label (class name) in the first column.
pub fn csv_string(ds: &LabeledDataset) -> String {
    let mut out = String::new();
    out.push_str("label");
    for i in 0..ds.dim() {
        out.push_str(&format!(",f{i}"));
    }
    out.push('\n');
    for (j, col) in ds.x.column_iter().enumerate() {
        out.push_str(&ds.class_names[ds.labels[j]]);
        for v in col.iter() {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    fs::write(path, csv_string(ds)).map_err(|e| Error::io(path, e))
}

fn read_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Truncated {
            path: path.to_path_buf(),
            expected: offset + 4,
            found: bytes.len(),
        })
}

/// Reads an IDX image/label pair (MNIST layout). Pixels are scaled to `[0, 1]`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset2D> {
    let images = fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let labels = fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;

    let magic = read_u32(&images, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            path: images_path.to_path_buf(),
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32(&images, 4, images_path)? as usize;
    let rows = read_u32(&images, 8, images_path)? as usize;
    let cols = read_u32(&images, 12, images_path)? as usize;

    let magic = read_u32(&labels, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            path: labels_path.to_path_buf(),
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let label_count = read_u32(&labels, 4, labels_path)? as usize;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }
    let pixels = count * rows * cols;
    if images.len() < 16 + pixels {
        return Err(Error::Truncated {
            path: images_path.to_path_buf(),
            expected: 16 + pixels,
            found: images.len(),
        });
    }
    if labels.len() < 8 + count {
        return Err(Error::Truncated {
            path: labels_path.to_path_buf(),
            expected: 8 + count,
            found: labels.len(),
        });
    }
    if count == 0 {
        return Err(Error::EmptyDataset);
    }

    let samples = images[16..16 + pixels]
        .chunks_exact(rows * cols)
        .map(|img| DMatrix::from_row_iterator(rows, cols, img.iter().map(|&b| b as f64 / 255.0)))
        .collect();
    let (labels, names) = encode_labels(labels[8..8 + count].iter().map(|b| b.to_string()));
    Dataset2D::with_class_names(samples, labels, names)
}

/// Writes an IDX image/label pair. Pixels are clamped to `[0, 1]` and rounded
/// to the nearest of 256 levels; class names must parse as `u8`.
pub fn write_idx(ds: &Dataset2D, images_path: &Path, labels_path: &Path) -> Result<()> {
    let mut images = Vec::with_capacity(16 + ds.len() * ds.d1 * ds.d2);
    images.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    images.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    images.extend_from_slice(&(ds.d1 as u32).to_be_bytes());
    images.extend_from_slice(&(ds.d2 as u32).to_be_bytes());
    for s in &ds.samples {
        for i in 0..ds.d1 {
            for j in 0..ds.d2 {
                images.push((s[(i, j)].clamp(0.0, 1.0) * 255.0).round() as u8);
            }
        }
    }
    let mut labels = Vec::with_capacity(8 + ds.len());
    labels.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    for &l in &ds.labels {
        let byte = ds.class_names[l].parse::<u8>().map_err(|_| {
            Error::InvalidParam(format!("class name {:?} is not a byte", ds.class_names[l]))
        })?;
        labels.push(byte);
    }
    let write = |path: &Path, bytes: &[u8]| {
        fs::File::create(path)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|e| Error::io(path, e))
    };
    write(images_path, &images)?;
    write(labels_path, &labels)
}

/// Per-class sample amount: an absolute count or a fraction of the class size
/// (rounded down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Amount {
    Count(usize),
    Fraction(f64),
}

impl Amount {
    fn resolve(self, class_size: usize) -> Result<usize> {
        match self {
            Amount::Count(k) => Ok(k),
            Amount::Fraction(f) if f > 0.0 && f <= 1.0 => Ok((f * class_size as f64).floor() as usize),
            Amount::Fraction(f) => Err(Error::InvalidParam(format!(
                "split fraction must lie in (0, 1], got {f}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_per_class: Amount,
    pub test_per_class: Amount,
}

/// Per-class sampling without replacement. Returns ascending train and test
/// index lists.
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let counts = count_classes(labels)?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = seed::rng(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class.into_iter().enumerate() {
        let available = members.len();
        let n_train = spec.train_per_class.resolve(available)?;
        let n_test = spec.test_per_class.resolve(available)?;
        if n_train == 0 || n_test == 0 || n_train + n_test > available {
            return Err(Error::InsufficientSamples {
                class,
                available,
                train: n_train,
                test: n_test,
            });
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..n_train + n_test]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Datasets that can be partitioned by [`split`].
pub trait Splittable: Sized {
    fn sample_labels(&self) -> &[usize];
    fn select(&self, idx: &[usize]) -> Result<Self>;
}

impl Splittable for LabeledDataset {
    fn sample_labels(&self) -> &[usize] {
        self.labels()
    }
    fn select(&self, idx: &[usize]) -> Result<Self> {
        self.subset(idx)
    }
}

impl Splittable for Dataset2D {
    fn sample_labels(&self) -> &[usize] {
        self.labels()
    }
    fn select(&self, idx: &[usize]) -> Result<Self> {
        self.subset(idx)
    }
}

pub fn split<T: Splittable>(ds: &T, spec: &SplitSpec) -> Result<(T, T)> {
    let (train, test) = split_indices(ds.sample_labels(), spec)?;
    Ok((ds.select(&train)?, ds.select(&test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn write(dir: &tempfile::TempDir, name: &str, contents: &[u8]) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, contents).unwrap();
        p
    }

    #[test]
    fn csv_transcription() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"label,x\na,0\na,2\nb,4\nb,6\n");
        let ds = load_csv(&p, true, 0).unwrap();
        assert_eq!((ds.dim(), ds.len(), ds.num_classes()), (1, 4, 2));
        assert_eq!(ds.class_counts(), &[2, 2]);
        assert_eq!(ds.x().as_slice(), &[0.0, 2.0, 4.0, 6.0]);
        assert_eq!(ds.class_names(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn csv_label_in_last_column_without_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"1,2,z\n3,4,y\n5,6,z\n");
        let ds = load_csv(&p, false, 2).unwrap();
        assert_eq!(ds.labels(), &[0, 1, 0]);
        assert_eq!(ds.x().column(1).as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn csv_parse_error_names_row_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"label,x,y\na,0,1\nb,oops,2\n");
        match load_csv(&p, true, 0) {
            Err(Error::Parse { line, column, value }) => {
                assert_eq!((line, column), (3, 2));
                assert_eq!(value, "oops");
            }
            other => panic!("unexpected {other:?}"),
        }
        let p = write(&dir, "b.csv", b"a,1\nb,NaN\n");
        assert!(matches!(load_csv(&p, false, 0), Err(Error::Parse { line: 2, .. })));
        let p = write(&dir, "c.csv", b"a,1\nb,2,3\n");
        assert!(matches!(load_csv(&p, false, 0), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn csv_single_class_and_empty() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", b"a,1\na,2\n");
        assert!(matches!(load_csv(&p, false, 0), Err(Error::SingleClass)));
        let p = write(&dir, "b.csv", b"label,x\n");
        assert!(matches!(load_csv(&p, true, 0), Err(Error::EmptyDataset)));
        let missing = dir.path().join("missing.csv");
        assert!(matches!(load_csv(&missing, true, 0), Err(Error::Io { .. })));
    }

    fn idx_pair(count: u32, label_count: u32, label_magic: u32) -> (Vec<u8>, Vec<u8>) {
        let mut images = IDX_IMAGES_MAGIC.to_be_bytes().to_vec();
        images.extend(count.to_be_bytes());
        images.extend(28u32.to_be_bytes());
        images.extend(28u32.to_be_bytes());
        images.extend((0..count * 28 * 28).map(|i| (i % 256) as u8));
        let mut labels = label_magic.to_be_bytes().to_vec();
        labels.extend(label_count.to_be_bytes());
        labels.extend((0..label_count).map(|i| (i % 3) as u8));
        (images, labels)
    }

    #[test]
    fn idx_valid_pair() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = idx_pair(10, 10, IDX_LABELS_MAGIC);
        let ds = load_idx(&write(&dir, "i", &img), &write(&dir, "l", &lab)).unwrap();
        assert_eq!((ds.len(), ds.d1(), ds.d2()), (10, 28, 28));
        assert_eq!(ds.samples()[0][(0, 1)], 1.0 / 255.0);
        assert_eq!(ds.samples()[0][(1, 0)], 28.0 / 255.0);
        assert!(ds.samples().iter().all(|s| s.iter().all(|&v| (0.0..=1.0).contains(&v))));
    }

    #[test]
    fn idx_error_paths() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lab) = idx_pair(10, 10, IDX_IMAGES_MAGIC);
        let r = load_idx(&write(&dir, "i", &img), &write(&dir, "l", &lab));
        assert!(matches!(r, Err(Error::BadMagic { found: 0x803, .. })));

        let (img, lab) = idx_pair(10, 9, IDX_LABELS_MAGIC);
        let r = load_idx(&write(&dir, "i", &img), &write(&dir, "l", &lab));
        assert!(matches!(r, Err(Error::CountMismatch { images: 10, labels: 9 })));

        let (img, lab) = idx_pair(10, 10, IDX_LABELS_MAGIC);
        let r = load_idx(&write(&dir, "i", &img[..img.len() - 1]), &write(&dir, "l", &lab));
        assert!(matches!(r, Err(Error::Truncated { .. })));
        let r = load_idx(&write(&dir, "i", &img[..6]), &write(&dir, "l", &lab));
        assert!(matches!(r, Err(Error::Truncated { .. })));
    }

    #[test]
    fn idx_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<_> = (0..4)
            .map(|k| DMatrix::from_fn(3, 5, |i, j| ((i * 5 + j + k) % 256) as f64 / 255.0))
            .collect();
        let ds = Dataset2D::new(samples, vec![0, 1, 0, 1]).unwrap();
        let (i, l) = (dir.path().join("i"), dir.path().join("l"));
        write_idx(&ds, &i, &l).unwrap();
        assert_eq!(load_idx(&i, &l).unwrap(), ds);
    }

    fn ten_per_class() -> LabeledDataset {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let x = DMatrix::from_fn(2, 30, |i, j| (i * 100 + j) as f64);
        LabeledDataset::new(x, labels).unwrap()
    }

    #[test]
    fn split_is_a_deterministic_partition() {
        let ds = ten_per_class();
        let spec = SplitSpec {
            seed: 7,
            train_per_class: Amount::Count(5),
            test_per_class: Amount::Count(5),
        };
        let (train, test) = split_indices(ds.labels(), &spec).unwrap();
        let a: HashSet<_> = train.iter().collect();
        let b: HashSet<_> = test.iter().collect();
        assert!(a.is_disjoint(&b));
        for class in 0..3 {
            assert_eq!(train.iter().filter(|&&i| ds.labels()[i] == class).count(), 5);
            assert_eq!(test.iter().filter(|&&i| ds.labels()[i] == class).count(), 5);
        }
        assert_eq!(split_indices(ds.labels(), &spec).unwrap(), (train.clone(), test));

        let other = split_indices(ds.labels(), &SplitSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(other.0, train);

        let (tr, te) = split(&ds, &spec).unwrap();
        assert_eq!((tr.len(), te.len()), (15, 15));
    }

    #[test]
    fn split_fraction_and_errors() {
        let ds = ten_per_class();
        let half = SplitSpec {
            seed: 1,
            train_per_class: Amount::Fraction(0.5),
            test_per_class: Amount::Fraction(0.5),
        };
        let (tr, te) = split_indices(ds.labels(), &half).unwrap();
        assert_eq!((tr.len(), te.len()), (15, 15));
        let bad = SplitSpec {
            seed: 1,
            train_per_class: Amount::Count(8),
            test_per_class: Amount::Count(5),
        };
        assert!(matches!(
            split_indices(ds.labels(), &bad),
            Err(Error::InsufficientSamples { class: 0, .. })
        ));
    }

    #[test]
    fn amount_deserializes_counts_and_fractions() {
        assert_eq!(serde_json::from_str::<Amount>("5").unwrap(), Amount::Count(5));
        assert_eq!(serde_json::from_str::<Amount>("0.5").unwrap(), Amount::Fraction(0.5));
    }

    #[test]
    fn flatten_is_column_major() {
        let img = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let zero = DMatrix::zeros(2, 2);
        let ds = Dataset2D::new(vec![img.clone(), zero], vec![0, 1]).unwrap();
        let flat = flatten(&ds);
        assert_eq!(flat.x().column(0).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert!(flat.x().column(1).iter().all(|&v| v == 0.0));
        assert_eq!(flat.labels(), ds.labels());
        let back = unflatten(&flat.x().column(0).into_owned(), 2, 2).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn dataset_invariants() {
        let x = DMatrix::zeros(2, 3);
        assert!(LabeledDataset::new(x.clone(), vec![0, 2, 2]).is_err());
        assert!(LabeledDataset::new(x.clone(), vec![0, 1]).is_err());
        let mut y = x.clone();
        y[(0, 0)] = f64::NAN;
        assert!(matches!(LabeledDataset::new(y, vec![0, 1, 1]), Err(Error::NonFinite)));
        let mixed = vec![DMatrix::zeros(2, 2), DMatrix::zeros(2, 3)];
        assert!(matches!(Dataset2D::new(mixed, vec![0, 1]), Err(Error::ShapeMismatch(_))));
    }
}
