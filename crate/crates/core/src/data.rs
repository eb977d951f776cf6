//! Multi-view dataset representation and the on-disk directory format.
//!
//! A dataset directory holds `meta.json`, one feature file per view (raw
//! little-endian f64 row-major, or CSV), and `labels.csv` with one 0-based
//! integer class per line. `meta.json` records dims and SHA-256 checksums of
//! every data file; loads verify them.

use crate::error::{Error, Result};
use crate::loss::SoftLabel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// Dense row-major feature matrix for one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidArgument(
                "feature matrix needs at least one column".into(),
            ));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "feature matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "feature matrix must contain finite values".into(),
            ));
        }
        Ok(FeatureMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// SHA-256 over dims and raw little-endian bytes; used to key graph
    /// cache files to their feature matrix.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.rows as u64).to_le_bytes());
        hasher.update((self.cols as u64).to_le_bytes());
        for v in &self.data {
            hasher.update(v.to_le_bytes());
        }
        hex(&hasher.finalize())
    }

    fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

fn hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Encoding of a view's feature file on disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewFormat {
    /// Raw little-endian f64, row-major.
    #[serde(rename = "f64le")]
    F64le,
    #[serde(rename = "csv")]
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ViewMeta {
    file: String,
    dim: usize,
    format: ViewFormat,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaFile {
    name: String,
    classes: usize,
    views: Vec<ViewMeta>,
    labels_file: String,
    #[serde(default)]
    checksums: BTreeMap<String, String>,
}

/// N instances observed through V feature views, with one label each.
/// Labels are stored as probability vectors; freshly loaded datasets are
/// one-hot, refinement may replace individual labels with mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewDataset {
    pub name: String,
    classes: usize,
    views: Vec<FeatureMatrix>,
    labels: Vec<SoftLabel>,
}

impl MultiViewDataset {
    pub fn new(
        name: impl Into<String>,
        classes: usize,
        views: Vec<FeatureMatrix>,
        labels: Vec<SoftLabel>,
    ) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(
                "dataset needs at least two classes".into(),
            ));
        }
        if views.is_empty() {
            return Err(Error::InvalidArgument(
                "dataset needs at least one view".into(),
            ));
        }
        let n = labels.len();
        for (i, v) in views.iter().enumerate() {
            if v.rows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {i} has {} rows but there are {n} labels",
                    v.rows()
                )));
            }
        }
        for (i, l) in labels.iter().enumerate() {
            if l.class_count() != classes {
                return Err(Error::DimensionMismatch(format!(
                    "label {i} covers {} classes, dataset has {classes}",
                    l.class_count()
                )));
            }
        }
        Ok(MultiViewDataset {
            name: name.into(),
            classes,
            views,
            labels,
        })
    }

    pub fn from_hard_labels(
        name: impl Into<String>,
        classes: usize,
        views: Vec<FeatureMatrix>,
        labels: &[usize],
    ) -> Result<Self> {
        let soft = labels
            .iter()
            .map(|&c| SoftLabel::one_hot(c, classes))
            .collect::<Result<Vec<_>>>()?;
        MultiViewDataset::new(name, classes, views, soft)
    }

    pub fn instances(&self) -> usize {
        self.labels.len()
    }

    pub fn view_count(&self) -> usize {
        self.views.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn view(&self, v: usize) -> &FeatureMatrix {
        &self.views[v]
    }

    pub fn view_mut(&mut self, v: usize) -> &mut FeatureMatrix {
        &mut self.views[v]
    }

    pub fn views(&self) -> &[FeatureMatrix] {
        &self.views
    }

    pub fn label(&self, i: usize) -> &SoftLabel {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[SoftLabel] {
        &self.labels
    }

    pub fn set_label(&mut self, i: usize, label: SoftLabel) -> Result<()> {
        if label.class_count() != self.classes {
            return Err(Error::DimensionMismatch(format!(
                "label covers {} classes, dataset has {}",
                label.class_count(),
                self.classes
            )));
        }
        self.labels[i] = label;
        Ok(())
    }

    /// Argmax labels, ties toward the lowest class index.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.hard()).collect()
    }

    /// New dataset holding the given instances, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<MultiViewDataset> {
        for &i in indices {
            if i >= self.instances() {
                return Err(Error::InvalidArgument(format!(
                    "subset index {i} out of range for {} instances",
                    self.instances()
                )));
            }
        }
        let views = self
            .views
            .iter()
            .map(|v| {
                let mut data = Vec::with_capacity(indices.len() * v.cols());
                for &i in indices {
                    data.extend_from_slice(v.row(i));
                }
                FeatureMatrix::new(indices.len(), v.cols(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        MultiViewDataset::new(self.name.clone(), self.classes, views, labels)
    }
}

/// Seeded shuffle then split: the test part takes round(fraction * N)
/// instances. Both parts keep the original instance order internally;
/// returned as (train, test).
pub fn split(
    dataset: &MultiViewDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(MultiViewDataset, MultiViewDataset)> {
    if !(0.0..1.0).contains(&test_fraction) || test_fraction <= 0.0 {
        return Err(Error::Config(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = dataset.instances();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "cannot split a dataset with fewer than two instances".into(),
        ));
    }
    let n_test = ((test_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut test_idx = order[..n_test].to_vec();
    let mut train_idx = order[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((dataset.subset(&train_idx)?, dataset.subset(&test_idx)?))
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn parse_csv_matrix(path: &Path, rows: usize, cols: usize) -> Result<FeatureMatrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let mut data = Vec::with_capacity(rows * cols);
    let mut n_rows = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Data(format!(
                "{}: line {} has {} fields, expected {cols}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{}: line {} has a non-numeric field {f:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            data.push(v);
        }
        n_rows += 1;
    }
    if n_rows != rows {
        return Err(Error::Data(format!(
            "{}: has {n_rows} rows, expected {rows}",
            path.display()
        )));
    }
    FeatureMatrix::new(rows, cols, data)
}

fn parse_binary_matrix(path: &Path, rows: usize, cols: usize) -> Result<FeatureMatrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let expected = rows * cols * 8;
    if bytes.len() != expected {
        return Err(Error::Data(format!(
            "{}: holds {} bytes, expected {expected} ({rows} rows x {cols} dims x 8)",
            path.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMatrix::new(rows, cols, data)
}

fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

/// Loads a dataset directory, verifying shapes, label ranges and checksums.
pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    let meta_path = dir.join("meta.json");
    if !meta_path.exists() {
        return Err(Error::Data(format!(
            "{} is missing meta.json",
            dir.display()
        )));
    }
    let meta: MetaFile = serde_json::from_str(&read_to_string(&meta_path)?)
        .map_err(|e| Error::Data(format!("{}: {e}", meta_path.display())))?;
    if meta.classes < 2 {
        return Err(Error::Data(format!(
            "{}: classes must be at least 2, got {}",
            meta_path.display(),
            meta.classes
        )));
    }

    let labels_path = dir.join(&meta.labels_file);
    let labels_text = read_to_string(&labels_path)?;
    let mut labels = Vec::new();
    for (lineno, line) in labels_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let c: usize = line.trim().parse().map_err(|_| {
            Error::Data(format!(
                "{}: line {} is not a class index: {line:?}",
                labels_path.display(),
                lineno + 1
            ))
        })?;
        if c >= meta.classes {
            return Err(Error::Data(format!(
                "{}: line {} has class {c}, out of range for {} classes",
                labels_path.display(),
                lineno + 1,
                meta.classes
            )));
        }
        labels.push(c);
    }
    if labels.is_empty() {
        return Err(Error::Data(format!(
            "{}: contains no labels",
            labels_path.display()
        )));
    }

    for (file, expected) in &meta.checksums {
        let path = dir.join(file);
        let actual = file_sha256(&path)?;
        if &actual != expected {
            return Err(Error::Data(format!(
                "{}: checksum mismatch (meta.json says {expected}, file hashes to {actual})",
                path.display()
            )));
        }
    }

    let n = labels.len();
    let mut views = Vec::with_capacity(meta.views.len());
    for vm in &meta.views {
        let path = dir.join(&vm.file);
        if !path.exists() {
            return Err(Error::Data(format!(
                "{}: missing view file",
                path.display()
            )));
        }
        let m = match vm.format {
            ViewFormat::F64le => parse_binary_matrix(&path, n, vm.dim)?,
            ViewFormat::Csv => parse_csv_matrix(&path, n, vm.dim)?,
        };
        views.push(m);
    }

    MultiViewDataset::from_hard_labels(meta.name, meta.classes, views, &labels)
}

/// Writes a dataset directory. Labels must be one-hot; refined (soft)
/// labels are a training-time construct and have no file representation.
pub fn save_dataset(dataset: &MultiViewDataset, dir: &Path, format: ViewFormat) -> Result<()> {
    if let Some(bad) = dataset.labels().iter().position(|l| !l.is_hard()) {
        return Err(Error::InvalidArgument(format!(
            "cannot save dataset: label {bad} is soft"
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let mut checksums = BTreeMap::new();
    let mut views_meta = Vec::new();
    for (v, m) in dataset.views().iter().enumerate() {
        let (file, bytes) = match format {
            ViewFormat::F64le => (format!("view{v}.bin"), m.to_le_bytes()),
            ViewFormat::Csv => {
                let mut text = String::new();
                for i in 0..m.rows() {
                    let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
                    text.push_str(&row.join(","));
                    text.push('\n');
                }
                (format!("view{v}.csv"), text.into_bytes())
            }
        };
        let path = dir.join(&file);
        std::fs::write(&path, &bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
        checksums.insert(file.clone(), hex(&Sha256::digest(&bytes)));
        views_meta.push(ViewMeta {
            file,
            dim: m.cols(),
            format,
        });
    }

    let labels_file = "labels.csv".to_string();
    let labels_path = dir.join(&labels_file);
    {
        let mut f = std::fs::File::create(&labels_path)
            .map_err(|e| Error::io(labels_path.display().to_string(), e))?;
        let mut text = String::new();
        for l in dataset.hard_labels() {
            text.push_str(&l.to_string());
            text.push('\n');
        }
        f.write_all(text.as_bytes())
            .map_err(|e| Error::io(labels_path.display().to_string(), e))?;
        checksums.insert(labels_file.clone(), hex(&Sha256::digest(text.as_bytes())));
    }

    let meta = MetaFile {
        name: dataset.name.clone(),
        classes: dataset.classes(),
        views: views_meta,
        labels_file,
        checksums,
    };
    let meta_path = dir.join("meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    std::fs::write(&meta_path, text).map_err(|e| Error::io(meta_path.display().to_string(), e))?;
    Ok(())
}
