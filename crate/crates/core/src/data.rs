//! Labeled datasets: IDX (MNIST) and CSV loaders, synthetic blobs.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::check_domain;
use crate::{Error, Result, Scalar};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// `n × d` inputs in `[0,1]` with class labels below `num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T: Scalar> {
    inputs: Vec<T>,
    dim: usize,
    labels: Vec<usize>,
    num_classes: usize,
    split: Split,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(inputs: Vec<Vec<T>>, labels: Vec<usize>, num_classes: usize, split: Split) -> Result<Self> {
        let dim = inputs.first().map_or(0, Vec::len);
        if let Some(i) = inputs.iter().position(|x| x.len() != dim) {
            return Err(Error::Validation(format!(
                "input {i} has {} features, expected {dim}",
                inputs[i].len()
            )));
        }
        Self::from_flat(inputs.concat(), dim, labels, num_classes, split)
    }

    pub fn from_flat(
        inputs: Vec<T>,
        dim: usize,
        labels: Vec<usize>,
        num_classes: usize,
        split: Split,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Data("dataset must contain at least one point".into()));
        }
        if dim == 0 || inputs.len() != dim * labels.len() {
            return Err(Error::Validation(format!(
                "{} input values do not form {} rows of dimension {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Err(Error::InputDomain { index, value }) = check_domain(&inputs) {
            return Err(Error::Validation(format!(
                "point {}, feature {} = {value} outside [0, 1]",
                index / dim,
                index % dim
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y >= num_classes) {
            return Err(Error::Validation(format!(
                "point {i} has label {} but only {num_classes} classes",
                labels[i]
            )));
        }
        Ok(LabeledDataset {
            inputs,
            dim,
            labels,
            num_classes,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn input(&self, i: usize) -> &[T] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter_inputs(&self) -> impl Iterator<Item = &[T]> {
        self.inputs.chunks_exact(self.dim)
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// Widens the class count, e.g. when a data subset lacks the top classes.
    pub fn with_num_classes(mut self, num_classes: usize) -> Result<Self> {
        if let Some(&y) = self.labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Validation(format!(
                "label {y} does not fit {num_classes} classes"
            )));
        }
        self.num_classes = num_classes;
        Ok(self)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::param(format!("index {i} out of range for {} points", self.len())));
        }
        let inputs = indices.iter().flat_map(|&i| self.input(i).iter().copied()).collect();
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Self::from_flat(inputs, self.dim, labels, self.num_classes, self.split)
    }
}

fn read_be_u32(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse(format!("{what}: truncated header")))
}

/// Loads an IDX image/label pair (MNIST layout). Pixels are scaled by 1/255
/// and each image is flattened row-major. The class count is the largest
/// label plus one (at least 2).
pub fn load_idx<T: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    limit: Option<usize>,
) -> Result<LabeledDataset<T>> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;

    let magic = read_be_u32(&images, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse(format!("images: bad magic number {magic:#010x}")));
    }
    let n_images = read_be_u32(&images, 4, "images")? as usize;
    let rows = read_be_u32(&images, 8, "images")? as usize;
    let cols = read_be_u32(&images, 12, "images")? as usize;

    let magic = read_be_u32(&labels, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse(format!("labels: bad magic number {magic:#010x}")));
    }
    let n_labels = read_be_u32(&labels, 4, "labels")? as usize;

    if n_images != n_labels {
        return Err(Error::Validation(format!(
            "{n_images} images but {n_labels} labels"
        )));
    }
    let dim = rows * cols;
    if images.len() < 16 + n_images * dim {
        return Err(Error::Parse(format!(
            "images: expected {} pixel bytes, found {}",
            n_images * dim,
            images.len() - 16
        )));
    }
    if labels.len() < 8 + n_labels {
        return Err(Error::Parse(format!(
            "labels: expected {n_labels} label bytes, found {}",
            labels.len() - 8
        )));
    }

    let n = limit.map_or(n_images, |l| l.min(n_images));
    let inputs = images[16..16 + n * dim]
        .iter()
        .map(|&b| T::lit(b as f64 / 255.0))
        .collect();
    let labels: Vec<usize> = labels[8..8 + n].iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    LabeledDataset::from_flat(inputs, dim, labels, num_classes, Split::Train)
}

/// Writes `data` as an IDX image/label pair of `rows × cols` images. Values
/// are quantized to `round(255 v)`.
pub fn write_idx<T: Scalar>(
    data: &LabeledDataset<T>,
    rows: usize,
    cols: usize,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    if rows * cols != data.dim() {
        return Err(Error::param(format!(
            "{rows}x{cols} images do not match dimension {}",
            data.dim()
        )));
    }
    if let Some(&y) = data.labels().iter().find(|&&y| y > 255) {
        return Err(Error::param(format!("label {y} does not fit in a byte")));
    }
    let n = data.len() as u32;
    let mut img = Vec::with_capacity(16 + data.inputs.len());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&n.to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    img.extend(data.inputs.iter().map(|v| (v.as_f64() * 255.0).round() as u8));
    let mut lab = Vec::with_capacity(8 + data.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    lab.extend(data.labels().iter().map(|&y| y as u8));
    std::fs::write(images_path, img)?;
    std::fs::write(labels_path, lab)?;
    Ok(())
}

/// Headerless CSV: `d` feature columns in `[0,1]` followed by an integer label.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, num_classes: usize) -> Result<LabeledDataset<T>> {
    let file = std::fs::File::open(path)?;
    parse_csv(file, num_classes)
}

pub(crate) fn parse_csv<T: Scalar, R: std::io::Read>(reader: R, num_classes: usize) -> Result<LabeledDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        if record.len() < 2 {
            return Err(Error::Parse(format!(
                "row {row}: need at least one feature and a label"
            )));
        }
        let d = record.len() - 1;
        if *dim.get_or_insert(d) != d {
            return Err(Error::Parse(format!("row {row}: expected {} features, got {d}", dim.unwrap())));
        }
        for (col, cell) in record.iter().take(d).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}, column {}: '{cell}' is not a number", col + 1)))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Validation(format!(
                    "row {row}, column {}: feature {v} outside [0, 1]",
                    col + 1
                )));
            }
            inputs.push(T::lit(v));
        }
        let cell = &record[d];
        let y: usize = cell
            .parse()
            .map_err(|_| Error::Parse(format!("row {row}: label '{cell}' is not a class index")))?;
        if y >= num_classes {
            return Err(Error::Validation(format!(
                "row {row}: label {y} out of range for {num_classes} classes"
            )));
        }
        labels.push(y);
    }
    LabeledDataset::from_flat(inputs, dim.unwrap_or(0), labels, num_classes, Split::Train)
}

/// `n` points from isotropic Gaussian clouds around 2D `centers`, clipped to
/// the unit square. Point `i` belongs to class `i mod centers.len()`.
pub fn make_blobs<T: Scalar>(n: usize, centers: &[[f64; 2]], spread: f64, seed: u64) -> Result<LabeledDataset<T>> {
    if n == 0 {
        return Err(Error::param("blob count must be at least 1"));
    }
    if centers.is_empty() {
        return Err(Error::param("at least one blob center is required"));
    }
    if let Some(c) = centers.iter().find(|c| c.iter().any(|v| !(0.0..=1.0).contains(v))) {
        return Err(Error::param(format!("blob center {c:?} outside the unit square")));
    }
    if !spread.is_finite() || spread <= 0.0 {
        return Err(Error::param(format!("spread must be positive, got {spread}")));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| Error::param(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % centers.len();
        for &c in &centers[label] {
            inputs.push(T::lit((c + noise.sample(&mut rng)).clamp(0.0, 1.0)));
        }
        labels.push(label);
    }
    LabeledDataset::from_flat(inputs, 2, labels, centers.len(), Split::Train)
}
