//! MNIST idx and csv dataset loaders.

use std::fs;
use std::path::{Path, PathBuf};

use super::ModelError;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self, ModelError> {
        if inputs.len() != labels.len() {
            return Err(ModelError::Format(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let num_classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Dataset {
            inputs,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn width(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

#[derive(Clone, Debug)]
pub enum DatasetSource {
    Idx { images: PathBuf, labels: PathBuf },
    Csv(PathBuf),
}

pub fn load_dataset(source: &DatasetSource) -> Result<Dataset, ModelError> {
    match source {
        DatasetSource::Idx { images, labels } => load_idx(images, labels),
        DatasetSource::Csv(path) => load_csv(path),
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, ModelError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| ModelError::Format("truncated idx header".into()))
}

/// Reads an idx image/label pair; pixels are scaled from bytes to `[0, 1]`.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset, ModelError> {
    let img = fs::read(images)?;
    let lab = fs::read(labels)?;

    let magic = read_u32(&img, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(ModelError::Format(format!(
            "bad image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32(&img, 4)? as usize;
    let rows = read_u32(&img, 8)? as usize;
    let cols = read_u32(&img, 12)? as usize;
    let width = rows * cols;
    let pixels = &img[16..];
    if pixels.len() != count * width {
        return Err(ModelError::Format(format!(
            "image payload has {} bytes, header promises {count}x{rows}x{cols}",
            pixels.len()
        )));
    }

    let magic = read_u32(&lab, 0)?;
    if magic != LABELS_MAGIC {
        return Err(ModelError::Format(format!(
            "bad label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let label_count = read_u32(&lab, 4)? as usize;
    let label_bytes = &lab[8..];
    if label_count != count || label_bytes.len() != count {
        return Err(ModelError::Format(format!(
            "{count} images but {label_count} labels ({} bytes)",
            label_bytes.len()
        )));
    }

    let inputs = if width == 0 {
        vec![Vec::new(); count]
    } else {
        pixels
            .chunks_exact(width)
            .map(|c| c.iter().map(|&b| f64::from(b) / 255.0).collect())
            .collect()
    };
    let labels = label_bytes.iter().map(|&b| usize::from(b)).collect();
    Dataset::new(inputs, labels)
}

/// Writes an idx pair; inputs are quantized to bytes (`round(v * 255)`).
pub fn write_idx(
    data: &Dataset,
    rows: usize,
    cols: usize,
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<(), ModelError> {
    let mut img = Vec::with_capacity(16 + data.len() * rows * cols);
    img.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    for d in [data.len(), rows, cols] {
        img.extend_from_slice(&(d as u32).to_be_bytes());
    }
    for x in &data.inputs {
        if x.len() != rows * cols {
            return Err(ModelError::Format("input width does not match rows*cols".into()));
        }
        img.extend(x.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    let mut lab = Vec::with_capacity(8 + data.len());
    lab.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(data.len() as u32).to_be_bytes());
    for &l in &data.labels {
        let byte = u8::try_from(l).map_err(|_| ModelError::Format(format!("label {l} exceeds a byte")))?;
        lab.push(byte);
    }
    fs::write(images, img)?;
    fs::write(labels, lab)?;
    Ok(())
}

/// One row per sample: label, then the input values.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, ModelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ModelError::Format(e.to_string()))?;
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| ModelError::Format(format!("row {line}: {e}")))?;
        let mut fields = record.iter();
        let label = fields
            .next()
            .ok_or_else(|| ModelError::Format(format!("row {line}: empty")))?;
        let label: usize = label
            .parse()
            .map_err(|_| ModelError::Format(format!("row {line}: bad label `{label}`")))?;
        let row = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| ModelError::Format(format!("row {line}: bad value `{f}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(ModelError::Format(format!(
                    "ragged rows: row {line} has {} values, expected {w}",
                    row.len()
                )))
            }
            _ => {}
        }
        inputs.push(row);
        labels.push(label);
    }
    Dataset::new(inputs, labels)
}
