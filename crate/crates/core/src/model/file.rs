//! JSON model files.
//!
//! ```text
//! {"format_version": 1, "input_dim": d, "num_classes": C,
//!  "layers": [{"weights": [[...], ...], "bias": [...], "activation": "relu"}]}
//! ```
//!
//! Weights are written as shortest round-trip decimals, so a save/load cycle
//! is bit-exact.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize};

use super::{Activation, DenseLayer, MlpModel};
use crate::{Error, Result, Scalar};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct ModelOut<'a> {
    format_version: u32,
    input_dim: usize,
    num_classes: usize,
    layers: Vec<LayerOut<'a>>,
}

#[derive(Serialize)]
struct LayerOut<'a> {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: &'a str,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelIn {
    format_version: u32,
    input_dim: usize,
    num_classes: usize,
    layers: Vec<LayerIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerIn {
    weights: Vec<Vec<FileNum>>,
    bias: Vec<FileNum>,
    activation: Activation,
}

/// Weight value as found in a file. Besides JSON numbers, the strings
/// `"NaN"`, `"inf"`, `"-inf"` are accepted here so that they are reported
/// as validation failures rather than as opaque syntax errors.
struct FileNum(f64);

impl<'de> Deserialize<'de> for FileNum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct NumVisitor;

        impl Visitor<'_> for NumVisitor {
            type Value = FileNum;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<FileNum, E> {
                Ok(FileNum(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<FileNum, E> {
                Ok(FileNum(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<FileNum, E> {
                Ok(FileNum(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<FileNum, E> {
                match v.to_ascii_lowercase().as_str() {
                    "nan" => Ok(FileNum(f64::NAN)),
                    "inf" | "+inf" | "infinity" => Ok(FileNum(f64::INFINITY)),
                    "-inf" | "-infinity" => Ok(FileNum(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        d.deserialize_any(NumVisitor)
    }
}

fn to_scalar<T: Scalar>(v: f64) -> T {
    // NaN/inf map through unchanged and are caught by layer validation.
    T::from_f64(v).unwrap_or_else(T::nan)
}

pub fn model_to_json<T: Scalar>(model: &MlpModel<T>) -> String {
    let layers = model
        .layers()
        .iter()
        .map(|l| LayerOut {
            weights: l
                .rows()
                .map(|row| row.iter().map(|w| w.as_f64()).collect())
                .collect(),
            bias: l.bias().iter().map(|b| b.as_f64()).collect(),
            activation: l.activation().name(),
        })
        .collect();
    let out = ModelOut {
        format_version: MODEL_FORMAT_VERSION,
        input_dim: model.input_dim(),
        num_classes: model.num_classes(),
        layers,
    };
    let mut s = serde_json::to_string_pretty(&out).expect("model serializes");
    s.push('\n');
    s
}

pub fn model_from_json<T: Scalar>(text: &str) -> Result<MlpModel<T>> {
    let raw: ModelIn = serde_json::from_str(text).map_err(|e| {
        Error::Parse(format!("model file, line {} column {}: {e}", e.line(), e.column()))
    })?;
    if raw.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported format_version {} (expected {MODEL_FORMAT_VERSION})",
            raw.format_version
        )));
    }
    let layers = raw
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            let weights = l
                .weights
                .into_iter()
                .map(|row| row.into_iter().map(|w| to_scalar(w.0)).collect())
                .collect();
            let bias = l.bias.into_iter().map(|b| to_scalar(b.0)).collect();
            DenseLayer::new(weights, bias, l.activation)
                .map_err(|e| Error::Validation(format!("layers[{i}]: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let model = MlpModel::new(layers)?;
    if model.input_dim() != raw.input_dim {
        return Err(Error::Validation(format!(
            "input_dim is {} but the first layer takes {} inputs",
            raw.input_dim,
            model.input_dim()
        )));
    }
    if model.num_classes() != raw.num_classes {
        return Err(Error::Validation(format!(
            "num_classes is {} but the last layer has {} outputs",
            raw.num_classes,
            model.num_classes()
        )));
    }
    Ok(model)
}

pub fn save_model<T: Scalar>(model: &MlpModel<T>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<MlpModel<T>> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}
