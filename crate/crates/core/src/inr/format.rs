//! INRW: a JSON manifest with base64 little-endian float32 weight arrays.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::geometry::{DomainTransform, Point, SignConvention};

use super::{Activation, InrError, InrModel, Layer, MlpParameters};

const MAGIC: &str = "INRW";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct FileTransform {
    center: Vec<f64>,
    scale: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileLayer {
    #[serde(rename = "in")]
    in_dim: usize,
    #[serde(rename = "out")]
    out_dim: usize,
    skip_input: bool,
    weights_b64: String,
    bias_b64: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct FileManifest {
    magic: String,
    version: u32,
    in_dim: usize,
    activation: String,
    beta: f64,
    sign_convention: SignConvention,
    transform: FileTransform,
    layers: Vec<FileLayer>,
}

fn decode_f32(field: &str, text: &str) -> Result<Vec<f64>, InrError> {
    let bytes = STANDARD
        .decode(text.trim())
        .map_err(|e| InrError::Format(format!("{field}: invalid base64: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(InrError::Format(format!(
            "{field}: {} bytes is not a whole number of float32 values",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn encode_f32(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(4 * values.len());
    for v in values {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    STANDARD.encode(bytes)
}

/// Parses an INRW document. Weights are widened from float32 to f64.
pub fn parse_inrw(text: &str) -> Result<InrModel, InrError> {
    let m: FileManifest =
        serde_json::from_str(text).map_err(|e| InrError::Format(format!("bad JSON: {e}")))?;
    if m.magic != MAGIC {
        return Err(InrError::Format(format!("bad magic {:?}", m.magic)));
    }
    if m.version != VERSION {
        return Err(InrError::Format(format!("unsupported version {}", m.version)));
    }
    let activation = match m.activation.as_str() {
        "softplus" => Activation::Softplus { beta: m.beta },
        "relu" => Activation::Relu,
        other => return Err(InrError::Format(format!("unknown activation {other:?}"))),
    };
    if m.transform.center.len() != m.in_dim {
        return Err(InrError::DimensionMismatch(format!(
            "transform center has {} components for in_dim {}",
            m.transform.center.len(),
            m.in_dim
        )));
    }
    let mut center = Point::zeros();
    for (k, c) in m.transform.center.iter().enumerate() {
        center[k] = *c;
    }
    let layers = m
        .layers
        .iter()
        .enumerate()
        .map(|(k, l)| {
            Ok(Layer {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                skip_input: l.skip_input,
                weights: decode_f32(&format!("layer {k} weights"), &l.weights_b64)?,
                bias: decode_f32(&format!("layer {k} bias"), &l.bias_b64)?,
            })
        })
        .collect::<Result<Vec<_>, InrError>>()?;
    let params = MlpParameters {
        in_dim: m.in_dim,
        activation,
        layers,
    };
    InrModel::new(
        params,
        DomainTransform {
            center,
            scale: m.transform.scale,
        },
        m.sign_convention,
    )
}

pub fn load_inrw(path: &Path) -> Result<InrModel, InrError> {
    parse_inrw(&std::fs::read_to_string(path)?)
}

/// Serializes a model; weights are narrowed to float32.
pub fn to_inrw_json(model: &InrModel) -> String {
    let (activation, beta) = match model.params.activation {
        Activation::Softplus { beta } => ("softplus", beta),
        Activation::Relu => ("relu", 0.0),
    };
    let manifest = FileManifest {
        magic: MAGIC.into(),
        version: VERSION,
        in_dim: model.in_dim(),
        activation: activation.into(),
        beta,
        sign_convention: model.sign,
        transform: FileTransform {
            center: model.transform.center.as_slice()[..model.in_dim()].to_vec(),
            scale: model.transform.scale,
        },
        layers: model
            .params
            .layers
            .iter()
            .map(|l| FileLayer {
                in_dim: l.in_dim,
                out_dim: l.out_dim,
                skip_input: l.skip_input,
                weights_b64: encode_f32(&l.weights),
                bias_b64: encode_f32(&l.bias),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&manifest).expect("manifest serializes")
}

pub fn save_inrw(model: &InrModel, path: &Path) -> Result<(), InrError> {
    std::fs::write(path, to_inrw_json(model))?;
    Ok(())
}
