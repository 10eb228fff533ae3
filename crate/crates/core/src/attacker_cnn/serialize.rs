//! Portable weight files: magic "EMOC1\0", version u16, a JSON header
//! (labels, feature fingerprint, tensor shape/offset table), then raw
//! little-endian f32 tensors in declared order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{ConvLayer, DenseLayer, EmotionLabel, ModelError, ModelParams};

const MAGIC: &[u8; 6] = b"EMOC1\0";
const VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    shape: Vec<usize>,
    /// byte offset into the data region
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    label_list: Vec<EmotionLabel>,
    feature_fingerprint: Option<String>,
    input_cols: usize,
    tensors: Vec<TensorMeta>,
}

pub(crate) fn to_bytes(params: &ModelParams) -> Vec<u8> {
    let mut metas = Vec::new();
    let mut offset = 0usize;
    for (name, (data, shape)) in ModelParams::tensor_names().iter().zip(params.tensors()) {
        metas.push(TensorMeta { name: name.to_string(), shape, offset });
        offset += data.len() * 4;
    }
    let header = Header {
        label_list: params.label_list.clone(),
        feature_fingerprint: Some(params.feature_fingerprint.clone()),
        input_cols: params.input_cols,
        tensors: metas,
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");

    let mut out = Vec::with_capacity(12 + header_json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&header_json);
    for (data, _) in params.tensors() {
        for &v in data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub(crate) fn from_bytes(bytes: &[u8]) -> Result<ModelParams, ModelError> {
    if bytes.len() < 6 || &bytes[..6] != MAGIC {
        return Err(ModelError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(ModelError::Truncated("header prefix".into()));
    }
    let version = u16::from_le_bytes([bytes[6], bytes[7]]);
    if version != VERSION {
        return Err(ModelError::UnsupportedVersion(version));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let data_start = 12 + header_len;
    if bytes.len() < data_start {
        return Err(ModelError::Truncated("json header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[12..data_start])
        .map_err(|e| ModelError::BadHeader(e.to_string()))?;
    let fingerprint = header
        .feature_fingerprint
        .ok_or_else(|| ModelError::MissingField("feature_fingerprint".into()))?;

    let expected_names = ModelParams::tensor_names();
    if header.tensors.len() != expected_names.len() {
        return Err(ModelError::BadHeader(format!(
            "expected {} tensors, header lists {}",
            expected_names.len(),
            header.tensors.len()
        )));
    }
    let data = &bytes[data_start..];
    let mut tensors: Vec<Vec<f64>> = Vec::with_capacity(expected_names.len());
    let mut cursor = 0usize;
    for (meta, expected) in header.tensors.iter().zip(expected_names) {
        if meta.name != expected {
            return Err(ModelError::BadHeader(format!("tensor {} out of order (expected {expected})", meta.name)));
        }
        if meta.offset != cursor {
            return Err(ModelError::BadHeader(format!("tensor {} offset {} != {}", meta.name, meta.offset, cursor)));
        }
        let count: usize = meta.shape.iter().product();
        let nbytes = count * 4;
        if cursor + nbytes > data.len() {
            return Err(ModelError::Truncated(format!("tensor {}", meta.name)));
        }
        let values: Vec<f64> = data[cursor..cursor + nbytes]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        tensors.push(values);
        cursor += nbytes;
    }
    if cursor != data.len() {
        return Err(ModelError::BadHeader(format!(
            "{} trailing bytes after the last tensor",
            data.len() - cursor
        )));
    }

    let shape = |i: usize| header.tensors[i].shape.clone();
    let conv = |i: usize, t: &mut Vec<Vec<f64>>| -> Result<ConvLayer, ModelError> {
        let s = shape(i);
        if s.len() != 3 {
            return Err(ModelError::BadHeader(format!("conv weight tensor {i} must be rank 3")));
        }
        Ok(ConvLayer {
            weights: std::mem::take(&mut t[i]),
            bias: std::mem::take(&mut t[i + 1]),
            out_ch: s[0],
            in_ch: s[1],
            kernel: s[2],
        })
    };
    let dense = |i: usize, t: &mut Vec<Vec<f64>>| -> Result<DenseLayer, ModelError> {
        let s = shape(i);
        if s.len() != 2 {
            return Err(ModelError::BadHeader(format!("dense weight tensor {i} must be rank 2")));
        }
        Ok(DenseLayer {
            weights: std::mem::take(&mut t[i]),
            bias: std::mem::take(&mut t[i + 1]),
            out_dim: s[0],
            in_dim: s[1],
        })
    };

    let mut t = tensors;
    let params = ModelParams {
        conv1: conv(0, &mut t)?,
        conv2: conv(2, &mut t)?,
        conv3: conv(4, &mut t)?,
        dense1: dense(6, &mut t)?,
        dense2: dense(8, &mut t)?,
        feature_fingerprint: fingerprint,
        label_list: header.label_list,
        input_cols: header.input_cols,
    };
    for ((name, (data, shape)), meta) in ModelParams::tensor_names()
        .iter()
        .zip(params.tensors())
        .zip(header.tensors.iter())
    {
        let count: usize = shape.iter().product();
        if data.len() != count || shape != meta.shape {
            return Err(ModelError::BadHeader(format!("tensor {name} shape mismatch")));
        }
    }
    if params.dense2.out_dim != params.label_list.len() {
        return Err(ModelError::BadHeader("head width != label count".into()));
    }
    Ok(params)
}

pub fn save_model(params: &ModelParams, path: &Path) -> Result<(), ModelError> {
    fs::write(path, to_bytes(params))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelParams, ModelError> {
    from_bytes(&fs::read(path)?)
}

/// Hex digest of the canonical file encoding. Because tensors are encoded as
/// f32, a save/load round trip preserves the checksum.
pub fn model_checksum(params: &ModelParams) -> String {
    hex::encode(Sha256::digest(to_bytes(params)))
}
