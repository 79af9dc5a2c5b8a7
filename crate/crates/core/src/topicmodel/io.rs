//! `model.json` holds the config, document ids, likelihood trace and φ with
//! six fixed decimals. θ goes to `theta.bin`: one JSON header line, then
//! M·K little-endian `f32` values, row-major.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LdaConfig, LdaModel, Matrix, TopicModelError};

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    config: LdaConfig,
    num_topics: usize,
    vocab_size: usize,
    doc_ids: Vec<String>,
    log_likelihood_trace: Vec<f64>,
}

#[derive(Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    header: ModelHeader,
    phi: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ThetaHeader {
    pub m: usize,
    pub k: usize,
    pub dtype: String,
    pub order: String,
}

fn format_err(e: impl std::fmt::Display) -> TopicModelError {
    TopicModelError::Format(e.to_string())
}

pub fn model_json(model: &LdaModel) -> String {
    let header = ModelHeader {
        config: model.config.clone(),
        num_topics: model.num_topics(),
        vocab_size: model.vocab_size(),
        doc_ids: model.doc_ids.clone(),
        log_likelihood_trace: model.log_likelihood_trace.clone(),
    };
    let mut json = serde_json::to_string(&header).expect("header serializes");
    json.pop(); // reopen the object to append phi
    json.push_str(",\"phi\":[");
    for t in 0..model.num_topics() {
        if t > 0 {
            json.push(',');
        }
        json.push_str("\n[");
        for (i, x) in model.phi.row(t).iter().enumerate() {
            if i > 0 {
                json.push(',');
            }
            let _ = write!(json, "{x:.6}");
        }
        json.push(']');
    }
    json.push_str("\n]}\n");
    json
}

pub fn write_theta_bin(path: &Path, theta: &Matrix) -> Result<(), TopicModelError> {
    let header = ThetaHeader {
        m: theta.rows(),
        k: theta.cols(),
        dtype: "f32le".into(),
        order: "row-major".into(),
    };
    let mut bytes = serde_json::to_vec(&header).map_err(format_err)?;
    bytes.push(b'\n');
    bytes.reserve(theta.data().len() * 4);
    for &x in theta.data() {
        bytes.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads `theta.bin` into f64, rows renormalized to absorb f32 rounding.
pub fn read_theta_bin(path: &Path) -> Result<Matrix, TopicModelError> {
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| format_err("theta.bin: missing header line"))?;
    let header: ThetaHeader = serde_json::from_slice(&bytes[..nl]).map_err(format_err)?;
    if header.dtype != "f32le" || header.order != "row-major" {
        return Err(format_err(format!(
            "theta.bin: unsupported layout {}/{}",
            header.dtype, header.order
        )));
    }
    let body = &bytes[nl + 1..];
    if body.len() != header.m * header.k * 4 {
        return Err(format_err(format!(
            "theta.bin: expected {} values, found {} bytes",
            header.m * header.k,
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let mut theta = Matrix::from_vec(header.m, header.k, data);
    theta.normalize_rows();
    Ok(theta)
}

pub fn save_model(model: &LdaModel, model_path: &Path, theta_path: &Path) -> Result<(), TopicModelError> {
    fs::write(model_path, model_json(model))?;
    write_theta_bin(theta_path, &model.theta)
}

/// Loads a saved model. φ rows are renormalized after the six-decimal
/// rounding of the file.
pub fn load_model(model_path: &Path, theta_path: &Path) -> Result<LdaModel, TopicModelError> {
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(model_path)?).map_err(format_err)?;
    let h = file.header;
    if file.phi.len() != h.num_topics || file.phi.iter().any(|r| r.len() != h.vocab_size) {
        return Err(format_err("model.json: phi shape disagrees with header"));
    }
    let mut phi = Matrix::from_vec(h.num_topics, h.vocab_size, file.phi.into_iter().flatten().collect());
    phi.normalize_rows();
    let theta = read_theta_bin(theta_path)?;
    if theta.rows() != h.doc_ids.len() || theta.cols() != h.num_topics {
        return Err(format_err("theta.bin shape disagrees with model.json"));
    }
    Ok(LdaModel::new(h.config, phi, theta, h.doc_ids, h.log_likelihood_trace))
}
