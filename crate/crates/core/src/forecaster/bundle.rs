//! Model bundle on disk: one directory holding the member checkpoints, the
//! fitted feature stats and the training manifest. Checkpoints are flat
//! named-tensor containers with shape metadata and a format version.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureStats, FEATURE_STATS_VERSION};
use crate::forecaster::ensemble::{EnsembleModel, TrainingManifest, MANIFEST_VERSION};
use crate::forecaster::net::{ForecastNet, NetDims};
use crate::linalg::Matrix;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed json in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported {what} version {found}, expected {expected}")]
    Version { what: &'static str, found: u32, expected: u32 },
    #[error("checkpoint tensor {name} has shape {found:?}, expected {expected:?}")]
    Shape { name: String, found: Vec<usize>, expected: Vec<usize> },
    #[error("checkpoint is missing tensor {0}")]
    MissingTensor(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub dims: CheckpointDims,
    pub tensors: Vec<Tensor>,
}

/// Serialized copy of [`NetDims`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CheckpointDims {
    pub acc_input: usize,
    pub gru1_hidden: usize,
    pub gru2_hidden: usize,
    pub market: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub outputs: usize,
}

impl From<NetDims> for CheckpointDims {
    fn from(d: NetDims) -> Self {
        CheckpointDims {
            acc_input: d.acc_input,
            gru1_hidden: d.gru1_hidden,
            gru2_hidden: d.gru2_hidden,
            market: d.market,
            dense1: d.dense1,
            dense2: d.dense2,
            outputs: d.outputs,
        }
    }
}

impl From<CheckpointDims> for NetDims {
    fn from(d: CheckpointDims) -> Self {
        NetDims {
            acc_input: d.acc_input,
            gru1_hidden: d.gru1_hidden,
            gru2_hidden: d.gru2_hidden,
            market: d.market,
            dense1: d.dense1,
            dense2: d.dense2,
            outputs: d.outputs,
        }
    }
}

fn matrix_tensor(name: &str, m: &Matrix) -> Tensor {
    Tensor { name: name.to_string(), shape: vec![m.rows(), m.cols()], data: m.data().to_vec() }
}

fn vec_tensor(name: &str, v: &[f64]) -> Tensor {
    Tensor { name: name.to_string(), shape: vec![v.len()], data: v.to_vec() }
}

/// Full network state, including the batchnorm running estimates.
pub fn net_to_checkpoint(net: &ForecastNet) -> Checkpoint {
    let mut tensors = Vec::new();
    for (prefix, gru) in [("gru1", &net.gru1), ("gru2", &net.gru2)] {
        tensors.push(matrix_tensor(&format!("{prefix}.w_z"), &gru.w_z));
        tensors.push(matrix_tensor(&format!("{prefix}.w_r"), &gru.w_r));
        tensors.push(matrix_tensor(&format!("{prefix}.w_h"), &gru.w_h));
        tensors.push(matrix_tensor(&format!("{prefix}.u_z"), &gru.u_z));
        tensors.push(matrix_tensor(&format!("{prefix}.u_r"), &gru.u_r));
        tensors.push(matrix_tensor(&format!("{prefix}.u_h"), &gru.u_h));
        tensors.push(vec_tensor(&format!("{prefix}.b_z"), &gru.b_z));
        tensors.push(vec_tensor(&format!("{prefix}.b_r"), &gru.b_r));
        tensors.push(vec_tensor(&format!("{prefix}.b_h"), &gru.b_h));
    }
    for (prefix, dense) in
        [("dense1", &net.dense1), ("dense2", &net.dense2), ("head", &net.head)]
    {
        tensors.push(matrix_tensor(&format!("{prefix}.weight"), &dense.weight));
        tensors.push(vec_tensor(&format!("{prefix}.bias"), &dense.bias));
    }
    for (prefix, bn) in [("bn1", &net.bn1), ("bn2", &net.bn2)] {
        tensors.push(vec_tensor(&format!("{prefix}.gamma"), &bn.gamma));
        tensors.push(vec_tensor(&format!("{prefix}.beta"), &bn.beta));
        tensors.push(vec_tensor(&format!("{prefix}.running_mean"), &bn.running_mean));
        tensors.push(vec_tensor(&format!("{prefix}.running_var"), &bn.running_var));
    }
    Checkpoint { format_version: CHECKPOINT_VERSION, dims: net.dims.into(), tensors }
}

struct TensorReader {
    tensors: std::collections::HashMap<String, Tensor>,
}

impl TensorReader {
    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Matrix, BundleError> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| BundleError::MissingTensor(name.to_string()))?;
        if t.shape != [rows, cols] || t.data.len() != rows * cols {
            return Err(BundleError::Shape {
                name: name.to_string(),
                found: t.shape.clone(),
                expected: vec![rows, cols],
            });
        }
        Ok(Matrix::from_vec(rows, cols, t.data.clone()))
    }

    fn vector(&self, name: &str, len: usize) -> Result<Vec<f64>, BundleError> {
        let t = self
            .tensors
            .get(name)
            .ok_or_else(|| BundleError::MissingTensor(name.to_string()))?;
        if t.shape != [len] || t.data.len() != len {
            return Err(BundleError::Shape {
                name: name.to_string(),
                found: t.shape.clone(),
                expected: vec![len],
            });
        }
        Ok(t.data.clone())
    }
}

pub fn net_from_checkpoint(cp: &Checkpoint) -> Result<ForecastNet, BundleError> {
    if cp.format_version != CHECKPOINT_VERSION {
        return Err(BundleError::Version {
            what: "checkpoint",
            found: cp.format_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let dims: NetDims = cp.dims.into();
    let reader = TensorReader {
        tensors: cp.tensors.iter().map(|t| (t.name.clone(), t.clone())).collect(),
    };
    let gru = |prefix: &str, input: usize, hidden: usize| -> Result<crate::nn::GruLayer, BundleError> {
        Ok(crate::nn::GruLayer {
            w_z: reader.matrix(&format!("{prefix}.w_z"), hidden, input)?,
            w_r: reader.matrix(&format!("{prefix}.w_r"), hidden, input)?,
            w_h: reader.matrix(&format!("{prefix}.w_h"), hidden, input)?,
            u_z: reader.matrix(&format!("{prefix}.u_z"), hidden, hidden)?,
            u_r: reader.matrix(&format!("{prefix}.u_r"), hidden, hidden)?,
            u_h: reader.matrix(&format!("{prefix}.u_h"), hidden, hidden)?,
            b_z: reader.vector(&format!("{prefix}.b_z"), hidden)?,
            b_r: reader.vector(&format!("{prefix}.b_r"), hidden)?,
            b_h: reader.vector(&format!("{prefix}.b_h"), hidden)?,
        })
    };
    let dense = |prefix: &str, input: usize, output: usize| -> Result<crate::nn::DenseLayer, BundleError> {
        Ok(crate::nn::DenseLayer {
            weight: reader.matrix(&format!("{prefix}.weight"), output, input)?,
            bias: reader.vector(&format!("{prefix}.bias"), output)?,
        })
    };
    let bn = |prefix: &str, features: usize| -> Result<crate::nn::BatchNormLayer, BundleError> {
        let mut layer = crate::nn::BatchNormLayer::new(features);
        layer.gamma = reader.vector(&format!("{prefix}.gamma"), features)?;
        layer.beta = reader.vector(&format!("{prefix}.beta"), features)?;
        layer.running_mean = reader.vector(&format!("{prefix}.running_mean"), features)?;
        layer.running_var = reader.vector(&format!("{prefix}.running_var"), features)?;
        Ok(layer)
    };
    Ok(ForecastNet {
        dims,
        gru1: gru("gru1", dims.acc_input, dims.gru1_hidden)?,
        gru2: gru("gru2", dims.gru1_hidden, dims.gru2_hidden)?,
        dense1: dense("dense1", dims.merged(), dims.dense1)?,
        bn1: bn("bn1", dims.dense1)?,
        dense2: dense("dense2", dims.dense1, dims.dense2)?,
        bn2: bn("bn2", dims.dense2)?,
        head: dense("head", dims.dense2, dims.outputs)?,
    })
}

fn write_file(path: &Path, contents: &str) -> Result<(), BundleError> {
    std::fs::write(path, contents)
        .map_err(|source| BundleError::Io { path: path.display().to_string(), source })
}

fn read_file(path: &Path) -> Result<String, BundleError> {
    std::fs::read_to_string(path)
        .map_err(|source| BundleError::Io { path: path.display().to_string(), source })
}

/// Write the bundle directory: `manifest.json`, `feature_stats.json` and one
/// `member_<i>.json` checkpoint per ensemble member. Output bytes are
/// deterministic for identical models.
pub fn save_bundle(model: &EnsembleModel, dir: &Path) -> Result<(), BundleError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| BundleError::Io { path: dir.display().to_string(), source })?;
    let manifest = serde_json::to_string_pretty(&model.manifest).expect("manifest serialize");
    write_file(&dir.join("manifest.json"), &manifest)?;
    write_file(&dir.join("feature_stats.json"), &model.stats.to_json())?;
    for (i, member) in model.members.iter().enumerate() {
        let cp = net_to_checkpoint(member);
        let json = serde_json::to_string(&cp).expect("checkpoint serialize");
        write_file(&dir.join(format!("member_{i}.json")), &json)?;
    }
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<EnsembleModel, BundleError> {
    let manifest_path = dir.join("manifest.json");
    let manifest: TrainingManifest = serde_json::from_str(&read_file(&manifest_path)?)
        .map_err(|source| BundleError::Json { path: manifest_path.display().to_string(), source })?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(BundleError::Version {
            what: "manifest",
            found: manifest.format_version,
            expected: MANIFEST_VERSION,
        });
    }
    let stats_path = dir.join("feature_stats.json");
    let stats = FeatureStats::from_json(&read_file(&stats_path)?)
        .map_err(|source| BundleError::Json { path: stats_path.display().to_string(), source })?;
    if stats.format_version != FEATURE_STATS_VERSION {
        return Err(BundleError::Version {
            what: "feature stats",
            found: stats.format_version,
            expected: FEATURE_STATS_VERSION,
        });
    }
    let mut members = Vec::new();
    for i in 0..manifest.config.ensemble_size {
        let path = dir.join(format!("member_{i}.json"));
        let cp: Checkpoint = serde_json::from_str(&read_file(&path)?)
            .map_err(|source| BundleError::Json { path: path.display().to_string(), source })?;
        members.push(net_from_checkpoint(&cp)?);
    }
    Ok(EnsembleModel { members, stats, manifest })
}
