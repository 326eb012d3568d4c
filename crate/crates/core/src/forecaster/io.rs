//! JSON model files: hyperparameters plus every tensor as a flat array with
//! an explicit shape. Floats are written in shortest round-trip form, so a
//! reloaded model predicts bit-identically.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{LstmModel, Matrix, GATE_NAMES};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::INPUT_DAYS;

pub const MODEL_FORMAT: &str = "epicast-lstm/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub hidden_size: usize,
    pub horizon: usize,
    pub input_days: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig>,
    /// Free-form run metadata (seed, config hash, toolkit version, ...).
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
    pub tensors: Vec<Tensor>,
}

impl ModelFile {
    pub fn from_model(model: &LstmModel, train_config: Option<TrainConfig>) -> Self {
        let h = model.hidden_size;
        let block = h * (h + 1);
        let mut tensors = Vec::new();
        for (g, name) in GATE_NAMES.iter().enumerate() {
            tensors.push(Tensor {
                name: format!("w_{name}"),
                shape: vec![h, h + 1],
                data: model.gate_weights.data[g * block..(g + 1) * block].to_vec(),
            });
            tensors.push(Tensor {
                name: format!("b_{name}"),
                shape: vec![h],
                data: model.gate_bias[g * h..(g + 1) * h].to_vec(),
            });
        }
        tensors.push(Tensor {
            name: "w_proj".into(),
            shape: vec![model.horizon, h],
            data: model.proj_weights.data.clone(),
        });
        tensors.push(Tensor { name: "b_proj".into(), shape: vec![model.horizon], data: model.proj_bias.clone() });
        ModelFile {
            format: MODEL_FORMAT.into(),
            hidden_size: h,
            horizon: model.horizon,
            input_days: INPUT_DAYS,
            seed: model.seed,
            train_config,
            provenance: BTreeMap::new(),
            tensors,
        }
    }

    fn tensor(&self, name: &str, shape: &[usize]) -> Result<&[f64]> {
        let t = self
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("model file lacks tensor `{name}`")))?;
        let expected: usize = shape.iter().product();
        if t.shape != shape || t.data.len() != expected {
            return Err(Error::InvalidInput(format!(
                "tensor `{name}` has shape {:?} with {} values, expected {shape:?}",
                t.shape,
                t.data.len()
            )));
        }
        Ok(&t.data)
    }

    pub fn to_model(&self) -> Result<LstmModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::InvalidInput(format!("unsupported model format `{}`", self.format)));
        }
        let (h, horizon) = (self.hidden_size, self.horizon);
        let mut model = LstmModel::zeros(h, horizon);
        model.seed = self.seed;
        let block = h * (h + 1);
        for (g, name) in GATE_NAMES.iter().enumerate() {
            let w = self.tensor(&format!("w_{name}"), &[h, h + 1])?;
            model.gate_weights.data[g * block..(g + 1) * block].copy_from_slice(w);
            let b = self.tensor(&format!("b_{name}"), &[h])?;
            model.gate_bias[g * h..(g + 1) * h].copy_from_slice(b);
        }
        model.proj_weights = Matrix { rows: horizon, cols: h, data: self.tensor("w_proj", &[horizon, h])?.to_vec() };
        model.proj_bias = self.tensor("b_proj", &[horizon])?.to_vec();
        model.check_shapes()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
