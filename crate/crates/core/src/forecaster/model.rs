use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Four independent accumulators so the reduction vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate order inside the packed weight matrix.
pub const GATE_NAMES: [&str; 4] = ["input", "forget", "cell", "output"];

/// Single-layer LSTM over a univariate daily series with a dense projection
/// of the final hidden state onto the forecast horizon.
///
/// The four gate matrices (each `H x (1 + H)`, columns `[x_t, h_{t-1}]`) are
/// stacked into one `4H x (1 + H)` matrix in [`GATE_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmModel {
    pub hidden_size: usize,
    pub horizon: usize,
    pub seed: u64,
    pub gate_weights: Matrix,
    pub gate_bias: Vec<f64>,
    pub proj_weights: Matrix,
    pub proj_bias: Vec<f64>,
}

impl LstmModel {
    pub fn zeros(hidden_size: usize, horizon: usize) -> Self {
        LstmModel {
            hidden_size,
            horizon,
            seed: 0,
            gate_weights: Matrix::zeros(4 * hidden_size, hidden_size + 1),
            gate_bias: vec![0.0; 4 * hidden_size],
            proj_weights: Matrix::zeros(horizon, hidden_size),
            proj_bias: vec![0.0; horizon],
        }
    }

    /// Uniform(-1/sqrt(H), 1/sqrt(H)) initialization from `seed`.
    pub fn seeded(hidden_size: usize, horizon: usize, seed: u64) -> Self {
        let mut model = Self::zeros(hidden_size, horizon);
        model.seed = seed;
        let bound = 1.0 / (hidden_size as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in model.params_mut() {
            for v in p.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        model
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.hidden_size, self.horizon);
        z.seed = self.seed;
        z
    }

    /// Flat parameter groups in a fixed order.
    pub fn params(&self) -> [&[f64]; 4] {
        [&self.gate_weights.data, &self.gate_bias, &self.proj_weights.data, &self.proj_bias]
    }

    pub fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.gate_weights.data, &mut self.gate_bias, &mut self.proj_weights.data, &mut self.proj_bias]
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let h = self.hidden_size;
        let ok = h > 0
            && self.horizon > 0
            && self.gate_weights.rows == 4 * h
            && self.gate_weights.cols == h + 1
            && self.gate_weights.data.len() == 4 * h * (h + 1)
            && self.gate_bias.len() == 4 * h
            && self.proj_weights.rows == self.horizon
            && self.proj_weights.cols == h
            && self.proj_weights.data.len() == self.horizon * h
            && self.proj_bias.len() == self.horizon;
        if !ok {
            return Err(Error::InvalidInput("LSTM parameter shapes are inconsistent".into()));
        }
        if self.params().iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("LSTM parameters contain NaN or infinity".into()));
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.output)
    }

    pub(crate) fn forward_trace(&self, input: &[f64]) -> Result<ForwardTrace> {
        let h = self.hidden_size;
        let mut steps = Vec::with_capacity(input.len());
        let mut hidden = vec![0.0; h];
        let mut cell = vec![0.0; h];
        for &x in input {
            let mut concat = Vec::with_capacity(h + 1);
            concat.push(x);
            concat.extend_from_slice(&hidden);
            let mut gates = vec![0.0; 4 * h];
            for (r, g) in gates.iter_mut().enumerate() {
                let a = dot(self.gate_weights.row(r), &concat) + self.gate_bias[r];
                // Rows [2H, 3H) form the candidate cell; the rest are sigmoid gates.
                *g = if (2 * h..3 * h).contains(&r) { a.tanh() } else { sigmoid(a) };
            }
            let prev_cell = cell.clone();
            let mut tanh_cell = vec![0.0; h];
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                cell[j] = f * prev_cell[j] + i * g;
                tanh_cell[j] = cell[j].tanh();
                hidden[j] = o * tanh_cell[j];
            }
            steps.push(Step { concat, gates, prev_cell, tanh_cell });
        }
        let output: Vec<f64> =
            (0..self.horizon).map(|k| dot(self.proj_weights.row(k), &hidden) + self.proj_bias[k]).collect();
        if output.iter().chain(&hidden).chain(&cell).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("LSTM forward pass produced NaN or infinity".into()));
        }
        Ok(ForwardTrace { steps, hidden, output })
    }

    /// Accumulates parameter gradients of a scalar loss into `grads`, given
    /// the loss gradient with respect to the forward output.
    pub(crate) fn backward(&self, trace: &ForwardTrace, d_output: &[f64], grads: &mut LstmModel) {
        let h = self.hidden_size;
        let mut d_hidden = vec![0.0; h];
        for (k, &dy) in d_output.iter().enumerate() {
            grads.proj_bias[k] += dy;
            let gw = grads.proj_weights.row_mut(k);
            for j in 0..h {
                gw[j] += dy * trace.hidden[j];
                d_hidden[j] += dy * self.proj_weights.data[k * h + j];
            }
        }

        let mut d_cell = vec![0.0; h];
        let mut d_pre = vec![0.0; 4 * h];
        for step in trace.steps.iter().rev() {
            let g = &step.gates;
            for j in 0..h {
                let (i, f, c, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                let tc = step.tanh_cell[j];
                let dc = d_cell[j] + d_hidden[j] * o * (1.0 - tc * tc);
                d_pre[j] = dc * c * i * (1.0 - i);
                d_pre[h + j] = dc * step.prev_cell[j] * f * (1.0 - f);
                d_pre[2 * h + j] = dc * i * (1.0 - c * c);
                d_pre[3 * h + j] = d_hidden[j] * tc * o * (1.0 - o);
                d_cell[j] = dc * f;
            }
            d_hidden.iter_mut().for_each(|v| *v = 0.0);
            for (r, &da) in d_pre.iter().enumerate() {
                grads.gate_bias[r] += da;
                let gw = grads.gate_weights.row_mut(r);
                for (w, z) in gw.iter_mut().zip(&step.concat) {
                    *w += da * z;
                }
                let row = self.gate_weights.row(r);
                for j in 0..h {
                    d_hidden[j] += da * row[j + 1];
                }
            }
        }
    }
}

pub(crate) struct Step {
    /// `[x_t, h_{t-1}]`.
    concat: Vec<f64>,
    /// Post-activation gates in [`GATE_NAMES`] order.
    gates: Vec<f64>,
    prev_cell: Vec<f64>,
    tanh_cell: Vec<f64>,
}

pub(crate) struct ForwardTrace {
    steps: Vec<Step>,
    hidden: Vec<f64>,
    pub output: Vec<f64>,
}
