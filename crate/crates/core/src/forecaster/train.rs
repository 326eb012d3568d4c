use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{target_weights, weighted_sample_grad, weighted_sample_loss, DensityHistogram, LossKind};
use super::model::LstmModel;
use crate::epidata::{denormalize, Sample};
use crate::error::{Error, Result};
use crate::{HORIZON_DAYS, INPUT_DAYS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss_kind: LossKind,
    pub seed: u64,
    pub hidden_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            batch_size: 32,
            epochs: 500,
            loss_kind: LossKind::StandardMse,
            seed: 0,
            hidden_size: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let betas_ok = self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0;
        if !betas_ok {
            return Err(Error::InvalidInput("beta1 and beta2 must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.adam_epsilon > 0.0) {
            return Err(Error::InvalidInput("learning_rate and adam_epsilon must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.hidden_size == 0 {
            return Err(Error::InvalidInput("batch_size, epochs and hidden_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LstmModel,
    /// Mean per-sample training loss for each epoch.
    pub loss_trace: Vec<f64>,
}

struct Prepared<'a> {
    sample: &'a Sample,
    weights: Vec<f64>,
}

/// Loss of one batch and the accumulated parameter gradients.
fn batch_gradient(model: &LstmModel, batch: &[&Prepared<'_>], grads: &mut LstmModel) -> Result<f64> {
    let n = batch.len();
    let mut loss = 0.0;
    for p in batch {
        let trace = model.forward_trace(&p.sample.input_window)?;
        let target = &p.sample.target_window;
        loss += weighted_sample_loss(target, &trace.output, &p.weights, n);
        let d_out = weighted_sample_grad(target, &trace.output, &p.weights, n);
        model.backward(&trace, &d_out, grads);
    }
    Ok(loss)
}

fn check_sample(s: &Sample, horizon: usize) -> Result<()> {
    if s.input_window.is_empty() || s.target_window.len() != horizon {
        return Err(Error::InvalidInput(format!(
            "sample from `{}` has {} input / {} target days, expected >0 / {horizon}",
            s.region_id,
            s.input_window.len(),
            s.target_window.len()
        )));
    }
    Ok(())
}

/// Mini-batch Adam with full backpropagation through time.
///
/// Batches come from a seeded shuffle per epoch; the last partial batch is
/// used as-is with `n` equal to its size.
pub fn train(samples: &[Sample], config: &TrainConfig, density: Option<&DensityHistogram>) -> Result<TrainOutcome> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptySamples("training".into()));
    }
    for s in samples {
        check_sample(s, HORIZON_DAYS)?;
    }
    let prepared: Vec<Prepared<'_>> = samples
        .iter()
        .map(|s| {
            let weights = target_weights(config.loss_kind, &s.target_window, density)?;
            Ok(Prepared { sample: s, weights })
        })
        .collect::<Result<_>>()?;

    let mut model = LstmModel::seeded(config.hidden_size, HORIZON_DAYS, config.seed);
    let mut adam =
        Adam::new(model.param_count(), config.learning_rate, config.beta1, config.beta2, config.adam_epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut loss_trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Prepared<'_>> = chunk.iter().map(|&i| &prepared[i]).collect();
            let mut grads = model.zeros_like();
            let loss = batch_gradient(&model, &batch, &mut grads)
                .map_err(|e| Error::NonFinite(format!("epoch {epoch}, batch {b}: {e}")))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss is {loss} at epoch {epoch}, batch {b}")));
            }
            epoch_loss += loss * batch.len() as f64;
            adam.update(&mut model, &grads);
        }
        loss_trace.push(epoch_loss / prepared.len() as f64);
    }
    model.check_shapes().map_err(|e| Error::NonFinite(format!("after training: {e}")))?;
    Ok(TrainOutcome { model, loss_trace })
}

/// Forecast in case counts: forward pass, undo min-max scaling, clamp at 0.
pub fn predict(model: &LstmModel, normalized_input: &[f64], scale: f64, offset: f64) -> Result<Vec<f64>> {
    if normalized_input.len() != INPUT_DAYS {
        return Err(Error::InvalidInput(format!("expected {INPUT_DAYS} input days, got {}", normalized_input.len())));
    }
    if scale < offset {
        return Err(Error::InvalidInput(format!("scale {scale} below offset {offset}")));
    }
    Ok(model.forward(normalized_input)?.into_iter().map(|v| denormalize(v, scale, offset).max(0.0)).collect())
}

/// Largest relative disagreement between analytic gradients and central
/// differences (step 1e-5) over every parameter, for a single sample.
pub fn gradient_check(
    model: &LstmModel,
    sample: &Sample,
    kind: LossKind,
    density: Option<&DensityHistogram>,
) -> Result<f64> {
    check_sample(sample, model.horizon)?;
    let weights = target_weights(kind, &sample.target_window, density)?;
    let prepared = Prepared { sample, weights };
    let mut analytic = model.zeros_like();
    batch_gradient(model, &[&prepared], &mut analytic)?;

    let loss_at = |m: &LstmModel| -> Result<f64> {
        let out = m.forward(&sample.input_window)?;
        Ok(weighted_sample_loss(&sample.target_window, &out, &prepared.weights, 1))
    };

    const STEP: f64 = 1e-5;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for (group, grad) in analytic.params().iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let original = model.params()[group][i];
            probe.params_mut()[group][i] = original + STEP;
            let up = loss_at(&probe)?;
            probe.params_mut()[group][i] = original - STEP;
            let down = loss_at(&probe)?;
            probe.params_mut()[group][i] = original;
            let numeric = (up - down) / (2.0 * STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn sample(input: Vec<f64>, target: Vec<f64>) -> Sample {
        Sample {
            input_window: input,
            target_window: target,
            region_id: "r".into(),
            start_date: NaiveDate::from_ymd_opt(2021, 1, 1).unwrap(),
        }
    }

    #[test]
    fn predict_affine_and_clamp() {
        let mut m = LstmModel::zeros(2, HORIZON_DAYS);
        m.proj_bias = vec![0.5; HORIZON_DAYS];
        assert_eq!(predict(&m, &[0.0; INPUT_DAYS], 100.0, 0.0).unwrap(), vec![50.0; HORIZON_DAYS]);
        assert_eq!(predict(&m, &[0.0; INPUT_DAYS], 7.0, 7.0).unwrap(), vec![7.0; HORIZON_DAYS]);
        m.proj_bias = vec![-0.5; HORIZON_DAYS];
        assert_eq!(predict(&m, &[0.0; INPUT_DAYS], 100.0, 0.0).unwrap(), vec![0.0; HORIZON_DAYS]);
        assert!(predict(&m, &[0.0; 3], 1.0, 0.0).is_err());
        assert!(predict(&m, &[0.0; INPUT_DAYS], 0.0, 1.0).is_err());
    }

    #[test]
    fn flat_region_predicts_zero() {
        let m = LstmModel::seeded(4, HORIZON_DAYS, 9);
        let p = predict(&m, &[0.0; INPUT_DAYS], 0.0, 0.0).unwrap();
        assert_eq!(p, vec![0.0; HORIZON_DAYS]);
    }

    #[test]
    fn zero_model_zero_input_has_zero_input_weight_gradients() {
        let m = LstmModel::zeros(3, HORIZON_DAYS);
        let s = sample(vec![0.0; INPUT_DAYS], vec![0.4; HORIZON_DAYS]);
        let prepared = Prepared { sample: &s, weights: vec![1.0; HORIZON_DAYS] };
        let mut g = m.zeros_like();
        batch_gradient(&m, &[&prepared], &mut g).unwrap();
        for r in 0..4 * 3 {
            assert_eq!(g.gate_weights.row(r)[0], 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = TrainConfig { epochs: 1, ..Default::default() };
        assert!(train(&[], &cfg, None).is_err());
        let s = sample(vec![0.1; INPUT_DAYS], vec![0.2; HORIZON_DAYS]);
        let adaptive = TrainConfig { loss_kind: LossKind::Adaptive, ..cfg.clone() };
        assert!(train(std::slice::from_ref(&s), &adaptive, None).is_err());
        let short = sample(vec![0.1; INPUT_DAYS], vec![0.2; 3]);
        assert!(train(&[short], &cfg, None).is_err());
        let bad = TrainConfig { beta1: 1.0, ..cfg };
        assert!(train(&[s], &bad, None).is_err());
    }

    #[test]
    fn partial_batches_and_trace_length() {
        let samples: Vec<Sample> =
            (0..5).map(|k| sample(vec![0.1 * k as f64; INPUT_DAYS], vec![0.05 * k as f64; HORIZON_DAYS])).collect();
        let cfg = TrainConfig { epochs: 3, batch_size: 2, hidden_size: 4, ..Default::default() };
        let out = train(&samples, &cfg, None).unwrap();
        assert_eq!(out.loss_trace.len(), 3);
        assert!(out.loss_trace.iter().all(|l| l.is_finite() && *l >= 0.0));
    }
}
