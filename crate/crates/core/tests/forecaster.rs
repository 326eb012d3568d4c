use chrono::NaiveDate;
use epicast::epidata::{extract_samples, normalize, Sample};
use epicast::forecaster::*;
use epicast::{HORIZON_DAYS, INPUT_DAYS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 1).unwrap()
}

fn sample(input: Vec<f64>, target: Vec<f64>) -> Sample {
    Sample { input_window: input, target_window: target, region_id: "r".into(), start_date: day0() }
}

/// Windows of a noiseless sinusoid at seeded random offsets.
fn sinusoid_samples(count: usize, seed: u64) -> Vec<Sample> {
    let wave = |t: usize| 0.5 + 0.4 * (2.0 * std::f64::consts::PI * t as f64 / 25.0).sin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let s = rng.random_range(0..1000);
            sample(
                (s..s + INPUT_DAYS).map(wave).collect(),
                (s + INPUT_DAYS..s + INPUT_DAYS + HORIZON_DAYS).map(wave).collect(),
            )
        })
        .collect()
}

fn mse(model: &LstmModel, samples: &[Sample]) -> f64 {
    let mut total = 0.0;
    for s in samples {
        let out = model.forward(&s.input_window).unwrap();
        total += out.iter().zip(&s.target_window).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
    }
    total / (samples.len() * HORIZON_DAYS) as f64
}

fn variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

#[test]
fn learns_a_sinusoid() {
    let samples = sinusoid_samples(200, 1);
    let cfg = TrainConfig { hidden_size: 16, epochs: 200, seed: 3, ..Default::default() };
    let out = train(&samples, &cfg, None).unwrap();
    let var = variance(samples.iter().flat_map(|s| s.target_window.iter().copied()));
    let err = mse(&out.model, &samples);
    assert!(err < 0.1 * var, "mse {err} vs target variance {var}");
    assert!(out.loss_trace.last().unwrap() < &out.loss_trace[0]);
}

#[test]
fn memorizes_one_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = sample(
        (0..INPUT_DAYS).map(|_| rng.random::<f64>()).collect(),
        (0..HORIZON_DAYS).map(|_| rng.random::<f64>()).collect(),
    );
    let cfg = TrainConfig { hidden_size: 8, epochs: 1500, learning_rate: 1e-2, seed: 2, ..Default::default() };
    let out = train(std::slice::from_ref(&s), &cfg, None).unwrap();
    let err = mse(&out.model, std::slice::from_ref(&s));
    assert!(err < 1e-4, "{err}");
}

#[test]
fn training_is_deterministic() {
    let samples = sinusoid_samples(40, 9);
    let cfg = TrainConfig { hidden_size: 6, epochs: 5, batch_size: 7, seed: 11, ..Default::default() };
    let a = train(&samples, &cfg, None).unwrap();
    let b = train(&samples, &cfg, None).unwrap();
    assert_eq!(a.model, b.model);
    let bits = |t: &[f64]| t.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.loss_trace), bits(&b.loss_trace));
    let c = train(&samples, &TrainConfig { seed: 12, ..cfg }, None).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn adaptive_training_runs_and_is_deterministic() {
    let samples = sinusoid_samples(30, 4);
    let targets: Vec<f64> = samples.iter().flat_map(|s| s.target_window.clone()).collect();
    let density = DensityHistogram::build(&targets, DEFAULT_DENSITY_BINS).unwrap();
    let cfg = TrainConfig { hidden_size: 5, epochs: 4, loss_kind: LossKind::Adaptive, ..Default::default() };
    let a = train(&samples, &cfg, Some(&density)).unwrap();
    let b = train(&samples, &cfg, Some(&density)).unwrap();
    assert_eq!(a.model, b.model);
    assert!(a.loss_trace.iter().all(|l| l.is_finite()));
}

fn random_sample(rng: &mut ChaCha8Rng) -> Sample {
    sample(
        (0..INPUT_DAYS).map(|_| rng.random::<f64>()).collect(),
        (0..HORIZON_DAYS).map(|_| rng.random::<f64>()).collect(),
    )
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let spread: Vec<f64> = (0..2000).map(|i| ((i * 37) % 101) as f64 / 100.0).collect();
    let density = DensityHistogram::build(&spread, DEFAULT_DENSITY_BINS).unwrap();
    for seed in 0..5 {
        let model = LstmModel::seeded(8, HORIZON_DAYS, seed);
        let s = random_sample(&mut rng);
        let standard = gradient_check(&model, &s, LossKind::StandardMse, None).unwrap();
        let adaptive = gradient_check(&model, &s, LossKind::Adaptive, Some(&density)).unwrap();
        assert!(standard < 1e-4, "seed {seed}: standard {standard}");
        assert!(adaptive < 1e-4, "seed {seed}: adaptive {adaptive}");
    }
}

#[test]
fn constant_density_scales_mse() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // 64 bins holding 20 values each: every lookup returns c = 20.
    let targets: Vec<f64> = (0..64).flat_map(|b| vec![(b as f64 + 0.5) / 64.0; 20]).collect();
    let density = DensityHistogram::build(&targets, 64).unwrap();
    assert!(density.counts.iter().all(|&c| c == 20));
    let c: f64 = 20.0;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..5)
        .map(|_| {
            let t: Vec<f64> = (0..HORIZON_DAYS).map(|_| rng.random::<f64>()).collect();
            let p: Vec<f64> = (0..HORIZON_DAYS).map(|_| rng.random::<f64>()).collect();
            (t, p)
        })
        .collect();
    let batch: Vec<(&[f64], &[f64])> = pairs.iter().map(|(t, p)| (t.as_slice(), p.as_slice())).collect();
    let adaptive = batch_loss(LossKind::Adaptive, &batch, Some(&density)).unwrap();
    let standard = batch_loss(LossKind::StandardMse, &batch, None).unwrap();
    let expected = standard / (10.0 * c.ln() * c.ln());
    assert!((adaptive - expected).abs() < 1e-12, "{adaptive} vs {expected}");
}

#[test]
fn weights_are_positive_and_bounded() {
    for count in [0u64, 1, 7, 8, 100, 1_000_000] {
        let w = weight_for_count(count);
        assert!(w > 0.0 && w <= 0.025, "{count}: {w}");
    }
    for pair in [8u64, 9, 50, 1000, 10_000].windows(2) {
        assert!(weight_for_count(pair[0]) > weight_for_count(pair[1]));
    }
}

#[test]
fn uniform_histogram_counts_within_three_sigma() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut values: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
    values.push(0.0);
    values.push(1.0);
    let d = DensityHistogram::build(&values, 10).unwrap();
    assert_eq!(d.counts.iter().sum::<u64>(), 10_002);
    let sigma = (10_000.0f64 * 0.1 * 0.9).sqrt();
    for &c in &d.counts {
        assert!((c as f64 - 1000.0).abs() < 3.0 * sigma, "{:?}", d.counts);
    }
    assert_eq!(d.bin_of(1.0), 9);
}

#[test]
fn scaling_a_curve_leaves_training_unchanged() {
    let raw: Vec<f64> = (0..180).map(|t| 50.0 + 40.0 * (t as f64 / 9.0).sin() + (t % 7) as f64).collect();
    let scaled: Vec<f64> = raw.iter().map(|v| v * 8.0).collect();
    let a = extract_samples(&normalize(&raw, "r").unwrap().values, "r", day0(), INPUT_DAYS, HORIZON_DAYS);
    let b = extract_samples(&normalize(&scaled, "r").unwrap().values, "r", day0(), INPUT_DAYS, HORIZON_DAYS);
    for (x, y) in a.iter().zip(&b) {
        for (p, q) in x.input_window.iter().chain(&x.target_window).zip(y.input_window.iter().chain(&y.target_window)) {
            assert!((p - q).abs() < 1e-12);
        }
    }
    let cfg = TrainConfig { hidden_size: 4, epochs: 3, ..Default::default() };
    let ma = train(&a, &cfg, None).unwrap().model;
    let mb = train(&b, &cfg, None).unwrap().model;
    let diff = ma
        .params()
        .iter()
        .zip(mb.params().iter())
        .flat_map(|(p, q)| p.iter().zip(q.iter()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(diff < 1e-9, "{diff}");
}

#[test]
fn model_file_round_trip_predicts_identically() {
    let samples = sinusoid_samples(10, 2);
    let cfg = TrainConfig { hidden_size: 5, epochs: 3, ..Default::default() };
    let model = train(&samples, &cfg, None).unwrap().model;
    let json = ModelFile::from_model(&model, Some(cfg)).to_json().unwrap();
    let back = ModelFile::from_json(&json).unwrap().to_model().unwrap();
    let x = &samples[0].input_window;
    let p = predict(&model, x, 120.0, 3.0).unwrap();
    let q = predict(&back, x, 120.0, 3.0).unwrap();
    assert_eq!(p.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), q.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
}
