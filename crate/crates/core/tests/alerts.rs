use epicast::alerts::*;
use epicast::dsp::{optimize_cutoff, ObjectiveParams};
use epicast::epidata::incidence_per_million;
use epicast::synth::{generate, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn high(incidence: &[f64]) -> Vec<u8> {
    high_inertia_series("r", incidence, &AlertConfig::default()).unwrap().levels
}

#[test]
fn seven_days_up_raises_one_level() {
    let levels = high(&[15.0; 9]);
    assert_eq!(levels, [1, 1, 1, 1, 1, 1, 2, 2, 2]);
}

#[test]
fn fourteen_days_down_lowers_one_level() {
    let mut incidence = vec![15.0; 7];
    incidence.extend(vec![5.0; 13]);
    let levels = high(&incidence);
    assert_eq!(levels[6..], [2; 14]);
    incidence.push(5.0);
    assert_eq!(*high(&incidence).last().unwrap(), 1);
}

#[test]
fn alternating_extremes_never_move_the_level() {
    let incidence: Vec<f64> = (0..60).map(|t| if t % 2 == 0 { 5.0 } else { 50.0 }).collect();
    assert_eq!(high(&incidence), vec![1; 60]);
    let low = low_inertia_series("r", &incidence, &AlertConfig::default()).unwrap();
    assert_eq!(count_level_changes(&low), 59);
}

#[test]
fn counter_resets_after_a_transition() {
    // 14 days at level 4 incidence: up at day 7 and day 14, never two steps from one run.
    let levels = high(&[60.0; 14]);
    assert_eq!(levels[5..8], [1, 2, 2]);
    assert_eq!(levels[12..14], [2, 3]);
}

#[test]
fn random_series_respect_one_step_and_converge() {
    let config = AlertConfig::default();
    let settle = 4 * config.up_days.max(config.down_days);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let prefix = rng.random_range(0..80);
        let mut incidence: Vec<f64> = (0..prefix).map(|_| rng.random_range(0.0..80.0)).collect();
        let target = rng.random_range(0.0..80.0);
        incidence.extend(std::iter::repeat_n(target, settle));
        let levels = high_inertia_series("r", &incidence, &config).unwrap().levels;
        assert!(levels.windows(2).all(|w| w[0].abs_diff(w[1]) <= 1));
        let want = config.level(target).unwrap();
        let first = levels.iter().rposition(|&l| l != want).map_or(0, |i| i + 1);
        assert!(first < levels.len(), "never reached level {want}");
        assert!(levels[first..].iter().all(|&l| l == want));
        assert!(levels.iter().all(|l| (1..=4).contains(l)));
    }
}

proptest! {
    #[test]
    fn spaced_changes_are_not_spikes(gaps in prop::collection::vec(3usize..10, 0..12), start in 1u8..=4) {
        let mut levels = vec![start];
        let mut level = start;
        for gap in gaps {
            level = if level == 4 { 1 } else { level + 1 };
            levels.extend(std::iter::repeat_n(level, gap));
        }
        let s = AlertSeries { levels, policy: InertiaPolicy::LowInertia, region_id: "r".into() };
        prop_assert_eq!(count_spikes(&s), 0);
    }

    #[test]
    fn spikes_never_exceed_changes(levels in prop::collection::vec(1u8..=4, 0..60)) {
        let s = AlertSeries { levels, policy: InertiaPolicy::LowInertia, region_id: "r".into() };
        prop_assert!(count_spikes(&s) <= count_level_changes(&s));
    }
}

#[test]
fn smoothing_removes_most_periodic_testing_spikes() {
    let cfg = SynthConfig { train_regions: 6, test_regions: 0, days: 120, ..Default::default() };
    let alert = AlertConfig::default();
    let (mut raw, mut smooth) = (0, 0);
    for region in generate(&cfg).unwrap() {
        let incidence = incidence_per_million(&region.curve);
        let smoothed = optimize_cutoff(&incidence, &ObjectiveParams::default()).unwrap().smoothed;
        raw += count_spikes(&low_inertia_series("r", &incidence, &alert).unwrap());
        smooth += count_spikes(&low_inertia_series("r", &smoothed, &alert).unwrap());
    }
    assert!(raw > 50, "{raw}");
    assert!(smooth * 10 <= raw, "{smooth} of {raw}");
}
