use soundmask::noise::{white_noise, NoiseProfile};
use soundmask::randomness::{cox_stuart, score_clip, wald_wolfowitz};

/// 10^4-sample uniform white noise, one seed per draw.
fn null_sequence(seed: u64) -> Vec<f64> {
    let clip = white_noise(&NoiseProfile::white(
        10_000.0 / 16_000.0,
        16_000,
        -20.0,
        seed,
    ))
    .unwrap();
    assert_eq!(clip.len(), 10_000);
    clip.samples().iter().map(|&s| f64::from(s)).collect()
}

#[test]
fn white_noise_runs_scores_are_calibrated() {
    let scores: Vec<f64> = (0..1000)
        .map(|s| wald_wolfowitz(&null_sequence(s)).unwrap().score)
        .collect();
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    let rejected = scores.iter().filter(|&&p| p < 0.05).count() as f64 / scores.len() as f64;
    assert!((0.4..=0.6).contains(&mean), "mean score {mean}");
    assert!(
        (0.03..=0.08).contains(&rejected),
        "rejection rate {rejected}"
    );
}

#[test]
fn ramps_score_near_zero_on_both_tests() {
    let up: Vec<f64> = (0..10_000).map(f64::from).collect();
    let down: Vec<f64> = up.iter().rev().copied().collect();
    for seq in [up, down] {
        assert!(wald_wolfowitz(&seq).unwrap().score < 1e-3);
        assert!(cox_stuart(&seq).unwrap().score < 1e-3);
    }
}

#[test]
fn silent_clip_is_degenerate() {
    let clip = soundmask::audio::AudioClip::new(vec![0; 32_000], 16_000).unwrap();
    assert!(score_clip(&clip, 100_000).is_err());
}
