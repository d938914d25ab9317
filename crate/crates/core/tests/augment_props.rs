use proptest::prelude::*;
use prosovc_core::augment::{time_stretch, SpeedFactor, MAX_FACTOR, MIN_FACTOR};
use prosovc_core::dsp::{track_pitch, FrameSpec};
use prosovc_core::toy::{synthesize, synthesize_voiced, ToySpeaker};
use prosovc_core::Waveform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noise(n: usize, seed: u64) -> Waveform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Waveform::new((0..n).map(|_| rng.gen_range(-0.3f32..0.3)).collect(), 16_000)
}

fn median_f0(w: &Waveform) -> f64 {
    track_pitch(w, &FrameSpec::default()).unwrap().median_voiced_f0().expect("voiced frames")
}

#[test]
fn non_unit_paper_factors_keep_pitch_and_scale_duration() {
    for name in ["A", "B", "C"] {
        let speaker = ToySpeaker::preset(name).unwrap();
        let utt = synthesize_voiced(&speaker, 21, 2.0, 16_000);
        let f_in = median_f0(&utt.wave);
        for f in [0.4f32, 0.6, 0.8, 1.2] {
            let out = time_stretch(&utt.wave, SpeedFactor::new(f).unwrap()).unwrap();
            let ratio = out.duration_s() * f64::from(f) / utt.wave.duration_s();
            assert!((ratio - 1.0).abs() < 0.02, "{name} x{f}: duration ratio {ratio}");
            let drift = (median_f0(&out) - f_in).abs() / f_in;
            assert!(drift < 0.05, "{name} x{f}: median f0 drift {drift}");
            assert_eq!(out.sample_rate, utt.wave.sample_rate);
        }
    }
}

/// With pauses and fricatives present, slowed-down noise repeats at lags in
/// the pitch range and can read as voiced, which moves the median. Pitch
/// itself is compared frame by frame where both tracks are voiced.
#[test]
fn mixed_speech_keeps_aligned_pitch() {
    for name in ["A", "B", "C"] {
        let utt = synthesize(&ToySpeaker::preset(name).unwrap(), 21, 2.0, 16_000);
        let p_in = track_pitch(&utt.wave, &FrameSpec::default()).unwrap();
        for f in [0.4f32, 0.6, 0.8, 1.2] {
            let out = time_stretch(&utt.wave, SpeedFactor::new(f).unwrap()).unwrap();
            let p_out = track_pitch(&out, &FrameSpec::default()).unwrap();
            let mut d: Vec<f64> = (0..p_out.frames())
                .filter_map(|t| {
                    let s = (t as f64 * f64::from(f)).round() as usize;
                    (s < p_in.frames() && p_in.vuv[s] && p_out.vuv[t]).then(|| (p_out.f0_hz[t] / p_in.f0_hz[s]).ln().abs())
                })
                .collect();
            d.sort_by(f64::total_cmp);
            assert!(d.len() > 50);
            assert!(d[d.len() / 2] < 0.01, "{name} x{f}: median |dlog f0| {}", d[d.len() / 2]);
        }
    }
}

#[test]
fn half_speed_doubles_a_two_second_input() {
    let utt = synthesize_voiced(&ToySpeaker::preset("A").unwrap(), 4, 2.0, 16_000);
    let out = time_stretch(&utt.wave, SpeedFactor::new(0.5).unwrap()).unwrap();
    assert!((out.duration_s() - 4.0).abs() < 0.08);
    let drift = (median_f0(&out) - median_f0(&utt.wave)).abs() / median_f0(&utt.wave);
    assert!(drift < 0.05);
}

#[test]
fn out_of_range_factors_are_rejected() {
    for f in [0.0f32, -1.0, 0.2, 4.5, f32::NAN] {
        assert!(SpeedFactor::new(f).is_err(), "{f}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn unit_factor_is_sample_exact(len in 1600usize..8000, seed in any::<u64>()) {
        let w = noise(len, seed);
        prop_assert_eq!(time_stretch(&w, SpeedFactor::new(1.0).unwrap()).unwrap(), w);
    }

    #[test]
    fn duration_scales_inversely(len in 1600usize..16000, f in MIN_FACTOR..MAX_FACTOR, seed in any::<u64>()) {
        let w = noise(len, seed);
        let out = time_stretch(&w, SpeedFactor::new(f).unwrap()).unwrap();
        let ratio = out.duration_s() * f64::from(f) / w.duration_s();
        prop_assert!((ratio - 1.0).abs() < 0.02, "ratio {}", ratio);
        prop_assert!(out.samples.iter().all(|s| s.is_finite()));
    }
}
