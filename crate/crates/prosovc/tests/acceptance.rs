//! Acceptance suite. Prints one `[PASS]` or `[FAIL]` line per criterion and
//! exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use prosovc::checkpoint::{load_checkpoint, save_checkpoint};
use prosovc::core::augment::{time_stretch, SpeedFactor};
use prosovc::core::dsp::{
    assemble_acoustic, autocorrelation, levinson_durbin, stft_mel, track_pitch, Analyzer, Dct, FrameSpec,
    MelSpectrogram, PitchTrack, BFCC_DIM, MEL_DIM,
};
use prosovc::core::eval::{envelope_error, median_f0_error_hz};
use prosovc::core::models::{
    reconstruction_loss, ConversionModel, Mode, ModelConfig, ModelInputs, TrainConfig, Trainer,
    TrainingExample,
};
use prosovc::core::pitchstats::{convert_f0, convert_log_f0, estimate_stats, PitchStats};
use prosovc::core::ppg::{train_classifier, ClassifierConfig, PhoneClassifier, PhoneLabels, Ppg, TOY_PPG_DIM};
use prosovc::core::toy::{synthesize, synthesize_voiced, ToySpeaker};
use prosovc::core::vocoder::{stream_synthesize, synthesize as vocode, synthesize_raw, VocoderConfig};
use prosovc::core::{Matrix, Waveform};
use prosovc::report::bench_vocoder;
use prosovc::stats::load_stats;
use prosovc::wav::load_wav;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SR: u32 = 16_000;

// AC2
const DIST_MEAN_TOL: f64 = 0.05;
const DIST_STD_REL_TOL: f64 = 0.10;
const DIST_MIN_FRAMES: usize = 500;
// AC3
const LEVINSON_RESIDUAL: f64 = 1e-8;
const AR1_TOL: f64 = 1e-6;
const DCT_TOL: f64 = 1e-5;
const PITCH_HZ_TOL: f64 = 3.0;
const PITCH_MIN_HIT: f64 = 0.90;
const PITCH_MAX_OCTAVE: f64 = 0.10;
// AC4
const DURATION_REL_TOL: f64 = 0.02;
const F0_DRIFT_MAX: f64 = 0.05;
const FACTORS: [f32; 4] = [0.4, 0.6, 0.8, 1.2];
// AC5
const COPY_F0_MAX_HZ: f64 = 10.0;
const COPY_ENVELOPE_MAX_DB: f64 = 3.0;
// AC6
const OVERFIT_MAX_STEPS: u64 = 2000;
const OVERFIT_STEPS: u64 = 600;
const OVERFIT_MAX_RATIO: f32 = 0.20;
// AC8
const LOG_F0_MEAN_TOL: f64 = 0.1;
const E2E_TRAIN_STEPS: u64 = 700;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn spec() -> FrameSpec {
    FrameSpec::default()
}

fn ac1_dimensions() -> Verdict {
    let full = |mode| ModelConfig { mode, ppg_dim: 512, ..ModelConfig::default() };
    let (b, p) = (full(Mode::Baseline), full(Mode::Proposed));
    let t = 30;
    let ppg = Ppg::new(Matrix::from_fn(t, 512, |_, _| 1.0 / 512.0)).unwrap();
    let pitch = PitchTrack::from_f0(SR, (0..t).map(|i| if i % 3 == 0 { 0.0 } else { 140.0 }).collect(), vec![0.8; t]).unwrap();
    let utt = synthesize(&ToySpeaker::preset("A").unwrap(), 0, 0.29, SR);
    let mel = stft_mel(&utt.wave, &spec()).unwrap();
    let bfcc = Analyzer::new(spec()).unwrap().bfcc(&utt.wave).unwrap();
    let inputs = ModelInputs { ppg: &ppg, pitch: &pitch, mel: Some(&mel) };
    let bm = ConversionModel::new(b.clone()).unwrap();
    let pm = ConversionModel::new(p.clone()).unwrap();
    let widths = [
        b.input_dim(),
        bm.assemble(&inputs).unwrap().dim(),
        p.input_dim(),
        pm.assemble(&inputs).unwrap().dim(),
        pm.forward(&inputs).unwrap().values().cols(),
        mel.values().cols(),
        bfcc.cols(),
    ];
    let want = [514, 514, 515, 515, 32, 80, 30];
    verdict(
        widths == want && mel.frames() == t && MEL_DIM == 80 && BFCC_DIM == 30,
        format!("baseline in {}/{}, proposed in {}/{}, out {}, mel {}, bfcc {}", widths[0], widths[1], widths[2], widths[3], widths[4], widths[5], widths[6]),
    )
}

fn voiced_log_moments(tracks: &[PitchTrack]) -> (f64, f64, usize) {
    let logs: Vec<f64> = tracks.iter().flat_map(|t| t.voiced_f0()).map(f64::ln).collect();
    let n = logs.len() as f64;
    let mean = logs.iter().sum::<f64>() / n;
    let std = (logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n).sqrt();
    (mean, std, logs.len())
}

fn ac2_log_f0_mapping() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let tracks: Vec<PitchTrack> = (0..4)
        .map(|_| {
            let f0 = (0..300)
                .map(|_| if rng.gen_bool(0.2) { 0.0 } else { (4.9 + 0.25 * (rng.gen::<f64>() - 0.5) * 3.4).exp() })
                .collect();
            PitchTrack::from_f0(SR, f0, vec![0.8; 300]).unwrap()
        })
        .collect();
    let src = estimate_stats(&tracks, 100).unwrap();
    let identity = tracks.iter().all(|t| convert_f0(t, &src, &src).unwrap() == *t);
    let tgt = PitchStats::new(4.6, 0.13, 1000).unwrap();
    let mean_exact = convert_log_f0(src.mu, &src, &tgt) == tgt.mu;
    let converted: Vec<PitchTrack> = tracks.iter().map(|t| convert_f0(t, &src, &tgt).unwrap()).collect();
    let (mean, std, n) = voiced_log_moments(&converted);
    let synthetic_ok = (mean - tgt.mu).abs() < DIST_MEAN_TOL && (std / tgt.sigma - 1.0).abs() < DIST_STD_REL_TOL && n >= DIST_MIN_FRAMES;

    // The same on tracked toy speech, speaker B mapped to speaker A's statistics.
    let tracked = |name: &str| -> Vec<PitchTrack> {
        (0..6).map(|s| track_pitch(&synthesize(&ToySpeaker::preset(name).unwrap(), s, 2.0, SR).wave, &spec()).unwrap()).collect()
    };
    let (a, b) = (tracked("A"), tracked("B"));
    let (sa, sb) = (estimate_stats(&a, 100).unwrap(), estimate_stats(&b, 100).unwrap());
    let mapped: Vec<PitchTrack> = b.iter().map(|t| convert_f0(t, &sb, &sa).unwrap()).collect();
    let (tm, ts, tn) = voiced_log_moments(&mapped);
    let toy_ok = (tm - sa.mu).abs() < DIST_MEAN_TOL && (ts / sa.sigma - 1.0).abs() < DIST_STD_REL_TOL && tn >= DIST_MIN_FRAMES;
    verdict(
        identity && mean_exact && synthetic_ok && toy_ok,
        format!(
            "identity {identity}, mean->mean {mean_exact}; synthetic n={n} dmean={:.2e} std ratio {:.4}; toy B->A n={tn} dmean={:.2e} std ratio {:.4}",
            (mean - tgt.mu).abs(),
            std / tgt.sigma,
            (tm - sa.mu).abs(),
            ts / sa.sigma
        ),
    )
}

fn harmonic(f0: &dyn Fn(f64) -> f64, seconds: f64) -> (Waveform, Vec<f64>) {
    let n = (seconds * f64::from(SR)) as usize;
    let mut phi = 0.0;
    let samples = (0..n)
        .map(|i| {
            phi += 2.0 * PI * f0(i as f64 / f64::from(SR)) / f64::from(SR);
            (0.3 * (1..=12).map(|k| (k as f64 * phi).sin() / k as f64).sum::<f64>()) as f32
        })
        .collect();
    (Waveform::new(samples, SR), (0..n / 160 + 1).map(|t| f0(t as f64 * 0.01)).collect())
}

fn ac3_dsp_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_res = 0.0f64;
    for _ in 0..200 {
        let x: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut r = autocorrelation(&x, 16);
        let r0 = r[0];
        r.iter_mut().for_each(|v| *v /= r0);
        let lpc = levinson_durbin(&r).unwrap();
        for i in 0..16usize {
            let lhs: f64 = (0..16).map(|j| r[i.abs_diff(j)] * lpc.coeffs[j]).sum();
            worst_res = worst_res.max((lhs - r[i + 1]).abs());
        }
    }
    let r: Vec<f64> = (0..=16).map(|k| 0.9f64.powi(k)).collect();
    let ar1 = levinson_durbin(&r).unwrap();
    let ar1_err = ar1.coeffs.iter().enumerate().map(|(i, a)| (a - if i == 0 { 0.9 } else { 0.0 }).abs()).fold(0.0, f64::max);

    let dct = Dct::new(30);
    let mut worst_dct = 0.0f64;
    for _ in 0..200 {
        let x: Vec<f64> = (0..30).map(|_| rng.gen_range(-30.0..10.0)).collect();
        let (mut c, mut y) = (vec![0.0; 30], vec![0.0; 30]);
        dct.forward(&x, &mut c);
        dct.inverse(&c, &mut y);
        worst_dct = worst_dct.max(x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }

    let sweeps: [(&str, Box<dyn Fn(f64) -> f64>); 4] = [
        ("up", Box::new(|t| 80.0 + 110.0 * t)),
        ("down", Box::new(|t| 300.0 - 110.0 * t)),
        ("vibrato", Box::new(|t| 190.0 + 110.0 * (PI * t).sin())),
        ("exp", Box::new(|t| 80.0 * 3.75f64.powf(t / 2.0))),
    ];
    let mut pitch_ok = true;
    let mut notes = Vec::new();
    for (name, f) in &sweeps {
        let (wave, truth) = harmonic(f.as_ref(), 2.0);
        let p = track_pitch(&wave, &spec()).unwrap();
        // Frames whose window hangs off either end are excluded.
        let interior = 3..truth.len() - 3;
        let n = interior.len() as f64;
        let (mut hit, mut octave) = (0.0, 0.0);
        for t in interior {
            let (est, tru) = (p.f0_hz[t], truth[t]);
            if (est - tru).abs() <= PITCH_HZ_TOL {
                hit += 1.0;
            } else if est > 0.0 && ((est / tru).log2().abs() - 1.0).abs() < 0.15 {
                octave += 1.0;
            }
        }
        pitch_ok &= hit / n >= PITCH_MIN_HIT && octave / n <= PITCH_MAX_OCTAVE;
        notes.push(format!("{name} {:.1}%/{:.1}%", 100.0 * hit / n, 100.0 * octave / n));
    }
    verdict(
        worst_res < LEVINSON_RESIDUAL && ar1_err < AR1_TOL && worst_dct < DCT_TOL && pitch_ok,
        format!(
            "levinson residual {worst_res:.1e}, AR(1) error {ar1_err:.1e}, DCT round trip {worst_dct:.1e}, sweeps within 3 Hz/octave [{}]",
            notes.join(", ")
        ),
    )
}

fn ac4_augmentation() -> Verdict {
    let mut ok = true;
    let mut worst_dur = 0.0f64;
    let mut worst_drift = 0.0f64;
    let mut identity = true;
    for name in ["A", "B", "C"] {
        let utt = synthesize_voiced(&ToySpeaker::preset(name).unwrap(), 21, 2.0, SR);
        identity &= time_stretch(&utt.wave, SpeedFactor::new(1.0).unwrap()).unwrap() == utt.wave;
        let f_in = track_pitch(&utt.wave, &spec()).unwrap().median_voiced_f0().unwrap();
        for f in FACTORS {
            let out = time_stretch(&utt.wave, SpeedFactor::new(f).unwrap()).unwrap();
            let dur = (out.duration_s() * f64::from(f) / utt.wave.duration_s() - 1.0).abs();
            let f_out = track_pitch(&out, &spec()).unwrap().median_voiced_f0().unwrap();
            let drift = (f_out / f_in - 1.0).abs();
            worst_dur = worst_dur.max(dur);
            worst_drift = worst_drift.max(drift);
            ok &= out.sample_rate == SR && dur <= DURATION_REL_TOL && drift < F0_DRIFT_MAX;
        }
    }
    verdict(
        ok && identity,
        format!("identity sample-exact {identity}; worst duration error {:.2}%, worst median-f0 drift {:.2}% over speakers A, B, C", worst_dur * 100.0, worst_drift * 100.0),
    )
}

fn ac5_copy_synthesis() -> Verdict {
    let an = Analyzer::new(spec()).unwrap();
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, seed) in [("A", 0), ("A", 1), ("B", 0), ("B", 1), ("C", 0)] {
        let wave = synthesize(&ToySpeaker::preset(name).unwrap(), seed, 1.5, SR).wave;
        let p_in = track_pitch(&wave, &spec()).unwrap();
        let feats = assemble_acoustic(&an.bfcc(&wave).unwrap(), &p_in).unwrap();
        let mut out = vocode(&feats, &spec(), &VocoderConfig::default()).unwrap();
        out.samples.truncate(wave.len());
        let p_out = track_pitch(&out, &spec()).unwrap();
        let f0 = median_f0_error_hz(&p_in, &p_out).unwrap().unwrap_or(f64::INFINITY);
        let env = envelope_error(&an.band_log_energies(&wave).unwrap(), &an.band_log_energies(&out).unwrap(), &p_in.vuv).unwrap();
        ok &= f0 < COPY_F0_MAX_HZ && env.median_db < COPY_ENVELOPE_MAX_DB;
        notes.push(format!("{name}{seed} {f0:.2} Hz/{:.2} dB", env.median_db));
    }
    verdict(ok, format!("median f0 error / envelope error: {}", notes.join(", ")))
}

fn toy_classifier() -> PhoneClassifier {
    let data: Vec<(MelSpectrogram, PhoneLabels)> = [("A", 100), ("B", 101), ("C", 102), ("A", 103)]
        .iter()
        .map(|&(name, seed)| {
            let u = synthesize(&ToySpeaker::preset(name).unwrap(), seed, 1.5, SR);
            (stft_mel(&u.wave, &spec()).unwrap(), PhoneLabels::new(u.labels, TOY_PPG_DIM).unwrap())
        })
        .collect();
    train_classifier(&data, ClassifierConfig { steps: 300, ..ClassifierConfig::default() }).unwrap().0
}

fn toy_example(classifier: &PhoneClassifier, name: &str, seed: u64, seconds: f64) -> TrainingExample {
    let u = synthesize(&ToySpeaker::preset(name).unwrap(), seed, seconds, SR);
    let an = Analyzer::new(spec()).unwrap();
    let (mel, bfcc) = an.mel_and_bfcc(&u.wave).unwrap();
    let pitch = track_pitch(&u.wave, &spec()).unwrap();
    let target = assemble_acoustic(&bfcc, &pitch).unwrap();
    let ppg = classifier.extract(&mel).unwrap();
    TrainingExample::new(ppg, pitch, mel, target).unwrap()
}

fn ac6_overfit(classifier: &PhoneClassifier) -> Verdict {
    assert!(OVERFIT_STEPS <= OVERFIT_MAX_STEPS);
    let data = vec![toy_example(classifier, "A", 1, 0.8), toy_example(classifier, "A", 2, 0.8)];
    let tc = TrainConfig { batch_size: 2, max_steps: OVERFIT_STEPS, seed: 6, ..TrainConfig::default() };
    let mut finals = Vec::new();
    let mut notes = Vec::new();
    for mode in [Mode::Proposed, Mode::Baseline] {
        let model = ConversionModel::new(ModelConfig { mode, seed: 6, ..ModelConfig::default() }).unwrap();
        let initial = reconstruction_loss(&model, &data).unwrap();
        let t0 = Instant::now();
        let mut trainer = Trainer::new(model, tc).unwrap();
        trainer.run(&data, |_, _| {}).unwrap();
        let fin = reconstruction_loss(trainer.model(), &data).unwrap();
        notes.push(format!("{} {initial:.4} -> {fin:.4} ({:.1}%, {:.0} s)", mode.as_str(), 100.0 * fin / initial, t0.elapsed().as_secs_f64()));
        finals.push((initial, fin));
    }
    let (p0, p1) = finals[0];
    let b1 = finals[1].1;
    verdict(p1 < OVERFIT_MAX_RATIO * p0 && p1 <= b1, format!("{OVERFIT_STEPS} steps; {}", notes.join("; ")))
}

fn ac7_determinism(classifier: &PhoneClassifier) -> Verdict {
    let data = vec![toy_example(classifier, "C", 7, 0.6), toy_example(classifier, "C", 8, 0.6)];
    let run = || {
        let model = ConversionModel::new(ModelConfig { seed: 7, ..ModelConfig::default() }).unwrap();
        let mut t = Trainer::new(model, TrainConfig { batch_size: 1, max_steps: 101, seed: 7, ..TrainConfig::default() }).unwrap();
        let mut at_100 = None;
        t.run(&data, |s, _| {
            if s.step == 100 {
                at_100 = Some(s.loss);
            }
        })
        .unwrap();
        (at_100.unwrap(), t.into_model())
    };
    let (l1, m1) = run();
    let (l2, _) = run();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.pvck");
    save_checkpoint(&path, &m1, 101, None, None).unwrap();
    let probe = toy_example(classifier, "B", 9, 0.7);
    let infer = || {
        let m = load_checkpoint(&path).unwrap().model;
        let y = m.forward(&probe.inputs()).unwrap();
        let wave = vocode(&y, &spec(), &VocoderConfig::default()).unwrap();
        (y.values().as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), wave.samples.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    let (a, b) = (infer(), infer());
    let same_loss = l1.to_bits() == l2.to_bits();
    verdict(same_loss && a == b, format!("step-100 loss {l1} vs {l2}; inference features and audio bit-identical: {}", a == b))
}

fn cli(dir: &Path, args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_prosovc")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "prosovc {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr));
    out
}

fn ac8_end_to_end() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        format!(
            "seed = 1\ntarget_speaker = \"A\"\n[augment]\nfactors = [0.8, 1.0, 1.2]\n\
             [model.cbhg]\nbank_k = 8\nbank_filters = 64\nprojection_dim = 64\nhighway_layers = 4\nhighway_units = 64\ngru_units = 64\n\
             [train]\nbatch_size = 4\nmax_steps = {E2E_TRAIN_STEPS}\nlog_every = 100\ncheckpoint_every = 0\n"
        ),
    )
    .unwrap();
    let t0 = Instant::now();
    let c = ["--config", "run.toml"];
    cli(d, &[&c[..], &["toy-corpus", "--out", "corpus", "--speakers", "A,B", "--count", "8", "--duration", "1.5"]].concat());
    cli(d, &[&c[..], &["train-ppg"]].concat());
    cli(d, &[&c[..], &["extract"]].concat());
    cli(d, &[&c[..], &["train"]].concat());
    cli(d, &[&c[..], &["stats", "--speaker", "B", "--out", "work/B.stats"]].concat());
    let (_, a_stats) = load_stats(d.join("work/run/A.stats")).unwrap();
    let hop = spec().hop();
    let mut logs = Vec::new();
    let mut durations_ok = true;
    for i in 1..=8 {
        let name = format!("B_{i:04}.wav");
        let (src, out) = (format!("corpus/wavs/{name}"), format!("converted/{name}"));
        cli(d, &[&c[..], &["convert", "--checkpoint", "work/run/model.pvck", "--src-stats", "work/B.stats", "--tgt-stats", "work/run/A.stats", &src, &out]].concat());
        let (s, o) = (load_wav(d.join(&src)).unwrap(), load_wav(d.join(&out)).unwrap());
        durations_ok &= o.sample_rate == SR && s.len().abs_diff(o.len()) <= hop;
        logs.extend(track_pitch(&o, &spec()).unwrap().voiced_f0().map(f64::ln));
    }
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    let dev = (mean - a_stats.mu).abs();
    verdict(
        durations_ok && dev < LOG_F0_MEAN_TOL,
        format!(
            "8 converted B utterances, durations within one hop: {durations_ok}; voiced log-f0 mean {mean:.4} vs A {:.4} (|d| {dev:.4}, {} frames); {:.0} s",
            a_stats.mu,
            logs.len(),
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn ac9_streaming() -> Verdict {
    let an = Analyzer::new(spec()).unwrap();
    let mut identical = true;
    for (name, seed) in [("A", 90), ("B", 91), ("C", 92)] {
        let wave = synthesize(&ToySpeaker::preset(name).unwrap(), seed, 2.0, SR).wave;
        let feats = assemble_acoustic(&an.bfcc(&wave).unwrap(), &track_pitch(&wave, &spec()).unwrap()).unwrap();
        let cfg = VocoderConfig::default();
        let batch = synthesize_raw(&feats, &spec(), &cfg).unwrap();
        let mut streamed = Vec::new();
        stream_synthesize(&feats, &spec(), &cfg, |b| streamed.extend_from_slice(b)).unwrap();
        identical &= streamed.len() == batch.len() && streamed.iter().zip(&batch).all(|(a, b)| a.to_bits() == b.to_bits());
    }
    let bench = bench_vocoder(&prosovc::config::RunConfig::default(), 10.0).unwrap();
    verdict(
        identical && bench.bit_identical,
        format!("stream == batch bit-exact: {}; real-time factor {:.4} ({:.2} s audio in {:.3} s, reported only)", identical && bench.bit_identical, bench.rtf, bench.audio_s, bench.elapsed_s),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
    })
}

fn main() {
    let classifier = toy_classifier();
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Verdict + '_>)> = vec![
        ("dimension fidelity", Box::new(ac1_dimensions)),
        ("log-f0 mapping", Box::new(ac2_log_f0_mapping)),
        ("dsp oracles", Box::new(ac3_dsp_oracles)),
        ("speed perturbation", Box::new(ac4_augmentation)),
        ("copy synthesis", Box::new(ac5_copy_synthesis)),
        ("overfit smoke test", Box::new(|| ac6_overfit(&classifier))),
        ("determinism", Box::new(|| ac7_determinism(&classifier))),
        ("end-to-end conversion", Box::new(ac8_end_to_end)),
        ("streaming vocoder", Box::new(ac9_streaming)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let v = guarded(f);
        failed += usize::from(!v.pass);
        println!("[{}] AC{} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
