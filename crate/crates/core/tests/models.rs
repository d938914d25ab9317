use prosovc_core::dsp::{assemble_acoustic, track_pitch, Analyzer, FrameSpec, MelSpectrogram, PitchTrack, MEL_DIM};
use prosovc_core::models::{
    assemble_input, CbhgConfig, ConversionModel, Mode, ModelConfig, ModelInputs, RefEncoderConfig, TrainConfig,
    Trainer, TrainingExample,
};
use prosovc_core::nn::{zero_grad, Module, Param, Rng};
use prosovc_core::ppg::{PhoneLabels, Ppg, EXTERNAL_PPG_DIM, TOY_PPG_DIM};
use prosovc_core::toy::{synthesize, ToySpeaker};
use prosovc_core::{Error, Matrix};
use rand::{Rng as _, SeedableRng};

fn tiny(mode: Mode, seed: u64) -> ModelConfig {
    ModelConfig {
        mode,
        ppg_dim: TOY_PPG_DIM,
        mel_dim: MEL_DIM,
        ref_encoder: RefEncoderConfig { conv_filters: vec![4, 4], embedding_dim: 1, channel_norm: false },
        cbhg: CbhgConfig {
            bank_k: 3,
            bank_filters: 8,
            projection_dim: 16,
            highway_layers: 2,
            highway_units: 8,
            gru_units: 8,
            output_dim: 32,
        },
        seed,
    }
}

fn example(speaker: &str, seed: u64, seconds: f64) -> TrainingExample {
    let utt = synthesize(&ToySpeaker::preset(speaker).unwrap(), seed, seconds, 16_000);
    let an = Analyzer::new(FrameSpec::default()).unwrap();
    let (mel, bfcc) = an.mel_and_bfcc(&utt.wave).unwrap();
    let pitch = track_pitch(&utt.wave, an.spec()).unwrap();
    let target = assemble_acoustic(&bfcc, &pitch).unwrap();
    let ppg = Ppg::one_hot(&PhoneLabels::new(utt.labels, TOY_PPG_DIM).unwrap());
    TrainingExample::new(ppg, pitch, mel, target).unwrap()
}

fn uniform_ppg(frames: usize, dim: usize) -> Ppg {
    Ppg::new(Matrix::from_fn(frames, dim, |_, _| 1.0 / dim as f32)).unwrap()
}

fn voiced_pitch(frames: usize) -> PitchTrack {
    let f0 = (0..frames).map(|t| if t % 4 == 3 { 0.0 } else { 110.0 + t as f64 }).collect();
    PitchTrack::from_f0(16_000, f0, vec![0.7; frames]).unwrap()
}

fn random_mel(frames: usize, seed: u64) -> MelSpectrogram {
    let mut rng = Rng::seed_from_u64(seed);
    MelSpectrogram::new(Matrix::from_fn(frames, MEL_DIM, |_, _| rng.gen_range(-12.0..3.0))).unwrap()
}

#[test]
fn input_widths_with_512_classes() {
    let ppg = uniform_ppg(100, EXTERNAL_PPG_DIM);
    let pitch = voiced_pitch(100);
    let p = prosovc_core::models::ProsodyEmbedding::new(Matrix::zeros(100, 1)).unwrap();
    assert_eq!(assemble_input(&ppg, &pitch, None, Mode::Baseline).unwrap().dim(), 514);
    assert_eq!(assemble_input(&ppg, &pitch, Some(&p), Mode::Proposed).unwrap().dim(), 515);
    for (mode, width) in [(Mode::Baseline, 514), (Mode::Proposed, 515)] {
        let cfg = ModelConfig { mode, ppg_dim: EXTERNAL_PPG_DIM, ..ModelConfig::default() };
        assert_eq!(cfg.input_dim(), width);
    }
    assert!(matches!(
        assemble_input(&ppg, &voiced_pitch(101), None, Mode::Baseline),
        Err(Error::FrameMismatch { .. })
    ));
    assert!(assemble_input(&ppg, &pitch, None, Mode::Proposed).is_err());
}

#[test]
fn full_size_model_shapes() {
    let cfg = ModelConfig { ppg_dim: EXTERNAL_PPG_DIM, ..ModelConfig::default() };
    assert_eq!(cfg.ref_encoder.output_freq(MEL_DIM), 2);
    assert_eq!(cfg.ref_encoder.gru_input_dim(MEL_DIM), 256);
    let model = ConversionModel::new(cfg).unwrap();
    let mel = random_mel(200, 1);
    let p = model.reference_encode(&mel).unwrap();
    assert_eq!((p.frames(), p.dim()), (200, 1));
    assert!(p.values().as_slice().iter().all(|v| v.abs() < 1.0));

    let (ppg, pitch, mel) = (uniform_ppg(100, 512), voiced_pitch(100), random_mel(100, 2));
    let inputs = ModelInputs { ppg: &ppg, pitch: &pitch, mel: Some(&mel) };
    assert_eq!(model.assemble(&inputs).unwrap().dim(), 515);
    let y = model.forward(&inputs).unwrap();
    assert_eq!((y.frames(), y.values().cols()), (100, 32));
    assert_eq!(model.forward(&inputs).unwrap(), y);
}

#[test]
fn single_frame_sequences() {
    for mode in [Mode::Baseline, Mode::Proposed] {
        let model = ConversionModel::new(ModelConfig { mode, ..ModelConfig::default() }).unwrap();
        let (ppg, pitch, mel) = (uniform_ppg(1, TOY_PPG_DIM), voiced_pitch(1), random_mel(1, 3));
        let y = model.forward(&ModelInputs { ppg: &ppg, pitch: &pitch, mel: Some(&mel) }).unwrap();
        assert_eq!((y.frames(), y.values().cols()), (1, 32));
    }
}

#[test]
fn time_length_preserved_for_any_t() {
    let model = ConversionModel::new(tiny(Mode::Proposed, 5)).unwrap();
    for t in [1, 2, 3, 7, 16, 33] {
        let (ppg, pitch, mel) = (uniform_ppg(t, TOY_PPG_DIM), voiced_pitch(t), random_mel(t, t as u64));
        assert_eq!(model.reference_encode(&mel).unwrap().frames(), t);
        let y = model.forward(&ModelInputs { ppg: &ppg, pitch: &pitch, mel: Some(&mel) }).unwrap();
        assert_eq!(y.frames(), t);
    }
}

#[test]
fn mode_mismatch_is_reported() {
    let base = ConversionModel::new(tiny(Mode::Baseline, 0)).unwrap();
    assert!(matches!(base.expect_mode(Mode::Proposed), Err(Error::ConfigMismatch(_))));
    assert!(base.expect_mode(Mode::Baseline).is_ok());
    assert!(matches!(base.reference_encode(&random_mel(5, 0)), Err(Error::ConfigMismatch(_))));
    let prop = ConversionModel::new(tiny(Mode::Proposed, 0)).unwrap();
    let (ppg, pitch) = (uniform_ppg(5, TOY_PPG_DIM), voiced_pitch(5));
    assert!(matches!(
        prop.forward(&ModelInputs { ppg: &ppg, pitch: &pitch, mel: None }),
        Err(Error::ConfigMismatch(_))
    ));
    let wide = uniform_ppg(5, 512);
    assert!(matches!(
        base.forward(&ModelInputs { ppg: &wide, pitch: &pitch, mel: None }),
        Err(Error::DimMismatch { .. })
    ));
}

#[test]
fn same_seed_same_parameters_and_output() {
    let a = ConversionModel::new(tiny(Mode::Proposed, 9)).unwrap();
    let b = ConversionModel::new(tiny(Mode::Proposed, 9)).unwrap();
    let c = ConversionModel::new(tiny(Mode::Proposed, 10)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

fn bump(model: &mut ConversionModel, tensor: usize, j: usize, d: f32) {
    let mut i = 0;
    model.visit_mut(&mut |_, p: &mut Param| {
        if i == tensor {
            p.value[j] += d;
        }
        i += 1;
    });
}

/// `sum(y * r)` through the whole model, reference encoder included.
/// Coordinates where halving the step changes the estimate sit on a ReLU
/// or max-pool kink and are skipped.
#[test]
fn whole_model_gradients() {
    for mode in [Mode::Baseline, Mode::Proposed] {
        let mut model = ConversionModel::new(tiny(mode, 21)).unwrap();
        let ex = example("A", 1, 0.12);
        let mut rng = Rng::seed_from_u64(3);
        let (y, cache) = model.forward_train(&ex.inputs()).unwrap();
        let r = Matrix::from_fn(y.rows(), y.cols(), |_, _| rng.gen_range(-1.0..1.0));
        zero_grad(&mut model);
        model.backward(&cache, &r);
        let loss = |m: &ConversionModel| -> f64 {
            let (y, _) = m.forward_train(&ex.inputs()).unwrap();
            y.as_slice().iter().zip(r.as_slice()).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum()
        };
        let mut grads = Vec::new();
        model.visit(&mut |name, p| grads.push((name.to_string(), p.grad.clone())));
        let (mut checked, mut skipped) = (0, 0);
        for (ti, (name, g)) in grads.iter().enumerate() {
            for _ in 0..3 {
                let j = rng.gen_range(0..g.len());
                let mut fd = |h: f32| {
                    bump(&mut model, ti, j, h);
                    let up = loss(&model);
                    bump(&mut model, ti, j, -2.0 * h);
                    let down = loss(&model);
                    bump(&mut model, ti, j, h);
                    (up - down) / (2.0 * f64::from(h))
                };
                let (n1, n2) = (fd(1e-2), fd(5e-3));
                let scale = n1.abs().max(n2.abs()).max(1e-2);
                if (n1 - n2).abs() / scale > 1e-2 {
                    skipped += 1;
                    continue;
                }
                let a = f64::from(g[j]);
                let scale = a.abs().max(n1.abs()).max(1e-2);
                assert!((a - n1).abs() / scale < 3e-2, "{mode:?} {name}[{j}]: analytic {a} numeric {n1}");
                checked += 1;
            }
        }
        assert!(checked * 5 >= (checked + skipped) * 4, "{mode:?}: only {checked} of {} checked", checked + skipped);
        if mode == Mode::Proposed {
            let mut ref_grad = 0.0f64;
            model.visit(&mut |name, p| {
                if name.starts_with("ref.") {
                    ref_grad += p.grad.iter().map(|g| f64::from(g.abs())).sum::<f64>();
                }
            });
            assert!(ref_grad > 0.0, "no gradient reaches the reference encoder");
        }
    }
}

fn train_cfg(seed: u64, steps: u64, clip: f32) -> TrainConfig {
    TrainConfig { learning_rate: 1e-3, batch_size: 2, max_steps: steps, grad_clip_norm: clip, seed, ..TrainConfig::default() }
}

#[test]
fn clipping_bounds_every_step() {
    let data = vec![example("A", 1, 0.3), example("A", 2, 0.3), example("A", 3, 0.3)];
    let model = ConversionModel::new(tiny(Mode::Proposed, 1)).unwrap();
    let mut trainer = Trainer::new(model, train_cfg(1, 30, 0.05)).unwrap();
    let mut clipped_any = false;
    trainer
        .run(&data, |s, _| {
            assert!(s.clipped_norm <= 0.05 * (1.0 + 1e-4), "step {}: {}", s.step, s.clipped_norm);
            clipped_any |= s.grad_norm > 0.05;
        })
        .unwrap();
    assert!(clipped_any);
}

#[test]
fn identical_seeds_give_identical_step_100_loss() {
    let data = vec![example("A", 1, 0.25), example("A", 2, 0.25)];
    let run = || {
        let model = ConversionModel::new(tiny(Mode::Proposed, 4)).unwrap();
        let mut trainer = Trainer::new(model, train_cfg(4, 101, 1.0)).unwrap();
        let mut losses = Vec::new();
        trainer.run(&data, |s, _| losses.push(s.loss)).unwrap();
        (losses[100], trainer.into_model())
    };
    let (l1, m1) = run();
    let (l2, m2) = run();
    assert_eq!(l1.to_bits(), l2.to_bits());
    assert_eq!(m1, m2);
    let y1 = m1.forward(&data[0].inputs()).unwrap();
    assert_eq!(y1, m2.forward(&data[0].inputs()).unwrap());
}

#[test]
fn non_finite_loss_aborts_with_step() {
    let data = vec![example("A", 1, 0.2)];
    let model = ConversionModel::new(tiny(Mode::Baseline, 2)).unwrap();
    let mut trainer = Trainer::new(model, train_cfg(0, 10, 1.0)).unwrap();
    trainer.step(&data).unwrap();
    trainer.step(&data).unwrap();
    let mut model = trainer.model().clone();
    model.visit_mut(&mut |name, p| {
        if name.starts_with("cbhg.out") {
            p.value[0] = f32::NAN;
        }
    });
    let mut trainer = Trainer::resume(model, train_cfg(0, 10, 1.0), trainer.optimizer_state().clone(), 2).unwrap();
    assert_eq!(trainer.step(&data), Err(Error::NonFinite { what: "loss", step: 2 }));
}

#[test]
fn empty_data_is_an_error() {
    let model = ConversionModel::new(tiny(Mode::Baseline, 2)).unwrap();
    let mut trainer = Trainer::new(model, train_cfg(0, 10, 1.0)).unwrap();
    assert_eq!(trainer.step(&[]), Err(Error::Empty("training examples")));
}

/// Loss over each 500-step window on one utterance: the window ends lower
/// than it starts and no step exceeds the window's running minimum by more
/// than 5%.
#[test]
fn single_utterance_loss_descends_per_window() {
    let data = vec![example("B", 8, 0.4)];
    let model = ConversionModel::new(tiny(Mode::Proposed, 6)).unwrap();
    let mut trainer = Trainer::new(model, train_cfg(6, 1000, 1.0)).unwrap();
    let mut losses = Vec::new();
    trainer.run(&data, |s, _| losses.push(s.loss)).unwrap();
    for (w, window) in losses.chunks(500).enumerate() {
        assert!(window.last() < window.first(), "window {w}");
        let mut best = window[0];
        for (i, &l) in window.iter().enumerate() {
            assert!(l <= best * 1.05, "window {w} step {i}: {l} vs running min {best}");
            best = best.min(l);
        }
    }
}
