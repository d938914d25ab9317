//! Objective evaluation of converted audio against references, text report,
//! plots and the streaming-vocoder benchmark.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use prosovc_core::dsp::PitchTrack;
use prosovc_core::eval::{aggregate, evaluate_pair, MetricReport};
use prosovc_core::toy::{synthesize as toy_synthesize, ToySpeaker};
use prosovc_core::vocoder::{stream_synthesize, synthesize_raw};

use crate::cache::write_atomic;
use crate::config::{EvalThresholds, RunConfig};
use crate::error::{Error, Result, WithPath};
use crate::pipeline::{analyse, read_loss_log, LOSS_LOG};
use crate::plot::{line_chart, Series};
use crate::wav::load_wav;

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub name: String,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<PairRow>,
    pub aggregate: MetricReport,
    /// f0 of the first pair, reference then hypothesis.
    pub contour: Option<(PitchTrack, PitchTrack)>,
}

fn wav_names(dir: &Path) -> Result<Vec<String>> {
    let rd = fs::read_dir(dir).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing { what: "evaluation directory", path: dir.into() },
        _ => Error::io(dir, e),
    })?;
    let mut names = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".wav") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Pairs are the `.wav` names present in both directories.
pub fn evaluate_dirs(cfg: &RunConfig, ref_dir: &Path, hyp_dir: &Path) -> Result<EvalReport> {
    let hyp_names = wav_names(hyp_dir)?;
    let names: Vec<String> = wav_names(ref_dir)?.into_iter().filter(|n| hyp_names.contains(n)).collect();
    if names.is_empty() {
        return Err(Error::Missing { what: "evaluation pairs", path: hyp_dir.into() });
    }
    let mut rows = Vec::new();
    let mut contour = None;
    for name in names {
        let (rp, hp) = (ref_dir.join(&name), hyp_dir.join(&name));
        let r = analyse(&load_wav(&rp)?, cfg).at(&rp)?;
        let h = analyse(&load_wav(&hp)?, cfg).at(&hp)?;
        let metrics = evaluate_pair(&r.bfcc, &r.pitch, &h.bfcc, &h.pitch).at(&hp)?;
        if contour.is_none() {
            contour = Some((r.pitch, h.pitch));
        }
        rows.push(PairRow { name: name.trim_end_matches(".wav").to_string(), metrics });
    }
    let agg = aggregate(&rows.iter().map(|r| r.metrics).collect::<Vec<_>>())?;
    Ok(EvalReport { rows, aggregate: agg, contour })
}

/// One row per pair and a final `aggregate` row.
pub fn format_table(report: &EvalReport) -> String {
    let width = report.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max("aggregate".len());
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>8}  {:>10}  {:>9}  {:>6}", "pair", "mcd_db", "f0_rmse_hz", "vuv_error", "frames");
    let mut line = |name: &str, m: &MetricReport| {
        let _ = writeln!(
            s,
            "{name:<width$}  {:>8.3}  {:>10.3}  {:>9.4}  {:>6}",
            m.mcd_db, m.f0_rmse_hz, m.vuv_error_rate, m.n_frames
        );
    };
    for r in &report.rows {
        line(&r.name, &r.metrics);
    }
    line("aggregate", &report.aggregate);
    s
}

/// Writes `report.txt`, `f0_contour.svg` and, when `run_dir` holds a loss
/// log, `loss_curve.svg`.
pub fn write_report(out_dir: &Path, report: &EvalReport, run_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let p = out_dir.join("report.txt");
    write_atomic(&p, format_table(report).as_bytes())?;
    written.push(p);
    if let Some((r, h)) = &report.contour {
        let pts = |t: &PitchTrack| -> Vec<(f64, f64)> {
            t.f0_hz.iter().enumerate().map(|(i, &f)| (i as f64, if f > 0.0 { f } else { f64::NAN })).collect()
        };
        let (rp, hp) = (pts(r), pts(h));
        let svg = line_chart(
            "f0 contour, first pair",
            "frame",
            "f0 (Hz)",
            &[Series { label: "reference", points: &rp }, Series { label: "converted", points: &hp }],
        );
        let p = out_dir.join("f0_contour.svg");
        write_atomic(&p, svg.as_bytes())?;
        written.push(p);
    }
    if let Some(log) = run_dir.map(|d| d.join(LOSS_LOG)).filter(|p| p.is_file()) {
        let pts: Vec<(f64, f64)> = read_loss_log(&log)?.into_iter().map(|(s, l)| (s as f64, f64::from(l))).collect();
        let svg = line_chart("training loss", "step", "L1", &[Series { label: "loss", points: &pts }]);
        let p = out_dir.join("loss_curve.svg");
        write_atomic(&p, svg.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

/// `Err(Threshold)` listing every aggregate metric above its bound.
pub fn check_thresholds(report: &EvalReport, t: &EvalThresholds) -> Result<()> {
    let a = &report.aggregate;
    let mut bad = Vec::new();
    if !(a.mcd_db <= t.mcd_max_db) {
        bad.push(format!("mcd {:.3} dB > {}", a.mcd_db, t.mcd_max_db));
    }
    if !(a.f0_rmse_hz <= t.f0_rmse_max_hz) {
        bad.push(format!("f0 rmse {:.3} Hz > {}", a.f0_rmse_hz, t.f0_rmse_max_hz));
    }
    if !(a.vuv_error_rate <= t.vuv_error_max) {
        bad.push(format!("vuv error {:.4} > {}", a.vuv_error_rate, t.vuv_error_max));
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Threshold(bad.join("; ")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchResult {
    pub audio_s: f64,
    pub elapsed_s: f64,
    /// Synthesis time over audio duration.
    pub rtf: f64,
    pub bit_identical: bool,
}

/// Streams copy-synthesis features of a toy utterance through the vocoder
/// and compares against the batch path.
pub fn bench_vocoder(cfg: &RunConfig, seconds: f64) -> Result<BenchResult> {
    let spk = ToySpeaker::preset("C").expect("preset");
    let utt = toy_synthesize(&spk, cfg.seed, seconds, cfg.frame.sample_rate);
    let feats = analyse(&utt.wave, cfg)?.acoustic()?;
    let mut streamed = Vec::with_capacity(utt.wave.len() + cfg.frame.hop());
    let t0 = Instant::now();
    stream_synthesize(&feats, &cfg.frame, &cfg.vocoder, |block| streamed.extend_from_slice(block))?;
    let elapsed_s = t0.elapsed().as_secs_f64();
    let batch = synthesize_raw(&feats, &cfg.frame, &cfg.vocoder)?;
    let bit_identical = streamed.len() == batch.len() && streamed.iter().zip(&batch).all(|(a, b)| a.to_bits() == b.to_bits());
    let audio_s = streamed.len() as f64 / f64::from(cfg.frame.sample_rate);
    Ok(BenchResult { audio_s, elapsed_s, rtf: elapsed_s / audio_s, bit_identical })
}
