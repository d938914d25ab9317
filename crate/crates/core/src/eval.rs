//! Objective metrics: mel-cepstral distortion over a DTW alignment, f0 RMSE
//! on co-voiced frames, voicing disagreement.
//!
//! Cepstra here are the 30 BFCCs; `c0` is excluded from the distance, so
//! values are not comparable with MFCC-based toolkits.

use alloc::vec;
use alloc::vec::Vec;

use crate::dsp::PitchTrack;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `10 / ln 10`.
pub const MCD_SCALE: f64 = 4.342_944_819_032_518;

/// Per-frame distortion in dB over coefficients `1..`.
pub fn frame_mcd(a: &[f32], b: &[f32]) -> f64 {
    let sq: f64 = a.iter().zip(b).skip(1).map(|(x, y)| {
        let d = f64::from(*x) - f64::from(*y);
        d * d
    }).sum();
    MCD_SCALE * libm::sqrt(2.0 * sq)
}

/// Monotone alignment from `(0, 0)` to `(n-1, m-1)` with steps
/// `(1,0)`, `(0,1)`, `(1,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DtwPath {
    pub pairs: Vec<(usize, usize)>,
    pub total_cost: f64,
}

pub fn dtw(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Result<DtwPath> {
    if n == 0 || m == 0 {
        return Err(Error::Empty("dtw sequence"));
    }
    let mut acc = vec![f64::INFINITY; n * m];
    for i in 0..n {
        for j in 0..m {
            let c = cost(i, j);
            let best = if i == 0 && j == 0 {
                0.0
            } else {
                let up = if i > 0 { acc[(i - 1) * m + j] } else { f64::INFINITY };
                let left = if j > 0 { acc[i * m + j - 1] } else { f64::INFINITY };
                let diag = if i > 0 && j > 0 { acc[(i - 1) * m + j - 1] } else { f64::INFINITY };
                diag.min(up).min(left)
            };
            acc[i * m + j] = best + c;
        }
    }
    let mut pairs = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while i > 0 || j > 0 {
        let cand = [
            (i > 0 && j > 0).then(|| (i - 1, j - 1)),
            (i > 0).then(|| (i - 1, j)),
            (j > 0).then(|| (i, j - 1)),
        ];
        let (bi, bj) = cand
            .into_iter()
            .flatten()
            .min_by(|a, b| acc[a.0 * m + a.1].total_cmp(&acc[b.0 * m + b.1]))
            .expect("a predecessor exists");
        i = bi;
        j = bj;
        pairs.push((i, j));
    }
    pairs.reverse();
    Ok(DtwPath { pairs, total_cost: acc[n * m - 1] })
}

fn check_cepstra(ref_c: &Matrix, hyp: &Matrix) -> Result<()> {
    if ref_c.rows() == 0 || hyp.rows() == 0 {
        return Err(Error::Empty("cepstral sequence"));
    }
    if ref_c.cols() != hyp.cols() {
        return Err(Error::DimMismatch { what: "cepstral order", expected: ref_c.cols(), got: hyp.cols() });
    }
    Ok(())
}

/// DTW-aligned mean distortion in dB and the alignment used.
pub fn mcd_with_path(ref_c: &Matrix, hyp: &Matrix) -> Result<(f64, DtwPath)> {
    check_cepstra(ref_c, hyp)?;
    let path = dtw(ref_c.rows(), hyp.rows(), |i, j| frame_mcd(ref_c.row(i), hyp.row(j)))?;
    let mean = path.total_cost / path.pairs.len() as f64;
    Ok((mean, path))
}

pub fn mcd(ref_c: &Matrix, hyp: &Matrix) -> Result<f64> {
    mcd_with_path(ref_c, hyp).map(|(v, _)| v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Metrics {
    pub rmse_hz: f64,
    pub vuv_error_rate: f64,
    pub co_voiced: usize,
}

/// Time-aligned tracks; RMSE is 0 when no frame is voiced in both.
pub fn f0_metrics(ref_p: &PitchTrack, hyp: &PitchTrack) -> Result<F0Metrics> {
    if ref_p.frames() != hyp.frames() {
        return Err(Error::FrameMismatch { what: "hypothesis pitch", expected: ref_p.frames(), got: hyp.frames() });
    }
    let n = ref_p.frames();
    if n == 0 {
        return Err(Error::Empty("pitch track"));
    }
    let mut sq = 0.0;
    let mut co = 0usize;
    let mut disagree = 0usize;
    for t in 0..n {
        if ref_p.vuv[t] != hyp.vuv[t] {
            disagree += 1;
        } else if ref_p.vuv[t] {
            let d = ref_p.f0_hz[t] - hyp.f0_hz[t];
            sq += d * d;
            co += 1;
        }
    }
    let rmse_hz = if co > 0 { libm::sqrt(sq / co as f64) } else { 0.0 };
    Ok(F0Metrics { rmse_hz, vuv_error_rate: disagree as f64 / n as f64, co_voiced: co })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricReport {
    pub mcd_db: f64,
    pub f0_rmse_hz: f64,
    pub vuv_error_rate: f64,
    pub n_frames: usize,
}

/// Metrics for one pair; pitch tracks are compared along the cepstral DTW path.
pub fn evaluate_pair(
    ref_c: &Matrix,
    ref_p: &PitchTrack,
    hyp_c: &Matrix,
    hyp_p: &PitchTrack,
) -> Result<MetricReport> {
    ref_p.expect_frames(ref_c.rows())?;
    hyp_p.expect_frames(hyp_c.rows())?;
    let (mcd_db, path) = mcd_with_path(ref_c, hyp_c)?;
    let pick = |p: &PitchTrack, idx: &mut dyn Iterator<Item = usize>| -> Result<PitchTrack> {
        let (f0, corr): (Vec<f64>, Vec<f64>) = idx.map(|i| (p.f0_hz[i], p.correlation[i])).unzip();
        PitchTrack::from_f0(p.sample_rate, f0, corr)
    };
    let ra = pick(ref_p, &mut path.pairs.iter().map(|p| p.0))?;
    let ha = pick(hyp_p, &mut path.pairs.iter().map(|p| p.1))?;
    let f = f0_metrics(&ra, &ha)?;
    Ok(MetricReport { mcd_db, f0_rmse_hz: f.rmse_hz, vuv_error_rate: f.vuv_error_rate, n_frames: path.pairs.len() })
}

/// Frame-weighted mean over pairs.
pub fn aggregate(reports: &[MetricReport]) -> Result<MetricReport> {
    let n: usize = reports.iter().map(|r| r.n_frames).sum();
    if n == 0 {
        return Err(Error::Empty("metric reports"));
    }
    let w = |f: fn(&MetricReport) -> f64| reports.iter().map(|r| f(r) * r.n_frames as f64).sum::<f64>() / n as f64;
    Ok(MetricReport {
        mcd_db: w(|r| r.mcd_db),
        f0_rmse_hz: w(|r| r.f0_rmse_hz),
        vuv_error_rate: w(|r| r.vuv_error_rate),
        n_frames: n,
    })
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Median `|f0_ref - f0_hyp|` over frames voiced in both; `None` if there are none.
pub fn median_f0_error_hz(ref_p: &PitchTrack, hyp_p: &PitchTrack) -> Result<Option<f64>> {
    if ref_p.frames() != hyp_p.frames() {
        return Err(Error::FrameMismatch { what: "hypothesis pitch", expected: ref_p.frames(), got: hyp_p.frames() });
    }
    let mut d: Vec<f64> = (0..ref_p.frames())
        .filter(|&t| ref_p.vuv[t] && hyp_p.vuv[t])
        .map(|t| libm::fabs(ref_p.f0_hz[t] - hyp_p.f0_hz[t]))
        .collect();
    Ok(median(&mut d))
}

/// Band-wise log-spectrum error between two time-aligned `T x B` natural-log
/// band-energy matrices over the frames selected by `mask`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeError {
    /// Median over all selected `(frame, band)` cells, dB.
    pub median_db: f64,
    /// Median per band, dB.
    pub per_band_db: Vec<f64>,
    /// Removed mean level difference `hyp - ref`, dB.
    pub level_offset_db: f64,
}

/// The single mean offset over selected cells is removed first: overall level
/// is set by output normalisation, not by the envelope.
pub fn envelope_error(ref_bands: &Matrix, hyp_bands: &Matrix, mask: &[bool]) -> Result<EnvelopeError> {
    if ref_bands.cols() != hyp_bands.cols() {
        return Err(Error::DimMismatch { what: "band count", expected: ref_bands.cols(), got: hyp_bands.cols() });
    }
    if ref_bands.rows() != hyp_bands.rows() || mask.len() != ref_bands.rows() {
        return Err(Error::FrameMismatch { what: "band energies", expected: ref_bands.rows(), got: hyp_bands.rows() });
    }
    let frames: Vec<usize> = (0..mask.len()).filter(|&t| mask[t]).collect();
    if frames.is_empty() {
        return Err(Error::Empty("selected frames"));
    }
    let bands = ref_bands.cols();
    let diff = |t: usize, k: usize| f64::from(hyp_bands.get(t, k)) - f64::from(ref_bands.get(t, k));
    let offset = frames.iter().map(|&t| (0..bands).map(|k| diff(t, k)).sum::<f64>()).sum::<f64>()
        / (frames.len() * bands) as f64;
    let db = |t: usize, k: usize| MCD_SCALE * libm::fabs(diff(t, k) - offset);
    let mut all: Vec<f64> = frames.iter().flat_map(|&t| (0..bands).map(move |k| (t, k))).map(|(t, k)| db(t, k)).collect();
    let per_band_db = (0..bands)
        .map(|k| {
            let mut v: Vec<f64> = frames.iter().map(|&t| db(t, k)).collect();
            median(&mut v).unwrap_or(0.0)
        })
        .collect();
    Ok(EnvelopeError {
        median_db: median(&mut all).unwrap_or(0.0),
        per_band_db,
        level_offset_db: MCD_SCALE * offset,
    })
}
