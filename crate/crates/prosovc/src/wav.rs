//! 16-bit PCM mono WAV.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use prosovc_core::Waveform;

use crate::error::{Error, Result};

const SCALE: f32 = 32768.0;

fn hound_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(source) => Error::io(path, source),
        hound::Error::Unsupported => Error::UnsupportedEncoding { path: path.into(), msg: "unsupported WAV layout".into() },
        other => Error::Wav { path: path.into(), msg: other.to_string() },
    }
}

/// Samples are scaled by 1/32768, so 32767 reads as 0.99997.
pub fn load_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    let reader = WavReader::open(path).map_err(|e| hound_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::MultiChannel { path: path.into(), channels: spec.channels });
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedEncoding {
            path: path.into(),
            msg: format!("{:?} {}-bit, expected 16-bit PCM", spec.sample_format, spec.bits_per_sample),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| f32::from(v) / SCALE))
        .collect::<std::result::Result<Vec<f32>, _>>()
        .map_err(|e| hound_err(path, e))?;
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Writes 16-bit PCM, clipping to the representable range.
pub fn save_wav(path: impl AsRef<Path>, wave: &Waveform) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec { channels: 1, sample_rate: wave.sample_rate, bits_per_sample: 16, sample_format: SampleFormat::Int };
    let mut w = WavWriter::create(path, spec).map_err(|e| hound_err(path, e))?;
    for &s in &wave.samples {
        let v = (s * SCALE).round().clamp(-SCALE, SCALE - 1.0) as i16;
        w.write_sample(v).map_err(|e| hound_err(path, e))?;
    }
    w.finalize().map_err(|e| hound_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_and_full_scale() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        save_wav(&p, &Waveform::silence(16_000, 16_000)).unwrap();
        let w = load_wav(&p).unwrap();
        assert_eq!((w.len(), w.sample_rate), (16_000, 16_000));
        assert!(w.samples.iter().all(|&v| v == 0.0));

        let spec = WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let mut wr = WavWriter::create(&p, spec).unwrap();
        wr.write_sample(32767i16).unwrap();
        wr.write_sample(-32768i16).unwrap();
        wr.finalize().unwrap();
        let w = load_wav(&p).unwrap();
        assert_eq!(w.samples, vec![32767.0 / 32768.0, -1.0]);
        assert_eq!(w.sample_rate, 8000);
    }

    #[test]
    fn rejects_stereo_float_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = WavSpec { channels: 2, sample_rate: 16_000, bits_per_sample: 16, sample_format: SampleFormat::Int };
        let mut wr = WavWriter::create(&p, spec).unwrap();
        wr.write_sample(0i16).unwrap();
        wr.write_sample(0i16).unwrap();
        wr.finalize().unwrap();
        let e = load_wav(&p).unwrap_err();
        assert!(matches!(e, Error::MultiChannel { channels: 2, .. }));
        assert!(e.to_string().contains("st.wav") && e.to_string().contains("multi-channel audio"));

        let f = dir.path().join("f.wav");
        let spec = WavSpec { channels: 1, sample_rate: 16_000, bits_per_sample: 32, sample_format: SampleFormat::Float };
        let mut wr = WavWriter::create(&f, spec).unwrap();
        wr.write_sample(0.5f32).unwrap();
        wr.finalize().unwrap();
        assert!(matches!(load_wav(&f), Err(Error::UnsupportedEncoding { .. })));

        let g = dir.path().join("g.wav");
        std::fs::write(&g, b"not a wav file").unwrap();
        assert!(load_wav(&g).unwrap_err().to_string().contains("g.wav"));
        assert!(matches!(load_wav(dir.path().join("none.wav")), Err(Error::Io { .. })));
    }

    #[test]
    fn round_trip_is_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.wav");
        let w = Waveform::new((0..1000).map(|i| (i as f32 * 0.01).sin() * 0.9).collect(), 16_000);
        save_wav(&p, &w).unwrap();
        let r = load_wav(&p).unwrap();
        assert!(w.samples.iter().zip(&r.samples).all(|(a, b)| (a - b).abs() <= 0.5 / 32768.0 + 1e-7));
    }
}
