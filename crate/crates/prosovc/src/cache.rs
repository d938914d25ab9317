//! Binary feature cache.
//!
//! One file per (utterance, kind) under `<root>/<kind>/`. Layout, all little
//! endian: `b"PVF1"`, kind tag `u8`, frames `u32`, dim `u32`, extraction
//! config hash `u64`, then `frames * dim` row-major `f32`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use prosovc_core::dsp::PitchTrack;
use prosovc_core::ppg::Ppg;
use prosovc_core::Matrix;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, WithPath};

pub const MAGIC: [u8; 4] = *b"PVF1";
pub const HEADER_LEN: usize = 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Mel,
    BfccAcoustic,
    F0Vuv,
    Ppg,
    Prosody,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 5] =
        [FeatureKind::Mel, FeatureKind::BfccAcoustic, FeatureKind::F0Vuv, FeatureKind::Ppg, FeatureKind::Prosody];

    pub fn tag(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.get(usize::from(tag).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Mel => "mel",
            FeatureKind::BfccAcoustic => "bfcc_acoustic",
            FeatureKind::F0Vuv => "f0vuv",
            FeatureKind::Ppg => "ppg",
            FeatureKind::Prosody => "prosody",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub utterance_id: String,
    pub kind: FeatureKind,
    pub data: Matrix,
}

impl FeatureRecord {
    pub fn new(utterance_id: impl Into<String>, kind: FeatureKind, data: Matrix) -> Result<Self> {
        let utterance_id = utterance_id.into();
        if !data.is_finite() {
            return Err(prosovc_core::Error::NonFinite { what: kind.name(), step: 0 }.into());
        }
        Ok(Self { utterance_id, kind, data })
    }
}

/// First 8 bytes of SHA-256 over the JSON form of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> u64 {
    let json = serde_json::to_vec(config).expect("config serialises");
    let digest = Sha256::digest(&json);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn encode(kind: FeatureKind, hash: u64, data: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * data.as_slice().len());
    out.extend_from_slice(&MAGIC);
    out.push(kind.tag());
    out.extend_from_slice(&(data.rows() as u32).to_le_bytes());
    out.extend_from_slice(&(data.cols() as u32).to_le_bytes());
    out.extend_from_slice(&hash.to_le_bytes());
    for v in data.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(path: &Path, bytes: &[u8]) -> Result<(FeatureKind, u64, Matrix)> {
    if bytes.len() < HEADER_LEN || bytes[..4] != MAGIC {
        return Err(Error::corrupt(path, "not a feature file"));
    }
    let kind = FeatureKind::from_tag(bytes[4]).ok_or_else(|| Error::corrupt(path, format!("kind tag {}", bytes[4])))?;
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
    let (t, d) = (u32_at(5), u32_at(9));
    let hash = u64::from_le_bytes(bytes[13..21].try_into().expect("8 bytes"));
    let body = &bytes[HEADER_LEN..];
    if Some(body.len()) != t.checked_mul(d).and_then(|n| n.checked_mul(4)) {
        return Err(Error::corrupt(path, format!("{} payload bytes for {t}x{d}", body.len())));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
    Ok((kind, hash, Matrix::new(t, d, data).at(path)?))
}

/// Writes to a sibling temp file and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_feature_file(path: &Path) -> Result<(FeatureKind, u64, Matrix)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(path, &bytes)
}

/// Reads an externally produced posteriorgram and checks it against the
/// utterance's frame count when one is given.
pub fn load_external_ppg(path: impl AsRef<Path>, frames: Option<usize>) -> Result<Ppg> {
    let path = path.as_ref();
    let (kind, _, m) = read_feature_file(path)?;
    if kind != FeatureKind::Ppg {
        return Err(Error::corrupt(path, format!("expected a ppg record, found {}", kind.name())));
    }
    let ppg = Ppg::new(m).at(path)?;
    if let Some(t) = frames {
        ppg.expect_frames(t).at(path)?;
    }
    Ok(ppg)
}

/// Cache directory bound to one extraction-config hash.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    root: PathBuf,
    hash: u64,
}

fn file_name(id: &str) -> String {
    let mut s = String::with_capacity(id.len() + 4);
    for b in id.bytes() {
        if b.is_ascii_alphanumeric() || b == b'-' || b == b'_' || b == b'.' {
            s.push(b as char);
        } else {
            s.push_str(&format!("%{b:02x}"));
        }
    }
    s.push_str(".pvf");
    s
}

impl FeatureCache {
    pub fn new(root: impl Into<PathBuf>, hash: u64) -> Self {
        Self { root: root.into(), hash }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn path(&self, id: &str, kind: FeatureKind) -> PathBuf {
        self.root.join(kind.name()).join(file_name(id))
    }

    pub fn put(&self, record: &FeatureRecord) -> Result<PathBuf> {
        let path = self.path(&record.utterance_id, record.kind);
        write_atomic(&path, &encode(record.kind, self.hash, &record.data))?;
        Ok(path)
    }

    pub fn get(&self, id: &str, kind: FeatureKind) -> Result<FeatureRecord> {
        let path = self.path(id, kind);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::MissingKey { id: id.into(), kind: kind.name(), path })
            }
            Err(e) => return Err(Error::io(&path, e)),
        };
        let (stored_kind, stored, data) = decode(&path, &bytes)?;
        if stored != self.hash {
            return Err(Error::StaleCache { path, stored, current: self.hash });
        }
        if stored_kind != kind {
            return Err(Error::corrupt(&path, format!("holds {} data", stored_kind.name())));
        }
        Ok(FeatureRecord { utterance_id: id.into(), kind, data })
    }

    /// True when a record exists, parses and carries the current hash.
    pub fn is_valid(&self, id: &str, kind: FeatureKind) -> bool {
        self.get(id, kind).is_ok()
    }
}

/// `T x 3` columns: f0 in Hz (0 when unvoiced), voicing flag, correlation.
pub fn pitch_to_matrix(p: &PitchTrack) -> Matrix {
    Matrix::from_fn(p.frames(), 3, |t, c| match c {
        0 => p.f0_hz[t] as f32,
        1 => f32::from(u8::from(p.vuv[t])),
        _ => p.correlation[t] as f32,
    })
}

pub fn matrix_to_pitch(m: &Matrix, sample_rate: u32) -> prosovc_core::Result<PitchTrack> {
    if m.cols() != 3 {
        return Err(prosovc_core::Error::DimMismatch { what: "f0vuv record", expected: 3, got: m.cols() });
    }
    let f0 = (0..m.rows()).map(|t| if m.get(t, 1) > 0.5 { f64::from(m.get(t, 0)) } else { 0.0 }).collect();
    PitchTrack::from_f0(sample_rate, f0, m.column(2).into_iter().map(f64::from).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path(), 42);
        let m = Matrix::from_fn(100, 80, |t, k| (t as f32 - k as f32) * 0.37);
        let rec = FeatureRecord::new("spk/utt 1", FeatureKind::Mel, m).unwrap();
        let path = cache.put(&rec).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len() as usize, HEADER_LEN + 100 * 80 * 4);
        assert_eq!(cache.get("spk/utt 1", FeatureKind::Mel).unwrap(), rec);
        assert!(matches!(cache.get("nope", FeatureKind::Mel), Err(Error::MissingKey { .. })));
        assert!(matches!(cache.get("spk/utt 1", FeatureKind::Ppg), Err(Error::MissingKey { .. })));
        let other = FeatureCache::new(dir.path(), 43);
        assert!(matches!(other.get("spk/utt 1", FeatureKind::Mel), Err(Error::StaleCache { stored: 42, current: 43, .. })));
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path(), 1);
        let p = cache.put(&FeatureRecord::new("u", FeatureKind::Prosody, Matrix::zeros(4, 1)).unwrap()).unwrap();
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(cache.get("u", FeatureKind::Prosody), Err(Error::Corrupt { .. })));
    }

    #[test]
    fn non_finite_records_are_refused() {
        let m = Matrix::new(1, 2, vec![0.0, f32::NAN]).unwrap();
        assert!(FeatureRecord::new("u", FeatureKind::Mel, m).is_err());
    }

    #[test]
    fn pitch_columns() {
        let p = PitchTrack::from_f0(16_000, vec![0.0, 125.0, 200.5], vec![0.1, 0.9, 0.75]).unwrap();
        let back = matrix_to_pitch(&pitch_to_matrix(&p), 16_000).unwrap();
        assert_eq!(back.vuv, p.vuv);
        assert_eq!(back.f0_hz, p.f0_hz);
        assert!(back.correlation.iter().zip(&p.correlation).all(|(a, b)| (a - b).abs() < 1e-7));
    }

    #[test]
    fn hash_tracks_config() {
        #[derive(Serialize)]
        struct C {
            hop: u32,
        }
        assert_eq!(config_hash(&C { hop: 160 }), config_hash(&C { hop: 160 }));
        assert_ne!(config_hash(&C { hop: 160 }), config_hash(&C { hop: 80 }));
    }
}
