//! Utterance manifests: one `id|speaker|path|duration[|speed]` record per line.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub audio_path: String,
    pub duration_s: f64,
    /// Speed-perturbation factor applied when the audio is loaded; 1.0 for
    /// original recordings.
    pub speed: f32,
}

impl Utterance {
    pub fn new(id: impl Into<String>, speaker: impl Into<String>, audio_path: impl Into<String>, duration_s: f64) -> Self {
        Self { id: id.into(), speaker: speaker.into(), audio_path: audio_path.into(), duration_s, speed: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<Utterance>,
    pub split: Split,
}

impl Manifest {
    /// Validates uniqueness of ids, positive durations and non-emptiness.
    pub fn new(entries: Vec<Utterance>, split: Split) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("manifest"));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            if !(e.duration_s > 0.0) {
                return Err(Error::InvalidConfig(format!("utterance {} has duration {}", e.id, e.duration_s)));
            }
        }
        Ok(Self { entries, split })
    }

    pub fn parse(text: &str, split: Split) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            if !(4..=5).contains(&fields.len()) {
                return Err(Error::ManifestParse { line: i + 1, msg: format!("expected 4 or 5 fields, got {}", fields.len()) });
            }
            let duration_s: f64 = fields[3]
                .trim()
                .parse()
                .map_err(|_| Error::ManifestParse { line: i + 1, msg: format!("bad duration {:?}", fields[3]) })?;
            let speed: f32 = match fields.get(4) {
                Some(s) => s
                    .trim()
                    .parse()
                    .map_err(|_| Error::ManifestParse { line: i + 1, msg: format!("bad speed {s:?}") })?,
                None => 1.0,
            };
            if fields[0].trim().is_empty() {
                return Err(Error::ManifestParse { line: i + 1, msg: "empty id".to_string() });
            }
            entries.push(Utterance {
                id: fields[0].trim().to_string(),
                speaker: fields[1].trim().to_string(),
                audio_path: fields[2].trim().to_string(),
                duration_s,
                speed,
            });
        }
        Self::new(entries, split)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{}|{}|{}|{}", e.id, e.speaker, e.audio_path, e.duration_s));
            if e.speed != 1.0 {
                out.push_str(&format!("|{}", e.speed));
            }
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries belonging to one speaker, in manifest order.
    pub fn speaker(&self, name: &str) -> impl Iterator<Item = &Utterance> + '_ {
        let name = name.to_string();
        self.entries.iter().filter(move |e| e.speaker == name)
    }

    /// Entry order for one pass over the data, a deterministic function of `seed`.
    pub fn shuffled_order(&self, seed: u64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        let text = "a1|spk|wavs/a1.wav|1.5\n# comment\n\na2|spk|wavs/a2.wav|2|0.8\n";
        let m = Manifest::parse(text, Split::Train).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries[1].speed, 0.8);
        assert_eq!(Manifest::parse(&m.to_text(), Split::Train).unwrap(), m);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(Manifest::parse("a|b|c\n", Split::Train), Err(Error::ManifestParse { line: 1, .. })));
        assert!(matches!(Manifest::parse("a|b|c|x\n", Split::Train), Err(Error::ManifestParse { .. })));
        assert!(matches!(Manifest::parse("a|s|p|1\na|s|q|1\n", Split::Train), Err(Error::DuplicateId(_))));
        assert!(matches!(Manifest::parse("", Split::Train), Err(Error::Empty(_))));
        assert!(Manifest::parse("a|s|p|0\n", Split::Train).is_err());
    }

    #[test]
    fn shuffle_is_seeded() {
        let text: String = (0..20).map(|i| format!("u{i}|s|p{i}.wav|1\n")).collect();
        let m = Manifest::parse(&text, Split::Train).unwrap();
        assert_eq!(m.shuffled_order(7), m.shuffled_order(7));
        assert_ne!(m.shuffled_order(7), m.shuffled_order(8));
    }
}
