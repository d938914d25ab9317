//! Speaker pitch statistics as `key = value` lines.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use prosovc_core::pitchstats::PitchStats;

use crate::cache::write_atomic;
use crate::error::{Error, Result};

pub fn format_stats(speaker: &str, s: &PitchStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "speaker = {speaker}");
    let _ = writeln!(out, "mu = {}", s.mu);
    let _ = writeln!(out, "sigma = {}", s.sigma);
    let _ = writeln!(out, "n_frames = {}", s.n_frames);
    out
}

pub fn parse_stats(text: &str, path: &Path) -> Result<(String, PitchStats)> {
    let (mut speaker, mut mu, mut sigma, mut n) = (None, None, None, None);
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| Error::corrupt(path, format!("bad line {line:?}")))?;
        let v = v.trim();
        let num = || v.parse::<f64>().map_err(|_| Error::corrupt(path, format!("bad number {v:?}")));
        match k.trim() {
            "speaker" => speaker = Some(v.to_string()),
            "mu" => mu = Some(num()?),
            "sigma" => sigma = Some(num()?),
            "n_frames" => n = Some(v.parse::<usize>().map_err(|_| Error::corrupt(path, format!("bad count {v:?}")))?),
            other => return Err(Error::corrupt(path, format!("unknown key {other:?}"))),
        }
    }
    let (Some(mu), Some(sigma), Some(n)) = (mu, sigma, n) else {
        return Err(Error::corrupt(path, "needs mu, sigma and n_frames"));
    };
    let stats = PitchStats::new(mu, sigma, n).map_err(|source| Error::Core { path: path.into(), source })?;
    Ok((speaker.unwrap_or_default(), stats))
}

pub fn save_stats(path: impl AsRef<Path>, speaker: &str, s: &PitchStats) -> Result<()> {
    write_atomic(path.as_ref(), format_stats(speaker, s).as_bytes())
}

pub fn load_stats(path: impl AsRef<Path>) -> Result<(String, PitchStats)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Missing { what: "speaker stats", path: path.into() },
        _ => Error::io(path, e),
    })?;
    parse_stats(&text, path)
}
