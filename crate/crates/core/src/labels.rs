//! Per-face provenance of a watermarked mesh and its sidecar text format.
//!
//! The sidecar has one line per face: `face_index label`, where label is
//! `target`, `watermark:<i>` or `watermark:<i>:top`. The `top` suffix marks
//! faces of the raised (or sunk) surface that follows the target's shape.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceLabel {
    Target,
    Watermark { index: usize, top: bool },
}

impl FaceLabel {
    pub fn is_watermark(&self) -> bool {
        matches!(self, FaceLabel::Watermark { .. })
    }

    pub fn is_top(&self) -> bool {
        matches!(self, FaceLabel::Watermark { top: true, .. })
    }

    pub fn watermark_index(&self) -> Option<usize> {
        match self {
            FaceLabel::Watermark { index, .. } => Some(*index),
            FaceLabel::Target => None,
        }
    }
}

impl fmt::Display for FaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaceLabel::Target => write!(f, "target"),
            FaceLabel::Watermark { index, top: false } => write!(f, "watermark:{index}"),
            FaceLabel::Watermark { index, top: true } => write!(f, "watermark:{index}:top"),
        }
    }
}

impl FromStr for FaceLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "target" {
            return Ok(FaceLabel::Target);
        }
        let mut parts = s.split(':');
        if parts.next() != Some("watermark") {
            return Err(format!("unknown label `{s}`"));
        }
        let index = parts
            .next()
            .and_then(|p| p.parse::<usize>().ok())
            .ok_or_else(|| format!("bad watermark index in `{s}`"))?;
        let top = match parts.next() {
            None => false,
            Some("top") => true,
            Some(_) => return Err(format!("unknown label suffix in `{s}`")),
        };
        if parts.next().is_some() {
            return Err(format!("trailing fields in `{s}`"));
        }
        Ok(FaceLabel::Watermark { index, top })
    }
}

/// Serializes labels as sidecar text.
pub fn write_sidecar(labels: &[FaceLabel]) -> String {
    let mut out = String::with_capacity(labels.len() * 16);
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i} {l}\n"));
    }
    out
}

/// Parses sidecar text; every face in `0..face_count` must appear exactly once.
pub fn parse_sidecar(text: &str, face_count: usize) -> Result<Vec<FaceLabel>> {
    let mut labels: Vec<Option<FaceLabel>> = vec![None; face_count];
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: n + 1, message };
        let mut it = line.split_whitespace();
        let (Some(idx), Some(label), None) = (it.next(), it.next(), it.next()) else {
            return Err(err("expected `face_index label`".into()));
        };
        let idx: usize = idx.parse().map_err(|_| err(format!("bad face index `{idx}`")))?;
        let label: FaceLabel = label.parse().map_err(err)?;
        let slot = labels
            .get_mut(idx)
            .ok_or_else(|| err(format!("face index {idx} out of range (mesh has {face_count} faces)")))?;
        if slot.replace(label).is_some() {
            return Err(err(format!("face {idx} labelled twice")));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Parse { line: 0, message: format!("face {i} has no label") }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let labels = vec![
            FaceLabel::Target,
            FaceLabel::Watermark { index: 0, top: false },
            FaceLabel::Watermark { index: 12, top: true },
        ];
        let text = write_sidecar(&labels);
        assert_eq!(text, "0 target\n1 watermark:0\n2 watermark:12:top\n");
        assert_eq!(parse_sidecar(&text, 3).unwrap(), labels);
    }

    #[test]
    fn rejects_corruption() {
        assert!(parse_sidecar("0 target\n", 2).is_err());
        assert!(parse_sidecar("0 target\n0 target\n", 1).is_err());
        assert!(parse_sidecar("0 banana\n", 1).is_err());
        assert!(parse_sidecar("5 target\n", 1).is_err());
        assert!(parse_sidecar("0 watermark:x\n", 1).is_err());
        assert!(parse_sidecar("zero target\n", 1).is_err());
    }
}
