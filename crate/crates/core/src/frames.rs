//! Plain-text frame corpora.
//!
//! A file holds one modality. The first non-blank line is a header such as
//! `# modality=signal features=3`; every later non-blank line that does not
//! start with `#` is one frame of whitespace-separated numbers. Signal frames
//! list their points back to back, `features` values per point.

use std::path::Path;

use crate::error::{MaoiError, Result};
use crate::metric::{audio_semantic_variation, image_dynamism, signal_dynamics, FrameSequence};
use crate::model::ModalityKind;

fn parse_error(line: usize, reason: impl Into<String>) -> MaoiError {
    MaoiError::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn parse_frames(text: &str) -> Result<FrameSequence> {
    let mut modality = None;
    let mut features = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if modality.is_some() {
                continue;
            }
            for field in header.split_whitespace() {
                let Some((key, value)) = field.split_once('=') else {
                    continue;
                };
                match key {
                    "modality" => {
                        modality = Some(match value {
                            "image" => ModalityKind::Image,
                            "audio" => ModalityKind::Audio,
                            "signal" => ModalityKind::Signal,
                            other => return Err(parse_error(line_no, format!("unknown modality `{other}`"))),
                        })
                    }
                    "features" => {
                        features = Some(
                            value
                                .parse::<usize>()
                                .map_err(|e| parse_error(line_no, format!("bad feature count: {e}")))?,
                        )
                    }
                    _ => {}
                }
            }
            continue;
        }
        if modality.is_none() {
            return Err(parse_error(line_no, "frame data before the modality header"));
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| parse_error(line_no, format!("`{tok}`: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    match modality {
        None => Err(parse_error(0, "missing `# modality=...` header")),
        Some(ModalityKind::Image) => Ok(FrameSequence::Image(rows)),
        Some(ModalityKind::Audio) => Ok(FrameSequence::Audio(rows)),
        Some(ModalityKind::Signal) => {
            let f = features.ok_or_else(|| parse_error(0, "signal corpora need `features=`"))?;
            if f == 0 {
                return Err(parse_error(0, "features must be >= 1"));
            }
            let frames = rows
                .into_iter()
                .enumerate()
                .map(|(i, row)| {
                    if row.len() % f != 0 {
                        return Err(MaoiError::DimensionMismatch {
                            index: i,
                            expected: f,
                            got: row.len() % f,
                        });
                    }
                    Ok(row.chunks(f).map(<[f64]>::to_vec).collect())
                })
                .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;
            Ok(FrameSequence::Signal { features: f, frames })
        }
    }
}

pub fn read_frames(path: impl AsRef<Path>) -> Result<FrameSequence> {
    parse_frames(&std::fs::read_to_string(path)?)
}

impl FrameSequence {
    pub fn modality(&self) -> ModalityKind {
        match self {
            FrameSequence::Image(_) => ModalityKind::Image,
            FrameSequence::Audio(_) => ModalityKind::Audio,
            FrameSequence::Signal { .. } => ModalityKind::Signal,
        }
    }

    /// The content-change attribute of this modality.
    pub fn dynamism(&self) -> Result<f64> {
        match self {
            FrameSequence::Image(f) => image_dynamism(f),
            FrameSequence::Audio(f) => audio_semantic_variation(f),
            FrameSequence::Signal { features, frames } => signal_dynamics(*features, frames),
        }
    }
}
