//! Plain-text track files, one `L B E P` record per line.
//!
//! Frames are 0-based and `P = 0` means "no parent". Daughters are expected
//! to begin the frame after their parent ends; violations of that rule and
//! unusual daughter counts are reported by [`validate_lineage`] as warnings
//! rather than parse errors.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::error::TrackFileError;
use crate::model::{children_of, TrackRecord};

fn parse_field(token: &str) -> Option<u32> {
    if token.is_empty() || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    token.parse().ok()
}

pub fn parse_track_file(text: &str) -> Result<Vec<TrackRecord>, TrackFileError> {
    let mut records = Vec::new();
    let mut line_of: HashMap<u32, usize> = HashMap::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        let malformed = || TrackFileError::Malformed {
            line: line_no,
            text: line.to_string(),
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(malformed());
        }
        let mut values = [0u32; 4];
        for (slot, token) in values.iter_mut().zip(&fields) {
            *slot = parse_field(token).ok_or_else(malformed)?;
        }
        let [label, begin, end, parent] = values;
        if label == 0 {
            return Err(TrackFileError::ZeroLabel { line: line_no });
        }
        if begin > end {
            return Err(TrackFileError::InvertedSpan {
                line: line_no,
                label,
                begin,
                end,
            });
        }
        if line_of.insert(label, line_no).is_some() {
            return Err(TrackFileError::DuplicateLabel {
                line: line_no,
                label,
            });
        }
        records.push(TrackRecord::new(label, begin, end, parent));
    }

    let parent_of: HashMap<u32, u32> = records.iter().map(|r| (r.label, r.parent)).collect();
    for r in &records {
        if r.parent != 0 && !parent_of.contains_key(&r.parent) {
            return Err(TrackFileError::UnknownParent {
                line: line_of[&r.label],
                label: r.label,
                parent: r.parent,
            });
        }
    }
    // Every chain of parents must reach a root within |records| steps.
    for r in &records {
        let mut current = r.parent;
        let mut steps = 0;
        while current != 0 {
            if current == r.label || steps > records.len() {
                return Err(TrackFileError::Cycle { label: r.label });
            }
            current = parent_of[&current];
            steps += 1;
        }
    }
    Ok(records)
}

/// Serializes records in the given order, LF line endings.
pub fn write_track_file(records: &[TrackRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 16);
    for r in records {
        writeln!(out, "{} {} {} {}", r.label, r.begin, r.end, r.parent).unwrap();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineageWarning {
    /// A daughter does not begin the frame after its parent ends.
    FrameMismatch {
        label: u32,
        begin: u32,
        parent: u32,
        parent_end: u32,
    },
    /// A parent with a number of daughters other than two.
    DaughterCount { parent: u32, daughters: usize },
}

impl fmt::Display for LineageWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineageWarning::FrameMismatch {
                label,
                begin,
                parent,
                parent_end,
            } => write!(
                f,
                "track {label} begins at frame {begin} but parent {parent} ends at {parent_end}"
            ),
            LineageWarning::DaughterCount { parent, daughters } => {
                write!(f, "track {parent} has {daughters} daughters")
            }
        }
    }
}

/// Lineage checks that do not prevent parsing.
pub fn validate_lineage(records: &[TrackRecord]) -> Vec<LineageWarning> {
    let by_label: HashMap<u32, &TrackRecord> = records.iter().map(|r| (r.label, r)).collect();
    let mut warnings = Vec::new();
    for r in records.iter().filter(|r| r.parent != 0) {
        if let Some(p) = by_label.get(&r.parent) {
            if p.end.checked_add(1) != Some(r.begin) {
                warnings.push(LineageWarning::FrameMismatch {
                    label: r.label,
                    begin: r.begin,
                    parent: p.label,
                    parent_end: p.end,
                });
            }
        }
    }
    for (parent, daughters) in children_of(records) {
        if daughters.len() != 2 {
            warnings.push(LineageWarning::DaughterCount {
                parent,
                daughters: daughters.len(),
            });
        }
    }
    warnings
}
