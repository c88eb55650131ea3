//! Turning extractor output into a valid partition of the body.
//!
//! Repair is deterministic and never drops text: after clamping, empty units
//! are discarded and the rest are stably sorted by `(start, end)`. A unit
//! starting before the end of the previous one is truncated to start there
//! (or discarded when wholly contained). A gap is absorbed by the preceding
//! unit; a leading gap by the first unit, a trailing gap by the last.

use crate::agents::RawUnit;
use crate::domain::{canonical_unit_label, char_len, find_from, CommunicativeUnit, Span, UnitId};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub units: Vec<CommunicativeUnit>,
    pub warnings: Vec<String>,
}

/// Resolve each raw unit to a span. Offsets are taken as given; text is
/// searched for from the end of the previously located unit, then trimmed,
/// then from the start of the body. Units whose text cannot be found are
/// dropped with a warning.
pub fn locate_units(body: &str, raw: &[RawUnit]) -> (Vec<(String, Span)>, Vec<String>) {
    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let mut cursor = 0;
    for unit in raw {
        if let (Some(start), Some(end)) = (unit.start, unit.end) {
            if start > end {
                warnings.push(format!("unit `{}` has start {start} after end {end}; dropped", unit.label));
                continue;
            }
            out.push((unit.label.clone(), Span::new(start, end)));
            cursor = end;
            continue;
        }
        let Some(text) = unit.text.as_deref() else { continue };
        let trimmed = text.trim();
        let found = find_from(body, text, cursor)
            .map(|s| Span::new(s, s + char_len(text)))
            .or_else(|| find_from(body, trimmed, cursor).map(|s| Span::new(s, s + char_len(trimmed))))
            .or_else(|| find_from(body, trimmed, 0).map(|s| Span::new(s, s + char_len(trimmed))));
        match found {
            Some(span) => {
                cursor = span.end;
                out.push((unit.label.clone(), span));
            }
            None => warnings.push(format!("text of unit `{}` not found in the body; dropped", unit.label)),
        }
    }
    (out, warnings)
}

/// Repair candidate spans into a partition of `[0, body_len)`.
pub fn repair_partition(body_len: usize, candidates: Vec<(String, Span)>) -> Result<Segmentation> {
    let mut warnings = Vec::new();
    let mut cands: Vec<(String, Span)> = Vec::with_capacity(candidates.len());
    for (label, span) in candidates {
        let clamped = Span::new(span.start.min(body_len), span.end.min(body_len));
        if clamped != span {
            warnings.push(format!("unit `{label}` {span} clamped to {clamped}"));
        }
        if clamped.is_empty() {
            warnings.push(format!("empty unit `{label}` dropped"));
            continue;
        }
        cands.push((label, clamped));
    }
    cands.sort_by_key(|(_, s)| (s.start, s.end));

    let mut kept: Vec<(String, Span)> = Vec::with_capacity(cands.len());
    let mut cursor = 0;
    for (label, mut span) in cands {
        if span.start < cursor {
            if span.end <= cursor {
                warnings.push(format!("unit `{label}` {span} lies inside an earlier unit; dropped"));
                continue;
            }
            warnings.push(format!("unit `{label}` overlapped its predecessor; now starts at {cursor}"));
            span.start = cursor;
        } else if span.start > cursor {
            match kept.last_mut() {
                Some((prev, prev_span)) => {
                    warnings.push(format!("gap [{cursor}, {}) absorbed by `{prev}`", span.start));
                    prev_span.end = span.start;
                }
                None => {
                    warnings.push(format!("leading gap [0, {}) absorbed by `{label}`", span.start));
                    span.start = 0;
                }
            }
        }
        cursor = span.end;
        kept.push((label, span));
    }
    let Some((last_label, last)) = kept.last_mut() else {
        return Err(Error::Segmentation("the extractor returned no usable units".into()));
    };
    if last.end < body_len {
        warnings.push(format!("trailing gap [{}, {body_len}) absorbed by `{last_label}`", last.end));
        last.end = body_len;
    }
    let units = kept
        .into_iter()
        .enumerate()
        .map(|(i, (label, span))| CommunicativeUnit {
            unit_id: UnitId::new(format!("u{}", i + 1)),
            label: canonical_unit_label(&label),
            span,
            order_index: i,
        })
        .collect();
    Ok(Segmentation { units, warnings })
}

/// Locate and repair in one step.
pub fn segment(body: &str, raw: &[RawUnit]) -> Result<Segmentation> {
    let (located, mut warnings) = locate_units(body, raw);
    let mut seg = repair_partition(char_len(body), located)?;
    warnings.append(&mut seg.warnings);
    seg.warnings = warnings;
    Ok(seg)
}
