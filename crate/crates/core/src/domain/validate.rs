use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::{CommunicativeUnit, Intent, Span, UnitIntentLink};

/// One problem found by a report-style validator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum Issue {
    Gap { span: Span },
    Overlap { span: Span, unit_id: String },
    OutOfBounds { unit_id: String, span: Span },
    EmptySpan { unit_id: String },
    OutOfOrder { unit_id: String },
    DuplicateUnit { unit_id: String },
    DanglingUnit { unit_id: String, intent_id: String },
    DanglingIntent { unit_id: String, intent_id: String },
    UnlinkedUnit { unit_id: String },
    UnlinkedIntent { intent_id: String },
    DuplicateLink { unit_id: String, intent_id: String },
    UnknownFactor { factor_id: String },
    DuplicateFactor { factor_id: String },
    InvalidSelection { factor_id: String, reason: String },
    DuplicateId { kind: String, id: String },
    InvalidRecord { record_id: String, reason: String },
    InvalidAnchor { anchor_id: String, reason: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn push(&mut self, issue: Issue) {
        self.issues.push(issue);
    }

    pub fn len(&self) -> usize {
        self.issues.len()
    }
}

/// Report every gap, overlap and out-of-bounds span. The report is empty iff
/// the spans, taken in `order_index` order, partition `[0, body_length)`.
pub fn validate_unit_partition(units: &[CommunicativeUnit], body_length: usize) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen = BTreeSet::new();
    let mut clamped = Vec::with_capacity(units.len());
    for unit in units {
        let id = unit.unit_id.0.clone();
        if !seen.insert(id.clone()) {
            report.push(Issue::DuplicateUnit { unit_id: id.clone() });
        }
        if unit.span.start >= unit.span.end {
            report.push(Issue::EmptySpan { unit_id: id });
            continue;
        }
        if unit.span.end > body_length {
            report.push(Issue::OutOfBounds {
                unit_id: id.clone(),
                span: unit.span,
            });
        }
        let span = Span::new(unit.span.start.min(body_length), unit.span.end.min(body_length));
        if span.start < span.end {
            clamped.push((unit, span));
        }
    }

    let mut by_order = clamped.clone();
    by_order.sort_by_key(|(u, _)| u.order_index);
    let mut by_start = clamped;
    by_start.sort_by_key(|(u, s)| (s.start, s.end, u.order_index));
    for (a, b) in by_order.iter().zip(&by_start) {
        if a.0.unit_id != b.0.unit_id {
            report.push(Issue::OutOfOrder {
                unit_id: a.0.unit_id.0.clone(),
            });
            break;
        }
    }

    let mut cursor = 0;
    for (unit, span) in &by_start {
        if span.start > cursor {
            report.push(Issue::Gap {
                span: Span::new(cursor, span.start),
            });
        } else if span.start < cursor {
            report.push(Issue::Overlap {
                span: Span::new(span.start, cursor.min(span.end)),
                unit_id: unit.unit_id.0.clone(),
            });
        }
        cursor = cursor.max(span.end);
    }
    if cursor < body_length {
        report.push(Issue::Gap {
            span: Span::new(cursor, body_length),
        });
    }
    report
}

/// Report dangling link endpoints, unlinked units and unlinked intents.
pub fn validate_link_graph(
    units: &[CommunicativeUnit],
    intents: &[Intent],
    links: &[UnitIntentLink],
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let unit_ids: BTreeSet<&str> = units.iter().map(|u| u.unit_id.as_str()).collect();
    let intent_ids: BTreeSet<&str> = intents.iter().map(|i| i.intent_id.as_str()).collect();
    let mut per_unit: BTreeMap<&str, usize> = unit_ids.iter().map(|id| (*id, 0)).collect();
    let mut per_intent: BTreeMap<&str, usize> = intent_ids.iter().map(|id| (*id, 0)).collect();
    let mut seen = BTreeSet::new();

    for link in links {
        let (u, i) = (link.unit_id.as_str(), link.intent_id.as_str());
        if !seen.insert((u, i)) {
            report.push(Issue::DuplicateLink {
                unit_id: u.into(),
                intent_id: i.into(),
            });
        }
        let unit_ok = unit_ids.contains(u);
        let intent_ok = intent_ids.contains(i);
        if !unit_ok {
            report.push(Issue::DanglingUnit {
                unit_id: u.into(),
                intent_id: i.into(),
            });
        }
        if !intent_ok {
            report.push(Issue::DanglingIntent {
                unit_id: u.into(),
                intent_id: i.into(),
            });
        }
        if unit_ok && intent_ok {
            *per_unit.get_mut(u).unwrap() += 1;
            *per_intent.get_mut(i).unwrap() += 1;
        }
    }
    for unit in units {
        if per_unit[unit.unit_id.as_str()] == 0 {
            report.push(Issue::UnlinkedUnit {
                unit_id: unit.unit_id.0.clone(),
            });
        }
    }
    for intent in intents {
        if per_intent[intent.intent_id.as_str()] == 0 {
            report.push(Issue::UnlinkedIntent {
                intent_id: intent.intent_id.0.clone(),
            });
        }
    }
    report
}
