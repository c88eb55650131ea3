//! Normalizing linker output into a complete unit-intent graph.
//!
//! Every unit and every intent must end up with at least one link. After
//! sanitizing the agent's answer (and at most one repair round, driven by
//! the pipeline), remaining gaps are closed deterministically: an unlinked
//! intent goes to the unit whose text shares the most tokens with the
//! intent's type and value, an unlinked unit to the intent sharing the most
//! tokens with the unit. Ties go to the earliest unit or intent.

use std::collections::BTreeSet;

use crate::agents::RawLink;
use crate::domain::{slice, CommunicativeUnit, Intent, IntentId, UnitId, UnitIntentLink};
use crate::text::text_jaccard;

/// Keep links that reference known units and intents, once each.
pub fn sanitize(raw: &[RawLink], units: &[CommunicativeUnit], intents: &[Intent]) -> (Vec<UnitIntentLink>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    let mut links = Vec::new();
    for l in raw {
        let unit_id = l.unit_id.trim();
        let intent_id = l.intent_id.trim();
        if !units.iter().any(|u| u.unit_id.as_str() == unit_id) {
            warnings.push(format!("link to unknown unit `{unit_id}` dropped"));
            continue;
        }
        if !intents.iter().any(|i| i.intent_id.as_str() == intent_id) {
            warnings.push(format!("link to unknown intent `{intent_id}` dropped"));
            continue;
        }
        let link = UnitIntentLink::new(unit_id, intent_id);
        if seen.insert(link.clone()) {
            links.push(link);
        } else {
            warnings.push(format!("repeated link {unit_id}-{intent_id} dropped"));
        }
    }
    (links, warnings)
}

/// Units and intents that have no link yet.
pub fn unlinked<'a>(
    units: &'a [CommunicativeUnit],
    intents: &'a [Intent],
    links: &[UnitIntentLink],
) -> (Vec<&'a UnitId>, Vec<&'a IntentId>) {
    let lu: BTreeSet<&UnitId> = links.iter().map(|l| &l.unit_id).collect();
    let li: BTreeSet<&IntentId> = links.iter().map(|l| &l.intent_id).collect();
    (
        units.iter().map(|u| &u.unit_id).filter(|id| !lu.contains(id)).collect(),
        intents.iter().map(|i| &i.intent_id).filter(|id| !li.contains(id)).collect(),
    )
}

fn intent_text(intent: &Intent) -> String {
    format!("{} {}", intent.intent_type, intent.current_value)
}

/// Index of the highest score; the first wins ties.
fn argmax(scores: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Close remaining gaps with the lexical fallback. Returns the links added.
pub fn fallback_links(
    body: &str,
    units: &[CommunicativeUnit],
    intents: &[Intent],
    links: &mut Vec<UnitIntentLink>,
) -> Vec<UnitIntentLink> {
    let mut added = Vec::new();
    if units.is_empty() || intents.is_empty() {
        return added;
    }
    let mut ordered: Vec<&CommunicativeUnit> = units.iter().collect();
    ordered.sort_by_key(|u| u.order_index);
    let unit_texts: Vec<&str> = ordered.iter().map(|u| slice(body, u.span).unwrap_or("")).collect();

    let (_, lonely_intents) = unlinked(units, intents, links);
    let lonely_intents: Vec<IntentId> = lonely_intents.into_iter().cloned().collect();
    for intent_id in lonely_intents {
        let intent = intents.iter().find(|i| i.intent_id == intent_id).expect("listed intent");
        let target = intent_text(intent);
        let best = argmax(unit_texts.iter().map(|t| text_jaccard(t, &target))).expect("units not empty");
        let link = UnitIntentLink::new(ordered[best].unit_id.clone(), intent_id);
        links.push(link.clone());
        added.push(link);
    }
    let (lonely_units, _) = unlinked(units, intents, links);
    let lonely_units: Vec<UnitId> = lonely_units.into_iter().cloned().collect();
    for unit_id in lonely_units {
        let idx = ordered.iter().position(|u| u.unit_id == unit_id).expect("listed unit");
        let best = argmax(intents.iter().map(|i| text_jaccard(unit_texts[idx], &intent_text(i)))).expect("intents not empty");
        let link = UnitIntentLink::new(unit_id, intents[best].intent_id.clone());
        links.push(link.clone());
        added.push(link);
    }
    added
}

/// Canonical link order: by unit order, then intent order.
pub fn sort_links(units: &[CommunicativeUnit], intents: &[Intent], links: &mut [UnitIntentLink]) {
    let unit_pos = |id: &UnitId| units.iter().find(|u| &u.unit_id == id).map_or(usize::MAX, |u| u.order_index);
    let intent_pos = |id: &IntentId| intents.iter().position(|i| &i.intent_id == id).unwrap_or(usize::MAX);
    links.sort_by_key(|l| (unit_pos(&l.unit_id), intent_pos(&l.intent_id)));
}

/// Prompt lines describing units: `- u1 [Label]: text` with newlines shown
/// as `\n`.
pub fn describe_units(body: &str, units: &[CommunicativeUnit]) -> String {
    units
        .iter()
        .map(|u| {
            let text = slice(body, u.span).unwrap_or("").replace('\n', "\\n");
            format!("- {} [{}]: {}", u.unit_id, u.label, text)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Prompt lines describing intents: `- i1 [Type, Value]`.
pub fn describe_intents(intents: &[Intent]) -> String {
    intents
        .iter()
        .map(|i| format!("- {} {}", i.intent_id, i.fragment()))
        .collect::<Vec<_>>()
        .join("\n")
}
