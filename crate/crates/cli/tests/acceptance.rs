//! Acceptance suite. Each criterion prints one `PASS` or `FAIL` line; the
//! process exits non-zero when any criterion fails.
//!
//! Every check runs offline: agents are scripted, synthetic or replayed from
//! the committed transcript, and mock runs refuse network access.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use chrono::{DateTime, TimeZone, Utc};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use personamail_core::agents::segment::{repair_partition, segment};
use personamail_core::agents::{
    AdaptStatus, AgentName, ChatCall, CuratedFactors, GatewaySettings, GeneratedDraft, LlmClient, MockClient, MockTranscript, NetworkGuard, Pipeline, PipelineOptions, ProposedLinks, RawUnit, ScriptedClient, TemplateSet,
};
use personamail_core::agents::Gateway;
use personamail_core::catalog::Catalog;
use personamail_core::domain::{
    slice, Anchor, AnchorId, AnchorKind, CommunicativeUnit, FactorCategory, FactorSelection, Intent, IntentId,
    IntentOrigin, RationaleOrigin, RecordId, Span, StylebookRecord, TaskContext, UnitId, UnitIntentLink,
};
use personamail_core::service::{run_script, ComposeService, EventKind, Script, SessionState};
use personamail_core::store::{rank_records, RetrievalQuery, RetrievalSettings, ReuseStore, StoreFile};
use personamail_core::testkit::{service_with, SyntheticClient};
use personamail_core::text::text_jaccard;
use personamail_core::{Error, GatewayError};
use personamail_server::ApiError;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Shared helpers

/// A client answering from a function of the call.
struct FnClient<F>(F, AtomicUsize);

impl<F: Fn(&ChatCall<'_>, usize) -> String + Send + Sync> LlmClient for FnClient<F> {
    fn complete(&self, call: &ChatCall<'_>) -> Result<String, GatewayError> {
        let n = self.1.fetch_add(1, Ordering::SeqCst);
        Ok((self.0)(call, n))
    }
}

fn fn_client<F: Fn(&ChatCall<'_>, usize) -> String + Send + Sync + 'static>(f: F) -> Arc<FnClient<F>> {
    Arc::new(FnClient(f, AtomicUsize::new(0)))
}

/// A client replaying a fixed queue of raw answers.
struct Queue(Mutex<VecDeque<String>>, AtomicUsize);

impl Queue {
    fn new(items: Vec<String>) -> Arc<Self> {
        Arc::new(Queue(Mutex::new(items.into()), AtomicUsize::new(0)))
    }
}

impl LlmClient for Queue {
    fn complete(&self, _: &ChatCall<'_>) -> Result<String, GatewayError> {
        self.1.fetch_add(1, Ordering::SeqCst);
        Ok(self.0.lock().unwrap().pop_front().unwrap_or_else(|| "{}".into()))
    }
}

fn pipeline(client: Arc<dyn LlmClient>) -> Pipeline {
    Pipeline::new(
        Arc::new(Gateway::with_client(client)),
        Arc::new(Catalog::builtin()),
        PipelineOptions::default(),
    )
    .unwrap()
}

const WORDS: [&str; 24] = [
    "thanks", "meeting", "deadline", "sorry", "dinner", "report", "Friday", "professor", "schedule", "help", "review",
    "draft", "café", "naïve", "weekend", "budget", "team", "offer", "salary", "résumé", "update", "extension",
    "family", "travel",
];

fn sentence(rng: &mut StdRng) -> String {
    let n = rng.random_range(2..9);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect();
    let mut s = words.join(" ");
    s.push(if rng.random_bool(0.8) { '.' } else { '?' });
    s
}

fn random_body(rng: &mut StdRng, paragraphs: usize) -> String {
    (0..paragraphs)
        .map(|_| {
            let k = rng.random_range(1..4);
            (0..k).map(|_| sentence(rng)).collect::<Vec<_>>().join(" ")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn clen(s: &str) -> usize {
    s.chars().count()
}

/// Split a body into units at paragraph breaks (separators stay with the
/// preceding unit).
fn paragraph_units(body: &str) -> Vec<CommunicativeUnit> {
    let chars: Vec<char> = body.chars().collect();
    let mut cuts = vec![0];
    let mut i = 0;
    while i + 1 < chars.len() {
        if chars[i] == '\n' && chars[i + 1] == '\n' {
            cuts.push(i + 2);
            i += 2;
        } else {
            i += 1;
        }
    }
    cuts.push(chars.len());
    cuts.dedup();
    cuts.windows(2)
        .enumerate()
        .map(|(k, w)| CommunicativeUnit {
            unit_id: UnitId::new(format!("u{}", k + 1)),
            label: "Body".into(),
            span: Span::new(w[0], w[1]),
            order_index: k,
        })
        .collect()
}

fn intents(n: usize) -> Vec<Intent> {
    const TYPES: [&str; 5] = ["Opening Strategy", "Excuse Strategy", "Relationship Preservation", "Request Framing", "Closing Tone"];
    (0..n)
        .map(|k| Intent {
            intent_id: IntentId::new(format!("i{}", k + 1)),
            intent_type: TYPES[k % TYPES.len()].into(),
            current_value: format!("value {k}"),
            alternative_values: vec![format!("other {k}")],
            origin: IntentOrigin::Derived,
        })
        .collect()
}

fn dinner(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/dinner").join(file)
}

fn dinner_transcript() -> MockTranscript {
    MockTranscript::load(&dinner("transcript.json")).unwrap()
}

fn mock_service(transcript: &MockTranscript, store: Arc<ReuseStore>) -> (ComposeService, Arc<NetworkGuard>) {
    let guard = Arc::new(NetworkGuard::default());
    let client = MockClient::new(transcript).with_fallback(guard.clone());
    (service_with(Arc::new(client), store), guard)
}

fn ts(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_735_689_600 + secs, 0).unwrap()
}

// Independent token-set similarity, written without the library helpers.
fn oracle_tokens(text: &str) -> HashSet<String> {
    let mut out = HashSet::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.extend(c.to_lowercase());
        } else if !cur.is_empty() {
            out.insert(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.insert(cur);
    }
    out
}

/// Exact Jaccard as a reduced-free pair (intersection, union).
fn oracle_jaccard_parts(a: &str, b: &str) -> (usize, usize) {
    let (ta, tb) = (oracle_tokens(a), oracle_tokens(b));
    let inter = ta.iter().filter(|t| tb.contains(*t)).count();
    (inter, ta.len() + tb.len() - inter)
}

fn oracle_jaccard(a: &str, b: &str) -> f64 {
    match oracle_jaccard_parts(a, b) {
        (_, 0) => 1.0,
        (i, u) => i as f64 / u as f64,
    }
}

/// Score every record and sort: score desc, newer first, smaller id first.
fn oracle_rank(settings: &RetrievalSettings, query: &RetrievalQuery, records: &[StylebookRecord]) -> Vec<(String, f64)> {
    let ctx = format!("{} {}", query.receiver, query.occasion);
    let num = |id: &str| id.trim_start_matches("rec-").parse::<u64>().unwrap_or(u64::MAX);
    let mut all: Vec<(&StylebookRecord, f64)> = records
        .iter()
        .map(|r| {
            let t = oracle_jaccard(&query.selected_text, &r.original_text);
            let c = oracle_jaccard(&ctx, &format!("{} {}", r.receiver_description, r.occasion_description));
            (r, (settings.w_text * t + settings.w_ctx * c) / (settings.w_text + settings.w_ctx))
        })
        .filter(|(_, s)| *s >= settings.threshold)
        .collect();
    all.sort_by(|(a, sa), (b, sb)| {
        sb.partial_cmp(sa)
            .unwrap()
            .then(b.created_at.cmp(&a.created_at))
            .then(num(a.record_id.as_str()).cmp(&num(b.record_id.as_str())))
    });
    all.truncate(settings.top_k);
    all.into_iter().map(|(r, s)| (r.record_id.to_string(), s)).collect()
}

fn random_record(rng: &mut StdRng, id: usize) -> StylebookRecord {
    let original = sentence(rng);
    let mut revised = sentence(rng);
    if revised == original {
        revised.push_str(" indeed");
    }
    let usage = rng.random_range(0..5);
    StylebookRecord {
        record_id: RecordId::new(format!("rec-{id}")),
        modification_name: format!("rule {id}"),
        original_text: original,
        revised_text: revised,
        rationale: sentence(rng),
        rationale_origin: if rng.random_bool(0.5) { RationaleOrigin::UserProvided } else { RationaleOrigin::AgentInferred },
        receiver_description: sentence(rng),
        occasion_description: sentence(rng),
        created_at: ts(rng.random_range(0..20)),
        usage_count: usage,
        acceptance_count: rng.random_range(0..=usage),
    }
}

// ---------------------------------------------------------------------------
// 1. Partition invariant

/// Closed-form repair: after clamping and dropping empties, sort stably by
/// (start, end). Candidate k survives iff its end exceeds the largest end
/// before it; a survivor's left boundary is max(start, that largest end),
/// the first starts at 0 and the last ends at the body length.
fn oracle_partition(n: usize, cands: &[(String, Span)]) -> Vec<(String, Span)> {
    let mut c: Vec<(String, Span)> = cands
        .iter()
        .map(|(l, s)| (l.clone(), Span::new(s.start.min(n), s.end.min(n))))
        .filter(|(_, s)| s.start < s.end)
        .collect();
    c.sort_by_key(|(_, s)| (s.start, s.end));
    let mut prefix_max = 0;
    let mut lefts = Vec::new();
    for (l, s) in &c {
        if s.end > prefix_max {
            lefts.push((l.clone(), s.start.max(prefix_max)));
        }
        prefix_max = prefix_max.max(s.end);
    }
    let m = lefts.len();
    (0..m)
        .map(|i| {
            let start = if i == 0 { 0 } else { lefts[i].1 };
            let end = if i + 1 == m { n } else { lefts[i + 1].1 };
            (lefts[i].0.clone(), Span::new(start, end))
        })
        .collect()
}

fn is_exact_partition(units: &[CommunicativeUnit], n: usize) -> bool {
    let mut cursor = 0;
    for (k, u) in units.iter().enumerate() {
        if u.span.start != cursor || u.span.end <= u.span.start || u.order_index != k {
            return false;
        }
        cursor = u.span.end;
    }
    cursor == n
}

fn partition_invariant() -> Outcome {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);
    let mut adversarial = 0;
    for case in 0..200 {
        let body = { let k = rng.random_range(1..6); random_body(&mut rng, k) };
        let n = clen(&body);
        if case % 2 == 0 {
            // Offset candidates with gaps, overlaps, containment, empties and
            // out-of-range ends, in shuffled order.
            let k = rng.random_range(1..9);
            let mut cands: Vec<(String, Span)> = (0..k)
                .map(|j| {
                    let a = rng.random_range(0..=n + 5);
                    let b = rng.random_range(0..=n + 5);
                    (format!("L{j}"), Span::new(a.min(b), a.max(b)))
                })
                .collect();
            if rng.random_bool(0.5) {
                cands.push(("whole".into(), Span::new(0, n)));
            }
            cands.shuffle(&mut rng);
            let expected = oracle_partition(n, &cands);
            match repair_partition(n, cands.clone()) {
                Ok(seg) => {
                    adversarial += usize::from(!seg.warnings.is_empty());
                    ensure!(is_exact_partition(&seg.units, n), "case {case}: not a partition: {:?}", seg.units);
                    let got: Vec<Span> = seg.units.iter().map(|u| u.span).collect();
                    let want: Vec<Span> = expected.iter().map(|(_, s)| *s).collect();
                    ensure!(got == want, "case {case}: repair {got:?} differs from oracle {want:?} for {cands:?}");
                }
                Err(Error::Segmentation(_)) => ensure!(expected.is_empty(), "case {case}: rejected a repairable input"),
                Err(e) => return Err(format!("case {case}: unexpected {e}")),
            }
        } else {
            // Verbatim-text candidates, some trimmed, some invented.
            let units = paragraph_units(&body);
            let mut raw: Vec<RawUnit> = units
                .iter()
                .map(|u| {
                    let text = slice(&body, u.span).unwrap().to_owned();
                    let text = if rng.random_bool(0.3) { text.trim().to_owned() } else { text };
                    RawUnit { label: "Body".into(), start: None, end: None, text: Some(text) }
                })
                .collect();
            if raw.len() > 1 && rng.random_bool(0.3) {
                raw.remove(rng.random_range(0..raw.len()));
            }
            if rng.random_bool(0.3) {
                raw.push(RawUnit { label: "Invented".into(), start: None, end: None, text: Some("not in the email".into()) });
            }
            let seg = segment(&body, &raw).map_err(|e| format!("case {case}: {e}"))?;
            adversarial += usize::from(!seg.warnings.is_empty());
            ensure!(is_exact_partition(&seg.units, n), "case {case}: not a partition");
            let rebuilt: String = seg.units.iter().map(|u| slice(&body, u.span).unwrap()).collect();
            ensure!(rebuilt == body, "case {case}: units do not reassemble the body");
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    Ok(format!("200 cases ({adversarial} needing repair), oracle agreement 100%"))
}

// ---------------------------------------------------------------------------
// 2. Link-graph invariant

fn check_graph(units: &[CommunicativeUnit], intents: &[Intent], links: &[UnitIntentLink]) -> Result<(), String> {
    let uids: BTreeSet<&str> = units.iter().map(|u| u.unit_id.as_str()).collect();
    let iids: BTreeSet<&str> = intents.iter().map(|i| i.intent_id.as_str()).collect();
    for l in links {
        if !uids.contains(l.unit_id.as_str()) || !iids.contains(l.intent_id.as_str()) {
            return Err(format!("dangling link {l:?}"));
        }
    }
    let lu: BTreeSet<&str> = links.iter().map(|l| l.unit_id.as_str()).collect();
    let li: BTreeSet<&str> = links.iter().map(|l| l.intent_id.as_str()).collect();
    if lu != uids || li != iids {
        return Err("unlinked unit or intent".into());
    }
    let unique: BTreeSet<&UnitIntentLink> = links.iter().collect();
    if unique.len() != links.len() {
        return Err("duplicate links".into());
    }
    Ok(())
}

fn fuzz_links(rng: &mut StdRng, nu: usize, ni: usize) -> String {
    match rng.random_range(0..6) {
        0 => "this is not json".into(),
        1 => json!({"links": []}).to_string(),
        _ => {
            let k = rng.random_range(0..(nu + ni + 3));
            let links: Vec<Value> = (0..k)
                .map(|_| {
                    let u = rng.random_range(1..=nu + 2);
                    let i = rng.random_range(1..=ni + 2);
                    let unit = if rng.random_bool(0.1) { " u1 ".to_owned() } else { format!("u{u}") };
                    json!({"unit_id": unit, "intent_id": format!("i{i}")})
                })
                .collect();
            json!({"links": links}).to_string()
        }
    }
}

fn link_graph_invariant() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed_0002);
    let mut fallbacks = 0;
    for case in 0..200 {
        let body = { let k = rng.random_range(1..7); random_body(&mut rng, k) };
        let units = paragraph_units(&body);
        let ints = intents(rng.random_range(1..6));
        let answers: Vec<String> = (0..6).map(|_| fuzz_links(&mut rng, units.len(), ints.len())).collect();
        let valid_first: Option<Vec<(String, String)>> = serde_json::from_str::<Value>(&answers[0]).ok().map(|v| {
            v["links"]
                .as_array()
                .unwrap()
                .iter()
                .map(|l| (l["unit_id"].as_str().unwrap().trim().to_owned(), l["intent_id"].as_str().unwrap().to_owned()))
                .collect()
        });
        let p = pipeline(Queue::new(answers));
        let linking = p
            .link_units_intents(&body, &units, &ints)
            .map_err(|e| format!("case {case}: {e}"))?;
        fallbacks += usize::from(!linking.fallback.is_empty());
        check_graph(&units, &ints, &linking.links).map_err(|e| format!("case {case}: {e}"))?;
        // Every valid link the agent proposed first is kept.
        if let Some(first) = valid_first {
            for (u, i) in first {
                let known = units.iter().any(|x| x.unit_id.as_str() == u) && ints.iter().any(|x| x.intent_id.as_str() == i);
                if known {
                    ensure!(
                        linking.links.contains(&UnitIntentLink::new(u.as_str(), i.as_str())),
                        "case {case}: valid link {u}-{i} lost"
                    );
                }
            }
        }
    }

    // Many-to-many shapes: one intent shaping three units, one unit shaped by two intents.
    let body = "Dear Sam,\n\nI am sorry.\n\nA family matter came up.\n\nLet us meet next week.\n\nBest,\nAlex";
    let units = paragraph_units(body);
    let ints = intents(3);
    let shape = json!({"links": [
        {"unit_id": "u1", "intent_id": "i1"}, {"unit_id": "u2", "intent_id": "i1"}, {"unit_id": "u3", "intent_id": "i1"},
        {"unit_id": "u3", "intent_id": "i2"}, {"unit_id": "u4", "intent_id": "i3"}, {"unit_id": "u5", "intent_id": "i3"}
    ]});
    let linking = pipeline(Queue::new(vec![shape.to_string()]))
        .link_units_intents(body, &units, &ints)
        .map_err(|e| e.to_string())?;
    check_graph(&units, &ints, &linking.links)?;
    let of_i1 = linking.links.iter().filter(|l| l.intent_id.as_str() == "i1").count();
    let of_u3 = linking.links.iter().filter(|l| l.unit_id.as_str() == "u3").count();
    ensure!(of_i1 == 3 && of_u3 == 2, "many-to-many shape not preserved: {:?}", linking.links);
    ensure!(linking.fallback.is_empty() && !linking.repair_round, "complete answer should need no repair");
    Ok(format!("200 fuzzed cases valid ({fallbacks} closed by fallback); 1 intent-3 units and 1 unit-2 intents preserved"))
}

// ---------------------------------------------------------------------------
// 3. Rewrite locality

/// Rebuild the new body from the old one and the replacements, checking that
/// each replacement lies inside a unit linked to the intent.
fn check_locality(
    old: &str,
    new: &str,
    units: &[CommunicativeUnit],
    links: &[UnitIntentLink],
    intent: &str,
    replacements: &[personamail_core::agents::Replacement],
) -> Result<(), String> {
    let linked: BTreeSet<&str> = links
        .iter()
        .filter(|l| l.intent_id.as_str() == intent)
        .map(|l| l.unit_id.as_str())
        .collect();
    let chars: Vec<char> = old.chars().collect();
    let mut rebuilt = String::new();
    let mut cursor = 0;
    let mut reps: Vec<_> = replacements.iter().collect();
    reps.sort_by_key(|r| r.span.start);
    for r in reps {
        let inside = units
            .iter()
            .any(|u| linked.contains(u.unit_id.as_str()) && u.span.start <= r.span.start && r.span.end <= u.span.end);
        if !inside {
            return Err(format!("replacement {:?} outside linked units {linked:?}", r.span));
        }
        if r.span.start < cursor {
            return Err("overlapping replacements".into());
        }
        rebuilt.extend(&chars[cursor..r.span.start]);
        rebuilt.push_str(&r.new_text);
        cursor = r.span.end;
    }
    rebuilt.extend(&chars[cursor..]);
    if rebuilt != new {
        return Err("bytes changed outside the replacement spans".into());
    }
    Ok(())
}

fn linked_ids(prompt: &str) -> Vec<String> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("Linked units: "))
        .map(|s| s.split(", ").map(str::to_owned).collect())
        .unwrap_or_default()
}

fn rewrite_locality() -> Outcome {
    // The dinner fixture, replayed through to analysis.
    let script = Script::load(&dinner("script.json")).map_err(|e| e.to_string())?;
    let transcript = dinner_transcript();
    let (service, guard) = mock_service(&transcript, Arc::new(ReuseStore::in_memory()));
    run_script(&service, &Script { steps: script.steps[..3].to_vec() }).map_err(|e| e.to_string())?;
    let id = service.session_ids()[0].clone();
    let view = service.get_session(&id).map_err(|e| e.to_string())?;
    let old = view.draft.unwrap().body;
    let units: Vec<CommunicativeUnit> = view.units.iter().map(|u| u.unit.clone()).collect();
    let preview = service
        .preview_intent(&id, &IntentId::new("i1"), "Direct cancellation notice")
        .map_err(|e| e.to_string())?;
    check_locality(&old, &preview.body, &units, &view.links, "i1", &preview.replacements)?;
    ensure!(guard.attempts() == 0, "mock run tried the network");
    let changed: Vec<&str> = preview.replacements.iter().map(|r| r.unit_id.as_str()).collect();
    ensure!(changed == ["u1"], "dinner rewrite changed {changed:?}");

    // Randomized fixtures with a rewriter that touches a random subset of
    // the linked units.
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    for case in 0..50 {
        let body = { let k = rng.random_range(2..7); random_body(&mut rng, k) };
        let units = paragraph_units(&body);
        let ints = intents(rng.random_range(1..4));
        let mut links: Vec<UnitIntentLink> = units
            .iter()
            .enumerate()
            .map(|(k, u)| UnitIntentLink::new(u.unit_id.clone(), ints[k % ints.len()].intent_id.clone()))
            .collect();
        for i in &ints {
            if !links.iter().any(|l| l.intent_id == i.intent_id) {
                links.push(UnitIntentLink::new(units[0].unit_id.clone(), i.intent_id.clone()));
            }
        }
        let seed: u64 = rng.random();
        let client = fn_client(move |call, _| {
            let mut r = StdRng::seed_from_u64(seed);
            let ids = linked_ids(call.prompt);
            let mut picked = Vec::new();
            for u in &ids {
                if r.random_bool(0.7) {
                    let tag = r.random_range(0..1000);
                    picked.push(json!({"unit_id": u, "new_text": format!("Rewritten {u} {tag}")}));
                }
            }
            if picked.is_empty() {
                picked.push(json!({"unit_id": ids[0], "new_text": "Rewritten in full"}));
            }
            json!({"replacements": picked, "rationale_summary": "adjusted"}).to_string()
        });
        let intent = &ints[rng.random_range(0..ints.len())];
        let result = pipeline(client)
            .rewrite_for_intent(&body, &units, &ints, &links, &intent.intent_id, "a new value")
            .map_err(|e| format!("case {case}: {e}"))?;
        check_locality(&body, &result.body, &units, &links, intent.intent_id.as_str(), &result.replacements)
            .map_err(|e| format!("case {case}: {e}"))?;
    }

    // Out-of-scope proposals: rejected after one re-prompt.
    let body = "Dear Sam,\n\nI am sorry.\n\nBest,\nAlex";
    let units = paragraph_units(body);
    let ints = intents(2);
    let links = vec![
        UnitIntentLink::new("u1", "i1"),
        UnitIntentLink::new("u2", "i2"),
        UnitIntentLink::new("u3", "i2"),
    ];
    let rogue = json!({"replacements": [{"unit_id": "u2", "new_text": "Sorry!"}], "rationale_summary": "x"}).to_string();
    let queue = Queue::new(vec![rogue.clone(), rogue]);
    let err = pipeline(queue.clone())
        .rewrite_for_intent(body, &units, &ints, &links, &IntentId::new("i1"), "Warm")
        .unwrap_err();
    ensure!(matches!(&err, Error::Scope { unit_ids } if unit_ids == &["u2"]), "expected ScopeError, got {err}");
    ensure!(queue.1.load(Ordering::SeqCst) == 2, "scope violation should be re-prompted once");
    Ok("dinner fixture (only u1 changed) and 50 randomized fixtures local; out-of-scope proposal rejected with ScopeError".into())
}

// ---------------------------------------------------------------------------
// 4. Anchor identity

fn anchor_identity() -> Outcome {
    let catalog = Catalog::builtin();
    let mut rng = StdRng::seed_from_u64(0x5eed_0004);
    let guard = Arc::new(NetworkGuard::default());
    let p = pipeline(guard.clone());
    for case in 0..120 {
        let kind = if rng.random_bool(0.5) { AnchorKind::Persona } else { AnchorKind::Situation };
        let category = if kind == AnchorKind::Persona { FactorCategory::Persona } else { FactorCategory::Situation };
        let mut factors = catalog.list_factors(Some(category));
        factors.shuffle(&mut rng);
        let k = rng.random_range(1..=factors.len());
        let config: Vec<FactorSelection> = factors[..k]
            .iter()
            .map(|f| {
                let opt = f.source_options.choose(&mut rng).unwrap().clone();
                match rng.random_range(0..3) {
                    0 => FactorSelection::option(f.factor_id.clone(), opt),
                    1 => FactorSelection::option(f.factor_id.clone(), opt).with_elaboration(sentence(&mut rng)),
                    _ => FactorSelection {
                        factor_id: f.factor_id.clone(),
                        selected_option: None,
                        elaboration: Some(sentence(&mut rng)),
                        skipped: false,
                    },
                }
            })
            .collect();
        let task = TaskContext::new(sentence(&mut rng)).with_recipient(sentence(&mut rng));
        let anchor = Anchor {
            anchor_id: AnchorId::new(format!("anc-{case}")),
            kind,
            name: "Random anchor".into(),
            factor_configuration: config.clone(),
            source_task: task.clone(),
            created_at: ts(case),
        };
        let out = p.adapt_anchor(&anchor, &task).map_err(|e| format!("case {case}: {e}"))?;
        ensure!(out.identity, "case {case}: not flagged as identity");
        ensure!(out.entries.len() == config.len(), "case {case}: entry count changed");
        for (e, c) in out.entries.iter().zip(&config) {
            ensure!(e.status == AdaptStatus::Kept, "case {case}: {} not kept", e.factor_id);
            ensure!(&e.selection == c && &e.original == c, "case {case}: {} value changed", e.factor_id);
        }
    }
    ensure!(guard.attempts() == 0, "{} gateway calls made", guard.attempts());
    Ok("120 randomized anchors adapted to their own task: all kept, values identical, 0 gateway calls".into())
}

// ---------------------------------------------------------------------------
// 5. Stylebook learning loop

fn stylebook_loop() -> Outcome {
    let script = Script::load(&dinner("script.json")).map_err(|e| e.to_string())?;
    let split = script.steps[1..]
        .iter()
        .position(|s| matches!(s, EventKind::SessionCreated { .. }))
        .unwrap()
        + 1;
    let responses = std::fs::read_to_string(dinner("responses.json")).unwrap();
    let store = Arc::new(ReuseStore::in_memory());
    let service = service_with(Arc::new(ScriptedClient::from_json(&responses).map_err(|e| e.to_string())?), store.clone());

    run_script(&service, &Script { steps: script.steps[..split].to_vec() }).map_err(|e| e.to_string())?;
    let records = store.list_records();
    ensure!(records.len() == 1, "expected one record, found {}", records.len());
    let rec = &records[0];
    for (name, v) in [
        ("modification_name", &rec.modification_name),
        ("original_text", &rec.original_text),
        ("revised_text", &rec.revised_text),
        ("rationale", &rec.rationale),
        ("receiver_description", &rec.receiver_description),
        ("occasion_description", &rec.occasion_description),
    ] {
        ensure!(!v.trim().is_empty(), "{name} is empty");
    }
    ensure!(rec.original_text == "I hope this email finds you well.", "unexpected original {:?}", rec.original_text);
    ensure!(rec.rationale_origin == RationaleOrigin::UserProvided, "rationale should be the writer's");

    // Distractors, some sharing the greeting's words.
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    for k in 0..30 {
        let mut r = random_record(&mut rng, 0);
        if k % 3 == 0 {
            r.original_text = format!("I hope {} finds you well.", WORDS.choose(&mut rng).unwrap());
        }
        store.insert_record(r).map_err(|e| e.to_string())?;
    }

    let report = run_script(&service, &Script { steps: script.steps[split..].to_vec() }).map_err(|e| e.to_string())?;
    let events = &report.sessions[0].events;
    let (span, surfaced) = events
        .iter()
        .find_map(|e| match &e.kind {
            EventKind::QuickfixSurfaced { span, record_ids } => Some((*span, record_ids.clone())),
            _ => None,
        })
        .ok_or("no quick fix surfaced")?;

    // Brute-force oracle over the whole store. The query context holds the
    // same tokens as the session's recipient, task and factor answers.
    let sid = &report.sessions[0].session_id;
    let view = service.get_session(sid).map_err(|e| e.to_string())?;
    let catalog = Catalog::builtin();
    let mut receiver = view.task.recipient_hint.clone().unwrap_or_default();
    let mut occasion = view.task.task_description.clone();
    for s in &view.selections {
        let f = catalog.get(&s.factor_id).unwrap();
        let line = format!(" {} {} {}", f.name, s.selected_option.as_deref().unwrap_or(""), s.elaboration.as_deref().map_or(String::new(), |e| format!("note {e}")));
        match f.category {
            FactorCategory::Persona => receiver.push_str(&line),
            FactorCategory::Situation => occasion.push_str(&line),
        }
    }
    ensure!(
        events.iter().any(|e| matches!(e.kind, EventKind::QuickfixApplied { .. })),
        "quick fix was not applied"
    );
    let query = RetrievalQuery {
        selected_text: "I hope this email finds you well.".into(),
        receiver,
        occasion,
    };
    ensure!(span.len() == clen(&query.selected_text), "surfaced span does not cover the greeting");
    let expected: Vec<String> = oracle_rank(service.retrieval(), &query, &store.list_records())
        .into_iter()
        .map(|(id, _)| id)
        .collect();
    ensure!(surfaced == expected, "surfaced {surfaced:?}, oracle {expected:?}");
    ensure!(surfaced.first().map(String::as_str) == Some(rec.record_id.as_str()), "learned record not first: {surfaced:?}");
    Ok(format!("one record with six fields; follow-up surfaced {surfaced:?} (matches brute-force oracle over 31 records)"))
}

// ---------------------------------------------------------------------------
// 6. Retrieval oracle equivalence

fn retrieval_oracle() -> Outcome {
    // Hand-computed pair: 6 shared tokens out of 7.
    let (a, b) = ("I hope this email finds you well", "i hope THIS email finds you");
    ensure!(oracle_jaccard_parts(a, b) == (6, 7), "token counts {:?}", oracle_jaccard_parts(a, b));
    let j = text_jaccard(a, b);
    ensure!((j - 6.0 / 7.0).abs() <= 1e-12, "jaccard {j}");

    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let mut compared = 0;
    for case in 0..100 {
        let n = rng.random_range(0..=100);
        let mut records: Vec<StylebookRecord> = (0..n).map(|k| random_record(&mut rng, k + 1)).collect();
        // Duplicates force score ties.
        for _ in 0..n / 10 {
            let src = records[rng.random_range(0..n)].clone();
            let dst = rng.random_range(0..n);
            let id = records[dst].record_id.clone();
            records[dst] = StylebookRecord { record_id: id, ..src };
        }
        let settings = RetrievalSettings {
            w_text: rng.random_range(0.1..1.0),
            w_ctx: rng.random_range(0.1..1.0),
            threshold: rng.random_range(0.0..0.4),
            top_k: rng.random_range(1..8),
            rerank: false,
        };
        let query = RetrievalQuery {
            selected_text: sentence(&mut rng),
            receiver: sentence(&mut rng),
            occasion: sentence(&mut rng),
        };
        let (ranked, _) = rank_records(&settings, &query, &records, None);
        let expected = oracle_rank(&settings, &query, &records);
        ensure!(ranked.len() == expected.len(), "case {case}: {} results, oracle {}", ranked.len(), expected.len());
        for (got, (id, score)) in ranked.iter().zip(&expected) {
            ensure!(got.record.record_id.as_str() == id, "case {case}: order differs");
            ensure!((got.score - score).abs() <= 1e-12, "case {case}: score {} vs {score}", got.score);
        }
        compared += expected.len();
    }
    Ok(format!("100 stores: ordering identical to brute force ({compared} ranked results); 6/7 pinned within 1e-12"))
}

// ---------------------------------------------------------------------------
// 7. Determinism & replay

fn run_bin(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_personamail"))
        .args(args)
        .env_remove("PERSONAMAIL_API_KEY")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    Ok(out.stdout)
}

fn determinism_and_replay() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let script = dinner("script.json");
    let transcript = dinner("transcript.json");
    // CRLF copies stand in for a checkout with Windows line endings.
    let crlf = |p: &Path, name: &str| {
        let text = std::fs::read_to_string(p).unwrap().replace('\n', "\r\n");
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    };
    let script_crlf = crlf(&script, "script-crlf.json");
    let transcript_crlf = crlf(&transcript, "transcript-crlf.json");

    let mut outputs = Vec::new();
    for (k, (s, t)) in [(&script, &transcript), (&script, &transcript), (&script, &transcript), (&script_crlf, &transcript_crlf)]
        .into_iter()
        .enumerate()
    {
        let store = dir.path().join(format!("store-{k}.json"));
        let report = dir.path().join(format!("report-{k}.json"));
        let stdout = run_bin(&[
            "run",
            s.to_str().unwrap(),
            "--mock",
            t.to_str().unwrap(),
            "--store",
            store.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ])?;
        outputs.push((stdout, std::fs::read(&store).map_err(|e| e.to_string())?, report));
    }
    for (k, o) in outputs.iter().enumerate().skip(1) {
        ensure!(o.0 == outputs[0].0, "run {k}: email output differs");
        ensure!(o.1 == outputs[0].1, "run {k}: store bytes differ");
    }

    // Replaying the event logs as a script reconstructs the same bodies.
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&outputs[0].2).unwrap()).unwrap();
    let logs: Vec<Vec<personamail_core::service::SessionEvent>> = report["sessions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| serde_json::from_value(s["events"].clone()).unwrap())
        .collect();
    let replay = Script::from_events(logs.iter().map(Vec::as_slice));
    let (service, guard) = mock_service(&dinner_transcript(), Arc::new(ReuseStore::in_memory()));
    let rerun = run_script(&service, &replay).map_err(|e| e.to_string())?;
    ensure!(guard.attempts() == 0, "replay tried the network");
    for (k, s) in rerun.sessions.iter().enumerate() {
        ensure!(
            s.body.as_deref() == report["sessions"][k]["body"].as_str(),
            "session {k}: replayed body differs"
        );
    }
    Ok("3 runs plus a CRLF checkout byte-identical (email and store); event-log replay reproduces both bodies".into())
}

// ---------------------------------------------------------------------------
// 8. Gateway robustness

fn gateway_robustness() -> Outcome {
    let invalid = [
        "not json at all".to_owned(),
        json!({"body": "   "}).to_string(),
        json!({"wrong": true}).to_string(),
    ];
    for max_retries in 0..=4u32 {
        let settings = GatewaySettings { max_retries, ..GatewaySettings::default() };
        // Always invalid: exactly max_retries + 1 attempts, then SchemaError.
        let queue = Queue::new((0..10).map(|k| invalid[k % 3].clone()).collect());
        let gw = Gateway::new(queue.clone(), TemplateSet::builtin(), settings.clone());
        let err = gw
            .complete_structured::<GeneratedDraft>(&gw.request(AgentName::DraftGenerator, "write".into()))
            .unwrap_err();
        ensure!(matches!(err, Error::Schema { attempts, .. } if attempts == max_retries + 1), "retries {max_retries}: {err}");
        ensure!(queue.1.load(Ordering::SeqCst) == max_retries as usize + 1, "retries {max_retries}: wrong attempt count");

        // Valid on attempt k succeeds with retry_count = k.
        for k in 0..=max_retries {
            let mut answers: Vec<String> = (0..k as usize).map(|j| invalid[j % 3].clone()).collect();
            answers.push(json!({"links": [{"unit_id": "u1", "intent_id": "i1"}]}).to_string());
            let queue = Queue::new(answers);
            let gw = Gateway::new(queue.clone(), TemplateSet::builtin(), settings.clone());
            let done = gw
                .complete_structured::<ProposedLinks>(&gw.request(AgentName::UnitIntentLinker, "link".into()))
                .map_err(|e| format!("retries {max_retries}, valid at {k}: {e}"))?;
            ensure!(done.retry_count == k, "retry_count {} != {k}", done.retry_count);
            ensure!(queue.1.load(Ordering::SeqCst) == k as usize + 1, "extra attempts after success");
        }
    }
    // Transport failures are returned at once, never retried.
    let guard = Arc::new(NetworkGuard::default());
    let gw = Gateway::new(guard.clone(), TemplateSet::builtin(), GatewaySettings { max_retries: 4, ..GatewaySettings::default() });
    let err = gw
        .complete_structured::<CuratedFactors>(&gw.request(AgentName::FactorCurator, "pick".into()))
        .unwrap_err();
    ensure!(matches!(err, Error::Gateway(_)) && guard.attempts() == 1, "transport failure: {err}, {} attempts", guard.attempts());
    Ok("max_retries 0..=4: invalid answers give SchemaError after max_retries+1 attempts; valid-on-retry records retry_count".into())
}

// ---------------------------------------------------------------------------
// 9. Store durability

fn random_store(rng: &mut StdRng, catalog: &Catalog) -> StoreFile {
    let mut file = StoreFile::empty();
    for k in 0..rng.random_range(0..4) {
        let kind = if rng.random_bool(0.5) { AnchorKind::Persona } else { AnchorKind::Situation };
        let cat = if kind == AnchorKind::Persona { FactorCategory::Persona } else { FactorCategory::Situation };
        let f = catalog.list_factors(Some(cat))[rng.random_range(0..6)];
        file.anchors.push(Anchor {
            anchor_id: AnchorId::new(format!("anc-{}", k + 1)),
            kind,
            name: format!("Anchor «{}»", sentence(rng)),
            factor_configuration: vec![FactorSelection::option(f.factor_id.clone(), f.source_options[0].clone())],
            source_task: TaskContext::new(sentence(rng)),
            created_at: ts(k as i64),
        });
    }
    for k in 0..rng.random_range(0..6) {
        file.records.push(random_record(rng, k + 1));
    }
    file
}

fn store_durability() -> Outcome {
    let catalog = Catalog::builtin();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("store.json");
    let store = ReuseStore::open(&path).map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(0x5eed_0009);
    for trial in 0..1000 {
        let wanted = random_store(&mut rng, &catalog);
        let w = wanted.clone();
        store
            .mutate(move |f| {
                f.anchors = w.anchors;
                f.records = w.records;
                Ok(())
            })
            .map_err(|e| format!("trial {trial}: {e}"))?;
        let loaded = ReuseStore::open(&path).map_err(|e| format!("trial {trial}: {e}"))?.snapshot();
        ensure!(
            loaded.anchors == wanted.anchors && loaded.records == wanted.records,
            "trial {trial}: reloaded store differs"
        );
        ensure!(loaded.verify(Some(&catalog)).is_empty(), "trial {trial}: reloaded store invalid");
    }

    // Crash between the temp write and the rename: the hook copies the temp
    // file aside (as a crash would leave it) and aborts.
    for trial in 0..100 {
        let before = std::fs::read(&path).map_err(|e| e.to_string())?;
        let snapshot = store.snapshot();
        let aside = dir.path().join(format!("orphan-{trial}.tmp"));
        let copy_to = aside.clone();
        store.set_write_hook(Some(Box::new(move |tmp| {
            std::fs::copy(tmp, &copy_to)?;
            Err(std::io::Error::other("simulated crash"))
        })));
        let next = random_store(&mut rng, &catalog);
        let err = store
            .mutate(move |f| {
                f.records = next.records;
                Ok(())
            })
            .unwrap_err();
        store.set_write_hook(None);
        ensure!(matches!(err, Error::Storage(_)), "trial {trial}: {err}");
        ensure!(std::fs::read(&path).unwrap() == before, "trial {trial}: store file changed");
        ensure!(aside.exists(), "trial {trial}: temp file was never written");
        let reopened = ReuseStore::open(&path).map_err(|e| e.to_string())?;
        ensure!(*reopened.snapshot() == *snapshot, "trial {trial}: prior store not preserved");
    }
    Ok("1000 save/load round-trips value-equal; 100/100 injected crashes before rename preserved the prior store".into())
}

// ---------------------------------------------------------------------------
// 10. State machine soundness

#[derive(Debug, Clone, Copy)]
enum Op {
    ApplyAnchor,
    Submit,
    SubmitBad,
    Generate,
    Preview,
    Apply,
    Discard,
    Query,
    QuickFix,
    Undo,
    Edit,
    Rationale,
    SaveAnchor,
    Finalize,
}

const OPS: [Op; 14] = [
    Op::ApplyAnchor,
    Op::Submit,
    Op::SubmitBad,
    Op::Generate,
    Op::Preview,
    Op::Apply,
    Op::Discard,
    Op::Query,
    Op::QuickFix,
    Op::Undo,
    Op::Edit,
    Op::Rationale,
    Op::SaveAnchor,
    Op::Finalize,
];

/// States from which each operation may succeed, and the state it leaves.
fn allowed(op: Op, from: SessionState) -> Option<SessionState> {
    use SessionState::*;
    match (op, from) {
        (Op::ApplyAnchor, FactorsCurated) => Some(FactorsCurated),
        (Op::Submit | Op::SubmitBad, FactorsCurated | FactorsSubmitted) => Some(FactorsSubmitted),
        (Op::Generate, FactorsSubmitted | Drafted) => Some(Analyzed),
        (Op::Preview | Op::Apply | Op::Discard | Op::Query | Op::QuickFix | Op::Undo | Op::Edit | Op::Rationale, Analyzed) => {
            Some(Analyzed)
        }
        (Op::SaveAnchor, Analyzed | Finalized) => Some(from),
        (Op::Finalize, Analyzed) => Some(Finalized),
        _ => None,
    }
}

fn random_span(rng: &mut StdRng, n: usize) -> Span {
    let a = rng.random_range(0..=n + 2);
    let b = rng.random_range(0..=n + 2);
    Span::new(a.min(b), a.max(b))
}

fn perform(service: &ComposeService, id: &personamail_core::domain::SessionId, op: Op, rng: &mut StdRng) -> Result<(), Error> {
    let view = service.get_session(id)?;
    let n = view.draft.as_ref().map_or(0, |d| clen(&d.body));
    match op {
        Op::ApplyAnchor => {
            let anchors = service.store().list_anchors();
            let anchor = match anchors.choose(rng) {
                Some(a) if rng.random_bool(0.8) => a.anchor_id.clone(),
                _ => AnchorId::new("anc-404"),
            };
            service.apply_anchor(id, &anchor).map(drop)
        }
        Op::Submit => {
            let selections = view
                .prompts
                .iter()
                .map(|p| {
                    if rng.random_bool(0.3) {
                        FactorSelection::skip(p.factor_id.clone())
                    } else {
                        FactorSelection::option(p.factor_id.clone(), p.suggested_options[0].clone())
                    }
                })
                .collect();
            service.submit_factors(id, selections).map(drop)
        }
        Op::SubmitBad => service
            .submit_factors(id, vec![FactorSelection { factor_id: "familiarity".into(), selected_option: None, elaboration: None, skipped: false }])
            .map(drop),
        Op::Generate => service.generate(id).map(drop),
        Op::Preview | Op::Apply => {
            let (intent, value) = match view.intents.choose(rng) {
                Some(i) if rng.random_bool(0.9) => {
                    let v = if rng.random_bool(0.2) { i.current_value.clone() } else { i.alternative_values[0].clone() };
                    (i.intent_id.clone(), v)
                }
                _ => (IntentId::new("i99"), "x".into()),
            };
            if matches!(op, Op::Preview) {
                service.preview_intent(id, &intent, &value).map(drop)
            } else {
                service.apply_intent(id, &intent, &value).map(drop)
            }
        }
        Op::Discard => service.discard_preview(id),
        Op::Query => service.query_quickfix(id, random_span(rng, n)).map(drop),
        Op::QuickFix => {
            let record = match service.store().list_records().choose(rng) {
                Some(r) => r.record_id.clone(),
                None => RecordId::new("rec-404"),
            };
            service.apply_quickfix(id, &record, random_span(rng, n), rng.random_bool(0.7)).map(drop)
        }
        Op::Undo => service.undo_quickfix(id).map(drop),
        Op::Edit => {
            let text = match rng.random_range(0..4) {
                0 => String::new(),
                1 => " ".into(),
                _ => sentence(rng),
            };
            let rationale = rng.random_bool(0.5).then(|| sentence(rng));
            service.manual_edit(id, random_span(rng, n), &text, rationale).map(drop)
        }
        Op::Rationale => {
            let edit = match view.edits.choose(rng) {
                Some(e) => e.edit_id.clone(),
                None => "e404".into(),
            };
            let rationale = rng.random_bool(0.7).then(|| sentence(rng));
            service.provide_rationale(id, &edit, rationale).map(drop)
        }
        Op::SaveAnchor => {
            let kind = if rng.random_bool(0.5) { AnchorKind::Persona } else { AnchorKind::Situation };
            let name = rng.random_bool(0.5).then(|| "Named".to_owned());
            service.save_anchor(id, kind, name).map(drop)
        }
        Op::Finalize => service.finalize(id).map(drop),
    }
}

fn state_machine() -> Outcome {
    let catalog = Catalog::builtin();
    let mut rng = StdRng::seed_from_u64(0x5eed_0010);
    let mut service = service_with(Arc::new(SyntheticClient::new()), Arc::new(ReuseStore::in_memory()));
    let (mut ok, mut rejected) = (0usize, 0usize);
    for seq in 0..10_000 {
        if seq % 250 == 0 {
            service = service_with(Arc::new(SyntheticClient::new()), Arc::new(ReuseStore::in_memory()));
        }
        let id = service
            .create_session(TaskContext::new(sentence(&mut rng)).with_recipient(sentence(&mut rng)))
            .map_err(|e| format!("sequence {seq}: create failed: {e}"))?
            .session_id;
        let len = rng.random_range(1..12);
        for step in 0..len {
            // Bias towards progress so later states are reached often.
            let op = if rng.random_bool(0.35) {
                match service.get_session(&id).unwrap().state {
                    SessionState::FactorsCurated => Op::Submit,
                    SessionState::FactorsSubmitted | SessionState::Drafted => Op::Generate,
                    _ => *OPS.choose(&mut rng).unwrap(),
                }
            } else {
                *OPS.choose(&mut rng).unwrap()
            };
            let before = service.get_session(&id).unwrap();
            let result = perform(&service, &id, op, &mut rng);
            let after = service.get_session(&id).unwrap();
            let here = format!("sequence {seq} step {step} {op:?} from {}", before.state);
            match result {
                Ok(()) => {
                    ok += 1;
                    ensure!(!matches!(op, Op::SubmitBad), "{here}: invalid selections accepted");
                    let expect = allowed(op, before.state).ok_or_else(|| format!("{here}: succeeded in an illegal state"))?;
                    ensure!(after.state == expect, "{here}: went to {}", after.state);
                }
                Err(e) => {
                    rejected += 1;
                    ensure!(
                        matches!(e, Error::State { .. } | Error::Validation { .. } | Error::NotFound { .. } | Error::NoOpEdit),
                        "{here}: unexpected error kind {e}"
                    );
                    if allowed(op, before.state).is_none() {
                        ensure!(matches!(e, Error::State { .. }), "{here}: illegal call not reported as StateError: {e}");
                    }
                    ensure!(after.state == before.state, "{here}: failed call changed state");
                    ensure!(after.draft == before.draft, "{here}: failed call changed the draft");
                    let api = ApiError::from(e);
                    let body = serde_json::to_value(&api).unwrap();
                    ensure!(
                        matches!(api.status, 400 | 404 | 409) && body["code"].is_string() && body["message"].is_string(),
                        "{here}: unstructured rejection {body}"
                    );
                }
            }
            service.check_session(&id).map_err(|e| format!("{here}: invariant broken: {e}"))?;
            ensure!(service.store().verify(Some(&catalog)).is_empty(), "{here}: store invalid");
        }
    }
    Ok(format!("10000 sequences: {ok} accepted calls, {rejected} rejected with structured State/Validation/NotFound errors; invariants held"))
}

// ---------------------------------------------------------------------------
// 11. Catalog fidelity

fn catalog_fidelity() -> Outcome {
    let expected = [
        ("Relationship Type", FactorCategory::Persona),
        ("Familiarity", FactorCategory::Persona),
        ("Power/Status", FactorCategory::Persona),
        ("Gender Dynamics", FactorCategory::Persona),
        ("Personality Traits", FactorCategory::Persona),
        ("Relationship Needs", FactorCategory::Persona),
        ("Age", FactorCategory::Persona),
        ("Cultural Context", FactorCategory::Persona),
        ("Emotional Intent", FactorCategory::Situation),
        ("Competing Goals", FactorCategory::Situation),
        ("Promptness", FactorCategory::Situation),
        ("Communication Purpose", FactorCategory::Situation),
        ("Occasion", FactorCategory::Situation),
        ("Avoid Negative Consequence", FactorCategory::Situation),
    ];
    let catalog = Catalog::builtin();
    let all = catalog.list_factors(None);
    let got: Vec<(&str, FactorCategory)> = all.iter().map(|f| (f.name.as_str(), f.category)).collect();
    ensure!(got == expected, "catalog is {got:?}");
    let persona = catalog.list_factors(Some(FactorCategory::Persona)).len();
    let situation = catalog.list_factors(Some(FactorCategory::Situation)).len();
    ensure!((persona, situation) == (8, 6), "split {persona}/{situation}");
    ensure!(all.iter().all(|f| !f.source_options.is_empty()), "a factor lacks options");
    Ok("14 factors, 8 persona / 6 situation, names verbatim".into())
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("partition invariant", partition_invariant),
        ("link-graph invariant", link_graph_invariant),
        ("rewrite locality", rewrite_locality),
        ("anchor identity", anchor_identity),
        ("stylebook learning loop", stylebook_loop),
        ("retrieval oracle equivalence", retrieval_oracle),
        ("determinism and replay", determinism_and_replay),
        ("gateway robustness", gateway_robustness),
        ("store durability", store_durability),
        ("state machine soundness", state_machine),
        ("catalog fidelity", catalog_fidelity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", started.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
