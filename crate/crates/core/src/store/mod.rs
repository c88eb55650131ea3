//! Durable storage for anchors and stylebook records.
//!
//! The store is a single JSON document. Readers work on an immutable
//! snapshot; writers serialize through a mutex plus an advisory file lock,
//! re-read the file, apply their change and replace the file atomically
//! (temp file, fsync, rename). A failed write leaves both the file and the
//! in-memory snapshot at the previous state.

mod retrieval;

pub use retrieval::{lexical_score, rank_records, Embedder, RetrievalQuery, RetrievalSettings, ScoredRecord};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use crate::catalog::Catalog;
use crate::domain::{Anchor, AnchorId, AnchorKind, FactorCategory, Issue, RecordId, StylebookRecord, ValidationReport};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StoreFile {
    pub schema_version: u32,
    /// Incremented on every committed write.
    pub write_counter: u64,
    pub anchors: Vec<Anchor>,
    pub records: Vec<StylebookRecord>,
}

impl StoreFile {
    pub fn empty() -> Self {
        StoreFile {
            schema_version: SCHEMA_VERSION,
            ..Self::default()
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("store serializes");
        s.push('\n');
        s
    }

    /// Parse any supported version, migrating older layouts forward.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Storage(format!("store file is not JSON: {e}")))?;
        let value = migrate(value)?;
        serde_json::from_value(value).map_err(|e| Error::Storage(format!("store file is malformed: {e}")))
    }

    /// Structural problems: repeated ids, invalid records and anchors. With
    /// a catalog, anchor factors are also checked against it.
    pub fn verify(&self, catalog: Option<&Catalog>) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut ids = BTreeSet::new();
        for a in &self.anchors {
            if !ids.insert(a.anchor_id.as_str()) {
                report.push(Issue::DuplicateId {
                    kind: "anchor".into(),
                    id: a.anchor_id.to_string(),
                });
            }
            if let Err(reason) = check_anchor(a, catalog) {
                report.push(Issue::InvalidAnchor {
                    anchor_id: a.anchor_id.to_string(),
                    reason,
                });
            }
        }
        let mut ids = BTreeSet::new();
        for r in &self.records {
            if !ids.insert(r.record_id.as_str()) {
                report.push(Issue::DuplicateId {
                    kind: "record".into(),
                    id: r.record_id.to_string(),
                });
            }
            if let Err(reason) = r.check() {
                report.push(Issue::InvalidRecord {
                    record_id: r.record_id.to_string(),
                    reason,
                });
            }
        }
        report
    }
}

pub fn check_anchor(anchor: &Anchor, catalog: Option<&Catalog>) -> Result<(), String> {
    if anchor.name.trim().is_empty() {
        return Err("name is blank".into());
    }
    if anchor.factor_configuration.is_empty() {
        return Err("factor configuration is empty".into());
    }
    let want = match anchor.kind {
        AnchorKind::Persona => FactorCategory::Persona,
        AnchorKind::Situation => FactorCategory::Situation,
    };
    let mut seen = BTreeSet::new();
    for sel in &anchor.factor_configuration {
        if sel.skipped {
            return Err(format!("factor {} is skipped", sel.factor_id));
        }
        sel.check()?;
        if !seen.insert(&sel.factor_id) {
            return Err(format!("factor {} appears twice", sel.factor_id));
        }
        if let Some(catalog) = catalog {
            match catalog.get(&sel.factor_id) {
                None => return Err(format!("unknown factor {}", sel.factor_id)),
                Some(def) if def.category != want => {
                    return Err(format!("factor {} does not belong to a {want} anchor", sel.factor_id))
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

type Migration = fn(Value) -> Result<Value>;

/// `MIGRATIONS[v]` upgrades a version-`v` document to `v + 1`.
const MIGRATIONS: [Migration; 1] = [migrate_v0];

/// Version 0 had no version field and no write counter.
fn migrate_v0(mut value: Value) -> Result<Value> {
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Storage("store root is not an object".into()))?;
    obj.insert("schema_version".into(), Value::from(1));
    obj.entry("write_counter").or_insert(Value::from(0));
    obj.entry("anchors").or_insert(Value::Array(Vec::new()));
    obj.entry("records").or_insert(Value::Array(Vec::new()));
    Ok(value)
}

fn migrate(mut value: Value) -> Result<Value> {
    let mut version = match value.get("schema_version") {
        None => 0,
        Some(v) => v
            .as_u64()
            .ok_or_else(|| Error::Storage("schema_version is not a number".into()))? as u32,
    };
    if version > SCHEMA_VERSION {
        return Err(Error::Storage(format!(
            "store schema version {version} is newer than supported version {SCHEMA_VERSION}"
        )));
    }
    while version < SCHEMA_VERSION {
        value = MIGRATIONS[version as usize](value)?;
        version += 1;
    }
    Ok(value)
}

/// Next `<prefix>-N` after the largest existing numeric suffix.
fn next_id<'a>(prefix: &str, existing: impl Iterator<Item = &'a str>) -> String {
    let max = existing
        .filter_map(|id| id.strip_prefix(prefix)?.strip_prefix('-')?.parse::<u64>().ok())
        .max()
        .unwrap_or(0);
    format!("{prefix}-{}", max + 1)
}

/// Called with the temp file path after it is written and before the
/// rename. Returning an error aborts the write, simulating a crash.
pub type WriteHook = Box<dyn Fn(&Path) -> std::io::Result<()> + Send + Sync>;

pub struct ReuseStore {
    path: Option<PathBuf>,
    snapshot: RwLock<Arc<StoreFile>>,
    writer: Mutex<()>,
    hook: RwLock<Option<WriteHook>>,
}

impl std::fmt::Debug for ReuseStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReuseStore").field("path", &self.path).finish_non_exhaustive()
    }
}

impl ReuseStore {
    /// Open the store at `path`, creating nothing until the first write.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let file = read_file(&path)?;
        Ok(ReuseStore {
            path: Some(path),
            snapshot: RwLock::new(Arc::new(file)),
            writer: Mutex::new(()),
            hook: RwLock::new(None),
        })
    }

    pub fn in_memory() -> Self {
        ReuseStore {
            path: None,
            snapshot: RwLock::new(Arc::new(StoreFile::empty())),
            writer: Mutex::new(()),
            hook: RwLock::new(None),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn set_write_hook(&self, hook: Option<WriteHook>) {
        *self.hook.write().unwrap() = hook;
    }

    pub fn snapshot(&self) -> Arc<StoreFile> {
        self.snapshot.read().unwrap().clone()
    }

    /// Re-read the file, discarding the cached snapshot.
    pub fn reload(&self) -> Result<()> {
        if let Some(path) = &self.path {
            let _guard = self.writer.lock().unwrap();
            *self.snapshot.write().unwrap() = Arc::new(read_file(path)?);
        }
        Ok(())
    }

    /// Apply `f` to a copy of the current state and commit it. Nothing is
    /// committed when `f` or the write fails.
    pub fn mutate<R>(&self, f: impl FnOnce(&mut StoreFile) -> Result<R>) -> Result<R> {
        let _guard = self.writer.lock().unwrap();
        let Some(path) = &self.path else {
            let mut next = (**self.snapshot.read().unwrap()).clone();
            let out = f(&mut next)?;
            next.write_counter += 1;
            *self.snapshot.write().unwrap() = Arc::new(next);
            return Ok(out);
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let lock_file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(lock_path(path))?;
        lock_file.lock()?;
        let mut next = read_file(path)?;
        let out = f(&mut next)?;
        next.write_counter += 1;
        self.persist(path, &next)?;
        *self.snapshot.write().unwrap() = Arc::new(next);
        drop(lock_file);
        Ok(out)
    }

    fn persist(&self, path: &Path, file: &StoreFile) -> Result<()> {
        let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
        let result = (|| -> std::io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(file.to_json().as_bytes())?;
            f.sync_all()?;
            if let Some(hook) = self.hook.read().unwrap().as_ref() {
                hook(&tmp)?;
            }
            fs::rename(&tmp, path)?;
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                if let Ok(d) = File::open(dir) {
                    let _ = d.sync_all();
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            let _ = fs::remove_file(&tmp);
            return Err(Error::Storage(format!("writing {}: {e}", path.display())));
        }
        Ok(())
    }

    /// Anchors, newest first.
    pub fn list_anchors(&self) -> Vec<Anchor> {
        let mut anchors = self.snapshot().anchors.clone();
        anchors.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| id_num(&b.anchor_id.0).cmp(&id_num(&a.anchor_id.0))));
        anchors
    }

    pub fn get_anchor(&self, id: &AnchorId) -> Result<Anchor> {
        self.snapshot()
            .anchors
            .iter()
            .find(|a| &a.anchor_id == id)
            .cloned()
            .ok_or_else(|| Error::not_found("anchor", id.as_str()))
    }

    /// Store a new anchor under a fresh id; the given id is ignored.
    pub fn insert_anchor(&self, mut anchor: Anchor) -> Result<Anchor> {
        check_anchor(&anchor, None).map_err(Error::validation)?;
        self.mutate(|file| {
            anchor.anchor_id = AnchorId::new(next_id("anc", file.anchors.iter().map(|a| a.anchor_id.as_str())));
            file.anchors.push(anchor.clone());
            Ok(anchor)
        })
    }

    pub fn rename_anchor(&self, id: &AnchorId, name: &str) -> Result<Anchor> {
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::validation("anchor name must not be blank"));
        }
        self.mutate(|file| {
            let a = file
                .anchors
                .iter_mut()
                .find(|a| &a.anchor_id == id)
                .ok_or_else(|| Error::not_found("anchor", id.as_str()))?;
            a.name = name.to_owned();
            Ok(a.clone())
        })
    }

    /// Returns whether an anchor was removed.
    pub fn delete_anchor(&self, id: &AnchorId) -> Result<bool> {
        if !self.snapshot().anchors.iter().any(|a| &a.anchor_id == id) {
            return Ok(false);
        }
        self.mutate(|file| {
            let before = file.anchors.len();
            file.anchors.retain(|a| &a.anchor_id != id);
            Ok(file.anchors.len() != before)
        })
    }

    /// Records, newest first.
    pub fn list_records(&self) -> Vec<StylebookRecord> {
        let mut records = self.snapshot().records.clone();
        records.sort_by(|a, b| b.created_at.cmp(&a.created_at).then_with(|| id_num(&b.record_id.0).cmp(&id_num(&a.record_id.0))));
        records
    }

    pub fn get_record(&self, id: &RecordId) -> Result<StylebookRecord> {
        self.snapshot()
            .records
            .iter()
            .find(|r| &r.record_id == id)
            .cloned()
            .ok_or_else(|| Error::not_found("record", id.as_str()))
    }

    /// Store a new record under a fresh id; the given id is ignored.
    pub fn insert_record(&self, mut record: StylebookRecord) -> Result<StylebookRecord> {
        record.check().map_err(Error::validation)?;
        self.mutate(|file| {
            record.record_id = RecordId::new(next_id("rec", file.records.iter().map(|r| r.record_id.as_str())));
            file.records.push(record.clone());
            Ok(record)
        })
    }

    /// Insert or replace by id.
    pub fn save_record(&self, record: StylebookRecord) -> Result<StylebookRecord> {
        if record.record_id.as_str().trim().is_empty() {
            return Err(Error::validation("record id is blank"));
        }
        record.check().map_err(Error::validation)?;
        self.mutate(|file| {
            match file.records.iter_mut().find(|r| r.record_id == record.record_id) {
                Some(slot) => *slot = record.clone(),
                None => file.records.push(record.clone()),
            }
            Ok(record)
        })
    }

    pub fn delete_record(&self, id: &RecordId) -> Result<bool> {
        if !self.snapshot().records.iter().any(|r| &r.record_id == id) {
            return Ok(false);
        }
        self.mutate(|file| {
            let before = file.records.len();
            file.records.retain(|r| &r.record_id != id);
            Ok(file.records.len() != before)
        })
    }

    /// Count one application of a record, and one acceptance if `accepted`.
    pub fn bump_usage(&self, id: &RecordId, accepted: bool) -> Result<StylebookRecord> {
        self.update_record(id, |r| {
            r.usage_count += 1;
            if accepted {
                r.acceptance_count += 1;
            }
            Ok(())
        })
    }

    /// Withdraw one acceptance after an undo. Usage is left as is.
    pub fn rollback_acceptance(&self, id: &RecordId) -> Result<StylebookRecord> {
        self.update_record(id, |r| {
            if r.acceptance_count == 0 {
                return Err(Error::validation(format!("record {} has no acceptance to withdraw", r.record_id)));
            }
            r.acceptance_count -= 1;
            Ok(())
        })
    }

    fn update_record(&self, id: &RecordId, f: impl FnOnce(&mut StylebookRecord) -> Result<()>) -> Result<StylebookRecord> {
        self.mutate(|file| {
            let r = file
                .records
                .iter_mut()
                .find(|r| &r.record_id == id)
                .ok_or_else(|| Error::not_found("record", id.as_str()))?;
            f(r)?;
            Ok(r.clone())
        })
    }

    pub fn verify(&self, catalog: Option<&Catalog>) -> ValidationReport {
        self.snapshot().verify(catalog)
    }

    pub fn export_json(&self) -> String {
        self.snapshot().to_json()
    }

    /// Replace the contents with an exported document. The document is
    /// verified first; on any problem nothing changes and the offending ids
    /// are reported.
    pub fn import_json(&self, text: &str, catalog: Option<&Catalog>) -> Result<()> {
        let incoming = StoreFile::from_json(text)?;
        let report = incoming.verify(catalog);
        if !report.is_empty() {
            return Err(Error::invalid_report("import rejected", report));
        }
        self.mutate(|file| {
            file.anchors = incoming.anchors;
            file.records = incoming.records;
            Ok(())
        })
    }
}

fn id_num(id: &str) -> u64 {
    id.rsplit('-').next().and_then(|n| n.parse().ok()).unwrap_or(0)
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".lock");
    path.with_file_name(name)
}

fn read_file(path: &Path) -> Result<StoreFile> {
    match fs::read_to_string(path) {
        Ok(text) => StoreFile::from_json(&text),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(StoreFile::empty()),
        Err(e) => Err(Error::Storage(format!("reading {}: {e}", path.display()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FactorSelection, RationaleOrigin, TaskContext};
    use chrono::{TimeZone, Utc};

    pub(crate) fn record(name: &str) -> StylebookRecord {
        StylebookRecord {
            record_id: RecordId::default(),
            modification_name: name.into(),
            original_text: "Hi Prof,".into(),
            revised_text: "Dear Professor Lin,".into(),
            rationale: "more formal".into(),
            rationale_origin: RationaleOrigin::UserProvided,
            receiver_description: "senior academic".into(),
            occasion_description: "declining".into(),
            created_at: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
            usage_count: 0,
            acceptance_count: 0,
        }
    }

    fn anchor() -> Anchor {
        Anchor {
            anchor_id: AnchorId::default(),
            kind: AnchorKind::Persona,
            name: "Mentors".into(),
            factor_configuration: vec![FactorSelection::option("familiarity", "Familiar")],
            source_task: TaskContext::new("decline dinner"),
            created_at: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn ids_are_sequential_and_survive_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let store = ReuseStore::open(&path).unwrap();
        assert_eq!(store.insert_record(record("a")).unwrap().record_id.as_str(), "rec-1");
        assert_eq!(store.insert_record(record("b")).unwrap().record_id.as_str(), "rec-2");
        assert_eq!(store.insert_anchor(anchor()).unwrap().anchor_id.as_str(), "anc-1");
        let reopened = ReuseStore::open(&path).unwrap();
        assert_eq!(reopened.snapshot(), store.snapshot());
        assert_eq!(reopened.snapshot().write_counter, 3);
        assert_eq!(reopened.insert_record(record("c")).unwrap().record_id.as_str(), "rec-3");
    }

    #[test]
    fn delete_is_idempotent() {
        let store = ReuseStore::in_memory();
        let a = store.insert_anchor(anchor()).unwrap();
        assert!(store.delete_anchor(&a.anchor_id).unwrap());
        assert!(!store.delete_anchor(&a.anchor_id).unwrap());
        assert_eq!(store.get_anchor(&a.anchor_id).unwrap_err().code(), "not_found");
    }

    #[test]
    fn counters_move_together() {
        let store = ReuseStore::in_memory();
        let r = store.insert_record(record("a")).unwrap();
        store.bump_usage(&r.record_id, true).unwrap();
        let r2 = store.bump_usage(&r.record_id, false).unwrap();
        assert_eq!((r2.usage_count, r2.acceptance_count), (2, 1));
        let r3 = store.rollback_acceptance(&r.record_id).unwrap();
        assert_eq!((r3.usage_count, r3.acceptance_count), (2, 0));
        assert!(store.rollback_acceptance(&r.record_id).is_err());
    }

    #[test]
    fn failed_write_changes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.json");
        let store = ReuseStore::open(&path).unwrap();
        store.insert_record(record("a")).unwrap();
        let before = fs::read_to_string(&path).unwrap();
        store.set_write_hook(Some(Box::new(|_| Err(std::io::Error::other("injected")))));
        assert_eq!(store.insert_record(record("b")).unwrap_err().code(), "storage_error");
        assert_eq!(fs::read_to_string(&path).unwrap(), before);
        assert_eq!(store.snapshot().records.len(), 1);
        store.set_write_hook(None);
        assert_eq!(store.insert_record(record("b")).unwrap().record_id.as_str(), "rec-2");
    }

    #[test]
    fn version_zero_is_migrated() {
        let v0 = r#"{"anchors": [], "records": []}"#;
        let file = StoreFile::from_json(v0).unwrap();
        assert_eq!(file.schema_version, SCHEMA_VERSION);
        assert!(StoreFile::from_json(r#"{"schema_version": 99}"#).is_err());
    }

    #[test]
    fn import_rejects_invalid_documents() {
        let store = ReuseStore::in_memory();
        let mut bad = StoreFile::empty();
        let mut r = record("a");
        r.record_id = RecordId::new("rec-1");
        bad.records = vec![r.clone(), r];
        let err = store.import_json(&bad.to_json(), None).unwrap_err();
        assert!(err.to_string().contains("import rejected"));
        assert!(store.snapshot().records.is_empty());
    }

    #[test]
    fn anchor_category_checked_against_catalog() {
        let catalog = Catalog::builtin();
        let mut a = anchor();
        a.anchor_id = AnchorId::new("anc-1");
        assert!(check_anchor(&a, Some(&catalog)).is_ok());
        a.factor_configuration = vec![FactorSelection::option("occasion", "Work")];
        assert!(check_anchor(&a, Some(&catalog)).is_err());
    }
}
