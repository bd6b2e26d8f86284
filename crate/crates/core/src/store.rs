//! Document store for artifacts plus a content-addressed object store.
//!
//! Layout under the root directory:
//!
//! ```text
//! <root>/<kind>/<id>.json
//! <root>/objects/<hash[0:2]>/<hash>
//! ```
//!
//! All documents are held in memory and written through to disk. Writes are
//! serialized behind a lock and land via write-temp-then-rename, so readers
//! never observe a partial document and an acknowledged put survives restart.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{RwLock, RwLockReadGuard, RwLockWriteGuard};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::metamodel::{
    check_param_values, Artifact, ArtifactKind, Dataset, MetaFeatures, Run, RunKind,
    ValidationReport,
};
use crate::records::RunRecord;
use crate::{Error, Result};

/// Content hash and size of a stored binary object.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectRef {
    /// Lowercase hex SHA-256 of the content.
    pub hash: String,
    pub size_bytes: u64,
}

pub fn is_valid_hash(hash: &str) -> bool {
    hash.len() == 64 && hash.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Conjunctive filter over common header fields and link fields.
/// An empty filter matches everything.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryFilter {
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub author: Option<String>,
    /// Link field name to required id, e.g. `pipeline_id`.
    #[serde(default)]
    pub links: BTreeMap<String, Uuid>,
}

impl QueryFilter {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn tag(mut self, tag: impl Into<String>) -> Self {
        self.tags.push(tag.into());
        self
    }

    pub fn author(mut self, author: impl Into<String>) -> Self {
        self.author = Some(author.into());
        self
    }

    pub fn link(mut self, field: impl Into<String>, id: Uuid) -> Self {
        self.links.insert(field.into(), id);
        self
    }

    pub fn is_match_all(&self) -> bool {
        self.tags.is_empty() && self.author.is_none() && self.links.is_empty()
    }

    pub fn matches(&self, doc: &Artifact) -> bool {
        let h = doc.header();
        self.tags.iter().all(|t| h.tags.contains(t))
            && self.author.as_ref().is_none_or(|a| h.authors.contains(a))
            && self
                .links
                .iter()
                .all(|(field, id)| doc.link_value(field) == Some(*id))
    }
}

/// Identifies an experiment; `None` fields are wildcards.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentKey {
    pub dataset_id: Option<Uuid>,
    pub dataset_params_id: Option<Uuid>,
    pub pipeline_id: Option<Uuid>,
    pub pipeline_params_id: Option<Uuid>,
    pub input_trained_pipeline_id: Option<Uuid>,
}

impl ExperimentKey {
    pub fn new(dataset_id: Uuid, pipeline_id: Uuid, pipeline_params_id: Uuid) -> Self {
        Self {
            dataset_id: Some(dataset_id),
            pipeline_id: Some(pipeline_id),
            pipeline_params_id: Some(pipeline_params_id),
            ..Default::default()
        }
    }

    pub fn matches(&self, run: &Run) -> bool {
        let eq = |want: Option<Uuid>, have: Uuid| want.is_none_or(|w| w == have);
        eq(self.dataset_id, run.dataset_id)
            && eq(self.dataset_params_id, run.dataset_params_id)
            && eq(self.pipeline_id, run.pipeline_id)
            && eq(self.pipeline_params_id, run.pipeline_params_id)
            && self
                .input_trained_pipeline_id
                .is_none_or(|w| run.input_trained_pipeline_id == Some(w))
    }
}

#[derive(Default)]
struct State {
    docs: HashMap<ArtifactKind, HashMap<Uuid, Artifact>>,
    kind_of: HashMap<Uuid, ArtifactKind>,
    /// Target id to the documents that link to it.
    referrers: HashMap<Uuid, BTreeSet<(ArtifactKind, Uuid)>>,
    object_sizes: HashMap<String, u64>,
    /// Object bytes when running without a root directory.
    memory_objects: HashMap<String, Vec<u8>>,
}

impl State {
    fn get(&self, kind: ArtifactKind, id: Uuid) -> Option<&Artifact> {
        self.docs.get(&kind).and_then(|m| m.get(&id))
    }

    fn index_links(&mut self, doc: &Artifact) {
        for l in doc.links() {
            self.referrers
                .entry(l.id)
                .or_default()
                .insert((doc.kind(), doc.id()));
        }
    }

    fn unindex_links(&mut self, doc: &Artifact) {
        for l in doc.links() {
            if let Some(set) = self.referrers.get_mut(&l.id) {
                set.remove(&(doc.kind(), doc.id()));
                if set.is_empty() {
                    self.referrers.remove(&l.id);
                }
            }
        }
    }

    fn insert(&mut self, doc: Artifact) {
        self.index_links(&doc);
        self.kind_of.insert(doc.id(), doc.kind());
        self.docs
            .entry(doc.kind())
            .or_default()
            .insert(doc.id(), doc);
    }

    fn check_links(&self, doc: &Artifact) -> Result<()> {
        for l in doc.links() {
            if l.id == doc.id() {
                return Err(Error::Integrity(format!("{} links to itself", l.field)));
            }
            if self.get(l.kind, l.id).is_none() {
                return Err(Error::Integrity(format!(
                    "{} references missing {} {}",
                    l.field, l.kind, l.id
                )));
            }
        }
        Ok(())
    }

    /// Consistency rules that span more than one document.
    fn check_cross(&self, doc: &Artifact) -> Result<()> {
        match doc {
            Artifact::PipelineParams(p) => {
                if let Some(Artifact::Pipeline(pipe)) =
                    self.get(ArtifactKind::Pipeline, p.pipeline_id)
                {
                    check_param_values(&p.values, &pipe.parameter_schema).into_result()?;
                }
            }
            Artifact::DatasetParams(p) => {
                if let (Some(Artifact::Dataset(d)), Some(train), Some(test)) = (
                    self.get(ArtifactKind::Dataset, p.dataset_id),
                    &p.train_indices,
                    &p.test_indices,
                ) {
                    if let Some(n) = d.meta_features.n_instances {
                        if train.iter().chain(test).any(|&i| i as u64 >= n) {
                            let mut r = ValidationReport::new();
                            r.push("train_indices", format!("index out of bounds for {n} rows"));
                            return Err(Error::Validation(r));
                        }
                    }
                }
            }
            Artifact::Run(run) => {
                if let Some(Artifact::DatasetParams(p)) =
                    self.get(ArtifactKind::DatasetParams, run.dataset_params_id)
                {
                    if p.dataset_id != run.dataset_id {
                        return Err(Error::Integrity(format!(
                            "dataset_params_id {} belongs to dataset {}, not {}",
                            run.dataset_params_id, p.dataset_id, run.dataset_id
                        )));
                    }
                }
                if let Some(Artifact::PipelineParams(p)) =
                    self.get(ArtifactKind::PipelineParams, run.pipeline_params_id)
                {
                    if p.pipeline_id != run.pipeline_id {
                        return Err(Error::Integrity(format!(
                            "pipeline_params_id {} belongs to pipeline {}, not {}",
                            run.pipeline_params_id, p.pipeline_id, run.pipeline_id
                        )));
                    }
                }
                if let Some(tp) = run.output_trained_pipeline_id {
                    if let Some(Artifact::TrainedPipeline(t)) =
                        self.get(ArtifactKind::TrainedPipeline, tp)
                    {
                        if t.origin_run_id != run.header.id {
                            return Err(Error::Integrity(format!(
                                "output_trained_pipeline_id {tp} originates from run {}",
                                t.origin_run_id
                            )));
                        }
                    }
                }
            }
            Artifact::TrainedPipeline(t) => {
                if let Some(Artifact::Run(r)) = self.get(ArtifactKind::Run, t.origin_run_id) {
                    if r.run_kind != RunKind::Train {
                        return Err(Error::Integrity(format!(
                            "origin_run_id {} is not a training run",
                            t.origin_run_id
                        )));
                    }
                }
                for a in &t.asset_refs {
                    if !self.object_sizes.contains_key(&a.hash) {
                        return Err(Error::Integrity(format!(
                            "asset {} not in object storage",
                            a.hash
                        )));
                    }
                }
            }
            Artifact::Dataset(_) | Artifact::Pipeline(_) => {}
        }
        Ok(())
    }
}

pub struct Store {
    root: Option<PathBuf>,
    state: RwLock<State>,
}

impl Store {
    /// Opens (or creates) a store rooted at `root` and loads every document.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let mut state = State::default();
        for kind in ArtifactKind::ALL {
            let dir = root.join(kind.as_str());
            fs::create_dir_all(&dir)?;
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    // Leftover temp files from an interrupted write.
                    if path.to_string_lossy().ends_with(".tmp") {
                        let _ = fs::remove_file(&path);
                    }
                    continue;
                }
                let text = fs::read_to_string(&path)?;
                let doc = Artifact::from_json_str(kind, &text)?;
                state.insert(doc);
            }
        }
        let objects = root.join("objects");
        fs::create_dir_all(&objects)?;
        for shard in fs::read_dir(&objects)? {
            let shard = shard?.path();
            if !shard.is_dir() {
                continue;
            }
            for entry in fs::read_dir(&shard)? {
                let entry = entry?;
                let name = entry.file_name().to_string_lossy().to_string();
                if is_valid_hash(&name) {
                    state.object_sizes.insert(name, entry.metadata()?.len());
                } else if name.ends_with(".tmp") {
                    let _ = fs::remove_file(entry.path());
                }
            }
        }
        Ok(Self {
            root: Some(root),
            state: RwLock::new(state),
        })
    }

    /// A store without persistence.
    pub fn in_memory() -> Self {
        Self {
            root: None,
            state: RwLock::new(State::default()),
        }
    }

    pub fn root(&self) -> Option<&Path> {
        self.root.as_deref()
    }

    fn read(&self) -> RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    fn write(&self) -> RwLockWriteGuard<'_, State> {
        self.state.write().unwrap_or_else(|e| e.into_inner())
    }

    fn doc_path(&self, kind: ArtifactKind, id: Uuid) -> Option<PathBuf> {
        self.root
            .as_ref()
            .map(|r| r.join(kind.as_str()).join(format!("{id}.json")))
    }

    fn persist(&self, doc: &Artifact) -> Result<()> {
        if let Some(path) = self.doc_path(doc.kind(), doc.id()) {
            let mut text = serde_json::to_vec_pretty(doc)?;
            text.push(b'\n');
            atomic_write(&path, &text)?;
        }
        Ok(())
    }

    /// Stores a new document and returns its id. A nil id is replaced by a
    /// fresh UUID; a caller-supplied id must not already exist.
    pub fn put_artifact(&self, doc: impl Into<Artifact>) -> Result<Uuid> {
        let mut doc = doc.into();
        let mut state = self.write();
        if doc.id().is_nil() {
            let mut id = Uuid::new_v4();
            while state.kind_of.contains_key(&id) {
                id = Uuid::new_v4();
            }
            doc.header_mut().id = id;
        } else if let Some(existing) = state.kind_of.get(&doc.id()) {
            return Err(Error::Conflict(format!(
                "id {} already used by a {existing}",
                doc.id()
            )));
        }
        doc.validate().into_result()?;
        state.check_links(&doc)?;
        state.check_cross(&doc)?;
        self.persist(&doc)?;
        let id = doc.id();
        state.insert(doc);
        Ok(id)
    }

    /// Replaces a stored document with a validated new version. Link fields
    /// are immutable, except that a run's output trained pipeline may be set
    /// once after creation.
    pub fn update_artifact(&self, doc: impl Into<Artifact>) -> Result<()> {
        let doc = doc.into();
        let kind = doc.kind();
        let id = doc.id();
        let mut state = self.write();
        let old = state
            .get(kind, id)
            .ok_or_else(|| Error::NotFound(format!("{kind} {id}")))?
            .clone();
        doc.validate().into_result()?;
        let old_links = old.links();
        let new_links = doc.links();
        for l in &old_links {
            if !new_links.contains(l) {
                return Err(Error::Integrity(format!(
                    "link field {} is immutable",
                    l.field
                )));
            }
        }
        for l in &new_links {
            if !old_links.contains(l) && l.field != "output_trained_pipeline_id" {
                return Err(Error::Integrity(format!(
                    "link field {} is immutable",
                    l.field
                )));
            }
        }
        state.check_links(&doc)?;
        state.check_cross(&doc)?;
        self.persist(&doc)?;
        state.unindex_links(&old);
        state.insert(doc);
        Ok(())
    }

    pub fn get_artifact(&self, kind: ArtifactKind, id: Uuid) -> Result<Artifact> {
        self.read()
            .get(kind, id)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("{kind} {id}")))
    }

    pub fn contains(&self, kind: ArtifactKind, id: Uuid) -> bool {
        self.read().get(kind, id).is_some()
    }

    /// Documents of `kind` matching every clause, ordered by creation time then id.
    pub fn query_artifacts(&self, kind: ArtifactKind, filter: &QueryFilter) -> Vec<Artifact> {
        let state = self.read();
        let mut out: Vec<Artifact> = state
            .docs
            .get(&kind)
            .map(|m| m.values().filter(|d| filter.matches(d)).cloned().collect())
            .unwrap_or_default();
        out.sort_by_key(|a| (a.header().created_at, a.id()));
        out
    }

    /// Deletes a document nothing links to.
    pub fn delete_artifact(&self, kind: ArtifactKind, id: Uuid) -> Result<()> {
        let mut state = self.write();
        let doc = state
            .get(kind, id)
            .ok_or_else(|| Error::NotFound(format!("{kind} {id}")))?
            .clone();
        if let Some(refs) = state.referrers.get(&id) {
            let list: Vec<String> = refs.iter().map(|(k, r)| format!("{k} {r}")).collect();
            return Err(Error::Integrity(format!(
                "{kind} {id} is referenced by {}",
                list.join(", ")
            )));
        }
        if let Some(path) = self.doc_path(kind, id) {
            fs::remove_file(path)?;
        }
        state.unindex_links(&doc);
        state.kind_of.remove(&id);
        if let Some(m) = state.docs.get_mut(&kind) {
            m.remove(&id);
        }
        Ok(())
    }

    /// Stores bytes under their SHA-256. Idempotent.
    pub fn put_object(&self, bytes: &[u8]) -> Result<ObjectRef> {
        let hash = sha256_hex(bytes);
        let obj = ObjectRef {
            hash: hash.clone(),
            size_bytes: bytes.len() as u64,
        };
        let mut state = self.write();
        if state.object_sizes.contains_key(&hash) {
            return Ok(obj);
        }
        match &self.root {
            Some(root) => {
                let dir = root.join("objects").join(&hash[..2]);
                fs::create_dir_all(&dir)?;
                atomic_write(&dir.join(&hash), bytes)?;
            }
            None => {
                state.memory_objects.insert(hash.clone(), bytes.to_vec());
            }
        }
        state.object_sizes.insert(hash, obj.size_bytes);
        Ok(obj)
    }

    pub fn fetch_object(&self, hash: &str) -> Result<Vec<u8>> {
        let state = self.read();
        if !is_valid_hash(hash) || !state.object_sizes.contains_key(hash) {
            return Err(Error::NotFound(format!("object {hash}")));
        }
        match &self.root {
            Some(root) => Ok(fs::read(root.join("objects").join(&hash[..2]).join(hash))?),
            None => Ok(state.memory_objects[hash].clone()),
        }
    }

    pub fn object_count(&self) -> usize {
        self.read().object_sizes.len()
    }

    /// Runs matching every non-wildcard key field, ordered by
    /// (dataset_params_id, repeat_index, id).
    pub fn runs_for_experiment(&self, key: &ExperimentKey) -> Vec<Run> {
        let state = self.read();
        let mut runs: Vec<Run> = state
            .docs
            .get(&ArtifactKind::Run)
            .into_iter()
            .flat_map(|m| m.values())
            .filter_map(|d| match d {
                Artifact::Run(r) if key.matches(r) => Some(r.clone()),
                _ => None,
            })
            .collect();
        runs.sort_by(|a, b| {
            (a.dataset_params_id, a.repeat_index, a.header.id).cmp(&(
                b.dataset_params_id,
                b.repeat_index,
                b.header.id,
            ))
        });
        runs
    }

    /// Flattened snapshot of every run, joined with its fold index.
    pub fn run_records(&self) -> Vec<RunRecord> {
        let state = self.read();
        let mut out: Vec<RunRecord> = state
            .docs
            .get(&ArtifactKind::Run)
            .into_iter()
            .flat_map(|m| m.values())
            .filter_map(|d| match d {
                Artifact::Run(r) => {
                    let fold = match state.get(ArtifactKind::DatasetParams, r.dataset_params_id) {
                        Some(Artifact::DatasetParams(p)) => Some(p.fold_index),
                        _ => None,
                    };
                    Some(RunRecord::from_run(r, fold))
                }
                _ => None,
            })
            .collect();
        out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        out
    }

    pub fn datasets(&self) -> Vec<Dataset> {
        self.query_artifacts(ArtifactKind::Dataset, &QueryFilter::all())
            .into_iter()
            .filter_map(|d| match d {
                Artifact::Dataset(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    /// Meta-features of every stored dataset keyed by id string.
    pub fn meta_features(&self) -> BTreeMap<String, MetaFeatures> {
        self.datasets()
            .into_iter()
            .map(|d| (d.header.id.to_string(), d.meta_features))
            .collect()
    }

    pub fn count(&self, kind: ArtifactKind) -> usize {
        self.read().docs.get(&kind).map_or(0, HashMap::len)
    }

    /// Full scan for dangling links. Empty when the store is consistent.
    pub fn audit(&self) -> Vec<String> {
        let state = self.read();
        let mut issues = Vec::new();
        for docs in state.docs.values() {
            for doc in docs.values() {
                for l in doc.links() {
                    if state.get(l.kind, l.id).is_none() {
                        issues.push(format!(
                            "{} {}: {} -> missing {} {}",
                            doc.kind(),
                            doc.id(),
                            l.field,
                            l.kind,
                            l.id
                        ));
                    }
                }
            }
        }
        issues.sort();
        issues
    }
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_file_name(format!(
        "{}.tmp",
        path.file_name().unwrap_or_default().to_string_lossy()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_hash() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }

    #[test]
    fn hash_format() {
        assert!(is_valid_hash(&sha256_hex(b"abc")));
        assert!(!is_valid_hash("ABC"));
        assert!(!is_valid_hash(&"G".repeat(64)));
    }

    #[test]
    fn objects_in_memory() {
        let s = Store::in_memory();
        let a = s.put_object(b"hello").unwrap();
        let b = s.put_object(b"hello").unwrap();
        assert_eq!(a, b);
        assert_eq!(s.object_count(), 1);
        assert_eq!(s.fetch_object(&a.hash).unwrap(), b"hello");
        assert!(matches!(
            s.fetch_object(&sha256_hex(b"x")),
            Err(Error::NotFound(_))
        ));
    }
}
