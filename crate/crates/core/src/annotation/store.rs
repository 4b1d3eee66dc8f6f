use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{adjudicate, agreement, disagreements, resolve, Adjudication, AdjudicationPolicy, AgreementReport, AnnotationRecord, LabelIndex};
use crate::corpus::{jsonl, read_canonical, write_canonical, Triple};
use crate::error::{Error, Result};
use crate::verbalizer::verbalize;

const BENCHMARK: &str = "benchmark.jsonl";
const LOG: &str = "labels.log.jsonl";
const SNAPSHOT: &str = "labels.snapshot.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Task {
    Next {
        done: bool,
        triple_id: String,
        statement: String,
        /// 1-based position of this item in the annotator's queue.
        position: usize,
        total: usize,
    },
    Done {
        done: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitAck {
    pub stored: bool,
    pub overwritten: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub annotators: BTreeMap<String, usize>,
}

/// Durable label store for one benchmark session.
///
/// Layout of the session directory: the benchmark as canonical JSONL, an
/// append-only log of every submission, and a snapshot written by
/// [`AnnotationStore::compact`]. Opening replays snapshot then log.
pub struct AnnotationStore {
    dir: PathBuf,
    benchmark: Vec<Triple>,
    position: HashMap<String, usize>,
    index: LabelIndex,
    log: BufWriter<File>,
    /// (annotator a, annotator b, adjudicator) for third-pass sessions.
    adjudication: Option<(String, String, String)>,
}

fn open_log(path: &Path) -> Result<BufWriter<File>> {
    OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn read_log(path: &Path) -> Result<Vec<AnnotationRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    Ok(jsonl::read_records(path)?.into_iter().map(|(_, r)| r).collect())
}

impl AnnotationStore {
    /// Starts a session over `benchmark`, replacing any benchmark file in `dir`.
    pub fn create(dir: &Path, benchmark: &[Triple]) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut sorted = benchmark.to_vec();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        write_canonical(&dir.join(BENCHMARK), &sorted)?;
        Self::open(dir)
    }

    pub fn open(dir: &Path) -> Result<Self> {
        let bench_path = dir.join(BENCHMARK);
        if !bench_path.exists() {
            return Err(Error::SessionError(format!("no benchmark in {}", dir.display())));
        }
        let mut benchmark = read_canonical(&bench_path)?;
        benchmark.sort_by(|a, b| a.id.cmp(&b.id));
        let position = benchmark
            .iter()
            .enumerate()
            .map(|(i, t)| (t.id.clone(), i))
            .collect();
        let mut records = read_log(&dir.join(SNAPSHOT))?;
        records.extend(read_log(&dir.join(LOG))?);
        Ok(AnnotationStore {
            dir: dir.to_path_buf(),
            benchmark,
            position,
            index: resolve(records),
            log: open_log(&dir.join(LOG))?,
            adjudication: None,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn benchmark(&self) -> &[Triple] {
        &self.benchmark
    }

    pub fn labels(&self) -> &LabelIndex {
        &self.index
    }

    /// Routes disagreements between `a` and `b` to `adjudicator`'s queue.
    pub fn set_adjudication(&mut self, a: &str, b: &str, adjudicator: &str) {
        self.adjudication = Some((a.to_string(), b.to_string(), adjudicator.to_string()));
    }

    fn queue(&self, annotator: &str) -> Vec<&Triple> {
        match &self.adjudication {
            Some((a, b, c)) if c == annotator => disagreements(&self.index, a, b)
                .iter()
                .filter_map(|id| self.position.get(id).map(|&i| &self.benchmark[i]))
                .collect(),
            _ => self.benchmark.iter().collect(),
        }
    }

    /// Lowest-id item this annotator has not labeled yet.
    pub fn next_task(&self, annotator: &str) -> Result<Task> {
        if annotator.trim().is_empty() {
            return Err(Error::SessionError("annotator id is empty".into()));
        }
        let queue = self.queue(annotator);
        let done = |t: &Triple| self.index.contains_key(&(annotator.to_string(), t.id.clone()));
        let labeled = queue.iter().filter(|t| done(t)).count();
        Ok(match queue.iter().find(|t| !done(t)) {
            Some(t) => Task::Next {
                done: false,
                triple_id: t.id.clone(),
                statement: verbalize(t).text,
                position: labeled + 1,
                total: queue.len(),
            },
            None => Task::Done { done: true },
        })
    }

    /// Appends a record to the log. A record older than the stored one for
    /// the same annotator and triple is logged but does not take effect.
    pub fn submit(&mut self, record: AnnotationRecord) -> Result<SubmitAck> {
        if record.annotator_id.trim().is_empty() {
            return Err(Error::ValidationError("annotator_id is empty".into()));
        }
        if !self.position.contains_key(&record.triple_id) {
            return Err(Error::UnknownInstance(record.triple_id));
        }
        let path = self.dir.join(LOG);
        serde_json::to_writer(&mut self.log, &record)?;
        self.log.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        self.log.flush().map_err(|e| Error::io(&path, e))?;
        self.log.get_ref().sync_data().map_err(|e| Error::io(&path, e))?;
        let key = (record.annotator_id.clone(), record.triple_id.clone());
        let previous = self.index.get(&key).cloned();
        let stored = previous.as_ref().is_none_or(|p| p.timestamp <= record.timestamp);
        if stored {
            self.index.insert(key, record);
        }
        Ok(SubmitAck {
            stored,
            overwritten: stored && previous.is_some(),
        })
    }

    pub fn progress(&self) -> Progress {
        let mut annotators = BTreeMap::new();
        for (who, _) in self.index.keys() {
            *annotators.entry(who.clone()).or_insert(0) += 1;
        }
        Progress {
            total: self.benchmark.len(),
            annotators,
        }
    }

    pub fn agreement(&self, a: &str, b: &str) -> Result<AgreementReport> {
        agreement(&self.index, a, b)
    }

    pub fn adjudicate(&self, pair: (&str, &str), policy: &AdjudicationPolicy, strict: bool) -> Result<Adjudication> {
        adjudicate(&self.benchmark, &self.index, pair, policy, strict)
    }

    /// Annotators other than a configured adjudicator.
    pub fn annotators(&self) -> Vec<String> {
        let adjudicator = self.adjudication.as_ref().map(|a| a.2.as_str());
        self.progress()
            .annotators
            .into_keys()
            .filter(|a| Some(a.as_str()) != adjudicator)
            .collect()
    }

    /// Writes the resolved labels to the snapshot and empties the log.
    pub fn compact(&mut self) -> Result<()> {
        let tmp = self.dir.join(format!("{SNAPSHOT}.tmp"));
        jsonl::write_lines(&tmp, self.index.values())?;
        let snapshot = self.dir.join(SNAPSHOT);
        std::fs::rename(&tmp, &snapshot).map_err(|e| Error::io(&snapshot, e))?;
        let log = self.dir.join(LOG);
        self.log.flush().map_err(|e| Error::io(&log, e))?;
        File::create(&log).map_err(|e| Error::io(&log, e))?;
        self.log = open_log(&log)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::sample_benchmark;
    use crate::corpus::{EventText, Relation, Source, Split, ValidityLabel};
    use chrono::{TimeZone, Utc};

    fn benchmark() -> Vec<Triple> {
        let corpus: Vec<Triple> = Relation::ALL
            .iter()
            .map(|&r| {
                Triple::original(
                    Source::Atomic,
                    Split::Test,
                    EventText::affirmative("PersonX reads a book").unwrap(),
                    r,
                    EventText::affirmative("smart").unwrap(),
                )
            })
            .collect();
        sample_benchmark(&corpus, 1, 3).unwrap()
    }

    fn rec(who: &str, id: &str, label: ValidityLabel, t: i64) -> AnnotationRecord {
        AnnotationRecord {
            annotator_id: who.into(),
            triple_id: id.into(),
            label,
            timestamp: Utc.timestamp_opt(t, 0).unwrap(),
        }
    }

    #[test]
    fn queue_per_annotator() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = AnnotationStore::create(dir.path(), &benchmark()).unwrap();
        let Task::Next { triple_id, position, total, .. } = store.next_task("a").unwrap() else {
            panic!("expected a task");
        };
        assert_eq!((position, total), (1, 36));
        assert_eq!(triple_id, store.benchmark()[0].id);
        store.submit(rec("a", &triple_id, ValidityLabel::Valid, 1)).unwrap();
        let Task::Next { triple_id: second, .. } = store.next_task("a").unwrap() else { panic!() };
        assert_eq!(second, store.benchmark()[1].id);
        let Task::Next { triple_id: b_first, .. } = store.next_task("b").unwrap() else { panic!() };
        assert_eq!(b_first, triple_id);
        assert!(matches!(store.next_task(""), Err(Error::SessionError(_))));
    }

    #[test]
    fn submissions_validate_and_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = AnnotationStore::create(dir.path(), &benchmark()).unwrap();
        let id = store.benchmark()[0].id.clone();
        assert!(!store.submit(rec("a", &id, ValidityLabel::Valid, 1)).unwrap().overwritten);
        assert!(store.submit(rec("a", &id, ValidityLabel::Invalid, 2)).unwrap().overwritten);
        assert!(!store.submit(rec("a", &id, ValidityLabel::Ambiguous, 0)).unwrap().stored);
        assert_eq!(store.labels().values().next().unwrap().label, ValidityLabel::Invalid);
        assert!(matches!(store.submit(rec("a", "nope", ValidityLabel::Valid, 3)), Err(Error::UnknownInstance(_))));
    }

    #[test]
    fn survives_restart_and_compaction() {
        let dir = tempfile::tempdir().unwrap();
        let bench = benchmark();
        let before = {
            let mut store = AnnotationStore::create(dir.path(), &bench).unwrap();
            for (i, t) in bench.iter().take(5).enumerate() {
                store.submit(rec("a", &t.id, ValidityLabel::Valid, i as i64)).unwrap();
                store.submit(rec("b", &t.id, ValidityLabel::Invalid, i as i64)).unwrap();
            }
            store.labels().clone()
        };
        let mut reopened = AnnotationStore::open(dir.path()).unwrap();
        assert_eq!(reopened.labels(), &before);
        reopened.compact().unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join(LOG)).unwrap(), "");
        let snapshot = std::fs::read(dir.path().join(SNAPSHOT)).unwrap();
        drop(reopened);
        let again = AnnotationStore::open(dir.path()).unwrap();
        assert_eq!(again.labels(), &before);
        let mut again = again;
        again.compact().unwrap();
        assert_eq!(std::fs::read(dir.path().join(SNAPSHOT)).unwrap(), snapshot);
        assert_eq!(again.progress().annotators.get("a"), Some(&5));
    }

    #[test]
    fn third_pass_queue() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = AnnotationStore::create(dir.path(), &benchmark()).unwrap();
        let ids: Vec<String> = store.benchmark().iter().map(|t| t.id.clone()).collect();
        store.submit(rec("a", &ids[0], ValidityLabel::Valid, 0)).unwrap();
        store.submit(rec("b", &ids[0], ValidityLabel::Ambiguous, 0)).unwrap();
        store.submit(rec("a", &ids[1], ValidityLabel::Valid, 0)).unwrap();
        store.submit(rec("b", &ids[1], ValidityLabel::Valid, 0)).unwrap();
        store.set_adjudication("a", "b", "c");
        let Task::Next { triple_id, total, .. } = store.next_task("c").unwrap() else { panic!() };
        assert_eq!((triple_id.as_str(), total), (ids[0].as_str(), 1));
        store.submit(rec("c", &ids[0], ValidityLabel::Valid, 0)).unwrap();
        assert_eq!(store.next_task("c").unwrap(), Task::Done { done: true });
        assert_eq!(store.annotators(), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn missing_session() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(AnnotationStore::open(dir.path()), Err(Error::SessionError(_))));
    }
}
