use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use serde::Serialize;
use serde_json::Value;

use super::{normalize_label, read_predictions, write_predictions, CondaQAInstance, NevIRInstance, PredictionRecord};
use crate::error::{Error, Result};
use crate::llm::{render_template, ChatClient, ModelSettings, PromptTemplate};

/// One prompt to send: an instance id and the placeholder values for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InferenceItem {
    pub instance_id: String,
    pub bindings: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnswerFormat {
    /// Free-form answers (CondaQA).
    Open,
    /// One of a fixed set of labels.
    Closed(Vec<String>),
}

pub struct InferenceJob {
    pub template: PromptTemplate,
    pub settings: ModelSettings,
    /// Bindings shared by every item, such as few-shot exemplars.
    pub extras: BTreeMap<String, String>,
    pub format: AnswerFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InferenceSummary {
    pub total: usize,
    /// Items already answered in the output file.
    pub skipped: usize,
    pub completed: usize,
}

const GOLD_FIELDS: &[&str] = &["gold", "gold_answer", "instance_id"];

fn flatten_value(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(items) => Some(items.iter().filter_map(flatten_value).collect::<Vec<_>>().join("; ")),
        _ => None,
    }
}

/// Prompt items for JSON gold records: every scalar field except the gold
/// answer becomes a binding. Arrays are joined with `; `.
pub fn record_items<T: Serialize>(records: &[T], id_field: &str) -> Result<Vec<InferenceItem>> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let Value::Object(map) = serde_json::to_value(r)? else {
                return Err(Error::ValidationError(format!("record {i} is not an object")));
            };
            let instance_id = map
                .get(id_field)
                .and_then(flatten_value)
                .ok_or(Error::MissingField { index: i, field: "instance_id" })?;
            let bindings = map
                .iter()
                .filter(|(k, _)| !GOLD_FIELDS.contains(&k.as_str()))
                .filter_map(|(k, v)| Some((k.clone(), flatten_value(v)?)))
                .collect();
            Ok(InferenceItem { instance_id, bindings })
        })
        .collect()
}

pub fn condaqa_items(gold: &[CondaQAInstance]) -> Result<Vec<InferenceItem>> {
    record_items(gold, "instance_id")
}

/// Two items per pair, one per query, bound as `query`, `doc1`, `doc2`.
pub fn nevir_items(gold: &[NevIRInstance]) -> Vec<InferenceItem> {
    gold.iter()
        .flat_map(|g| {
            let [id1, id2] = g.query_ids();
            [(id1, &g.query_1), (id2, &g.query_2)].map(|(instance_id, query)| InferenceItem {
                instance_id,
                bindings: [("query", query), ("doc1", &g.doc_1), ("doc2", &g.doc_2)]
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), v.clone()))
                    .collect(),
            })
        })
        .collect()
}

fn bracketed(raw: &str) -> Option<&str> {
    let start = raw.find('[')?;
    let len = raw[start + 1..].find(']')?;
    Some(raw[start + 1..start + 1 + len].trim()).filter(|s| !s.is_empty())
}

/// Extracts the answer from raw model output. The first bracketed span wins;
/// otherwise the first non-empty line is used. Closed-set answers that match
/// no label come back empty.
pub fn parse_prediction(raw: &str, format: &AnswerFormat) -> String {
    let candidate = bracketed(raw)
        .or_else(|| raw.lines().map(str::trim).find(|l| !l.is_empty()))
        .unwrap_or("");
    match format {
        AnswerFormat::Open => candidate.to_string(),
        AnswerFormat::Closed(labels) => {
            let norm = normalize_label(candidate);
            labels
                .iter()
                .find(|l| normalize_label(l) == norm)
                .cloned()
                .unwrap_or_default()
        }
    }
}

/// Answers every item not already present in `out`, appending each answer
/// as soon as it arrives. On success the file is rewritten in item order.
/// On failure the answers received so far stay in `out`, so a rerun only
/// sends the remainder.
pub fn run_inference(
    items: &[InferenceItem],
    client: &ChatClient,
    job: &InferenceJob,
    out: &Path,
) -> Result<InferenceSummary> {
    let mut done: HashMap<String, PredictionRecord> = HashMap::new();
    if out.exists() {
        for p in read_predictions(out)? {
            if done.contains_key(&p.instance_id) {
                return Err(Error::DuplicatePrediction(p.instance_id));
            }
            done.insert(p.instance_id.clone(), p);
        }
    }
    let pending: Vec<&InferenceItem> = items.iter().filter(|i| !done.contains_key(&i.instance_id)).collect();
    let summary = InferenceSummary {
        total: items.len(),
        skipped: items.len() - pending.len(),
        completed: pending.len(),
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(|e| Error::io(out, e))?;
    let writer = Mutex::new(file);
    let results = client.map_concurrent(&pending, |item| -> Result<PredictionRecord> {
        let mut bindings = job.extras.clone();
        bindings.extend(item.bindings.clone());
        let request = render_template(&job.template, &bindings, &job.settings)?;
        let raw = client.complete(&request)?.content;
        let record = PredictionRecord {
            instance_id: item.instance_id.clone(),
            prediction: parse_prediction(&raw, &job.format),
            raw_output: Some(raw),
        };
        let mut line = serde_json::to_vec(&record)?;
        line.push(b'\n');
        let mut f = writer.lock().expect("checkpoint lock");
        f.write_all(&line).and_then(|_| f.flush()).map_err(|e| Error::io(out, e))?;
        Ok(record)
    });
    drop(writer);
    let mut first_error = None;
    for r in results {
        match r {
            Ok(p) => {
                done.insert(p.instance_id.clone(), p);
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let ordered: Vec<PredictionRecord> = items
        .iter()
        .filter_map(|i| done.remove(&i.instance_id))
        .collect();
    write_predictions(out, &ordered)?;
    Ok(summary)
}
