use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use negkb::eval::{
    nevir_items, read_predictions, record_items, run_inference, score_classification, score_nevir, AnswerFormat,
    GoldRecord, InferenceJob, NevIRInstance,
};
use negkb::llm::{assets, ChatClient, ChatRequest, ClientConfig, MockBackend, ModelSettings, SendError};
use negkb::Error;

fn nli_gold(n: usize) -> Vec<GoldRecord> {
    (0..n)
        .map(|i| {
            let mut g = GoldRecord::new(
                &format!("rte-{i}"),
                if i % 3 == 0 { "not_entailment" } else { "entailment" },
            );
            g.fields.insert("premise".into(), format!("Premise number {i}.").into());
            let hyp = if i % 3 == 0 { format!("Claim {i} does not hold.") } else { format!("Claim {i} holds.") };
            g.fields.insert("hypothesis".into(), hyp.into());
            g
        })
        .collect()
}

fn last_line_value(req: &ChatRequest, prefix: &str) -> String {
    let text = &req.messages.last().unwrap().content;
    text.lines()
        .filter_map(|l| l.strip_prefix(prefix))
        .next_back()
        .unwrap_or_default()
        .trim()
        .to_string()
}

fn oracle(req: &ChatRequest) -> Result<String, SendError> {
    let hyp = last_line_value(req, "## Hypothesis:");
    Ok(if hyp.contains(" not ") { "[not_entailment]" } else { "[entailment]" }.to_string())
}

fn config() -> ClientConfig {
    ClientConfig {
        concurrency: 1,
        cache: false,
        ..ClientConfig::default()
    }
}

fn rte_job() -> InferenceJob {
    InferenceJob {
        template: assets::rte(),
        settings: ModelSettings::default(),
        extras: BTreeMap::new(),
        format: AnswerFormat::Closed(vec!["entailment".into(), "not_entailment".into()]),
    }
}

#[test]
fn mock_answering_gold_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("preds.jsonl");
    let gold = nli_gold(12);
    let client = ChatClient::new(MockBackend::new("oracle", oracle), ClientConfig::default()).unwrap();
    let items = record_items(&gold, "instance_id").unwrap();
    assert!(!items[0].bindings.contains_key("gold"));
    let summary = run_inference(&items, &client, &rte_job(), &out).unwrap();
    assert_eq!((summary.total, summary.completed), (12, 12));
    let preds = read_predictions(&out).unwrap();
    assert_eq!(preds[0].instance_id, "rte-0");
    assert_eq!(preds[0].raw_output.as_deref(), Some("[not_entailment]"));
    let report = score_classification(&preds, &gold, &["entailment", "not_entailment"]).unwrap();
    assert_eq!(report.metric("accuracy"), Some(100.0));
}

#[test]
fn resume_sends_only_the_remainder() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("preds.jsonl");
    let gold = nli_gold(10);
    let items = record_items(&gold, "instance_id").unwrap();
    let k = 4;
    let seen = Arc::new(AtomicUsize::new(0));
    let counter = seen.clone();
    let flaky = MockBackend::new("flaky", move |req| {
        if counter.fetch_add(1, Ordering::SeqCst) >= k {
            Err(SendError::Fatal("connection refused".into()))
        } else {
            oracle(req)
        }
    });
    let client = ChatClient::new(flaky, config()).unwrap();
    let err = run_inference(&items, &client, &rte_job(), &out).unwrap_err();
    assert!(matches!(err, Error::BackendUnavailable { .. }));
    assert_eq!(read_predictions(&out).unwrap().len(), k);

    let healthy = Arc::new(MockBackend::new("oracle", oracle));
    let client = ChatClient::new(healthy.clone(), config()).unwrap();
    let summary = run_inference(&items, &client, &rte_job(), &out).unwrap();
    assert_eq!((summary.skipped, summary.completed), (k, 10 - k));
    assert_eq!(healthy.calls(), 10 - k);
    let preds = read_predictions(&out).unwrap();
    let ids: Vec<_> = preds.iter().map(|p| p.instance_id.clone()).collect();
    let expected: Vec<_> = gold.iter().map(|g| g.instance_id.clone()).collect();
    assert_eq!(ids, expected);

    let again = run_inference(&items, &client, &rte_job(), &out).unwrap();
    assert_eq!((again.skipped, again.completed), (10, 0));
    assert_eq!(healthy.calls(), 10 - k);
}

#[test]
fn unparseable_output_is_recorded_empty() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("preds.jsonl");
    let gold = nli_gold(3);
    let client = ChatClient::new(MockBackend::canned("I cannot decide."), config()).unwrap();
    run_inference(&record_items(&gold, "instance_id").unwrap(), &client, &rte_job(), &out).unwrap();
    let preds = read_predictions(&out).unwrap();
    assert!(preds.iter().all(|p| p.prediction.is_empty()));
    let report = score_classification(&preds, &gold, &["entailment", "not_entailment"]).unwrap();
    assert_eq!(report.metric("accuracy"), Some(0.0));
    assert_eq!(report.invalid_outputs, 3);
}

#[test]
fn nevir_closed_loop() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("preds.jsonl");
    let gold: Vec<_> = (0..3)
        .map(|i| NevIRInstance {
            pair_id: format!("pair{i}"),
            query_1: format!("Which city has a port {i}?"),
            query_2: format!("Which city does not have a port {i}?"),
            doc_1: "Doc text one.".into(),
            doc_2: "Doc text two.".into(),
        })
        .collect();
    let backend = MockBackend::new("oracle", |req| {
        let q = last_line_value(req, "## Query:");
        Ok(if q.contains(" not ") { "[Doc2]" } else { "[Doc1]" }.to_string())
    });
    let client = ChatClient::new(backend, config()).unwrap();
    let job = InferenceJob {
        template: assets::nevir(),
        settings: ModelSettings::default(),
        extras: BTreeMap::new(),
        format: AnswerFormat::Closed(vec!["Doc1".into(), "Doc2".into()]),
    };
    run_inference(&nevir_items(&gold), &client, &job, &out).unwrap();
    let report = score_nevir(&read_predictions(&out).unwrap(), &gold).unwrap();
    assert_eq!(report.metric("pairwise_accuracy"), Some(100.0));
}
