use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use negkb::annotation::{server, AnnotationStore};
use negkb::builder::{
    anion_pairs, build_baseline, corpus_stats, export_instruction_jsonl, flatten_anion, flatten_atomic,
    group_variants, label_corpus, randomize_labels, sample_subset, select_contrastive_anion,
    select_contrastive_atomic, subset_by_variant, write_quarantine, LabelOptions,
};
use negkb::corpus::{
    filter_underspecified, load_anion, load_atomic, read_canonical, read_labeled, write_canonical, write_labeled,
    LabeledTriple, Source, Split, Triple, ValidityLabel, Variant,
};
use negkb::eval::{
    condaqa_items, mcnemar, mcnemar_predictions, nevir_items, read_gold, read_predictions, record_items,
    run_inference, score_classification, score_condaqa, score_nevir, AnswerFormat, CondaQAInstance, EvalReport,
    GoldRecord, InferenceJob, NevIRInstance,
};
use negkb::judge::{
    build_training_set, check_disjoint, evaluate_judge, read_verdicts, write_verdicts, JudgeBackend,
    JudgeTrainingSpec, JudgeVerdict, MockOracle, RemoteJudge,
};
use negkb::llm::{assets, ChatClient, ClientConfig, HttpBackend, MockBackend, ModelSettings};
use negkb::negator::{negate_corpus, GenerativeNegator, Side};
use negkb::rng::hash64;
use negkb::verbalizer::export_statements;
use serde_json::{json, Value};

use crate::config::{BackendKind, LoadedConfig, NegationMode};
use crate::manifest::Manifest;
use crate::{BenchArgs, BuildArgs, CliError, EvalArgs, InputArgs, JudgeEvalArgs, ServeArgs, SignificanceArgs};

pub const ORIGINALS: &str = "originals.jsonl";
pub const NEGATED: &str = "negated.jsonl";
pub const NEGATION_FAILURES: &str = "negation_failures.jsonl";
pub const JUDGE_TRAIN: &str = "judge_train.jsonl";
pub const LABELED: &str = "labeled.jsonl";
pub const QUARANTINE: &str = "quarantine.jsonl";
pub const BENCHMARK: &str = "benchmark.jsonl";

type CliResult<T> = Result<T, CliError>;

struct Ctx<'a> {
    cfg: &'a LoadedConfig,
}

impl Ctx<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.config.output_dir.join(name)
    }

    fn ensure_dir(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|e| negkb::Error::io(dir, e))?;
        Ok(())
    }

    fn input_or(&self, given: &Option<PathBuf>, default: &str) -> CliResult<PathBuf> {
        let path = given.clone().unwrap_or_else(|| self.out(default));
        if !path.exists() {
            return Err(CliError::Usage(format!("input {} does not exist", path.display())));
        }
        Ok(path)
    }

    fn settings(&self) -> ModelSettings {
        let c = &self.cfg.config;
        ModelSettings {
            model: c.model.clone(),
            temperature: c.temperature,
            max_tokens: c.max_tokens,
        }
    }

    fn client(&self) -> CliResult<ChatClient> {
        let c = &self.cfg.config;
        let config = ClientConfig {
            max_retries: c.max_retries,
            concurrency: c.concurrency,
            cache: true,
            cache_path: c.cache_path.clone(),
            ..ClientConfig::default()
        };
        let client = match c.backend {
            BackendKind::Mock => ChatClient::new(mock_chat_backend(), config)?,
            BackendKind::Http => {
                let backend = HttpBackend::new(
                    &c.base_url,
                    c.api_key_env.as_deref(),
                    Duration::from_secs(c.timeout_secs),
                )?;
                ChatClient::new(backend, config)?
            }
        };
        Ok(client)
    }

    fn judge(&self) -> CliResult<Box<dyn JudgeBackend>> {
        Ok(match self.cfg.config.backend {
            BackendKind::Mock => Box::new(MockOracle),
            BackendKind::Http => Box::new(RemoteJudge::new(
                Arc::new(self.client()?),
                assets::judge(),
                self.settings(),
            )),
        })
    }
}

/// Offline chat backend. Every reply is a made-up then-event chosen by a
/// hash of the prompt, so runs are reproducible without a model.
fn mock_chat_backend() -> MockBackend {
    const VERBS: [&str; 6] = ["juggle", "swallow", "paint", "teleport", "fold", "melt"];
    const OBJECTS: [&str; 6] = ["the moon", "a glacier", "seven pianos", "the ocean", "a volcano", "the sky"];
    MockBackend::new("mock", |req| {
        let prompt = req.messages.last().map(|m| m.content.as_str()).unwrap_or("");
        let h = hash64(prompt);
        Ok(format!(
            "to {} {} {}",
            VERBS[(h % 6) as usize],
            OBJECTS[((h / 6) % 6) as usize],
            h % 997
        ))
    })
}

fn parse_split(s: &str) -> CliResult<Split> {
    Split::parse(s).ok_or_else(|| CliError::Usage(format!("unknown split `{s}`")))
}

fn parse_source(s: &str) -> CliResult<Source> {
    match s.trim().to_ascii_uppercase().as_str() {
        "ATOMIC" => Ok(Source::Atomic),
        "ANION" => Ok(Source::Anion),
        other => Err(CliError::Usage(format!("unknown source `{other}`"))),
    }
}

fn finish(mut manifest: Manifest, summary: Value) -> CliResult<Value> {
    manifest.summary = summary.clone();
    manifest.write()?;
    Ok(summary)
}

pub fn ingest(cfg: &LoadedConfig, split: Option<&str>) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let c = &cfg.config;
    let split = parse_split(split.unwrap_or(&c.split))?;
    if c.atomic_path.is_none() && c.anion_path.is_none() {
        return Err(CliError::Usage("set atomic_path and/or anion_path".into()));
    }
    let mut manifest = Manifest::new("ingest", cfg);
    let mut triples = Vec::new();
    let mut summary = serde_json::Map::new();
    for (name, path, loader) in [
        ("atomic", &c.atomic_path, load_atomic as fn(&Path, Split) -> negkb::Result<_>),
        ("anion", &c.anion_path, load_anion),
    ] {
        let Some(path) = path else { continue };
        manifest.input(path)?;
        let ingested = loader(path, split)?;
        let (kept, underspecified) = filter_underspecified(ingested.triples.clone());
        summary.insert(
            name.into(),
            json!({
                "raw": ingested.raw_count,
                "deduplicated": ingested.triples.len(),
                "duplicates": ingested.duplicates(),
                "underspecified": underspecified,
                "kept": kept.len(),
                "skipped": ingested.skipped,
            }),
        );
        triples.extend(kept);
    }
    ctx.ensure_dir(&c.output_dir)?;
    let out = ctx.out(ORIGINALS);
    write_canonical(&out, &triples)?;
    manifest.output(&out)?;
    summary.insert("split".into(), json!(split.as_str()));
    summary.insert("originals".into(), json!(triples.len()));
    finish(manifest, Value::Object(summary))
}

fn generative_variants(originals: &[Triple], negator: &GenerativeNegator) -> (Vec<Triple>, Vec<(String, String)>) {
    let mut requests = Vec::new();
    for t in originals {
        requests.push((t.tail.clone(), Side::Tail));
        if t.source != Source::Anion {
            requests.push((t.head.clone(), Side::Head));
        }
    }
    let mut answers = negator.negate_many(&requests).into_iter();
    let mut triples = Vec::new();
    let mut failures = Vec::new();
    for t in originals {
        let tail = answers.next().expect("one answer per request");
        let head = (t.source != Source::Anion).then(|| answers.next().expect("one answer per request"));
        let built = (|| -> negkb::Result<Vec<Triple>> {
            if !t.is_original() {
                return Err(negkb::Error::NotAnOriginal(t.id.clone()));
            }
            let neg_tail = tail?.event;
            Ok(match head {
                None => vec![Triple::derived(t, Variant::NegBoth, t.head.clone(), neg_tail)],
                Some(head) => {
                    let neg_head = head?.event;
                    vec![
                        Triple::derived(t, Variant::NegIf, neg_head.clone(), t.tail.clone()),
                        Triple::derived(t, Variant::NegThen, t.head.clone(), neg_tail.clone()),
                        Triple::derived(t, Variant::NegBoth, neg_head, neg_tail),
                    ]
                }
            })
        })();
        match built {
            Ok(variants) => {
                triples.push(t.clone());
                triples.extend(variants);
            }
            Err(e) => failures.push((t.id.clone(), e.to_string())),
        }
    }
    (triples, failures)
}

pub fn negate(cfg: &LoadedConfig, args: &InputArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let input = ctx.input_or(&args.input, ORIGINALS)?;
    let mut manifest = Manifest::new("negate", cfg);
    manifest.input(&input)?;
    let originals: Vec<Triple> = read_canonical(&input)?.into_iter().filter(Triple::is_original).collect();
    let (triples, failures, fallbacks) = match cfg.config.negation_mode {
        NegationMode::Rule => {
            let r = negate_corpus(&originals);
            (r.triples, r.failures, 0)
        }
        NegationMode::Generative => {
            let client = ctx.client()?;
            let negator = GenerativeNegator::new(&client, assets::negation(), ctx.settings());
            let (t, f) = generative_variants(&originals, &negator);
            (t, f, negator.fallbacks())
        }
    };
    ctx.ensure_dir(&cfg.config.output_dir)?;
    let out = ctx.out(NEGATED);
    write_canonical(&out, &triples)?;
    let fail_path = ctx.out(NEGATION_FAILURES);
    let fail_rows: Vec<Value> = failures.iter().map(|(id, reason)| json!({"id": id, "reason": reason})).collect();
    write_json_lines(&fail_path, &fail_rows)?;
    manifest.output(&out)?;
    manifest.output(&fail_path)?;
    let variants = triples.iter().filter(|t| !t.is_original()).count();
    finish(
        manifest,
        json!({
            "originals": originals.len(),
            "negated_originals": originals.len() - failures.len(),
            "variants": variants,
            "rows": triples.len(),
            "failures": failures.len(),
            "generative_fallbacks": fallbacks,
        }),
    )
}

fn write_json_lines(path: &Path, rows: &[Value]) -> CliResult<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| negkb::Error::io(path, e))?;
    Ok(())
}

pub fn judge_build(cfg: &LoadedConfig, args: &InputArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let c = &cfg.config;
    let input = ctx.input_or(&args.input, ORIGINALS)?;
    let seed = cfg.seed("judge_seed")?;
    let mut manifest = Manifest::new("judge-build", cfg);
    manifest.seed("judge_seed", seed);
    manifest.input(&input)?;
    let pool = read_canonical(&input)?;
    let spec = JudgeTrainingSpec {
        sources: c.judge_sources.iter().map(|s| parse_source(s)).collect::<CliResult<_>>()?,
        per_relation_per_label: c.judge_per_relation_per_label,
        seed,
    };
    let client = ctx.client()?;
    let training = build_training_set(&pool, &spec, &client, &assets::invalid_generation(), &ctx.settings())?;
    let bench = ctx.out(BENCHMARK);
    let mut disjoint_checked = false;
    if bench.exists() {
        manifest.input(&bench)?;
        check_disjoint(&training, &read_canonical(&bench)?)?;
        disjoint_checked = true;
    }
    ctx.ensure_dir(&c.output_dir)?;
    let out = ctx.out(JUDGE_TRAIN);
    write_labeled(&out, &training)?;
    manifest.output(&out)?;
    let count = |l: ValidityLabel| training.iter().filter(|t| t.label == l).count();
    finish(
        manifest,
        json!({
            "records": training.len(),
            "valid": count(ValidityLabel::Valid),
            "invalid": count(ValidityLabel::Invalid),
            "ambiguous": count(ValidityLabel::Ambiguous),
            "disjoint_from_benchmark": disjoint_checked,
        }),
    )
}

pub fn label(cfg: &LoadedConfig, args: &InputArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let c = &cfg.config;
    let input = ctx.input_or(&args.input, NEGATED)?;
    let mut manifest = Manifest::new("label", cfg);
    manifest.input(&input)?;
    let triples = read_canonical(&input)?;
    let judge = ctx.judge()?;
    let options = LabelOptions {
        retries: c.label_retries,
        max_quarantine_fraction: c.max_quarantine_fraction,
    };
    let outcome = label_corpus(&triples, judge.as_ref(), options)?;
    ctx.ensure_dir(&c.output_dir)?;
    let out = ctx.out(LABELED);
    write_labeled(&out, &outcome.labeled)?;
    let q = ctx.out(QUARANTINE);
    write_quarantine(&q, &outcome.quarantined)?;
    manifest.output(&out)?;
    manifest.output(&q)?;
    finish(
        manifest,
        json!({
            "judge": judge.id(),
            "labeled": outcome.labeled.len(),
            "quarantined": outcome.quarantined.len(),
        }),
    )
}

pub fn judge_eval(cfg: &LoadedConfig, args: &JudgeEvalArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let mut manifest = Manifest::new("judge-eval", cfg);
    manifest.input(&args.gold)?;
    let gold = read_labeled(&args.gold)?;
    let dir = ctx.out("judge_eval");
    ctx.ensure_dir(&dir)?;
    let verdicts: Vec<JudgeVerdict> = match &args.verdicts {
        Some(path) => {
            manifest.input(path)?;
            read_verdicts(path)?
        }
        None => {
            let judge = ctx.judge()?;
            let triples: Vec<Triple> = gold.iter().map(|g| g.triple.clone()).collect();
            let verdicts = judge.judge_many(&triples).into_iter().collect::<negkb::Result<Vec<_>>>()?;
            let path = dir.join("verdicts.jsonl");
            write_verdicts(&path, &verdicts)?;
            manifest.output(&path)?;
            verdicts
        }
    };
    let evaluation = evaluate_judge(&verdicts, &gold)?;
    let json_path = dir.join("judge_eval.json");
    let tsv_path = dir.join("judge_eval.tsv");
    let text = serde_json::to_string_pretty(&evaluation).map_err(negkb::Error::from)? + "\n";
    std::fs::write(&json_path, text).map_err(|e| negkb::Error::io(&json_path, e))?;
    std::fs::write(&tsv_path, evaluation.to_table()).map_err(|e| negkb::Error::io(&tsv_path, e))?;
    manifest.output(&json_path)?;
    manifest.output(&tsv_path)?;
    finish(
        manifest,
        json!({"n": evaluation.n, "accuracy": evaluation.accuracy, "macro_f1": evaluation.overall.f1}),
    )
}

pub fn stats(cfg: &LoadedConfig, args: &InputArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let input = ctx.input_or(&args.input, LABELED)?;
    let mut manifest = Manifest::new("stats", cfg);
    manifest.input(&input)?;
    let labeled = read_labeled(&input)?;
    let stats = corpus_stats(&labeled);
    ctx.ensure_dir(&cfg.config.output_dir)?;
    let tsv = ctx.out("stats.tsv");
    let json_path = ctx.out("stats.json");
    std::fs::write(&tsv, stats.to_tsv()).map_err(|e| negkb::Error::io(&tsv, e))?;
    let text = serde_json::to_string_pretty(&stats).map_err(negkb::Error::from)? + "\n";
    std::fs::write(&json_path, text).map_err(|e| negkb::Error::io(&json_path, e))?;
    manifest.output(&tsv)?;
    manifest.output(&json_path)?;
    finish(manifest, json!({"triples": labeled.len(), "blocks": stats.blocks.len()}))
}

pub fn build(cfg: &LoadedConfig, args: &BuildArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let c = &cfg.config;
    let input = ctx.input_or(&args.input, LABELED)?;
    let originals_path = ctx.input_or(&args.originals, ORIGINALS)?;
    let pool_path = match (&args.invalid_pool, &c.invalid_pool_path) {
        (Some(p), _) | (None, Some(p)) => p.clone(),
        (None, None) => ctx.out(JUDGE_TRAIN),
    };
    if !pool_path.exists() {
        return Err(CliError::Usage(format!(
            "invalid pool {} does not exist; run judge-build or set invalid_pool_path",
            pool_path.display()
        )));
    }
    let build_seed = cfg.seed("build_seed")?;
    let mut manifest = Manifest::new("build", cfg);
    manifest.seed("build_seed", build_seed);
    for p in [&input, &originals_path, &pool_path] {
        manifest.input(p)?;
    }
    let labeled = read_labeled(&input)?;
    let (groups, orphans) = group_variants(&labeled)?;
    let (complete, incomplete): (Vec<_>, Vec<_>) = groups
        .iter()
        .filter(|g| g.source() == Source::Atomic)
        .cloned()
        .partition(|g| g.neg_if.is_some() && g.neg_then.is_some());
    let atomic = select_contrastive_atomic(&complete)?;
    let anion = select_contrastive_anion(&anion_pairs(&groups));
    let mut contrastive = flatten_atomic(&atomic);
    contrastive.extend(flatten_anion(&anion));

    let originals = read_canonical(&originals_path)?;
    let pool = read_labeled(&pool_path)?;
    let baseline = build_baseline(&originals, &pool, &contrastive, build_seed)?;

    let mut corpora: Vec<(String, Vec<LabeledTriple>)> = vec![
        ("contrastive".into(), contrastive.clone()),
        ("baseline".into(), baseline),
    ];
    if c.variant_ablations {
        corpora.push(("neg_if".into(), subset_by_variant(&contrastive, Variant::NegIf)));
        corpora.push(("neg_then".into(), subset_by_variant(&contrastive, Variant::NegThen)));
    }
    if !c.subset_sizes.is_empty() {
        let seed = cfg.seed("subset_seed")?;
        manifest.seed("subset_seed", seed);
        for &n in &c.subset_sizes {
            corpora.push((format!("subset_{n}"), sample_subset(&contrastive, n, seed)?));
        }
    }
    if c.random_labels {
        let seed = cfg.seed("random_label_seed")?;
        manifest.seed("random_label_seed", seed);
        corpora.push(("random_labels".into(), randomize_labels(&contrastive, seed)));
    }

    let corpus_dir = ctx.out("corpora");
    let training_dir = ctx.out("training");
    ctx.ensure_dir(&corpus_dir)?;
    let mut sizes = BTreeMap::new();
    for (name, corpus) in &corpora {
        let path = corpus_dir.join(format!("{name}.jsonl"));
        write_labeled(&path, corpus)?;
        manifest.output(&path)?;
        if c.export_training {
            ctx.ensure_dir(&training_dir)?;
            let path = training_dir.join(format!("{name}.jsonl"));
            export_instruction_jsonl(corpus, assets::instruction(), &path)?;
            manifest.output(&path)?;
        }
        sizes.insert(name.clone(), corpus.len());
    }
    finish(
        manifest,
        json!({
            "atomic_groups": complete.len(),
            "incomplete_groups": incomplete.len(),
            "orphans": orphans.len(),
            "selected_atomic_groups": atomic.len(),
            "selected_anion_pairs": anion.len(),
            "sizes": sizes,
        }),
    )
}

pub fn bench_sample(cfg: &LoadedConfig, args: &BenchArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let c = &cfg.config;
    let source = args
        .input
        .clone()
        .or_else(|| c.benchmark_source.clone())
        .or_else(|| c.atomic_path.clone())
        .ok_or_else(|| CliError::Usage("set benchmark_source or atomic_path".into()))?;
    let seed = cfg.seed("benchmark_seed")?;
    let mut manifest = Manifest::new("bench-sample", cfg);
    manifest.seed("benchmark_seed", seed);
    manifest.input(&source)?;
    let test = load_atomic(&source, Split::Test)?;
    let (test, _) = filter_underspecified(test.triples);
    let benchmark = negkb::annotation::sample_benchmark(&test, c.benchmark_per_relation, seed)?;
    ctx.ensure_dir(&c.output_dir)?;
    let out = ctx.out(BENCHMARK);
    write_canonical(&out, &benchmark)?;
    let statements = ctx.out("benchmark_statements.jsonl");
    export_statements(&statements, &benchmark)?;
    manifest.output(&out)?;
    manifest.output(&statements)?;
    if let Some(session) = &args.session {
        AnnotationStore::create(session, &benchmark)?;
    }
    let per_variant: BTreeMap<String, usize> = [Variant::Orig, Variant::NegIf, Variant::NegThen, Variant::NegBoth]
        .iter()
        .map(|v| (v.to_string(), benchmark.iter().filter(|t| t.variant == *v).count()))
        .collect();
    finish(manifest, json!({"rows": benchmark.len(), "per_variant": per_variant}))
}

pub fn annotate_serve(cfg: &LoadedConfig, args: &ServeArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let session = args.session.clone().unwrap_or_else(|| ctx.out("annotation"));
    let mut store = if session.join(BENCHMARK).exists() {
        AnnotationStore::open(&session)?
    } else {
        let bench = ctx.input_or(&args.benchmark, BENCHMARK)?;
        AnnotationStore::create(&session, &read_canonical(&bench)?)?
    };
    match (&args.adjudicator, &args.a, &args.b) {
        (Some(c), Some(a), Some(b)) => store.set_adjudication(a, b, c),
        (None, _, _) => {}
        _ => return Err(CliError::Usage("--adjudicator needs --a and --b".into())),
    }
    let addr: SocketAddr = args
        .addr
        .parse()
        .map_err(|e| CliError::Usage(format!("bad --addr `{}`: {e}", args.addr)))?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| negkb::Error::io(&session, e))?;
    runtime
        .block_on(server::serve(addr, store))
        .map_err(|e| negkb::Error::io(&session, e))?;
    Ok(json!({"stopped": true}))
}

fn task_setup(task: &str, labels: &[String]) -> CliResult<(negkb::llm::PromptTemplate, AnswerFormat)> {
    let closed = |ls: &[&str]| AnswerFormat::Closed(ls.iter().map(|s| s.to_string()).collect());
    Ok(match task {
        "condaqa" => (assets::condaqa(), AnswerFormat::Open),
        "rte" => (assets::rte(), closed(&["entailment", "not_entailment"])),
        "snli" | "mnli" | "nli" => (assets::nli(), closed(&["entailment", "contradiction", "neutral"])),
        "nevir" => (assets::nevir(), closed(&["Doc1", "Doc2"])),
        "commonsenseqa" if labels.is_empty() => (assets::commonsenseqa(), closed(&["A", "B", "C", "D", "E"])),
        "commonsenseqa" => (assets::commonsenseqa(), AnswerFormat::Closed(labels.to_vec())),
        other => return Err(CliError::Usage(format!("unknown task `{other}`"))),
    })
}

pub fn eval(cfg: &LoadedConfig, args: &EvalArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let task = args.task.to_ascii_lowercase();
    let (template, format) = task_setup(&task, &args.labels)?;
    let name = args.name.clone().unwrap_or_else(|| task.clone());
    let dir = ctx.out("eval").join(&name);
    ctx.ensure_dir(&dir)?;
    let mut manifest = Manifest::new(&format!("eval-{name}"), cfg);
    manifest.input(&args.gold)?;

    let preds_path = match &args.predictions {
        Some(p) => {
            manifest.input(p)?;
            p.clone()
        }
        None => {
            let items = match task.as_str() {
                "condaqa" => condaqa_items(&read_gold::<CondaQAInstance>(&args.gold)?)?,
                "nevir" => nevir_items(&read_gold::<NevIRInstance>(&args.gold)?),
                _ => record_items(&read_gold::<GoldRecord>(&args.gold)?, "instance_id")?,
            };
            let mut extras = BTreeMap::new();
            if template.placeholders().iter().any(|p| p == "exemplars") {
                let text = match &args.exemplars {
                    Some(p) => {
                        manifest.input(p)?;
                        std::fs::read_to_string(p).map_err(|e| negkb::Error::io(p, e))?
                    }
                    None => String::new(),
                };
                extras.insert("exemplars".to_string(), text);
            }
            let job = InferenceJob {
                template: template.clone(),
                settings: ctx.settings(),
                extras,
                format: format.clone(),
            };
            let path = dir.join("predictions.jsonl");
            let client = ctx.client()?;
            run_inference(&items, &client, &job, &path)?;
            manifest.output(&path)?;
            path
        }
    };
    let preds = read_predictions(&preds_path)?;
    let mut report = match task.as_str() {
        "condaqa" => score_condaqa(&preds, &read_gold(&args.gold)?)?,
        "nevir" => score_nevir(&preds, &read_gold(&args.gold)?)?,
        _ => {
            let AnswerFormat::Closed(labels) = &format else { unreachable!() };
            let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
            score_classification(&preds, &read_gold(&args.gold)?, &labels)?
        }
    };
    report.task = task.clone();
    if let Some(base) = &args.baseline {
        manifest.input(base)?;
        report.compare_to(&EvalReport::read(base)?)?;
    }
    let json_path = dir.join("report.json");
    let tsv_path = dir.join("report.tsv");
    report.write(&json_path, &tsv_path)?;
    manifest.output(&json_path)?;
    manifest.output(&tsv_path)?;
    let metrics: serde_json::Map<String, Value> = report.metrics.iter().map(|m| (m.name.clone(), json!(m.value))).collect();
    finish(
        manifest,
        json!({
            "task": task,
            "n": report.n,
            "metrics": metrics,
            "invalid_outputs": report.invalid_outputs,
            "missing": report.missing,
            "significance": report.significance,
        }),
    )
}

pub fn significance(cfg: &LoadedConfig, args: &SignificanceArgs) -> CliResult<Value> {
    let ctx = Ctx { cfg };
    let mut manifest = Manifest::new("significance", cfg);
    let result = match (&args.a, &args.b, &args.gold) {
        (a, b, None) => {
            manifest.input(a)?;
            manifest.input(b)?;
            let ra = EvalReport::read(a)?;
            let rb = EvalReport::read(b)?;
            mcnemar(&ra.outcomes, &rb.outcomes)?
        }
        (a, b, Some(gold)) => {
            for p in [a, b, gold] {
                manifest.input(p)?;
            }
            mcnemar_predictions(&read_predictions(a)?, &read_predictions(b)?, &read_gold(gold)?)?
        }
    };
    ctx.ensure_dir(&cfg.config.output_dir)?;
    let out = ctx.out("significance.json");
    let text = serde_json::to_string_pretty(&result).map_err(negkb::Error::from)? + "\n";
    std::fs::write(&out, text).map_err(|e| negkb::Error::io(&out, e))?;
    manifest.output(&out)?;
    finish(manifest, serde_json::to_value(&result).map_err(negkb::Error::from)?)
}

/// Runs the configured stages in order with default inputs.
pub fn pipeline(cfg: &LoadedConfig) -> CliResult<Value> {
    let none = InputArgs { input: None };
    let mut results = serde_json::Map::new();
    for stage in &cfg.config.pipeline_stages {
        log::info!("stage {stage}");
        let summary = match stage.as_str() {
            "ingest" => ingest(cfg, None)?,
            "negate" => negate(cfg, &none)?,
            "bench-sample" => bench_sample(cfg, &BenchArgs { input: None, session: None })?,
            "judge-build" => judge_build(cfg, &none)?,
            "label" => label(cfg, &none)?,
            "stats" => stats(cfg, &none)?,
            "build" => build(
                cfg,
                &BuildArgs {
                    input: None,
                    originals: None,
                    invalid_pool: None,
                },
            )?,
            other => return Err(CliError::Usage(format!("unknown pipeline stage `{other}`"))),
        };
        results.insert(stage.clone(), summary);
    }
    Ok(Value::Object(results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_backend_is_deterministic() {
        let client = ChatClient::new(mock_chat_backend(), ClientConfig::default()).unwrap();
        let req = negkb::llm::ChatRequest {
            model: "m".into(),
            messages: vec![negkb::llm::ChatMessage::user("PersonX eats")],
            temperature: 0.0,
            max_tokens: 8,
        };
        let a = client.complete(&req).unwrap().content;
        assert!(a.starts_with("to "));
        let other = ChatClient::new(mock_chat_backend(), ClientConfig::default()).unwrap();
        assert_eq!(a, other.complete(&req).unwrap().content);
    }

    #[test]
    fn generated_variants_match_rule_counts() {
        let client = ChatClient::new(mock_chat_backend(), ClientConfig::default()).unwrap();
        let negator = GenerativeNegator::new(&client, assets::negation(), ModelSettings::default());
        let t = Triple::original(
            Source::Atomic,
            Split::Train,
            negkb::corpus::EventText::affirmative("PersonX takes a picture").unwrap(),
            negkb::corpus::Relation::XWant,
            negkb::corpus::EventText::affirmative("to look at it").unwrap(),
        );
        let (triples, failures) = generative_variants(std::slice::from_ref(&t), &negator);
        assert!(failures.is_empty());
        assert_eq!(triples.len(), 4);
        let variants: Vec<Variant> = triples.iter().map(|t| t.variant).collect();
        assert_eq!(variants, [Variant::Orig, Variant::NegIf, Variant::NegThen, Variant::NegBoth]);
        assert!(triples.iter().all(|v| v.parent_id.as_deref().unwrap_or(&v.id) == t.id));
    }
}
