mod common;

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use common::mock::{completion, error, prompt_of, MockServer};
use common::synth::random_graph_with;
use litgraph::client::{CompletionApi, HttpCompletionClient, RetryPolicy};
use litgraph::eval::{evaluate_suite, EvalConfig, EvalStatus};
use litgraph::taskgen::{generate_dataset, Split, TaskConfig};
use litgraph::{TaskDataset, TaskKind};

fn dataset() -> TaskDataset {
    let cfg = TaskConfig {
        plain_related_work: false,
        ..TaskConfig::default()
    };
    generate_dataset(&random_graph_with(40, 0.08, 11, 1), 5, Split::Bench, &cfg)
}

fn answers(ds: &TaskDataset) -> HashMap<String, String> {
    let mut table = HashMap::new();
    for i in &ds.instances {
        let prev = table.insert(i.prompt.clone(), i.target.clone());
        assert!(prev.is_none_or(|t| t == i.target), "one answer per prompt");
    }
    table
}

fn client(server: &MockServer) -> HttpCompletionClient {
    HttpCompletionClient::new(server.url("/v1/completions"), "mock", CompletionApi::Completions)
}

fn cfg() -> EvalConfig<'static> {
    EvalConfig {
        retry: RetryPolicy::immediate(2),
        jobs: 8,
        ..EvalConfig::default()
    }
}

#[test]
fn perfect_endpoint_scores_one() {
    let ds = dataset();
    let table = answers(&ds);
    let server = MockServer::start(move |_, body| completion(&table[&prompt_of(body)]));
    let report = evaluate_suite(&ds, &client(&server), &cfg()).unwrap();
    assert_eq!(report.failed, 0);
    let counts = ds.counts();
    for task in TaskKind::ALL {
        let Some(&n) = counts.get(&task) else { continue };
        let metric = if task.is_predictive() { "accuracy" } else { "f1" };
        let row = report.get(task, metric).unwrap();
        assert_eq!(row.n, n);
        assert!((row.value.unwrap() - 1.0).abs() < 1e-9, "{task} {metric} = {:?}", row.value);
    }

    let mut caps: BTreeMap<TaskKind, u64> = BTreeMap::new();
    let task_of: HashMap<String, TaskKind> = ds.instances.iter().map(|i| (i.prompt.clone(), i.task)).collect();
    for (path, body) in server.requests() {
        assert_eq!(path, "/v1/completions");
        assert_eq!(body["temperature"].as_f64(), Some(0.0));
        let task = task_of[&prompt_of(&body)];
        let cap = body["max_tokens"].as_u64().unwrap();
        assert_eq!(*caps.entry(task).or_insert(cap), cap);
    }
    for (task, want) in [
        (TaskKind::LinkPred, 2),
        (TaskKind::TitleGen, 100),
        (TaskKind::AbstractCompletion, 256),
        (TaskKind::IntroToAbstract, 256),
        (TaskKind::CitationSentence, 64),
    ] {
        assert_eq!(caps.get(&task), Some(&want), "{task}");
    }
}

#[test]
fn constant_answer_on_balanced_link_prediction() {
    let ds = dataset();
    let lp = TaskDataset {
        instances: ds.instances.into_iter().filter(|i| i.task == TaskKind::LinkPred).collect(),
        seed: 0,
    };
    let server = MockServer::start(|_, _| completion("Yes, it does."));
    let report = evaluate_suite(&lp, &client(&server), &cfg()).unwrap();
    assert_eq!(report.get(TaskKind::LinkPred, "accuracy").unwrap().value, Some(0.5));
}

#[test]
fn server_errors_are_retried_then_counted() {
    let ds = dataset();
    let table = answers(&ds);
    let calls = Arc::new(AtomicUsize::new(0));
    let seen = Arc::clone(&calls);
    let server = MockServer::start(move |_, body| {
        let prompt = prompt_of(body);
        seen.fetch_add(1, Ordering::SeqCst);
        if table[&prompt] == "yes" {
            error(500)
        } else {
            completion(&table[&prompt])
        }
    });
    let report = evaluate_suite(&ds, &client(&server), &cfg()).unwrap();
    let positives = ds.instances.iter().filter(|i| i.target == "yes").count();
    assert_eq!(report.failed, positives);
    assert_eq!(calls.load(Ordering::SeqCst), ds.len() + positives);
    let row = report.get(TaskKind::LinkPred, "accuracy").unwrap();
    assert_eq!((row.failed, row.value), (positives, Some(1.0)));
    assert_eq!(report.status, EvalStatus::Ok);
}

#[test]
fn unreachable_endpoint_fails_everything() {
    let ds = dataset();
    let dead = HttpCompletionClient::new("http://127.0.0.1:9/v1/completions", "m", CompletionApi::Completions);
    let report = evaluate_suite(&ds, &dead, &EvalConfig { retry: RetryPolicy::immediate(1), ..cfg() }).unwrap();
    assert_eq!(report.status, EvalStatus::AllFailed);
    assert!(report.rows.iter().all(|r| r.value.is_none()));
    assert!(report.to_csv().starts_with("task,metric,value,n,failed\n"));
}
