use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;

use doccqa::adapter::{AdapterEndpoint, AdapterRequest, AdapterResponse};
use doccqa::dataset::Collection;
use doccqa::fixture::{generate_fixture, inject_answer_noise, Fixture, FixtureSpec};
use doccqa::textspot::{rank_collection, KeywordExtractor, KeywordOverrides};
use doccqa::{evaluate, Error, KeywordSet, LexiconExtractor, Pipeline, PipelineKind, Submission};

static KW: std::sync::LazyLock<LexiconExtractor> = std::sync::LazyLock::new(LexiconExtractor::default);

fn fixture(n: usize, seed: u64) -> (Fixture, Collection) {
    let f = generate_fixture(&FixtureSpec::new(n, seed)).unwrap();
    let c = f.collection().unwrap();
    (f, c)
}

fn run<'a>(kind: PipelineKind, f: &'a Fixture, c: &Collection, setup: impl FnOnce(&mut Pipeline<'a>)) -> Vec<Submission> {
    let kw: &'a LexiconExtractor = &KW;
    let mut p = Pipeline::new(kind, kw);
    setup(&mut p);
    p.run(c, &f.questions).unwrap()
}

#[test]
fn records_pipeline_is_exact_on_clean_fixture() {
    let (f, c) = fixture(500, 7);
    let subs = run(PipelineKind::RecordsRecords, &f, &c, |_| {});
    let report = evaluate(&subs, &f.gt, 0.5, true).unwrap();
    assert_eq!(report.map_percent, 100.0);
    assert_eq!(report.anlsl, 1.0);
    assert!(report.per_question.iter().all(|q| q.anlsl == 1.0 && q.ap == 1.0));
}

#[test]
fn answer_noise_lowers_anlsl_but_not_map() {
    let (f, c) = fixture(500, 7);
    let (noisy, changed) = inject_answer_noise(&c.raw_records, &f.questions, &f.schema, 0.2, 7).unwrap();
    assert!(changed > 0);
    let c = Collection::from_parts(f.schema.clone(), c.documents.clone(), noisy).unwrap();
    let subs = run(PipelineKind::RecordsRecords, &f, &c, |_| {});
    let report = evaluate(&subs, &f.gt, 0.5, true).unwrap();
    assert_eq!(report.map_percent, 100.0);
    assert!(report.anlsl < 1.0, "{}", report.anlsl);
}

#[test]
fn unreachable_theta_gives_empty_answers() {
    let (f, c) = fixture(60, 3);
    let subs = run(PipelineKind::TextspotAdapter, &f, &c, |p| {
        p.config.theta = 1.1;
        p.config.adapter = Some(AdapterEndpoint::KeywordStub);
    });
    assert_eq!(subs.len(), f.questions.len());
    assert!(subs.iter().all(|s| s.answers.0.is_empty()));
    assert!(subs.iter().all(|s| s.ranking.len() == c.documents.len()));
}

#[test]
fn gt_ranking_gives_perfect_map() {
    let (f, c) = fixture(120, 4);
    for kind in [PipelineKind::TextspotAdapter, PipelineKind::RecordsAdapter, PipelineKind::RecordsRecords] {
        let subs = run(kind, &f, &c, |p| {
            p.ground_truth = Some(&f.gt);
            p.config.adapter = Some(AdapterEndpoint::FirstTokenStub);
        });
        assert_eq!(evaluate(&subs, &f.gt, 0.5, true).unwrap().map_percent, 100.0, "{kind:?}");
    }
}

#[test]
fn adapter_pipeline_without_endpoint_is_a_config_error() {
    let (f, c) = fixture(20, 1);
    let kw = LexiconExtractor::default();
    let p = Pipeline::new(PipelineKind::RecordsAdapter, &kw);
    let err = p.run(&c, &f.questions).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    let empty = Collection::from_parts(f.schema.clone(), Vec::new(), c.raw_records.clone()).unwrap();
    let p = Pipeline::new(PipelineKind::TextspotAdapter, &kw);
    assert!(matches!(p.rank(&empty, &f.questions), Err(Error::Config(_))));
}

#[test]
fn paper_literal_cannot_say_no() {
    let (f, c) = fixture(500, 7);
    let no_questions: Vec<&str> = f
        .gt
        .iter()
        .filter(|g| g.answers.0 == ["No"])
        .map(|g| g.question_id.as_str())
        .collect();
    assert!(!no_questions.is_empty());
    let default = evaluate(&run(PipelineKind::RecordsRecords, &f, &c, |_| {}), &f.gt, 0.5, true).unwrap();
    let literal = evaluate(
        &run(PipelineKind::RecordsRecords, &f, &c, |p| p.config.paper_literal = true),
        &f.gt,
        0.5,
        true,
    )
    .unwrap();
    for q in &no_questions {
        let score = |r: &doccqa::MetricReport| r.per_question.iter().find(|s| s.question_id == *q).unwrap().anlsl;
        assert_eq!(score(&default), 1.0);
        assert_eq!(score(&literal), 0.0);
    }
}

// Plain-loop confidence used as the oracle for the retriever.
fn edit_distance(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur.push(sub.min(prev[j + 1] + 1).min(cur[j] + 1));
        }
        prev = cur;
    }
    prev[b.len()]
}

fn naive_confidence(keywords: &[String], tokens: &[String]) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for k in keywords {
        let k: Vec<char> = k.to_lowercase().chars().collect();
        let best = tokens
            .iter()
            .map(|t| {
                let t: Vec<char> = t.to_lowercase().chars().collect();
                let m = k.len().max(t.len());
                if m == 0 { 0.0 } else { edit_distance(&k, &t) as f64 / m as f64 }
            })
            .fold(f64::INFINITY, f64::min);
        total += best;
    }
    1.0 - total / keywords.len() as f64
}

#[test]
fn textspot_scores_match_naive_loop() {
    let (f, c) = fixture(100, 5);
    let kw = LexiconExtractor::default();
    for q in &f.questions {
        let keys = kw.extract(&q.question_id, &q.text).unwrap();
        let ranking = rank_collection::<f64>(&keys, &c.documents, true).unwrap();
        for r in &ranking {
            let doc = c.document(&r.doc_id).unwrap();
            let tokens: Vec<String> = doc.tokens.iter().map(|t| t.text.clone()).collect();
            let want = naive_confidence(keys.as_slice(), &tokens);
            assert!((r.confidence - want).abs() <= 1e-12, "{} {}: {} vs {want}", q.question_id, r.doc_id, r.confidence);
        }
    }
}

#[test]
fn keyword_overrides_take_precedence() {
    let (f, c) = fixture(30, 5);
    let doc = &c.documents[4];
    let words: Vec<String> = doc.tokens.iter().skip(2).map(|t| t.text.to_lowercase()).collect();
    let q = &f.questions[0];
    let overrides: BTreeMap<String, KeywordSet> =
        [(q.question_id.clone(), KeywordSet::new(&words).unwrap())].into_iter().collect();
    let kw = KeywordOverrides { overrides, fallback: LexiconExtractor::default() };
    let mut p = Pipeline::new(PipelineKind::TextspotAdapter, &kw);
    p.config.adapter = Some(AdapterEndpoint::FirstTokenStub);
    let subs = p.rank(&c, std::slice::from_ref(q)).unwrap();
    assert_eq!(subs[0].ranking[0].doc_id, doc.doc_id);
    assert_eq!(subs[0].ranking[0].confidence, 1.0);
}

fn first_token_reply(req: &AdapterRequest) -> AdapterResponse {
    let answer = req.context.split_whitespace().next().unwrap_or("").to_string();
    let start = req.context[..req.context.find(&answer).unwrap_or(0)].chars().count();
    AdapterResponse {
        id: req.id.clone(),
        end: start + answer.chars().count(),
        answer,
        score: 1.0,
        start,
    }
}

fn compare_with_stub(endpoint: AdapterEndpoint) {
    let (f, c) = fixture(40, 9);
    let kind = PipelineKind::TextspotAdapter;
    let want = run(kind, &f, &c, |p| {
        p.config.theta = 0.5;
        p.config.adapter = Some(AdapterEndpoint::FirstTokenStub);
    });
    let got = run(kind, &f, &c, |p| {
        p.config.theta = 0.5;
        p.config.adapter = Some(endpoint);
    });
    assert_eq!(got, want);
    assert!(got.iter().any(|s| !s.answers.0.is_empty()));
}

const PY_ADAPTER: &str = r#"
import json, sys
for line in sys.stdin:
    if not line.strip():
        continue
    r = json.loads(line)
    toks = r["context"].split()
    a = toks[0] if toks else ""
    s = r["context"].find(a) if a else 0
    print(json.dumps({"id": r["id"], "answer": a, "score": 1.0, "start": s, "end": s + len(a)}), flush=True)
"#;

#[test]
fn stdio_process_adapter() {
    if std::process::Command::new("python3").arg("--version").output().is_err() {
        eprintln!("python3 not available; skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let script: PathBuf = dir.path().join("adapter.py");
    std::fs::write(&script, PY_ADAPTER).unwrap();
    compare_with_stub(AdapterEndpoint::parse(&format!("stdio:python3 {}", script.display())).unwrap());
}

#[test]
fn process_adapter_that_dies_reports_failure() {
    let (f, c) = fixture(20, 9);
    let kw = LexiconExtractor::default();
    let mut p = Pipeline::new(PipelineKind::TextspotAdapter, &kw);
    p.config.theta = 0.0;
    p.config.adapter = Some(AdapterEndpoint::parse("stdio:exit 0").unwrap());
    let err = p.run(&c, &f.questions).unwrap_err();
    assert!(!err.is_validation(), "{err}");
}

fn serve_http(listener: TcpListener) {
    for stream in listener.incoming() {
        let Ok(stream) = stream else { break };
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            stream.set_nodelay(true).unwrap();
            let mut writer = stream;
            loop {
                let mut len = 0usize;
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    return;
                }
                loop {
                    line.clear();
                    reader.read_line(&mut line).unwrap();
                    let l = line.trim_end();
                    if l.is_empty() {
                        break;
                    }
                    if let Some((k, v)) = l.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let req: AdapterRequest = serde_json::from_slice(&body).unwrap();
                let reply = serde_json::to_string(&first_token_reply(&req)).unwrap();
                let response = format!(
                    "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{reply}",
                    reply.len()
                );
                writer.write_all(response.as_bytes()).unwrap();
            }
        });
    }
}

#[test]
fn http_adapter() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/answer", listener.local_addr().unwrap());
    std::thread::spawn(move || serve_http(listener));
    compare_with_stub(AdapterEndpoint::parse(&url).unwrap());
}
