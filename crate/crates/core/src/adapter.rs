//! Wire protocol and client side of the external extractive-QA adapter.
//!
//! Requests are `{id, question, context}` and responses
//! `{id, answer, score, start, end}`, one JSON object per line over a
//! child process's stdio or as a single HTTP POST body. `start`/`end` are
//! char offsets into `context`. An adapter may instead reply
//! `{id, error}` for a request it could not handle.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::context::serialize_context;
use crate::error::{Error, Result};
use crate::metrics::AnswerList;
use crate::similarity::nls;
use crate::textspot::{DocumentOcr, LexiconExtractor};

/// Environment variable consulted when no endpoint is given explicitly.
pub const ADAPTER_ENV: &str = "DOCCQA_ADAPTER";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub id: String,
    pub question: String,
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub id: String,
    pub answer: String,
    pub score: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Deserialize)]
struct ErrorReply {
    id: String,
    error: String,
}

/// Decodes one response line, surfacing `{id, error}` replies as errors.
pub fn decode_response(line: &str) -> Result<AdapterResponse> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| Error::Adapter(format!("malformed response {line:?}: {e}")))?;
    if value.get("error").is_some() {
        let reply: ErrorReply =
            serde_json::from_value(value).map_err(|e| Error::Adapter(format!("malformed error reply: {e}")))?;
        return Err(Error::Adapter(format!("request {} failed: {}", reply.id, reply.error)));
    }
    serde_json::from_value(value).map_err(|e| Error::Adapter(format!("malformed response {line:?}: {e}")))
}

pub fn encode_request(req: &AdapterRequest) -> String {
    serde_json::to_string(req).expect("request serializes")
}

/// One predicted span, validated against the context it was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanAnswer {
    pub text: String,
    pub score: f64,
    pub start_char: usize,
    pub end_char: usize,
}

impl SpanAnswer {
    pub fn from_response(resp: AdapterResponse, context: &str) -> Result<Self> {
        if !resp.score.is_finite() {
            return Err(Error::Adapter(format!("response {} has a non-finite score", resp.id)));
        }
        if resp.end < resp.start {
            return Err(Error::Adapter(format!("response {} has end < start", resp.id)));
        }
        let slice: String = context.chars().skip(resp.start).take(resp.end - resp.start).collect();
        let in_bounds = resp.end <= context.chars().count();
        if !in_bounds || slice != resp.answer {
            return Err(Error::Adapter(format!(
                "response {}: answer {:?} does not match context[{}..{}]",
                resp.id, resp.answer, resp.start, resp.end
            )));
        }
        Ok(SpanAnswer {
            text: resp.answer,
            score: resp.score,
            start_char: resp.start,
            end_char: resp.end,
        })
    }
}

pub trait QaAdapter {
    fn ask(&mut self, request: &AdapterRequest) -> Result<AdapterResponse>;
}

impl<A: QaAdapter + ?Sized> QaAdapter for Box<A> {
    fn ask(&mut self, request: &AdapterRequest) -> Result<AdapterResponse> {
        (**self).ask(request)
    }
}

fn check_id(req: &AdapterRequest, resp: AdapterResponse) -> Result<AdapterResponse> {
    if resp.id != req.id {
        return Err(Error::Adapter(format!(
            "response id {:?} does not match request id {:?}",
            resp.id, req.id
        )));
    }
    Ok(resp)
}

/// Newline-delimited JSON over an arbitrary reader/writer pair.
pub struct LineAdapter<R, W> {
    reader: R,
    writer: W,
}

impl<R: BufRead, W: Write> LineAdapter<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        LineAdapter { reader, writer }
    }
}

impl<R: BufRead, W: Write> QaAdapter for LineAdapter<R, W> {
    fn ask(&mut self, request: &AdapterRequest) -> Result<AdapterResponse> {
        let io = |e: std::io::Error| Error::Adapter(e.to_string());
        writeln!(self.writer, "{}", encode_request(request)).map_err(io)?;
        self.writer.flush().map_err(io)?;
        let mut line = String::new();
        if self.reader.read_line(&mut line).map_err(io)? == 0 {
            return Err(Error::Adapter("adapter closed its output".into()));
        }
        check_id(request, decode_response(line.trim_end())?)
    }
}

/// Child process speaking the line protocol on stdin/stdout.
pub struct ProcessAdapter {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    pub timeout: Duration,
}

impl ProcessAdapter {
    /// Runs `command` through `sh -c`.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Adapter(format!("cannot start adapter {command:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ProcessAdapter {
            child,
            stdin,
            lines: rx,
            timeout: DEFAULT_TIMEOUT,
        })
    }
}

impl QaAdapter for ProcessAdapter {
    fn ask(&mut self, request: &AdapterRequest) -> Result<AdapterResponse> {
        let io = |e: std::io::Error| Error::Adapter(e.to_string());
        writeln!(self.stdin, "{}", encode_request(request)).map_err(io)?;
        self.stdin.flush().map_err(io)?;
        loop {
            match self.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return check_id(request, decode_response(line.trim_end())?),
                Ok(Err(e)) => return Err(io(e)),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Error::Adapter(format!("request {} timed out", request.id)))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Adapter("adapter process exited".into()))
                }
            }
        }
    }
}

impl Drop for ProcessAdapter {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// One POST per request to a single HTTP endpoint.
pub struct HttpAdapter {
    url: String,
    agent: ureq::Agent,
}

impl HttpAdapter {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpAdapter {
            url: url.into(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
        }
    }
}

impl QaAdapter for HttpAdapter {
    fn ask(&mut self, request: &AdapterRequest) -> Result<AdapterResponse> {
        let body = self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json")
            .send_string(&encode_request(request))
            .map_err(|e| Error::Adapter(format!("POST {}: {e}", self.url)))?
            .into_string()
            .map_err(|e| Error::Adapter(e.to_string()))?;
        check_id(request, decode_response(body.trim())?)
    }
}

fn token_spans(context: &str) -> Vec<(usize, usize, &str)> {
    let mut spans = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut char_idx = 0;
    for (byte, ch) in context.char_indices() {
        if ch.is_whitespace() {
            if let Some((cs, bs)) = start.take() {
                spans.push((cs, char_idx, &context[bs..byte]));
            }
        } else if start.is_none() {
            start = Some((char_idx, byte));
        }
        char_idx += 1;
    }
    if let Some((cs, bs)) = start {
        spans.push((cs, char_idx, &context[bs..]));
    }
    spans
}

/// Answers with the first whitespace token of the context.
#[derive(Debug, Default, Clone)]
pub struct FirstTokenStub;

impl QaAdapter for FirstTokenStub {
    fn ask(&mut self, request: &AdapterRequest) -> Result<AdapterResponse> {
        let (start, end, text) = token_spans(&request.context).into_iter().next().unwrap_or((0, 0, ""));
        Ok(AdapterResponse {
            id: request.id.clone(),
            answer: text.to_string(),
            score: 1.0,
            start,
            end,
        })
    }
}

/// Answers with the context token most similar (case-folded NLS) to the
/// question's last keyword; the score is that similarity.
#[derive(Debug, Default, Clone)]
pub struct KeywordStub {
    extractor: LexiconExtractor,
}

impl QaAdapter for KeywordStub {
    fn ask(&mut self, request: &AdapterRequest) -> Result<AdapterResponse> {
        let keywords = self.extractor.extract_text(&request.question)?;
        let last = keywords.as_slice().last().expect("keyword sets are non-empty");
        let mut best: Option<(f64, usize, usize, &str)> = None;
        for (start, end, text) in token_spans(&request.context) {
            let s: f64 = nls(last, text, true);
            if best.is_none_or(|(b, ..)| s > b) {
                best = Some((s, start, end, text));
            }
        }
        let (score, start, end, text) = best.unwrap_or((0.0, 0, 0, ""));
        Ok(AdapterResponse {
            id: request.id.clone(),
            answer: text.to_string(),
            score,
            start,
            end,
        })
    }
}

/// Where to reach an adapter, parsed from a CLI flag or environment value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdapterEndpoint {
    /// `stub` / `stub:keyword`
    KeywordStub,
    /// `stub:first`
    FirstTokenStub,
    /// `http://...` or `https://...`
    Http(String),
    /// `stdio:<command>` or any other string, run as a shell command.
    Process(String),
}

impl AdapterEndpoint {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Config("empty adapter endpoint".into()));
        }
        Ok(match s {
            "stub" | "stub:keyword" => AdapterEndpoint::KeywordStub,
            "stub:first" => AdapterEndpoint::FirstTokenStub,
            _ if s.starts_with("http://") || s.starts_with("https://") => AdapterEndpoint::Http(s.into()),
            _ => AdapterEndpoint::Process(s.strip_prefix("stdio:").unwrap_or(s).into()),
        })
    }

    pub fn connect(&self, timeout: Duration) -> Result<Box<dyn QaAdapter>> {
        Ok(match self {
            AdapterEndpoint::KeywordStub => Box::new(KeywordStub::default()),
            AdapterEndpoint::FirstTokenStub => Box::new(FirstTokenStub),
            AdapterEndpoint::Http(url) => Box::new(HttpAdapter::new(url.clone(), timeout)),
            AdapterEndpoint::Process(cmd) => {
                let mut p = ProcessAdapter::spawn(cmd)?;
                p.timeout = timeout;
                Box::new(p)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocFailure {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdapterAnswers {
    pub answers: AnswerList,
    pub failures: Vec<DocFailure>,
}

/// Asks the adapter about every relevant document, in the order given,
/// and merges the best span of each into one deduplicated answer list
/// ordered by adapter score (ties keep document order).
///
/// A document whose request fails is recorded and skipped; the call only
/// fails when every relevant document failed.
pub fn answer_documents(
    question_id: &str,
    question: &str,
    docs: &[&DocumentOcr],
    relevant: &BTreeSet<String>,
    adapter: &mut dyn QaAdapter,
    line_tolerance: f64,
) -> Result<AdapterAnswers> {
    let mut spans: Vec<SpanAnswer> = Vec::new();
    let mut failures = Vec::new();
    let mut asked = 0usize;
    for doc in docs.iter().filter(|d| relevant.contains(&d.doc_id)) {
        asked += 1;
        let context = serialize_context(doc, line_tolerance);
        let request = AdapterRequest {
            id: format!("{question_id}/{}", doc.doc_id),
            question: question.to_string(),
            context,
        };
        match adapter
            .ask(&request)
            .and_then(|resp| SpanAnswer::from_response(resp, &request.context))
        {
            Ok(span) => spans.push(span),
            Err(e) => {
                log::warn!("question {question_id}, document {}: {e}", doc.doc_id);
                failures.push(DocFailure {
                    doc_id: doc.doc_id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    if asked > 0 && failures.len() == asked {
        return Err(Error::Adapter(format!(
            "all {asked} documents failed for question {question_id}; first: {}",
            failures[0].reason
        )));
    }
    spans.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut seen = BTreeSet::new();
    let answers = spans
        .into_iter()
        .filter(|s| !s.text.is_empty() && seen.insert(s.text.clone()))
        .map(|s| s.text)
        .collect();
    Ok(AdapterAnswers { answers, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textspot::{BBox, Token};
    use proptest::prelude::*;
    use std::io::Cursor;

    fn doc(id: &str, words: &[&str]) -> DocumentOcr {
        DocumentOcr::new(
            id,
            words
                .iter()
                .enumerate()
                .map(|(i, w)| Token::new(*w, BBox::new(i as f64 * 20.0, 0.0, i as f64 * 20.0 + 15.0, 10.0)))
                .collect(),
        )
    }

    fn ids(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn no_relevant_documents() {
        let d = doc("1", &["a"]);
        let out = answer_documents("q", "who?", &[&d], &ids(&[]), &mut FirstTokenStub, 0.5).unwrap();
        assert!(out.answers.is_empty() && out.failures.is_empty());
    }

    #[test]
    fn first_token_stub_per_document() {
        let a = doc("1", &["Seattle", "WA"]);
        let b = doc("2", &["Tacoma", "WA"]);
        let c = doc("3", &["Seattle"]);
        let skip = doc("4", &["Spokane"]);
        let out = answer_documents("q", "where?", &[&a, &b, &c, &skip], &ids(&["1", "2", "3"]), &mut FirstTokenStub, 0.5)
            .unwrap();
        assert_eq!(out.answers, AnswerList::new(["Seattle", "Tacoma"]));
    }

    #[test]
    fn keyword_stub_rule() {
        let mut stub = KeywordStub::default();
        let resp = stub
            .ask(&AdapterRequest {
                id: "x".into(),
                question: "Which election year?".into(),
                context: "elections 2016 november years".into(),
            })
            .unwrap();
        assert_eq!(resp.answer, "years");
        assert_eq!((resp.start, resp.end), (24, 29));
        assert!((resp.score - 0.8).abs() < 1e-12);
    }

    struct Flaky {
        fail_on: &'static str,
    }

    impl QaAdapter for Flaky {
        fn ask(&mut self, r: &AdapterRequest) -> Result<AdapterResponse> {
            if r.id.ends_with(self.fail_on) {
                return Err(Error::Adapter("timeout".into()));
            }
            FirstTokenStub.ask(r)
        }
    }

    #[test]
    fn partial_and_total_failure() {
        let a = doc("1", &["x"]);
        let b = doc("2", &["y"]);
        let out = answer_documents("q", "?", &[&a, &b], &ids(&["1", "2"]), &mut Flaky { fail_on: "/2" }, 0.5).unwrap();
        assert_eq!(out.answers, AnswerList::new(["x"]));
        assert_eq!(out.failures.len(), 1);
        assert!(answer_documents("q", "?", &[&b], &ids(&["2"]), &mut Flaky { fail_on: "/2" }, 0.5).is_err());
    }

    #[test]
    fn rejects_spans_outside_context() {
        let resp = AdapterResponse {
            id: "a".into(),
            answer: "abc".into(),
            score: 1.0,
            start: 0,
            end: 3,
        };
        assert!(SpanAnswer::from_response(resp.clone(), "abx").is_err());
        assert!(SpanAnswer::from_response(resp.clone(), "ab").is_err());
        assert!(SpanAnswer::from_response(resp, "abcd").is_ok());
    }

    #[test]
    fn line_transport_round_trip() {
        let reply = "{\"id\":\"q/1\",\"answer\":\"hi\",\"score\":0.5,\"start\":0,\"end\":2}\n";
        let mut sent = Vec::new();
        let mut a = LineAdapter::new(Cursor::new(reply.as_bytes()), &mut sent);
        let req = AdapterRequest {
            id: "q/1".into(),
            question: "?".into(),
            context: "hi there".into(),
        };
        assert_eq!(a.ask(&req).unwrap().answer, "hi");
        assert!(a.ask(&req).is_err());
        let written = String::from_utf8(sent).unwrap();
        assert!(written.starts_with("{\"id\":\"q/1\",\"question\":\"?\",\"context\":\"hi there\"}\n"));
    }

    #[test]
    fn mismatched_id_and_error_replies() {
        let req = AdapterRequest {
            id: "q/1".into(),
            question: "?".into(),
            context: "c".into(),
        };
        let mut a = LineAdapter::new(Cursor::new(&b"{\"id\":\"q/2\",\"answer\":\"c\",\"score\":1,\"start\":0,\"end\":1}\n"[..]), Vec::new());
        assert!(a.ask(&req).is_err());
        let mut a = LineAdapter::new(Cursor::new(&b"{\"id\":\"q/1\",\"error\":\"missing context\"}\n"[..]), Vec::new());
        assert!(matches!(a.ask(&req), Err(Error::Adapter(m)) if m.contains("missing context")));
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!(AdapterEndpoint::parse("stub").unwrap(), AdapterEndpoint::KeywordStub);
        assert_eq!(AdapterEndpoint::parse("stub:first").unwrap(), AdapterEndpoint::FirstTokenStub);
        assert_eq!(
            AdapterEndpoint::parse("http://localhost:8000/qa").unwrap(),
            AdapterEndpoint::Http("http://localhost:8000/qa".into())
        );
        assert_eq!(
            AdapterEndpoint::parse("stdio:python serve.py --stdio").unwrap(),
            AdapterEndpoint::Process("python serve.py --stdio".into())
        );
        assert!(AdapterEndpoint::parse(" ").is_err());
    }

    #[test]
    fn token_spans_use_char_offsets() {
        let spans = token_spans("  é b  cd ");
        assert_eq!(spans, vec![(2, 3, "é"), (4, 5, "b"), (7, 9, "cd")]);
    }

    proptest! {
        #[test]
        fn protocol_round_trip(
            id in "\\PC{0,20}",
            question in "\\PC{0,40}",
            context in "\\PC{0,80}",
            answer in "\\PC{0,20}",
            score in -1e6f64..1e6,
            start in 0usize..1000,
            len in 0usize..100,
        ) {
            let req = AdapterRequest { id: id.clone(), question, context };
            let back: AdapterRequest = serde_json::from_str(&encode_request(&req)).unwrap();
            prop_assert_eq!(back, req);
            let resp = AdapterResponse { id, answer, score, start, end: start + len };
            let line = serde_json::to_string(&resp).unwrap();
            prop_assert!(!line.contains('\n'));
            prop_assert_eq!(decode_response(&line).unwrap(), resp);
        }
    }
}
