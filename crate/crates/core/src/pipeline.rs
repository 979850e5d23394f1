//! Retrieval + answering pipelines over a loaded collection.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;

use crate::adapter::{answer_documents, AdapterEndpoint, QaAdapter, DEFAULT_TIMEOUT};
use crate::context::DEFAULT_LINE_TOLERANCE;
use crate::dataset::{Collection, GroundTruthEntry, Question, Submission};
use crate::error::{Error, Result};
use crate::metrics::{sort_ranking, AnswerList, RankedDoc};
use crate::records::{MissingFieldPolicy, QueryEngine, RecordDoc};
use crate::textspot::{rank_collection, threshold_relevant, KeywordExtractor, DEFAULT_THETA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retriever {
    Textspot,
    Records,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answerer {
    Adapter,
    Records,
}

/// The retriever/answerer combinations that can be run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    TextspotAdapter,
    RecordsAdapter,
    RecordsRecords,
}

impl PipelineKind {
    pub fn retriever(self) -> Retriever {
        match self {
            PipelineKind::TextspotAdapter => Retriever::Textspot,
            PipelineKind::RecordsAdapter | PipelineKind::RecordsRecords => Retriever::Records,
        }
    }

    pub fn answerer(self) -> Answerer {
        match self {
            PipelineKind::TextspotAdapter | PipelineKind::RecordsAdapter => Answerer::Adapter,
            PipelineKind::RecordsRecords => Answerer::Records,
        }
    }
}

impl FromStr for PipelineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('+', "-").as_str() {
            "textspot-adapter" => Ok(PipelineKind::TextspotAdapter),
            "records-adapter" => Ok(PipelineKind::RecordsAdapter),
            "records-records" => Ok(PipelineKind::RecordsRecords),
            _ => Err(Error::Config(format!(
                "unknown pipeline {s:?}; expected textspot-adapter, records-adapter or records-records"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Text-spotting relevance threshold (strict `>`).
    pub theta: f64,
    pub case_fold: bool,
    pub paper_literal: bool,
    pub missing: MissingFieldPolicy,
    pub line_tolerance: f64,
    pub adapter: Option<AdapterEndpoint>,
    pub adapter_timeout: Duration,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            theta: DEFAULT_THETA,
            case_fold: true,
            paper_literal: false,
            missing: MissingFieldPolicy::Lenient,
            line_tolerance: DEFAULT_LINE_TOLERANCE,
            adapter: None,
            adapter_timeout: DEFAULT_TIMEOUT,
        }
    }
}

pub struct Pipeline<'a> {
    pub kind: PipelineKind,
    pub config: PipelineConfig,
    pub keywords: &'a dyn KeywordExtractor,
    /// When set, rankings come from ground-truth evidence instead of the
    /// retriever (upper-bound runs for the answerer).
    pub ground_truth: Option<&'a [GroundTruthEntry]>,
}

struct Retrieved {
    ranking: Vec<RankedDoc<f64>>,
    relevant: BTreeSet<String>,
}

impl<'a> Pipeline<'a> {
    pub fn new(kind: PipelineKind, keywords: &'a dyn KeywordExtractor) -> Self {
        Pipeline {
            kind,
            config: PipelineConfig::default(),
            keywords,
            ground_truth: None,
        }
    }

    fn check_inputs(&self, collection: &Collection, retrieving: bool, answering: bool) -> Result<()> {
        let mut missing = Vec::new();
        if !self.config.theta.is_finite() {
            missing.push("a finite theta".to_string());
        }
        if retrieving && self.ground_truth.is_none() {
            match self.kind.retriever() {
                Retriever::Textspot if collection.documents.is_empty() => missing.push("OCR documents".into()),
                Retriever::Records if collection.records.is_empty() => missing.push("records".into()),
                _ => {}
            }
        }
        match self.kind.answerer() {
            _ if !answering => {}
            Answerer::Adapter => {
                if collection.documents.is_empty() {
                    missing.push("OCR documents".into());
                }
                if self.config.adapter.is_none() {
                    missing.push("an adapter endpoint".into());
                }
            }
            Answerer::Records if collection.records.is_empty() => missing.push("records".into()),
            Answerer::Records => {}
        }
        missing.dedup();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("{:?} pipeline needs {}", self.kind, missing.join(", "))))
        }
    }

    fn retrieve(&self, collection: &Collection, engine: &QueryEngine<'_>, q: &Question, gt: Option<&GroundTruthEntry>) -> Result<Retrieved> {
        if self.ground_truth.is_some() {
            let gt = gt.ok_or_else(|| Error::validation(format!("no ground truth for question {}", q.question_id)))?;
            let mut ranking: Vec<RankedDoc<f64>> = collection
                .doc_ids()
                .into_iter()
                .map(|id| RankedDoc::new(id, if gt.relevant.contains(id) { 1.0 } else { 0.0 }))
                .collect();
            sort_ranking(&mut ranking);
            return Ok(Retrieved {
                ranking,
                relevant: gt.relevant.clone(),
            });
        }
        match self.kind.retriever() {
            Retriever::Textspot => {
                let keywords = self.keywords.extract(&q.question_id, &q.text)?;
                let ranking = rank_collection(&keywords, &collection.documents, self.config.case_fold)?;
                let relevant = threshold_relevant(&ranking, self.config.theta);
                Ok(Retrieved { ranking, relevant })
            }
            Retriever::Records => {
                let ranking = engine.query_collection::<f64>(&q.query, &collection.records)?;
                let relevant = ranking
                    .iter()
                    .filter(|d| d.confidence >= 1.0)
                    .map(|d| d.doc_id.clone())
                    .collect();
                Ok(Retrieved { ranking, relevant })
            }
        }
    }

    fn answer_from_records(&self, collection: &Collection, engine: &QueryEngine<'_>, q: &Question, r: &Retrieved) -> Result<AnswerList> {
        let relevant: Vec<&RecordDoc> = collection
            .records
            .iter()
            .filter(|rec| r.relevant.contains(&rec.doc_id))
            .collect();
        engine.extract_answers(&q.query, &relevant)
    }

    fn answer_from_adapter(&self, collection: &Collection, adapter: &mut dyn QaAdapter, q: &Question, r: &Retrieved) -> Result<AnswerList> {
        let docs: Vec<_> = r
            .ranking
            .iter()
            .filter(|d| r.relevant.contains(&d.doc_id))
            .filter_map(|d| collection.document(&d.doc_id))
            .collect();
        let out = answer_documents(&q.question_id, &q.text, &docs, &r.relevant, adapter, self.config.line_tolerance)?;
        Ok(out.answers)
    }

    fn engine<'c>(&self, collection: &'c Collection) -> QueryEngine<'c> {
        let mut engine = QueryEngine::new(&collection.schema);
        engine.missing = self.config.missing;
        engine.paper_literal = self.config.paper_literal;
        engine
    }

    fn retrieve_all(&self, collection: &Collection, engine: &QueryEngine<'_>, questions: &[Question]) -> Result<Vec<Retrieved>> {
        let gt_by_id: BTreeMap<&str, &GroundTruthEntry> = self
            .ground_truth
            .unwrap_or_default()
            .iter()
            .map(|g| (g.question_id.as_str(), g))
            .collect();
        questions
            .par_iter()
            .map(|q| self.retrieve(collection, engine, q, gt_by_id.get(q.question_id.as_str()).copied()))
            .collect()
    }

    fn answer_all(&self, collection: &Collection, engine: &QueryEngine<'_>, questions: &[Question], retrieved: &[Retrieved]) -> Result<Vec<AnswerList>> {
        match self.kind.answerer() {
            Answerer::Records => questions
                .par_iter()
                .zip(retrieved)
                .map(|(q, r)| self.answer_from_records(collection, engine, q, r))
                .collect(),
            Answerer::Adapter => {
                let endpoint = self.config.adapter.as_ref().expect("checked by check_inputs");
                let mut adapter = endpoint.connect(self.config.adapter_timeout)?;
                questions
                    .iter()
                    .zip(retrieved)
                    .map(|(q, r)| {
                        if r.relevant.is_empty() {
                            Ok(AnswerList::default())
                        } else {
                            self.answer_from_adapter(collection, adapter.as_mut(), q, r)
                        }
                    })
                    .collect()
            }
        }
    }

    /// Rankings only; every submission has an empty answer list.
    pub fn rank(&self, collection: &Collection, questions: &[Question]) -> Result<Vec<Submission>> {
        self.check_inputs(collection, true, false)?;
        let engine = self.engine(collection);
        Ok(questions
            .iter()
            .zip(self.retrieve_all(collection, &engine, questions)?)
            .map(|(q, r)| Submission {
                question_id: q.question_id.clone(),
                answers: AnswerList::default(),
                ranking: r.ranking,
            })
            .collect())
    }

    /// Answers questions from existing rankings. Documents with
    /// confidence above `theta` are treated as relevant.
    pub fn answer(&self, collection: &Collection, questions: &[Question], rankings: &[Submission]) -> Result<Vec<Submission>> {
        self.check_inputs(collection, false, true)?;
        let by_id: BTreeMap<&str, &Submission> = rankings.iter().map(|s| (s.question_id.as_str(), s)).collect();
        let retrieved: Vec<Retrieved> = questions
            .iter()
            .map(|q| {
                let s = by_id
                    .get(q.question_id.as_str())
                    .ok_or_else(|| Error::validation(format!("no ranking for question {}", q.question_id)))?;
                let mut ranking = s.ranking.clone();
                sort_ranking(&mut ranking);
                let relevant = threshold_relevant(&ranking, self.config.theta);
                Ok(Retrieved { ranking, relevant })
            })
            .collect::<Result<_>>()?;
        let engine = self.engine(collection);
        let answers = self.answer_all(collection, &engine, questions, &retrieved)?;
        Ok(questions
            .iter()
            .zip(retrieved)
            .zip(answers)
            .map(|((q, r), answers)| Submission {
                question_id: q.question_id.clone(),
                answers,
                ranking: r.ranking,
            })
            .collect())
    }

    /// Retrieval then answering; one submission per question, in
    /// question order.
    pub fn run(&self, collection: &Collection, questions: &[Question]) -> Result<Vec<Submission>> {
        self.check_inputs(collection, true, true)?;
        let engine = self.engine(collection);
        let retrieved = self.retrieve_all(collection, &engine, questions)?;
        let answers = self.answer_all(collection, &engine, questions, &retrieved)?;
        Ok(questions
            .iter()
            .zip(retrieved)
            .zip(answers)
            .map(|((q, r), answers)| Submission {
                question_id: q.question_id.clone(),
                answers,
                ranking: r.ranking,
            })
            .collect())
    }
}
