//! Request and response bodies shared by the HTTP service and the CLI,
//! plus query compilation with the error classification both report.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::DocumentMeta;
use crate::index::Index;
use crate::matching::{EvalConfig, Match, MatchStream, Mode, Prepared, Query, Span};
use crate::qbe::{compile_markup, ParseProvider, QbeError};
use crate::results::{aggregate_by_capture, FrequencyTable};
use crate::query::{parse_boolean, parse_context, parse_sequential, Element, ParseError};

pub const MAX_LIMIT: usize = 1000;

fn default_limit() -> usize {
    20
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpandContext {
    pub title: bool,
    pub paragraph: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub mode: Mode,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default = "default_limit")]
    pub limit: usize,
    #[serde(default)]
    pub offset: usize,
    #[serde(default)]
    pub expand_context: ExpandContext,
}

impl QueryRequest {
    pub fn new(mode: Mode, query: impl Into<String>) -> Self {
        QueryRequest {
            mode,
            query: query.into(),
            context: None,
            limit: default_limit(),
            offset: 0,
            expand_context: ExpandContext::default(),
        }
    }

    pub fn validate(&self) -> Result<(), QueryError> {
        if !(1..=MAX_LIMIT).contains(&self.limit) {
            return Err(QueryError::semantic("bad_limit", format!("limit must be between 1 and {MAX_LIMIT}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateRequest {
    #[serde(flatten)]
    pub request: QueryRequest,
    pub capture: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconRequest {
    pub lexicon: Vec<String>,
    pub type_name: String,
}

/// Where a parse error was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSource {
    Query,
    Context,
}

impl ErrorSource {
    pub fn name(self) -> &'static str {
        match self {
            ErrorSource::Query => "query",
            ErrorSource::Context => "context",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("{} parse error {error}", origin.name())]
    Parse { origin: ErrorSource, error: ParseError },
    #[error("{message}")]
    Semantic { code: &'static str, message: String },
}

impl QueryError {
    pub fn semantic(code: &'static str, message: impl Into<String>) -> Self {
        QueryError::Semantic { code, message: message.into() }
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self {
            QueryError::Parse { .. } => 400,
            QueryError::Semantic { .. } => 422,
        }
    }

    pub fn body(&self) -> ErrorBody {
        let error = match self {
            QueryError::Parse { origin, error } => ErrorDetail {
                kind: "parse".into(),
                code: error.code.as_str().into(),
                message: error.message.clone(),
                offset: Some(error.offset),
                source: Some(*origin),
            },
            QueryError::Semantic { code, message } => ErrorDetail {
                kind: "semantic".into(),
                code: (*code).into(),
                message: message.clone(),
                offset: None,
                source: None,
            },
        };
        ErrorBody { error }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub kind: String,
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<ErrorSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

impl ErrorBody {
    pub fn simple(kind: &str, code: &str, message: impl Into<String>) -> Self {
        ErrorBody {
            error: ErrorDetail { kind: kind.into(), code: code.into(), message: message.into(), offset: None, source: None },
        }
    }
}

fn qbe_code(e: &QbeError) -> &'static str {
    match e {
        QbeError::Markup(_) => "markup",
        QbeError::Provider(_) => "parse_provider",
        QbeError::MissingField { .. } => "missing_field",
        QbeError::Unalignable(_) => "unalignable",
        QbeError::SharedToken(..) => "shared_token",
        QbeError::TextMismatch => "text_mismatch",
        QbeError::Disconnected => "disconnected",
        QbeError::Invalid(_) => "invalid_graph",
    }
}

/// Parses a query in the given mode and attaches a separately supplied
/// context. Syntactic queries need a parse provider for the example.
pub fn compile_query(
    mode: Mode,
    text: &str,
    context: Option<&str>,
    provider: Option<&dyn ParseProvider>,
) -> Result<Query, QueryError> {
    let in_query = |error| QueryError::Parse { origin: ErrorSource::Query, error };
    let mut query = match mode {
        Mode::Boolean => Query::Boolean(parse_boolean(text).map_err(in_query)?),
        Mode::Sequential => Query::Sequential(parse_sequential(text).map_err(in_query)?),
        Mode::Syntactic => {
            let provider = provider.ok_or_else(|| {
                QueryError::semantic("no_parse_provider", "syntactic queries need a parse provider")
            })?;
            match compile_markup(text, provider) {
                Ok(g) => Query::Syntactic(g),
                Err(QbeError::Markup(error)) => return Err(in_query(error)),
                Err(e) => return Err(QueryError::semantic(qbe_code(&e), e.to_string())),
            }
        }
    };
    if let Some(ctx) = context.filter(|c| !c.trim().is_empty()) {
        if query.context().is_some() {
            return Err(QueryError::semantic(
                "duplicate_context",
                "context given both inline after `#d` and as a separate field",
            ));
        }
        let parsed = parse_context(ctx).map_err(|error| QueryError::Parse { origin: ErrorSource::Context, error })?;
        *query.context_mut() = Some(parsed);
    }
    Ok(query)
}

pub fn prepare(query: &Query) -> Result<Prepared, QueryError> {
    Prepared::new(query).map_err(|e| QueryError::semantic("invalid_query", e.to_string()))
}

/// Compiles a request and opens a match stream over the index.
pub fn open_stream<'a>(
    index: &'a Index,
    request: &QueryRequest,
    provider: Option<&dyn ParseProvider>,
    config: &EvalConfig,
) -> Result<(Query, MatchStream<'a>), QueryError> {
    let query = compile_query(request.mode, &request.query, request.context.as_deref(), provider)?;
    let prepared = prepare(&query)?;
    Ok((query, MatchStream::new(index, prepared, config.clone())))
}

/// Names of captures that are widened by expansion.
pub fn expanded_captures(query: &Query) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    match query {
        Query::Boolean(q) => {
            out.extend(q.terms.iter().filter(|t| t.expand).filter_map(|t| t.capture.clone()));
        }
        Query::Sequential(q) => {
            for e in &q.elements {
                if let Element::Term(t) = e {
                    if t.expand {
                        out.extend(t.capture.clone());
                    }
                }
            }
        }
        Query::Syntactic(g) => {
            out.extend(g.nodes.iter().filter(|n| n.expand).filter_map(|n| n.capture.clone()));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub capture: String,
    pub char_start: usize,
    pub char_end: usize,
    pub expanded: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocExcerpt {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<u32>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub venue: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paragraph: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    pub sent_id: String,
    pub paragraph_id: String,
    pub sentence: String,
    pub captures: BTreeMap<String, Span>,
    /// Capture spans in character offsets, ordered by start.
    pub highlights: Vec<Highlight>,
    pub doc: DocExcerpt,
}

impl Hit {
    pub fn new(index: &Index, m: Match, expanded: &BTreeSet<String>, expand_context: ExpandContext) -> Self {
        let sentence = index.sentence(m.sentence.ordinal);
        let meta: Option<&DocumentMeta> = index.document(&sentence.doc_id);
        let mut highlights: Vec<Highlight> = m
            .captures
            .iter()
            .map(|(name, s)| Highlight {
                capture: name.clone(),
                char_start: s.char_start,
                char_end: s.char_end,
                expanded: expanded.contains(name),
            })
            .collect();
        highlights.sort_by(|a, b| (a.char_start, a.char_end, &a.capture).cmp(&(b.char_start, b.char_end, &b.capture)));
        let doc = DocExcerpt {
            year: meta.and_then(|d| d.year),
            venue: meta.map(|d| d.venue.clone()).unwrap_or_default(),
            title: meta.filter(|_| expand_context.title).map(|d| d.title.clone()),
            paragraph: meta
                .filter(|_| expand_context.paragraph)
                .and_then(|d| d.paragraphs.get(&sentence.paragraph_id).cloned()),
        };
        Hit {
            doc_id: sentence.doc_id.clone(),
            sent_id: sentence.sent_id.clone(),
            paragraph_id: sentence.paragraph_id.clone(),
            sentence: sentence.text.clone(),
            captures: m.captures,
            highlights,
            doc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceId {
    pub doc_id: String,
    pub sent_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub index_version: String,
    pub mode: Mode,
    pub capture_names: Vec<String>,
    /// Number of matches over the whole index.
    pub total: usize,
    pub matched_sentences: usize,
    pub candidates: usize,
    pub offset: usize,
    pub limit: usize,
    /// Whether some sentence had more matches than the per-sentence cap.
    pub truncated: bool,
    pub truncated_sentences: Vec<SentenceId>,
    pub hits: Vec<Hit>,
}

/// Runs a request to completion and returns the requested page.
pub fn run_query(
    index: &Index,
    request: &QueryRequest,
    provider: Option<&dyn ParseProvider>,
    config: &EvalConfig,
) -> Result<QueryResponse, QueryError> {
    request.validate()?;
    let (query, mut stream) = open_stream(index, request, provider, config)?;
    let expanded = expanded_captures(&query);
    let mut total = 0;
    let mut page = Vec::new();
    for m in stream.by_ref() {
        if total >= request.offset && page.len() < request.limit {
            page.push(m);
        }
        total += 1;
    }
    let truncated_sentences: Vec<SentenceId> = stream
        .truncated()
        .iter()
        .map(|&o| {
            let s = index.sentence(o);
            SentenceId { doc_id: s.doc_id.clone(), sent_id: s.sent_id.clone() }
        })
        .collect();
    Ok(QueryResponse {
        index_version: index.version().to_string(),
        mode: request.mode,
        capture_names: stream.capture_names().to_vec(),
        total,
        matched_sentences: stream.matched_sentences(),
        candidates: stream.candidate_count(),
        offset: request.offset,
        limit: request.limit,
        truncated: !truncated_sentences.is_empty(),
        truncated_sentences,
        hits: page.into_iter().map(|m| Hit::new(index, m, &expanded, request.expand_context)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateResponse {
    pub index_version: String,
    #[serde(flatten)]
    pub table: FrequencyTable,
}

/// Runs a request without paging and groups its matches by one capture.
pub fn run_aggregate(
    index: &Index,
    request: &AggregateRequest,
    provider: Option<&dyn ParseProvider>,
    config: &EvalConfig,
) -> Result<AggregateResponse, QueryError> {
    let (_, stream) = open_stream(index, &request.request, provider, config)?;
    if !stream.capture_names().contains(&request.capture) {
        return Err(QueryError::semantic(
            "unknown_capture",
            format!("query has no capture named `{}`", request.capture),
        ));
    }
    let matches: Vec<Match> = stream.collect();
    Ok(AggregateResponse {
        index_version: index.version().to_string(),
        table: aggregate_by_capture(&matches, &request.capture),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: u64,
    pub state: JobState,
    pub type_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Version of the rebuilt index once the job is done.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusResponse {
    pub ready: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index_version: Option<String>,
    pub sentences: usize,
    pub documents: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub job: Option<JobStatus>,
}
