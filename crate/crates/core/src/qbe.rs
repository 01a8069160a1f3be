//! Query by example: marked-up example sentences compiled into dependency
//! query graphs.
//!
//! Markup is applied per whitespace-separated word:
//!
//! * `$word` marks an anchor, matched by its exact word form unless a
//!   restriction says otherwise. A lone `$` marks the word after it.
//! * `name:word` (or `:word` for an automatic name) marks a capture,
//!   optionally preceded by `<>` to expand it at match time.
//! * `[f]` right after an anchor or capture prefix infers a constraint on
//!   field `f` from the example token (`[e]`, `[l]`, `[t]`, `[w]` or the long
//!   field names); `[lemma=cause|reason]` restricts it explicitly.
//! * Anything else is scaffold: it shapes the graph through the example
//!   parse but is otherwise unconstrained.
//!
//! A standalone `#d` starts a contextual restriction, as in the other
//! query languages.
//!
//! Compilation asks a [`ParseProvider`] for a dependency parse of the plain
//! sentence, aligns marked words to tokens, and keeps the smallest subtree of
//! the basic tree that connects every marked token.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_sentences, AnnotatedSentence, CorpusError, Record, SentenceError, Token};
use crate::query::parser::{parse_context_at, parse_term_constraint_at};
use crate::query::{ContextQuery, ErrorCode, Field, FieldConstraint, ParseError, TermConstraint};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Restriction {
    /// Copy the example token's value for this field.
    Infer(Field),
    Constraint(TermConstraint),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Mark {
    Scaffold,
    Anchor { restriction: Option<Restriction> },
    Capture { name: String, expand: bool, restriction: Option<Restriction> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedWord {
    pub text: String,
    /// Character range of the word within [`MarkedSentence::plain_text`].
    pub char_start: usize,
    pub char_end: usize,
    pub mark: Mark,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkedSentence {
    pub plain_text: String,
    pub words: Vec<MarkedWord>,
    pub context: Option<ContextQuery>,
}

impl MarkedSentence {
    pub fn capture_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .words
            .iter()
            .filter_map(|w| match &w.mark {
                Mark::Capture { name, .. } => Some(name.as_str()),
                _ => None,
            })
            .collect();
        names.sort_unstable();
        names
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_len(w: &[char], at: usize) -> usize {
    if !w.get(at).copied().is_some_and(is_ident_start) {
        return 0;
    }
    let mut n = 1;
    while w.get(at + n).is_some_and(|c| c.is_ascii_alphanumeric() || *c == '_') {
        n += 1;
    }
    n
}

/// Index of the `]` closing the bracket opened at `open`, skipping quoted
/// values and regex literals.
fn closing_bracket(w: &[char], open: usize) -> Option<usize> {
    let mut i = open + 1;
    let mut delim: Option<char> = None;
    while i < w.len() {
        let c = w[i];
        match delim {
            Some(d) => {
                if c == '\\' {
                    i += 1;
                } else if c == d {
                    delim = None;
                }
            }
            None => match c {
                ']' => return Some(i),
                '"' => delim = Some('"'),
                '/' if matches!(w.get(i - 1), Some('[' | '=' | '|')) => delim = Some('/'),
                _ => {}
            },
        }
        i += 1;
    }
    None
}

fn word_spans(text: &str) -> Vec<(usize, Vec<char>)> {
    let mut out = Vec::new();
    let mut cur: Option<(usize, Vec<char>)> = None;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            out.extend(cur.take());
        } else {
            cur.get_or_insert_with(|| (i, Vec::new())).1.push(c);
        }
    }
    out.extend(cur);
    out
}

enum CaptureName {
    Auto,
    Named(String),
}

/// Parses example-sentence markup. Error offsets are character offsets into
/// `text`.
pub fn parse_markup(text: &str) -> Result<MarkedSentence, ParseError> {
    let mut words = word_spans(text);
    let mut k = 0;
    while k + 1 < words.len() {
        if words[k].1 == ['$'] && words[k + 1].1.first() != Some(&'$') && words[k + 1].1 != ['#', 'd'] {
            let (next_offset, next) = words.remove(k + 1);
            words[k] = (next_offset - 1, std::iter::once('$').chain(next).collect());
        }
        k += 1;
    }
    let mut plain = String::new();
    let mut plain_len = 0;
    let mut out: Vec<(usize, MarkedWord, Option<CaptureName>)> = Vec::new();
    let mut context = None;

    for (offset, w) in &words {
        let offset = *offset;
        if w.iter().collect::<String>() == "#d" {
            let rest_start = offset + 2;
            let rest: String = text.chars().skip(rest_start).collect();
            context = Some(parse_context_at(&rest, rest_start)?);
            break;
        }
        let mut i = 0;
        let anchor = w[0] == '$';
        i += usize::from(anchor);
        let expand = w[i..].starts_with(&['<', '>']);
        if expand {
            i += 2;
        }
        let mut capture = None;
        if w.get(i) == Some(&':') {
            capture = Some(CaptureName::Auto);
            i += 1;
        } else {
            let n = ident_len(w, i);
            if n > 0 && w.get(i + n) == Some(&':') {
                capture = Some(CaptureName::Named(w[i..i + n].iter().collect()));
                i += n + 1;
            }
        }
        if anchor && capture.is_some() {
            return Err(ParseError::new(offset, ErrorCode::AnchorAndCapture, "a word cannot be both anchor and capture"));
        }
        if expand && capture.is_none() {
            return Err(ParseError::new(offset, ErrorCode::ExpandWithoutCapture, "expansion `<>` requires a capture"));
        }
        let marked = anchor || capture.is_some();
        let mut restriction = None;
        if marked && w.get(i) == Some(&'[') {
            let close = closing_bracket(w, i)
                .ok_or_else(|| ParseError::new(offset + i, ErrorCode::UnterminatedBracket, "missing closing `]`"))?;
            let inner: String = w[i + 1..close].iter().collect();
            restriction = Some(match Field::from_name(&inner) {
                Some(f) => Restriction::Infer(f),
                None => Restriction::Constraint(parse_term_constraint_at(&inner, offset + i + 1)?),
            });
            i = close + 1;
        }
        let surface: String = if marked { w[i..].iter().collect() } else { w.iter().collect() };
        if surface.is_empty() {
            return Err(ParseError::new(offset + i, ErrorCode::EmptyValue, "marked word has no text"));
        }
        if !plain.is_empty() {
            plain.push(' ');
            plain_len += 1;
        }
        let len = surface.chars().count();
        plain.push_str(&surface);
        let mark = if anchor {
            Mark::Anchor { restriction }
        } else if capture.is_some() {
            Mark::Capture { name: String::new(), expand, restriction }
        } else {
            Mark::Scaffold
        };
        out.push((offset, MarkedWord { text: surface, char_start: plain_len, char_end: plain_len + len, mark }, capture));
        plain_len += len;
    }

    if out.is_empty() {
        return Err(ParseError::new(0, ErrorCode::EmptyQuery, "example sentence is empty"));
    }
    if out.iter().all(|(_, w, _)| w.mark == Mark::Scaffold) {
        return Err(ParseError::new(0, ErrorCode::NoMarks, "no anchors or captures"));
    }

    let mut used = HashSet::new();
    for (offset, _, cap) in &out {
        if let Some(CaptureName::Named(n)) = cap {
            if !used.insert(n.clone()) {
                return Err(ParseError::new(*offset, ErrorCode::DuplicateCapture, format!("capture `{n}` defined twice")));
            }
        }
    }
    let mut counter = 0;
    let words = out
        .into_iter()
        .map(|(_, mut w, cap)| {
            if let Mark::Capture { name, .. } = &mut w.mark {
                *name = match cap {
                    Some(CaptureName::Named(n)) => n,
                    _ => loop {
                        counter += 1;
                        let candidate = format!("cap{counter}");
                        if used.insert(candidate.clone()) {
                            break candidate;
                        }
                    },
                };
            }
            w
        })
        .collect();
    Ok(MarkedSentence { plain_text: plain, words, context })
}

impl fmt::Display for MarkedSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let restriction = |f: &mut fmt::Formatter<'_>, r: &Option<Restriction>| match r {
            None => Ok(()),
            Some(Restriction::Infer(field)) => write!(f, "[{}]", field.name()),
            Some(Restriction::Constraint(tc)) => write!(f, "[{tc}]"),
        };
        for (i, w) in self.words.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match &w.mark {
                Mark::Scaffold => {}
                Mark::Anchor { restriction: r } => {
                    f.write_str("$")?;
                    restriction(f, r)?;
                }
                Mark::Capture { name, expand, restriction: r } => {
                    if *expand {
                        f.write_str("<>")?;
                    }
                    write!(f, "{name}:")?;
                    restriction(f, r)?;
                }
            }
            f.write_str(&w.text)?;
        }
        if let Some(ctx) = &self.context {
            write!(f, " #d {ctx}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    /// `None` leaves the node unconstrained.
    pub constraint: Option<TermConstraint>,
    pub capture: Option<String>,
    pub expand: bool,
    /// Word of the example token this node came from.
    pub example: String,
}

/// A labelled dependency `from` (head) → `to` (dependent), by node index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub context: Option<ContextQuery>,
}

impl QueryGraph {
    pub fn capture_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.nodes.iter().filter_map(|n| n.capture.clone()).collect();
        v.sort();
        v
    }

    /// Checks structural invariants: at least one node, edges in range with
    /// non-empty labels, unique captures and a connected undirected shape.
    pub fn validate(&self) -> Result<(), QbeError> {
        if self.nodes.is_empty() {
            return Err(QbeError::Invalid("graph has no nodes".into()));
        }
        let n = self.nodes.len();
        if self.edges.iter().any(|e| e.from >= n || e.to >= n || e.from == e.to || e.label.is_empty()) {
            return Err(QbeError::Invalid("edge out of range, self-loop or unlabeled".into()));
        }
        let caps = self.capture_names();
        if caps.windows(2).any(|w| w[0] == w[1]) {
            return Err(QbeError::Invalid("duplicate capture name".into()));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for e in &self.edges {
                for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                    if a == u && !seen[b] {
                        seen[b] = true;
                        stack.push(b);
                    }
                }
            }
        }
        if seen.contains(&false) {
            return Err(QbeError::Invalid("graph is disconnected".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("no parse available for `{0}`")]
    NotFound(String),
    #[error("annotator I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("annotator failed: {0}")]
    Failed(String),
    #[error("annotator output malformed: {0}")]
    Malformed(String),
    #[error("annotator output invalid: {0}")]
    Invalid(#[from] SentenceError),
    #[error("annotator returned text `{got}` for `{expected}`")]
    TextMismatch { expected: String, got: String },
}

/// Supplies dependency parses for example sentences.
pub trait ParseProvider: Send + Sync {
    fn annotate(&self, text: &str) -> Result<AnnotatedSentence, ProviderError>;
}

/// Looks up pre-annotated sentences by exact text.
#[derive(Debug, Clone, Default)]
pub struct FixtureProvider {
    by_text: HashMap<String, AnnotatedSentence>,
}

impl FixtureProvider {
    pub fn new(sentences: impl IntoIterator<Item = AnnotatedSentence>) -> Self {
        FixtureProvider { by_text: sentences.into_iter().map(|s| (s.text.clone(), s)).collect() }
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, CorpusError> {
        Ok(Self::new(load_sentences(reader)?))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, CorpusError> {
        Self::from_reader(BufReader::new(std::fs::File::open(path)?))
    }

    pub fn len(&self) -> usize {
        self.by_text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_text.is_empty()
    }
}

impl ParseProvider for FixtureProvider {
    fn annotate(&self, text: &str) -> Result<AnnotatedSentence, ProviderError> {
        self.by_text.get(text).cloned().ok_or_else(|| ProviderError::NotFound(text.to_string()))
    }
}

/// Runs an external annotator once per sentence: the text goes to its stdin
/// followed by a newline, and its stdout must carry one sentence record in
/// the corpus interchange format.
#[derive(Debug, Clone)]
pub struct CommandProvider {
    program: String,
    args: Vec<String>,
}

impl CommandProvider {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        CommandProvider { program: program.into(), args }
    }

    /// Splits a command line on whitespace. No shell quoting is applied.
    pub fn from_command_line(line: &str) -> Option<Self> {
        let mut parts = line.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(Self::new(program, parts.collect()))
    }
}

impl ParseProvider for CommandProvider {
    fn annotate(&self, text: &str) -> Result<AnnotatedSentence, ProviderError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        {
            let mut stdin = child.stdin.take().expect("stdin is piped");
            stdin.write_all(text.as_bytes())?;
            stdin.write_all(b"\n")?;
        }
        let output = child.wait_with_output()?;
        if !output.status.success() {
            return Err(ProviderError::Failed(format!(
                "{} exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let stdout = String::from_utf8(output.stdout).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let line = stdout
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| ProviderError::Malformed("no output".into()))?;
        let sentence = match serde_json::from_str::<Record>(line) {
            Ok(Record::Sentence(s)) => s,
            Ok(Record::Document(_)) => return Err(ProviderError::Malformed("expected a sentence record".into())),
            Err(e) => return Err(ProviderError::Malformed(e.to_string())),
        };
        sentence.validate()?;
        if sentence.text != text {
            return Err(ProviderError::TextMismatch { expected: text.to_string(), got: sentence.text });
        }
        Ok(sentence)
    }
}

#[derive(Debug, Error)]
pub enum QbeError {
    #[error(transparent)]
    Markup(#[from] ParseError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no {field} on example token `{word}`")]
    MissingField { field: Field, word: String },
    #[error("marked word `{0}` does not align to a single example token")]
    Unalignable(String),
    #[error("marked words `{0}` and `{1}` align to the same example token")]
    SharedToken(String, String),
    #[error("example parse does not cover the sentence text")]
    TextMismatch,
    #[error("example parse is disconnected over marked tokens")]
    Disconnected,
    #[error("invalid query graph: {0}")]
    Invalid(String),
}

/// Builds the restriction requested by `[field]` from an example token.
pub fn infer_restriction(field: Field, token: &Token) -> Result<TermConstraint, QbeError> {
    let value = field
        .value_of(token)
        .ok_or_else(|| QbeError::MissingField { field, word: token.word.clone() })?;
    Ok(TermConstraint::single(FieldConstraint::exact(field, [value])))
}

fn is_punct(word: &str) -> bool {
    !word.chars().any(char::is_alphanumeric)
}

/// The token a marked word refers to: the only overlapping token, or the
/// only non-punctuation one among several.
fn align(parse: &AnnotatedSentence, word: &MarkedWord) -> Option<usize> {
    let overlapping: Vec<usize> = (0..parse.tokens.len())
        .filter(|&t| parse.tokens[t].char_start < word.char_end && parse.tokens[t].char_end > word.char_start)
        .collect();
    match overlapping.as_slice() {
        [t] => Some(*t),
        [] => None,
        many => {
            let content: Vec<usize> = many.iter().copied().filter(|&t| !is_punct(&parse.tokens[t].word)).collect();
            (content.len() == 1).then(|| content[0])
        }
    }
}

/// Smallest subtree of the tree given by `heads` that contains every
/// `required` token, found by pruning unrequired leaves. Returns `None` if
/// the required tokens are not all in one component.
pub fn steiner_subtree(heads: &[Option<usize>], required: &[usize]) -> Option<Vec<usize>> {
    let n = heads.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (d, h) in heads.iter().enumerate() {
        if let Some(h) = *h {
            adj[h].push(d);
            adj[d].push(h);
        }
    }
    let first = *required.first()?;
    let mut keep = vec![false; n];
    keep[first] = true;
    let mut stack = vec![first];
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !keep[v] {
                keep[v] = true;
                stack.push(v);
            }
        }
    }
    if required.iter().any(|&r| !keep[r]) {
        return None;
    }
    let is_required: HashSet<usize> = required.iter().copied().collect();
    let mut degree: Vec<usize> = (0..n).map(|u| adj[u].iter().filter(|&&v| keep[v]).count()).collect();
    let mut leaves: Vec<usize> = (0..n).filter(|&u| keep[u] && degree[u] <= 1 && !is_required.contains(&u)).collect();
    while let Some(u) = leaves.pop() {
        if !keep[u] {
            continue;
        }
        keep[u] = false;
        for &v in &adj[u] {
            if keep[v] {
                degree[v] -= 1;
                if degree[v] <= 1 && !is_required.contains(&v) {
                    leaves.push(v);
                }
            }
        }
    }
    Some((0..n).filter(|&u| keep[u]).collect())
}

/// Compiles marked-up text in one step.
pub fn compile_markup(text: &str, provider: &dyn ParseProvider) -> Result<QueryGraph, QbeError> {
    compile(&parse_markup(text)?, provider)
}

pub fn compile(marked: &MarkedSentence, provider: &dyn ParseProvider) -> Result<QueryGraph, QbeError> {
    let parse = provider.annotate(&marked.plain_text)?;
    compile_with_parse(marked, &parse)
}

/// Compiles against a given parse of `marked.plain_text`.
pub fn compile_with_parse(marked: &MarkedSentence, parse: &AnnotatedSentence) -> Result<QueryGraph, QbeError> {
    if parse.text != marked.plain_text {
        return Err(QbeError::TextMismatch);
    }
    parse.validate().map_err(ProviderError::from)?;

    let mut marks: BTreeMap<usize, &MarkedWord> = BTreeMap::new();
    for w in marked.words.iter().filter(|w| w.mark != Mark::Scaffold) {
        let t = align(parse, w).ok_or_else(|| QbeError::Unalignable(w.text.clone()))?;
        if let Some(prev) = marks.insert(t, w) {
            return Err(QbeError::SharedToken(prev.text.clone(), w.text.clone()));
        }
    }
    let required: Vec<usize> = marks.keys().copied().collect();
    let heads = parse.basic_heads();
    let kept = steiner_subtree(&heads, &required).ok_or(QbeError::Disconnected)?;

    let node_of: HashMap<usize, usize> = kept.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let mut nodes = Vec::with_capacity(kept.len());
    for &t in &kept {
        let token = &parse.tokens[t];
        let restrict = |r: &Option<Restriction>, default: Option<Field>| -> Result<Option<TermConstraint>, QbeError> {
            match r {
                Some(Restriction::Constraint(tc)) => Ok(Some(tc.clone())),
                Some(Restriction::Infer(f)) => infer_restriction(*f, token).map(Some),
                None => default.map(|f| infer_restriction(f, token)).transpose(),
            }
        };
        let node = match marks.get(&t).map(|w| &w.mark) {
            Some(Mark::Anchor { restriction }) => GraphNode {
                constraint: restrict(restriction, Some(Field::Word))?,
                capture: None,
                expand: false,
                example: token.word.clone(),
            },
            Some(Mark::Capture { name, expand, restriction }) => GraphNode {
                constraint: restrict(restriction, None)?,
                capture: Some(name.clone()),
                expand: *expand,
                example: token.word.clone(),
            },
            _ => GraphNode { constraint: None, capture: None, expand: false, example: token.word.clone() },
        };
        nodes.push(node);
    }
    let edges = parse
        .basic_edge_indices()
        .into_iter()
        .map(|i| &parse.edges[i])
        .filter_map(|e| {
            Some(GraphEdge { from: *node_of.get(&e.head)?, to: *node_of.get(&e.dependent)?, label: e.label.clone() })
        })
        .collect();
    let graph = QueryGraph { nodes, edges, context: marked.context.clone() };
    graph.validate()?;
    Ok(graph)
}
