//! Annotated-corpus data model and the line-delimited interchange format.
//!
//! A corpus file holds one JSON object per line. Every object carries a
//! `kind` field, either `"document"` or `"sentence"`:
//!
//! ```text
//! {"kind":"document","doc_id":"pmid:1","title":"…","abstract":"…","authors":["…"],
//!  "venue":"…","year":2012,"mesh":["Stroke"],"paragraphs":{"p0":"…"}}
//! {"kind":"sentence","sent_id":"s1","doc_id":"pmid:1","paragraph_id":"p0","text":"…",
//!  "tokens":[{"word":"Diabetes","lemma":"diabetes","tag":"NN","entity":"B-DISEASE","start":0,"end":8}],
//!  "edges":[[1,0,"nsubj"]],"root":1}
//! ```
//!
//! Token `start`/`end` are 0-based character (not byte) offsets into the
//! sentence text. `entity` is optional and uses `B-`/`I-` prefixes for the
//! mention role. Edges are `[head, dependent, label]` triples. The first edge
//! naming a token as its dependent is that token's basic-tree head; any later
//! edge into the same token is an enhanced edge. The basic tree must be
//! rooted at `root` and span every token.
//!
//! The full schema lives in `docs/corpus-format.md`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Position of a token inside an entity mention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityRole {
    Begin,
    Inside,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntityTag {
    pub label: String,
    pub role: EntityRole,
}

impl EntityTag {
    pub fn begin(label: impl Into<String>) -> Self {
        EntityTag { label: label.into(), role: EntityRole::Begin }
    }

    pub fn inside(label: impl Into<String>) -> Self {
        EntityTag { label: label.into(), role: EntityRole::Inside }
    }
}

impl fmt::Display for EntityTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.role {
            EntityRole::Begin => "B",
            EntityRole::Inside => "I",
        };
        write!(f, "{}-{}", prefix, self.label)
    }
}

impl std::str::FromStr for EntityTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (role, label) = match s.split_once('-') {
            Some(("B", label)) => (EntityRole::Begin, label),
            Some(("I", label)) => (EntityRole::Inside, label),
            _ => return Err(format!("entity tag `{s}` must look like B-LABEL or I-LABEL")),
        };
        if label.is_empty() {
            return Err(format!("entity tag `{s}` has an empty label"));
        }
        Ok(EntityTag { label: label.to_string(), role })
    }
}

impl Serialize for EntityTag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityTag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub word: String,
    pub lemma: String,
    pub tag: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<EntityTag>,
    #[serde(rename = "start")]
    pub char_start: usize,
    #[serde(rename = "end")]
    pub char_end: usize,
}

impl Token {
    pub fn entity_label(&self) -> Option<&str> {
        self.entity.as_ref().map(|e| e.label.as_str())
    }
}

/// A labeled dependency arc `head -> dependent`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edge {
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

impl Edge {
    pub fn new(head: usize, dependent: usize, label: impl Into<String>) -> Self {
        Edge { head, dependent, label: label.into() }
    }
}

impl Serialize for Edge {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        (self.head, self.dependent, &self.label).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Edge {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let (head, dependent, label) = <(usize, usize, String)>::deserialize(deserializer)?;
        Ok(Edge { head, dependent, label })
    }
}

/// Contiguous run of tokens sharing one entity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mention<'a> {
    pub start: usize,
    /// Inclusive.
    pub end: usize,
    pub label: &'a str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub sent_id: String,
    pub doc_id: String,
    pub paragraph_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub edges: Vec<Edge>,
    pub root: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SentenceError {
    #[error("sentence has no tokens")]
    Empty,
    #[error("token {index}: character span {start}..{end} is empty or reversed")]
    EmptySpan { index: usize, start: usize, end: usize },
    #[error("token {index}: character span overlaps or precedes the previous token")]
    UnorderedSpan { index: usize },
    #[error("token {index}: character span ends at {end} beyond text length {len}")]
    SpanOutOfText { index: usize, end: usize, len: usize },
    #[error("token {index}: inside-of-mention tag `{label}` does not continue a `{label}` mention")]
    BrokenMention { index: usize, label: String },
    #[error("invalid edge index: edge {edge} references token {token} but the sentence has {len} tokens")]
    InvalidEdge { edge: usize, token: usize, len: usize },
    #[error("edge {edge} has an empty label")]
    EmptyLabel { edge: usize },
    #[error("root {root} is not a token index (sentence has {len} tokens)")]
    InvalidRoot { root: usize, len: usize },
    #[error("token {index} is not reachable from the root through the dependency tree")]
    Unreachable { index: usize },
}

impl AnnotatedSentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn validate(&self) -> Result<(), SentenceError> {
        let n = self.tokens.len();
        if n == 0 {
            return Err(SentenceError::Empty);
        }
        let text_len = self.text.chars().count();
        let mut prev_end = 0;
        for (index, tok) in self.tokens.iter().enumerate() {
            if tok.char_start >= tok.char_end {
                return Err(SentenceError::EmptySpan { index, start: tok.char_start, end: tok.char_end });
            }
            if index > 0 && tok.char_start < prev_end {
                return Err(SentenceError::UnorderedSpan { index });
            }
            if tok.char_end > text_len {
                return Err(SentenceError::SpanOutOfText { index, end: tok.char_end, len: text_len });
            }
            prev_end = tok.char_end;
            if let Some(EntityTag { label, role: EntityRole::Inside }) = &tok.entity {
                let continues = index > 0 && self.tokens[index - 1].entity_label() == Some(label.as_str());
                if !continues {
                    return Err(SentenceError::BrokenMention { index, label: label.clone() });
                }
            }
        }
        if self.root >= n {
            return Err(SentenceError::InvalidRoot { root: self.root, len: n });
        }
        for (i, e) in self.edges.iter().enumerate() {
            for token in [e.head, e.dependent] {
                if token >= n {
                    return Err(SentenceError::InvalidEdge { edge: i, token, len: n });
                }
            }
            if e.label.is_empty() {
                return Err(SentenceError::EmptyLabel { edge: i });
            }
        }
        let heads = self.basic_heads();
        for start in 0..n {
            // Walk basic heads up to the root; more than n steps means a cycle.
            let mut cur = start;
            let mut steps = 0;
            while cur != self.root {
                match heads[cur] {
                    Some(h) if steps <= n => {
                        cur = h;
                        steps += 1;
                    }
                    _ => return Err(SentenceError::Unreachable { index: start }),
                }
            }
        }
        Ok(())
    }

    /// Basic-tree head of every token (`None` for the root).
    pub fn basic_heads(&self) -> Vec<Option<usize>> {
        let mut heads = vec![None; self.tokens.len()];
        for e in &self.edges {
            if e.dependent != self.root && e.dependent < heads.len() && heads[e.dependent].is_none() {
                heads[e.dependent] = Some(e.head);
            }
        }
        heads
    }

    /// Indices into `edges` that make up the basic tree.
    pub fn basic_edge_indices(&self) -> Vec<usize> {
        let mut seen = vec![false; self.tokens.len()];
        let mut out = Vec::with_capacity(self.tokens.len());
        for (i, e) in self.edges.iter().enumerate() {
            if e.dependent != self.root && e.dependent < seen.len() && !seen[e.dependent] {
                seen[e.dependent] = true;
                out.push(i);
            }
        }
        out
    }

    pub fn mentions(&self) -> Vec<Mention<'_>> {
        let mut out: Vec<Mention<'_>> = Vec::new();
        for (i, tok) in self.tokens.iter().enumerate() {
            let Some(tag) = &tok.entity else { continue };
            match (tag.role, out.last_mut()) {
                (EntityRole::Inside, Some(m)) if m.end + 1 == i && m.label == tag.label => m.end = i,
                _ => out.push(Mention { start: i, end: i, label: &tag.label }),
            }
        }
        out
    }

    /// The mention containing `token`, as an inclusive token range.
    pub fn mention_span(&self, token: usize) -> Option<(usize, usize)> {
        let label = self.tokens.get(token)?.entity_label()?;
        let mut start = token;
        while matches!(self.tokens[start].entity, Some(EntityTag { role: EntityRole::Inside, .. }))
            && start > 0
            && self.tokens[start - 1].entity_label() == Some(label)
        {
            start -= 1;
        }
        let mut end = token;
        while end + 1 < self.tokens.len()
            && matches!(&self.tokens[end + 1].entity, Some(EntityTag { role: EntityRole::Inside, label: l }) if l == label)
        {
            end += 1;
        }
        Some((start, end))
    }

    /// Substring of `text` covering tokens `start..=end`.
    pub fn token_text(&self, start: usize, end: usize) -> String {
        let cs = self.tokens[start].char_start;
        let ce = self.tokens[end].char_end;
        self.text.chars().skip(cs).take(ce - cs).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub venue: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<u32>,
    #[serde(default)]
    pub mesh: Vec<String>,
    #[serde(default)]
    pub paragraphs: BTreeMap<String, String>,
}

impl DocumentMeta {
    pub fn new(doc_id: impl Into<String>) -> Self {
        DocumentMeta {
            doc_id: doc_id.into(),
            title: String::new(),
            abstract_text: String::new(),
            authors: Vec::new(),
            venue: String::new(),
            year: None,
            mesh: Vec::new(),
            paragraphs: BTreeMap::new(),
        }
    }
}

/// One line of the interchange format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Document(DocumentMeta),
    Sentence(AnnotatedSentence),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    InvalidSentence {
        line: usize,
        #[source]
        source: SentenceError,
    },
    #[error("line {line}: duplicate sent_id `{sent_id}`")]
    DuplicateSentence { line: usize, sent_id: String },
    #[error("line {line}: duplicate doc_id `{doc_id}`")]
    DuplicateDocument { line: usize, doc_id: String },
    #[error("line {line}: sentence `{sent_id}` references unknown doc_id `{doc_id}`")]
    DanglingDocument { line: usize, sent_id: String, doc_id: String },
    #[error("line {line}: sentence `{sent_id}` references unknown paragraph `{paragraph_id}` of `{doc_id}`")]
    DanglingParagraph { line: usize, sent_id: String, doc_id: String, paragraph_id: String },
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("lexicon entry {0} has no tokens")]
    EmptyLexiconEntry(usize),
    #[error("entity type name is empty")]
    EmptyTypeName,
}

impl CorpusError {
    /// Line the error was found on (1-based), when it came from a file.
    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::Malformed { line, .. }
            | CorpusError::InvalidSentence { line, .. }
            | CorpusError::DuplicateSentence { line, .. }
            | CorpusError::DuplicateDocument { line, .. }
            | CorpusError::DanglingDocument { line, .. }
            | CorpusError::DanglingParagraph { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub sentences: Vec<AnnotatedSentence>,
    pub documents: BTreeMap<String, DocumentMeta>,
}

impl Corpus {
    /// Builds a corpus from parts, enforcing every corpus invariant.
    /// Line numbers in errors are record positions (documents first).
    pub fn new(
        documents: impl IntoIterator<Item = DocumentMeta>,
        sentences: impl IntoIterator<Item = AnnotatedSentence>,
    ) -> Result<Self, CorpusError> {
        let mut records: Vec<(usize, Record)> = Vec::new();
        for d in documents {
            records.push((records.len() + 1, Record::Document(d)));
        }
        for s in sentences {
            records.push((records.len() + 1, Record::Sentence(s)));
        }
        Self::from_records(records)
    }

    fn from_records(records: Vec<(usize, Record)>) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        let mut sentence_lines = Vec::new();
        let mut sent_ids = HashSet::new();
        for (line, rec) in records {
            match rec {
                Record::Document(d) => {
                    if corpus.documents.contains_key(&d.doc_id) {
                        return Err(CorpusError::DuplicateDocument { line, doc_id: d.doc_id });
                    }
                    corpus.documents.insert(d.doc_id.clone(), d);
                }
                Record::Sentence(s) => {
                    s.validate().map_err(|source| CorpusError::InvalidSentence { line, source })?;
                    if !sent_ids.insert(s.sent_id.clone()) {
                        return Err(CorpusError::DuplicateSentence { line, sent_id: s.sent_id });
                    }
                    sentence_lines.push(line);
                    corpus.sentences.push(s);
                }
            }
        }
        // Documents may appear after the sentences that cite them.
        for (s, &line) in corpus.sentences.iter().zip(&sentence_lines) {
            let Some(doc) = corpus.documents.get(&s.doc_id) else {
                return Err(CorpusError::DanglingDocument {
                    line,
                    sent_id: s.sent_id.clone(),
                    doc_id: s.doc_id.clone(),
                });
            };
            if !doc.paragraphs.contains_key(&s.paragraph_id) {
                return Err(CorpusError::DanglingParagraph {
                    line,
                    sent_id: s.sent_id.clone(),
                    doc_id: s.doc_id.clone(),
                    paragraph_id: s.paragraph_id.clone(),
                });
            }
        }
        Ok(corpus)
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(&line)
                .map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
            records.push((line_no, rec));
        }
        Self::from_records(records)
    }

    /// Writes documents first, then sentences, one record per line.
    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for d in self.documents.values() {
            serde_json::to_writer(&mut out, &Record::Document(d.clone()))?;
            out.write_all(b"\n")?;
        }
        for s in &self.sentences {
            serde_json::to_writer(&mut out, &Record::Sentence(s.clone()))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut w = io::BufWriter::new(File::create(path)?);
        self.write_jsonl(&mut w)?;
        w.flush()
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let file = File::open(path)?;
    Corpus::from_reader(BufReader::new(file))
}

/// Reads bare sentence records (no documents), e.g. example-sentence parses.
/// Document references are not checked.
pub fn load_sentences(reader: impl BufRead) -> Result<Vec<AnnotatedSentence>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(Record::Sentence(s)) => {
                s.validate().map_err(|source| CorpusError::InvalidSentence { line: line_no, source })?;
                out.push(s);
            }
            Ok(Record::Document(_)) => {}
            Err(e) => return Err(CorpusError::Malformed { line: line_no, message: e.to_string() }),
        }
    }
    Ok(out)
}

/// Labels every occurrence of a lexicon entry as a `type_name` mention.
///
/// Matching is case-insensitive on word forms and token-aligned. When
/// occurrences overlap, the longer one wins; equal lengths go to the leftmost.
/// Existing entity labels on the tagged tokens are replaced.
pub fn apply_entity_lexicon<S: AsRef<str>>(
    corpus: &Corpus,
    lexicon: &[S],
    type_name: &str,
) -> Result<Corpus, CorpusError> {
    if type_name.trim().is_empty() {
        return Err(CorpusError::EmptyTypeName);
    }
    if lexicon.is_empty() {
        return Err(CorpusError::EmptyLexicon);
    }
    let mut entries: Vec<Vec<String>> = Vec::with_capacity(lexicon.len());
    for (i, entry) in lexicon.iter().enumerate() {
        let toks: Vec<String> = entry.as_ref().split_whitespace().map(str::to_lowercase).collect();
        if toks.is_empty() {
            return Err(CorpusError::EmptyLexiconEntry(i));
        }
        entries.push(toks);
    }
    entries.sort();
    entries.dedup();
    let mut by_first: BTreeMap<&str, Vec<&[String]>> = BTreeMap::new();
    for e in &entries {
        by_first.entry(e[0].as_str()).or_default().push(e.as_slice());
    }

    let mut out = corpus.clone();
    for sentence in &mut out.sentences {
        let words: Vec<String> = sentence.tokens.iter().map(|t| t.word.to_lowercase()).collect();
        let mut occurrences: Vec<(usize, usize)> = Vec::new();
        for start in 0..words.len() {
            let Some(cands) = by_first.get(words[start].as_str()) else { continue };
            for cand in cands {
                let end = start + cand.len();
                if end <= words.len() && words[start..end].iter().zip(cand.iter()).all(|(a, b)| a == b) {
                    occurrences.push((start, cand.len()));
                }
            }
        }
        if occurrences.is_empty() {
            continue;
        }
        occurrences.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut taken = vec![false; words.len()];
        let mut chosen = Vec::new();
        for (start, len) in occurrences {
            if taken[start..start + len].iter().any(|&t| t) {
                continue;
            }
            taken[start..start + len].iter_mut().for_each(|t| *t = true);
            chosen.push((start, len));
        }
        for (start, len) in chosen {
            sentence.tokens[start].entity = Some(EntityTag::begin(type_name));
            for tok in &mut sentence.tokens[start + 1..start + len] {
                tok.entity = Some(EntityTag::inside(type_name));
            }
        }
        // A relabeled span can cut an older mention short; its remainder
        // becomes a mention of its own.
        for i in 0..sentence.tokens.len() {
            let prev_label = if i > 0 { sentence.tokens[i - 1].entity_label().map(str::to_owned) } else { None };
            if let Some(tag) = &mut sentence.tokens[i].entity {
                if tag.role == EntityRole::Inside && prev_label.as_deref() != Some(tag.label.as_str()) {
                    tag.role = EntityRole::Begin;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(word: &str, start: usize) -> Token {
        Token {
            word: word.into(),
            lemma: word.to_lowercase(),
            tag: "NN".into(),
            entity: None,
            char_start: start,
            char_end: start + word.chars().count(),
        }
    }

    /// Sentence from whitespace-separated words, chained left to right.
    fn chain(sent_id: &str, text: &str) -> AnnotatedSentence {
        let mut tokens = Vec::new();
        let mut pos = 0;
        for w in text.split(' ') {
            tokens.push(tok(w, pos));
            pos += w.chars().count() + 1;
        }
        let edges = (1..tokens.len()).map(|i| Edge::new(i - 1, i, "dep")).collect();
        AnnotatedSentence {
            sent_id: sent_id.into(),
            doc_id: "d".into(),
            paragraph_id: "p".into(),
            text: text.into(),
            tokens,
            edges,
            root: 0,
        }
    }

    fn doc() -> DocumentMeta {
        let mut d = DocumentMeta::new("d");
        d.paragraphs.insert("p".into(), String::new());
        d
    }

    #[test]
    fn minimal_file_loads() {
        let s = chain("s1", "fatal infection");
        let mut buf = Vec::new();
        Corpus::new([doc()], [s]).unwrap().write_jsonl(&mut buf).unwrap();
        let c = Corpus::from_reader(&buf[..]).unwrap();
        assert_eq!(c.sentences.len(), 1);
        assert_eq!(c.documents.len(), 1);
    }

    #[test]
    fn bad_edge_reports_line() {
        let mut s = chain("s1", "a b c d e");
        s.edges.push(Edge::new(0, 99, "dep"));
        let text = format!(
            "{}\n{}\n",
            serde_json::to_string(&Record::Document(doc())).unwrap(),
            serde_json::to_string(&Record::Sentence(s)).unwrap()
        );
        let err = Corpus::from_reader(text.as_bytes()).unwrap_err();
        assert_eq!(err.line(), Some(2));
        assert!(err.to_string().contains("invalid edge index"), "{err}");
    }

    #[test]
    fn rejects_dangling_and_duplicates() {
        let mut s = chain("s1", "a b");
        s.doc_id = "missing".into();
        assert!(matches!(Corpus::new([doc()], [s]), Err(CorpusError::DanglingDocument { .. })));

        let mut s = chain("s1", "a b");
        s.paragraph_id = "p9".into();
        assert!(matches!(Corpus::new([doc()], [s]), Err(CorpusError::DanglingParagraph { .. })));

        let r = Corpus::new([doc()], [chain("s1", "a"), chain("s1", "b")]);
        assert!(matches!(r, Err(CorpusError::DuplicateSentence { .. })));
    }

    #[test]
    fn malformed_json_is_reported() {
        let err = Corpus::from_reader("{\"kind\":\"sentence\"\n".as_bytes()).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }));
    }

    #[test]
    fn sentence_invariants() {
        let mut s = chain("s", "a b c");
        s.edges.clear();
        assert_eq!(s.validate(), Err(SentenceError::Unreachable { index: 1 }));

        let mut s = chain("s", "a b c");
        s.tokens[1].entity = Some(EntityTag::inside("X"));
        assert!(matches!(s.validate(), Err(SentenceError::BrokenMention { index: 1, .. })));

        let mut s = chain("s", "a b c");
        s.tokens[2].char_start = 0;
        assert_eq!(s.validate(), Err(SentenceError::UnorderedSpan { index: 2 }));

        let mut s = chain("s", "a b c");
        s.edges[0].label.clear();
        assert_eq!(s.validate(), Err(SentenceError::EmptyLabel { edge: 0 }));

        // cycle 1 -> 2 -> 1 disconnected from root 0
        let mut s = chain("s", "a b c");
        s.edges = vec![Edge::new(2, 1, "x"), Edge::new(1, 2, "y")];
        assert!(matches!(s.validate(), Err(SentenceError::Unreachable { .. })));
    }

    #[test]
    fn enhanced_edges_do_not_change_basic_tree() {
        let mut s = chain("s", "a b c");
        s.edges.push(Edge::new(0, 2, "nsubj"));
        s.validate().unwrap();
        assert_eq!(s.basic_heads(), vec![None, Some(0), Some(1)]);
        assert_eq!(s.basic_edge_indices(), vec![0, 1]);
    }

    #[test]
    fn mentions_and_spans() {
        let mut s = chain("s", "x sickle cell disease y");
        s.tokens[1].entity = Some(EntityTag::begin("DISEASE"));
        s.tokens[2].entity = Some(EntityTag::inside("DISEASE"));
        s.tokens[3].entity = Some(EntityTag::inside("DISEASE"));
        s.tokens[4].entity = Some(EntityTag::begin("DISEASE"));
        let m = s.mentions();
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].start, m[0].end), (1, 3));
        assert_eq!(s.mention_span(2), Some((1, 3)));
        assert_eq!(s.mention_span(4), Some((4, 4)));
        assert_eq!(s.mention_span(0), None);
        assert_eq!(s.token_text(1, 3), "sickle cell disease");
    }

    #[test]
    fn entity_tag_text_form() {
        assert_eq!("B-COVID-19".parse::<EntityTag>().unwrap(), EntityTag::begin("COVID-19"));
        assert!("X-FOO".parse::<EntityTag>().is_err());
        assert!("B-".parse::<EntityTag>().is_err());
    }

    #[test]
    fn lexicon_single_alias() {
        let c = Corpus::new([doc()], [chain("s", "the novel coronavirus ( nCov-19 ) spreads")]).unwrap();
        let out = apply_entity_lexicon(&c, &["nCov-19"], "COVID-19").unwrap();
        let toks = &out.sentences[0].tokens;
        assert_eq!(toks[4].entity, Some(EntityTag::begin("COVID-19")));
        assert!(toks.iter().enumerate().all(|(i, t)| i == 4 || t.entity.is_none()));
    }

    #[test]
    fn lexicon_absent_entry_is_noop() {
        let c = Corpus::new([doc()], [chain("s", "nothing to see")]).unwrap();
        assert_eq!(apply_entity_lexicon(&c, &["absent term"], "X").unwrap(), c);
    }

    #[test]
    fn lexicon_longer_entry_wins() {
        let c = Corpus::new([doc()], [chain("s", "the severe acute respiratory syndrome spread")]).unwrap();
        let out =
            apply_entity_lexicon(&c, &["acute respiratory", "severe acute respiratory syndrome"], "SARS").unwrap();
        let labels: Vec<_> = out.sentences[0].tokens.iter().map(|t| t.entity.clone()).collect();
        assert_eq!(labels[0], None);
        assert_eq!(labels[1], Some(EntityTag::begin("SARS")));
        assert!(labels[2..5].iter().all(|l| *l == Some(EntityTag::inside("SARS"))));
        assert_eq!(labels[5], None);
    }

    #[test]
    fn lexicon_errors() {
        let c = Corpus::default();
        let empty: [&str; 0] = [];
        assert!(matches!(apply_entity_lexicon(&c, &empty, "X"), Err(CorpusError::EmptyLexicon)));
        assert!(matches!(apply_entity_lexicon(&c, &["a"], " "), Err(CorpusError::EmptyTypeName)));
        assert!(matches!(apply_entity_lexicon(&c, &["  "], "X"), Err(CorpusError::EmptyLexiconEntry(0))));
    }

    #[test]
    fn lexicon_repairs_cut_mentions() {
        let mut s = chain("s", "a b c");
        s.tokens[0].entity = Some(EntityTag::begin("OLD"));
        s.tokens[1].entity = Some(EntityTag::inside("OLD"));
        s.tokens[2].entity = Some(EntityTag::inside("OLD"));
        let c = Corpus::new([doc()], [s]).unwrap();
        let out = apply_entity_lexicon(&c, &["A"], "NEW").unwrap();
        let toks = &out.sentences[0].tokens;
        assert_eq!(toks[1].entity, Some(EntityTag::begin("OLD")));
        out.sentences[0].validate().unwrap();
    }
}
