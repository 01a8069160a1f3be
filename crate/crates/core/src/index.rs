//! Immutable inverted index over a corpus.
//!
//! Token postings map each normalized field value to sorted
//! `(sentence, position)` pairs. Document metadata gets a second, smaller
//! index used to evaluate contextual restrictions: analyzed term postings
//! and token streams for text fields, whole-string postings for venue and
//! MeSH, and a sorted year list. Paragraph clauses are resolved against
//! paragraph units, one per `(document, paragraph)` pair.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{AnnotatedSentence, Corpus, CorpusError, DocumentMeta};
use crate::query::{
    analyze, ContextClause, ContextField, ContextQuery, Field, FieldConstraint, Matcher, Polarity, TermConstraint,
    ContextValue,
};

const MAGIC: &[u8; 8] = b"EXSIDX\0\0";
pub const FORMAT_VERSION: u32 = 1;

pub type Posting = (u32, u32);

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("index I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not an index file")]
    BadMagic,
    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
}

/// Analyzed postings and token streams for one text field. Ordinals are
/// document ordinals, or paragraph-unit ordinals for the paragraph field.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct TextField {
    terms: BTreeMap<String, Vec<u32>>,
    streams: Vec<Vec<String>>,
}

impl TextField {
    fn build(texts: impl Iterator<Item = Vec<String>>) -> Self {
        let mut f = TextField::default();
        for (ord, stream) in texts.enumerate() {
            for tok in stream.iter().filter(|t| !t.is_empty()) {
                let list = f.terms.entry(tok.clone()).or_default();
                if list.last() != Some(&(ord as u32)) {
                    list.push(ord as u32);
                }
            }
            f.streams.push(stream);
        }
        f
    }

    fn matching(&self, value: &ContextValue) -> Vec<u32> {
        match value {
            ContextValue::Term(t) | ContextValue::Phrase(t) => {
                let words = analyze(t);
                match words.as_slice() {
                    [] => Vec::new(),
                    [w] => self.terms.get(w).cloned().unwrap_or_default(),
                    _ => self.phrase(&words),
                }
            }
            ContextValue::Prefix(p) => {
                let p = p.to_lowercase();
                union(self.terms.range(p.clone()..).take_while(|(k, _)| k.starts_with(&p)).map(|(_, v)| v.as_slice()))
            }
            ContextValue::Regex(p) => match context_regex(p) {
                Some(re) => union(self.terms.iter().filter(|(k, _)| re.is_match(k)).map(|(_, v)| v.as_slice())),
                None => Vec::new(),
            },
            ContextValue::Range(..) => Vec::new(),
        }
    }

    fn phrase(&self, words: &[String]) -> Vec<u32> {
        let mut lists = Vec::with_capacity(words.len());
        for w in words {
            match self.terms.get(w) {
                Some(l) => lists.push(l.as_slice()),
                None => return Vec::new(),
            }
        }
        intersect_all(lists)
            .into_iter()
            .filter(|&ord| self.streams[ord as usize].windows(words.len()).any(|win| win == words))
            .collect()
    }
}

/// Whole-string postings for venue and MeSH, keyed case-folded.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct KeywordField {
    values: BTreeMap<String, Vec<u32>>,
}

impl KeywordField {
    fn add(&mut self, value: &str, doc: u32) {
        if value.is_empty() {
            return;
        }
        let list = self.values.entry(value.to_lowercase()).or_default();
        if list.last() != Some(&doc) {
            list.push(doc);
        }
    }

    fn matching(&self, value: &ContextValue) -> Vec<u32> {
        match value {
            ContextValue::Term(t) | ContextValue::Phrase(t) => self.values.get(&t.to_lowercase()).cloned().unwrap_or_default(),
            ContextValue::Prefix(p) => {
                let p = p.to_lowercase();
                union(self.values.range(p.clone()..).take_while(|(k, _)| k.starts_with(&p)).map(|(_, v)| v.as_slice()))
            }
            ContextValue::Regex(p) => match context_regex(p) {
                Some(re) => union(self.values.iter().filter(|(k, _)| re.is_match(k)).map(|(_, v)| v.as_slice())),
                None => Vec::new(),
            },
            ContextValue::Range(..) => Vec::new(),
        }
    }
}

/// The anchored, case-insensitive regex used for context clauses.
pub fn context_regex(pattern: &str) -> Option<Regex> {
    Regex::new(&format!("(?i)^(?:{pattern})$")).ok()
}

fn union<'a>(lists: impl Iterator<Item = &'a [u32]>) -> Vec<u32> {
    let mut out: Vec<u32> = lists.flatten().copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn intersect<T: Ord + Copy>(a: &[T], b: &[T]) -> Vec<T> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn intersect_all(mut lists: Vec<&[u32]>) -> Vec<u32> {
    lists.sort_by_key(|l| l.len());
    let Some((first, rest)) = lists.split_first() else { return Vec::new() };
    let mut acc = first.to_vec();
    for l in rest {
        if acc.is_empty() {
            break;
        }
        acc = intersect(&acc, l);
    }
    acc
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tables {
    version: String,
    /// One map per [`Field`], in `Field::ALL` order.
    postings: Vec<BTreeMap<String, Vec<Posting>>>,
    edge_labels: BTreeMap<String, Vec<u32>>,
    doc_ids: Vec<String>,
    sent_doc: Vec<u32>,
    sent_unit: Vec<u32>,
    unit_doc: Vec<u32>,
    unit_sentences: Vec<Vec<u32>>,
    title: TextField,
    abstract_text: TextField,
    authors: TextField,
    paragraph: TextField,
    venue: KeywordField,
    mesh: KeywordField,
    /// `(year, doc)` sorted by year.
    years: Vec<(u32, u32)>,
}

/// Sentences admitted by a contextual restriction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextFilter {
    allowed: Vec<bool>,
    docs: BTreeSet<String>,
}

impl ContextFilter {
    pub fn allows(&self, sentence: u32) -> bool {
        self.allowed.get(sentence as usize).copied().unwrap_or(false)
    }

    /// Allowed sentence ordinals, ascending.
    pub fn sentences(&self) -> Vec<u32> {
        (0..self.allowed.len() as u32).filter(|&s| self.allowed[s as usize]).collect()
    }

    /// Documents with at least one admitted paragraph.
    pub fn doc_ids(&self) -> &BTreeSet<String> {
        &self.docs
    }
}

struct HashWriter(Sha256);

impl Write for HashWriter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone)]
pub struct Index {
    corpus: Corpus,
    tables: Tables,
}

impl Index {
    pub fn build(corpus: Corpus) -> Index {
        let mut hasher = HashWriter(Sha256::new());
        corpus.write_jsonl(&mut hasher).expect("hashing cannot fail");
        let version = hex(&hasher.0.finalize()[..8]);

        let mut postings: Vec<BTreeMap<String, Vec<Posting>>> = vec![BTreeMap::new(); Field::ALL.len()];
        let mut edge_labels: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (s, sent) in corpus.sentences.iter().enumerate() {
            let s = s as u32;
            for (p, tok) in sent.tokens.iter().enumerate() {
                for (fi, field) in Field::ALL.iter().enumerate() {
                    if let Some(v) = field.value_of(tok) {
                        postings[fi].entry(field.normalize(v)).or_default().push((s, p as u32));
                    }
                }
            }
            for e in &sent.edges {
                let list = edge_labels.entry(e.label.clone()).or_default();
                if list.last() != Some(&s) {
                    list.push(s);
                }
            }
        }

        let docs: Vec<&DocumentMeta> = corpus.documents.values().collect();
        let doc_ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
        let doc_ord: HashMap<&str, u32> = doc_ids.iter().enumerate().map(|(i, d)| (d.as_str(), i as u32)).collect();
        let mut unit_doc = Vec::new();
        let mut unit_of: HashMap<(u32, &str), u32> = HashMap::new();
        let mut paragraph_texts = Vec::new();
        for (d, doc) in docs.iter().enumerate() {
            for (pid, text) in &doc.paragraphs {
                unit_of.insert((d as u32, pid.as_str()), unit_doc.len() as u32);
                unit_doc.push(d as u32);
                paragraph_texts.push(analyze(text));
            }
        }
        let mut unit_sentences = vec![Vec::new(); unit_doc.len()];
        let mut sent_doc = Vec::with_capacity(corpus.sentences.len());
        let mut sent_unit = Vec::with_capacity(corpus.sentences.len());
        for (s, sent) in corpus.sentences.iter().enumerate() {
            let d = doc_ord[sent.doc_id.as_str()];
            let u = unit_of[&(d, sent.paragraph_id.as_str())];
            sent_doc.push(d);
            sent_unit.push(u);
            unit_sentences[u as usize].push(s as u32);
        }

        let authors_stream = |d: &DocumentMeta| {
            let mut out = Vec::new();
            for (i, a) in d.authors.iter().enumerate() {
                if i > 0 {
                    out.push(String::new());
                }
                out.extend(analyze(a));
            }
            out
        };
        let mut venue = KeywordField::default();
        let mut mesh = KeywordField::default();
        let mut years = Vec::new();
        for (d, doc) in docs.iter().enumerate() {
            venue.add(&doc.venue, d as u32);
            for m in &doc.mesh {
                mesh.add(m, d as u32);
            }
            if let Some(y) = doc.year {
                years.push((y, d as u32));
            }
        }
        for list in mesh.values.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        years.sort_unstable();

        let tables = Tables {
            version,
            postings,
            edge_labels,
            title: TextField::build(docs.iter().map(|d| analyze(&d.title))),
            abstract_text: TextField::build(docs.iter().map(|d| analyze(&d.abstract_text))),
            authors: TextField::build(docs.iter().map(|d| authors_stream(d))),
            paragraph: TextField::build(paragraph_texts.into_iter()),
            doc_ids,
            sent_doc,
            sent_unit,
            unit_doc,
            unit_sentences,
            venue,
            mesh,
            years,
        };
        Index { corpus, tables }
    }

    pub fn corpus(&self) -> &Corpus {
        &self.corpus
    }

    pub fn into_corpus(self) -> Corpus {
        self.corpus
    }

    pub fn sentences(&self) -> &[AnnotatedSentence] {
        &self.corpus.sentences
    }

    pub fn sentence(&self, ordinal: u32) -> &AnnotatedSentence {
        &self.corpus.sentences[ordinal as usize]
    }

    pub fn len(&self) -> usize {
        self.corpus.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.sentences.is_empty()
    }

    pub fn document(&self, doc_id: &str) -> Option<&DocumentMeta> {
        self.corpus.documents.get(doc_id)
    }

    pub fn document_count(&self) -> usize {
        self.tables.doc_ids.len()
    }

    /// Hash of the indexed corpus.
    pub fn version(&self) -> &str {
        &self.tables.version
    }

    fn field_map(&self, field: Field) -> &BTreeMap<String, Vec<Posting>> {
        &self.tables.postings[field as usize]
    }

    /// Postings for a value, normalized per the field's case policy.
    pub fn postings(&self, field: Field, value: &str) -> &[Posting] {
        self.field_map(field).get(&field.normalize(value)).map_or(&[], Vec::as_slice)
    }

    /// Distinct normalized values of a field, ascending.
    pub fn field_values(&self, field: Field) -> impl Iterator<Item = &str> {
        self.field_map(field).keys().map(String::as_str)
    }

    /// Sentences containing at least one edge with this label.
    pub fn sentences_with_edge(&self, label: &str) -> &[u32] {
        self.tables.edge_labels.get(label).map_or(&[], Vec::as_slice)
    }

    fn field_positions(&self, fc: &FieldConstraint) -> Vec<Posting> {
        let map = self.field_map(fc.field);
        let lists: Vec<&Vec<Posting>> = match &fc.matcher {
            Matcher::Exact(values) => values.iter().filter_map(|v| map.get(&fc.field.normalize(v))).collect(),
            Matcher::Regex(p) => match FieldConstraint::compile_regex(fc.field, p) {
                Ok(re) => map.iter().filter(|(k, _)| re.is_match(k)).map(|(_, v)| v).collect(),
                Err(_) => Vec::new(),
            },
        };
        if lists.len() == 1 {
            return lists[0].clone();
        }
        let mut out: Vec<Posting> = lists.into_iter().flatten().copied().collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Token positions satisfying a term constraint, or `None` when the
    /// constraint has no conjuncts and so matches every token.
    pub fn term_positions(&self, tc: &TermConstraint) -> Option<Vec<Posting>> {
        let mut lists: Vec<Vec<Posting>> = tc.conjuncts.iter().map(|fc| self.field_positions(fc)).collect();
        lists.sort_by_key(Vec::len);
        let mut iter = lists.into_iter();
        let mut acc = iter.next()?;
        for l in iter {
            if acc.is_empty() {
                break;
            }
            acc = intersect(&acc, &l);
        }
        Some(acc)
    }

    /// Sentences that may satisfy every constraint somewhere, ascending.
    /// Unconstrained entries do not narrow the result.
    pub fn candidates(&self, constraints: &[TermConstraint]) -> Vec<u32> {
        let mut sets: Vec<Vec<u32>> = Vec::new();
        for tc in constraints {
            if let Some(pos) = self.term_positions(tc) {
                let mut s: Vec<u32> = pos.into_iter().map(|(s, _)| s).collect();
                s.dedup();
                sets.push(s);
            }
        }
        if sets.is_empty() {
            return (0..self.len() as u32).collect();
        }
        intersect_all(sets.iter().map(Vec::as_slice).collect())
    }

    fn clause_docs(&self, clause: &ContextClause) -> Vec<u32> {
        let t = &self.tables;
        match clause.field {
            ContextField::Title => t.title.matching(&clause.value),
            ContextField::Abstract => t.abstract_text.matching(&clause.value),
            ContextField::Authors => t.authors.matching(&clause.value),
            ContextField::Venue => t.venue.matching(&clause.value),
            ContextField::Mesh => t.mesh.matching(&clause.value),
            ContextField::Paragraph => t.paragraph.matching(&clause.value),
            ContextField::Year => {
                let (lo, hi) = match &clause.value {
                    ContextValue::Range(lo, hi) => (*lo, *hi),
                    ContextValue::Term(y) => match y.parse::<u32>() {
                        Ok(y) => (y, y),
                        Err(_) => return Vec::new(),
                    },
                    _ => return Vec::new(),
                };
                let start = t.years.partition_point(|&(y, _)| y < lo);
                let end = t.years.partition_point(|&(y, _)| y <= hi);
                let mut docs: Vec<u32> = t.years[start..end].iter().map(|&(_, d)| d).collect();
                docs.sort_unstable();
                docs
            }
        }
    }

    /// Evaluates a contextual restriction over paragraph units: a unit
    /// passes if every must clause holds, no must-not clause holds, and at
    /// least one should clause holds when any are present. Document-level
    /// clauses hold for every paragraph of a matching document.
    pub fn doc_filter(&self, ctx: &ContextQuery) -> ContextFilter {
        let t = &self.tables;
        let units = t.unit_doc.len();
        let mut must = vec![true; units];
        let mut should = vec![false; units];
        let has_should = ctx.clauses.iter().any(|c| c.polarity == Polarity::Should);
        for clause in &ctx.clauses {
            let hits = self.clause_docs(clause);
            let mut holds = vec![false; units];
            if clause.field == ContextField::Paragraph {
                for u in hits {
                    holds[u as usize] = true;
                }
            } else {
                let mut doc_hit = vec![false; t.doc_ids.len()];
                for d in hits {
                    doc_hit[d as usize] = true;
                }
                for (u, &d) in t.unit_doc.iter().enumerate() {
                    holds[u] = doc_hit[d as usize];
                }
            }
            for u in 0..units {
                match clause.polarity {
                    Polarity::Must => must[u] &= holds[u],
                    Polarity::MustNot => must[u] &= !holds[u],
                    Polarity::Should => should[u] |= holds[u],
                }
            }
        }
        let mut allowed = vec![false; self.len()];
        let mut docs = BTreeSet::new();
        for u in 0..units {
            if must[u] && (!has_should || should[u]) {
                for &s in &t.unit_sentences[u] {
                    allowed[s as usize] = true;
                }
                docs.insert(t.doc_ids[t.unit_doc[u] as usize].clone());
            }
        }
        ContextFilter { allowed, docs }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut corpus_jsonl = Vec::new();
        self.corpus.write_jsonl(&mut corpus_jsonl).expect("writing to memory cannot fail");
        let payload = bincode::serialize(&(&self.tables, &corpus_jsonl)).expect("index tables serialize");
        let mut out = Vec::with_capacity(payload.len() + 52);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&Sha256::digest(&payload));
        out.extend_from_slice(&payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Index, IndexError> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(IndexError::BadMagic);
        }
        let header = bytes.get(8..52).ok_or_else(|| IndexError::Corrupt("truncated header".into()))?;
        let found = u32::from_le_bytes(header[..4].try_into().expect("4 bytes"));
        if found != FORMAT_VERSION {
            return Err(IndexError::VersionMismatch { found, expected: FORMAT_VERSION });
        }
        let len = u64::from_le_bytes(header[4..12].try_into().expect("8 bytes")) as usize;
        let payload = &bytes[52..];
        if payload.len() != len {
            return Err(IndexError::Corrupt(format!("payload is {} bytes, header says {len}", payload.len())));
        }
        if Sha256::digest(payload).as_slice() != &header[12..44] {
            return Err(IndexError::Corrupt("checksum mismatch".into()));
        }
        let (tables, corpus_jsonl): (Tables, Vec<u8>) =
            bincode::deserialize(payload).map_err(|e| IndexError::Corrupt(e.to_string()))?;
        let corpus = Corpus::from_reader(corpus_jsonl.as_slice())
            .map_err(|e: CorpusError| IndexError::Corrupt(format!("embedded corpus: {e}")))?;
        if corpus.sentences.len() != tables.sent_doc.len() {
            return Err(IndexError::Corrupt("sentence count disagrees with tables".into()));
        }
        Ok(Index { corpus, tables })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Index, IndexError> {
        Self::from_bytes(&fs::read(path)?)
    }
}
