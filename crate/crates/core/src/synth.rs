//! Random annotated corpora and random queries over them, for equivalence
//! testing and latency measurement.
//!
//! Corpora use a generated vocabulary with a Zipf-like frequency profile,
//! random dependency trees with a sprinkling of enhanced edges, entity
//! mentions of one to three tokens, and document metadata covering every
//! context field. Query generators draw most of their values from the corpus
//! so that a useful share of queries match.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::corpus::{AnnotatedSentence, Corpus, DocumentMeta, Edge, EntityTag, Token};
use crate::qbe::{GraphEdge, GraphNode, QueryGraph};
use crate::query::{
    analyze, BooleanQuery, ContextClause, ContextField, ContextQuery, ContextValue, Element, Field, FieldConstraint,
    Polarity, Quantifier, SequentialQuery, Term, TermConstraint,
};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub sentences: usize,
    /// Number of distinct content lemmas.
    pub vocab: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub max_sentences_per_doc: usize,
}

impl SynthConfig {
    /// Short sentences over a small vocabulary: dense matches, cheap oracles.
    pub fn small(sentences: usize) -> Self {
        SynthConfig { sentences, vocab: 24, min_len: 3, max_len: 10, max_sentences_per_doc: 6 }
    }

    /// Longer sentences over a large vocabulary, closer to real text.
    pub fn large(sentences: usize) -> Self {
        SynthConfig { sentences, vocab: 20_000, min_len: 8, max_len: 30, max_sentences_per_doc: 12 }
    }
}

const SYLLABLE_ONSETS: &[u8] = b"bdfgklmnprstvz";
const SYLLABLE_VOWELS: &[u8] = b"aeiou";
const ENTITY_LABELS: &[&str] = &["DISEASE", "SIMPLE_CHEMICAL", "GENE_OR_GENE_PRODUCT"];
const DETERMINERS: &[&str] = &["the", "a", "this"];
const PREPOSITIONS: &[&str] = &["of", "in", "for", "with"];
const TOPICS: &[&str] = &["cancer", "coronavirus", "stroke", "infection", "children", "risk", "novel", "corona-like"];
const AUTHORS: &[&str] = &["Smith J", "Okafor A", "Li X", "García M", "Smithson K", "Nakamura T", "van Dijk P"];
const VENUES: &[&str] = &["Stroke", "STROKE", "J Biol Chem", "Lancet", "Pediatrics", "Cell Rep", ""];
const MESH: &[&str] = &["Age Distribution", "Child", "Infant", "Adult", "Humans", "Risk Factors", ""];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pos {
    Noun,
    Adj,
    Verb,
}

fn syllable(i: usize) -> String {
    let c = SYLLABLE_ONSETS[i % SYLLABLE_ONSETS.len()] as char;
    let v = SYLLABLE_VOWELS[(i / SYLLABLE_ONSETS.len()) % SYLLABLE_VOWELS.len()] as char;
    format!("{c}{v}")
}

/// The `i`-th content lemma; distinct for distinct `i`.
pub fn lemma_of(i: usize) -> String {
    let n = SYLLABLE_ONSETS.len() * SYLLABLE_VOWELS.len();
    let mut s = syllable(i % n) + &syllable((i / n) % n);
    if i >= n * n {
        s += &syllable(i / (n * n));
    }
    s
}

fn pos_of(i: usize) -> Pos {
    match i % 10 {
        0..=4 => Pos::Noun,
        5 | 6 => Pos::Adj,
        _ => Pos::Verb,
    }
}

/// Log-uniform rank in `0..n`: rank `r` has probability roughly
/// proportional to `1 / (r + 1)`.
fn zipf(rng: &mut impl Rng, n: usize) -> usize {
    let r = (n as f64 + 1.0).powf(rng.gen::<f64>()) as usize;
    r.saturating_sub(1).min(n - 1)
}

struct Draft {
    word: String,
    lemma: String,
    tag: &'static str,
}

fn draft_tokens(rng: &mut impl Rng, cfg: &SynthConfig) -> Vec<Draft> {
    let len = rng.gen_range(cfg.min_len..=cfg.max_len);
    let mut out = Vec::with_capacity(len + 1);
    for _ in 0..len {
        let roll = rng.gen::<f64>();
        let d = if roll < 0.14 {
            let w = *DETERMINERS.choose(rng).unwrap();
            Draft { word: w.into(), lemma: w.into(), tag: "DT" }
        } else if roll < 0.22 {
            let w = *PREPOSITIONS.choose(rng).unwrap();
            Draft { word: w.into(), lemma: w.into(), tag: "IN" }
        } else if roll < 0.26 {
            Draft { word: "and".into(), lemma: "and".into(), tag: "CC" }
        } else if roll < 0.30 {
            Draft { word: ",".into(), lemma: ",".into(), tag: "," }
        } else {
            // Pick a content lemma of the requested part of speech.
            let want = if roll < 0.62 {
                Pos::Noun
            } else if roll < 0.80 {
                Pos::Adj
            } else {
                Pos::Verb
            };
            let mut i = zipf(rng, cfg.vocab);
            while pos_of(i) != want {
                i = (i + 1) % cfg.vocab.max(10);
            }
            let lemma = lemma_of(i);
            match want {
                Pos::Noun if rng.gen_bool(0.3) => Draft { word: format!("{lemma}s"), lemma, tag: "NNS" },
                Pos::Noun => Draft { word: lemma.clone(), lemma, tag: "NN" },
                Pos::Adj => Draft { word: lemma.clone(), lemma, tag: "JJ" },
                Pos::Verb if rng.gen_bool(0.5) => Draft { word: format!("{lemma}s"), lemma, tag: "VBZ" },
                Pos::Verb => Draft { word: lemma.clone(), lemma, tag: "VB" },
            }
        };
        out.push(d);
    }
    if rng.gen_bool(0.7) {
        out.push(Draft { word: ".".into(), lemma: ".".into(), tag: "." });
    }
    if let Some(first) = out.first_mut() {
        let mut cs = first.word.chars();
        if let Some(c) = cs.next() {
            first.word = c.to_uppercase().chain(cs).collect();
        }
    }
    for d in out.iter_mut().skip(1) {
        if rng.gen_bool(0.03) {
            d.word = d.word.to_uppercase();
        }
    }
    out
}

fn basic_label(rng: &mut impl Rng, tag: &str) -> &'static str {
    let pick = |rng: &mut _, xs: &[&'static str]| *xs.choose(rng).unwrap();
    match tag {
        "DT" => "det",
        "IN" => "case",
        "CC" => "cc",
        "," | "." => "punct",
        "JJ" => pick(rng, &["amod", "amod", "amod", "conj"]),
        "VB" | "VBZ" => pick(rng, &["advcl", "acl:relcl", "conj", "ccomp", "xcomp"]),
        _ => pick(rng, &["nsubj", "obj", "nmod", "nmod", "compound", "compound", "conj", "appos"]),
    }
}

/// Builds one random sentence with a valid basic tree.
pub fn sentence(rng: &mut impl Rng, cfg: &SynthConfig, sent_id: String, doc_id: String, paragraph_id: String) -> AnnotatedSentence {
    let drafts = draft_tokens(rng, cfg);
    let n = drafts.len();

    let mut text = String::new();
    let mut tokens = Vec::with_capacity(n);
    for (i, d) in drafts.iter().enumerate() {
        if i > 0 && !matches!(d.tag, "," | ".") {
            text.push(' ');
        }
        let start = text.chars().count();
        text.push_str(&d.word);
        tokens.push(Token {
            word: d.word.clone(),
            lemma: d.lemma.clone(),
            tag: d.tag.to_string(),
            entity: None,
            char_start: start,
            char_end: start + d.word.chars().count(),
        });
    }

    let mut i = 0;
    while i < n {
        let content = |t: &Token| matches!(t.tag.as_str(), "NN" | "NNS" | "JJ");
        if content(&tokens[i]) && rng.gen_bool(0.15) {
            let label = *ENTITY_LABELS.choose(rng).unwrap();
            tokens[i].entity = Some(EntityTag::begin(label));
            let mut j = i + 1;
            while j < n && j < i + 3 && content(&tokens[j]) && rng.gen_bool(0.5) {
                tokens[j].entity = Some(EntityTag::inside(label));
                j += 1;
            }
            i = j;
        } else {
            i += 1;
        }
    }

    let root = tokens.iter().position(|t| t.tag.starts_with("VB")).unwrap_or_else(|| rng.gen_range(0..n));
    let mut order: Vec<usize> = (0..n).filter(|&t| t != root).collect();
    order.shuffle(rng);
    let mut attached = vec![root];
    let mut heads = vec![None; n];
    let mut edges = Vec::with_capacity(n + n / 4);
    for &t in &order {
        let head = if rng.gen_bool(0.7) {
            *attached.iter().min_by_key(|&&a| (a.abs_diff(t), a)).unwrap()
        } else {
            *attached.choose(rng).unwrap()
        };
        heads[t] = Some(head);
        edges.push(Edge::new(head, t, basic_label(rng, &tokens[t].tag)));
        attached.push(t);
    }
    edges.shuffle(rng);
    if n > 2 {
        for (t, &basic) in heads.iter().enumerate() {
            let p = if t == root { 0.03 } else { 0.15 };
            if rng.gen_bool(p) {
                let head = rng.gen_range(0..n);
                if head != t && Some(head) != basic {
                    let label = *["nsubj", "obj", "conj", "nmod"].choose(rng).unwrap();
                    edges.push(Edge::new(head, t, label));
                }
            }
        }
    }

    AnnotatedSentence { sent_id, doc_id, paragraph_id, text, tokens, edges, root }
}

fn random_words(rng: &mut impl Rng, cfg: &SynthConfig, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.25) {
                TOPICS.choose(rng).unwrap().to_string()
            } else {
                lemma_of(zipf(rng, cfg.vocab))
            }
        })
        .collect()
}

/// A random corpus. Documents get between one and three paragraphs whose
/// text is the concatenation of their sentences.
pub fn corpus(rng: &mut impl Rng, cfg: &SynthConfig) -> Corpus {
    let mut documents = Vec::new();
    let mut sentences = Vec::with_capacity(cfg.sentences);
    let mut d = 0;
    while sentences.len() < cfg.sentences {
        let doc_id = format!("doc:{d}");
        d += 1;
        let count = rng.gen_range(1..=cfg.max_sentences_per_doc).min(cfg.sentences - sentences.len());
        let paragraphs = rng.gen_range(1..=3).min(count);
        let mut meta = DocumentMeta::new(doc_id.clone());
        let mut by_paragraph: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for i in 0..count {
            let pid = format!("p{}", i * paragraphs / count);
            let s = sentence(rng, cfg, format!("{doc_id}/s{i}"), doc_id.clone(), pid.clone());
            by_paragraph.entry(pid).or_default().push(s.text.clone());
            sentences.push(s);
        }
        meta.paragraphs = by_paragraph.into_iter().map(|(k, v)| (k, v.join(" "))).collect();
        if rng.gen_bool(0.9) {
            let n = rng.gen_range(2..=6);
            let words = random_words(rng, cfg, n);
            meta.title = words.join(" ");
            if let Some(c) = meta.title.get(..1) {
                meta.title = c.to_uppercase() + &meta.title[1..];
            }
        }
        let n = rng.gen_range(0..=12);
        meta.abstract_text = random_words(rng, cfg, n).join(" ");
        let n = rng.gen_range(0..=3);
        meta.authors = AUTHORS.choose_multiple(rng, n).map(|s| s.to_string()).collect();
        meta.venue = VENUES.choose(rng).unwrap().to_string();
        meta.year = rng.gen_bool(0.9).then(|| rng.gen_range(1995..=2021));
        let n = rng.gen_range(0..=3);
        meta.mesh = MESH.choose_multiple(rng, n).map(|s| s.to_string()).collect();
        documents.push(meta);
    }
    Corpus::new(documents, sentences).expect("generated corpus is valid")
}

/// Draws random queries whose values come mostly from one corpus.
pub struct QueryGen<'c> {
    corpus: &'c Corpus,
    tags: Vec<String>,
    labels: Vec<String>,
    edge_labels: Vec<String>,
    /// Require at least one content word or lemma in every query.
    pub anchored: bool,
}

impl<'c> QueryGen<'c> {
    pub fn new(corpus: &'c Corpus) -> Self {
        let mut tags = BTreeSet::new();
        let mut labels = BTreeSet::new();
        let mut edge_labels = BTreeSet::new();
        for s in &corpus.sentences {
            for t in &s.tokens {
                tags.insert(t.tag.clone());
                labels.extend(t.entity_label().map(str::to_string));
            }
            edge_labels.extend(s.edges.iter().map(|e| e.label.clone()));
        }
        QueryGen {
            corpus,
            tags: tags.into_iter().collect(),
            labels: labels.into_iter().collect(),
            edge_labels: edge_labels.into_iter().collect(),
            anchored: false,
        }
    }

    fn token(&self, rng: &mut impl Rng) -> &'c Token {
        let s = self.corpus.sentences.choose(rng).expect("corpus has sentences");
        s.tokens.choose(rng).expect("sentence has tokens")
    }

    fn content_token(&self, rng: &mut impl Rng) -> &'c Token {
        for _ in 0..64 {
            let t = self.token(rng);
            if matches!(t.tag.as_str(), "NN" | "NNS" | "JJ" | "VB" | "VBZ") {
                return t;
            }
        }
        self.token(rng)
    }

    fn field_value(&self, rng: &mut impl Rng, field: Field, tok: &Token) -> String {
        if rng.gen_bool(0.1) {
            return match field {
                Field::Word | Field::Lemma => lemma_of(rng.gen_range(0..200)),
                Field::Tag => self.tags.choose(rng).cloned().unwrap_or_else(|| "NN".into()),
                Field::Entity => self.labels.choose(rng).cloned().unwrap_or_else(|| "DISEASE".into()),
            };
        }
        match field {
            Field::Word => tok.word.clone(),
            Field::Lemma => tok.lemma.clone(),
            Field::Tag => tok.tag.clone(),
            Field::Entity => tok
                .entity_label()
                .map(str::to_string)
                .or_else(|| self.labels.choose(rng).cloned())
                .unwrap_or_else(|| "DISEASE".into()),
        }
    }

    fn field_constraint(&self, rng: &mut impl Rng, field: Field, tok: &Token) -> FieldConstraint {
        if rng.gen_bool(0.12) {
            let pattern = match field {
                Field::Word | Field::Lemma => {
                    let v = self.field_value(rng, field, tok);
                    let head: String = v.chars().take(2).collect();
                    format!("{}.*", regex::escape(&head))
                }
                Field::Tag => "NN.*|JJ".into(),
                Field::Entity => "D.*|S.*".into(),
            };
            return FieldConstraint::regex(field, pattern);
        }
        let mut values = vec![self.field_value(rng, field, tok)];
        if rng.gen_bool(0.25) {
            let other = self.token(rng);
            values.push(self.field_value(rng, field, other));
        }
        FieldConstraint::exact(field, values)
    }

    /// A constraint drawn from one token: one or two distinct fields.
    pub fn term_constraint(&self, rng: &mut impl Rng, anchor: bool) -> TermConstraint {
        let tok = if anchor { self.content_token(rng) } else { self.token(rng) };
        let first = if anchor {
            *[Field::Word, Field::Lemma].choose(rng).unwrap()
        } else {
            *[Field::Word, Field::Word, Field::Lemma, Field::Tag, Field::Entity].choose(rng).unwrap()
        };
        let mut conjuncts = vec![if anchor {
            let value = if first == Field::Word { tok.word.clone() } else { tok.lemma.clone() };
            FieldConstraint::exact(first, [value])
        } else {
            self.field_constraint(rng, first, tok)
        }];
        if rng.gen_bool(0.2) {
            let second = *Field::ALL.iter().filter(|f| **f != first).collect::<Vec<_>>().choose(rng).unwrap();
            conjuncts.push(self.field_constraint(rng, *second, tok));
        }
        TermConstraint::new(conjuncts)
    }

    fn maybe_context(&self, rng: &mut impl Rng) -> Option<ContextQuery> {
        rng.gen_bool(0.2).then(|| self.context(rng))
    }

    pub fn boolean(&self, rng: &mut impl Rng) -> BooleanQuery {
        let n = rng.gen_range(1..=3);
        let anchor_at = if self.anchored { Some(rng.gen_range(0..n)) } else { None };
        let mut terms: Vec<Term> = (0..n)
            .map(|i| {
                let mut t = Term::new(self.term_constraint(rng, anchor_at == Some(i)));
                t.optional = anchor_at != Some(i) && rng.gen_bool(0.2);
                if rng.gen_bool(0.5) {
                    t.capture = Some(format!("c{i}"));
                    t.expand = rng.gen_bool(0.3);
                }
                t
            })
            .collect();
        if terms.iter().all(|t| t.optional) {
            terms[0].optional = false;
        }
        BooleanQuery { terms, context: self.maybe_context(rng) }
    }

    pub fn sequential(&self, rng: &mut impl Rng) -> SequentialQuery {
        let n = rng.gen_range(1..=4);
        let anchor_at = if self.anchored { Some(rng.gen_range(0..n)) } else { None };
        let mut elements = Vec::with_capacity(n);
        for i in 0..n {
            let capture = rng.gen_bool(0.4).then(|| format!("c{i}"));
            let boundary = i == 0 || i + 1 == n;
            let roll = rng.gen::<f64>();
            let e = if anchor_at == Some(i) || roll < 0.55 || (boundary && roll < 0.8) {
                let mut t = Term::new(self.term_constraint(rng, anchor_at == Some(i)));
                t.optional = anchor_at != Some(i) && rng.gen_bool(0.15);
                t.expand = capture.is_some() && rng.gen_bool(0.3);
                t.capture = capture;
                Element::Term(t)
            } else if roll < 0.65 {
                Element::Wildcard { capture }
            } else if roll < 0.8 && !boundary {
                let min = rng.gen_range(0..=2);
                let max = rng.gen_bool(0.7).then(|| min + rng.gen_range(0..=3));
                Element::Gap { min, max, capture }
            } else {
                let quantifier = match rng.gen_range(0..4) {
                    0 => Quantifier::Star,
                    1 => Quantifier::Plus,
                    2 => Quantifier::Question,
                    _ => {
                        let lo = rng.gen_range(0..=2);
                        Quantifier::Range(lo, lo + rng.gen_range(0..=2))
                    }
                };
                Element::Repetition { constraint: self.term_constraint(rng, false), quantifier, capture }
            };
            elements.push(e);
        }
        let required = elements.iter().any(|e| match e {
            Element::Term(t) => !t.optional,
            Element::Wildcard { .. } => true,
            _ => false,
        });
        if !required {
            elements.push(Element::Term(Term::new(self.term_constraint(rng, false))));
        }
        SequentialQuery { elements, context: self.maybe_context(rng) }
    }

    /// A connected subgraph of a random sentence's parse, with node
    /// constraints taken from its tokens. Some queries get a foreign edge
    /// label so that they rarely match.
    pub fn syntactic(&self, rng: &mut impl Rng) -> QueryGraph {
        let sentence = loop {
            let s = self.corpus.sentences.choose(rng).expect("corpus has sentences");
            if s.tokens.len() >= 2 || rng.gen_bool(0.1) {
                break s;
            }
        };
        let n = sentence.tokens.len();
        let k = rng.gen_range(1..=4).min(n);
        let heads = sentence.basic_heads();
        let mut chosen = vec![rng.gen_range(0..n)];
        while chosen.len() < k {
            let frontier: Vec<usize> = (0..n)
                .filter(|t| !chosen.contains(t))
                .filter(|&t| chosen.iter().any(|&c| heads[t] == Some(c) || heads[c] == Some(t)))
                .collect();
            match frontier.choose(rng) {
                Some(&t) => chosen.push(t),
                None => break,
            }
        }
        chosen.sort_unstable();
        let at = |t: usize| chosen.iter().position(|&c| c == t);

        let mut edges = Vec::new();
        let mut basic = vec![false; n];
        for e in &sentence.edges {
            let (Some(from), Some(to)) = (at(e.head), at(e.dependent)) else { continue };
            let is_basic = e.dependent != sentence.root && !basic[e.dependent];
            if is_basic {
                basic[e.dependent] = true;
            }
            if is_basic || rng.gen_bool(0.5) {
                edges.push(GraphEdge { from, to, label: e.label.clone() });
            }
        }
        if rng.gen_bool(0.1) {
            if let Some(e) = edges.choose_mut(rng) {
                e.label = self.edge_labels.choose(rng).unwrap().clone();
            }
        }

        let anchor_at = if self.anchored { Some(rng.gen_range(0..chosen.len())) } else { None };
        let nodes = chosen
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let tok = &sentence.tokens[t];
                let constraint = if anchor_at == Some(i) {
                    Some(TermConstraint::word(tok.word.to_lowercase()))
                } else if rng.gen_bool(0.35) {
                    None
                } else {
                    let field = *[Field::Word, Field::Lemma, Field::Tag, Field::Tag, Field::Entity].choose(rng).unwrap();
                    Some(TermConstraint::single(self.field_constraint(rng, field, tok)))
                };
                let capture = rng.gen_bool(0.5).then(|| format!("c{i}"));
                GraphNode {
                    constraint,
                    expand: capture.is_some() && rng.gen_bool(0.3),
                    capture,
                    example: tok.word.clone(),
                }
            })
            .collect();
        QueryGraph { nodes, edges, context: self.maybe_context(rng) }
    }

    /// Query-by-example markup over a random sentence: one to three words
    /// marked as anchors or captures, the rest scaffolding. Returns the
    /// markup with the sentence it was written against.
    pub fn markup(&self, rng: &mut impl Rng) -> (String, &'c AnnotatedSentence) {
        let sentence = self.corpus.sentences.choose(rng).expect("corpus has sentences");
        let n = sentence.tokens.len();
        let mut picks: Vec<usize> = (0..n).filter(|&t| sentence.tokens[t].tag != "," && sentence.tokens[t].tag != ".").collect();
        picks.shuffle(rng);
        picks.truncate(rng.gen_range(1..=3));
        let mut out = String::new();
        let mut prev_end = 0;
        let chars: Vec<char> = sentence.text.chars().collect();
        for (t, tok) in sentence.tokens.iter().enumerate() {
            out.extend(&chars[prev_end..tok.char_start]);
            if let Some(k) = picks.iter().position(|&p| p == t) {
                let field = *["", "", "[w]", "[l]", "[t]"].choose(rng).unwrap();
                if rng.gen_bool(0.5) {
                    out.push('$');
                } else {
                    if rng.gen_bool(0.3) {
                        out.push_str("<>");
                    }
                    out.push_str(&format!("m{k}:"));
                }
                if tok.entity.is_some() && rng.gen_bool(0.5) {
                    out.push_str("[e]");
                } else {
                    out.push_str(field);
                }
            }
            out.extend(&chars[tok.char_start..tok.char_end]);
            prev_end = tok.char_end;
        }
        out.extend(&chars[prev_end..]);
        (out, sentence)
    }

    fn text_value(&self, rng: &mut impl Rng, field: ContextField) -> ContextValue {
        let doc = self.doc(rng);
        let text = match field {
            ContextField::Title => doc.title.clone(),
            ContextField::Abstract => doc.abstract_text.clone(),
            ContextField::Authors => doc.authors.join(" "),
            _ => doc.paragraphs.values().next().cloned().unwrap_or_default(),
        };
        let words = analyze(&text);
        let word = words.choose(rng).cloned().unwrap_or_else(|| TOPICS.choose(rng).unwrap().to_string());
        match rng.gen_range(0..10) {
            0..=3 => ContextValue::Term(word),
            4 | 5 if words.len() >= 2 => {
                let i = rng.gen_range(0..words.len() - 1);
                ContextValue::Phrase(format!("{} {}", words[i], words[i + 1]))
            }
            6 | 7 => ContextValue::Prefix(word.chars().take(rng.gen_range(1..=3)).collect()),
            8 => ContextValue::Regex(format!("{}.*", regex::escape(&word.chars().take(2).collect::<String>()))),
            _ => ContextValue::Term(TOPICS.choose(rng).unwrap().to_string()),
        }
    }

    fn keyword_value(&self, rng: &mut impl Rng, field: ContextField) -> ContextValue {
        let pool: &[&str] = if field == ContextField::Venue { VENUES } else { MESH };
        let v = pool.iter().filter(|v| !v.is_empty()).collect::<Vec<_>>().choose(rng).unwrap().to_string();
        let v = if rng.gen_bool(0.3) { v.to_lowercase() } else { v };
        match rng.gen_range(0..6) {
            0..=2 if v.contains(' ') => ContextValue::Phrase(v),
            0..=2 => ContextValue::Term(v),
            3 => ContextValue::Prefix(v.chars().take_while(|c| !c.is_whitespace()).take(2).collect::<String>().to_lowercase()),
            4 => ContextValue::Regex(format!("{}.*", regex::escape(&v.chars().take(3).collect::<String>()))),
            _ => ContextValue::Phrase(v),
        }
    }

    fn doc(&self, rng: &mut impl Rng) -> &'c DocumentMeta {
        let i = rng.gen_range(0..self.corpus.documents.len());
        self.corpus.documents.values().nth(i).expect("in range")
    }

    pub fn context_clause(&self, rng: &mut impl Rng) -> ContextClause {
        let polarity = *[Polarity::Must, Polarity::Must, Polarity::Should, Polarity::Should, Polarity::MustNot]
            .choose(rng)
            .unwrap();
        let field = *ContextField::ALL.choose(rng).unwrap();
        let value = match field {
            ContextField::Year => {
                if rng.gen_bool(0.4) {
                    ContextValue::Term(rng.gen_range(1995..=2021).to_string())
                } else {
                    let lo = rng.gen_range(1993..=2021);
                    ContextValue::Range(lo, lo + rng.gen_range(0..=10))
                }
            }
            f if f.is_keyword() => self.keyword_value(rng, f),
            f => self.text_value(rng, f),
        };
        ContextClause { polarity, field, value }
    }

    pub fn context(&self, rng: &mut impl Rng) -> ContextQuery {
        let n = rng.gen_range(1..=4);
        ContextQuery { clauses: (0..n).map(|_| self.context_clause(rng)).collect() }
    }
}
