//! Query evaluation over an [`Index`].
//!
//! Each mode reduces a sentence to a set of capture tuples: one
//! `Option<(start, end)>` per capture name, in sorted-name order, with
//! inclusive token bounds. Tuples are deduplicated, ordered (absent before
//! present, then by position) and capped per sentence; a sentence whose
//! tuple set exceeds the cap is reported as truncated.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::AnnotatedSentence;
use crate::index::Index;
use crate::qbe::QueryGraph;
use crate::query::{BooleanQuery, CompiledTerm, ContextQuery, Element, SequentialQuery, TermConstraint};

/// Relations whose subtrees are left out of an expansion.
pub const DEFAULT_BLOCKLIST: &[&str] = &["conj", "cc", "appos", "punct", "acl", "acl:relcl", "relcl", "advcl"];

pub const DEFAULT_CAP: usize = 64;

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Maximum matches kept per sentence.
    pub cap: usize,
    pub blocklist: Vec<String>,
    /// Restrict evaluation to index candidates. Turning this off evaluates
    /// every sentence and exists for comparison.
    pub use_index: bool,
    /// Sentences evaluated per parallel batch.
    pub chunk_size: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cap: DEFAULT_CAP,
            blocklist: DEFAULT_BLOCKLIST.iter().map(|s| s.to_string()).collect(),
            use_index: true,
            chunk_size: 2048,
        }
    }
}

/// Whether a relation is blocked, either by exact label or by its base name
/// before `:`.
pub fn is_blocked(label: &str, blocklist: &[String]) -> bool {
    let base = label.split(':').next().unwrap_or(label);
    blocklist.iter().any(|b| b == label || b == base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Boolean,
    Sequential,
    Syntactic,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Boolean => "boolean",
            Mode::Sequential => "sequential",
            Mode::Syntactic => "syntactic",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "boolean" => Ok(Mode::Boolean),
            "sequential" => Ok(Mode::Sequential),
            "syntactic" => Ok(Mode::Syntactic),
            _ => Err(format!("unknown mode `{s}` (expected boolean, sequential or syntactic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Boolean(BooleanQuery),
    Sequential(SequentialQuery),
    Syntactic(QueryGraph),
}

impl Query {
    pub fn mode(&self) -> Mode {
        match self {
            Query::Boolean(_) => Mode::Boolean,
            Query::Sequential(_) => Mode::Sequential,
            Query::Syntactic(_) => Mode::Syntactic,
        }
    }

    pub fn context(&self) -> Option<&ContextQuery> {
        match self {
            Query::Boolean(q) => q.context.as_ref(),
            Query::Sequential(q) => q.context.as_ref(),
            Query::Syntactic(g) => g.context.as_ref(),
        }
    }

    pub fn context_mut(&mut self) -> &mut Option<ContextQuery> {
        match self {
            Query::Boolean(q) => &mut q.context,
            Query::Sequential(q) => &mut q.context,
            Query::Syntactic(g) => &mut g.context,
        }
    }

    /// Capture names in tuple order.
    pub fn capture_names(&self) -> Vec<String> {
        match self {
            Query::Boolean(q) => q.capture_names(),
            Query::Sequential(q) => q.capture_names(),
            Query::Syntactic(g) => g.capture_names(),
        }
    }
}

/// A captured span: inclusive token bounds, character offsets into the
/// sentence text, and the covered text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub token_start: usize,
    pub token_end: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl Span {
    pub fn new(sentence: &AnnotatedSentence, start: usize, end: usize) -> Span {
        Span {
            token_start: start,
            token_end: end,
            char_start: sentence.tokens[start].char_start,
            char_end: sentence.tokens[end].char_end,
            text: sentence.token_text(start, end),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceRef {
    pub ordinal: u32,
    pub doc_id: String,
    pub sent_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Match {
    pub sentence: SentenceRef,
    pub mode: Mode,
    pub captures: BTreeMap<String, Span>,
}

pub type Range = (usize, usize);
pub type Tuple = Vec<Option<Range>>;

/// Sorted, deduplicated tuples of one sentence, cut at the cap.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SentenceTuples {
    pub tuples: Vec<Tuple>,
    pub truncated: bool,
}

impl SentenceTuples {
    fn from_set(set: BTreeSet<Tuple>, cap: usize) -> Self {
        let truncated = set.len() > cap;
        SentenceTuples { tuples: set.into_iter().take(cap).collect(), truncated }
    }

    pub fn into_matches(self, ordinal: u32, sentence: &AnnotatedSentence, mode: Mode, names: &[String]) -> Vec<Match> {
        let sref = SentenceRef { ordinal, doc_id: sentence.doc_id.clone(), sent_id: sentence.sent_id.clone() };
        self.tuples
            .into_iter()
            .map(|t| Match {
                sentence: sref.clone(),
                mode,
                captures: names
                    .iter()
                    .zip(t)
                    .filter_map(|(n, r)| r.map(|(s, e)| (n.clone(), Span::new(sentence, s, e))))
                    .collect(),
            })
            .collect()
    }
}

/// Basic-tree children of each token, flagged when the relation is blocked.
struct Expander {
    children: Vec<Vec<(usize, bool)>>,
}

impl Expander {
    fn new(sentence: &AnnotatedSentence, blocklist: &[String]) -> Self {
        let mut children = vec![Vec::new(); sentence.tokens.len()];
        for i in sentence.basic_edge_indices() {
            let e = &sentence.edges[i];
            children[e.head].push((e.dependent, is_blocked(&e.label, blocklist)));
        }
        Expander { children }
    }

    fn expand_token(&self, token: usize) -> Range {
        let n = self.children.len();
        let mut inside = vec![false; n];
        inside[token] = true;
        let mut stack = vec![token];
        while let Some(u) = stack.pop() {
            for &(c, blocked) in &self.children[u] {
                if !blocked && !inside[c] {
                    inside[c] = true;
                    stack.push(c);
                }
            }
        }
        let mut start = token;
        while start > 0 && inside[start - 1] {
            start -= 1;
        }
        let mut end = token;
        while end + 1 < n && inside[end + 1] {
            end += 1;
        }
        (start, end)
    }

    fn expand(&self, (start, end): Range) -> Range {
        (start..=end).map(|t| self.expand_token(t)).fold((start, end), |(a, b), (s, e)| (a.min(s), b.max(e)))
    }
}

/// Expands a token to its phrase: the contiguous run of unblocked basic-tree
/// descendants containing it.
pub fn expand_capture(sentence: &AnnotatedSentence, token: usize, blocklist: &[String]) -> Span {
    let (s, e) = Expander::new(sentence, blocklist).expand_token(token);
    Span::new(sentence, s, e)
}

/// Per-sentence state shared by the captures of one evaluation.
struct SentenceCtx<'s> {
    sentence: &'s AnnotatedSentence,
    blocklist: &'s [String],
    expander: Option<Expander>,
}

impl<'s> SentenceCtx<'s> {
    fn new(sentence: &'s AnnotatedSentence, blocklist: &'s [String]) -> Self {
        SentenceCtx { sentence, blocklist, expander: None }
    }

    /// Widens to the mention when `entity` and then expands when `expand`.
    fn capture_range(&mut self, token: usize, entity: bool, expand: bool) -> Range {
        let r = if entity { self.sentence.mention_span(token).unwrap_or((token, token)) } else { (token, token) };
        self.finish(r, expand)
    }

    fn finish(&mut self, r: Range, expand: bool) -> Range {
        if !expand {
            return r;
        }
        let (sentence, blocklist) = (self.sentence, self.blocklist);
        self.expander.get_or_insert_with(|| Expander::new(sentence, blocklist)).expand(r)
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid regex: {0}")]
    BadRegex(#[from] regex::Error),
    #[error("invalid query graph: {0}")]
    InvalidGraph(String),
}

struct PTerm {
    compiled: CompiledTerm,
    entity: bool,
    optional: bool,
    expand: bool,
    slot: Option<usize>,
}

enum PElement {
    Term(PTerm),
    Wildcard { slot: Option<usize> },
    Gap { min: usize, max: Option<usize>, slot: Option<usize> },
    Repetition { compiled: CompiledTerm, min: usize, max: Option<usize>, slot: Option<usize> },
}

struct PNode {
    compiled: Option<CompiledTerm>,
    entity: bool,
    expand: bool,
    slot: Option<usize>,
}

/// How a node is reached during syntactic search: from an already-placed
/// node through an edge, in the given direction.
struct Step {
    node: usize,
    via: Option<(usize, usize, bool)>,
}

enum Plan {
    Boolean(Vec<PTerm>),
    Sequential(Vec<PElement>),
    Syntactic { nodes: Vec<PNode>, edges: Vec<(usize, usize, String)>, order: Vec<Step> },
}

/// A query compiled for evaluation.
pub struct Prepared {
    mode: Mode,
    names: Vec<String>,
    plan: Plan,
    prefilter: Vec<TermConstraint>,
    edge_labels: Vec<String>,
    context: Option<ContextQuery>,
}

fn slot_of(names: &[String], capture: Option<&str>) -> Option<usize> {
    capture.map(|c| names.iter().position(|n| n == c).expect("capture listed in names"))
}

fn prepare_term(names: &[String], t: &crate::query::Term) -> Result<PTerm, EvalError> {
    let compiled = t.constraint.compile()?;
    Ok(PTerm {
        entity: compiled.constrains_entity(),
        compiled,
        optional: t.optional,
        expand: t.expand,
        slot: slot_of(names, t.capture.as_deref()),
    })
}

impl Prepared {
    pub fn new(query: &Query) -> Result<Prepared, EvalError> {
        let names = query.capture_names();
        let mut prefilter = Vec::new();
        let mut edge_labels = Vec::new();
        let plan = match query {
            Query::Boolean(q) => {
                let terms = q.terms.iter().map(|t| prepare_term(&names, t)).collect::<Result<Vec<_>, _>>()?;
                prefilter.extend(q.terms.iter().filter(|t| !t.optional).map(|t| t.constraint.clone()));
                Plan::Boolean(terms)
            }
            Query::Sequential(q) => {
                let mut elements = Vec::with_capacity(q.elements.len());
                for e in &q.elements {
                    elements.push(match e {
                        Element::Term(t) => {
                            if !t.optional {
                                prefilter.push(t.constraint.clone());
                            }
                            PElement::Term(prepare_term(&names, t)?)
                        }
                        Element::Wildcard { capture } => PElement::Wildcard { slot: slot_of(&names, capture.as_deref()) },
                        Element::Gap { min, max, capture } => PElement::Gap {
                            min: *min as usize,
                            max: max.map(|m| m as usize),
                            slot: slot_of(&names, capture.as_deref()),
                        },
                        Element::Repetition { constraint, quantifier, capture } => {
                            let (min, max) = quantifier.bounds();
                            if min > 0 {
                                prefilter.push(constraint.clone());
                            }
                            PElement::Repetition {
                                compiled: constraint.compile()?,
                                min,
                                max,
                                slot: slot_of(&names, capture.as_deref()),
                            }
                        }
                    });
                }
                Plan::Sequential(elements)
            }
            Query::Syntactic(g) => {
                g.validate().map_err(|e| EvalError::InvalidGraph(e.to_string()))?;
                let mut nodes = Vec::with_capacity(g.nodes.len());
                for n in &g.nodes {
                    let compiled = n.constraint.as_ref().map(TermConstraint::compile).transpose()?;
                    if let Some(c) = &n.constraint {
                        prefilter.push(c.clone());
                    }
                    nodes.push(PNode {
                        entity: compiled.as_ref().is_some_and(CompiledTerm::constrains_entity),
                        compiled,
                        expand: n.expand,
                        slot: slot_of(&names, n.capture.as_deref()),
                    });
                }
                let edges: Vec<(usize, usize, String)> = g.edges.iter().map(|e| (e.from, e.to, e.label.clone())).collect();
                edge_labels = edges.iter().map(|e| e.2.clone()).collect();
                edge_labels.sort();
                edge_labels.dedup();
                let order = search_order(g);
                Plan::Syntactic { nodes, edges, order }
            }
        };
        Ok(Prepared { mode: query.mode(), names, plan, prefilter, edge_labels, context: query.context().cloned() })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn capture_names(&self) -> &[String] {
        &self.names
    }

    /// Evaluates one sentence, ignoring any contextual restriction.
    pub fn eval_sentence(&self, sentence: &AnnotatedSentence, config: &EvalConfig) -> SentenceTuples {
        let mut ctx = SentenceCtx::new(sentence, &config.blocklist);
        match &self.plan {
            Plan::Boolean(terms) => eval_boolean(&mut ctx, terms, self.names.len(), config.cap),
            Plan::Sequential(elements) => {
                let mut out = BTreeSet::new();
                let mut tuple = vec![None; self.names.len()];
                for start in 0..=sentence.tokens.len() {
                    seq_step(&mut ctx, elements, 0, start, &mut tuple, &mut out);
                }
                SentenceTuples::from_set(out, config.cap)
            }
            Plan::Syntactic { nodes, edges, order } => {
                SentenceTuples::from_set(eval_graph(&mut ctx, nodes, edges, order, self.names.len()), config.cap)
            }
        }
    }

    /// Candidate sentence ordinals for this query, ascending.
    pub fn candidates(&self, index: &Index, config: &EvalConfig) -> Vec<u32> {
        let mut cands = if config.use_index {
            let mut c = index.candidates(&self.prefilter);
            for label in &self.edge_labels {
                let with = index.sentences_with_edge(label);
                c.retain(|s| with.binary_search(s).is_ok());
            }
            c
        } else {
            (0..index.len() as u32).collect()
        };
        if let Some(ctx) = &self.context {
            let filter = index.doc_filter(ctx);
            cands.retain(|&s| filter.allows(s));
        }
        cands
    }
}

/// Nodes in an order where each node after the first touches an earlier
/// one, starting from the most constrained node.
fn search_order(g: &QueryGraph) -> Vec<Step> {
    let score = |i: usize| match &g.nodes[i].constraint {
        Some(tc) => 1 + tc.conjuncts.len(),
        None => 0,
    };
    let start = (0..g.nodes.len()).max_by_key(|&i| (score(i), std::cmp::Reverse(i))).unwrap_or(0);
    let mut placed = vec![false; g.nodes.len()];
    placed[start] = true;
    let mut order = vec![Step { node: start, via: None }];
    while order.len() < g.nodes.len() {
        let next = g.edges.iter().enumerate().find_map(|(ei, e)| {
            if placed[e.from] && !placed[e.to] {
                Some(Step { node: e.to, via: Some((e.from, ei, true)) })
            } else if placed[e.to] && !placed[e.from] {
                Some(Step { node: e.from, via: Some((e.to, ei, false)) })
            } else {
                None
            }
        });
        let step = next.expect("validated graphs are connected");
        placed[step.node] = true;
        order.push(step);
    }
    order
}

/// Occurrences of a term: mention ranges for entity-constrained terms,
/// single tokens otherwise.
fn occurrences(sentence: &AnnotatedSentence, term: &PTerm) -> Vec<Range> {
    let mut out = Vec::new();
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if term.compiled.matches(tok) {
            let r = if term.entity { sentence.mention_span(i).unwrap_or((i, i)) } else { (i, i) };
            if out.last() != Some(&r) {
                out.push(r);
            }
        }
    }
    out
}

/// Kuhn's augmenting-path matching: can every term take a distinct token?
fn token_matching(options: &[Vec<usize>], n_tokens: usize) -> bool {
    fn augment(t: usize, options: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &tok in &options[t] {
            if seen[tok] {
                continue;
            }
            seen[tok] = true;
            if owner[tok].is_none_or(|o| augment(o, options, owner, seen)) {
                owner[tok] = Some(t);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; n_tokens];
    (0..options.len()).all(|t| augment(t, options, &mut owner, &mut vec![false; n_tokens]))
}

/// Whether required terms can take pairwise-disjoint occurrences. Mention
/// terms are assigned by backtracking; the remaining single-token terms
/// are then matched over the uncovered tokens.
fn assignable(mention_terms: &[&[Range]], token_terms: &[&[Range]], n_tokens: usize) -> bool {
    fn go(i: usize, mention_terms: &[&[Range]], token_terms: &[&[Range]], covered: &mut Vec<bool>, used: &mut Vec<Range>) -> bool {
        if i == mention_terms.len() {
            let options: Vec<Vec<usize>> = token_terms
                .iter()
                .map(|occ| occ.iter().map(|r| r.0).filter(|&t| !covered[t]).collect())
                .collect();
            return token_matching(&options, covered.len());
        }
        for &r in mention_terms[i] {
            if used.contains(&r) {
                continue;
            }
            used.push(r);
            covered[r.0..=r.1].fill(true);
            let ok = go(i + 1, mention_terms, token_terms, covered, used);
            covered[r.0..=r.1].fill(false);
            used.pop();
            if ok {
                return true;
            }
        }
        false
    }
    go(0, mention_terms, token_terms, &mut vec![false; n_tokens], &mut Vec::new())
}

fn eval_boolean(ctx: &mut SentenceCtx<'_>, terms: &[PTerm], n_slots: usize, cap: usize) -> SentenceTuples {
    let occ: Vec<Vec<Range>> = terms.iter().map(|t| occurrences(ctx.sentence, t)).collect();
    let required = || terms.iter().zip(&occ).filter(|(t, _)| !t.optional);
    if required().any(|(_, o)| o.is_empty()) {
        return SentenceTuples::default();
    }
    let mention_terms: Vec<&[Range]> = required().filter(|(t, _)| t.entity).map(|(_, o)| o.as_slice()).collect();
    let token_terms: Vec<&[Range]> = required().filter(|(t, _)| !t.entity).map(|(_, o)| o.as_slice()).collect();
    if !assignable(&mention_terms, &token_terms, ctx.sentence.tokens.len()) {
        return SentenceTuples::default();
    }

    let mut values: Vec<Vec<Option<Range>>> = vec![Vec::new(); n_slots];
    for (t, o) in terms.iter().zip(&occ) {
        let Some(slot) = t.slot else { continue };
        let set: BTreeSet<Option<Range>> = o.iter().map(|&r| Some(ctx.finish(r, t.expand))).collect();
        values[slot] = if set.is_empty() { vec![None] } else { set.into_iter().collect() };
    }

    // Odometer walk over the product of sorted lists, stopping at the cap.
    let mut tuples = Vec::new();
    let mut idx = vec![0usize; n_slots];
    loop {
        if tuples.len() == cap {
            return SentenceTuples { tuples, truncated: true };
        }
        tuples.push(idx.iter().zip(&values).map(|(&i, v)| v[i]).collect());
        let mut k = n_slots;
        loop {
            if k == 0 {
                return SentenceTuples { tuples, truncated: false };
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < values[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn set_slot(tuple: &mut Tuple, slot: Option<usize>, value: Option<Range>) -> Option<(usize, Option<Range>)> {
    slot.map(|s| (s, std::mem::replace(&mut tuple[s], value)))
}

fn restore(tuple: &mut Tuple, saved: Option<(usize, Option<Range>)>) {
    if let Some((s, v)) = saved {
        tuple[s] = v;
    }
}

fn seq_step(
    ctx: &mut SentenceCtx<'_>,
    elements: &[PElement],
    i: usize,
    pos: usize,
    tuple: &mut Tuple,
    out: &mut BTreeSet<Tuple>,
) {
    let Some(el) = elements.get(i) else {
        out.insert(tuple.clone());
        return;
    };
    let n = ctx.sentence.tokens.len();
    match el {
        PElement::Term(t) => {
            if pos < n && t.compiled.matches(&ctx.sentence.tokens[pos]) {
                let value = t.slot.map(|_| ctx.capture_range(pos, t.entity, t.expand));
                let saved = set_slot(tuple, t.slot, value);
                seq_step(ctx, elements, i + 1, pos + 1, tuple, out);
                restore(tuple, saved);
            } else if t.optional {
                let saved = set_slot(tuple, t.slot, None);
                seq_step(ctx, elements, i + 1, pos, tuple, out);
                restore(tuple, saved);
            }
        }
        PElement::Wildcard { slot } => {
            if pos < n {
                let saved = set_slot(tuple, *slot, Some((pos, pos)));
                seq_step(ctx, elements, i + 1, pos + 1, tuple, out);
                restore(tuple, saved);
            }
        }
        PElement::Gap { min, max, slot } => {
            let longest = max.map_or(n - pos, |m| m.min(n - pos));
            for k in *min..=longest {
                let saved = set_slot(tuple, *slot, (k > 0).then(|| (pos, pos + k - 1)));
                seq_step(ctx, elements, i + 1, pos + k, tuple, out);
                restore(tuple, saved);
            }
        }
        PElement::Repetition { compiled, min, max, slot } => {
            let mut k = 0;
            while pos + k < n && max.is_none_or(|m| k < m) && compiled.matches(&ctx.sentence.tokens[pos + k]) {
                k += 1;
            }
            if k >= *min {
                let saved = set_slot(tuple, *slot, (k > 0).then(|| (pos, pos + k - 1)));
                seq_step(ctx, elements, i + 1, pos + k, tuple, out);
                restore(tuple, saved);
            }
        }
    }
}

fn eval_graph(
    ctx: &mut SentenceCtx<'_>,
    nodes: &[PNode],
    edges: &[(usize, usize, String)],
    order: &[Step],
    n_slots: usize,
) -> BTreeSet<Tuple> {
    let sentence = ctx.sentence;
    let n = sentence.tokens.len();
    let mut out_edges: Vec<Vec<(usize, &str)>> = vec![Vec::new(); n];
    let mut in_edges: Vec<Vec<(usize, &str)>> = vec![Vec::new(); n];
    let mut edge_set: HashSet<(usize, usize, &str)> = HashSet::new();
    for e in &sentence.edges {
        out_edges[e.head].push((e.dependent, &e.label));
        in_edges[e.dependent].push((e.head, &e.label));
        edge_set.insert((e.head, e.dependent, &e.label));
    }
    let fits = |node: usize, tok: usize| nodes[node].compiled.as_ref().is_none_or(|c| c.matches(&sentence.tokens[tok]));

    let mut mappings: Vec<Vec<usize>> = Vec::new();
    let mut assign = vec![usize::MAX; nodes.len()];
    let mut used = vec![false; n];

    #[allow(clippy::too_many_arguments)]
    fn search(
        depth: usize,
        order: &[Step],
        edges: &[(usize, usize, String)],
        out_edges: &[Vec<(usize, &str)>],
        in_edges: &[Vec<(usize, &str)>],
        edge_set: &HashSet<(usize, usize, &str)>,
        fits: &dyn Fn(usize, usize) -> bool,
        assign: &mut Vec<usize>,
        used: &mut Vec<bool>,
        mappings: &mut Vec<Vec<usize>>,
    ) {
        let Some(step) = order.get(depth) else {
            mappings.push(assign.clone());
            return;
        };
        let candidates: Vec<usize> = match step.via {
            None => (0..used.len()).collect(),
            Some((from, ei, forward)) => {
                let label = edges[ei].2.as_str();
                let list = if forward { &out_edges[assign[from]] } else { &in_edges[assign[from]] };
                let mut c: Vec<usize> = list.iter().filter(|(_, l)| *l == label).map(|(t, _)| *t).collect();
                c.sort_unstable();
                c.dedup();
                c
            }
        };
        for tok in candidates {
            if used[tok] || !fits(step.node, tok) {
                continue;
            }
            assign[step.node] = tok;
            let consistent = edges.iter().all(|(f, t, l)| {
                let (a, b) = (assign[*f], assign[*t]);
                a == usize::MAX || b == usize::MAX || edge_set.contains(&(a, b, l.as_str()))
            });
            if consistent {
                used[tok] = true;
                search(depth + 1, order, edges, out_edges, in_edges, edge_set, fits, assign, used, mappings);
                used[tok] = false;
            }
            assign[step.node] = usize::MAX;
        }
    }

    search(0, order, edges, &out_edges, &in_edges, &edge_set, &fits, &mut assign, &mut used, &mut mappings);

    let mut out = BTreeSet::new();
    for m in mappings {
        let mut tuple = vec![None; n_slots];
        for (node, &tok) in nodes.iter().zip(&m) {
            if let Some(slot) = node.slot {
                tuple[slot] = Some(ctx.capture_range(tok, node.entity, node.expand));
            }
        }
        out.insert(tuple);
    }
    out
}

/// Lazily evaluates a prepared query over its candidate sentences, in
/// ordinal order. Sentences are processed in parallel batches.
pub struct MatchStream<'a> {
    index: &'a Index,
    prepared: Prepared,
    config: EvalConfig,
    candidates: Vec<u32>,
    next_chunk: usize,
    buffer: std::collections::VecDeque<Match>,
    truncated: Vec<u32>,
    matched_sentences: usize,
}

impl<'a> MatchStream<'a> {
    pub fn new(index: &'a Index, prepared: Prepared, config: EvalConfig) -> Self {
        let candidates = prepared.candidates(index, &config);
        MatchStream {
            index,
            prepared,
            config,
            candidates,
            next_chunk: 0,
            buffer: Default::default(),
            truncated: Vec::new(),
            matched_sentences: 0,
        }
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn capture_names(&self) -> &[String] {
        self.prepared.capture_names()
    }

    /// Ordinals of sentences whose matches were cut at the cap so far.
    pub fn truncated(&self) -> &[u32] {
        &self.truncated
    }

    pub fn matched_sentences(&self) -> usize {
        self.matched_sentences
    }

    fn fill(&mut self) -> bool {
        let size = self.config.chunk_size.max(1);
        let start = self.next_chunk * size;
        if start >= self.candidates.len() {
            return false;
        }
        let end = (start + size).min(self.candidates.len());
        self.next_chunk += 1;
        let (index, prepared, config) = (self.index, &self.prepared, &self.config);
        let results: Vec<(u32, SentenceTuples)> = self.candidates[start..end]
            .par_iter()
            .map(|&s| (s, prepared.eval_sentence(index.sentence(s), config)))
            .collect();
        for (s, r) in results {
            if r.truncated {
                self.truncated.push(s);
            }
            if !r.tuples.is_empty() {
                self.matched_sentences += 1;
            }
            let mode = self.prepared.mode;
            self.buffer.extend(r.into_matches(s, index.sentence(s), mode, &self.prepared.names));
        }
        true
    }
}

impl Iterator for MatchStream<'_> {
    type Item = Match;

    fn next(&mut self) -> Option<Match> {
        loop {
            if let Some(m) = self.buffer.pop_front() {
                return Some(m);
            }
            if !self.fill() {
                return None;
            }
        }
    }
}

/// Collected result of an evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub capture_names: Vec<String>,
    pub matches: Vec<Match>,
    pub truncated: Vec<u32>,
    pub candidates: usize,
}

/// Evaluates queries against one index.
pub struct Evaluator<'a> {
    index: &'a Index,
    config: EvalConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(index: &'a Index) -> Self {
        Self::with_config(index, EvalConfig::default())
    }

    pub fn with_config(index: &'a Index, config: EvalConfig) -> Self {
        Evaluator { index, config }
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    pub fn stream(&self, query: &Query) -> Result<MatchStream<'a>, EvalError> {
        Ok(MatchStream::new(self.index, Prepared::new(query)?, self.config.clone()))
    }

    pub fn eval(&self, query: &Query) -> Result<Evaluation, EvalError> {
        let mut stream = self.stream(query)?;
        let matches: Vec<Match> = stream.by_ref().collect();
        Ok(Evaluation {
            capture_names: stream.capture_names().to_vec(),
            candidates: stream.candidate_count(),
            truncated: stream.truncated().to_vec(),
            matches,
        })
    }

    pub fn eval_boolean(&self, q: &BooleanQuery) -> Result<Evaluation, EvalError> {
        self.eval(&Query::Boolean(q.clone()))
    }

    pub fn eval_sequential(&self, q: &SequentialQuery) -> Result<Evaluation, EvalError> {
        self.eval(&Query::Sequential(q.clone()))
    }

    pub fn eval_syntactic(&self, g: &QueryGraph) -> Result<Evaluation, EvalError> {
        self.eval(&Query::Syntactic(g.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::load_corpus;
    use crate::qbe::{compile_markup, FixtureProvider};
    use crate::query::{parse_boolean, parse_sequential};

    fn fixture() -> Index {
        Index::build(load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl")).unwrap())
    }

    fn provider() -> FixtureProvider {
        FixtureProvider::load(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/parses.jsonl")).unwrap()
    }

    fn texts(eval: &Evaluation) -> Vec<BTreeMap<String, String>> {
        eval.matches.iter().map(|m| m.captures.iter().map(|(k, v)| (k.clone(), v.text.clone())).collect()).collect()
    }

    fn caps(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn phosphorylation_query_reproduces_both_bindings() {
        let idx = fixture();
        let g = compile_markup("<>p1:[e]BMP-6 $induces the $phosphorylation $of <>p2:Smad1", &provider()).unwrap();
        let eval = Evaluator::new(&idx).eval_syntactic(&g).unwrap();
        assert_eq!(
            texts(&eval),
            [caps(&[("p1", "ERK"), ("p2", "Elk-1")]), caps(&[("p1", "Thrombopoietin"), ("p2", "p80/85 cortactin")])]
        );
    }

    #[test]
    fn one_match_per_disease_mention() {
        let idx = fixture();
        let q = parse_boolean("fatal asymptomatic d:e=DISEASE").unwrap();
        let eval = Evaluator::new(&idx).eval_boolean(&q).unwrap();
        assert_eq!(texts(&eval), [caps(&[("d", "dengue fever")]), caps(&[("d", "malaria")])]);
    }

    #[test]
    fn missing_required_term_means_no_match() {
        let idx = fixture();
        let eval = Evaluator::new(&idx).eval_boolean(&parse_boolean("fatal zzz").unwrap()).unwrap();
        assert!(eval.matches.is_empty());
    }

    #[test]
    fn alias_gap_capture() {
        let idx = fixture();
        let q = parse_sequential("novel coronavirus ( alias:...1-2... )").unwrap();
        let eval = Evaluator::new(&idx).eval_sequential(&q).unwrap();
        assert_eq!(
            texts(&eval),
            [caps(&[("alias", "nCov-19")]), caps(&[("alias", "SARS-COV-ii")]), caps(&[("alias", "2019 nCoV")])]
        );
    }

    #[test]
    fn tag_capture_before_transmission() {
        let idx = fixture();
        let eval = Evaluator::new(&idx).eval_sequential(&parse_sequential("which:tag=NNS transmission").unwrap()).unwrap();
        assert_eq!(texts(&eval), [caps(&[("which", "diseases")])]);
        let eval = Evaluator::new(&idx)
            .eval_sequential(&parse_sequential("interspecies kind:...1-3... transmission").unwrap())
            .unwrap();
        assert_eq!(texts(&eval), [caps(&[("kind", "virus")])]);
    }

    #[test]
    fn expansion_examples() {
        let idx = fixture();
        let find = |id: &str| idx.sentences().iter().find(|s| s.sent_id == id).unwrap();
        let bl = EvalConfig::default().blocklist;
        let s17 = find("s17");
        let infection = s17.tokens.iter().position(|t| t.word == "infection").unwrap();
        assert_eq!(expand_capture(s17, infection, &bl).text, "a mild subclinical infection 9");
        let syndrome_s = idx.sentences().iter().find(|s| s.text.contains("Metabolic syndrome")).unwrap();
        let syndrome = syndrome_s.tokens.iter().position(|t| t.word == "syndrome").unwrap();
        assert_eq!(expand_capture(syndrome_s, syndrome, &bl).text, "Metabolic syndrome");
        let leaf = syndrome_s.tokens.iter().position(|t| t.word == "Metabolic").unwrap();
        assert_eq!(expand_capture(syndrome_s, leaf, &bl).text, "Metabolic");
    }

    #[test]
    fn blocked_subtypes() {
        let bl = EvalConfig::default().blocklist;
        assert!(is_blocked("acl:relcl", &bl));
        assert!(is_blocked("conj:and", &bl));
        assert!(!is_blocked("amod", &bl));
    }

    #[test]
    fn optional_capture_absent_when_unmatched() {
        let idx = fixture();
        let q = parse_boolean("r:e=DISEASE ?o:zzz").unwrap();
        let eval = Evaluator::new(&idx).eval_boolean(&q).unwrap();
        assert!(!eval.matches.is_empty());
        assert!(eval.matches.iter().all(|m| m.captures.contains_key("r") && !m.captures.contains_key("o")));
    }

    #[test]
    fn cap_truncates_and_flags() {
        let idx = fixture();
        let config = EvalConfig { cap: 1, ..EvalConfig::default() };
        let q = Query::Boolean(parse_boolean("fatal asymptomatic d:e=DISEASE").unwrap());
        let eval = Evaluator::with_config(&idx, config).eval(&q).unwrap();
        assert_eq!(eval.matches.len(), 1);
        assert_eq!(eval.truncated.len(), 1);
    }

    #[test]
    fn indexed_equals_full_scan_on_fixture() {
        let idx = fixture();
        let scan = EvalConfig { use_index: false, ..EvalConfig::default() };
        for q in ["d:e=DISEASE", "r:e=DISEASE risk factor", "x:tag=NN y:tag=NN", "?x:the y:lemma=be"] {
            let q = Query::Boolean(parse_boolean(q).unwrap());
            assert_eq!(Evaluator::new(&idx).eval(&q).unwrap().matches, Evaluator::with_config(&idx, scan.clone()).eval(&q).unwrap().matches);
        }
    }

    #[test]
    fn stream_order_is_deterministic_across_chunk_sizes() {
        let idx = fixture();
        let q = Query::Sequential(parse_sequential("x:tag=DT [tag=JJ]* y:[tag=NN|NNS]+").unwrap());
        let a = Evaluator::new(&idx).eval(&q).unwrap();
        let b = Evaluator::with_config(&idx, EvalConfig { chunk_size: 1, ..EvalConfig::default() }).eval(&q).unwrap();
        assert_eq!(a, b);
        assert!(!a.matches.is_empty());
    }
}
